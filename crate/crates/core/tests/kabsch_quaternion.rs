//! Superposition checked against Horn's closed-form quaternion solution.

use foldattack::structures::{kabsch, rmsd, superpose, AlignParams, Structure, Vec3};
use nalgebra::{Matrix3, Matrix4, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn centroid(p: &[Vec3]) -> Vec3 {
    p.iter().fold(Vec3::zeros(), |a, b| a + b) / p.len() as f64
}

/// Rotation and translation taking `mobile` onto `target`.
fn horn(target: &[Vec3], mobile: &[Vec3]) -> (Matrix3<f64>, Vec3) {
    let (ct, cm) = (centroid(target), centroid(mobile));
    let mut s = Matrix3::zeros();
    for (t, m) in target.iter().zip(mobile) {
        s += (m - cm) * (t - ct).transpose();
    }
    let (sxx, sxy, sxz) = (s[(0, 0)], s[(0, 1)], s[(0, 2)]);
    let (syx, syy, syz) = (s[(1, 0)], s[(1, 1)], s[(1, 2)]);
    let (szx, szy, szz) = (s[(2, 0)], s[(2, 1)], s[(2, 2)]);
    let n = Matrix4::new(
        sxx + syy + szz,
        syz - szy,
        szx - sxz,
        sxy - syx,
        syz - szy,
        sxx - syy - szz,
        sxy + syx,
        szx + sxz,
        szx - sxz,
        sxy + syx,
        -sxx + syy - szz,
        syz + szy,
        sxy - syx,
        szx + sxz,
        syz + szy,
        -sxx - syy + szz,
    );
    let eig = SymmetricEigen::new(n);
    let best = eig.eigenvalues.imax();
    let q = eig.eigenvectors.column(best);
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let r = Matrix3::new(
        w * w + x * x - y * y - z * z,
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        w * w - x * x + y * y - z * z,
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        w * w - x * x - y * y + z * z,
    );
    (r, ct - r * cm)
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
            )
        })
        .collect()
}

#[test]
fn kabsch_matches_quaternion_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let n = rng.gen_range(4..60);
        let target = random_points(&mut rng, n);
        let mobile: Vec<Vec3> = target
            .iter()
            .map(|p| {
                Vec3::new(p.z + 3.0, -p.x, p.y)
                    + Vec3::new(
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                    )
            })
            .collect();
        let (rh, th) = horn(&target, &mobile);
        let t = Structure::new("t", target.clone(), None).unwrap();
        let m = Structure::new("m", mobile.clone(), None).unwrap();

        let fit = kabsch(&t, &m).unwrap();
        assert!((fit.rotation - rh).abs().max() < 1e-9);
        assert!((fit.translation - th).abs().max() < 1e-9);

        let horn_aligned: Vec<Vec3> = mobile.iter().map(|p| rh * p + th).collect();
        let horn_rmsd = rmsd(&t, &Structure::new("h", horn_aligned, None).unwrap()).unwrap();
        let sup = superpose(
            &t,
            &m,
            &AlignParams {
                max_cycles: 0,
                ..AlignParams::default()
            },
        )
        .unwrap();
        assert!((sup.rmsd_all - horn_rmsd).abs() < 1e-9);
        assert!((fit.rotation.determinant() - 1.0).abs() < 1e-12);
    }
}
