//! End-to-end runs of the command-line entry point.

use std::path::{Path, PathBuf};

use foldattack::cli::{run, MANIFEST_FILE, OUTPUT_FILES};
use foldattack::oracle::{FoldingOracle, MockFolder};
use foldattack::report::split_csv_line;
use foldattack::sequences::{parse_fasta, Sequence};
use foldattack::structures::{write_pdb, RigidTransform, Structure};
use nalgebra::{Rotation3, Vector3};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("foldattack").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(split_csv_line)
        .collect()
}

fn attack(out_dir: &Path, extra: &[&str]) -> i32 {
    let fasta = fixture("three.fasta");
    let mut args = vec![
        "attack",
        "--fasta",
        fasta.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let (code, _, err) = invoke(&args);
    assert!(err.is_empty(), "{err}");
    code
}

#[test]
fn attack_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(attack(dir.path(), &["--samples", "5", "--seed", "3"]), 0);
    for f in OUTPUT_FILES.iter().chain([&MANIFEST_FILE]) {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let attack_rows = rows(&dir.path().join("attack.csv"));
    assert_eq!(attack_rows.len(), 3);
    assert!(attack_rows
        .iter()
        .all(|r| r.len() == 11 && r[10] == "ok" && r[9] == "NA"));
    assert_eq!(rows(&dir.path().join("confidence.csv")).len(), 3);
    assert_eq!(rows(&dir.path().join("regions.csv")).len(), 3);
    assert_eq!(rows(&dir.path().join("candidates.csv")).len(), 15);
    assert_eq!(rows(&dir.path().join("summary.csv")).len(), 1);
    assert_eq!(attack_rows[2][0], "gamma short helix bundle");
}

#[test]
fn empty_budget_gives_zero_rmsd() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        attack(dir.path(), &["--samples", "1", "--L", "0", "--H", "0"]),
        0
    );
    for r in rows(&dir.path().join("attack.csv")) {
        assert_eq!(r[2], "100.0000");
        assert_eq!(r[3], "0.0000");
        assert_eq!(r[5], "100.0000");
    }
}

#[test]
fn columns_rederive_from_candidates() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        attack(dir.path(), &["--samples", "7", "--seed", "11", "--H", "3"]),
        0
    );
    let fasta = parse_fasta(&std::fs::read_to_string(fixture("three.fasta")).unwrap()).unwrap();
    let candidates = rows(&dir.path().join("candidates.csv"));
    for (seq, row) in fasta.iter().zip(rows(&dir.path().join("attack.csv"))) {
        let mine: Vec<&Vec<String>> = candidates.iter().filter(|c| c[0] == seq.id()).collect();
        assert_eq!(mine.len(), 7);
        let col = |i: usize| {
            mine.iter()
                .map(|c| c[i].parse::<f64>().unwrap())
                .collect::<Vec<_>>()
        };
        let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        assert_eq!(row[4], format!("{:.4}", mean(col(5))));
        assert_eq!(row[6], format!("{:.4}", 100.0 * mean(col(7))));
        assert_eq!(row[8], format!("{:.4}", 100.0 * mean(col(8))));

        let best = mine.iter().find(|c| c[10] == "1").unwrap();
        let changed = best[4].split(';').filter(|s| !s.is_empty()).count();
        let n = seq.len();
        assert_eq!(
            row[2],
            format!("{:.4}", 100.0 * (n - changed) as f64 / n as f64)
        );
        assert_eq!(row[3], format!("{:.4}", best[5].parse::<f64>().unwrap()));
        // recorded sequence and positions agree
        let cand = Sequence::parse("c", &best[3]).unwrap();
        let diff: Vec<String> = (0..n)
            .filter(|&i| cand.residues()[i] != seq.residues()[i])
            .map(|i| i.to_string())
            .collect();
        assert_eq!(diff.join(";"), best[4]);
        // the best row maximizes the rmsd objective
        let best_obj: f64 = best[9].parse().unwrap();
        assert!(col(9).iter().all(|&o| o <= best_obj));
    }
}

fn read_outputs(dir: &Path) -> Vec<Vec<u8>> {
    OUTPUT_FILES
        .iter()
        .map(|f| std::fs::read(dir.join(f)).unwrap())
        .collect()
}

#[test]
fn replay_is_byte_identical() {
    let first = tempfile::tempdir().unwrap();
    assert_eq!(
        attack(
            first.path(),
            &[
                "--samples",
                "6",
                "--seed",
                "99",
                "--confidence-strategy",
                "min"
            ]
        ),
        0
    );
    let original = read_outputs(first.path());
    let manifest = first.path().join(MANIFEST_FILE);
    for jobs in ["1", "8"] {
        let again = tempfile::tempdir().unwrap();
        let (code, _, err) = invoke(&[
            "replay",
            manifest.to_str().unwrap(),
            "--out-dir",
            again.path().to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert_eq!(code, 0, "{err}");
        assert_eq!(read_outputs(again.path()), original, "jobs={jobs}");
    }
}

#[test]
fn attack_failures_mark_rows() {
    let dir = tempfile::tempdir().unwrap();
    let fasta = dir.path().join("in.fasta");
    std::fs::write(&fasta, ">ok\nMKTAYIAKQRQISF\n>tiny\nMK\n").unwrap();
    let out = dir.path().join("out");
    let (code, stdout, _) = invoke(&[
        "attack",
        "--fasta",
        fasta.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--samples",
        "2",
        "--H",
        "1",
    ]);
    assert_eq!(code, 1);
    assert!(stdout.contains("tiny: failed"));
    let r = rows(&out.join("attack.csv"));
    assert_eq!(r[0][10], "ok");
    assert_eq!(r[1][10], "failed");
}

#[test]
fn bad_oracle_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let fasta = fixture("three.fasta");
    let (code, _, err) = invoke(&[
        "attack",
        "--fasta",
        fasta.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--oracle",
        "alphafold",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("unknown oracle"));
    let (code, _, _) = invoke(&["attack", "--fasta", "/nonexistent.fa", "--out-dir", "x"]);
    assert_eq!(code, 1);
    let (code, _, _) = invoke(&["attack", "--bogus"]);
    assert_eq!(code, 2);
}

fn kv(text: &str) -> std::collections::HashMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[test]
fn metrics_command() {
    let dir = tempfile::tempdir().unwrap();
    let seq = Sequence::parse("m", "MKTAYIAKQRQISFVKSHFSRQ").unwrap();
    let s = MockFolder::default().fold(&seq).unwrap();
    let moved = s.transformed(&RigidTransform {
        rotation: *Rotation3::from_axis_angle(&Vector3::y_axis(), 1.1).matrix(),
        translation: Vector3::new(4.0, -7.0, 2.5),
    });
    let a = dir.path().join("a.pdb");
    let b = dir.path().join("b.pdb");
    std::fs::write(&a, write_pdb(&s, None).unwrap()).unwrap();
    std::fs::write(&b, write_pdb(&moved, None).unwrap()).unwrap();

    let (code, out, _) = invoke(&["metrics", a.to_str().unwrap(), a.to_str().unwrap(), "--kv"]);
    assert_eq!(code, 0);
    let m = kv(&out);
    assert!(m["rmsd_all"].parse::<f64>().unwrap() < 1e-9);
    assert_eq!(m["gdt_ts"], "1");
    assert_eq!(m["gdt_ha"], "1");

    let (code, out, _) = invoke(&["metrics", a.to_str().unwrap(), b.to_str().unwrap(), "--kv"]);
    assert_eq!(code, 0);
    let m = kv(&out);
    // file coordinates carry 3 decimals
    assert!(m["rmsd_all"].parse::<f64>().unwrap() < 1e-3);
    assert_eq!(m["kept"], "22");

    let (code, out, _) = invoke(&["metrics", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("GDT-TS:      100.0000 %"));

    let short = Structure::new("x", s.ca()[..10].to_vec(), None).unwrap();
    std::fs::write(&b, write_pdb(&short, None).unwrap()).unwrap();
    let (code, _, err) = invoke(&["metrics", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(!err.is_empty());
}

#[test]
fn reduce_command() {
    let dir = tempfile::tempdir().unwrap();
    let k3 = dir.path().join("k3.txt");
    let p3 = dir.path().join("p3.txt");
    std::fs::write(&k3, "3 3\n0 1\n1 2\n0 2\n").unwrap();
    std::fs::write(&p3, "3 2\n0 1\n1 2\n").unwrap();
    let (code, out, _) = invoke(&["reduce", "--graph", k3.to_str().unwrap(), "--k", "3"]);
    assert_eq!(code, 0);
    assert!(out.contains("feasible, agrees"));
    assert!(out.contains("L=18"));
    assert!(out.contains("witness=KKK"));
    let (code, out, _) = invoke(&["reduce", "--graph", p3.to_str().unwrap(), "--k", "3"]);
    assert_eq!(code, 0);
    assert!(out.contains("infeasible, agrees"));
    let (code, _, _) = invoke(&["reduce", "--graph", p3.to_str().unwrap(), "--k", "4"]);
    assert_eq!(code, 1);
}

#[test]
fn neighborhood_command() {
    let fasta = fixture("three.fasta");
    let args = [
        "neighborhood",
        "--fasta",
        fasta.to_str().unwrap(),
        "--L",
        "20",
        "--H",
        "5",
        "--count",
        "10",
        "--seed",
        "5",
    ];
    let (code, out, _) = invoke(&args);
    assert_eq!(code, 0);
    let records = parse_fasta(&out).unwrap();
    assert_eq!(records.len(), 30);
    let originals = parse_fasta(&std::fs::read_to_string(&fasta).unwrap()).unwrap();
    for (i, r) in records.iter().enumerate() {
        let s = &originals[i / 10];
        let fields: Vec<&str> = r.id().rsplitn(3, ' ').collect();
        let dseq: i64 = fields[1].strip_prefix("dseq=").unwrap().parse().unwrap();
        let dham: usize = fields[0].strip_prefix("dham=").unwrap().parse().unwrap();
        let m = foldattack::sequences::BlosumMatrix::blosum62();
        assert_eq!(dseq, foldattack::sequences::seq_distance(s, r, &m).unwrap());
        assert_eq!(dham, foldattack::sequences::hamming(s, r).unwrap());
        assert!(dseq <= 20 && (1..=5).contains(&dham));
    }
    assert_eq!(invoke(&args).1, out);

    let (code, _, err) = invoke(&[
        "neighborhood",
        "--fasta",
        fasta.to_str().unwrap(),
        "--L",
        "1000",
        "--H",
        "1",
        "--exact",
    ]);
    assert_eq!(code, 1);
    assert!(!err.is_empty());
}
