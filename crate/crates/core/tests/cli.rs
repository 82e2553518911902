mod common;

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use common::{read, run};

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("cli")
        .join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// A 10-per-class synthetic corpus shared by the tests below.
fn corpus() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tmp("corpus").join("faces");
        let out = run(&[
            &"synth",
            &"--out",
            &dir,
            &"--per-class",
            &"10",
            &"--seed",
            &"3",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        dir
    })
}

fn manifest() -> PathBuf {
    corpus().join("manifest.csv")
}

fn stdout(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let d = tmp("synth_twice");
    let (a, b) = (d.join("a"), d.join("b"));
    for dir in [&a, &b] {
        let out = run(&[&"synth", &"-o", dir, &"--per-class", &"3", &"--seed", &"9"]);
        assert!(out.status.success());
        assert_eq!(
            stdout(&out).trim(),
            format!("21 images written to {}", dir.display())
        );
    }
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 22);
    for n in &names {
        assert_eq!(read(&a.join(n)), read(&b.join(n)), "{n:?}");
    }
    let csv = String::from_utf8(read(&a.join("manifest.csv"))).unwrap();
    assert!(csv.starts_with("path,label,split\nanger_000.pgm,anger,\n"));
}

#[test]
fn synth_needs_two_per_class() {
    let d = tmp("synth_one");
    let out = run(&[&"synth", &"-o", &d.join("x"), &"--per-class", &"1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("x").exists());
}

#[test]
fn edges_writes_binary_pgm() {
    let d = tmp("edges");
    let img = corpus().join("fear_002.pgm");
    let out_path = d.join("edges.pgm");
    let out = run(&[&"edges", &img, &"-o", &out_path]);
    assert!(out.status.success(), "{}", stderr(&out));
    let edges = facexpr::imgio::read_pgm_file(&out_path).unwrap();
    assert_eq!((edges.width(), edges.height()), (85, 85));
    assert!(edges.pixels().iter().all(|&p| p == 0 || p == 255));
    let count = edges.pixels().iter().filter(|&&p| p == 255).count();
    assert_eq!(stdout(&out).trim(), format!("{count} edge pixels"));

    let again = d.join("again.pgm");
    assert!(run(&[&"edges", &img, &"-o", &again]).status.success());
    assert_eq!(read(&out_path), read(&again));

    let abs = run(&[
        &"edges",
        &img,
        &"-o",
        &d.join("abs.pgm"),
        &"--low",
        &"40",
        &"--high",
        &"120",
    ]);
    assert!(abs.status.success());
}

#[test]
fn edges_usage_and_io_errors() {
    let d = tmp("edges_err");
    let img = corpus().join("fear_002.pgm");
    let out = run(&[
        &"edges",
        &img,
        &"-o",
        &d.join("e.pgm"),
        &"--low",
        &"10",
        &"--high",
        &"5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("e.pgm").exists());
    let out = run(&[&"edges", &img, &"-o", &d.join("e.pgm"), &"--low", &"10"]);
    assert_eq!(out.status.code(), Some(2));

    let missing = d.join("no_such_face.pgm");
    let out = run(&[&"edges", &missing, &"-o", &d.join("e.pgm")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("no_such_face.pgm"),
        "{}",
        stderr(&out)
    );
    assert!(stderr(&out).contains("reading image"));
}

fn train(dir: &Path, extra: &[&str]) -> std::process::Output {
    let mut cmd = common::bin();
    cmd.arg("train")
        .arg(manifest())
        .arg("-o")
        .arg(dir.join("model.json"))
        .args(["--per-class-test", "3", "--max-epochs", "300"])
        .args(extra);
    cmd.output().unwrap()
}

#[test]
fn train_is_deterministic() {
    let (a, b) = (tmp("train_a"), tmp("train_b"));
    for d in [&a, &b] {
        let out = train(d, &["--seed", "5"]);
        assert!(out.status.success(), "{}", stderr(&out));
        let text = stdout(&out);
        assert!(text.contains("epochs run: 300"));
        assert!(text.contains("final MSE: "));
    }
    assert_eq!(read(&a.join("model.json")), read(&b.join("model.json")));
    assert_eq!(
        read(&a.join("model.history.csv")),
        read(&b.join("model.history.csv"))
    );
    let history = String::from_utf8(read(&a.join("model.history.csv"))).unwrap();
    assert_eq!(history.lines().next(), Some("epoch,mse"));
    assert_eq!(history.lines().count(), 301);

    let c = tmp("train_c");
    assert!(train(&c, &["--seed", "6"]).status.success());
    assert_ne!(read(&a.join("model.json")), read(&c.join("model.json")));
}

#[test]
fn train_rejects_bad_hyperparameters() {
    let d = tmp("train_bad");
    for flags in [
        &["--rate", "0"][..],
        &["--hidden", "0"],
        &["--max-epochs", "0"],
        &["--target-error", "-1"],
    ] {
        let out = train(&d, flags);
        assert_eq!(out.status.code(), Some(2), "{flags:?}: {}", stderr(&out));
    }
    assert!(!d.join("model.json").exists());
}

#[test]
fn failed_train_leaves_no_model() {
    let d = tmp("train_partial");
    let out = train(
        &d,
        &["--history", d.join("missing_dir/h.csv").to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("writing history"), "{}", stderr(&out));
    assert!(!d.join("model.json").exists());
}

#[test]
fn one_cell_grid_matches_train_then_eval() {
    let d = tmp("grid_vs_train");
    let out = train(
        &d,
        &[
            "--seed",
            "4",
            "--test-manifest",
            d.join("test.csv").to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let eval = run(&[
        &"eval",
        &d.join("model.json"),
        &d.join("test.csv"),
        &"--csv",
        &d.join("eval.csv"),
    ]);
    assert!(eval.status.success(), "{}", stderr(&eval));
    let table = stdout(&eval);
    let pooled: f64 = table
        .lines()
        .find_map(|l| l.strip_prefix("Pooled accuracy:"))
        .unwrap()
        .trim()
        .trim_end_matches('%')
        .parse()
        .unwrap();

    let grid = run(&[
        &"grid",
        &manifest(),
        &"-o",
        &d.join("grid.csv"),
        &"--rates",
        &"0.3",
        &"--hidden",
        &"10",
        &"--per-class-test",
        &"3",
        &"--max-epochs",
        &"300",
        &"--seed",
        &"4",
    ]);
    assert!(grid.status.success(), "{}", stderr(&grid));
    let csv = String::from_utf8(read(&d.join("grid.csv"))).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "hidden,rate,accuracy_percent");
    assert_eq!(rows.len(), 2);
    let acc: f64 = rows[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((acc - pooled).abs() < 0.05, "grid {acc} vs eval {pooled}");
}

#[test]
fn grid_rejects_empty_lists() {
    let d = tmp("grid_bad");
    let out = run(&[
        &"grid",
        &manifest(),
        &"-o",
        &d.join("g.csv"),
        &"--rates",
        &"",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        &"grid",
        &manifest(),
        &"-o",
        &d.join("g.csv"),
        &"--hidden",
        &"0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        &"grid",
        &manifest(),
        &"-o",
        &d.join("g.csv"),
        &"--per-class-test",
        &"0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("g.csv").exists());
}

#[test]
fn classify_and_eval_outputs() {
    let d = tmp("classify");
    assert!(train(
        &d,
        &["--test-manifest", d.join("test.csv").to_str().unwrap()]
    )
    .status
    .success());
    let model = d.join("model.json");
    let img = corpus().join("surprise_001.pgm");
    let a = run(&[&"classify", &model, &img]);
    assert!(a.status.success(), "{}", stderr(&a));
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 8);
    let label = lines[0].strip_prefix("label: ").unwrap();
    assert!(facexpr::Expression::ALL.iter().any(|e| e.as_str() == label));
    let names = [
        "Anger",
        "Fear",
        "Surprise",
        "Sadness",
        "Happiness",
        "Disgust",
        "Neutral",
    ];
    for (i, (line, name)) in lines[1..].iter().zip(names).enumerate() {
        assert!(line.starts_with(&format!("Y{} {name}", i + 1)), "{line}");
    }
    assert_eq!(stdout(&run(&[&"classify", &model, &img])), text);

    let ev = run(&[
        &"eval",
        &model,
        &d.join("test.csv"),
        &"--csv",
        &d.join("eval.csv"),
    ]);
    assert!(ev.status.success());
    let table = stdout(&ev);
    assert!(table.starts_with("Feeling"));
    assert!(table.contains("Average per-class accuracy:"));
    for name in names {
        assert!(
            table
                .lines()
                .any(|l| l.starts_with(name) && l.contains("/3")),
            "{name}"
        );
    }
    let csv = String::from_utf8(read(&d.join("eval.csv"))).unwrap();
    assert_eq!(csv.lines().count(), 8);
    assert!(csv.starts_with("label,pred_anger,"));
}

#[test]
fn corrupt_model_and_empty_manifest_fail() {
    let d = tmp("corrupt");
    let bad = d.join("bad.json");
    std::fs::write(&bad, b"{\"version\": 1, \"pipeline\": ").unwrap();
    let out = run(&[&"classify", &bad, &corpus().join("anger_000.pgm")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("loading model"));
    std::fs::write(&bad, b"{\"version\": 999}").unwrap();
    let out = run(&[&"classify", &bad, &corpus().join("anger_000.pgm")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("version 999"));

    assert!(train(&d, &[]).status.success());
    let empty = d.join("empty.csv");
    std::fs::write(&empty, "path,label,split\n").unwrap();
    let out = run(&[&"eval", &d.join("model.json"), &empty]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn split_and_prep_write_manifests() {
    let d = tmp("split");
    let out_csv = d.join("tagged.csv");
    let out = run(&[
        &"split",
        &manifest(),
        &"-o",
        &out_csv,
        &"--per-class-test",
        &"4",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let tagged = facexpr::pipeline::Manifest::load(&out_csv).unwrap();
    assert_eq!(
        tagged.filter(Some(facexpr::pipeline::Split::Test)).len(),
        28
    );
    assert!(tagged.records.iter().all(|r| tagged.resolve(r).exists()));
    let again = d.join("again.csv");
    assert!(run(&[
        &"split",
        &manifest(),
        &"-o",
        &again,
        &"--per-class-test",
        &"4"
    ])
    .status
    .success());
    assert_eq!(read(&out_csv), read(&again));

    let jaffe = d.join("jaffe");
    std::fs::create_dir_all(&jaffe).unwrap();
    for (src, dst) in [
        ("anger_000.pgm", "KA.AN1.39.pgm"),
        ("happiness_001.pgm", "KL.HA2.30.pgm"),
        ("neutral_002.pgm", "YM.NE3.51.pgm"),
    ] {
        std::fs::copy(corpus().join(src), jaffe.join(dst)).unwrap();
    }
    std::fs::write(jaffe.join("README.txt"), "not an image").unwrap();
    let m = d.join("jaffe.csv");
    let out = run(&[&"prep", &jaffe, &"-o", &m]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(read(&m)).unwrap();
    assert_eq!(
        text,
        "path,label,split\njaffe/KA.AN1.39.pgm,anger,\njaffe/KL.HA2.30.pgm,happiness,\njaffe/YM.NE3.51.pgm,neutral,\n"
    );
}
