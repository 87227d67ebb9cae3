use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use emgcode::eval::{ProtocolKind, Scenario};
use emgcode::{EvalReport, RecordKey};
use tempfile::TempDir;

fn emgcode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emgcode"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A generated tree plus the run configuration written next to it.
struct Tree {
    dir: TempDir,
}

impl Tree {
    fn generate(subjects: u16, separation: f64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let out = emgcode(&[
            "synth",
            "--out",
            s(dir.path()),
            "--subjects",
            &subjects.to_string(),
            "--gestures",
            "7",
            "--trials",
            "4",
            "--samples",
            "2048",
            "--separation",
            &separation.to_string(),
            "--seed",
            "3",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        Self { dir }
    }

    fn config(&self) -> PathBuf {
        self.dir.path().join("emgcode.toml")
    }

    fn data(&self) -> PathBuf {
        self.dir.path().join("data")
    }

    fn record(&self, key: RecordKey) -> PathBuf {
        self.data().join(key.relative_stem()).with_extension("hea")
    }

    fn run(&self, args: &[&str]) -> Output {
        let config = self.config();
        let mut all = vec!["--config", s(&config)];
        all.extend_from_slice(args);
        emgcode(&all)
    }
}

fn shared() -> &'static Tree {
    static TREE: OnceLock<Tree> = OnceLock::new();
    TREE.get_or_init(|| Tree::generate(4, 0.6))
}

#[test]
fn help_and_usage_errors() {
    for sub in ["scan", "features", "enroll", "verify", "evaluate", "synth", "report"] {
        let out = emgcode(&[sub, "--help"]);
        assert_eq!(code(&out), 0, "{sub} --help");
        assert!(stdout(&out).contains("Usage"), "{sub}");
    }
    assert_eq!(code(&emgcode(&["--bogus"])), 2);
    assert_eq!(code(&emgcode(&["verify"])), 2);
    assert_eq!(code(&emgcode(&["evaluate", "--protocols", "xyz"])), 2);
}

#[test]
fn scanning_an_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = emgcode(&["scan", s(dir.path())]);
    assert_eq!(code(&out), 1);
    let out = emgcode(&["--allow-partial", "scan", s(dir.path())]);
    assert_eq!(code(&out), 1);
}

#[test]
fn complete_tree_scans_clean() {
    let t = shared();
    let json = t.dir.path().join("scan/manifest.json");
    let out = t.run(&["scan", "--json", s(&json)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("missing: 0"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["manifest"]["entries"].as_array().unwrap().len(), 3 * 4 * 7 * 4);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 16);
    assert_eq!(v["seed"], 3, "synth passes its seed on to the run configuration");
}

#[test]
fn partial_tree_needs_the_flag_and_skips_the_subject() {
    let t = Tree::generate(3, 0.6);
    let gone = t.record(RecordKey::new(2, 3, 5, 1));
    fs::remove_file(&gone).unwrap();
    fs::remove_file(gone.with_extension("dat")).unwrap();

    assert_eq!(code(&t.run(&["scan"])), 1);
    let json = t.dir.path().join("manifest.json");
    let out = t.run(&["--allow-partial", "scan", "--json", s(&json)]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let missing = v["manifest"]["missing"].as_array().unwrap();
    assert_eq!(missing.len(), 1);
    assert_eq!(missing[0]["subject"], 3);

    let report_dir = t.dir.path().join("report");
    let args = [
        "evaluate",
        "--output",
        s(&report_dir),
        "--protocols",
        "scd",
        "--codelengths",
        "1",
        "--sequences",
        "3",
        "--selections",
        "forearm",
    ];
    assert_eq!(code(&t.run(&args)), 1, "incomplete tree refused without the flag");
    let mut with_flag = vec!["--allow-partial"];
    with_flag.extend_from_slice(&args);
    let out = t.run(&with_flag);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = EvalReport::load(&report_dir.join("report.json")).unwrap();
    assert!(report.skipped.iter().any(|k| k.note.subject == 3));
}

#[test]
fn features_are_written_with_an_index() {
    let t = shared();
    let out_dir = t.dir.path().join("features");
    let out = t.run(&["features", "--out", s(&out_dir), "--selection", "wrist"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let index: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("index.json")).unwrap()).unwrap();
    assert!(index["config_hash"].is_string());
    assert!(index["selections"]["wrist"].is_string());
    let key = RecordKey::new(1, 2, 3, 4);
    let file = out_dir.join("wrist").join(format!("{}.csv", key.record_name()));
    let series = emgcode::FeatureSeries::read_from(std::io::BufReader::new(fs::File::open(file).unwrap())).unwrap();
    assert_eq!(series.key, key);
    assert_eq!(series.dim(), 36);
}

#[test]
fn verify_accepts_genuine_and_rejects_impostor() {
    let t = shared();
    let store = t.dir.path().join("store/templates.json");
    let out = t.run(&["enroll", "--store", s(&store), "--trials", "1,2,3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("enrolled 28 templates"));

    let attempt = |claimant: u16, sequence: &[u16]| {
        let seq: Vec<String> = sequence.iter().map(u16::to_string).collect();
        let seq = seq.join(",");
        let records: Vec<PathBuf> = sequence
            .iter()
            .map(|&g| t.record(RecordKey::new(1, claimant, g, 4)))
            .collect();
        let mut args = vec!["verify", "--store", s(&store), "--user", "1", "--sequence", &seq, "--json"];
        for r in &records {
            args.push("--record");
            args.push(s(r));
        }
        t.run(&args)
    };

    let genuine = attempt(1, &[2, 5, 7]);
    assert_eq!(code(&genuine), 0, "{}", String::from_utf8_lossy(&genuine.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&genuine)).unwrap();
    assert_eq!(v["accepted"], true, "{v}");
    assert_eq!(v["codes"].as_array().unwrap().len(), 3);
    assert!(v["config_hash"].is_string());

    // impostor who knows the sequence
    let impostor = attempt(2, &[2, 5, 7]);
    assert_eq!(code(&impostor), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&impostor)).unwrap();
    assert_eq!(v["accepted"], false, "{v}");

    // gesture 9 lies outside the enrolled grid
    let bad = attempt(1, &[2, 9]);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("no template"));
}

#[test]
fn evaluate_is_reproducible_and_longer_codes_help() {
    let t = shared();
    let run = |dir: &str| {
        let out_dir = t.dir.path().join(dir);
        let out = t.run(&[
            "evaluate",
            "--output",
            s(&out_dir),
            "--protocols",
            "wd",
            "--codelengths",
            "1,6",
            "--sequences",
            "10",
            "--jobs",
            "1",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let a = run("eval-a");
    let b = run("eval-b");
    for f in ["report.json", "eer_table.csv", "det_curves.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let report = EvalReport::load(&a.join("report.json")).unwrap();
    for scenario in Scenario::ALL {
        for sel in ["forearm", "wrist"] {
            let m1 = report.median(ProtocolKind::WithinDay, scenario, sel, 1).unwrap();
            let m6 = report.median(ProtocolKind::WithinDay, scenario, sel, 6).unwrap();
            assert!(m6 <= m1, "{scenario} {sel}: {m6} > {m1}");
        }
    }
    let table = fs::read_to_string(a.join("eer_table.csv")).unwrap();
    assert!(table.starts_with(&format!("# config_hash={}", report.config_hash)));
    assert!(table.contains("WD-Uni-forearm"));

    let out = t.run(&["report", s(&a)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("within_day"));
    let out = t.run(&["report", s(&a.join("report.json")), "--csv"]);
    assert_eq!(stdout(&out), table);
}
