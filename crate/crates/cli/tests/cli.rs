use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn msrecover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msrecover"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const INVERTIBLE: &str = r#"
kind = "benchmark"
seed = 1
m_values = [16]
trials = 1

[signal]
type = "blocks"
n = 16
block_width = 4
block_kind = "triangle"
snr = "inf"

[[methods]]
preset = "bp"
"#;

#[test]
fn invertible_sensing_recovers_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", INVERTIBLE);
    let out = dir.path().join("out");
    let o = msrecover(&[
        "benchmark",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 2);
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells[0], "BP");
    assert!(cells[2].parse::<f64>().unwrap() <= 1e-5);
    assert!(cells[3].parse::<f64>().unwrap() <= 1e-5);
    assert!(String::from_utf8_lossy(&o.stdout).contains("BP"));
}

#[test]
fn rerun_from_embedded_config_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &INVERTIBLE
            .replace("m_values = [16]", "m_values = [6, 10]")
            .replace("trials = 1", "trials = 3")
            .replace("snr = \"inf\"", "snr = 5")
            .replace(
                "preset = \"bp\"",
                "preset = \"l1tv\"\nlambda2 = 0.2\nepsilon = { relative = 0.4 }",
            ),
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for format in ["csv", "json"] {
        let first = msrecover(&[
            "simulate",
            "--config",
            &cfg,
            "--out",
            a.to_str().unwrap(),
            "--format",
            format,
        ]);
        assert!(
            first.status.success(),
            "{}",
            String::from_utf8_lossy(&first.stderr)
        );
        let embedded = if format == "csv" {
            a.join("config.json")
        } else {
            a.join("results.json")
        };
        let second = msrecover(&[
            "simulate",
            "--config",
            embedded.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
            "--format",
            format,
            "--threads",
            "1",
        ]);
        assert!(
            second.status.success(),
            "{}",
            String::from_utf8_lossy(&second.stderr)
        );
    }
    for name in ["summary.csv", "trials.csv", "config.json", "results.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn seed_flag_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &INVERTIBLE.replace("m_values = [16]", "m_values = [8]"),
    );
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = msrecover(&[
            "benchmark",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(o.status.success());
        fs::read(out.join("summary.csv")).unwrap()
    };
    assert_ne!(run("1", "x"), run("2", "y"));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &INVERTIBLE.replace("preset = \"bp\"", "preset = \"l1tv\""),
    );
    let o = msrecover(&[
        "benchmark",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("methods[0].lambda2"));
}

#[test]
fn recover_runs_on_ingested_csv() {
    let dir = tempfile::tempdir().unwrap();
    let samples: String = (0..1024)
        .map(|i| {
            let t = i as f64 / 64.0;
            format!("{}\n", (t * 6.0).sin() * (-(t % 4.0)).exp())
        })
        .collect();
    let data = write(dir.path(), "ecg.csv", &format!("value\n{samples}"));
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!(
            r#"
kind = "recover"
seed = 4
m_values = [128, 256]
trials = 2

[signal]
type = "file"
path = "{data}"
section_length = 512

[[methods]]
preset = "l1l1"
lambda2 = 0.05
epsilon = {{ relative = 0.05 }}

[[methods]]
preset = "bpdn"
dictionary = {{ kind = "dft" }}
epsilon = {{ relative = 0.05 }}

[[methods]]
preset = "tv"
epsilon = {{ relative = 0.05 }}

[[methods]]
preset = "ls"
epsilon = {{ relative = 0.05 }}
"#
        ),
    );
    let out = dir.path().join("out");
    let o = msrecover(&[
        "recover",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = fs::read_to_string(out.join("results.json")).unwrap();
    for label in ["\"L1-L1\"", "\"BPDN\"", "\"TV\"", "\"LS\""] {
        assert!(doc.contains(label), "{label} missing");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.contains("m=")).count(), 8);
}

#[test]
fn tune_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        r#"
kind = "tune"
seed = 2
m_values = [24]

[signal]
type = "blocks"
n = 48
block_width = 8
block_kind = "rectangle"
snr = 5

[[methods]]
preset = "l1tv"
lambda2 = 1.0
epsilon = { relative = 0.4 }

[tune]
folds = 3
trials_per_group = 1
grid = [{ name = "lambda2", values = [0.1, 1.0] }]
"#,
    );
    let out = dir.path().join("out");
    let o = msrecover(&["tune", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("tuned lambda2="));
    assert!(out.join("tuning.json").is_file());
}
