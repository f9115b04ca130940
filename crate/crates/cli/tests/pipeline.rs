use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use esn_lrofr::persistence::{load_archive, HarvestArchive, ModelArchive};

const CREATED: &str = "2026-01-01T00:00:00Z";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_esn-lrofr"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin()
        .args(args)
        .args(["--out_dir", dir.to_str().unwrap(), "--created", CREATED])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn csv_column(path: &Path, column: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == column).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

fn replay_into(manifest: &Path, dir: &Path) {
    let out = bin()
        .args(["replay", manifest.to_str().unwrap(), "--out_dir", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn same_bytes(a: &Path, b: &Path) -> bool {
    fs::read(a).unwrap() == fs::read(b).unwrap()
}

#[test]
fn mackey_glass_pipeline_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    run(d, &["generate", "mg"]);
    run(d, &["harvest", "--data", &p(d, "data.csv")]);

    let out = run(d, &["analyze", "--harvest", &p(d, "harvest.json"), "--method", "ofr"]);
    assert!(stdout(&out).contains("unexplained ratio after 1 selection"));
    let ratios = csv_column(&d.join("ofr-trace.csv"), "cumulative_unexplained_ratio");
    let first: f64 = ratios[0].parse().unwrap();
    assert!(first < 0.01, "first ratio {first}");

    run(d, &["analyze", "--harvest", &p(d, "harvest.json"), "--method", "lrofr"]);
    assert_eq!(csv_column(&d.join("lrofr-lambda.csv"), "lambda").len(), 400);

    run(d, &["fit", "--harvest", &p(d, "harvest.json"), "--readout", "linear"]);
    run(d, &["fit", "--harvest", &p(d, "harvest.json"), "--readout", "lrofr-linear"]);
    let linear: ModelArchive<f64> = load_archive(&d.join("model-linear.json")).unwrap();
    let lrofr: ModelArchive<f64> = load_archive(&d.join("model-lrofr-linear.json")).unwrap();
    assert!(lrofr.training_mse >= linear.training_mse);
    assert_eq!(lrofr.selection.len(), 1);
    assert_eq!(lrofr.provenance.created, CREATED);

    run(d, &["evaluate", "--model", &p(d, "model-lrofr-linear.json")]);
    let report = d.join("report.csv");
    let stats = csv_column(&report, "trial");
    assert_eq!(stats.iter().filter(|s| *s == "nrmse").count(), 2);
    assert_eq!(stats.len(), 200 + 2 + 2);

    let out = run(d, &["inspect", &p(d, "model-lrofr-linear.json")]);
    assert!(stdout(&out).contains("lrofr-linear"));

    // every manifest replays to identical outputs
    let replay = tempfile::tempdir().unwrap();
    let r = replay.path();
    for (manifest, outputs) in [
        ("data.csv", vec!["data.csv"]),
        ("harvest.json", vec!["harvest.json"]),
        ("ofr-trace.csv", vec!["ofr-trace.csv"]),
        ("lrofr-trace.csv", vec!["lrofr-trace.csv", "lrofr-lambda.csv"]),
        ("model-linear.json", vec!["model-linear.json"]),
        ("model-lrofr-linear.json", vec!["model-lrofr-linear.json"]),
        ("report.csv", vec!["report.csv"]),
    ] {
        replay_into(&d.join(format!("{manifest}.manifest.toml")), r);
        for o in outputs {
            assert!(same_bytes(&d.join(o), &r.join(o)), "{o} differs after replay");
        }
    }
}

#[test]
fn surrogate_rbf_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    run(d, &["generate", "surrogate", "--n_points", "500", "--seed", "4"]);
    let header = fs::read_to_string(d.join("data.csv")).unwrap();
    assert!(header.starts_with("u0,u1,y0,y1\n"));
    run(
        d,
        &["harvest", "--data", &p(d, "data.csv"), "--preset", "vector_field", "--washout", "100", "--reservoir_size", "80", "--seed", "4"],
    );
    let h: HarvestArchive<f64> = load_archive(&d.join("harvest.json")).unwrap();
    assert_eq!(h.harvest.states.shape(), (400, 80));
    assert_eq!(h.esn_config.seed, 4);

    run(
        d,
        &["fit", "--harvest", &p(d, "harvest.json"), "--readout", "rbf-dopt", "--variance", "2.0", "--stride", "4"],
    );
    let m: ModelArchive<f64> = load_archive(&d.join("model-rbf-dopt.json")).unwrap();
    assert_eq!(m.selection.len(), 2);
    assert!(m.readout.term_count() > 0 && m.readout.term_count() <= 200);

    run(d, &["fit", "--harvest", &p(d, "harvest.json"), "--readout", "lrofr-linear"]);
    let out = run(d, &["inspect", &p(d, "model-lrofr-linear.json")]);
    assert!(stdout(&out).contains("output 1:"));

    // multi-output models are not MG forecasters
    let out = bin()
        .args(["evaluate", "--model", &p(d, "model-rbf-dopt.json"), "--out_dir", d.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = d.join("gen.toml");
    fs::write(&cfg, "seed = 9\ntransform = false\n[mg]\nlength = 500\ntau = 17.0\n").unwrap();
    run(d, &["generate", "--config", cfg.to_str().unwrap(), "--length", "300"]);
    let rows = csv_column(&d.join("data.csv"), "y0");
    assert_eq!(rows.len(), 300);
    // untransformed MG stays positive
    assert!(rows.iter().all(|v| v.parse::<f64>().unwrap() > 0.0));
    let manifest = fs::read_to_string(d.join("data.csv.manifest.toml")).unwrap();
    let value: toml::Value = toml::from_str(&manifest).unwrap();
    let resolved = &value["resolved"];
    assert_eq!(resolved["seed"].as_integer(), Some(9));
    assert_eq!(resolved["mg"]["length"].as_integer(), Some(300));
    assert_eq!(resolved["mg"]["tau"].as_float(), Some(17.0));

    // the resolved table is itself a valid config file
    let again = d.join("again.toml");
    fs::write(&again, toml::to_string(resolved).unwrap()).unwrap();
    run(d, &["generate", "--config", again.to_str().unwrap(), "-o", "again.csv"]);
    assert!(same_bytes(&d.join("data.csv"), &d.join("again.csv")));
}

#[test]
fn reservoir_config_file_with_override() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let config = esn_lrofr::esn::EsnConfig::<f64> {
        reservoir_size: 50,
        ..esn_lrofr::esn::EsnConfig::mackey_glass(3)
    };
    let cfg = d.join("esn.toml");
    esn_lrofr::persistence::save_config(&config, &cfg).unwrap();
    run(d, &["generate", "mg", "--length", "400"]);
    run(d, &["harvest", "--data", &p(d, "data.csv"), "--config", cfg.to_str().unwrap(), "--washout", "150"]);
    let h: HarvestArchive<f64> = load_archive(&d.join("harvest.json")).unwrap();
    assert_eq!(h.harvest.states.shape(), (250, 50));
    assert_eq!(h.esn_config.seed, 3);
}

#[test]
fn missing_created_is_recorded_for_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = bin()
        .args(["generate", "mg", "--length", "50", "--out_dir", d.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let value: toml::Value = toml::from_str(&fs::read_to_string(d.join("data.csv.manifest.toml")).unwrap()).unwrap();
    let argv: Vec<&str> = value["argv"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let at = argv.iter().position(|a| *a == "--created").unwrap();
    assert_eq!(argv[at + 1], value["created"].as_str().unwrap());
}

fn failure(args: &[&str]) -> (Option<i32>, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn errors_carry_a_category() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let dir = d.to_str().unwrap();

    let (code, err) = failure(&["fit", "--harvest", "/nonexistent/h.json", "--out_dir", dir]);
    assert_eq!(code, Some(3));
    assert!(err.contains("error (io)"), "{err}");

    let (code, err) = failure(&["generate", "mg", "--lenght", "10"]);
    assert_eq!(code, Some(2));
    assert!(err.contains("--lenght"), "{err}");

    let (code, err) = failure(&["generate", "mg", "--length", "ten"]);
    assert_eq!(code, Some(2));
    assert!(err.contains("--length"), "{err}");

    run(d, &["generate", "mg", "--length", "300"]);
    let (code, err) = failure(&["harvest", "--data", &p(d, "data.csv"), "--reservoir_size", "0", "--out_dir", dir]);
    assert_eq!(code, Some(6), "{err}");

    // washout longer than the data
    let (code, _) = failure(&["harvest", "--data", &p(d, "data.csv"), "--out_dir", dir]);
    assert_ne!(code, Some(0));

    run(d, &["harvest", "--data", &p(d, "data.csv"), "--washout", "100", "--reservoir_size", "30"]);
    let text = fs::read_to_string(d.join("harvest.json")).unwrap();
    fs::write(d.join("broken.json"), text.replacen("\"washout\": 100", "\"washout\": 101", 1)).unwrap();
    let (code, err) = failure(&["inspect", &p(d, "broken.json")]);
    assert_eq!(code, Some(5));
    assert!(err.contains("checksum"), "{err}");

    fs::write(d.join("bad.csv"), "y0\n1.0\nabc\n").unwrap();
    let (code, _) = failure(&["harvest", "--data", &p(d, "bad.csv"), "--out_dir", dir]);
    assert_eq!(code, Some(4));
}

#[test]
fn help_lists_every_command() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    for c in ["generate", "harvest", "analyze", "fit", "evaluate", "inspect", "replay"] {
        assert!(text.contains(c), "{c} missing from help");
    }
}
