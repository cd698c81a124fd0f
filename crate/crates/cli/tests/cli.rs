use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::Parser;
use hdrcloudseg_cli::{Cli, RunConfig};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_hdrcloudseg");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("HDRCLOUDSEG_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A three-sample synthetic dataset.
fn dataset() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    let out = run(&["synth", "--count", "3", "--width", "48", "--height", "40", "--out", s(&ds)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (dir, ds)
}

/// Every file under `root`, keyed by relative path.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                acc.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(root, root, &mut acc);
    acc
}

fn resolve(args: &[&str]) -> RunConfig {
    let mut argv = vec!["hdrcloudseg"];
    argv.extend_from_slice(args);
    RunConfig::resolve(&Cli::try_parse_from(argv).unwrap()).unwrap()
}

#[test]
fn precedence_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    fs::write(
        &cfg_path,
        r#"{"seg": {"mu": 2.5, "alpha": 0.7}, "tonemap": {"key_a": 0.3}, "response": {"sample_count": 150},
            "segment": {"method": "souza", "image_type": "ldr-mid"}, "out": "results"}"#,
    )
    .unwrap();
    let cfg = cfg_path.to_str().unwrap();
    let defaults = RunConfig::default();

    // (flag, value, json value, reader)
    type Get = fn(&RunConfig) -> f64;
    let cases: [(&str, &str, f64, f64, Get); 4] = [
        ("--mu", "0.5", 2.5, defaults.seg.mu, |c| c.seg.mu),
        ("--alpha", "0.95", 0.7, defaults.seg.alpha, |c| c.seg.alpha),
        ("--key", "0.09", 0.3, defaults.tonemap.key_a, |c| c.tonemap.key_a),
        ("--samples", "120", 150.0, defaults.response.sample_count as f64, |c| c.response.sample_count as f64),
    ];
    for (flag, value, json, default, get) in cases {
        let cli: f64 = value.parse().unwrap();
        assert_eq!(get(&resolve(&["fuse"])), default, "{flag}: default");
        assert_eq!(get(&resolve(&["--config", cfg, "fuse"])), json, "{flag}: json over default");
        assert_eq!(get(&resolve(&[flag, value, "fuse"])), cli, "{flag}: flag over default");
        assert_eq!(get(&resolve(&["--config", cfg, flag, value, "fuse"])), cli, "{flag}: flag over json");
    }

    // untouched keys keep their defaults when a config is given
    let c = resolve(&["--config", cfg, "fuse"]);
    assert_eq!(c.seg.fcm_fuzzifier, defaults.seg.fcm_fuzzifier);
    assert_eq!(c.out, dir.path().join("results"));
    assert_eq!(resolve(&["--config", cfg, "--out", "x", "fuse"]).out, PathBuf::from("x"));

    let c = resolve(&["--config", cfg, "segment"]);
    assert_eq!((c.segment.method.name(), c.segment.image_type.name()), ("souza", "ldr"));
    let c = resolve(&["--config", cfg, "segment", "--method", "li", "--image-type", "tonemapped"]);
    assert_eq!((c.segment.method.name(), c.segment.image_type.name()), ("li", "tonemapped"));
}

#[test]
fn config_path_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, out: &str| {
        let p = dir.path().join(name);
        fs::write(&p, format!(r#"{{"out": "{out}"}}"#)).unwrap();
        p
    };
    let env_cfg = write("env.json", "from_env");
    let flag_cfg = write("flag.json", "from_flag");
    let synth = |extra: &[&str]| {
        let mut args = vec!["synth", "--count", "1", "--width", "8", "--height", "8"];
        args.extend_from_slice(extra);
        let out = Command::new(BIN).args(&args).env("HDRCLOUDSEG_CONFIG", &env_cfg).output().unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    };
    synth(&[]);
    assert!(dir.path().join("from_env/manifest.json").is_file());
    synth(&["--config", s(&flag_cfg)]);
    assert!(dir.path().join("from_flag/manifest.json").is_file());
    let direct = dir.path().join("direct");
    synth(&["--out", s(&direct)]);
    assert!(direct.join("manifest.json").is_file());
}

#[test]
fn fuse_writes_one_radiance_map_and_png_per_sample() {
    let (dir, ds) = dataset();
    let manifest = ds.join("manifest.json");
    let mut m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    m["samples"].as_array_mut().unwrap().truncate(1);
    let single = ds.join("single.json");
    fs::write(&single, m.to_string()).unwrap();

    let out = dir.path().join("out");
    let r = run(&["fuse", "--dataset", s(&single), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let files: Vec<PathBuf> = snapshot(&out).into_keys().collect();
    let expect: Vec<PathBuf> = ["radiance/syn000.pfm", "response.csv", "run_fuse.json", "tonemapped/syn000.png"]
        .iter()
        .map(PathBuf::from)
        .collect();
    assert_eq!(files, expect);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("run_fuse.json")).unwrap()).unwrap();
    assert_eq!(report["succeeded"], 1);
    assert_eq!(report["entries"][0]["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn corrupt_sample_is_a_partial_failure() {
    let (dir, ds) = dataset();
    fs::write(ds.join("syn001/high.png"), b"not an image").unwrap();
    let out = dir.path().join("out");
    let r = run(&["fuse", "--dataset", s(&ds), "--out", s(&out)]);
    assert_eq!(code(&r), 1);
    let pfms: Vec<_> = fs::read_dir(out.join("radiance")).unwrap().collect();
    assert_eq!(pfms.len(), 2);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("run_fuse.json")).unwrap()).unwrap();
    assert_eq!((report["succeeded"].as_u64(), report["failed"].as_u64()), (Some(2), Some(1)));
    assert_eq!(report["entries"][1]["id"], "syn001");
    assert_eq!(report["entries"][1]["ok"], false);
}

#[test]
fn usage_errors_exit_before_processing() {
    let (dir, ds) = dataset();
    let out = dir.path().join("out");
    let bad_config = dir.path().join("bad.json");
    fs::write(&bad_config, r#"{"seg": {"mu": 1.0}, "unknown_key": 1}"#).unwrap();
    let not_a_curve = ds.join("manifest.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["segment", "--method", "otsu"],
        vec!["segment", "--image-type", "raw"],
        vec!["segment", "--method", "long", "--image-type", "hdr"],
        vec!["fuse", "--alpha", "0.4"],
        vec!["fuse", "--mu", "-1"],
        vec!["fuse", "--jobs", "0"],
        vec!["fuse", "--response", "/no/such/curve.csv"],
        vec!["fuse", "--config", s(&bad_config)],
        vec!["evaluate", "roc", "--alphas", "0.9:0.6:0.1"],
        vec!["evaluate", "channels", "--channels", "c17"],
        vec!["respond", "--response", s(&not_a_curve)],
        vec!["bogus"],
    ];
    for mut args in cases {
        args.extend(["--dataset", s(&ds), "--out", s(&out)]);
        let r = run(&args);
        assert_eq!(code(&r), 2, "{args:?}: {}", String::from_utf8_lossy(&r.stderr));
        assert!(!out.exists(), "{args:?} wrote output");
    }
    let r = run(&["fuse", "--dataset", s(&dir.path().join("missing")), "--out", s(&out)]);
    assert_eq!(code(&r), 2);
}

#[test]
fn segment_writes_masks_and_energy_reports() {
    let (dir, ds) = dataset();
    let out = dir.path().join("out");
    let r = run(&["segment", "--dataset", s(&ds), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let mask = hdrcloudseg_core::dataset_io::load_mask(out.join("masks/proposed_hdr/syn000.png")).unwrap();
    assert_eq!(mask.dimensions(), (48, 40));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("reports/proposed_hdr/syn000.json")).unwrap()).unwrap();
    let energy = &report["summary"]["energy"];
    for key in ["data_term", "boundary_term", "mu", "total"] {
        assert!(energy[key].is_number(), "missing {key}");
    }
    assert!(report["metrics"]["fscore"].is_number());

    let r = run(&["segment", "--method", "long", "--image-type", "ldr-mid", "--dataset", s(&ds), "--out", s(&out)]);
    assert_eq!(code(&r), 0);
    assert!(out.join("masks/long_ldr/syn002.png").is_file());
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("reports/long_ldr/syn002.json")).unwrap()).unwrap();
    assert!(report.get("summary").is_none());

    let r = run(&["segment", "--channel", "c13", "--dataset", s(&ds), "--out", s(&out)]);
    assert_eq!(code(&r), 0);
    assert!(out.join("masks/proposed-c13_hdr/syn001.png").is_file());
}

#[test]
fn evaluate_commands_write_fixed_file_names() {
    let (dir, ds) = dataset();
    let out = dir.path().join("out");
    let go = |args: &[&str]| {
        let mut a = args.to_vec();
        a.extend(["--dataset", s(&ds), "--out", s(&out)]);
        let r = run(&a);
        assert_eq!(code(&r), 0, "{args:?}: {}", String::from_utf8_lossy(&r.stderr));
    };
    let lines = |f: &str| fs::read_to_string(out.join(f)).unwrap().lines().count();

    go(&["evaluate", "table"]);
    assert_eq!(lines("table.csv"), 1 + 11);
    assert_eq!(lines("table_unsaturated.csv"), 1 + 11);
    assert_eq!(lines("table_per_image.csv"), 1 + 11 * 3);

    go(&["evaluate", "roc", "--alphas", "0.6:0.99:0.01"]);
    assert_eq!(lines("roc.csv"), 1 + 40);

    go(&["evaluate", "channels"]);
    assert_eq!(lines("channels.csv"), 1 + 16);

    go(&["evaluate", "saturation"]);
    assert_eq!(lines("saturation.csv"), 1 + 3 + 1);

    go(&["respond"]);
    assert!(out.join("response.csv").is_file());
    for f in ["table.json", "roc.json", "channels.json", "saturation.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    for c in ["evaluate-table", "evaluate-roc", "evaluate-channels", "evaluate-saturation", "respond"] {
        assert!(out.join(format!("run_{c}.json")).is_file(), "{c}");
    }
}

#[test]
fn reruns_and_thread_counts_give_identical_outputs() {
    let (dir, ds) = dataset();
    let commands: [&[&str]; 4] = [&["fuse"], &["segment"], &["evaluate", "table"], &["evaluate", "roc", "--alphas", "0.7,0.88"]];
    let produce = |out: &Path, jobs: &str| {
        for c in commands {
            let mut a = c.to_vec();
            a.extend(["--dataset", s(&ds), "--out", s(out), "--jobs", jobs]);
            assert_eq!(code(&run(&a)), 0, "{c:?}");
        }
        snapshot(out)
    };
    let a = dir.path().join("a");
    let first = produce(&a, "1");
    let second = produce(&a, "1");
    assert_eq!(first, second);
    // the thread count is not part of the recorded config
    let third = produce(&dir.path().join("b"), "3");
    assert_eq!(first, third);
}

#[test]
fn tonemap_converts_a_single_radiance_map() {
    let (dir, ds) = dataset();
    let out = dir.path().join("out");
    assert_eq!(code(&run(&["fuse", "--dataset", s(&ds), "--out", s(&out)])), 0);
    let pfm = out.join("radiance/syn000.pfm");
    let png = dir.path().join("single.png");
    let r = run(&["tonemap", "--input", s(&pfm), "--output", s(&png), "--tonemap", "photographic"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let img = hdrcloudseg_core::dataset_io::load_ldr(&png, 1.0, 0.0).unwrap();
    assert_eq!(img.dimensions(), (48, 40));
    assert_eq!(code(&run(&["tonemap", "--input", s(&dir.path().join("none.pfm"))])), 2);
}
