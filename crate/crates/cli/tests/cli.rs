use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gnnlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnnlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run_ok(args: &[&str]) -> String {
    let out = gnnlab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "txt"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

const TOY: &str = r#"
seed = 5

[graph]
kind = "sbm"
block_sizes = [12, 12, 12]
p_in = 0.3
p_out = 0.03

[model]
hidden_dim = 8

[[sampler]]
kind = "rns"
num_parts = 1

[[sampler]]
kind = "saint_rw"
walk_length = 2
num_seeds = 8

[optim]
lr = 0.2
epochs = 12

[train]
regimes = ["full", "sampled_chained", "sampled_accumulated"]
seeds = 2
metrics_every = 4

[figure3]
seeds = 3
batches = 4

[sampler_stats]
m_list = [1, 2, 3, 36]
plans = 3
"#;

#[test]
fn every_command_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TOY);
    let cfg = cfg.to_str().unwrap();
    for cmd in ["generate", "train", "figure3", "sampler-stats"] {
        let a = tmp.path().join(format!("{cmd}_a"));
        let b = tmp.path().join(format!("{cmd}_b"));
        run_ok(&[cmd, "--config", cfg, "--out", a.to_str().unwrap()]);
        run_ok(&[cmd, "--config", cfg, "--out", b.to_str().unwrap()]);
        let (fa, fb) = (csv_files(&a), csv_files(&b));
        assert!(!fa.is_empty(), "{cmd} wrote nothing");
        assert_eq!(fa, fb, "{cmd} is not reproducible");
    }
    let a = tmp.path().join("verify_a");
    let b = tmp.path().join("verify_b");
    for d in [&a, &b] {
        run_ok(&["verify", "--only", "rns_pair", "--seed", "3", "--out", d.to_str().unwrap()]);
    }
    assert_eq!(csv_files(&a), csv_files(&b));
}

#[test]
fn generate_writes_four_files_and_seed_changes_them() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TOY);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_ok(&["generate", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    run_ok(&["generate", "--config", cfg.to_str().unwrap(), "--seed", "6", "--out", b.to_str().unwrap()]);
    let names: Vec<String> = csv_files(&a).into_iter().map(|f| f.0).collect();
    assert_eq!(names, ["edges.txt", "features.csv", "labels.csv", "split.csv"]);
    assert_ne!(fs::read(a.join("edges.txt")).unwrap(), fs::read(b.join("edges.txt")).unwrap());

    // The written files load back as a `files` graph source.
    let files_cfg = format!(
        "seed = 5\n[graph]\nkind = \"files\"\nedges = \"{0}/edges.txt\"\nfeatures = \"{0}/features.csv\"\nlabels = \"{0}/labels.csv\"\nsplit_file = \"{0}/split.csv\"\n",
        a.display()
    );
    let reload = tmp.path().join("reload.toml");
    fs::write(&reload, files_cfg).unwrap();
    let c = tmp.path().join("c");
    run_ok(&["generate", "--config", reload.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert_eq!(csv_files(&a), csv_files(&c));
}

fn trace(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn train_traces_and_single_block_equivalence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TOY);
    let out = tmp.path().join("train");
    let stdout = run_ok(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(stdout.lines().any(|l| l.starts_with("final full seed=5")));

    let full = trace(&out.join("trace_full_seed5.csv"));
    let chained = trace(&out.join("trace_sampled_chained_seed5.csv"));
    assert_eq!(full.len(), 12);
    assert_eq!(chained.len(), 12);
    for (a, b) in full.iter().zip(&chained) {
        let (la, lb): (f64, f64) = (a[1].parse().unwrap(), b[1].parse().unwrap());
        assert!((la - lb).abs() <= 1e-12, "{la} vs {lb}");
    }
    // Metrics appear exactly at the configured cadence.
    for row in &full {
        let epoch: usize = row[0].parse().unwrap();
        assert_eq!(row[6].is_empty(), !epoch.is_multiple_of(4), "epoch {epoch}");
    }
    let summary = fs::read_to_string(out.join("regimes.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn figure3_single_seed_and_identical_samplers() {
    let tmp = tempfile::tempdir().unwrap();
    let text = TOY.replace("seeds = 3\nbatches = 4", "seeds = 1\nbatches = 4").replace(
        "kind = \"saint_rw\"\nwalk_length = 2\nnum_seeds = 8",
        "kind = \"rns\"\nnum_parts = 1",
    );
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("f3");
    run_ok(&["figure3", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let summary = fs::read_to_string(out.join("figure3_summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    for r in &rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f[3], "0");
        assert_eq!(f[5], "ci_zero_single_seed");
    }
    assert_eq!(rows[..5], rows[5..]);
}

#[test]
fn verify_only_and_tolerance_override() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    run_ok(&["verify", "--only", "kernel_mass", "--out", out.to_str().unwrap()]);
    let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert!(manifest.lines().skip(1).all(|l| l.starts_with("kernel_mass_")));
    assert!(manifest.lines().skip(1).all(|l| l.split(',').nth(4) == Some("true")));

    let cfg = write_config(tmp.path(), "[verify]\ntolerance_override = 0.0\n");
    let res = gnnlab(&["verify", "--only", "rns_pair", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("FAILED rns_pair_mc"));
    assert!(stdout.contains("probability"), "provenance missing: {stdout}");
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(gnnlab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gnnlab(&["train", "--seed", "x"]).status.code(), Some(1));
    assert_eq!(gnnlab(&["train", "--out", out]).status.code(), Some(1));
    assert_eq!(gnnlab(&["verify", "--only", "nope", "--out", out]).status.code(), Some(1));
    assert_eq!(gnnlab(&["generate", "--config", "/nonexistent.toml"]).status.code(), Some(1));
    let bad = write_config(tmp.path(), "[graph]\nkind = \"sbm\"\nblock_sizes = [3]\nwat = 1\n");
    assert_eq!(gnnlab(&["generate", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(1));
    let one = write_config(tmp.path(), TOY.replace("[[sampler]]\nkind = \"saint_rw\"\nwalk_length = 2\nnum_seeds = 8\n", "").as_str());
    let res = gnnlab(&["figure3", "--config", one.to_str().unwrap(), "--out", out]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("at least two"));
    assert_eq!(gnnlab(&["--help"]).status.code(), Some(0));
}
