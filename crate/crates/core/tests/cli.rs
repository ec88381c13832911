use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use mpfscope::microscope::{ClassifierModel, DESCRIPTOR_LEN};
use mpfscope::sentinel::{write_scores, ScoreMatrix};
use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }

    fn error_code(&self) -> String {
        let v: Value = serde_json::from_str(&self.stderr).unwrap();
        v["error"]["code"].as_str().unwrap().to_string()
    }
}

fn mpfscope(args: &[&str], seed_env: Option<&str>) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mpfscope"));
    cmd.args(args).env_remove("MPFSCOPE_SEED");
    if let Some(s) = seed_env {
        cmd.env("MPFSCOPE_SEED", s);
    }
    let out = cmd.output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small physics corpus; returns the manifest path.
fn small_corpus(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["synth", "--regime", "physics", "--count", "3", "--height", "32", "--width", "32", "--out", p(dir)];
    args.extend_from_slice(extra);
    let r = mpfscope(&args, None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    dir.join("manifest.json")
}

fn first_video(manifest: &Path) -> PathBuf {
    let v: Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    manifest.parent().unwrap().join(v["entries"][0]["file"].as_str().unwrap())
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(mpfscope(&["--help"], None).code, 0);
    assert_eq!(mpfscope(&["sample", "--help"], None).code, 0);
    assert_eq!(mpfscope(&["sample", "--bogus", "1"], None).code, 3);
    assert_eq!(mpfscope(&["frobnicate"], None).code, 3);
    let r = mpfscope(&["sample"], None);
    assert_eq!(r.code, 3);
    assert_eq!(r.error_code(), "cli.config");
}

#[test]
fn missing_input_is_an_input_error() {
    let r = mpfscope(&["sample", "--input", "/nonexistent/video.mpfraw"], None);
    assert_eq!(r.code, 2);
    assert!(r.error_code().starts_with("sampling."), "{}", r.stderr);
    assert!(r.stdout.is_empty());
}

#[test]
fn bad_config_values_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[synth]\ncount = 2\nno-such-key = 1\n").unwrap();
    let out = dir.path().join("c");
    assert_eq!(mpfscope(&["--config", p(&cfg), "synth", "--out", p(&out)], None).code, 3);

    let r = mpfscope(&["synth", "--count", "1", "--out", p(&out)], Some("not-a-number"));
    assert_eq!(r.code, 3);

    let r = mpfscope(&["synth", "--count", "1", "--drift", "-1", "--out", p(&out)], None);
    assert_eq!(r.code, 3, "{}", r.stderr);
}

#[test]
fn config_files_mirror_flags() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    let flags = mpfscope(
        &["synth", "--regime", "decoder", "--count", "2", "--latent-dim", "8", "--drift", "0.1", "--height", "24", "--width", "24", "--seed", "4", "--out", p(&a)],
        None,
    );
    assert_eq!(flags.code, 0, "{}", flags.stderr);

    let toml = dir.path().join("cfg.toml");
    fs::write(
        &toml,
        format!(
            "[synth]\nregime = \"decoder\"\ncount = 2\nlatent-dim = 8\ndrift = 0.1\nheight = 24\nwidth = 24\nseed = 4\nout = \"{}\"\n",
            p(&b)
        ),
    )
    .unwrap();
    let from_toml = mpfscope(&["--config", p(&toml), "synth"], None);
    assert_eq!(from_toml.code, 0, "{}", from_toml.stderr);

    let json = dir.path().join("cfg.json");
    fs::write(
        &json,
        serde_json::json!({"regime": "decoder", "count": 2, "latent-dim": 8, "drift": 0.1, "height": 24, "width": 24, "seed": 4}).to_string(),
    )
    .unwrap();
    let from_json = mpfscope(&["--config", p(&json), "synth", "--out", p(&c)], None);
    assert_eq!(from_json.code, 0, "{}", from_json.stderr);

    let hash = |r: &Run| r.json()["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash(&flags), hash(&from_toml));
    assert_eq!(hash(&flags), hash(&from_json));
    assert_eq!(fs::read(first_video(&a.join("manifest.json"))).unwrap(), fs::read(first_video(&b.join("manifest.json"))).unwrap());

    // flags win over the file
    let d = dir.path().join("d");
    let overridden = mpfscope(&["--config", p(&json), "synth", "--seed", "5", "--out", p(&d)], None);
    assert_ne!(hash(&overridden), hash(&flags));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["synth", "--regime", "physics", "--count", "1", "--height", "16", "--width", "16", "--out"];
    let run = |name: &str, seed: Option<&str>, env: Option<&str>| {
        let out = dir.path().join(name);
        let mut args: Vec<&str> = base.to_vec();
        args.push(p(&out));
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        let r = mpfscope(&args, env);
        assert_eq!(r.code, 0, "{}", r.stderr);
        r.json()["config_hash"].as_str().unwrap().to_string()
    };
    let by_flag = run("flag", Some("77"), None);
    let by_env = run("env", None, Some("77"));
    let default = run("default", None, None);
    let both = run("both", Some("77"), Some("3"));
    assert_eq!(by_flag, by_env);
    assert_eq!(by_flag, both);
    assert_ne!(by_flag, default);
}

#[test]
fn sample_residual_consistency_chain() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_corpus(&dir.path().join("corpus"), &["--length", "12"]);
    let video = first_video(&manifest);

    let seg = dir.path().join("seg.mpfraw");
    let r = mpfscope(&["sample", "--input", p(&video), "--mode", "stochastic", "--seed", "3", "--out", p(&seg)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["source_len"], 12);
    assert_eq!(v["length"], 8);
    assert!(v["start"].as_u64().unwrap() <= 4);
    assert_eq!(v["short"], false);

    let maps = dir.path().join("maps");
    let r = mpfscope(&["residual", "--input", p(&seg), "--strategy", "change_mask", "--out", p(&maps)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["files"].as_array().unwrap().len(), 7);

    let r = mpfscope(&["consistency", "--input", p(&maps), "--json"], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    for k in ["c_qty", "c_spa", "s_cons"] {
        let x = v[k].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&x), "{k} = {x}");
    }
    assert_eq!(v["per_frame"].as_array().unwrap().len(), 7);

    let text = mpfscope(&["consistency", "--input", p(&maps)], None);
    assert!(text.stdout.starts_with("c_qty"));
}

#[test]
fn residual_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let video = first_video(&small_corpus(&dir.path().join("corpus"), &[]));
    let run = |name: &str| {
        let out = dir.path().join(name);
        let r = mpfscope(&["residual", "--input", p(&video), "--strategy", "freq", "--out", p(&out)], None);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        (r.stdout, files)
    };
    let (x, y) = (run("x"), run("y"));
    assert_eq!(x.0, y.0);
    for (a, b) in x.1.iter().zip(&y.1) {
        assert_eq!(a.0, b.0);
        assert!(a.1 == b.1, "{} differs", a.0);
    }
    assert_eq!(x.1.len(), y.1.len());
}

#[test]
fn gate_only_detection() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.mpfs");
    write_scores(&scores, &ScoreMatrix::logits(vec![2.0, 3.0, 4.0]).unwrap()).unwrap();

    let r = mpfscope(&["detect", "--scores", p(&scores)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["s_agg"], 3.0);
    assert_eq!(v["verdict"], "OffManifold");
    assert_eq!(v["frames"], 3);

    // a tie is not off-manifold
    let r = mpfscope(&["detect", "--scores", p(&scores), "--tau", "3"], None);
    assert_eq!(r.json()["verdict"], "OnManifold");

    fs::write(&scores, b"not a score file").unwrap();
    let r = mpfscope(&["detect", "--scores", p(&scores)], None);
    assert_eq!(r.code, 2);
    assert!(r.error_code().starts_with("sentinel."));
}

#[test]
fn pipeline_stops_at_the_gate_or_runs_stage_two() {
    let dir = tempfile::tempdir().unwrap();
    let video = first_video(&small_corpus(&dir.path().join("corpus"), &[]));
    let model = dir.path().join("model.json");
    ClassifierModel::constant(7 * DESCRIPTOR_LEN, 0.0).save(&model).unwrap();

    let hot = dir.path().join("hot.mpfs");
    write_scores(&hot, &ScoreMatrix::logits(vec![1.5; 8]).unwrap()).unwrap();
    let r = mpfscope(&["detect", "--frames", p(&video), "--scores", p(&hot), "--model", p(&model)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["stage1"]["verdict"], "OffManifold");
    assert!(v["stage2"].is_null());
    assert_eq!(v["final"], "AI");

    let r = mpfscope(&["detect", "--frames", p(&video), "--model", p(&model)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["stage1"]["verdict"], "OnManifold");
    assert_eq!(v["stage2"]["probability"], 0.5);
    assert_eq!(v["stage2"]["verdict"], "Real");
    assert_eq!(v["final"], "Real");

    let r = mpfscope(&["detect", "--frames", p(&video), "--model", p(&model), "--length", "4"], None);
    assert_eq!(r.code, 2, "a 3-residual segment does not fit the model");
    assert!(r.error_code().starts_with("microscope."), "{}", r.stderr);
}

#[test]
fn batch_detect_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let r = mpfscope(&["synth", "--count", "6", "--height", "24", "--width", "24", "--out", p(&corpus)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let manifest = corpus.join("manifest.json");
    let model = dir.path().join("model.json");
    let r = mpfscope(&["train", "--corpus", p(&manifest), "--out", p(&model)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["train_samples"], 12);

    let verdicts = dir.path().join("verdicts.json");
    let r = mpfscope(&["detect", "--corpus", p(&manifest), "--model", p(&model), "--jobs", "2", "--out", p(&verdicts)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["results"].as_array().unwrap().len(), 12);

    let csv = dir.path().join("q.csv");
    let r = mpfscope(&["eval", "--pred", p(&verdicts), "--truth", p(&manifest), "--csv", p(&csv)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let acc = r.json()["overall"]["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(fs::read_to_string(&csv).unwrap().starts_with("subset,composite,stage2_accuracy,remaining_samples"));

    let r = mpfscope(&["detect", "--corpus", p(&manifest), "--model", p(&model), "--scores", p(&model)], None);
    assert_eq!(r.code, 3);
}
