//! End-to-end tests of the `gimm` binary: exit codes, determinism, and the
//! stage-chaining contract on small fixtures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gimm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gimm"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    gimm()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Small fast settings on the bundled synthetic dataset.
fn tiny_args<'a>(out_dir: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "--out",
        out_dir,
        "--set",
        "motif_graphs=8",
        "--set",
        "gen_hidden_dim=8",
        "--set",
        "gen_epochs=2",
        "--set",
        "con_epochs=2",
        "--set",
        "con_embed_dim=8",
        "--set",
        "con_batch_size=4",
        "--set",
        "runs=1",
        "--set",
        "kfolds=2",
        "--set",
        "svm_iters=40",
        "--set",
        "logreg_epochs=50",
    ];
    args.extend_from_slice(extra);
    args
}

fn mutag_mini_dir() -> PathBuf {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.pop();
    p.pop();
    p.join("data").join("MUTAG-mini")
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = tiny_args("out", &["--set", "bogus=1", "train-generator"]);
    args.rotate_right(0);
    let out = run_in(tmp.path(), &args);
    assert_code(&out, 2);
}

#[test]
fn missing_dataset_path_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "--set",
            "dataset_format=tudataset",
            "--set",
            "dataset_path=/nonexistent/dir",
            "train-generator",
        ],
    );
    assert_code(&out, 2);
}

#[test]
fn malformed_dataset_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("DS");
    fs::create_dir_all(&data).unwrap();
    fs::write(data.join("DS_A.txt"), "1, oops\n").unwrap();
    fs::write(data.join("DS_graph_indicator.txt"), "1\n1\n").unwrap();
    fs::write(data.join("DS_graph_labels.txt"), "0\n").unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "--set",
            "dataset_format=tudataset",
            "--set",
            &format!("dataset_path={}", data.display()),
            "--set",
            "dataset_name=DS",
            "train-generator",
        ],
    );
    assert_code(&out, 3);
}

#[test]
fn generator_checkpoint_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_in(tmp.path(), &tiny_args("a", &["--seed", "3", "train-generator"]));
    assert_code(&a, 0);
    let b = run_in(tmp.path(), &tiny_args("b", &["--seed", "3", "train-generator"]));
    assert_code(&b, 0);
    let ca = fs::read(tmp.path().join("a/generator.json")).unwrap();
    let cb = fs::read(tmp.path().join("b/generator.json")).unwrap();
    assert_eq!(ca, cb, "checkpoints differ between identical runs");

    let c = run_in(tmp.path(), &tiny_args("c", &["--seed", "4", "train-generator"]));
    assert_code(&c, 0);
    let cc = fs::read(tmp.path().join("c/generator.json")).unwrap();
    assert_ne!(ca, cc, "different seeds should change the checkpoint");
}

#[test]
fn stage_chain_on_motif() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &tiny_args("out", &["train-generator"]));
    assert_code(&out, 0);
    assert!(tmp.path().join("out/generator_log.csv").exists());
    let log = fs::read_to_string(tmp.path().join("out/generator_log.csv")).unwrap();
    assert!(log.starts_with("epoch,i_hat,reg,loss\n"));
    assert_eq!(log.lines().count(), 3); // header + 2 epochs

    let out = run_in(
        tmp.path(),
        &tiny_args("out", &["train-encoder", "--generator", "out/generator.json"]),
    );
    assert_code(&out, 0);

    let out = run_in(
        tmp.path(),
        &tiny_args(
            "out",
            &[
                "embed",
                "--generator",
                "out/generator.json",
                "--encoder",
                "out/encoder.json",
            ],
        ),
    );
    assert_code(&out, 0);
    let csv = fs::read_to_string(tmp.path().join("out/embeddings.csv")).unwrap();
    assert!(csv.starts_with("id,dim_0"));
    assert_eq!(csv.lines().count(), 9); // header + 8 graphs

    // embeddings are bit-identical on re-run
    let out = run_in(
        tmp.path(),
        &tiny_args(
            "out2",
            &[
                "embed",
                "--generator",
                "out/generator.json",
                "--encoder",
                "out/encoder.json",
            ],
        ),
    );
    assert_code(&out, 0);
    let csv2 = fs::read_to_string(tmp.path().join("out2/embeddings.csv")).unwrap();
    assert_eq!(csv, csv2);
}

#[test]
fn stale_checkpoint_version_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &tiny_args("out", &["train-generator"]));
    assert_code(&out, 0);
    let path = tmp.path().join("out/generator.json");
    let body = fs::read_to_string(&path)
        .unwrap()
        .replace("\"format_version\": 1", "\"format_version\": 999");
    fs::write(&path, body).unwrap();
    let out = run_in(
        tmp.path(),
        &tiny_args("out", &["train-encoder", "--generator", "out/generator.json"]),
    );
    assert_code(&out, 3);
}

#[test]
fn evaluate_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &tiny_args("out", &["evaluate"]));
    assert_code(&out, 0);
    assert!(tmp.path().join("out/report.csv").exists());
    assert!(tmp.path().join("out/report.json").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("accuracy"), "{stdout}");
    // the resolved config is recorded alongside the artifacts
    assert!(tmp.path().join("out/run.cfg").exists());
}

#[test]
fn ablate_single_variant_and_sweep_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &tiny_args("out", &["ablate", "--variant", "uni"]));
    assert_code(&out, 0);
    assert!(tmp.path().join("out/report_uni.json").exists());

    let out = run_in(
        tmp.path(),
        &tiny_args(
            "out",
            &["--set", "sweep_grid=0.0,1.0", "sweep"],
        ),
    );
    assert_code(&out, 0);
    let csv = fs::read_to_string(tmp.path().join("out/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3); // header + 2 rows
}

#[test]
fn full_chain_on_bundled_mutag_mini() {
    let data = mutag_mini_dir();
    assert!(data.exists(), "bundled fixture missing: {}", data.display());
    let tmp = tempfile::tempdir().unwrap();
    let path_arg = format!("dataset_path={}", data.display());
    let out = run_in(
        tmp.path(),
        &[
            "--out",
            "out",
            "--set",
            "dataset_format=tudataset",
            "--set",
            &path_arg,
            "--set",
            "dataset_name=MUTAG-mini",
            "--set",
            "gen_hidden_dim=16",
            "--set",
            "gen_epochs=3",
            "--set",
            "con_epochs=3",
            "--set",
            "con_embed_dim=16",
            "--set",
            "con_batch_size=5",
            "--set",
            "runs=1",
            "--set",
            "kfolds=2",
            "--set",
            "svm_iters=60",
            "all",
        ],
    );
    assert_code(&out, 0);
    let csv = fs::read_to_string(tmp.path().join("out/embeddings.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11); // header + 10 graphs
    assert!(tmp.path().join("out/report.json").exists());
}

#[test]
fn sbm_node_task_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "--out",
            "out",
            "--set",
            "dataset_format=sbm",
            "--set",
            "sbm_blocks=12,12",
            "--set",
            "sbm_features=6",
            "--set",
            "sbm_p_in=0.5",
            "--set",
            "sbm_p_out=0.05",
            "--set",
            "gen_hidden_dim=8",
            "--set",
            "gen_epochs=2",
            "--set",
            "con_epochs=2",
            "--set",
            "con_embed_dim=8",
            "--set",
            "runs=1",
            "--set",
            "logreg_epochs=50",
            "all",
        ],
    );
    assert_code(&out, 0);
    let csv = fs::read_to_string(tmp.path().join("out/embeddings.csv")).unwrap();
    assert_eq!(csv.lines().count(), 25); // header + 24 nodes
}
