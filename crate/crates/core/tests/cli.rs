//! End-to-end runs of the `feraug` binary on tiny procedural corpora.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use feraug::cli::{EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, EXIT_RUNTIME};
use feraug::data::read_manifest;
use feraug::gan::TranslatorCheckpoint;
use feraug::procedural::{write_toy_corpus, FaceStyle};

fn feraug(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feraug"))
        .current_dir(dir)
        .env("FERAUG_CACHE_DIR", dir.join("cache-env"))
        .args(args)
        .output()
        .expect("run feraug")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Tiny translator and classifier; `identities` real faces.
fn setup(identities: usize, k_values: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_toy_corpus(&dir.path().join("real"), "r", identities, 32, &FaceStyle::studio(), 1).unwrap();
    write_toy_corpus(&dir.path().join("field"), "f", 3, 32, &FaceStyle::field(), 2).unwrap();
    let config = format!(
        r#"seed = 3

[paths]
real_manifest = "real/manifest.csv"
output_dir = "out"

[identity_source]
kind = "procedural"
image_size = 32

[gan]
image_size = 32
generator_width = 1
discriminator_width = 1
steps = 2
batch_size = 4

[preprocess]
output_size = 16

[classifier]
input_size = 16
conv_widths = [2, 2, 2, 2]
dense_units = 4

[fit]
epochs = 2
batch_size = 8

[split]
val = 1
test = 1

[generate]
identities = {pool}

[sweep]
k_values = {k_values}
heldout = [{{ tag = "field", manifest = "field/manifest.csv" }}]
"#,
        pool = identities * 2
    );
    fs::write(dir.path().join("feraug.toml"), config).unwrap();
    dir
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let o = feraug(dir, args);
    assert_eq!(code(&o), EXIT_OK, "{args:?} failed: {}", stderr(&o));
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn prepare(dir: &Path) {
    run_ok(dir, &["--config", "feraug.toml", "train-translator"]);
    run_ok(dir, &["--config", "feraug.toml", "generate"]);
}

#[test]
fn missing_corpus_is_a_config_error_naming_the_path() {
    let dir = setup(4, "[0]");
    fs::remove_file(dir.path().join("real/manifest.csv")).unwrap();
    let o = feraug(dir.path(), &["--config", "feraug.toml", "train-translator"]);
    assert_eq!(code(&o), EXIT_CONFIG);
    assert!(stderr(&o).contains("real/manifest.csv"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists(), "nothing may be written on config errors");
}

#[test]
fn zero_step_translator_round_trips() {
    let dir = setup(4, "[0]");
    let out = run_ok(dir.path(), &["--config", "feraug.toml", "train-translator", "--steps", "0"]);
    let ckpt = dir.path().join("out/translator/translator.ckpt");
    assert!(out.contains("translator.ckpt"));
    let ck = TranslatorCheckpoint::load(&ckpt).unwrap();
    assert_eq!(ck.step, 0);
    assert_eq!(ck.config.digest(), ck.config_digest);
    assert_eq!(ck.config.seed, 3);
    assert!(dir.path().join("out/translator/config.toml").exists());
}

#[test]
fn generate_counts_and_determinism() {
    let dir = setup(4, "[0]");
    run_ok(dir.path(), &["--config", "feraug.toml", "train-translator"]);
    run_ok(dir.path(), &["--config", "feraug.toml", "generate", "--identities", "1"]);
    let gen = dir.path().join("out/generated");
    assert_eq!(read_manifest(&gen.join("manifest.csv")).unwrap().len(), 6);
    assert_eq!(fs::read_dir(gen.join("images")).unwrap().count(), 6);

    run_ok(dir.path(), &["--config", "feraug.toml", "generate", "--identities", "109"]);
    let first = fs::read(gen.join("manifest.csv")).unwrap();
    assert_eq!(read_manifest(&gen.join("manifest.csv")).unwrap().len(), 654);
    run_ok(dir.path(), &["--config", "feraug.toml", "generate", "--identities", "109"]);
    assert_eq!(fs::read(gen.join("manifest.csv")).unwrap(), first);

    let other = run_ok(dir.path(), &["--config", "feraug.toml", "--seed", "4", "generate", "--identities", "109"]);
    assert!(other.contains("654 images"));
    assert_ne!(fs::read(gen.join("manifest.csv")).unwrap(), first);
}

#[test]
fn negative_k_fails_before_running() {
    let dir = setup(4, "[0, -1]");
    let o = feraug(dir.path(), &["--config", "feraug.toml", "sweep"]);
    assert_eq!(code(&o), EXIT_CONFIG);
    assert!(stderr(&o).contains("nonnegative"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

fn csv_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(String::from).collect()
}

#[test]
fn small_sweep_emits_rows_plots_and_reports() {
    let dir = setup(6, "[0, 1]");
    prepare(dir.path());
    let out = run_ok(dir.path(), &["--config", "feraug.toml", "sweep"]);
    assert!(out.contains("best k"), "{out}");
    let root = dir.path().join("out/sweep");
    let rows = csv_rows(&root.join("sweep.csv"));
    assert_eq!(rows.len(), 3, "{rows:?}");
    let header = fs::read_to_string(root.join("sweep.csv")).unwrap();
    assert!(header.starts_with("k,composition,train_acc,test_acc,field_acc,model_tag,seed\n"));
    assert!(rows[1].starts_with("1,RFEs + 1 × GFEs,"));
    let plot = fs::read_to_string(root.join("accuracy_vs_composition.svg")).unwrap();
    assert!(plot.contains("RFEs + 1 × GFEs"));
    for tag in ["real-s3", "mix-k1-s3", "synthetic-s3"] {
        assert!(root.join(format!("reports/{tag}__field.confusion.svg")).exists());
        assert!(root.join(format!("reports/{tag}__test.metrics.svg")).exists());
        assert!(root.join(format!("models/{tag}.ckpt")).exists());
    }
    assert!(root.join("config.toml").exists());

    // Re-rendering from persisted rows gives the same bytes.
    let csv = fs::read(root.join("sweep.csv")).unwrap();
    run_ok(dir.path(), &["--config", "feraug.toml", "report"]);
    assert_eq!(fs::read(root.join("sweep.csv")).unwrap(), csv);

    // The embedded config alone re-runs the experiment (all rows resume).
    let again = run_ok(dir.path(), &["--config", "out/sweep/config.toml", "sweep"]);
    assert!(again.contains("best k"));
    assert_eq!(fs::read(root.join("sweep.csv")).unwrap(), csv);
}

#[test]
fn failed_point_keeps_finished_rows_and_exits_partial() {
    let dir = setup(6, "[0, 1]");
    prepare(dir.path());
    // A directory where the k=1 row file should go makes that point fail.
    let blocker: PathBuf = dir.path().join("out/sweep/rows/mix-k1-s3.json");
    fs::create_dir_all(blocker.join("x")).unwrap();
    let o = feraug(dir.path(), &["--config", "feraug.toml", "sweep"]);
    assert_eq!(code(&o), EXIT_PARTIAL, "{}", stderr(&o));
    assert!(stderr(&o).contains("mix-k1-s3"));
    assert!(dir.path().join("out/sweep/rows/real-s3.json").is_file());
    assert_eq!(csv_rows(&dir.path().join("out/sweep/sweep.csv")).len(), 2);
}

#[test]
fn assemble_train_fer_and_evaluate() {
    let dir = setup(6, "[0, 1]");
    prepare(dir.path());
    let out = run_ok(dir.path(), &["--config", "feraug.toml", "assemble", "--k", "1"]);
    assert!(out.contains("train: 8 identities"), "{out}");
    let adir = dir.path().join("out/assembled/mix-k1-s3");
    assert_eq!(read_manifest(&adir.join("train.csv")).unwrap().len(), 48);

    run_ok(dir.path(), &["--config", "feraug.toml", "train-fer", "--k", "0"]);
    let model = dir.path().join("out/fer/models/real-s3.ckpt");
    assert!(model.exists());

    let out = run_ok(
        dir.path(),
        &[
            "--config",
            "feraug.toml",
            "evaluate",
            "--model",
            model.to_str().unwrap(),
            "--manifest",
            "field/manifest.csv",
            "--tag",
            "field",
            "--train-manifest",
            "out/fer/manifests/real-s3/train.csv",
        ],
    );
    assert!(out.contains("(cross-database)"), "{out}");
    assert!(dir.path().join("out/evaluations/real-s3__field.json").exists());

    // The real corpus overlaps its own training manifest.
    let o = feraug(
        dir.path(),
        &[
            "--config",
            "feraug.toml",
            "evaluate",
            "--model",
            model.to_str().unwrap(),
            "--manifest",
            "real/manifest.csv",
            "--tag",
            "real",
            "--train-manifest",
            "out/fer/manifests/real-s3/train.csv",
        ],
    );
    assert_eq!(code(&o), EXIT_RUNTIME);
    assert!(stderr(&o).contains("overlaps"), "{}", stderr(&o));
}
