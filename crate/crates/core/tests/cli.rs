//! Drives the `stancefuse` binary end to end.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stancefuse::evaluation::{read_merged_report, MergedReport};

fn repo_data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn stancefuse(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stancefuse"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env_remove("STANCEFUSE_TRANSLATE_KEY")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn mini_config(dir: &Path, extra: &str) -> PathBuf {
    let mini = repo_data().join("mini");
    let mut text = format!("seed = 7\noutput_dir = {:?}\n", dir.join("out"));
    for topic in ["gun_control", "abortion"] {
        let _ = writeln!(text, "[data.{topic}]");
        for split in ["train", "validation", "test"] {
            let _ = writeln!(text, "{split} = {:?}", mini.join(topic).join(format!("{split}.tsv")));
        }
    }
    text.push_str(extra);
    if !extra.contains("[model]") {
        text.push_str("\n[model]\nfusion = \"concat\"\ncommon_dim = 16\nhidden_dim = 16\n");
    }
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn write_tsv(path: &Path, prefix: &str, n: usize) {
    let mut tsv = String::from("tweet_id\ttweet_text\timage_path\tstance\n");
    for i in 0..n {
        let stance = if i % 3 == 0 { "support" } else { "oppose" };
        let _ = writeln!(tsv, "{prefix}{i}\tTweet number {i} about the topic\t\t{stance}");
    }
    fs::write(path, tsv).unwrap();
}

fn shared_task_config(dir: &Path) -> PathBuf {
    let mut text = format!("seed = 1\noutput_dir = {:?}\n", dir.join("out"));
    for (topic, sizes) in [("gun_control", [918, 96, 150]), ("abortion", [888, 100, 149])] {
        let _ = writeln!(text, "[data.{topic}]");
        for (split, n) in ["train", "validation", "test"].into_iter().zip(sizes) {
            let p = dir.join(format!("{topic}_{split}.tsv"));
            write_tsv(&p, &format!("{topic}-{split}-"), n);
            let _ = writeln!(text, "{split} = {p:?}");
        }
    }
    text.push_str("[model]\nfusion = \"concat\"\n");
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn ingest_reports_split_sizes_then_is_up_to_date() {
    let dir = tempfile::tempdir().unwrap();
    let config = shared_task_config(dir.path());
    let out = stancefuse(&config, &["ingest"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let log = stderr(&out);
    assert!(log.contains("gun_control: 918/96/150"), "{log}");
    assert!(log.contains("abortion: 888/100/149"), "{log}");
    let before = fs::read(dir.path().join("out/corpus/abortion/test.jsonl")).unwrap();

    let again = stancefuse(&config, &["ingest"]);
    assert!(again.status.success());
    assert!(stderr(&again).contains("up to date"), "{}", stderr(&again));
    let forced = stancefuse(&config, &["--force", "ingest"]);
    assert!(forced.status.success());
    assert!(!stderr(&forced).contains("up to date"));
    assert_eq!(fs::read(dir.path().join("out/corpus/abortion/test.jsonl")).unwrap(), before);
}

#[test]
fn malformed_row_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = shared_task_config(dir.path());
    let bad = dir.path().join("abortion_validation.tsv");
    let mut lines: Vec<String> = fs::read_to_string(&bad).unwrap().lines().map(String::from).collect();
    lines[6] = "abortion-validation-5\tbroken row\t\tmaybe".into();
    fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let out = stancefuse(&config, &["ingest"]);
    assert!(!out.status.success());
    let log = stderr(&out);
    assert!(log.contains("abortion_validation.tsv: line 7"), "{log}");
    assert!(log.contains("maybe"), "{log}");
}

#[test]
fn augment_disabled_copies_input() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_config(dir.path(), "[augment]\nback_translation = false\nsynonyms = false\n");
    assert!(stancefuse(&config, &["ingest"]).status.success());
    let out = stancefuse(&config, &["augment"]);
    assert!(out.status.success(), "{}", stderr(&out));
    for topic in ["gun_control", "abortion"] {
        let input = fs::read(dir.path().join(format!("out/corpus/{topic}/train.jsonl"))).unwrap();
        let output = fs::read(dir.path().join(format!("out/augmented/{topic}/train.jsonl"))).unwrap();
        assert_eq!(input, output);
        let provenance = fs::read(dir.path().join(format!("out/augmented/{topic}/train.provenance.jsonl"))).unwrap();
        assert!(provenance.is_empty());
    }
}

#[test]
fn rebalancing_moves_ratio_toward_parity_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_config(
        dir.path(),
        "[augment]\nback_translation = true\nsynonyms = false\ntranslator = \"identity\"\ntarget_ratio = 1.0\n",
    );
    assert!(stancefuse(&config, &["ingest"]).status.success());
    let out = stancefuse(&config, &["augment"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let log = stderr(&out);
    let abortion: Vec<&str> = log.lines().skip_while(|l| !l.starts_with("abortion:")).take(3).collect();
    assert!(abortion[1].contains("ratio 1:2.64 (support minority)"), "{log}");
    assert!(abortion[2].contains("support   29  oppose   29  ratio 1:1.00"), "{log}");

    let first = fs::read(dir.path().join("out/augmented/abortion/train.provenance.jsonl")).unwrap();
    let forced = stancefuse(&config, &["--force", "augment"]);
    assert!(forced.status.success());
    let second = fs::read(dir.path().join("out/augmented/abortion/train.provenance.jsonl")).unwrap();
    assert_eq!(first, second);
    assert!(!first.is_empty());
}

#[cfg(feature = "http")]
#[test]
fn http_translator_without_key_fails_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_config(
        dir.path(),
        "[augment]\nsynonyms = false\ntranslator = \"http\"\nendpoint = \"http://127.0.0.1:9/translate\"\n",
    );
    assert!(stancefuse(&config, &["ingest"]).status.success());
    let out = stancefuse(&config, &["augment"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("STANCEFUSE_TRANSLATE_KEY"), "{}", stderr(&out));
    assert!(!dir.path().join("out/augmented").exists());
}

#[test]
fn stages_name_missing_prerequisites() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_config(dir.path(), "");
    for (stage, artifact) in [
        ("augment", "corpus/gun_control/train.jsonl"),
        ("train", "augmented/gun_control/train.jsonl"),
        ("evaluate", "runs/gun_control/grid.json"),
        ("merge", "reports/gun_control.json"),
    ] {
        let out = stancefuse(&config, &[stage]);
        assert!(!out.status.success(), "{stage}");
        let log = stderr(&out);
        assert!(log.contains("missing prerequisite") && log.contains(artifact), "{stage}: {log}");
    }
}

#[test]
fn lock_file_blocks_concurrent_writer() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_config(dir.path(), "");
    fs::create_dir_all(dir.path().join("out")).unwrap();
    fs::write(dir.path().join("out/.lock"), "123\n").unwrap();
    let out = stancefuse(&config, &["ingest"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains(".lock"), "{}", stderr(&out));
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_config(dir.path(), "");
    let text = fs::read_to_string(&config).unwrap().replace("seed = 7\n", "");
    fs::write(&config, text).unwrap();
    let out = stancefuse(&config, &["ingest"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("seed"), "{}", stderr(&out));
}

fn assert_reports_match(a: &MergedReport, b: &MergedReport) {
    assert_eq!(a.topics.len(), b.topics.len());
    assert_eq!(a.pooled, b.pooled);
    assert!((a.micro_f1 - b.micro_f1).abs() < 1e-9);
    for (x, y) in a.topics.iter().zip(&b.topics) {
        assert_eq!(x.topic, y.topic);
        assert_eq!(x.counts, y.counts);
        assert_eq!(x.scores.len(), y.scores.len());
        for (s, t) in x.scores.iter().zip(&y.scores) {
            assert_eq!((&s.id, s.gold), (&t.id, t.gold));
            assert!((s.prob_support - t.prob_support).abs() < 1e-9, "{}", s.id);
        }
    }
}

#[test]
fn bundled_mini_corpus_matches_golden_run() {
    let dir = tempfile::tempdir().unwrap();
    let mini = repo_data().join("mini");
    let text = fs::read_to_string(mini.join("config.toml"))
        .unwrap()
        .replace("output_dir = \"../../out\"", &format!("output_dir = {:?}", dir.path().join("out")))
        .replace("\"gun_control/", &format!("\"{}/gun_control/", mini.display()))
        .replace("\"abortion/", &format!("\"{}/abortion/", mini.display()))
        .replace("\"../lexicon\"", &format!("\"{}/../lexicon\"", mini.display()));
    let config = dir.path().join("config.toml");
    fs::write(&config, text).unwrap();
    let out = stancefuse(&config, &["--jobs", "2", "run"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let merged = read_merged_report(&dir.path().join("out/merged.json")).unwrap();
    let golden = read_merged_report(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_merged.json")).unwrap();
    assert_reports_match(&merged, &golden);
    let table = fs::read_to_string(dir.path().join("out/merged.txt")).unwrap();
    assert!(table.starts_with("Topic"), "{table}");
    assert!(table.contains("Micro F1:"));
}

#[test]
fn merge_of_one_topic_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let mini = repo_data().join("mini/abortion");
    let mut text = format!("seed = 3\noutput_dir = {:?}\n[data.abortion]\n", dir.path().join("out"));
    for split in ["train", "validation", "test"] {
        let _ = writeln!(text, "{split} = {:?}", mini.join(format!("{split}.tsv")));
    }
    text.push_str(
        "[augment]\nback_translation = false\nsynonyms = false\n\
         [model]\nfusion = \"t3\"\ncommon_dim = 4\nnum_heads = 2\nhidden_dim = 8\n\
         [training]\nlearning_rates = [0.01]\nbatch_sizes = [8]\nmax_epochs = 3\n",
    );
    let config = dir.path().join("c.toml");
    fs::write(&config, text).unwrap();
    let out = stancefuse(&config, &["--jobs", "1", "run"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let merged = read_merged_report(&dir.path().join("out/merged.json")).unwrap();
    assert_eq!(merged.topics.len(), 1);
    assert_eq!(merged.micro_f1, merged.topics[0].f1);
}
