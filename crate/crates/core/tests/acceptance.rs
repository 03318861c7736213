//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stancefuse::augment::{
    augment_train, expand_noun, rebalance, write_records, AugmentOptions, AugmentServices, AugmentationDetail,
    CharSpan, ExpansionPolicy, IdentityTranslator, Lexicon, LexiconTagger, MostFrequentSense, WordNet,
};
use stancefuse::corpus::{load_split, write_jsonl, Dataset, Split, StanceLabel, Topic, Tweet};
use stancefuse::evaluation::{
    accuracy, auc, confusion, f1, macro_f1, merge_micro_f1, read_merged_report, ScoredExample, TopicReport,
};
use stancefuse::exec::Execution;
use stancefuse::model::{
    cross_attention_trace, fuse_concat, semantic_similarity_trace, CrossAttentionParams, EncoderOutput,
    FusionConfig, FusionKind, ImageEncoderFamily, SemanticSimilarityParams, StanceModel,
};
use stancefuse::training::{
    default_grid, read_history, select_best, select_optimizer, EpochRecord, GridSummary, ModelDescription,
    OptimizerKind, TrainHistory,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<StanceLabel> {
    (0..n).map(|_| StanceLabel::ALL[rng.random_range(0..2)]).collect()
}

// Reference metrics, written from the definitions without sharing code.

fn ref_f1_for(pred: &[StanceLabel], gold: &[StanceLabel], class: StanceLabel) -> f64 {
    let tp = pred.iter().zip(gold).filter(|(p, g)| **p == class && **g == class).count() as f64;
    let predicted = pred.iter().filter(|p| **p == class).count() as f64;
    let actual = gold.iter().filter(|g| **g == class).count() as f64;
    if predicted == 0.0 || actual == 0.0 || tp == 0.0 {
        return 0.0;
    }
    let precision = tp / predicted;
    let recall = tp / actual;
    100.0 * 2.0 * precision * recall / (precision + recall)
}

fn ref_auc(scores: &[f64], gold: &[StanceLabel]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, gi) in gold.iter().enumerate() {
        for (j, gj) in gold.iter().enumerate() {
            if gi.is_positive() && !gj.is_positive() {
                pairs += 1.0;
                wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    (pairs > 0.0).then(|| 100.0 * wins / pairs)
}

fn metric_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut auc_cases = 0;
    for case in 0..1000 {
        let n = rng.random_range(1..80);
        let gold = random_labels(&mut rng, n);
        let pred = random_labels(&mut rng, n);
        let decimals = [1, 2, 6][rng.random_range(0..3)];
        let scale = 10f64.powi(decimals);
        let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * scale).round() / scale).collect();
        let c = confusion(&pred, &gold).map_err(|e| e.to_string())?;
        let expected_f1 = ref_f1_for(&pred, &gold, StanceLabel::Support);
        let expected_macro =
            (ref_f1_for(&pred, &gold, StanceLabel::Support) + ref_f1_for(&pred, &gold, StanceLabel::Oppose)) / 2.0;
        let expected_acc = 100.0 * pred.iter().zip(&gold).filter(|(p, g)| p == g).count() as f64 / n as f64;
        let mut diffs = vec![
            (f1(&c).unwrap() - expected_f1).abs(),
            (macro_f1(&c).unwrap() - expected_macro).abs(),
            (accuracy(&c).unwrap() - expected_acc).abs(),
        ];
        let pairs: Vec<(f64, StanceLabel)> = scores.iter().copied().zip(gold.iter().copied()).collect();
        match (ref_auc(&scores, &gold), auc(&pairs)) {
            (Some(r), Ok(a)) => {
                auc_cases += 1;
                diffs.push((a - r).abs());
            }
            (None, Err(_)) => {}
            (r, a) => return Err(format!("case {case}: auc definedness differs ({r:?} vs {a:?})")),
        }
        worst = diffs.into_iter().fold(worst, f64::max);
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    ensure(worst < 1e-9, || format!("max |Δ| {worst:e}"))?;
    Ok(format!(
        "1000 cases ({auc_cases} with defined AUC), max |Δ| {worst:.1e}, {:.2?}",
        start.elapsed()
    ))
}

fn scored(rng: &mut ChaCha8Rng, prefix: &str, n: usize) -> Vec<ScoredExample> {
    (0..n)
        .map(|i| ScoredExample {
            id: format!("{prefix}-{i}"),
            prob_support: rng.random(),
            gold: StanceLabel::ALL[rng.random_range(0..2)],
        })
        .collect()
}

fn two_path_micro_f1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (na, nb) = (rng.random_range(1..60), rng.random_range(1..60));
        let a = scored(&mut rng, "gc", na);
        let b = scored(&mut rng, "ab", nb);
        let reports = [
            TopicReport::from_scores(Topic::GunControl, a.clone()).map_err(|e| e.to_string())?,
            TopicReport::from_scores(Topic::Abortion, b.clone()).map_err(|e| e.to_string())?,
        ];
        let merged = merge_micro_f1(&reports).map_err(|e| e.to_string())?;
        let all: Vec<&ScoredExample> = a.iter().chain(&b).collect();
        let pred: Vec<StanceLabel> = all.iter().map(|s| s.predicted()).collect();
        let gold: Vec<StanceLabel> = all.iter().map(|s| s.gold).collect();
        let direct = f1(&confusion(&pred, &gold).unwrap()).unwrap();
        worst = worst.max((merged.micro_f1 - direct).abs());
    }
    ensure(worst < 1e-12, || format!("max |Δ| {worst:e}"))?;
    Ok(format!("200 cases, max |Δ| {worst:.1e}"))
}

fn random_output(rng: &mut ChaCha8Rng, rows: usize, dim: usize, masked: bool) -> EncoderOutput {
    let seq = Array2::from_shape_fn((rows, dim), |_| rng.random_range(-2.0..2.0));
    let mut mask: Vec<bool> = (0..rows).map(|_| !masked || rng.random_bool(0.7)).collect();
    let keep = rng.random_range(0..rows);
    mask[keep] = true;
    let pooled = seq.mean_axis(ndarray::Axis(0)).unwrap();
    EncoderOutput::new(seq, pooled, mask).unwrap()
}

fn fusion_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_sum: f64 = 0.0;
    let mut masked_weight: f64 = 0.0;
    let mut worst_perm: f64 = 0.0;
    let mut worst_diff: f64 = 0.0;
    for case in 0..500 {
        let (nt, nv) = (rng.random_range(1..7), rng.random_range(1..7));
        let (dt, dv) = (rng.random_range(1..9), rng.random_range(1..9));
        let heads = rng.random_range(1..4);
        let c = heads * rng.random_range(1..4);
        let text = random_output(&mut rng, nt, dt, true);
        let image = random_output(&mut rng, nv, dv, true);
        let p2 = CrossAttentionParams::init(dt, dv, c, heads, &mut rng);
        let p3 = SemanticSimilarityParams::init(dt, dv, c, &mut rng);
        let t2 = cross_attention_trace(&text, &image, &p2).map_err(|e| e.to_string())?;
        let t3 = semantic_similarity_trace(&text, &image, &p3).map_err(|e| e.to_string())?;
        for map in t2.attention.iter().chain(&t3.attention) {
            for row in map.weights.rows() {
                worst_sum = worst_sum.max((row.sum() - 1.0).abs());
                for (w, &m) in row.iter().zip(&map.key_mask) {
                    if !m {
                        masked_weight = masked_weight.max(w.abs());
                    }
                }
            }
        }
        ensure(fuse_concat(&text, &image).len() == dt + dv, || format!("case {case}: concat dim"))?;
        ensure(t3.fused.len() == 4 * c, || format!("case {case}: t3 dim {} != {}", t3.fused.len(), 4 * c))?;

        let mut order: Vec<usize> = (0..nv).collect();
        order.shuffle(&mut rng);
        let permuted = EncoderOutput::new(
            image.sequence.select(ndarray::Axis(0), &order),
            image.pooled.clone(),
            order.iter().map(|&i| image.mask[i]).collect(),
        )
        .unwrap();
        let moved = cross_attention_trace(&text, &permuted, &p2).unwrap().fused;
        for (x, y) in t2.fused.iter().zip(moved.iter()) {
            worst_perm = worst_perm.max((x - y).abs());
        }

        // Self-alignment: one token, identical inputs, shared projection.
        let one = random_output(&mut rng, 1, dt, false);
        let mut shared = SemanticSimilarityParams::init(dt, dt, c, &mut rng);
        shared.pv = shared.pt.clone();
        shared.bpv = shared.bpt.clone();
        let (d_text, d_image) = semantic_similarity_trace(&one, &one, &shared).unwrap().difference.unwrap();
        for v in d_text.iter().chain(d_image.iter()) {
            worst_diff = worst_diff.max(v.abs());
        }
    }
    ensure(worst_sum <= 1e-6, || format!("attention row sum off by {worst_sum:e}"))?;
    ensure(masked_weight == 0.0, || format!("masked weight {masked_weight:e}"))?;
    ensure(worst_perm < 1e-12, || format!("permutation changed output by {worst_perm:e}"))?;
    ensure(worst_diff == 0.0, || format!("self-aligned difference {worst_diff:e}"))?;
    Ok(format!(
        "500 cases, row-sum err {worst_sum:.1e}, masked weight 0, permutation |Δ| {worst_perm:.1e}, difference block 0"
    ))
}

fn gradient_check() -> Check {
    let start = Instant::now();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for kind in FusionKind::ALL {
        for seed in 0..3u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let (dt, dv, c) = (rng.random_range(2..9), rng.random_range(2..9), 8);
            let mut config = FusionConfig::new(kind, c).with_heads(2);
            config.classifier_hidden = rng.random_range(2..9);
            let mut model = StanceModel::new(config, dt, dv, seed).map_err(|e| e.to_string())?;
            for t in model.params.tensors_mut() {
                t.mapv_inplace(|x| x + rng.random_range(-0.1..0.1));
            }
            let (nt, nv) = (rng.random_range(1..6), rng.random_range(1..6));
            let text = random_output(&mut rng, nt, dt, true);
            let image = random_output(&mut rng, nv, dv, true);
            let gold = StanceLabel::ALL[(seed % 2) as usize];
            let (_, grad) = model
                .loss_and_grad(&text, &image, gold, None::<&mut ChaCha8Rng>)
                .map_err(|e| e.to_string())?;
            let analytic: Vec<(String, Vec<f64>)> = grad
                .named_tensors()
                .into_iter()
                .map(|(n, t)| (n, t.iter().copied().collect()))
                .collect();
            let names: Vec<String> = analytic.iter().map(|(n, _)| n.clone()).collect();
            ensure(names.iter().any(|n| n.starts_with("classifier.")), || "classifier not covered".into())?;
            for (ti, (name, values)) in analytic.iter().enumerate() {
                for (k, &a) in values.iter().enumerate() {
                    let probe = |delta: f64| {
                        let mut m = model.clone();
                        m.params.tensors_mut()[ti].as_slice_mut().unwrap()[k] += delta;
                        m.loss(&text, &image, gold).unwrap()
                    };
                    let numeric = (probe(eps) - probe(-eps)) / (2.0 * eps);
                    let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                    if rel >= 1e-4 {
                        return Err(format!("{kind} {name}[{k}]: analytic {a} numeric {numeric}"));
                    }
                    worst = worst.max(rel);
                    checked += 1;
                }
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "3 heads x 3 seeds, {checked} parameters, max rel err {worst:.1e}, {:.2?}",
        start.elapsed()
    ))
}

fn augment_services_run(train: &Dataset, lexicon: &WordNet, seed: u64) -> Result<(Vec<u8>, Vec<u8>, Dataset, Vec<stancefuse::augment::AugmentationRecord>), String> {
    let tagger = LexiconTagger::new(lexicon);
    let services = AugmentServices {
        translator: &IdentityTranslator,
        tagger: &tagger,
        lexicon,
        wsd: &MostFrequentSense,
    };
    let options = AugmentOptions {
        policy: ExpansionPolicy { max_per_example: 4 },
        seed,
        ..AugmentOptions::default()
    };
    let out = augment_train(train, &options, &services, Execution::Parallel).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().unwrap();
    write_jsonl(&out.dataset, &dir.path().join("a.jsonl")).unwrap();
    write_records(&dir.path().join("p.jsonl"), &out.records).unwrap();
    Ok((
        fs::read(dir.path().join("a.jsonl")).unwrap(),
        fs::read(dir.path().join("p.jsonl")).unwrap(),
        out.dataset,
        out.records,
    ))
}

fn augmentation_invariants() -> Check {
    let lexicon = WordNet::load(&repo().join("data/lexicon")).map_err(|e| e.to_string())?;
    let mut total = 0;
    let mut synonyms = 0;
    for topic in Topic::ALL {
        let path = repo().join("data/mini").join(topic.as_str()).join("train.tsv");
        let train = load_split(&path, topic, Split::Train).map_err(|e| e.to_string())?;
        let (data_a, prov_a, dataset, records) = augment_services_run(&train, &lexicon, 11)?;
        let (data_b, prov_b, _, _) = augment_services_run(&train, &lexicon, 11)?;
        ensure(data_a == data_b && prov_a == prov_b, || format!("{topic}: reruns differ"))?;
        let by_id: HashMap<&str, &Tweet> = dataset.examples.iter().map(|t| (t.id.as_str(), t)).collect();
        for r in &records {
            let child = by_id[r.child_id.as_str()];
            let parent = by_id[r.parent_id.as_str()];
            ensure(child.label == parent.label && child.topic == parent.topic, || {
                format!("{} changed label or topic", child.id)
            })?;
            total += 1;
            if let AugmentationDetail::Synonym {
                synset_id,
                replacement_lemma,
                replacement_text,
                span,
                ..
            } = &r.detail
            {
                synonyms += 1;
                let synset = lexicon.synset(synset_id).ok_or_else(|| format!("unknown synset {synset_id}"))?;
                ensure(synset.lemmas.contains(replacement_lemma), || {
                    format!("{replacement_lemma} not in {synset_id}")
                })?;
                let chars: Vec<char> = parent.text.chars().collect();
                let rebuilt: String = chars[..span.start]
                    .iter()
                    .copied()
                    .chain(replacement_text.chars())
                    .chain(chars[span.end..].iter().copied())
                    .collect();
                ensure(rebuilt == child.text, || format!("splice mismatch for {}", child.id))?;
            }
        }
    }
    ensure(synonyms > 0, || "no synonym replacements produced".into())?;

    let sentence = "SCOTUS has balanced rights w/ public safety, ruling that gun safety laws essential & constitutional \
                    Rushing through a replacement to RBG could undermine that balance and put life-saving laws at risk.";
    let start = sentence.chars().count() - "risk.".len();
    let parent = Tweet::original("case", sentence, Topic::GunControl, StanceLabel::Support);
    let hazard = lexicon.synset("hazard.n.01").ok_or("hazard.n.01 missing from lexicon")?;
    let variants = expand_noun(&parent, "risk", CharSpan::new(start, start + 4), &hazard, &lexicon, 10, 0);
    let endings: BTreeSet<String> = variants
        .iter()
        .map(|(t, _)| t.text.rsplit(" at ").next().unwrap().to_string())
        .collect();
    let expected: BTreeSet<String> =
        ["peril.", "jeopardy.", "endangerment.", "hazard."].iter().map(|s| s.to_string()).collect();
    ensure(variants.len() == 4 && endings == expected, || format!("case study variants {endings:?}"))?;
    ensure(
        variants.iter().all(|(t, _)| t.text.starts_with(&sentence[..sentence.len() - 5])),
        || "case study prefix changed".into(),
    )?;
    Ok(format!(
        "{total} augmented examples ({synonyms} synonym) checked, reruns byte-identical, case study gives {}",
        endings.iter().map(|s| s.trim_end_matches('.')).collect::<Vec<_>>().join("/")
    ))
}

fn rebalancing() -> Check {
    let mut examples = Vec::new();
    for i in 0..365 {
        let label = if i < 100 { StanceLabel::Support } else { StanceLabel::Oppose };
        examples.push(Tweet::original(format!("t{i}"), format!("example tweet {i}"), Topic::Abortion, label));
    }
    let train = Dataset::new(Topic::Abortion, Split::Train, examples).unwrap();
    let pivots: Vec<String> = ["fr", "de", "es", "zh"].iter().map(|s| s.to_string()).collect();
    let out = rebalance(&train, &IdentityTranslator, &pivots, 1.0, 5).map_err(|e| e.to_string())?;
    let (support, oppose) = out.dataset.label_counts();
    let ratio = support.min(oppose) as f64 / support.max(oppose) as f64;
    let originals_intact = out.dataset.examples[..train.len()] == train.examples[..]
        && out.dataset.examples[train.len()..].iter().all(|t| t.parent_id.is_some());
    ensure(ratio >= 0.95, || format!("ratio {ratio:.3}"))?;
    ensure(originals_intact, || "original examples changed".into())?;
    Ok(format!("100:265 -> {support}:{oppose}, ratio {ratio:.3}, originals unchanged"))
}

fn record(epoch: usize, val_f1: f64) -> EpochRecord {
    EpochRecord {
        epoch,
        train_loss: 0.5,
        val_f1,
        val_macro_f1: 0.0,
        val_auc: None,
        val_acc: 0.0,
    }
}

fn protocol_fidelity() -> Check {
    let grid = default_grid(10, 0);
    let points: BTreeSet<(u64, usize)> = grid.iter().map(|h| (h.learning_rate.to_bits(), h.batch_size)).collect();
    let mut expected = BTreeSet::new();
    for lr in [1e-4, 1e-5, 5e-6] {
        for bs in [16, 8, 4] {
            expected.insert((f64::to_bits(lr), bs));
        }
    }
    ensure(grid.len() == 9 && points == expected, || format!("grid {grid:?}"))?;

    for family in [None, Some(ImageEncoderFamily::LayoutAware), Some(ImageEncoderFamily::PixelOnly), Some(ImageEncoderFamily::Toy)] {
        let spec = select_optimizer(&ModelDescription { image_family: family });
        let layout = family == Some(ImageEncoderFamily::LayoutAware);
        let want = if layout { OptimizerKind::AdamW } else { OptimizerKind::Adam };
        ensure(spec.kind == want && (spec.weight_decay > 0.0) == layout, || format!("{family:?} -> {spec:?}"))?;
    }

    let h = |f1s: &[f64]| TrainHistory {
        epochs: f1s.iter().enumerate().map(|(e, &v)| record(e + 1, v)).collect(),
    };
    let histories = [h(&[50.0, 70.0, 70.0]), h(&[70.0, 60.0]), h(&[65.0, 70.0])];
    let refs: Vec<Option<&TrainHistory>> = vec![Some(&histories[0]), None, Some(&histories[1]), Some(&histories[2])];
    let best = select_best(&refs).ok_or("no selection")?;
    ensure((best.trial, best.epoch, best.val_f1) == (0, 2, 70.0), || format!("selected {best:?}"))?;
    Ok("9-point grid, AdamW iff layout-aware, max val F1 with earliest tie".into())
}

fn run_pipeline(out_dir: &Path) -> Result<Duration, String> {
    let mini = repo().join("data/mini");
    let text = fs::read_to_string(mini.join("config.toml"))
        .map_err(|e| e.to_string())?
        .replace("output_dir = \"../../out\"", &format!("output_dir = {:?}", out_dir))
        .replace("\"gun_control/", &format!("\"{}/gun_control/", mini.display()))
        .replace("\"abortion/", &format!("\"{}/abortion/", mini.display()))
        .replace("\"../lexicon\"", &format!("\"{}/../lexicon\"", mini.display()));
    let config = out_dir.with_extension("toml");
    fs::write(&config, text).map_err(|e| e.to_string())?;
    let start = Instant::now();
    for stage in ["ingest", "augment", "train", "evaluate", "merge"] {
        let out = Command::new(env!("CARGO_BIN_EXE_stancefuse"))
            .args(["--jobs", "1", "--config"])
            .arg(&config)
            .arg(stage)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{stage} failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(start.elapsed())
}

fn end_to_end() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let elapsed = run_pipeline(&a)?;
    within(elapsed, Duration::from_secs(300))?;
    run_pipeline(&b)?;
    let merged = read_merged_report(&a.join("merged.json")).map_err(|e| e.to_string())?;
    let mut drops = Vec::new();
    for topic in Topic::ALL {
        let run = a.join("runs").join(topic.as_str());
        let grid: GridSummary =
            serde_json::from_str(&fs::read_to_string(run.join("grid.json")).unwrap()).map_err(|e| e.to_string())?;
        let history = read_history(&run.join(format!("trial-{}/history.jsonl", grid.best.trial))).map_err(|e| e.to_string())?;
        let (first, last) = (history[0].train_loss, history[history.len() - 1].train_loss);
        let drop = 1.0 - last / first;
        ensure(drop >= 0.5, || format!("{topic}: loss {first:.4} -> {last:.4}"))?;
        drops.push(format!("{topic} {:.0}%", 100.0 * drop));
        let rel = format!("reports/{}.json", topic.as_str());
        ensure(fs::read(a.join(&rel)).unwrap() == fs::read(b.join(&rel)).unwrap(), || format!("{rel} differs"))?;
    }
    ensure(fs::read(a.join("merged.json")).unwrap() == fs::read(b.join("merged.json")).unwrap(), || {
        "merged reports differ".into()
    })?;
    Ok(format!(
        "single thread {elapsed:.2?}, loss drop {}, micro F1 {:.2}, schema valid, seeded reruns identical",
        drops.join(", "),
        merged.micro_f1
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("metric oracle equivalence", metric_oracle),
        ("two-path micro-F1", two_path_micro_f1),
        ("fusion correctness", fusion_correctness),
        ("gradient check", gradient_check),
        ("augmentation invariants", augmentation_invariants),
        ("rebalancing", rebalancing),
        ("protocol fidelity", protocol_fidelity),
        ("end-to-end smoke", end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
