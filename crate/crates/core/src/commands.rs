//! Pipeline stages behind the command-line tool.
//!
//! Output directory layout:
//!
//! ```text
//! <out>/corpus/<topic>/<split>.jsonl          canonical records
//! <out>/corpus/<topic>/<split>.layout.jsonl   OCR layout sidecars
//! <out>/augmented/<topic>/train.jsonl
//! <out>/augmented/<topic>/train.provenance.jsonl
//! <out>/runs/<topic>/                         grid search artifacts
//! <out>/reports/<topic>.json
//! <out>/merged.{json,txt,csv}
//! <out>/.stamps/<stage>-<name>                input fingerprints
//! ```
//!
//! A stage whose outputs exist and whose input fingerprint is unchanged is
//! skipped unless forced. Notices and summaries go to the `log` writer.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::augment::{
    augment_train, write_records, AugmentError, AugmentOptions, AugmentServices, ExpansionPolicy,
    IdentityTranslator, LexiconTagger, MemoryLexicon, MostFrequentSense, TableTranslator, Translator,
    WordNet,
};
use crate::config::{ConfigError, OcrChoice, RunConfig, TranslatorChoice};
use crate::corpus::tesseract::TesseractOcr;
use crate::corpus::{
    extract_layouts, imbalance_ratio, load_image, load_jsonl, load_split, read_layout_sidecar, write_jsonl,
    write_layout_sidecar, CorpusError, Dataset, LayoutDocument, NoOcr, OcrEngine, Split, Topic,
};
use crate::evaluation::{
    evaluate, merge_micro_f1, read_topic_report, render_csv, render_table, write_json, EvalError,
};
use crate::exec::Execution;
use crate::fsutil::write_atomic;
use crate::model::{load_checkpoint, make_toy_encoder, ImageEncoderFamily, ModelError};
use crate::pipeline::{FeatureExtractor, PipelineError, Prepared, TestSplit, TrainSplit, ValidationSplit};
use crate::synth::BitmapFontOcr;
use crate::training::{grid_search, write_grid, GridError, GridSummary, ModelConfig};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing prerequisite {}: run `stancefuse {stage}` first", .artifact.display())]
    MissingPrerequisite { artifact: PathBuf, stage: &'static str },
    #[error("{} exists: another run is writing to this directory (delete the file if it is stale)", .0.display())]
    Locked(PathBuf),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{}: {message}", .path.display())]
    Io { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CommandError + '_ {
    move |e| CommandError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Whether a stage did work.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Done,
    UpToDate,
}

/// Shared state of one command invocation.
pub struct Context {
    pub config: RunConfig,
    pub force: bool,
    pub exec: Execution,
}

impl Context {
    pub fn new(config: RunConfig, force: bool, exec: Execution) -> Context {
        Context { config, force, exec }
    }

    fn out(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn corpus_file(&self, topic: Topic, split: Split) -> PathBuf {
        self.out().join("corpus").join(topic.as_str()).join(format!("{}.jsonl", split.as_str()))
    }

    pub fn layout_file(&self, topic: Topic, split: Split) -> PathBuf {
        self.out()
            .join("corpus")
            .join(topic.as_str())
            .join(format!("{}.layout.jsonl", split.as_str()))
    }

    pub fn augmented_file(&self, topic: Topic) -> PathBuf {
        self.out().join("augmented").join(topic.as_str()).join("train.jsonl")
    }

    pub fn provenance_file(&self, topic: Topic) -> PathBuf {
        self.out().join("augmented").join(topic.as_str()).join("train.provenance.jsonl")
    }

    pub fn run_dir(&self, topic: Topic) -> PathBuf {
        self.out().join("runs").join(topic.as_str())
    }

    pub fn report_file(&self, topic: Topic) -> PathBuf {
        self.out().join("reports").join(format!("{}.json", topic.as_str()))
    }

    pub fn merged_file(&self, ext: &str) -> PathBuf {
        self.out().join(format!("merged.{ext}"))
    }

    fn stamp_file(&self, stage: &str, name: &str) -> PathBuf {
        self.out().join(".stamps").join(format!("{stage}-{name}"))
    }

    fn is_fresh(&self, stage: &str, name: &str, digest: &str, outputs: &[PathBuf]) -> bool {
        !self.force
            && outputs.iter().all(|p| p.exists())
            && fs::read_to_string(self.stamp_file(stage, name)).is_ok_and(|s| s.trim() == digest)
    }

    fn stamp(&self, stage: &str, name: &str, digest: &str) -> Result<(), CommandError> {
        let path = self.stamp_file(stage, name);
        write_atomic(&path, format!("{digest}\n").as_bytes()).map_err(io_err(&path))
    }

    fn lock(&self) -> Result<LockGuard, CommandError> {
        let dir = self.out();
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(LockGuard(path))
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(CommandError::Locked(path)),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// SHA-256 over labeled strings and file contents.
struct Fingerprint(Sha256);

impl Fingerprint {
    fn new(stage: &str) -> Fingerprint {
        let mut f = Fingerprint(Sha256::new());
        f.text("stage", stage);
        f
    }

    fn text(&mut self, label: &str, value: &str) {
        for part in [label, value] {
            self.0.update((part.len() as u64).to_le_bytes());
            self.0.update(part.as_bytes());
        }
    }

    fn json(&mut self, label: &str, value: &impl serde::Serialize) {
        self.text(label, &serde_json::to_string(value).expect("config serializes"));
    }

    fn file(&mut self, path: &Path) -> Result<(), CommandError> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(&bytes);
        Ok(())
    }

    fn finish(self) -> String {
        self.0.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn require(path: &Path, stage: &'static str) -> Result<(), CommandError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CommandError::MissingPrerequisite {
            artifact: path.to_path_buf(),
            stage,
        })
    }
}

/// Identifier of a toy encoder, recorded in checkpoints.
pub fn toy_encoder_id(hidden_dim: usize, seed: u64) -> String {
    format!("toy:d={hidden_dim}:seed={seed}")
}

/// Inverse of [`toy_encoder_id`].
pub fn parse_toy_encoder_id(id: &str) -> Option<(usize, u64)> {
    let rest = id.strip_prefix("toy:d=")?;
    let (dim, seed) = rest.split_once(":seed=")?;
    Some((dim.parse().ok()?, seed.parse().ok()?))
}

fn model_config(config: &RunConfig) -> Result<ModelConfig, CommandError> {
    let id = toy_encoder_id(config.model.hidden_dim, config.seed);
    Ok(ModelConfig {
        fusion: config.model.fusion_config()?,
        text_encoder: id.clone(),
        image_encoder: id,
        image_family: ImageEncoderFamily::Toy,
    })
}

fn ocr_engine(config: &RunConfig) -> Box<dyn OcrEngine> {
    match config.ocr.engine {
        OcrChoice::None => Box::new(NoOcr),
        OcrChoice::BitmapFont => Box::new(BitmapFontOcr::default()),
        OcrChoice::Tesseract => {
            let mut t = TesseractOcr::default();
            if let Some(b) = &config.ocr.binary {
                t.binary = b.clone();
            }
            Box::new(t)
        }
    }
}

fn split_summary(dataset: &Dataset) -> String {
    let (support, oppose) = dataset.label_counts();
    let images = dataset.examples.iter().filter(|t| t.image_ref.is_some()).count();
    let ratio = imbalance_ratio(dataset).map(|r| r.to_string()).unwrap_or_else(|_| "n/a".into());
    format!(
        "{:<10} support {support:>4}  oppose {oppose:>4}  ratio {ratio}  images {images}",
        dataset.split.as_str()
    )
}

/// Loads every split, runs OCR over the unique images and writes the
/// canonical corpus plus layout sidecars.
pub fn ingest(ctx: &Context, log: &mut dyn Write) -> Result<Outcome, CommandError> {
    ctx.config.check_paths()?;
    let _lock = ctx.lock()?;
    let engine = ocr_engine(&ctx.config);
    let mut outcome = Outcome::UpToDate;
    for (&topic, paths) in &ctx.config.data {
        let mut fp = Fingerprint::new("ingest");
        fp.json("ocr", &ctx.config.ocr);
        for split in Split::ALL {
            fp.file(paths.get(split))?;
        }
        let digest = fp.finish();
        let outputs: Vec<PathBuf> = Split::ALL
            .iter()
            .flat_map(|&s| [ctx.corpus_file(topic, s), ctx.layout_file(topic, s)])
            .collect();
        if ctx.is_fresh("ingest", topic.as_str(), &digest, &outputs) {
            let _ = writeln!(log, "{topic}: corpus up to date");
            continue;
        }
        outcome = Outcome::Done;
        let mut datasets = Vec::new();
        for split in Split::ALL {
            let mut d = load_split(paths.get(split), topic, split)?;
            for t in &mut d.examples {
                if let Some(p) = t.image_ref.as_mut() {
                    *p = fs::canonicalize(&*p).map_err(io_err(p))?;
                }
            }
            datasets.push(d);
        }
        let mut unique: Vec<PathBuf> = datasets
            .iter()
            .flat_map(|d| d.examples.iter().filter_map(|t| t.image_ref.clone()))
            .collect();
        unique.sort();
        unique.dedup();
        let images = ctx.exec.map(&unique, |p| load_image(p));
        let images = images.into_iter().collect::<Result<Vec<_>, _>>()?;
        let layouts = extract_layouts(&images, engine.as_ref(), ctx.exec);
        let mut by_path: HashMap<&Path, LayoutDocument> = HashMap::new();
        for (p, l) in unique.iter().zip(layouts) {
            by_path.insert(p, l?);
        }
        let counts: Vec<String> = datasets.iter().map(|d| d.len().to_string()).collect();
        let _ = writeln!(log, "{topic}: {} examples (train/validation/test)", counts.join("/"));
        for d in &datasets {
            write_jsonl(d, &ctx.corpus_file(topic, d.split))?;
            let sidecar: Vec<(String, LayoutDocument)> = d
                .examples
                .iter()
                .filter_map(|t| t.image_ref.as_deref().map(|p| (t.id.clone(), by_path[p].clone())))
                .collect();
            write_layout_sidecar(&ctx.layout_file(topic, d.split), &sidecar)?;
            let words: usize = sidecar.iter().map(|(_, l)| l.words.len()).sum();
            let _ = writeln!(log, "  {}  ocr words {words}", split_summary(d));
        }
        ctx.stamp("ingest", topic.as_str(), &digest)?;
    }
    Ok(outcome)
}

fn translator(config: &RunConfig) -> Result<Box<dyn Translator>, CommandError> {
    let a = &config.augment;
    let invalid = |m: String| CommandError::Config(ConfigError::Invalid(m));
    Ok(match a.translator {
        TranslatorChoice::Identity => Box::new(IdentityTranslator),
        TranslatorChoice::Table => {
            let path = a.table.as_ref().ok_or_else(|| invalid("augment.table is not set".into()))?;
            Box::new(TableTranslator::load(path).map_err(|e| invalid(e.to_string()))?)
        }
        #[cfg(feature = "http")]
        TranslatorChoice::Http => {
            let endpoint = a.endpoint.clone().ok_or_else(|| invalid("augment.endpoint is not set".into()))?;
            let client = crate::augment::translate::HttpTranslator::from_env(endpoint, &a.api_key_env)
                .map_err(|e| invalid(e.to_string()))?;
            Box::new(crate::augment::translate::CachingTranslator::new(client))
        }
        #[cfg(not(feature = "http"))]
        TranslatorChoice::Http => {
            return Err(invalid("this build has no HTTP translator (enable the `http` feature)".into()))
        }
    })
}

/// Rebalances and synonym-expands each topic's training split.
pub fn augment(ctx: &Context, log: &mut dyn Write) -> Result<Outcome, CommandError> {
    let a = &ctx.config.augment;
    // Credentials and lexicon are checked before anything is read or written.
    let translator: Box<dyn Translator> = if a.back_translation {
        translator(&ctx.config)?
    } else {
        Box::new(IdentityTranslator)
    };
    let topics = ctx.config.topics();
    for &topic in &topics {
        require(&ctx.corpus_file(topic, Split::Train), "ingest")?;
    }
    let _lock = ctx.lock()?;
    let mut lexicon: Option<WordNet> = None;
    let mut outcome = Outcome::UpToDate;
    for topic in topics {
        let input = ctx.corpus_file(topic, Split::Train);
        let mut fp = Fingerprint::new("augment");
        fp.json("augment", a);
        fp.text("seed", &ctx.config.seed.to_string());
        fp.file(&input)?;
        let digest = fp.finish();
        let outputs = [ctx.augmented_file(topic), ctx.provenance_file(topic)];
        if ctx.is_fresh("augment", topic.as_str(), &digest, &outputs) {
            let _ = writeln!(log, "{topic}: augmented train set up to date");
            continue;
        }
        outcome = Outcome::Done;
        if !a.enabled() {
            let bytes = fs::read(&input).map_err(io_err(&input))?;
            write_atomic(&outputs[0], &bytes).map_err(io_err(&outputs[0]))?;
            write_records(&outputs[1], &[])?;
            let _ = writeln!(log, "{topic}: augmentation disabled, train set copied unchanged");
            ctx.stamp("augment", topic.as_str(), &digest)?;
            continue;
        }
        if a.synonyms && lexicon.is_none() {
            let dir = a.lexicon_dir.as_ref().expect("checked by config");
            lexicon = Some(WordNet::load(dir)?);
        }
        let empty = MemoryLexicon::new(Vec::new());
        let lex: &dyn crate::augment::Lexicon = match &lexicon {
            Some(l) => l,
            None => &empty,
        };
        let tagger = LexiconTagger::new(lex);
        let services = AugmentServices {
            translator: translator.as_ref(),
            tagger: &tagger,
            lexicon: lex,
            wsd: &MostFrequentSense,
        };
        let options = AugmentOptions {
            back_translation: a.back_translation,
            synonyms: a.synonyms,
            pivot_pool: a.pivot_pool.clone(),
            target_ratio: a.target_ratio,
            policy: ExpansionPolicy {
                max_per_example: a.max_per_example,
            },
            seed: ctx.config.seed,
        };
        let base = load_jsonl(&input, topic, Split::Train)?;
        let out = augment_train(&base, &options, &services, ctx.exec)?;
        write_jsonl(&out.dataset, &outputs[0])?;
        write_records(&outputs[1], &out.records)?;
        let mut by_method: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &out.records {
            *by_method.entry(r.origin().as_str()).or_default() += 1;
        }
        let added: Vec<String> = by_method.iter().map(|(m, n)| format!("{n} {m}")).collect();
        let _ = writeln!(log, "{topic}: {} -> {} examples", base.len(), out.dataset.len());
        let _ = writeln!(log, "  before  {}", split_summary(&base));
        let _ = writeln!(log, "  after   {}", split_summary(&out.dataset));
        if !added.is_empty() {
            let _ = writeln!(log, "  added   {}", added.join(", "));
        }
        if out.skipped_translations > 0 {
            let _ = writeln!(log, "  skipped {} failed translations", out.skipped_translations);
        }
        ctx.stamp("augment", topic.as_str(), &digest)?;
    }
    Ok(outcome)
}

fn read_layouts(ctx: &Context, topic: Topic, splits: &[Split]) -> Result<Vec<(String, LayoutDocument)>, CommandError> {
    let mut out = Vec::new();
    for &s in splits {
        out.extend(read_layout_sidecar(&ctx.layout_file(topic, s))?);
    }
    Ok(out)
}

/// Grid search per topic on the augmented train set, selected on validation.
pub fn train(ctx: &Context, log: &mut dyn Write) -> Result<Outcome, CommandError> {
    let config = model_config(&ctx.config)?;
    let topics = ctx.config.topics();
    for &topic in &topics {
        require(&ctx.augmented_file(topic), "augment")?;
        for s in [Split::Train, Split::Validation] {
            require(&ctx.layout_file(topic, s), "ingest")?;
        }
        require(&ctx.corpus_file(topic, Split::Validation), "ingest")?;
    }
    let _lock = ctx.lock()?;
    let grid = ctx.config.grid();
    let mut outcome = Outcome::UpToDate;
    for topic in topics {
        let inputs = [
            ctx.augmented_file(topic),
            ctx.corpus_file(topic, Split::Validation),
            ctx.layout_file(topic, Split::Train),
            ctx.layout_file(topic, Split::Validation),
        ];
        let mut fp = Fingerprint::new("train");
        fp.json("model", &config);
        fp.json("grid", &grid);
        for p in &inputs {
            fp.file(p)?;
        }
        let digest = fp.finish();
        let run_dir = ctx.run_dir(topic);
        if ctx.is_fresh("train", topic.as_str(), &digest, &[run_dir.join("grid.json")]) {
            let _ = writeln!(log, "{topic}: runs up to date");
            continue;
        }
        outcome = Outcome::Done;
        let (text_enc, image_enc) = make_toy_encoder(ctx.config.model.hidden_dim, ctx.config.seed);
        let fx = FeatureExtractor::new(&text_enc, &image_enc)
            .with_layouts(read_layouts(ctx, topic, &[Split::Train, Split::Validation])?);
        let train_set = load_jsonl(&inputs[0], topic, Split::Train)?;
        let val_set = load_jsonl(&inputs[1], topic, Split::Validation)?;
        let train_p: Prepared<TrainSplit> = fx.prepare(&train_set, ctx.exec)?;
        let val_p: Prepared<ValidationSplit> = fx.prepare(&val_set, ctx.exec)?;
        let result = grid_search(&config, &train_p, &val_p, &grid, ctx.exec)?;
        let summary = write_grid(&run_dir, &result, &config)?;
        let _ = writeln!(log, "{topic}: {} trials on {} train / {} validation", grid.len(), train_p.len(), val_p.len());
        for (t, s) in result.trials.iter().zip(&summary.trials) {
            let hp = &t.hyperparams;
            match &t.result {
                Ok(o) => {
                    let first = o.history.epochs.first().map_or(f64::NAN, |r| r.train_loss);
                    let last = o.history.epochs.last().map_or(f64::NAN, |r| r.train_loss);
                    let _ = writeln!(
                        log,
                        "  trial {} lr {:e} batch {:>2}: loss {first:.4} -> {last:.4}, best epoch {} val F1 {:.2}",
                        s.trial,
                        hp.learning_rate,
                        hp.batch_size,
                        s.best_epoch.unwrap_or(0),
                        s.best_val_f1.unwrap_or(f64::NAN)
                    );
                }
                Err(msg) => {
                    let _ = writeln!(log, "  trial {} aborted: {msg}", s.trial);
                }
            }
        }
        let _ = writeln!(
            log,
            "  selected trial {} epoch {} (val F1 {:.2})",
            summary.best.trial, summary.best.epoch, summary.best.val_f1
        );
        ctx.stamp("train", topic.as_str(), &digest)?;
    }
    Ok(outcome)
}

fn read_grid_summary(path: &Path) -> Result<GridSummary, CommandError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CommandError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Scores the selected checkpoint on each topic's test split.
pub fn evaluate_cmd(ctx: &Context, log: &mut dyn Write) -> Result<Outcome, CommandError> {
    let topics = ctx.config.topics();
    for &topic in &topics {
        require(&ctx.run_dir(topic).join("grid.json"), "train")?;
        require(&ctx.corpus_file(topic, Split::Test), "ingest")?;
        require(&ctx.layout_file(topic, Split::Test), "ingest")?;
    }
    let _lock = ctx.lock()?;
    let mut outcome = Outcome::UpToDate;
    for topic in topics {
        let grid_path = ctx.run_dir(topic).join("grid.json");
        let summary = read_grid_summary(&grid_path)?;
        let ckpt_dir = ctx.run_dir(topic).join(&summary.best_checkpoint);
        require(&ckpt_dir.join("params.bin"), "train")?;
        let mut fp = Fingerprint::new("evaluate");
        for p in [
            grid_path.clone(),
            ckpt_dir.join("params.bin"),
            ctx.corpus_file(topic, Split::Test),
            ctx.layout_file(topic, Split::Test),
        ] {
            fp.file(&p)?;
        }
        let digest = fp.finish();
        let report_path = ctx.report_file(topic);
        if ctx.is_fresh("evaluate", topic.as_str(), &digest, std::slice::from_ref(&report_path)) {
            let _ = writeln!(log, "{topic}: report up to date");
            continue;
        }
        outcome = Outcome::Done;
        let (model, manifest) = load_checkpoint(&ckpt_dir)?;
        let encoder = |id: &str| {
            parse_toy_encoder_id(id).ok_or_else(|| {
                CommandError::Model(ModelError::Config(format!("checkpoint names unsupported encoder {id:?}")))
            })
        };
        let (text_dim, text_seed) = encoder(&manifest.text_encoder)?;
        let (image_dim, image_seed) = encoder(&manifest.image_encoder)?;
        if (text_dim, image_dim) != (manifest.text_dim, manifest.image_dim) {
            return Err(ModelError::Config("encoder ids disagree with checkpoint widths".into()).into());
        }
        let (text_enc, _) = make_toy_encoder(text_dim, text_seed);
        let (_, image_enc) = make_toy_encoder(image_dim, image_seed);
        let fx = FeatureExtractor::new(&text_enc, &image_enc).with_layouts(read_layouts(ctx, topic, &[Split::Test])?);
        let test_set = load_jsonl(&ctx.corpus_file(topic, Split::Test), topic, Split::Test)?;
        let test_p: Prepared<TestSplit> = fx.prepare(&test_set, ctx.exec)?;
        let report = evaluate(&model, &test_p, ctx.exec)?;
        write_json(&report_path, &report)?;
        let auc = report.auc.map_or("n/a".to_string(), |a| format!("{a:.2}"));
        let _ = writeln!(
            log,
            "{topic}: F1 {:.2}  Ma-F1 {:.2}  AUC {auc}  Acc {:.2}  ({} test examples)",
            report.f1,
            report.macro_f1,
            report.acc,
            report.scores.len()
        );
        ctx.stamp("evaluate", topic.as_str(), &digest)?;
    }
    Ok(outcome)
}

/// Pools the topic reports into micro-F1 and renders the results table.
pub fn merge(ctx: &Context, log: &mut dyn Write) -> Result<Outcome, CommandError> {
    let topics = ctx.config.topics();
    for &topic in &topics {
        require(&ctx.report_file(topic), "evaluate")?;
    }
    let _lock = ctx.lock()?;
    let reports = topics
        .iter()
        .map(|&t| read_topic_report(&ctx.report_file(t)))
        .collect::<Result<Vec<_>, _>>()?;
    let merged = merge_micro_f1(&reports)?;
    let table = render_table(&merged.topics, Some(merged.micro_f1));
    let csv = render_csv(&merged.topics, Some(merged.micro_f1))?;
    let outputs = [ctx.merged_file("json"), ctx.merged_file("txt"), ctx.merged_file("csv")];
    let mut fp = Fingerprint::new("merge");
    for t in &topics {
        fp.file(&ctx.report_file(*t))?;
    }
    let digest = fp.finish();
    let fresh = ctx.is_fresh("merge", "all", &digest, &outputs);
    if !fresh {
        write_json(&outputs[0], &merged)?;
        write_atomic(&outputs[1], table.as_bytes()).map_err(io_err(&outputs[1]))?;
        write_atomic(&outputs[2], csv.as_bytes()).map_err(io_err(&outputs[2]))?;
        ctx.stamp("merge", "all", &digest)?;
    }
    let _ = write!(log, "{table}");
    Ok(if fresh { Outcome::UpToDate } else { Outcome::Done })
}
