//! Canonical JSONL reader/writer, the shared-task TSV importer, and the
//! layout sidecar format.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::{
    BoundingBox, CorpusError, Dataset, LayoutDocument, LayoutWord, Origin, Split, StanceLabel,
    Topic, Tweet,
};
use crate::fsutil::write_atomic;

/// A record skipped by the lenient loader.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadDiagnostic {
    pub line: usize,
    pub message: String,
}

enum Format {
    Jsonl,
    Tsv,
}

fn format_of(path: &Path) -> Result<Format, CorpusError> {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
        Some(ext) if ext == "jsonl" || ext == "json" => Ok(Format::Jsonl),
        Some(ext) if ext == "tsv" => Ok(Format::Tsv),
        _ => Err(CorpusError::Validation {
            path: path.to_path_buf(),
            line: 0,
            message: "unrecognized file extension (expected .jsonl or .tsv)".into(),
        }),
    }
}

/// Loads a split, failing on the first malformed record.
///
/// The format follows the extension: `.jsonl` for canonical records,
/// `.tsv` for shared-task exports. Blank lines are ignored. Relative image
/// paths resolve against the file's directory; an image that does not exist
/// yields `image_ref = None` and the example is kept.
pub fn load_split(path: &Path, topic: Topic, split: Split) -> Result<Dataset, CorpusError> {
    let (dataset, _) = load(path, topic, split, true)?;
    Ok(dataset)
}

/// Like [`load_split`], but skips malformed or duplicate records and reports them.
pub fn load_split_lenient(
    path: &Path,
    topic: Topic,
    split: Split,
) -> Result<(Dataset, Vec<LoadDiagnostic>), CorpusError> {
    load(path, topic, split, false)
}

pub fn load_jsonl(path: &Path, topic: Topic, split: Split) -> Result<Dataset, CorpusError> {
    let text = read_to_string(path)?;
    finish(path, topic, split, parse_jsonl(path, &text, topic), true).map(|(d, _)| d)
}

pub fn load_tsv(path: &Path, topic: Topic, split: Split) -> Result<Dataset, CorpusError> {
    let text = read_to_string(path)?;
    finish(path, topic, split, parse_tsv(path, &text, topic)?, true).map(|(d, _)| d)
}

fn load(
    path: &Path,
    topic: Topic,
    split: Split,
    strict: bool,
) -> Result<(Dataset, Vec<LoadDiagnostic>), CorpusError> {
    let format = format_of(path)?;
    let text = read_to_string(path)?;
    let parsed = match format {
        Format::Jsonl => parse_jsonl(path, &text, topic),
        Format::Tsv => parse_tsv(path, &text, topic)?,
    };
    finish(path, topic, split, parsed, strict)
}

fn read_to_string(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))
}

type Parsed = Vec<(usize, Result<Tweet, String>)>;

fn finish(
    path: &Path,
    topic: Topic,
    split: Split,
    parsed: Parsed,
    strict: bool,
) -> Result<(Dataset, Vec<LoadDiagnostic>), CorpusError> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut examples = Vec::with_capacity(parsed.len());
    let mut diagnostics = Vec::new();
    let mut ids = HashSet::new();
    for (line, record) in parsed {
        let outcome = record.and_then(|mut tweet| {
            if !ids.insert(tweet.id.clone()) {
                return Err(format!("duplicate id {:?}", tweet.id));
            }
            tweet.image_ref = tweet.image_ref.and_then(|p| resolve_image(base, &p));
            Ok(tweet)
        });
        match outcome {
            Ok(tweet) => examples.push(tweet),
            Err(message) if strict => {
                return Err(CorpusError::Validation {
                    path: path.to_path_buf(),
                    line,
                    message,
                })
            }
            Err(message) => {
                log::warn!("{}: line {line}: skipped: {message}", path.display());
                diagnostics.push(LoadDiagnostic { line, message });
            }
        }
    }
    let dataset = Dataset {
        topic,
        split,
        examples,
    };
    dataset.validate()?;
    Ok((dataset, diagnostics))
}

fn resolve_image(base: &Path, image: &Path) -> Option<PathBuf> {
    let resolved = if image.is_absolute() {
        image.to_path_buf()
    } else {
        base.join(image)
    };
    if resolved.is_file() {
        Some(resolved)
    } else {
        log::debug!("image {} not found; keeping example as text-only", resolved.display());
        None
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    id: String,
    text: String,
    image: Option<PathBuf>,
    topic: Topic,
    stance: StanceLabel,
    origin: Origin,
    parent_id: Option<String>,
}

fn parse_jsonl(_path: &Path, text: &str, topic: Topic) -> Parsed {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(idx, line)| {
            let record = serde_json::from_str::<JsonRecord>(line)
                .map_err(|e| format!("invalid record: {e}"))
                .and_then(|r| {
                    if r.topic != topic {
                        return Err(format!("topic {} does not match expected {topic}", r.topic));
                    }
                    checked_tweet(Tweet {
                        id: r.id,
                        text: r.text,
                        image_ref: r.image.filter(|p| !p.as_os_str().is_empty()),
                        topic,
                        label: r.stance,
                        origin: r.origin,
                        parent_id: r.parent_id,
                    })
                });
            (idx + 1, record)
        })
        .collect()
}

const TSV_COLUMNS: [&str; 4] = ["tweet_id", "tweet_text", "image_path", "stance"];

fn parse_tsv(path: &Path, text: &str, topic: Topic) -> Result<Parsed, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let header_error = |message: String| CorpusError::Validation {
        path: path.to_path_buf(),
        line: 1,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| header_error(format!("unreadable header: {e}")))?
        .clone();
    let mut columns = [0usize; 4];
    for (slot, name) in columns.iter_mut().zip(TSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| header_error(format!("missing required column {name:?}")))?;
    }
    let width = headers.len();
    let mut out = Vec::new();
    for row in reader.records() {
        let (line, record) = match row {
            Ok(record) => {
                let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
                (line, record)
            }
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                out.push((line, Err(format!("unreadable row: {e}"))));
                continue;
            }
        };
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let parsed = if record.len() != width {
            Err(format!("expected {width} columns, found {}", record.len()))
        } else {
            let field = |i: usize| record.get(columns[i]).unwrap_or("").trim();
            match StanceLabel::parse(field(3)) {
                None => Err(format!("invalid stance {:?}", field(3))),
                Some(label) => {
                    let image = field(2);
                    checked_tweet(Tweet {
                        id: field(0).to_string(),
                        text: record.get(columns[1]).unwrap_or("").to_string(),
                        image_ref: (!image.is_empty()).then(|| PathBuf::from(image)),
                        topic,
                        label,
                        origin: Origin::Original,
                        parent_id: None,
                    })
                }
            }
        };
        out.push((line, parsed));
    }
    Ok(out)
}

fn checked_tweet(mut tweet: Tweet) -> Result<Tweet, String> {
    if tweet.id.trim().is_empty() {
        return Err("empty id".into());
    }
    tweet.text = tweet.text.nfc().collect();
    if tweet.text.trim().is_empty() {
        return Err("empty text".into());
    }
    match (tweet.origin, &tweet.parent_id) {
        (Origin::Original, Some(_)) => Err("original tweet must not carry parent_id".into()),
        (Origin::BackTranslated | Origin::Synonym, None) => {
            Err("augmented tweet requires parent_id".into())
        }
        _ => Ok(tweet),
    }
}

/// Serializes a dataset in the canonical JSONL format, one tweet per line.
pub fn write_jsonl(dataset: &Dataset, path: &Path) -> Result<(), CorpusError> {
    let mut out = String::new();
    for tweet in &dataset.examples {
        out.push_str(&serde_json::to_string(tweet).expect("tweet serializes"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes()).map_err(|e| CorpusError::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct SidecarRecord {
    id: String,
    words: Vec<(String, [u16; 4])>,
    source_size: [u32; 2],
}

/// Writes `(tweet id, layout)` pairs as a layout sidecar JSONL file.
pub fn write_layout_sidecar(
    path: &Path,
    layouts: &[(String, LayoutDocument)],
) -> Result<(), CorpusError> {
    let mut out = String::new();
    for (id, doc) in layouts {
        let record = SidecarRecord {
            id: id.clone(),
            words: doc
                .words
                .iter()
                .map(|w| (w.token.clone(), w.bbox.to_array()))
                .collect(),
            source_size: [doc.source_size.0, doc.source_size.1],
        };
        out.push_str(&serde_json::to_string(&record).expect("sidecar serializes"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes()).map_err(|e| CorpusError::io(path, e))
}

pub fn read_layout_sidecar(path: &Path) -> Result<Vec<(String, LayoutDocument)>, CorpusError> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let invalid = |message: String| CorpusError::Validation {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let record: SidecarRecord =
            serde_json::from_str(line).map_err(|e| invalid(format!("invalid layout record: {e}")))?;
        let mut words = Vec::with_capacity(record.words.len());
        for (token, b) in record.words {
            if token.trim().is_empty() {
                return Err(invalid("empty OCR token".into()));
            }
            let bbox = BoundingBox::new(b[0], b[1], b[2], b[3]).map_err(|e| invalid(e.to_string()))?;
            words.push(LayoutWord { token, bbox });
        }
        out.push((
            record.id,
            LayoutDocument {
                words,
                source_size: (record.source_size[0], record.source_size[1]),
            },
        ));
    }
    Ok(out)
}
