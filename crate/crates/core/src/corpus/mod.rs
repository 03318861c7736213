//! Dataset ingestion and preprocessing: tweet records, splits, image
//! resizing, and OCR layout extraction.

mod image;
mod io;
mod layout;
pub mod tesseract;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::image::{decode_image, load_image, resize_image, ImageTensor, IMAGE_SIDE};
pub use self::io::{
    load_jsonl, load_split, load_split_lenient, load_tsv, read_layout_sidecar, write_jsonl,
    write_layout_sidecar, LoadDiagnostic,
};
pub use self::layout::{
    extract_layout, extract_layouts, normalize_box, BoundingBox, EngineConcurrency,
    LayoutDocument, LayoutWord, NoOcr, OcrEngine, OcrError, OcrWord, PixelBox, LAYOUT_SCALE,
};

/// Stance toward the tweet's topic. `Support` is the positive class for every metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StanceLabel {
    Support,
    Oppose,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 2] = [StanceLabel::Support, StanceLabel::Oppose];

    pub fn is_positive(self) -> bool {
        self == StanceLabel::Support
    }

    pub fn other(self) -> StanceLabel {
        match self {
            StanceLabel::Support => StanceLabel::Oppose,
            StanceLabel::Oppose => StanceLabel::Support,
        }
    }

    /// Case-insensitive parse of `support` / `oppose`.
    pub fn parse(s: &str) -> Option<StanceLabel> {
        match s.trim().to_ascii_lowercase().as_str() {
            "support" => Some(StanceLabel::Support),
            "oppose" => Some(StanceLabel::Oppose),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StanceLabel::Support => "support",
            StanceLabel::Oppose => "oppose",
        }
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    GunControl,
    Abortion,
}

impl Topic {
    pub const ALL: [Topic; 2] = [Topic::GunControl, Topic::Abortion];

    pub fn as_str(self) -> &'static str {
        match self {
            Topic::GunControl => "gun_control",
            Topic::Abortion => "abortion",
        }
    }

    pub fn parse(s: &str) -> Option<Topic> {
        match s.trim() {
            "gun_control" => Some(Topic::GunControl),
            "abortion" => Some(Topic::Abortion),
            _ => None,
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Topic::GunControl => "Gun Control",
            Topic::Abortion => "Abortion",
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How an example came to exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Original,
    BackTranslated,
    Synonym,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Original => "original",
            Origin::BackTranslated => "back_translated",
            Origin::Synonym => "synonym",
        }
    }
}

/// One labeled example.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub text: String,
    #[serde(rename = "image")]
    pub image_ref: Option<PathBuf>,
    pub topic: Topic,
    #[serde(rename = "stance")]
    pub label: StanceLabel,
    pub origin: Origin,
    pub parent_id: Option<String>,
}

impl Tweet {
    pub fn original(id: impl Into<String>, text: impl Into<String>, topic: Topic, label: StanceLabel) -> Tweet {
        Tweet {
            id: id.into(),
            text: text.into(),
            image_ref: None,
            topic,
            label,
            origin: Origin::Original,
            parent_id: None,
        }
    }

    /// A derived example sharing this tweet's label, topic and image.
    pub fn derive(&self, id: String, text: String, origin: Origin) -> Tweet {
        Tweet {
            id,
            text,
            image_ref: self.image_ref.clone(),
            topic: self.topic,
            label: self.label,
            origin,
            parent_id: Some(self.id.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub topic: Topic,
    pub split: Split,
    pub examples: Vec<Tweet>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Validation {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("dataset invariant violated: {0}")]
    Invariant(String),
    #[error("{0}")]
    Domain(String),
    #[error("image format error: {0}")]
    ImageFormat(String),
    #[error("layout error: {0}")]
    Layout(String),
    #[error(transparent)]
    Ocr(#[from] OcrError),
}

impl CorpusError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> CorpusError {
        CorpusError::Io {
            path: path.into(),
            source,
        }
    }
}

impl Dataset {
    pub fn new(topic: Topic, split: Split, examples: Vec<Tweet>) -> Result<Dataset, CorpusError> {
        let dataset = Dataset {
            topic,
            split,
            examples,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// `(support, oppose)` counts.
    pub fn label_counts(&self) -> (usize, usize) {
        let support = self.examples.iter().filter(|t| t.label == StanceLabel::Support).count();
        (support, self.examples.len() - support)
    }

    /// Checks every Tweet and Dataset invariant.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut originals = std::collections::HashMap::new();
        let mut seen = std::collections::HashSet::new();
        for tweet in &self.examples {
            if tweet.id.trim().is_empty() {
                return Err(CorpusError::Invariant("empty tweet id".into()));
            }
            if !seen.insert(tweet.id.as_str()) {
                return Err(CorpusError::Invariant(format!("duplicate id {:?}", tweet.id)));
            }
            if tweet.topic != self.topic {
                return Err(CorpusError::Invariant(format!(
                    "tweet {:?} has topic {} in a {} dataset",
                    tweet.id, tweet.topic, self.topic
                )));
            }
            if tweet.origin == Origin::Original {
                originals.insert(tweet.id.as_str(), tweet);
            } else if self.split != Split::Train {
                return Err(CorpusError::Invariant(format!(
                    "augmented tweet {:?} in {} split",
                    tweet.id, self.split
                )));
            }
        }
        for tweet in self.examples.iter().filter(|t| t.origin != Origin::Original) {
            let parent = tweet
                .parent_id
                .as_deref()
                .and_then(|p| originals.get(p))
                .ok_or_else(|| {
                    CorpusError::Invariant(format!(
                        "augmented tweet {:?} has no ORIGINAL parent in the dataset",
                        tweet.id
                    ))
                })?;
            if parent.label != tweet.label || parent.topic != tweet.topic {
                return Err(CorpusError::Invariant(format!(
                    "augmented tweet {:?} changed label or topic of its parent",
                    tweet.id
                )));
            }
        }
        Ok(())
    }
}

/// Class balance of a dataset, read as `1 : ratio` (minority : majority).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImbalanceRatio {
    pub minority: StanceLabel,
    pub minority_count: usize,
    pub majority_count: usize,
    /// majority / minority; infinite when the minority class is absent.
    pub ratio: f64,
}

impl ImbalanceRatio {
    /// minority / majority, in [0, 1].
    pub fn balance(&self) -> f64 {
        self.minority_count as f64 / self.majority_count as f64
    }
}

impl fmt::Display for ImbalanceRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1:{:.2} ({} minority)", self.ratio, self.minority)
    }
}

pub fn imbalance_ratio(dataset: &Dataset) -> Result<ImbalanceRatio, CorpusError> {
    if dataset.is_empty() {
        return Err(CorpusError::Domain("imbalance ratio of an empty dataset".into()));
    }
    let (support, oppose) = dataset.label_counts();
    let (minority, minority_count, majority_count) = if support <= oppose {
        (StanceLabel::Support, support, oppose)
    } else {
        (StanceLabel::Oppose, oppose, support)
    };
    let ratio = if minority_count == 0 {
        f64::INFINITY
    } else {
        majority_count as f64 / minority_count as f64
    };
    Ok(ImbalanceRatio {
        minority,
        minority_count,
        majority_count,
        ratio,
    })
}
