//! Turning tweets into encoder outputs, tagged with the split they came from.
//!
//! [`Prepared`] carries its split in the type, so the training entry points
//! can accept only training and validation data:
//!
//! ```compile_fail
//! use stancefuse::pipeline::{Prepared, TestSplit, TrainSplit, ValidationSplit};
//! fn train_on(_: &Prepared<TrainSplit>, _: &Prepared<ValidationSplit>) {}
//! fn misuse(test: &Prepared<TestSplit>, val: &Prepared<ValidationSplit>) {
//!     train_on(test, val);
//! }
//! ```

use std::collections::HashMap;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{load_image, resize_image, CorpusError, Dataset, ImageTensor, LayoutDocument, Split, StanceLabel, Topic, Tweet};
use crate::exec::Execution;
use crate::model::{encode_image_layout, encode_text, EncoderOutput, LayoutImageEncoder, ModelError, TextEncoder};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("expected a {expected} split, got {got}")]
    WrongSplit { expected: Split, got: Split },
    #[error("{0} split is empty")]
    Empty(Split),
    #[error("example {id}: {source}")]
    Model {
        id: String,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

mod sealed {
    pub trait Sealed {}
}

/// Type-level split tag.
pub trait SplitMarker: sealed::Sealed + Send + Sync + 'static {
    const SPLIT: Split;
}

#[derive(Clone, Copy, Debug)]
pub struct TrainSplit;
#[derive(Clone, Copy, Debug)]
pub struct ValidationSplit;
#[derive(Clone, Copy, Debug)]
pub struct TestSplit;

impl sealed::Sealed for TrainSplit {}
impl sealed::Sealed for ValidationSplit {}
impl sealed::Sealed for TestSplit {}

impl SplitMarker for TrainSplit {
    const SPLIT: Split = Split::Train;
}
impl SplitMarker for ValidationSplit {
    const SPLIT: Split = Split::Validation;
}
impl SplitMarker for TestSplit {
    const SPLIT: Split = Split::Test;
}

/// Encoded text and image+layout for one tweet.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleFeatures {
    pub id: String,
    pub label: StanceLabel,
    pub text: EncoderOutput,
    pub image: EncoderOutput,
}

/// Encoded examples of one split.
#[derive(Clone, Debug)]
pub struct Prepared<S: SplitMarker> {
    pub topic: Topic,
    examples: Vec<ExampleFeatures>,
    _split: PhantomData<S>,
}

impl<S: SplitMarker> Prepared<S> {
    /// Wraps already-encoded examples; `split` must match the type tag.
    pub fn from_features(topic: Topic, split: Split, examples: Vec<ExampleFeatures>) -> Result<Prepared<S>, PipelineError> {
        if split != S::SPLIT {
            return Err(PipelineError::WrongSplit {
                expected: S::SPLIT,
                got: split,
            });
        }
        if examples.is_empty() {
            return Err(PipelineError::Empty(split));
        }
        Ok(Prepared {
            topic,
            examples,
            _split: PhantomData,
        })
    }

    pub fn split(&self) -> Split {
        S::SPLIT
    }

    pub fn examples(&self) -> &[ExampleFeatures] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Encodes tweets with a pair of encoders and a table of OCR layouts.
///
/// Layouts are looked up by tweet id, falling back to the parent id for
/// augmented tweets (which share their parent's image). Tweets without an
/// image get a blank image and an empty layout.
pub struct FeatureExtractor<'a> {
    pub text_encoder: &'a dyn TextEncoder,
    pub image_encoder: &'a dyn LayoutImageEncoder,
    pub layouts: HashMap<String, LayoutDocument>,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(text_encoder: &'a dyn TextEncoder, image_encoder: &'a dyn LayoutImageEncoder) -> FeatureExtractor<'a> {
        FeatureExtractor {
            text_encoder,
            image_encoder,
            layouts: HashMap::new(),
        }
    }

    pub fn with_layouts(mut self, layouts: impl IntoIterator<Item = (String, LayoutDocument)>) -> Self {
        self.layouts.extend(layouts);
        self
    }

    fn layout_for(&self, tweet: &Tweet) -> LayoutDocument {
        self.layouts
            .get(&tweet.id)
            .or_else(|| tweet.parent_id.as_ref().and_then(|p| self.layouts.get(p)))
            .cloned()
            .unwrap_or_else(|| LayoutDocument::empty((0, 0)))
    }

    /// Encodes one tweet given its decoded image tensor.
    pub fn features(&self, tweet: &Tweet, image: &ImageTensor) -> Result<ExampleFeatures, PipelineError> {
        let wrap = |source| PipelineError::Model {
            id: tweet.id.clone(),
            source,
        };
        let text = encode_text(&tweet.text, self.text_encoder).map_err(wrap)?;
        let layout = if tweet.image_ref.is_some() {
            self.layout_for(tweet)
        } else {
            LayoutDocument::empty((0, 0))
        };
        let image = encode_image_layout(image, &layout, self.image_encoder).map_err(wrap)?;
        Ok(ExampleFeatures {
            id: tweet.id.clone(),
            label: tweet.label,
            text,
            image,
        })
    }

    fn load_images(&self, dataset: &Dataset, exec: Execution) -> Result<HashMap<PathBuf, ImageTensor>, PipelineError> {
        let mut paths: Vec<&Path> = dataset.examples.iter().filter_map(|t| t.image_ref.as_deref()).collect();
        paths.sort();
        paths.dedup();
        let tensors = exec.map(&paths, |p| load_image(p).and_then(|img| resize_image(&img)));
        paths
            .into_iter()
            .zip(tensors)
            .map(|(p, t)| Ok((p.to_path_buf(), t?)))
            .collect()
    }

    /// Encodes every example of `dataset`, whose split must be `S`.
    pub fn prepare<S: SplitMarker>(&self, dataset: &Dataset, exec: Execution) -> Result<Prepared<S>, PipelineError> {
        if dataset.split != S::SPLIT {
            return Err(PipelineError::WrongSplit {
                expected: S::SPLIT,
                got: dataset.split,
            });
        }
        let images = self.load_images(dataset, exec)?;
        let blank = ImageTensor::zeros();
        let exec = exec.restrict(self.text_encoder.thread_safe() && self.image_encoder.thread_safe());
        let features = exec.map(&dataset.examples, |tweet| {
            let image = tweet.image_ref.as_ref().map(|p| &images[p]).unwrap_or(&blank);
            self.features(tweet, image)
        });
        let examples = features.into_iter().collect::<Result<Vec<_>, _>>()?;
        Prepared::from_features(dataset.topic, dataset.split, examples)
    }
}
