//! A small synthetic corpus with rendered-text images, for demos and tests.

mod font;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use image::{DynamicImage, ImageFormat};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use self::font::{renderable_words, BitmapFontOcr, FontRenderer, GLYPH_H, GLYPH_W};

use crate::corpus::{Split, StanceLabel, Topic};

struct Vocabulary {
    prefix: &'static str,
    hashtags: [&'static str; 2],
    support_text: &'static [&'static str],
    support_image: &'static [&'static str],
    oppose_text: &'static [&'static str],
    oppose_image: &'static [&'static str],
}

const GUN_CONTROL: Vocabulary = Vocabulary {
    prefix: "gc",
    hashtags: ["#GunControl", "#guns"],
    support_text: &[
        "We need stronger gun laws to protect every child",
        "Ban assault weapons and save lives",
        "Background checks reduce gun violence in our community",
        "School shootings must end with real reform",
        "The safety of our families matters more than any weapon",
        "Every death from firearms is preventable",
        "The public demands universal background checks",
    ],
    support_image: &["BAN ASSAULT WEAPONS", "SAVE LIVES", "END GUN VIOLENCE", "SAFE SCHOOLS NOW", "BACKGROUND CHECKS"],
    oppose_text: &[
        "The second amendment protects our freedom",
        "Gun owners have a right to self defense",
        "The government should not take our guns",
        "A firearm ban punishes law abiding citizens",
        "An armed citizen keeps the family safe",
        "Criminals ignore every gun law",
        "Defend the constitution and our liberty",
    ],
    oppose_image: &["PROTECT GUN RIGHTS", "SECOND AMENDMENT", "SHALL NOT BE INFRINGED", "DEFEND FREEDOM", "ARMED AND SAFE"],
};

const ABORTION: Vocabulary = Vocabulary {
    prefix: "ab",
    hashtags: ["#abortion", "#RoeVWade"],
    support_text: &[
        "My body my choice",
        "Women deserve access to safe health care",
        "The court ruling takes away a basic right",
        "Protect reproductive freedom for every woman",
        "Doctors and patients should decide, not the state",
        "Keep abortion safe and legal",
        "A woman has the right to choose her future",
    ],
    support_image: &["MY BODY MY CHOICE", "KEEP ABORTION LEGAL", "WOMENS RIGHTS", "TRUST WOMEN", "PRO CHOICE"],
    oppose_text: &[
        "Every life deserves protection from conception",
        "The unborn child has a heartbeat",
        "Choose life and support mothers",
        "Adoption is a loving option",
        "The baby is a person with rights",
        "Defend the unborn in every state",
        "Pregnancy centers help mothers in need",
    ],
    oppose_image: &["CHOOSE LIFE", "PRO LIFE", "LIFE BEGINS AT CONCEPTION", "SAVE THE BABIES", "DEFEND THE UNBORN"],
};

const OPENERS: [&str; 5] = ["", "Honestly, ", "Reminder: ", "Once again, ", "Say it louder: "];
const CLOSERS: [&str; 4] = ["", " today", " right now", " and we will not stop"];

/// Per-split (support, oppose) counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSizes {
    pub train: (usize, usize),
    pub validation: (usize, usize),
    pub test: (usize, usize),
}

impl SplitSizes {
    /// 40/12/12 examples; abortion training data is skewed toward OPPOSE.
    pub fn mini(topic: Topic) -> SplitSizes {
        let train = match topic {
            Topic::GunControl => (22, 18),
            Topic::Abortion => (11, 29),
        };
        SplitSizes {
            train,
            validation: (6, 6),
            test: (6, 6),
        }
    }

    fn of(&self, split: Split) -> (usize, usize) {
        match split {
            Split::Train => self.train,
            Split::Validation => self.validation,
            Split::Test => self.test,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOptions {
    pub seed: u64,
    pub image_size: (u32, u32),
    /// Every n-th example has no image (0 disables).
    pub missing_image_every: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            seed: 7,
            image_size: (240, 160),
            missing_image_every: 9,
        }
    }
}

fn vocabulary(topic: Topic) -> &'static Vocabulary {
    match topic {
        Topic::GunControl => &GUN_CONTROL,
        Topic::Abortion => &ABORTION,
    }
}

fn tweet_text<R: Rng>(vocab: &Vocabulary, label: StanceLabel, rng: &mut R) -> String {
    let phrases = match label {
        StanceLabel::Support => vocab.support_text,
        StanceLabel::Oppose => vocab.oppose_text,
    };
    let opener = OPENERS.choose(rng).expect("nonempty");
    let phrase = phrases.choose(rng).expect("nonempty");
    let closer = CLOSERS.choose(rng).expect("nonempty");
    let tag = vocab.hashtags.choose(rng).expect("nonempty");
    format!("{opener}{phrase}{closer}. {tag}")
}

fn image_caption<R: Rng>(vocab: &Vocabulary, label: StanceLabel, rng: &mut R) -> &'static str {
    let captions = match label {
        StanceLabel::Support => vocab.support_image,
        StanceLabel::Oppose => vocab.oppose_image,
    };
    captions.choose(rng).expect("nonempty")
}

fn pastel<R: Rng>(rng: &mut R) -> [u8; 3] {
    [rng.random_range(190..=255), rng.random_range(190..=255), rng.random_range(190..=255)]
}

/// Writes `<dir>/<split>.tsv` for all three splits plus `<dir>/images/*.png`.
/// Returns the number of examples written.
pub fn write_topic(dir: &Path, topic: Topic, sizes: SplitSizes, options: &SynthOptions) -> io::Result<usize> {
    let vocab = vocabulary(topic);
    let renderer = FontRenderer::default();
    let images = dir.join("images");
    fs::create_dir_all(&images)?;
    let topic_seed = options.seed ^ (topic as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(topic_seed);
    let mut written = 0;
    for split in [Split::Train, Split::Validation, Split::Test] {
        let (n_support, n_oppose) = sizes.of(split);
        let mut labels: Vec<StanceLabel> = std::iter::repeat_n(StanceLabel::Support, n_support)
            .chain(std::iter::repeat_n(StanceLabel::Oppose, n_oppose))
            .collect();
        labels.shuffle(&mut rng);
        let mut tsv = String::from("tweet_id\ttweet_text\timage_path\tstance\n");
        for (i, label) in labels.into_iter().enumerate() {
            let id = format!("{}-{}-{:03}", vocab.prefix, split.as_str(), i + 1);
            let text = tweet_text(vocab, label, &mut rng);
            let caption = image_caption(vocab, label, &mut rng);
            let background = pastel(&mut rng);
            written += 1;
            let image_path = if options.missing_image_every > 0 && written % options.missing_image_every == 0 {
                String::new()
            } else {
                let (w, h) = options.image_size;
                let img = renderer.render(&renderable_words(caption), w, h, background);
                let rel = format!("images/{id}.png");
                DynamicImage::ImageRgb8(img)
                    .save_with_format(dir.join(&rel), ImageFormat::Png)
                    .map_err(io::Error::other)?;
                rel
            };
            let _ = writeln!(tsv, "{id}\t{text}\t{image_path}\t{}", label.as_str());
        }
        fs::write(dir.join(format!("{}.tsv", split.as_str())), tsv)?;
    }
    Ok(written)
}

/// Writes the two-topic mini corpus under `root/<topic>/`.
pub fn write_mini_corpus(root: &Path, options: &SynthOptions) -> io::Result<usize> {
    let mut total = 0;
    for topic in [Topic::GunControl, Topic::Abortion] {
        total += write_topic(&root.join(topic.as_str()), topic, SplitSizes::mini(topic), options)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{extract_layout, imbalance_ratio, load_image, load_split};

    #[test]
    fn mini_corpus_loads_and_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(write_mini_corpus(dir.path(), &SynthOptions::default()).unwrap(), 128);
        let ab = dir.path().join("abortion");
        let train = load_split(&ab.join("train.tsv"), Topic::Abortion, Split::Train).unwrap();
        assert_eq!(train.label_counts(), (11, 29));
        assert_eq!(imbalance_ratio(&train).unwrap().to_string(), "1:2.64 (support minority)");
        let with_image = train.examples.iter().find(|t| t.image_ref.is_some()).unwrap();
        let img = load_image(with_image.image_ref.as_ref().unwrap()).unwrap();
        let layout = extract_layout(&img, &BitmapFontOcr::default()).unwrap();
        assert!(!layout.words.is_empty());
        assert!(train.examples.iter().any(|t| t.image_ref.is_none()));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_mini_corpus(a.path(), &SynthOptions::default()).unwrap();
        write_mini_corpus(b.path(), &SynthOptions::default()).unwrap();
        for rel in ["gun_control/train.tsv", "abortion/test.tsv", "abortion/images/ab-train-001.png"] {
            assert_eq!(fs::read(a.path().join(rel)).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{rel}");
        }
    }
}
