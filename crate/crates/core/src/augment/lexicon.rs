//! Noun synsets from WordNet database files (`index.noun`, `data.noun`,
//! optional `noun.exc`).

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AugmentError;

/// One sense: an NLTK-style id such as `hazard.n.01`, a gloss, and its lemmas
/// in lexicon order (multiword lemmas use underscores).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynsetEntry {
    pub id: String,
    pub gloss: String,
    pub lemmas: Vec<String>,
}

impl SynsetEntry {
    pub fn new(id: impl Into<String>, gloss: impl Into<String>, lemmas: Vec<String>) -> Result<SynsetEntry, AugmentError> {
        let id = id.into();
        if lemmas.is_empty() {
            return Err(AugmentError::Lexicon(format!("synset {id} has no lemmas")));
        }
        if !is_synset_id(&id) {
            return Err(AugmentError::Lexicon(format!("malformed synset id {id:?}")));
        }
        Ok(SynsetEntry {
            id,
            gloss: gloss.into(),
            lemmas,
        })
    }
}

impl fmt::Display for SynsetEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.id, self.gloss)
    }
}

/// `lemma.pos.NN` with pos one of n, v, a, s, r.
pub fn is_synset_id(id: &str) -> bool {
    let mut parts = id.rsplitn(3, '.');
    let (Some(num), Some(pos), Some(lemma)) = (parts.next(), parts.next(), parts.next()) else {
        return false;
    };
    !lemma.is_empty()
        && matches!(pos, "n" | "v" | "a" | "s" | "r")
        && num.len() >= 2
        && num.bytes().all(|b| b.is_ascii_digit())
}

/// Read access to noun senses.
pub trait Lexicon: Send + Sync {
    /// Noun synsets whose lemma list contains exactly `lemma` (lowercase,
    /// underscores for spaces), in sense order.
    fn noun_synsets(&self, lemma: &str) -> Vec<SynsetEntry>;

    fn synset(&self, id: &str) -> Option<SynsetEntry>;

    /// Irregular base forms for an inflected noun (e.g. `children` → `child`).
    fn exceptions(&self, _word: &str) -> Vec<String> {
        Vec::new()
    }
}

const NOUN_SUFFIXES: [(&str, &str); 8] = [
    ("s", ""),
    ("ses", "s"),
    ("xes", "x"),
    ("zes", "z"),
    ("ches", "ch"),
    ("shes", "sh"),
    ("men", "man"),
    ("ies", "y"),
];

/// Candidate base forms for a noun, most literal first.
pub fn base_forms(word: &str, lexicon: &dyn Lexicon) -> Vec<String> {
    let mut forms = vec![word.to_string()];
    forms.extend(lexicon.exceptions(word));
    if !word.ends_with("ss") {
        for (suffix, replacement) in NOUN_SUFFIXES {
            if let Some(stem) = word.strip_suffix(suffix) {
                if !stem.is_empty() {
                    forms.push(format!("{stem}{replacement}"));
                }
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    forms.retain(|f| seen.insert(f.clone()));
    forms
}

pub(crate) fn normalize_lemma(word: &str) -> String {
    word.trim().to_lowercase().replace(' ', "_")
}

/// All noun synsets of `noun`, trying the literal form first and then its
/// morphological base forms. Unknown lemmas yield an empty list.
pub fn lookup_synsets(noun: &str, lexicon: &dyn Lexicon) -> Vec<SynsetEntry> {
    let word = normalize_lemma(noun);
    if word.is_empty() {
        return Vec::new();
    }
    base_forms(&word, lexicon)
        .into_iter()
        .map(|form| lexicon.noun_synsets(&form))
        .find(|senses| !senses.is_empty())
        .unwrap_or_default()
}

/// The lemma under which [`lookup_synsets`] found `noun`, if any.
pub fn matched_base_form(noun: &str, lexicon: &dyn Lexicon) -> Option<String> {
    let word = normalize_lemma(noun);
    base_forms(&word, lexicon)
        .into_iter()
        .find(|form| !lexicon.noun_synsets(form).is_empty())
}

struct RawSynset {
    words: Vec<String>,
    gloss: String,
}

/// Noun part of a WordNet database directory, held in memory.
pub struct WordNet {
    index: HashMap<String, Vec<u64>>,
    synsets: HashMap<u64, RawSynset>,
    names: HashMap<u64, String>,
    by_name: HashMap<String, u64>,
    exceptions: HashMap<String, Vec<String>>,
}

fn parse_error(file: &str, line: usize, msg: impl fmt::Display) -> AugmentError {
    AugmentError::Lexicon(format!("{file}:{line}: {msg}"))
}

impl WordNet {
    pub fn load(dir: &Path) -> Result<WordNet, AugmentError> {
        let read = |name: &str| {
            fs::read_to_string(dir.join(name))
                .map_err(|e| AugmentError::Lexicon(format!("{}: {e}", dir.join(name).display())))
        };
        let index_text = read("index.noun")?;
        let data_text = read("data.noun")?;
        let exc_text = if dir.join("noun.exc").is_file() {
            read("noun.exc")?
        } else {
            String::new()
        };
        WordNet::parse(&index_text, &data_text, &exc_text)
    }

    pub fn parse(index_text: &str, data_text: &str, exc_text: &str) -> Result<WordNet, AugmentError> {
        let mut synsets = HashMap::new();
        let mut offset = 0u64;
        for (n, line) in data_text.split_inclusive('\n').enumerate() {
            let start = offset;
            offset += line.len() as u64;
            if line.starts_with("  ") || line.trim().is_empty() {
                continue;
            }
            let (head, gloss) = line.split_once(" | ").unwrap_or((line, ""));
            let fields: Vec<&str> = head.split_whitespace().collect();
            let declared: u64 = fields
                .first()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| parse_error("data.noun", n + 1, "missing synset offset"))?;
            if declared != start {
                return Err(parse_error(
                    "data.noun",
                    n + 1,
                    format!("declared offset {declared} but line starts at byte {start}"),
                ));
            }
            let count = fields
                .get(3)
                .and_then(|f| usize::from_str_radix(f, 16).ok())
                .ok_or_else(|| parse_error("data.noun", n + 1, "bad word count"))?;
            let words: Vec<String> = (0..count)
                .map(|i| {
                    fields
                        .get(4 + 2 * i)
                        .map(|w| w.to_string())
                        .ok_or_else(|| parse_error("data.noun", n + 1, "truncated word list"))
                })
                .collect::<Result<_, _>>()?;
            synsets.insert(
                start,
                RawSynset {
                    words,
                    gloss: gloss.trim().to_string(),
                },
            );
        }

        let mut index = HashMap::new();
        for (n, line) in index_text.lines().enumerate() {
            if line.starts_with("  ") || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| parse_error("index.noun", n + 1, msg);
            let synset_count: usize = fields.get(2).and_then(|f| f.parse().ok()).ok_or_else(|| bad("bad synset_cnt"))?;
            let pointer_count: usize = fields.get(3).and_then(|f| f.parse().ok()).ok_or_else(|| bad("bad p_cnt"))?;
            let first_offset = 4 + pointer_count + 2;
            let offsets: Vec<u64> = fields
                .get(first_offset..first_offset + synset_count)
                .ok_or_else(|| bad("truncated offset list"))?
                .iter()
                .map(|f| f.parse().map_err(|_| bad("bad synset offset")))
                .collect::<Result<_, _>>()?;
            for off in &offsets {
                if !synsets.contains_key(off) {
                    return Err(bad(&format!("offset {off} not present in data.noun")));
                }
            }
            index.insert(fields[0].to_string(), offsets);
        }

        // NLTK naming: first lemma of the synset, then that lemma's sense number.
        let mut names = HashMap::new();
        let mut by_name = HashMap::new();
        for (&off, raw) in &synsets {
            let head = raw.words[0].to_lowercase();
            let sense = index
                .get(&head)
                .and_then(|offs| offs.iter().position(|o| *o == off))
                .map(|p| p + 1)
                .unwrap_or(1);
            let name = format!("{head}.n.{sense:02}");
            by_name.insert(name.clone(), off);
            names.insert(off, name);
        }

        let mut exceptions: HashMap<String, Vec<String>> = HashMap::new();
        for line in exc_text.lines() {
            let mut fields = line.split_whitespace();
            if let Some(inflected) = fields.next() {
                exceptions
                    .entry(inflected.to_string())
                    .or_default()
                    .extend(fields.map(str::to_string));
            }
        }

        Ok(WordNet {
            index,
            synsets,
            names,
            by_name,
            exceptions,
        })
    }

    fn entry(&self, off: u64) -> SynsetEntry {
        let raw = &self.synsets[&off];
        SynsetEntry {
            id: self.names[&off].clone(),
            gloss: raw.gloss.clone(),
            lemmas: raw.words.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }
}

impl Lexicon for WordNet {
    fn noun_synsets(&self, lemma: &str) -> Vec<SynsetEntry> {
        self.index
            .get(lemma)
            .map(|offs| offs.iter().map(|&o| self.entry(o)).collect())
            .unwrap_or_default()
    }

    fn synset(&self, id: &str) -> Option<SynsetEntry> {
        self.by_name.get(id).map(|&o| self.entry(o))
    }

    fn exceptions(&self, word: &str) -> Vec<String> {
        self.exceptions.get(word).cloned().unwrap_or_default()
    }
}

/// A lexicon built from explicit entries; lookup scans lemma lists in entry order.
#[derive(Clone, Debug, Default)]
pub struct MemoryLexicon {
    entries: Vec<SynsetEntry>,
}

impl MemoryLexicon {
    pub fn new(entries: Vec<SynsetEntry>) -> MemoryLexicon {
        MemoryLexicon { entries }
    }
}

impl Lexicon for MemoryLexicon {
    fn noun_synsets(&self, lemma: &str) -> Vec<SynsetEntry> {
        self.entries
            .iter()
            .filter(|e| e.id.contains(".n.") && e.lemmas.iter().any(|l| l.to_lowercase() == lemma))
            .cloned()
            .collect()
    }

    fn synset(&self, id: &str) -> Option<SynsetEntry> {
        self.entries.iter().find(|e| e.id == id).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn bundled() -> WordNet {
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/lexicon");
        WordNet::load(&dir).unwrap()
    }

    #[test]
    fn synset_id_pattern() {
        assert!(is_synset_id("hazard.n.01"));
        assert!(is_synset_id("dog-iron.n.12"));
        assert!(is_synset_id("a.b.n.03"));
        assert!(!is_synset_id("hazard.n.1"));
        assert!(!is_synset_id("hazard.x.01"));
        assert!(!is_synset_id("hazard"));
        assert!(SynsetEntry::new("x.n.01", "", vec![]).is_err());
    }

    #[test]
    fn risk_senses_in_order() {
        let ids: Vec<_> = lookup_synsets("risk", &bundled()).into_iter().map(|s| s.id).collect();
        assert_eq!(ids, ["hazard.n.01", "risk.n.02", "risk.n.03", "risk.n.04"]);
    }

    #[test]
    fn hazard_synset_contents() {
        let s = bundled().synset("hazard.n.01").unwrap();
        assert_eq!(s.gloss, "a source of danger; a possibility of incurring loss or misfortune");
        assert_eq!(s.lemmas, ["hazard", "jeopardy", "peril", "risk", "endangerment"]);
    }

    #[test]
    fn unknown_lemma_is_empty() {
        assert!(lookup_synsets("zzzqqq", &bundled()).is_empty());
    }

    #[test]
    fn plural_and_irregular_forms() {
        let wn = bundled();
        assert_eq!(lookup_synsets("laws", &wn)[0].id, "law.n.01");
        assert_eq!(lookup_synsets("Children", &wn)[0].id, "child.n.01");
        assert_eq!(matched_base_form("guns", &wn).as_deref(), Some("gun"));
        assert_eq!(matched_base_form("hot dog", &wn).as_deref(), Some("hot_dog"));
    }

    #[test]
    fn offset_mismatch_is_rejected() {
        let data = "00000005 07 n 01 thing 0 000 | stuff\n";
        let index = "thing n 1 0 1 0 00000005\n";
        assert!(WordNet::parse(index, data, "").is_err());
    }
}
