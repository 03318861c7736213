//! Translation services used for back-translation.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use thiserror::Error;

#[derive(Debug, Error)]
#[error("translation {source_lang}->{target_lang} failed: {message}")]
pub struct TranslateError {
    pub source_lang: String,
    pub target_lang: String,
    pub message: String,
}

impl TranslateError {
    pub fn new(source: &str, target: &str, message: impl Into<String>) -> TranslateError {
        TranslateError {
            source_lang: source.into(),
            target_lang: target.into(),
            message: message.into(),
        }
    }
}

/// Machine translation between language codes (`en`, `fr`, ...).
///
/// Implementations must be deterministic for a fixed `(text, source, target)`
/// within one run; wrap nondeterministic backends in [`CachingTranslator`].
pub trait Translator: Send + Sync {
    fn name(&self) -> &str;

    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, TranslateError>;
}

/// Returns its input unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn name(&self) -> &str {
        "identity"
    }

    fn translate(&self, text: &str, _source: &str, _target: &str) -> Result<String, TranslateError> {
        Ok(text.to_string())
    }
}

/// Looks translations up in a fixed table; unknown inputs are errors.
#[derive(Clone, Debug, Default)]
pub struct TableTranslator {
    pairs: HashMap<(String, String, String), String>,
}

impl TableTranslator {
    pub fn new() -> TableTranslator {
        TableTranslator::default()
    }

    pub fn insert(&mut self, source: &str, target: &str, text: &str, translation: &str) {
        self.pairs.insert(
            (source.to_string(), target.to_string(), text.to_string()),
            translation.to_string(),
        );
    }

    /// Reads a headerless TSV of `source_lang  target_lang  text  translation` rows.
    pub fn load(path: &Path) -> Result<TableTranslator, TranslateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TranslateError::new("*", "*", format!("{}: {e}", path.display())))?;
        let mut table = TableTranslator::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(TranslateError::new(
                    "*",
                    "*",
                    format!("{}: line {}: expected 4 tab-separated fields", path.display(), n + 1),
                ));
            }
            table.insert(fields[0], fields[1], fields[2], fields[3]);
        }
        Ok(table)
    }
}

impl Translator for TableTranslator {
    fn name(&self) -> &str {
        "table"
    }

    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, TranslateError> {
        self.pairs
            .get(&(source.to_string(), target.to_string(), text.to_string()))
            .cloned()
            .ok_or_else(|| TranslateError::new(source, target, format!("no table entry for {text:?}")))
    }
}

/// Memoizes another translator so repeated requests return identical text.
pub struct CachingTranslator<T> {
    inner: T,
    cache: Mutex<HashMap<(String, String, String), String>>,
}

impl<T: Translator> CachingTranslator<T> {
    pub fn new(inner: T) -> CachingTranslator<T> {
        CachingTranslator {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl<T: Translator> Translator for CachingTranslator<T> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, TranslateError> {
        let key = (text.to_string(), source.to_string(), target.to_string());
        if let Some(hit) = self.cache.lock().expect("translation cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let out = self.inner.translate(text, source, target)?;
        self.cache
            .lock()
            .expect("translation cache poisoned")
            .insert(key, out.clone());
        Ok(out)
    }
}

#[cfg(feature = "http")]
pub use self::http::HttpTranslator;

#[cfg(feature = "http")]
mod http {
    use serde::{Deserialize, Serialize};

    use super::{TranslateError, Translator};

    /// JSON-over-HTTP translation client.
    ///
    /// Sends `POST {endpoint}` with body `{"q": text, "from": src, "to": tgt}`
    /// and `Authorization: Bearer <key>`; expects `{"translation": "..."}`.
    pub struct HttpTranslator {
        endpoint: String,
        api_key: String,
        agent: ureq::Agent,
    }

    #[derive(Serialize)]
    struct Request<'a> {
        q: &'a str,
        from: &'a str,
        to: &'a str,
    }

    #[derive(Deserialize)]
    struct Response {
        translation: String,
    }

    impl HttpTranslator {
        pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> HttpTranslator {
            let config = ureq::Agent::config_builder()
                .timeout_global(Some(std::time::Duration::from_secs(30)))
                .build();
            HttpTranslator {
                endpoint: endpoint.into(),
                api_key: api_key.into(),
                agent: config.into(),
            }
        }

        /// Reads the API key from `env_var`; a missing or empty variable is an error.
        pub fn from_env(endpoint: impl Into<String>, env_var: &str) -> Result<HttpTranslator, TranslateError> {
            match std::env::var(env_var) {
                Ok(key) if !key.trim().is_empty() => Ok(HttpTranslator::new(endpoint, key)),
                _ => Err(TranslateError::new(
                    "*",
                    "*",
                    format!("environment variable {env_var} with the translator API key is not set"),
                )),
            }
        }
    }

    impl Translator for HttpTranslator {
        fn name(&self) -> &str {
            "http"
        }

        fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, TranslateError> {
            let fail = |m: String| TranslateError::new(source, target, m);
            let mut response = self
                .agent
                .post(&self.endpoint)
                .header("Authorization", &format!("Bearer {}", self.api_key))
                .send_json(Request {
                    q: text,
                    from: source,
                    to: target,
                })
                .map_err(|e| fail(e.to_string()))?;
            let body: Response = response
                .body_mut()
                .read_json()
                .map_err(|e| fail(format!("bad response body: {e}")))?;
            Ok(body.translation)
        }
    }
}
