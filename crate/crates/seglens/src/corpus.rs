//! Corpus loading and text normalization.
//!
//! A corpus is a JSON-lines file of labeled messages. Normalization turns a
//! raw message into analysis tokens in five steps:
//!
//! 1. apply structured-text replacement rules to the raw text (URLs, emails,
//!    phone numbers, ... become `tag_<name>` tokens),
//! 2. lowercase,
//! 3. replace punctuation with spaces (underscore is preserved),
//! 4. split on whitespace,
//! 5. drop stopwords.
//!
//! The pipeline is idempotent: normalizing the space-joined output again
//! yields the same token sequence.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use regex::Regex;
use serde::Deserialize;

use crate::{Result, SeglensError};

/// Bundled default stopword list (one token per line, `#` comments).
pub const DEFAULT_STOPWORDS: &str = include_str!("assets/stopwords.txt");

/// Bundled default replacement rules (`name<TAB>regex` per line).
pub const DEFAULT_PATTERN_RULES: &str = include_str!("assets/pattern_rules.tsv");

/// One labeled message as read from a corpus file.
#[derive(Debug, Clone)]
pub struct Message {
    /// Unique message id.
    pub id: String,
    /// Raw message text.
    pub text: String,
    /// Binary class label, 0 or 1.
    pub label: u8,
    /// Free-form string metadata (for example a topic or source field).
    pub metadata: BTreeMap<String, String>,
}

/// A message after normalization.
#[derive(Debug, Clone)]
pub struct TokenizedMessage {
    /// Unique message id.
    pub id: String,
    /// Binary class label, 0 or 1.
    pub label: u8,
    /// Metadata carried over from the raw message.
    pub metadata: BTreeMap<String, String>,
    /// Normalized tokens; may be empty.
    pub tokens: Vec<String>,
}

/// An ordered collection of raw messages with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    messages: Vec<Message>,
    index: HashMap<String, usize>,
}

/// An ordered collection of tokenized messages, in corpus order.
#[derive(Debug, Clone, Default)]
pub struct TokenizedCorpus {
    messages: Vec<TokenizedMessage>,
    index: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct RawMessage {
    id: String,
    text: String,
    label: i64,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

/// Read a corpus from a JSON-lines file.
///
/// Each line is an object `{"id", "text", "label", "metadata"?}` where
/// `label` is 0 or 1 and `metadata` is an optional string-to-string map.
/// Blank lines are skipped. Duplicate ids, labels other than 0/1, and
/// malformed JSON are reported with their line number.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|source| SeglensError::ReadInput {
        path: path.display().to_string(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut corpus = Corpus::default();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| SeglensError::ReadInput {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawMessage =
            serde_json::from_str(&line).map_err(|e| SeglensError::InvalidInput {
                path: path.display().to_string(),
                line: lineno,
                message: format!("malformed message record: {e}"),
            })?;
        if raw.label != 0 && raw.label != 1 {
            return Err(SeglensError::InvalidInput {
                path: path.display().to_string(),
                line: lineno,
                message: format!("label must be 0 or 1, got {}", raw.label),
            });
        }
        let message = Message {
            id: raw.id,
            text: raw.text,
            label: raw.label as u8,
            metadata: raw.metadata,
        };
        corpus.push(message).map_err(|e| match e {
            SeglensError::DataMismatch(m) => SeglensError::InvalidInput {
                path: path.display().to_string(),
                line: lineno,
                message: m,
            },
            other => other,
        })?;
    }
    Ok(corpus)
}

impl Corpus {
    /// Append a message, rejecting duplicate ids.
    pub fn push(&mut self, message: Message) -> Result<()> {
        if self.index.contains_key(&message.id) {
            return Err(SeglensError::DataMismatch(format!(
                "duplicate message id {:?}",
                message.id
            )));
        }
        self.index.insert(message.id.clone(), self.messages.len());
        self.messages.push(message);
        Ok(())
    }

    /// Messages in load order.
    #[must_use]
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Number of messages.
    #[must_use]
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    /// True when the corpus holds no messages.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Look up a message by id.
    #[must_use]
    pub fn get(&self, id: &str) -> Option<&Message> {
        self.index.get(id).map(|&i| &self.messages[i])
    }

    /// Normalize every message. Zero-token messages are kept: an empty token
    /// list is meaningful (it drives the shortest length bucket).
    #[must_use]
    pub fn tokenize(&self, rules: &RuleSet, stopwords: &Stopwords) -> TokenizedCorpus {
        let messages: Vec<TokenizedMessage> = self
            .messages
            .par_iter()
            .map(|m| TokenizedMessage {
                id: m.id.clone(),
                label: m.label,
                metadata: m.metadata.clone(),
                tokens: normalize_text(&m.text, rules, stopwords),
            })
            .collect();
        let index = messages
            .iter()
            .enumerate()
            .map(|(i, m)| (m.id.clone(), i))
            .collect();
        TokenizedCorpus { messages, index }
    }
}

impl TokenizedCorpus {
    /// Build directly from tokenized messages, rejecting duplicate ids.
    pub fn from_messages(messages: Vec<TokenizedMessage>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, m) in messages.iter().enumerate() {
            if index.insert(m.id.clone(), i).is_some() {
                return Err(SeglensError::DataMismatch(format!(
                    "duplicate message id {:?}",
                    m.id
                )));
            }
        }
        Ok(TokenizedCorpus { messages, index })
    }

    /// Messages in corpus order.
    #[must_use]
    pub fn messages(&self) -> &[TokenizedMessage] {
        &self.messages
    }

    /// Number of messages.
    #[must_use]
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    /// True when the corpus holds no messages.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Look up a message by id.
    #[must_use]
    pub fn get(&self, id: &str) -> Option<&TokenizedMessage> {
        self.index.get(id).map(|&i| &self.messages[i])
    }

    /// True when the corpus contains the id.
    #[must_use]
    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }
}

/// A named replacement rule applied to raw text before tokenization.
#[derive(Debug, Clone)]
pub struct PatternRule {
    /// Rule name; the replacement token is `tag_<name>`.
    pub name: String,
    /// Pattern matched against the raw text.
    pub regex: Regex,
}

/// An ordered list of replacement rules; order is priority.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<PatternRule>,
}

impl RuleSet {
    /// The bundled default rules: url, html, email, ssn, phone, date, time,
    /// money, number, in that priority order.
    #[must_use]
    pub fn bundled() -> RuleSet {
        RuleSet::parse(DEFAULT_PATTERN_RULES, "<bundled pattern rules>")
            .expect("bundled pattern rules must parse")
    }

    /// An empty rule set (no replacements).
    #[must_use]
    pub fn empty() -> RuleSet {
        RuleSet { rules: Vec::new() }
    }

    /// Read rules from a `name<TAB>regex` file.
    pub fn from_file(path: &Path) -> Result<RuleSet> {
        let text = std::fs::read_to_string(path).map_err(|source| SeglensError::ReadInput {
            path: path.display().to_string(),
            source,
        })?;
        RuleSet::parse(&text, &path.display().to_string())
    }

    /// Parse rules from text, one `name<TAB>regex` per line. Blank lines and
    /// `#` comments are skipped. Rule names must be `[a-z0-9_]+` so that the
    /// replacement token survives normalization.
    pub fn parse(text: &str, origin: &str) -> Result<RuleSet> {
        let mut rules = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (name, pattern) = line.split_once('\t').ok_or(SeglensError::InvalidInput {
                path: origin.to_string(),
                line: lineno,
                message: "expected name<TAB>regex".to_string(),
            })?;
            if name.is_empty()
                || !name
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
            {
                return Err(SeglensError::InvalidInput {
                    path: origin.to_string(),
                    line: lineno,
                    message: format!("rule name {name:?} must match [a-z0-9_]+"),
                });
            }
            if !seen.insert(name.to_string()) {
                return Err(SeglensError::InvalidInput {
                    path: origin.to_string(),
                    line: lineno,
                    message: format!("duplicate rule name {name:?}"),
                });
            }
            let regex = Regex::new(pattern).map_err(|e| SeglensError::InvalidInput {
                path: origin.to_string(),
                line: lineno,
                message: format!("invalid regex: {e}"),
            })?;
            rules.push(PatternRule {
                name: name.to_string(),
                regex,
            });
        }
        Ok(RuleSet { rules })
    }

    /// Rules in priority order.
    #[must_use]
    pub fn rules(&self) -> &[PatternRule] {
        &self.rules
    }

    /// Apply every rule to the text in priority order. Matches are replaced
    /// by ` tag_<name> ` (padded so adjacent text cannot fuse with the tag);
    /// because earlier rules rewrite the text first, they win on overlap.
    #[must_use]
    pub fn apply(&self, text: &str) -> String {
        let mut out = text.to_string();
        for rule in &self.rules {
            let replacement = format!(" tag_{} ", rule.name);
            out = rule.regex.replace_all(&out, replacement.as_str()).into_owned();
        }
        out
    }
}

/// A stopword set; membership is tested on lowercased tokens.
#[derive(Debug, Clone, Default)]
pub struct Stopwords {
    set: HashSet<String>,
}

impl Stopwords {
    /// The bundled default English stopword list.
    #[must_use]
    pub fn bundled() -> Stopwords {
        Stopwords::parse(DEFAULT_STOPWORDS)
    }

    /// An empty stopword set (nothing is dropped).
    #[must_use]
    pub fn empty() -> Stopwords {
        Stopwords::default()
    }

    /// Read a stopword list from a file (one token per line, `#` comments).
    pub fn from_file(path: &Path) -> Result<Stopwords> {
        let text = std::fs::read_to_string(path).map_err(|source| SeglensError::ReadInput {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Stopwords::parse(&text))
    }

    /// Parse a stopword list from text. Tokens are lowercased.
    #[must_use]
    pub fn parse(text: &str) -> Stopwords {
        let set = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Stopwords { set }
    }

    /// True when the token is a stopword.
    #[must_use]
    pub fn contains(&self, token: &str) -> bool {
        self.set.contains(token)
    }

    /// Number of stopwords.
    #[must_use]
    pub fn len(&self) -> usize {
        self.set.len()
    }

    /// True when the set is empty.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}

/// Normalize raw text into analysis tokens (see the module doc for the five
/// steps). Every returned token is non-empty and free of whitespace.
#[must_use]
pub fn normalize_text(text: &str, rules: &RuleSet, stopwords: &Stopwords) -> Vec<String> {
    let tagged = rules.apply(text);
    let lowered = tagged.to_lowercase();
    let spaced: String = lowered
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '_' {
                c
            } else {
                ' '
            }
        })
        .collect();
    spaced
        .split_whitespace()
        .filter(|t| !stopwords.contains(t))
        .map(str::to_string)
        .collect()
}

/// Count, for every token, the number of messages that contain it at least
/// once. Each message contributes at most 1 per token.
#[must_use]
pub fn document_frequency(corpus: &TokenizedCorpus) -> HashMap<String, usize> {
    let mut df: HashMap<String, usize> = HashMap::new();
    for message in corpus.messages() {
        let distinct: HashSet<&String> = message.tokens.iter().collect();
        for token in distinct {
            *df.entry(token.clone()).or_insert(0) += 1;
        }
    }
    df
}
