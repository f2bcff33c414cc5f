//! Word-embedding tables and similarity measures.
//!
//! Tables are read from the word2vec text format: an optional `count dim`
//! header line followed by one `token v1 v2 ... vdim` row per word. Files
//! ending in `.gz` are transparently decompressed. Vector components are
//! stored as `f32`; all similarity arithmetic accumulates in `f64`.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use crate::{Result, SeglensError};

/// Default anchor words for the masculine side of the gender axis.
pub const DEFAULT_MALE_ANCHORS: [&str; 6] = ["man", "men", "he", "his", "sir", "gentleman"];

/// Default anchor words for the feminine side of the gender axis.
pub const DEFAULT_FEMALE_ANCHORS: [&str; 6] = ["woman", "women", "she", "her", "madam", "lady"];

/// A token-to-vector table with a fixed dimensionality.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

/// A named list of anchor words, before resolution against a table.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    /// Display name of the set (for example `male` or `complaint`).
    pub name: String,
    /// Anchor words in priority order.
    pub words: Vec<String>,
}

/// An anchor set restricted to the words present in a specific table.
#[derive(Debug, Clone)]
pub struct ResolvedAnchorSet {
    /// Display name carried over from the unresolved set.
    pub name: String,
    words: Vec<String>,
}

impl AnchorSet {
    /// Build a set from a name and word list.
    #[must_use]
    pub fn new(name: &str, words: &[&str]) -> AnchorSet {
        AnchorSet {
            name: name.to_string(),
            words: words.iter().map(|w| w.to_string()).collect(),
        }
    }

    /// The bundled masculine anchor set.
    #[must_use]
    pub fn default_male() -> AnchorSet {
        AnchorSet::new("male", &DEFAULT_MALE_ANCHORS)
    }

    /// The bundled feminine anchor set.
    #[must_use]
    pub fn default_female() -> AnchorSet {
        AnchorSet::new("female", &DEFAULT_FEMALE_ANCHORS)
    }

    /// Restrict the set to words the table knows. Missing words are dropped
    /// with a logged warning; a set with no resolvable word is an error.
    pub fn resolve(&self, table: &EmbeddingTable) -> Result<ResolvedAnchorSet> {
        let mut words = Vec::new();
        for word in &self.words {
            if table.contains(word) {
                words.push(word.clone());
            } else {
                log::warn!(
                    "anchor set {:?}: dropping {:?} (not in embedding table)",
                    self.name,
                    word
                );
            }
        }
        if words.is_empty() {
            return Err(SeglensError::InvalidConfig(format!(
                "anchor set {:?} has no words present in the embedding table",
                self.name
            )));
        }
        Ok(ResolvedAnchorSet {
            name: self.name.clone(),
            words,
        })
    }
}

impl ResolvedAnchorSet {
    /// The resolved words, in original order.
    #[must_use]
    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Read an embedding table from a word2vec-format text file.
///
/// If the first line consists of exactly two integer fields it is taken as a
/// `count dim` header; otherwise the file is treated as headerless and the
/// dimensionality is inferred from the first row. A `.gz` extension selects
/// gzip decompression. Rows whose width disagrees with the established
/// dimensionality, and non-finite components, are errors naming the line.
/// A token repeated on a later line replaces the earlier vector (last one
/// wins), with a logged warning.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path).map_err(|source| SeglensError::ReadInput {
        path: path.display().to_string(),
        source,
    })?;
    let reader: Box<dyn BufRead> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(std::io::BufReader::new(flate2::read::GzDecoder::new(file)))
    } else {
        Box::new(std::io::BufReader::new(file))
    };
    parse_embeddings(reader, &path.display().to_string())
}

fn parse_embeddings(reader: impl BufRead, origin: &str) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::default();
    let mut lines = reader.lines().enumerate();

    let first = loop {
        match lines.next() {
            None => return Ok(table),
            Some((i, line)) => {
                let line = line.map_err(|source| SeglensError::ReadInput {
                    path: origin.to_string(),
                    source,
                })?;
                if !line.trim().is_empty() {
                    break (i + 1, line);
                }
            }
        }
    };

    let fields: Vec<&str> = first.1.split_whitespace().collect();
    let header = fields.len() == 2
        && fields[0].parse::<usize>().is_ok()
        && fields[1].parse::<usize>().is_ok();
    if header {
        table.dim = fields[1].parse().expect("checked integer");
    } else {
        parse_row(&mut table, &first.1, first.0, origin)?;
    }

    for (i, line) in lines {
        let line = line.map_err(|source| SeglensError::ReadInput {
            path: origin.to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        parse_row(&mut table, &line, i + 1, origin)?;
    }
    Ok(table)
}

fn parse_row(table: &mut EmbeddingTable, line: &str, lineno: usize, origin: &str) -> Result<()> {
    let mut fields = line.split_whitespace();
    let token = fields
        .next()
        .ok_or_else(|| SeglensError::InvalidInput {
            path: origin.to_string(),
            line: lineno,
            message: "empty embedding row".to_string(),
        })?
        .to_string();
    let mut vector = Vec::new();
    for field in fields {
        let value: f32 = field.parse().map_err(|_| SeglensError::InvalidInput {
            path: origin.to_string(),
            line: lineno,
            message: format!("cannot parse {field:?} as a number"),
        })?;
        if !value.is_finite() {
            return Err(SeglensError::InvalidInput {
                path: origin.to_string(),
                line: lineno,
                message: format!("non-finite component {field:?}"),
            });
        }
        vector.push(value);
    }
    if vector.is_empty() {
        return Err(SeglensError::InvalidInput {
            path: origin.to_string(),
            line: lineno,
            message: format!("token {token:?} has no vector components"),
        });
    }
    if table.dim == 0 {
        table.dim = vector.len();
    } else if vector.len() != table.dim {
        return Err(SeglensError::InvalidInput {
            path: origin.to_string(),
            line: lineno,
            message: format!(
                "expected {} components, found {}",
                table.dim,
                vector.len()
            ),
        });
    }
    if table.vectors.insert(token.clone(), vector).is_some() {
        log::warn!("duplicate embedding token {token:?}; keeping the later row");
    }
    Ok(())
}

impl EmbeddingTable {
    /// Build a table from (token, vector) pairs. All vectors must share one
    /// dimensionality.
    pub fn from_pairs(pairs: Vec<(String, Vec<f32>)>) -> Result<EmbeddingTable> {
        let mut table = EmbeddingTable::default();
        for (token, vector) in pairs {
            if vector.is_empty() {
                return Err(SeglensError::InvalidConfig(format!(
                    "embedding for {token:?} is empty"
                )));
            }
            if table.dim == 0 {
                table.dim = vector.len();
            } else if vector.len() != table.dim {
                return Err(SeglensError::InvalidConfig(format!(
                    "embedding for {token:?} has {} components, expected {}",
                    vector.len(),
                    table.dim
                )));
            }
            table.vectors.insert(token, vector);
        }
        Ok(table)
    }

    /// Vector dimensionality (0 for an empty table).
    #[must_use]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of tokens in the table.
    #[must_use]
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    /// True when the table holds no vectors.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// True when the token has a vector.
    #[must_use]
    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    /// The vector for a token, if present.
    #[must_use]
    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Cosine similarity between two in-table tokens. A token without a
    /// vector yields [`SeglensError::OutOfVocabulary`].
    pub fn cosine(&self, a: &str, b: &str) -> Result<f64> {
        let va = self.get(a).ok_or_else(|| SeglensError::OutOfVocabulary {
            token: a.to_string(),
        })?;
        let vb = self.get(b).ok_or_else(|| SeglensError::OutOfVocabulary {
            token: b.to_string(),
        })?;
        cosine_similarity(va, vb)
    }

    /// Mean cosine similarity between a token and every word of a resolved
    /// anchor set.
    pub fn anchor_similarity(&self, token: &str, anchors: &ResolvedAnchorSet) -> Result<f64> {
        if !self.contains(token) {
            return Err(SeglensError::OutOfVocabulary {
                token: token.to_string(),
            });
        }
        let mut sum = 0.0;
        for word in &anchors.words {
            sum += self.cosine(token, word)?;
        }
        Ok(sum / anchors.words.len() as f64)
    }

    /// `anchor_similarity(token, a) - anchor_similarity(token, b)`: positive
    /// values mean the token sits closer to set `a`.
    pub fn similarity_difference(
        &self,
        token: &str,
        a: &ResolvedAnchorSet,
        b: &ResolvedAnchorSet,
    ) -> Result<f64> {
        Ok(self.anchor_similarity(token, a)? - self.anchor_similarity(token, b)?)
    }
}

/// Cosine similarity of two equal-length vectors, accumulated in `f64`.
/// A zero-norm vector has no defined direction and is an error.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SeglensError::DataMismatch(format!(
            "cosine of vectors with different lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += f64::from(x) * f64::from(y);
        na += f64::from(x) * f64::from(x);
        nb += f64::from(y) * f64::from(y);
    }
    if na == 0.0 || nb == 0.0 {
        return Err(SeglensError::Undefined(
            "cosine similarity of a zero vector".to_string(),
        ));
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}
