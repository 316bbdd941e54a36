//! Title keywords and related-term retrieval over a word-embedding table.
//!
//! Retrieval is two-stage: the `3k` nearest words by cosine similarity form
//! a candidate pool, which is then re-ranked by corpus frequency so common
//! concepts surface ahead of rare proper nouns.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vector width of the retrieval corpus.
pub const CORPUS_DIM: usize = 300;

/// Candidate pool size as a multiple of the requested count.
pub const CANDIDATE_POOL_FACTOR: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticsError {
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("word `{0}` is not in the embedding table")]
    UnknownWord(String),
    #[error("keyword provider unavailable: {0}")]
    ProviderUnavailable(String),
}

#[derive(Clone, Debug, Default)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
    frequencies: Vec<u64>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            ..Default::default()
        }
    }

    pub fn insert(&mut self, word: &str, vector: Vec<f64>, frequency: u64) -> Result<(), SemanticsError> {
        if vector.len() != self.dim {
            return Err(SemanticsError::DimensionMismatch {
                line: self.words.len() + 1,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if self.index.contains_key(word) {
            return Err(SemanticsError::MalformedLine {
                line: self.words.len() + 1,
                message: format!("duplicate word `{word}`"),
            });
        }
        self.index.insert(word.to_string(), self.words.len());
        self.norms.push(vector.iter().map(|v| v * v).sum::<f64>().sqrt());
        self.words.push(word.to_string());
        self.vectors.push(vector);
        self.frequencies.push(frequency);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    fn lookup(&self, word: &str) -> Option<usize> {
        self.index
            .get(word)
            .or_else(|| self.index.get(&word.to_lowercase()))
            .copied()
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.lookup(word).map(|i| self.vectors[i].as_slice())
    }

    pub fn frequency(&self, word: &str) -> Option<u64> {
        self.lookup(word).map(|i| self.frequencies[i])
    }

    pub fn max_frequency(&self) -> u64 {
        self.frequencies.iter().copied().max().unwrap_or(0)
    }

    /// `None` when either vector is zero.
    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let (i, j) = (self.lookup(a)?, self.lookup(b)?);
        self.cosine_at(i, j)
    }

    fn cosine_at(&self, i: usize, j: usize) -> Option<f64> {
        let (ni, nj) = (self.norms[i], self.norms[j]);
        if ni == 0.0 || nj == 0.0 {
            return None;
        }
        let dot: f64 = self.vectors[i].iter().zip(&self.vectors[j]).map(|(a, b)| a * b).sum();
        Some((dot / (ni * nj)).clamp(-1.0, 1.0))
    }
}

/// Loads a text embedding file whose vectors must have [`CORPUS_DIM`]
/// components.
pub fn load_embeddings(bytes: &[u8]) -> Result<EmbeddingTable, SemanticsError> {
    load_embeddings_with_dim(bytes, Some(CORPUS_DIM))
}

/// Loads a text embedding file: one `word c1 .. cD frequency` entry per line.
/// With `dim = None` the width is taken from the first entry. A leading
/// `count dim` header line, as written by word2vec tools, is skipped.
pub fn load_embeddings_with_dim(bytes: &[u8], dim: Option<usize>) -> Result<EmbeddingTable, SemanticsError> {
    let text = std::str::from_utf8(bytes).map_err(|e| SemanticsError::MalformedLine {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        message: "invalid UTF-8".into(),
    })?;
    let mut table: Option<EmbeddingTable> = dim.map(EmbeddingTable::new);
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if line_no == 1 && tokens.len() == 2 && tokens.iter().all(|t| t.parse::<u64>().is_ok()) {
            continue;
        }
        if tokens.len() < 3 {
            return Err(SemanticsError::MalformedLine {
                line: line_no,
                message: "expected a word, components and a frequency".into(),
            });
        }
        let found = tokens.len() - 2;
        let t = table.get_or_insert_with(|| EmbeddingTable::new(found));
        if found != t.dim {
            return Err(SemanticsError::DimensionMismatch {
                line: line_no,
                expected: t.dim,
                found,
            });
        }
        let vector = tokens[1..=found]
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| SemanticsError::MalformedLine {
                line: line_no,
                message: "non-numeric vector component".into(),
            })?;
        let frequency = tokens[found + 1].parse::<u64>().map_err(|_| SemanticsError::MalformedLine {
            line: line_no,
            message: format!("frequency `{}` is not a non-negative integer", tokens[found + 1]),
        })?;
        t.insert(tokens[0], vector, frequency).map_err(|e| match e {
            SemanticsError::MalformedLine { message, .. } => SemanticsError::MalformedLine { line: line_no, message },
            other => other,
        })?;
    }
    Ok(table.unwrap_or_default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub term: String,
    pub score: f64,
}

/// Distinct terms with non-increasing scores in `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KeywordSet {
    pub keywords: Vec<Keyword>,
}

impl KeywordSet {
    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.keywords.iter().map(|k| k.term.as_str())
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms().any(|t| t == term)
    }
}

/// Anything that scores candidate keywords for a piece of text.
pub trait KeywordProvider: Send + Sync {
    fn score_terms(&self, text: &str) -> Result<Vec<Keyword>, SemanticsError>;
}

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "against", "all", "an", "and", "any", "are", "as", "at", "be", "been", "before",
    "being", "below", "between", "both", "but", "by", "can", "did", "do", "does", "doing", "down", "during", "each",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his",
    "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most", "my", "no", "nor",
    "not", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "out", "over", "own", "per", "same",
    "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "very", "vs", "was", "we",
    "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "you", "your",
];

/// Built-in provider: content words of the text scored by corpus rarity,
/// `1 - ln(1 + f) / ln(1 + f_max)`. Without a corpus every content word
/// scores 1 and keeps its title order.
#[derive(Clone, Default)]
pub struct RarityKeywords {
    corpus: Option<Arc<EmbeddingTable>>,
}

impl RarityKeywords {
    pub fn new(corpus: Option<Arc<EmbeddingTable>>) -> Self {
        RarityKeywords { corpus }
    }

    fn rarity(&self, term: &str) -> f64 {
        let Some(corpus) = &self.corpus else { return 1.0 };
        let max = corpus.max_frequency();
        if max == 0 {
            return 1.0;
        }
        let f = corpus.frequency(term).unwrap_or(0);
        1.0 - (1.0 + f as f64).ln() / (1.0 + max as f64).ln()
    }
}

pub fn content_words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .map(str::to_lowercase)
        .filter(|w| w.chars().count() >= 2)
        .filter(|w| !w.chars().all(|c| c.is_ascii_digit()))
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

impl KeywordProvider for RarityKeywords {
    fn score_terms(&self, text: &str) -> Result<Vec<Keyword>, SemanticsError> {
        Ok(content_words(text)
            .into_iter()
            .map(|term| {
                let score = self.rarity(&term);
                Keyword { term, score }
            })
            .collect())
    }
}

/// Runs the provider and normalises its output: scores clamped to `[0, 1]`,
/// duplicate terms merged keeping the best score, sorted by descending score
/// with ties kept in provider order.
pub fn extract_keywords(title: &str, provider: &dyn KeywordProvider) -> Result<KeywordSet, SemanticsError> {
    if title.trim().is_empty() {
        return Ok(KeywordSet::default());
    }
    let mut merged: Vec<Keyword> = Vec::new();
    for kw in provider.score_terms(title)? {
        let term = kw.term.trim().to_string();
        if term.is_empty() {
            continue;
        }
        let score = if kw.score.is_nan() { 0.0 } else { kw.score.clamp(0.0, 1.0) };
        match merged.iter_mut().find(|k| k.term == term) {
            Some(existing) => existing.score = existing.score.max(score),
            None => merged.push(Keyword { term, score }),
        }
    }
    merged.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(KeywordSet { keywords: merged })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelatedTerm {
    pub term: String,
    pub similarity: f64,
    pub frequency: u64,
    /// 1-based.
    pub rank: usize,
}

/// Up to `k` related words: the `3k` most cosine-similar words (ties by
/// table order), re-ranked by descending frequency (ties by similarity, then
/// table order). The keyword itself and zero vectors are excluded.
pub fn related_terms(keyword: &str, table: &EmbeddingTable, k: usize) -> Result<Vec<RelatedTerm>, SemanticsError> {
    let q = table
        .lookup(keyword)
        .ok_or_else(|| SemanticsError::UnknownWord(keyword.to_string()))?;
    let mut scored: Vec<(usize, f64)> = (0..table.len())
        .filter(|&i| i != q)
        .filter_map(|i| table.cosine_at(q, i).map(|s| (i, s)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(CANDIDATE_POOL_FACTOR * k);
    scored.sort_by(|a, b| {
        table.frequencies[b.0]
            .cmp(&table.frequencies[a.0])
            .then(b.1.total_cmp(&a.1))
            .then(a.0.cmp(&b.0))
    });
    Ok(scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(r, (i, similarity))| RelatedTerm {
            term: table.words[i].clone(),
            similarity,
            frequency: table.frequencies[i],
            rank: r + 1,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(word: &str, dim: usize, seed: f64, freq: u64) -> String {
        let comps: Vec<String> = (0..dim).map(|i| format!("{:.4}", (seed + i as f64).sin())).collect();
        format!("{word} {} {freq}\n", comps.join(" "))
    }

    #[test]
    fn three_words_of_corpus_width_load() {
        let text = [line("a", 300, 0.1, 5), line("b", 300, 0.2, 3), line("c", 300, 0.3, 1)].concat();
        let t = load_embeddings(text.as_bytes()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.dim(), 300);
    }

    #[test]
    fn mixed_widths_are_rejected() {
        let text = [line("a", 300, 0.1, 5), line("b", 299, 0.2, 3)].concat();
        assert_eq!(
            load_embeddings(text.as_bytes()).unwrap_err(),
            SemanticsError::DimensionMismatch {
                line: 2,
                expected: 300,
                found: 299
            }
        );
    }

    #[test]
    fn narrow_file_fails_the_corpus_width_check() {
        let text = line("a", 4, 0.1, 5);
        assert!(matches!(
            load_embeddings(text.as_bytes()),
            Err(SemanticsError::DimensionMismatch { expected: 300, found: 4, .. })
        ));
        assert_eq!(load_embeddings_with_dim(text.as_bytes(), None).unwrap().dim(), 4);
    }

    #[test]
    fn empty_file_is_an_empty_table() {
        let t = load_embeddings(b"").unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn header_line_is_skipped() {
        let text = format!("2 3\n{}{}", line("a", 3, 0.0, 1), line("b", 3, 1.0, 1));
        assert_eq!(load_embeddings_with_dim(text.as_bytes(), Some(3)).unwrap().len(), 2);
    }

    #[test]
    fn bad_frequency_is_malformed() {
        let err = load_embeddings_with_dim(b"a 1 2 -4\n", Some(2)).unwrap_err();
        assert!(matches!(err, SemanticsError::MalformedLine { line: 1, .. }));
    }

    #[test]
    fn fallback_removes_stopwords() {
        let set = extract_keywords("The global change in desert area", &RarityKeywords::default()).unwrap();
        assert!(set.contains("desert") && set.contains("area"));
        assert!(!set.contains("the") && !set.contains("in"));
    }

    #[test]
    fn empty_title_gives_no_keywords() {
        assert!(extract_keywords("", &RarityKeywords::default()).unwrap().is_empty());
    }

    #[test]
    fn repeated_words_are_merged() {
        let set = extract_keywords("fire fire fire", &RarityKeywords::default()).unwrap();
        assert_eq!(set.terms().collect::<Vec<_>>(), ["fire"]);
    }

    #[test]
    fn rarity_orders_rare_words_first() {
        let mut t = EmbeddingTable::new(2);
        t.insert("desert", vec![1.0, 0.0], 10).unwrap();
        t.insert("area", vec![0.0, 1.0], 10_000).unwrap();
        let set = extract_keywords("area of desert", &RarityKeywords::new(Some(Arc::new(t)))).unwrap();
        assert_eq!(set.terms().collect::<Vec<_>>(), ["desert", "area"]);
        assert!(set.keywords.windows(2).all(|w| w[0].score >= w[1].score));
    }

    struct Wild;
    impl KeywordProvider for Wild {
        fn score_terms(&self, _: &str) -> Result<Vec<Keyword>, SemanticsError> {
            Ok(vec![
                Keyword { term: "sun".into(), score: 3.5 },
                Keyword { term: "moon".into(), score: -1.0 },
                Keyword { term: "sun".into(), score: 0.2 },
            ])
        }
    }

    #[test]
    fn provider_scores_are_clamped_and_deduplicated() {
        let set = extract_keywords("anything", &Wild).unwrap();
        assert_eq!(
            set.keywords,
            vec![
                Keyword { term: "sun".into(), score: 1.0 },
                Keyword { term: "moon".into(), score: 0.0 }
            ]
        );
    }

    #[test]
    fn duplicate_vector_has_unit_similarity() {
        let mut t = EmbeddingTable::new(3);
        t.insert("sun", vec![1.0, 2.0, 3.0], 5).unwrap();
        t.insert("sol", vec![1.0, 2.0, 3.0], 1).unwrap();
        t.insert("moon", vec![-1.0, 0.5, 0.0], 9).unwrap();
        let out = related_terms("sun", &t, 2).unwrap();
        let sol = out.iter().find(|r| r.term == "sol").expect("in candidates");
        assert!((sol.similarity - 1.0).abs() < 1e-12);
        assert!(out.iter().all(|r| r.term != "sun"));
    }

    #[test]
    fn unknown_keyword_errors() {
        let t = EmbeddingTable::new(2);
        assert_eq!(
            related_terms("nope", &t, 3).unwrap_err(),
            SemanticsError::UnknownWord("nope".into())
        );
    }

    #[test]
    fn zero_vectors_are_skipped() {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", vec![1.0, 0.0], 1).unwrap();
        t.insert("z", vec![0.0, 0.0], 100).unwrap();
        t.insert("b", vec![1.0, 1.0], 1).unwrap();
        let out = related_terms("a", &t, 5).unwrap();
        assert_eq!(out.iter().map(|r| r.term.as_str()).collect::<Vec<_>>(), ["b"]);
        assert_eq!(t.cosine("a", "z"), None);
    }
}
