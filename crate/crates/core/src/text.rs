//! Documents, word-level tokenization, and the training vocabulary.
//!
//! Tokenization is deliberately simple: lowercased maximal runs of
//! alphanumeric characters. Attention maps, LLM highlight targets, and
//! explanation exports all index the same token positions, so one
//! word-level segmentation is shared by every consumer.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token id reserved for padding positions.
pub const PAD_ID: usize = 0;
/// Token id reserved for out-of-vocabulary words.
pub const UNK_ID: usize = 1;

/// Default English stop-word list, applied when ranking concept words and
/// when choosing perturbation candidates. Stop words stay in the
/// vocabulary; they are only excluded from those two policies.
pub const DEFAULT_STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "cannot", "could", "did", "do", "does", "doing", "down", "during", "each",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here",
    "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it",
    "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now",
    "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out",
    "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the",
    "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you",
    "your", "yours", "yourself", "yourselves",
];

/// A labeled input document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: usize,
}

/// Word-level tokenization of one document: parallel id and surface
/// sequences of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub surfaces: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Padding mask: `true` for real tokens, `false` for pad positions.
    pub fn mask(&self) -> Vec<bool> {
        self.ids.iter().map(|&id| id != PAD_ID).collect()
    }

    /// Extend to `target_len` with pad tokens. No-op when already longer.
    pub fn padded(mut self, target_len: usize) -> Self {
        while self.ids.len() < target_len {
            self.ids.push(PAD_ID);
            self.surfaces.push(String::new());
        }
        self
    }
}

/// Token inventory built from the training split: a bijective
/// token<->index map plus training frequencies and the stop-word set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    frequencies: Vec<u64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    stop_words: Vec<String>,
}

impl Vocabulary {
    /// Build from tokenized training documents. Indices 0 and 1 are
    /// reserved for pad/unknown; the rest are assigned by descending
    /// frequency, ties broken lexicographically.
    pub fn build<'a, I>(token_streams: I) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for stream in token_streams {
            for tok in stream {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
        let mut frequencies = vec![0u64, 0u64];
        for (tok, freq) in ranked {
            tokens.push(tok.to_string());
            frequencies.push(freq);
        }
        let mut vocab = Vocabulary {
            tokens,
            frequencies,
            index: HashMap::new(),
            stop_words: DEFAULT_STOP_WORDS.iter().map(|s| s.to_string()).collect(),
        };
        vocab.rebuild_index();
        vocab
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index for a token, falling back to the unknown id.
    pub fn id_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token_of(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(|s| s.as_str())
    }

    /// Training-set frequency of a token (0 for unseen words).
    pub fn frequency(&self, token: &str) -> u64 {
        self.index
            .get(token)
            .map(|&i| self.frequencies[i])
            .unwrap_or(0)
    }

    pub fn is_stop_word(&self, token: &str) -> bool {
        self.stop_words.iter().any(|s| s == token)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut vocab: Vocabulary = serde_json::from_reader(std::io::BufReader::new(file))?;
        if vocab.tokens.len() != vocab.frequencies.len() {
            return Err(Error::InvalidInput(format!(
                "vocabulary file {}: token/frequency length mismatch",
                path.display()
            )));
        }
        vocab.rebuild_index();
        Ok(vocab)
    }
}

/// Split raw text into lowercased word tokens (maximal alphanumeric runs;
/// whitespace and punctuation delimit).
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_lowercase())
        .collect()
}

/// Tokenize a document against a vocabulary, truncating to `max_len`.
/// Surface tokens are kept for explanation export and LLM payloads.
pub fn tokenize(doc: &Document, vocab: &Vocabulary, max_len: usize) -> Result<TokenSequence> {
    if max_len == 0 {
        return Err(Error::Config("max_len must be at least 1".into()));
    }
    if doc.text.trim().is_empty() {
        return Err(Error::InvalidInput(format!(
            "document {} has empty text",
            doc.id
        )));
    }
    let mut surfaces = word_tokens(&doc.text);
    if surfaces.is_empty() {
        return Err(Error::InvalidInput(format!(
            "document {} has no word tokens",
            doc.id
        )));
    }
    surfaces.truncate(max_len);
    let ids = surfaces.iter().map(|t| vocab.id_of(t)).collect();
    Ok(TokenSequence { ids, surfaces })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab_for(words: &[&str]) -> Vocabulary {
        let stream: Vec<String> = words.iter().map(|s| s.to_string()).collect();
        Vocabulary::build([stream.as_slice()])
    }

    fn doc(text: &str) -> Document {
        Document {
            id: "d0".into(),
            text: text.into(),
            label: 0,
        }
    }

    #[test]
    fn tokenize_splits_and_preserves_surfaces() {
        let vocab = vocab_for(&["a", "b"]);
        let seq = tokenize(&doc("a b a"), &vocab, 8).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.surfaces, vec!["a", "b", "a"]);
        assert_eq!(seq.ids[0], seq.ids[2]);
    }

    #[test]
    fn tokenize_truncates() {
        let vocab = vocab_for(&["a", "b", "c", "d"]);
        let seq = tokenize(&doc("a b c d"), &vocab, 2).unwrap();
        assert_eq!(seq.surfaces, vec!["a", "b"]);
    }

    #[test]
    fn oov_maps_to_unknown_with_surface_kept() {
        let vocab = vocab_for(&["a"]);
        let seq = tokenize(&doc("a zzz"), &vocab, 8).unwrap();
        assert_eq!(seq.ids[1], UNK_ID);
        assert_eq!(seq.surfaces[1], "zzz");
    }

    #[test]
    fn empty_text_rejected() {
        let vocab = vocab_for(&["a"]);
        assert!(matches!(
            tokenize(&doc("   "), &vocab, 8),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            tokenize(&doc("!!!"), &vocab, 8),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn punctuation_delimits_and_lowercases() {
        let vocab = vocab_for(&["red", "cat"]);
        let seq = tokenize(&doc("Red, CAT!"), &vocab, 8).unwrap();
        assert_eq!(seq.surfaces, vec!["red", "cat"]);
        assert_ne!(seq.ids[0], UNK_ID);
    }

    #[test]
    fn padding_mask_tracks_pad_positions() {
        let vocab = vocab_for(&["a"]);
        let seq = tokenize(&doc("a a"), &vocab, 8).unwrap().padded(5);
        assert_eq!(seq.len(), 5);
        assert_eq!(seq.mask(), vec![true, true, false, false, false]);
    }

    #[test]
    fn vocab_roundtrip_and_frequency() {
        let stream: Vec<String> = word_tokens("the cat sat the cat the");
        let vocab = Vocabulary::build([stream.as_slice()]);
        assert_eq!(vocab.frequency("the"), 3);
        assert_eq!(vocab.frequency("cat"), 2);
        assert_eq!(vocab.frequency("missing"), 0);
        assert!(vocab.is_stop_word("the"));
        assert!(!vocab.is_stop_word("cat"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.json");
        vocab.save(&path).unwrap();
        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(loaded.id_of("cat"), vocab.id_of("cat"));
        assert_eq!(loaded.frequency("the"), 3);
    }
}
