//! Dataset ingestion, deterministic splits, and corpus statistics.

pub mod synthetic;

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text::{word_tokens, Document, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(Error::Config(format!("unknown dataset format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Loaded documents plus their deterministic split assignment.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub documents: Vec<Document>,
    pub splits: Vec<Split>,
}

impl Dataset {
    pub fn docs_in(&self, split: Split) -> Vec<&Document> {
        self.documents
            .iter()
            .zip(&self.splits)
            .filter(|(_, s)| **s == split)
            .map(|(d, _)| d)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

fn check_unique_ids(documents: &[Document]) -> Result<()> {
    let mut seen = HashSet::new();
    for doc in documents {
        if !seen.insert(doc.id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "duplicate document id {:?}",
                doc.id
            )));
        }
    }
    Ok(())
}

fn read_jsonl(path: &Path) -> Result<Vec<Document>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let mut documents = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidInput(format!(
                "{}:{}: invalid record: {e}",
                path.display(),
                line_no + 1
            ))
        })?;
        documents.push(doc);
    }
    Ok(documents)
}

fn read_csv(path: &Path) -> Result<Vec<Document>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    let mut documents = Vec::new();
    for (row_no, record) in reader.deserialize::<Document>().enumerate() {
        let doc = record.map_err(|e| {
            Error::InvalidInput(format!(
                "{}: row {}: invalid record: {e}",
                path.display(),
                row_no + 2
            ))
        })?;
        documents.push(doc);
    }
    Ok(documents)
}

/// Fraction in `[0, 1)` derived from a seeded hash of the document id.
/// Stable across runs and platforms, so splits never shift.
pub fn split_fraction(seed: u64, id: &str) -> f64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(id.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes) as f64 / (u64::MAX as f64 + 1.0)
}

fn assign_split(seed: u64, id: &str, train: f64, val: f64) -> Split {
    let f = split_fraction(seed, id);
    if f < train {
        Split::Train
    } else if f < train + val {
        Split::Val
    } else {
        Split::Test
    }
}

/// Load a dataset and assign a deterministic train/val/test split
/// (80/10/10) keyed by the seeded hash of each document id.
pub fn load_dataset(path: &Path, format: DatasetFormat, seed: u64) -> Result<Dataset> {
    let documents = match format {
        DatasetFormat::Jsonl => read_jsonl(path)?,
        DatasetFormat::Csv => read_csv(path)?,
    };
    if documents.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} contains no documents",
            path.display()
        )));
    }
    check_unique_ids(&documents)?;
    for doc in &documents {
        if doc.text.trim().is_empty() {
            return Err(Error::InvalidInput(format!(
                "document {:?} has empty text",
                doc.id
            )));
        }
    }
    let splits = documents
        .iter()
        .map(|d| assign_split(seed, &d.id, 0.8, 0.1))
        .collect();
    Ok(Dataset { documents, splits })
}

/// Build documents into a dataset with the same split rule (used for
/// in-memory synthetic corpora).
pub fn dataset_from_documents(documents: Vec<Document>, seed: u64) -> Result<Dataset> {
    check_unique_ids(&documents)?;
    let splits = documents
        .iter()
        .map(|d| assign_split(seed, &d.id, 0.8, 0.1))
        .collect();
    Ok(Dataset { documents, splits })
}

/// Token frequencies over the training split only; stop words keep their
/// vocabulary entries and frequencies but are excluded elsewhere by
/// policy.
pub fn corpus_statistics(train_docs: &[&Document]) -> Result<Vocabulary> {
    if train_docs.is_empty() {
        return Err(Error::InvalidInput(
            "corpus statistics need at least one document".into(),
        ));
    }
    let streams: Vec<Vec<String>> = train_docs.iter().map(|d| word_tokens(&d.text)).collect();
    Ok(Vocabulary::build(streams.iter().map(|s| s.as_slice())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn jsonl_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "data.jsonl",
            r#"{"id":"a","text":"hello world","label":0}
{"id":"b","text":"more text here","label":1}
{"id":"c","text":"third doc","label":0}
"#,
        );
        let ds = load_dataset(&path, DatasetFormat::Jsonl, 7).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.documents[1].label, 1);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "dup.jsonl",
            r#"{"id":"a","text":"x y","label":0}
{"id":"a","text":"z w","label":1}
"#,
        );
        assert!(matches!(
            load_dataset(&path, DatasetFormat::Jsonl, 7),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn schema_violation_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "bad.jsonl",
            "{\"id\":\"a\",\"text\":\"x\",\"label\":0}\n{\"id\":\"b\"}\n",
        );
        let err = load_dataset(&path, DatasetFormat::Jsonl, 7).unwrap_err();
        assert!(err.to_string().contains(":2:"), "got: {err}");
    }

    #[test]
    fn csv_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "data.csv",
            "id,text,label\na,hello world,0\nb,second row,1\n",
        );
        let ds = load_dataset(&path, DatasetFormat::Csv, 7).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.documents[1].text, "second row");
    }

    #[test]
    fn splits_deterministic_disjoint_and_covering() {
        let docs: Vec<Document> = (0..500)
            .map(|i| Document {
                id: format!("doc{i}"),
                text: "word".into(),
                label: 0,
            })
            .collect();
        let a = dataset_from_documents(docs.clone(), 42).unwrap();
        let b = dataset_from_documents(docs, 42).unwrap();
        assert_eq!(a.splits, b.splits);
        let counts = [Split::Train, Split::Val, Split::Test]
            .iter()
            .map(|s| a.docs_in(*s).len())
            .collect::<Vec<_>>();
        assert_eq!(counts.iter().sum::<usize>(), 500);
        assert!(counts[0] > 300, "train split too small: {counts:?}");
        assert!(counts[1] > 10 && counts[2] > 10, "splits: {counts:?}");
    }

    #[test]
    fn statistics_count_frequencies_order_independent() {
        let d1 = Document {
            id: "a".into(),
            text: "a a b".into(),
            label: 0,
        };
        let d2 = Document {
            id: "b".into(),
            text: "b the".into(),
            label: 0,
        };
        let v1 = corpus_statistics(&[&d1, &d2]).unwrap();
        let v2 = corpus_statistics(&[&d2, &d1]).unwrap();
        assert_eq!(v1.frequency("a"), 2);
        assert_eq!(v1.frequency("b"), 2);
        assert_eq!(v2.frequency("a"), 2);
        // Stop words stay in the vocabulary.
        assert_eq!(v1.frequency("the"), 1);
        assert!(v1.is_stop_word("the"));
    }
}
