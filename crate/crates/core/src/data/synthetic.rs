//! Synthetic planted-concept corpora.
//!
//! Each document mixes words drawn from per-concept lexicons (chosen by a
//! class-conditional mixture) with filler words. The token positions each
//! concept produced are recorded as gold spans, giving ground truth for
//! concept-recovery checks. Generation is bit-deterministic under the
//! spec seed.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::Document;

/// One planted concept: a name plus its word list.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConceptLexicon {
    pub name: String,
    pub words: Vec<String>,
}

/// Full description of a synthetic corpus.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SyntheticSpec {
    pub lexicons: Vec<ConceptLexicon>,
    pub classes: usize,
    /// Per class, a distribution over planted concepts (rows sum to 1).
    pub mixtures: Vec<Vec<f64>>,
    pub min_len: usize,
    pub max_len: usize,
    pub corpus_size: usize,
    pub filler: Vec<String>,
    /// Probability that a token position is filler rather than a concept
    /// draw.
    pub filler_rate: f64,
    pub seed: u64,
}

/// A generated document plus the token positions of each planted concept.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlantedDocument {
    #[serde(flatten)]
    pub doc: Document,
    /// Concept name -> token indices drawn from that concept's lexicon.
    pub gold_spans: BTreeMap<String, Vec<usize>>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lexicons.is_empty() {
            return Err(Error::Config("synthetic spec needs at least one lexicon".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config("synthetic spec needs at least two classes".into()));
        }
        if self.mixtures.len() != self.classes {
            return Err(Error::Config(format!(
                "expected {} mixture rows, found {}",
                self.classes,
                self.mixtures.len()
            )));
        }
        for (c, row) in self.mixtures.iter().enumerate() {
            if row.len() != self.lexicons.len() {
                return Err(Error::Config(format!(
                    "mixture row {c} has {} entries for {} concepts",
                    row.len(),
                    self.lexicons.len()
                )));
            }
            if row.iter().any(|&w| w < 0.0) {
                return Err(Error::Config(format!("mixture row {c} has negative weight")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "mixture row {c} sums to {sum}, expected 1"
                )));
            }
        }
        if self.min_len == 0 || self.max_len < self.min_len {
            return Err(Error::Config("invalid document length range".into()));
        }
        if !(0.0..1.0).contains(&self.filler_rate) {
            return Err(Error::Config("filler_rate must be in [0, 1)".into()));
        }
        if self.filler_rate > 0.0 && self.filler.is_empty() {
            return Err(Error::Config("filler_rate > 0 requires filler words".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for lex in &self.lexicons {
            if lex.words.is_empty() {
                return Err(Error::Config(format!("lexicon {:?} is empty", lex.name)));
            }
            for w in &lex.words {
                if !seen.insert(w.as_str()) {
                    return Err(Error::Config(format!(
                        "word {w:?} appears in more than one lexicon"
                    )));
                }
            }
        }
        for w in &self.filler {
            if seen.contains(w.as_str()) {
                return Err(Error::Config(format!(
                    "filler word {w:?} collides with a lexicon"
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
        let spec: SyntheticSpec = serde_json::from_reader(std::io::BufReader::new(file))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    /// Concept name -> word set, the shape the mock oracle consumes.
    pub fn lexicon_map(&self) -> BTreeMap<String, Vec<String>> {
        self.lexicons
            .iter()
            .map(|l| (l.name.clone(), l.words.clone()))
            .collect()
    }

    /// The bundled desk-scale spec: four 30-word lexicons, two classes
    /// with opposing concept mixtures, 5000 documents of 20-40 words.
    pub fn bundled(seed: u64) -> Self {
        let lexicons = vec![
            ConceptLexicon {
                name: "colors".into(),
                words: to_strings(COLOR_WORDS),
            },
            ConceptLexicon {
                name: "animals".into(),
                words: to_strings(ANIMAL_WORDS),
            },
            ConceptLexicon {
                name: "foods".into(),
                words: to_strings(FOOD_WORDS),
            },
            ConceptLexicon {
                name: "tools".into(),
                words: to_strings(TOOL_WORDS),
            },
        ];
        SyntheticSpec {
            lexicons,
            classes: 2,
            // Heterogeneous log-ratios so every concept carries distinct
            // class evidence.
            mixtures: vec![vec![0.4, 0.3, 0.2, 0.1], vec![0.1, 0.2, 0.3, 0.4]],
            min_len: 20,
            max_len: 40,
            corpus_size: 5000,
            filler: to_strings(FILLER_WORDS),
            filler_rate: 0.4,
            seed,
        }
    }
}

fn to_strings(words: &[&str]) -> Vec<String> {
    words.iter().map(|s| s.to_string()).collect()
}

fn sample_categorical<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Generate the corpus described by `spec`. Identical spec (including
/// seed) always yields an identical corpus.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<PlantedDocument>> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let width = spec.corpus_size.max(1).ilog10() as usize + 1;
    let mut corpus = Vec::with_capacity(spec.corpus_size);
    for i in 0..spec.corpus_size {
        let label = rng.random_range(0..spec.classes);
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let mut words = Vec::with_capacity(len);
        let mut gold_spans: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for pos in 0..len {
            if !spec.filler.is_empty() && rng.random::<f64>() < spec.filler_rate {
                let w = &spec.filler[rng.random_range(0..spec.filler.len())];
                words.push(w.clone());
            } else {
                let g = sample_categorical(&spec.mixtures[label], &mut rng);
                let lex = &spec.lexicons[g];
                let w = &lex.words[rng.random_range(0..lex.words.len())];
                words.push(w.clone());
                gold_spans.entry(lex.name.clone()).or_default().push(pos);
            }
        }
        corpus.push(PlantedDocument {
            doc: Document {
                id: format!("syn-{i:0width$}"),
                text: words.join(" "),
                label,
            },
            gold_spans,
        });
    }
    Ok(corpus)
}

/// Write the corpus as ingestion-schema JSONL plus a sidecar gold-span
/// JSONL.
pub fn write_corpus(
    corpus: &[PlantedDocument],
    corpus_path: &Path,
    gold_path: &Path,
) -> Result<()> {
    use std::io::Write;
    let mut corpus_file = std::io::BufWriter::new(std::fs::File::create(corpus_path)?);
    let mut gold_file = std::io::BufWriter::new(std::fs::File::create(gold_path)?);
    for planted in corpus {
        serde_json::to_writer(&mut corpus_file, &planted.doc)?;
        corpus_file.write_all(b"\n")?;
        let gold = serde_json::json!({
            "id": planted.doc.id,
            "gold_spans": planted.gold_spans,
        });
        serde_json::to_writer(&mut gold_file, &gold)?;
        gold_file.write_all(b"\n")?;
    }
    Ok(())
}

const COLOR_WORDS: &[&str] = &[
    "red", "blue", "green", "yellow", "purple", "orange", "pink", "brown", "black", "white",
    "gray", "violet", "indigo", "maroon", "beige", "teal", "cyan", "magenta", "crimson",
    "scarlet", "turquoise", "lavender", "olive", "navy", "gold", "silver", "bronze", "ivory",
    "charcoal", "amber",
];

const ANIMAL_WORDS: &[&str] = &[
    "cat", "dog", "horse", "rabbit", "fox", "bear", "wolf", "deer", "otter", "badger", "eagle",
    "hawk", "owl", "sparrow", "robin", "salmon", "trout", "shark", "whale", "dolphin", "tiger",
    "lion", "leopard", "zebra", "giraffe", "camel", "donkey", "goat", "sheep", "mouse",
];

const FOOD_WORDS: &[&str] = &[
    "bread", "cheese", "butter", "apple", "banana", "grape", "mango", "peach", "plum", "cherry",
    "rice", "pasta", "noodle", "soup", "stew", "salad", "bacon", "sausage", "pepper", "garlic",
    "onion", "carrot", "potato", "tomato", "lettuce", "spinach", "honey", "sugar", "pancake",
    "waffle",
];

const TOOL_WORDS: &[&str] = &[
    "hammer", "wrench", "pliers", "screwdriver", "drill", "saw", "chisel", "rasp", "clamp",
    "vise", "gauge", "ruler", "tape", "ladder", "shovel", "rake", "hoe", "trowel", "axe",
    "mallet", "sander", "router", "lathe", "anvil", "crowbar", "socket", "bolt", "rivet",
    "nail", "screw",
];

const FILLER_WORDS: &[&str] = &[
    "table", "chair", "window", "door", "street", "house", "garden", "river", "mountain",
    "valley", "ocean", "island", "forest", "meadow", "stone", "rock", "sand", "cloud", "rain",
    "snow", "wind", "storm", "thunder", "morning", "evening", "night", "summer", "winter",
    "spring", "autumn", "city", "village", "town", "bridge", "tower", "castle", "market",
    "school", "library", "office", "factory", "station", "airport", "harbor", "road", "path",
    "trail", "journey", "travel", "voyage", "letter", "paper", "book", "page", "story", "poem",
    "song", "music", "dance", "painting", "picture", "camera", "phone", "computer", "screen",
    "keyboard", "engine", "wheel", "machine", "device", "signal", "message", "answer",
    "question", "idea", "thought", "memory", "dream", "plan", "project", "task", "work", "job",
    "game", "sport", "team", "player", "coach", "score", "goal", "prize", "reward", "money",
    "price", "cost", "value", "trade", "business", "company", "customer", "service", "product",
    "quality", "design", "model", "pattern", "shape", "size", "weight", "height", "length",
    "distance", "speed", "time", "hour", "minute", "moment", "week", "month", "year", "century",
    "history", "future", "present", "change", "growth", "progress", "result", "effect", "cause",
    "reason", "purpose", "meaning", "truth", "fact", "detail", "example", "case", "point",
    "line", "circle", "square", "corner", "edge", "surface", "layer", "center", "middle",
    "top", "bottom", "side", "front", "back", "north", "south", "east", "west", "left",
    "right", "friend", "family", "parent", "child", "brother", "sister", "neighbor",
    "stranger", "crowd", "group", "people", "person", "voice", "sound", "noise", "silence",
    "light", "shadow", "darkness", "fire", "smoke", "water", "ice", "steam", "metal", "wood",
    "glass", "plastic", "cotton", "leather", "fabric", "thread", "needle", "basket", "bottle",
    "bucket", "blanket", "pillow", "mirror", "candle", "lantern", "clock", "drawer", "shelf",
    "carpet", "curtain", "fence", "gate", "roof", "floor", "wall", "ceiling", "stairs", "porch",
];

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn small_spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            corpus_size: 400,
            ..SyntheticSpec::bundled(seed)
        }
    }

    #[test]
    fn bundled_spec_is_valid_and_disjoint() {
        let spec = SyntheticSpec::bundled(1);
        spec.validate().unwrap();
        assert_eq!(spec.lexicons.len(), 4);
        assert!(spec.lexicons.iter().all(|l| l.words.len() == 30));
        assert_eq!(spec.corpus_size, 5000);
        // Lexicon/filler words must not be stop words either, or
        // perturbation policy would skip them.
        for lex in &spec.lexicons {
            for w in &lex.words {
                assert!(
                    !crate::text::DEFAULT_STOP_WORDS.contains(&w.as_str()),
                    "{w} is a stop word"
                );
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_synthetic(&small_spec(9)).unwrap();
        let b = generate_synthetic(&small_spec(9)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&small_spec(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_corpus_allowed() {
        let spec = SyntheticSpec {
            corpus_size: 0,
            ..SyntheticSpec::bundled(3)
        };
        assert!(generate_synthetic(&spec).unwrap().is_empty());
    }

    #[test]
    fn gold_spans_reference_valid_non_filler_positions() {
        let corpus = generate_synthetic(&small_spec(5)).unwrap();
        let spec = small_spec(5);
        let lexicon_words: HashMap<&str, &str> = spec
            .lexicons
            .iter()
            .flat_map(|l| l.words.iter().map(move |w| (w.as_str(), l.name.as_str())))
            .collect();
        for planted in &corpus {
            let words: Vec<&str> = planted.doc.text.split(' ').collect();
            let mut covered = vec![false; words.len()];
            for (name, span) in &planted.gold_spans {
                for &pos in span {
                    assert!(pos < words.len());
                    assert_eq!(lexicon_words.get(words[pos]), Some(&name.as_str()));
                    covered[pos] = true;
                }
            }
            // Uncovered positions must be filler words.
            for (pos, word) in words.iter().enumerate() {
                if !covered[pos] {
                    assert!(!lexicon_words.contains_key(word));
                }
            }
        }
    }

    #[test]
    fn concept_draws_match_mixture() {
        let mut spec = small_spec(17);
        spec.corpus_size = 2000;
        let corpus = generate_synthetic(&spec).unwrap();
        // Count concept tokens by class.
        let mut counts = vec![vec![0usize; spec.lexicons.len()]; spec.classes];
        let index: HashMap<&str, usize> = spec
            .lexicons
            .iter()
            .enumerate()
            .map(|(i, l)| (l.name.as_str(), i))
            .collect();
        for planted in &corpus {
            for (name, span) in &planted.gold_spans {
                counts[planted.doc.label][index[name.as_str()]] += span.len();
            }
        }
        for (c, row) in spec.mixtures.iter().enumerate() {
            let total: usize = counts[c].iter().sum();
            for (g, &expected) in row.iter().enumerate() {
                let observed = counts[c][g] as f64 / total as f64;
                // Binomial std at n >= 20k draws is < 0.4%; 4 sigma bound.
                let sigma = (expected * (1.0 - expected) / total as f64).sqrt();
                assert!(
                    (observed - expected).abs() < 4.0 * sigma + 1e-3,
                    "class {c} concept {g}: observed {observed}, expected {expected}"
                );
            }
        }
    }

    #[test]
    fn counts_classifier_oracle_separates_classes() {
        // Mixture making concepts 1-2 predictive of class 0; a naive
        // count-based classifier must reach >= 0.95 held-out accuracy.
        let mut spec = small_spec(23);
        spec.corpus_size = 2000;
        spec.mixtures = vec![vec![0.4, 0.4, 0.1, 0.1], vec![0.1, 0.1, 0.4, 0.4]];
        let corpus = generate_synthetic(&spec).unwrap();
        let split = 1600;

        // Multinomial naive Bayes with add-one smoothing over words.
        let mut class_counts = vec![0usize; spec.classes];
        let mut word_counts: Vec<HashMap<&str, usize>> = vec![HashMap::new(); spec.classes];
        let mut vocab: std::collections::HashSet<&str> = std::collections::HashSet::new();
        for planted in &corpus[..split] {
            class_counts[planted.doc.label] += 1;
            for w in planted.doc.text.split(' ') {
                *word_counts[planted.doc.label].entry(w).or_insert(0) += 1;
                vocab.insert(w);
            }
        }
        let totals: Vec<usize> = word_counts.iter().map(|m| m.values().sum()).collect();
        let mut correct = 0usize;
        for planted in &corpus[split..] {
            let mut best = (f64::NEG_INFINITY, 0usize);
            for c in 0..spec.classes {
                let mut score = (class_counts[c] as f64 / split as f64).ln();
                for w in planted.doc.text.split(' ') {
                    let count = word_counts[c].get(w).copied().unwrap_or(0);
                    let p = (count as f64 + 1.0) / (totals[c] as f64 + vocab.len() as f64);
                    score += p.ln();
                }
                if score > best.0 {
                    best = (score, c);
                }
            }
            if best.1 == planted.doc.label {
                correct += 1;
            }
        }
        let accuracy = correct as f64 / (corpus.len() - split) as f64;
        assert!(accuracy >= 0.95, "oracle accuracy {accuracy}");
    }
}
