//! Seeded synthetic corpora with one private vocabulary per category, used by
//! tests, benchmarks and demos.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDocument;
use crate::error::{Error, Result};
use crate::relevance_map::{MappingEntry, MappingTable};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCategory {
    pub label: String,
    pub hard_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub categories: Vec<SyntheticCategory>,
    pub docs_per_category: usize,
    pub words_per_doc: usize,
    pub vocab_per_category: usize,
    /// Words shared by every category.
    pub filler_vocab: usize,
    /// Probability that a token is drawn from the shared vocabulary.
    pub filler_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// Six categories spanning 0.1 to 0.95, 300 documents each.
    fn default() -> Self {
        let cats = [
            ("civic administration", 0.95),
            ("public policy", 0.8),
            ("economy", 0.6),
            ("science", 0.4),
            ("lifestyle", 0.25),
            ("entertainment", 0.1),
        ];
        Self {
            categories: cats
                .iter()
                .map(|(l, h)| SyntheticCategory {
                    label: l.to_string(),
                    hard_score: *h,
                })
                .collect(),
            docs_per_category: 300,
            words_per_doc: 16,
            vocab_per_category: 40,
            filler_vocab: 30,
            filler_rate: 0.3,
            seed: crate::beta_diffusion::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub spec: SyntheticSpec,
    pub vocabularies: Vec<Vec<String>>,
    pub filler: Vec<String>,
}

const LETTERS: &[u8] = b"bcdfghjklmnprstvwxz";
const VOWELS: &[u8] = b"aeiou";

/// Pronounceable pseudo-word; `tag` makes words of different owners disjoint.
fn pseudo_word<R: Rng>(rng: &mut R, tag: &str) -> String {
    let syllables = rng.random_range(2..=3);
    let mut w = String::from(tag);
    for _ in 0..syllables {
        w.push(LETTERS[rng.random_range(0..LETTERS.len())] as char);
        w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
    }
    w
}

/// Category tag: two letters unique per index (consonant-vowel-consonant
/// shape keeps the tags themselves from colliding with word bodies).
fn category_tag(c: usize) -> String {
    let a = LETTERS[c % LETTERS.len()] as char;
    let b = LETTERS[(c / LETTERS.len()) % LETTERS.len()] as char;
    format!("{a}y{b}")
}

impl SyntheticCorpus {
    pub fn new(spec: SyntheticSpec) -> Result<Self> {
        if spec.categories.is_empty() {
            return Err(Error::Config("synthetic corpus needs at least one category".into()));
        }
        if spec.categories.len() > LETTERS.len() * LETTERS.len() {
            return Err(Error::Config("too many synthetic categories".into()));
        }
        if spec.vocab_per_category == 0 || spec.words_per_doc == 0 {
            return Err(Error::Config("vocabulary and document length must be positive".into()));
        }
        if !(0.0..1.0).contains(&spec.filler_rate) || (spec.filler_rate > 0.0 && spec.filler_vocab == 0) {
            return Err(Error::Config("filler rate must be in [0, 1) with a non-empty filler vocabulary".into()));
        }
        let mut rng = rng::substream(spec.seed, Domain::Synthetic, u64::MAX);
        let mut draw = |tag: &str, n: usize| {
            let mut words: Vec<String> = Vec::with_capacity(n);
            while words.len() < n {
                let w = pseudo_word(&mut rng, tag);
                if !words.contains(&w) {
                    words.push(w);
                }
            }
            words
        };
        let vocabularies = (0..spec.categories.len())
            .map(|c| draw(&category_tag(c), spec.vocab_per_category))
            .collect();
        let filler = draw("", spec.filler_vocab);
        Ok(Self {
            spec,
            vocabularies,
            filler,
        })
    }

    /// Mapping table over the synthetic categories.
    pub fn mapping_table(&self) -> Result<MappingTable> {
        MappingTable::new(
            self.spec
                .categories
                .iter()
                .map(|c| MappingEntry {
                    label: c.label.clone(),
                    hard_score: c.hard_score,
                    sample_count_hint: Some(self.spec.docs_per_category as u64),
                })
                .collect(),
        )
    }

    /// A text of `words` tokens from category `category`'s vocabulary (mixed
    /// with shared filler), deterministic in `(seed, category, stream)`.
    pub fn text(&self, category: usize, words: usize, stream: u64) -> String {
        let mut rng = rng::substream(
            self.spec.seed ^ (category as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            Domain::Synthetic,
            stream,
        );
        let vocab = &self.vocabularies[category];
        let mut out: Vec<&str> = Vec::with_capacity(words);
        for _ in 0..words {
            let pool = if !self.filler.is_empty() && rng.random_bool(self.spec.filler_rate) {
                &self.filler
            } else {
                vocab
            };
            out.push(pool.choose(&mut rng).expect("non-empty vocabulary"));
        }
        out.join(" ")
    }

    /// All documents, category-major, with ids `syn-<category>-<n>`.
    pub fn documents(&self) -> Vec<LabeledDocument> {
        let per = self.spec.docs_per_category;
        let mut docs = Vec::with_capacity(per * self.spec.categories.len());
        for (c, cat) in self.spec.categories.iter().enumerate() {
            for i in 0..per {
                docs.push(LabeledDocument {
                    id: format!("syn-{c}-{i:05}"),
                    text: self.text(c, self.spec.words_per_doc, i as u64),
                    label: cat.label.clone(),
                });
            }
        }
        docs
    }
}

/// `n` placeholder documents cycling through the table's labels, for
/// exercising split and export arithmetic at scale.
pub fn cycling_corpus(table: &MappingTable, n: usize) -> Vec<LabeledDocument> {
    let labels: Vec<&str> = table.labels().collect();
    (0..n)
        .map(|i| LabeledDocument {
            id: format!("doc-{i:06}"),
            text: format!("placeholder document {i}"),
            label: labels[i % labels.len()].to_string(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn vocabularies_are_disjoint() {
        let c = SyntheticCorpus::new(SyntheticSpec::default()).unwrap();
        let mut seen = HashSet::new();
        for v in c.vocabularies.iter().chain(std::iter::once(&c.filler)) {
            for w in v {
                assert!(seen.insert(w.clone()), "{w} appears twice");
            }
        }
    }

    #[test]
    fn documents_are_deterministic_and_sized() {
        let a = SyntheticCorpus::new(SyntheticSpec::default()).unwrap().documents();
        let b = SyntheticCorpus::new(SyntheticSpec::default()).unwrap().documents();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1800);
        assert!(a.iter().all(|d| d.text.split(' ').count() == 16));
        let ids: HashSet<_> = a.iter().map(|d| &d.id).collect();
        assert_eq!(ids.len(), a.len());
    }

    #[test]
    fn tokens_come_from_own_vocabulary_or_filler() {
        let c = SyntheticCorpus::new(SyntheticSpec::default()).unwrap();
        let own: HashSet<&str> = c.vocabularies[2].iter().map(String::as_str).collect();
        let fill: HashSet<&str> = c.filler.iter().map(String::as_str).collect();
        let t = c.text(2, 200, 7);
        assert!(t.split(' ').all(|w| own.contains(w) || fill.contains(w)));
    }

    #[test]
    fn cycling_corpus_covers_labels() {
        let table = MappingTable::default_table();
        let docs = cycling_corpus(&table, 36);
        assert_eq!(docs.len(), 36);
        assert_eq!(docs[0].label, docs[18].label);
    }
}
