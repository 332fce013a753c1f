//! Corpus ingestion, hard-score stratification, train/eval/test splitting and
//! export in the line-delimited record format.
//!
//! Records are one JSON object per line. On input `id` is optional and
//! `text`/`label` are required; exports always carry exactly `id`, `text`,
//! `label` and `score` (six decimal digits).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing;
use crate::relevance_map::{adjust_boundaries, map_label, BoundaryPolicy, MappingTable};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDocument {
    pub id: String,
    pub text: String,
    pub label: String,
}

/// A document with its hard score and boundary-adjusted score, before diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedDocument {
    pub doc: LabeledDocument,
    pub hard_score: f64,
    pub adjusted_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocument {
    pub id: String,
    pub text: String,
    pub label: String,
    pub hard_score: f64,
    pub adjusted_score: f64,
    pub soft_score: f64,
}

/// One exported training record, as read back from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub id: String,
    pub text: String,
    pub label: String,
    pub score: f64,
}

impl From<ScoredDocument> for ScoredRecord {
    fn from(d: ScoredDocument) -> Self {
        Self {
            id: d.id,
            text: d.text,
            label: d.label,
            score: d.soft_score,
        }
    }
}

pub trait HardScored {
    fn hard_score(&self) -> f64;
}

impl HardScored for MappedDocument {
    fn hard_score(&self) -> f64 {
        self.hard_score
    }
}

impl HardScored for ScoredDocument {
    fn hard_score(&self) -> f64 {
        self.hard_score
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub docs: Vec<LabeledDocument>,
    /// Records skipped because their text was empty after trimming.
    pub skipped_empty: usize,
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    text: Option<String>,
    label: Option<String>,
}

/// Parses a corpus from any reader. Record numbers are 1-based line numbers.
pub fn ingest_reader<R: BufRead>(reader: R) -> Result<Ingested> {
    let mut docs = Vec::new();
    let mut ids = HashSet::new();
    let mut skipped_empty = 0;
    for (i, line) in reader.lines().enumerate() {
        let record = i + 1;
        let line = line.map_err(|e| Error::Record {
            record,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Record {
            record,
            message: format!("malformed record: {e}"),
        })?;
        let text = raw.text.ok_or_else(|| Error::Record {
            record,
            message: "missing \"text\" field".into(),
        })?;
        let label = raw.label.ok_or_else(|| Error::Record {
            record,
            message: "missing \"label\" field".into(),
        })?;
        let id = match raw.id {
            None | Some(serde_json::Value::Null) => record.to_string(),
            Some(serde_json::Value::String(s)) => s,
            Some(serde_json::Value::Number(n)) => n.to_string(),
            Some(other) => {
                return Err(Error::Record {
                    record,
                    message: format!("\"id\" must be a string or number, got {other}"),
                })
            }
        };
        if text.trim().is_empty() {
            skipped_empty += 1;
            continue;
        }
        if !ids.insert(id.clone()) {
            return Err(Error::Record {
                record,
                message: format!("duplicate id {id:?}"),
            });
        }
        docs.push(LabeledDocument { id, text, label });
    }
    if skipped_empty > 0 {
        log::warn!("skipped {skipped_empty} record(s) with empty text");
    }
    Ok(Ingested {
        docs,
        skipped_empty,
    })
}

pub fn ingest(path: impl AsRef<Path>) -> Result<Ingested> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(f))
}

/// Applies the label mapping and boundary policy to every document.
/// Unknown labels abort with the offending record number.
pub fn map_corpus(
    docs: Vec<LabeledDocument>,
    table: &MappingTable,
    policy: &BoundaryPolicy,
) -> Result<Vec<MappedDocument>> {
    docs.into_iter()
        .enumerate()
        .map(|(i, doc)| {
            let hard = map_label(&doc.label, table).map_err(|e| Error::Record {
                record: i + 1,
                message: format!("document {:?}: {e}", doc.id),
            })?;
            let adjusted = adjust_boundaries(hard, policy)?;
            Ok(MappedDocument {
                doc,
                hard_score: hard,
                adjusted_score: adjusted,
            })
        })
        .collect()
}

/// Number of half-open buckets of `width` covering `[0, 1]`.
pub fn bucket_count(width: f64) -> Result<usize> {
    if !(width > 0.0 && width <= 1.0) {
        return Err(Error::Config(format!("interval width {width} must be in (0, 1]")));
    }
    let n = (1.0 / width).round();
    if (n * width - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "interval width {width} does not divide 1.0 evenly"
        )));
    }
    Ok(n as usize)
}

/// Bucket `[k·w, (k+1)·w)` holding `h`; the top bucket is closed at 1.0.
pub fn bucket_of(h: f64, width: f64, buckets: usize) -> usize {
    // The epsilon keeps 0.7 / 0.1 = 6.999… in bucket 7.
    let k = (h / width + 1e-9).floor();
    (k.max(0.0) as usize).min(buckets - 1)
}

/// Per-bucket sample caps; `None` lets a bucket through intact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketCaps(pub Vec<Option<usize>>);

impl BucketCaps {
    pub fn uncapped(buckets: usize) -> Self {
        BucketCaps(vec![None; buckets])
    }

    /// Sums the table's count hints per bucket. A bucket with any label that
    /// lacks a hint stays uncapped.
    pub fn from_hints(table: &MappingTable, width: f64) -> Result<Self> {
        let n = bucket_count(width)?;
        let mut caps: Vec<Option<usize>> = vec![Some(0); n];
        let mut touched = vec![false; n];
        for e in table.entries() {
            let b = bucket_of(e.hard_score, width, n);
            touched[b] = true;
            caps[b] = match (caps[b], e.sample_count_hint) {
                (Some(acc), Some(c)) => Some(acc + c as usize),
                _ => None,
            };
        }
        for (cap, t) in caps.iter_mut().zip(touched) {
            if !t {
                *cap = None;
            }
        }
        Ok(BucketCaps(caps))
    }
}

/// Interval-stratified sampling on hard scores: each bucket is thinned to its
/// cap by uniform sampling without replacement. Survivors keep input order.
pub fn stratify<T: HardScored + Clone>(
    docs: &[T],
    width: f64,
    caps: &BucketCaps,
    seed: u64,
) -> Result<Vec<T>> {
    let n = bucket_count(width)?;
    if caps.0.len() != n {
        return Err(Error::Config(format!(
            "{} caps given for {n} buckets",
            caps.0.len()
        )));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, d) in docs.iter().enumerate() {
        members[bucket_of(d.hard_score(), width, n)].push(i);
    }
    let mut keep = vec![false; docs.len()];
    for (b, idx) in members.iter().enumerate() {
        match caps.0[b] {
            Some(cap) if cap < idx.len() => {
                let mut rng = rng::substream(seed, Domain::Stratify, b as u64);
                for j in rand::seq::index::sample(&mut rng, idx.len(), cap) {
                    keep[idx[j]] = true;
                }
            }
            _ => idx.iter().for_each(|&i| keep[i] = true),
        }
    }
    Ok(docs
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(d, _)| d.clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_weight: f64,
    pub eval_weight: f64,
    pub test_weight: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_weight: 8.5,
            eval_weight: 1.0,
            test_weight: 0.5,
            seed: crate::beta_diffusion::DEFAULT_SEED,
        }
    }
}

impl SplitSpec {
    fn weights(&self) -> [f64; 3] {
        [self.train_weight, self.eval_weight, self.test_weight]
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights().iter().all(|w| *w > 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("split weights must be positive".into()))
        }
    }

    /// Largest-remainder sizes: floors of `n·wᵢ/Σw`, leftovers handed out by
    /// descending remainder with ties resolved train, eval, test.
    pub fn sizes(&self, n: usize) -> Result<[usize; 3]> {
        self.validate()?;
        let w = self.weights();
        let total: f64 = w.iter().sum();
        let mut sizes = [0usize; 3];
        let mut rem = [0f64; 3];
        for i in 0..3 {
            let exact = n as f64 * w[i] / total;
            let fl = (exact + 1e-9).floor();
            sizes[i] = fl as usize;
            rem[i] = (exact - fl).max(0.0);
        }
        let assigned: usize = sizes.iter().sum();
        let mut order = [0usize, 1, 2];
        // stable sort keeps train < eval < test among equal remainders
        order.sort_by(|a, b| rem[*b].total_cmp(&rem[*a]));
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            sizes[i] += 1;
        }
        Ok(sizes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partitions {
    pub train: Vec<ScoredDocument>,
    pub eval: Vec<ScoredDocument>,
    pub test: Vec<ScoredDocument>,
}

impl Partitions {
    pub fn counts(&self) -> [usize; 3] {
        [self.train.len(), self.eval.len(), self.test.len()]
    }
}

/// Seeded shuffle then cut at the largest-remainder sizes. The result depends
/// only on the set of ids and the seed, not on input order.
pub fn split(mut docs: Vec<ScoredDocument>, spec: &SplitSpec) -> Result<Partitions> {
    let [n_train, n_eval, _] = spec.sizes(docs.len())?;
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = rng::substream(spec.seed, Domain::Split, 0);
    rand::seq::SliceRandom::shuffle(docs.as_mut_slice(), &mut rng);
    let test = docs.split_off(n_train + n_eval);
    let eval = docs.split_off(n_train);
    Ok(Partitions {
        train: docs,
        eval,
        test,
    })
}

/// Serializes one export record. Key order is fixed and the score always
/// carries six decimals.
pub fn format_record(id: &str, text: &str, label: &str, score: f64) -> String {
    let js = |s: &str| serde_json::to_string(s).expect("strings always serialize");
    format!(
        "{{\"id\":{},\"text\":{},\"label\":{},\"score\":{:.6}}}",
        js(id),
        js(text),
        js(label),
        score
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub train: usize,
    pub eval: usize,
    pub test: usize,
    pub seed: u64,
    pub config_hash: String,
    /// sha256 of each written split file, keyed by file name.
    pub files: std::collections::BTreeMap<String, String>,
    pub config: serde_json::Value,
    pub created_unix: u64,
}

pub const SPLIT_FILES: [&str; 3] = ["train.jsonl", "eval.jsonl", "test.jsonl"];
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone)]
pub struct Exported {
    pub paths: [PathBuf; 3],
    pub manifest_path: PathBuf,
    pub manifest: DatasetManifest,
}

/// Writes `train.jsonl`, `eval.jsonl`, `test.jsonl` and a one-record
/// `manifest.jsonl` into `out_dir`. `config` is the resolved run configuration;
/// its canonical hash goes into the manifest.
pub fn export(
    parts: &Partitions,
    out_dir: impl AsRef<Path>,
    seed: u64,
    config: &serde_json::Value,
) -> Result<Exported> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let sets = [&parts.train, &parts.eval, &parts.test];
    let mut files = std::collections::BTreeMap::new();
    let mut paths: Vec<PathBuf> = Vec::with_capacity(3);
    for (name, docs) in SPLIT_FILES.iter().zip(sets) {
        let path = out_dir.join(name);
        let mut body = String::new();
        for d in docs.iter() {
            body.push_str(&format_record(&d.id, &d.text, &d.label, d.soft_score));
            body.push('\n');
        }
        std::fs::write(&path, body.as_bytes()).map_err(|e| Error::io(&path, e))?;
        files.insert(name.to_string(), hashing::sha256_hex(body.as_bytes()));
        paths.push(path);
    }
    let manifest = DatasetManifest {
        train: parts.train.len(),
        eval: parts.eval.len(),
        test: parts.test.len(),
        seed,
        config_hash: hashing::json_hash(config),
        files,
        config: config.clone(),
        created_unix: hashing::unix_now(),
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let mut line = serde_json::to_string(&manifest)?;
    line.push('\n');
    std::fs::write(&manifest_path, line).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(Exported {
        paths: paths.try_into().expect("three split files"),
        manifest_path,
        manifest,
    })
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let line = s.lines().find(|l| !l.trim().is_empty()).ok_or(Error::Empty("manifest"))?;
    Ok(serde_json::from_str(line)?)
}

/// Reads an exported split file (records with `id`, `text`, `label`, `score`).
pub fn read_scored(path: impl AsRef<Path>) -> Result<Vec<ScoredRecord>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScoredRecord = serde_json::from_str(&line).map_err(|e| Error::Record {
            record: i + 1,
            message: format!("{}: {e}", path.display()),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_scored(path: impl AsRef<Path>, records: &[ScoredRecord]) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        writeln!(w, "{}", format_record(&r.id, &r.text, &r.label, r.score))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
