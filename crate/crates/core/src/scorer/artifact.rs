//! Model artifact: `RELSCORE` magic, u32 format version, u64 header length,
//! a JSON header (variant, feature config, class order, array lengths,
//! training-config hash), then every weight array as little-endian f64.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassHead, ClassSpec, RelevanceModel, Variant};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;

pub const ARTIFACT_MAGIC: &[u8; 8] = b"RELSCORE";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    variant: Variant,
    feature_config: FeatureConfig,
    classes: Option<ClassSpec>,
    train_config_hash: Option<String>,
    /// `(name, length)` of each payload array, in payload order.
    arrays: Vec<(String, usize)>,
}

fn arrays_of(model: &RelevanceModel) -> Vec<(&'static str, Vec<f64>)> {
    let mut out = vec![
        ("regression_weights", model.regression_weights.clone()),
        ("regression_bias", vec![model.regression_bias]),
    ];
    if let Some(h) = &model.class_head {
        out.push(("class_weights", h.weights.clone()));
        out.push(("class_biases", h.biases.clone()));
    }
    out
}

pub fn write_model<W: Write>(model: &RelevanceModel, mut w: W) -> Result<()> {
    let arrays = arrays_of(model);
    let header = Header {
        variant: model.variant,
        feature_config: model.feature_config.clone(),
        classes: model.class_head.as_ref().map(|h| h.spec.clone()),
        train_config_hash: model.train_config_hash.clone(),
        arrays: arrays.iter().map(|(n, a)| (n.to_string(), a.len())).collect(),
    };
    let header = serde_json::to_vec(&header)?;
    let io = |e| Error::Artifact(format!("write failed: {e}"));
    w.write_all(ARTIFACT_MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(header.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&header).map_err(io)?;
    for (_, a) in &arrays {
        let mut buf = Vec::with_capacity(a.len() * 8);
        for v in a {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_model<R: Read>(mut r: R) -> Result<RelevanceModel> {
    let io = |e: std::io::Error| Error::Artifact(format!("truncated or unreadable: {e}"));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != ARTIFACT_MAGIC {
        return Err(Error::Artifact("not a relevance model file (bad magic)".into()));
    }
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b).map_err(io)?;
    let version = u32::from_le_bytes(u32b);
    if version != VERSION {
        return Err(Error::Artifact(format!("unsupported format version {version}")));
    }
    let mut u64b = [0u8; 8];
    r.read_exact(&mut u64b).map_err(io)?;
    let hlen = u64::from_le_bytes(u64b) as usize;
    let mut hbuf = vec![0u8; hlen];
    r.read_exact(&mut hbuf).map_err(io)?;
    let header: Header = serde_json::from_slice(&hbuf)?;
    header.feature_config.validate()?;

    let mut arrays = std::collections::HashMap::new();
    for (name, len) in &header.arrays {
        let mut bytes = vec![0u8; len * 8];
        r.read_exact(&mut bytes).map_err(io)?;
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        arrays.insert(name.as_str(), vals);
    }
    let mut take = |name: &str, len: usize| -> Result<Vec<f64>> {
        let a = arrays
            .remove(name)
            .ok_or_else(|| Error::Artifact(format!("missing array {name}")))?;
        if a.len() != len {
            return Err(Error::Artifact(format!(
                "array {name} has {} values, expected {len}",
                a.len()
            )));
        }
        Ok(a)
    };
    let dim = header.feature_config.hash_dim;
    let regression_weights = take("regression_weights", dim)?;
    let regression_bias = take("regression_bias", 1)?[0];
    let class_head = match (header.variant, header.classes) {
        (Variant::A, _) => None,
        (Variant::B, Some(spec)) => {
            let k = spec.labels.len();
            Some(ClassHead {
                weights: take("class_weights", k * dim)?,
                biases: take("class_biases", k)?,
                spec,
            })
        }
        (Variant::B, None) => {
            return Err(Error::Artifact("variant B artifact without class list".into()))
        }
    };
    Ok(RelevanceModel {
        variant: header.variant,
        feature_config: header.feature_config,
        regression_weights,
        regression_bias,
        class_head,
        train_config_hash: header.train_config_hash,
    })
}

pub fn save_model(model: &RelevanceModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_model(model, std::io::BufWriter::new(f))
}

/// `sha256:<hex>` of the serialized artifact bytes.
pub fn artifact_hash(model: &RelevanceModel) -> Result<String> {
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    Ok(format!("sha256:{}", crate::hashing::sha256_hex(&buf)))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RelevanceModel> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(std::io::BufReader::new(f))
}
