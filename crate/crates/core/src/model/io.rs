//! Model file: `MAGIC`, a little-endian u32 header length, a UTF-8 JSON
//! header, then every parameter array as little-endian f32 in header order
//! (extractor groups 1..7 weights then biases, then discriminator layers).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{LayerParams, LayerSpec};

use super::discriminator::{discriminator_groups, Discriminator};
use super::extractor::{group_layers, FeatureExtractor, NUM_GROUPS};
use super::tied::check_untie_count;

pub const MAGIC: &[u8; 8] = b"A2CNNMDL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Init,
    Pretrain,
    Finetune,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub phase: Phase,
    pub seed: u64,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupHeader {
    layers: Vec<LayerSpec>,
    weights: usize,
    biases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscriminatorHeader {
    input_dim: usize,
    groups: Vec<GroupHeader>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    extractor: Vec<GroupHeader>,
    discriminator: Option<DiscriminatorHeader>,
    untie_count: Option<usize>,
    provenance: Provenance,
    payload_floats: usize,
}

/// Everything needed to reload an extractor for evaluation or to resume
/// adaptation.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub extractor: FeatureExtractor,
    pub discriminator: Option<Discriminator>,
    pub untie_count: Option<usize>,
    pub provenance: Provenance,
}

fn group_header(layers: &[LayerSpec], p: &LayerParams) -> GroupHeader {
    GroupHeader {
        layers: layers.to_vec(),
        weights: p.weights.len(),
        biases: p.biases.len(),
    }
}

fn push_f32(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

impl ModelFile {
    pub fn new(extractor: FeatureExtractor, provenance: Provenance) -> Self {
        Self {
            extractor,
            discriminator: None,
            untie_count: None,
            provenance,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if let Some(l) = self.untie_count {
            check_untie_count(l)?;
        }
        let ext = self.extractor.snapshot();
        let extractor: Vec<GroupHeader> = ext
            .iter()
            .enumerate()
            .map(|(g, p)| group_header(group_layers(g), p))
            .collect();
        let discriminator = self.discriminator.as_ref().map(|d| DiscriminatorHeader {
            input_dim: d.input_dim(),
            groups: discriminator_groups(d.input_dim())
                .iter()
                .zip(d.params())
                .map(|(l, p)| group_header(l, p))
                .collect(),
        });
        let mut payload = Vec::new();
        let mut arrays: Vec<&LayerParams> = ext.iter().collect();
        if let Some(d) = &self.discriminator {
            arrays.extend(d.params());
        }
        for p in &arrays {
            push_f32(&mut payload, &p.weights);
            push_f32(&mut payload, &p.biases);
        }
        let header = Header {
            version: FORMAT_VERSION,
            extractor,
            discriminator,
            untie_count: self.untie_count,
            provenance: self.provenance.clone(),
            payload_floats: payload.len() / 4,
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(12 + json.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::ModelFormat(m.to_string());
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic"));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let header_end = 12usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[12..header_end])
            .map_err(|e| Error::ModelFormat(format!("header: {e}")))?;
        if header.version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported version {} (this build reads {FORMAT_VERSION})",
                header.version
            )));
        }
        let payload = &bytes[header_end..];
        if payload.len() != header.payload_floats * 4 {
            return Err(Error::ModelFormat(format!(
                "payload holds {} bytes, header promises {} floats",
                payload.len(),
                header.payload_floats
            )));
        }
        let mut floats = payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))));
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = floats.by_ref().take(n).collect();
            if v.len() == n {
                Ok(v)
            } else {
                Err(Error::ModelFormat("payload shorter than header".into()))
            }
        };

        if header.extractor.len() != NUM_GROUPS {
            return Err(bad("extractor must have 7 groups"));
        }
        let mut groups = Vec::with_capacity(NUM_GROUPS);
        for (g, gh) in header.extractor.iter().enumerate() {
            if gh.layers != group_layers(g) {
                return Err(Error::ModelFormat(format!(
                    "extractor group {} layers differ from the fixed architecture",
                    g + 1
                )));
            }
            groups.push(LayerParams {
                weights: take(gh.weights)?,
                biases: take(gh.biases)?,
            });
        }
        let extractor = FeatureExtractor::from_params(groups)?;

        let discriminator = match &header.discriminator {
            None => None,
            Some(dh) => {
                let want = discriminator_groups(dh.input_dim);
                if dh.groups.len() != want.len()
                    || dh.groups.iter().zip(&want).any(|(h, w)| h.layers != *w)
                {
                    return Err(bad(
                        "discriminator layers differ from the fixed architecture",
                    ));
                }
                let mut params = Vec::new();
                for gh in &dh.groups {
                    params.push(LayerParams {
                        weights: take(gh.weights)?,
                        biases: take(gh.biases)?,
                    });
                }
                Some(Discriminator::from_params(dh.input_dim, params)?)
            }
        };
        if let Some(l) = header.untie_count {
            check_untie_count(l)?;
        }
        Ok(Self {
            extractor,
            discriminator,
            untie_count: header.untie_count,
            provenance: header.provenance,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance {
            phase: Phase::Pretrain,
            seed: 3,
            iterations: 10,
        }
    }

    #[test]
    fn round_trip_preserves_everything_at_f32() {
        let mut m = ModelFile::new(FeatureExtractor::build(4), prov());
        m.discriminator = Some(Discriminator::build(5));
        m.untie_count = Some(3);
        let bytes = m.to_bytes().unwrap();
        let back = ModelFile::from_bytes(&bytes).unwrap();
        assert_eq!(back.provenance, m.provenance);
        assert_eq!(back.untie_count, Some(3));
        for (a, b) in m.extractor.snapshot().iter().zip(back.extractor.snapshot()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!((*x as f32) as f64, *y);
            }
        }
        // A reloaded model re-serializes byte-identically.
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let m = ModelFile::new(FeatureExtractor::build(4), prov());
        let bytes = m.to_bytes().unwrap();
        assert!(ModelFile::from_bytes(&bytes[..bytes.len() - 4]).is_err());
        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(ModelFile::from_bytes(&wrong_magic).is_err());
        assert!(ModelFile::from_bytes(&bytes[..10]).is_err());
    }

    #[test]
    fn rejects_future_versions() {
        let m = ModelFile::new(FeatureExtractor::build(4), prov());
        let bytes = m.to_bytes().unwrap();
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[12..12 + hlen]).unwrap();
        let patched = header.replacen("\"version\":1", "\"version\":9", 1);
        let mut out = bytes[..12].to_vec();
        out.extend_from_slice(patched.as_bytes());
        out.extend_from_slice(&bytes[12 + hlen..]);
        assert!(matches!(
            ModelFile::from_bytes(&out),
            Err(Error::ModelFormat(_))
        ));
    }
}
