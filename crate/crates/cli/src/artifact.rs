//! Model artifact files.
//!
//! Layout:
//!
//! ```text
//! BAYESMOOTH-ARTIFACT v1\n
//! META <u64 len> <JSON>            fitted model without draws and states
//! DRAW <u64 len> <f64 LE ...>      posterior draws, chain-major (may be empty)
//! STAT <u64 len> <records ...>     final states: level, trend, t_end, m, seasonal[m]
//! <32-byte SHA-256 of everything above>
//! ```
//!
//! Integers and floats are little-endian. Serialization is canonical, so
//! saving a loaded artifact reproduces the original bytes.

use std::path::Path;

use bayesmooth::estimator::FittedModel;
use bayesmooth::model::FinalState;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ArtifactError, CliError, CliResult};

pub const MAGIC: &str = "BAYESMOOTH-ARTIFACT";
pub const VERSION: &str = "v1";
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub model: FittedModel,
    /// Hex SHA-256 of the training values as supplied (before any transform).
    pub data_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    data_fingerprint: String,
    n_states: usize,
    model: FittedModel,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Fingerprint of a value sequence.
pub fn fingerprint(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex(&h.finalize())
}

fn push_section(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

impl Artifact {
    pub fn new(model: FittedModel, training_values: &[f64]) -> Self {
        Self {
            model,
            data_fingerprint: fingerprint(training_values),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut light = self.model.clone();
        light.final_states = Vec::new();
        let draws = light
            .draws
            .as_mut()
            .map(|d| std::mem::take(&mut d.values))
            .unwrap_or_default();
        let meta = Meta {
            data_fingerprint: self.data_fingerprint.clone(),
            n_states: self.model.final_states.len(),
            model: light,
        };
        let meta_json = serde_json::to_vec(&meta).expect("model metadata serializes");

        let draw_bytes: Vec<u8> = draws.iter().flat_map(|v| v.to_le_bytes()).collect();
        let mut state_bytes = Vec::new();
        for s in &self.model.final_states {
            state_bytes.extend_from_slice(&s.level.to_le_bytes());
            state_bytes.extend_from_slice(&s.trend.to_le_bytes());
            state_bytes.extend_from_slice(&(s.t_end as u64).to_le_bytes());
            state_bytes.extend_from_slice(&(s.seasonal.len() as u64).to_le_bytes());
            for v in &s.seasonal {
                state_bytes.extend_from_slice(&v.to_le_bytes());
            }
        }

        let mut out = format!("{MAGIC} {VERSION}\n").into_bytes();
        push_section(&mut out, b"META", &meta_json);
        push_section(&mut out, b"DRAW", &draw_bytes);
        push_section(&mut out, b"STAT", &state_bytes);
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArtifactError> {
        let prefix = format!("{MAGIC} ");
        if !bytes.starts_with(prefix.as_bytes()) {
            // A file cut inside the magic string is still ours.
            return if prefix.as_bytes().starts_with(bytes) {
                Err(ArtifactError::ChecksumMismatch)
            } else {
                Err(ArtifactError::Malformed("missing artifact header".into()))
            };
        }
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or(ArtifactError::ChecksumMismatch)?;
        let version = String::from_utf8_lossy(&bytes[prefix.len()..newline]).into_owned();
        if version != VERSION {
            return Err(ArtifactError::VersionMismatch {
                found: version,
                expected: VERSION.into(),
            });
        }
        if bytes.len() < newline + 1 + CHECKSUM_LEN {
            return Err(ArtifactError::ChecksumMismatch);
        }
        let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != stored {
            return Err(ArtifactError::ChecksumMismatch);
        }

        let mut r = Reader {
            buf: &body[newline + 1..],
        };
        let meta_json = r.section(b"META")?;
        let draw_bytes = r.section(b"DRAW")?;
        let state_bytes = r.section(b"STAT")?;
        if !r.buf.is_empty() {
            return Err(ArtifactError::Malformed("trailing bytes after sections".into()));
        }

        let meta: Meta =
            serde_json::from_slice(meta_json).map_err(|e| ArtifactError::Malformed(format!("metadata: {e}")))?;
        let mut model = meta.model;

        let draws = f64s(draw_bytes)?;
        match model.draws.as_mut() {
            Some(d) => {
                if draws.len() != d.n_chains * d.n_draws * d.n_params {
                    return Err(ArtifactError::Malformed("draw count does not match metadata".into()));
                }
                d.values = draws;
            }
            None if draws.is_empty() => {}
            None => return Err(ArtifactError::Malformed("draws present without metadata".into())),
        }

        let mut s = Reader { buf: state_bytes };
        let mut states = Vec::with_capacity(meta.n_states);
        for _ in 0..meta.n_states {
            let level = s.f64()?;
            let trend = s.f64()?;
            let t_end = s.u64()? as usize;
            let m = s.u64()? as usize;
            let seasonal = (0..m).map(|_| s.f64()).collect::<Result<Vec<_>, _>>()?;
            states.push(FinalState {
                level,
                trend,
                seasonal,
                t_end,
            });
        }
        if !s.buf.is_empty() {
            return Err(ArtifactError::Malformed("trailing state bytes".into()));
        }
        model.final_states = states;
        Ok(Self {
            model,
            data_fingerprint: meta.data_fingerprint,
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self::from_bytes(&bytes)?)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArtifactError> {
        if self.buf.len() < n {
            return Err(ArtifactError::Malformed("unexpected end of data".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64, ArtifactError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, ArtifactError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn section(&mut self, tag: &[u8; 4]) -> Result<&'a [u8], ArtifactError> {
        let found = self.take(4)?;
        if found != tag {
            return Err(ArtifactError::Malformed(format!(
                "expected section {}, found {}",
                String::from_utf8_lossy(tag),
                String::from_utf8_lossy(found)
            )));
        }
        let len = usize::try_from(self.u64()?).map_err(|_| ArtifactError::Malformed("section too large".into()))?;
        self.take(len)
    }
}

fn f64s(bytes: &[u8]) -> Result<Vec<f64>, ArtifactError> {
    if !bytes.len().is_multiple_of(8) {
        return Err(ArtifactError::Malformed(
            "float section length not a multiple of 8".into(),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use bayesmooth::estimator::{fit, FitConfig, Method, Mode, ModelKind};
    use bayesmooth::series::validate_series;

    fn fitted(method: Method) -> (FittedModel, Vec<f64>) {
        let y: Vec<f64> = (0..36)
            .map(|t| 50.0 + 0.5 * t as f64 + [3.0, -1.0, -2.0, 0.0][t % 4] + ((t * 7919) % 13) as f64 * 0.1)
            .collect();
        let s = validate_series((0..36).collect(), y.clone(), None, 4).unwrap();
        let cfg = FitConfig {
            model: ModelKind::Lgt,
            mode: Mode::Additive,
            method,
            seed: 3,
        };
        (fit(&s, &cfg).unwrap(), y)
    }

    #[test]
    fn round_trip_is_canonical() {
        let (m, y) = fitted(Method::DEFAULT_MAP);
        let a = Artifact::new(m, &y);
        let bytes = a.to_bytes();
        let b = Artifact::from_bytes(&bytes).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.to_bytes(), bytes);
    }

    #[test]
    fn draws_survive_exactly() {
        let (m, y) = fitted(Method::Mcmc {
            chains: 2,
            warmup: 100,
            draws: 50,
        });
        let a = Artifact::new(m, &y);
        let b = Artifact::from_bytes(&a.to_bytes()).unwrap();
        let (da, db) = (a.model.draws.as_ref().unwrap(), b.model.draws.as_ref().unwrap());
        assert!(da
            .values
            .iter()
            .zip(&db.values)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(b.model.final_states.len(), 101);
        assert_eq!(a, b);
    }

    #[test]
    fn corruption_and_versions() {
        let (m, y) = fitted(Method::DEFAULT_MAP);
        let bytes = Artifact::new(m, &y).to_bytes();
        for cut in [0, 5, 22, 40, bytes.len() - 1] {
            assert!(
                matches!(
                    Artifact::from_bytes(&bytes[..cut]),
                    Err(ArtifactError::ChecksumMismatch)
                ),
                "cut at {cut}"
            );
        }
        let mut flipped = bytes.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 0x10;
        assert!(matches!(
            Artifact::from_bytes(&flipped),
            Err(ArtifactError::ChecksumMismatch)
        ));

        let mut v2 = bytes.clone();
        v2[MAGIC.len() + 2] = b'9';
        assert!(matches!(
            Artifact::from_bytes(&v2),
            Err(ArtifactError::VersionMismatch { .. })
        ));

        assert!(matches!(
            Artifact::from_bytes(b"ds,y\n1,2\n"),
            Err(ArtifactError::Malformed(_))
        ));
    }

    #[test]
    fn fingerprint_depends_on_values() {
        assert_eq!(fingerprint(&[1.0, 2.0]), fingerprint(&[1.0, 2.0]));
        assert_ne!(fingerprint(&[1.0, 2.0]), fingerprint(&[2.0, 1.0]));
        assert_eq!(fingerprint(&[]).len(), 64);
    }
}
