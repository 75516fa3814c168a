//! Checkpoint files: one JSON document holding the config fingerprint, the
//! config itself, every named tensor with its Adam moments, and the step count.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NnError, ParamStore, Tensor};
use crate::fingerprint::fingerprint;
use crate::num::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    fingerprint: String,
    scalar: String,
    config: BTreeMap<String, String>,
    step: u64,
    tensors: Vec<TensorRecord>,
}

/// Parameters plus the config they were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<S> {
    pub config: BTreeMap<String, String>,
    pub store: ParamStore<S>,
}

fn to_f64<S: Scalar>(t: &Tensor<S>) -> Vec<f64> {
    t.data().iter().map(|x| x.as_f64()).collect()
}

fn from_f64<S: Scalar>(name: &str, shape: &[usize], v: Vec<f64>) -> Result<Tensor<S>, NnError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(NnError::Checkpoint(format!("non-finite value in {name}")));
    }
    Tensor::from_vec(shape, v.into_iter().map(S::of).collect())
}

impl<S: Scalar> Checkpoint<S> {
    pub fn new(config: BTreeMap<String, String>, store: ParamStore<S>) -> Self {
        Checkpoint { config, store }
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.config)
    }

    pub fn to_json(&self) -> String {
        let tensors = self
            .store
            .ids()
            .map(|id| {
                let (m, v) = self.store.moments(id);
                TensorRecord {
                    name: self.store.names()[id.0].clone(),
                    shape: self.store.param(id).shape().to_vec(),
                    data: to_f64(self.store.param(id)),
                    m: to_f64(m),
                    v: to_f64(v),
                }
            })
            .collect();
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            fingerprint: self.fingerprint(),
            scalar: S::NAME.to_string(),
            config: self.config.clone(),
            step: self.store.step_count(),
            tensors,
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    /// Parses a checkpoint. The stored fingerprint must match the stored
    /// config, and `expected` (when given) must match both.
    pub fn from_json(text: &str, expected: Option<&str>) -> Result<Self, NnError> {
        let file: CheckpointFile =
            serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if file.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                file.version
            )));
        }
        if file.scalar != S::NAME {
            return Err(NnError::Checkpoint(format!(
                "checkpoint holds {} parameters, loading as {}",
                file.scalar,
                S::NAME
            )));
        }
        let actual = fingerprint(&file.config);
        if actual != file.fingerprint {
            return Err(NnError::FingerprintMismatch {
                expected: file.fingerprint,
                found: actual,
            });
        }
        if let Some(exp) = expected {
            if exp != actual {
                return Err(NnError::FingerprintMismatch {
                    expected: exp.to_string(),
                    found: actual,
                });
            }
        }
        let entries = file
            .tensors
            .into_iter()
            .map(|r| {
                Ok((
                    r.name.clone(),
                    from_f64(&r.name, &r.shape, r.data)?,
                    from_f64(&r.name, &r.shape, r.m)?,
                    from_f64(&r.name, &r.shape, r.v)?,
                ))
            })
            .collect::<Result<Vec<_>, NnError>>()?;
        Ok(Checkpoint {
            config: file.config,
            store: ParamStore::from_parts(entries, file.step)?,
        })
    }

    /// Writes atomically: a sibling temp file is renamed into place.
    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(self.to_json().as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path, expected: Option<&str>) -> Result<Self, NnError> {
        Self::from_json(&fs::read_to_string(path)?, expected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{adam_step, AdamConfig};
    use rand::SeedableRng;

    fn sample() -> Checkpoint<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let id = store.insert_uniform("enc.w0", &[3, 2], 0.5, &mut rng).unwrap();
        store.insert_uniform("enc.b0", &[2], 0.5, &mut rng).unwrap();
        store.grad_mut(id).data_mut()[1] = 0.123456789;
        adam_step(&mut store, &AdamConfig::default());
        let config = BTreeMap::from([("variant".to_string(), "CASE".to_string())]);
        Checkpoint::new(config, store)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let back = Checkpoint::<f64>::from_json(&ck.to_json(), Some(&ck.fingerprint())).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_json(), ck.to_json());
    }

    #[test]
    fn fingerprint_mismatch_rejected() {
        let ck = sample();
        let err = Checkpoint::<f64>::from_json(&ck.to_json(), Some("deadbeef")).unwrap_err();
        assert!(matches!(err, NnError::FingerprintMismatch { .. }));
        let tampered = ck.to_json().replace("\"CASE\"", "\"CPV_FULL\"");
        assert!(matches!(
            Checkpoint::<f64>::from_json(&tampered, None),
            Err(NnError::FingerprintMismatch { .. })
        ));
        assert!(Checkpoint::<f32>::from_json(&ck.to_json(), None).is_err());
    }

    #[test]
    fn save_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let ck = sample();
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::<f64>::load(&path, None).unwrap(), ck);
        assert!(!path.with_extension("tmp").exists());
    }
}
