//! Self-describing checkpoint archive.
//!
//! Layout: an 8-byte versioned magic (`LLTCKPT` + version), a little-endian
//! u64 header length, a JSON header (model kind, config, counters, seed and
//! a tensor directory), then all tensor data as little-endian f64. Saving
//! at f64 precision makes resume bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use lltext_core::Scalar;
use lltext_nn::{Adam, ParamSet, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

const MAGIC: [u8; 8] = *b"LLTCKPT\x01";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    config: serde_json::Value,
    epoch: usize,
    step: u64,
    adam_step: u64,
    base_seed: u64,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

/// In-memory checkpoint contents.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub kind: String,
    pub config: serde_json::Value,
    pub epoch: usize,
    pub step: u64,
    pub adam_step: u64,
    pub base_seed: u64,
    tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl Checkpoint {
    /// Packs parameters and optimizer state. Tensor names are prefixed
    /// `p.` / `m.` / `v.` for parameters and the two Adam moments.
    pub fn pack<T: Scalar, C: Serialize>(
        kind: &str,
        config: &C,
        epoch: usize,
        step: u64,
        base_seed: u64,
        params: &ParamSet<T>,
        adam: Option<&Adam<T>>,
    ) -> Result<Self> {
        let config = serde_json::to_value(config)
            .map_err(|e| PipelineError::config(format!("config serialization: {e}")))?;
        let mut tensors = Vec::new();
        for (name, t) in params.iter() {
            tensors.push((format!("p.{name}"), t.shape().to_vec(), to_f64(t)));
        }
        let mut adam_step = 0;
        if let Some(adam) = adam {
            let (steps, m, v) = adam.state();
            adam_step = steps;
            for ((name, _), mt) in params.iter().zip(m.iter()) {
                tensors.push((format!("m.{name}"), mt.shape().to_vec(), to_f64(mt)));
            }
            for ((name, _), vt) in params.iter().zip(v.iter()) {
                tensors.push((format!("v.{name}"), vt.shape().to_vec(), to_f64(vt)));
            }
        }
        Ok(Self {
            kind: kind.to_string(),
            config,
            epoch,
            step,
            adam_step,
            base_seed,
            tensors,
        })
    }

    /// Parameters in stored order, names unprefixed.
    pub fn unpack_params<T: Scalar>(&self) -> ParamSet<T> {
        let mut out = ParamSet::new();
        for (name, shape, data) in &self.tensors {
            if let Some(plain) = name.strip_prefix("p.") {
                out.insert(plain, from_f64(shape, data));
            }
        }
        out
    }

    /// Optimizer state aligned with the given parameter set.
    pub fn unpack_adam<T: Scalar>(&self, params: &ParamSet<T>) -> Result<Adam<T>> {
        let mut adam = Adam::new(params);
        let find = |prefix: &str, name: &str| -> Result<Tensor<T>> {
            let full = format!("{prefix}.{name}");
            self.tensors
                .iter()
                .find(|(n, _, _)| *n == full)
                .map(|(_, shape, data)| from_f64(shape, data))
                .ok_or_else(|| {
                    PipelineError::data(format!("checkpoint missing optimizer tensor {full}"))
                })
        };
        let mut m = Vec::new();
        let mut v = Vec::new();
        for (name, _) in params.iter() {
            m.push(find("m", name)?);
            v.push(find("v", name)?);
        }
        adam.restore(self.adam_step, m, v);
        Ok(adam)
    }

    pub fn config_as<C: for<'de> Deserialize<'de>>(&self) -> Result<C> {
        serde_json::from_value(self.config.clone())
            .map_err(|e| PipelineError::data(format!("checkpoint config: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
        }
        let mut entries = Vec::new();
        let mut offset = 0usize;
        for (name, shape, data) in &self.tensors {
            entries.push(TensorEntry {
                name: name.clone(),
                shape: shape.clone(),
                offset,
                len: data.len(),
            });
            offset += data.len();
        }
        let header = Header {
            kind: self.kind.clone(),
            config: self.config.clone(),
            epoch: self.epoch,
            step: self.step,
            adam_step: self.adam_step,
            base_seed: self.base_seed,
            tensors: entries,
        };
        let header_bytes = serde_json::to_vec(&header)
            .map_err(|e| PipelineError::data(format!("checkpoint header: {e}")))?;
        let mut file = std::fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
        let io = |e| PipelineError::io(path, e);
        file.write_all(&MAGIC).map_err(io)?;
        file.write_all(&(header_bytes.len() as u64).to_le_bytes())
            .map_err(io)?;
        file.write_all(&header_bytes).map_err(io)?;
        let mut buf = Vec::with_capacity(offset * 8);
        for (_, _, data) in &self.tensors {
            for v in data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        file.write_all(&buf).map_err(io)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
        let io = |e| PipelineError::io(path, e);
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic).map_err(io)?;
        if magic != MAGIC {
            return Err(PipelineError::data(format!(
                "{} is not a checkpoint (bad magic {:02x?})",
                path.display(),
                magic
            )));
        }
        let mut len_bytes = [0u8; 8];
        file.read_exact(&mut len_bytes).map_err(io)?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        file.read_exact(&mut header_bytes).map_err(io)?;
        let header: Header = serde_json::from_slice(&header_bytes)
            .map_err(|e| PipelineError::data(format!("checkpoint header: {e}")))?;
        let mut rest = Vec::new();
        file.read_to_end(&mut rest).map_err(io)?;
        let total: usize = header.tensors.iter().map(|t| t.len).sum();
        if rest.len() != total * 8 {
            return Err(PipelineError::data(format!(
                "checkpoint data section is {} bytes, expected {}",
                rest.len(),
                total * 8
            )));
        }
        let mut tensors = Vec::new();
        for e in &header.tensors {
            let mut data = Vec::with_capacity(e.len);
            for i in 0..e.len {
                let at = (e.offset + i) * 8;
                let mut b = [0u8; 8];
                b.copy_from_slice(&rest[at..at + 8]);
                data.push(f64::from_le_bytes(b));
            }
            tensors.push((e.name.clone(), e.shape.clone(), data));
        }
        Ok(Self {
            kind: header.kind,
            config: header.config,
            epoch: header.epoch,
            step: header.step,
            adam_step: header.adam_step,
            base_seed: header.base_seed,
            tensors,
        })
    }
}

fn to_f64<T: Scalar>(t: &Tensor<T>) -> Vec<f64> {
    t.data().iter().map(|v| v.dbl()).collect()
}

fn from_f64<T: Scalar>(shape: &[usize], data: &[f64]) -> Tensor<T> {
    Tensor::new(shape.to_vec(), data.iter().map(|v| T::of(*v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact_at_f64() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ckpt");
        let mut params = ParamSet::<f64>::new();
        params.insert("a.w", Tensor::new(vec![2, 2], vec![0.1, -0.2, 1.5e-7, 3.0]));
        params.insert("a.b", Tensor::new(vec![2], vec![f64::MIN_POSITIVE, 0.0]));
        let mut adam = Adam::new(&params);
        let g = vec![
            Some(Tensor::new(vec![2, 2], vec![0.3, 0.1, -0.4, 0.2])),
            Some(Tensor::new(vec![2], vec![0.9, -0.9])),
        ];
        adam.step(&mut params, &g, 1e-3);
        let ckpt = Checkpoint::pack("enhancer", &serde_json::json!({"k": 1}), 3, 17, 99, &params, Some(&adam)).unwrap();
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.kind, "enhancer");
        assert_eq!(back.epoch, 3);
        assert_eq!(back.step, 17);
        assert_eq!(back.base_seed, 99);
        let p2 = back.unpack_params::<f64>();
        for ((n1, t1), (n2, t2)) in params.iter().zip(p2.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.data(), t2.data());
        }
        let a2 = back.unpack_adam::<f64>(&p2).unwrap();
        assert_eq!(a2.step_count(), adam.step_count());
    }

    #[test]
    fn rejects_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTMAGIC________").unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
