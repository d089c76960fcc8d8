//! Binary checkpoints: an 8-byte little-endian manifest length, a JSON
//! manifest, then one blob of little-endian f64 arrays.
//!
//! The manifest names every array with its shape, dtype and byte offset into
//! the blob, and carries the training config, its hash, the seed, the epoch
//! count and the delay mode. Round-trips are bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DelayMode, PositionArray};
use crate::matrix::Matrix;
use crate::snn::{DelayParams, ModelParams};
use crate::training::TrainConfig;

pub const FORMAT: &str = "posdelay-checkpoint";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Format(String),
}

fn bad(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Format(msg.into())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    /// Byte offset into the blob that follows the manifest.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: String,
    pub config: TrainConfig,
    pub config_hash: String,
    pub seed: u64,
    pub epoch: usize,
    pub delay_mode: DelayMode,
    /// Number of trainable scalars that determine the recurrent delays.
    pub delay_parameter_count: usize,
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub arrays: Vec<ArrayEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config: TrainConfig,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn new(params: ModelParams, config: TrainConfig, epoch: usize) -> Self {
        Self { params, config, epoch }
    }

    pub fn manifest(&self) -> Manifest {
        self.layout().0
    }

    fn layout(&self) -> (Manifest, Vec<f64>) {
        let p = &self.params;
        let mut arrays = Vec::new();
        let mut blob: Vec<f64> = Vec::new();
        let mut push = |name: &str, shape: Vec<usize>, data: &[f64]| {
            arrays.push(ArrayEntry { name: name.into(), shape, dtype: "f64".into(), offset: blob.len() * 8 });
            blob.extend_from_slice(data);
        };
        let mat = |m: &Matrix| vec![m.rows(), m.cols()];
        push("w_in", mat(&p.w_in), p.w_in.as_slice());
        push("w_rec", mat(&p.w_rec), p.w_rec.as_slice());
        push("w_out", mat(&p.w_out), p.w_out.as_slice());
        match &p.delays {
            DelayParams::None => {}
            DelayParams::Free(d) => push("delays", mat(d), d.as_slice()),
            DelayParams::Axonal(v) => push("axonal_delays", vec![v.len()], v),
            DelayParams::Positional(pos) => push("positions", mat(pos.coords()), pos.coords().as_slice()),
        }
        if let Some(mask) = &p.rec_mask {
            let bits: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            push("rec_mask", vec![p.n_hid(), p.n_hid()], &bits);
        }
        let manifest = Manifest {
            format: FORMAT.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: self.config.clone(),
            config_hash: self.config.hash(),
            seed: self.config.seed,
            epoch: self.epoch,
            delay_mode: p.delays.mode(),
            delay_parameter_count: p.delays.parameter_count(),
            n_in: p.n_in(),
            n_hidden: p.n_hid(),
            n_out: p.n_out(),
            arrays,
        };
        (manifest, blob)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (manifest, blob) = self.layout();
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(8 + json.len() + blob.len() * 8);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for x in blob {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let (manifest, blob) = split(bytes)?;
        let get = |name: &str| -> Result<Option<(Vec<usize>, Vec<f64>)>, CheckpointError> {
            let Some(e) = manifest.arrays.iter().find(|e| e.name == name) else {
                return Ok(None);
            };
            if e.dtype != "f64" {
                return Err(bad(format!("array {name} has unsupported dtype {}", e.dtype)));
            }
            let len: usize = e.shape.iter().product();
            let end = e.offset.checked_add(len * 8).ok_or_else(|| bad("array offset overflow"))?;
            if e.offset % 8 != 0 || end > blob.len() {
                return Err(bad(format!("array {name} lies outside the blob")));
            }
            let data = blob[e.offset..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            Ok(Some((e.shape.clone(), data)))
        };
        let matrix = |name: &str| -> Result<Matrix, CheckpointError> {
            match get(name)? {
                Some((shape, data)) if shape.len() == 2 => Ok(Matrix::from_vec(shape[0], shape[1], data)),
                Some(_) => Err(bad(format!("array {name} is not two-dimensional"))),
                None => Err(bad(format!("missing array {name}"))),
            }
        };
        let delays = match manifest.delay_mode {
            DelayMode::None => DelayParams::None,
            DelayMode::Free => DelayParams::Free(matrix("delays")?),
            DelayMode::Axonal => {
                DelayParams::Axonal(get("axonal_delays")?.ok_or_else(|| bad("missing array axonal_delays"))?.1)
            }
            DelayMode::Positional => DelayParams::Positional(
                PositionArray::new(matrix("positions")?).map_err(|e| bad(format!("positions: {e}")))?,
            ),
        };
        let rec_mask = get("rec_mask")?.map(|(_, bits)| bits.iter().map(|&b| b != 0.0).collect());
        let params = ModelParams { w_in: matrix("w_in")?, w_rec: matrix("w_rec")?, w_out: matrix("w_out")?, delays, rec_mask };
        params.validate().map_err(|e| bad(e.to_string()))?;
        if params.delays.parameter_count() != manifest.delay_parameter_count {
            return Err(bad("delay parameter count disagrees with the arrays"));
        }
        Ok(Self { params, config: manifest.config, epoch: manifest.epoch })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Parses only the manifest of a checkpoint.
pub fn read_manifest(bytes: &[u8]) -> Result<Manifest, CheckpointError> {
    Ok(split(bytes)?.0)
}

fn split(bytes: &[u8]) -> Result<(Manifest, &[u8]), CheckpointError> {
    if bytes.len() < 8 {
        return Err(bad("file shorter than its length prefix"));
    }
    let len = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let end = 8usize.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("manifest length exceeds file"))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[8..end]).map_err(|e| bad(format!("manifest: {e}")))?;
    if manifest.format != FORMAT {
        return Err(bad(format!("unexpected format tag {}", manifest.format)));
    }
    Ok((manifest, &bytes[end..]))
}
