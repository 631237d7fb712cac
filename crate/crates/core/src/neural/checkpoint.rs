//! JSON checkpoints: architecture, head kind, parameter tensors and an
//! optional optimizer state. Floats use shortest round-trip notation, so a
//! decode/encode cycle reproduces the file byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::gcn::{Architecture, GcnModel, Head};
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

const FORMAT: &str = "opinet-gcn/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: String,
    dims: Architecture,
    head: Head,
    params: Vec<DenseMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adam: Option<AdamState>,
}

pub fn encode_model(model: &GcnModel, adam: Option<&AdamState>) -> String {
    let ckpt = Checkpoint {
        format: FORMAT.to_string(),
        dims: model.architecture(),
        head: model.head(),
        params: model.params().to_vec(),
        adam: adam.cloned(),
    };
    serde_json::to_string(&ckpt).expect("plain data")
}

pub fn decode_model(text: &str) -> Result<(GcnModel, Option<AdamState>)> {
    let ckpt: Checkpoint =
        serde_json::from_str(text).map_err(|e| Error::decode("checkpoint", e.to_string()))?;
    if ckpt.format != FORMAT {
        return Err(Error::decode(
            "format",
            format!("unsupported checkpoint format `{}`", ckpt.format),
        ));
    }
    for p in &ckpt.params {
        if p.data().len() != p.rows() * p.cols() {
            return Err(Error::decode(
                "params",
                "tensor length does not match its shape",
            ));
        }
    }
    let model = GcnModel::from_params(ckpt.dims, ckpt.head, ckpt.params)
        .map_err(|e| Error::decode("params", e.to_string()))?;
    if let Some(adam) = &ckpt.adam {
        let ok = adam.first_moment.len() == model.params().len()
            && adam.second_moment.len() == model.params().len()
            && model
                .params()
                .iter()
                .zip(adam.first_moment.iter().zip(&adam.second_moment))
                .all(|(p, (m, v))| p.shape() == m.shape() && p.shape() == v.shape());
        if !ok {
            return Err(Error::decode(
                "adam",
                "moment shapes do not match parameters",
            ));
        }
    }
    Ok((model, ckpt.adam))
}

pub fn save_model(
    path: impl AsRef<Path>,
    model: &GcnModel,
    adam: Option<&AdamState>,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode_model(model, adam)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(GcnModel, Option<AdamState>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_model(&text)
}

/// Loads a checkpoint and insists on a head kind and the 3-wide input.
pub fn load_model_with_head(path: impl AsRef<Path>, head: Head) -> Result<GcnModel> {
    let (model, _) = load_model(path)?;
    model.require_head(head)?;
    if model.architecture().input != crate::features::NUM_FEATURES {
        return Err(Error::Config(format!(
            "model input width {} differs from the {} node features",
            model.architecture().input,
            crate::features::NUM_FEATURES
        )));
    }
    Ok(model)
}
