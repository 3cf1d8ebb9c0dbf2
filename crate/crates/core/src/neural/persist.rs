use serde::{Deserialize, Serialize};

use super::model::{RnnNaluModel, INPUT_DIM, OUTPUT_DIM};
use super::train::TrainConfig;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk form of a trained model: dimensions, every parameter matrix
/// (row-major), normalization statistics and the training config.
///
/// Floats are written in shortest round-trip form, so a save/load cycle is
/// bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub model: RnnNaluModel,
    pub train_config: Option<TrainConfig>,
    #[serde(default)]
    pub loss_history: Vec<f64>,
}

impl ModelFile {
    pub fn new(model: RnnNaluModel, train_config: Option<TrainConfig>, loss_history: Vec<f64>) -> Self {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            input_dim: INPUT_DIM,
            hidden_dim: model.hidden_dim(),
            output_dim: OUTPUT_DIM,
            model,
            train_config,
            loss_history,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: "serializing model".into(),
            source,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "parsing model".into(),
            source,
        })?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "model format version {} (expected {MODEL_FORMAT_VERSION})",
                file.version
            )));
        }
        let m = &file.model;
        let checked = RnnNaluModel::new(m.cell.clone(), m.head.clone(), m.norm.clone())?;
        if file.input_dim != INPUT_DIM
            || file.output_dim != OUTPUT_DIM
            || file.hidden_dim != checked.hidden_dim()
        {
            return Err(Error::Dimension(format!(
                "model header says {}->{}->{}, parameters disagree",
                file.input_dim, file.hidden_dim, file.output_dim
            )));
        }
        super::rnn::RnnCell::new(m.cell.w_x.clone(), m.cell.w_h.clone(), m.cell.b.clone())?;
        super::nalu::NaluCell::new(
            m.head.w_hat.clone(),
            m.head.m_hat.clone(),
            m.head.g.clone(),
            m.head.eps,
        )?;
        Ok(file)
    }
}
