//! Forecasting models: least squares, AR/HAR designs and boosted trees.

mod gbt;
mod linear;
mod ols;

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gbt::{gbt_fit, GbtModel, GbtParams, Loss, Tree};
pub use linear::{
    ar_columns, ar_design, har_columns, har_design, Design, HAR_WINDOWS, HAR_WINDOWS_LONG,
};
pub(crate) use ols::least_squares;
pub use ols::{ols_fit, LinearFit};

pub const MODEL_FORMAT: u32 = 1;

/// Any fitted model, as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Linear(LinearFit),
    Gbt(GbtModel),
}

impl FittedModel {
    pub fn feature_names(&self) -> &[String] {
        match self {
            FittedModel::Linear(m) => m.feature_names(),
            FittedModel::Gbt(m) => &m.feature_names,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        match self {
            FittedModel::Linear(m) => m.predict(x),
            FittedModel::Gbt(m) => m.predict(x),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    model_format: u32,
    model: FittedModel,
}

pub fn save_model<W: Write>(writer: W, model: &FittedModel) -> Result<()> {
    serde_json::to_writer(
        writer,
        &Envelope {
            model_format: MODEL_FORMAT,
            model: model.clone(),
        },
    )?;
    Ok(())
}

pub fn load_model<R: Read>(reader: R) -> Result<FittedModel> {
    let env: Envelope = serde_json::from_reader(reader)?;
    if env.model_format != MODEL_FORMAT {
        return Err(Error::Format(format!(
            "unsupported model_format {} (expected {MODEL_FORMAT})",
            env.model_format
        )));
    }
    Ok(env.model)
}
