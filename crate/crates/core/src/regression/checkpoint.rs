//! Versioned textual predictor checkpoints.
//!
//! ```text
//! {"version":1,"head":"pricing","feature_dim":513,"seed":7,
//!  "meta":{...},"params":[...]}
//! ```
//! `meta` carries whatever is needed to rebuild the feature map; `params` is
//! the flat parameter vector.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{
    CauchyFeatures, CrossedActions, HeadKind, HeadPredictor, LinearPredictor, Link, MinMaxScaler, Predictor,
    RegressionError,
};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CheckpointMeta {
    Linear {
        map: CrossedActions,
        link: Link,
    },
    Head {
        kind: HeadKind,
        features: CauchyFeatures,
        scaler: MinMaxScaler,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub head: String,
    pub feature_dim: usize,
    pub seed: u64,
    pub meta: CheckpointMeta,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn from_linear(p: &LinearPredictor) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            head: "linear".into(),
            feature_dim: p.params().len(),
            seed: 0,
            meta: CheckpointMeta::Linear {
                map: p.map().clone(),
                link: p.link(),
            },
            params: p.params().to_vec(),
        }
    }

    pub fn from_head(p: &HeadPredictor) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            head: p.kind.name().into(),
            feature_dim: p.features().output_dim() + 1,
            seed: p.features().seed(),
            meta: CheckpointMeta::Head {
                kind: p.kind,
                features: p.features().clone(),
                scaler: p.scaler().clone(),
            },
            params: p.params().to_vec(),
        }
    }

    fn check_version(&self) -> Result<(), RegressionError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(RegressionError::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        Ok(())
    }

    pub fn to_linear(&self) -> Result<LinearPredictor, RegressionError> {
        self.check_version()?;
        match &self.meta {
            CheckpointMeta::Linear { map, link } => {
                LinearPredictor::with_weights(map.clone(), *link, self.params.clone())
            }
            _ => Err(RegressionError::Checkpoint(format!(
                "{} is not a linear checkpoint",
                self.head
            ))),
        }
    }

    pub fn to_head(&self) -> Result<HeadPredictor, RegressionError> {
        self.check_version()?;
        match &self.meta {
            CheckpointMeta::Head { kind, features, scaler } => {
                let mut features = features.clone();
                features.rehydrate();
                HeadPredictor::new(*kind, features, scaler.clone())?.from_params(self.params.clone())
            }
            _ => Err(RegressionError::Checkpoint(format!(
                "{} is not a head checkpoint",
                self.head
            ))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, RegressionError> {
        let c: Self = serde_json::from_str(s).map_err(|e| RegressionError::Checkpoint(e.to_string()))?;
        c.check_version()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), RegressionError> {
        std::fs::write(path, self.to_json()).map_err(|e| RegressionError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RegressionError> {
        let s = std::fs::read_to_string(path).map_err(|e| RegressionError::Checkpoint(e.to_string()))?;
        Self::from_json(&s)
    }
}
