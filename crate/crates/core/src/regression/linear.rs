use serde::{Deserialize, Serialize};

use super::{CrossedActions, FeatureMap, Predictor, RegressionError};

/// Output link of a linear model: `offset + w . phi`, clamped on prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub offset: f64,
}

impl Default for Link {
    /// Centered at 1/2 so that zero weights sit in the middle of the range.
    fn default() -> Self {
        Self { offset: 0.5 }
    }
}

/// Linear model over a crossed (context, action-slot) feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    map: CrossedActions,
    link: Link,
    weights: Vec<f64>,
}

impl LinearPredictor {
    pub fn new(map: CrossedActions, link: Link) -> Self {
        let d = map.dim();
        Self {
            map,
            link,
            weights: vec![0.0; d],
        }
    }

    pub fn with_weights(map: CrossedActions, link: Link, weights: Vec<f64>) -> Result<Self, RegressionError> {
        if weights.len() != map.dim() {
            return Err(RegressionError::DimensionMismatch {
                expected: map.dim(),
                actual: weights.len(),
            });
        }
        Ok(Self { map, link, weights })
    }

    pub fn map(&self) -> &CrossedActions {
        &self.map
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Predictions for actions `0..n`, clamped.
    pub fn predict_all(&self, x: &[f64], n: usize) -> Result<Vec<f64>, RegressionError> {
        (0..n).map(|a| self.predict(x, a)).collect()
    }

    fn check(&self, x: &[f64], a: usize) -> Result<(), RegressionError> {
        if x.len() != self.map.context_dim {
            return Err(RegressionError::DimensionMismatch {
                expected: self.map.context_dim,
                actual: x.len(),
            });
        }
        if a >= self.map.max_actions {
            return Err(RegressionError::ActionOutOfRange {
                action: a,
                max: self.map.max_actions,
            });
        }
        Ok(())
    }
}

impl Predictor for LinearPredictor {
    type Action = usize;

    fn params(&self) -> &[f64] {
        &self.weights
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn raw(&self, x: &[f64], a: usize) -> Result<f64, RegressionError> {
        self.check(x, a)?;
        // only the action's block is nonzero
        let block = self.map.context_dim + 1;
        let w = &self.weights[a * block..(a + 1) * block];
        let dot: f64 = w[..block - 1].iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + w[block - 1];
        Ok(self.link.offset + dot)
    }

    fn raw_with_grad(&self, x: &[f64], a: usize) -> Result<(f64, Vec<f64>), RegressionError> {
        let mut phi = vec![0.0; self.map.dim()];
        self.map.features_into(x, a, &mut phi)?;
        let raw = self.link.offset + self.weights.iter().zip(&phi).map(|(w, f)| w * f).sum::<f64>();
        Ok((raw, phi))
    }
}
