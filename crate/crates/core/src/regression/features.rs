//! Feature maps from contexts (and actions) to real vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::RegressionError;

pub const DEFAULT_RFF_DIM: usize = 256;
pub const DEFAULT_BANDWIDTH: f64 = 1.0;

/// Random Fourier features for the product Cauchy kernel
/// `k(x, y) = prod_i 1 / (1 + ((x_i - y_i) / bandwidth)^2)`.
///
/// The spectral density of that kernel is a product of Laplace
/// distributions with scale `1 / bandwidth`. Each of the `dim` frequencies
/// contributes a cosine and a sine coordinate, so the output has length
/// `2 * dim` and unit norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyFeatures {
    input_dim: usize,
    dim: usize,
    bandwidth: f64,
    seed: u64,
    #[serde(skip)]
    freqs: Vec<f64>,
}

impl CauchyFeatures {
    pub fn new(input_dim: usize, dim: usize, bandwidth: f64, seed: u64) -> Result<Self, RegressionError> {
        if dim == 0 {
            return Err(RegressionError::InvalidConfig(
                "random feature dim must be positive".into(),
            ));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(RegressionError::InvalidConfig(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        let mut me = Self {
            input_dim,
            dim,
            bandwidth,
            seed,
            freqs: Vec::new(),
        };
        me.draw();
        Ok(me)
    }

    fn draw(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let scale = 1.0 / self.bandwidth;
        self.freqs = (0..self.dim * self.input_dim)
            .map(|_| {
                let e: f64 = rng.sample(Exp1);
                if rng.random::<bool>() {
                    scale * e
                } else {
                    -scale * e
                }
            })
            .collect();
    }

    /// Re-derive the frequencies after deserialization.
    pub fn rehydrate(&mut self) {
        if self.freqs.len() != self.dim * self.input_dim {
            self.draw();
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        2 * self.dim
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn map_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), RegressionError> {
        if x.len() != self.input_dim {
            return Err(RegressionError::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        debug_assert_eq!(out.len(), 2 * self.dim);
        let norm = (1.0 / self.dim as f64).sqrt();
        for j in 0..self.dim {
            let w = &self.freqs[j * self.input_dim..(j + 1) * self.input_dim];
            let arg: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            let (s, c) = arg.sin_cos();
            out[2 * j] = norm * c;
            out[2 * j + 1] = norm * s;
        }
        Ok(())
    }

    pub fn map(&self, x: &[f64]) -> Result<Vec<f64>, RegressionError> {
        let mut out = vec![0.0; 2 * self.dim];
        self.map_into(x, &mut out)?;
        Ok(out)
    }
}

/// One-shot form: draw the frequencies from `seed` and map `x`.
pub fn cauchy_random_features(x: &[f64], dim: usize, bandwidth: f64, seed: u64) -> Result<Vec<f64>, RegressionError> {
    CauchyFeatures::new(x.len(), dim, bandwidth, seed)?.map(x)
}

/// Per-coordinate min-max scaling to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl MinMaxScaler {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn fit<'a, I>(rows: I, dim: usize) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for r in rows {
            for (i, &v) in r.iter().enumerate().take(dim) {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        for i in 0..dim {
            if !lo[i].is_finite() {
                lo[i] = 0.0;
                hi[i] = 1.0;
            }
        }
        Self::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn transform_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.lo.len() {
            let span = self.hi[i] - self.lo[i];
            out[i] = if span > 0.0 { (x[i] - self.lo[i]) / span } else { 0.0 };
        }
    }
}

/// Joint feature map over (context, discrete action).
pub trait FeatureMap {
    fn context_dim(&self) -> usize;
    fn dim(&self) -> usize;
    fn features_into(&self, x: &[f64], action: usize, out: &mut [f64]) -> Result<(), RegressionError>;
}

/// `e_action ⊗ [x, 1]`: an independent affine model per action slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossedActions {
    pub context_dim: usize,
    pub max_actions: usize,
}

impl FeatureMap for CrossedActions {
    fn context_dim(&self) -> usize {
        self.context_dim
    }

    fn dim(&self) -> usize {
        (self.context_dim + 1) * self.max_actions
    }

    fn features_into(&self, x: &[f64], action: usize, out: &mut [f64]) -> Result<(), RegressionError> {
        if x.len() != self.context_dim {
            return Err(RegressionError::DimensionMismatch {
                expected: self.context_dim,
                actual: x.len(),
            });
        }
        if action >= self.max_actions {
            return Err(RegressionError::ActionOutOfRange {
                action,
                max: self.max_actions,
            });
        }
        out.fill(0.0);
        let block = self.context_dim + 1;
        let base = action * block;
        out[base..base + self.context_dim].copy_from_slice(x);
        out[base + self.context_dim] = 1.0;
        Ok(())
    }
}
