use serde::{Deserialize, Serialize};

/// Online optimizer choice for a [`super::Learner`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SolverKind {
    /// Online gradient descent with step `scale / sqrt(t)`.
    Ogd { scale: f64 },
    /// Online Newton step: `w -= A^{-1} g / gamma` with
    /// `A = epsilon I + sum g g^T`. Costs `O(d^2)` per step.
    Ons { gamma: f64, epsilon: f64 },
}

impl Default for SolverKind {
    fn default() -> Self {
        SolverKind::Ogd { scale: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct Solver {
    kind: SolverKind,
    t: u64,
    /// Inverse of `A`, row major; empty for OGD.
    a_inv: Vec<f64>,
    dim: usize,
}

impl Solver {
    pub fn new(kind: SolverKind, dim: usize) -> Self {
        let a_inv = match kind {
            SolverKind::Ogd { .. } => Vec::new(),
            SolverKind::Ons { epsilon, .. } => {
                let mut m = vec![0.0; dim * dim];
                for i in 0..dim {
                    m[i * dim + i] = 1.0 / epsilon;
                }
                m
            }
        };
        Self { kind, t: 0, a_inv, dim }
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        match self.kind {
            SolverKind::Ogd { scale } => {
                let eta = scale / (self.t as f64).sqrt();
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= eta * g;
                }
            }
            SolverKind::Ons { gamma, .. } => {
                let d = self.dim;
                // Sherman-Morrison: A^{-1} <- A^{-1} - (A^{-1} g)(A^{-1} g)^T / (1 + g^T A^{-1} g)
                let ag: Vec<f64> = self
                    .a_inv
                    .chunks(d)
                    .map(|row| row.iter().zip(grad).map(|(a, g)| a * g).sum())
                    .collect();
                let denom = 1.0 + grad.iter().zip(&ag).map(|(g, a)| g * a).sum::<f64>();
                for i in 0..d {
                    if ag[i] == 0.0 {
                        continue;
                    }
                    let s = ag[i] / denom;
                    let row = &mut self.a_inv[i * d..(i + 1) * d];
                    for (r, a) in row.iter_mut().zip(&ag) {
                        *r -= s * a;
                    }
                }
                for (p, row) in params.iter_mut().zip(self.a_inv.chunks(d)) {
                    let dir: f64 = row.iter().zip(grad).map(|(a, g)| a * g).sum();
                    *p -= dir / gamma;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ogd_step_size_decays() {
        let mut s = Solver::new(SolverKind::Ogd { scale: 1.0 }, 1);
        let mut p = [0.0];
        s.step(&mut p, &[1.0]);
        assert_eq!(p[0], -1.0);
        s.step(&mut p, &[1.0]);
        s.step(&mut p, &[1.0]);
        s.step(&mut p, &[1.0]);
        assert!((p[0] + 1.0 + 1.0 / 2f64.sqrt() + 1.0 / 3f64.sqrt() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn ons_inverse_tracks_direct_inverse() {
        // After steps g1=(1,0), g2=(1,1) with epsilon=1: A = I + g1g1' + g2g2' = [[3,1],[1,2]].
        let mut s = Solver::new(
            SolverKind::Ons {
                gamma: 1.0,
                epsilon: 1.0,
            },
            2,
        );
        let mut p = [0.0, 0.0];
        s.step(&mut p, &[1.0, 0.0]);
        s.step(&mut p, &[1.0, 1.0]);
        let det = 5.0;
        let expect = [2.0 / det, -1.0 / det, -1.0 / det, 3.0 / det];
        for (a, b) in s.a_inv.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
