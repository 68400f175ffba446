//! Running mean/std normalization for observations and goals.

use serde::{Deserialize, Serialize};

/// Accumulates count/sum/sum-of-squares per dimension; `normalize` is a pure
/// function of the frozen statistics at call time. Before any update it is
/// the identity (mean 0, std 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    count: f64,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    /// Normalized values are clamped to `[-clip, clip]`.
    pub clip: f64,
    /// Variance floor keeping the std strictly positive.
    pub var_floor: f64,
}

impl Normalizer {
    pub fn new(dim: usize, clip: f64) -> Self {
        Normalizer {
            count: 0.0,
            sum: vec![0.0; dim],
            sumsq: vec![0.0; dim],
            clip,
            var_floor: 1e-4,
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.count += 1.0;
        for ((s, sq), v) in self.sum.iter_mut().zip(&mut self.sumsq).zip(x) {
            *s += v;
            *sq += v * v;
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        if self.count == 0.0 {
            0.0
        } else {
            self.sum[i] / self.count
        }
    }

    pub fn std(&self, i: usize) -> f64 {
        if self.count == 0.0 {
            return 1.0;
        }
        let mean = self.sum[i] / self.count;
        let var = (self.sumsq[i] / self.count - mean * mean).max(self.var_floor);
        var.sqrt()
    }

    /// `clamp((x - mean) / std, ±clip)` per dimension.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        x.iter()
            .enumerate()
            .map(|(i, v)| ((v - self.mean(i)) / self.std(i)).clamp(-self.clip, self.clip))
            .collect()
    }
}
