use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Ordered observations `(x_i, y_i)` with `x_i ∈ R^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    objects: Matrix,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(objects: Matrix, labels: Vec<f64>) -> Result<Self> {
        if objects.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: objects.rows(),
                got: labels.len(),
            });
        }
        if let Some(pos) = labels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { objects, labels })
    }

    pub fn from_rows<R: AsRef<[f64]>>(objects: &[R], labels: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_rows(objects)?, labels.to_vec())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of attributes `p`.
    pub fn dim(&self) -> usize {
        self.objects.cols()
    }

    pub fn objects(&self) -> &Matrix {
        &self.objects
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn object(&self, i: usize) -> &[f64] {
        self.objects.row(i)
    }

    /// The first `len` observations.
    pub fn head(&self, len: usize) -> Result<Dataset> {
        if len == 0 || len > self.len() {
            return Err(Error::InvalidInput(format!(
                "prefix length {len} outside 1..={}",
                self.len()
            )));
        }
        let p = self.dim();
        Dataset::new(
            Matrix::new(len, p, self.objects.as_slice()[..len * p].to_vec())?,
            self.labels[..len].to_vec(),
        )
    }

    /// A copy with `(x, y)` appended.
    pub fn with_observation(&self, x: &[f64], y: f64) -> Result<Dataset> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut data = Vec::with_capacity((self.len() + 1) * self.dim());
        data.extend_from_slice(self.objects.as_slice());
        data.extend_from_slice(x);
        let mut labels = Vec::with_capacity(self.len() + 1);
        labels.extend_from_slice(&self.labels);
        labels.push(y);
        Dataset::new(Matrix::new(self.len() + 1, self.dim(), data)?, labels)
    }

    /// Splits off the last observation as a test point.
    pub fn split_last(&self) -> Result<(Dataset, Vec<f64>, f64)> {
        let n = self.len();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        Ok((self.head(n - 1)?, self.object(n - 1).to_vec(), self.labels[n - 1]))
    }

    /// Same objects, labels negated.
    pub fn negated(&self) -> Dataset {
        Dataset {
            objects: self.objects.clone(),
            labels: self.labels.iter().map(|y| -y).collect(),
        }
    }

    /// Same objects, labels shifted by `c`.
    pub fn shifted(&self, c: f64) -> Dataset {
        Dataset {
            objects: self.objects.clone(),
            labels: self.labels.iter().map(|y| y + c).collect(),
        }
    }
}

/// Ridge parameter `a ≥ 0`, noise scale `σ > 0` and significance `ε ∈ (0,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeConfig {
    pub a: f64,
    pub sigma: f64,
    pub epsilon: f64,
}

impl RidgeConfig {
    pub fn new(a: f64, sigma: f64, epsilon: f64) -> Result<Self> {
        let cfg = Self { a, sigma, epsilon };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::domain("a", self.a, "[0, inf)"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain("sigma", self.sigma, "(0, inf)"));
        }
        check_epsilon(self.epsilon)
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("epsilon", epsilon, "(0, 1)"))
    }
}
