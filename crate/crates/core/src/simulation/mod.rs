//! Seeded Monte Carlo experiments under the generative model
//! `y_i = w · x_i + ξ_i` with IID objects, `w` independent of the objects and
//! `ξ_i ~ N(0, σ²)`.
//!
//! Randomness comes from ChaCha8 keyed by the experiment seed; trial `t`
//! reads stream `t` of that key, so trials are independent, can run on any
//! number of workers and still reproduce bit for bit. Gaussian draws use the
//! ziggurat sampler of `rand_distr`.

mod experiment;
mod stats;

pub use experiment::{
    coverage_experiment, endpoint_diff_experiment, Check, CoverageSummary, CoverageTrial, EndpointSummary,
    EndpointTrial, ExperimentConfig, ExperimentKind, ExperimentReport, RateEstimate, SideSummary, TrialData,
};
pub use stats::{kolmogorov_survival, ks_statistic, ks_two_sample, summarize, KsResult, Summary};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{quadform_identity, Matrix};

/// Distribution of the objects `x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", content = "mean", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ObjectLaw {
    /// `N(0, I_p)`.
    StandardGaussian,
    /// Uniform on `[0, 1]^p`.
    UniformCube,
    /// The constant object `1`; only `p = 1` keeps the second-moment matrix nonsingular.
    ConstantOne,
    /// `N(μ, I_p)`.
    GaussianWithMean(Vec<f64>),
}

impl ObjectLaw {
    /// `μ = E x`.
    pub fn mean(&self, p: usize) -> Vec<f64> {
        match self {
            Self::StandardGaussian => vec![0.0; p],
            Self::UniformCube => vec![0.5; p],
            Self::ConstantOne => vec![1.0; p],
            Self::GaussianWithMean(mu) => mu.clone(),
        }
    }

    /// Covariance matrix `C` of `x`.
    pub fn covariance(&self, p: usize) -> Matrix {
        match self {
            Self::StandardGaussian | Self::GaussianWithMean(_) => Matrix::identity(p),
            Self::UniformCube => {
                let mut c = Matrix::zeros(p, p);
                c.add_diagonal(1.0 / 12.0);
                c
            }
            Self::ConstantOne => Matrix::zeros(p, p),
        }
    }

    /// `m = μ'Σ⁻¹μ` with `Σ = C + μμ'`.
    pub fn quadform(&self, p: usize) -> Result<f64> {
        quadform_identity(&self.mean(p), &self.covariance(p))
    }

    fn sample_into<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Self::StandardGaussian => out.iter_mut().for_each(|v| *v = StandardNormal.sample(rng)),
            Self::UniformCube => out.iter_mut().for_each(|v| *v = rng.random::<f64>()),
            Self::ConstantOne => out.fill(1.0),
            Self::GaussianWithMean(mu) => {
                for (v, m) in out.iter_mut().zip(mu) {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = m + z;
                }
            }
        }
    }
}

/// Distribution of the weight vector `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WeightLaw {
    Fixed(Vec<f64>),
    /// `N(0, (σ²/a) I)`, drawn once per trial.
    GaussianPrior {
        a: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeSpec {
    pub p: usize,
    pub object_law: ObjectLaw,
    pub weight_law: WeightLaw,
    pub sigma: f64,
    pub seed: u64,
}

impl GenerativeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidInput("dimension p must be at least 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain("sigma", self.sigma, "(0, inf)"));
        }
        match &self.object_law {
            ObjectLaw::ConstantOne if self.p != 1 => {
                return Err(Error::InvalidInput(
                    "constant objects need p = 1 for a nonsingular second-moment matrix".into(),
                ))
            }
            ObjectLaw::GaussianWithMean(mu) if mu.len() != self.p => {
                return Err(Error::DimensionMismatch {
                    expected: self.p,
                    got: mu.len(),
                })
            }
            ObjectLaw::GaussianWithMean(mu) if mu.iter().any(|m| !m.is_finite()) => {
                return Err(Error::InvalidInput("object mean must be finite".into()))
            }
            _ => {}
        }
        match &self.weight_law {
            WeightLaw::Fixed(w) if w.len() != self.p => Err(Error::DimensionMismatch {
                expected: self.p,
                got: w.len(),
            }),
            WeightLaw::Fixed(w) if w.iter().any(|v| !v.is_finite()) => {
                Err(Error::InvalidInput("weights must be finite".into()))
            }
            WeightLaw::GaussianPrior { a } if !(*a > 0.0 && a.is_finite()) => {
                Err(Error::domain("prior a", *a, "(0, inf)"))
            }
            _ => Ok(()),
        }
    }

    /// `μ'Σ⁻¹μ` of the object law.
    pub fn quadform(&self) -> Result<f64> {
        self.object_law.quadform(self.p)
    }

    /// Generator for trial `trial`: stream `trial` of the seeded key.
    pub(crate) fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }

    /// Draws `w`, then `(x_i, ξ_i)` for `i = 1..=n` in order.
    pub(crate) fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        let p = self.p;
        let w: Vec<f64> = match &self.weight_law {
            WeightLaw::Fixed(w) => w.clone(),
            WeightLaw::GaussianPrior { a } => {
                let sd = self.sigma / a.sqrt();
                (0..p)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        sd * z
                    })
                    .collect()
            }
        };
        let mut objects = vec![0.0; n * p];
        let mut labels = Vec::with_capacity(n);
        for x in objects.chunks_exact_mut(p) {
            self.object_law.sample_into(rng, x);
            let noise: f64 = StandardNormal.sample(rng);
            labels.push(crate::linalg::dot(&w, x) + self.sigma * noise);
        }
        Dataset::new(Matrix::new(n, p, objects)?, labels)
    }
}

/// `n` observations from stream 0 of the spec's seed.
pub fn generate_dataset(spec: &GenerativeSpec, n: usize) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    spec.sample(n, &mut spec.trial_rng(0))
}
