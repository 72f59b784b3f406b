//! Bayesian ridge regression under the Gaussian prior `w ~ N(0, (σ²/a) I)`
//! with `N(0, σ²)` noise. The model has no intercept; append a constant
//! attribute to the objects to get one (it is then shrunk like any weight).

use serde::{Deserialize, Serialize};

use crate::asymptotics::normal_quantile;
use crate::dataset::{Dataset, RidgeConfig};
use crate::error::{Error, Result};
use crate::linalg::leverage_profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Brr,
    Crr,
    UpperCrr,
    LowerCrr,
}

/// Closed interval `[lower, upper]`; endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
    pub method: Method,
}

impl PredictionInterval {
    pub fn new(lower: f64, upper: f64, epsilon: f64, method: Method) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::InvalidInput(format!(
                "interval endpoints out of order: [{lower}, {upper}]"
            )));
        }
        crate::dataset::check_epsilon(epsilon)?;
        Ok(Self {
            lower,
            upper,
            epsilon,
            method,
        })
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_full_line(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Predictive distribution `N(ŷ_n, (1 + g_n) σ²)` of the test label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveNormal {
    pub mean: f64,
    pub variance: f64,
}

pub fn brr_conditional_density_params(train: &Dataset, x_test: &[f64], cfg: &RidgeConfig) -> Result<PredictiveNormal> {
    cfg.validate()?;
    let lp = leverage_profile(train.objects(), train.labels(), x_test, cfg.a)?;
    Ok(PredictiveNormal {
        mean: lp.prediction,
        variance: (1.0 + lp.test_leverage) * cfg.sigma * cfg.sigma,
    })
}

/// `ŷ_n ∓ √(1 + g_n) σ z_{ε/2}`.
pub fn brr_predict(train: &Dataset, x_test: &[f64], cfg: &RidgeConfig) -> Result<PredictionInterval> {
    let params = brr_conditional_density_params(train, x_test, cfg)?;
    interval_from_params(params, cfg.epsilon)
}

pub(crate) fn interval_from_params(params: PredictiveNormal, epsilon: f64) -> Result<PredictionInterval> {
    let half = params.variance.sqrt() * normal_quantile(epsilon / 2.0)?;
    PredictionInterval::new(params.mean - half, params.mean + half, epsilon, Method::Brr)
}
