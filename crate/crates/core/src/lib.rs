//! Prediction intervals for ridge regression: the Bayesian ridge interval
//! under a Gaussian prior and the conformalized ridge interval, which is
//! valid under exchangeability alone. Also included are calculators for the
//! asymptotic gap between the two and seeded Monte Carlo experiments that
//! check coverage and the limiting law of the endpoint differences.
//!
//! ```
//! use conformal_ridge::{brr_predict, crr_predict, Dataset, RidgeConfig};
//!
//! let rows: Vec<[f64; 1]> = (0..40).map(|i| [i as f64 / 10.0]).collect();
//! let labels: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] + (r[0] * 7.0).sin() * 0.1).collect();
//! let train = Dataset::from_rows(&rows, &labels).unwrap();
//!
//! let brr = brr_predict(&train, &[1.5], &RidgeConfig::new(1.0, 0.1, 0.1).unwrap()).unwrap();
//! let crr = crr_predict(&train, &[1.5], 1.0, 0.1).unwrap();
//! assert!(brr.contains(3.0) && crr.lower < crr.upper);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod bayes;
pub mod conformal;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod simulation;

pub use asymptotics::{
    curve_table, full_range_grid, mu_alpha, normal_cdf, normal_pdf, normal_quantile, small_epsilon_grid, std_asymptote,
    theorem1_variance, CurveRow, CurveTable, LimitVariance, TheoremVarianceSpec,
};
pub use bayes::{brr_conditional_density_params, brr_predict, Method, PredictionInterval, PredictiveNormal};
pub use conformal::{
    conformal_rank, conformity_scores, crr_predict, crr_predict_grid, crr_predict_with_fallback, crr_pvalue,
    hat_matrix_ab, lower_crr_predict, online_protocol, ray_thresholds, regularity_check, smoothed_pvalue,
    upper_crr_predict, ConformityScores, CrrPrediction, GridPredictionSet, HatDecomposition, OnlinePredictor,
    OnlineStep, RayPredictionSet, RayThresholds,
};
pub use dataset::{Dataset, RidgeConfig};
pub use error::{Error, Result};
pub use linalg::{leverage_profile, quadform_identity, ridge_solve, LeverageProfile, Matrix};
pub use simulation::{
    coverage_experiment, endpoint_diff_experiment, generate_dataset, ExperimentConfig, ExperimentReport,
    GenerativeSpec, ObjectLaw, WeightLaw,
};
