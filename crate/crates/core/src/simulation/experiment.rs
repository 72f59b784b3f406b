use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{ks_statistic, ks_two_sample, summarize, KsResult, Summary};
use super::{GenerativeSpec, WeightLaw};
use crate::asymptotics::{normal_cdf, theorem1_variance, TheoremVarianceSpec};
use crate::bayes::brr_predict;
use crate::conformal::{conformity_scores, ray_thresholds, RayPredictionSet};
use crate::dataset::{check_epsilon, RidgeConfig};
use crate::error::{Error, Result};

/// Run parameters shared by both experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Observations per trial, the last one being the test observation.
    pub n: usize,
    pub a: f64,
    pub epsilon: f64,
    pub trials: usize,
    /// Also evaluate the smoothed conformal predictor (coverage experiment).
    pub smoothed: bool,
    /// Relative tolerance on the empirical std (endpoint experiment).
    pub std_tolerance: f64,
}

impl ExperimentConfig {
    pub fn new(n: usize, a: f64, epsilon: f64, trials: usize) -> Self {
        Self {
            n,
            a,
            epsilon,
            trials,
            smoothed: true,
            std_tolerance: 0.10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidInput("n must be at least 2".into()));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::domain("a", self.a, "[0, inf)"));
        }
        if !(self.std_tolerance > 0.0) {
            return Err(Error::domain("std_tolerance", self.std_tolerance, "(0, inf)"));
        }
        check_epsilon(self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Coverage,
    Theorem1,
}

/// A named pass/fail flag with the compared quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: String,
}

impl Check {
    fn new(name: &str, passed: bool, value: f64, bound: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            value,
            bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageTrial {
    /// `None` when the predictor failed on this trial.
    pub crr_covered: Option<bool>,
    pub smoothed_covered: Option<bool>,
    pub brr_covered: Option<bool>,
    /// `None` for infinite or missing widths.
    pub crr_width: Option<f64>,
    pub brr_width: Option<f64>,
    /// CRR membership decided pointwise because the analytic route refused.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointTrial {
    /// `√n (B* − C*)`; `None` for excluded trials.
    pub upper: Option<f64>,
    /// `√n (B_* − C_*)`.
    pub lower: Option<f64>,
    pub irregular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "records", rename_all = "snake_case")]
pub enum TrialData {
    Coverage(Vec<CoverageTrial>),
    Endpoint(Vec<EndpointTrial>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub hits: usize,
    pub trials: usize,
    pub rate: f64,
}

impl RateEstimate {
    fn from_flags(flags: impl Iterator<Item = Option<bool>>) -> Self {
        let (hits, trials) = flags.flatten().fold((0, 0), |(h, t), f| (h + usize::from(f), t + 1));
        Self {
            hits,
            trials,
            rate: if trials == 0 {
                f64::NAN
            } else {
                hits as f64 / trials as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    /// Nominal coverage `1 − ε`.
    pub target: f64,
    /// `√(ε(1−ε)/trials)`.
    pub binomial_se: f64,
    pub crr: RateEstimate,
    pub smoothed: Option<RateEstimate>,
    pub brr: RateEstimate,
    pub errors: usize,
    pub fallbacks: usize,
    /// Trials where the CRR interval was the whole line.
    pub full_line: usize,
    /// Mean width over trials with finite CRR intervals.
    pub mean_crr_width: Option<f64>,
    pub mean_brr_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideSummary {
    pub moments: Summary,
    /// KS against the limiting `N(0, target_variance)`.
    pub ks: KsResult,
    /// `|std / target_std − 1|`.
    pub std_relative_error: f64,
    /// `3 · std / √count`.
    pub mean_band: f64,
    /// Predicted finite-sample size of the mean, `|z_{ε/2}| v / (2σ√n)`;
    /// the CRR endpoint sits this much further out on average.
    pub mean_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSummary {
    /// `μ'Σ⁻¹μ` of the object law.
    pub quadform: f64,
    pub target_variance: f64,
    pub target_std: f64,
    pub included: usize,
    pub excluded_irregular: usize,
    pub excluded_uninformative: usize,
    pub upper: SideSummary,
    pub lower: SideSummary,
    /// Two-sample KS between the upper and lower statistics.
    pub upper_vs_lower: KsResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub spec: GenerativeSpec,
    pub config: ExperimentConfig,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<EndpointSummary>,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<TrialData>,
}

impl ExperimentReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Pretty JSON; per-trial records only when `include_trials` is set.
    pub fn to_json(&self, include_trials: bool) -> String {
        let json = if include_trials {
            serde_json::to_string_pretty(self)
        } else {
            let mut slim = self.clone();
            slim.trials = None;
            serde_json::to_string_pretty(&slim)
        };
        json.expect("report serializes")
    }

    pub fn csv_header(&self) -> &'static str {
        match self.experiment {
            ExperimentKind::Coverage => {
                "experiment,seed,n,a,epsilon,trials,crr_coverage,smoothed_coverage,brr_coverage,binomial_se,errors,fallbacks,passed"
            }
            ExperimentKind::Theorem1 => {
                "experiment,seed,n,a,epsilon,trials,included,target_std,upper_mean,upper_std,upper_ks_p,lower_mean,lower_std,lower_ks_p,passed"
            }
        }
    }

    /// One-line CSV summary matching [`Self::csv_header`].
    pub fn csv_line(&self) -> String {
        let c = &self.config;
        let head = format!(
            "{},{},{},{},{},{}",
            match self.experiment {
                ExperimentKind::Coverage => "coverage",
                ExperimentKind::Theorem1 => "theorem1",
            },
            self.seed,
            c.n,
            c.a,
            c.epsilon,
            c.trials
        );
        match (&self.coverage, &self.endpoint) {
            (Some(cov), _) => format!(
                "{head},{},{},{},{},{},{},{}",
                cov.crr.rate,
                cov.smoothed.map(|s| s.rate.to_string()).unwrap_or_default(),
                cov.brr.rate,
                cov.binomial_se,
                cov.errors,
                cov.fallbacks,
                self.passed
            ),
            (_, Some(e)) => format!(
                "{head},{},{},{},{},{},{},{},{},{}",
                e.included,
                e.target_std,
                e.upper.moments.mean,
                e.upper.moments.std,
                e.upper.ks.p_value,
                e.lower.moments.mean,
                e.lower.moments.std,
                e.lower.ks.p_value,
                self.passed
            ),
            _ => head,
        }
    }
}

fn run_trials<T: Send, F>(trials: usize, f: F) -> Vec<T>
where
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}

fn coverage_trial(spec: &GenerativeSpec, cfg: &ExperimentConfig, trial: u64) -> CoverageTrial {
    let mut rng = spec.trial_rng(trial);
    let mut out = CoverageTrial {
        crr_covered: None,
        smoothed_covered: None,
        brr_covered: None,
        crr_width: None,
        brr_width: None,
        fallback: false,
    };
    let Ok(data) = spec.sample(cfg.n, &mut rng) else {
        return out;
    };
    let Ok((train, x, y)) = data.split_last() else {
        return out;
    };
    let finite = |w: f64| w.is_finite().then_some(w);

    if let Ok(iv) = RidgeConfig::new(cfg.a, spec.sigma, cfg.epsilon).and_then(|rc| brr_predict(&train, &x, &rc)) {
        out.brr_covered = Some(iv.contains(y));
        out.brr_width = finite(iv.width());
    }

    let scores = conformity_scores(&data, cfg.a);
    match ray_thresholds(&train, &x, cfg.a).and_then(|t| t.interval(cfg.epsilon)) {
        Ok(iv) => {
            out.crr_covered = Some(iv.contains(y));
            out.crr_width = Some(iv.width()).and_then(finite);
        }
        Err(Error::IrregularConfiguration { .. }) => {
            if let Ok(s) = &scores {
                out.crr_covered = Some(s.pvalue(cfg.n - 1) > cfg.epsilon);
                out.fallback = true;
            }
        }
        Err(_) => {}
    }

    if cfg.smoothed {
        let tau: f64 = rng.random();
        if let Ok(s) = &scores {
            out.smoothed_covered = Some(s.smoothed_pvalue(cfg.n - 1, tau) > cfg.epsilon);
        }
    }
    out
}

/// Empirical coverage of CRR (conservative and smoothed) and BRR.
pub fn coverage_experiment(spec: &GenerativeSpec, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    spec.validate()?;
    cfg.validate()?;
    let records = run_trials(cfg.trials, |t| coverage_trial(spec, cfg, t));

    let eps = cfg.epsilon;
    let target = 1.0 - eps;
    let binomial_se = (eps * (1.0 - eps) / cfg.trials as f64).sqrt();
    let crr = RateEstimate::from_flags(records.iter().map(|r| r.crr_covered));
    let brr = RateEstimate::from_flags(records.iter().map(|r| r.brr_covered));
    let smoothed = cfg
        .smoothed
        .then(|| RateEstimate::from_flags(records.iter().map(|r| r.smoothed_covered)));
    let mean_of = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let summary = CoverageSummary {
        target,
        binomial_se,
        crr,
        smoothed,
        brr,
        errors: records.iter().filter(|r| r.crr_covered.is_none()).count(),
        fallbacks: records.iter().filter(|r| r.fallback).count(),
        full_line: records
            .iter()
            .filter(|r| r.crr_covered.is_some() && !r.fallback && r.crr_width.is_none())
            .count(),
        mean_crr_width: mean_of(records.iter().filter_map(|r| r.crr_width).collect()),
        mean_brr_width: mean_of(records.iter().filter_map(|r| r.brr_width).collect()),
    };

    let band = 3.0 * binomial_se;
    let mut checks = vec![Check::new(
        "crr_coverage_at_least_nominal",
        crr.trials > 0 && crr.rate >= target - band,
        crr.rate,
        format!(">= {}", target - band),
    )];
    if let Some(s) = smoothed {
        checks.push(Check::new(
            "smoothed_coverage_exact",
            s.trials > 0 && (s.rate - target).abs() <= band,
            s.rate,
            format!("{} +/- {}", target, band),
        ));
    }
    // BRR is exact only when the data follow its own prior.
    if matches!(spec.weight_law, WeightLaw::GaussianPrior { a } if a == cfg.a) {
        checks.push(Check::new(
            "brr_coverage_exact",
            brr.trials > 0 && (brr.rate - target).abs() <= band,
            brr.rate,
            format!("{} +/- {}", target, band),
        ));
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(ExperimentReport {
        experiment: ExperimentKind::Coverage,
        spec: spec.clone(),
        config: *cfg,
        seed: spec.seed,
        coverage: Some(summary),
        endpoint: None,
        checks,
        passed,
        trials: Some(TrialData::Coverage(records)),
    })
}

fn endpoint_trial(spec: &GenerativeSpec, cfg: &ExperimentConfig, trial: u64) -> EndpointTrial {
    let mut out = EndpointTrial {
        upper: None,
        lower: None,
        irregular: false,
    };
    let mut rng = spec.trial_rng(trial);
    let Ok(data) = spec.sample(cfg.n, &mut rng) else {
        return out;
    };
    let Ok((train, x, _)) = data.split_last() else {
        return out;
    };
    let Ok(brr) = RidgeConfig::new(cfg.a, spec.sigma, cfg.epsilon).and_then(|rc| brr_predict(&train, &x, &rc)) else {
        return out;
    };
    let thresholds = match ray_thresholds(&train, &x, cfg.a) {
        Ok(t) => t,
        Err(Error::IrregularConfiguration { .. }) => {
            out.irregular = true;
            return out;
        }
        Err(_) => return out,
    };
    let half = cfg.epsilon / 2.0;
    let scale = (cfg.n as f64).sqrt();
    if let Ok(RayPredictionSet::BoundedAbove(c_upper)) = thresholds.upper_ray(half) {
        out.upper = Some(scale * (brr.upper - c_upper));
    }
    if let Ok(RayPredictionSet::BoundedBelow(c_lower)) = thresholds.lower_ray(half) {
        out.lower = Some(scale * (brr.lower - c_lower));
    }
    out
}

fn side_summary(samples: &[f64], target_std: f64, mean_offset: f64) -> Result<SideSummary> {
    let moments = summarize(samples)?;
    let ks = ks_statistic(samples, |v| normal_cdf(v, target_std).unwrap_or(f64::NAN))?;
    Ok(SideSummary {
        moments,
        ks,
        std_relative_error: (moments.std / target_std - 1.0).abs(),
        mean_band: 3.0 * moments.std / (moments.count as f64).sqrt(),
        mean_offset,
    })
}

/// Distribution of `√n (B* − C*)` and `√n (B_* − C_*)` against the
/// limiting normal law.
pub fn endpoint_diff_experiment(spec: &GenerativeSpec, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    spec.validate()?;
    cfg.validate()?;
    let quadform = spec.quadform()?;
    let target = theorem1_variance(&TheoremVarianceSpec::new(cfg.epsilon, spec.sigma, quadform)?)?;
    let records = run_trials(cfg.trials, |t| endpoint_trial(spec, cfg, t));

    let upper: Vec<f64> = records.iter().filter_map(|r| r.upper).collect();
    let lower: Vec<f64> = records.iter().filter_map(|r| r.lower).collect();
    let excluded_irregular = records.iter().filter(|r| r.irregular).count();
    let excluded_uninformative = records
        .iter()
        .filter(|r| !r.irregular && (r.upper.is_none() || r.lower.is_none()))
        .count();
    let mean_offset = crate::asymptotics::normal_quantile(cfg.epsilon / 2.0)? * target.variance
        / (2.0 * spec.sigma * (cfg.n as f64).sqrt());
    let upper_side = side_summary(&upper, target.std, mean_offset)?;
    let lower_side = side_summary(&lower, target.std, mean_offset)?;
    let upper_vs_lower = ks_two_sample(&upper, &lower)?;

    let tol = cfg.std_tolerance;
    let mut checks = Vec::new();
    for (label, side) in [("upper", &upper_side), ("lower", &lower_side)] {
        checks.push(Check::new(
            &format!("{label}_mean_near_zero"),
            side.moments.mean.abs() <= side.mean_band + side.mean_offset,
            side.moments.mean,
            format!("|mean| <= {} + {}", side.mean_band, side.mean_offset),
        ));
        checks.push(Check::new(
            &format!("{label}_std_matches_limit"),
            side.std_relative_error <= tol,
            side.moments.std,
            format!("{} within {}%", target.std, tol * 100.0),
        ));
        checks.push(Check::new(
            &format!("{label}_ks_against_limit"),
            side.ks.p_value > 0.001,
            side.ks.p_value,
            "> 0.001".into(),
        ));
    }
    checks.push(Check::new(
        "upper_lower_same_law",
        upper_vs_lower.p_value > 0.01,
        upper_vs_lower.p_value,
        "> 0.01".into(),
    ));
    let passed = checks.iter().all(|c| c.passed);
    Ok(ExperimentReport {
        experiment: ExperimentKind::Theorem1,
        spec: spec.clone(),
        config: *cfg,
        seed: spec.seed,
        coverage: None,
        endpoint: Some(EndpointSummary {
            quadform,
            target_variance: target.variance,
            target_std: target.std,
            included: upper.len().min(lower.len()),
            excluded_irregular,
            excluded_uninformative,
            upper: upper_side,
            lower: lower_side,
            upper_vs_lower,
        }),
        checks,
        passed,
        trials: Some(TrialData::Endpoint(records)),
    })
}
