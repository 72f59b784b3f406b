//! Conformalized ridge regression (CRR).
//!
//! The conformity score of observation `i` in a sequence of `n` is the rank
//! statistic
//!
//! ```text
//! α_i = |{j : r_j ≥ r_i}| ∧ |{j : r_j ≤ r_i}|
//! ```
//!
//! where `r` are the residuals of the ridge fit on the whole sequence. The
//! prediction set for a test object is `{y : p^y > ε}`.
//!
//! Two routes to the prediction set live here:
//!
//! * a pointwise route ([`crr_pvalue`], [`crr_predict_grid`]) that refits for
//!   every postulated label; slow, used as an oracle and as the fallback for
//!   irregular configurations;
//! * the analytic route ([`ray_thresholds`], [`upper_crr_predict`],
//!   [`lower_crr_predict`], [`crr_predict`]) built on the closed form
//!   `t_i = ŷ_n + (y_i − ŷ_i)(1 + g_n)/(1 + g_i)`. The upper one-sided
//!   predictor at level `δ` is the ray `(−∞, t_(k)]` with `k = ⌈(1−δ)n⌉`;
//!   CRR at level `ε` is the intersection of the upper and lower rays at `ε/2`.
//!
//! [`hat_matrix_ab`] forms the `n × n` hat matrix explicitly and is only
//! meant for cross-checking `t_i = (a_i − a_n)/(b_n − b_i)`.

use serde::{Deserialize, Serialize};

use crate::bayes::{Method, PredictionInterval};
use crate::dataset::{check_epsilon, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{dot, is_positive_definite, leverage_profile, ridge_gram, Cholesky, Matrix};

/// `1 + g_i` must exceed this for the analytic route.
const RAY_MARGIN: f64 = 1e-12;

/// Rank conformity scores `α_i ∈ {1, …, n}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformityScores {
    pub scores: Vec<usize>,
}

impl ConformityScores {
    /// Scores from a residual vector, ties counted on both sides.
    pub fn from_residuals(residuals: &[f64]) -> Self {
        let mut sorted = residuals.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let scores = residuals
            .iter()
            .map(|&r| {
                let at_most = sorted.partition_point(|&s| s <= r);
                let at_least = n - sorted.partition_point(|&s| s < r);
                at_most.min(at_least)
            })
            .collect();
        Self { scores }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// `|{i : α_i ≤ α_test}| / n`.
    pub fn pvalue(&self, test: usize) -> f64 {
        let at = self.scores[test];
        let count = self.scores.iter().filter(|&&s| s <= at).count();
        count as f64 / self.len() as f64
    }

    /// `(|{i : α_i < α_test}| + τ |{i : α_i = α_test}|) / n`.
    pub fn smoothed_pvalue(&self, test: usize, tau: f64) -> f64 {
        let at = self.scores[test];
        let (below, equal) = self.scores.iter().fold((0usize, 0usize), |(b, e), &s| {
            (b + usize::from(s < at), e + usize::from(s == at))
        });
        (below as f64 + tau * equal as f64) / self.len() as f64
    }
}

/// Residuals of the ridge fit on the whole sequence.
fn full_residuals(seq: &Dataset, a: f64) -> Result<Vec<f64>> {
    let lp = leverage_profile(seq.objects(), seq.labels(), &vec![0.0; seq.dim()], a)?;
    Ok(lp.residuals(seq.labels()))
}

pub fn conformity_scores(seq: &Dataset, a: f64) -> Result<ConformityScores> {
    Ok(ConformityScores::from_residuals(&full_residuals(seq, a)?))
}

/// Conservative p-value of the postulated label `y` for `x_test`.
pub fn crr_pvalue(train: &Dataset, x_test: &[f64], y: f64, a: f64) -> Result<f64> {
    let seq = train.with_observation(x_test, y)?;
    Ok(conformity_scores(&seq, a)?.pvalue(seq.len() - 1))
}

/// Smoothed p-value; `tau = 1` recovers [`crr_pvalue`].
pub fn smoothed_pvalue(train: &Dataset, x_test: &[f64], y: f64, a: f64, tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::domain("tau", tau, "[0, 1]"));
    }
    let seq = train.with_observation(x_test, y)?;
    Ok(conformity_scores(&seq, a)?.smoothed_pvalue(seq.len() - 1, tau))
}

/// Full-sequence ridge fit with the test label left free. Refits the weights
/// for each postulated label against one factorization.
struct PointwiseFit<'a> {
    train: &'a Dataset,
    x_test: &'a [f64],
    chol: Cholesky,
    train_moment: Vec<f64>,
}

impl<'a> PointwiseFit<'a> {
    fn new(train: &'a Dataset, x_test: &'a [f64], a: f64) -> Result<Self> {
        if x_test.len() != train.dim() {
            return Err(Error::DimensionMismatch {
                expected: train.dim(),
                got: x_test.len(),
            });
        }
        let mut gram = ridge_gram(train.objects(), a)?;
        gram.add_outer(x_test, 1.0)?;
        Ok(Self {
            train,
            x_test,
            chol: Cholesky::factor(&gram)?,
            train_moment: train.objects().transpose_mul_vec(train.labels())?,
        })
    }

    fn scores(&self, y: f64) -> Result<ConformityScores> {
        let rhs: Vec<f64> = self
            .train_moment
            .iter()
            .zip(self.x_test)
            .map(|(m, x)| m + y * x)
            .collect();
        let w = self.chol.solve(&rhs)?;
        let mut residuals: Vec<f64> = (0..self.train.len())
            .map(|i| self.train.labels()[i] - dot(self.train.object(i), &w))
            .collect();
        residuals.push(y - dot(self.x_test, &w));
        Ok(ConformityScores::from_residuals(&residuals))
    }
}

/// Membership of each grid point in `{y : p^y > ε}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPredictionSet {
    pub grid: Vec<f64>,
    pub member: Vec<bool>,
}

impl GridPredictionSet {
    /// Maximal runs of member grid points, as `(first, last)` pairs.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        for (i, &m) in self.member.iter().enumerate() {
            match (m, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    out.push((self.grid[s], self.grid[i - 1]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((self.grid[s], self.grid[self.grid.len() - 1]));
        }
        out
    }

    /// First and last member grid points.
    pub fn hull(&self) -> Option<(f64, f64)> {
        let first = self.member.iter().position(|&m| m)?;
        let last = self.member.iter().rposition(|&m| m)?;
        Some((self.grid[first], self.grid[last]))
    }

    pub fn is_single_run(&self) -> bool {
        self.intervals().len() == 1
    }
}

pub fn crr_predict_grid(
    train: &Dataset,
    x_test: &[f64],
    a: f64,
    epsilon: f64,
    grid: &[f64],
) -> Result<GridPredictionSet> {
    check_epsilon(epsilon)?;
    if grid.is_empty() {
        return Err(Error::InvalidInput("grid must be non-empty".into()));
    }
    if grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput(
            "grid must be finite and strictly increasing".into(),
        ));
    }
    let fit = PointwiseFit::new(train, x_test, a)?;
    let test = train.len();
    let member = grid
        .iter()
        .map(|&y| Ok(fit.scores(y)?.pvalue(test) > epsilon))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridPredictionSet {
        grid: grid.to_vec(),
        member,
    })
}

/// The vectors `A = (I − H_n)(y_1, …, y_{n−1}, 0)'` and `B = (I − H_n)(0, …, 0, 1)'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HatDecomposition {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl HatDecomposition {
    /// `t_i = (a_i − a_n)/(b_n − b_i)` for `i < n`.
    pub fn thresholds(&self) -> Vec<f64> {
        let n = self.a.len();
        (0..n - 1)
            .map(|i| (self.a[i] - self.a[n - 1]) / (self.b[n - 1] - self.b[i]))
            .collect()
    }
}

/// Explicit `O(n²p)` evaluation through the full hat matrix.
pub fn hat_matrix_ab(train: &Dataset, x_test: &[f64], a: f64) -> Result<HatDecomposition> {
    let full = train.with_observation(x_test, 0.0)?;
    let xn = full.objects();
    let n = full.len();
    let chol = Cholesky::factor(&ridge_gram(xn, a)?)?;
    // Columns of G⁻¹ X_n'.
    let solved: Vec<Vec<f64>> = (0..n).map(|j| chol.solve(xn.row(j))).collect::<Result<_>>()?;
    let mut hat = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            hat.set(i, j, dot(xn.row(i), &solved[j]));
        }
    }
    let labels = full.labels();
    let a_vec = (0..n)
        .map(|i| labels[i] - (0..n).map(|j| hat.get(i, j) * labels[j]).sum::<f64>())
        .collect();
    let b_vec = (0..n)
        .map(|i| f64::from(u8::from(i == n - 1)) - hat.get(i, n - 1))
        .collect();
    Ok(HatDecomposition { a: a_vec, b: b_vec })
}

/// `A` and `B` from the leverage profile of the training fit:
/// `b_n = 1 − g_n/(1+g_n)`, `b_i = −g_i/(1+g_n)`,
/// `a_i = y_i − ŷ_i + g_i ŷ_n/(1+g_n)`, `a_n = −ŷ_n/(1+g_n)`.
pub fn hat_matrix_ab_closed_form(train: &Dataset, x_test: &[f64], a: f64) -> Result<HatDecomposition> {
    let lp = leverage_profile(train.objects(), train.labels(), x_test, a)?;
    let denom = 1.0 + lp.test_leverage;
    let mut a_vec: Vec<f64> = (0..train.len())
        .map(|i| train.labels()[i] - lp.fitted[i] + lp.cross_leverages[i] * lp.prediction / denom)
        .collect();
    a_vec.push(-lp.prediction / denom);
    let mut b_vec: Vec<f64> = lp.cross_leverages.iter().map(|g| -g / denom).collect();
    b_vec.push(1.0 - lp.test_leverage / denom);
    Ok(HatDecomposition { a: a_vec, b: b_vec })
}

/// Positive definiteness of `Σ_{i<n} x_i x_i' − x_n x_n' + aI`, which implies
/// `b_n > b_i` for every training index.
pub fn regularity_check(train: &Dataset, x_test: &[f64], a: f64) -> Result<bool> {
    let mut m = ridge_gram(train.objects(), a)?;
    m.add_outer(x_test, -1.0)?;
    is_positive_definite(&m)
}

/// `⌈(1 − δ) n⌉`, computed as `n − ⌊nδ⌋` with `nδ` snapped to the nearest
/// integer when it is within rounding distance of one.
pub fn conformal_rank(n: usize, delta: f64) -> usize {
    let nd = n as f64 * delta;
    let nearest = nd.round();
    let floor = if (nd - nearest).abs() <= 1e-9 * nd.abs().max(1.0) {
        nearest
    } else {
        nd.floor()
    };
    n - (floor.max(0.0) as usize).min(n)
}

/// One-sided prediction sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "direction", content = "endpoint", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RayPredictionSet {
    /// `(−∞, t]`.
    #[serde(rename = "LOWER_RAY")]
    BoundedAbove(f64),
    /// `[t, ∞)`.
    #[serde(rename = "UPPER_RAY")]
    BoundedBelow(f64),
    FullLine,
}

impl RayPredictionSet {
    /// `(lower, upper)` with infinite ends where unbounded.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Self::BoundedAbove(t) => (f64::NEG_INFINITY, t),
            Self::BoundedBelow(t) => (t, f64::INFINITY),
            Self::FullLine => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn contains(&self, y: f64) -> bool {
        let (lo, hi) = self.bounds();
        lo <= y && y <= hi
    }

    pub fn endpoint(&self) -> Option<f64> {
        match *self {
            Self::BoundedAbove(t) | Self::BoundedBelow(t) => Some(t),
            Self::FullLine => None,
        }
    }

    /// Image under `y ↦ −y`.
    pub fn mirrored(&self) -> Self {
        match *self {
            Self::BoundedAbove(t) => Self::BoundedBelow(-t),
            Self::BoundedBelow(t) => Self::BoundedAbove(-t),
            Self::FullLine => Self::FullLine,
        }
    }

    pub fn to_interval(&self, epsilon: f64, method: Method) -> Result<PredictionInterval> {
        let (lo, hi) = self.bounds();
        PredictionInterval::new(lo, hi, epsilon, method)
    }
}

/// The statistics `t_i` (and `V_i = r_i/(1+g_i)`) for one test object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayThresholds {
    /// Ridge prediction `ŷ_n`, the centre of the Bayesian interval.
    pub prediction: f64,
    pub test_leverage: f64,
    pub adjusted_residuals: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl RayThresholds {
    /// Total number of observations including the test object.
    pub fn n(&self) -> usize {
        self.thresholds.len() + 1
    }

    fn kth_smallest(&self, k: usize) -> f64 {
        let mut t = self.thresholds.clone();
        let (_, v, _) = t.select_nth_unstable_by(k - 1, f64::total_cmp);
        *v
    }

    /// Upper CRR at level `delta`: `(−∞, t_(k)]`, or the full line when `k > n − 1`.
    pub fn upper_ray(&self, delta: f64) -> Result<RayPredictionSet> {
        check_level(delta)?;
        let k = conformal_rank(self.n(), delta);
        if k == 0 || k > self.thresholds.len() {
            return Ok(RayPredictionSet::FullLine);
        }
        Ok(RayPredictionSet::BoundedAbove(self.kth_smallest(k)))
    }

    /// Lower CRR at level `delta`: `[t_(n−k), ∞)`, the mirror image of the
    /// upper ray for negated labels.
    pub fn lower_ray(&self, delta: f64) -> Result<RayPredictionSet> {
        check_level(delta)?;
        let n = self.n();
        let k = conformal_rank(n, delta);
        if k == 0 || k > self.thresholds.len() {
            return Ok(RayPredictionSet::FullLine);
        }
        Ok(RayPredictionSet::BoundedBelow(self.kth_smallest(n - k)))
    }

    /// Intersection of both rays at `ε/2`.
    pub fn interval(&self, epsilon: f64) -> Result<PredictionInterval> {
        check_epsilon(epsilon)?;
        let upper = self.upper_ray(epsilon / 2.0)?;
        let lower = self.lower_ray(epsilon / 2.0)?;
        intersect(lower, upper, epsilon)
    }
}

fn check_level(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("epsilon_half", delta, "(0, 1)"))
    }
}

fn intersect(lower: RayPredictionSet, upper: RayPredictionSet, epsilon: f64) -> Result<PredictionInterval> {
    let lo = lower.bounds().0.max(upper.bounds().0);
    let hi = lower.bounds().1.min(upper.bounds().1);
    if lo > hi {
        return Err(Error::EmptyIntersection { lower, upper });
    }
    PredictionInterval::new(lo, hi, epsilon, Method::Crr)
}

/// Computes `t_i` for every training point in `O(np² + p³)`.
///
/// Fails with `IrregularConfiguration` unless `1 + g_i > 0` for all `i`,
/// i.e. unless `b_n > b_i` so that every set `S_i` is a ray `(−∞, t_i]`.
pub fn ray_thresholds(train: &Dataset, x_test: &[f64], a: f64) -> Result<RayThresholds> {
    let lp = leverage_profile(train.objects(), train.labels(), x_test, a)?;
    let min_margin = lp.cross_leverages.iter().fold(f64::INFINITY, |m, g| m.min(1.0 + g));
    if !(min_margin > RAY_MARGIN) {
        return Err(Error::IrregularConfiguration { min_margin });
    }
    let scale = 1.0 + lp.test_leverage;
    let adjusted_residuals: Vec<f64> = train
        .labels()
        .iter()
        .zip(&lp.fitted)
        .zip(&lp.cross_leverages)
        .map(|((y, f), g)| (y - f) / (1.0 + g))
        .collect();
    let thresholds = adjusted_residuals.iter().map(|v| lp.prediction + scale * v).collect();
    Ok(RayThresholds {
        prediction: lp.prediction,
        test_leverage: lp.test_leverage,
        adjusted_residuals,
        thresholds,
    })
}

pub fn upper_crr_predict(train: &Dataset, x_test: &[f64], a: f64, epsilon_half: f64) -> Result<RayPredictionSet> {
    check_level(epsilon_half)?;
    ray_thresholds(train, x_test, a)?.upper_ray(epsilon_half)
}

/// Runs the upper predictor on negated labels and mirrors the result.
pub fn lower_crr_predict(train: &Dataset, x_test: &[f64], a: f64, epsilon_half: f64) -> Result<RayPredictionSet> {
    Ok(upper_crr_predict(&train.negated(), x_test, a, epsilon_half)?.mirrored())
}

/// `[C_*, C^*]`: lower ray ∩ upper ray, both at `ε/2`.
pub fn crr_predict(train: &Dataset, x_test: &[f64], a: f64, epsilon: f64) -> Result<PredictionInterval> {
    check_epsilon(epsilon)?;
    ray_thresholds(train, x_test, a)?.interval(epsilon)
}

/// CRR interval together with the grid set used when the analytic route refused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrrPrediction {
    pub interval: PredictionInterval,
    pub grid_fallback: Option<GridPredictionSet>,
}

/// [`crr_predict`], falling back to the pointwise grid for irregular
/// configurations. The fallback interval is the hull of the member grid
/// points, opened to infinity on a side where the grid's end point is a member.
pub fn crr_predict_with_fallback(
    train: &Dataset,
    x_test: &[f64],
    a: f64,
    epsilon: f64,
    grid: &[f64],
) -> Result<CrrPrediction> {
    match crr_predict(train, x_test, a, epsilon) {
        Err(Error::IrregularConfiguration { min_margin }) => {
            log::debug!("analytic CRR refused (min 1+g_i = {min_margin:e}); using grid");
            let set = crr_predict_grid(train, x_test, a, epsilon, grid)?;
            let (lo, hi) = set.hull().ok_or(Error::EmptyPredictionSet)?;
            let lo = if set.member[0] { f64::NEG_INFINITY } else { lo };
            let hi = if set.member[set.member.len() - 1] {
                f64::INFINITY
            } else {
                hi
            };
            Ok(CrrPrediction {
                interval: PredictionInterval::new(lo, hi, epsilon, Method::Crr)?,
                grid_fallback: Some(set),
            })
        }
        other => Ok(CrrPrediction {
            interval: other?,
            grid_fallback: None,
        }),
    }
}

/// Per-stream state of the on-line protocol: observations seen so far.
#[derive(Debug, Clone)]
pub struct OnlinePredictor {
    a: f64,
    epsilon: f64,
    dim: Option<usize>,
    objects: Vec<f64>,
    labels: Vec<f64>,
}

impl OnlinePredictor {
    pub fn new(a: f64, epsilon: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::domain("a", a, "[0, inf)"));
        }
        check_epsilon(epsilon)?;
        Ok(Self {
            a,
            epsilon,
            dim: None,
            objects: Vec::new(),
            labels: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn training_set(&self) -> Result<Dataset> {
        let dim = self.dim.ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
        Dataset::new(Matrix::new(self.len(), dim, self.objects.clone())?, self.labels.clone())
    }

    pub fn predict(&self, x: &[f64]) -> Result<PredictionInterval> {
        crr_predict(&self.training_set()?, x, self.a, self.epsilon)
    }

    pub fn observe(&mut self, x: &[f64], y: f64) -> Result<()> {
        match self.dim {
            Some(d) if d != x.len() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                })
            }
            None if x.is_empty() => return Err(Error::InvalidInput("empty object".into())),
            _ => {}
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite observation".into()));
        }
        self.dim = Some(x.len());
        self.objects.extend_from_slice(x);
        self.labels.push(y);
        Ok(())
    }
}

/// Outcome of one on-line step: the prediction for observation `n` from the
/// first `n − 1`, and whether the revealed label was covered.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineStep {
    pub n: usize,
    pub outcome: Result<PredictionInterval>,
    /// `None` when the step failed.
    pub covered: Option<bool>,
}

/// Predicts each observation from its predecessors; step errors are kept.
pub fn online_protocol(stream: &Dataset, a: f64, epsilon: f64) -> Result<Vec<OnlineStep>> {
    if stream.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: stream.len(),
        });
    }
    let mut predictor = OnlinePredictor::new(a, epsilon)?;
    predictor.observe(stream.object(0), stream.labels()[0])?;
    let mut steps = Vec::with_capacity(stream.len() - 1);
    for i in 1..stream.len() {
        let x = stream.object(i);
        let y = stream.labels()[i];
        let outcome = predictor.predict(x);
        let covered = outcome.as_ref().ok().map(|iv| iv.contains(y));
        steps.push(OnlineStep {
            n: i + 1,
            outcome,
            covered,
        });
        predictor.observe(x, y)?;
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Zero objects make every fitted value 0, so residuals equal the labels.
    fn zero_object_seq(labels: &[f64]) -> Dataset {
        let rows: Vec<[f64; 1]> = labels.iter().map(|_| [0.0]).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    fn toy() -> Dataset {
        Dataset::from_rows(&[[1.0]], &[0.0]).unwrap()
    }

    #[test]
    fn score_examples() {
        let s = conformity_scores(&zero_object_seq(&[-1.0, 0.0, 2.0]), 1.0).unwrap();
        assert_eq!(s.scores, vec![1, 2, 1]);
        let s = conformity_scores(&zero_object_seq(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(s.scores, vec![2, 2]);
        let s = conformity_scores(&zero_object_seq(&[3.0]), 1.0).unwrap();
        assert_eq!(s.scores, vec![1]);
    }

    #[test]
    fn pvalue_examples() {
        let s = ConformityScores { scores: vec![1, 2, 1] };
        assert_relative_eq!(s.pvalue(2), 2.0 / 3.0);
        assert_eq!(s.smoothed_pvalue(2, 1.0), s.pvalue(2));
        assert_eq!(s.smoothed_pvalue(2, 0.0), 0.0);
        let s = ConformityScores { scores: vec![2, 2] };
        assert_eq!(s.smoothed_pvalue(1, 0.5), 0.5);
        assert_eq!(s.pvalue(1), 1.0);

        // Through the full pipeline: training labels (-1, 0), test label 2.
        let train = zero_object_seq(&[-1.0, 0.0]);
        assert_relative_eq!(crr_pvalue(&train, &[0.0], 2.0, 1.0).unwrap(), 2.0 / 3.0);
        assert_eq!(smoothed_pvalue(&train, &[0.0], 2.0, 1.0, 0.0).unwrap(), 0.0);
        assert!(smoothed_pvalue(&train, &[0.0], 2.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn pvalue_single_observation() {
        let empty_train_sized = Dataset::from_rows(&[[0.0]], &[1.0]).unwrap();
        let seq = conformity_scores(&empty_train_sized, 1.0).unwrap();
        assert_eq!(seq.pvalue(0), 1.0);
    }

    #[test]
    fn hat_matrix_toy() {
        let hd = hat_matrix_ab(&toy(), &[1.0], 0.0).unwrap();
        assert_relative_eq!(hd.a[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(hd.a[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(hd.b[0], -0.5, epsilon = 1e-15);
        assert_relative_eq!(hd.b[1], 0.5, epsilon = 1e-15);
        assert_relative_eq!(hd.thresholds()[0], 0.0, epsilon = 1e-15);
        let cf = hat_matrix_ab_closed_form(&toy(), &[1.0], 0.0).unwrap();
        for i in 0..2 {
            assert_relative_eq!(cf.a[i], hd.a[i], epsilon = 1e-15);
            assert_relative_eq!(cf.b[i], hd.b[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn hat_matrix_extremes() {
        let train = Dataset::from_rows(&[[1.0, 0.2], [0.3, -1.0], [0.5, 0.5]], &[0.0; 3]).unwrap();
        let hd = hat_matrix_ab(&train, &[0.4, 0.1], 0.5).unwrap();
        assert!(hd.a.iter().all(|&v| v == 0.0));

        let train = Dataset::from_rows(&[[1.0, 0.2], [0.3, -1.0]], &[1.5, -2.0]).unwrap();
        let hd = hat_matrix_ab(&train, &[0.4, 0.1], 1e14).unwrap();
        let expect_a = [1.5, -2.0, 0.0];
        let expect_b = [0.0, 0.0, 1.0];
        for i in 0..3 {
            assert_relative_eq!(hd.a[i], expect_a[i], epsilon = 1e-12);
            assert_relative_eq!(hd.b[i], expect_b[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn regularity_examples() {
        assert!(regularity_check(&toy(), &[1.0], 0.5).unwrap());
        assert!(!regularity_check(&toy(), &[1.0], 0.0).unwrap());
        let train = Dataset::from_rows(&[[1.0, 0.0], [0.0, 1.0]], &[0.0, 0.0]).unwrap();
        assert!(regularity_check(&train, &[0.5, 0.5], 0.0).unwrap());
        assert!(!regularity_check(&train, &[1.0, 1.0], 0.0).unwrap());
    }

    #[test]
    fn rank_formula() {
        assert_eq!(conformal_rank(2, 0.05), 2);
        assert_eq!(conformal_rank(100, 0.05), 95);
        assert_eq!(conformal_rank(40, 0.025), 39);
        assert_eq!(conformal_rank(2, 0.5), 1);
        // ⌈(1 − δ)n⌉ against exact rational arithmetic on a sweep.
        for n in 1..200usize {
            for num in 1..100usize {
                let delta = num as f64 / 200.0;
                let exact = (n * (200 - num)).div_ceil(200);
                assert_eq!(conformal_rank(n, delta), exact, "n={n} delta={delta}");
            }
        }
    }

    #[test]
    fn upper_ray_toy() {
        let ray = upper_crr_predict(&toy(), &[1.0], 0.0, 0.5).unwrap();
        assert_eq!(ray, RayPredictionSet::BoundedAbove(0.0));
        let ray = upper_crr_predict(&toy(), &[1.0], 0.0, 0.05).unwrap();
        assert_eq!(ray, RayPredictionSet::FullLine);
    }

    #[test]
    fn lower_ray_toy() {
        let ray = lower_crr_predict(&toy(), &[1.0], 0.0, 0.5).unwrap();
        assert_eq!(ray, RayPredictionSet::BoundedBelow(0.0));
        assert_eq!(
            lower_crr_predict(&toy(), &[1.0], 0.0, 0.05).unwrap(),
            RayPredictionSet::FullLine
        );
        // The two rays at level 1/2 meet in the single point 0.
        let upper = upper_crr_predict(&toy(), &[1.0], 0.0, 0.5).unwrap();
        assert!(upper.contains(0.0) && ray.contains(0.0));
        assert!(!upper.contains(1e-9) && !ray.contains(-1e-9));
    }

    #[test]
    fn order_statistic_on_99_points() {
        // Zero objects: t_i = y_i, so the endpoint is a plain order statistic.
        let labels: Vec<f64> = (0..99).map(|i| ((i * 37) % 99) as f64 * 0.5 - 7.0).collect();
        let train = zero_object_seq(&labels);
        let ray = upper_crr_predict(&train, &[0.0], 1.0, 0.05).unwrap();
        let mut sorted = labels.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(ray, RayPredictionSet::BoundedAbove(sorted[94]));
        let lower = lower_crr_predict(&train, &[0.0], 1.0, 0.05).unwrap();
        assert_eq!(lower, RayPredictionSet::BoundedBelow(sorted[4]));
    }

    #[test]
    fn crr_small_samples_are_full_line() {
        let iv = crr_predict(&toy(), &[1.0], 0.0, 0.1).unwrap();
        assert!(iv.is_full_line());
        assert_eq!(iv.method, Method::Crr);
    }

    #[test]
    fn identical_observations_degenerate() {
        let rows = vec![[1.0]; 30];
        let train = Dataset::from_rows(&rows, &[0.0; 30]).unwrap();
        let iv = crr_predict(&train, &[1.0], 0.0, 0.2).unwrap();
        assert_eq!((iv.lower, iv.upper), (0.0, 0.0));

        let rows = vec![[2.0, -1.0]; 40];
        let train = Dataset::from_rows(&rows, &[3.25; 40]).unwrap();
        let iv = crr_predict(&train, &[2.0, -1.0], 0.7, 0.2).unwrap();
        assert_relative_eq!(iv.lower, 3.25, epsilon = 1e-12);
        assert_relative_eq!(iv.upper, 3.25, epsilon = 1e-12);
    }

    #[test]
    fn irregular_configuration_is_refused_and_falls_back() {
        // A test object far beyond the training objects: g_2 = -1000/105.26 < -1.
        let train = Dataset::from_rows(&[[1.0], [-10.0], [0.5], [2.0]], &[0.1, -1.2, 0.0, 0.3]).unwrap();
        let x = [100.0];
        assert!(!regularity_check(&train, &x, 0.01).unwrap());
        let err = crr_predict(&train, &x, 0.01, 0.5).unwrap_err();
        assert!(matches!(err, Error::IrregularConfiguration { .. }), "{err:?}");
        let grid: Vec<f64> = (0..=4000).map(|i| -200.0 + i as f64 * 0.1).collect();
        let out = crr_predict_with_fallback(&train, &x, 0.01, 0.5, &grid).unwrap();
        assert!(out.grid_fallback.is_some());
        let set = out.grid_fallback.unwrap();
        for (j, &y) in grid.iter().enumerate().step_by(97) {
            let p = crr_pvalue(&train, &x, y, 0.01).unwrap();
            assert_eq!(set.member[j], p > 0.5);
        }
    }

    #[test]
    fn grid_membership_all_when_epsilon_tiny() {
        let train = Dataset::from_rows(&[[1.0], [0.5], [2.0]], &[0.3, -0.2, 1.0]).unwrap();
        let grid: Vec<f64> = (0..50).map(|i| -10.0 + i as f64 * 0.4).collect();
        let set = crr_predict_grid(&train, &[1.0], 0.5, 0.2, &grid).unwrap();
        assert!(set.member.iter().all(|&m| m));
        assert_eq!(set.intervals(), vec![(-10.0, grid[49])]);
        assert!(crr_predict_grid(&train, &[1.0], 0.5, 0.2, &[1.0, 0.5]).is_err());
        assert!(crr_predict_grid(&train, &[1.0], 0.5, 0.2, &[]).is_err());
    }

    #[test]
    fn grid_two_observations_by_hand() {
        // One training point (x=0, y=1) plus the test (x=0, y): residuals are
        // the labels, so both scores equal 1 when y ≠ 1 and 2 when y = 1.
        // p^y = 1 everywhere, hence every grid point is in the set at ε = 0.9.
        let train = zero_object_seq(&[1.0]);
        let grid = [-1.0, 0.0, 1.0, 2.0];
        let set = crr_predict_grid(&train, &[0.0], 1.0, 0.9, &grid).unwrap();
        assert_eq!(set.member, vec![true; 4]);
        // Three observations: training labels (0, 1), ε = 0.5.
        // y < 0 or y > 1: scores are a permutation of (1, 1, 2) with α_n = 1, p = 2/3.
        // 0 < y < 1: α_n = 2 is the maximum, p = 1. At ε = 0.7 only the middle is kept.
        let train = zero_object_seq(&[0.0, 1.0]);
        let set = crr_predict_grid(&train, &[0.0], 1.0, 0.7, &[-1.0, 0.5, 2.0]).unwrap();
        assert_eq!(set.member, vec![false, true, false]);
    }

    #[test]
    fn grid_negation_reverses_pattern() {
        let train = Dataset::from_rows(
            &[[1.0], [0.2], [-0.7], [1.5], [0.9], [-1.1], [0.4]],
            &[0.8, 0.1, -0.9, 1.7, 1.2, -0.8, 0.2],
        )
        .unwrap();
        let grid: Vec<f64> = (0..121).map(|i| -3.0 + i as f64 * 0.05).collect();
        let neg_grid: Vec<f64> = grid.iter().rev().map(|g| -g).collect();
        let set = crr_predict_grid(&train, &[0.6], 0.3, 0.3, &grid).unwrap();
        let neg = crr_predict_grid(&train.negated(), &[0.6], 0.3, 0.3, &neg_grid).unwrap();
        let reversed: Vec<bool> = neg.member.iter().rev().copied().collect();
        assert_eq!(set.member, reversed);
    }

    #[test]
    fn online_protocol_basics() {
        let stream = Dataset::from_rows(&[[1.0]; 12], &[2.0; 12]).unwrap();
        let steps = online_protocol(&stream, 0.0, 0.2).unwrap();
        assert_eq!(steps.len(), 11);
        // n < 2/ε = 10 gives the full line.
        for step in &steps[..8] {
            assert!(step.outcome.as_ref().unwrap().is_full_line(), "n={}", step.n);
            assert_eq!(step.covered, Some(true));
        }
        assert!(!steps[8].outcome.as_ref().unwrap().is_full_line());
        let last = steps.last().unwrap().outcome.clone().unwrap();
        assert_relative_eq!(last.lower, 2.0, epsilon = 1e-12);
        assert_relative_eq!(last.upper, 2.0, epsilon = 1e-12);
        assert!(online_protocol(&stream.head(1).unwrap(), 0.0, 0.2).is_err());
    }

    #[test]
    fn online_step_errors_are_recorded() {
        // x_1 = 0 with a = 0: the first step has a singular system.
        let stream = Dataset::from_rows(&[[0.0], [1.0], [2.0]], &[0.0, 1.0, 2.0]).unwrap();
        let steps = online_protocol(&stream, 0.0, 0.2).unwrap();
        assert!(matches!(steps[0].outcome, Err(Error::SingularSystem { .. })));
        assert_eq!(steps[0].covered, None);
        assert!(steps[1].outcome.is_ok());
    }
}
