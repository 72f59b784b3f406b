//! Normal-distribution special functions and the closed-form limits for the
//! scaled differences between Bayesian and conformal interval endpoints.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Largest negative variance that is treated as rounding noise and clamped to 0.
const VARIANCE_CLAMP: f64 = 1e-9;

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("sigma", sigma, "(0, inf)"))
    }
}

fn check_open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, "(0, 1)"))
    }
}

/// Density of `N(0, σ²)` at `x`.
pub fn normal_pdf(x: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let u = x / sigma;
    Ok(INV_SQRT_2PI / sigma * (-0.5 * u * u).exp())
}

/// Distribution function of `N(0, σ²)` at `x`.
pub fn normal_cdf(x: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(std_normal_cdf(x / sigma))
}

#[inline]
pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

// Acklam's rational approximation of the standard normal lower-tail quantile.
const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const ACKLAM_LOW: f64 = 0.02425;

fn acklam(p: f64) -> f64 {
    let (a, b, c, d) = (ACKLAM_A, ACKLAM_B, ACKLAM_C, ACKLAM_D);
    if p < ACKLAM_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else if p <= 1.0 - ACKLAM_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    }
}

/// Upper-tail standard normal quantile `z_δ = Φ⁻¹(1 - δ)`.
///
/// Evaluates the lower-tail quantile at `δ` (so small `δ` keeps full relative
/// precision) and refines it with one Halley step against the erfc-based CDF.
pub fn normal_quantile(delta: f64) -> Result<f64> {
    check_open_unit("delta", delta)?;
    if delta == 0.5 {
        return Ok(0.0);
    }
    let mut x = acklam(delta);
    let e = std_normal_cdf(x) - delta;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x -= u / (1.0 + 0.5 * x * u);
    Ok(-x)
}

/// `μ_α = ∫_{-∞}^{ζ} x f(x) dx = -σ² f(ζ)` for `f` the `N(0, σ²)` density.
pub fn mu_alpha(zeta: f64, sigma: f64) -> Result<f64> {
    Ok(-sigma * sigma * normal_pdf(zeta, sigma)?)
}

/// Inputs of the limiting variance: significance level, noise scale and the
/// quadratic form `m = μ'Σ⁻¹μ` of the object law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremVarianceSpec {
    pub epsilon: f64,
    pub sigma: f64,
    pub quadform: f64,
}

impl TheoremVarianceSpec {
    pub fn new(epsilon: f64, sigma: f64, quadform: f64) -> Result<Self> {
        let spec = Self {
            epsilon,
            sigma,
            quadform,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_open_unit("epsilon", self.epsilon)?;
        check_sigma(self.sigma)?;
        if !(0.0..=1.0).contains(&self.quadform) {
            return Err(Error::domain("quadform", self.quadform, "[0, 1]"));
        }
        Ok(())
    }
}

/// Limiting variance and standard deviation of `√n (B* − C*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitVariance {
    pub variance: f64,
    pub std: f64,
}

/// Density form: `α(1−α)/f²(ζ_α) − σ² m` with `α = 1 − ε/2`, `ζ_α = σ z_{ε/2}`.
pub fn variance_density_form(spec: &TheoremVarianceSpec) -> Result<f64> {
    spec.validate()?;
    let tail = spec.epsilon / 2.0;
    let alpha = 1.0 - tail;
    let zeta = spec.sigma * normal_quantile(tail)?;
    let f = normal_pdf(zeta, spec.sigma)?;
    Ok(alpha * tail / (f * f) - spec.sigma * spec.sigma * spec.quadform)
}

/// Exponential form: `σ² (ε(1 − ε/2) π e^{z²_{ε/2}} − m)`.
pub fn variance_exp_form(spec: &TheoremVarianceSpec) -> Result<f64> {
    spec.validate()?;
    let eps = spec.epsilon;
    let z = normal_quantile(eps / 2.0)?;
    Ok(spec.sigma * spec.sigma * (eps * (1.0 - eps / 2.0) * PI * (z * z).exp() - spec.quadform))
}

pub fn theorem1_variance(spec: &TheoremVarianceSpec) -> Result<LimitVariance> {
    let density = variance_density_form(spec)?;
    let exp_form = variance_exp_form(spec)?;
    debug_assert!(
        (density - exp_form).abs() <= 1e-9 * density.abs().max(exp_form.abs()).max(1e-300),
        "variance forms disagree: {density} vs {exp_form}"
    );
    let variance = if density < 0.0 {
        if density > -VARIANCE_CLAMP {
            log::warn!("clamping variance {density:e} to zero");
            0.0
        } else {
            return Err(Error::domain("variance", density, "[0, inf)"));
        }
    } else {
        density
    };
    Ok(LimitVariance {
        variance,
        std: variance.sqrt(),
    })
}

/// Small-ε asymptote of the limiting standard deviation, `(−ε ln ε)^{−1/2}`.
pub fn std_asymptote(epsilon: f64) -> Result<f64> {
    check_open_unit("epsilon", epsilon)?;
    Ok((-epsilon * epsilon.ln()).powf(-0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub epsilon: f64,
    /// Limiting std with `μ'Σ⁻¹μ = 0`.
    pub std_upper: f64,
    /// Limiting std with `μ'Σ⁻¹μ = 1`.
    pub std_lower: f64,
    pub asymptote: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub rows: Vec<CurveRow>,
}

/// Standard-deviation curves at `σ = 1` over an increasing grid of levels.
pub fn curve_table(eps_grid: &[f64]) -> Result<CurveTable> {
    if eps_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("epsilon grid must be strictly increasing".into()));
    }
    let rows = eps_grid
        .iter()
        .map(|&eps| {
            let upper = theorem1_variance(&TheoremVarianceSpec::new(eps, 1.0, 0.0)?)?;
            let lower = theorem1_variance(&TheoremVarianceSpec::new(eps, 1.0, 1.0)?)?;
            Ok(CurveRow {
                epsilon: eps,
                std_upper: upper.std,
                std_lower: lower.std,
                asymptote: std_asymptote(eps)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveTable { rows })
}

impl CurveTable {
    pub const CSV_HEADER: &'static str = "epsilon,std_upper,std_lower,asymptote";

    /// CSV with six significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                format_significant(r.epsilon, 6),
                format_significant(r.std_upper, 6),
                format_significant(r.std_lower, 6),
                format_significant(r.asymptote, 6)
            );
        }
        out
    }
}

/// `%.{digits}g`-style formatting: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros trimmed.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    // Round first so the exponent reflects the printed mantissa.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{exp}")
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Default grid over `[0.01, 0.99]` in steps of 0.01.
pub fn full_range_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Default grid over `(0, 0.05]` in steps of 0.0005.
pub fn small_epsilon_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 2000.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Bisection on Φ; independent of the rational approximation.
    fn quantile_by_bisection(delta: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 0.5 * libm::erfc(mid / SQRT_2) > delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        let z = quantile_by_bisection(0.025);
        assert_relative_eq!(z, 1.959964, epsilon = 1e-5);
        assert_relative_eq!(normal_quantile(0.025).unwrap(), z, epsilon = 1e-12);
        assert_relative_eq!(normal_quantile(0.975).unwrap(), -1.959964, epsilon = 1e-5);
        for &d in &[1e-10, 1e-6, 0.001, 0.3, 0.7, 0.999] {
            assert_relative_eq!(
                normal_quantile(d).unwrap(),
                quantile_by_bisection(d),
                max_relative = 1e-12,
                epsilon = 1e-12
            );
        }
        for bad in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(normal_quantile(bad).is_err());
        }
    }

    #[test]
    fn pdf_cdf_examples() {
        assert_relative_eq!(normal_pdf(0.0, 1.0).unwrap(), 0.3989423, epsilon = 1e-7);
        assert_eq!(normal_cdf(0.0, 3.0).unwrap(), 0.5);
        assert_relative_eq!(normal_pdf(1.959964, 1.0).unwrap(), 0.058440, epsilon = 1e-5);
        assert!(normal_pdf(0.0, 0.0).is_err());
        assert!(normal_cdf(0.0, -1.0).is_err());
    }

    #[test]
    fn pdf_integrates_to_one() {
        // Composite Simpson over ±12σ.
        let sigma = 1.7;
        let (a, b, n) = (-12.0 * sigma, 12.0 * sigma, 4000);
        let h = (b - a) / n as f64;
        let mut s = normal_pdf(a, sigma).unwrap() + normal_pdf(b, sigma).unwrap();
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * normal_pdf(a + i as f64 * h, sigma).unwrap();
        }
        assert_relative_eq!(s * h / 3.0, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn variance_examples() {
        let v = theorem1_variance(&TheoremVarianceSpec::new(0.05, 1.0, 0.0).unwrap()).unwrap();
        // 0.975·0.025 / f(1.959964)² with f from the direct formula.
        let f = (-0.5 * 1.959964_f64.powi(2)).exp() / (2.0 * PI).sqrt();
        let oracle = 0.975 * 0.025 / (f * f);
        assert_relative_eq!(v.variance, oracle, max_relative = 1e-5);
        assert_relative_eq!(v.variance, 7.14, epsilon = 1e-2);
        assert_relative_eq!(v.std, 2.672, epsilon = 1e-2);

        let v1 = theorem1_variance(&TheoremVarianceSpec::new(0.05, 1.0, 1.0).unwrap()).unwrap();
        let z = normal_quantile(0.025).unwrap();
        assert_relative_eq!(
            v1.variance,
            0.05 * (1.0 - 0.025) * PI * (z * z).exp() - 1.0,
            max_relative = 1e-12
        );

        let v2 = theorem1_variance(&TheoremVarianceSpec::new(0.05, 2.0, 0.3).unwrap()).unwrap();
        let vs = theorem1_variance(&TheoremVarianceSpec::new(0.05, 1.0, 0.3).unwrap()).unwrap();
        assert_relative_eq!(v2.variance, 4.0 * vs.variance, max_relative = 1e-12);

        assert!(TheoremVarianceSpec::new(0.05, 1.0, 1.5).is_err());
        assert!(TheoremVarianceSpec::new(1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn asymptote_examples() {
        assert_relative_eq!(std_asymptote(1e-4).unwrap(), 32.96, epsilon = 0.01);
        let std = theorem1_variance(&TheoremVarianceSpec::new(1e-4, 1.0, 0.0).unwrap())
            .unwrap()
            .std;
        let ratio = std / std_asymptote(1e-4).unwrap();
        assert!((0.95..=1.10).contains(&ratio), "ratio {ratio}");
        assert_relative_eq!(
            std_asymptote((-1.0_f64).exp()).unwrap(),
            1.0_f64.exp().sqrt(),
            max_relative = 1e-14
        );
        assert!(std_asymptote(0.0).is_err());
    }

    #[test]
    fn ratio_to_asymptote_approaches_one() {
        let gaps: Vec<f64> = (2..=8)
            .map(|k| {
                let eps = 10f64.powi(-k);
                let std = theorem1_variance(&TheoremVarianceSpec::new(eps, 1.0, 0.0).unwrap())
                    .unwrap()
                    .std;
                (std / std_asymptote(eps).unwrap() - 1.0).abs()
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    }

    #[test]
    fn curve_table_rows() {
        let t = curve_table(&[0.05, 0.2]).unwrap();
        assert_eq!(t.rows.len(), 2);
        let r = t.rows[0];
        assert_relative_eq!(r.std_upper, 2.672, epsilon = 1e-2);
        assert_relative_eq!(r.std_lower.powi(2), r.std_upper.powi(2) - 1.0, max_relative = 1e-12);
        assert!(t.rows[0].asymptote > t.rows[1].asymptote);
        assert!(curve_table(&[0.2, 0.1]).is_err());
        assert!(curve_table(&[0.0, 0.1]).is_err());
    }

    #[test]
    fn mu_alpha_examples() {
        assert_relative_eq!(mu_alpha(0.0, 1.0).unwrap(), -0.3989423, epsilon = 1e-7);
        assert_relative_eq!(mu_alpha(0.0, 2.0).unwrap(), -0.7978846, epsilon = 1e-7);
        assert!(mu_alpha(60.0, 1.0).unwrap().abs() < 1e-300);
    }

    #[test]
    fn significant_formatting() {
        assert_eq!(format_significant(2.6720341, 6), "2.67203");
        assert_eq!(format_significant(0.05, 6), "0.05");
        assert_eq!(format_significant(1234567.0, 6), "1.23457e6");
        assert_eq!(format_significant(0.000012345678, 6), "1.23457e-5");
        assert_eq!(format_significant(99.99999, 6), "100");
    }

    #[test]
    fn default_grids() {
        let g = full_range_grid();
        assert_eq!(g.len(), 99);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[98], 0.99);
        assert!(small_epsilon_grid().iter().all(|&e| e > 0.0 && e <= 0.05));
    }
}
