//! Crossing density `f_n(x)` of `Q_n(x) = Kx` and its integrals.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extreal;
use crate::model::{local_moments, Chart, CoefficientModel, ModelError};
use crate::quadrature::{integrate, DEFAULT_PANEL_BUDGET};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("moments degenerate at x = {x}: A² = 0 or E² = 0")]
    DegenerateMoment { x: f64 },
    #[error("density is not finite at x = {x}")]
    NonFiniteDensity { x: f64 },
    #[error("interval ({a}, {b}) is empty or malformed")]
    InvalidInterval { a: f64, b: f64 },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("tolerance not reached: estimate {} with error {}", .best.expected, .best.abs_error_estimate)]
    ToleranceNotReached { best: IntervalCount },
}

/// The density at one point together with its building blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    pub x: f64,
    pub fn_value: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub g4: f64,
    pub g5: f64,
}

/// Expected number of crossings on `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalCount {
    #[serde(with = "extreal")]
    pub a: f64,
    #[serde(with = "extreal")]
    pub b: f64,
    pub expected: f64,
    pub abs_error_estimate: f64,
}

/// Error function, accurate to a few ulps.
pub fn erf_eval(t: f64) -> f64 {
    libm::erf(t)
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Density sample plus `f_n(x)·x²`, which is what the reciprocal chart integrates.
struct ChartDensity {
    sample: DensitySample,
    weighted: f64,
}

fn chart_density(model: &CoefficientModel, chart: Chart) -> Result<ChartDensity, DensityError> {
    let m = local_moments(model, chart);
    let k = model.slope();
    let k2 = k * k;
    let x = match chart {
        Chart::Direct(x) => x,
        Chart::Reciprocal(u) => 1.0 / u,
    };
    if !(m.a2 > 0.0 && m.core > 0.0) {
        return Err(DensityError::DegenerateMoment { x });
    }
    let a = m.a2.sqrt();
    let (sample, weighted) = match chart {
        Chart::Direct(x) => {
            let e = m.core.sqrt();
            let g1 = e / (PI * m.a2);
            let (g2, g3, g4, g5) = if k == 0.0 {
                (0.0, 0.0, 0.0, 0.0)
            } else {
                (
                    -k2 * m.v2 / (2.0 * m.core),
                    k * m.h * FRAC_1_SQRT_2PI / (m.a2 * a),
                    -k2 * x * x / (2.0 * m.a2),
                    k * m.h * FRAC_1_SQRT_2 / (a * e),
                )
            };
            let f = g1 * g2.exp() + g3 * g4.exp() * erf_eval(g5);
            let s = DensitySample {
                x,
                fn_value: f,
                g1,
                g2,
                g3,
                g4,
                g5,
            };
            (s, f * x * x)
        }
        Chart::Reciprocal(u) => {
            let n = model.degree() as f64;
            let ln_s = -u.abs().ln();
            let pw = |e: f64| (e * ln_s).exp();
            let root = m.core.sqrt();
            let g1w = root / (PI * m.a2);
            let (g2, g3w, g4, g5) = if k == 0.0 {
                (0.0, 0.0, 0.0, 0.0)
            } else {
                (
                    -k2 * m.v2 * pw(4.0 - 2.0 * n) / (2.0 * m.core),
                    k * m.h * pw(2.0 - n) * FRAC_1_SQRT_2PI / (m.a2 * a),
                    -k2 * pw(2.0 - 2.0 * n) / (2.0 * m.a2),
                    k * m.h * pw(2.0 - n) * FRAC_1_SQRT_2 / (a * root),
                )
            };
            let weighted = g1w * g2.exp() + g3w * g4.exp() * erf_eval(g5);
            let u2 = u * u;
            let s = DensitySample {
                x,
                fn_value: weighted * u2,
                g1: g1w * u2,
                g2,
                g3: g3w * u2,
                g4,
                g5,
            };
            (s, weighted)
        }
    };
    if !(sample.fn_value.is_finite() && weighted.is_finite()) {
        return Err(DensityError::NonFiniteDensity { x });
    }
    Ok(ChartDensity { sample, weighted })
}

/// `f_n(x) = g1·e^{g2} + g3·e^{g4}·erf(g5)`.
pub fn density_at(model: &CoefficientModel, x: f64) -> Result<DensitySample, DensityError> {
    if !x.is_finite() {
        return Err(ModelError::NonFinitePoint(x).into());
    }
    Ok(chart_density(model, Chart::for_point(x))?.sample)
}

/// Compactifies the real line onto `[−2, 2]`: identity on `[−1, 1]`,
/// `x ↦ ±(2 − 1/|x|)` outside.
fn to_param(x: f64) -> f64 {
    if x == f64::INFINITY {
        2.0
    } else if x == f64::NEG_INFINITY {
        -2.0
    } else if x > 1.0 {
        2.0 - 1.0 / x
    } else if x < -1.0 {
        -2.0 - 1.0 / x
    } else {
        x
    }
}

/// Integrand in the compact parameter, including the Jacobian.
fn param_integrand(model: &CoefficientModel, s: f64) -> Result<f64, DensityError> {
    if s > 1.0 {
        Ok(chart_density(model, Chart::Reciprocal(2.0 - s))?.weighted)
    } else if s < -1.0 {
        Ok(chart_density(model, Chart::Reciprocal(-(2.0 + s)))?.weighted)
    } else {
        Ok(chart_density(model, Chart::Direct(s))?.sample.fn_value)
    }
}

/// `EN_K(a, b) = ∫_a^b f_n(x) dx`; endpoints may be infinite.
///
/// Panels are forced to break at −1, 0 and 1.
pub fn expected_crossings(model: &CoefficientModel, a: f64, b: f64, tol: f64) -> Result<IntervalCount, DensityError> {
    if a.is_nan() || b.is_nan() || a >= b {
        return Err(DensityError::InvalidInterval { a, b });
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(DensityError::InvalidTolerance(tol));
    }
    let (lo, hi) = (to_param(a), to_param(b));
    let mut breaks = vec![lo];
    breaks.extend([-1.0, 0.0, 1.0].into_iter().filter(|&p| p > lo && p < hi));
    breaks.push(hi);
    let out = integrate(|s| param_integrand(model, s), &breaks, tol, DEFAULT_PANEL_BUDGET)?;
    let count = IntervalCount {
        a,
        b,
        expected: out.value,
        abs_error_estimate: out.abs_error,
    };
    if out.converged {
        Ok(count)
    } else {
        Err(DensityError::ToleranceNotReached { best: count })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::moments;
    use proptest::prelude::*;

    /// Maclaurin series, summed until terms vanish; fine for |t| ≤ 3.
    fn erf_series(t: f64) -> f64 {
        let mut term = t;
        let mut sum = t;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= -t * t / k;
            let add = term / (2.0 * k + 1.0);
            sum += add;
            if add.abs() <= 1e-18 * sum.abs() || k > 200.0 {
                break;
            }
        }
        sum * 2.0 / PI.sqrt()
    }

    #[test]
    fn erf_against_series() {
        assert_eq!(erf_eval(0.0), 0.0);
        assert!((erf_eval(10.0) - 1.0).abs() <= 1e-12);
        assert!((erf_eval(1.0) - 0.842700792949715).abs() <= 1e-12);
        for i in -30..=30 {
            let t = i as f64 * 0.1;
            assert!((erf_eval(t) - erf_series(t)).abs() <= 1e-12, "t={t}");
            assert_eq!(erf_eval(-t), -erf_eval(t));
        }
    }

    /// Direct Kac–Rice integral `∫|y| p(Kx, y + K) dy` over the joint normal
    /// law of `(Q, Q')`, by composite Simpson.
    fn kac_rice_oracle(model: &CoefficientModel, x: f64) -> f64 {
        let m = moments(model, x).unwrap();
        let k = model.slope();
        let det = m.a2 * m.b2 - m.c * m.c;
        let q = k * x;
        let pdf = |p: f64, d: f64| {
            let quad = (m.b2 * p * p - 2.0 * m.c * p * d + m.a2 * d * d) / det;
            (-0.5 * quad).exp() / (2.0 * PI * det.sqrt())
        };
        let center = m.c / m.a2 * q - k;
        let width = 14.0 * m.b2.sqrt();
        let simpson = |lo: f64, hi: f64| {
            let steps = 100_000;
            let h = (hi - lo) / steps as f64;
            let mut acc = 0.0;
            for i in 0..=steps {
                let y = lo + i as f64 * h;
                let w = if i == 0 || i == steps {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * y.abs() * pdf(q, y + k);
            }
            acc * h / 3.0
        };
        // Split at the kink of |y|.
        let (lo, hi) = (center - width, center + width);
        if lo < 0.0 && hi > 0.0 {
            simpson(lo, 0.0) + simpson(0.0, hi)
        } else {
            simpson(lo, hi)
        }
    }

    #[test]
    fn density_matches_kac_rice_oracle() {
        let model = CoefficientModel::brownian(10, 2.0).unwrap();
        for &x in &[0.5, -0.7, 0.0, 0.95, -1.0, 1.3, -2.2] {
            let got = density_at(&model, x).unwrap().fn_value;
            let want = kac_rice_oracle(&model, x);
            assert!(got > 0.0);
            assert!((got - want).abs() <= 1e-9 * want, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn density_examples() {
        let m5 = CoefficientModel::brownian(5, 0.0).unwrap();
        let s = density_at(&m5, 0.0).unwrap();
        assert!((s.fn_value - 1.0 / PI).abs() < 1e-15);
        for &x in &[-3.0, -1.0, -0.4, 0.2, 1.0, 1.7] {
            let s = density_at(&m5, x).unwrap();
            let m = moments(&m5, x).unwrap();
            let g1 = m.e2.sqrt() / (PI * m.a2);
            assert_eq!(s.fn_value, s.g1);
            assert_eq!((s.g2, s.g3, s.g4, s.g5), (0.0, 0.0, 0.0, 0.0));
            assert!((s.g1 - g1).abs() <= 1e-14 * g1, "x={x}");
        }
    }

    #[test]
    fn reciprocal_chart_is_continuous_at_one() {
        let model = CoefficientModel::brownian(12, 1.5).unwrap();
        for &x in &[1.0f64, -1.0] {
            let inside = chart_density(&model, Chart::Direct(x)).unwrap().sample;
            let outside = chart_density(&model, Chart::Reciprocal(1.0 / x)).unwrap().sample;
            assert!((inside.fn_value - outside.fn_value).abs() <= 1e-8 * inside.fn_value);
            assert!((inside.g5 - outside.g5).abs() <= 1e-8 * inside.g5.abs().max(1.0));
        }
    }

    #[test]
    fn degenerate_point_is_reported() {
        let model = CoefficientModel::brownian_from_first(4, 0.0).unwrap();
        assert_eq!(density_at(&model, 0.0), Err(DensityError::DegenerateMoment { x: 0.0 }));
    }

    #[test]
    fn linear_model_has_one_crossing() {
        for k in [-3.0, 0.0, 7.0] {
            let model = CoefficientModel::brownian(1, k).unwrap();
            let r = expected_crossings(&model, f64::NEG_INFINITY, f64::INFINITY, 1e-10).unwrap();
            assert!((r.expected - 1.0).abs() < 1e-8, "K={k}: {}", r.expected);
            assert!(r.abs_error_estimate <= 1e-10);
        }
    }

    #[test]
    fn counts_are_additive() {
        let model = CoefficientModel::brownian(10, 0.0).unwrap();
        let tol = 1e-10;
        let whole = expected_crossings(&model, 0.0, f64::INFINITY, tol).unwrap();
        let left = expected_crossings(&model, 0.0, 1.0, tol).unwrap();
        let right = expected_crossings(&model, 1.0, f64::INFINITY, tol).unwrap();
        assert!((left.expected + right.expected - whole.expected).abs() <= 2.0 * tol);
    }

    #[test]
    fn growth_tracks_log_law() {
        let mut prev = 0.0;
        for n in [2usize, 4, 8, 16, 32] {
            let model = CoefficientModel::brownian(n, 0.0).unwrap();
            let r = expected_crossings(&model, f64::NEG_INFINITY, f64::INFINITY, 1e-9).unwrap();
            assert!(r.expected > prev);
            prev = r.expected;
            if n == 32 {
                let law = ((2 * n + 1) as f64).ln() / PI + 1.920134478 / PI;
                assert!((r.expected - law).abs() < 0.15, "{} vs {law}", r.expected);
            }
        }
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let model = CoefficientModel::brownian(3, 0.0).unwrap();
        assert!(matches!(
            expected_crossings(&model, 1.0, 1.0, 1e-8),
            Err(DensityError::InvalidInterval { .. })
        ));
        assert!(matches!(
            expected_crossings(&model, 0.0, 1.0, 0.0),
            Err(DensityError::InvalidTolerance(_))
        ));
        assert!(matches!(
            expected_crossings(&model, 0.0, 1.0, 1e-30),
            Err(DensityError::ToleranceNotReached { .. })
        ));
    }

    proptest! {
        #[test]
        fn density_is_nonnegative(
            n in 1usize..40,
            k in -6.0f64..6.0,
            x in -5.0f64..5.0,
        ) {
            let model = CoefficientModel::brownian(n, k).unwrap();
            let s = density_at(&model, x).unwrap();
            prop_assert!(s.fn_value >= 0.0);
        }

        #[test]
        fn partition_additivity(
            n in 2usize..16,
            k in -2.0f64..2.0,
            cut in -3.0f64..3.0,
        ) {
            let model = CoefficientModel::brownian(n, k).unwrap();
            let tol = 1e-9;
            let whole = expected_crossings(&model, f64::NEG_INFINITY, f64::INFINITY, tol).unwrap();
            let l = expected_crossings(&model, f64::NEG_INFINITY, cut, tol).unwrap();
            let r = expected_crossings(&model, cut, f64::INFINITY, tol).unwrap();
            let slack = whole.abs_error_estimate + l.abs_error_estimate + r.abs_error_estimate;
            prop_assert!((l.expected + r.expected - whole.expected).abs() <= slack.max(1e-13));
        }
    }
}
