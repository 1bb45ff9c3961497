//! Random polynomial model with Brownian-motion coefficients.
//!
//! `A_j = Δ_0 + … + Δ_j` with independent `Δ_k ~ N(0, σ_k²)`, so the
//! polynomial `Q_n(x) = Σ A_j x^j` can be rewritten as `Σ Δ_k a_k(x)`
//! with tail weights `a_k(x) = Σ_{j≥k} x^j`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{DoubleDouble, Neumaier};

/// Below this distance from `y = 1` the geometric closed forms lose digits,
/// so sums are accumulated term by term instead.
pub const SUMMATION_SEAM: f64 = 1e-3;

/// Relative slack allowed for a negative `E²` before it is clamped to zero.
const E2_CLAMP_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("degree must be at least 1")]
    ZeroDegree,
    #[error("expected {expected} standard deviations, got {got}")]
    SigmaLength { expected: usize, got: usize },
    #[error("standard deviation at index {index} is negative or not finite")]
    InvalidSigma { index: usize },
    #[error("all standard deviations are zero")]
    AllSigmaZero,
    #[error("slope must be finite")]
    NonFiniteSlope,
    #[error("weight index {index} exceeds degree {degree}")]
    IndexOutOfRange { index: usize, degree: usize },
    #[error("evaluation point must be finite, got {0}")]
    NonFinitePoint(f64),
}

/// Degree, slope and increment standard deviations of `Q_n(x) − Kx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct CoefficientModel {
    degree: usize,
    slope: f64,
    sigma: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    degree: usize,
    slope: f64,
    sigma: Vec<f64>,
}

impl TryFrom<RawModel> for CoefficientModel {
    type Error = ModelError;
    fn try_from(raw: RawModel) -> Result<Self, ModelError> {
        Self::new(raw.degree, raw.slope, raw.sigma)
    }
}

impl From<CoefficientModel> for RawModel {
    fn from(m: CoefficientModel) -> Self {
        RawModel {
            degree: m.degree,
            slope: m.slope,
            sigma: m.sigma,
        }
    }
}

impl CoefficientModel {
    pub fn new(degree: usize, slope: f64, sigma: Vec<f64>) -> Result<Self, ModelError> {
        if degree == 0 {
            return Err(ModelError::ZeroDegree);
        }
        if !slope.is_finite() {
            return Err(ModelError::NonFiniteSlope);
        }
        if sigma.len() != degree + 1 {
            return Err(ModelError::SigmaLength {
                expected: degree + 1,
                got: sigma.len(),
            });
        }
        if let Some(index) = sigma.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(ModelError::InvalidSigma { index });
        }
        if sigma.iter().all(|&s| s == 0.0) {
            return Err(ModelError::AllSigmaZero);
        }
        Ok(Self { degree, slope, sigma })
    }

    /// Unit-variance increments `Δ_0 … Δ_n`.
    pub fn brownian(degree: usize, slope: f64) -> Result<Self, ModelError> {
        Self::new(degree, slope, vec![1.0; degree + 1])
    }

    /// Unit-variance increments starting at `Δ_1` (`A_0 = 0`).
    ///
    /// `x = 0` is then a root of every sample.
    pub fn brownian_from_first(degree: usize, slope: f64) -> Result<Self, ModelError> {
        let mut sigma = vec![1.0; degree + 1];
        sigma[0] = 0.0;
        Self::new(degree, slope, sigma)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn with_slope(&self, slope: f64) -> Result<Self, ModelError> {
        Self::new(self.degree, slope, self.sigma.clone())
    }

    /// Same model with every standard deviation multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ModelError> {
        Self::new(self.degree, self.slope, self.sigma.iter().map(|s| s * factor).collect())
    }
}

/// Variances and covariance of `(Q_n(x), Q_n'(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBundle {
    pub x: f64,
    pub a2: f64,
    pub b2: f64,
    pub c: f64,
    pub e2: f64,
}

/// `y^p − 1` without cancellation for `y` near ±1.
fn pow_minus_one(y: f64, p: usize) -> f64 {
    if p == 0 {
        return 0.0;
    }
    if y == 0.0 {
        return -1.0;
    }
    let log_abs = if (0.5..=2.0).contains(&y.abs()) {
        (y.abs() - 1.0).ln_1p()
    } else {
        y.abs().ln()
    };
    let z = p as f64 * log_abs;
    if y > 0.0 || p.is_multiple_of(2) {
        z.exp_m1()
    } else {
        -z.exp() - 1.0
    }
}

/// `Σ_{m=0}^{len} y^m` via the closed geometric form.
pub(crate) fn geo_closed(len: usize, y: f64) -> f64 {
    pow_minus_one(y, len + 1) / (y - 1.0)
}

/// `Σ_{m=1}^{len} m y^{m−1}` via the closed form.
pub(crate) fn dgeo_closed(len: usize, y: f64) -> f64 {
    if len == 0 {
        return 0.0;
    }
    let g = geo_closed(len, y);
    (g - (len + 1) as f64 * y.powi(len as i32)) / (1.0 - y)
}

pub(crate) fn geo_direct(len: usize, y: f64) -> f64 {
    let mut acc = Neumaier::default();
    let mut p = 1.0;
    for _ in 0..=len {
        acc.add(p);
        p *= y;
    }
    acc.value()
}

pub(crate) fn dgeo_direct(len: usize, y: f64) -> f64 {
    let mut acc = Neumaier::default();
    let mut p = 1.0;
    for m in 1..=len {
        acc.add(m as f64 * p);
        p *= y;
    }
    acc.value()
}

fn near_one(y: f64) -> bool {
    (y - 1.0).abs() < SUMMATION_SEAM
}

fn geo(len: usize, y: f64) -> f64 {
    if near_one(y) {
        geo_direct(len, y)
    } else {
        geo_closed(len, y)
    }
}

fn dgeo(len: usize, y: f64) -> f64 {
    if near_one(y) {
        dgeo_direct(len, y)
    } else {
        dgeo_closed(len, y)
    }
}

fn check_index(k: usize, degree: usize) -> Result<(), ModelError> {
    if k > degree {
        Err(ModelError::IndexOutOfRange { index: k, degree })
    } else {
        Ok(())
    }
}

/// `a_k(x) = Σ_{j=k}^{n} x^j`.
pub fn weight_a(k: usize, x: f64, degree: usize) -> Result<f64, ModelError> {
    check_index(k, degree)?;
    Ok(x.powi(k as i32) * geo(degree - k, x))
}

/// `b_k(x) = Σ_{j=k}^{n} j x^{j−1}`, the derivative of `a_k`.
pub fn weight_b(k: usize, x: f64, degree: usize) -> Result<f64, ModelError> {
    check_index(k, degree)?;
    let len = degree - k;
    let head = if k == 0 {
        0.0
    } else {
        k as f64 * x.powi(k as i32 - 1) * geo(len, x)
    };
    Ok(head + x.powi(k as i32) * dgeo(len, x))
}

/// Point at which moments are evaluated.
///
/// Outside `[−1, 1]` everything is expressed through `u = 1/x` and divided
/// by the natural power of `|x|` so that nothing overflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Chart {
    Direct(f64),
    Reciprocal(f64),
}

impl Chart {
    pub fn for_point(x: f64) -> Self {
        if x.abs() <= 1.0 {
            Chart::Direct(x)
        } else {
            Chart::Reciprocal(1.0 / x)
        }
    }
}

/// Moment sums in chart coordinates.
///
/// Direct chart: the plain sums, `core = E²`.
/// Reciprocal chart (`x = 1/u`, `s = |x|`): `a2 = A²/s^{2n}`,
/// `b2 = B²/s^{2n−2}`, `c = C/x^{2n−1}`, `v2`, `h` scaled by `s^{2n}` and
/// `E² = s^{4n−4}·core`.
/// In both charts `v2 = Σσ²(a − xb)²` and `h = Σσ²a(a − xb)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalMoments {
    pub a2: f64,
    pub b2: f64,
    pub c: f64,
    pub core: f64,
    pub v2: f64,
    pub h: f64,
}

struct Sums {
    aa: DoubleDouble,
    bb: DoubleDouble,
    ab: DoubleDouble,
    dd: DoubleDouble,
    ad: DoubleDouble,
}

impl Sums {
    fn new() -> Self {
        Self {
            aa: DoubleDouble::ZERO,
            bb: DoubleDouble::ZERO,
            ab: DoubleDouble::ZERO,
            dd: DoubleDouble::ZERO,
            ad: DoubleDouble::ZERO,
        }
    }

    fn push(&mut self, w: f64, a: f64, b: f64, d: f64) {
        self.aa = self.aa.add(DoubleDouble::from_product(a, a).scale(w));
        self.bb = self.bb.add(DoubleDouble::from_product(b, b).scale(w));
        self.ab = self.ab.add(DoubleDouble::from_product(a, b).scale(w));
        self.dd = self.dd.add(DoubleDouble::from_product(d, d).scale(w));
        self.ad = self.ad.add(DoubleDouble::from_product(a, d).scale(w));
    }
}

fn gram(aa: DoubleDouble, bb: DoubleDouble, ab: DoubleDouble) -> f64 {
    let det = aa.mul(bb).sub(ab.mul(ab)).value();
    if det < 0.0 {
        debug_assert!(
            det >= -E2_CLAMP_SLACK * aa.value() * bb.value(),
            "Gram determinant {det} far below zero"
        );
        0.0
    } else {
        det
    }
}

/// Per-index weights `(a_k, b_k)` in the direct chart.
fn direct_weights(n: usize, x: f64) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); n + 1];
    if near_one(x) {
        let mut acc_a = Neumaier::default();
        let mut acc_b = Neumaier::default();
        for k in (0..=n).rev() {
            acc_a.add(x.powi(k as i32));
            if k > 0 {
                acc_b.add(k as f64 * x.powi(k as i32 - 1));
            }
            out[k] = (acc_a.value(), acc_b.value());
        }
    } else {
        for (k, slot) in out.iter_mut().enumerate() {
            let len = n - k;
            let g = geo_closed(len, x);
            let dg = dgeo_closed(len, x);
            let xk = x.powi(k as i32);
            let head = if k == 0 {
                0.0
            } else {
                k as f64 * x.powi(k as i32 - 1) * g
            };
            *slot = (xk * g, head + xk * dg);
        }
    }
    out
}

pub(crate) fn local_moments(model: &CoefficientModel, chart: Chart) -> LocalMoments {
    let n = model.degree;
    let mut sums = Sums::new();
    match chart {
        Chart::Direct(x) => {
            for (k, (a, b)) in direct_weights(n, x).into_iter().enumerate() {
                let w = model.sigma[k] * model.sigma[k];
                if w == 0.0 {
                    continue;
                }
                sums.push(w, a, b, (-x).mul_add(b, a));
            }
            LocalMoments {
                a2: sums.aa.value(),
                b2: sums.bb.value(),
                c: sums.ab.value(),
                core: gram(sums.aa, sums.bb, sums.ab),
                v2: sums.dd.value(),
                h: sums.ad.value(),
            }
        }
        Chart::Reciprocal(u) => {
            // alpha_k = Σ_{m≤n−k} u^m, gamma_k = its u-derivative and the
            // reduced derivative weight is beta_k = n·alpha_k − u·gamma_k.
            // E² is invariant under beta → beta − n·alpha, so the Gram
            // determinant of (alpha, gamma) carries it without the u²
            // cancellation hiding in (alpha, beta).
            let nf = n as f64;
            let mut ag = Sums::new();
            for k in 0..=n {
                let w = model.sigma[k] * model.sigma[k];
                if w == 0.0 {
                    continue;
                }
                let len = n - k;
                let alpha = geo(len, u);
                let gamma = dgeo(len, u);
                let beta = nf.mul_add(alpha, -u * gamma);
                let diff = (1.0 - nf).mul_add(alpha, u * gamma);
                sums.push(w, alpha, beta, diff);
                ag.push(w, alpha, gamma, 0.0);
            }
            LocalMoments {
                a2: sums.aa.value(),
                b2: sums.bb.value(),
                c: sums.ab.value(),
                core: gram(ag.aa, ag.bb, ag.ab),
                v2: sums.dd.value(),
                h: sums.ad.value(),
            }
        }
    }
}

/// `A², B², C, E²` at `x`.
///
/// Beyond `|x| > 1` the values grow like `|x|^{4n}` and may overflow to
/// infinity for large degrees; the density layer never needs them unscaled.
pub fn moments(model: &CoefficientModel, x: f64) -> Result<MomentBundle, ModelError> {
    if !x.is_finite() {
        return Err(ModelError::NonFinitePoint(x));
    }
    let chart = Chart::for_point(x);
    let m = local_moments(model, chart);
    Ok(match chart {
        Chart::Direct(_) => MomentBundle {
            x,
            a2: m.a2,
            b2: m.b2,
            c: m.c,
            e2: m.core,
        },
        Chart::Reciprocal(_) => {
            let n = model.degree as f64;
            let ln_s = x.abs().ln();
            let pow = |e: f64| (e * ln_s).exp();
            MomentBundle {
                x,
                a2: m.a2 * pow(2.0 * n),
                b2: m.b2 * pow(2.0 * n - 2.0),
                c: m.c * pow(2.0 * n - 1.0) * x.signum(),
                e2: m.core * pow(4.0 * n - 4.0),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Signed, ToPrimitive, Zero};
    use proptest::prelude::*;

    fn rational(x: f64) -> BigRational {
        BigRational::from_float(x).unwrap()
    }

    /// Exact rational moments for unit increments, the oracle for the f64 path.
    fn exact_moments(n: usize, x: f64) -> [BigRational; 4] {
        let xr = rational(x);
        let mut a2 = BigRational::zero();
        let mut b2 = BigRational::zero();
        let mut c = BigRational::zero();
        for k in 0..=n {
            let mut a = BigRational::zero();
            let mut b = BigRational::zero();
            for j in k..=n {
                a += num_traits::pow(xr.clone(), j);
                if j > 0 {
                    b += BigRational::from_integer(BigInt::from(j)) * num_traits::pow(xr.clone(), j - 1);
                }
            }
            a2 += &a * &a;
            b2 += &b * &b;
            c += &a * &b;
        }
        let e2 = &a2 * &b2 - &c * &c;
        [a2, b2, c, e2]
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight_a(0, 1.0, 2).unwrap(), 3.0);
        assert_eq!(weight_a(2, 0.0, 5).unwrap(), 0.0);
        assert_eq!(weight_a(1, 0.5, 3).unwrap(), 0.5 + 0.25 + 0.125);
        assert_eq!(weight_b(0, 1.0, 2).unwrap(), 3.0);
        assert_eq!(weight_b(2, 0.0, 5).unwrap(), 0.0);
        assert_eq!(weight_b(1, 0.5, 3).unwrap(), 1.0 + 2.0 * 0.5 + 3.0 * 0.25);
    }

    #[test]
    fn weight_index_out_of_range() {
        assert_eq!(
            weight_a(4, 0.3, 3),
            Err(ModelError::IndexOutOfRange { index: 4, degree: 3 })
        );
        assert!(weight_b(9, 0.3, 3).is_err());
    }

    #[test]
    fn moment_examples() {
        let m = moments(&CoefficientModel::brownian(2, 0.0).unwrap(), 1.0).unwrap();
        assert_eq!((m.a2, m.b2, m.c, m.e2), (14.0, 22.0, 17.0, 19.0));
        let m = moments(&CoefficientModel::brownian(5, 0.0).unwrap(), 0.0).unwrap();
        assert_eq!((m.a2, m.b2, m.c, m.e2), (1.0, 2.0, 1.0, 1.0));
    }

    #[test]
    fn e2_near_one_matches_exact_arithmetic() {
        let model = CoefficientModel::brownian(30, 0.0).unwrap();
        for &x in &[0.999, 0.9995, 1.0, 1.0005, 1.001, -0.999, -1.0] {
            let m = moments(&model, x).unwrap();
            let [a2, b2, c, e2] = exact_moments(30, x);
            assert!(m.e2 >= 0.0);
            for (got, want) in [(m.a2, a2), (m.b2, b2), (m.c, c), (m.e2, e2)] {
                let want = want.to_f64().unwrap();
                assert!((got - want).abs() <= 1e-12 * want.abs(), "x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn reciprocal_chart_matches_exact_arithmetic() {
        for &(n, x) in &[(3usize, 1.5f64), (7, -2.0), (12, 1.25), (5, 40.0), (4, -1.0009765625)] {
            let model = CoefficientModel::brownian(n, 0.0).unwrap();
            let m = moments(&model, x).unwrap();
            let exact = exact_moments(n, x);
            let got = [m.a2, m.b2, m.c, m.e2];
            for (g, w) in got.iter().zip(exact.iter()) {
                let w = w.to_f64().unwrap();
                assert!((g - w).abs() <= 1e-11 * w.abs(), "n={n} x={x}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn reciprocal_core_is_regular_at_infinity() {
        // Far out the reduced Gram determinant tends to n for unit increments.
        let model = CoefficientModel::brownian(6, 0.0).unwrap();
        let m = local_moments(&model, Chart::Reciprocal(1e-12));
        assert!((m.core - 6.0).abs() < 1e-9);
    }

    #[test]
    fn weights_match_exact_sums() {
        for n in [1usize, 4, 17] {
            for &x in &[-1.9, -1.0, -0.9995, -0.3, 0.0, 0.7, 0.9991, 1.0, 1.0004, 1.6, 2.0] {
                let xr = rational(x);
                for k in 0..=n {
                    let mut a = BigRational::zero();
                    let mut b = BigRational::zero();
                    for j in k..=n {
                        a += num_traits::pow(xr.clone(), j);
                        if j > 0 {
                            b += BigRational::from_integer(j.into()) * num_traits::pow(xr.clone(), j - 1);
                        }
                    }
                    for (got, want) in [(weight_a(k, x, n).unwrap(), a), (weight_b(k, x, n).unwrap(), b)] {
                        let scale = if want.is_zero() { BigRational::one() } else { want.abs() };
                        let err = (rational(got) - &want).abs() / scale;
                        assert!(err.to_f64().unwrap() <= 1e-12, "n={n} k={k} x={x}");
                    }
                }
            }
        }
    }

    #[test]
    fn constructor_rejects_bad_models() {
        assert_eq!(CoefficientModel::new(0, 0.0, vec![1.0]), Err(ModelError::ZeroDegree));
        assert!(matches!(
            CoefficientModel::new(2, 0.0, vec![1.0]),
            Err(ModelError::SigmaLength { .. })
        ));
        assert_eq!(
            CoefficientModel::new(1, 0.0, vec![1.0, -1.0]),
            Err(ModelError::InvalidSigma { index: 1 })
        );
        assert_eq!(
            CoefficientModel::new(1, 0.0, vec![0.0, 0.0]),
            Err(ModelError::AllSigmaZero)
        );
        assert_eq!(
            CoefficientModel::new(1, f64::NAN, vec![1.0, 1.0]),
            Err(ModelError::NonFiniteSlope)
        );
        assert!(moments(&CoefficientModel::brownian(1, 0.0).unwrap(), f64::INFINITY).is_err());
    }

    #[test]
    fn model_serde_validates() {
        let bad = r#"{"degree":1,"slope":0.0,"sigma":[0.0,0.0]}"#;
        assert!(serde_json::from_str::<CoefficientModel>(bad).is_err());
        let m = CoefficientModel::brownian_from_first(3, 1.5).unwrap();
        let back: CoefficientModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn cauchy_schwarz_holds(
            sigma in proptest::collection::vec(0.0f64..3.0, 2..25),
            x in -3.0f64..3.0,
        ) {
            prop_assume!(sigma.iter().any(|&s| s > 0.0));
            let model = CoefficientModel::new(sigma.len() - 1, 0.0, sigma).unwrap();
            let m = moments(&model, x).unwrap();
            prop_assert!(m.a2 >= 0.0 && m.b2 >= 0.0 && m.e2 >= 0.0);
            prop_assert!(m.c * m.c <= m.a2 * m.b2 * (1.0 + 1e-12));
        }

        #[test]
        fn moments_are_homogeneous(
            n in 1usize..20,
            x in -2.5f64..2.5,
            lambda in 0.1f64..4.0,
        ) {
            let base = CoefficientModel::brownian(n, 0.0).unwrap();
            let m0 = moments(&base, x).unwrap();
            let m1 = moments(&base.scaled(lambda).unwrap(), x).unwrap();
            let l2 = lambda * lambda;
            let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * b.abs().max(1e-300);
            prop_assert!(close(m1.a2, l2 * m0.a2, 1e-12));
            prop_assert!(close(m1.b2, l2 * m0.b2, 1e-12));
            prop_assert!((m1.c - l2 * m0.c).abs() <= 1e-12 * l2 * (m0.a2 * m0.b2).sqrt());
            prop_assert!((m1.e2 - l2 * l2 * m0.e2).abs() <= 1e-9 * l2 * l2 * m0.a2 * m0.b2);
        }

        #[test]
        fn seam_forms_agree(
            n in 1usize..60,
            offset in SUMMATION_SEAM..(2.0 * SUMMATION_SEAM),
            above in any::<bool>(),
        ) {
            let y = if above { 1.0 + offset } else { 1.0 - offset };
            for len in [n, n / 2] {
                let (g1, g2) = (geo_closed(len, y), geo_direct(len, y));
                prop_assert!((g1 - g2).abs() <= 1e-10 * g2.abs());
                let (d1, d2) = (dgeo_closed(len, y), dgeo_direct(len, y));
                prop_assert!((d1 - d2).abs() <= 1e-10 * d2.abs().max(1.0));
            }
        }

        #[test]
        fn weight_b_is_derivative_of_weight_a(
            n in 1usize..9,
            k_frac in 0.0f64..1.0,
            x in -2.0f64..2.0,
        ) {
            let k = ((n as f64) * k_frac) as usize;
            let h = 1e-5;
            let fd = (weight_a(k, x + h, n).unwrap() - weight_a(k, x - h, n).unwrap()) / (2.0 * h);
            let b = weight_b(k, x, n).unwrap();
            prop_assert!((fd - b).abs() <= 1e-6 * b.abs().max(1.0), "fd={fd} b={b}");
        }
    }
}
