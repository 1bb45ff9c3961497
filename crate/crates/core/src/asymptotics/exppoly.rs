//! Exponential polynomials `Σ p_i(t) e^{r_i t}` with dyadic coefficients,
//! and a log-scaled number type for combining them.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::numeric::{two_prod, two_sum, DoubleDouble};

/// Below this `t` blocks are summed from their Taylor series.
pub(crate) const SERIES_SEAM: f64 = 1.0;

/// Taylor terms kept past the leading order; enough for `t ≤ 1` at rate 6.
const SERIES_TERMS: usize = 96;

/// Orders scanned for the leading Taylor term.
const MAX_VANISHING_ORDER: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ExpPoly {
    /// `(rate, coefficients of t^0, t^1, …)`, sorted by rate, rates unique.
    terms: Vec<(i32, Vec<f64>)>,
}

impl ExpPoly {
    pub fn new(terms: &[(i32, &[f64])]) -> Self {
        let mut out = ExpPoly { terms: Vec::new() };
        for (rate, coeffs) in terms {
            out.push(*rate, coeffs.to_vec());
        }
        out
    }

    fn push(&mut self, rate: i32, coeffs: Vec<f64>) {
        match self.terms.binary_search_by_key(&rate, |(r, _)| *r) {
            Ok(i) => {
                let slot = &mut self.terms[i].1;
                if slot.len() < coeffs.len() {
                    slot.resize(coeffs.len(), 0.0);
                }
                for (s, c) in slot.iter_mut().zip(coeffs) {
                    *s += c;
                }
            }
            Err(i) => self.terms.insert(i, (rate, coeffs)),
        }
        self.terms.retain(|(_, c)| c.iter().any(|&v| v != 0.0));
        for (_, c) in &mut self.terms {
            while c.last() == Some(&0.0) {
                c.pop();
            }
        }
    }

    fn push_exact(&mut self, rate: i32, coeffs: Vec<f64>) {
        if let Ok(i) = self.terms.binary_search_by_key(&rate, |(r, _)| *r) {
            for (s, c) in self.terms[i].1.iter().zip(&coeffs) {
                assert!(two_sum(*s, *c).1 == 0.0, "inexact coefficient sum");
            }
        }
        self.push(rate, coeffs);
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (rate, coeffs) in &other.terms {
            out.push(*rate, coeffs.clone());
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        ExpPoly {
            terms: self
                .terms
                .iter()
                .map(|(r, c)| (*r, c.iter().map(|v| v * factor).collect()))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Product; every coefficient must stay exactly representable.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = ExpPoly { terms: Vec::new() };
        for (ra, ca) in &self.terms {
            for (rb, cb) in &other.terms {
                let mut coeffs = vec![0.0; ca.len() + cb.len() - 1];
                for (i, &x) in ca.iter().enumerate() {
                    for (j, &y) in cb.iter().enumerate() {
                        let (p, perr) = two_prod(x, y);
                        let (s, serr) = two_sum(coeffs[i + j], p);
                        assert!(perr == 0.0 && serr == 0.0, "inexact coefficient product");
                        coeffs[i + j] = s;
                    }
                }
                out.push_exact(ra + rb, coeffs);
            }
        }
        out
    }

    /// Multiplies by `t`.
    pub fn times_t(&self) -> Self {
        ExpPoly {
            terms: self
                .terms
                .iter()
                .map(|(r, c)| (*r, std::iter::once(0.0).chain(c.iter().copied()).collect()))
                .collect(),
        }
    }

    #[cfg(test)]
    /// The same expression in `−t`.
    pub fn mirrored(&self) -> Self {
        let mut terms: Vec<_> = self
            .terms
            .iter()
            .map(|(r, c)| {
                let flipped = c
                    .iter()
                    .enumerate()
                    .map(|(j, v)| if j % 2 == 1 { -v } else { *v })
                    .collect();
                (-r, flipped)
            })
            .collect();
        terms.sort_by_key(|(r, _)| *r);
        ExpPoly { terms }
    }

    pub fn terms(&self) -> &[(i32, Vec<f64>)] {
        &self.terms
    }

    /// Plain double evaluation, valid for any moderate `t`.
    pub fn eval_plain(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|(r, c)| (*r as f64 * t).exp() * horner(c, t))
            .sum()
    }

    /// Exact Taylor coefficients at `t = 0` up to `t^order`.
    fn taylor(&self, order: usize) -> Vec<BigRational> {
        let mut fact = vec![BigInt::from(1)];
        for m in 1..=order {
            let next = &fact[m - 1] * BigInt::from(m);
            fact.push(next);
        }
        let mut out = vec![BigRational::zero(); order + 1];
        for (rate, coeffs) in &self.terms {
            let r = BigInt::from(*rate);
            let mut rpow = vec![BigInt::from(1)];
            for m in 1..=order {
                let next = &rpow[m - 1] * &r;
                rpow.push(next);
            }
            for (j, &c) in coeffs.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let c = BigRational::from_float(c).expect("finite coefficient");
                for (k, slot) in out[j..=order].iter_mut().enumerate() {
                    *slot += &c * BigRational::new(rpow[k].clone(), fact[k].clone());
                }
            }
        }
        out
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc.mul_add(t, c))
}

/// `t^order · Σ coeffs[i] t^i`, truncated Taylor expansion at 0.
#[derive(Debug, Clone)]
pub(crate) struct Series {
    pub order: usize,
    pub coeffs: Vec<f64>,
}

impl Series {
    pub fn of(poly: &ExpPoly) -> Self {
        let probe = poly.taylor(MAX_VANISHING_ORDER);
        let order = probe
            .iter()
            .position(|c| !c.is_zero())
            .expect("exponential polynomial vanishes to very high order");
        let full = poly.taylor(order + SERIES_TERMS);
        let coeffs = full[order..]
            .iter()
            .map(|c| c.to_f64().expect("representable coefficient"))
            .collect();
        Series { order, coeffs }
    }
}

/// `mant · e^{log}`: keeps huge and tiny intermediates representable.
///
/// The log is double-double so that exponents like `12t` can cancel
/// between numerator and denominator without losing the remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Scaled {
    pub mant: f64,
    log: DoubleDouble,
}

impl Scaled {
    pub fn new(mant: f64, log: f64) -> Self {
        Scaled {
            mant,
            log: DoubleDouble::from_f64(log),
        }
    }

    pub fn plain(v: f64) -> Self {
        Scaled::new(v, 0.0)
    }

    pub fn t_pow(t: f64, p: f64) -> Self {
        Scaled {
            mant: 1.0,
            log: DoubleDouble::from_product(p, t.ln()),
        }
    }

    /// `mant · e^{rate·t} · t^{power}`
    fn exp_scaled(mant: f64, rate: f64, t: f64, power: f64) -> Self {
        Scaled {
            mant,
            log: DoubleDouble::from_product(rate, t).add(DoubleDouble::from_product(power, t.ln())),
        }
    }

    #[cfg(test)]
    pub fn log(self) -> f64 {
        self.log.value()
    }

    pub fn value(self) -> f64 {
        if self.mant == 0.0 || self.mant.is_nan() {
            return self.mant;
        }
        let l = self.log.add(DoubleDouble::from_f64(self.mant.abs().ln()));
        self.mant.signum() * l.value().exp()
    }

    pub fn mul(self, o: Self) -> Self {
        Scaled {
            mant: self.mant * o.mant,
            log: self.log.add(o.log),
        }
    }

    pub fn div(self, o: Self) -> Self {
        Scaled {
            mant: self.mant / o.mant,
            log: self.log.sub(o.log),
        }
    }

    pub fn powf(self, p: f64) -> Self {
        Scaled {
            mant: self.mant.powf(p),
            log: self.log.scale(p),
        }
    }

    pub fn sqrt(self) -> Self {
        self.powf(0.5)
    }

    pub fn neg(self) -> Self {
        Scaled {
            mant: -self.mant,
            log: self.log,
        }
    }

    pub fn add(self, o: Self) -> Self {
        if self.mant == 0.0 {
            return o;
        }
        if o.mant == 0.0 {
            return self;
        }
        let top = if self.log.value() >= o.log.value() {
            self.log
        } else {
            o.log
        };
        let shift = |s: Self| s.mant * s.log.sub(top).value().exp();
        Scaled {
            mant: shift(self) + shift(o),
            log: top,
        }
    }
}

/// An exponential polynomial with its cached Taylor data.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub poly: ExpPoly,
    pub series: Series,
}

impl Block {
    pub fn new(poly: ExpPoly) -> Self {
        let series = Series::of(&poly);
        Block { poly, series }
    }

    pub fn eval_series(&self, t: f64) -> Scaled {
        Scaled::exp_scaled(horner(&self.series.coeffs, t), 0.0, t, self.series.order as f64)
    }

    /// Factors out `e^{r_max t} t^{deg}` before summing.
    pub fn eval_direct(&self, t: f64) -> Scaled {
        let terms = self.poly.terms();
        let top = terms.iter().map(|(r, _)| *r).max().unwrap_or(0) as f64;
        let deg = terms.iter().map(|(_, c)| c.len()).max().unwrap_or(1) - 1;
        let inv = 1.0 / t;
        let mut mant = 0.0;
        for (r, c) in terms {
            // Σ c_j t^{j−deg}, by Horner in 1/t.
            let shift = deg + 1 - c.len();
            let mut p = 0.0f64;
            for &cj in c.iter() {
                p = p.mul_add(inv, cj);
            }
            let p = p * inv.powi(shift as i32);
            mant += ((*r as f64 - top) * t).exp() * p;
        }
        Scaled::exp_scaled(mant, top, t, deg as f64)
    }

    pub fn eval(&self, t: f64) -> Scaled {
        if t < SERIES_SEAM {
            self.eval_series(t)
        } else {
            self.eval_direct(t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_of_exponential_shift() {
        // e^{2t} − 1 − 2t = 2t² + 4t³/3 + …
        let p = ExpPoly::new(&[(2, &[1.0]), (0, &[-1.0, -2.0])]);
        let s = Series::of(&p);
        assert_eq!(s.order, 2);
        assert_eq!(s.coeffs[0], 2.0);
        assert!((s.coeffs[1] - 4.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn branches_agree_on_simple_block() {
        let b = Block::new(ExpPoly::new(&[(2, &[1.0]), (0, &[-1.0, -2.0])]));
        let exact = |t: f64| {
            if t < 0.1 {
                // Σ_{k≥2} (2t)^k / k!
                let (mut term, mut sum) = (2.0 * t * t, 0.0);
                for k in 3..30 {
                    sum += term;
                    term *= 2.0 * t / k as f64;
                }
                sum
            } else {
                (2.0 * t).exp_m1() - 2.0 * t
            }
        };
        for &t in &[1e-6, 0.3, 0.9, 1.0] {
            let v = b.eval_series(t).value();
            assert!((v - exact(t)).abs() <= 1e-14 * exact(t), "t={t}");
        }
        for &t in &[1.0, 1.1, 2.5, 30.0] {
            let v = b.eval_direct(t).value();
            assert!((v - exact(t)).abs() <= 1e-14 * exact(t), "t={t}");
        }
    }

    #[test]
    fn direct_branch_survives_overflow_range() {
        let b = Block::new(ExpPoly::new(&[(6, &[0.0, 1.0]), (0, &[1.0])]));
        let v = b.eval_direct(500.0);
        assert!((v.log() - (3000.0 + 500f64.ln())).abs() < 1e-9);
        assert!((v.mant - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_matches_pointwise_product() {
        let p = ExpPoly::new(&[(2, &[1.0, -3.0]), (0, &[0.5])]);
        let q = ExpPoly::new(&[(1, &[2.0, 0.0, 1.0]), (-1, &[-4.0])]);
        let pq = p.mul(&q).times_t();
        for &t in &[0.3, 1.0, 2.2] {
            let want = t * p.eval_plain(t) * q.eval_plain(t);
            assert!((pq.eval_plain(t) - want).abs() <= 1e-13 * want.abs());
        }
    }

    #[test]
    fn mirror_flips_odd_powers_and_rates() {
        let p = ExpPoly::new(&[(3, &[1.0, 2.0, 3.0])]);
        let m = p.mirrored();
        assert_eq!(m.terms(), &[(-3, vec![1.0, -2.0, 3.0])]);
        for &t in &[0.5, 1.7] {
            assert!((m.eval_plain(t) - p.eval_plain(-t)).abs() < 1e-15);
        }
    }

    #[test]
    fn scaled_arithmetic() {
        let a = Scaled::new(3.0, 800.0);
        let b = Scaled::new(2.0, 798.0);
        let q = a.div(b).value();
        assert!((q - 1.5 * 2f64.exp()).abs() < 1e-13);
        let s = a.add(b.neg());
        assert!((s.mant - (3.0 - 2.0 * (-2f64).exp())).abs() < 1e-15);
        assert_eq!(Scaled::plain(-4.0).value(), -4.0);
    }
}
