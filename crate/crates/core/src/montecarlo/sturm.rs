//! Exact distinct-root counting with Sturm sequences over the integers.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Integer polynomial, coefficients from `x^0` upwards, no trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct IntPoly(Vec<BigInt>);

/// An `f64` as `mant · 2^exp` with an odd (or zero) mantissa.
pub(crate) fn decompose(v: f64) -> (BigInt, i32) {
    if v == 0.0 {
        return (BigInt::zero(), 0);
    }
    let bits = v.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut mant, mut exp) = if raw_exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), raw_exp - 1075)
    };
    let tz = mant.trailing_zeros();
    mant >>= tz;
    exp += tz as i32;
    let m = BigInt::from(mant);
    (if v < 0.0 { -m } else { m }, exp)
}

impl IntPoly {
    fn trimmed(mut c: Vec<BigInt>) -> Self {
        while c.last().is_some_and(Zero::is_zero) {
            c.pop();
        }
        IntPoly(c)
    }

    /// Positive integer multiple of `Σ (hi_i + lo_i) x^i`, summed exactly.
    pub fn from_f64_sums(coeffs: &[[f64; 2]]) -> Self {
        let parts: Vec<[(BigInt, i32); 2]> = coeffs.iter().map(|[h, l]| [decompose(*h), decompose(*l)]).collect();
        let low = parts
            .iter()
            .flatten()
            .filter(|(m, _)| !m.is_zero())
            .map(|(_, e)| *e)
            .min()
            .unwrap_or(0);
        let c = parts
            .into_iter()
            .map(|pair| pair.into_iter().map(|(m, e)| m << (e - low) as usize).sum())
            .collect();
        IntPoly::trimmed(c).primitive()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    fn lead(&self) -> &BigInt {
        self.0.last().expect("nonzero polynomial")
    }

    fn primitive(self) -> Self {
        let g = self.0.iter().fold(BigInt::zero(), |g, c| g.gcd(c));
        if g.is_zero() || g.is_one() {
            self
        } else {
            IntPoly(self.0.into_iter().map(|c| c / &g).collect())
        }
    }

    pub fn derivative(&self) -> Self {
        let c = self
            .0
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * BigInt::from(i))
            .collect();
        IntPoly::trimmed(c)
    }

    fn neg(self) -> Self {
        IntPoly(self.0.into_iter().map(|c| -c).collect())
    }

    fn div_exact(self, d: &BigInt) -> Self {
        IntPoly(
            self.0
                .into_iter()
                .map(|c| {
                    let (q, r) = c.div_rem(d);
                    debug_assert!(r.is_zero(), "inexact division in remainder sequence");
                    q
                })
                .collect(),
        )
    }

    /// `lc(b)^{deg a − deg b + 1} · a  mod  b`, for `deg a ≥ deg b`.
    fn prem(&self, b: &Self) -> Self {
        let n = b.degree();
        let l = b.lead();
        let mut a = self.0.clone();
        let mut spare = self.degree() + 1 - n;
        while a.len() > n {
            let k = a.len() - 1;
            let q = a[k].clone();
            for c in a.iter_mut() {
                *c *= l;
            }
            for (j, bc) in b.0.iter().enumerate() {
                a[k - n + j] -= &q * bc;
            }
            spare -= 1;
            while a.last().is_some_and(Zero::is_zero) {
                a.pop();
            }
        }
        if spare > 0 {
            let f = l.pow(spare as u32);
            a.iter_mut().for_each(|c| *c *= &f);
        }
        IntPoly(a)
    }

    /// Sign of the value at `mant · 2^exp`.
    fn sign_at(&self, mant: &BigInt, exp: i32) -> Sign {
        let mut acc = BigInt::zero();
        if exp >= 0 {
            let x = mant << exp as usize;
            for c in self.0.iter().rev() {
                acc = acc * &x + c;
            }
        } else {
            // 2^{−exp·deg} · p(x), by Horner with scaled coefficients.
            let s = (-exp) as usize;
            for (k, c) in self.0.iter().rev().enumerate() {
                acc = acc * mant + (c << (s * k));
            }
        }
        acc.sign()
    }
}

/// An endpoint approached from one side.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Probe {
    /// `x → −∞` or `x → +∞`.
    Infinite { positive: bool },
    /// `x → v` from above (`right`) or below.
    Finite { v: f64, right: bool },
}

impl Probe {
    fn sign_of(&self, p: &IntPoly) -> Sign {
        match *self {
            Probe::Infinite { positive } => {
                let s = p.lead().sign();
                if positive || p.degree().is_multiple_of(2) {
                    s
                } else {
                    -s
                }
            }
            Probe::Finite { v, right } => {
                let (m, e) = decompose(v);
                let mut q = p.clone();
                let mut k = 0;
                loop {
                    let s = q.sign_at(&m, e);
                    if s != Sign::NoSign || q.is_zero() {
                        return if right || k % 2 == 0 { s } else { -s };
                    }
                    q = q.derivative();
                    k += 1;
                }
            }
        }
    }
}

/// The Sturm sequence of `p`, up to positive factors per member.
pub(crate) struct SturmChain(Vec<IntPoly>);

impl SturmChain {
    pub fn new(p: IntPoly) -> Self {
        let mut chain = vec![p.clone(), p.derivative()];
        if chain[1].is_zero() {
            chain.pop();
            return SturmChain(chain);
        }
        // Subresultant scaling with absolute values, so every member is a
        // positive multiple of the classical negated remainder.
        let mut psi = BigInt::one();
        let mut prev_delta: Option<usize> = None;
        loop {
            let (a, b) = (&chain[chain.len() - 2], &chain[chain.len() - 1]);
            if b.degree() == 0 {
                break;
            }
            let delta = a.degree() - b.degree();
            let beta = match prev_delta {
                None => BigInt::one(),
                Some(d_prev) => {
                    let lc_a = a.lead().abs();
                    psi = lc_a.pow(d_prev as u32) / psi.pow((d_prev - 1) as u32);
                    lc_a * psi.pow(delta as u32)
                }
            };
            let r = a.prem(b);
            if r.is_zero() {
                break;
            }
            let lc_sign_neg = b.lead().is_negative() && (delta + 1) % 2 == 1;
            let r = r.div_exact(&beta);
            let next = if lc_sign_neg { r } else { r.neg() };
            chain.push(next);
            prev_delta = Some(delta);
        }
        SturmChain(chain)
    }

    fn variations(&self, at: Probe) -> usize {
        let mut count = 0;
        let mut last = Sign::NoSign;
        for p in &self.0 {
            let s = at.sign_of(p);
            if s == Sign::NoSign {
                continue;
            }
            if last != Sign::NoSign && s != last {
                count += 1;
            }
            last = s;
        }
        count
    }

    /// Distinct roots strictly between the two probes.
    pub fn count(&self, lo: Probe, hi: Probe) -> usize {
        self.variations(lo).saturating_sub(self.variations(hi))
    }

    /// Whether the polynomial has no repeated roots.
    #[cfg(test)]
    pub fn is_squarefree(&self) -> bool {
        self.0.last().is_some_and(|p| p.degree() == 0)
    }

    /// Whether `v` is a root of the leading member.
    pub fn is_root(&self, v: f64) -> bool {
        let (m, e) = decompose(v);
        self.0[0].sign_at(&m, e) == Sign::NoSign
    }
}
