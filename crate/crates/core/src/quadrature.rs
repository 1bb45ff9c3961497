//! Globally adaptive 7/15-point Gauss–Kronrod integration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::numeric::Neumaier;

/// Kronrod abscissae on [0, 1); odd entries are also Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

pub const DEFAULT_PANEL_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOutcome {
    pub value: f64,
    pub abs_error: f64,
    pub panels: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

fn kronrod<F, E>(f: &mut F, lo: f64, hi: f64) -> Result<Panel, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center)?;
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let res_abs = res_abs * scale;
    let res_asc = res_asc * scale;
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel {
        lo,
        hi,
        value: res_k * half,
        error,
    })
}

/// Integrates `f` over `[breaks[0], breaks.last()]`, with the interior
/// breakpoints as forced panel boundaries.
///
/// The worst panel is bisected until the summed error estimate drops below
/// `tol` or `budget` panels exist. The result is summed in panel order so it
/// does not depend on the refinement history.
pub fn integrate<F, E>(mut f: F, breaks: &[f64], tol: f64, budget: usize) -> Result<QuadOutcome, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let mut heap = BinaryHeap::new();
    let mut err_total = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let p = kronrod(&mut f, w[0], w[1])?;
            err_total += p.error;
            heap.push(p);
        }
    }
    let mut converged = err_total <= tol;
    while !converged && heap.len() < budget {
        let worst = match heap.peek() {
            Some(p) => *p,
            None => break,
        };
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) {
            break;
        }
        heap.pop();
        let left = kronrod(&mut f, worst.lo, mid)?;
        let right = kronrod(&mut f, mid, worst.hi)?;
        err_total += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if err_total <= tol {
            err_total = heap.iter().map(|p| p.error).sum();
            converged = err_total <= tol;
        }
    }
    let mut panels = heap.into_vec();
    panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut value = Neumaier::default();
    let mut error = Neumaier::default();
    for p in &panels {
        value.add(p.value);
        error.add(p.error);
    }
    let abs_error = error.value();
    Ok(QuadOutcome {
        value: value.value(),
        abs_error,
        panels: panels.len(),
        converged: abs_error <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn run(f: impl Fn(f64) -> f64, breaks: &[f64], tol: f64) -> QuadOutcome {
        integrate(|x| Ok::<_, Infallible>(f(x)), breaks, tol, DEFAULT_PANEL_BUDGET).unwrap()
    }

    #[test]
    fn polynomial_is_exact_in_one_panel() {
        let r = run(|x| x.powi(13) - 3.0 * x.powi(7), &[0.0, 1.0], 1e-14);
        assert!((r.value - (1.0 / 14.0 - 3.0 / 8.0)).abs() < 1e-15);
        assert_eq!(r.panels, 1);
    }

    #[test]
    fn sharp_peak_is_resolved() {
        let eps = 1e-4;
        let r = run(|x| eps / (x * x + eps * eps), &[-1.0, 0.0, 1.0], 1e-10);
        let exact = 2.0 * (1.0 / eps).atan();
        assert!(r.converged);
        assert!((r.value - exact).abs() < 1e-9);
    }

    #[test]
    fn endpoint_singularity() {
        let r = run(|x| 1.0 / x.sqrt(), &[0.0, 1.0], 1e-10);
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let r = integrate(|x: f64| Ok::<_, Infallible>((1.0 / x).sin()), &[1e-9, 1.0], 1e-15, 20).unwrap();
        assert!(!r.converged);
        assert_eq!(r.panels, 20);
    }

    #[test]
    fn integrand_errors_propagate() {
        let r = integrate(|_| Err::<f64, _>("boom"), &[0.0, 1.0], 1e-8, 10);
        assert_eq!(r, Err("boom"));
    }
}
