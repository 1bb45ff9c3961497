//! Grid sign-change counting. Every counted change brackets a distinct
//! root, so the count is a lower bound on the true one.

/// Grid points per unit of degree.
const POINTS_PER_DEGREE: usize = 64;

/// Bisection depth when the grid hints at a pair of close roots.
const REFINE_DEPTH: u32 = 30;

/// `P(x)` for `|x| ≤ 1`, else `|x|^{−n} P(x)`, which has the same sign and
/// stays finite.
pub(crate) fn eval(poly: &[f64], x: f64) -> f64 {
    if x.abs() <= 1.0 {
        poly.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    } else {
        let u = 1.0 / x;
        let n = poly.len() - 1;
        let rev = poly.iter().fold(0.0, |acc, &c| acc * u + c);
        if n % 2 == 1 && x < 0.0 {
            -rev
        } else {
            rev
        }
    }
}

/// `s ∈ [−2, 2]` onto the extended line: identity on `[−1, 1]`, `±1/(2 − |s|)`
/// beyond.
fn to_line(s: f64) -> f64 {
    if s.abs() <= 1.0 {
        s
    } else {
        s.signum() / (2.0 - s.abs())
    }
}

fn to_param(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        x
    } else if x.is_infinite() {
        2.0 * x.signum()
    } else {
        x.signum() * (2.0 - 1.0 / x.abs())
    }
}

fn changes_between(poly: &[f64], a: f64, fa: f64, b: f64, fb: f64, depth: u32) -> usize {
    if depth == 0 {
        return 0;
    }
    let m = 0.5 * (a + b);
    if !(m > a && m < b) {
        return 0;
    }
    let fm = eval(poly, to_line(m));
    if fm == 0.0 {
        return 0;
    }
    if fm.signum() != fa.signum() {
        return 2;
    }
    if fm.abs() >= fa.abs().min(fb.abs()) {
        return 0;
    }
    changes_between(poly, a, fa, m, fm, depth - 1).max(changes_between(poly, m, fm, b, fb, depth - 1))
}

/// Sign changes of `P` on a grid over the open interval `(lo, hi)`, with
/// extra bisection wherever `|P|` dips between two same-sign samples.
pub(crate) fn count(poly: &[f64], lo: f64, hi: f64) -> usize {
    let (a, b) = (to_param(lo), to_param(hi));
    let points = POINTS_PER_DEGREE * poly.len();
    let h = (b - a) / points as f64;
    let samples: Vec<(f64, f64)> = (1..points)
        .map(|i| {
            let s = a + h * i as f64;
            (s, eval(poly, to_line(s)))
        })
        .filter(|(_, f)| *f != 0.0)
        .collect();
    let mut total = 0;
    for w in samples.windows(2) {
        let ((sa, fa), (sb, fb)) = (w[0], w[1]);
        total += if fa.signum() != fb.signum() {
            1
        } else {
            changes_between(poly, sa, fa, sb, fb, REFINE_DEPTH)
        };
    }
    total
}
