//! Expansion functions near `x = ±1`, their regularized integrals, and the
//! closed asymptotic formulas for the expected number of crossings.

mod blocks;
mod exppoly;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{integrate, DEFAULT_PANEL_BUDGET};
use blocks::{block, block_poly, family_value, s_offset_value, BlockId, BranchAlgebra, ScaledAlgebra};
use exppoly::SERIES_SEAM;

/// Constant in the log law, as printed.
pub const R_SUM_PRINTED: f64 = 1.920134478;
/// Coefficient of `K²/(nπ)`, as printed.
pub const K2_SUM_PRINTED: f64 = 3.126508929;
pub const C1_ODD: f64 = 1.715215531;
pub const C1_EVEN: f64 = -0.7200279388;

/// Tolerance used when checking computed integrals against printed ones.
pub const AUDIT_TOLERANCE: f64 = 1e-6;

/// Absolute tolerance each regularized integral is computed to.
pub const INTEGRAL_TOLERANCE: f64 = 1e-10;

/// End of the directly integrated range.
const TAIL_START: f64 = 40.0;
/// Exponentially decaying integrands are negligible (< 1e-25) past this.
const EXP_CUTOFF: f64 = 80.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticError {
    #[error("expansion argument must be positive and finite, got {0}")]
    Domain(f64),
    #[error("{name}: tolerance not reached, best estimate {value} with error {abs_error}")]
    ToleranceNotReached {
        name: &'static str,
        value: f64,
        abs_error: f64,
    },
    #[error("degree must be at least 1")]
    ZeroDegree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn of(n: usize) -> Self {
        if n % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn c1(self) -> f64 {
        match self {
            Parity::Odd => C1_ODD,
            Parity::Even => C1_EVEN,
        }
    }
}

/// Outer families live at `x = −1 − t/n`, inner ones at `x = −1 + t/(n + t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExpansionFamily {
    R1,
    S1,
    R2,
    S2(Parity),
    R3,
    S3,
    R4,
    S4(Parity),
    G21Outer,
    G31Outer,
    G51Outer,
    G21Inner,
    G31Inner,
    G51Inner,
}

impl ExpansionFamily {
    pub const ALL: [ExpansionFamily; 16] = [
        ExpansionFamily::R1,
        ExpansionFamily::S1,
        ExpansionFamily::R2,
        ExpansionFamily::S2(Parity::Odd),
        ExpansionFamily::S2(Parity::Even),
        ExpansionFamily::R3,
        ExpansionFamily::S3,
        ExpansionFamily::R4,
        ExpansionFamily::S4(Parity::Odd),
        ExpansionFamily::S4(Parity::Even),
        ExpansionFamily::G21Outer,
        ExpansionFamily::G31Outer,
        ExpansionFamily::G51Outer,
        ExpansionFamily::G21Inner,
        ExpansionFamily::G31Inner,
        ExpansionFamily::G51Inner,
    ];

    /// Size of the stated remainder `value − tail_form` for large `t`.
    pub fn tail_error_scale(self, t: f64) -> f64 {
        use ExpansionFamily::*;
        match self {
            R1 | R2 => t.powi(-2),
            S1 | S2(_) => t.powf(-1.5),
            R3 => t.powf(-0.5) * (-t / 2.0).exp(),
            S3 => t * t * (-t).exp(),
            R4 => t.sqrt() * (-t).exp(),
            S4(_) => t * (-t).exp(),
            G21Outer | G31Outer => (-t).exp(),
            G51Outer => t.powf(1.5) * (-t).exp(),
            G21Inner => t.powi(4) * (-2.0 * t).exp(),
            G31Inner => t.powf(1.5) * (-2.0 * t).exp(),
            G51Inner => t.powf(3.5) * (-2.0 * t).exp(),
        }
    }
}

fn check_domain(t: f64) -> Result<(), AsymptoticError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(AsymptoticError::Domain(t))
    }
}

fn eval_unchecked(family: ExpansionFamily, t: f64) -> f64 {
    family_value(&mut ScaledAlgebra { t }, family).value()
}

/// Evaluates an expansion family at `t > 0`.
///
/// Small `t` goes through exact Taylor data, larger `t` through log-scaled
/// sums, so the closed form is used for every finite `t`.
pub fn eval_expansion(family: ExpansionFamily, t: f64) -> Result<f64, AsymptoticError> {
    check_domain(t)?;
    Ok(eval_unchecked(family, t))
}

/// Leading large-`t` behaviour of each family.
pub fn tail_form(family: ExpansionFamily, t: f64) -> Result<f64, AsymptoticError> {
    use ExpansionFamily::*;
    check_domain(t)?;
    Ok(match family {
        R1 | R2 => 0.5 * t.powf(-1.5),
        S1 | S2(_) => -0.125 / t.sqrt(),
        R3 | R4 => 0.5 / t,
        S3 | S4(_) => 0.75,
        G21Outer | G31Outer | G51Outer => 0.0,
        G21Inner => -8.0 * t,
        G31Inner => -1.0 / t.sqrt(),
        G51Inner => -2.0 * t.sqrt(),
    })
}

/// Relative gap between the Taylor-series and the direct evaluation of a
/// family where the two branches meet.
pub fn seam_disagreement(family: ExpansionFamily) -> f64 {
    let at = |series| family_value(&mut BranchAlgebra { t: SERIES_SEAM, series }, family).value();
    let (s, d) = (at(true), at(false));
    (s - d).abs() / d.abs()
}

/// Relative residuals of the reflection identities between inner and outer
/// pieces at `t`, each inner piece evaluated at `t` and its outer partner
/// at `−t` in plain double arithmetic.
pub fn mirror_residuals(t: f64) -> Result<Vec<(&'static str, f64)>, AsymptoticError> {
    use BlockId::*;
    check_domain(t)?;
    let plain = |id: BlockId| block_poly(id).eval_plain(-t);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let r1 = plain(Rad1).sqrt() / (2.0 * -t * plain(Den1));
    let r2 = 0.5 * plain(Rad2).sqrt() / (-t * plain(Den2));
    let s32 = block(Den3).eval(t).powf(2.0).mul(block(Rad3).eval(t).sqrt()).value();
    let s12 = plain(Den1).powi(2) * plain(Rad1).sqrt();
    let s43 = block(Rad4).eval(t).sqrt().mul(block(Den4).eval(t).powf(2.0)).value();
    let s23 = plain(Rad2).sqrt() * plain(Den2).powi(2);
    Ok(vec![
        ("R3/R1", rel(eval_unchecked(ExpansionFamily::R3, t), r1)),
        ("R4/R2", rel(eval_unchecked(ExpansionFamily::R4, t), r2)),
        ("S32/S12", rel(s32, s12)),
        ("S42/S22", rel(block(S42).eval(t).value(), plain(S22))),
        ("S43/S23", rel(s43, s23)),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TailKind {
    Algebraic,
    Exponential,
}

/// The ten regularized integrals over `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegularizedIntegral {
    R1,
    S1Reg,
    R2,
    S2Reg(Parity),
    R3Reg,
    S3Combo,
    R4Reg,
    S4Combo(Parity),
    K2Outer,
    K2Inner,
}

impl RegularizedIntegral {
    pub const ALL: [RegularizedIntegral; 12] = [
        RegularizedIntegral::R1,
        RegularizedIntegral::S1Reg,
        RegularizedIntegral::R2,
        RegularizedIntegral::S2Reg(Parity::Odd),
        RegularizedIntegral::S2Reg(Parity::Even),
        RegularizedIntegral::R3Reg,
        RegularizedIntegral::S3Combo,
        RegularizedIntegral::R4Reg,
        RegularizedIntegral::S4Combo(Parity::Odd),
        RegularizedIntegral::S4Combo(Parity::Even),
        RegularizedIntegral::K2Outer,
        RegularizedIntegral::K2Inner,
    ];

    pub fn name(self) -> &'static str {
        use RegularizedIntegral::*;
        match self {
            R1 => "INT_R1",
            S1Reg => "INT_S1_REG",
            R2 => "INT_R2",
            S2Reg(Parity::Odd) => "INT_S2_REG_ODD",
            S2Reg(Parity::Even) => "INT_S2_REG_EVEN",
            R3Reg => "INT_R3_REG",
            S3Combo => "INT_S3_COMBO",
            R4Reg => "INT_R4_REG",
            S4Combo(Parity::Odd) => "INT_S4_COMBO_ODD",
            S4Combo(Parity::Even) => "INT_S4_COMBO_EVEN",
            K2Outer => "INT_K2_OUTER",
            K2Inner => "INT_K2_INNER",
        }
    }

    /// Value printed alongside the expansion.
    pub fn printed(self) -> f64 {
        use RegularizedIntegral::*;
        match self {
            R1 => 0.734874192,
            S1Reg => -0.25460172372,
            R2 => 1.09564006,
            S2Reg(Parity::Odd) => -0.0322863,
            S2Reg(Parity::Even) => -0.4677136958,
            R3Reg => -0.28977126,
            S3Combo => 0.497593957,
            R4Reg => 0.3793914850,
            S4Combo(Parity::Odd) => 1.499908194,
            S4Combo(Parity::Even) => -0.4999082034,
            K2Outer => 1.593359902,
            K2Inner => 1.533149028,
        }
    }

    fn tail_kind(self) -> TailKind {
        use RegularizedIntegral::*;
        match self {
            R1 | S1Reg | R2 | S2Reg(_) => TailKind::Algebraic,
            _ => TailKind::Exponential,
        }
    }

    /// The integrand, including the `I[t > 1]` counter-terms.
    pub fn integrand(self, t: f64) -> f64 {
        use ExpansionFamily as F;
        use RegularizedIntegral::*;
        let ind = if t > 1.0 { 1.0 } else { 0.0 };
        let e = |f| eval_unchecked(f, t);
        match self {
            R1 => e(F::R1),
            S1Reg => s_with_offset(F::S1, t),
            R2 => e(F::R2),
            S2Reg(p) => s_with_offset(F::S2(p), t),
            R3Reg => e(F::R3) - ind / (2.0 * t),
            S3Combo => e(F::S3) - 2.0 * t * e(F::R3) + ind / 4.0,
            R4Reg => e(F::R4) - ind / (2.0 * t),
            S4Combo(p) => e(F::S4(p)) - 2.0 * t * e(F::R4) + ind / 4.0,
            K2Outer => e(F::R2) * e(F::G21Outer) + 2.0 * e(F::G31Outer) * e(F::G51Outer),
            K2Inner => e(F::R4) * e(F::G21Inner) + 2.0 * e(F::G31Inner) * e(F::G51Inner),
        }
    }
}

/// Past this `t`, `S + 1/(8√t)` is evaluated in its cancellation-free form.
const OFFSET_FORM_START: f64 = 5.0;

/// `S(t) + I[t>1]/(8√t)` for the S families with a `−1/(8√t)` tail.
fn s_with_offset(family: ExpansionFamily, t: f64) -> f64 {
    if t >= OFFSET_FORM_START {
        s_offset_value(&mut ScaledAlgebra { t }, family)
            .expect("offset form exists")
            .value()
    } else if t > 1.0 {
        eval_unchecked(family, t) + 1.0 / (8.0 * t.sqrt())
    } else {
        eval_unchecked(family, t)
    }
}

/// Value of a regularized integral with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralValue {
    pub value: f64,
    pub abs_error: f64,
}

type Never = std::convert::Infallible;

/// `∫_0^∞` of the combination, to [`INTEGRAL_TOLERANCE`].
///
/// `(0, 1]` is integrated in `s = √t`, `[1, 40]` directly, and the tail
/// either in `s = √(40/t)` (algebraic decay) or directly up to 80
/// (exponential decay).
pub fn regularized_integral(which: RegularizedIntegral) -> Result<IntegralValue, AsymptoticError> {
    let tol = INTEGRAL_TOLERANCE / 3.0;
    let g = |t: f64| which.integrand(t);
    let head = integrate(
        |s: f64| Ok::<_, Never>(2.0 * s * g(s * s)),
        &[0.0, 0.25, 0.5, 1.0],
        tol,
        DEFAULT_PANEL_BUDGET,
    )
    .unwrap_or_else(|e| match e {});
    let body = integrate(
        |t: f64| Ok::<_, Never>(g(t)),
        &[1.0, 2.0, 5.0, 10.0, 20.0, TAIL_START],
        tol,
        DEFAULT_PANEL_BUDGET,
    )
    .unwrap_or_else(|e| match e {});
    let tail = match which.tail_kind() {
        TailKind::Algebraic => integrate(
            |s: f64| {
                let t = TAIL_START / (s * s);
                Ok::<_, Never>(g(t) * 2.0 * TAIL_START / (s * s * s))
            },
            &[0.0, 0.5, 1.0],
            tol,
            DEFAULT_PANEL_BUDGET,
        ),
        TailKind::Exponential => integrate(
            |t: f64| Ok::<_, Never>(g(t)),
            &[TAIL_START, 60.0, EXP_CUTOFF],
            tol,
            DEFAULT_PANEL_BUDGET,
        ),
    }
    .unwrap_or_else(|e| match e {});
    let value = head.value + body.value + tail.value;
    let abs_error = head.abs_error + body.abs_error + tail.abs_error;
    if head.converged && body.converged && tail.converged && value.is_finite() {
        Ok(IntegralValue { value, abs_error })
    } else {
        Err(AsymptoticError::ToleranceNotReached {
            name: which.name(),
            value,
            abs_error,
        })
    }
}

/// Growth regime of the slope relative to the degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `K = o(n^{1/4})`: full formula with `1/√n` and `1/n` terms.
    #[serde(rename = "n14")]
    QuarterPower,
    /// `K = o(n^{1/2})`: log law plus constant.
    #[serde(rename = "n12")]
    HalfPower,
}

/// Terms of the asymptotic formula for `EN_K(−∞, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub n: usize,
    pub k: f64,
    pub regime: Regime,
    pub parity: Parity,
    pub leading_log: f64,
    pub constant_term: f64,
    pub sqrt_correction: f64,
    pub k2_term: f64,
    pub c1: Option<f64>,
    pub c1_term: f64,
    pub total: f64,
}

pub fn theorem_formula(n: usize, k: f64, regime: Regime) -> Result<AsymptoticReport, AsymptoticError> {
    theorem_formula_with_parity(n, k, regime, Parity::of(n))
}

/// As [`theorem_formula`] with the `C_1` parity chosen by the caller.
pub fn theorem_formula_with_parity(
    n: usize,
    k: f64,
    regime: Regime,
    parity: Parity,
) -> Result<AsymptoticReport, AsymptoticError> {
    if n == 0 {
        return Err(AsymptoticError::ZeroDegree);
    }
    let nf = n as f64;
    let leading_log = (2.0 * nf + 1.0).ln() / PI;
    let constant_term = R_SUM_PRINTED / PI;
    let (sqrt_correction, k2_term, c1, c1_term) = match regime {
        Regime::HalfPower => (0.0, 0.0, None, 0.0),
        Regime::QuarterPower => {
            let r = (2.0 * nf).sqrt();
            let c1 = parity.c1();
            (
                -(PI - 2.0 * (1.0 / (2.0 * r)).atan()) / (PI * r),
                K2_SUM_PRINTED * k * k / (nf * PI),
                Some(c1),
                c1 / (nf * PI),
            )
        }
    };
    let total = leading_log + constant_term + sqrt_correction + k2_term + c1_term;
    Ok(AsymptoticReport {
        n,
        k,
        regime,
        parity,
        leading_log,
        constant_term,
        sqrt_correction,
        k2_term,
        c1,
        c1_term,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditStatus {
    Pass,
    Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub name: String,
    pub computed: f64,
    pub printed: f64,
    pub abs_diff: f64,
    pub tolerance: f64,
    pub quadrature_error: f64,
    pub status: AuditStatus,
}

impl AuditRow {
    fn new(name: &str, computed: IntegralValue, printed: f64) -> Self {
        let abs_diff = (computed.value - printed).abs();
        AuditRow {
            name: name.to_string(),
            computed: computed.value,
            printed,
            abs_diff,
            tolerance: AUDIT_TOLERANCE,
            quadrature_error: computed.abs_error,
            status: if abs_diff <= AUDIT_TOLERANCE {
                AuditStatus::Pass
            } else {
                AuditStatus::Flag
            },
        }
    }
}

/// Every regularized integral against its printed value, plus the sums
/// that make up the formula's constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantAudit {
    pub rows: Vec<AuditRow>,
}

impl ConstantAudit {
    pub fn row(&self, name: &str) -> Option<&AuditRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Recomputes the regularized integrals and cross-foots them.
///
/// Mismatches are reported as flagged rows; a row whose quadrature missed
/// its tolerance carries the best estimate and its error.
pub fn constant_audit() -> ConstantAudit {
    let values: Vec<IntegralValue> = RegularizedIntegral::ALL
        .par_iter()
        .map(|&which| match regularized_integral(which) {
            Ok(v) => v,
            Err(AsymptoticError::ToleranceNotReached { value, abs_error, .. }) => IntegralValue { value, abs_error },
            Err(e) => unreachable!("regularized integrals take no arguments: {e}"),
        })
        .collect();
    let get = |which: RegularizedIntegral| {
        let i = RegularizedIntegral::ALL
            .iter()
            .position(|&w| w == which)
            .expect("listed integral");
        values[i]
    };
    let sum = |parts: &[RegularizedIntegral]| {
        parts.iter().fold(
            IntegralValue {
                value: 0.0,
                abs_error: 0.0,
            },
            |acc, &w| IntegralValue {
                value: acc.value + get(w).value,
                abs_error: acc.abs_error + get(w).abs_error,
            },
        )
    };
    let mut rows: Vec<AuditRow> = RegularizedIntegral::ALL
        .iter()
        .map(|&w| AuditRow::new(w.name(), get(w), w.printed()))
        .collect();
    use RegularizedIntegral::*;
    rows.push(AuditRow::new("R_SUM", sum(&[R1, R2, R3Reg, R4Reg]), R_SUM_PRINTED));
    rows.push(AuditRow::new("K2_SUM", sum(&[K2Outer, K2Inner]), K2_SUM_PRINTED));
    for (name, p) in [("S_SUM_ODD", Parity::Odd), ("S_SUM_EVEN", Parity::Even)] {
        rows.push(AuditRow::new(
            name,
            sum(&[S1Reg, S2Reg(p), S3Combo, S4Combo(p)]),
            p.c1(),
        ));
    }
    ConstantAudit { rows }
}
