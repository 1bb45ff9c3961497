//! The exponential-polynomial building blocks and the expansion families
//! assembled from them.

use std::sync::OnceLock;

use super::exppoly::{Block, ExpPoly, Scaled};
use super::{ExpansionFamily, Parity};

/// Named building blocks. `…3`/`…4` blocks are the explicit mirrors
/// (`t → −t`) of the `…1`/`…2` ones, sign-normalised to be positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BlockId {
    Rad1,
    Den1,
    S11,
    Rad2,
    Den2,
    S21,
    S22,
    S2Even,
    S2Odd,
    G21OuterNum,
    G3OuterNum,
    G5OuterRad,
    Rad3,
    Den3,
    S31,
    Rad4,
    Den4,
    S41,
    S42,
    S4Even,
    S4Odd,
    G21InnerNum,
    G21InnerDen,
    G3InnerNum,
    G5InnerNum,
    S1Gap,
    S2GapEven,
    S2GapOdd,
}

const BLOCK_COUNT: usize = 28;

impl BlockId {
    pub const ALL: [BlockId; BLOCK_COUNT] = [
        BlockId::Rad1,
        BlockId::Den1,
        BlockId::S11,
        BlockId::Rad2,
        BlockId::Den2,
        BlockId::S21,
        BlockId::S22,
        BlockId::S2Even,
        BlockId::S2Odd,
        BlockId::G21OuterNum,
        BlockId::G3OuterNum,
        BlockId::G5OuterRad,
        BlockId::Rad3,
        BlockId::Den3,
        BlockId::S31,
        BlockId::Rad4,
        BlockId::Den4,
        BlockId::S41,
        BlockId::S42,
        BlockId::S4Even,
        BlockId::S4Odd,
        BlockId::G21InnerNum,
        BlockId::G21InnerDen,
        BlockId::G3InnerNum,
        BlockId::G5InnerNum,
        BlockId::S1Gap,
        BlockId::S2GapEven,
        BlockId::S2GapOdd,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Coefficients are listed from `t^0` upwards.
pub(crate) fn block_poly(id: BlockId) -> ExpPoly {
    match id {
        BlockId::Rad1 => ExpPoly::new(&[
            (4, &[-15.0, 4.0]),
            (3, &[32.0, 24.0]),
            (2, &[-18.0, -36.0, -12.0, -8.0]),
            (1, &[0.0, 8.0]),
            (0, &[1.0]),
        ]),
        BlockId::Den1 => ExpPoly::new(&[(2, &[-3.0, 2.0]), (1, &[4.0]), (0, &[-1.0])]),
        BlockId::S11 => ExpPoly::new(&[
            (6, &[-27.0, -6.0, 4.0]),
            (5, &[156.0, -84.0, 116.0, -24.0]),
            (4, &[-331.0, 220.0, -212.0, 96.0, -72.0, 16.0]),
            (3, &[328.0, -168.0, 128.0, -104.0]),
            (2, &[-153.0, 42.0, -32.0, 8.0, 8.0]),
            (1, &[28.0, -4.0, -4.0]),
            (0, &[-1.0]),
        ])
        .scale(-0.25),
        BlockId::Rad2 => ExpPoly::new(&[(4, &[1.0, 4.0]), (2, &[-2.0, -4.0, -12.0, -8.0]), (0, &[1.0])]),
        BlockId::Den2 => ExpPoly::new(&[(2, &[1.0, 2.0]), (0, &[-1.0])]),
        BlockId::S21 => ExpPoly::new(&[
            (0, &[1.0]),
            (2, &[-3.0, 30.0, 48.0, -8.0, -8.0]),
            (4, &[3.0, -12.0, 52.0, 96.0, 40.0, -16.0]),
            (6, &[-1.0, -18.0, -4.0]),
        ]),
        BlockId::S22 => ExpPoly::new(&[(1, &[0.0, 4.0]), (3, &[0.0, 8.0, 40.0, 32.0]), (5, &[0.0, -12.0, -8.0])]),
        BlockId::S2Even => block_poly(BlockId::S21).add(&block_poly(BlockId::S22)),
        BlockId::S2Odd => block_poly(BlockId::S21).sub(&block_poly(BlockId::S22)),
        BlockId::G21OuterNum => ExpPoly::new(&[(2, &[0.0, -8.0, 16.0, -16.0, -32.0]), (0, &[0.0, 8.0])]),
        BlockId::G3OuterNum => ExpPoly::new(&[(0, &[1.0]), (2, &[-1.0, 2.0, 4.0])]),
        BlockId::G5OuterRad => ExpPoly::new(&[
            (6, &[1.0, 6.0, 8.0]),
            (4, &[-3.0, -12.0, -20.0, -32.0, -16.0]),
            (2, &[3.0, 6.0, 12.0, 8.0]),
            (0, &[-1.0]),
        ]),
        BlockId::Rad3 => ExpPoly::new(&[
            (-4, &[-15.0, -4.0]),
            (-3, &[32.0, -24.0]),
            (-2, &[-18.0, 36.0, -12.0, 8.0]),
            (-1, &[0.0, -8.0]),
            (0, &[1.0]),
        ]),
        BlockId::Den3 => ExpPoly::new(&[(-2, &[3.0, 2.0]), (-1, &[-4.0]), (0, &[1.0])]),
        BlockId::S31 => ExpPoly::new(&[
            (-6, &[-63.0 / 4.0, -69.0 / 2.0, -7.0]),
            (-5, &[39.0, 35.0, -55.0, 6.0]),
            (-4, &[-63.0 / 4.0, 49.0, 91.0, -12.0, 22.0, -4.0]),
            (-3, &[-30.0, -66.0, -44.0, -6.0]),
            (-2, &[123.0 / 4.0, 35.0 / 2.0, 16.0, -6.0, 2.0]),
            (-1, &[-9.0, -1.0, -1.0]),
            (0, &[3.0 / 4.0]),
        ]),
        BlockId::Rad4 => ExpPoly::new(&[(-4, &[1.0, -4.0]), (-2, &[-2.0, 4.0, -12.0, 8.0]), (0, &[1.0])]),
        BlockId::Den4 => ExpPoly::new(&[(-2, &[-1.0, 2.0]), (0, &[1.0])]),
        BlockId::S41 => ExpPoly::new(&[
            (-6, &[-3.0 / 8.0, 15.0 / 4.0, -7.0 / 2.0]),
            (-4, &[9.0 / 8.0, -3.0 / 2.0, 19.0 / 2.0, -22.0, 15.0, -2.0]),
            (-2, &[-9.0 / 8.0, -9.0 / 4.0, 6.0, -3.0, 1.0]),
            (0, &[3.0 / 8.0]),
        ])
        .scale(8.0),
        BlockId::S42 => ExpPoly::new(&[
            (-1, &[0.0, -4.0]),
            (-3, &[0.0, -8.0, 40.0, -32.0]),
            (-5, &[0.0, 12.0, -8.0]),
        ]),
        BlockId::S4Even => block_poly(BlockId::S41).add(&block_poly(BlockId::S42)),
        BlockId::S4Odd => block_poly(BlockId::S41).sub(&block_poly(BlockId::S42)),
        BlockId::G21InnerNum => ExpPoly::new(&[(0, &[0.0, 8.0]), (-2, &[0.0, -8.0, -16.0, -16.0, 32.0])]),
        BlockId::G21InnerDen => ExpPoly::new(&[(-4, &[-1.0, 4.0]), (-2, &[2.0, -4.0, 12.0, -8.0]), (0, &[-1.0])]),
        BlockId::G3InnerNum => ExpPoly::new(&[(0, &[1.0]), (-2, &[-1.0, -2.0, 4.0])]),
        BlockId::G5InnerNum => ExpPoly::new(&[(-2, &[2.0, 4.0, -8.0]), (0, &[-2.0])]),
        BlockId::S1Gap => offset_gap(BlockId::S11, BlockId::Rad1, BlockId::Den1, 1.0),
        BlockId::S2GapEven => offset_gap(BlockId::S2Even, BlockId::Rad2, BlockId::Den2, 4.0),
        BlockId::S2GapOdd => offset_gap(BlockId::S2Odd, BlockId::Rad2, BlockId::Den2, 4.0),
    }
}

/// `64 t num² − scale² den⁴ rad`. Its leading large-`t` terms cancel
/// exactly, which is what makes `S + 1/(8√t)` computable.
fn offset_gap(num: BlockId, rad: BlockId, den: BlockId, scale: f64) -> ExpPoly {
    let n = block_poly(num);
    let d2 = block_poly(den).mul(&block_poly(den));
    let left = n.mul(&n).times_t().scale(64.0);
    let right = d2.mul(&d2).mul(&block_poly(rad)).scale(scale * scale);
    left.sub(&right)
}

fn table() -> &'static [Block] {
    static TABLE: OnceLock<Vec<Block>> = OnceLock::new();
    TABLE.get_or_init(|| BlockId::ALL.iter().map(|&id| Block::new(block_poly(id))).collect())
}

pub(crate) fn block(id: BlockId) -> &'static Block {
    &table()[id.index()]
}

/// Arithmetic needed to assemble a family from its blocks.
pub(crate) trait Algebra {
    type V: Clone;
    fn block(&mut self, id: BlockId) -> Self::V;
    fn t_pow(&mut self, p: f64) -> Self::V;
    fn constant(&mut self, c: f64) -> Self::V;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn div(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn powf(&mut self, a: &Self::V, p: f64) -> Self::V;
    fn neg(&mut self, a: &Self::V) -> Self::V;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
}

/// `√rad / (scale · t · den)`, the shape shared by every R family.
fn r_shape<A: Algebra>(alg: &mut A, rad: BlockId, den: BlockId, scale: f64) -> A::V {
    let r = alg.block(rad);
    let root = alg.powf(&r, 0.5);
    let d = alg.block(den);
    let t = alg.t_pow(1.0);
    let c = alg.constant(scale);
    let td = alg.mul(&t, &d);
    let bottom = alg.mul(&c, &td);
    alg.div(&root, &bottom)
}

/// `num / (scale · den² · √rad)`, the shape shared by every S family.
fn s_shape<A: Algebra>(alg: &mut A, num: BlockId, rad: BlockId, den: BlockId, scale: f64) -> A::V {
    let top = alg.block(num);
    let r = alg.block(rad);
    let root = alg.powf(&r, 0.5);
    let d = alg.block(den);
    let d2 = alg.mul(&d, &d);
    let c = alg.constant(scale);
    let rd = alg.mul(&d2, &root);
    let bottom = alg.mul(&c, &rd);
    alg.div(&top, &bottom)
}

/// `S + 1/(8√t)` for the S1 and S2 families, without the cancellation of
/// forming the sum directly. With `a = 8√t·num` and `b = scale·den²·√rad`
/// the value is `(a + b)/(8√t·b) = gap/((a − b)·8√t·b)`.
pub(crate) fn s_offset_value<A: Algebra>(alg: &mut A, family: ExpansionFamily) -> Option<A::V> {
    use BlockId::*;
    let (gap, num, rad, den, scale) = match family {
        ExpansionFamily::S1 => (S1Gap, S11, Rad1, Den1, 1.0),
        ExpansionFamily::S2(Parity::Even) => (S2GapEven, S2Even, Rad2, Den2, 4.0),
        ExpansionFamily::S2(Parity::Odd) => (S2GapOdd, S2Odd, Rad2, Den2, 4.0),
        _ => return None,
    };
    let g = alg.block(gap);
    let st = alg.t_pow(0.5);
    let eight = alg.constant(8.0);
    let st8 = alg.mul(&eight, &st);
    let n = alg.block(num);
    let a = alg.mul(&st8, &n);
    let r = alg.block(rad);
    let root = alg.powf(&r, 0.5);
    let d = alg.block(den);
    let d2 = alg.mul(&d, &d);
    let c = alg.constant(scale);
    let rd = alg.mul(&d2, &root);
    let b = alg.mul(&c, &rd);
    let nb = alg.neg(&b);
    let diff = alg.add(&a, &nb);
    let bottom = alg.mul(&diff, &st8);
    let bottom = alg.mul(&bottom, &b);
    Some(alg.div(&g, &bottom))
}

pub(crate) fn family_value<A: Algebra>(alg: &mut A, family: ExpansionFamily) -> A::V {
    use BlockId::*;
    match family {
        ExpansionFamily::R1 => r_shape(alg, Rad1, Den1, 2.0),
        ExpansionFamily::S1 => s_shape(alg, S11, Rad1, Den1, 1.0),
        ExpansionFamily::R2 => r_shape(alg, Rad2, Den2, 2.0),
        ExpansionFamily::S2(Parity::Even) => s_shape(alg, S2Even, Rad2, Den2, 4.0),
        ExpansionFamily::S2(Parity::Odd) => s_shape(alg, S2Odd, Rad2, Den2, 4.0),
        ExpansionFamily::R3 => r_shape(alg, Rad3, Den3, 2.0),
        ExpansionFamily::S3 => s_shape(alg, S31, Rad3, Den3, 1.0),
        ExpansionFamily::R4 => r_shape(alg, Rad4, Den4, 2.0),
        ExpansionFamily::S4(Parity::Even) => s_shape(alg, S4Even, Rad4, Den4, 4.0),
        ExpansionFamily::S4(Parity::Odd) => s_shape(alg, S4Odd, Rad4, Den4, 4.0),
        ExpansionFamily::G21Outer => {
            let n = alg.block(G21OuterNum);
            let d = alg.block(Rad2);
            alg.div(&n, &d)
        }
        ExpansionFamily::G31Outer => g3_shape(alg, G3OuterNum, Den2),
        ExpansionFamily::G51Outer => {
            // −2√t·num/√rad
            let n = alg.block(G3OuterNum);
            let r = alg.block(G5OuterRad);
            let root = alg.powf(&r, 0.5);
            let st = alg.t_pow(0.5);
            let c = alg.constant(-2.0);
            let top = alg.mul(&c, &st);
            let top = alg.mul(&top, &n);
            alg.div(&top, &root)
        }
        ExpansionFamily::G21Inner => {
            let n = alg.block(G21InnerNum);
            let d = alg.block(G21InnerDen);
            alg.div(&n, &d)
        }
        ExpansionFamily::G31Inner => g3_shape(alg, G3InnerNum, Den4),
        ExpansionFamily::G51Inner => {
            // √t·num/(√den·√rad)
            let n = alg.block(G5InnerNum);
            let st = alg.t_pow(0.5);
            let top = alg.mul(&st, &n);
            let d = alg.block(Den4);
            let r = alg.block(Rad4);
            let dr = alg.mul(&d, &r);
            let bottom = alg.powf(&dr, 0.5);
            alg.div(&top, &bottom)
        }
    }
}

/// `−num / (√t · den^{3/2})`.
fn g3_shape<A: Algebra>(alg: &mut A, num: BlockId, den: BlockId) -> A::V {
    let n = alg.block(num);
    let d = alg.block(den);
    let d32 = alg.powf(&d, 1.5);
    let st = alg.t_pow(0.5);
    let bottom = alg.mul(&st, &d32);
    let q = alg.div(&n, &bottom);
    alg.neg(&q)
}

/// Double evaluation: Taylor series below the seam, log-scaled sums above.
pub(crate) struct ScaledAlgebra {
    pub t: f64,
}

impl Algebra for ScaledAlgebra {
    type V = Scaled;
    fn block(&mut self, id: BlockId) -> Scaled {
        block(id).eval(self.t)
    }
    fn t_pow(&mut self, p: f64) -> Scaled {
        Scaled::t_pow(self.t, p)
    }
    fn constant(&mut self, c: f64) -> Scaled {
        Scaled::plain(c)
    }
    fn mul(&mut self, a: &Scaled, b: &Scaled) -> Scaled {
        a.mul(*b)
    }
    fn div(&mut self, a: &Scaled, b: &Scaled) -> Scaled {
        a.div(*b)
    }
    fn powf(&mut self, a: &Scaled, p: f64) -> Scaled {
        a.powf(p)
    }
    fn neg(&mut self, a: &Scaled) -> Scaled {
        a.neg()
    }
    fn add(&mut self, a: &Scaled, b: &Scaled) -> Scaled {
        a.add(*b)
    }
}

/// Same as [`ScaledAlgebra`] but with every block forced onto one branch.
pub(crate) struct BranchAlgebra {
    pub t: f64,
    pub series: bool,
}

impl Algebra for BranchAlgebra {
    type V = Scaled;
    fn block(&mut self, id: BlockId) -> Scaled {
        if self.series {
            block(id).eval_series(self.t)
        } else {
            block(id).eval_direct(self.t)
        }
    }
    fn t_pow(&mut self, p: f64) -> Scaled {
        Scaled::t_pow(self.t, p)
    }
    fn constant(&mut self, c: f64) -> Scaled {
        Scaled::plain(c)
    }
    fn mul(&mut self, a: &Scaled, b: &Scaled) -> Scaled {
        a.mul(*b)
    }
    fn div(&mut self, a: &Scaled, b: &Scaled) -> Scaled {
        a.div(*b)
    }
    fn powf(&mut self, a: &Scaled, p: f64) -> Scaled {
        a.powf(p)
    }
    fn neg(&mut self, a: &Scaled) -> Scaled {
        a.neg()
    }
    fn add(&mut self, a: &Scaled, b: &Scaled) -> Scaled {
        a.add(*b)
    }
}
