//! Support sets for confidential sum statistics.
//!
//! A [`ConstraintSet`] is a bounding box plus a membership predicate. The
//! predicate factors into independent blocks of coordinates, which lets the
//! imputation step sample each block separately when the noise is
//! coordinatewise independent.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::models::linreg::SimpleOls;
use crate::rng::RngHandle;
use crate::sampling::uniform01;

/// Membership rule for one block of coordinates, evaluated after the box
/// and lattice checks have passed.
#[derive(Clone)]
pub enum Rule {
    /// Box only.
    Interval,
    /// `(S1, S2)` sums of data in `[0, 1]`: `S1^2 / n <= S2 <= S1 <= n`.
    BoundedMoments { n: f64 },
    /// `(Sx, Sxx, Sy, Syy, Sxy)` for simple regression on data in `[0, 1]`.
    Regression { n: f64 },
    /// Coordinates sum to at most `cap`.
    SumAtMost { cap: f64 },
    Custom(Arc<dyn Fn(&[f64]) -> bool + Send + Sync>),
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Interval => write!(f, "Interval"),
            Rule::BoundedMoments { n } => write!(f, "BoundedMoments {{ n: {n} }}"),
            Rule::Regression { n } => write!(f, "Regression {{ n: {n} }}"),
            Rule::SumAtMost { cap } => write!(f, "SumAtMost {{ cap: {cap} }}"),
            Rule::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Rule {
    fn holds(&self, u: &[f64]) -> bool {
        match self {
            Rule::Interval => true,
            Rule::BoundedMoments { n } => moments_ok(*n, u[0], u[1]),
            Rule::Regression { n } => regression_ok(*n, u),
            Rule::SumAtMost { cap } => u.iter().sum::<f64>() <= *cap,
            Rule::Custom(f) => f(u),
        }
    }
}

fn moments_ok(n: f64, s1: f64, s2: f64) -> bool {
    0.0 <= s1 && s1 * s1 / n <= s2 && s2 <= s1 && s1 <= n
}

fn regression_ok(n: f64, u: &[f64]) -> bool {
    moments_ok(n, u[0], u[1])
        && moments_ok(n, u[2], u[3])
        && matches!(SimpleOls::from_sums(n, u), Some(ols) if ols.residual_ss >= 0.0)
}

/// A contiguous run of coordinates sharing one rule.
#[derive(Clone, Debug)]
pub struct Block {
    pub start: usize,
    pub len: usize,
    pub rule: Rule,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Clone, Debug)]
pub struct ConstraintSet {
    dim: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    lattice: Vec<bool>,
    blocks: Vec<Block>,
    offset: Vec<f64>,
}

/// Whether count coordinates must take integer values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountSupport {
    Discrete,
    Continuous,
}

impl ConstraintSet {
    /// Assemble a set from blocks that tile `0..lo.len()` in order.
    pub fn from_blocks(lo: Vec<f64>, hi: Vec<f64>, lattice: Vec<bool>, blocks: Vec<Block>) -> Result<Self> {
        let dim = lo.len();
        check_dim(dim, hi.len())?;
        check_dim(dim, lattice.len())?;
        if dim == 0 {
            return Err(Error::param("constraint set needs at least one coordinate"));
        }
        let mut next = 0;
        for b in &blocks {
            if b.start != next || b.len == 0 {
                return Err(Error::param("constraint blocks must tile the coordinates in order"));
            }
            next += b.len;
        }
        check_dim(dim, next)?;
        for j in 0..dim {
            if !(lo[j] <= hi[j]) {
                return Err(Error::param(format!("empty box on coordinate {j}: [{}, {}]", lo[j], hi[j])));
            }
        }
        Ok(Self {
            dim,
            lo,
            hi,
            lattice,
            blocks,
            offset: vec![0.0; dim],
        })
    }

    /// A one-dimensional interval, possibly unbounded on either side.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::from_blocks(
            vec![lo],
            vec![hi],
            vec![false],
            vec![Block {
                start: 0,
                len: 1,
                rule: Rule::Interval,
            }],
        )
    }

    /// A product of intervals with no further rule.
    pub fn product_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let blocks = (0..lo.len())
            .map(|j| Block {
                start: j,
                len: 1,
                rule: Rule::Interval,
            })
            .collect();
        let k = lo.len();
        Self::from_blocks(lo, hi, vec![false; k], blocks)
    }

    /// The whole space. Only the per-coordinate interval samplers and the
    /// walk can handle this set.
    pub fn unconstrained(dim: usize) -> Result<Self> {
        Self::product_box(vec![f64::NEG_INFINITY; dim], vec![f64::INFINITY; dim])
    }

    /// A single block with a custom predicate inside a finite box.
    pub fn custom(lo: Vec<f64>, hi: Vec<f64>, pred: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Result<Self> {
        let k = lo.len();
        Self::from_blocks(
            lo,
            hi,
            vec![false; k],
            vec![Block {
                start: 0,
                len: k,
                rule: Rule::Custom(Arc::new(pred)),
            }],
        )
    }

    /// The same set translated by `shift`.
    pub fn shifted(&self, shift: &[f64]) -> Result<Self> {
        check_dim(self.dim, shift.len())?;
        let mut out = self.clone();
        for (o, c) in out.offset.iter_mut().zip(shift) {
            *o += c;
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Translation applied to the base set.
    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// Lower box corner in the translated coordinates.
    pub fn lower(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.offset).map(|(l, o)| l + o).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.hi.iter().zip(&self.offset).map(|(h, o)| h + o).collect()
    }

    pub fn base_lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn base_upper(&self) -> &[f64] {
        &self.hi
    }

    pub fn lattice(&self) -> &[bool] {
        &self.lattice
    }

    pub fn has_lattice(&self) -> bool {
        self.lattice.iter().any(|&l| l)
    }

    /// Copy of this set with integrality dropped on every coordinate.
    pub fn without_lattice(&self) -> Self {
        let mut out = self.clone();
        out.lattice.iter_mut().for_each(|l| *l = false);
        out
    }

    pub fn contains(&self, t: &[f64]) -> bool {
        if t.len() != self.dim {
            return false;
        }
        let u: Vec<f64> = t.iter().zip(&self.offset).map(|(x, o)| x - o).collect();
        self.contains_base(&u)
    }

    /// Membership of a point expressed in the untranslated coordinates.
    pub fn contains_base(&self, u: &[f64]) -> bool {
        u.len() == self.dim && self.blocks.iter().all(|b| self.block_contains(b, &u[b.range()]))
    }

    /// Membership of one block's coordinates, untranslated.
    pub fn block_contains(&self, block: &Block, u: &[f64]) -> bool {
        for (i, &x) in u.iter().enumerate() {
            let j = block.start + i;
            if !(self.lo[j] <= x && x <= self.hi[j]) {
                return false;
            }
            if self.lattice[j] && x.fract() != 0.0 {
                return false;
            }
        }
        block.rule.holds(u)
    }

    /// A member of `block` near `target` (both untranslated), found by
    /// deterministic repair and, failing that, random search in the box.
    pub fn feasible_block_point(&self, block: &Block, target: &[f64], rng: &mut RngHandle) -> Result<Vec<f64>> {
        let r = block.range();
        let (lo, hi, lat) = (&self.lo[r.clone()], &self.hi[r.clone()], &self.lattice[r]);
        let mut u = repair(&block.rule, target, lo, hi, lat);
        if self.block_contains(block, &u) {
            return Ok(u);
        }
        // shrink toward the box centre before giving up on the repair
        for attempt in 1..=1000 {
            let w = attempt as f64 / 1000.0;
            for i in 0..u.len() {
                let c = finite_mid(lo[i], hi[i]);
                u[i] = (1.0 - w) * target[i].clamp(lo[i], hi[i]) + w * c;
                if lat[i] {
                    u[i] = u[i].round().clamp(lo[i].ceil(), hi[i].floor());
                }
            }
            let v = repair(&block.rule, &u, lo, hi, lat);
            if self.block_contains(block, &v) {
                return Ok(v);
            }
        }
        if lo.iter().chain(hi).any(|x| !x.is_finite()) {
            return Err(Error::Infeasible);
        }
        for _ in 0..1_000_000 {
            let v: Vec<f64> = (0..u.len())
                .map(|i| {
                    let x = lo[i] + (hi[i] - lo[i]) * uniform01(rng);
                    if lat[i] {
                        x.round().clamp(lo[i].ceil(), hi[i].floor())
                    } else {
                        x
                    }
                })
                .collect();
            if self.block_contains(block, &v) {
                return Ok(v);
            }
        }
        Err(Error::Infeasible)
    }

    /// A member of the whole set near `target`, in translated coordinates.
    pub fn feasible_point(&self, target: &[f64], rng: &mut RngHandle) -> Result<Vec<f64>> {
        check_dim(self.dim, target.len())?;
        let u: Vec<f64> = target.iter().zip(&self.offset).map(|(x, o)| x - o).collect();
        let mut out = vec![0.0; self.dim];
        for b in &self.blocks {
            let v = self.feasible_block_point(b, &u[b.range()], rng)?;
            out[b.range()].copy_from_slice(&v);
        }
        Ok(out.iter().zip(&self.offset).map(|(x, o)| x + o).collect())
    }
}

fn finite_mid(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}

fn clamp_box(target: &[f64], lo: &[f64], hi: &[f64], lat: &[bool]) -> Vec<f64> {
    target
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = if x.is_finite() { x } else { finite_mid(lo[i], hi[i]) };
            if lat[i] {
                x.round().clamp(lo[i].ceil(), hi[i].floor())
            } else {
                x.clamp(lo[i], hi[i])
            }
        })
        .collect()
}

/// Pull a second-moment sum back inside its Jensen bounds.
fn repair_moments(n: f64, s1: &mut f64, s2: &mut f64, strict: bool) {
    *s1 = s1.clamp(0.0, n);
    if strict {
        // keep the sample variance away from zero so X^T X stays invertible
        *s1 = s1.clamp(0.01 * n, 0.99 * n);
    }
    let floor = *s1 * *s1 / n;
    let margin = if strict { 1e-6 * n } else { 0.0 };
    *s2 = s2.clamp(floor + margin, *s1);
    if !(*s1 * *s1 / n <= *s2) {
        *s2 = 0.5 * (floor + *s1);
    }
}

fn repair(rule: &Rule, target: &[f64], lo: &[f64], hi: &[f64], lat: &[bool]) -> Vec<f64> {
    let mut u = clamp_box(target, lo, hi, lat);
    match rule {
        Rule::Interval | Rule::Custom(_) => {}
        Rule::BoundedMoments { n } => {
            let (mut a, mut b) = (u[0], u[1]);
            repair_moments(*n, &mut a, &mut b, false);
            u[0] = a;
            u[1] = b;
        }
        Rule::Regression { n } => {
            let (mut sx, mut sxx, mut sy, mut syy) = (u[0], u[1], u[2], u[3]);
            repair_moments(*n, &mut sx, &mut sxx, true);
            repair_moments(*n, &mut sy, &mut syy, false);
            u[0] = sx;
            u[1] = sxx;
            u[2] = sy;
            u[3] = syy;
            let ok = matches!(SimpleOls::from_sums(*n, &u), Some(o) if o.residual_ss >= 0.0);
            if !ok {
                // zero slope leaves residual SS = Syy - Sy^2/n >= 0
                u[4] = (sx * sy / n).clamp(lo[4], hi[4]);
            }
        }
        Rule::SumAtMost { cap } => {
            let total: f64 = u.iter().sum();
            if total > *cap && total > 0.0 {
                let f = cap / total;
                for (i, x) in u.iter_mut().enumerate() {
                    *x *= f;
                    if lat[i] {
                        *x = x.floor();
                    }
                    *x = x.clamp(lo[i], hi[i]);
                }
            }
        }
    }
    u
}

/// Support of `(sum t_i, sum t_i^2)` for `n` observations in `[0, 1]`.
pub fn bounded_moments_constraints(n: u64) -> Result<ConstraintSet> {
    if n == 0 {
        return Err(Error::param("sample size must be positive"));
    }
    let nf = n as f64;
    ConstraintSet::from_blocks(
        vec![0.0, 0.0],
        vec![nf, nf],
        vec![false, false],
        vec![Block {
            start: 0,
            len: 2,
            rule: Rule::BoundedMoments { n: nf },
        }],
    )
}

/// Support of `(Sx, Sxx, Sy, Syy, Sxy)` for simple regression on `n` pairs
/// in `[0, 1]^2`, with an invertible design and a non-negative residual
/// variance estimate.
pub fn regression_constraints(n: u64) -> Result<ConstraintSet> {
    if n < 3 {
        return Err(Error::param("regression needs at least three observations"));
    }
    let nf = n as f64;
    ConstraintSet::from_blocks(
        vec![0.0; 5],
        vec![nf; 5],
        vec![false; 5],
        vec![Block {
            start: 0,
            len: 5,
            rule: Rule::Regression { n: nf },
        }],
    )
}

/// Number of privatized coordinates per county: four minority ethnicity
/// counts followed by the homeowner count.
pub const COUNTY_STAT_DIM: usize = 5;
pub const COUNTY_ETHNICITY_DIM: usize = 4;

/// Support of the stacked per-county count vectors. Each county contributes
/// an ethnicity block (counts in `[0, pop]` summing to at most `pop`) and a
/// homeowner block (count in `[0, pop]`).
pub fn county_table_constraints(populations: &[u64], support: CountSupport) -> Result<ConstraintSet> {
    if populations.is_empty() {
        return Err(Error::param("county table needs at least one county"));
    }
    let k = COUNTY_STAT_DIM * populations.len();
    let mut hi = Vec::with_capacity(k);
    let mut blocks = Vec::with_capacity(2 * populations.len());
    for (c, &pop) in populations.iter().enumerate() {
        let p = pop as f64;
        let start = c * COUNTY_STAT_DIM;
        hi.extend(std::iter::repeat_n(p, COUNTY_STAT_DIM));
        blocks.push(Block {
            start,
            len: COUNTY_ETHNICITY_DIM,
            rule: Rule::SumAtMost { cap: p },
        });
        blocks.push(Block {
            start: start + COUNTY_ETHNICITY_DIM,
            len: 1,
            rule: Rule::Interval,
        });
    }
    let lattice = vec![support == CountSupport::Discrete; k];
    ConstraintSet::from_blocks(vec![0.0; k], hi, lattice, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bounded_moments_examples() {
        let cs = bounded_moments_constraints(10).unwrap();
        assert!(cs.contains(&[5.0, 3.0]));
        assert!(!cs.contains(&[5.0, 2.0]));
        assert!(cs.contains(&[0.0, 0.0]));
        assert!(cs.contains(&[10.0, 10.0]));
        assert!(!cs.contains(&[10.5, 10.0]));
        assert!(!cs.contains(&[5.0, 6.0]));
        assert!(bounded_moments_constraints(0).is_err());
    }

    #[test]
    fn regression_examples() {
        let cs = regression_constraints(10).unwrap();
        // x all equal: singular design
        let x = [0.3f64; 10];
        let y = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        let stat = |x: &[f64], y: &[f64]| {
            [
                x.iter().sum::<f64>(),
                x.iter().map(|v| v * v).sum::<f64>(),
                y.iter().sum::<f64>(),
                y.iter().map(|v| v * v).sum::<f64>(),
                x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>(),
            ]
        };
        assert!(!cs.contains(&stat(&x, &y)));
        let x2 = [0.0, 1.0, 0.5, 0.25, 0.75, 0.1, 0.9, 0.3, 0.6, 0.2];
        assert!(cs.contains(&stat(&x2, &y)));
        assert!(regression_constraints(2).is_err());
    }

    #[test]
    fn regression_residual_variance_crossing() {
        let n = 100u64;
        let mut rng = RngHandle::new(11, 0);
        let x: Vec<f64> = (0..n).map(|_| uniform01(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|&v| 0.25 + 0.5 * v + 0.05 * (uniform01(&mut rng) - 0.5)).collect();
        let mut t = [
            x.iter().sum::<f64>(),
            x.iter().map(|v| v * v).sum::<f64>(),
            y.iter().sum::<f64>(),
            y.iter().map(|v| v * v).sum::<f64>(),
            x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>(),
        ];
        let cs = regression_constraints(n).unwrap();
        assert!(cs.contains(&t));
        // Residual SS as a function of Sxy is a downward parabola; push Sxy
        // upward until it goes negative.
        let rss = |t: &[f64]| SimpleOls::from_sums(n as f64, t).unwrap().residual_ss;
        let mut step = 0.01;
        while rss(&t) >= 0.0 {
            t[4] += step;
            step *= 1.5;
        }
        assert!(!cs.contains(&t));
    }

    #[test]
    fn county_examples() {
        let cs = county_table_constraints(&[1000], CountSupport::Discrete).unwrap();
        assert!(cs.contains(&[0.0; 5]));
        assert!(!cs.contains(&[0.0, 0.0, 0.0, 0.0, 1001.0]));
        assert!(!cs.contains(&[600.0, 300.0, 200.0, 0.0, 0.0]));
        assert!(cs.contains(&[600.0, 300.0, 100.0, 0.0, 1000.0]));
        assert!(!cs.contains(&[600.5, 0.0, 0.0, 0.0, 10.0]));
        let cont = county_table_constraints(&[1000], CountSupport::Continuous).unwrap();
        assert!(cont.contains(&[600.5, 0.0, 0.0, 0.0, 10.25]));
        assert!(county_table_constraints(&[], CountSupport::Discrete).is_err());
        let two = county_table_constraints(&[10, 20], CountSupport::Discrete).unwrap();
        assert_eq!(two.dim(), 10);
        assert!(two.contains(&[1.0, 2.0, 3.0, 4.0, 10.0, 5.0, 5.0, 5.0, 5.0, 20.0]));
        assert!(!two.contains(&[1.0, 2.0, 3.0, 4.0, 10.0, 5.0, 5.0, 5.0, 6.0, 20.0]));
    }

    #[test]
    fn shifted_set_tracks_offset() {
        let cs = bounded_moments_constraints(10).unwrap();
        let sh = cs.shifted(&[100.0, -3.0]).unwrap();
        assert!(sh.contains(&[105.0, 0.0]));
        assert!(!sh.contains(&[5.0, 3.0]));
        assert_eq!(sh.lower(), vec![100.0, -3.0]);
    }

    #[test]
    fn feasible_point_repair() {
        let mut rng = RngHandle::new(1, 0);
        let cs = bounded_moments_constraints(1000).unwrap();
        for target in [[-50.0, 900.0], [1200.0, -4.0], [300.0, 20.0], [300.0, 400.0]] {
            let p = cs.feasible_point(&target, &mut rng).unwrap();
            assert!(cs.contains(&p), "{target:?} -> {p:?}");
        }
        let cs = regression_constraints(30).unwrap();
        for target in [[0.0; 5], [30.0; 5], [15.0, 1.0, 15.0, 1.0, 40.0], [-3.0, 50.0, 10.0, 9.0, -8.0]] {
            let p = cs.feasible_point(&target, &mut rng).unwrap();
            assert!(cs.contains(&p), "{target:?} -> {p:?}");
        }
        let cs = county_table_constraints(&[50, 7], CountSupport::Discrete).unwrap();
        let p = cs
            .feasible_point(&[40.3, 30.0, -2.0, 9.9, 80.0, 3.0, 3.0, 3.0, 3.0, -1.0], &mut rng)
            .unwrap();
        assert!(cs.contains(&p), "{p:?}");
    }

    #[test]
    fn infeasible_set_is_reported() {
        let mut rng = RngHandle::new(1, 0);
        let cs = ConstraintSet::custom(vec![0.0, 0.0], vec![1.0, 1.0], |_| false).unwrap();
        assert!(matches!(cs.feasible_point(&[0.5, 0.5], &mut rng), Err(Error::Infeasible)));
    }

    #[test]
    fn invalid_blocks_rejected() {
        let r = ConstraintSet::from_blocks(
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![false, false],
            vec![Block {
                start: 0,
                len: 1,
                rule: Rule::Interval,
            }],
        );
        assert!(r.is_err());
        assert!(ConstraintSet::interval(1.0, 0.0).is_err());
    }

    fn data_in_unit(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..=1.0, n)
    }

    proptest! {
        #[test]
        fn real_data_statistics_are_members(x in data_in_unit(40)) {
            let s1: f64 = x.iter().sum();
            let s2: f64 = x.iter().map(|v| v * v).sum();
            prop_assert!(bounded_moments_constraints(40).unwrap().contains(&[s1, s2]));
        }

        #[test]
        fn real_regression_statistics_are_members(x in data_in_unit(25), y in data_in_unit(25)) {
            let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assume!(spread > 1e-3);
            let t = [
                x.iter().sum::<f64>(),
                x.iter().map(|v| v * v).sum::<f64>(),
                y.iter().sum::<f64>(),
                y.iter().map(|v| v * v).sum::<f64>(),
                x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>(),
            ];
            prop_assert!(regression_constraints(25).unwrap().contains(&t));
        }

        #[test]
        fn nesting_in_n(s1 in 0.0f64..50.0, s2 in 0.0f64..50.0, n in 1u64..60, extra in 1u64..100) {
            let small = bounded_moments_constraints(n).unwrap();
            let big = bounded_moments_constraints(n + extra).unwrap();
            if small.contains(&[s1, s2]) {
                prop_assert!(big.contains(&[s1, s2]));
            }
        }

        #[test]
        fn members_lie_in_box(t in proptest::collection::vec(-5.0f64..35.0, 5)) {
            let cs = regression_constraints(30).unwrap();
            if cs.contains(&t) {
                let (lo, hi) = (cs.lower(), cs.upper());
                for j in 0..5 {
                    prop_assert!(lo[j] <= t[j] && t[j] <= hi[j]);
                }
            }
        }
    }
}
