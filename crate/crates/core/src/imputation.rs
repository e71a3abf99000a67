//! Sampling the confidential statistic given its private release.
//!
//! The target is the mechanism density `m(s_dp | T)` viewed as a function of
//! `T` and restricted to the constraint set. Because the mechanism is an
//! additive location family with independent coordinates, this is the noise
//! law centred at `s_dp` and truncated to the set, and it factors over the
//! constraint set's blocks. Each block is sampled on its own:
//!
//! * one-dimensional continuous intervals by exact inverse CDF,
//! * other continuous blocks by proposing from the untruncated noise and
//!   keeping members, falling back to a random walk when almost nothing is
//!   accepted,
//! * blocks with integer coordinates by a componentwise Metropolis walk on
//!   the lattice.
//!
//! All sampling happens in the constraint set's untranslated coordinates, so
//! shifting both the release and the set by the same exactly representable
//! amount reproduces the same accept/reject decisions.

use serde::{Deserialize, Serialize};

use crate::constraints::{Block, ConstraintSet, Rule};
use crate::error::{check_dim, Error, Result};
use crate::mechanisms::{NoiseFamily, NoiseKind, PrivateRelease};
use crate::rng::RngHandle;
use crate::sampling::{standard_normal, uniform01};
use crate::stats::{autocorrelation, norm_cdf, norm_quantile, norm_sf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationMethod {
    ExactTruncated1D,
    RejectionFromNoise,
    MetropolisWalk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputationOptions {
    /// Rejection proposals allowed per requested draw before the acceptance
    /// rate is checked against `acceptance_floor`.
    pub proposal_budget_factor: u64,
    pub acceptance_floor: f64,
    /// Walk sweeps discarded before sampling, used for step adaptation.
    pub burn_in: usize,
    /// Sweeps used to estimate autocorrelation and choose the thinning.
    pub pilot_sweeps: usize,
    /// Initial walk step as a fraction of the noise scale.
    pub step_fraction: f64,
    pub target_acceptance: (f64, f64),
    pub max_thinning: usize,
    /// Bypass automatic method selection.
    pub force_method: Option<ImputationMethod>,
}

impl Default for ImputationOptions {
    fn default() -> Self {
        Self {
            proposal_budget_factor: 50,
            acceptance_floor: 1e-3,
            burn_in: 2000,
            pilot_sweeps: 1000,
            step_fraction: 0.5,
            target_acceptance: (0.30, 0.45),
            max_thinning: 200,
            force_method: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkDiagnostics {
    pub acceptance_rate: f64,
    /// Lag-one autocorrelation of the kept draws, per coordinate.
    pub lag1_autocorrelation: Vec<f64>,
    pub thinning: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImputationReport {
    /// `R` rows of length `k`. Not serialized.
    #[serde(skip)]
    pub draws: Vec<Vec<f64>>,
    /// For rejection, the proposals spent on the hardest block.
    pub proposals_used: u64,
    pub acceptance_rate: f64,
    /// The least exact method used on any block.
    pub method: ImputationMethod,
    /// Set when rejection was abandoned for the walk.
    pub fell_back: bool,
    pub diagnostics: Option<WalkDiagnostics>,
}

impl ImputationReport {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Column `j` of the draws.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[j]).collect()
    }
}

/// Exact draw from the noise law centred at `center` with the given scale,
/// truncated to `[lo, hi]`. Bounds may be infinite.
pub fn sample_truncated_univariate(
    rng: &mut RngHandle,
    family: NoiseKind,
    center: f64,
    scale: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::param(format!("scale must be positive, got {scale}")));
    }
    if !(lo < hi) {
        return Err(Error::param(format!("truncation needs lo < hi, got [{lo}, {hi}]")));
    }
    let a = (lo - center) / scale;
    let b = (hi - center) / scale;
    let x = match family {
        NoiseKind::Gaussian => truncated_std_normal(rng, a, b)?,
        NoiseKind::Laplace => truncated_std_laplace(rng, a, b)?,
    };
    Ok((center + scale * x).clamp(lo, hi))
}

const MIN_MASS: f64 = 1e-300;

fn truncated_std_normal(rng: &mut RngHandle, a: f64, b: f64) -> Result<f64> {
    let u = uniform01(rng);
    if a >= 0.0 {
        // upper tail: invert the survival function
        let (qa, qb) = (norm_sf(a), norm_sf(b));
        let mass = qa - qb;
        if !(mass >= MIN_MASS) {
            return Err(Error::Underflow(mass));
        }
        Ok((-norm_quantile(qa - u * mass)).clamp(a, b))
    } else if b <= 0.0 {
        let (pa, pb) = (norm_cdf(a), norm_cdf(b));
        let mass = pb - pa;
        if !(mass >= MIN_MASS) {
            return Err(Error::Underflow(mass));
        }
        Ok(norm_quantile(pa + u * mass).clamp(a, b))
    } else {
        let (pa, pb) = (norm_cdf(a), norm_cdf(b));
        let mass = pb - pa;
        if !(mass >= MIN_MASS) {
            return Err(Error::Underflow(mass));
        }
        Ok(norm_quantile(pa + u * mass).clamp(a, b))
    }
}

/// Standard exponential truncated to `[a, b]` with `0 <= a < b`.
fn truncated_exp(u: f64, a: f64, b: f64) -> f64 {
    // 1 - exp(-(b - a)), accurate for short intervals
    let width_mass = -(-(b - a)).exp_m1();
    (a - (-u * width_mass).ln_1p()).clamp(a, b)
}

fn truncated_std_laplace(rng: &mut RngHandle, a: f64, b: f64) -> Result<f64> {
    // mass of [a, b] under the standard Laplace, kept in log form for tails
    let log_mass = if a >= 0.0 {
        -a + (-(-(b - a)).exp_m1()).ln() - std::f64::consts::LN_2
    } else if b <= 0.0 {
        b + (-(-(b - a)).exp_m1()).ln() - std::f64::consts::LN_2
    } else {
        (1.0 - 0.5 * a.exp() - 0.5 * (-b).exp()).ln()
    };
    if !(log_mass >= MIN_MASS.ln()) {
        return Err(Error::Underflow(log_mass.exp()));
    }
    if a >= 0.0 {
        Ok(truncated_exp(uniform01(rng), a, b))
    } else if b <= 0.0 {
        Ok(-truncated_exp(uniform01(rng), -b, -a))
    } else {
        let left = -0.5 * a.exp_m1();
        let right = -0.5 * (-b).exp_m1();
        let pick = uniform01(rng) * (left + right);
        let u = uniform01(rng);
        if pick < left {
            Ok(-truncated_exp(u, 0.0, -a))
        } else {
            Ok(truncated_exp(u, 0.0, b))
        }
    }
}

/// Per-block bookkeeping merged into the final report.
#[derive(Default)]
struct Tally {
    method: Option<ImputationMethod>,
    fell_back: bool,
    worst_rejection: Option<(u64, u64)>,
    walk_accepts: u64,
    walk_proposals: u64,
    thinning: usize,
}

impl Tally {
    fn note(&mut self, m: ImputationMethod) {
        let rank = |m: ImputationMethod| match m {
            ImputationMethod::ExactTruncated1D => 0,
            ImputationMethod::RejectionFromNoise => 1,
            ImputationMethod::MetropolisWalk => 2,
        };
        if self.method.is_none_or(|cur| rank(m) > rank(cur)) {
            self.method = Some(m);
        }
    }
}

fn validate(release: &PrivateRelease, cs: &ConstraintSet, r_draws: usize) -> Result<()> {
    check_dim(cs.dim(), release.s_dp.len())?;
    check_dim(cs.dim(), release.noise.dim())?;
    if r_draws == 0 {
        return Err(Error::param("need at least one draw"));
    }
    Ok(())
}

/// Centre of the target in the set's untranslated coordinates.
fn base_center(release: &PrivateRelease, cs: &ConstraintSet) -> Vec<f64> {
    release.s_dp.iter().zip(cs.offset()).map(|(s, o)| s - o).collect()
}

fn finish(mut draws: Vec<Vec<f64>>, cs: &ConstraintSet, tally: Tally, r: usize, lag1: Vec<f64>) -> ImputationReport {
    for d in &mut draws {
        for (x, o) in d.iter_mut().zip(cs.offset()) {
            *x += o;
        }
    }
    let method = tally.method.unwrap_or(ImputationMethod::ExactTruncated1D);
    let (proposals_used, acceptance_rate) = match (method, tally.worst_rejection) {
        (ImputationMethod::MetropolisWalk, _) => (
            tally.walk_proposals,
            tally.walk_accepts as f64 / tally.walk_proposals.max(1) as f64,
        ),
        (ImputationMethod::RejectionFromNoise, Some((props, acc))) => (props, acc as f64 / props as f64),
        _ => (r as u64, 1.0),
    };
    let diagnostics = (tally.walk_proposals > 0).then(|| WalkDiagnostics {
        acceptance_rate: tally.walk_accepts as f64 / tally.walk_proposals as f64,
        lag1_autocorrelation: lag1,
        thinning: tally.thinning,
    });
    ImputationReport {
        draws,
        proposals_used,
        acceptance_rate,
        method,
        fell_back: tally.fell_back,
        diagnostics,
    }
}

/// Draw `r_draws` statistics from the noise law centred at the release and
/// restricted to `cs`.
pub fn impute(
    rng: &mut RngHandle,
    release: &PrivateRelease,
    cs: &ConstraintSet,
    r_draws: usize,
    options: &ImputationOptions,
) -> Result<ImputationReport> {
    validate(release, cs, r_draws)?;
    let center = base_center(release, cs);
    let noise = &release.noise;
    let mut draws = vec![vec![0.0; cs.dim()]; r_draws];
    let mut tally = Tally::default();
    let mut lag1 = vec![f64::NAN; cs.dim()];

    for block in cs.blocks() {
        let lattice = block.range().any(|j| cs.lattice()[j]);
        let one_d_interval = block.len == 1 && matches!(block.rule, Rule::Interval) && !lattice;
        let method = match options.force_method {
            Some(ImputationMethod::ExactTruncated1D) if !one_d_interval => {
                return Err(Error::param("exact sampling needs one-dimensional continuous interval blocks"))
            }
            Some(ImputationMethod::RejectionFromNoise) if lattice => {
                return Err(Error::param("rejection from continuous noise cannot hit integer coordinates"))
            }
            Some(m) => m,
            None if one_d_interval => ImputationMethod::ExactTruncated1D,
            None if lattice => ImputationMethod::MetropolisWalk,
            None => ImputationMethod::RejectionFromNoise,
        };
        match method {
            ImputationMethod::ExactTruncated1D => {
                let j = block.start;
                let (lo, hi) = (cs.base_lower()[j], cs.base_upper()[j]);
                for d in draws.iter_mut() {
                    d[j] = if lo == hi {
                        lo
                    } else {
                        sample_truncated_univariate(rng, noise.kind, center[j], noise.scales[j], lo, hi)?
                    };
                }
                tally.note(ImputationMethod::ExactTruncated1D);
            }
            ImputationMethod::RejectionFromNoise => {
                match reject_block(rng, noise, cs, block, &center, &mut draws, options)? {
                    Some((props, acc)) => {
                        tally.note(ImputationMethod::RejectionFromNoise);
                        if tally.worst_rejection.is_none_or(|(p, a)| (acc as f64 / props as f64) < a as f64 / p as f64) {
                            tally.worst_rejection = Some((props, acc));
                        }
                    }
                    None => {
                        tally.fell_back = true;
                        walk_block(rng, noise, cs, block, &center, &mut draws, options, &mut tally, &mut lag1)?;
                    }
                }
            }
            ImputationMethod::MetropolisWalk => {
                walk_block(rng, noise, cs, block, &center, &mut draws, options, &mut tally, &mut lag1)?;
            }
        }
    }
    Ok(finish(draws, cs, tally, r_draws, lag1))
}

/// Rejection sampling for one block. Returns `None` when the acceptance
/// rate over the initial proposal budget is below the floor.
fn reject_block(
    rng: &mut RngHandle,
    noise: &NoiseFamily,
    cs: &ConstraintSet,
    block: &Block,
    center: &[f64],
    draws: &mut [Vec<f64>],
    options: &ImputationOptions,
) -> Result<Option<(u64, u64)>> {
    let r = draws.len() as u64;
    let budget = options.proposal_budget_factor.max(1) * r;
    let range = block.range();
    let mut u = vec![0.0; block.len];
    let (mut proposals, mut accepted) = (0u64, 0u64);
    let mut checked = false;
    while accepted < r {
        if proposals == budget && !checked {
            checked = true;
            if (accepted as f64) < options.acceptance_floor * proposals as f64 {
                return Ok(None);
            }
        }
        for (i, j) in range.clone().enumerate() {
            u[i] = center[j] + noise.sample_coord(rng, j);
        }
        proposals += 1;
        if cs.block_contains(block, &u) {
            draws[accepted as usize][range.clone()].copy_from_slice(&u);
            accepted += 1;
        }
    }
    Ok(Some((proposals, accepted)))
}

/// Componentwise Metropolis walk for one block, writing thinned draws.
#[allow(clippy::too_many_arguments)]
fn walk_block(
    rng: &mut RngHandle,
    noise: &NoiseFamily,
    cs: &ConstraintSet,
    block: &Block,
    center: &[f64],
    draws: &mut [Vec<f64>],
    options: &ImputationOptions,
    tally: &mut Tally,
    lag1: &mut [f64],
) -> Result<()> {
    let range = block.range();
    let m = block.len;
    let lattice: Vec<bool> = range.clone().map(|j| cs.lattice()[j]).collect();
    let mut state = cs.feasible_block_point(block, &center[range.clone()], rng)?;
    let log_target = |u: &[f64], i: usize| noise.coord_log_density(block.start + i, center[block.start + i] - u[i]);
    let mut steps: Vec<f64> = range
        .clone()
        .enumerate()
        .map(|(i, j)| {
            let s = options.step_fraction * noise.scales[j];
            if lattice[i] {
                s.max(1.0)
            } else {
                s
            }
        })
        .collect();

    let sweep = |state: &mut Vec<f64>, steps: &[f64], acc: &mut [u64], rng: &mut RngHandle| {
        for i in 0..m {
            let old = state[i];
            let mut delta = steps[i] * standard_normal(rng);
            if lattice[i] {
                delta = delta.round();
                if delta == 0.0 {
                    delta = if uniform01(rng) < 0.5 { -1.0 } else { 1.0 };
                }
            }
            let before = log_target(state, i);
            state[i] = old + delta;
            if !cs.block_contains(block, state) {
                state[i] = old;
                continue;
            }
            let log_ratio = log_target(state, i) - before;
            if log_ratio >= 0.0 || uniform01(rng).ln() < log_ratio {
                acc[i] += 1;
            } else {
                state[i] = old;
            }
        }
    };

    // burn-in with step adaptation every 100 sweeps
    let mut acc = vec![0u64; m];
    let (lo_t, hi_t) = options.target_acceptance;
    for s in 1..=options.burn_in {
        sweep(&mut state, &steps, &mut acc, rng);
        if s % 100 == 0 {
            for i in 0..m {
                let rate = acc[i] as f64 / 100.0;
                if rate < lo_t {
                    steps[i] *= 0.7;
                } else if rate > hi_t {
                    steps[i] *= 1.4;
                }
                if lattice[i] {
                    steps[i] = steps[i].max(0.5);
                }
                acc[i] = 0;
            }
        }
    }

    // pilot run to choose the thinning interval
    let mut pilot = vec![Vec::with_capacity(options.pilot_sweeps); m];
    let mut acc = vec![0u64; m];
    for _ in 0..options.pilot_sweeps {
        sweep(&mut state, &steps, &mut acc, rng);
        for i in 0..m {
            pilot[i].push(state[i]);
        }
    }
    let rho = pilot
        .iter()
        .map(|c| autocorrelation(c, 1))
        .filter(|r| r.is_finite())
        .fold(0.0f64, f64::max);
    let thin = thinning_for(rho, options.max_thinning);

    let mut kept = vec![Vec::with_capacity(draws.len()); m];
    for d in draws.iter_mut() {
        for _ in 0..thin {
            sweep(&mut state, &steps, &mut acc, rng);
        }
        d[range.clone()].copy_from_slice(&state);
        for i in 0..m {
            kept[i].push(state[i]);
        }
    }
    let sweeps = (options.pilot_sweeps + thin * draws.len()) as u64;
    tally.walk_accepts += acc.iter().sum::<u64>();
    tally.walk_proposals += sweeps * m as u64;
    tally.thinning = tally.thinning.max(thin);
    tally.note(ImputationMethod::MetropolisWalk);
    for (i, j) in range.enumerate() {
        lag1[j] = autocorrelation(&kept[i], 1);
    }
    Ok(())
}

/// Smallest `k` with `rho^k < 1/2`, treating the chain as autoregressive.
fn thinning_for(rho: f64, max: usize) -> usize {
    if rho < 0.5 {
        return 1;
    }
    if rho >= 1.0 {
        return max.max(1);
    }
    let k = ((0.5f64).ln() / rho.ln()).floor() as usize + 1;
    k.clamp(1, max.max(1))
}

/// Run the walk on every block regardless of the automatic choice.
pub fn metropolis_walk(
    rng: &mut RngHandle,
    release: &PrivateRelease,
    cs: &ConstraintSet,
    r_draws: usize,
    options: &ImputationOptions,
) -> Result<ImputationReport> {
    let opts = ImputationOptions {
        force_method: Some(ImputationMethod::MetropolisWalk),
        ..options.clone()
    };
    impute(rng, release, cs, r_draws, &opts)
}
