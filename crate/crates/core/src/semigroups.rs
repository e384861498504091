// SPDX-License-Identifier: Apache-2.0

//! Heat semigroups on the line, with Neumann, Robin or absorbing conditions
//! at the origin, and the verification quantities built on them.
//!
//! All evaluations are kernel quadratures; derivatives in `x` are taken
//! under the integral sign through the kernel-derivative polynomials.
//!
//! Robin evaluations split `g` into even and odd parts. The even part
//! evolves under the whole-line kernel. The odd part is `sign(x) u(|x|)`,
//! where `u` solves the half-line problem with `u_x(0) = 2 alpha u(0)`,
//! giving
//!
//! ```text
//! u(a) = int_0^inf g_odd(y) [phi(a - y) + phi(a + y) - 4 alpha F(a + y)] dy,
//! F(b) = int_0^inf exp(-2 alpha s) phi(b + s) ds.
//! ```
//!
//! The two nested routes compute the same `u` as
//! `u(a) = int_0^inf exp(-2 alpha s) v(a + s) ds` from `v = 2 alpha u - u_x`,
//! which solves the absorbing problem with initial datum
//! `2 alpha g_odd - g_odd'`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{integrate_try, HeatKernel, QuadratureConfig, RobinResolvent};
use crate::testfn::{
    l2beta_norm_sq, metric_with, seminorms, BetaRegime, RegimeKind, SeminormGrid, SeminormIndex, Side, TestFunction,
    DEFAULT_METRIC_TRUNC,
};

/// Highest derivative order served for semigroup images.
pub const SEMIGROUP_K_MAX: usize = 8;

/// Disagreement above which a cross-checked Robin evaluation fails.
pub const ROUTE_TOLERANCE: f64 = 1e-6;

/// How the Robin odd part is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobinRoute {
    /// Single quadrature against the closed-form half-line Robin kernel.
    #[default]
    Kernel,
    /// Nested quadrature of the explicit double-integral formula.
    Direct,
    /// Absorbing evolution of `2 alpha g_odd - g_odd'`, then the exponential
    /// integral that inverts `v = 2 alpha u - u_x`.
    Reduction,
    /// Direct and reduction together; returns the reduction value.
    CrossChecked,
}

/// One point evaluation of `d^k/dx^k T_t H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupQuery {
    pub regime: BetaRegime,
    pub t: f64,
    pub k: usize,
    pub x: f64,
    /// Selects `0-` or `0+` when `x == 0`.
    pub side: Side,
}

/// Kernels of one regime at one positive time, reusable across evaluations.
#[derive(Debug, Clone)]
pub struct Propagator {
    regime: BetaRegime,
    kernel: HeatKernel,
    resolvent: Option<RobinResolvent>,
}

impl Propagator {
    pub fn new(regime: &BetaRegime, t: f64) -> Result<Self> {
        let kernel = HeatKernel::new(t)?;
        let resolvent = match regime.kind() {
            RegimeKind::Robin => Some(RobinResolvent::new(t, regime.alpha())?),
            _ => None,
        };
        Ok(Self { regime: *regime, kernel, resolvent })
    }

    pub fn regime(&self) -> &BetaRegime {
        &self.regime
    }

    pub fn time(&self) -> f64 {
        self.kernel.time()
    }

    pub fn eval(
        &self,
        g: &TestFunction,
        x: f64,
        side: Side,
        k: usize,
        route: RobinRoute,
        cfg: &QuadratureConfig,
    ) -> Result<f64> {
        check_order(k)?;
        let side = Side::of(x, side);
        match self.regime.kind() {
            RegimeKind::Line => line(&self.kernel, g, x, k, cfg),
            RegimeKind::Neumann => neumann(&self.kernel, g, x, side, k, cfg),
            RegimeKind::Robin => {
                let res = self.resolvent.as_ref().expect("Robin propagator has a resolvent");
                robin(res, g, x, side, k, route, cfg)
            }
        }
    }
}

fn check_order(k: usize) -> Result<()> {
    if k > SEMIGROUP_K_MAX {
        return Err(Error::OrderUnsupported { requested: k, max: SEMIGROUP_K_MAX });
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("evolution time must be >= 0, got {t}")));
    }
    Ok(())
}

/// Panel boundaries at most `step` apart across `[lo, hi]`.
fn cuts(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if !(hi > lo) || !(step > 0.0) {
        return Vec::new();
    }
    let n = ((hi - lo) / step).ceil().min(4096.0) as usize;
    (1..n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn panel_step(kernel: &HeatKernel, g: &TestFunction) -> f64 {
    1.5 * kernel.sigma().min(g.feature_width())
}

/// `y`-range where a kernel centred at `|x|` meets the support of `g` on `[0, inf)`.
fn half_window(kernel: &HeatKernel, g: &TestFunction, a: f64, cfg: &QuadratureConfig) -> (f64, f64) {
    let w = cfg.truncation_sigmas * kernel.sigma();
    ((a - w).max(0.0), (a + w).min(g.radius()))
}

fn line(kernel: &HeatKernel, g: &TestFunction, x: f64, k: usize, cfg: &QuadratureConfig) -> Result<f64> {
    let w = cfg.truncation_sigmas * kernel.sigma();
    let r = g.radius();
    let (lo, hi) = ((x - w).max(-r), (x + w).min(r));
    if !(hi > lo) {
        return Ok(0.0);
    }
    let step = panel_step(kernel, g);
    let mut total = 0.0;
    for (a, b, side) in [(lo, hi.min(0.0), Side::Left), (lo.max(0.0), hi, Side::Right)] {
        if b > a {
            let f = |y: f64| Ok(kernel.deriv(x - y, k) * g.eval_raw(y, 0, side)?);
            total += integrate_try(f, a, b, &cuts(a, b, step), cfg)?.value;
        }
    }
    Ok(total)
}

fn neumann(kernel: &HeatKernel, g: &TestFunction, x: f64, side: Side, k: usize, cfg: &QuadratureConfig) -> Result<f64> {
    let (lo, hi) = half_window(kernel, g, x.abs(), cfg);
    if !(hi > lo) {
        return Ok(0.0);
    }
    let s = side.sign();
    let f = |y: f64| Ok((kernel.deriv(x - y, k) + kernel.deriv(x + y, k)) * g.eval_raw(s * y, 0, side)?);
    Ok(integrate_try(f, lo, hi, &cuts(lo, hi, panel_step(kernel, g)), cfg)?.value)
}

/// Sign of the `k`-th derivative of `sign(x) u(|x|)` relative to `u^(k)(|x|)`.
fn odd_factor(side: Side, k: usize) -> f64 {
    match side {
        Side::Right => 1.0,
        Side::Left if k % 2 == 1 => 1.0,
        Side::Left => -1.0,
    }
}

fn parts(g: &TestFunction, y: f64) -> Result<(f64, f64)> {
    let (p, m) = (g.eval_raw(y, 0, Side::Right)?, g.eval_raw(-y, 0, Side::Left)?);
    Ok((0.5 * (p + m), 0.5 * (p - m)))
}

fn robin(
    res: &RobinResolvent,
    g: &TestFunction,
    x: f64,
    side: Side,
    k: usize,
    route: RobinRoute,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let kernel = res.kernel();
    let a = x.abs();
    let c = odd_factor(side, k);
    let (lo, hi) = half_window(kernel, g, a, cfg);
    let step = panel_step(kernel, g);
    if route == RobinRoute::Kernel {
        if !(hi > lo) {
            return Ok(0.0);
        }
        let four_a = 4.0 * res.alpha();
        let f = |y: f64| {
            let (even, odd) = parts(g, y)?;
            let e = (kernel.deriv(x - y, k) + kernel.deriv(x + y, k)) * even;
            let o = kernel.deriv(a - y, k) + kernel.deriv(a + y, k) - four_a * res.deriv(a + y, k);
            Ok(e + c * odd * o)
        };
        return Ok(integrate_try(f, lo, hi, &cuts(lo, hi, step), cfg)?.value);
    }

    let even = if hi > lo {
        let f = |y: f64| Ok((kernel.deriv(x - y, k) + kernel.deriv(x + y, k)) * parts(g, y)?.0);
        integrate_try(f, lo, hi, &cuts(lo, hi, step), cfg)?.value
    } else {
        0.0
    };
    let odd = match route {
        RobinRoute::Direct => odd_nested(res, g, a, k, false, cfg)?,
        RobinRoute::Reduction => odd_nested(res, g, a, k, true, cfg)?,
        RobinRoute::CrossChecked => {
            let direct = odd_nested(res, g, a, k, false, cfg)?;
            let reduction = odd_nested(res, g, a, k, true, cfg)?;
            if (direct - reduction).abs() > ROUTE_TOLERANCE * reduction.abs().max(1.0) {
                return Err(Error::RouteMismatch { direct: even + c * direct, reduction: even + c * reduction });
            }
            reduction
        }
        RobinRoute::Kernel => unreachable!("handled above"),
    };
    Ok(even + c * odd)
}

/// `u^(k)(a) = int_0^inf exp(-2 alpha s) v^(k)(a + s) ds` with `v` from either route.
fn odd_nested(
    res: &RobinResolvent,
    g: &TestFunction,
    a: f64,
    k: usize,
    reduction: bool,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let kernel = res.kernel();
    let two_a = 2.0 * res.alpha();
    let w = cfg.truncation_sigmas * kernel.sigma();
    let s_max = (16.0 * std::f64::consts::LN_10 / two_a).min(g.radius() + w - a);
    if !(s_max > 0.0) {
        return Ok(0.0);
    }
    let inner_cfg = cfg.scaled(0.1);
    let step = panel_step(kernel, g);
    let v = |z: f64| -> Result<f64> {
        let (lo, hi) = half_window(kernel, g, z, cfg);
        if !(hi > lo) {
            return Ok(0.0);
        }
        let f = |y: f64| -> Result<f64> {
            if reduction {
                let odd = parts(g, y)?.1;
                let slope = 0.5 * (g.eval_raw(y, 1, Side::Right)? + g.eval_raw(-y, 1, Side::Left)?);
                Ok((kernel.deriv(z - y, k) - kernel.deriv(z + y, k)) * (two_a * odd - slope))
            } else {
                let odd = parts(g, y)?.1;
                let minus = two_a * kernel.deriv(z - y, k) - kernel.deriv(z - y, k + 1);
                let plus = -kernel.deriv(z + y, k + 1) - two_a * kernel.deriv(z + y, k);
                Ok((minus + plus) * odd)
            }
        };
        Ok(integrate_try(f, lo, hi, &cuts(lo, hi, step), &inner_cfg)?.value)
    };
    let outer = |s: f64| Ok((-two_a * s).exp() * v(a + s)?);
    Ok(integrate_try(outer, 0.0, s_max, &cuts(0.0, s_max, step.min(1.0 / two_a)), cfg)?.value)
}

/// Evaluation behind lazily evolved test functions.
pub(crate) fn evaluate(
    prop: &Propagator,
    seed: &TestFunction,
    x: f64,
    side: Side,
    k: usize,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    prop.eval(seed, x, side, k, RobinRoute::Kernel, cfg)
}

/// `d^k/dx^k T_t H (x)` for any regime; `t = 0` returns `H`'s own derivative.
pub fn query(q: &SemigroupQuery, h: &TestFunction, route: RobinRoute, cfg: &QuadratureConfig) -> Result<f64> {
    check_time(q.t)?;
    check_order(q.k)?;
    if q.t == 0.0 {
        return h.eval_sided(q.x, q.k, q.side);
    }
    Propagator::new(&q.regime, q.t)?.eval(h, q.x, q.side, q.k, route, cfg)
}

/// `d^k/dx^k (phi_t * H)(x)`.
pub fn apply_line(t: f64, h: &TestFunction, x: f64, k: usize) -> Result<f64> {
    let q = SemigroupQuery { regime: BetaRegime::line(), t, k, x, side: Side::Right };
    query(&q, h, RobinRoute::Kernel, &QuadratureConfig::default())
}

/// `d^k/dx^k T_t^Neu H (x)`; `side` picks the branch at the origin.
pub fn apply_neumann(t: f64, h: &TestFunction, x: f64, side: Side, k: usize) -> Result<f64> {
    let q = SemigroupQuery { regime: BetaRegime::neumann(), t, k, x, side };
    query(&q, h, RobinRoute::Kernel, &QuadratureConfig::default())
}

/// `d^k/dx^k T_t^alpha H (x)` by the chosen route.
pub fn apply_robin(
    t: f64,
    alpha: f64,
    h: &TestFunction,
    x: f64,
    side: Side,
    k: usize,
    route: RobinRoute,
) -> Result<f64> {
    apply_robin_with(t, alpha, h, x, side, k, route, &QuadratureConfig::default())
}

#[allow(clippy::too_many_arguments)]
pub fn apply_robin_with(
    t: f64,
    alpha: f64,
    h: &TestFunction,
    x: f64,
    side: Side,
    k: usize,
    route: RobinRoute,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let q = SemigroupQuery { regime: BetaRegime::robin(alpha)?, t, k, x, side };
    query(&q, h, route, cfg)
}

/// `d^k/dx^k T_t^Dir v0 (x)` on `x >= 0`, using the right branch of `v0`.
pub fn apply_dirichlet(t: f64, v0: &TestFunction, x: f64, k: usize) -> Result<f64> {
    check_order(k)?;
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("absorbing semigroup lives on x >= 0, got {x}")));
    }
    check_time(t)?;
    if t == 0.0 {
        return v0.eval(x, k);
    }
    let cfg = QuadratureConfig::default();
    let kernel = HeatKernel::new(t)?;
    let (lo, hi) = half_window(&kernel, v0, x, &cfg);
    if !(hi > lo) {
        return Ok(0.0);
    }
    let f = |y: f64| Ok((kernel.deriv(x - y, k) - kernel.deriv(x + y, k)) * v0.eval_raw(y, 0, Side::Right)?);
    Ok(integrate_try(f, lo, hi, &cuts(lo, hi, panel_step(&kernel, v0)), &cfg)?.value)
}

/// `d^k/dx^k T_t^beta H (x)` dispatched on the regime.
pub fn apply(regime: &BetaRegime, t: f64, h: &TestFunction, x: f64, side: Side, k: usize) -> Result<f64> {
    let q = SemigroupQuery { regime: *regime, t, k, x, side };
    query(&q, h, RobinRoute::Kernel, &QuadratureConfig::default())
}

/// One sampled value; `one_sided` is set for the limits at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub x: f64,
    pub one_sided: Option<Side>,
    pub k: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub regime: BetaRegime,
    pub t: f64,
    pub records: Vec<SampleRecord>,
}

impl SampledFunction {
    /// Value at the one-sided limit `0-` or `0+`.
    pub fn at_origin(&self, side: Side) -> Option<f64> {
        self.records.iter().find(|r| r.one_sided == Some(side)).map(|r| r.value)
    }
}

/// `d^k T_t^beta H` on `grid` (points at `0` skipped) followed by the limits at `0-` and `0+`.
pub fn semigroup_apply(
    regime: &BetaRegime,
    t: f64,
    h: &TestFunction,
    grid: &[f64],
    k: usize,
) -> Result<SampledFunction> {
    check_time(t)?;
    let evolved = h.evolve(regime, t)?;
    if k > evolved.k_max() {
        return Err(Error::OrderUnsupported { requested: k, max: evolved.k_max() });
    }
    let mut points: Vec<(f64, Option<Side>)> = grid.iter().filter(|x| **x != 0.0).map(|&x| (x, None)).collect();
    points.push((0.0, Some(Side::Left)));
    points.push((0.0, Some(Side::Right)));
    let records = points
        .par_iter()
        .map(|&(x, one_sided)| {
            let value = evolved.eval_sided(x, k, one_sided.unwrap_or(Side::Right))?;
            Ok(SampleRecord { x, one_sided, k, value })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampledFunction { regime: *regime, t, records })
}

/// `max_{(k,l)} ||(T_{t+eps} H - T_t H)/eps - Delta_beta T_t H||_{k,l}`.
pub fn generator_residual(
    regime: &BetaRegime,
    t: f64,
    eps: f64,
    h: &TestFunction,
    norms: &[SeminormIndex],
) -> Result<f64> {
    generator_residual_with(regime, t, eps, h, norms, &SeminormGrid::coarse())
}

pub fn generator_residual_with(
    regime: &BetaRegime,
    t: f64,
    eps: f64,
    h: &TestFunction,
    norms: &[SeminormIndex],
    grid: &SeminormGrid,
) -> Result<f64> {
    check_time(t)?;
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("generator step must be > 0, got {eps}")));
    }
    let now = h.evolve(regime, t)?;
    let later = h.evolve(regime, t + eps)?;
    let lap = now.derivative(2)?;
    let diff = TestFunction::combination(vec![(1.0 / eps, later), (-1.0 / eps, now), (-1.0, lap)]);
    let values = seminorms(&diff, norms, grid)?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

/// `d(T_t H, T_s H)` in the truncated metric.
pub fn continuity_modulus(regime: &BetaRegime, h: &TestFunction, t: f64, s: f64) -> Result<f64> {
    continuity_modulus_with(regime, h, t, s, DEFAULT_METRIC_TRUNC, &SeminormGrid::coarse())
}

pub fn continuity_modulus_with(
    regime: &BetaRegime,
    h: &TestFunction,
    t: f64,
    s: f64,
    trunc: usize,
    grid: &SeminormGrid,
) -> Result<f64> {
    check_time(t)?;
    check_time(s)?;
    if t == s {
        return Ok(0.0);
    }
    Ok(metric_with(&h.evolve(regime, t)?, &h.evolve(regime, s)?, trunc, grid)?.value)
}

/// `f(t) = ||nabla_beta T_t H||^2_{2,beta}` at each time.
pub fn gradnorm_curve(regime: &BetaRegime, h: &TestFunction, times: &[f64]) -> Result<Vec<f64>> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("times must be sorted".into()));
    }
    let cfg = QuadratureConfig::default();
    times
        .par_iter()
        .map(|&t| {
            check_time(t)?;
            let grad = h.evolve(regime, t)?.derivative(1)?;
            l2beta_norm_sq(&grad, regime, &cfg)
        })
        .collect()
}
