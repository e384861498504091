// SPDX-License-Identifier: Apache-2.0

//! Heat kernel, its space derivatives and the adaptive quadrature engine.
//!
//! Derivatives of `phi_t(x) = exp(-x^2/4t) / sqrt(4 pi t)` are written as
//! `q_n(x) phi_t(x)` where the polynomials obey
//! `q_{n+1} = q_n' - x/(2t) q_n`, `q_0 = 1`.
//!
//! Quadrature is Gauss-Kronrod 10/21 with global (largest-error-first)
//! bisection, in the style of QUADPACK's QAG.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Highest kernel derivative order precomputed by [`HeatKernel`].
pub const MAX_KERNEL_ORDER: usize = 12;

/// Polynomial factor of the n-th space derivative of the heat kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDerivative {
    order: usize,
    /// Coefficients in increasing powers of `x`.
    coeffs: Vec<f64>,
}

impl KernelDerivative {
    pub fn new(order: usize, t: f64) -> Result<Self> {
        check_time(t)?;
        let mut coeffs = vec![1.0];
        for _ in 0..order {
            coeffs = Self::step(&coeffs, t);
        }
        Ok(Self { order, coeffs })
    }

    fn step(c: &[f64], t: f64) -> Vec<f64> {
        let inv2t = 1.0 / (2.0 * t);
        let mut next = vec![0.0; c.len() + 1];
        for (j, slot) in next.iter_mut().enumerate() {
            let d = if j + 1 < c.len() { (j + 1) as f64 * c[j + 1] } else { 0.0 };
            let m = if j >= 1 { c[j - 1] * inv2t } else { 0.0 };
            *slot = d - m;
        }
        next
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0)
    }

    /// Evaluates `q_n(x)` by Horner's rule.
    #[inline]
    pub fn poly(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")))
    }
}

/// Heat kernel at a fixed time with its derivative polynomials cached.
#[derive(Debug, Clone)]
pub struct HeatKernel {
    t: f64,
    norm: f64,
    inv4t: f64,
    derivs: Vec<KernelDerivative>,
}

impl HeatKernel {
    pub fn new(t: f64) -> Result<Self> {
        check_time(t)?;
        let mut derivs = Vec::with_capacity(MAX_KERNEL_ORDER + 1);
        derivs.push(KernelDerivative { order: 0, coeffs: vec![1.0] });
        for n in 0..MAX_KERNEL_ORDER {
            let coeffs = KernelDerivative::step(&derivs[n].coeffs, t);
            derivs.push(KernelDerivative { order: n + 1, coeffs });
        }
        Ok(Self { t, norm: 1.0 / (4.0 * PI * t).sqrt(), inv4t: 0.25 / t, derivs })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Standard deviation of the kernel, `sqrt(2t)`.
    pub fn sigma(&self) -> f64 {
        (2.0 * self.t).sqrt()
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.norm * (-x * x * self.inv4t).exp()
    }

    /// `d^n phi_t / dx^n (x)`.
    #[inline]
    pub fn deriv(&self, x: f64, n: usize) -> f64 {
        match self.derivs.get(n) {
            Some(q) => q.poly(x) * self.value(x),
            None => {
                let q = KernelDerivative::new(n, self.t).expect("time checked at construction");
                q.poly(x) * self.value(x)
            }
        }
    }
}

/// `phi_t(x)` for a single evaluation.
pub fn heat_kernel(t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    Ok((-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt())
}

/// `d^n phi_t / dx^n (x)` via the polynomial recurrence.
pub fn heat_kernel_deriv(t: f64, x: f64, n: usize) -> Result<f64> {
    let q = KernelDerivative::new(n, t)?;
    Ok(q.poly(x) * heat_kernel(t, x)?)
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        2.0 * (x * x).exp() - erfcx(-x)
    } else if x < 25.0 {
        // Exact split of x^2 keeps the exponent free of rounding error.
        let hi = x * x;
        let lo = x.mul_add(x, -hi);
        hi.exp() * (1.0 + lo) * libm::erfc(x)
    } else {
        // Asymptotic series; terms shrink by (2n-1)/(2x^2) < 0.04.
        let inv2x2 = 0.5 / (x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 1..10 {
            term *= -((2 * n - 1) as f64) * inv2x2;
            sum += term;
        }
        sum / (x * PI.sqrt())
    }
}

/// Outer exponential transform of the heat kernel,
/// `F(b) = int_0^inf exp(-2 alpha s) phi_t(b + s) ds`.
///
/// Closed form `0.5 exp(-b^2/4t) erfcx((b + 4 alpha t) / (2 sqrt t))`.
/// Derivatives follow from `F' = 2 alpha F - phi_t`.
#[derive(Debug, Clone)]
pub struct RobinResolvent {
    kernel: HeatKernel,
    alpha: f64,
}

impl RobinResolvent {
    pub fn new(t: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("Robin parameter must be > 0, got {alpha}")));
        }
        Ok(Self { kernel: HeatKernel::new(t)?, alpha })
    }

    pub fn kernel(&self) -> &HeatKernel {
        &self.kernel
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn value(&self, b: f64) -> f64 {
        let t = self.kernel.t;
        let c = (b + 4.0 * self.alpha * t) / (2.0 * t.sqrt());
        0.5 * (-b * b * self.kernel.inv4t).exp() * erfcx(c)
    }

    /// `d^n F / db^n (b)`.
    pub fn deriv(&self, b: f64, n: usize) -> f64 {
        let two_a = 2.0 * self.alpha;
        let mut acc = self.value(b);
        for j in 0..n {
            acc = two_a * acc - self.kernel.deriv(b, j);
        }
        acc
    }
}

/// Tolerances and truncation rules for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Unbounded domains are cut at this many `width`s from their centre.
    pub truncation_sigmas: f64,
    /// Panels are never bisected more often than this.
    pub max_refinement_depth: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-11, rel_tol: 1e-10, truncation_sigmas: 12.0, max_refinement_depth: 40 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Config("quadrature tolerances must be positive".into()));
        }
        if !(self.truncation_sigmas >= 8.0) {
            return Err(Error::Config("truncation_sigmas must be at least 8".into()));
        }
        Ok(())
    }

    /// Same configuration with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { abs_tol: self.abs_tol * factor, rel_tol: self.rel_tol * factor, ..*self }
    }
}

/// Integration domain; unbounded variants are truncated per [`QuadratureConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval {
        lo: f64,
        hi: f64,
    },
    /// The whole line; mass concentrated within a few `width` of `center`.
    Line {
        center: f64,
        width: f64,
    },
    /// `[start, inf)`.
    UpperHalfLine {
        start: f64,
        center: f64,
        width: f64,
    },
    /// `(-inf, end]`.
    LowerHalfLine {
        end: f64,
        center: f64,
        width: f64,
    },
}

impl Domain {
    /// Finite bounds after truncation, or `None` when the domain is empty.
    pub fn bounds(&self, cfg: &QuadratureConfig) -> Option<(f64, f64)> {
        let s = cfg.truncation_sigmas;
        let (lo, hi) = match *self {
            Domain::Interval { lo, hi } => (lo, hi),
            Domain::Line { center, width } => (center - s * width, center + s * width),
            Domain::UpperHalfLine { start, center, width } => (start, center + s * width),
            Domain::LowerHalfLine { end, center, width } => (center - s * width, end),
        };
        (hi > lo).then_some((lo, hi))
    }
}

/// Integral estimate with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Integrates an infallible integrand over `domain`.
pub fn integrate<F>(f: F, domain: Domain, cfg: &QuadratureConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_detailed(f, domain, cfg).map(|q| q.value)
}

pub fn integrate_detailed<F>(f: F, domain: Domain, cfg: &QuadratureConfig) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    let Some((lo, hi)) = domain.bounds(cfg) else {
        return Ok(Quadrature { value: 0.0, error: 0.0, evaluations: 0 });
    };
    let breaks = match domain {
        Domain::Line { center, .. } | Domain::UpperHalfLine { center, .. } | Domain::LowerHalfLine { center, .. } => {
            vec![center]
        }
        Domain::Interval { .. } => vec![],
    };
    integrate_try(|x| Ok(f(x)), lo, hi, &breaks, cfg)
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const MAX_PANELS: usize = 8192;

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    /// Rounding floor below which bisection cannot help.
    floor: f64,
    depth: usize,
}

impl Panel {
    fn effective_error(&self) -> f64 {
        self.error.max(self.floor)
    }
}

fn gk21<F>(f: &mut F, lo: f64, hi: f64, depth: usize) -> Result<Panel>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center)?;
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let a = f(center - dx)?;
        let b = f(center + dx)?;
        fv1[j] = a;
        fv2[j] = b;
        res_k += WGK[j] * (a + b);
        res_abs += WGK[j] * (a.abs() + b.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (a + b);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (1.0f64).min((200.0 * error / res_asc).powf(1.5));
    }
    if !value.is_finite() {
        return Err(Error::AccuracyNotReached { estimate: value, error: f64::INFINITY });
    }
    Ok(Panel { lo, hi, value, error, floor: 50.0 * f64::EPSILON * res_abs, depth })
}

/// Adaptive integration of a fallible integrand over `[lo, hi]`.
///
/// `breaks` inside the interval become initial panel boundaries. Panels are
/// bisected largest-error-first until the summed error is below
/// `max(abs_tol, rel_tol * |total|)` or every remaining panel is at its
/// rounding floor.
pub fn integrate_try<F>(mut f: F, lo: f64, hi: f64, breaks: &[f64], cfg: &QuadratureConfig) -> Result<Quadrature>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(hi > lo) {
        return Ok(Quadrature { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let mut cuts: Vec<f64> = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|b| *b > lo && *b < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(hi);

    let mut evaluations = 0usize;
    let mut panels: Vec<Panel> = Vec::new();
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        for (a, b) in [(w[0], mid), (mid, w[1])] {
            if b > a {
                panels.push(gk21(&mut f, a, b, 1)?);
                evaluations += 21;
            }
        }
    }

    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(Panel::effective_error).sum();
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if error <= target {
            return Ok(Quadrature { value: total, error, evaluations });
        }
        let candidate = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.error > p.floor && p.depth < cfg.max_refinement_depth)
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i);
        let Some(idx) = candidate else {
            // Only rounding-limited or depth-exhausted panels remain.
            let stuck = panels.iter().any(|p| p.error > p.floor && p.depth >= cfg.max_refinement_depth);
            if stuck {
                return Err(Error::AccuracyNotReached { estimate: total, error });
            }
            return Ok(Quadrature { value: total, error, evaluations });
        };
        if panels.len() >= MAX_PANELS {
            return Err(Error::AccuracyNotReached { estimate: total, error });
        }
        let p = panels.swap_remove(idx);
        let mid = 0.5 * (p.lo + p.hi);
        panels.push(gk21(&mut f, p.lo, mid, p.depth + 1)?);
        panels.push(gk21(&mut f, mid, p.hi, p.depth + 1)?);
        evaluations += 42;
    }
}
