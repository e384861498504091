// SPDX-License-Identifier: Apache-2.0

//! Two-branch test functions, their weighted sup-seminorms and the
//! regime-dependent boundary-condition classes.
//!
//! A [`TestFunction`] is smooth on each half-line and may jump at the
//! origin; its value at `0` is the right limit. Closed-form members are
//! finite sums of `p(x) exp(-rate (x - center)^2)` per branch, which are
//! closed under differentiation. Semigroup images, derivatives and linear
//! combinations are represented lazily and evaluated on demand.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::{integrate_try, QuadratureConfig};
use crate::semigroups;

/// Default analytic derivative cap for closed-form families.
pub const DEFAULT_K_MAX: usize = 8;

/// Which one-sided limit to take at the origin. Ignored for `x != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn of(x: f64, at_zero: Side) -> Side {
        if x > 0.0 {
            Side::Right
        } else if x < 0.0 {
            Side::Left
        } else {
            at_zero
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    /// `beta < 1`: whole-line heat semigroup, Schwartz class.
    Line,
    /// `beta = 1`: Robin coupling across the origin with parameter `alpha`.
    Robin,
    /// `beta > 1` including `beta = inf`: reflecting origin.
    Neumann,
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeKind::Line => "line",
            RegimeKind::Robin => "robin",
            RegimeKind::Neumann => "neumann",
        })
    }
}

/// Slow-bond exponent and the coupling parameter it pairs with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegimeRecord", into = "RegimeRecord")]
pub struct BetaRegime {
    kind: RegimeKind,
    beta: f64,
    alpha: f64,
}

impl BetaRegime {
    pub fn new(beta: f64, alpha: f64) -> Result<Self> {
        if beta.is_nan() || beta < 0.0 {
            return Err(Error::Config(format!("beta must be >= 0 or inf, got {beta}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be a positive number, got {alpha}")));
        }
        let kind = if beta < 1.0 {
            RegimeKind::Line
        } else if beta == 1.0 {
            RegimeKind::Robin
        } else {
            RegimeKind::Neumann
        };
        Ok(Self { kind, beta, alpha })
    }

    pub fn line() -> Self {
        Self { kind: RegimeKind::Line, beta: 0.0, alpha: 1.0 }
    }

    pub fn robin(alpha: f64) -> Result<Self> {
        Self::new(1.0, alpha)
    }

    pub fn neumann() -> Self {
        Self { kind: RegimeKind::Neumann, beta: f64::INFINITY, alpha: 1.0 }
    }

    pub fn kind(&self) -> RegimeKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// True when both regimes generate the same semigroup.
    pub fn same_semigroup(&self, other: &BetaRegime) -> bool {
        self.kind == other.kind && (self.kind != RegimeKind::Robin || self.alpha == other.alpha)
    }
}

impl fmt::Display for BetaRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RegimeKind::Robin => write!(f, "robin(alpha={})", self.alpha),
            kind => write!(f, "{kind}(beta={})", self.beta),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegimeRecord {
    #[serde(with = "beta_repr")]
    beta: f64,
    #[serde(default = "unit")]
    alpha: f64,
}

fn unit() -> f64 {
    1.0
}

/// Serde form of `beta`: a number, or `"inf"` for the frozen slow bond.
pub mod beta_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Word(String),
    }

    pub fn serialize<S: Serializer>(beta: &f64, s: S) -> Result<S::Ok, S::Error> {
        if beta.is_finite() {
            s.serialize_f64(*beta)
        } else {
            s.serialize_str("inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(b) => Ok(b),
            Repr::Word(w) if matches!(w.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
            Repr::Word(w) => Err(serde::de::Error::custom(format!("bad beta value {w:?}"))),
        }
    }
}

impl TryFrom<RegimeRecord> for BetaRegime {
    type Error = Error;

    fn try_from(r: RegimeRecord) -> Result<Self> {
        BetaRegime::new(r.beta, r.alpha)
    }
}

impl From<BetaRegime> for RegimeRecord {
    fn from(r: BetaRegime) -> Self {
        RegimeRecord { beta: r.beta, alpha: r.alpha }
    }
}

/// `(k, l)` in `sup_u |w_l(u) d^k H(u)|` with `w_0 = 1` and `w_l = 1 + |u|^l` for `l >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeminormIndex {
    pub k: usize,
    pub l: usize,
}

impl SeminormIndex {
    pub fn new(k: usize, l: usize) -> Self {
        Self { k, l }
    }
}

/// One summand `p(x) exp(-rate (x - center)^2)`; `coeffs` in increasing powers of `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussTerm {
    pub coeffs: Vec<f64>,
    #[serde(default = "unit")]
    pub rate: f64,
    #[serde(default)]
    pub center: f64,
}

/// `q(r) exp(-rate r)` composed with `r = x^2`; even in `x` on its branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvenProfile {
    pub coeffs: Vec<f64>,
    #[serde(default = "unit")]
    pub rate: f64,
}

impl EvenProfile {
    fn to_term(&self) -> GaussTerm {
        let mut coeffs = vec![0.0; 2 * self.coeffs.len().max(1) - 1];
        for (j, c) in self.coeffs.iter().enumerate() {
            coeffs[2 * j] = *c;
        }
        GaussTerm { coeffs, rate: self.rate, center: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weighted {
    pub weight: f64,
    pub function: Family,
}

/// Serializable descriptor of how a test function was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Zero,
    /// `p(x) exp(-x^2)`.
    HermiteGaussian {
        coeffs: Vec<f64>,
    },
    /// The heat kernel `phi_s`.
    HeatKernel {
        s: f64,
    },
    /// Sum of Gaussian terms, identical on both branches.
    Gaussian {
        terms: Vec<GaussTerm>,
    },
    /// `f_left(x^2)` on `x < 0` and `f_right(x^2)` on `x >= 0`.
    Neumann {
        left: EvenProfile,
        right: EvenProfile,
    },
    /// Arbitrary Gaussian sums per branch.
    Branchwise {
        left: Vec<GaussTerm>,
        right: Vec<GaussTerm>,
    },
    /// Robin-smoothed seed `T_s^alpha G`.
    Robin {
        alpha: f64,
        s: f64,
        seed: Box<Family>,
    },
    Evolved {
        regime: BetaRegime,
        t: f64,
        base: Box<Family>,
    },
    Derivative {
        order: usize,
        base: Box<Family>,
    },
    Combination {
        terms: Vec<Weighted>,
    },
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Zero => "zero",
            Family::HermiteGaussian { .. } => "hermite_gaussian",
            Family::HeatKernel { .. } => "heat_kernel",
            Family::Gaussian { .. } => "gaussian",
            Family::Neumann { .. } => "neumann",
            Family::Branchwise { .. } => "branchwise",
            Family::Robin { .. } => "robin",
            Family::Evolved { .. } => "evolved",
            Family::Derivative { .. } => "derivative",
            Family::Combination { .. } => "combination",
        }
    }
}

#[derive(Debug, Clone)]
struct CompiledTerm {
    /// `polys[k]` multiplies the Gaussian factor in the k-th derivative.
    polys: Vec<Vec<f64>>,
    rate: f64,
    center: f64,
}

impl CompiledTerm {
    fn new(term: &GaussTerm, k_max: usize) -> Result<Self> {
        if !(term.rate >= 0.0 && term.rate.is_finite() && term.center.is_finite()) {
            return Err(Error::Construction(format!("invalid Gaussian term {term:?}")));
        }
        if term.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Construction("non-finite polynomial coefficient".into()));
        }
        let mut polys = vec![if term.coeffs.is_empty() { vec![0.0] } else { term.coeffs.clone() }];
        for k in 0..k_max {
            let p = &polys[k];
            // d/dx [p e^{-r(x-c)^2}] = (p' + (2rc - 2rx) p) e^{...}
            let mut next = vec![0.0; p.len() + 1];
            for j in 1..p.len() {
                next[j - 1] += j as f64 * p[j];
            }
            for (j, c) in p.iter().enumerate() {
                next[j] += 2.0 * term.rate * term.center * c;
                next[j + 1] -= 2.0 * term.rate * c;
            }
            polys.push(next);
        }
        Ok(Self { polys, rate: term.rate, center: term.center })
    }

    #[inline]
    fn eval(&self, x: f64, k: usize) -> f64 {
        let p = &self.polys[k];
        let poly = p.iter().rev().fold(0.0, |acc, c| acc * x + c);
        if poly == 0.0 {
            return 0.0;
        }
        let d = x - self.center;
        poly * (-self.rate * d * d).exp()
    }

    /// Radius beyond which every stored derivative is below ~1e-17 of its
    /// coefficient scale.
    fn radius(&self) -> f64 {
        let nonzero = self.polys.iter().any(|p| p.iter().any(|c| *c != 0.0));
        if !nonzero {
            return 0.0;
        }
        if self.rate == 0.0 {
            return f64::INFINITY;
        }
        let c = self.center.abs();
        let mut d = (40.0 / self.rate).sqrt();
        loop {
            let r = c + d;
            let bound = self
                .polys
                .iter()
                .map(|p| p.iter().enumerate().map(|(j, a)| a.abs() * r.powi(j as i32)).sum::<f64>())
                .fold(0.0, f64::max);
            if self.rate * d * d >= 40.0 + (1.0 + bound).ln() {
                return r;
            }
            d *= 1.1;
        }
    }
}

#[derive(Debug, Clone)]
struct CompiledBranch {
    terms: Vec<CompiledTerm>,
}

impl CompiledBranch {
    fn new(terms: &[GaussTerm], k_max: usize) -> Result<Self> {
        Ok(Self { terms: terms.iter().map(|t| CompiledTerm::new(t, k_max)).collect::<Result<_>>()? })
    }

    fn eval(&self, x: f64, k: usize) -> f64 {
        self.terms.iter().map(|t| t.eval(x, k)).sum()
    }

    fn radius(&self) -> f64 {
        self.terms.iter().map(CompiledTerm::radius).fold(0.0, f64::max)
    }
}

#[derive(Debug)]
enum Node {
    Zero,
    Branches { left: CompiledBranch, right: CompiledBranch },
    Evolved { prop: semigroups::Propagator, seed: TestFunction, quad: QuadratureConfig },
    Derivative { base: TestFunction, order: usize },
    Combination(Vec<(f64, TestFunction)>),
}

/// Candidate element of a test-function space. Cheap to clone; immutable.
#[derive(Debug, Clone)]
pub struct TestFunction {
    node: Arc<Node>,
    family: Arc<Family>,
    k_max: usize,
    radius: f64,
}

impl TestFunction {
    fn from_node(node: Node, family: Family, k_max: usize, radius: f64) -> Self {
        Self { node: Arc::new(node), family: Arc::new(family), k_max, radius }
    }

    pub fn zero() -> Self {
        Self::from_node(Node::Zero, Family::Zero, usize::MAX / 2, 0.0)
    }

    /// `exp(-x^2)`.
    pub fn gaussian() -> Self {
        Self::hermite_gaussian(&[1.0]).expect("valid coefficients")
    }

    /// `p(x) exp(-x^2)` with `p` given by increasing-power coefficients.
    pub fn hermite_gaussian(coeffs: &[f64]) -> Result<Self> {
        Self::from_family(&Family::HermiteGaussian { coeffs: coeffs.to_vec() })
    }

    pub fn heat_kernel(s: f64) -> Result<Self> {
        Self::from_family(&Family::HeatKernel { s })
    }

    pub fn branchwise(left: Vec<GaussTerm>, right: Vec<GaussTerm>) -> Result<Self> {
        Self::from_family(&Family::Branchwise { left, right })
    }

    pub fn neumann_even(left: EvenProfile, right: EvenProfile) -> Result<Self> {
        Self::from_family(&Family::Neumann { left, right })
    }

    /// `T_s^alpha seed`, which lies in the Robin class for any integrable seed.
    pub fn robin_smoothed(alpha: f64, s: f64, seed: &TestFunction) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::Construction(format!("Robin smoothing time must be > 0, got {s}")));
        }
        let regime = BetaRegime::robin(alpha).map_err(|e| Error::Construction(e.to_string()))?;
        let evolved = seed.evolve(&regime, s)?;
        Ok(Self { family: Arc::new(Family::Robin { alpha, s, seed: Box::new(seed.family().clone()) }), ..evolved })
    }

    pub fn from_family(family: &Family) -> Result<Self> {
        Self::from_family_with_order(family, DEFAULT_K_MAX)
    }

    /// Builds a function from its descriptor; `k_max` applies to closed-form branches.
    pub fn from_family_with_order(family: &Family, k_max: usize) -> Result<Self> {
        let closed = |left: &[GaussTerm], right: &[GaussTerm]| -> Result<Self> {
            let left = CompiledBranch::new(left, k_max)?;
            let right = CompiledBranch::new(right, k_max)?;
            let radius = left.radius().max(right.radius());
            Ok(Self::from_node(Node::Branches { left, right }, family.clone(), k_max, radius))
        };
        match family {
            Family::Zero => Ok(Self::zero()),
            Family::HermiteGaussian { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::Construction("Hermite-Gaussian needs coefficients".into()));
                }
                let term = GaussTerm { coeffs: coeffs.clone(), rate: 1.0, center: 0.0 };
                closed(std::slice::from_ref(&term), std::slice::from_ref(&term))
            }
            Family::HeatKernel { s } => {
                if !(*s > 0.0 && s.is_finite()) {
                    return Err(Error::Construction(format!("heat kernel time must be > 0, got {s}")));
                }
                let term = GaussTerm {
                    coeffs: vec![1.0 / (4.0 * std::f64::consts::PI * s).sqrt()],
                    rate: 0.25 / s,
                    center: 0.0,
                };
                closed(std::slice::from_ref(&term), std::slice::from_ref(&term))
            }
            Family::Gaussian { terms } => closed(terms, terms),
            Family::Neumann { left, right } => {
                for p in [left, right] {
                    if !(p.rate > 0.0) {
                        return Err(Error::Construction("Neumann profile needs rate > 0".into()));
                    }
                }
                closed(&[left.to_term()], &[right.to_term()])
            }
            Family::Branchwise { left, right } => closed(left, right),
            Family::Robin { alpha, s, seed } => {
                let seed = Self::from_family_with_order(seed, k_max)?;
                Self::robin_smoothed(*alpha, *s, &seed)
            }
            Family::Evolved { regime, t, base } => Self::from_family_with_order(base, k_max)?.evolve(regime, *t),
            Family::Derivative { order, base } => Self::from_family_with_order(base, k_max)?.derivative(*order),
            Family::Combination { terms } => {
                let parts = terms
                    .iter()
                    .map(|w| Ok((w.weight, Self::from_family_with_order(&w.function, k_max)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::combination(parts))
            }
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Radius outside which the function and its derivatives are negligible
    /// (infinite when nothing decays).
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Smallest length scale on which the function varies, used to place
    /// quadrature panels.
    pub(crate) fn feature_width(&self) -> f64 {
        match &*self.node {
            Node::Zero => f64::INFINITY,
            Node::Branches { left, right } => left
                .terms
                .iter()
                .chain(&right.terms)
                .filter(|t| t.rate > 0.0)
                .map(|t| (0.5 / t.rate).sqrt())
                .fold(f64::INFINITY, f64::min)
                .min(1.0),
            Node::Evolved { prop, seed, .. } => {
                let w = seed.feature_width().min(1.0);
                (w * w + 2.0 * prop.time()).sqrt()
            }
            Node::Derivative { base, .. } => base.feature_width(),
            Node::Combination(parts) => parts.iter().map(|(_, f)| f.feature_width()).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self.node, Node::Zero)
    }

    /// `d^k H(x)`, right limit at the origin.
    pub fn eval(&self, x: f64, k: usize) -> Result<f64> {
        self.eval_sided(x, k, Side::Right)
    }

    /// `d^k H(x)`; `side` selects `0-` or `0+` when `x == 0`.
    pub fn eval_sided(&self, x: f64, k: usize, side: Side) -> Result<f64> {
        if k > self.k_max {
            return Err(Error::OrderUnsupported { requested: k, max: self.k_max });
        }
        self.eval_raw(x, k, Side::of(x, side))
    }

    /// Derivatives at many points, evaluated in parallel.
    pub fn eval_many(&self, xs: &[f64], k: usize) -> Result<Vec<f64>> {
        xs.par_iter().map(|&x| self.eval(x, k)).collect()
    }

    pub(crate) fn eval_raw(&self, x: f64, k: usize, side: Side) -> Result<f64> {
        match &*self.node {
            Node::Zero => Ok(0.0),
            Node::Branches { left, right } => Ok(match side {
                Side::Left => left.eval(x, k),
                Side::Right => right.eval(x, k),
            }),
            Node::Evolved { prop, seed, quad } => semigroups::evaluate(prop, seed, x, side, k, quad),
            Node::Derivative { base, order } => base.eval_raw(x, k + order, side),
            Node::Combination(parts) => {
                let mut acc = 0.0;
                for (w, f) in parts {
                    acc += w * f.eval_raw(x, k, side)?;
                }
                Ok(acc)
            }
        }
    }

    /// The branchwise derivative of order `order`, with the `0+` convention.
    pub fn derivative(&self, order: usize) -> Result<Self> {
        if order == 0 {
            return Ok(self.clone());
        }
        if order > self.k_max {
            return Err(Error::OrderUnsupported { requested: order, max: self.k_max });
        }
        if self.is_zero() {
            return Ok(Self::zero());
        }
        let family = Family::Derivative { order, base: Box::new(self.family().clone()) };
        Ok(Self::from_node(Node::Derivative { base: self.clone(), order }, family, self.k_max - order, self.radius))
    }

    /// `sum_i w_i f_i`.
    pub fn combination(parts: Vec<(f64, TestFunction)>) -> Self {
        let parts: Vec<_> = parts.into_iter().filter(|(w, f)| *w != 0.0 && !f.is_zero()).collect();
        if parts.is_empty() {
            return Self::zero();
        }
        let k_max = parts.iter().map(|(_, f)| f.k_max).min().unwrap_or(0);
        let radius = parts.iter().map(|(_, f)| f.radius).fold(0.0, f64::max);
        let family = Family::Combination {
            terms: parts.iter().map(|(w, f)| Weighted { weight: *w, function: f.family().clone() }).collect(),
        };
        Self::from_node(Node::Combination(parts), family, k_max, radius)
    }

    /// `self - other`.
    pub fn sub(&self, other: &TestFunction) -> Self {
        Self::combination(vec![(1.0, self.clone()), (-1.0, other.clone())])
    }

    /// `self * w`.
    pub fn scale(&self, w: f64) -> Self {
        Self::combination(vec![(w, self.clone())])
    }

    /// `T_t^beta self`. Nested evolutions under the same semigroup collapse
    /// into one by the semigroup law.
    pub fn evolve(&self, regime: &BetaRegime, t: f64) -> Result<Self> {
        self.evolve_with(regime, t, &QuadratureConfig::default(), true)
    }

    /// `T_t^beta self` without collapsing nested evolutions.
    pub fn evolve_uncollapsed(&self, regime: &BetaRegime, t: f64) -> Result<Self> {
        self.evolve_with(regime, t, &QuadratureConfig::default(), false)
    }

    pub fn evolve_with(&self, regime: &BetaRegime, t: f64, quad: &QuadratureConfig, collapse: bool) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("evolution time must be >= 0, got {t}")));
        }
        quad.validate()?;
        if t == 0.0 || self.is_zero() {
            return Ok(self.clone());
        }
        let family = Family::Evolved { regime: *regime, t, base: Box::new(self.family().clone()) };
        let (seed, total) = match &*self.node {
            Node::Evolved { prop, seed, .. } if collapse && prop.regime().same_semigroup(regime) => {
                (seed.clone(), prop.time() + t)
            }
            _ => (self.clone(), t),
        };
        let radius = seed.radius + quad.truncation_sigmas * (2.0 * total).sqrt();
        let prop = semigroups::Propagator::new(regime, total)?;
        Ok(Self::from_node(Node::Evolved { prop, seed, quad: *quad }, family, DEFAULT_K_MAX, radius))
    }
}

/// `d^k H / du^k (x)`; right limit at `x = 0`.
pub fn eval(h: &TestFunction, x: f64, k: usize) -> Result<f64> {
    h.eval(x, k)
}

/// Sampling rule for the seminorm supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeminormGrid {
    /// Smallest `|u|` on the geometric grid.
    pub min_abs: f64,
    /// Ratio between consecutive grid radii.
    pub ratio: f64,
    /// The grid stops once the weighted value is below `decay * running max`.
    pub decay: f64,
    /// Radius at which a still-growing supremum is declared divergent.
    pub max_radius: f64,
    /// Local maxima refined by golden-section search.
    pub refine_top: usize,
    pub refine_iters: usize,
}

impl Default for SeminormGrid {
    fn default() -> Self {
        Self { min_abs: 1e-6, ratio: 1.02, decay: 1e-12, max_radius: 1e4, refine_top: 3, refine_iters: 50 }
    }
}

impl SeminormGrid {
    /// A sparser grid for expensive (quadrature-backed) functions.
    pub fn coarse() -> Self {
        Self { ratio: 1.04, refine_iters: 40, ..Self::default() }
    }

    fn radii(&self, from: f64, to: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut u = from;
        while u <= to {
            out.push(u);
            u *= self.ratio;
        }
        out
    }
}

/// `||H||_{k,l}` with the default grid.
pub fn seminorm(h: &TestFunction, idx: SeminormIndex) -> Result<f64> {
    seminorm_with(h, idx, &SeminormGrid::default())
}

pub fn seminorm_with(h: &TestFunction, idx: SeminormIndex, grid: &SeminormGrid) -> Result<f64> {
    Ok(seminorms(h, &[idx], grid)?[0])
}

/// Several seminorms sharing derivative evaluations.
pub fn seminorms(h: &TestFunction, indices: &[SeminormIndex], grid: &SeminormGrid) -> Result<Vec<f64>> {
    for idx in indices {
        if idx.k > h.k_max() {
            return Err(Error::OrderUnsupported { requested: idx.k, max: h.k_max() });
        }
    }
    if h.is_zero() {
        return Ok(vec![0.0; indices.len()]);
    }
    let mut orders: Vec<usize> = indices.iter().map(|i| i.k).collect();
    orders.sort_unstable();
    orders.dedup();

    let weight = |u: f64, l: usize| if l == 0 { 1.0 } else { 1.0 + u.abs().powi(l as i32) };
    let start_radius = if h.radius().is_finite() { h.radius().max(1.0) } else { 16.0 };

    // radii[i] > 0; values[order][side][i]
    let mut radii = grid.radii(grid.min_abs, start_radius);
    let eval_at = |rs: &[f64], k: usize| -> Result<[Vec<f64>; 2]> {
        let right: Vec<f64> = rs.par_iter().map(|&u| h.eval(u, k)).collect::<Result<_>>()?;
        let left: Vec<f64> = rs.par_iter().map(|&u| h.eval(-u, k)).collect::<Result<_>>()?;
        Ok([left, right])
    };
    let mut values: Vec<[Vec<f64>; 2]> = orders.iter().map(|&k| eval_at(&radii, k)).collect::<Result<_>>()?;
    let origin: Vec<[f64; 2]> = orders
        .iter()
        .map(|&k| Ok([h.eval_sided(0.0, k, Side::Left)?, h.eval_sided(0.0, k, Side::Right)?]))
        .collect::<Result<_>>()?;

    let order_pos = |k: usize| orders.iter().position(|&o| o == k).expect("order present");
    let running_max = |vals: &[f64; 2], side_vals: &[Vec<f64>; 2], rs: &[f64], l: usize| -> f64 {
        let mut m = vals[0].abs().max(vals[1].abs());
        for s in side_vals {
            for (v, u) in s.iter().zip(rs) {
                m = m.max((weight(*u, l) * v).abs());
            }
        }
        m
    };
    let tail_small = |side_vals: &[Vec<f64>; 2], rs: &[f64], l: usize, max: f64| -> bool {
        let n = rs.len();
        let tail = (n / 20).max(3).min(n);
        side_vals.iter().all(|s| {
            s[n - tail..].iter().zip(&rs[n - tail..]).all(|(v, u)| (weight(*u, l) * v).abs() <= grid.decay * max)
        })
    };

    // Extend the grid until every requested weighted derivative has decayed.
    loop {
        let mut all_small = true;
        let mut growing: Option<SeminormIndex> = None;
        for idx in indices {
            let p = order_pos(idx.k);
            let m = running_max(&origin[p], &values[p], &radii, idx.l);
            if !tail_small(&values[p], &radii, idx.l, m) {
                all_small = false;
                // Growth test: compare the max over the outer half with the inner half.
                let half = radii.len() / 2;
                let inner = values[p]
                    .iter()
                    .flat_map(|s| s[..half].iter().zip(&radii[..half]))
                    .map(|(v, u)| (weight(*u, idx.l) * v).abs())
                    .fold(0.0, f64::max);
                let outer = values[p]
                    .iter()
                    .flat_map(|s| s[half..].iter().zip(&radii[half..]))
                    .map(|(v, u)| (weight(*u, idx.l) * v).abs())
                    .fold(0.0, f64::max);
                if outer > inner * (1.0 + 1e-9) {
                    growing = Some(*idx);
                }
            }
        }
        if all_small {
            break;
        }
        let last = *radii.last().expect("grid is non-empty");
        if last >= grid.max_radius {
            if let Some(idx) = growing {
                return Err(Error::DivergentSeminorm { k: idx.k, l: idx.l, radius: last });
            }
            break;
        }
        let extra = grid.radii(last * grid.ratio, (last * 2.0).min(grid.max_radius * grid.ratio));
        if extra.is_empty() {
            break;
        }
        for (p, &k) in orders.iter().enumerate() {
            let more = eval_at(&extra, k)?;
            for s in 0..2 {
                values[p][s].extend_from_slice(&more[s]);
            }
        }
        radii.extend(extra);
    }

    let mut out = Vec::with_capacity(indices.len());
    for idx in indices {
        let p = order_pos(idx.k);
        let mut best = origin[p][0].abs().max(origin[p][1].abs());
        // Collect local maxima of the weighted profile on each side.
        let mut peaks: Vec<(f64, usize, usize)> = Vec::new();
        for (s, vals) in values[p].iter().enumerate() {
            let w: Vec<f64> = vals.iter().zip(&radii).map(|(v, u)| (weight(*u, idx.l) * v).abs()).collect();
            for i in 0..w.len() {
                best = best.max(w[i]);
                let left_ok = i == 0 || w[i] >= w[i - 1];
                let right_ok = i + 1 == w.len() || w[i] >= w[i + 1];
                if left_ok && right_ok && w[i] > 0.0 {
                    peaks.push((w[i], s, i));
                }
            }
        }
        peaks.sort_by(|a, b| b.0.total_cmp(&a.0));
        for &(_, s, i) in peaks.iter().take(grid.refine_top) {
            let lo = if i == 0 { radii[0] * 0.5 } else { radii[i - 1] };
            let hi = if i + 1 == radii.len() { radii[i] * grid.ratio } else { radii[i + 1] };
            let sign = if s == 0 { -1.0 } else { 1.0 };
            let f = |u: f64| -> Result<f64> { Ok((weight(u, idx.l) * h.eval(sign * u, idx.k)?).abs()) };
            best = best.max(golden_max(f, lo, hi, grid.refine_iters)?);
        }
        out.push(best);
    }
    Ok(out)
}

fn golden_max<F>(f: F, mut a: f64, mut b: f64, iters: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let mut best = fc.max(fd);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
        best = best.max(fc).max(fd);
    }
    Ok(best)
}

/// Truncated Frechet metric with a bound on the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    /// `2 * 2^-trunc * max_{k,l <= trunc} ||H - G||_{k,l}`.
    pub tail_bound: f64,
}

/// Default truncation of the metric series.
pub const DEFAULT_METRIC_TRUNC: usize = 6;

/// `sum_{k,l=1}^{trunc} 2^-(k+l) ||H - G||_{k,l}`.
pub fn metric(h: &TestFunction, g: &TestFunction, trunc: usize) -> Result<MetricValue> {
    metric_with(h, g, trunc, &SeminormGrid::default())
}

pub fn metric_with(h: &TestFunction, g: &TestFunction, trunc: usize, grid: &SeminormGrid) -> Result<MetricValue> {
    for f in [h, g] {
        if f.k_max() < trunc {
            return Err(Error::OrderUnsupported { requested: trunc, max: f.k_max() });
        }
    }
    let diff = h.sub(g);
    let indices: Vec<SeminormIndex> =
        (1..=trunc).flat_map(|k| (1..=trunc).map(move |l| SeminormIndex::new(k, l))).collect();
    let norms = seminorms(&diff, &indices, grid)?;
    let value = indices.iter().zip(&norms).map(|(i, n)| n * 0.5f64.powi((i.k + i.l) as i32)).sum();
    let max = norms.iter().copied().fold(0.0, f64::max);
    Ok(MetricValue { value, tail_bound: 2.0 * 0.5f64.powi(trunc as i32) * max })
}

/// `||H||_{2,beta}`: the L2 norm plus the Robin atom `alpha^-2 H(0+)^2`.
pub fn l2beta_norm(h: &TestFunction, regime: &BetaRegime) -> Result<f64> {
    Ok(l2beta_norm_sq(h, regime, &QuadratureConfig::default())?.sqrt())
}

pub(crate) fn l2beta_norm_sq(h: &TestFunction, regime: &BetaRegime, quad: &QuadratureConfig) -> Result<f64> {
    if h.is_zero() {
        return Ok(0.0);
    }
    let r = h.radius();
    if !r.is_finite() {
        return Err(Error::DivergentNorm("function does not decay".into()));
    }
    let square = |x: f64| -> Result<f64> {
        let v = h.eval(x, 0)?;
        Ok(v * v)
    };
    let left = integrate_try(square, -r, 0.0, &[], quad).map_err(diverge)?;
    let right = integrate_try(square, 0.0, r, &[], quad).map_err(diverge)?;
    let mut total = left.value + right.value;
    if regime.kind() == RegimeKind::Robin {
        let h0 = h.eval(0.0, 0)?;
        total += h0 * h0 / (regime.alpha() * regime.alpha());
    }
    Ok(total)
}

fn diverge(e: Error) -> Error {
    match e {
        Error::AccuracyNotReached { estimate, .. } => {
            Error::DivergentNorm(format!("quadrature failed near estimate {estimate:e}"))
        }
        other => other,
    }
}

/// `nabla_beta H`: the branchwise derivative, `H'(0+)` at the origin.
pub fn grad_beta(h: &TestFunction) -> Result<TestFunction> {
    if h.k_max() < 1 {
        return Err(Error::OrderUnsupported { requested: 1, max: h.k_max() });
    }
    h.derivative(1)
}

/// `Delta_beta H`: the branchwise second derivative, `H''(0+)` at the origin.
pub fn laplace_beta(h: &TestFunction) -> Result<TestFunction> {
    if h.k_max() < 2 {
        return Err(Error::OrderUnsupported { requested: 2, max: h.k_max() });
    }
    h.derivative(2)
}

/// One boundary-condition check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipEntry {
    pub regime: RegimeKind,
    /// `k` in the conditions on derivatives of order `2k` and `2k+1`.
    pub order: usize,
    pub residual: f64,
    pub scale: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub regime: BetaRegime,
    pub tol: f64,
    pub entries: Vec<MembershipEntry>,
}

impl MembershipReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn max_relative_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual / e.scale).fold(0.0, f64::max)
    }
}

/// Checks the regime's boundary conditions at the origin for orders `k <= max_k`.
///
/// Neumann: `d^{2k+1}H(0+-) = 0`. Robin: `d^{2k+1}H(0+) = d^{2k+1}H(0-) =
/// alpha (d^{2k}H(0+) - d^{2k}H(0-))`. Line: every derivative is continuous
/// across the origin and `||H||_{j,0}`, `||H||_{j,6}` are finite. Residuals
/// are compared against `tol * max(1, ||H||_{2k+1,0})`.
pub fn validate_membership(h: &TestFunction, regime: &BetaRegime, max_k: usize, tol: f64) -> Result<MembershipReport> {
    validate_membership_with(h, regime, max_k, tol, &SeminormGrid::default())
}

pub fn validate_membership_with(
    h: &TestFunction,
    regime: &BetaRegime,
    max_k: usize,
    tol: f64,
    grid: &SeminormGrid,
) -> Result<MembershipReport> {
    let top = 2 * max_k + 1;
    if top > h.k_max() {
        return Err(Error::OrderUnsupported { requested: top, max: h.k_max() });
    }
    let at = |k: usize, side: Side| h.eval_sided(0.0, k, side);
    let mut entries = Vec::new();
    for k in 0..=max_k {
        let odd = 2 * k + 1;
        let scale_of = |order: usize| -> Result<Option<f64>> {
            match seminorm_with(h, SeminormIndex::new(order, 0), grid) {
                Ok(s) => Ok(Some(s.max(1.0))),
                Err(Error::DivergentSeminorm { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        };
        match regime.kind() {
            RegimeKind::Neumann | RegimeKind::Robin => {
                let Some(scale) = scale_of(odd)? else {
                    entries.push(MembershipEntry {
                        regime: regime.kind(),
                        order: k,
                        residual: f64::INFINITY,
                        scale: 1.0,
                        pass: false,
                    });
                    continue;
                };
                let (op, om) = (at(odd, Side::Right)?, at(odd, Side::Left)?);
                let residual = if regime.kind() == RegimeKind::Neumann {
                    op.abs().max(om.abs())
                } else {
                    let jump = at(2 * k, Side::Right)? - at(2 * k, Side::Left)?;
                    let coupled = regime.alpha() * jump;
                    (op - om).abs().max((op - coupled).abs())
                };
                entries.push(MembershipEntry {
                    regime: regime.kind(),
                    order: k,
                    residual,
                    scale,
                    pass: residual <= tol * scale,
                });
            }
            RegimeKind::Line => {
                let mut residual: f64 = 0.0;
                let mut scale: f64 = 1.0;
                let mut finite = true;
                for order in [2 * k, odd] {
                    let idx = [SeminormIndex::new(order, 0), SeminormIndex::new(order, 6)];
                    match seminorms(h, &idx, grid) {
                        Ok(s) => {
                            if order == odd {
                                scale = s[0].max(1.0);
                            }
                            finite &= s.iter().all(|v| v.is_finite());
                        }
                        Err(Error::DivergentSeminorm { .. }) => finite = false,
                        Err(e) => return Err(e),
                    }
                    residual = residual.max((at(order, Side::Right)? - at(order, Side::Left)?).abs());
                }
                if !finite {
                    residual = f64::INFINITY;
                }
                entries.push(MembershipEntry {
                    regime: regime.kind(),
                    order: k,
                    residual,
                    scale,
                    pass: finite && residual <= tol * scale,
                });
            }
        }
    }
    Ok(MembershipReport { regime: *regime, tol, entries })
}

/// Builds a member of the regime's test-function battery from its descriptor.
///
/// Line accepts Hermite-Gaussians, heat kernels and smooth Gaussian sums;
/// Neumann accepts branchwise even profiles `f(x^2)`; Robin accepts
/// Robin-smoothed seeds whose `alpha` matches the regime.
pub fn builtin_family(regime: &BetaRegime, family: &Family) -> Result<TestFunction> {
    let ok = match (regime.kind(), family) {
        (_, Family::Zero) => true,
        (RegimeKind::Line, Family::HermiteGaussian { .. } | Family::HeatKernel { .. }) => true,
        (RegimeKind::Line, Family::Gaussian { terms }) => terms.iter().all(|t| t.rate > 0.0),
        (RegimeKind::Neumann, Family::Neumann { .. }) => true,
        (RegimeKind::Robin, Family::Robin { alpha, .. }) => (alpha - regime.alpha()).abs() <= 1e-12 * regime.alpha(),
        _ => false,
    };
    if !ok {
        return Err(Error::Construction(format!("family `{}` is not a built-in member for {regime}", family.tag())));
    }
    TestFunction::from_family(family)
}

/// Named members of the regime's reference battery.
pub fn battery(regime: &BetaRegime) -> Result<Vec<(&'static str, TestFunction)>> {
    let gauss = |coeffs: &[f64], rate: f64, center: f64| GaussTerm { coeffs: coeffs.to_vec(), rate, center };
    let even = |coeffs: &[f64], rate: f64| EvenProfile { coeffs: coeffs.to_vec(), rate };
    Ok(match regime.kind() {
        RegimeKind::Line => vec![
            ("gauss", TestFunction::gaussian()),
            ("hermite", TestFunction::hermite_gaussian(&[0.5, 1.0, -0.4, 0.2])?),
            ("heat", TestFunction::heat_kernel(0.3)?),
            ("shifted", TestFunction::from_family(&Family::Gaussian { terms: vec![gauss(&[1.0, -0.5], 2.0, 0.4)] })?),
        ],
        RegimeKind::Neumann => vec![
            ("even", TestFunction::neumann_even(even(&[1.0], 1.0), even(&[1.0], 1.0))?),
            ("jump", TestFunction::neumann_even(even(&[1.0, 0.5], 1.0), even(&[-0.7], 2.0))?),
            ("profile", TestFunction::neumann_even(even(&[2.0, -1.0], 1.5), even(&[0.5, 0.0, 0.3], 1.0))?),
        ],
        RegimeKind::Robin => {
            let a = regime.alpha();
            let odd = TestFunction::branchwise(vec![gauss(&[-1.0], 2.0, 0.0)], vec![gauss(&[1.0], 2.0, 0.0)])?;
            let lopsided =
                TestFunction::branchwise(vec![gauss(&[0.3, 0.5], 1.0, -0.2)], vec![gauss(&[1.0], 1.5, 0.5)])?;
            vec![
                ("odd", TestFunction::robin_smoothed(a, 0.1, &odd)?),
                ("lopsided", TestFunction::robin_smoothed(a, 0.1, &lopsided)?),
            ]
        }
    })
}
