// SPDX-License-Identifier: Apache-2.0

//! Symmetric simple exclusion on `{-L, ..., L-1}` with one slow bond
//! `{-1, 0}`, run on the diffusive clock.
//!
//! Between observation times only the number and order of bond rings
//! matter, so the engine draws one Poisson count for the whole interval and
//! applies that many rings to uniformly chosen bonds. Rings on a bond whose
//! rate is below the common ring rate are thinned. A ring costs one random
//! `u64` except on thinned bonds.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::testfn::{beta_repr, BetaRegime, TestFunction};

/// Largest chain handled by [`exact_small_ctmc`].
pub const SMALL_CTMC_MAX_SITES: usize = 12;

/// Lattice, dynamics and sampling plan of one campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub n: usize,
    /// Half-width: sites `-L..L-1`.
    #[serde(rename = "L")]
    pub half_width: usize,
    #[serde(with = "beta_repr")]
    pub beta: f64,
    pub alpha: f64,
    pub rho: f64,
    /// Macroscopic horizon.
    #[serde(rename = "T")]
    pub horizon: f64,
    pub sample_times: Vec<f64>,
    #[serde(default)]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
}

impl LatticeConfig {
    /// A config with `L = 3n` and samples at `0` and `horizon`.
    pub fn new(n: usize, beta: f64, alpha: f64, rho: f64, horizon: f64) -> Self {
        Self { n, half_width: 3 * n, beta, alpha, rho, horizon, sample_times: vec![0.0, horizon], replicas: 0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.half_width < 3 * self.n {
            return Err(Error::Config(format!("L = {} must be at least 3n = {}", self.half_width, 3 * self.n)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("T must be finite and >= 0, got {}", self.horizon)));
        }
        if self.sample_times.iter().any(|t| !(*t >= 0.0 && *t <= self.horizon)) {
            return Err(Error::Config("sample_times must lie in [0, T]".into()));
        }
        if self.sample_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("sample_times must be sorted".into()));
        }
        self.regime()?;
        Ok(())
    }

    pub fn regime(&self) -> Result<BetaRegime> {
        BetaRegime::new(self.beta, self.alpha)
    }

    pub fn sites(&self) -> usize {
        2 * self.half_width
    }

    /// Lattice coordinate of the site with storage index `i`.
    pub fn position(&self, i: usize) -> i64 {
        i as i64 - self.half_width as i64
    }

    /// Bond rates on the macroscopic clock: `n^2` for normal bonds and
    /// `alpha n^(2 - beta)` for the slow bond (zero when `beta = inf`).
    pub fn rates(&self) -> ChainRates {
        let n = self.n as f64;
        let slow = if self.beta.is_finite() { self.alpha * n.powf(2.0 - self.beta) } else { 0.0 };
        ChainRates { sites: self.sites(), normal: n * n, slow_bond: self.half_width - 1, slow }
    }
}

/// Nearest-neighbour chain with one distinguished bond `{slow_bond, slow_bond + 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainRates {
    pub sites: usize,
    pub normal: f64,
    pub slow_bond: usize,
    pub slow: f64,
}

impl ChainRates {
    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 || self.slow_bond + 1 >= self.sites {
            return Err(Error::Config(format!(
                "slow bond {} does not fit a chain of {} sites",
                self.slow_bond, self.sites
            )));
        }
        if !(self.normal >= 0.0 && self.slow >= 0.0 && self.normal.is_finite() && self.slow.is_finite()) {
            return Err(Error::Config("bond rates must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn bonds(&self) -> usize {
        self.sites - 1
    }

    pub fn bond_rate(&self, bond: usize) -> f64 {
        if bond == self.slow_bond {
            self.slow
        } else {
            self.normal
        }
    }

    /// Total event rate `normal * (#bonds - 1) + slow`.
    pub fn total(&self) -> f64 {
        self.normal * (self.bonds() - 1) as f64 + self.slow
    }
}

/// Occupations, macroscopic clock and random stream of one replica.
#[derive(Debug, Clone)]
pub struct ParticleState {
    occupation: Vec<u8>,
    time: f64,
    rng: ChaCha8Rng,
    events: u64,
    slow_swaps: u64,
}

impl ParticleState {
    /// I.i.d. Bernoulli(`rho`) occupations drawn from stream `stream` of `seed`.
    pub fn stationary(sites: usize, rho: f64, seed: u64, stream: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1], got {rho}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let occupation = (0..sites).map(|_| u8::from(rng.gen::<f64>() < rho)).collect();
        Ok(Self { occupation, time: 0.0, rng, events: 0, slow_swaps: 0 })
    }

    /// A fixed configuration with its own random stream.
    pub fn from_occupation(occupation: Vec<u8>, seed: u64, stream: u64) -> Result<Self> {
        if occupation.iter().any(|&o| o > 1) {
            return Err(Error::Config("occupations must be 0 or 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(Self { occupation, time: 0.0, rng, events: 0, slow_swaps: 0 })
    }

    pub fn occupation(&self) -> &[u8] {
        &self.occupation
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Bond rings so far, including thinned rings and swaps of equal values.
    pub fn events(&self) -> u64 {
        self.events
    }

    /// Particle transfers across the slow bond so far.
    pub fn slow_swaps(&self) -> u64 {
        self.slow_swaps
    }

    pub fn particles(&self) -> usize {
        self.occupation.iter().map(|&o| o as usize).sum()
    }

    /// Runs the chain up to `t_target`.
    pub fn advance(&mut self, rates: &ChainRates, t_target: f64) -> Result<()> {
        if !(t_target >= self.time) {
            return Err(Error::Ordering { current: self.time, target: t_target });
        }
        rates.validate()?;
        if rates.sites != self.occupation.len() {
            return Err(Error::Config("rates and configuration disagree on the number of sites".into()));
        }
        // Thinning: every bond rings at `r_max`; a ring on a bond with a
        // smaller rate is kept with probability `rate / r_max`.
        let r_max = rates.normal.max(rates.slow);
        let bonds = rates.bonds();
        let lambda = r_max * bonds as f64 * (t_target - self.time);
        self.time = t_target;
        if !(lambda > 0.0) {
            return Ok(());
        }
        let count = Poisson::new(lambda)
            .map_err(|e| Error::Config(format!("event rate {lambda}: {e}")))?
            .sample(&mut self.rng) as u64;
        let keep = |rate: f64| (rate < r_max).then(|| (rate / r_max * (1u64 << 53) as f64) as u64);
        let (slow_keep, normal_keep) = (keep(rates.slow), keep(rates.normal));
        let sb = rates.slow_bond;
        let occ = &mut self.occupation;
        let mut slow_swaps = 0u64;
        for _ in 0..count {
            let bond = ((self.rng.next_u64() as u128 * bonds as u128) >> 64) as usize;
            let cut = if bond == sb { slow_keep } else { normal_keep };
            if let Some(cut) = cut {
                if (self.rng.next_u64() >> 11) >= cut {
                    continue;
                }
            }
            let (a, b) = (occ[bond], occ[bond + 1]);
            occ[bond] = b;
            occ[bond + 1] = a;
            slow_swaps += u64::from(bond == sb && a != b);
        }
        self.events += count;
        self.slow_swaps += slow_swaps;
        Ok(())
    }
}

/// Stationary start for replica 0 of `config` under `seed`.
pub fn init(config: &LatticeConfig, seed: u64) -> Result<ParticleState> {
    init_replica(config, seed, 0)
}

/// Stationary start on the independent stream of `replica`.
pub fn init_replica(config: &LatticeConfig, seed: u64, replica: u64) -> Result<ParticleState> {
    config.validate()?;
    ParticleState::stationary(config.sites(), config.rho, seed, replica)
}

/// Advances `state` to macroscopic time `t_target`.
pub fn step_to(state: &mut ParticleState, t_target: f64, config: &LatticeConfig) -> Result<()> {
    state.advance(&config.rates(), t_target)
}

/// Site weights `H(x/n) / sqrt(n)` of one test function.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldProbe {
    id: Arc<str>,
    weights: Vec<f64>,
    only_at: Option<f64>,
}

impl FieldProbe {
    pub fn new(id: &str, h: &TestFunction, config: &LatticeConfig) -> Result<Self> {
        let n = config.n as f64;
        let points: Vec<f64> = (0..config.sites()).map(|i| config.position(i) as f64 / n).collect();
        let inv = 1.0 / n.sqrt();
        let weights = h.eval_many(&points, 0)?.into_iter().map(|v| v * inv).collect();
        Ok(Self { id: id.into(), weights, only_at: None })
    }

    /// A probe with explicit per-site weights.
    pub fn from_weights(id: &str, weights: Vec<f64>) -> Self {
        Self { id: id.into(), weights, only_at: None }
    }

    /// Restricts the probe to the sample time `t`.
    pub fn at_time(mut self, t: f64) -> Self {
        self.only_at = Some(t);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_x w(x) (eta(x) - rho)`.
    pub fn measure(&self, state: &ParticleState, rho: f64) -> f64 {
        self.weights.iter().zip(state.occupation()).map(|(w, &o)| w * (o as f64 - rho)).sum()
    }

    fn active(&self, t: f64) -> bool {
        self.only_at.map_or(true, |s| s == t)
    }
}

/// `Y_t^n(H) = n^{-1/2} sum_x H(x/n) (eta(x) - rho)`.
pub fn fluctuation(state: &ParticleState, h: &TestFunction, config: &LatticeConfig) -> Result<f64> {
    Ok(FieldProbe::new("h", h, config)?.measure(state, config.rho))
}

/// Field values of one replica at one sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub t: f64,
    pub values: Vec<(String, f64)>,
}

impl FieldSample {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.values.iter().find(|(k, _)| k == id).map(|(_, v)| *v)
    }
}

/// Sample stream of replica `replica`.
pub fn run_replica(config: &LatticeConfig, probes: &[FieldProbe], replica: u64) -> Result<Vec<FieldSample>> {
    let mut state = init_replica(config, config.seed, replica)?;
    let rates = config.rates();
    let mut out = Vec::with_capacity(config.sample_times.len());
    for &t in &config.sample_times {
        state.advance(&rates, t)?;
        let values =
            probes.iter().filter(|p| p.active(t)).map(|p| (p.id.to_string(), p.measure(&state, config.rho))).collect();
        out.push(FieldSample { t, values });
    }
    Ok(out)
}

/// All `config.replicas` streams, in replica order.
pub fn run_replicas(config: &LatticeConfig, probes: &[FieldProbe]) -> Result<Vec<Vec<FieldSample>>> {
    config.validate()?;
    for p in probes {
        if p.weights.len() != config.sites() {
            return Err(Error::Config(format!(
                "probe `{}` has {} weights for {} sites",
                p.id,
                p.weights.len(),
                config.sites()
            )));
        }
    }
    (0..config.replicas as u64).into_par_iter().map(|r| run_replica(config, probes, r)).collect()
}

/// `w = exp(t A) v` for a generator `A` whose action is `apply(v, out)`
/// and whose norm is at most `norm`, by scaled Taylor steps.
pub(crate) fn expm_action<F>(apply: F, norm: f64, t: f64, v: &[f64]) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let steps = (t * norm / 2.0).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut w = v.to_vec();
    let mut term = vec![0.0; v.len()];
    let mut next = vec![0.0; v.len()];
    for _ in 0..steps {
        term.copy_from_slice(&w);
        let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for j in 1..=80 {
            apply(&term, &mut next);
            let c = h / j as f64;
            let mut size = 0.0f64;
            for (tm, nx) in term.iter_mut().zip(&next) {
                *tm = nx * c;
                size = size.max(tm.abs());
            }
            for (wi, tm) in w.iter_mut().zip(&term) {
                *wi += tm;
            }
            if size <= 1e-18 * scale.max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }
    w
}

/// `E[f(eta_t) g(eta_0)]` for exclusion on a chain with per-bond `rates`
/// (bond `i` joins sites `i` and `i + 1`), started from Bernoulli(`rho`).
pub fn exact_small_ctmc<F, G>(rates: &[f64], rho: f64, t: f64, f: F, g: G) -> Result<f64>
where
    F: Fn(&[u8]) -> f64,
    G: Fn(&[u8]) -> f64,
{
    let sites = rates.len() + 1;
    if sites > SMALL_CTMC_MAX_SITES {
        return Err(Error::StateSpace { sites, cap: SMALL_CTMC_MAX_SITES });
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Config(format!("rho must lie in [0, 1], got {rho}")));
    }
    if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(Error::Config("bond rates must be finite and >= 0".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    let states = 1usize << sites;
    let config = |s: usize| -> Vec<u8> { (0..sites).map(|i| ((s >> i) & 1) as u8).collect() };
    let fv: Vec<f64> = (0..states).map(|s| f(&config(s))).collect();
    let weight = |s: usize| {
        let k = s.count_ones() as i32;
        rho.powi(k) * (1.0 - rho).powi(sites as i32 - k)
    };
    let apply = |v: &[f64], out: &mut [f64]| {
        for (s, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (b, r) in rates.iter().enumerate() {
                if ((s >> b) & 1) != ((s >> (b + 1)) & 1) {
                    acc += r * (v[s ^ (0b11 << b)] - v[s]);
                }
            }
            *o = acc;
        }
    };
    let norm = 2.0 * rates.iter().sum::<f64>();
    let evolved = expm_action(apply, norm, t, &fv);
    Ok((0..states).map(|s| weight(s) * g(&config(s)) * evolved[s]).sum())
}
