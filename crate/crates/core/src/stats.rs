// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo estimators and the Ornstein-Uhlenbeck oracles they are
//! compared against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{integrate_try, QuadratureConfig};
use crate::semigroups::gradnorm_curve;
use crate::simulator::{expm_action, FieldSample, LatticeConfig};
use crate::testfn::{BetaRegime, RegimeKind, Side, TestFunction};

/// Width of the reported confidence bands, in standard errors.
pub const CI_SIGMAS: f64 = 3.0;

/// Pairwise separation, in combined standard errors, for distinct regimes.
pub const SEPARATION_SIGMAS: f64 = 5.0;

/// Sample mean of a replica statistic with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovEstimate {
    pub mean: f64,
    /// Unbiased sample variance of the per-replica values.
    pub variance: f64,
    pub std_error: f64,
    pub replicas: usize,
}

impl CovEstimate {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 replicas, got {n}")));
        }
        let nf = n as f64;
        let sum: f64 = values.iter().sum();
        let mean = sum / nf;
        // Leave-one-out means; for the mean the jackknife is exact.
        let jack = values.iter().map(|v| {
            let loo = (sum - v) / (nf - 1.0);
            (loo - mean) * (loo - mean)
        });
        let std_error = ((nf - 1.0) / nf * jack.sum::<f64>()).sqrt();
        let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
        Ok(Self { mean, variance, std_error, replicas: n })
    }

    /// `(mean - target) / std_error`; zero when both sides agree exactly.
    pub fn z(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    /// True when `target` lies inside the `sigmas` band.
    pub fn covers(&self, target: f64, sigmas: f64) -> bool {
        self.z(target).abs() <= sigmas
    }
}

/// Density, compressibility and regime of the limiting field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OUParams {
    pub rho: f64,
    pub chi: f64,
    pub regime: BetaRegime,
}

impl OUParams {
    pub fn new(rho: f64, regime: BetaRegime) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1), got {rho}")));
        }
        Ok(Self { rho, chi: rho * (1.0 - rho), regime })
    }
}

/// `int f g` split at the origin.
pub(crate) fn pairing(f: &TestFunction, g: &TestFunction, cfg: &QuadratureConfig) -> Result<f64> {
    let r = f.radius().min(g.radius());
    if r == 0.0 {
        return Ok(0.0);
    }
    if !r.is_finite() {
        return Err(Error::DivergentNorm("pairing of two non-decaying functions".into()));
    }
    let step = 1.5 * f.feature_width().min(g.feature_width());
    let n = ((r / step).ceil() as usize).clamp(1, 4096);
    let mut total = 0.0;
    for (lo, hi, side) in [(-r, 0.0, Side::Left), (0.0, r, Side::Right)] {
        let cuts: Vec<f64> = (1..n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        let prod = |x: f64| Ok(f.eval_sided(x, 0, side)? * g.eval_sided(x, 0, side)?);
        total += integrate_try(prod, lo, hi, &cuts, cfg)?.value;
    }
    Ok(total)
}

/// `chi <T_t H, G>` in the plain L2 pairing.
pub fn ou_covariance_oracle(params: &OUParams, h: &TestFunction, g: &TestFunction, t: f64) -> Result<f64> {
    ou_covariance_oracle_with(params, h, g, t, false, &QuadratureConfig::default())
}

/// With `atom`, the Robin pairing also carries `alpha^-2 (T_t H)(0+) G(0+)`.
pub fn ou_covariance_oracle_with(
    params: &OUParams,
    h: &TestFunction,
    g: &TestFunction,
    t: f64,
    atom: bool,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let evolved = h.evolve(&params.regime, t)?;
    let mut inner = pairing(&evolved, g, cfg)?;
    if atom && params.regime.kind() == RegimeKind::Robin {
        let a = params.regime.alpha();
        inner += evolved.eval(0.0, 0)? * g.eval(0.0, 0)? / (a * a);
    }
    Ok(params.chi * inner)
}

/// Exact `E[Y_t^n(H) Y_0^n(G)]` on the finite lattice of `config`.
///
/// Each particle of the stationary exclusion process is dual to a random
/// walk on the same bonds, so the covariance is
/// `(chi / n) sum_y G(y/n) (exp(t L) H)(y/n)` with `L` the walk generator.
pub fn lattice_covariance(config: &LatticeConfig, h: &TestFunction, g: &TestFunction, t: f64) -> Result<f64> {
    config.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    let n = config.n as f64;
    let points: Vec<f64> = (0..config.sites()).map(|i| config.position(i) as f64 / n).collect();
    let hv = h.eval_many(&points, 0)?;
    let gv = g.eval_many(&points, 0)?;
    let rates = config.rates();
    let bond: Vec<f64> = (0..rates.bonds()).map(|b| rates.bond_rate(b)).collect();
    let apply = |v: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (b, r) in bond.iter().enumerate() {
            let flow = r * (v[b + 1] - v[b]);
            out[b] += flow;
            out[b + 1] -= flow;
        }
    };
    let norm = 4.0 * rates.normal.max(rates.slow);
    let evolved = expm_action(apply, norm, t, &hv);
    let chi = config.rho * (1.0 - config.rho);
    Ok(chi / n * evolved.iter().zip(&gv).map(|(a, b)| a * b).sum::<f64>())
}

fn find_sample<'a>(stream: &'a [FieldSample], t: f64) -> Option<&'a FieldSample> {
    stream.iter().find(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
}

fn field(stream: &[FieldSample], t: f64, id: &str) -> Result<f64> {
    find_sample(stream, t)
        .ok_or_else(|| Error::Data(format!("no sample at t = {t}")))?
        .get(id)
        .ok_or_else(|| Error::Data(format!("no value for `{id}` at t = {t}")))
}

/// Replica average of `Y_t(H) Y_0(G)`.
pub fn empirical_covariance(samples: &[Vec<FieldSample>], h_id: &str, g_id: &str, t: f64) -> Result<CovEstimate> {
    let products = samples.iter().map(|s| Ok(field(s, t, h_id)? * field(s, 0.0, g_id)?)).collect::<Result<Vec<_>>>()?;
    CovEstimate::from_values(&products)
}

fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    ts.windows(2).zip(ys.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

/// Trapezoid integral and its Richardson error estimate against every other node.
fn trapezoid_with_error(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let fine = trapezoid(ts, ys);
    let m = ts.len() - 1;
    if m < 2 {
        return (fine, f64::INFINITY);
    }
    let even = if m % 2 == 0 { m } else { m - 1 };
    let (ct, cy): (Vec<f64>, Vec<f64>) = (0..=even).step_by(2).map(|i| (ts[i], ys[i])).unzip();
    let coarse = trapezoid(&ct, &cy) + trapezoid(&ts[even..], &ys[even..]);
    (fine, (fine - coarse) / 3.0)
}

/// One time of the Dynkin-martingale check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynkinRow {
    pub t: f64,
    pub drift: CovEstimate,
    pub drift_z: f64,
    /// Replica average of the trapezoid error estimate of `int Y_s(Delta H) ds`.
    pub quadrature_error: f64,
    pub variance: f64,
    pub variance_se: f64,
    /// `2 chi t ||nabla_beta H||^2_{2,beta}`.
    pub target_variance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynkinReport {
    pub rows: Vec<DynkinRow>,
    pub pass: bool,
}

/// Checks `M_t = Y_t(H) - Y_0(H) - int_0^t Y_s(Delta_beta H) ds` has zero mean.
///
/// The integral is a trapezoid over every sample time in `[0, t]`; its
/// Richardson error must stay below half the confidence band.
pub fn dynkin_martingale_test(
    samples: &[Vec<FieldSample>],
    h_id: &str,
    laplacian_id: &str,
    times: &[f64],
    params: &OUParams,
    grad_norm_sq: f64,
) -> Result<DynkinReport> {
    let first = samples.first().ok_or_else(|| Error::Data("no replicas".into()))?;
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let grid: Vec<f64> = first.iter().map(|s| s.t).filter(|s| *s <= t + 1e-12).collect();
        let mut values = Vec::with_capacity(samples.len());
        let mut errors = Vec::with_capacity(samples.len());
        for stream in samples {
            let ys = grid.iter().map(|&s| field(stream, s, laplacian_id)).collect::<Result<Vec<_>>>()?;
            let (integral, err) = if grid.len() > 1 { trapezoid_with_error(&grid, &ys) } else { (0.0, 0.0) };
            values.push(field(stream, t, h_id)? - field(stream, 0.0, h_id)? - integral);
            errors.push(err);
        }
        let drift = CovEstimate::from_values(&values)?;
        let quadrature_error = errors.iter().sum::<f64>() / errors.len() as f64;
        let half_ci = CI_SIGMAS * drift.std_error;
        if t > 0.0 && !(quadrature_error.abs() <= half_ci) {
            return Err(Error::Resolution { error_estimate: quadrature_error.abs(), half_ci });
        }
        let mean = drift.mean;
        let nf = values.len() as f64;
        let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
        let variance = drift.variance;
        let variance_se = ((m4 - variance * variance).max(0.0) / nf).sqrt();
        let drift_z = drift.z(0.0);
        rows.push(DynkinRow {
            t,
            drift,
            drift_z,
            quadrature_error,
            variance,
            variance_se,
            target_variance: 2.0 * params.chi * t * grad_norm_sq,
            pass: drift_z.abs() <= CI_SIGMAS,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(DynkinReport { rows, pass })
}

/// Test function and deterministic factor of `Z_t` at one time.
#[derive(Debug, Clone)]
pub struct ExponentialWeight {
    pub t: f64,
    /// `T_{S-t} H`.
    pub function: TestFunction,
    /// `exp(chi int_0^t ||nabla_beta T_{S-r} H||^2_{2,beta} dr)`.
    pub factor: f64,
}

/// Precomputes `T_{S-t} H` and the deterministic factor for each time.
pub fn exponential_weights(
    params: &OUParams,
    h: &TestFunction,
    horizon: f64,
    times: &[f64],
) -> Result<Vec<ExponentialWeight>> {
    if times.iter().any(|t| !(*t >= 0.0 && *t <= horizon)) {
        return Err(Error::Domain(format!("times must lie in [0, {horizon}]")));
    }
    let cfg = QuadratureConfig::default().scaled(100.0);
    let integrand = |r: f64| -> Result<f64> { Ok(gradnorm_curve(&params.regime, h, &[horizon - r])?[0]) };
    times
        .par_iter()
        .map(|&t| {
            let exponent = integrate_try(integrand, 0.0, t, &[], &cfg)?.value;
            Ok(ExponentialWeight {
                t,
                function: h.evolve(&params.regime, horizon - t)?,
                factor: (params.chi * exponent).exp(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialRow {
    pub t: f64,
    pub factor: f64,
    pub real: CovEstimate,
    pub imag: CovEstimate,
    /// Paired differences `Z_t - Z_0`, componentwise.
    pub diff_real: CovEstimate,
    pub diff_imag: CovEstimate,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialReport {
    pub rows: Vec<ExponentialRow>,
    pub pass: bool,
}

/// Checks that `E[Z_t]` does not move with `t`, where
/// `Z_t = exp(chi int_0^t ||nabla T_{S-r} H||^2 dr + i Y_t(T_{S-t} H))`.
///
/// `ids[j]` names the field of `weights[j].function` in the samples; the
/// first weight is the reference time.
pub fn exponential_martingale_test(
    samples: &[Vec<FieldSample>],
    weights: &[ExponentialWeight],
    ids: &[&str],
) -> Result<ExponentialReport> {
    if weights.len() != ids.len() || weights.is_empty() {
        return Err(Error::Data("need one field id per weight".into()));
    }
    let z = |stream: &[FieldSample], j: usize| -> Result<(f64, f64)> {
        let y = field(stream, weights[j].t, ids[j])?;
        Ok((weights[j].factor * y.cos(), weights[j].factor * y.sin()))
    };
    let reference = samples.iter().map(|s| z(s, 0)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(weights.len());
    for (j, w) in weights.iter().enumerate() {
        let zs = samples.iter().map(|s| z(s, j)).collect::<Result<Vec<_>>>()?;
        let (re, im): (Vec<f64>, Vec<f64>) = zs.iter().copied().unzip();
        let dre: Vec<f64> = zs.iter().zip(&reference).map(|(a, b)| a.0 - b.0).collect();
        let dim: Vec<f64> = zs.iter().zip(&reference).map(|(a, b)| a.1 - b.1).collect();
        let diff_real = CovEstimate::from_values(&dre)?;
        let diff_imag = CovEstimate::from_values(&dim)?;
        let pass = diff_real.covers(0.0, CI_SIGMAS) && diff_imag.covers(0.0, CI_SIGMAS);
        rows.push(ExponentialRow {
            t: w.t,
            factor: w.factor,
            real: CovEstimate::from_values(&re)?,
            imag: CovEstimate::from_values(&im)?,
            diff_real,
            diff_imag,
            pass,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(ExponentialReport { rows, pass })
}

/// Simulated campaign of one regime.
#[derive(Debug, Clone)]
pub struct RegimeCampaign<'a> {
    pub label: String,
    pub params: OUParams,
    pub samples: &'a [Vec<FieldSample>],
    pub h_id: &'a str,
    pub h: &'a TestFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub label: String,
    pub beta: f64,
    pub t: f64,
    pub oracle: f64,
    pub empirical: CovEstimate,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub rows: Vec<PhaseRow>,
    /// First time at which every pair of oracle curves is separated.
    pub separated_at: Option<f64>,
    /// Several regimes were compared and none of the times separated them.
    pub inconclusive: bool,
    pub max_abs_z: f64,
}

/// Empirical `E[Y_t(H) Y_0(H)]` against `chi <T_t^beta H, H>` per regime and time.
pub fn phase_transition_report(campaigns: &[RegimeCampaign<'_>], times: &[f64]) -> Result<PhaseReport> {
    let mut rows = Vec::with_capacity(campaigns.len() * times.len());
    for c in campaigns {
        let oracles =
            times.par_iter().map(|&t| ou_covariance_oracle(&c.params, c.h, c.h, t)).collect::<Result<Vec<_>>>()?;
        for (&t, oracle) in times.iter().zip(oracles) {
            let empirical = empirical_covariance(c.samples, c.h_id, c.h_id, t)?;
            rows.push(PhaseRow {
                label: c.label.clone(),
                beta: c.params.regime.beta(),
                t,
                oracle,
                z: empirical.z(oracle),
                empirical,
            });
        }
    }
    let at = |t: f64| rows.iter().filter(|r| r.t == t).collect::<Vec<_>>();
    let separated_at = if campaigns.len() < 2 {
        None
    } else {
        times.iter().copied().find(|&t| {
            let group = at(t);
            group.iter().enumerate().all(|(i, a)| {
                group[i + 1..].iter().all(|b| {
                    let se = a.empirical.std_error.hypot(b.empirical.std_error);
                    (a.oracle - b.oracle).abs() > SEPARATION_SIGMAS * se
                })
            })
        })
    };
    let max_abs_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    Ok(PhaseReport { inconclusive: campaigns.len() >= 2 && separated_at.is_none(), separated_at, rows, max_abs_z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{exact_small_ctmc, FieldProbe};
    use crate::testfn::GaussTerm;

    fn odd_bump() -> TestFunction {
        TestFunction::hermite_gaussian(&[0.0, 1.0]).unwrap()
    }

    #[test]
    fn estimate_examples() {
        let flat = CovEstimate::from_values(&[2.0; 5]).unwrap();
        assert_eq!((flat.mean, flat.variance, flat.std_error), (2.0, 0.0, 0.0));
        let v = [1.0, 4.0, -2.0, 0.5, 3.0];
        let e = CovEstimate::from_values(&v).unwrap();
        assert!((e.std_error - (e.variance / 5.0).sqrt()).abs() < 1e-14);
        let mut w = v;
        w.reverse();
        let f = CovEstimate::from_values(&w).unwrap();
        assert!((e.mean - f.mean).abs() < 1e-15 && (e.std_error - f.std_error).abs() < 1e-15);
        assert!(CovEstimate::from_values(&[1.0]).is_err());
    }

    #[test]
    fn oracle_at_zero_is_chi_inner_product() {
        let p = OUParams::new(0.3, BetaRegime::line()).unwrap();
        let h = TestFunction::gaussian();
        let want = 0.21 * (std::f64::consts::PI / 2.0).sqrt();
        assert!((ou_covariance_oracle(&p, &h, &h, 0.0).unwrap() - want).abs() < 1e-11);
    }

    #[test]
    fn oracle_is_self_adjoint_in_every_regime() {
        let h = TestFunction::branchwise(
            vec![GaussTerm { coeffs: vec![-1.0, 0.5], rate: 1.5, center: -0.2 }],
            vec![GaussTerm { coeffs: vec![0.7], rate: 1.0, center: 0.4 }],
        )
        .unwrap();
        let g = odd_bump();
        for regime in [BetaRegime::line(), BetaRegime::robin(0.7).unwrap(), BetaRegime::neumann()] {
            let p = OUParams::new(0.5, regime).unwrap();
            let a = ou_covariance_oracle(&p, &h, &g, 0.3).unwrap();
            let b = ou_covariance_oracle(&p, &g, &h, 0.3).unwrap();
            assert!((a - b).abs() <= 1e-8, "{regime}: {a} vs {b}");
        }
    }

    #[test]
    fn oracle_decays_on_the_line() {
        let p = OUParams::new(0.5, BetaRegime::line()).unwrap();
        let h = TestFunction::gaussian();
        let late = ou_covariance_oracle(&p, &h, &h, 400.0).unwrap();
        // chi sqrt(pi / (2 + 4t)) for H = exp(-x^2).
        let want = 0.25 * std::f64::consts::PI.sqrt() / (2.0 + 4.0 * 400.0f64).sqrt();
        assert!((late - want).abs() < 1e-10);
        assert!(late < 0.02);
    }

    #[test]
    fn regimes_order_for_odd_input() {
        let h = odd_bump();
        let c = |r: BetaRegime| ou_covariance_oracle(&OUParams::new(0.5, r).unwrap(), &h, &h, 0.05).unwrap();
        let (line, robin, neu) = (c(BetaRegime::line()), c(BetaRegime::robin(1.0).unwrap()), c(BetaRegime::neumann()));
        assert!(neu > robin && robin > line, "{neu} {robin} {line}");
        let even = TestFunction::gaussian();
        let e = |r: BetaRegime| ou_covariance_oracle(&OUParams::new(0.5, r).unwrap(), &even, &even, 0.05).unwrap();
        assert!((e(BetaRegime::line()) - e(BetaRegime::robin(1.0).unwrap())).abs() < 1e-10);
        let two = BetaRegime::new(2.0, 1.0).unwrap();
        assert_eq!(c(two), c(BetaRegime::neumann()));
    }

    #[test]
    fn lattice_covariance_matches_small_chain() {
        for (n, beta) in [(1usize, 1.0), (2, 1.0), (1, 0.5), (2, f64::INFINITY)] {
            let config = LatticeConfig::new(n, beta, 0.7, 0.4, 0.5);
            let sites = config.sites();
            let rates = config.rates();
            let bond: Vec<f64> = (0..rates.bonds()).map(|b| rates.bond_rate(b)).collect();
            let h = odd_bump();
            let hv: Vec<f64> = (0..sites).map(|i| h.eval(config.position(i) as f64 / n as f64, 0).unwrap()).collect();
            let field = |e: &[u8]| -> f64 {
                e.iter().zip(&hv).map(|(&o, w)| w * (o as f64 - 0.4)).sum::<f64>() / (n as f64).sqrt()
            };
            let exact = exact_small_ctmc(&bond, 0.4, 0.3, field, field).unwrap();
            let dual = lattice_covariance(&config, &h, &h, 0.3).unwrap();
            assert!((exact - dual).abs() < 1e-12, "n={n} beta={beta}: {exact} vs {dual}");
        }
    }

    #[test]
    fn empirical_covariance_requires_times() {
        let stream = vec![FieldSample { t: 0.0, values: vec![("h".into(), 1.0)] }];
        let samples = vec![stream.clone(), stream];
        assert!(matches!(empirical_covariance(&samples, "h", "h", 0.5), Err(Error::Data(_))));
        let e = empirical_covariance(&samples, "h", "h", 0.0).unwrap();
        assert_eq!((e.mean, e.variance), (1.0, 0.0));
    }

    #[test]
    fn trapezoid_richardson_is_exact_for_quadratics() {
        let ts: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let ys: Vec<f64> = ts.iter().map(|t| t * t).collect();
        let (fine, err) = trapezoid_with_error(&ts, &ys);
        assert!(err.abs() > 1e-4);
        assert!((fine + err - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_function_martingale_is_constant() {
        let p = OUParams::new(0.5, BetaRegime::line()).unwrap();
        let w = exponential_weights(&p, &TestFunction::zero(), 0.2, &[0.0, 0.1, 0.2]).unwrap();
        assert!(w.iter().all(|w| w.factor == 1.0));
        let config = LatticeConfig {
            sample_times: vec![0.0, 0.1, 0.2],
            replicas: 4,
            ..LatticeConfig::new(4, 0.5, 1.0, 0.5, 0.2)
        };
        let probe = FieldProbe::new("z", &TestFunction::zero(), &config).unwrap();
        let samples = crate::simulator::run_replicas(&config, &[probe]).unwrap();
        let r = exponential_martingale_test(&samples, &w, &["z", "z", "z"]).unwrap();
        assert!(r.pass);
        assert!(r.rows.iter().all(|row| row.real.mean == 1.0 && row.imag.mean == 0.0));
    }

    #[test]
    fn deterministic_factor_is_monotone() {
        let p = OUParams::new(0.5, BetaRegime::line()).unwrap();
        let w = exponential_weights(&p, &odd_bump(), 0.2, &[0.0, 0.05, 0.1, 0.2]).unwrap();
        assert!(w.windows(2).all(|p| p[1].factor >= p[0].factor));
        assert_eq!(w[0].factor, 1.0);
    }

    #[test]
    fn single_regime_report_has_no_flag() {
        let stream = vec![
            FieldSample { t: 0.0, values: vec![("h".into(), 1.0)] },
            FieldSample { t: 0.1, values: vec![("h".into(), 0.5)] },
        ];
        let samples = vec![stream.clone(), stream];
        let h = odd_bump();
        let c = RegimeCampaign {
            label: "line".into(),
            params: OUParams::new(0.5, BetaRegime::line()).unwrap(),
            samples: &samples,
            h_id: "h",
            h: &h,
        };
        let r = phase_transition_report(&[c], &[0.0, 0.1]).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.separated_at.is_none() && !r.inconclusive);
    }
}
