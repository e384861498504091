// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use serde::Serialize;
use slowbond::semigroups::{continuity_modulus, generator_residual, gradnorm_curve};
use slowbond::testfn::{laplace_beta, validate_membership, SeminormIndex};
use slowbond::{BetaRegime, TestFunction};

use crate::config::{CampaignConfig, Suite, ValidateSection};
use crate::error::CliError;
use crate::output::{OutDir, Stamp, Summary};
use crate::CommonArgs;

#[derive(Debug, Serialize)]
struct Row {
    suite: &'static str,
    function_id: String,
    parameter: String,
    statistic: f64,
    target: f64,
    pass: bool,
}

struct Suites<'a> {
    regime: BetaRegime,
    cfg: &'a ValidateSection,
    rows: Vec<Row>,
}

impl Suites<'_> {
    fn push(&mut self, suite: Suite, id: &str, parameter: String, statistic: f64, target: f64, pass: bool) -> bool {
        self.rows.push(Row { suite: suite.name(), function_id: id.to_string(), parameter, statistic, target, pass });
        pass
    }

    fn membership(&mut self, suite: Suite, id: &str, parameter: String, h: &TestFunction) -> Result<bool, CliError> {
        let report = validate_membership(h, &self.regime, self.cfg.max_k, self.cfg.tol)?;
        let r = report.max_relative_residual();
        Ok(self.push(suite, id, parameter, r, self.cfg.tol, report.passed()))
    }

    fn run(&mut self, id: &str, h: &TestFunction) -> Result<(), CliError> {
        let regime = self.regime;
        let cfg = self.cfg;
        let wants = |s: Suite| cfg.suites.contains(&s);
        if !self.membership(Suite::Membership, id, String::new(), h)? {
            return Ok(());
        }
        if wants(Suite::Laplacian) {
            self.membership(Suite::Laplacian, id, String::new(), &laplace_beta(h)?)?;
        }
        if wants(Suite::Evolution) {
            for &t in &cfg.times {
                self.membership(Suite::Evolution, id, format!("t={t}"), &h.evolve(&regime, t)?)?;
            }
        }
        if wants(Suite::Generator) {
            let norms = [SeminormIndex::new(0, 0), SeminormIndex::new(1, 1), SeminormIndex::new(2, 2)];
            for &t in &cfg.generator_times {
                let r = cfg
                    .generator_eps
                    .iter()
                    .map(|&e| generator_residual(&regime, t, e, h, &norms))
                    .collect::<Result<Vec<_>, _>>()?;
                let orders: Vec<f64> = r.windows(2).map(|w| (w[0] / w[1]).ln() / 2f64.ln()).collect();
                let worst =
                    orders.iter().copied().fold(1.0_f64, |a, p| if (p - 1.0).abs() > (a - 1.0).abs() { p } else { a });
                let pass = orders.iter().all(|p| (0.9..=1.1).contains(p));
                self.push(Suite::Generator, id, format!("t={t}"), worst, 1.0, pass);
            }
        }
        if wants(Suite::Continuity) {
            let t = cfg.continuity_t;
            let wide = continuity_modulus(&regime, h, t, t + cfg.continuity_gap)?;
            let narrow = continuity_modulus(&regime, h, t, t + 0.5 * cfg.continuity_gap)?;
            let ratio = wide / narrow;
            self.push(Suite::Continuity, id, format!("t={t}"), ratio, 2.0, (1.5..=2.5).contains(&ratio));
        }
        if wants(Suite::Gradnorm) {
            let jump = |steps: usize| -> Result<f64, CliError> {
                let times: Vec<f64> = (0..=steps).map(|i| cfg.gradnorm_horizon * i as f64 / steps as f64).collect();
                let f = gradnorm_curve(&regime, h, &times)?;
                Ok(f.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max))
            };
            let ratio = jump(cfg.gradnorm_steps)? / jump(2 * cfg.gradnorm_steps)?;
            let parameter = format!("steps={}", cfg.gradnorm_steps);
            self.push(Suite::Gradnorm, id, parameter, ratio, 2.0, (1.5..=2.5).contains(&ratio));
        }
        Ok(())
    }
}

fn check(cfg: &ValidateSection) -> Result<(), CliError> {
    let fail = |m: &str| Err(CliError::Usage(format!("validate.{m}")));
    if cfg.suites.is_empty() {
        return fail("suites is empty");
    }
    if !cfg.suites.contains(&Suite::Membership) {
        return fail("suites must include membership");
    }
    if cfg.generator_eps.len() < 2 {
        return fail("generator_eps needs at least two steps");
    }
    if !(cfg.continuity_gap > 0.0) || cfg.gradnorm_steps == 0 || !(cfg.gradnorm_horizon > 0.0) {
        return fail("continuity_gap, gradnorm_steps and gradnorm_horizon must be positive");
    }
    Ok(())
}

pub fn run(args: &CommonArgs, config: &CampaignConfig) -> Result<bool, CliError> {
    let started = Instant::now();
    let regime = args.regime(config.regime)?;
    let section = config.validate.clone().unwrap_or_default();
    check(&section)?;
    let functions = config.battery(&regime)?;
    let seed = args.seed(config, 0);
    let effective =
        CampaignConfig { seed: Some(seed), regime: Some(regime), validate: Some(section.clone()), ..config.clone() };
    let mut out = OutDir::create(&args.out, Stamp::new("validate", &effective, seed))?;

    let mut suites = Suites { regime, cfg: &section, rows: Vec::new() };
    for (id, h) in &functions {
        suites.run(id, h)?;
    }
    let rows = suites.rows;
    let passed = rows.iter().all(|r| r.pass);
    println!("{:<11} {:<12} {:<10} {:>12} {:>10}  result", "suite", "function", "parameter", "statistic", "target");
    for r in &rows {
        println!(
            "{:<11} {:<12} {:<10} {:>12.4e} {:>10.3e}  {}",
            r.suite,
            r.function_id,
            r.parameter,
            r.statistic,
            r.target,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    let summaries: Vec<Summary> = rows
        .iter()
        .map(|r| Summary {
            test: [r.suite, &r.function_id, &r.parameter]
                .iter()
                .filter(|s| !s.is_empty())
                .copied()
                .collect::<Vec<_>>()
                .join("/"),
            statistic: r.statistic,
            target: r.target,
            std_error: None,
            z: None,
            pass: r.pass,
        })
        .collect();
    out.csv("validate.csv", &rows)?;
    out.csv("summary.csv", &summaries)?;
    out.manifest(&effective, started.elapsed(), Some(passed))?;
    Ok(passed)
}
