// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use serde::Serialize;
use slowbond::stats::{ou_covariance_oracle_with, CI_SIGMAS};
use slowbond::{
    dynkin_martingale_test, exponential_martingale_test, exponential_weights, gradnorm_curve, phase_transition_report,
    BetaRegime, FieldSample, OUParams, QuadratureConfig, RegimeCampaign, TestFunction,
};

use crate::config::{laplacian_id, z_id, CampaignConfig, CompareInput, CompareSection};
use crate::error::CliError;
use crate::output::{OutDir, Stamp, Summary};
use crate::samples;
use crate::CommonArgs;

#[derive(Debug, Serialize)]
struct PhaseLine<'a> {
    label: &'a str,
    beta: String,
    t: f64,
    oracle: f64,
    oracle_atom: Option<f64>,
    empirical: f64,
    std_error: f64,
    ci_low: f64,
    ci_high: f64,
    z: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct DynkinLine {
    t: f64,
    drift: f64,
    std_error: f64,
    z: f64,
    quadrature_error: f64,
    variance: f64,
    variance_se: f64,
    target_variance: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct ExponentialLine {
    t: f64,
    factor: f64,
    real: f64,
    imag: f64,
    diff_real: f64,
    diff_real_se: f64,
    diff_imag: f64,
    diff_imag_se: f64,
    pass: bool,
}

fn beta_label(beta: f64) -> String {
    if beta.is_finite() {
        beta.to_string()
    } else {
        "inf".into()
    }
}

fn params(input: &CompareInput) -> Result<OUParams, CliError> {
    let regime =
        BetaRegime::new(input.beta, input.alpha).map_err(|e| CliError::Usage(format!("{}: {e}", input.label)))?;
    OUParams::new(input.rho, regime).map_err(|e| CliError::Usage(format!("{}: {e}", input.label)))
}

fn load_inputs(section: &CompareSection) -> Result<Vec<Vec<Vec<FieldSample>>>, CliError> {
    let missing: Vec<String> =
        section.inputs.iter().filter(|i| !i.samples.is_file()).map(|i| i.samples.display().to_string()).collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!("missing sample files: {}", missing.join(", "))));
    }
    section.inputs.iter().map(|i| samples::read(&i.samples)).collect()
}

/// Runs the Dynkin and exponential checks and appends their summaries.
fn martingales(
    config: &CampaignConfig,
    section: &CompareSection,
    label: &str,
    loaded: &[Vec<Vec<FieldSample>>],
    probes: &[(String, TestFunction)],
    out: &mut OutDir,
    summaries: &mut Vec<Summary>,
) -> Result<bool, CliError> {
    let mart = config
        .martingale
        .as_ref()
        .ok_or_else(|| CliError::Usage("martingale_input needs a [martingale] section".into()))?;
    let horizon = config
        .lattice
        .as_ref()
        .ok_or_else(|| CliError::Usage("martingale checks need the [lattice] horizon".into()))?
        .horizon;
    let index = section
        .inputs
        .iter()
        .position(|i| i.label == label)
        .ok_or_else(|| CliError::Usage(format!("martingale_input `{label}` is not an input label")))?;
    let streams = &loaded[index];
    let p = params(&section.inputs[index])?;
    let (_, h) = probes
        .iter()
        .find(|(id, _)| *id == mart.function)
        .ok_or_else(|| CliError::Usage(format!("martingale.function `{}` is not a probe id", mart.function)))?;

    let dynkin_times: Vec<f64> = if section.dynkin_times.is_empty() {
        mart.times.iter().copied().filter(|t| *t > 0.0).collect()
    } else {
        section.dynkin_times.clone()
    };
    let grad = gradnorm_curve(&p.regime, h, &[0.0])?[0];
    let dynkin =
        dynkin_martingale_test(streams, &mart.function, &laplacian_id(&mart.function), &dynkin_times, &p, grad)?;
    for r in &dynkin.rows {
        summaries.push(Summary {
            test: format!("dynkin/{label}/t={}", r.t),
            statistic: r.drift.mean,
            target: 0.0,
            std_error: Some(r.drift.std_error),
            z: Some(r.drift_z),
            pass: r.pass,
        });
    }
    out.csv(
        "dynkin.csv",
        dynkin.rows.iter().map(|r| DynkinLine {
            t: r.t,
            drift: r.drift.mean,
            std_error: r.drift.std_error,
            z: r.drift_z,
            quadrature_error: r.quadrature_error,
            variance: r.variance,
            variance_se: r.variance_se,
            target_variance: r.target_variance,
            pass: r.pass,
        }),
    )?;

    let weights = exponential_weights(&p, h, horizon, &mart.times)?;
    let ids: Vec<String> = mart.times.iter().map(|&t| z_id(&mart.function, t)).collect();
    let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let exp = exponential_martingale_test(streams, &weights, &id_refs)?;
    for r in &exp.rows {
        let worst = if r.diff_real.z(0.0).abs() >= r.diff_imag.z(0.0).abs() { &r.diff_real } else { &r.diff_imag };
        summaries.push(Summary {
            test: format!("exponential/{label}/t={}", r.t),
            statistic: worst.mean,
            target: 0.0,
            std_error: Some(worst.std_error),
            z: Some(worst.z(0.0)),
            pass: r.pass,
        });
    }
    out.csv(
        "exponential.csv",
        exp.rows.iter().map(|r| ExponentialLine {
            t: r.t,
            factor: r.factor,
            real: r.real.mean,
            imag: r.imag.mean,
            diff_real: r.diff_real.mean,
            diff_real_se: r.diff_real.std_error,
            diff_imag: r.diff_imag.mean,
            diff_imag_se: r.diff_imag.std_error,
            pass: r.pass,
        }),
    )?;
    println!(
        "martingales on `{label}`: dynkin {}, exponential {}",
        if dynkin.pass { "PASS" } else { "FAIL" },
        if exp.pass { "PASS" } else { "FAIL" }
    );
    Ok(dynkin.pass && exp.pass)
}

pub fn run(args: &CommonArgs, config: &CampaignConfig) -> Result<bool, CliError> {
    let started = Instant::now();
    let section = config.compare.clone().ok_or_else(|| CliError::Usage("missing [compare] section".into()))?;
    if section.inputs.is_empty() || section.times.is_empty() {
        return Err(CliError::Usage("compare needs at least one input and one time".into()));
    }
    let probes = config.probes()?;
    let (_, h) = probes
        .iter()
        .find(|(id, _)| *id == section.function)
        .ok_or_else(|| CliError::Usage(format!("compare.function `{}` is not a probe id", section.function)))?;
    let all_params = section.inputs.iter().map(params).collect::<Result<Vec<_>, _>>()?;
    let loaded = load_inputs(&section)?;
    let seed = args.seed(config, 0);
    let mut out = OutDir::create(&args.out, Stamp::new("compare", config, seed))?;

    let campaigns: Vec<RegimeCampaign> = section
        .inputs
        .iter()
        .zip(&all_params)
        .zip(&loaded)
        .map(|((input, p), streams)| RegimeCampaign {
            label: input.label.clone(),
            params: *p,
            samples: streams,
            h_id: &section.function,
            h,
        })
        .collect();
    let report = phase_transition_report(&campaigns, &section.times)?;

    let cfg = QuadratureConfig::default();
    let mut lines = Vec::with_capacity(report.rows.len());
    let mut summaries = Vec::new();
    for (i, row) in report.rows.iter().enumerate() {
        let p = &all_params[i / section.times.len()];
        let oracle_atom =
            if section.atom { Some(ou_covariance_oracle_with(p, h, h, row.t, true, &cfg)?) } else { None };
        let est = &row.empirical;
        let pass = row.z.abs() <= CI_SIGMAS;
        lines.push(PhaseLine {
            label: &row.label,
            beta: beta_label(row.beta),
            t: row.t,
            oracle: row.oracle,
            oracle_atom,
            empirical: est.mean,
            std_error: est.std_error,
            ci_low: est.mean - CI_SIGMAS * est.std_error,
            ci_high: est.mean + CI_SIGMAS * est.std_error,
            z: row.z,
            pass,
        });
        summaries.push(Summary {
            test: format!("covariance/{}/t={}", row.label, row.t),
            statistic: est.mean,
            target: row.oracle,
            std_error: Some(est.std_error),
            z: Some(row.z),
            pass,
        });
    }
    let mut passed = lines.iter().all(|l| l.pass);
    println!(
        "{:<10} {:>5} {:>7} {:>11} {:>11} {:>10} {:>7}",
        "label", "beta", "t", "oracle", "empirical", "std_err", "z"
    );
    for l in &lines {
        println!(
            "{:<10} {:>5} {:>7} {:>11.5} {:>11.5} {:>10.5} {:>+7.2}",
            l.label, l.beta, l.t, l.oracle, l.empirical, l.std_error, l.z
        );
    }
    if campaigns.len() > 1 {
        match report.separated_at {
            Some(t) => println!("regimes separated at t = {t}"),
            None => println!("inconclusive: no time separates every pair of regimes"),
        }
        let separated = report.separated_at.is_some();
        summaries.push(Summary {
            test: "separation".into(),
            statistic: report.separated_at.unwrap_or(f64::NAN),
            target: f64::NAN,
            std_error: None,
            z: None,
            pass: separated,
        });
        passed &= separated;
    }
    out.csv("phase_table.csv", &lines)?;
    if let Some(label) = &section.martingale_input {
        passed &= martingales(config, &section, label, &loaded, &probes, &mut out, &mut summaries)?;
    }
    out.csv("summary.csv", &summaries)?;
    out.json("phase_report.json", &report)?;
    out.manifest(config, started.elapsed(), Some(passed))?;
    Ok(passed)
}
