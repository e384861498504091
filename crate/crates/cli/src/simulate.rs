// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use slowbond::testfn::laplace_beta;
use slowbond::{run_replicas, FieldProbe, LatticeConfig};

use crate::config::{laplacian_id, z_id, CampaignConfig, MartingaleSection};
use crate::error::CliError;
use crate::output::{OutDir, Stamp};
use crate::samples;
use crate::CommonArgs;

fn lattice(args: &CommonArgs, config: &CampaignConfig) -> Result<LatticeConfig, CliError> {
    let mut lattice = config.lattice.clone().ok_or_else(|| CliError::Usage("missing [lattice] section".into()))?;
    let regime = args.regime(Some(lattice.regime().map_err(|e| CliError::Usage(e.to_string()))?))?;
    lattice.beta = regime.beta();
    lattice.alpha = regime.alpha();
    lattice.seed = args.seed.or(config.seed).unwrap_or(lattice.seed);
    lattice.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(lattice)
}

fn martingale_probes(
    section: &MartingaleSection,
    lattice: &LatticeConfig,
    base: &[(String, slowbond::TestFunction)],
) -> Result<Vec<FieldProbe>, CliError> {
    let (_, h) = base
        .iter()
        .find(|(id, _)| *id == section.function)
        .ok_or_else(|| CliError::Usage(format!("martingale.function `{}` is not a probe id", section.function)))?;
    if let Some(t) = section.times.iter().find(|t| !lattice.sample_times.contains(t)) {
        return Err(CliError::Usage(format!("martingale time {t} is not one of lattice.sample_times")));
    }
    let regime = lattice.regime()?;
    let mut probes = vec![FieldProbe::new(&laplacian_id(&section.function), &laplace_beta(h)?, lattice)?];
    for &t in &section.times {
        let evolved = h.evolve(&regime, lattice.horizon - t)?;
        probes.push(FieldProbe::new(&z_id(&section.function, t), &evolved, lattice)?.at_time(t));
    }
    Ok(probes)
}

pub fn run(args: &CommonArgs, config: &CampaignConfig) -> Result<bool, CliError> {
    let started = Instant::now();
    let lattice = lattice(args, config)?;
    let base = config.probes()?;
    let effective = CampaignConfig { seed: Some(lattice.seed), lattice: Some(lattice.clone()), ..config.clone() };
    let mut out = OutDir::create(&args.out, Stamp::new("simulate", &effective, lattice.seed))?;

    let mut probes = base.iter().map(|(id, h)| FieldProbe::new(id, h, &lattice)).collect::<Result<Vec<_>, _>>()?;
    if let Some(section) = &config.martingale {
        probes.extend(martingale_probes(section, &lattice, &base)?);
    }
    if lattice.replicas > 0 {
        let streams = run_replicas(&lattice, &probes)?;
        let path = out.csv("samples.csv", samples::rows(&streams))?;
        println!(
            "{} replicas x {} sample times x {} probes -> {}",
            lattice.replicas,
            lattice.sample_times.len(),
            probes.len(),
            path.display()
        );
    } else {
        println!("replicas = 0: nothing simulated");
    }
    out.manifest(&effective, started.elapsed(), None)?;
    Ok(true)
}
