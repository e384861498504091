// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use serde::Serialize;
use slowbond::semigroups::semigroup_apply;
use slowbond::Side;

use crate::config::CampaignConfig;
use crate::error::CliError;
use crate::output::{OutDir, Stamp};
use crate::CommonArgs;

#[derive(Debug, Serialize)]
struct Row<'a> {
    function_id: &'a str,
    t: f64,
    x: f64,
    one_sided: &'static str,
    k: usize,
    value: f64,
}

pub fn run(args: &CommonArgs, config: &CampaignConfig) -> Result<bool, CliError> {
    let started = Instant::now();
    let regime = args.regime(config.regime)?;
    let section = config.evolve.clone().ok_or_else(|| CliError::Usage("missing [evolve] section".into()))?;
    let grid = section.grid.points()?;
    let mut functions = config.battery(&regime)?;
    if let Some(wanted) = &section.functions {
        if let Some(missing) = wanted.iter().find(|w| !functions.iter().any(|(id, _)| id == *w)) {
            return Err(CliError::Usage(format!("evolve.functions names unknown id `{missing}`")));
        }
        functions.retain(|(id, _)| wanted.contains(id));
    }
    let seed = args.seed(config, 0);
    let effective = CampaignConfig { seed: Some(seed), regime: Some(regime), ..config.clone() };
    let mut out = OutDir::create(&args.out, Stamp::new("evolve", &effective, seed))?;

    let mut sampled = Vec::new();
    for (id, h) in &functions {
        for &t in &section.times {
            for &k in &section.orders {
                sampled.push((id.as_str(), semigroup_apply(&regime, t, h, &grid, k)?));
            }
        }
    }
    let rows = sampled.iter().flat_map(|(id, s)| {
        s.records.iter().map(move |r| Row {
            function_id: id,
            t: s.t,
            x: r.x,
            one_sided: match r.one_sided {
                None => "",
                Some(Side::Left) => "left",
                Some(Side::Right) => "right",
            },
            k: r.k,
            value: r.value,
        })
    });
    let path = out.csv("evolve.csv", rows)?;
    println!("wrote {} sampled functions to {}", sampled.len(), path.display());
    out.manifest(&effective, started.elapsed(), None)?;
    Ok(true)
}
