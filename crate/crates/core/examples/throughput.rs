// SPDX-License-Identifier: Apache-2.0

//! Measures simulator event throughput at a given scale.
//!
//! `cargo run --release --example throughput -- [n] [T] [replicas]`

use std::time::Instant;

use slowbond::simulator::{init_replica, LatticeConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let n = args.first().copied().unwrap_or(200.0) as usize;
    let horizon = args.get(1).copied().unwrap_or(0.2);
    let replicas = args.get(2).copied().unwrap_or(20.0) as u64;
    let config = LatticeConfig::new(n, 1.0, 1.0, 0.5, horizon);
    let rates = config.rates();
    let start = Instant::now();
    let mut events = 0u64;
    for r in 0..replicas {
        let mut state = init_replica(&config, 1, r)?;
        state.advance(&rates, horizon)?;
        events += state.events();
    }
    let secs = start.elapsed().as_secs_f64();
    println!("{events} events in {secs:.3} s: {:.2} ns/event", 1e9 * secs / events as f64);
    Ok(())
}
