//! Fits the two move-level fixed-effects models on a simulated panel with
//! known coefficients and compares the estimates with the truth.
//!
//! ```text
//! cargo run --release --example move_level_model -- [SEED]
//! ```

use gocf::panel::{table1_model, FeOptions, Table1Model};
use gocf::synthetic::{planted_table1, PlantedSpec};

fn main() -> anyhow::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let spec = PlantedSpec { seed, ..PlantedSpec::default() };
    let obs = planted_table1(&spec);
    println!("{} moves, {} players; true effects {:?}", obs.len(), spec.n_players, spec.beta);
    for model in [Table1Model::M1, Table1Model::M2] {
        let r = table1_model(&obs, model, &FeOptions::default())?;
        println!("{model}: n={} clusters={} k={} sweeps={}", r.n_obs, r.n_clusters, r.k, r.convergence.iterations);
        for t in &r.terms {
            println!(
                "  {:<20} {:>9.5}{:<3} ({:.5})  [{:.4}, {:.4}]",
                t.name,
                t.estimate,
                t.stars(),
                t.se,
                t.ci_low,
                t.ci_high
            );
        }
    }
    Ok(())
}
