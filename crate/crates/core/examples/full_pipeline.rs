//! Runs every stage from a TOML configuration into an output directory,
//! then runs again to show unchanged stages being skipped.
//!
//! ```text
//! cargo run --release --example full_pipeline -- [CONFIG.toml] [OUT_DIR]
//! ```

use std::path::PathBuf;

use gocf::pipeline::{run_pipeline, PipelineConfig, RunOptions};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/pipeline.toml"));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "pipeline-out".into()));
    let cfg = PipelineConfig::load(&config)?;

    for pass in 1..=2 {
        let t = std::time::Instant::now();
        let m = run_pipeline(&cfg, &out, &RunOptions::default())?;
        println!("pass {pass} ({:.1?}), ok={}", t.elapsed(), m.ok);
        for s in &m.stages {
            println!("  {:<9} {:?}  {} outputs", s.name, s.status, s.outputs.len());
            if let Some(e) = &s.error {
                println!("    {e}");
            }
        }
    }
    println!("manifest at {}", out.join("run_manifest.json").display());
    Ok(())
}
