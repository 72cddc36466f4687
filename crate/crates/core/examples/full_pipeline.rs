//! Runs every pipeline stage in order with a reduced configuration, the same
//! sequence the `gbmrg` binary exposes as subcommands.
//!
//! `cargo run --release --example full_pipeline -- [out_dir]`

use gbm_radiogenomics::pipeline::{run, Command, RunOptions};

const CONFIG: &str = r#"{
  "phantom": {"n_cases": 16, "spec": {"grid": [32, 32, 32], "n_genes": 40}},
  "synthesis": {"train": {"steps": 60, "net": {"depth": 2, "base_channels": 8}}},
  "segmentation": {"train": {"steps": 120, "lr": 0.002, "net": {"depth": 2, "base_channels": 8}}},
  "explain": {"background": 8, "permutations": 32, "top_k": 10}
}"#;

fn main() -> gbm_radiogenomics::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "pipeline_out".into());
    std::fs::create_dir_all(&out)?;
    let config = std::path::Path::new(&out).join("config.json");
    std::fs::write(&config, CONFIG)?;
    let cfg = RunOptions { config: Some(config), seed: Some(0), out: Some(out.into()) }.resolve()?;
    for cmd in Command::ALL {
        let meta = run(cmd, &cfg)?;
        println!("{:<18} -> {}", cmd.name(), meta.outputs.join(", "));
    }
    Ok(())
}
