//! Bundled figure configurations.

use std::path::Path;

use crate::config::{set_radius, ExperimentConfig};
use crate::{execute, out_dir, Failure};

pub const FIGURE1: &str = include_str!("../configs/figure1.toml");
pub const FIGURE2: &str = include_str!("../configs/figure2.toml");
pub const FIGURE2_RIGIDITY: &str = include_str!("../configs/figure2_rigidity.toml");

/// Writes `figure1/`, `figure2/` and `figure2/rigidity/` under `out`.
pub fn reproduce(out: &Path, seed: Option<u64>, radius: Option<f64>) -> Result<(), Failure> {
    let mut f1 = ExperimentConfig::parse(FIGURE1)?;
    f1.out = out_dir(out, "figure1");
    execute(f1.resolve()?)?;

    let mut f2 = ExperimentConfig::parse(FIGURE2)?;
    f2.out = out_dir(out, "figure2");
    adjust(&mut f2, seed, radius)?;
    execute(f2.resolve()?)?;

    let mut rig = ExperimentConfig::parse(FIGURE2_RIGIDITY)?;
    rig.out = out_dir(out, "figure2/rigidity");
    adjust(&mut rig, None, radius)?;
    execute(rig.resolve()?)
}

fn adjust(cfg: &mut ExperimentConfig, seed: Option<u64>, radius: Option<f64>) -> Result<(), Failure> {
    if seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(r) = radius {
        if !(r >= 0.0) {
            return Err(Failure::Config(format!("radius must be nonnegative, got {r}")));
        }
        set_radius(&mut cfg.spec.rule, r);
    }
    Ok(())
}
