//! Named experiment configurations matching the published tables.

use crate::error::{Error, Result};
use crate::experiments::config::{Design, ExperimentConfig, Hypothesis, Method};

pub const PRESET_NAMES: [&str; 4] = ["table1", "table2", "table3", "table5"];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig {
        replicates: 1000,
        ..Default::default()
    };
    match name {
        "table1" => {
            cfg.design = Design::BoundedMean;
            cfg.data.n = vec![1000];
            cfg.privacy.epsilon = vec![0.95, 0.05];
            cfg.methods = vec![Method::PumbaDraws, Method::PumbaMeancov, Method::WangOracle, Method::WangPlugin, Method::NonDp];
        }
        "table2" => {
            cfg.design = Design::LinregSsp;
            cfg.data.n = vec![30, 100, 300, 1000];
            cfg.privacy.epsilon = vec![1.0];
            cfg.methods = vec![Method::Naive, Method::DaMcmc, Method::PumbaDraws];
        }
        "table3" | "table5" => {
            cfg.design = if name == "table3" { Design::CountyLinear } else { Design::CountyLogistic };
            cfg.replicates = 300;
            cfg.privacy.epsilon = vec![0.25];
            cfg.county.hypothesis = Hypothesis::Null;
            cfg.methods = vec![Method::NonDp, Method::PumbaMeancov];
        }
        other => {
            return Err(Error::Config(format!("unknown preset '{other}', expected one of {}", PRESET_NAMES.join(", "))));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for name in PRESET_NAMES {
            preset(name).unwrap();
        }
        assert!(preset("table4").is_err());
    }
}
