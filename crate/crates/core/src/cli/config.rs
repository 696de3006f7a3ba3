use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AfcBank, HomSetup, LinkParams, PulseSpec, RateParams};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRIALS: u64 = 1_000_000;

/// Everything a run needs. Missing fields take the reference-experiment
/// defaults, so an empty JSON object is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub setup: HomSetup,
    /// Comb banks of channel 1 and channel 2.
    pub banks: (AfcBank, AfcBank),
    pub pulse: PulseSpec,
    pub rate_params: RateParams,
    pub link_params: LinkParams,
    pub seed: u64,
    pub trials: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            setup: HomSetup::default(),
            banks: (AfcBank::default(), AfcBank::default()),
            pulse: PulseSpec::default(),
            rate_params: RateParams::default(),
            link_params: LinkParams::default(),
            seed: DEFAULT_SEED,
            trials: DEFAULT_TRIALS,
        }
    }
}

impl RunConfig {
    /// Parses and checks a JSON document. Embedded values are validated as
    /// they are deserialized.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        config.check()?;
        Ok(config)
    }

    /// Reads `path`, or standard input when `path` is `-`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = if path.as_os_str() == "-" {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Error::Config(format!("cannot read configuration from stdin: {e}")))?;
            s
        } else {
            std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?
        };
        Self::from_json(&text)
    }

    pub fn check(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn defaults_carry_the_experiment() {
        let c = RunConfig::default();
        assert_eq!(c.setup.mu_a(), 0.064);
        assert_eq!(c.setup.det_c().efficiency(), 0.47);
        assert_eq!(c.setup.det_c().dark_count_prob(), 1.5e-4);
        assert_eq!(c.setup.pol_mismatch(), 3.0);
        assert_eq!(c.pulse.fwhm_duration(), 100.0);
        assert_eq!(c.banks.0.modes()[2].comb_spacing(), 0.652);
        assert_eq!(c.banks.1.mode_spacing(), 100.0);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for bad in [
            r#"{"trials": 0}"#,
            r#"{"setup": {"mu_a": -1}}"#,
            r#"{"speed": 3}"#,
            r#"{"pulse": {"fwhm_duration": 0, "mean_photons_per_mode": 0.1, "mode_count": 3}}"#,
            "not json",
        ] {
            assert!(matches!(RunConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
