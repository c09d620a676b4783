//! The run-configuration file.
//!
//! A single TOML file drives every subcommand. All sections and keys are
//! optional; an empty file means the noiseless default experiment at
//! 10^4 trials with seed 42. Unknown keys are rejected, and parse or
//! range errors carry the offending line.
//!
//! ```toml
//! [noise]
//! alpha_mode = 0.5          # weight in [0, 1], or "uniform"
//! sigma_theta = 0.0         # emission phase jitter, radians
//! delta_phi = 0.0           # decoding basis offset, radians
//! t_s = 0.0                 # storage time
//! t_m = 1.0                 # memory lifetime, same units
//! f_bsm = 1.0               # Bell measurement fidelity
//! p_loss = 0.0              # per-attempt photon loss
//! max_repetitions = 20      # attempt budget per transmission
//!
//! [protocol]
//! delta_mode = true         # jitter the phase difference, not each emission
//! bsm_model = "readout"     # or "depolarizing"
//! active_correction = true
//! swap_variant = false
//! phi1 = "random"           # or a fixed angle in radians
//!
//! [run]
//! trials = 10000
//! seed = 42
//! threads = 0               # 0 lets the thread pool decide
//! n_rounds = 10             # rounds in the n-round forgery bound
//!
//! [sweep]                   # only consulted by the sweep subcommand
//! parameter = "t_s"         # any [noise] key name, or "alpha"
//! values = [0.0, 1.0, 2.0, 3.0]
//!
//! [forge]                   # only consulted by the forge subcommand
//! strategy = "blind_guess"  # or "random_state", "intercept_p2"
//!
//! [output]
//! path = "sweep.csv"        # omit to print reports to stdout
//! format = "csv"            # or "json"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryStrategy;
use crate::error::{Error, Result};
use crate::harness::{SweepParameter, SweepSpec};
use crate::noise::{BsmModel, NoiseConfig};
use crate::protocol::{PhiMode, ProtocolConfig};

/// How tables and reports are rendered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// The `[protocol]` section: run options that are not noise parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub delta_mode: bool,
    pub bsm_model: BsmModel,
    pub active_correction: bool,
    pub swap_variant: bool,
    pub phi1: PhiMode,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let base = ProtocolConfig::default();
        ProtocolSection {
            delta_mode: base.delta_mode,
            bsm_model: base.bsm_model,
            active_correction: base.active_correction,
            swap_variant: base.swap_variant,
            phi1: base.phi1,
        }
    }
}

/// The `[run]` section: execution budget shared by all subcommands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; 0 leaves the choice to the thread pool.
    pub threads: usize,
    /// Rounds in the n-round forgery acceptance bound.
    pub n_rounds: u32,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { trials: 10_000, seed: 42, threads: 0, n_rounds: 10 }
    }
}

/// The `[sweep]` section: which knob to scan and where. The trial
/// budget and seed come from `[run]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// The `[forge]` section: which adversary to run. Rounds, trials, and
/// seed come from `[run]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForgeSection {
    pub strategy: AdversaryStrategy,
}

impl Default for ForgeSection {
    fn default() -> Self {
        ForgeSection { strategy: AdversaryStrategy::BlindGuess }
    }
}

/// The `[output]` section.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Destination file. Reports fall back to stdout, sweep tables to
    /// `sweep.csv` or `sweep.json`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

/// Everything a subcommand needs, straight from one file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfiguration {
    pub noise: NoiseConfig,
    pub protocol: ProtocolSection,
    pub run: RunSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    pub forge: ForgeSection,
    pub output: OutputSection,
}

impl RunConfiguration {
    /// Parses and range-checks configuration text. Syntax and type
    /// errors report the offending line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfiguration =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Renders the configuration back to TOML. Feeding the output to
    /// [`Self::from_toml`] reproduces the same configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol_config().validate()?;
        if self.run.trials < 1 {
            return Err(Error::ParameterOutOfRange {
                name: "trials",
                value: self.run.trials as f64,
            });
        }
        if self.run.n_rounds < 1 {
            return Err(Error::ParameterOutOfRange {
                name: "n_rounds",
                value: self.run.n_rounds as f64,
            });
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::EmptySweep);
            }
        }
        Ok(())
    }

    /// The physics configuration the library functions consume.
    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            noise: self.noise,
            delta_mode: self.protocol.delta_mode,
            bsm_model: self.protocol.bsm_model,
            active_correction: self.protocol.active_correction,
            swap_variant: self.protocol.swap_variant,
            phi1: self.protocol.phi1,
            ..ProtocolConfig::default()
        }
    }

    /// The sweep grid with the execution budget filled in from `[run]`.
    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let section = self.sweep.as_ref().ok_or_else(|| {
            Error::Config("sweeping needs a [sweep] section with `parameter` and `values`".into())
        })?;
        let spec = SweepSpec {
            parameter: section.parameter,
            values: section.values.clone(),
            trials: self.run.trials,
            seed: self.run.seed,
            n_rounds: self.run.n_rounds,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::AlphaMode;

    #[test]
    fn empty_file_is_the_default_configuration() {
        let config = RunConfiguration::from_toml("").unwrap();
        assert_eq!(config, RunConfiguration::default());
        assert_eq!(config.run.trials, 10_000);
        assert_eq!(config.run.seed, 42);
        assert!(config.noise.is_noiseless());
        assert_eq!(config.output.format, OutputFormat::Csv);
    }

    #[test]
    fn parse_serialize_parse_is_identity() {
        let text = r#"
            [noise]
            alpha_mode = "uniform"
            sigma_theta = 0.3
            delta_phi = 0.2
            t_s = 1.5
            t_m = 2.0
            f_bsm = 0.95
            p_loss = 0.1
            max_repetitions = 8

            [protocol]
            delta_mode = false
            bsm_model = "depolarizing"
            active_correction = true
            swap_variant = true
            phi1 = 1.25

            [run]
            trials = 500
            seed = 7
            threads = 2
            n_rounds = 5

            [sweep]
            parameter = "t_s"
            values = [0.0, 0.5, 1.0]

            [forge]
            strategy = "intercept_p2"

            [output]
            path = "table.json"
            format = "json"
        "#;
        let parsed = RunConfiguration::from_toml(text).unwrap();
        let reparsed = RunConfiguration::from_toml(&parsed.to_toml()).unwrap();
        assert_eq!(parsed, reparsed);
    }

    #[test]
    fn default_round_trips_through_toml() {
        let config = RunConfiguration::default();
        let reparsed = RunConfiguration::from_toml(&config.to_toml()).unwrap();
        assert_eq!(config, reparsed);
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let text = "[run]\ntrials = \"many\"\n";
        let err = RunConfiguration::from_toml(text).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("line 2"), "no line number in: {message}");
        assert!(message.contains("trials"), "no key name in: {message}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfiguration::from_toml("[noise]\nsigma = 0.1\n").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("sigma"), "unknown key not named in: {message}");
    }

    #[test]
    fn out_of_range_values_are_rejected_at_parse_time() {
        let err = RunConfiguration::from_toml("[noise]\nalpha_mode = 1.5\n").unwrap_err();
        assert!(matches!(err, Error::ParameterOutOfRange { name: "alpha_mode", .. }));
        let err = RunConfiguration::from_toml("[run]\ntrials = 0\n").unwrap_err();
        assert!(matches!(err, Error::ParameterOutOfRange { name: "trials", .. }));
    }

    #[test]
    fn alpha_and_phi_accept_both_spellings() {
        let config = RunConfiguration::from_toml(
            "[noise]\nalpha_mode = 0.3\n\n[protocol]\nphi1 = \"random\"\n",
        )
        .unwrap();
        assert_eq!(config.noise.alpha_mode, AlphaMode::Fixed(0.3));
        assert_eq!(config.protocol.phi1, PhiMode::Random);

        let config = RunConfiguration::from_toml(
            "[noise]\nalpha_mode = \"uniform\"\n\n[protocol]\nphi1 = 0.7\n",
        )
        .unwrap();
        assert_eq!(config.noise.alpha_mode, AlphaMode::Uniform);
        assert_eq!(config.protocol.phi1, PhiMode::Fixed(0.7));
    }

    #[test]
    fn protocol_config_assembles_both_sections() {
        let config = RunConfiguration::from_toml(
            "[noise]\nsigma_theta = 0.4\n\n[protocol]\ndelta_mode = false\n",
        )
        .unwrap();
        let protocol = config.protocol_config();
        assert_eq!(protocol.noise.sigma_theta, 0.4);
        assert!(!protocol.delta_mode);
        assert!(protocol.active_correction);
    }

    #[test]
    fn sweep_spec_takes_its_budget_from_the_run_section() {
        let config = RunConfiguration::from_toml(
            "[run]\ntrials = 250\nseed = 9\nn_rounds = 3\n\n\
             [sweep]\nparameter = \"f_bsm\"\nvalues = [1.0, 0.9]\n",
        )
        .unwrap();
        let spec = config.sweep_spec().unwrap();
        assert_eq!(spec.parameter, SweepParameter::BsmFidelity);
        assert_eq!(spec.values, vec![1.0, 0.9]);
        assert_eq!(spec.trials, 250);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.n_rounds, 3);
    }

    #[test]
    fn missing_or_empty_sweep_sections_are_errors() {
        let config = RunConfiguration::from_toml("").unwrap();
        assert!(matches!(config.sweep_spec(), Err(Error::Config(_))));

        let err = RunConfiguration::from_toml("[sweep]\nparameter = \"t_s\"\nvalues = []\n")
            .unwrap_err();
        assert!(matches!(err, Error::EmptySweep));
    }
}
