//! Run configuration: command-line flags over a JSON config file over
//! built-in defaults, field by field.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use trackhhl::event::EventFormat;
use trackhhl::ising::Hyperparams;
use trackhhl::toy::ToyConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    #[default]
    Classical,
    HhlOracle,
    HhlCircuit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for EventFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => EventFormat::Json,
            FormatArg::Csv => EventFormat::Csv,
        }
    }
}

/// Every field optional; used both for flags and for the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub epsilon: Option<f64>,
    pub lambda: Option<u32>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub threshold: Option<f64>,
    pub layers: Option<usize>,
    pub particles: Option<usize>,
    pub events: Option<usize>,
    pub seed: Option<u64>,
    pub layer_spacing: Option<f64>,
    pub half_aperture_x: Option<f64>,
    pub half_aperture_y: Option<f64>,
    pub smear_sigma: Option<f64>,
    pub hit_efficiency: Option<f64>,
    pub mode: Option<SolverMode>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: Option<EventFormat>,
}

impl PartialConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
    }

    /// Field-wise `self` if set, else `fallback`.
    pub fn or(self, fallback: PartialConfig) -> PartialConfig {
        PartialConfig {
            epsilon: self.epsilon.or(fallback.epsilon),
            lambda: self.lambda.or(fallback.lambda),
            alpha: self.alpha.or(fallback.alpha),
            beta: self.beta.or(fallback.beta),
            gamma: self.gamma.or(fallback.gamma),
            delta: self.delta.or(fallback.delta),
            threshold: self.threshold.or(fallback.threshold),
            layers: self.layers.or(fallback.layers),
            particles: self.particles.or(fallback.particles),
            events: self.events.or(fallback.events),
            seed: self.seed.or(fallback.seed),
            layer_spacing: self.layer_spacing.or(fallback.layer_spacing),
            half_aperture_x: self.half_aperture_x.or(fallback.half_aperture_x),
            half_aperture_y: self.half_aperture_y.or(fallback.half_aperture_y),
            smear_sigma: self.smear_sigma.or(fallback.smear_sigma),
            hit_efficiency: self.hit_efficiency.or(fallback.hit_efficiency),
            mode: self.mode.or(fallback.mode),
            input: self.input.or(fallback.input),
            output: self.output.or(fallback.output),
            format: self.format.or(fallback.format),
        }
    }

    /// Fills anything still unset from the built-in defaults.
    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let hd = Hyperparams::default();
        let td = ToyConfig::default();
        let hp = Hyperparams {
            epsilon: self.epsilon.unwrap_or(hd.epsilon),
            lambda: self.lambda.unwrap_or(hd.lambda),
            alpha: self.alpha.unwrap_or(hd.alpha),
            beta: self.beta.unwrap_or(hd.beta),
            gamma: self.gamma.unwrap_or(hd.gamma),
            delta: self.delta.unwrap_or(hd.delta),
            threshold: self.threshold.unwrap_or(hd.threshold),
        };
        hp.validate()?;
        let toy = ToyConfig {
            n_layers: self.layers.unwrap_or(td.n_layers),
            n_particles: self.particles.unwrap_or(td.n_particles),
            layer_spacing: self.layer_spacing.unwrap_or(td.layer_spacing),
            half_aperture_x: self.half_aperture_x.unwrap_or(td.half_aperture_x),
            half_aperture_y: self.half_aperture_y.unwrap_or(td.half_aperture_y),
            smear_sigma: self.smear_sigma.unwrap_or(td.smear_sigma),
            hit_efficiency: self.hit_efficiency.unwrap_or(td.hit_efficiency),
            rng_seed: self.seed.unwrap_or(td.rng_seed),
        };
        toy.validate()?;
        Ok(RunConfig {
            hp,
            toy,
            mode: self.mode.unwrap_or_default(),
            n_events: self.events.unwrap_or(DEFAULT_EVENTS),
            input: self.input,
            output: self.output,
            format: self.format.unwrap_or(EventFormat::Json),
        })
    }
}

pub const DEFAULT_EVENTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub hp: Hyperparams,
    pub toy: ToyConfig,
    pub mode: SolverMode,
    pub n_events: usize,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: EventFormat,
}

/// Hyper-parameter flags plus the config file, shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct HyperArgs {
    /// JSON file whose keys are the flag names (snake_case)
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub lambda: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
}

impl HyperArgs {
    fn as_partial(&self) -> PartialConfig {
        PartialConfig {
            epsilon: self.epsilon,
            lambda: self.lambda,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            delta: self.delta,
            threshold: self.threshold,
            ..Default::default()
        }
    }

    fn file(&self) -> Result<PartialConfig, CliError> {
        match &self.config {
            Some(path) => PartialConfig::from_file(path),
            None => Ok(PartialConfig::default()),
        }
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        self.as_partial().or(self.file()?).resolve()
    }
}

/// Flags of the event pipeline subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub events: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<SolverMode>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

impl ConfigArgs {
    fn as_partial(&self) -> PartialConfig {
        PartialConfig {
            layers: self.layers,
            particles: self.particles,
            events: self.events,
            seed: self.seed,
            mode: self.mode,
            input: self.input.clone(),
            output: self.output.clone(),
            format: self.format.map(Into::into),
            ..self.hyper.as_partial()
        }
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        self.as_partial().or(self.hyper.file()?).resolve()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(k: f64) -> PartialConfig {
        PartialConfig {
            epsilon: Some(1e-3 * k),
            lambda: Some(k as u32),
            alpha: Some(k),
            beta: Some(k),
            gamma: Some(k),
            delta: Some(k),
            threshold: Some(0.1 * k),
            layers: Some(k as usize + 2),
            particles: Some(k as usize),
            events: Some(k as usize),
            seed: Some(k as u64),
            layer_spacing: Some(10.0 * k),
            half_aperture_x: Some(10.0 * k),
            half_aperture_y: Some(10.0 * k),
            smear_sigma: Some(0.1 * k),
            hit_efficiency: Some(0.1 * k),
            mode: Some(if k == 1.0 {
                SolverMode::HhlOracle
            } else {
                SolverMode::HhlCircuit
            }),
            input: Some(format!("in{k}").into()),
            output: Some(format!("out{k}").into()),
            format: Some(if k == 1.0 {
                EventFormat::Csv
            } else {
                EventFormat::Json
            }),
        }
    }

    #[test]
    fn flag_beats_file_beats_default_for_every_field() {
        let (flag, file) = (full(1.0), full(2.0));
        assert_eq!(flag.clone().or(file.clone()), flag);
        assert_eq!(PartialConfig::default().or(file.clone()), file);

        // round-trip through JSON keys so the file names match the flag names
        let json = serde_json::to_string(&file).unwrap();
        let parsed: PartialConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, file);

        let defaults = PartialConfig::default().resolve().unwrap();
        assert_eq!(defaults.hp, Hyperparams::default());
        assert_eq!(defaults.toy, ToyConfig::default());
        assert_eq!(defaults.mode, SolverMode::Classical);
        assert_eq!(defaults.n_events, DEFAULT_EVENTS);
        assert_eq!(defaults.format, EventFormat::Json);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        assert!(serde_json::from_str::<PartialConfig>(r#"{"gama": 1}"#).is_err());
        let bad = PartialConfig {
            hit_efficiency: Some(2.0),
            ..Default::default()
        };
        assert!(bad.resolve().is_err());
    }
}
