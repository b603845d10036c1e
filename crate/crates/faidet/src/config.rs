//! TOML experiment files.
//!
//! A file has a `[system]` table, a `[sweep]` table and optional
//! `[[series]]` tables. Each series overrides any `[system]` key and becomes
//! one curve (one CSV file). Units are spelled out in key names so dB and
//! linear values cannot be mixed up; dBm and dB values are converted once,
//! here.
//!
//! ```toml
//! [system]
//! tx_antennas = 4
//! num_dr = 2
//! num_er = 2
//! ports = 200
//! antenna_size = 0.5
//! power_dbm = 30.0
//! noise_dbm = -50.0
//! sinr_threshold_db = 10.0
//! dr_distance_m = 10.0
//! er_distance_m = 3.0
//! pathloss_exponent = 2.7
//!
//! [sweep]
//! param = "N"
//! values = [1, 10, 50, 200]
//! ```

use std::path::Path;

use faidet_core::sysmodel::{db_to_linear, dbm_to_watts, DataReceiver, EnergyReceiver};
use faidet_core::SystemConfig;
use serde::Deserialize;

use crate::experiments::{SweepParam, SweepSpec};

pub const FIG2: &str = include_str!("../presets/fig2.toml");
pub const FIG3: &str = include_str!("../presets/fig3.toml");
pub const FIG4: &str = include_str!("../presets/fig4.toml");

pub const PRESETS: [(&str, &str); 3] = [("fig2", FIG2), ("fig3", FIG3), ("fig4", FIG4)];

pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("missing required key `{key}` in {table}")]
    Missing { key: &'static str, table: String },
    #[error("invalid value for `{key}` in {table}: {reason}")]
    Invalid { key: &'static str, table: String, reason: String },
    #[error("unknown preset `{0}` (expected fig2, fig3 or fig4)")]
    UnknownPreset(String),
}

/// Keys of `[system]` and of every `[[series]]`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemKeys {
    /// Only meaningful inside `[[series]]`.
    pub name: Option<String>,
    pub tx_antennas: Option<usize>,
    pub num_dr: Option<usize>,
    pub num_er: Option<usize>,
    pub ports: Option<usize>,
    pub antenna_size: Option<f64>,
    pub csi_accuracy: Option<f64>,
    pub power_dbm: Option<f64>,
    pub noise_dbm: Option<f64>,
    pub sinr_threshold_db: Option<f64>,
    pub energy_weight: Option<f64>,
    pub dr_distance_m: Option<f64>,
    pub er_distance_m: Option<f64>,
    pub pathloss_exponent: Option<f64>,
    pub port_stride: Option<usize>,
    pub max_iterations: Option<usize>,
    pub tolerance_w: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepKeys {
    pub param: Option<String>,
    pub values: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub baseline: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub system: Option<SystemKeys>,
    pub sweep: Option<SweepKeys>,
    #[serde(default)]
    pub series: Vec<SystemKeys>,
}

/// Command-line values that win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub baseline: bool,
    pub timing: bool,
}

/// A fully resolved experiment: one sweep per series.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub series: Vec<SweepSpec>,
}

macro_rules! merge {
    ($series:expr, $base:expr, $($field:ident),*) => {
        SystemKeys { name: $series.name.clone(), $($field: $series.$field.or($base.$field)),* }
    };
}

impl SystemKeys {
    fn over(&self, base: &SystemKeys) -> SystemKeys {
        merge!(
            self, base, tx_antennas, num_dr, num_er, ports, antenna_size, csi_accuracy, power_dbm, noise_dbm,
            sinr_threshold_db, energy_weight, dr_distance_m, er_distance_m, pathloss_exponent, port_stride,
            max_iterations, tolerance_w
        )
    }

    fn to_config(&self, table: &str) -> Result<SystemConfig, ConfigError> {
        fn req<T: Copy>(v: Option<T>, key: &'static str, table: &str) -> Result<T, ConfigError> {
            v.ok_or_else(|| ConfigError::Missing { key, table: table.to_string() })
        }
        let w = req(self.antenna_size, "antenna_size", table)?;
        let rho = self.csi_accuracy.unwrap_or(1.0);
        let dr = DataReceiver {
            antenna_size: w,
            csi_accuracy: rho,
            noise_power_w: dbm_to_watts(req(self.noise_dbm, "noise_dbm", table)?),
            sinr_threshold: db_to_linear(req(self.sinr_threshold_db, "sinr_threshold_db", table)?),
            distance_m: req(self.dr_distance_m, "dr_distance_m", table)?,
        };
        let er = EnergyReceiver {
            antenna_size: w,
            csi_accuracy: rho,
            weight: self.energy_weight.unwrap_or(1.0),
            distance_m: req(self.er_distance_m, "er_distance_m", table)?,
        };
        let cfg = SystemConfig {
            tx_antennas: req(self.tx_antennas, "tx_antennas", table)?,
            ports: req(self.ports, "ports", table)?,
            data_receivers: vec![dr; req(self.num_dr, "num_dr", table)?],
            energy_receivers: vec![er; req(self.num_er, "num_er", table)?],
            power_w: dbm_to_watts(req(self.power_dbm, "power_dbm", table)?),
            pathloss_exponent: req(self.pathloss_exponent, "pathloss_exponent", table)?,
            port_stride: self.port_stride.unwrap_or(1),
            max_iterations: self.max_iterations.unwrap_or(30),
            tolerance_w: self.tolerance_w.unwrap_or(1e-6),
        };
        cfg.validate().map_err(|e| ConfigError::Invalid { key: "system", table: table.to_string(), reason: e.to_string() })?;
        Ok(cfg)
    }
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn resolve(&self, name: &str, overrides: &Overrides) -> Result<Experiment, ConfigError> {
        let system = self.system.as_ref().ok_or(ConfigError::Missing { key: "system", table: "the file".into() })?;
        if system.name.is_some() {
            return Err(ConfigError::Invalid { key: "name", table: "[system]".into(), reason: "only series have names".into() });
        }
        let sweep = self.sweep.as_ref().ok_or(ConfigError::Missing { key: "sweep", table: "the file".into() })?;
        let param_name = sweep.param.as_deref().ok_or(ConfigError::Missing { key: "param", table: "[sweep]".into() })?;
        let param: SweepParam = param_name.parse().map_err(|reason| ConfigError::Invalid { key: "param", table: "[sweep]".into(), reason })?;
        let values = sweep.values.clone().ok_or(ConfigError::Missing { key: "values", table: "[sweep]".into() })?;
        if values.is_empty() {
            return Err(ConfigError::Invalid { key: "values", table: "[sweep]".into(), reason: "must not be empty".into() });
        }
        let trials = overrides.trials.or(sweep.trials).unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(ConfigError::Invalid { key: "trials", table: "[sweep]".into(), reason: "must be at least 1".into() });
        }
        let master_seed = overrides.seed.or(sweep.seed).unwrap_or(DEFAULT_SEED);
        let run_baseline = overrides.baseline || sweep.baseline.unwrap_or(false);

        let tables: Vec<(String, String, SystemKeys)> = if self.series.is_empty() {
            vec![(name.to_string(), "[system]".to_string(), system.clone())]
        } else {
            self.series
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let label = s.name.clone().ok_or(ConfigError::Missing { key: "name", table: format!("[[series]] #{}", k + 1) })?;
                    Ok((label.clone(), format!("[[series]] \"{label}\""), s.over(system)))
                })
                .collect::<Result<_, ConfigError>>()?
        };
        let mut seen = std::collections::BTreeSet::new();
        let mut series = Vec::with_capacity(tables.len());
        for (label, table, keys) in tables {
            if !seen.insert(label.clone()) || label.is_empty() || label.contains(['/', '\\']) {
                return Err(ConfigError::Invalid { key: "name", table, reason: format!("`{label}` is empty, repeated or not a file name") });
            }
            let base = keys.to_config(&table)?;
            for &v in &values {
                param.apply(&base, v).map_err(|reason| ConfigError::Invalid { key: "values", table: "[sweep]".into(), reason })?;
            }
            series.push(SweepSpec {
                name: label,
                base,
                param,
                values: values.clone(),
                trials,
                master_seed,
                run_baseline,
                timing: overrides.timing,
            });
        }
        Ok(Experiment { name: name.to_string(), series })
    }
}

pub fn load_file(path: &Path, overrides: &Overrides) -> Result<Experiment, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    ExperimentFile::parse(&text)?.resolve(name, overrides)
}

pub fn load_preset(name: &str, overrides: &Overrides) -> Result<Experiment, ConfigError> {
    let text = PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
    ExperimentFile::parse(text)?.resolve(name, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[system]
tx_antennas = 4
num_dr = 2
num_er = 2
ports = 200
antenna_size = 0.5
power_dbm = 30.0
noise_dbm = -50.0
sinr_threshold_db = 10.0
dr_distance_m = 10.0
er_distance_m = 3.0
pathloss_exponent = 2.7

[sweep]
param = "N"
values = [1, 10]
"#;

    #[test]
    fn minimal_file_matches_the_default_system() {
        let exp = ExperimentFile::parse(MINIMAL).unwrap().resolve("x", &Overrides::default()).unwrap();
        assert_eq!(exp.series.len(), 1);
        let s = &exp.series[0];
        assert_eq!(s.base, SystemConfig::default());
        assert_eq!(s.trials, DEFAULT_TRIALS);
        assert_eq!(s.master_seed, DEFAULT_SEED);
        assert!(!s.run_baseline);
    }

    #[test]
    fn missing_key_is_named() {
        let text = MINIMAL.replace("power_dbm = 30.0\n", "");
        let err = ExperimentFile::parse(&text).unwrap().resolve("x", &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("power_dbm"), "{err}");
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = MINIMAL.replace("ports = 200", "port = 200");
        let err = ExperimentFile::parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("port") && msg.contains("line 6"), "{msg}");
    }

    #[test]
    fn overrides_win() {
        let text = format!("{MINIMAL}trials = 7\nseed = 3\n");
        let o = Overrides { trials: Some(2), seed: Some(9), baseline: true, timing: false };
        let exp = ExperimentFile::parse(&text).unwrap().resolve("x", &o).unwrap();
        assert_eq!((exp.series[0].trials, exp.series[0].master_seed, exp.series[0].run_baseline), (2, 9, true));
    }

    #[test]
    fn series_override_system_keys() {
        let text = format!("{MINIMAL}\n[[series]]\nname = \"a\"\nantenna_size = 0.2\n\n[[series]]\nname = \"b\"\n");
        let exp = ExperimentFile::parse(&text).unwrap().resolve("x", &Overrides::default()).unwrap();
        assert_eq!(exp.series[0].base.data_receivers[0].antenna_size, 0.2);
        assert_eq!(exp.series[1].base.energy_receivers[1].antenna_size, 0.5);
    }

    #[test]
    fn bad_values_are_rejected() {
        for (from, to) in [("values = [1, 10]", "values = [1.5]"), ("values = [1, 10]", "values = []"), ("param = \"N\"", "param = \"Q\"")] {
            let text = MINIMAL.replace(from, to);
            assert!(ExperimentFile::parse(&text).unwrap().resolve("x", &Overrides::default()).is_err(), "{to}");
        }
        let text = MINIMAL.replace("antenna_size = 0.5", "antenna_size = -1.0");
        assert!(ExperimentFile::parse(&text).unwrap().resolve("x", &Overrides::default()).is_err());
    }

    #[test]
    fn presets_resolve() {
        for (name, _) in PRESETS {
            let exp = load_preset(name, &Overrides::default()).unwrap();
            assert!(!exp.series.is_empty(), "{name}");
        }
        assert!(load_preset("fig9", &Overrides::default()).is_err());
    }
}
