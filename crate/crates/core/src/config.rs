//! Scenario configuration.
//!
//! All parameters live in one flat namespace. Files are TOML; nested tables
//! (`frame`, `muting`) can be written as dotted keys such as
//! `frame.subframes = 10`. Overrides use the same dotted paths.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid override `{0}`, expected key=value")]
    Override(String),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// Link model for the serving HeNB -> FUE link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ServingFemtoModel {
    /// Reuse the femto formula `127 + 30 log10(d/1000)` for the serving link.
    #[default]
    FemtoTable,
    /// Same-apartment indoor line-of-sight loss `38.46 + 20 log10(d)`.
    IndoorLos,
}

/// Which algebraic route computes per-victim muted rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateEngine {
    #[default]
    ClosedForm,
    /// Stacked per-victim system solved through `A^T (A A^T)^-1 B`.
    LeastNorm,
    /// Victims x aggressor-HeNB system; the least-norm solution is read as
    /// one rate per HeNB instead of one per victim.
    LeastNormPerHenb,
}

/// LTE radio frame layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    /// Subframes per radio frame.
    pub subframes: usize,
    /// Subframe length in milliseconds.
    pub subframe_duration_ms: f64,
    /// Downlink resource blocks for the system bandwidth.
    pub resource_blocks: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            subframes: 10,
            subframe_duration_ms: 1.0,
            resource_blocks: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutingOptions {
    pub engine: RateEngine,
    /// A HeNB is an aggressor of a victim when it contributes more than this
    /// fraction of the victim's interference-plus-noise.
    pub aggressor_fraction: f64,
    /// First blanked subframe of every coalition pattern.
    pub pattern_offset: usize,
    /// Give each coalition its own offset (coalition index mod subframes)
    /// on top of `pattern_offset`.
    pub stagger_coalitions: bool,
}

impl Default for MutingOptions {
    fn default() -> Self {
        Self {
            engine: RateEngine::ClosedForm,
            aggressor_fraction: 0.05,
            pattern_offset: 0,
            stagger_coalitions: false,
        }
    }
}

/// Parameters of one Monte-Carlo experiment. Defaults follow the usual
/// urban macro/femto parameter set (500 m macro cell, 46/20 dBm, 10 MHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Macro cell radius (m).
    pub macro_radius: f64,
    /// MeNB transmit power (dBm).
    pub menb_power: f64,
    /// HeNB transmit power (dBm).
    pub henb_power: f64,
    /// dBi
    pub menb_antenna_gain: f64,
    /// dBi
    pub mue_antenna_gain: f64,
    /// dBi
    pub henb_antenna_gain: f64,
    /// dBi
    pub fue_antenna_gain: f64,
    pub num_mues: usize,
    pub num_henbs: usize,
    /// System bandwidth (Hz).
    pub bandwidth: f64,
    /// dBm/Hz
    pub thermal_noise_density: f64,
    /// dB
    pub noise_figure: f64,
    /// SINR threshold gamma_0 (dB).
    pub sinr_threshold: f64,
    /// Outdoor wall penetration loss applied to indoor receivers of the MeNB (dB).
    pub outdoor_wall_loss: f64,
    /// dB
    pub shadow_std_macro: f64,
    /// dB
    pub shadow_std_femto: f64,
    pub num_runs: usize,
    pub num_steps: usize,
    /// Mean MUE displacement per step (m).
    pub step_distance: f64,
    pub rng_seed: u64,
    /// Side of the square apartment centered on each HeNB (m).
    pub apartment_side: f64,
    /// Distances below this floor are raised to it before path loss (m).
    pub min_link_distance: f64,
    pub serving_femto_model: ServingFemtoModel,
    pub frame: FrameConfig,
    pub muting: MutingOptions,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            macro_radius: 500.0,
            menb_power: 46.0,
            henb_power: 20.0,
            menb_antenna_gain: 14.0,
            mue_antenna_gain: 0.0,
            henb_antenna_gain: 2.2,
            fue_antenna_gain: 0.0,
            num_mues: 10,
            num_henbs: 40,
            bandwidth: 10e6,
            thermal_noise_density: -174.0,
            noise_figure: 9.0,
            sinr_threshold: 0.0,
            outdoor_wall_loss: 20.0,
            shadow_std_macro: 10.0,
            shadow_std_femto: 8.0,
            num_runs: 2000,
            num_steps: 30,
            step_distance: 10.0,
            rng_seed: 1,
            apartment_side: 10.0,
            min_link_distance: 0.1,
            serving_femto_model: ServingFemtoModel::FemtoTable,
            frame: FrameConfig::default(),
            muting: MutingOptions::default(),
        }
    }
}

fn check(ok: bool, field: &'static str, reason: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            field,
            reason: reason.into(),
        })
    }
}

fn finite(v: f64, field: &'static str) -> Result<(), ConfigError> {
    check(v.is_finite(), field, format!("{v} is not a finite number"))
}

impl ScenarioConfig {
    /// Parse a TOML document and validate it.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parse a TOML document, apply `key=value` overrides (dotted keys), and
    /// validate the result.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let cfg: ScenarioConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (v, f) in [
            (self.macro_radius, "macro_radius"),
            (self.menb_power, "menb_power"),
            (self.henb_power, "henb_power"),
            (self.menb_antenna_gain, "menb_antenna_gain"),
            (self.mue_antenna_gain, "mue_antenna_gain"),
            (self.henb_antenna_gain, "henb_antenna_gain"),
            (self.fue_antenna_gain, "fue_antenna_gain"),
            (self.bandwidth, "bandwidth"),
            (self.thermal_noise_density, "thermal_noise_density"),
            (self.noise_figure, "noise_figure"),
            (self.sinr_threshold, "sinr_threshold"),
            (self.outdoor_wall_loss, "outdoor_wall_loss"),
            (self.shadow_std_macro, "shadow_std_macro"),
            (self.shadow_std_femto, "shadow_std_femto"),
            (self.step_distance, "step_distance"),
            (self.apartment_side, "apartment_side"),
            (self.min_link_distance, "min_link_distance"),
            (self.muting.aggressor_fraction, "muting.aggressor_fraction"),
            (self.frame.subframe_duration_ms, "frame.subframe_duration_ms"),
        ] {
            finite(v, f)?;
        }
        check(self.macro_radius > 0.0, "macro_radius", "must be > 0")?;
        check(self.num_mues >= 1, "num_mues", "must be >= 1")?;
        check(self.bandwidth > 0.0, "bandwidth", "must be > 0")?;
        check(self.shadow_std_macro >= 0.0, "shadow_std_macro", "must be >= 0")?;
        check(self.shadow_std_femto >= 0.0, "shadow_std_femto", "must be >= 0")?;
        check(self.outdoor_wall_loss >= 0.0, "outdoor_wall_loss", "must be >= 0")?;
        check(self.num_runs >= 1, "num_runs", "must be >= 1")?;
        check(self.step_distance >= 0.0, "step_distance", "must be >= 0")?;
        check(
            self.apartment_side > 0.0 && self.apartment_side < self.macro_radius,
            "apartment_side",
            "must be > 0 and smaller than macro_radius",
        )?;
        check(self.min_link_distance > 0.0, "min_link_distance", "must be > 0")?;
        check(
            self.muting.aggressor_fraction >= 0.0,
            "muting.aggressor_fraction",
            "must be >= 0",
        )?;
        check(self.frame.subframes >= 1, "frame.subframes", "must be >= 1")?;
        check(self.frame.resource_blocks >= 1, "frame.resource_blocks", "must be >= 1")?;
        check(
            self.frame.subframe_duration_ms > 0.0,
            "frame.subframe_duration_ms",
            "must be > 0",
        )?;
        Ok(())
    }

    /// Linear SINR threshold.
    pub fn gamma0(&self) -> f64 {
        crate::units::db_to_linear(self.sinr_threshold)
    }
}

/// Set `path = value` inside a TOML table, creating intermediate tables.
/// The value is parsed as a TOML literal; bare words fall back to strings.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), ConfigError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(item.to_string()))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(ConfigError::Override(item.to_string()));
    }
    let value = parse_value(raw);
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut cursor = table;
    for part in parts {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(item.to_string()))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
