use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::Scenario;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::trajectory::setpoint_spec;

/// Every key a scenario file may set.
pub const CONFIG_KEYS: [&str; 26] = [
    "plant.shoulder.b",
    "plant.shoulder.a1",
    "plant.shoulder.a0",
    "plant.elbow.b",
    "plant.elbow.a1",
    "plant.elbow.a0",
    "control.kp_s",
    "control.kd_s",
    "control.kp_e",
    "control.kd_e",
    "control.tau_d",
    "control.rate_hz",
    "geometry.d_se",
    "geometry.d_ew",
    "geometry.theta_s_min",
    "geometry.theta_s_max",
    "geometry.theta_e_min",
    "geometry.theta_e_max",
    "noise.sigma_deg",
    "noise.bias_deg",
    "sim.total_time",
    "sim.seed",
    "sim.sensor_delay_ticks",
    "trajectory.setpoint",
    "trajectory.duration",
    "trajectory.peak_speed",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigValue {
    Number(f64),
    Text(String),
}

/// Flat `section.key → value` view of a TOML scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioConfig {
    pub entries: BTreeMap<String, ConfigValue>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, ConfigValue>) -> Result<()> {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        let value = match v {
            toml::Value::Table(t) => {
                flatten(&key, t, out)?;
                continue;
            }
            toml::Value::Float(f) => ConfigValue::Number(*f),
            toml::Value::Integer(i) => ConfigValue::Number(*i as f64),
            toml::Value::String(s) => ConfigValue::Text(s.clone()),
            other => {
                return Err(Error::Config(format!("{key}: unsupported value {other}")));
            }
        };
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown key {key}")));
        }
        out.insert(key, value);
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut entries = BTreeMap::new();
        flatten("", &table, &mut entries)?;
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(ConfigValue::Number(v)) => Ok(Some(*v)),
            Some(ConfigValue::Text(_)) => Err(Error::Config(format!("{key} must be a number"))),
        }
    }

    pub fn text(&self, key: &str) -> Result<Option<&str>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(ConfigValue::Text(s)) => Ok(Some(s)),
            Some(ConfigValue::Number(_)) => Err(Error::Config(format!("{key} must be a string"))),
        }
    }

    fn count(&self, key: &str) -> Result<Option<u64>> {
        match self.number(key)? {
            Some(v) if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(Some(v as u64)),
            Some(v) => Err(Error::Config(format!("{key} must be a non-negative integer, got {v}"))),
            None => Ok(None),
        }
    }

    /// Overrides the fields of `scn` named in this file.
    pub fn apply<T: Real>(&self, scn: &mut Scenario<T>) -> Result<()> {
        if let Some(label) = self.text("trajectory.setpoint")? {
            scn.spec = setpoint_spec(label)?;
        }
        let set = |key: &str, slot: &mut T| -> Result<()> {
            if let Some(v) = self.number(key)? {
                *slot = T::lit(v);
            }
            Ok(())
        };
        set("trajectory.duration", &mut scn.spec.duration)?;
        set("trajectory.peak_speed", &mut scn.limits.peak_speed)?;
        set("plant.shoulder.b", &mut scn.shoulder.model.b)?;
        set("plant.shoulder.a1", &mut scn.shoulder.model.a1)?;
        set("plant.shoulder.a0", &mut scn.shoulder.model.a0)?;
        set("plant.elbow.b", &mut scn.elbow.model.b)?;
        set("plant.elbow.a1", &mut scn.elbow.model.a1)?;
        set("plant.elbow.a0", &mut scn.elbow.model.a0)?;
        set("control.kp_s", &mut scn.shoulder_gains.kp)?;
        set("control.kd_s", &mut scn.shoulder_gains.kd)?;
        set("control.kp_e", &mut scn.elbow_gains.kp)?;
        set("control.kd_e", &mut scn.elbow_gains.kd)?;
        set("control.tau_d", &mut scn.tau_d)?;
        set("control.rate_hz", &mut scn.rate_hz)?;
        set("geometry.d_se", &mut scn.geometry.d_se)?;
        set("geometry.d_ew", &mut scn.geometry.d_ew)?;
        set("geometry.theta_s_min", &mut scn.geometry.theta_s_min)?;
        set("geometry.theta_s_max", &mut scn.geometry.theta_s_max)?;
        set("geometry.theta_e_min", &mut scn.geometry.theta_e_min)?;
        set("geometry.theta_e_max", &mut scn.geometry.theta_e_max)?;
        set("sim.total_time", &mut scn.total_time)?;
        if let Some(v) = self.number("noise.sigma_deg")? {
            scn.noise.sigma_deg = v;
        }
        if let Some(v) = self.number("noise.bias_deg")? {
            scn.noise.bias_deg = v;
        }
        if let Some(v) = self.count("sim.seed")? {
            scn.seed = v;
        }
        if let Some(v) = self.count("sim.sensor_delay_ticks")? {
            scn.sensor_delay_ticks = v as usize;
        }
        for (gains, name) in [(&scn.shoulder_gains, "shoulder"), (&scn.elbow_gains, "elbow")] {
            if !(gains.kp >= T::zero() && gains.kd >= T::zero()) {
                return Err(Error::Config(format!("{name} gains must be non-negative")));
            }
        }
        Ok(())
    }
}
