//! TOML run configuration.
//!
//! ```toml
//! [params]
//! v_m = 5.0
//! eps_ch = 0.02
//! eta_ch = { start = 0.0, stop = 30.0, points = 61, scale = "db" }
//!
//! [modulator]
//! rho_db = 3.0
//! k_floor = 0.0631
//! rho_convention = "amplitude10"
//!
//! [outputs]
//! direction = "rr"
//! optimize_vm = true
//!
//! [mc]
//! n = 1000000
//! seed = 42
//! ```
//!
//! Unknown keys are rejected. Any scalar parameter may be a sweep, but a run
//! has at most one sweep axis.

use std::path::{Path, PathBuf};

use cvleak_core::modulator::{default_k_floor, rho_to_k};
use cvleak_core::{ProtocolParams, RhoConvention};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    /// Attenuation in dB; the parameter is `10^(-x/10)`. Only for
    /// transmittances.
    Db,
    /// Geometric spacing.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default = "linear")]
    pub scale: Scale,
}

fn linear() -> Scale {
    Scale::Linear
}

impl SweepSpec {
    /// Sweep coordinates as written in the config (dB for `db`).
    pub fn coordinates(&self) -> Vec<f64> {
        let n = self.points;
        if n == 1 {
            return vec![self.start];
        }
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                match self.scale {
                    Scale::Linear | Scale::Db => self.start + t * (self.stop - self.start),
                    Scale::Log => (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp(),
                }
            })
            .collect()
    }

    /// Parameter value at a sweep coordinate.
    pub fn value_at(&self, x: f64) -> f64 {
        match self.scale {
            Scale::Db => 10f64.powf(-x / 10.0),
            _ => x,
        }
    }

    fn validate(&self, key: &str) -> Result<(), CliError> {
        if self.points == 0 {
            return Err(CliError::config(key, "sweep needs at least one point"));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(CliError::config(key, "sweep bounds must be finite"));
        }
        if self.scale == Scale::Log && !(self.start > 0.0 && self.stop > 0.0) {
            return Err(CliError::config(key, "log sweep bounds must be > 0"));
        }
        if self.scale == Scale::Db && !(self.start >= 0.0 && self.stop >= 0.0) {
            return Err(CliError::config(key, "attenuation in dB must be >= 0"));
        }
        Ok(())
    }
}

/// A fixed value or a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Fixed(f64),
    Sweep(SweepSpec),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_m: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_ch: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_ch: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_d: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_d: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_p1: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_p2: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_l: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_size: Option<u64>,
}

impl ParamsBlock {
    fn fields(&self) -> [(&'static str, Option<Value>); 10] {
        [
            ("v_m", self.v_m),
            ("k", self.k),
            ("eta_ch", self.eta_ch),
            ("eps_ch", self.eps_ch),
            ("eta_d", self.eta_d),
            ("eps_d", self.eps_d),
            ("eps_p1", self.eps_p1),
            ("eps_p2", self.eps_p2),
            ("eps_l", self.eps_l),
            ("beta", self.beta),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulatorBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_db: Option<Value>,
    #[serde(default = "default_k_floor")]
    pub k_floor: f64,
    #[serde(default)]
    pub rho_convention: RhoConvention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DirectionSel {
    Dr,
    Rr,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<DirectionSel>,
    #[serde(default)]
    pub optimize_vm: bool,
    #[serde(default)]
    pub with_eta_max: bool,
}

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;
pub const DEFAULT_MC_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    #[serde(default = "default_mc_samples")]
    pub n: usize,
    #[serde(default = "default_mc_seed")]
    pub seed: u64,
    #[serde(default)]
    pub v_m_known: bool,
    #[serde(default)]
    pub assume_no_leakage: bool,
}

fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

fn default_mc_seed() -> u64 {
    DEFAULT_MC_SEED
}

impl Default for McBlock {
    fn default() -> Self {
        Self {
            n: DEFAULT_MC_SAMPLES,
            seed: DEFAULT_MC_SEED,
            v_m_known: false,
            assume_no_leakage: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub params: ParamsBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulator: Option<ModulatorBlock>,
    #[serde(default)]
    pub outputs: OutputsBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McBlock>,
}

/// The single swept quantity of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepAxis {
    pub key: &'static str,
    pub spec: SweepSpec,
}

/// One resolved point of a run: the sweep coordinate (if any) and the
/// protocol parameters it maps to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub coordinate: Option<f64>,
    pub params: ProtocolParams,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.message().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    fn validate(&self) -> Result<(), CliError> {
        let mut sweeps = Vec::new();
        for (key, v) in self.params.fields() {
            if let Some(Value::Sweep(s)) = v {
                s.validate(key)?;
                if s.scale == Scale::Db && key != "eta_ch" && key != "eta_d" {
                    return Err(CliError::config(key, "dB scale applies only to eta_ch and eta_d"));
                }
                sweeps.push(key);
            }
        }
        if let Some(m) = &self.modulator {
            if !(0.0..1.0).contains(&m.k_floor) {
                return Err(CliError::config("modulator.k_floor", "must be in [0, 1)"));
            }
            match m.rho_db {
                Some(Value::Sweep(s)) => {
                    s.validate("modulator.rho_db")?;
                    if s.scale == Scale::Db {
                        return Err(CliError::config("modulator.rho_db", "rho is already in dB; use a linear scale"));
                    }
                    sweeps.push("modulator.rho_db");
                }
                Some(Value::Fixed(_)) | None => {}
            }
            if m.rho_db.is_some() && self.params.k.is_some() {
                return Err(CliError::config("params.k", "set either params.k or modulator.rho_db, not both"));
            }
        }
        if sweeps.len() > 1 {
            return Err(CliError::Config(format!("more than one sweep axis: {}", sweeps.join(", "))));
        }
        if let Some(mc) = &self.mc {
            if mc.n < cvleak_core::estimation::MIN_SAMPLES {
                return Err(CliError::config(
                    "mc.n",
                    &format!("needs at least {} samples", cvleak_core::estimation::MIN_SAMPLES),
                ));
            }
        }
        Ok(())
    }

    pub fn sweep_axis(&self) -> Option<SweepAxis> {
        let from_params = self.params.fields().into_iter().find_map(|(key, v)| match v {
            Some(Value::Sweep(spec)) => Some(SweepAxis { key, spec }),
            _ => None,
        });
        from_params.or_else(|| match self.modulator.as_ref()?.rho_db {
            Some(Value::Sweep(spec)) => Some(SweepAxis {
                key: "rho_db",
                spec,
            }),
            _ => None,
        })
    }

    /// Parameters with every field at its fixed value, the sweep axis (if any)
    /// set to `coordinate`.
    fn params_at(&self, coordinate: Option<f64>) -> Result<ProtocolParams, CliError> {
        let mut p = ProtocolParams::default();
        let pick = |v: Option<Value>, default: f64| -> f64 {
            match v {
                None => default,
                Some(Value::Fixed(x)) => x,
                Some(Value::Sweep(s)) => s.value_at(coordinate.unwrap_or(s.start)),
            }
        };
        let b = &self.params;
        p.v_m = pick(b.v_m, p.v_m);
        p.k = pick(b.k, p.k);
        p.eta_ch = pick(b.eta_ch, p.eta_ch);
        p.eps_ch = pick(b.eps_ch, p.eps_ch);
        p.eta_d = pick(b.eta_d, p.eta_d);
        p.eps_d = pick(b.eps_d, p.eps_d);
        p.eps_p1 = pick(b.eps_p1, p.eps_p1);
        p.eps_p2 = pick(b.eps_p2, p.eps_p2);
        p.eps_l = pick(b.eps_l, p.eps_l);
        p.beta = pick(b.beta, p.beta);
        p.block_size = b.block_size.unwrap_or(p.block_size);
        if let Some(m) = &self.modulator {
            if let Some(rho) = m.rho_db {
                p.k = rho_to_k(pick(Some(rho), 0.0), m.k_floor, m.rho_convention)?;
            }
        }
        p.validate()?;
        Ok(p)
    }

    /// All points of the run, in sweep order. Without a sweep axis this is
    /// a single point.
    pub fn points(&self) -> Result<Vec<Point>, CliError> {
        match self.sweep_axis() {
            None => Ok(vec![Point {
                coordinate: None,
                params: self.params_at(None)?,
            }]),
            Some(axis) => axis
                .spec
                .coordinates()
                .into_iter()
                .map(|x| {
                    Ok(Point {
                        coordinate: Some(x),
                        params: self.params_at(Some(x))?,
                    })
                })
                .collect(),
        }
    }

    /// The single fixed parameter set of a run without sweeps.
    pub fn fixed_params(&self) -> Result<ProtocolParams, CliError> {
        if let Some(axis) = self.sweep_axis() {
            return Err(CliError::config(axis.key, "this command takes fixed parameters, not a sweep"));
        }
        self.params_at(None)
    }
}
