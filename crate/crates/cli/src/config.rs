//! Run configuration: a JSON document with every field defaulted, plus flag
//! overrides applied on top.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use colltherm::engine::ChainConfig;
use colltherm::model::{ancilla_ground, ancilla_plus_x, CollisionSpec, EnvironmentParams, InteractionKind};
use colltherm::wtd::{WtdKind, WtdSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Largest chain a config may request. The engine guard is higher, but
/// figure sweeps at this size already take minutes.
pub const MAX_ANCILLAS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interaction {
    Zz,
    Swap,
}

impl From<Interaction> for InteractionKind {
    fn from(i: Interaction) -> Self {
        match i {
            Interaction::Zz => InteractionKind::Zz,
            Interaction::Swap => InteractionKind::Swap,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ancilla {
    PlusX,
    Ground,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WtdFamily {
    Deterministic,
    Exponential,
    Weibull,
    Erlang,
}

/// One sweep axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub log: bool,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    return self.max;
                }
                let s = i as f64 / (n - 1) as f64;
                if self.log {
                    self.min * (self.max / self.min).powf(s)
                } else {
                    self.min + (self.max - self.min) * s
                }
            })
            .collect()
    }

    fn validate(&self, name: &str) -> Result<(), CliError> {
        if self.points < 2 {
            return Err(CliError::config(format!("{name}: grid needs at least 2 points")));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(CliError::config(format!("{name}: need finite min < max")));
        }
        if self.log && !(self.min > 0.0) {
            return Err(CliError::config(format!("{name}: log grid needs min > 0")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WtdConfig {
    pub kind: WtdFamily,
    /// Weibull k or Erlang order.
    pub shape: f64,
}

/// Everything a command needs. Times are in units of 1/γ once multiplied by
/// `gamma`; sweeps run over the dimensionless product γτ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub interaction: Interaction,
    pub g_tau: f64,
    /// Defaults to |+x⟩ for ZZ and |g⟩ for swap.
    pub ancilla: Option<Ancilla>,
    pub nbar: f64,
    pub gamma: f64,
    /// Mean γτ between collisions for single-point commands.
    pub gamma_tau: f64,
    pub wtd: WtdConfig,
    pub n_ancillas: usize,
    pub gamma_tau_grid: GridSpec,
    pub nbar_grid: GridSpec,
    /// Weibull shapes drawn in the waiting-time family figure.
    pub fig3_k: Vec<f64>,
    /// Points per density curve in the family figure inset.
    pub inset_points: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            interaction: Interaction::Zz,
            g_tau: FRAC_PI_2,
            ancilla: None,
            nbar: 2.0,
            gamma: 1.0,
            gamma_tau: 1.0,
            wtd: WtdConfig { kind: WtdFamily::Weibull, shape: 1.0 },
            n_ancillas: 2,
            gamma_tau_grid: GridSpec { min: 1e-2, max: 10.0, points: 48, log: true },
            nbar_grid: GridSpec { min: 0.1, max: 3.0, points: 48, log: false },
            fig3_k: vec![0.5, 1.0, 2.0, 5.0, 50.0],
            inset_points: 2001,
            mc_samples: 2000,
            seed: 0,
        }
    }
}

/// Flag values that replace JSON fields when present.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub nbar: Option<f64>,
    pub gamma_tau: Option<f64>,
    pub k: Option<f64>,
    pub n_ancillas: Option<usize>,
    pub interaction: Option<Interaction>,
    pub g_tau: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("bad config: {e}")))
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.nbar {
            self.nbar = v;
        }
        if let Some(v) = o.gamma_tau {
            self.gamma_tau = v;
        }
        if let Some(v) = o.k {
            self.wtd = WtdConfig { kind: WtdFamily::Weibull, shape: v };
        }
        if let Some(v) = o.n_ancillas {
            self.n_ancillas = v;
        }
        if let Some(v) = o.interaction {
            self.interaction = v;
        }
        if let Some(v) = o.g_tau {
            self.g_tau = v;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("nbar", self.nbar)?;
        positive("gamma", self.gamma)?;
        positive("gamma_tau", self.gamma_tau)?;
        if !self.g_tau.is_finite() {
            return Err(CliError::config("g_tau must be finite"));
        }
        if self.n_ancillas == 0 {
            return Err(CliError::config("n_ancillas must be at least 1"));
        }
        if self.n_ancillas > MAX_ANCILLAS {
            return Err(CliError::Resource(format!(
                "n_ancillas = {} exceeds the limit of {MAX_ANCILLAS}",
                self.n_ancillas
            )));
        }
        if self.wtd.kind != WtdFamily::Deterministic {
            positive("wtd.shape", self.wtd.shape)?;
        }
        if self.wtd.kind == WtdFamily::Erlang && self.wtd.shape.fract() != 0.0 {
            return Err(CliError::config("Erlang order must be an integer"));
        }
        self.gamma_tau_grid.validate("gamma_tau_grid")?;
        self.nbar_grid.validate("nbar_grid")?;
        if !(self.nbar_grid.min > 0.0) {
            return Err(CliError::config("nbar_grid must stay above zero"));
        }
        if !(self.gamma_tau_grid.min > 0.0) {
            return Err(CliError::config("gamma_tau_grid must stay above zero"));
        }
        if self.fig3_k.is_empty() {
            return Err(CliError::config("fig3_k must list at least one shape"));
        }
        for &k in &self.fig3_k {
            positive("fig3_k entry", k)?;
        }
        if self.inset_points < 2 {
            return Err(CliError::config("inset_points must be at least 2"));
        }
        if self.mc_samples < 2 {
            return Err(CliError::config("mc_samples must be at least 2"));
        }
        Ok(())
    }

    pub fn ancilla(&self) -> Ancilla {
        self.ancilla.unwrap_or(match self.interaction {
            Interaction::Zz => Ancilla::PlusX,
            Interaction::Swap => Ancilla::Ground,
        })
    }

    pub fn collision(&self) -> Result<CollisionSpec, CliError> {
        let prep = match self.ancilla() {
            Ancilla::PlusX => ancilla_plus_x(),
            Ancilla::Ground => ancilla_ground(),
        };
        Ok(CollisionSpec::new(self.interaction.into(), self.g_tau, prep)?)
    }

    pub fn env(&self) -> Result<EnvironmentParams, CliError> {
        Ok(EnvironmentParams::new(self.nbar, self.gamma)?)
    }

    /// Waiting time τ for a given γτ.
    pub fn tau(&self, gamma_tau: f64) -> f64 {
        gamma_tau / self.gamma
    }

    pub fn wtd_spec(&self, mean_tau: f64) -> Result<WtdSpec, CliError> {
        let kind = match self.wtd.kind {
            WtdFamily::Deterministic => WtdKind::Deterministic,
            WtdFamily::Exponential => WtdKind::Exponential,
            WtdFamily::Weibull => WtdKind::Weibull,
            WtdFamily::Erlang => WtdKind::Erlang,
        };
        Ok(WtdSpec::new(kind, self.wtd.shape, mean_tau)?)
    }

    /// The chain used for single-point QFI values. ZZ collisions start from
    /// the Gibbs state; swap collisions start from the stroboscopic steady
    /// state, since a swap moves S away from Gibbs.
    pub fn chain(&self, n_ancillas: usize, tau: f64) -> Result<ChainConfig, CliError> {
        let spec = self.collision()?;
        Ok(match self.interaction {
            Interaction::Zz => ChainConfig::deterministic(spec, n_ancillas, tau)?,
            Interaction::Swap => ChainConfig::steady(spec, n_ancillas, tau)?,
        })
    }

    /// Whether the closed forms for Δ apply (ZZ at g·τ = π/2 with |+x⟩).
    pub fn closed_form_applies(&self) -> bool {
        self.interaction == Interaction::Zz
            && self.ancilla() == Ancilla::PlusX
            && (self.g_tau - FRAC_PI_2).abs() < 1e-12
    }
}
