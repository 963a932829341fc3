//! Experiment configuration, read from TOML.
//!
//! ```toml
//! methods = ["R2-CCCP", "R1-CCCP", "SDR2D-UB", "DSD"]
//! seeds = { start = 0, count = 20 }
//!
//! [scenario]
//! relay_count = 10
//! destination_count = 10
//!
//! [budget]
//! total_dbm = 30.0
//!
//! [sweep]
//! axis = "destinations"
//! values = [10, 25, 50]
//! ```
//!
//! Every table is optional; missing fields take the defaults of
//! [`ExperimentConfig::default`]. Unknown fields are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use relaycast_core::cccp::CccpOptions;
use relaycast_core::model::Rank;
use relaycast_core::sdr::SdrOptions;
use relaycast_core::units::dbm_to_watt;
use relaycast_core::{NetworkGeometry, PathlossModel, PowerBudget, Scenario};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "R2-CCCP")]
    R2Cccp,
    #[serde(rename = "R1-CCCP")]
    R1Cccp,
    #[serde(rename = "R2-SDR2D")]
    R2Sdr2d,
    #[serde(rename = "R1-SDR2D")]
    R1Sdr2d,
    #[serde(rename = "SDR2D-UB")]
    Sdr2dUb,
    #[serde(rename = "DSD")]
    Dsd,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::R2Cccp,
        Method::R1Cccp,
        Method::R2Sdr2d,
        Method::R1Sdr2d,
        Method::Sdr2dUb,
        Method::Dsd,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::R2Cccp => "R2-CCCP",
            Method::R1Cccp => "R1-CCCP",
            Method::R2Sdr2d => "R2-SDR2D",
            Method::R1Sdr2d => "R1-SDR2D",
            Method::Sdr2dUb => "SDR2D-UB",
            Method::Dsd => "DSD",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.label().eq_ignore_ascii_case(s))
    }

    /// Whether the relays take part; relay schemes spend four slots on two
    /// symbols.
    pub fn uses_relays(self) -> bool {
        self != Method::Dsd
    }

    pub fn needs_sdr(self) -> bool {
        matches!(self, Method::R2Sdr2d | Method::R1Sdr2d | Method::Sdr2dUb)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Values are total power budgets in dBm.
    TotalPower,
    /// Values are destination counts.
    Destinations,
    /// A single point at the configured budget; per-iteration traces are
    /// the output of interest.
    Iterations,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Smoke,
    Desk,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub relay_count: usize,
    pub destination_count: usize,
    pub relay_radius_m: f64,
    pub destination_radius_min_m: f64,
    pub destination_radius_max_m: f64,
    pub source_height_m: f64,
    pub relay_height_m: f64,
    pub destination_height_m: f64,
    pub carrier_frequency_hz: f64,
    pub pathloss_intercept_db: f64,
    pub pathloss_slope_db: f64,
    pub shadowing_std_db: f64,
    pub destination_noise_dbm: f64,
    pub relay_noise_dbm: f64,
    pub direct_links: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let sc = Scenario::reference(10, 10);
        Self {
            relay_count: sc.geometry.relay_count,
            destination_count: sc.geometry.destination_count,
            relay_radius_m: sc.geometry.relay_radius,
            destination_radius_min_m: sc.geometry.destination_radius_min,
            destination_radius_max_m: sc.geometry.destination_radius_max,
            source_height_m: sc.geometry.source_height,
            relay_height_m: sc.geometry.relay_height,
            destination_height_m: sc.geometry.destination_height,
            carrier_frequency_hz: sc.geometry.carrier_frequency,
            pathloss_intercept_db: sc.pathloss.intercept_db,
            pathloss_slope_db: sc.pathloss.slope_db,
            shadowing_std_db: sc.shadowing_std_db,
            destination_noise_dbm: sc.destination_noise_dbm,
            relay_noise_dbm: sc.relay_noise_dbm,
            direct_links: sc.direct_links,
        }
    }
}

impl ScenarioConfig {
    /// The scenario with `destination_count` replaced by `m`.
    pub fn scenario(&self, m: usize) -> Scenario {
        Scenario {
            geometry: NetworkGeometry {
                relay_count: self.relay_count,
                destination_count: m,
                relay_radius: self.relay_radius_m,
                destination_radius_min: self.destination_radius_min_m,
                destination_radius_max: self.destination_radius_max_m,
                source_height: self.source_height_m,
                relay_height: self.relay_height_m,
                destination_height: self.destination_height_m,
                carrier_frequency: self.carrier_frequency_hz,
            },
            pathloss: PathlossModel {
                intercept_db: self.pathloss_intercept_db,
                slope_db: self.pathloss_slope_db,
            },
            shadowing_std_db: self.shadowing_std_db,
            destination_noise_dbm: self.destination_noise_dbm,
            relay_noise_dbm: self.relay_noise_dbm,
            direct_links: self.direct_links,
        }
    }
}

/// Budgets as fractions of the total; a missing ratio leaves that
/// constraint out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    pub total_dbm: f64,
    pub source_ratio: Option<f64>,
    pub relay_sum_ratio: Option<f64>,
    pub relay_ratio: Option<f64>,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            total_dbm: 30.0,
            source_ratio: Some(1.0 / 2.0),
            relay_sum_ratio: Some(1.0 / 3.0),
            relay_ratio: Some(1.0 / 15.0),
        }
    }
}

impl BudgetConfig {
    pub fn budget(&self, total_dbm: f64) -> PowerBudget {
        let total = dbm_to_watt(total_dbm);
        PowerBudget {
            relay_max: self.relay_ratio.map(|r| r * total),
            relay_sum_max: self.relay_sum_ratio.map(|r| r * total),
            source_max: self.source_ratio.map(|r| r * total),
            total_max: Some(total),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::TotalPower,
            values: vec![30.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range(SeedRange),
}

impl Seeds {
    pub fn values(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range(r) => (r.start..r.start + r.count).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CccpConfig {
    pub epsilon: f64,
    pub max_iter: usize,
    pub n_starts: usize,
    pub a_max: Option<f64>,
    pub solver_tol: f64,
}

impl Default for CccpConfig {
    fn default() -> Self {
        let o = CccpOptions::new(Rank::Two, 0);
        Self {
            epsilon: o.epsilon,
            max_iter: o.max_iter,
            n_starts: 10,
            a_max: None,
            solver_tol: o.solver.tol,
        }
    }
}

impl CccpConfig {
    /// `a_max` is given in the same units as the configured budgets.
    pub fn options(&self, rank: Rank, seed: u64) -> CccpOptions {
        let mut o = CccpOptions::new(rank, seed);
        o.epsilon = self.epsilon;
        o.max_iter = self.max_iter;
        o.n_starts = self.n_starts;
        o.a_max = self.a_max;
        o.solver = o.solver.with_tol(self.solver_tol);
        o
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdrConfig {
    pub grid_size: usize,
    pub epsilon: f64,
    pub n_candidates: usize,
    pub rank_tol: f64,
    pub a_max: Option<f64>,
    pub refine_rounds: usize,
    pub polish_epsilon: f64,
    pub solver_tol: f64,
}

impl Default for SdrConfig {
    fn default() -> Self {
        let o = SdrOptions::new(0);
        Self {
            grid_size: o.grid_size,
            epsilon: o.epsilon,
            n_candidates: o.n_candidates,
            rank_tol: o.rank_tol,
            a_max: None,
            refine_rounds: o.refine_rounds,
            polish_epsilon: o.polish_epsilon,
            solver_tol: o.solver.tol,
        }
    }
}

impl SdrConfig {
    pub fn options(&self, seed: u64) -> SdrOptions {
        let mut o = SdrOptions::new(seed);
        o.grid_size = self.grid_size;
        o.epsilon = self.epsilon;
        o.n_candidates = self.n_candidates;
        o.rank_tol = self.rank_tol;
        o.a_max = self.a_max;
        o.refine_rounds = self.refine_rounds;
        o.polish_epsilon = self.polish_epsilon;
        o.solver = o.solver.with_tol(self.solver_tol);
        o
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub methods: Vec<Method>,
    pub seeds: Seeds,
    pub out_dir: PathBuf,
    pub scenario: ScenarioConfig,
    pub budget: BudgetConfig,
    pub sweep: SweepConfig,
    pub cccp: CccpConfig,
    pub sdr: SdrConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "default".into(),
            methods: Method::ALL.to_vec(),
            seeds: Seeds::Range(SeedRange { start: 0, count: 1 }),
            out_dir: PathBuf::from("results"),
            scenario: ScenarioConfig::default(),
            budget: BudgetConfig::default(),
            sweep: SweepConfig::default(),
            cccp: CccpConfig::default(),
            sdr: SdrConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Built-in profiles. `desk` is the reference study at R = 10 with
    /// M ∈ {10, 25, 50}; `full` extends M to 130.
    pub fn profile(p: Profile) -> Self {
        let mut c = ExperimentConfig::default();
        match p {
            Profile::Smoke => {
                c.name = "smoke".into();
                c.scenario.relay_count = 4;
                c.scenario.destination_count = 8;
                c.seeds = Seeds::Range(SeedRange { start: 0, count: 3 });
                c.sweep = SweepConfig {
                    axis: SweepAxis::TotalPower,
                    values: vec![20.0, 30.0],
                };
                c.cccp.n_starts = 3;
                c.sdr.grid_size = 40;
                c.sdr.n_candidates = 50;
            }
            Profile::Desk => {
                c.name = "desk".into();
                c.seeds = Seeds::Range(SeedRange { start: 0, count: 20 });
                c.sweep = SweepConfig {
                    axis: SweepAxis::Destinations,
                    values: vec![10.0, 25.0, 50.0],
                };
            }
            Profile::Full => {
                c.name = "full".into();
                c.seeds = Seeds::Range(SeedRange { start: 0, count: 100 });
                c.sweep = SweepConfig {
                    axis: SweepAxis::Destinations,
                    values: vec![10.0, 40.0, 70.0, 100.0, 130.0],
                };
            }
        }
        c.out_dir = PathBuf::from(format!("results/{}", c.name));
        c
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |field: &str, why: &str| Err(HarnessError::Config(format!("{field}: {why}")));
        if self.methods.is_empty() {
            return bad("methods", "at least one method is required");
        }
        if self.seeds.values().is_empty() {
            return bad("seeds", "at least one seed is required");
        }
        let b = &self.budget;
        for (field, r) in [
            ("budget.source_ratio", b.source_ratio),
            ("budget.relay_sum_ratio", b.relay_sum_ratio),
            ("budget.relay_ratio", b.relay_ratio),
        ] {
            if let Some(r) = r {
                if !(r > 0.0 && r.is_finite()) {
                    return bad(field, "must be positive");
                }
            }
        }
        if !b.total_dbm.is_finite() {
            return bad("budget.total_dbm", "must be finite");
        }
        if let Err(e) = self.scenario.scenario(self.scenario.destination_count).geometry.validate() {
            return bad("scenario", &e.to_string());
        }
        for &v in &self.sweep.values {
            if !v.is_finite() {
                return bad("sweep.values", "must be finite");
            }
            if self.sweep.axis == SweepAxis::Destinations && !(v >= 1.0 && v.fract() == 0.0) {
                return bad("sweep.values", "destination counts must be positive integers");
            }
        }
        if !(self.cccp.epsilon > 0.0) || self.cccp.n_starts == 0 {
            return bad("cccp", "epsilon must be positive and n_starts at least 1");
        }
        if !(self.sdr.epsilon > 0.0) || self.sdr.grid_size == 0 || self.sdr.n_candidates == 0 {
            return bad("sdr", "epsilon, grid_size and n_candidates must be positive");
        }
        Ok(())
    }

    /// `(M, P_T in dBm)` for every sweep value, in order.
    pub fn points(&self) -> Vec<(usize, f64)> {
        match self.sweep.axis {
            SweepAxis::TotalPower => self
                .sweep
                .values
                .iter()
                .map(|&p| (self.scenario.destination_count, p))
                .collect(),
            SweepAxis::Destinations => self
                .sweep
                .values
                .iter()
                .map(|&m| (m as usize, self.budget.total_dbm))
                .collect(),
            SweepAxis::Iterations => vec![(self.scenario.destination_count, self.budget.total_dbm)],
        }
    }
}
