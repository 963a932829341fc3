//! One sweep cell: a channel realization solved by every requested method.

use std::time::Instant;

use relaycast_core::cccp::{self, CccpRun, Termination};
use relaycast_core::model::Rank;
use relaycast_core::sdr::{self, Recovered, Recovery, SdrOutcome};
use relaycast_core::units::linear_to_db;
use relaycast_core::{BeamformerSolution, ChannelRealization, CoreError, Normalization, PowerBudget, ProblemData};
use serde::Serialize;

use crate::config::{ExperimentConfig, Method};

/// A realization in physical units together with its normalized problem.
#[derive(Clone, Debug)]
pub struct Instance {
    pub seed: u64,
    pub destinations: usize,
    pub total_dbm: f64,
    pub channels: ChannelRealization,
    pub normalization: Normalization,
    pub data: ProblemData,
    /// Budget in normalized units.
    pub budget: PowerBudget,
}

impl Instance {
    pub fn generate(cfg: &ExperimentConfig, destinations: usize, total_dbm: f64, seed: u64) -> Result<Self, CoreError> {
        let channels = cfg.scenario.scenario(destinations).generate(seed)?;
        let physical = cfg.budget.budget(total_dbm);
        physical.validate()?;
        let normalization = Normalization::for_instance(&channels, &physical);
        let data = ProblemData::build(&normalization.channels(&channels))?;
        Ok(Self {
            seed,
            destinations,
            total_dbm,
            budget: normalization.budget(&physical),
            channels,
            normalization,
            data,
        })
    }

    /// Normalized channels, the ones `data` was built from.
    pub fn normalized_channels(&self) -> ChannelRealization {
        self.normalization.channels(&self.channels)
    }

    fn normalized_a_max(&self, a_max: Option<f64>) -> Option<f64> {
        a_max.map(|a| a * self.normalization.power_unit)
    }
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub method: Method,
    pub sweep_value: f64,
    pub seed: u64,
    pub destinations: usize,
    pub total_power_dbm: f64,
    pub min_snr_db: f64,
    /// bit/s/Hz per slot.
    pub min_rate: f64,
    pub runtime_s: f64,
    /// CCCP iterations of the best start, or SDP feasibility checks.
    pub iterations: Option<usize>,
    pub sdr_rank: Option<usize>,
    pub status: String,
}

impl ResultRecord {
    pub const CSV_HEADER: &'static str =
        "method,sweep_value,seed,destinations,total_power_dbm,min_snr_db,min_rate,runtime_s,iterations,sdr_rank,status";

    pub fn csv_row(&self, with_runtime: bool) -> String {
        let opt = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
        let runtime = if with_runtime { format!("{:.6}", self.runtime_s) } else { String::new() };
        format!(
            "{},{},{},{},{},{:.9},{:.9},{},{},{},{}",
            self.method,
            self.sweep_value,
            self.seed,
            self.destinations,
            self.total_power_dbm,
            self.min_snr_db,
            self.min_rate,
            runtime,
            opt(self.iterations),
            opt(self.sdr_rank),
            self.status
        )
    }
}

/// Per-iteration minimum SNR over the starts of one CCCP run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub method: Method,
    pub sweep_value: f64,
    pub seed: u64,
    pub k: usize,
    pub highest_db: f64,
    pub lowest_db: f64,
    /// The start with the best final objective.
    pub best_start_db: f64,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "method,sweep_value,seed,k,highest_db,lowest_db,best_start_db";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.9},{:.9},{:.9}",
            self.method, self.sweep_value, self.seed, self.k, self.highest_db, self.lowest_db, self.best_start_db
        )
    }
}

/// `½log₂(1 + SNR)` for the four-slot relay schemes, `log₂(1 + SNR)` for
/// direct transmission.
pub fn rate(method: Method, snr: f64) -> f64 {
    let r = (1.0 + snr).log2();
    if method.uses_relays() {
        r / 2.0
    } else {
        r
    }
}

/// Minimum SNR of direct transmission with per-slot power
/// `min(P_S, P_T)/4`.
pub fn run_dsd(data: &ProblemData, budget: &PowerBudget) -> Result<f64, CoreError> {
    let cap = budget
        .source_cap()
        .ok_or_else(|| CoreError::InvalidInput("direct transmission needs a source or total budget".into()))?;
    let p = cap / 4.0;
    Ok((0..data.destination_count())
        .map(|m| p * data.d_sq(m) / data.sigma_nu_sq())
        .fold(f64::INFINITY, f64::min))
}

/// Full results of one cell, kept for the acceptance checks.
#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub instance: Instance,
    pub sweep_value: f64,
    pub records: Vec<ResultRecord>,
    pub traces: Vec<TraceRow>,
    pub cccp_r2: Option<(CccpRun, f64)>,
    pub cccp_r1: Option<(CccpRun, f64)>,
    /// Relaxation outcome and the search time in seconds.
    pub sdr: Option<(SdrOutcome, f64)>,
    pub sdr_r2: Option<Recovered>,
    pub sdr_r1: Option<Recovered>,
}

impl CellOutcome {
    pub fn record(&self, method: Method) -> Option<&ResultRecord> {
        self.records.iter().find(|r| r.method == method)
    }

    /// Solution of a weight-producing method, in physical units.
    pub fn physical_solution(&self, method: Method) -> Option<BeamformerSolution> {
        let sol = match method {
            Method::R2Cccp => self.cccp_r2.as_ref().map(|(r, _)| r.best().solution.clone()),
            Method::R1Cccp => self.cccp_r1.as_ref().map(|(r, _)| r.best().solution.clone()),
            Method::R2Sdr2d => self.sdr_r2.as_ref().map(|r| r.solution.clone()),
            Method::R1Sdr2d => self.sdr_r1.as_ref().map(|r| r.solution.clone()),
            _ => None,
        }?;
        Some(self.instance.normalization.to_physical(&sol))
    }
}

fn termination_label(t: &Termination) -> String {
    match t {
        Termination::Converged => "converged".into(),
        Termination::MaxIterations => "max-iterations".into(),
        Termination::StepRejected => "step-rejected".into(),
        Termination::SubproblemFailure(msg) => format!("subproblem-failure: {msg}"),
    }
}

fn recovery_label(r: Recovery) -> &'static str {
    match r {
        Recovery::Decomposition => "decomposition",
        Recovery::Randomized => "randomized",
    }
}

/// CSV-safe error text.
fn error_status(e: &CoreError) -> String {
    format!("error: {}", e.to_string().replace([',', '\n'], ";"))
}

fn traces_of(method: Method, sweep_value: f64, seed: u64, run: &CccpRun) -> Vec<TraceRow> {
    let k_max = run.runs.iter().map(|r| r.iterations()).max().unwrap_or(0);
    (0..=k_max)
        .map(|k| {
            let (hi, lo) = run.envelope_at(k);
            TraceRow {
                method,
                sweep_value,
                seed,
                k,
                highest_db: linear_to_db(hi),
                lowest_db: linear_to_db(lo),
                best_start_db: linear_to_db(run.best().min_snr_at(k)),
            }
        })
        .collect()
}

/// Runs every configured method on one realization. Method failures are
/// recorded in the status column, never propagated.
pub fn run_cell(cfg: &ExperimentConfig, sweep_value: f64, instance: Instance) -> CellOutcome {
    let mut out = CellOutcome {
        sweep_value,
        records: Vec::new(),
        traces: Vec::new(),
        cccp_r2: None,
        cccp_r1: None,
        sdr: None,
        sdr_r2: None,
        sdr_r1: None,
        instance,
    };
    let inst = &out.instance;
    let record = |method: Method, snr: f64, runtime: f64, iterations: Option<usize>, rank: Option<usize>, status: String| {
        ResultRecord {
            method,
            sweep_value,
            seed: inst.seed,
            destinations: inst.destinations,
            total_power_dbm: inst.total_dbm,
            min_snr_db: linear_to_db(snr),
            min_rate: rate(method, snr),
            runtime_s: runtime,
            iterations,
            sdr_rank: rank,
            status,
        }
    };
    let mut records = Vec::new();
    let mut traces = Vec::new();

    for (method, rank) in [(Method::R2Cccp, Rank::Two), (Method::R1Cccp, Rank::One)] {
        if !cfg.methods.contains(&method) {
            continue;
        }
        let mut opts = cfg.cccp.options(rank, inst.seed);
        opts.a_max = inst.normalized_a_max(cfg.cccp.a_max);
        let clock = Instant::now();
        let result = cccp::run(&inst.data, &inst.budget, &opts);
        let secs = clock.elapsed().as_secs_f64();
        match result {
            Ok(run) => {
                let best = run.best();
                records.push(record(
                    method,
                    1.0 / best.solution.t,
                    secs,
                    Some(best.iterations()),
                    None,
                    termination_label(&best.termination),
                ));
                traces.extend(traces_of(method, sweep_value, inst.seed, &run));
                match rank {
                    Rank::Two => out.cccp_r2 = Some((run, secs)),
                    Rank::One => out.cccp_r1 = Some((run, secs)),
                }
            }
            Err(e) => records.push(record(method, f64::NAN, secs, None, None, error_status(&e))),
        }
    }

    if cfg.methods.iter().any(|m| m.needs_sdr()) {
        let mut opts = cfg.sdr.options(inst.seed);
        opts.a_max = inst.normalized_a_max(cfg.sdr.a_max);
        let clock = Instant::now();
        let search = sdr::search(&inst.data, &inst.budget, &opts);
        let search_secs = clock.elapsed().as_secs_f64();
        match search {
            Ok(outcome) => {
                let checks = Some(outcome.checks());
                let rank = Some(outcome.rank);
                if cfg.methods.contains(&Method::Sdr2dUb) {
                    records.push(record(Method::Sdr2dUb, outcome.bound(), search_secs, checks, rank, "ok".into()));
                }
                for method in [Method::R2Sdr2d, Method::R1Sdr2d] {
                    if !cfg.methods.contains(&method) {
                        continue;
                    }
                    let clock = Instant::now();
                    let rec = if method == Method::R2Sdr2d {
                        sdr::recover_rank_two(&outcome, &inst.data, &inst.budget, &opts)
                    } else {
                        sdr::recover_rank_one(&outcome, &inst.data, &inst.budget, &opts)
                    };
                    let secs = search_secs + clock.elapsed().as_secs_f64();
                    match rec {
                        Ok(r) => {
                            records.push(record(method, r.min_snr, secs, checks, rank, recovery_label(r.method).into()));
                            if method == Method::R2Sdr2d {
                                out.sdr_r2 = Some(r);
                            } else {
                                out.sdr_r1 = Some(r);
                            }
                        }
                        Err(e) => records.push(record(method, f64::NAN, secs, checks, rank, error_status(&e))),
                    }
                }
                out.sdr = Some((outcome, search_secs));
            }
            Err(e) => {
                for method in [Method::R2Sdr2d, Method::R1Sdr2d, Method::Sdr2dUb] {
                    if cfg.methods.contains(&method) {
                        records.push(record(method, f64::NAN, search_secs, None, None, error_status(&e)));
                    }
                }
            }
        }
    }

    if cfg.methods.contains(&Method::Dsd) {
        let clock = Instant::now();
        let r = run_dsd(&inst.data, &inst.budget);
        let secs = clock.elapsed().as_secs_f64();
        records.push(match r {
            Ok(snr) => record(Method::Dsd, snr, secs, None, None, "ok".into()),
            Err(e) => record(Method::Dsd, f64::NAN, secs, None, None, error_status(&e)),
        });
    }

    records.sort_by_key(|r| r.method);
    out.records = records;
    out.traces = traces;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use relaycast_core::Scenario;
    use relaycast_linalg::Complex64;

    #[test]
    fn rate_prefactor() {
        assert_eq!(rate(Method::Dsd, 3.0), 2.0);
        assert_eq!(rate(Method::R2Cccp, 3.0), 1.0);
        assert_eq!(rate(Method::Sdr2dUb, 0.0), 0.0);
    }

    #[test]
    fn dsd_cases() {
        let d = Complex64::new(0.6, -0.8);
        let z = Complex64::new(0.0, 0.0);
        let ch = ChannelRealization::new(vec![z], vec![vec![z]; 3], vec![d; 3], 0.5, 1.0).unwrap();
        let data = ProblemData::build(&ch).unwrap();
        let b = PowerBudget::from_total(8.0);
        // min(P_S, P_T)/4 = 1; |d|²/σ² = 2 for every destination.
        assert!((run_dsd(&data, &b).unwrap() - 2.0).abs() < 1e-12);
        let doubled = run_dsd(&data, &b.scaled(2.0)).unwrap();
        assert!((linear_to_db(doubled) - linear_to_db(2.0) - 3.0103).abs() < 1e-4);
    }

    #[test]
    fn dsd_matches_the_model_with_idle_relays() {
        let raw = Scenario::reference(3, 1).generate(4).unwrap();
        let b = PowerBudget::from_total(1.0);
        let data = ProblemData::build(&raw).unwrap();
        // Per-slot power 1/a spends 2/a over the two direct slots.
        let a = 4.0 / b.source_cap().unwrap();
        let w = vec![Complex64::new(0.0, 0.0); data.weight_dim()];
        let model = data.snr(&w, a, 0).unwrap();
        assert!((run_dsd(&data, &b).unwrap() / model - 1.0).abs() < 1e-12);
    }
}
