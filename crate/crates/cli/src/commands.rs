//! The subcommands. Each figure command returns a [`Table`]; grid cells are
//! evaluated in parallel and gathered back in grid order (n̄ outer, γτ
//! inner) before anything is written.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

use colltherm::correlations::{discord, mutual_information, BipartiteState, Side};
use colltherm::engine::ChainConfig;
use colltherm::fisher::{
    chain_qfi, chain_qfi_matrix, classical_fi, delta_analytic, optimal_measurement_basis, ratio_r, thermal_fi_nbar,
    ParamPoint, Which,
};
use colltherm::model::{lindblad_oracle, thermal_channel, CollisionSpec, EnvironmentParams};
use colltherm::qmat::random_density_matrix;
use colltherm::wtd::{average_delta, average_qfi_mc, sample_rng, WtdSpec};
use colltherm::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, WtdFamily};
use crate::output::{Cell, Table};
use crate::CliError;

/// Ratio Δ/F_th above which a cell counts as an advantage.
pub const ADVANTAGE_THRESHOLD: f64 = 1.01;

fn grid_cells(cfg: &RunConfig) -> Vec<(f64, f64)> {
    let gts = cfg.gamma_tau_grid.values();
    cfg.nbar_grid.values().into_iter().flat_map(|nb| gts.iter().map(move |&gt| (nb, gt))).collect()
}

fn sweep<F>(cfg: &RunConfig, f: F) -> Result<Vec<Vec<Cell>>, CliError>
where
    F: Fn(f64, f64) -> Result<Vec<Cell>, CliError> + Sync,
{
    grid_cells(cfg)
        .into_par_iter()
        .map(|(nb, gt)| {
            let mut row = vec![Cell::Num(gt), Cell::Num(nb)];
            row.extend(f(nb, gt)?);
            Ok(row)
        })
        .collect()
}

fn log10_or_sentinel(x: f64) -> f64 {
    if x > 0.0 {
        x.log10()
    } else {
        f64::NEG_INFINITY
    }
}

fn require_closed_form(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    if cfg.closed_form_applies() {
        Ok(())
    } else {
        Err(CliError::config(format!(
            "{command} uses the closed form for ZZ collisions at g_tau = pi/2 with a |+x> ancilla"
        )))
    }
}

/// Δ/F_th on the (γτ, n̄) grid, with Γ = (2n̄ + 1)γτ.
pub fn fig1a(cfg: &RunConfig) -> Result<Table, CliError> {
    require_closed_form(cfg, "fig1a")?;
    let rows = sweep(cfg, |nb, gt| {
        let ratio = delta_analytic(nb, (2.0 * nb + 1.0) * gt)? / thermal_fi_nbar(nb)?;
        Ok(vec![log10_or_sentinel(ratio).into(), (ratio > ADVANTAGE_THRESHOLD).into()])
    })?;
    let mut t = Table::new(vec!["gamma_tau", "nbar", "log10_ratio", "advantage"])
        .note("log10_ratio = log10(Delta / F_th); -inf marks an exact zero")
        .note(format!(
            "advantage = 1 where the ratio exceeds {ADVANTAGE_THRESHOLD}; its boundary is the advantage contour"
        ));
    t.rows = rows;
    Ok(t)
}

fn adjacent_pair(cfg: &RunConfig, nb: f64, gt: f64) -> Result<BipartiteState, CliError> {
    let env = EnvironmentParams::new(nb, cfg.gamma)?;
    let chain = cfg.chain(cfg.n_ancillas.max(2), cfg.tau(gt))?.run(&env)?;
    Ok(BipartiteState::adjacent_ancillas(&chain.joint_ancillas, 0)?)
}

/// Mutual information and discord between the first two ancillas.
pub fn fig1b(cfg: &RunConfig) -> Result<Table, CliError> {
    let rows = sweep(cfg, |nb, gt| {
        let pair = adjacent_pair(cfg, nb, gt)?;
        Ok(vec![mutual_information(&pair).into(), discord(&pair, Side::A)?.into(), discord(&pair, Side::B)?.into()])
    })?;
    let mut t = Table::new(vec!["gamma_tau", "nbar", "mutual_information", "discord_a", "discord_b"])
        .note("pair A1 A2; entropies in nats; discord_a measures A1, discord_b measures A2");
    t.rows = rows;
    Ok(t)
}

/// R for the joint estimation of (n̄, γ) from two ancillas.
pub fn fig1c(cfg: &RunConfig) -> Result<Table, CliError> {
    let rows = sweep(cfg, |nb, gt| {
        let r = ratio_at(cfg, nb, 2, cfg.tau(gt)).map(|r| r.unwrap_or(f64::NAN))?;
        Ok(vec![r.into()])
    })?;
    let mut t = Table::new(vec!["gamma_tau", "nbar", "ratio_r"]).note(
        "two ancillas; nan marks cells where the (nbar, gamma) Fisher matrix is singular or gamma is not resolved",
    );
    t.rows = rows;
    Ok(t)
}

/// R, or `None` when the Fisher matrix is singular.
fn ratio_at(cfg: &RunConfig, nb: f64, n: usize, tau: f64) -> Result<Option<f64>, CliError> {
    let point = ParamPoint::new(nb, cfg.gamma, Which::NbarAndGamma)?;
    match chain_qfi_matrix(&point, &cfg.chain(n, tau)?).and_then(|f| ratio_r(&f)) {
        Ok(r) => Ok(Some(r)),
        Err(Error::Singular(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Δ̄ for the configured waiting-time law over Δ at the same mean.
pub fn fig2(cfg: &RunConfig) -> Result<Table, CliError> {
    require_closed_form(cfg, "fig2")?;
    let rows = sweep(cfg, |nb, gt| {
        let tau = cfg.tau(gt);
        let ratio = if cfg.wtd.kind == WtdFamily::Deterministic {
            1.0
        } else {
            let avg = average_delta(&cfg.wtd_spec(tau)?, nb, cfg.gamma)?;
            avg / delta_analytic(nb, (2.0 * nb + 1.0) * gt)?
        };
        Ok(vec![log10_or_sentinel(ratio).into(), (ratio > 1.0).into()])
    })?;
    let mut t = Table::new(vec!["gamma_tau", "nbar", "log10_ratio", "above_crossing"])
        .note("gamma_tau is the mean waiting time times gamma")
        .note(
            "log10_ratio = log10(averaged Delta / deterministic Delta); above_crossing = 1 where the ratio exceeds 1",
        );
    t.rows = rows;
    Ok(t)
}

fn series_name(k: f64) -> String {
    format!("weibull_k={k}")
}

/// Per-ancilla QFI in units of F_th (Δ̄/F_th, the many-ancilla limit) against
/// the mean γτ at fixed n̄, for every configured Weibull shape and the
/// deterministic law; then the inset densities at unit mean.
pub fn fig3(cfg: &RunConfig) -> Result<Table, CliError> {
    require_closed_form(cfg, "fig3")?;
    let nb = cfg.nbar;
    let f_th = thermal_fi_nbar(nb)?;
    let gts = cfg.gamma_tau_grid.values();
    let mut series: Vec<(String, Option<f64>)> = cfg.fig3_k.iter().map(|&k| (series_name(k), Some(k))).collect();
    series.push(("deterministic".into(), None));

    let jobs: Vec<(usize, f64)> = (0..series.len()).flat_map(|s| gts.iter().map(move |&gt| (s, gt))).collect();
    let curve = jobs
        .par_iter()
        .map(|&(s, gt)| {
            let tau = cfg.tau(gt);
            let spec = match series[s].1 {
                Some(k) => WtdSpec::weibull(k, tau)?,
                None => WtdSpec::deterministic(tau)?,
            };
            let y = average_delta(&spec, nb, cfg.gamma)? / f_th;
            Ok(vec![Cell::from("qfi"), series[s].0.clone().into(), gt.into(), y.into()])
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut t = Table::new(vec!["section", "series", "x", "y"])
        .note(format!("nbar = {nb}"))
        .note("section qfi: x = mean gamma_tau, y = per-ancilla QFI / F_th for many ancillas (Delta_avg / F_th)")
        .note("section pdf: x = t / mean, y = mean * p(t); nodes are quantiles of a Chebyshev grid in probability");
    t.rows = curve;
    for &k in &cfg.fig3_k {
        for (x, y) in inset_curve(k, cfg.inset_points)? {
            t.rows.push(vec!["pdf".into(), series_name(k).into(), x.into(), y.into()]);
        }
    }
    Ok(t)
}

/// Density of a unit-mean Weibull law at `points` interior quantiles. The
/// probabilities follow a Chebyshev grid so both tails are resolved, and the
/// trapezoid rule over the returned nodes recovers the unit mass.
pub fn inset_curve(k: f64, points: usize) -> Result<Vec<(f64, f64)>, CliError> {
    let spec = WtdSpec::weibull(k, 1.0)?;
    let m = points + 1;
    (1..m)
        .map(|i| {
            let u = 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / m as f64).cos());
            let x = spec.quantile(u)?;
            Ok((x, spec.pdf(x)?))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McSummary {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComputeResults {
    pub tau: f64,
    pub effective_rate: f64,
    pub thermal_fi: f64,
    /// QFI of all N ancillas for equally spaced collisions.
    pub qfi: f64,
    pub qfi_per_ancilla_over_thermal: f64,
    pub delta_analytic: Option<f64>,
    pub delta_average: Option<f64>,
    pub qfi_average_mc: Option<McSummary>,
    pub mutual_information: Option<f64>,
    pub discord_a: Option<f64>,
    pub discord_b: Option<f64>,
    pub ratio_r: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComputeRecord {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub results: ComputeResults,
}

/// Every quantity at one parameter point.
pub fn compute(cfg: &RunConfig) -> Result<ComputeRecord, CliError> {
    let env = cfg.env()?;
    let n = cfg.n_ancillas;
    let tau = cfg.tau(cfg.gamma_tau);
    let rate = env.effective_rate(tau);
    let f_th = thermal_fi_nbar(cfg.nbar)?;
    let chain = cfg.chain(n, tau)?;
    let qfi = chain_qfi(&env, &chain)?;
    let mut notes = Vec::new();
    if cfg.interaction == crate::config::Interaction::Swap {
        notes.push("swap chain starts from the stroboscopic steady state".into());
    }

    let closed = cfg.closed_form_applies();
    let delta = if closed { Some(delta_analytic(cfg.nbar, rate)?) } else { None };
    let stochastic = cfg.wtd.kind != WtdFamily::Deterministic;
    let delta_average = if closed { Some(average_delta(&cfg.wtd_spec(tau)?, cfg.nbar, cfg.gamma)?) } else { None };
    let qfi_average_mc = if n >= 2 && stochastic {
        let spec = cfg.wtd_spec(tau)?;
        let est = average_qfi_mc(&spec, &env, &cfg.collision()?, n, cfg.mc_samples, cfg.seed)?;
        if cfg.interaction == crate::config::Interaction::Swap {
            notes.push("Monte Carlo chains start from the Gibbs state".into());
        }
        Some(McSummary { mean: est.mean, std_error: est.std_error, n_samples: est.n_samples })
    } else {
        None
    };

    let (mi, da, db) = if n >= 2 {
        let pair = BipartiteState::adjacent_ancillas(&chain.run(&env)?.joint_ancillas, 0)?;
        (Some(mutual_information(&pair)), Some(discord(&pair, Side::A)?), Some(discord(&pair, Side::B)?))
    } else {
        notes.push("correlations need at least two ancillas".into());
        (None, None, None)
    };

    let r = ratio_at(cfg, cfg.nbar, n, tau)?;
    if r.is_none() {
        notes.push("Fisher matrix for (nbar, gamma) is singular or gamma is not resolved; ratio_r omitted".into());
    }

    Ok(ComputeRecord {
        command: "compute",
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg.clone(),
        results: ComputeResults {
            tau,
            effective_rate: rate,
            thermal_fi: f_th,
            qfi,
            qfi_per_ancilla_over_thermal: qfi / (n as f64 * f_th),
            delta_analytic: delta,
            delta_average,
            qfi_average_mc,
            mutual_information: mi,
            discord_a: da,
            discord_b: db,
            ratio_r: r,
            notes,
        },
    })
}

pub fn render_compute(record: &ComputeRecord) -> String {
    let mut s = serde_json::to_string_pretty(record).expect("record serializes");
    s.push('\n');
    s
}

/// Outcome of one self-test check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, error: f64, tol: f64) -> Self {
        Check { name, pass: error <= tol, detail: format!("error {error:.3e}, tolerance {tol:.0e}") }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// A quick battery of physics checks, small enough to run in a second.
pub fn selftest(seed: u64) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();

    let env = EnvironmentParams::new(0.7, 1.0)?;
    let channel = thermal_channel(&env, 0.3)?;
    let mut rng = sample_rng(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let rho = random_density_matrix(&[2], &mut rng);
        let a = channel.apply(&rho)?;
        let b = lindblad_oracle(&env, 0.3, &rho)?;
        worst = worst.max(a.mat().max_abs_diff(b.mat()));
    }
    checks.push(Check::new("thermal channel matches the master equation", worst, 1e-8));

    let mut worst = 0.0f64;
    for nb in [0.5, 2.0] {
        let env = EnvironmentParams::new(nb, 1.0)?;
        for g in [FRAC_PI_8, FRAC_PI_4, FRAC_PI_2] {
            let mut spec = CollisionSpec::zz_optimal();
            spec.g_tau = g;
            let q = chain_qfi(&env, &ChainConfig::deterministic(spec, 1, 1.0)?)?;
            let expect = (1.0 - (2.0 * g).cos()) / 2.0;
            worst = worst.max((q / thermal_fi_nbar(nb)? - expect).abs());
        }
    }
    checks.push(Check::new("single ancilla QFI follows the coupling law", worst, 1e-6));

    let mut worst = 0.0f64;
    for (nb, gt) in [(1.0, 0.5), (0.3, 2.0)] {
        let env = EnvironmentParams::new(nb, 1.0)?;
        let chain = ChainConfig::deterministic(CollisionSpec::zz_optimal(), 2, gt)?;
        let f2 = chain_qfi(&env, &chain)?;
        let f_th = thermal_fi_nbar(nb)?;
        let d = delta_analytic(nb, env.effective_rate(gt))?;
        worst = worst.max(((f2 - f_th) - d).abs() / d);
    }
    checks.push(Check::new("closed-form Delta matches two-ancilla simulation", worst, 1e-5));

    let env = EnvironmentParams::new(1.0, 1.0)?;
    let chain = ChainConfig::deterministic(CollisionSpec::zz_optimal(), 2, 0.4)?;
    let build = |nb: f64| Ok::<_, Error>(chain.run(&EnvironmentParams::new(nb, 1.0)?)?.joint_ancillas);
    let cfi = classical_fi(build, 1.0, &optimal_measurement_basis(2)?)?;
    let qfi = chain_qfi(&env, &chain)?;
    checks.push(Check::new("y-basis measurement saturates the QFI", (cfi - qfi).abs() / qfi, 1e-6));

    let pair = BipartiteState::adjacent_ancillas(&chain.run(&env)?.joint_ancillas, 0)?;
    let d = discord(&pair, Side::A)?.max(discord(&pair, Side::B)?);
    checks.push(Check::new("adjacent ancillas carry no discord", d, 1e-6));

    let det = average_delta(&WtdSpec::deterministic(0.5)?, 2.0, 1.0)?;
    let sharp = average_delta(&WtdSpec::weibull(50.0, 0.5)?, 2.0, 1.0)?;
    checks.push(Check::new("sharp Weibull law approaches equal spacing", (sharp - det).abs() / det, 2e-2));

    Ok(checks)
}
