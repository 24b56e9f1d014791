//! The four subcommands. Each builds a [`Table`] from a validated config.

use fblsec::constrained::{
    expected_reliability, maximize_throughput, solve_blocklength, solve_blocklength_statistical,
    solve_fixed_leakage, throughput,
};
use fblsec::multi_eve::{scenario_pair, solve_multi};
use fblsec::oracle::{exhaustive_min_lfp, GridSpec};
use fblsec::{lfp, ReliabilityPair, Resources, Scenario};
use rayon::prelude::*;

use crate::config::{Axis, EvalGrid, ExperimentConfig, Objective, SweepConfig};
use crate::error::CliError;
use crate::output::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eval,
    Solve,
    Sweep,
    Oracle,
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Table, CliError> {
    cfg.validate()?;
    match cmd {
        Command::Eval => eval(cfg),
        Command::Solve => solve(cfg),
        Command::Sweep => {
            let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("sweep needs a `sweep` section".into()))?;
            let rows = sweep_rows(cfg, sweep);
            let violations = check_trends(&rows, sweep);
            if !violations.is_empty() {
                return Err(CliError::Trend(violations));
            }
            Ok(sweep_table(&rows))
        }
        Command::Oracle => oracle(cfg),
    }
}

fn tau(scenario: &Scenario, m: f64, pair: &ReliabilityPair) -> f64 {
    scenario.packet_bits() / m * (1.0 - pair.eps_b) * pair.eps_e
}

/// `(m, p, ε_b, ε_e, ε_LF, ε_LF ≥ 0.5)` over the eval grid.
pub fn eval(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let scenario = cfg.scenario.build()?;
    let grid = cfg.eval.clone().unwrap_or_else(|| EvalGrid {
        m: Axis::Range { from: 1.0, to: f64::from(scenario.m_cap), points: 100, log: false },
        p: Axis::Range { from: scenario.p_cap * 1e-4, to: scenario.p_cap, points: 100, log: true },
    });
    let ms = grid.m.values()?;
    let ps = grid.p.values()?;
    let points: Vec<(f64, f64)> = ms.iter().flat_map(|&m| ps.iter().map(move |&p| (m, p))).collect();
    let rows = points
        .par_iter()
        .map(|&(m, p)| {
            let pair = scenario_pair(&scenario, &Resources::new(m, p)?)?;
            let eps = lfp(&pair);
            Ok(vec![m.into(), p.into(), pair.eps_b.into(), pair.eps_e.into(), eps.into(), Cell::Int(u64::from(eps >= 0.5))])
        })
        .collect::<fblsec::Result<Vec<_>>>()?;
    Ok(Table { header: vec!["m", "p", "eps_b", "eps_e", "eps_lf", "flag_insecure"], rows })
}

const SOLVE_HEADER: [&str; 9] = ["source", "k", "m", "p", "eps_lf_hat", "eps_b", "eps_e", "eps_lf", "tau_lf"];

fn oracle_row(scenario: &Scenario, grid: &GridSpec) -> Result<Vec<Cell>, CliError> {
    let r = exhaustive_min_lfp(scenario, grid)?;
    let pair = scenario_pair(scenario, &Resources::new(f64::from(r.m), r.p)?)?;
    Ok(vec![
        "oracle".into(),
        Cell::Empty,
        r.m.into(),
        r.p.into(),
        Cell::Empty,
        pair.eps_b.into(),
        pair.eps_e.into(),
        r.eps_lf.into(),
        tau(scenario, f64::from(r.m), &pair).into(),
    ])
}

/// One row per solver round, the rounded solution, and the oracle optimum
/// when an `oracle` section is present.
pub fn solve(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let scenario = cfg.scenario.build()?;
    let res = solve_multi(&scenario, &cfg.solver_config()?)?;
    let mut t = Table::new(SOLVE_HEADER.to_vec());
    for step in &res.trace.iterations {
        let pair = scenario_pair(&scenario, &Resources::new(step.m, step.p)?)?;
        t.push(vec![
            "iteration".into(),
            step.k.into(),
            step.m.into(),
            step.p.into(),
            step.eps_hat.into(),
            pair.eps_b.into(),
            pair.eps_e.into(),
            step.eps.into(),
            tau(&scenario, step.m, &pair).into(),
        ]);
    }
    if !res.trace.converged {
        eprintln!("warning: solver stopped after {} rounds without converging", res.trace.rounds_used);
    }
    t.push(vec![
        "solver".into(),
        res.trace.rounds_used.into(),
        res.m_star.into(),
        res.p_star.into(),
        Cell::Empty,
        res.pair.eps_b.into(),
        res.pair.eps_e.into(),
        res.eps_lf.into(),
        tau(&scenario, f64::from(res.m_star), &res.pair).into(),
    ]);
    if let Some(grid) = cfg.grid(&scenario) {
        t.push(oracle_row(&scenario, &grid)?);
    }
    Ok(t)
}

/// Exhaustive grid optimum; the default grid when no `oracle` section is given.
pub fn oracle(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let scenario = cfg.scenario.build()?;
    let grid = cfg.grid(&scenario).unwrap_or_else(|| GridSpec::for_scenario(&scenario));
    let mut t = Table::new(SOLVE_HEADER.to_vec());
    t.push(oracle_row(&scenario, &grid)?);
    Ok(t)
}

/// Outcome of one sweep point. A failed point keeps its value and the error.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub m: Option<u32>,
    pub p: Option<f64>,
    pub eps_b: Option<f64>,
    pub eps_e: Option<f64>,
    pub eps_lf: Option<f64>,
    pub tau_lf: Option<f64>,
    pub baseline_eps_lf: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(value: f64, e: impl ToString) -> Self {
        Self {
            value,
            m: None,
            p: None,
            eps_b: None,
            eps_e: None,
            eps_lf: None,
            tau_lf: None,
            baseline_eps_lf: None,
            error: Some(e.to_string()),
        }
    }
}

struct Point {
    m: u32,
    p: f64,
    eps_b: f64,
    eps_e: f64,
    eps_lf: f64,
}

fn optimize(cfg: &ExperimentConfig, objective: Objective) -> Result<(Scenario, Point), CliError> {
    let scenario = cfg.scenario.build()?;
    let from_pair = |m: u32, p: f64| -> Result<Point, CliError> {
        let pair = scenario_pair(&scenario, &Resources::new(f64::from(m), p)?)?;
        Ok(Point { m, p, eps_b: pair.eps_b, eps_e: pair.eps_e, eps_lf: lfp(&pair) })
    };
    let point = match objective {
        Objective::Joint => {
            let r = solve_multi(&scenario, &cfg.solver_config()?)?;
            Point { m: r.m_star, p: r.p_star, eps_b: r.pair.eps_b, eps_e: r.pair.eps_e, eps_lf: r.eps_lf }
        }
        Objective::Blocklength => {
            let p = cfg.power();
            from_pair(solve_blocklength(&scenario, p, &cfg.thresholds()?)?.0, p)?
        }
        Objective::Throughput => {
            let p = cfg.power();
            from_pair(maximize_throughput(&scenario, p, &cfg.thresholds()?)?.0, p)?
        }
        Objective::Statistical => {
            let p = cfg.power();
            let fading = cfg.fading(&scenario)?;
            let (m, _) = solve_blocklength_statistical(&scenario, p, &cfg.thresholds()?, &fading)?;
            let e = expected_reliability(&scenario, &Resources::new(f64::from(m), p)?, &fading)?;
            Point { m, p, eps_b: e.eps_b, eps_e: e.mean_eps_e, eps_lf: e.lfp() }
        }
    };
    Ok((scenario, point))
}

fn sweep_point(cfg: &ExperimentConfig, sweep: &SweepConfig, value: f64) -> SweepRow {
    let run = || -> Result<SweepRow, CliError> {
        let c = cfg.with_value(sweep.variable, value)?;
        let (scenario, pt) = optimize(&c, sweep.objective)?;
        let tau_lf = match sweep.objective {
            Objective::Throughput => throughput(&scenario, pt.m, pt.p)?,
            _ => scenario.packet_bits() / f64::from(pt.m) * (1.0 - pt.eps_b) * pt.eps_e,
        };
        let mut row = SweepRow {
            value,
            m: Some(pt.m),
            p: Some(pt.p),
            eps_b: Some(pt.eps_b),
            eps_e: Some(pt.eps_e),
            eps_lf: Some(pt.eps_lf),
            tau_lf: Some(tau_lf),
            baseline_eps_lf: None,
            error: None,
        };
        if let Some(cap) = sweep.baseline_delta_max {
            match solve_fixed_leakage(&scenario, cap) {
                Ok(b) => row.baseline_eps_lf = Some(b.eps_lf),
                Err(e) => row.error = Some(format!("baseline: {e}")),
            }
        }
        Ok(row)
    };
    run().unwrap_or_else(|e| SweepRow::failed(value, e))
}

/// Evaluates every sweep value concurrently; rows come back sorted by value.
pub fn sweep_rows(cfg: &ExperimentConfig, sweep: &SweepConfig) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = sweep.values.par_iter().map(|&v| sweep_point(cfg, sweep, v)).collect();
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    rows
}

pub const SWEEP_HEADER: [&str; 10] =
    ["value", "m", "p", "eps_b", "eps_e", "eps_lf", "tau_lf", "baseline_eps_lf", "source", "error"];

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(SWEEP_HEADER.to_vec());
    for r in rows {
        let source = if r.m.is_some() { "sweep" } else { "error" };
        t.push(vec![
            r.value.into(),
            r.m.into(),
            r.p.into(),
            r.eps_b.into(),
            r.eps_e.into(),
            r.eps_lf.into(),
            r.tau_lf.into(),
            r.baseline_eps_lf.into(),
            source.into(),
            r.error.as_deref().into(),
        ]);
    }
    t
}

/// Every violated trend assertion of `sweep`, in row order.
pub fn check_trends(rows: &[SweepRow], sweep: &SweepConfig) -> Vec<String> {
    let checking = sweep.trend.is_some() || sweep.resource_trend.is_some() || sweep.baseline_dominates;
    let mut out = Vec::new();
    if !checking {
        return out;
    }
    for r in rows.iter().filter(|r| r.m.is_none()) {
        out.push(format!("value {}: {}", r.value, r.error.as_deref().unwrap_or("failed")));
    }
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.m.is_some()).collect();
    let (metric, pick): (&str, fn(&SweepRow) -> Option<f64>) = match sweep.objective {
        Objective::Throughput => ("tau_lf", |r| r.tau_lf),
        _ => ("eps_lf", |r| r.eps_lf),
    };
    let mut series = |name: &str, dir, get: &dyn Fn(&SweepRow) -> Option<f64>| {
        for w in ok.windows(2) {
            let (a, b) = (get(w[0]).unwrap_or(f64::NAN), get(w[1]).unwrap_or(f64::NAN));
            if !crate::config::Direction::holds(dir, a, b) {
                out.push(format!("{name} not {dir} from value {} ({a}) to {} ({b})", w[0].value, w[1].value));
            }
        }
    };
    if let Some(dir) = sweep.trend {
        series(metric, dir, &pick);
    }
    if let Some(dir) = sweep.resource_trend {
        series("m", dir, &|r| r.m.map(f64::from));
        series("p", dir, &|r| r.p);
    }
    if sweep.baseline_dominates {
        for r in &ok {
            match (r.baseline_eps_lf, r.eps_lf) {
                (Some(b), Some(e)) if b >= e => {}
                (Some(b), Some(e)) => out.push(format!("value {}: baseline {b} below optimum {e}", r.value)),
                _ => out.push(format!("value {}: no baseline", r.value)),
            }
        }
    }
    out
}
