//! Iterative joint blocklength/power allocation.
//!
//! Each outer round anchors a convex majorant of the leakage-failure
//! probability at the current point and minimizes it with a log-barrier Newton
//! method; the minimizer becomes the next anchor. The actual LFP therefore never
//! increases from one round to the next.

use std::sync::OnceLock;

use crate::bounds::{single_eve_surrogate, LocalPoint, Surrogate};
use crate::convexity::{omega_mp, rate_threshold_max};
use crate::error::{Error, Result};
use crate::fbl::{lfp, omega, reliability_pair, ChannelSpec, EveModel, ReliabilityPair, Resources, Scenario};
use crate::multi_eve::{scenario_pair, super_gain};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop once consecutive actual LFP values differ by at most this much.
    pub mu_th: f64,
    pub max_iter: usize,
    /// Newton-decrement tolerance of each barrier stage.
    pub inner_tol: f64,
    /// Starting point; `None` picks the best of several balanced starts, see [`initial_point`].
    pub init: Option<Resources>,
    pub m_min: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { mu_th: 1e-8, max_iter: 100, inner_tol: 1e-9, init: None, m_min: 1.0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_th > 0.0) {
            return Err(Error::BadConfig(format!("mu_th must be > 0, got {}", self.mu_th)));
        }
        if self.max_iter == 0 {
            return Err(Error::BadConfig("max_iter must be >= 1".into()));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::BadConfig(format!("inner_tol must be > 0, got {}", self.inner_tol)));
        }
        if !(self.m_min >= 1.0) {
            return Err(Error::BadConfig(format!("m_min must be >= 1, got {}", self.m_min)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub k: usize,
    pub m: f64,
    pub p: f64,
    /// Surrogate value at this round's minimizer (the actual LFP for `k = 0`).
    pub eps_hat: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub iterations: Vec<TraceStep>,
    pub converged: bool,
    pub rounds_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub m_star: u32,
    pub p_star: f64,
    pub eps_lf: f64,
    pub pair: ReliabilityPair,
    /// Relaxed blocklength before rounding.
    pub m_relaxed: f64,
    pub trace: SolveTrace,
}

/// Result of one convex inner solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSolution {
    pub m: f64,
    pub p: f64,
    /// Surrogate value at `(m, p)`.
    pub value: f64,
    pub newton_steps: usize,
    /// Norm of the barrier gradient at the last stage, in scaled coordinates.
    pub kkt_residual: f64,
}

/// Largest rate threshold over SNRs in (0, 100].
pub fn global_rate_threshold() -> f64 {
    static CELL: OnceLock<f64> = OnceLock::new();
    *CELL.get_or_init(|| rate_threshold_max(100.0).map(|(_, r)| r).unwrap_or(0.0))
}

/// Blocklength range searched by the solver: `[m_min, min(m_cap, d/r_max)]`,
/// which keeps every iterate where ω is jointly concave.
pub fn blocklength_range(d: f64, m_cap: u32, cfg: &SolverConfig) -> (f64, f64) {
    let thr = global_rate_threshold();
    let cap = f64::from(m_cap);
    let hi = if thr > 0.0 { cap.min(d / thr) } else { cap };
    (cfg.m_min.min(hi), hi)
}

/// The parts of a scenario the iteration needs, independent of the
/// eavesdropper model.
pub(crate) trait AllocationModel {
    fn packet_bits(&self) -> f64;
    fn m_cap(&self) -> u32;
    fn p_cap(&self) -> f64;
    fn pair(&self, m: f64, p: f64) -> Result<ReliabilityPair>;
    fn surrogate(&self, m: f64, p: f64) -> Result<Box<dyn Surrogate>>;
    /// SNR per watt of Bob and of the eavesdropper that dominates the start.
    fn balance_links(&self) -> (f64, f64);
}

struct SingleEve<'a> {
    scenario: &'a Scenario,
    eve: ChannelSpec,
}

impl AllocationModel for SingleEve<'_> {
    fn packet_bits(&self) -> f64 {
        self.scenario.packet_bits()
    }
    fn m_cap(&self) -> u32 {
        self.scenario.m_cap
    }
    fn p_cap(&self) -> f64 {
        self.scenario.p_cap
    }
    fn pair(&self, m: f64, p: f64) -> Result<ReliabilityPair> {
        reliability_pair(self.packet_bits(), &self.scenario.bob, &self.eve, &Resources::new(m, p)?)
    }
    fn surrogate(&self, m: f64, p: f64) -> Result<Box<dyn Surrogate>> {
        let reduced = self.reduced()?;
        let lp = LocalPoint::new(&reduced, m, p)?;
        Ok(Box::new(single_eve_surrogate(&reduced, &lp)?))
    }
    fn balance_links(&self) -> (f64, f64) {
        (self.scenario.bob.snr_per_watt(), self.eve.snr_per_watt())
    }
}

impl SingleEve<'_> {
    fn reduced(&self) -> Result<Scenario> {
        let s = self.scenario;
        Scenario::single(s.d, s.bob, self.eve, s.m_cap, s.p_cap)
    }
}

/// Power at which `ω_b + ω_e = 0` at blocklength `m`, i.e. Bob's error equals
/// Eve's leakage.
pub fn initial_point(d: f64, k_b: f64, k_e: f64, m: f64, p_cap: f64) -> f64 {
    let f = |lp: f64| {
        let p = lp.exp();
        omega(k_b * p, d, m).unwrap_or(f64::NEG_INFINITY) + omega(k_e * p, d, m).unwrap_or(f64::NEG_INFINITY)
    };
    let (mut lo, mut hi) = ((p_cap * 1e-12).ln(), p_cap.ln());
    if f(hi) <= 0.0 {
        return p_cap;
    }
    if f(lo) >= 0.0 {
        return lo.exp();
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Scaled coordinates `x = (m/m_hi, ln(p/p_cap))`.
struct Frame {
    m_scale: f64,
    p_cap: f64,
    u_lo: f64,
    frozen_m: bool,
}

impl Frame {
    fn x_to_mp(&self, x: [f64; 2]) -> (f64, f64) {
        (x[0] * self.m_scale, self.p_cap * x[1].exp())
    }
    fn mp_to_x(&self, m: f64, p: f64) -> [f64; 2] {
        [m / self.m_scale, (p / self.p_cap).ln()]
    }
}

struct BarrierEval {
    value: f64,
    grad: [f64; 2],
    hess: [[f64; 2]; 2],
    objective: f64,
}

/// Barrier function `F/F0 − μ·Σ ln(slack)` with derivatives, or `None` if `x`
/// is not strictly feasible.
fn barrier(sur: &dyn Surrogate, fr: &Frame, x: [f64; 2], mu: f64, f0: f64, derivs: bool) -> Option<BarrierEval> {
    let (m, p) = fr.x_to_mp(x);
    let s_lo = x[0] - fr.u_lo;
    let s_hi = 1.0 - x[0];
    let s_p = -x[1];
    if !fr.frozen_m && (s_lo <= 0.0 || s_hi <= 0.0) {
        return None;
    }
    if s_p <= 0.0 || !(m > 0.0 && p > 0.0 && p.is_finite()) {
        return None;
    }
    let links = sur.links();
    let floors = sur.omega_floors();
    let n = links.len();
    let d = sur.packet_bits();
    let mut omegas = Vec::with_capacity(n);
    let mut og = Vec::with_capacity(n);
    let mut oh = Vec::with_capacity(n);
    for &k in links {
        let (w, g, h) = omega_mp(k, d, m, p);
        // (m, p) → (u, v): ∂u = M∂m, ∂v = p∂p, ∂vv = p²∂pp + p∂p
        let ms = fr.m_scale;
        let gs = [ms * g[0], p * g[1]];
        let hs = [[ms * ms * h[0][0], ms * p * h[0][1]], [ms * p * h[1][0], p * p * h[1][1] + p * g[1]]];
        omegas.push(w);
        og.push(gs);
        oh.push(hs);
    }
    let mut value = 0.0;
    let mut grad = [0.0; 2];
    let mut hess = [[0.0; 2]; 2];
    for j in 0..n {
        let s = omegas[j] - floors[j];
        if floors[j].is_finite() {
            if !(s > 0.0) {
                return None;
            }
            value -= mu * s.ln();
            if derivs {
                for a in 0..2 {
                    grad[a] -= mu * og[j][a] / s;
                    for b in 0..2 {
                        hess[a][b] -= mu * (oh[j][a][b] / s - og[j][a] * og[j][b] / (s * s));
                    }
                }
            }
        }
    }
    let (fv, fg, fh) = sur.value_grad_hess(&omegas);
    if !fv.is_finite() {
        return None;
    }
    let objective = fv;
    value += fv / f0;
    value -= mu * s_p.ln();
    if !fr.frozen_m {
        value -= mu * (s_lo.ln() + s_hi.ln());
    }
    if derivs {
        for j in 0..n {
            for a in 0..2 {
                grad[a] += fg[j] / f0 * og[j][a];
                for b in 0..2 {
                    hess[a][b] += fg[j] / f0 * oh[j][a][b];
                    for l in 0..n {
                        hess[a][b] += fh[j * n + l] / f0 * og[j][a] * og[l][b];
                    }
                }
            }
        }
        grad[1] += mu / s_p;
        hess[1][1] += mu / (s_p * s_p);
        if fr.frozen_m {
            grad[0] = 0.0;
            hess[0] = [1.0, 0.0];
            hess[1][0] = 0.0;
        } else {
            grad[0] += -mu / s_lo + mu / s_hi;
            hess[0][0] += mu / (s_lo * s_lo) + mu / (s_hi * s_hi);
        }
    }
    Some(BarrierEval { value, grad, hess, objective })
}

/// Solves `(H + λI)·dx = −g`, raising λ until the shifted matrix is positive definite.
fn newton_direction(g: [f64; 2], h: [[f64; 2]; 2]) -> [f64; 2] {
    let sym = 0.5 * (h[0][1] + h[1][0]);
    let mean = 0.5 * (h[0][0] + h[1][1]);
    let rad = (0.5 * (h[0][0] - h[1][1])).hypot(sym);
    let lmin = mean - rad;
    let scale = (mean.abs() + rad).max(1e-300);
    let lambda = if lmin > 1e-10 * scale { 0.0 } else { -lmin + 1e-8 * scale };
    let a = h[0][0] + lambda;
    let c = h[1][1] + lambda;
    let det = a * c - sym * sym;
    [-(c * g[0] - sym * g[1]) / det, -(a * g[1] - sym * g[0]) / det]
}

pub(crate) struct Box2 {
    pub m_lo: f64,
    pub m_hi: f64,
    pub p_cap: f64,
}

/// Minimizes `sur` over the resource box subject to its ω floors, starting at
/// `(m0, p0)`, which must be strictly feasible.
pub(crate) fn minimize_surrogate(
    sur: &dyn Surrogate,
    start: (f64, f64),
    bx: &Box2,
    cfg: &SolverConfig,
) -> Result<InnerSolution> {
    let span = bx.m_hi - bx.m_lo;
    let fr = Frame {
        m_scale: bx.m_hi,
        p_cap: bx.p_cap,
        u_lo: bx.m_lo / bx.m_hi,
        frozen_m: span <= 1e-9 * bx.m_hi,
    };
    let (m0, p0) = start;
    let mut x = fr.mp_to_x(m0, p0);
    // move the start strictly inside the box
    if !fr.frozen_m {
        let pad = 1e-9 * (1.0 - fr.u_lo);
        x[0] = x[0].clamp(fr.u_lo + pad, 1.0 - pad);
    } else {
        x[0] = 1.0;
    }
    x[1] = x[1].min(-1e-9);
    let f0 = sur.value_at(m0, p0)?.max(f64::MIN_POSITIVE);
    if barrier(sur, &fr, x, 1.0, f0, false).is_none() {
        return Err(Error::InfeasibleConstraints);
    }

    let mut best = (f64::INFINITY, x);
    let mut steps = 0;
    let mut residual = f64::INFINITY;
    let mut mu = 1e-2;
    while mu >= 1e-13 {
        for _ in 0..100 {
            let Some(cur) = barrier(sur, &fr, x, mu, f0, true) else { break };
            if cur.objective < best.0 {
                best = (cur.objective, x);
            }
            residual = cur.grad[0].hypot(cur.grad[1]);
            let dx = newton_direction(cur.grad, cur.hess);
            let slope = cur.grad[0] * dx[0] + cur.grad[1] * dx[1];
            if !(slope < 0.0) || -slope <= 2.0 * cfg.inner_tol * mu.max(1e-3) {
                break;
            }
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial = [x[0] + t * dx[0], x[1] + t * dx[1]];
                if let Some(next) = barrier(sur, &fr, trial, mu, f0, false) {
                    if next.value <= cur.value + 1e-4 * t * slope {
                        x = trial;
                        moved = true;
                        if next.objective < best.0 {
                            best = (next.objective, x);
                        }
                        break;
                    }
                }
                t *= 0.5;
            }
            steps += 1;
            if !moved {
                break;
            }
        }
        mu *= 0.1;
    }
    let (m, p) = fr.x_to_mp(best.1);
    Ok(InnerSolution { m, p, value: best.0, newton_steps: steps, kkt_residual: residual })
}

/// Minimizes the one-Eve surrogate anchored at `lp` over the solver's box.
pub fn inner_minimize(scenario: &Scenario, lp: &LocalPoint, cfg: &SolverConfig) -> Result<InnerSolution> {
    let sur = single_eve_surrogate(scenario, lp)?;
    let (m_lo, m_hi) = blocklength_range(scenario.packet_bits(), scenario.m_cap, cfg);
    let bx = Box2 { m_lo, m_hi, p_cap: scenario.p_cap };
    minimize_surrogate(&sur, (lp.m_hat, lp.p_hat), &bx, cfg)
}

/// Blocklengths tried for the default start, spread geometrically over the range.
const START_POINTS: usize = 9;

/// The balanced start at mid-range blocklength, unless the balanced power or
/// full power at one of [`START_POINTS`] geometrically spread blocklengths
/// beats it by more than `mu_th`. The mid-range start alone stalls when Eve's
/// channel is the stronger one: the LFP is then flat near one around it.
fn start_candidates(model: &dyn AllocationModel, m_lo: f64, m_hi: f64, mu_th: f64) -> Result<(f64, f64)> {
    let d = model.packet_bits();
    let (kb, ke) = model.balance_links();
    let p_cap = model.p_cap();
    let mid = 0.5 * (m_lo + m_hi);
    let p_mid = initial_point(d, kb, ke, mid, p_cap);
    let mut best = (lfp(&model.pair(mid, p_mid)?), mid, p_mid);
    for i in 0..START_POINTS {
        let t = i as f64 / (START_POINTS - 1) as f64;
        let m = if i + 1 == START_POINTS { m_hi } else { (m_lo.ln() + t * (m_hi.ln() - m_lo.ln())).exp() };
        for p in [initial_point(d, kb, ke, m, p_cap), p_cap] {
            let eps = lfp(&model.pair(m, p)?);
            if eps < best.0 - mu_th {
                best = (eps, m, p);
            }
        }
    }
    Ok((best.1, best.2))
}

pub(crate) fn run_allocation(model: &dyn AllocationModel, cfg: &SolverConfig) -> Result<AllocationResult> {
    cfg.validate()?;
    let d = model.packet_bits();
    let (m_lo, m_hi) = blocklength_range(d, model.m_cap(), cfg);
    let bx = Box2 { m_lo, m_hi, p_cap: model.p_cap() };
    let (m0, p0) = match cfg.init {
        Some(r) => {
            if !(r.m >= m_lo && r.m <= m_hi && r.p > 0.0 && r.p <= bx.p_cap) {
                return Err(Error::BadConfig(format!(
                    "initial point ({}, {}) lies outside [{m_lo}, {m_hi}] x (0, {}]",
                    r.m, r.p, bx.p_cap
                )));
            }
            (r.m, r.p)
        }
        None => start_candidates(model, m_lo, m_hi, cfg.mu_th)?,
    };
    let pair0 = model.pair(m0, p0)?;
    let mut eps = lfp(&pair0);
    let mut cur = (m0, p0);
    let mut iterations = vec![TraceStep { k: 0, m: m0, p: p0, eps_hat: eps, eps }];
    if model.surrogate(m0, p0).is_err() {
        return Err(Error::BadConfig(format!(
            "initial point ({m0}, {p0}) gives a degenerate surrogate"
        )));
    }
    let mut converged = false;
    let mut rounds = 0;
    for k in 1..=cfg.max_iter {
        rounds = k;
        let sur = match model.surrogate(cur.0, cur.1) {
            Ok(s) => s,
            Err(Error::DegenerateLocalPoint(_)) => break,
            Err(e) => return Err(e),
        };
        let sol = match minimize_surrogate(sur.as_ref(), cur, &bx, cfg) {
            Ok(s) => s,
            Err(Error::InfeasibleConstraints) if k > 1 => break,
            Err(e) => return Err(e),
        };
        let next = lfp(&model.pair(sol.m, sol.p)?);
        if next > eps {
            // rounding noise in the inner solve; keep the current iterate
            converged = true;
            break;
        }
        iterations.push(TraceStep { k, m: sol.m, p: sol.p, eps_hat: sol.value, eps: next });
        let change = eps - next;
        cur = (sol.m, sol.p);
        eps = next;
        if change <= cfg.mu_th {
            converged = true;
            break;
        }
    }
    let m_star = round_with(cur.0, model.m_cap(), |m| model.pair(m, cur.1).map(|p| lfp(&p)))?;
    let pair = model.pair(f64::from(m_star), cur.1)?;
    Ok(AllocationResult {
        m_star,
        p_star: cur.1,
        eps_lf: lfp(&pair),
        pair,
        m_relaxed: cur.0,
        trace: SolveTrace { iterations, converged, rounds_used: rounds },
    })
}

pub(crate) fn round_with<F: Fn(f64) -> Result<f64>>(m_relaxed: f64, m_cap: u32, eval: F) -> Result<u32> {
    let cap = f64::from(m_cap);
    let lo = m_relaxed.floor().clamp(1.0, cap);
    let hi = m_relaxed.ceil().clamp(1.0, cap);
    if lo == hi {
        return Ok(lo as u32);
    }
    Ok(if eval(hi)? < eval(lo)? { hi as u32 } else { lo as u32 })
}

/// Integer neighbour of `m_relaxed` with the smaller actual LFP at power `p_star`;
/// ties go to the smaller blocklength.
pub fn round_blocklength(m_relaxed: f64, p_star: f64, scenario: &Scenario) -> Result<u32> {
    if !(m_relaxed >= 1.0) {
        return Err(Error::InvalidArgument(format!("relaxed blocklength must be >= 1, got {m_relaxed}")));
    }
    round_with(m_relaxed, scenario.m_cap, |m| {
        scenario_pair(scenario, &Resources::new(m, p_star)?).map(|p| lfp(&p))
    })
}

/// Joint allocation for one eavesdropper, or for colluding eavesdroppers
/// merged into one by maximum-ratio combining.
pub fn solve_joint(scenario: &Scenario, cfg: &SolverConfig) -> Result<AllocationResult> {
    let eve = match (scenario.eves.len(), scenario.eve_model) {
        (1, _) => scenario.eves[0],
        (_, EveModel::Super) => super_gain(&scenario.eves)?,
        (n, EveModel::Passive) => return Err(Error::WrongModule(n)),
    };
    run_allocation(&SingleEve { scenario, eve }, cfg)
}
