//! Convex upper bounds used by the iterative solver: the weighted AM-GM product
//! bound, the exponential majorant of the Q-function, and the composite
//! leakage-failure surrogate built from them.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fbl::{ln_q, mills_ratio_tail, omega, q, snr, Scenario};

/// Exponents are clamped here before `exp` so that far-away trial points give
/// huge but finite values.
const MAX_EXPONENT: f64 = 700.0;

/// `(1/∏F̂ᵢ)·((Σ F̂ᵢfᵢ)/N)^N` with `F̂ᵢ = f̂₁/f̂ᵢ`, an upper bound on `∏fᵢ` that is
/// tight when `f = f̂`.
pub fn am_gm_upper(f: &[f64], f_hat: &[f64]) -> Result<f64> {
    if f.is_empty() || f.len() != f_hat.len() {
        return Err(Error::InvalidArgument(format!(
            "need two non-empty lists of equal length, got {} and {}",
            f.len(),
            f_hat.len()
        )));
    }
    if f.iter().chain(f_hat).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("AM-GM entries must be positive and finite".into()));
    }
    let n = f.len() as f64;
    // Same quantity written as ∏f̂ᵢ·(mean fᵢ/f̂ᵢ)^N, which avoids forming f̂₁^N.
    let ln_prod_hat: f64 = f_hat.iter().map(|v| v.ln()).sum();
    let mean_ratio = f.iter().zip(f_hat).map(|(a, b)| a / b).sum::<f64>() / n;
    Ok((ln_prod_hat + n * mean_ratio.ln()).exp())
}

/// Coefficients of the exponential bound `Q(ω) ≤ b·e^(−aω) + c`, tangent to
/// `Q` at `omega_hat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpBoundCoeffs {
    pub a: f64,
    /// `b` itself; overflows to infinity for anchors far in the upper tail, so
    /// evaluation goes through `ln_b`.
    pub b: f64,
    pub ln_b: f64,
    pub c: f64,
    pub omega_hat: f64,
}

/// Inverse Mills ratio `φ(x)/Q(x)`.
fn inverse_mills(x: f64) -> f64 {
    if x > 8.0 {
        1.0 / mills_ratio_tail(x)
    } else {
        let ln_phi = -0.5 * x * x - 0.5 * (2.0 * PI).ln();
        (ln_phi - ln_q(x)).exp()
    }
}

pub fn exp_bound_coeffs(omega_hat: f64) -> ExpBoundCoeffs {
    // φ/Q always exceeds ω̂, but the max is kept to mirror the definition.
    let a = inverse_mills(omega_hat).max(omega_hat).max(f64::MIN_POSITIVE);
    let ln_q_hat = ln_q(omega_hat);
    let ln_b = ln_q_hat + a * omega_hat;
    // Zero in exact arithmetic; a negative rounding residue would push the
    // bound below Q far in the tail.
    let c = (q(omega_hat) - (ln_b - a * omega_hat).exp()).max(0.0);
    ExpBoundCoeffs { a, b: ln_b.exp(), ln_b, c, omega_hat }
}

impl ExpBoundCoeffs {
    /// `ln Q(ω̂)`, exact even where `Q(ω̂)` underflows.
    pub fn ln_value_at_anchor(&self) -> f64 {
        ln_q(self.omega_hat)
    }

    /// Smallest ω with `b·e^(−aω) + c ≤ 1`.
    pub fn unit_floor(&self) -> f64 {
        (self.ln_b - (-self.c).ln_1p()) / self.a
    }
}

/// Exponential majorant of `Q(ω)`.
pub fn q_upper(omega: f64, coeffs: &ExpBoundCoeffs) -> f64 {
    (coeffs.ln_b - coeffs.a * omega).min(MAX_EXPONENT).exp() + coeffs.c
}

/// Majorant of `1 − Q(ω)`, with `coeffs` built at `−ω̂`.
pub fn one_minus_q_upper(omega: f64, coeffs: &ExpBoundCoeffs) -> f64 {
    q_upper(-omega, coeffs)
}

/// Operating point at which the surrogate is anchored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPoint {
    pub m_hat: f64,
    pub p_hat: f64,
    pub eps_b_hat: f64,
    pub eps_e_hat: f64,
    pub omega_b_hat: f64,
    pub omega_e_hat: f64,
}

impl LocalPoint {
    /// Local point of a one-Eve scenario at `(m, p)`.
    pub fn new(scenario: &Scenario, m: f64, p: f64) -> Result<Self> {
        let eve = scenario.sole_eve()?;
        let d = scenario.packet_bits();
        let omega_b_hat = omega(snr(&scenario.bob, p), d, m)?;
        let omega_e_hat = omega(snr(eve, p), d, m)?;
        Ok(Self {
            m_hat: m,
            p_hat: p,
            eps_b_hat: q(omega_b_hat),
            eps_e_hat: q(omega_e_hat),
            omega_b_hat,
            omega_e_hat,
        })
    }
}

/// Whether a factor bounds a decoding error `Q(ω)` or a leakage `1 − Q(ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Error,
    Leakage,
}

/// One factor of a product term: the bound of `Tail` on link `link`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Factor {
    pub link: usize,
    pub tail: Tail,
}

/// A convex-in-ω majorant of a leakage-failure probability, expressed through
/// the ω of each link involved.
///
/// The solver only needs the value and the first two derivatives in ω, the
/// per-link SNR-per-watt to map power to SNR, and lower bounds on ω.
pub trait Surrogate {
    /// SNR per watt of each link, in the order used by `omegas`.
    fn links(&self) -> &[f64];
    fn packet_bits(&self) -> f64;
    /// ω of each link at the anchor.
    fn anchor_omegas(&self) -> &[f64];
    /// Value, gradient and row-major Hessian with respect to the link ω's.
    fn value_grad_hess(&self, omegas: &[f64]) -> (f64, Vec<f64>, Vec<f64>);
    /// Lower bounds on each ω (−∞ when unconstrained) expressing that every
    /// bounded error probability stays at most one.
    fn omega_floors(&self) -> &[f64];

    fn omegas_at(&self, m: f64, p: f64) -> Result<Vec<f64>> {
        let d = self.packet_bits();
        self.links().iter().map(|k| omega(k * p, d, m)).collect()
    }

    fn value_at(&self, m: f64, p: f64) -> Result<f64> {
        Ok(self.value_grad_hess(&self.omegas_at(m, p)?).0)
    }
}

#[derive(Debug, Clone)]
struct LinkBounds {
    error: ExpBoundCoeffs,
    leakage: ExpBoundCoeffs,
}

/// Sum of products of exponential bounds, each product majorized by the
/// weighted AM-GM inequality `∏fᵢ ≤ ∏f̂ᵢ·((1/K)Σ fᵢ/f̂ᵢ)^K`.
#[derive(Debug, Clone)]
pub struct ProductBound {
    links: Vec<f64>,
    d: f64,
    anchors: Vec<f64>,
    bounds: Vec<LinkBounds>,
    terms: Vec<Vec<Factor>>,
    floors: Vec<f64>,
}

impl ProductBound {
    /// `links` are SNR-per-watt values, `anchors` the ω of each link at the
    /// local point, and `terms` the products whose sum is bounded.
    pub fn new(links: Vec<f64>, d: f64, anchors: Vec<f64>, terms: Vec<Vec<Factor>>) -> Result<Self> {
        if links.len() != anchors.len() || links.is_empty() {
            return Err(Error::InvalidArgument("one anchor ω per link is required".into()));
        }
        if terms.iter().any(|t| t.is_empty() || t.iter().any(|f| f.link >= links.len())) {
            return Err(Error::InvalidArgument("malformed product term".into()));
        }
        let bounds: Vec<LinkBounds> = anchors
            .iter()
            .map(|&w| LinkBounds { error: exp_bound_coeffs(w), leakage: exp_bound_coeffs(-w) })
            .collect();
        let mut floors = vec![f64::NEG_INFINITY; links.len()];
        for f in terms.iter().flatten().filter(|f| f.tail == Tail::Error) {
            floors[f.link] = bounds[f.link].error.unit_floor();
        }
        Ok(Self { links, d, anchors, bounds, terms, floors })
    }

    fn factor_coeffs(&self, f: &Factor) -> (&ExpBoundCoeffs, f64) {
        match f.tail {
            Tail::Error => (&self.bounds[f.link].error, 1.0),
            Tail::Leakage => (&self.bounds[f.link].leakage, -1.0),
        }
    }
}

impl Surrogate for ProductBound {
    fn links(&self) -> &[f64] {
        &self.links
    }

    fn packet_bits(&self) -> f64 {
        self.d
    }

    fn anchor_omegas(&self) -> &[f64] {
        &self.anchors
    }

    fn omega_floors(&self) -> &[f64] {
        &self.floors
    }

    fn value_grad_hess(&self, omegas: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let n = self.links.len();
        let mut value = 0.0;
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        let mut g1 = vec![0.0; n];
        let mut g2 = vec![0.0; n];
        for term in &self.terms {
            let k = term.len() as f64;
            let mut ln_prod_hat = 0.0;
            let mut mean = 0.0;
            g1.iter_mut().for_each(|v| *v = 0.0);
            g2.iter_mut().for_each(|v| *v = 0.0);
            for f in term {
                let (c, s) = self.factor_coeffs(f);
                // f/f̂ = e^{−s·a·(ω−ω̂)}; c vanishes to rounding because a is the
                // tangent slope of ln Q, so the ratio is taken on the exponential part.
                ln_prod_hat += c.ln_value_at_anchor();
                let ex = (-s * c.a * (omegas[f.link] - self.anchors[f.link])).min(MAX_EXPONENT);
                let r = ex.exp();
                mean += r;
                g1[f.link] += -s * c.a * r;
                g2[f.link] += c.a * c.a * r;
            }
            mean /= k;
            let t = (ln_prod_hat + k * mean.ln()).min(MAX_EXPONENT).exp();
            value += t;
            for j in 0..n {
                grad[j] += t / mean * g1[j];
                hess[j * n + j] += t / mean * g2[j];
                for l in 0..n {
                    hess[j * n + l] += t * (k - 1.0) / (k * mean * mean) * g1[j] * g1[l];
                }
            }
        }
        (value, grad, hess)
    }
}

/// Surrogate of a one-Eve scenario anchored at `lp`:
/// `ε_b·ε_e + δ ≤ ¼(A·ε̂_b + ε̂_e/A)² + δ̂` with `A = √(ε̂_e/ε̂_b)` at the anchor.
pub fn single_eve_surrogate(scenario: &Scenario, lp: &LocalPoint) -> Result<ProductBound> {
    let eve = scenario.sole_eve()?;
    if lp.eps_e_hat <= 0.0 {
        return Err(Error::DegenerateLocalPoint(format!(
            "Eve's error probability vanishes at (m, p) = ({}, {})",
            lp.m_hat, lp.p_hat
        )));
    }
    let bob = Factor { link: 0, tail: Tail::Error };
    let eve_err = Factor { link: 1, tail: Tail::Error };
    let leak = Factor { link: 1, tail: Tail::Leakage };
    ProductBound::new(
        vec![scenario.bob.snr_per_watt(), eve.snr_per_watt()],
        scenario.packet_bits(),
        vec![lp.omega_b_hat, lp.omega_e_hat],
        vec![vec![bob, eve_err], vec![leak]],
    )
}

/// Value of the one-Eve surrogate at `(m, p)`.
pub fn approx_lfp(m: f64, p: f64, scenario: &Scenario, lp: &LocalPoint) -> Result<f64> {
    single_eve_surrogate(scenario, lp)?.value_at(m, p)
}
