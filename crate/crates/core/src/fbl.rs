//! Finite-blocklength quantities for a single link: SNR, capacity, dispersion,
//! the normal-approximation decoding error and the leakage-failure probability.
//!
//! All rates are in bits per channel use. The decoding error of a packet of `d`
//! bits sent over `m` channel uses at SNR `γ` is `Q(ω)` with
//!
//! ```text
//! ω(γ, d, m) = sqrt(m / V(γ)) · (C(γ) − d/m) · ln 2
//! ```

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_SQRT_PI, LN_2, PI};

use crate::error::{Error, Result};

/// Low-order part of 1/√2 so that `FRAC_1_SQRT_2 + FRAC_1_SQRT_2_LO` is exact to ~1e-33.
const FRAC_1_SQRT_2_LO: f64 = -4.833_646_656_726_456_5e-17;

/// Beyond this magnitude `Q` is reported as exactly 0 or 1.
pub const Q_TAIL_CLAMP: f64 = 38.0;

const Q_INV_BRACKET: f64 = 40.0;
const Q_INV_TOL: f64 = 1e-13;

/// Per-link channel statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    /// Instantaneous gain `z = |h|²`.
    pub gain: f64,
    /// Receiver noise power σ² in watts.
    pub noise_power: f64,
    /// Average gain ξ, only consulted under statistical CSI.
    pub mean_gain: f64,
}

impl ChannelSpec {
    pub fn new(gain: f64, noise_power: f64) -> Result<Self> {
        let mean_gain = if gain > 0.0 { gain } else { 1.0 };
        Self::with_mean_gain(gain, noise_power, mean_gain)
    }

    pub fn with_mean_gain(gain: f64, noise_power: f64, mean_gain: f64) -> Result<Self> {
        if !(gain >= 0.0 && gain.is_finite()) {
            return Err(Error::InvalidArgument(format!("channel gain must be >= 0, got {gain}")));
        }
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise power must be > 0, got {noise_power}"
            )));
        }
        if !(mean_gain > 0.0 && mean_gain.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "mean gain must be > 0, got {mean_gain}"
            )));
        }
        Ok(Self { gain, noise_power, mean_gain })
    }

    /// SNR per watt of transmit power, `z / σ²`.
    pub fn snr_per_watt(&self) -> f64 {
        self.gain / self.noise_power
    }
}

/// Blocklength and transmit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resources {
    pub m: f64,
    pub p: f64,
}

impl Resources {
    pub fn new(m: f64, p: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidArgument(format!("blocklength must be > 0, got {m}")));
        }
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("power must be >= 0, got {p}")));
        }
        Ok(Self { m, p })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EveModel {
    /// Independent eavesdroppers, each decoding on its own.
    Passive,
    /// Colluding eavesdroppers combining their observations (MRC).
    Super,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Packet size in bits.
    pub d: u32,
    pub bob: ChannelSpec,
    pub eves: Vec<ChannelSpec>,
    pub eve_model: EveModel,
    pub m_cap: u32,
    pub p_cap: f64,
}

impl Scenario {
    pub fn new(
        d: u32,
        bob: ChannelSpec,
        eves: Vec<ChannelSpec>,
        eve_model: EveModel,
        m_cap: u32,
        p_cap: f64,
    ) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidArgument("packet size must be at least one bit".into()));
        }
        if eves.is_empty() {
            return Err(Error::InvalidArgument("at least one eavesdropper is required".into()));
        }
        if m_cap < 1 {
            return Err(Error::InvalidArgument("blocklength cap must be >= 1".into()));
        }
        if !(p_cap > 0.0 && p_cap.is_finite()) {
            return Err(Error::InvalidArgument(format!("power cap must be > 0, got {p_cap}")));
        }
        Ok(Self { d, bob, eves, eve_model, m_cap, p_cap })
    }

    /// One legitimate link and one eavesdropper.
    pub fn single(d: u32, bob: ChannelSpec, eve: ChannelSpec, m_cap: u32, p_cap: f64) -> Result<Self> {
        Self::new(d, bob, vec![eve], EveModel::Passive, m_cap, p_cap)
    }

    /// Bob at gain 1.5, Eve at gain 1, both with noise 0.1 W; 320-bit packets,
    /// at most 3000 channel uses and 10 W.
    pub fn reference() -> Self {
        let bob = ChannelSpec::new(1.5, 0.1).expect("valid channel");
        let eve = ChannelSpec::new(1.0, 0.1).expect("valid channel");
        Self::single(320, bob, eve, 3000, 10.0).expect("valid scenario")
    }

    pub fn packet_bits(&self) -> f64 {
        f64::from(self.d)
    }

    /// The single eavesdropper of a one-Eve scenario.
    pub fn sole_eve(&self) -> Result<&ChannelSpec> {
        match self.eves.as_slice() {
            [eve] => Ok(eve),
            eves => Err(Error::WrongModule(eves.len())),
        }
    }
}

/// Decoding error probabilities of Bob and Eve at one operating point.
///
/// `delta` is the leakage probability `1 − eps_e`; it is carried separately so
/// that it keeps full relative precision when `eps_e` is close to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityPair {
    pub eps_b: f64,
    pub eps_e: f64,
    delta: f64,
}

impl ReliabilityPair {
    pub fn new(eps_b: f64, eps_e: f64) -> Result<Self> {
        for (name, v) in [("eps_b", eps_b), ("eps_e", eps_e)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(Self { eps_b, eps_e, delta: 1.0 - eps_e })
    }

    /// Builds the pair from the two ω values, evaluating the leakage as `Q(−ω_e)`.
    pub fn from_omegas(omega_b: f64, omega_e: f64) -> Self {
        Self { eps_b: q(omega_b), eps_e: q(omega_e), delta: q(-omega_e) }
    }

    /// Pair whose leakage was computed separately, e.g. by telescoping.
    pub(crate) fn with_leakage(eps_b: f64, eps_e: f64, delta: f64) -> Self {
        Self { eps_b, eps_e, delta }
    }

    pub fn leakage(&self) -> f64 {
        self.delta
    }
}

pub fn snr(ch: &ChannelSpec, p: f64) -> f64 {
    p * ch.gain / ch.noise_power
}

pub fn capacity(gamma: f64) -> f64 {
    gamma.ln_1p() / LN_2
}

pub fn dispersion(gamma: f64) -> f64 {
    // 1 − (1+γ)^−2 without cancellation at small γ
    -(-2.0 * gamma.ln_1p()).exp_m1()
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Gaussian tail probability `Q(x) = ½ erfc(x/√2)`.
pub fn q(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > Q_TAIL_CLAMP {
        return 0.0;
    }
    if x < -Q_TAIL_CLAMP {
        return 1.0;
    }
    // Split x/√2 into hi + lo so the rounding of the argument does not get
    // amplified by the steep tail of erfc.
    let t = x * FRAC_1_SQRT_2;
    let t_lo = x.mul_add(FRAC_1_SQRT_2, -t) + x * FRAC_1_SQRT_2_LO;
    let e = libm::erfc(t) - t_lo * FRAC_2_SQRT_PI * (-t * t).exp();
    (0.5 * e).clamp(0.0, 1.0)
}

/// Mills ratio `Q(x)/φ(x)` for large positive `x`, by its continued fraction.
pub(crate) fn mills_ratio_tail(x: f64) -> f64 {
    debug_assert!(x > 4.0);
    let mut acc = x;
    for k in (1..=60).rev() {
        acc = x + f64::from(k) / acc;
    }
    1.0 / acc
}

/// `ln Q(x)`, finite for all finite `x`.
pub fn ln_q(x: f64) -> f64 {
    if x > 8.0 {
        -0.5 * x * x - 0.5 * (2.0 * PI).ln() + mills_ratio_tail(x).ln()
    } else if x < -Q_TAIL_CLAMP {
        0.0
    } else {
        q(x).ln()
    }
}

/// Inverse of [`q`] on (0, 1), by bracketed bisection/Newton on [−40, 40].
pub fn q_inv(y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::InvalidArgument(format!("Q⁻¹ needs y in (0, 1), got {y}")));
    }
    let (mut lo, mut hi) = (-Q_INV_BRACKET, Q_INV_BRACKET);
    let mut x = 0.0_f64;
    for _ in 0..8 {
        if q(x) > y {
            lo = x;
        } else {
            hi = x;
        }
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = q(x) - y;
        if f > 0.0 {
            lo = x;
        } else if f < 0.0 {
            hi = x;
        } else {
            return Ok(x);
        }
        let slope = normal_pdf(x);
        let mut next = if slope > 0.0 { x + f / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= Q_INV_TOL * x.abs().max(1.0) || hi - lo <= Q_INV_TOL {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::DegenerateChannel(gamma))
    }
}

fn check_blocklength(d: f64, m: f64) -> Result<()> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidArgument(format!("blocklength must be > 0, got {m}")));
    }
    if !(d >= 1.0 && d.is_finite()) {
        return Err(Error::InvalidArgument(format!("packet size must be >= 1 bit, got {d}")));
    }
    Ok(())
}

/// Unchecked ω; callers guarantee γ > 0, m > 0.
#[inline]
pub(crate) fn omega_raw(gamma: f64, d: f64, m: f64) -> f64 {
    (m / dispersion(gamma)).sqrt() * (gamma.ln_1p() - d * LN_2 / m)
}

pub fn omega(gamma: f64, d: f64, m: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_blocklength(d, m)?;
    Ok(omega_raw(gamma, d, m))
}

/// Normal-approximation decoding error `Q(ω(γ, d, m))`.
pub fn fbl_error(gamma: f64, d: f64, m: f64) -> Result<f64> {
    Ok(q(omega(gamma, d, m)?).clamp(0.0, 1.0))
}

/// Leakage-failure probability `1 − (1 − ε_b)·ε_e`.
pub fn lfp(pair: &ReliabilityPair) -> f64 {
    (pair.eps_b * pair.eps_e + pair.leakage()).clamp(0.0, 1.0)
}

/// ε_LF at a resource point of a one-Eve scenario.
pub fn lfp_at(scenario: &Scenario, res: &Resources) -> Result<(f64, ReliabilityPair)> {
    let eve = scenario.sole_eve()?;
    let pair = reliability_pair(scenario.packet_bits(), &scenario.bob, eve, res)?;
    Ok((lfp(&pair), pair))
}

pub(crate) fn reliability_pair(
    d: f64,
    bob: &ChannelSpec,
    eve: &ChannelSpec,
    res: &Resources,
) -> Result<ReliabilityPair> {
    let omega_b = omega(snr(bob, res.p), d, res.m)?;
    let omega_e = omega(snr(eve, res.p), d, res.m)?;
    Ok(ReliabilityPair::from_omegas(omega_b, omega_e))
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Maximal rate in bits per channel use at target error `eps`.
///
/// The dispersion penalty is converted to bits so that
/// `fbl_error(γ, m·max_rate(γ, m, ε), m) = ε`.
pub fn max_rate(gamma: f64, m: f64, eps: f64) -> Result<f64> {
    check_open_unit("target error", eps)?;
    check_gamma(gamma)?;
    check_blocklength(1.0, m)?;
    Ok(capacity(gamma) - (dispersion(gamma) / m).sqrt() * q_inv(eps)? / LN_2)
}

/// Finite-blocklength secrecy rate for reliability `eps_b` and leakage `delta`.
pub fn secrecy_rate(gamma_b: f64, gamma_e: f64, m: f64, eps_b: f64, delta: f64) -> Result<f64> {
    check_open_unit("eps_b", eps_b)?;
    check_open_unit("delta", delta)?;
    check_gamma(gamma_b)?;
    check_gamma(gamma_e)?;
    check_blocklength(1.0, m)?;
    let cs = capacity(gamma_b) - capacity(gamma_e);
    let pen_b = (dispersion(gamma_b) / m).sqrt() * q_inv(eps_b)?;
    let pen_e = (dispersion(gamma_e) / m).sqrt() * q_inv(delta)?;
    Ok(cs - (pen_b + pen_e) / LN_2)
}

/// SNR at which `ω(γ, d, m)` equals `target`; `0` and `∞` stand for targets
/// below or above the attainable range.
pub fn gamma_for_omega(target: f64, d: f64, m: f64) -> Result<f64> {
    check_blocklength(d, m)?;
    let (mut lo, mut hi) = (-700.0_f64, 700.0_f64);
    let f = |lg: f64| omega_raw(lg.exp(), d, m) - target;
    if f(lo) >= 0.0 {
        return Ok(0.0);
    }
    if f(hi) <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let mut x = 0.0_f64.clamp(lo, hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        // Newton in ln γ with a central-difference slope
        let h = 1e-6 * x.abs().max(1.0);
        let slope = (f(x + h) - f(x - h)) / (2.0 * h);
        let mut next = if slope > 0.0 { x - fx / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-13 * x.abs().max(1.0) {
            return Ok(next.exp());
        }
        x = next;
    }
    Ok(x.exp())
}
