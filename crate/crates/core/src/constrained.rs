//! Blocklength-only allocation at fixed power under reliability and leakage
//! thresholds, throughput maximization, the fixed-leakage baseline, and the
//! expected LFP when only Eve's channel statistics are known.

use gauss_quad::GaussHermite;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fbl::{gamma_for_omega, lfp, omega, q, snr, ChannelSpec, ReliabilityPair, Resources, Scenario};
use crate::multi_eve::scenario_pair;
use crate::oracle::{golden_section_max, golden_section_min};

/// Upper limits on Bob's error and Eve's leakage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub delta_max: f64,
    pub eps_b_max: f64,
}

impl Thresholds {
    /// Both limits must lie in (0, 0.5]; the convexity results rely on it.
    pub fn new(delta_max: f64, eps_b_max: f64) -> Result<Self> {
        for (name, v) in [("delta_max", delta_max), ("eps_b_max", eps_b_max)] {
            if !(v > 0.0 && v <= 0.5) {
                return Err(Error::InvalidArgument(format!("{name} must lie in (0, 0.5], got {v}")));
            }
        }
        Ok(Self { delta_max, eps_b_max })
    }
}

/// Smallest `m` in `[1, m_cap]` with `pred(m)`, for a predicate that switches
/// from false to true once.
fn first_true<F: Fn(u32) -> Result<bool>>(m_cap: u32, pred: F) -> Result<Option<u32>> {
    if !pred(m_cap)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0u32, m_cap);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Largest `m` in `[1, m_cap]` with `pred(m)`, for a predicate that switches
/// from true to false once.
fn last_true<F: Fn(u32) -> Result<bool>>(m_cap: u32, pred: F) -> Result<Option<u32>> {
    if !pred(1)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (1u32, m_cap + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

fn interval<FB, FD>(m_cap: u32, th: &Thresholds, eps_b: FB, delta: FD) -> Result<Option<(u32, u32)>>
where
    FB: Fn(u32) -> Result<f64>,
    FD: Fn(u32) -> Result<f64>,
{
    let lo = first_true(m_cap, |m| Ok(eps_b(m)? <= th.eps_b_max))?;
    let hi = last_true(m_cap, |m| Ok(delta(m)? <= th.delta_max))?;
    Ok(match (lo, hi) {
        (Some(lo), Some(hi)) if lo <= hi => Some((lo, hi)),
        _ => None,
    })
}

fn pair_at(scenario: &Scenario, m: u32, p: f64) -> Result<ReliabilityPair> {
    scenario_pair(scenario, &Resources::new(f64::from(m), p)?)
}

fn check_power(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("power must be > 0, got {p}")))
    }
}

/// Integer blocklengths at power `p` meeting both thresholds, or `None`.
///
/// Bob's error falls and the leakage rises with `m`, so the set is an interval
/// whose ends are found by bisection.
pub fn feasible_m_interval(scenario: &Scenario, p: f64, th: &Thresholds) -> Result<Option<(u32, u32)>> {
    check_power(p)?;
    interval(
        scenario.m_cap,
        th,
        |m| Ok(pair_at(scenario, m, p)?.eps_b),
        |m| Ok(pair_at(scenario, m, p)?.leakage()),
    )
}

/// Blocklength minimizing the LFP at power `p` within the thresholds.
pub fn solve_blocklength(scenario: &Scenario, p: f64, th: &Thresholds) -> Result<(u32, f64)> {
    let (lo, hi) = feasible_m_interval(scenario, p, th)?.ok_or(Error::InfeasibleThresholds)?;
    let f = |m: u32| pair_at(scenario, m, p).map(|x| lfp(&x)).unwrap_or(f64::INFINITY);
    Ok(golden_section_min(f, lo, hi))
}

/// Secrecy effective throughput `(d/m)·(1 − ε_LF)` in bits per channel use.
pub fn throughput(scenario: &Scenario, m: u32, p: f64) -> Result<f64> {
    let pair = pair_at(scenario, m, p)?;
    Ok(scenario.packet_bits() / f64::from(m) * (1.0 - pair.eps_b) * pair.eps_e)
}

/// Blocklength maximizing the secrecy effective throughput within the thresholds.
pub fn maximize_throughput(scenario: &Scenario, p: f64, th: &Thresholds) -> Result<(u32, f64)> {
    let (lo, hi) = feasible_m_interval(scenario, p, th)?.ok_or(Error::InfeasibleThresholds)?;
    Ok(golden_section_max(|m| throughput(scenario, m, p).unwrap_or(f64::NEG_INFINITY), lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedLeakageResult {
    pub m: u32,
    pub p: f64,
    pub pair: ReliabilityPair,
    pub eps_lf: f64,
}

/// Largest power in `(0, p_cap]` with leakage at most `cap` at blocklength `m`.
fn max_power_under_leakage(scenario: &Scenario, m: u32, cap: f64) -> Result<Option<f64>> {
    let leak = |p: f64| pair_at(scenario, m, p).map(|x| x.leakage());
    if leak(scenario.p_cap)? <= cap {
        return Ok(Some(scenario.p_cap));
    }
    let (mut lo, mut hi) = ((scenario.p_cap * 1e-12).ln(), scenario.p_cap.ln());
    if leak(lo.exp())? > cap {
        return Ok(None);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if leak(mid.exp())? <= cap {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(Some(lo.exp()))
}

/// Baseline that caps the leakage at `delta_cap` and minimizes Bob's error
/// over the resource box. For each `m` the largest admissible power is used,
/// since Bob's error falls with power.
pub fn solve_fixed_leakage(scenario: &Scenario, delta_cap: f64) -> Result<FixedLeakageResult> {
    if !(delta_cap > 0.0 && delta_cap <= 0.5) {
        return Err(Error::InvalidArgument(format!("leakage cap must lie in (0, 0.5], got {delta_cap}")));
    }
    let candidates: Vec<FixedLeakageResult> = (1..=scenario.m_cap)
        .into_par_iter()
        .map(|m| -> Result<Option<FixedLeakageResult>> {
            let Some(p) = max_power_under_leakage(scenario, m, delta_cap)? else { return Ok(None) };
            let pair = pair_at(scenario, m, p)?;
            Ok(Some(FixedLeakageResult { m, p, pair, eps_lf: lfp(&pair) }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    candidates
        .into_iter()
        .min_by(|a, b| {
            a.pair
                .eps_b
                .total_cmp(&b.pair.eps_b)
                .then(a.eps_lf.total_cmp(&b.eps_lf))
                .then(a.m.cmp(&b.m))
        })
        .ok_or(Error::InfeasibleLeakage(delta_cap))
}

/// Distribution of Eve's channel gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadingDistribution {
    /// Rayleigh fading: exponentially distributed gain with the given mean.
    ExponentialGain { mean: f64 },
    /// Deterministic gain, the zero-variance limit.
    PointMass { gain: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    /// Stratified sampling with `samples` draws; draw `i` uses stream `i` of a
    /// ChaCha8 generator seeded with `seed`.
    MonteCarlo { samples: usize, seed: u64 },
    /// Gauss-Hermite rule with `nodes` points.
    GaussQuadrature { nodes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingSpec {
    pub distribution: FadingDistribution,
    pub estimator: Estimator,
}

impl FadingSpec {
    /// Rayleigh fading around the eavesdropper's mean gain.
    pub fn rayleigh(eve: &ChannelSpec, estimator: Estimator) -> Result<Self> {
        let s = Self { distribution: FadingDistribution::ExponentialGain { mean: eve.mean_gain }, estimator };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self.distribution {
            FadingDistribution::ExponentialGain { mean } if !(mean > 0.0 && mean.is_finite()) => {
                return Err(Error::InvalidArgument(format!("mean gain must be > 0, got {mean}")))
            }
            FadingDistribution::PointMass { gain } if !(gain >= 0.0 && gain.is_finite()) => {
                return Err(Error::InvalidArgument(format!("gain must be >= 0, got {gain}")))
            }
            _ => {}
        }
        match self.estimator {
            Estimator::MonteCarlo { samples: 0, .. } => {
                Err(Error::InvalidArgument("Monte Carlo needs at least one sample".into()))
            }
            Estimator::GaussQuadrature { nodes } if nodes < 2 => {
                Err(Error::InvalidArgument("quadrature needs at least two nodes".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Bob's error at the known channel together with Eve's expected error and
/// expected leakage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedReliability {
    pub eps_b: f64,
    pub mean_eps_e: f64,
    pub mean_delta: f64,
}

impl ExpectedReliability {
    /// `E[ε_LF] = ε_b·E[ε_e] + E[δ]`.
    pub fn lfp(&self) -> f64 {
        (self.eps_b * self.mean_eps_e + self.mean_delta).clamp(0.0, 1.0)
    }
}

/// A fading spec with its quadrature rule built once.
struct Prepared {
    spec: FadingSpec,
    rule: Option<GaussHermite>,
}

impl Prepared {
    fn new(spec: &FadingSpec) -> Result<Self> {
        spec.validate()?;
        let rule = match spec.estimator {
            Estimator::GaussQuadrature { nodes } => Some(
                GaussHermite::new(nodes).map_err(|e| Error::InvalidArgument(e.to_string()))?,
            ),
            Estimator::MonteCarlo { .. } => None,
        };
        Ok(Self { spec: *spec, rule })
    }

    /// `(E[ε_e], E[δ])` for an Eve whose SNR is `k·z` with gain `z`.
    fn eve_moments(&self, k: f64, d: f64, m: f64) -> Result<(f64, f64)> {
        let mean = match self.spec.distribution {
            FadingDistribution::PointMass { gain } => {
                let w = omega(k * gain, d, m)?;
                return Ok((q(w), q(-w)));
            }
            FadingDistribution::ExponentialGain { mean } => mean,
        };
        match self.spec.estimator {
            Estimator::MonteCarlo { samples, seed } => {
                let draws: Vec<(f64, f64)> = (0..samples)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(i as u64);
                        let u = (i as f64 + rng.gen::<f64>()) / samples as f64;
                        let z = -mean * (-u).ln_1p();
                        if z > 0.0 {
                            let w = omega(k * z, d, m).unwrap_or(f64::NEG_INFINITY);
                            (q(w), q(-w))
                        } else {
                            (1.0, 0.0)
                        }
                    })
                    .collect();
                let n = samples as f64;
                let (se, sd) = draws.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
                Ok((se / n, sd / n))
            }
            Estimator::GaussQuadrature { .. } => {
                // δ(z) = P(N ≤ ω(z)) for a standard normal N, so
                // E_z[δ] = E_N[P(Z ≥ z(N))] = E_N[exp(−z(N)/ξ)], z(t) solving ω(k·z) = t.
                let rule = self.rule.as_ref().expect("quadrature rule");
                let mut err = None;
                let integral = rule.integrate(|x| {
                    let t = std::f64::consts::SQRT_2 * x;
                    match gamma_for_omega(t, d, m) {
                        Ok(g) => (-(g / k) / mean).exp(),
                        Err(e) => {
                            err = Some(e);
                            0.0
                        }
                    }
                });
                if let Some(e) = err {
                    return Err(e);
                }
                let delta = (integral / std::f64::consts::PI.sqrt()).clamp(0.0, 1.0);
                Ok((1.0 - delta, delta))
            }
        }
    }

    fn reliability(&self, scenario: &Scenario, m: f64, p: f64) -> Result<ExpectedReliability> {
        let eve = scenario.sole_eve()?;
        let d = scenario.packet_bits();
        let eps_b = q(omega(snr(&scenario.bob, p), d, m)?);
        let (mean_eps_e, mean_delta) = self.eve_moments(p / eve.noise_power, d, m)?;
        Ok(ExpectedReliability { eps_b, mean_eps_e, mean_delta })
    }
}

/// Bob's error and Eve's averaged error and leakage at `res`, with Bob's
/// channel known and Eve's gain drawn from `fading`.
pub fn expected_reliability(scenario: &Scenario, res: &Resources, fading: &FadingSpec) -> Result<ExpectedReliability> {
    check_power(res.p)?;
    Prepared::new(fading)?.reliability(scenario, res.m, res.p)
}

/// Expected LFP over Eve's fading.
pub fn expected_lfp(scenario: &Scenario, res: &Resources, fading: &FadingSpec) -> Result<f64> {
    Ok(expected_reliability(scenario, res, fading)?.lfp())
}

/// Blocklengths meeting the thresholds with the leakage taken in expectation.
pub fn feasible_m_interval_statistical(
    scenario: &Scenario,
    p: f64,
    th: &Thresholds,
    fading: &FadingSpec,
) -> Result<Option<(u32, u32)>> {
    check_power(p)?;
    let prep = Prepared::new(fading)?;
    interval(
        scenario.m_cap,
        th,
        |m| Ok(prep.reliability(scenario, f64::from(m), p)?.eps_b),
        |m| Ok(prep.reliability(scenario, f64::from(m), p)?.mean_delta),
    )
}

/// Expected LFP at every blocklength of `[lo, hi]`.
pub fn expected_lfp_profile(
    scenario: &Scenario,
    p: f64,
    fading: &FadingSpec,
    lo: u32,
    hi: u32,
) -> Result<Vec<f64>> {
    check_power(p)?;
    let prep = Prepared::new(fading)?;
    (lo..=hi)
        .map(|m| prep.reliability(scenario, f64::from(m), p).map(|r| r.lfp()))
        .collect()
}

/// Blocklength minimizing the expected LFP within the thresholds.
pub fn solve_blocklength_statistical(
    scenario: &Scenario,
    p: f64,
    th: &Thresholds,
    fading: &FadingSpec,
) -> Result<(u32, f64)> {
    let (lo, hi) = feasible_m_interval_statistical(scenario, p, th, fading)?.ok_or(Error::InfeasibleThresholds)?;
    let prep = Prepared::new(fading)?;
    let f = |m: u32| {
        prep.reliability(scenario, f64::from(m), p)
            .map(|r| r.lfp())
            .unwrap_or(f64::INFINITY)
    };
    Ok(golden_section_min(f, lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbl::{capacity, lfp_at};

    fn th(dm: f64, eb: f64) -> Thresholds {
        Thresholds::new(dm, eb).unwrap()
    }

    #[test]
    fn thresholds_validation() {
        assert!(Thresholds::new(0.6, 0.1).is_err());
        assert!(Thresholds::new(0.1, 0.0).is_err());
        assert!(Thresholds::new(0.5, 0.5).is_ok());
    }

    #[test]
    fn half_thresholds_give_capacity_interval() {
        let s = Scenario::reference();
        let (lo, hi) = feasible_m_interval(&s, 1.0, &th(0.5, 0.5)).unwrap().unwrap();
        let d = 320.0;
        assert_eq!(f64::from(lo), (d / capacity(15.0)).ceil());
        assert_eq!(f64::from(hi), (d / capacity(10.0)).floor());
    }

    #[test]
    fn symmetric_channels_are_infeasible() {
        let ch = ChannelSpec::new(1.0, 0.1).unwrap();
        let s = Scenario::single(320, ch, ch, 3000, 10.0).unwrap();
        assert_eq!(feasible_m_interval(&s, 1.0, &th(0.1, 0.1)).unwrap(), None);
        assert!(matches!(solve_blocklength(&s, 1.0, &th(0.1, 0.1)), Err(Error::InfeasibleThresholds)));
    }

    fn scan_interval(s: &Scenario, p: f64, t: &Thresholds) -> Option<(u32, u32)> {
        let ok: Vec<u32> = (1..=s.m_cap)
            .filter(|&m| {
                let (_, pair) = lfp_at(s, &Resources::new(f64::from(m), p).unwrap()).unwrap();
                pair.eps_b <= t.eps_b_max && pair.leakage() <= t.delta_max
            })
            .collect();
        ok.first().map(|&lo| (lo, *ok.last().unwrap()))
    }

    #[test]
    fn interval_matches_scan() {
        let s = Scenario::reference();
        // at p = 1 W no blocklength reaches 1e-3 on both sides
        for &(p, t) in &[(1.0, 1e-3), (1.0, 0.1), (0.05, 0.1), (0.01, 0.1), (0.01, 0.01)] {
            let t = th(t, t);
            let got = feasible_m_interval(&s, p, &t).unwrap();
            assert_eq!(got, scan_interval(&s, p, &t), "{p}");
        }
        assert_eq!(feasible_m_interval(&s, 0.01, &th(0.1, 0.1)).unwrap(), Some((1778, 2072)));
    }

    #[test]
    fn blocklength_solution_matches_scan() {
        let s = Scenario::reference();
        for &(p, t) in &[(1.0, 0.1), (0.05, 0.1), (0.01, 0.1), (0.01, 0.2)] {
            let t = th(t, t);
            let (m, v) = solve_blocklength(&s, p, &t).unwrap();
            let (lo, hi) = scan_interval(&s, p, &t).unwrap();
            let best = (lo..=hi)
                .map(|m| (m, lfp_at(&s, &Resources::new(f64::from(m), p).unwrap()).unwrap().0))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            assert_eq!((m, v), best);
        }
    }

    #[test]
    fn throughput_matches_scan() {
        let s = Scenario::reference();
        let t = th(0.1, 0.1);
        let (m, v) = maximize_throughput(&s, 10.0, &t).unwrap();
        let (lo, hi) = feasible_m_interval(&s, 10.0, &t).unwrap().unwrap();
        let best = (lo..=hi)
            .map(|m| (m, throughput(&s, m, 10.0).unwrap()))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        assert_eq!((m, v), best);
    }

    #[test]
    fn fixed_leakage_respects_cap() {
        let s = Scenario::single(320, s_bob(), ChannelSpec::new(1.0, 0.1).unwrap(), 600, 10.0).unwrap();
        let r = solve_fixed_leakage(&s, 1e-3).unwrap();
        assert!(r.pair.leakage() <= 1e-3 + 1e-12);
        assert!(r.eps_lf >= r.pair.leakage());
        assert!(solve_fixed_leakage(&s, 0.7).is_err());
    }

    fn s_bob() -> ChannelSpec {
        ChannelSpec::new(1.5, 0.1).unwrap()
    }

    #[test]
    fn point_mass_equals_deterministic() {
        let s = Scenario::reference();
        let res = Resources::new(150.0, 1.0).unwrap();
        let (want, _) = lfp_at(&s, &res).unwrap();
        for est in [Estimator::MonteCarlo { samples: 10, seed: 1 }, Estimator::GaussQuadrature { nodes: 64 }] {
            let f = FadingSpec { distribution: FadingDistribution::PointMass { gain: 1.0 }, estimator: est };
            assert_eq!(expected_lfp(&s, &res, &f).unwrap(), want);
        }
    }

    #[test]
    fn estimators_agree() {
        let s = Scenario::reference();
        for &(m, p) in &[(100.0, 1.0), (80.0, 1.0), (500.0, 0.05), (3000.0, 0.006)] {
            let res = Resources::new(m, p).unwrap();
            let mc = FadingSpec::rayleigh(&s.eves[0], Estimator::MonteCarlo { samples: 5000, seed: 42 }).unwrap();
            let gq = FadingSpec::rayleigh(&s.eves[0], Estimator::GaussQuadrature { nodes: 64 }).unwrap();
            let a = expected_lfp(&s, &res, &mc).unwrap();
            let b = expected_lfp(&s, &res, &gq).unwrap();
            assert!((a - b).abs() < 1e-4, "{m} {p}: {a} {b}");
        }
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let s = Scenario::reference();
        let res = Resources::new(100.0, 1.0).unwrap();
        let f = |seed| FadingSpec::rayleigh(&s.eves[0], Estimator::MonteCarlo { samples: 300, seed }).unwrap();
        assert_eq!(expected_lfp(&s, &res, &f(7)).unwrap(), expected_lfp(&s, &res, &f(7)).unwrap());
        assert_ne!(expected_lfp(&s, &res, &f(7)).unwrap(), expected_lfp(&s, &res, &f(8)).unwrap());
    }

    #[test]
    fn statistical_zero_variance_reduces() {
        let s = Scenario::reference();
        let t = th(0.1, 0.1);
        let f = FadingSpec {
            distribution: FadingDistribution::PointMass { gain: 1.0 },
            estimator: Estimator::GaussQuadrature { nodes: 64 },
        };
        assert_eq!(solve_blocklength_statistical(&s, 0.01, &t, &f).unwrap(), solve_blocklength(&s, 0.01, &t).unwrap());
    }
}
