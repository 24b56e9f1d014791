//! Several eavesdroppers: independent (passive) decoders, or colluding ones
//! merged into a single maximum-ratio-combining receiver.

use crate::bounds::{Factor, ProductBound, Surrogate, Tail};
use crate::error::{Error, Result};
use crate::fbl::{lfp, omega, q, reliability_pair, snr, ChannelSpec, EveModel, ReliabilityPair, Resources, Scenario};
use crate::solver::{run_allocation, solve_joint, AllocationModel, AllocationResult, SolverConfig};

/// Eavesdropper gains sharing one noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct EveSet {
    pub gains: Vec<f64>,
    pub noise_power: f64,
    pub model: EveModel,
}

impl EveSet {
    pub fn new(gains: Vec<f64>, noise_power: f64, model: EveModel) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::InvalidArgument("at least one eavesdropper is required".into()));
        }
        let set = Self { gains, noise_power, model };
        set.channels()?;
        Ok(set)
    }

    pub fn channels(&self) -> Result<Vec<ChannelSpec>> {
        self.gains.iter().map(|&z| ChannelSpec::new(z, self.noise_power)).collect()
    }
}

/// Σₙ (1 − ε_{e,n})·∏_{i>n} ε_{e,i}, which equals `1 − ∏ε_{e,n}`.
pub fn telescope_leakage(eps_e: &[f64]) -> Result<f64> {
    if let Some(v) = eps_e.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("error probabilities must lie in [0, 1], got {v}")));
    }
    Ok(telescope(eps_e.iter().map(|&e| (e, 1.0 - e))))
}

/// Telescoped leakage from `(ε, δ)` pairs, where δ may carry more precision than `1 − ε`.
fn telescope<I: DoubleEndedIterator<Item = (f64, f64)>>(pairs: I) -> f64 {
    let mut tail = 1.0;
    let mut sum = 0.0;
    for (e, d) in pairs.rev() {
        sum += d * tail;
        tail *= e;
    }
    sum
}

/// Effective pair `(ε_b, ∏ε_{e,n})` of the passive model; its LFP is
/// `ε_b·∏ε_{e,n} + 1 − ∏ε_{e,n}`.
fn passive_pair(scenario: &Scenario, res: &Resources) -> Result<ReliabilityPair> {
    let d = scenario.packet_bits();
    let eps_b = q(omega(snr(&scenario.bob, res.p), d, res.m)?);
    let mut terms = Vec::with_capacity(scenario.eves.len());
    for eve in &scenario.eves {
        let w = omega(snr(eve, res.p), d, res.m)?;
        terms.push((q(w), q(-w)));
    }
    let prod: f64 = terms.iter().map(|t| t.0).product();
    Ok(ReliabilityPair::with_leakage(eps_b, prod, telescope(terms.into_iter())))
}

/// LFP with independent eavesdroppers.
pub fn lfp_passive(scenario: &Scenario, res: &Resources) -> Result<f64> {
    Ok(lfp(&passive_pair(scenario, res)?))
}

/// A single receiver with gain `Σ z_n·σ₁²/σ_n²` and noise `σ₁²`, i.e. the
/// summed SNR of all eavesdroppers.
pub fn super_gain(eves: &[ChannelSpec]) -> Result<ChannelSpec> {
    let first = eves
        .first()
        .ok_or_else(|| Error::InvalidArgument("at least one eavesdropper is required".into()))?;
    let noise = first.noise_power;
    let gain = eves.iter().map(|e| e.gain * (noise / e.noise_power)).sum();
    let mean = eves.iter().map(|e| e.mean_gain * (noise / e.noise_power)).sum();
    ChannelSpec::with_mean_gain(gain, noise, mean)
}

/// Effective reliability pair of any scenario under its eavesdropper model.
pub fn scenario_pair(scenario: &Scenario, res: &Resources) -> Result<ReliabilityPair> {
    let d = scenario.packet_bits();
    match (scenario.eves.as_slice(), scenario.eve_model) {
        ([eve], _) => reliability_pair(d, &scenario.bob, eve, res),
        (eves, EveModel::Super) => reliability_pair(d, &scenario.bob, &super_gain(eves)?, res),
        (_, EveModel::Passive) => passive_pair(scenario, res),
    }
}

/// LFP of any scenario under its eavesdropper model.
pub fn scenario_lfp(scenario: &Scenario, res: &Resources) -> Result<f64> {
    Ok(lfp(&scenario_pair(scenario, res)?))
}

/// Anchor of the passive-model surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct PassiveLocalPoint {
    pub m_hat: f64,
    pub p_hat: f64,
    pub omega_b_hat: f64,
    pub omega_e_hat: Vec<f64>,
}

impl PassiveLocalPoint {
    pub fn new(scenario: &Scenario, m: f64, p: f64) -> Result<Self> {
        let d = scenario.packet_bits();
        Ok(Self {
            m_hat: m,
            p_hat: p,
            omega_b_hat: omega(snr(&scenario.bob, p), d, m)?,
            omega_e_hat: scenario
                .eves
                .iter()
                .map(|e| omega(snr(e, p), d, m))
                .collect::<Result<_>>()?,
        })
    }
}

/// Surrogate of the passive-model LFP: every product of the telescoped sum
/// `ε_b·∏ε_{e,n} + Σₙ δ_n·∏_{i>n} ε_{e,i}` is bounded by the weighted AM-GM
/// inequality over exponential majorants of its factors.
pub fn passive_surrogate(scenario: &Scenario, lp: &PassiveLocalPoint) -> Result<ProductBound> {
    let n = scenario.eves.len();
    if lp.omega_e_hat.len() != n {
        return Err(Error::InvalidArgument("local point does not match the eavesdropper count".into()));
    }
    if let Some(i) = lp.omega_e_hat.iter().position(|&w| q(w) <= 0.0) {
        return Err(Error::DegenerateLocalPoint(format!(
            "eavesdropper {i} decodes with certainty at (m, p) = ({}, {})",
            lp.m_hat, lp.p_hat
        )));
    }
    let mut links = vec![scenario.bob.snr_per_watt()];
    links.extend(scenario.eves.iter().map(ChannelSpec::snr_per_watt));
    let mut anchors = vec![lp.omega_b_hat];
    anchors.extend(&lp.omega_e_hat);
    let err = |link| Factor { link, tail: Tail::Error };
    let mut terms = vec![(0..=n).map(err).collect::<Vec<_>>()];
    for k in 1..=n {
        let mut t = vec![Factor { link: k, tail: Tail::Leakage }];
        t.extend((k + 1..=n).map(err));
        terms.push(t);
    }
    ProductBound::new(links, scenario.packet_bits(), anchors, terms)
}

pub fn approx_lfp_passive(m: f64, p: f64, scenario: &Scenario, lp: &PassiveLocalPoint) -> Result<f64> {
    passive_surrogate(scenario, lp)?.value_at(m, p)
}

struct Passive<'a>(&'a Scenario);

impl AllocationModel for Passive<'_> {
    fn packet_bits(&self) -> f64 {
        self.0.packet_bits()
    }
    fn m_cap(&self) -> u32 {
        self.0.m_cap
    }
    fn p_cap(&self) -> f64 {
        self.0.p_cap
    }
    fn pair(&self, m: f64, p: f64) -> Result<ReliabilityPair> {
        passive_pair(self.0, &Resources::new(m, p)?)
    }
    fn surrogate(&self, m: f64, p: f64) -> Result<Box<dyn Surrogate>> {
        let lp = PassiveLocalPoint::new(self.0, m, p)?;
        Ok(Box::new(passive_surrogate(self.0, &lp)?))
    }
    fn balance_links(&self) -> (f64, f64) {
        let strongest = self.0.eves.iter().map(ChannelSpec::snr_per_watt).fold(0.0, f64::max);
        (self.0.bob.snr_per_watt(), strongest)
    }
}

/// Joint allocation under either eavesdropper model.
pub fn solve_multi(scenario: &Scenario, cfg: &SolverConfig) -> Result<AllocationResult> {
    match (scenario.eves.len(), scenario.eve_model) {
        (1, _) | (_, EveModel::Super) => solve_joint(scenario, cfg),
        (_, EveModel::Passive) => run_allocation(&Passive(scenario), cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{approx_lfp, LocalPoint};
    use crate::fbl::lfp_at;
    use approx::assert_relative_eq;

    fn with_eves(gains: &[f64], model: EveModel) -> Scenario {
        let eves = EveSet::new(gains.to_vec(), 0.1, model).unwrap().channels().unwrap();
        let bob = ChannelSpec::new(1.5, 0.1).unwrap();
        Scenario::new(320, bob, eves, model, 3000, 10.0).unwrap()
    }

    #[test]
    fn telescope_examples() {
        assert_relative_eq!(telescope_leakage(&[0.5, 0.5]).unwrap(), 0.75);
        assert_eq!(telescope_leakage(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!(telescope_leakage(&[1.2]).is_err());
    }

    #[test]
    fn passive_lfp_examples() {
        let res = Resources::new(1500.0, 0.006).unwrap();
        let one = with_eves(&[1.0], EveModel::Passive);
        assert_eq!(lfp_passive(&one, &res).unwrap(), lfp_at(&Scenario::reference(), &res).unwrap().0);
        let pair = ReliabilityPair::with_leakage(0.1, 0.25, telescope_leakage(&[0.5, 0.5]).unwrap());
        assert_relative_eq!(lfp(&pair), 0.775, max_relative = 1e-15);
    }

    #[test]
    fn dominant_eve_bounds_passive_lfp() {
        let s = with_eves(&[1.0, 3.0, 0.5], EveModel::Passive);
        let res = Resources::new(1000.0, 0.01).unwrap();
        let strongest = Scenario::single(320, s.bob, s.eves[1], 3000, 10.0).unwrap();
        let (_, pair) = lfp_at(&strongest, &res).unwrap();
        assert!(lfp_passive(&s, &res).unwrap() >= pair.leakage());
    }

    #[test]
    fn super_gain_examples() {
        let eves = EveSet::new(vec![1.0, 1.0], 0.1, EveModel::Super).unwrap().channels().unwrap();
        assert_eq!(super_gain(&eves).unwrap().gain, 2.0);
        let one = ChannelSpec::new(0.7, 0.2).unwrap();
        assert_eq!(super_gain(&[one]).unwrap(), one);
        let mixed = [ChannelSpec::new(1.0, 0.1).unwrap(), ChannelSpec::new(1.0, 0.2).unwrap()];
        let s = super_gain(&mixed).unwrap();
        assert_relative_eq!(s.snr_per_watt(), 15.0);
    }

    #[test]
    fn passive_surrogate_reduces_to_single() {
        let s = Scenario::reference();
        let lp = LocalPoint::new(&s, 2000.0, 0.007).unwrap();
        let plp = PassiveLocalPoint::new(&s, 2000.0, 0.007).unwrap();
        for &(m, p) in &[(2000.0, 0.007), (1500.0, 0.01), (2900.0, 0.004)] {
            assert_relative_eq!(
                approx_lfp_passive(m, p, &s, &plp).unwrap(),
                approx_lfp(m, p, &s, &lp).unwrap(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn passive_surrogate_tight_and_dominant() {
        let s = with_eves(&[1.0, 0.6, 1.3], EveModel::Passive);
        let lp = PassiveLocalPoint::new(&s, 2500.0, 0.005).unwrap();
        let at = approx_lfp_passive(2500.0, 0.005, &s, &lp).unwrap();
        assert!((at - lfp_passive(&s, &Resources::new(2500.0, 0.005).unwrap()).unwrap()).abs() < 1e-12);
        for i in 0..20 {
            for j in 0..20 {
                let m = 300.0 + 135.0 * f64::from(i);
                let p = 0.001 * 1.2f64.powi(j);
                let v = approx_lfp_passive(m, p, &s, &lp).unwrap();
                let exact = lfp_passive(&s, &Resources::new(m, p).unwrap()).unwrap();
                assert!(v >= exact - 1e-12, "{m} {p}");
            }
        }
    }

    #[test]
    fn single_eve_reduction_of_solvers() {
        let s = Scenario::reference();
        let cfg = SolverConfig::default();
        let a = solve_joint(&s, &cfg).unwrap();
        let b = solve_multi(&s, &cfg).unwrap();
        assert_eq!(a, b);
        let sup = with_eves(&[1.0], EveModel::Super);
        assert_eq!(solve_multi(&sup, &cfg).unwrap().eps_lf, a.eps_lf);
    }

    #[test]
    fn passive_solve_is_monotone() {
        let s = with_eves(&[1.0, 1.0, 1.0], EveModel::Passive);
        let r = solve_multi(&s, &SolverConfig::default()).unwrap();
        for w in r.trace.iterations.windows(2) {
            assert!(w[1].eps <= w[0].eps + 1e-12);
        }
        let res = Resources::new(f64::from(r.m_star), r.p_star).unwrap();
        assert_eq!(lfp_passive(&s, &res).unwrap(), r.eps_lf);
    }

    #[test]
    fn passive_model_rejected_by_single_solver() {
        let s = with_eves(&[1.0, 1.0], EveModel::Passive);
        assert!(matches!(solve_joint(&s, &SolverConfig::default()), Err(Error::WrongModule(2))));
    }
}
