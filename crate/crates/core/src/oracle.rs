//! Brute-force references: exhaustive grid search over `(m, p)` and an integer
//! golden-section search for unimodal maps.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fbl::{Resources, Scenario};
use crate::multi_eve::scenario_lfp;

/// Points per refinement round on each side of the incumbent.
const ZOOM_HALF_WIDTH: i32 = 10;
const ZOOM_FACTOR: f64 = 10.0;

/// Search grid: every integer `m` in `[m_lo, m_hi]` times a geometric power
/// grid of `p_points` values over `[p_min, p_cap]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub m_lo: u32,
    pub m_hi: u32,
    pub p_points: usize,
    /// Smallest power on the grid; `None` means `p_cap·1e-6`.
    pub p_min: Option<f64>,
    pub refine_rounds: usize,
}

impl GridSpec {
    /// Full blocklength range, 1000 powers and three refinement rounds.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        Self { m_lo: 1, m_hi: scenario.m_cap, p_points: 1000, p_min: None, refine_rounds: 3 }
    }

    fn validate(&self, p_cap: f64) -> Result<()> {
        if self.m_lo < 1 || self.m_lo > self.m_hi {
            return Err(Error::InvalidArgument(format!(
                "blocklength range [{}, {}] is empty",
                self.m_lo, self.m_hi
            )));
        }
        if self.p_points == 0 {
            return Err(Error::InvalidArgument("power grid needs at least one point".into()));
        }
        if let Some(p) = self.p_min {
            if !(p > 0.0 && p <= p_cap) {
                return Err(Error::InvalidArgument(format!("p_min must lie in (0, {p_cap}], got {p}")));
            }
        }
        Ok(())
    }

    /// Power grid values in increasing order; a single point means `p_cap`.
    pub fn powers(&self, p_cap: f64) -> Vec<f64> {
        if self.p_points == 1 {
            return vec![p_cap];
        }
        let lo = self.p_min.unwrap_or(p_cap * 1e-6).ln();
        let hi = p_cap.ln();
        let n = self.p_points - 1;
        (0..=n)
            .map(|i| if i == n { p_cap } else { (lo + (hi - lo) * i as f64 / n as f64).exp() })
            .collect()
    }

    fn log_step(&self, p_cap: f64) -> f64 {
        if self.p_points < 2 {
            return 0.0;
        }
        (p_cap / self.p_min.unwrap_or(p_cap * 1e-6)).ln() / (self.p_points - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub m: u32,
    pub p: f64,
    pub eps_lf: f64,
    /// Incumbent LFP after the full grid and after each refinement round.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    eps: f64,
    m: u32,
    p: f64,
}

/// Smaller LFP first, then smaller `(m, p)`; NaN sorts last.
fn better(a: &Candidate, b: &Candidate) -> Ordering {
    let key = |c: &Candidate| if c.eps.is_nan() { f64::INFINITY } else { c.eps };
    key(a)
        .total_cmp(&key(b))
        .then(a.m.cmp(&b.m))
        .then(a.p.total_cmp(&b.p))
}

fn scan(scenario: &Scenario, m_lo: u32, m_hi: u32, powers: &[f64]) -> Option<Candidate> {
    (m_lo..=m_hi)
        .into_par_iter()
        .filter_map(|m| {
            powers
                .iter()
                .filter_map(|&p| {
                    let res = Resources::new(f64::from(m), p).ok()?;
                    let eps = scenario_lfp(scenario, &res).ok()?;
                    Some(Candidate { eps, m, p })
                })
                .min_by(better)
        })
        .min_by(better)
}

/// Minimum of the actual LFP over the grid, followed by `refine_rounds`
/// passes that re-scan all blocklengths on a 10× finer power grid around the
/// incumbent. The result does not depend on the evaluation order.
pub fn exhaustive_min_lfp(scenario: &Scenario, grid: &GridSpec) -> Result<OracleResult> {
    grid.validate(scenario.p_cap)?;
    let m_hi = grid.m_hi.min(scenario.m_cap);
    if grid.m_lo > m_hi {
        return Err(Error::InvalidArgument("blocklength range exceeds the scenario cap".into()));
    }
    let powers = grid.powers(scenario.p_cap);
    let mut best = scan(scenario, grid.m_lo, m_hi, &powers).ok_or_else(|| {
        Error::InvalidArgument("no grid point has a valid SNR".into())
    })?;
    let mut history = vec![best.eps];
    let mut step = grid.log_step(scenario.p_cap);
    for _ in 0..grid.refine_rounds {
        step /= ZOOM_FACTOR;
        if step == 0.0 {
            history.push(best.eps);
            continue;
        }
        let centre = best.p.ln();
        let local: Vec<f64> = (-ZOOM_HALF_WIDTH..=ZOOM_HALF_WIDTH)
            .map(|j| (centre + f64::from(j) * step).exp())
            .filter(|&p| p > 0.0 && p <= scenario.p_cap)
            .collect();
        if let Some(c) = scan(scenario, grid.m_lo, m_hi, &local) {
            if c.eps < best.eps {
                best = c;
            }
        }
        history.push(best.eps);
    }
    Ok(OracleResult { m: best.m, p: best.p, eps_lf: best.eps, history })
}

/// Integer argmax of a unimodal `f` on `[lo, hi]` by golden-section search.
///
/// The final bracket is scanned in full and ties go to the smallest index.
/// A map that is not unimodal yields a local maximum.
pub fn golden_section_max<F: Fn(u32) -> f64>(f: F, lo: u32, hi: u32) -> (u32, f64) {
    assert!(lo <= hi, "empty interval [{lo}, {hi}]");
    let cache = RefCell::new(HashMap::new());
    let eval = |x: u32| *cache.borrow_mut().entry(x).or_insert_with(|| f(x));
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    while b - a > 3 {
        let span = f64::from(b - a);
        let x1 = a + (span * (1.0 - inv_phi)).round() as u32;
        let mut x2 = a + (span * inv_phi).round() as u32;
        if x2 <= x1 {
            x2 = x1 + 1;
        }
        if eval(x1) >= eval(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let mut best = (a, eval(a));
    for x in a + 1..=b {
        let v = eval(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// [`golden_section_max`] applied to `−f`, then stepped to a neighbour while
/// that strictly lowers `f`.
pub fn golden_section_min<F: Fn(u32) -> f64>(f: F, lo: u32, hi: u32) -> (u32, f64) {
    let (mut x, _) = golden_section_max(|m| -f(m), lo, hi);
    let mut v = f(x);
    loop {
        let left = (x > lo).then(|| (x - 1, f(x - 1)));
        let right = (x < hi).then(|| (x + 1, f(x + 1)));
        match [left, right].into_iter().flatten().filter(|c| c.1 < v).min_by(|a, b| a.1.total_cmp(&b.1)) {
            Some((nx, nv)) => {
                x = nx;
                v = nv;
            }
            None => return (x, v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbl::lfp_at;

    #[test]
    fn single_point_grid() {
        let s = Scenario::reference();
        let g = GridSpec { m_lo: 100, m_hi: 100, p_points: 1, p_min: None, refine_rounds: 0 };
        let r = exhaustive_min_lfp(&s, &g).unwrap();
        assert_eq!((r.m, r.p), (100, 10.0));
        assert_eq!(r.eps_lf, lfp_at(&s, &Resources::new(100.0, 10.0).unwrap()).unwrap().0);
    }

    #[test]
    fn powers_are_geometric_and_end_at_cap() {
        let g = GridSpec { m_lo: 1, m_hi: 1, p_points: 7, p_min: Some(1e-3), refine_rounds: 0 };
        let p = g.powers(1000.0);
        assert_eq!(p.len(), 7);
        assert_eq!(p[6], 1000.0);
        assert!((p[0] - 1e-3).abs() < 1e-15);
        assert!((p[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refinement_is_monotone_and_superset_never_worse() {
        let s = Scenario::single(
            160,
            crate::fbl::ChannelSpec::new(1.5, 0.1).unwrap(),
            crate::fbl::ChannelSpec::new(1.0, 0.1).unwrap(),
            400,
            10.0,
        )
        .unwrap();
        let small = GridSpec { m_lo: 1, m_hi: 400, p_points: 50, p_min: None, refine_rounds: 3 };
        let r = exhaustive_min_lfp(&s, &small).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
        let coarse = GridSpec { refine_rounds: 0, ..small.clone() };
        let wide = GridSpec { p_points: 99, refine_rounds: 0, ..small };
        // the 99-point grid contains every point of the 50-point grid
        assert!(exhaustive_min_lfp(&s, &wide).unwrap().eps_lf <= exhaustive_min_lfp(&s, &coarse).unwrap().eps_lf);
    }

    #[test]
    fn invalid_grids() {
        let s = Scenario::reference();
        let g = GridSpec { m_lo: 5, m_hi: 4, p_points: 10, p_min: None, refine_rounds: 0 };
        assert!(exhaustive_min_lfp(&s, &g).is_err());
        let g = GridSpec { m_lo: 1, m_hi: 4, p_points: 0, p_min: None, refine_rounds: 0 };
        assert!(exhaustive_min_lfp(&s, &g).is_err());
    }

    #[test]
    fn golden_examples() {
        let (x, v) = golden_section_max(|m| -((f64::from(m) - 50.0).powi(2)), 1, 100);
        assert_eq!((x, v), (50, 0.0));
        assert_eq!(golden_section_max(|_| 3.0, 1, 100).0, 1);
        assert_eq!(golden_section_max(f64::from, 7, 7).0, 7);
        assert_eq!(golden_section_max(f64::from, 7, 1000).0, 1000);
        assert_eq!(golden_section_min(|m| (f64::from(m) - 17.3).abs(), 1, 5000).0, 17);
    }

    #[test]
    fn golden_matches_scan_on_random_quadratics() {
        for c in [1u32, 2, 3, 10, 123, 998, 999, 1000] {
            let f = |m: u32| -(f64::from(m) - f64::from(c)).abs().powf(1.5);
            assert_eq!(golden_section_max(f, 1, 1000).0, c);
        }
    }
}
