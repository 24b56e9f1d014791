use fblsec::constrained::{expected_reliability, Estimator, FadingDistribution, FadingSpec};
use fblsec::{lfp_at, ChannelSpec, Resources, Scenario};

fn q_ref(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Composite Simpson over the exponential gain density.
fn mean_leakage(mean: f64, noise: f64, d: f64, m: f64, p: f64) -> f64 {
    let n = 400_000;
    let hi = 60.0 * mean;
    let h = hi / n as f64;
    let f = |z: f64| {
        let g = p * z / noise;
        let w = if g == 0.0 {
            f64::NEG_INFINITY
        } else {
            (m / (1.0 - (1.0 + g).powi(-2))).sqrt() * (g.ln_1p() - d * std::f64::consts::LN_2 / m)
        };
        (-z / mean).exp() / mean * q_ref(-w)
    };
    let mut acc = f(0.0) + f(hi);
    for i in 1..n {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn quadrature_matches_direct_integral() {
    for &(xi, m, p) in &[(1.0, 100.0, 1.0), (1.0, 300.0, 0.1), (0.3, 250.0, 0.1), (2.0, 1500.0, 0.05)] {
        let s = Scenario::single(320, ChannelSpec::new(1.5, 0.1).unwrap(), ChannelSpec::new(xi, 0.1).unwrap(), 3000, 10.0)
            .unwrap();
        let fading = FadingSpec::rayleigh(&s.eves[0], Estimator::GaussQuadrature { nodes: 64 }).unwrap();
        let got = expected_reliability(&s, &Resources::new(m, p).unwrap(), &fading).unwrap();
        let want = mean_leakage(xi, 0.1, 320.0, m, p);
        assert!((got.mean_delta - want).abs() <= 1e-8, "xi {xi} m {m} p {p}: {} vs {want}", got.mean_delta);
        assert!((got.mean_eps_e + got.mean_delta - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn point_mass_reduces_to_perfect_csi() {
    let s = Scenario::single(320, ChannelSpec::new(1.5, 0.1).unwrap(), ChannelSpec::new(1.0, 0.1).unwrap(), 3000, 10.0).unwrap();
    let res = Resources::new(800.0, 0.5).unwrap();
    let (_, pair) = lfp_at(&s, &res).unwrap();
    for estimator in [Estimator::GaussQuadrature { nodes: 16 }, Estimator::MonteCarlo { samples: 10, seed: 3 }] {
        let fading = FadingSpec { distribution: FadingDistribution::PointMass { gain: 1.0 }, estimator };
        let got = expected_reliability(&s, &res, &fading).unwrap();
        assert_eq!(got.eps_b, pair.eps_b);
        assert!((got.mean_eps_e - pair.eps_e).abs() <= 1e-15);
    }
}

#[test]
fn monte_carlo_is_seeded() {
    let s = Scenario::single(320, ChannelSpec::new(1.5, 0.1).unwrap(), ChannelSpec::new(1.0, 0.1).unwrap(), 3000, 10.0).unwrap();
    let res = Resources::new(300.0, 0.1).unwrap();
    let run = |seed| {
        let f = FadingSpec::rayleigh(&s.eves[0], Estimator::MonteCarlo { samples: 2000, seed }).unwrap();
        expected_reliability(&s, &res, &f).unwrap().mean_delta
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}
