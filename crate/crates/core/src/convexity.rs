//! Joint concavity of ω in blocklength and power: analytic derivatives, the
//! rate threshold above which the Hessian is negative semidefinite, and a
//! finite-difference Hessian for validation.
//!
//! Writing `t = γ² + 2γ`, `L = ln(1+γ)` and `r = d/m` in bits per channel use,
//! the (m, γ) Hessian determinant equals `(ln 2)²/(t·m) · h(r)` with
//! `h(r) = Δa·r² + Δb·r + Δc`.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::fbl::ChannelSpec;

/// Coefficients of the quadratic `h(r)` whose sign decides `sign(det H)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl DeltaCoeffs {
    pub fn h(&self, r: f64) -> f64 {
        (self.a * r + self.b) * r + self.c
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::DegenerateChannel(gamma))
    }
}

pub fn delta_coeffs(gamma: f64) -> Result<DeltaCoeffs> {
    check_gamma(gamma)?;
    let t = gamma * (gamma + 2.0);
    let l = gamma.ln_1p();
    let den = 4.0 * t * t;
    Ok(DeltaCoeffs {
        a: (9.0 * t + 8.0) / den,
        b: (t * (3.0 * t + 8.0) - (6.0 * t + 8.0) * l) / (den * LN_2),
        c: (t * t * (l - 1.0) + t * l * (4.0 - 3.0 * l) - 4.0 * l * l) / (den * LN_2 * LN_2),
    })
}

/// Smallest rate (bits per channel use) from which ω is jointly concave at SNR `γ`:
/// the larger root of `h`, or 0 when `h` has no positive root.
pub fn rate_threshold(gamma: f64) -> Result<f64> {
    let dc = delta_coeffs(gamma)?;
    let disc = dc.b * dc.b - 4.0 * dc.a * dc.c;
    if disc < 0.0 {
        return Ok(0.0);
    }
    // larger root, in the cancellation-free form when b > 0
    let sq = disc.sqrt();
    let root = if dc.b > 0.0 { -2.0 * dc.c / (dc.b + sq) } else { (-dc.b + sq) / (2.0 * dc.a) };
    Ok(root.max(0.0))
}

/// Maximum of [`rate_threshold`] over γ ∈ (0, `gamma_max`], returned as `(γ, r)`.
pub fn rate_threshold_max(gamma_max: f64) -> Result<(f64, f64)> {
    check_gamma(gamma_max)?;
    let f = |lg: f64| rate_threshold(lg.exp()).unwrap_or(0.0);
    let (lo, hi) = ((1e-6_f64).min(gamma_max).ln(), gamma_max.ln());
    let n = 4000;
    let step = (hi - lo) / f64::from(n);
    let mut best = (lo, f(lo));
    for i in 1..=n {
        let x = lo + step * f64::from(i);
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    // golden refinement on ln γ inside the winning cell
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if f(x1) >= f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    Ok(if v >= best.1 { (x.exp(), v) } else { (best.0.exp(), best.1) })
}

/// ω and its partial derivatives up to second order in `(m, γ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaDerivs {
    pub value: f64,
    pub dm: f64,
    pub dg: f64,
    pub dmm: f64,
    pub dgg: f64,
    pub dmg: f64,
}

pub fn omega_derivs(gamma: f64, d: f64, m: f64) -> Result<OmegaDerivs> {
    check_gamma(gamma)?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidArgument(format!("blocklength must be > 0, got {m}")));
    }
    Ok(omega_derivs_raw(gamma, d, m))
}

/// ω = s(γ)·u(m, γ) with `s = (1+γ)/√t` and `u = L√m − κ/√m`, `κ = d·ln 2`.
pub(crate) fn omega_derivs_raw(gamma: f64, d: f64, m: f64) -> OmegaDerivs {
    let t = gamma * (gamma + 2.0);
    let l = gamma.ln_1p();
    let l1 = 1.0 / (1.0 + gamma);
    let l2 = -l1 * l1;
    let kappa = d * LN_2;
    let sm = m.sqrt();
    let st = t.sqrt();
    let s = (1.0 + gamma) / st;
    let s1 = -1.0 / (t * st);
    let s2 = 3.0 * (1.0 + gamma) / (t * t * st);
    let u = l * sm - kappa / sm;
    let um = l / (2.0 * sm) + kappa / (2.0 * m * sm);
    let umm = -l / (4.0 * m * sm) - 3.0 * kappa / (4.0 * m * m * sm);
    OmegaDerivs {
        value: s * u,
        dm: s * um,
        dg: s1 * u + s * l1 * sm,
        dmm: s * umm,
        dgg: s2 * u + 2.0 * s1 * l1 * sm + s * l2 * sm,
        dmg: s1 * um + s * l1 / (2.0 * sm),
    }
}

/// ω with gradient and Hessian in `(m, p)` for a link with SNR-per-watt `k`.
pub(crate) fn omega_mp(k: f64, d: f64, m: f64, p: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let o = omega_derivs_raw(k * p, d, m);
    (
        o.value,
        [o.dm, k * o.dg],
        [[o.dmm, k * o.dmg], [k * o.dmg, k * k * o.dgg]],
    )
}

/// Hessian of ω in `(m, γ)`.
pub fn omega_hessian_mg(gamma: f64, d: f64, m: f64) -> Result<[[f64; 2]; 2]> {
    let o = omega_derivs(gamma, d, m)?;
    Ok([[o.dmm, o.dmg], [o.dmg, o.dgg]])
}

/// Hessian of ω in `(m, p)` at SNR `γ`, using `γ = p·z/σ²` for the channel `ch`.
pub fn omega_hessian(gamma: f64, m: f64, d: f64, ch: &ChannelSpec) -> Result<[[f64; 2]; 2]> {
    let k = ch.snr_per_watt();
    if !(k > 0.0) {
        return Err(Error::DegenerateChannel(k));
    }
    let h = omega_hessian_mg(gamma, d, m)?;
    Ok([[h[0][0], k * h[0][1]], [k * h[1][0], k * k * h[1][1]]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(x: f64) -> Self {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcavityReport {
    pub gamma: f64,
    /// Bits per channel use.
    pub rate_threshold: f64,
    pub condition_holds: bool,
    /// Hessian of ω in `(m, γ)`.
    pub hessian: [[f64; 2]; 2],
    pub leading_minor_sign: Sign,
    pub det_sign: Sign,
}

pub fn check_concavity(gamma: f64, d: f64, m: f64) -> Result<ConcavityReport> {
    let threshold = rate_threshold(gamma)?;
    let hessian = omega_hessian_mg(gamma, d, m)?;
    let det = hessian[0][0] * hessian[1][1] - hessian[0][1] * hessian[1][0];
    Ok(ConcavityReport {
        gamma,
        rate_threshold: threshold,
        condition_holds: d / m >= threshold,
        hessian,
        leading_minor_sign: Sign::of(hessian[0][0]),
        det_sign: Sign::of(det),
    })
}

/// Largest eigenvalue of a symmetric 2×2 matrix.
pub fn max_eigenvalue(h: &[[f64; 2]; 2]) -> f64 {
    let mean = 0.5 * (h[0][0] + h[1][1]);
    let half_diff = 0.5 * (h[0][0] - h[1][1]);
    mean + half_diff.hypot(h[0][1])
}

/// Frobenius norm.
pub fn matrix_norm(h: &[[f64; 2]; 2]) -> f64 {
    h.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn is_negative_semidefinite(h: &[[f64; 2]; 2], rel_tol: f64) -> bool {
    max_eigenvalue(h) <= rel_tol * matrix_norm(h)
}

/// Central-difference Hessian of `f` at `(x, y)` with relative steps
/// `rel_step·|x|`, `rel_step·|y|`, improved by one Richardson extrapolation.
pub fn numeric_hessian<F: Fn(f64, f64) -> f64>(f: F, x: f64, y: f64, rel_step: f64) -> [[f64; 2]; 2] {
    let hx = rel_step * x.abs().max(f64::MIN_POSITIVE);
    let hy = rel_step * y.abs().max(f64::MIN_POSITIVE);
    let raw = |hx: f64, hy: f64| {
        let f0 = f(x, y);
        let fxx = (f(x + hx, y) - 2.0 * f0 + f(x - hx, y)) / (hx * hx);
        let fyy = (f(x, y + hy) - 2.0 * f0 + f(x, y - hy)) / (hy * hy);
        let fxy = (f(x + hx, y + hy) - f(x + hx, y - hy) - f(x - hx, y + hy) + f(x - hx, y - hy))
            / (4.0 * hx * hy);
        [[fxx, fxy], [fxy, fyy]]
    };
    let coarse = raw(hx, hy);
    let fine = raw(0.5 * hx, 0.5 * hy);
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = (4.0 * fine[i][j] - coarse[i][j]) / 3.0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbl::omega;
    use approx::assert_relative_eq;

    #[test]
    fn threshold_matches_high_precision() {
        // 40-digit evaluations of the larger root of h
        let table = [
            (1e-4, 3.605_926_177_175_434_2e-9),
            (1e-2, 3.526_488_887_986_876_4e-5),
            (0.1, 0.002_879_905_382_646_327_5),
            (0.75, 0.034_851_684_336_019_15),
            (1.0, 0.029_534_879_198_889_383),
        ];
        for (g, want) in table {
            assert_relative_eq!(rate_threshold(g).unwrap(), want, max_relative = 1e-8);
        }
        assert_eq!(rate_threshold(15.0).unwrap(), 0.0);
        assert_eq!(rate_threshold(100.0).unwrap(), 0.0);
        assert!(matches!(rate_threshold(0.0), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn delta_signs() {
        for i in 0..400 {
            let g = 10f64.powf(-4.0 + 6.0 * f64::from(i) / 399.0);
            let dc = delta_coeffs(g).unwrap();
            assert!(dc.a > 0.0);
            assert!(dc.b >= 0.0, "{g}");
            if dc.c <= 0.0 {
                assert!(rate_threshold(g).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn threshold_sweep_maximum() {
        let (g, r) = rate_threshold_max(100.0).unwrap();
        assert!((g - 0.75).abs() < 0.05, "{g}");
        assert!((r - 0.034_85).abs() < 1e-4, "{r}");
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &(g, d, m) in &[(15.0, 320.0, 100.0), (0.3, 64.0, 900.0), (2.0, 500.0, 4000.0)] {
            let o = omega_derivs(g, d, m).unwrap();
            assert_relative_eq!(o.value, omega(g, d, m).unwrap(), max_relative = 1e-14);
            let hm = 1e-4 * m;
            let hg = 1e-4 * g;
            let fm = (omega(g, d, m + hm).unwrap() - omega(g, d, m - hm).unwrap()) / (2.0 * hm);
            let fg = (omega(g + hg, d, m).unwrap() - omega(g - hg, d, m).unwrap()) / (2.0 * hg);
            assert_relative_eq!(o.dm, fm, max_relative = 1e-6);
            assert_relative_eq!(o.dg, fg, max_relative = 1e-6);
            let num = numeric_hessian(|m, g| omega(g, d, m).unwrap(), m, g, 1e-4);
            let ana = omega_hessian_mg(g, d, m).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(ana[i][j], num[i][j], max_relative = 1e-5);
                }
            }
        }
    }

    #[test]
    fn power_hessian_is_chain_ruled() {
        let ch = ChannelSpec::new(1.5, 0.1).unwrap();
        let (d, m, p) = (320.0, 100.0, 1.0);
        let h = omega_hessian(15.0, m, d, &ch).unwrap();
        let num = numeric_hessian(|m, p| omega(15.0 * p, d, m).unwrap(), m, p, 1e-4);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(h[i][j], num[i][j], max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn diagonal_entries_are_nonpositive() {
        for &(g, d, m) in &[(0.01, 8.0, 5000.0), (1.0, 320.0, 40.0), (50.0, 1000.0, 200.0)] {
            let h = omega_hessian_mg(g, d, m).unwrap();
            assert!(h[0][0] <= 0.0);
            assert!(h[1][1] <= 0.0);
        }
    }

    #[test]
    fn determinant_grouping() {
        for &(g, d, m) in &[(15.0, 320.0, 100.0), (0.5, 10.0, 2000.0), (0.75, 30.0, 1000.0)] {
            let h = omega_hessian_mg(g, d, m).unwrap();
            let det = h[0][0] * h[1][1] - h[0][1] * h[0][1];
            let t = g * (g + 2.0);
            let want = LN_2 * LN_2 / (t * m) * delta_coeffs(g).unwrap().h(d / m);
            assert_relative_eq!(det, want, max_relative = 1e-8);
        }
    }

    #[test]
    fn concavity_report() {
        let rep = check_concavity(15.0, 320.0, 100.0).unwrap();
        assert!(rep.condition_holds);
        assert_eq!(rep.det_sign, Sign::Positive);
        assert_eq!(rep.leading_minor_sign, Sign::Negative);
        assert!(is_negative_semidefinite(&rep.hessian, 1e-8));
        // r = 0.01 is below the threshold at γ = 0.75
        let rep = check_concavity(0.75, 10.0, 1000.0).unwrap();
        assert!(!rep.condition_holds);
        assert_eq!(rep.det_sign, Sign::Negative);
    }

    #[test]
    fn max_eigenvalue_of_diagonal() {
        assert_eq!(max_eigenvalue(&[[-1.0, 0.0], [0.0, -3.0]]), -1.0);
        assert_relative_eq!(max_eigenvalue(&[[0.0, 1.0], [1.0, 0.0]]), 1.0);
    }
}
