//! One- and two-term stationary-phase expansions of
//! `∫ U(p) e^{-iω(p-p₀)²} dp` with the explicit remainder-constant
//! catalogue, verified case by case against the quadrature oracle.

use std::f64::consts::PI;

use crate::bands::{BandFunction, NORM_INFLATION};
use crate::error::{Error, Result};
use crate::phase::ErdelyiConstants;
use crate::quad::{self, OscillatoryIntegral};
use crate::{cis, C64};

const SQRT_PI: f64 = 1.772_453_850_905_516_1;

fn check_delta1(delta1: f64) -> Result<()> {
    if !(delta1 > 0.5 && delta1 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta1 must lie in (1/2, 1), got {delta1}"
        )));
    }
    Ok(())
}

fn check_delta2(delta2: f64) -> Result<()> {
    if !(delta2 > 2.0 && delta2 < 2.5) {
        return Err(Error::InvalidParameter(format!(
            "delta2 must lie in (2, 5/2), got {delta2}"
        )));
    }
    Ok(())
}

/// `C₁(δ₁) = L₁(δ₁)/(1-δ₁)
///         = √π/(2-2δ₁) · (1/(2√π) + √(1/(4π)+1/2))^{2δ₁-1}`.
pub fn erdelyi_c1(delta1: f64) -> Result<f64> {
    check_delta1(delta1)?;
    let l1 = ErdelyiConstants::for_order(1)?.l_n(delta1)?;
    Ok(l1 / (1.0 - delta1))
}

/// `C₂(δ₂) = 2L₄(δ₂)/(5-2δ₂)
///         = 1/(30-12δ₂) · (3√π/8 + √(9π/64+1/2))^{2δ₂-4}`.
pub fn erdelyi_c2(delta2: f64) -> Result<f64> {
    check_delta2(delta2)?;
    let l4 = ErdelyiConstants::for_order(4)?.l_n(delta2)?;
    Ok(2.0 * l4 / (5.0 - 2.0 * delta2))
}

/// `C₁(δ₁,p₁,p₂) = √π + C₁(δ₁)(p₂-p₁)^{2-2δ₁}` — sup-norm estimate scale.
pub fn cor_c1(delta1: f64, p1: f64, p2: f64) -> Result<f64> {
    Ok(SQRT_PI + erdelyi_c1(delta1)? * (p2 - p1).powf(2.0 - 2.0 * delta1))
}

/// `C₂(δ₁,p₁,p₂) = C₁(δ₁)(p₂-p₁)^{2-2δ₁}` — one-term remainder scale.
pub fn cor_c2(delta1: f64, p1: f64, p2: f64) -> Result<f64> {
    Ok(erdelyi_c1(delta1)? * (p2 - p1).powf(2.0 - 2.0 * delta1))
}

/// `C₃(δ₂,p₁,p₂) = C₂(δ₂)(p₂-p₁)^{5-2δ₂}` — C⁴ off-band decay scale.
pub fn cor_c3(delta2: f64, p1: f64, p2: f64) -> Result<f64> {
    Ok(erdelyi_c2(delta2)? * (p2 - p1).powf(5.0 - 2.0 * delta2))
}

/// `C₁(δ₁,p₁,p₂)/(2π)` — the wave-packet sup-norm constant.
pub fn tilde_c1(delta1: f64, p1: f64, p2: f64) -> Result<f64> {
    Ok(cor_c1(delta1, p1, p2)? / (2.0 * PI))
}

/// `C₂(δ₁,p₁,p₂)/(2π)` — the wave-packet remainder constant.
pub fn tilde_c2(delta1: f64, p1: f64, p2: f64) -> Result<f64> {
    Ok(cor_c2(delta1, p1, p2)? / (2.0 * PI))
}

/// Outcome of one expansion check against the oracle.
#[derive(Debug, Clone, Copy)]
pub struct ExpansionReport {
    pub oracle: C64,
    pub leading: C64,
    pub second: C64,
    pub remainder: C64,
    pub bound: f64,
    pub pass: bool,
    /// `bound + allowance - |remainder|`; negative means violation.
    pub margin: f64,
}

/// `√π e^{-iπ/4} U(p₀) ω^{-1/2}`; exactly zero when `U(p₀) = 0`.
pub fn leading_term(u: &BandFunction, omega: f64, p0: f64) -> C64 {
    let amp = u.fourier_eval(p0);
    if amp == C64::new(0.0, 0.0) {
        return C64::new(0.0, 0.0);
    }
    SQRT_PI * cis(-0.25 * PI) * amp / omega.sqrt()
}

/// `(√π/4) e^{-i3π/4} U''(p₀) ω^{-3/2}`.
pub fn second_term(u: &BandFunction, omega: f64, p0: f64) -> Result<C64> {
    if u.smoothness_order() < 2 {
        return Err(Error::InvalidParameter(
            "second expansion term needs a C² amplitude".into(),
        ));
    }
    let d2 = u.fourier_deriv(2, p0)?;
    Ok(0.25 * SQRT_PI * cis(-0.75 * PI) * d2 * omega.powf(-1.5))
}

fn oracle_value(u: &BandFunction, omega: f64, p0: f64, tol: f64) -> Result<C64> {
    let (p1, p2) = u.band();
    let amp = |p: f64| u.fourier_eval(p);
    let oi = OscillatoryIntegral {
        amplitude: &amp,
        support_lo: p1,
        support_hi: p2,
        omega,
        p0,
    };
    let r = quad::integrate(&oi, tol)?;
    if !r.converged {
        return Err(Error::QuadratureFailure {
            context: format!("oscillatory oracle at ω={omega}, p₀={p0}"),
            value_re: r.value.re,
            value_im: r.value.im,
            estimate: r.abs_error_estimate,
            tol,
            panels: r.panels_used,
        });
    }
    Ok(r.value)
}

fn report(oracle: C64, leading: C64, second: C64, bound: f64, tol: f64) -> ExpansionReport {
    let remainder = oracle - leading - second;
    let allowance = 10.0 * tol;
    ExpansionReport {
        oracle,
        leading,
        second,
        remainder,
        bound,
        pass: remainder.norm() <= bound + allowance,
        margin: bound + allowance - remainder.norm(),
    }
}

/// One-term expansion: remainder measured against the oracle and compared
/// with `C₁(δ₁)(p₂-p₁)^{2-2δ₁} ‖U'‖_∞ ω^{-δ₁}`.
pub fn verify_one_term(
    u: &BandFunction,
    omega: f64,
    p0: f64,
    delta1: f64,
    tol: f64,
) -> Result<ExpansionReport> {
    check_delta1(delta1)?;
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter("omega must be positive".into()));
    }
    let (p1, p2) = u.band();
    let oracle = oracle_value(u, omega, p0, tol)?;
    let leading = leading_term(u, omega, p0);
    let bound = erdelyi_c1(delta1)?
        * (p2 - p1).powf(2.0 - 2.0 * delta1)
        * deriv_sup(u, 1)?
        * NORM_INFLATION
        * omega.powf(-delta1);
    Ok(report(oracle, leading, C64::new(0.0, 0.0), bound, tol))
}

/// Two-term expansion with the
/// `C₂(δ₂)(p₂-p₁)^{5-2δ₂} ‖U⁽⁴⁾‖_∞ ω^{-δ₂}` remainder bound; requires a
/// C⁴ amplitude.
pub fn verify_two_term(
    u: &BandFunction,
    omega: f64,
    p0: f64,
    delta2: f64,
    tol: f64,
) -> Result<ExpansionReport> {
    check_delta2(delta2)?;
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter("omega must be positive".into()));
    }
    if u.smoothness_order() < 4 {
        return Err(Error::InvalidParameter(
            "two-term expansion needs a C⁴ amplitude".into(),
        ));
    }
    let (p1, p2) = u.band();
    let oracle = oracle_value(u, omega, p0, tol)?;
    let leading = leading_term(u, omega, p0);
    let second = second_term(u, omega, p0)?;
    let bound = erdelyi_c2(delta2)?
        * (p2 - p1).powf(5.0 - 2.0 * delta2)
        * deriv_sup(u, 4)?
        * NORM_INFLATION
        * omega.powf(-delta2);
    Ok(report(oracle, leading, second, bound, tol))
}

/// Which packaged estimate to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMode {
    /// `|∫| ≤ C₁(δ₁,p₁,p₂)(‖U‖+‖U'‖) ω^{-1/2}` for ω ≥ 1, any p₀.
    SupNorm,
    /// `|∫ - leading| ≤ C₂(δ₁,p₁,p₂)‖U'‖ ω^{-δ₁}` for p₀ in the band.
    InsideBand,
    /// `|∫| ≤ C₂(δ₁,p₁,p₂)‖U'‖ ω^{-δ₁}` for p₀ outside the band.
    OutsideBand,
    /// `|∫| ≤ C₃(δ₂,p₁,p₂)‖U⁽⁴⁾‖ ω^{-δ₂}` for p₀ outside, U ∈ C⁴.
    OutsideBandC4,
}

/// Check one of the four packaged estimates.
pub fn verify_packaged_estimate(
    u: &BandFunction,
    omega: f64,
    p0: f64,
    mode: EstimateMode,
    delta1: f64,
    delta2: f64,
    tol: f64,
) -> Result<ExpansionReport> {
    let (p1, p2) = u.band();
    let inside = p0 >= p1 && p0 <= p2;
    match mode {
        EstimateMode::SupNorm => {
            if omega < 1.0 {
                return Err(Error::InvalidParameter(
                    "sup-norm estimate requires ω ≥ 1".into(),
                ));
            }
        }
        EstimateMode::InsideBand => {
            if !inside {
                return Err(Error::InvalidParameter(format!(
                    "p₀ = {p0} is outside the band [{p1}, {p2}]"
                )));
            }
        }
        EstimateMode::OutsideBand | EstimateMode::OutsideBandC4 => {
            if inside {
                return Err(Error::InvalidParameter(format!(
                    "p₀ = {p0} is inside the band [{p1}, {p2}]"
                )));
            }
        }
    }
    let oracle = oracle_value(u, omega, p0, tol)?;
    match mode {
        EstimateMode::SupNorm => {
            let norms = (deriv_sup(u, 0)? + deriv_sup(u, 1)?) * NORM_INFLATION;
            let bound = cor_c1(delta1, p1, p2)? * norms / omega.sqrt();
            Ok(report(oracle, C64::new(0.0, 0.0), C64::new(0.0, 0.0), bound, tol))
        }
        EstimateMode::InsideBand => {
            let leading = leading_term(u, omega, p0);
            let bound = cor_c2(delta1, p1, p2)?
                * deriv_sup(u, 1)?
                * NORM_INFLATION
                * omega.powf(-delta1);
            Ok(report(oracle, leading, C64::new(0.0, 0.0), bound, tol))
        }
        EstimateMode::OutsideBand => {
            let bound = cor_c2(delta1, p1, p2)?
                * deriv_sup(u, 1)?
                * NORM_INFLATION
                * omega.powf(-delta1);
            Ok(report(oracle, C64::new(0.0, 0.0), C64::new(0.0, 0.0), bound, tol))
        }
        EstimateMode::OutsideBandC4 => {
            if u.smoothness_order() < 4 {
                return Err(Error::InvalidParameter(
                    "this estimate needs a C⁴ amplitude".into(),
                ));
            }
            let bound = cor_c3(delta2, p1, p2)?
                * deriv_sup(u, 4)?
                * NORM_INFLATION
                * omega.powf(-delta2);
            Ok(report(oracle, C64::new(0.0, 0.0), C64::new(0.0, 0.0), bound, tol))
        }
    }
}

fn deriv_sup(u: &BandFunction, j: usize) -> Result<f64> {
    u.deriv_sup(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::BandProfile;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bump(m: usize, p1: f64, p2: f64, x0: f64) -> BandFunction {
        BandFunction::new(BandProfile::cos_power(m).unwrap(), p1, p2, x0).unwrap()
    }

    #[test]
    fn catalogue_cross_identity() {
        // C₁(δ₁)(1-δ₁)/L₁(δ₁) = 1
        for delta1 in [0.55, 0.75, 0.95] {
            let c1 = erdelyi_c1(delta1).unwrap();
            let l1 = ErdelyiConstants::for_order(1)
                .unwrap()
                .l_n(delta1)
                .unwrap();
            assert_abs_diff_eq!(c1 * (1.0 - delta1) / l1, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn catalogue_blow_up_toward_one() {
        let a = erdelyi_c1(0.9).unwrap();
        let b = erdelyi_c1(0.99).unwrap();
        let c = erdelyi_c1(0.999).unwrap();
        assert!(a < b && b < c);
    }

    #[test]
    fn catalogue_rejects_out_of_range() {
        assert!(erdelyi_c1(0.5).is_err());
        assert!(erdelyi_c1(1.0).is_err());
        assert!(erdelyi_c2(2.0).is_err());
        assert!(erdelyi_c2(2.5).is_err());
    }

    #[test]
    fn tilde_constants_relation() {
        let (p1, p2) = (1.0, 2.0);
        let d = 0.75;
        let t1 = tilde_c1(d, p1, p2).unwrap();
        let t2 = tilde_c2(d, p1, p2).unwrap();
        assert_abs_diff_eq!(t1 - t2, 0.5 / SQRT_PI, epsilon = 1e-14);
    }

    #[test]
    fn leading_term_examples() {
        let u = bump(3, -1.0, 1.0, 0.0);
        // U(p₀)=1 at midpoint, ω = π → e^{-iπ/4}
        let v = leading_term(&u, PI, 0.0);
        assert_abs_diff_eq!(v.re, (0.25 * PI).cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(v.im, -(0.25 * PI).sin(), epsilon = 1e-14);
        // outside the band the term vanishes exactly
        assert_eq!(leading_term(&u, 10.0, 4.0), C64::new(0.0, 0.0));
    }

    #[test]
    fn second_term_scaling() {
        let u = bump(3, -1.0, 1.0, 0.0);
        let a = second_term(&u, 10.0, 0.2).unwrap();
        let b = second_term(&u, 100.0, 0.2).unwrap();
        // ratio second/leading scales as ω^{-1}: terms themselves as ω^{-3/2}
        assert_abs_diff_eq!(b.norm() / a.norm(), 10f64.powf(-1.5), epsilon = 1e-12);
        let low = bump(1, -1.0, 1.0, 0.0);
        assert!(second_term(&low, 10.0, 0.0).is_err());
    }

    #[test]
    fn one_term_expansion_small_suite() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..25 {
            let m = rng.gen_range(1..=3usize);
            let p1 = rng.gen_range(-2.0..2.0);
            let p2 = p1 + rng.gen_range(0.5..4.0);
            let x0 = rng.gen_range(-3.0..3.0);
            let u = bump(m, p1, p2, x0);
            let omega = 10f64.powf(rng.gen_range(0.0..3.5));
            let p0 = rng.gen_range(p1 - 2.0..p2 + 2.0);
            let r = verify_one_term(&u, omega, p0, 0.75, 1e-9).unwrap();
            assert!(r.pass, "m={m} ω={omega} p0={p0}: margin {}", r.margin);
        }
    }

    #[test]
    fn one_term_outside_band_leading_vanishes() {
        let u = bump(2, 0.0, 1.0, 1.0);
        let r = verify_one_term(&u, 50.0, 4.0, 0.75, 1e-10).unwrap();
        assert_eq!(r.leading, C64::new(0.0, 0.0));
        assert!(r.oracle.norm() <= r.bound + 1e-9);
    }

    #[test]
    fn one_term_remainder_scaled_by_rate_stays_bounded() {
        let u = bump(3, 1.0, 2.0, 0.0);
        let delta1 = 0.75;
        let scale = erdelyi_c1(delta1).unwrap() * 1.0f64.powf(2.0 - 2.0 * delta1);
        for omega in [1.0, 10.0, 100.0, 1000.0] {
            let r = verify_one_term(&u, omega, 1.5, delta1, 1e-10).unwrap();
            let norm_up = r.bound / (scale * omega.powf(-delta1)); // ‖U'‖ (inflated)
            assert!(r.remainder.norm() * omega.powf(delta1) <= scale * norm_up + 1e-6);
        }
    }

    #[test]
    fn two_term_expansion_cases() {
        let u = bump(3, 1.0, 2.0, 0.5);
        for omega in [10.0, 1000.0] {
            for p0 in [1.3, 1.5, 2.6] {
                let r = verify_two_term(&u, omega, p0, 2.25, 1e-10).unwrap();
                assert!(r.pass, "ω={omega} p0={p0} margin {}", r.margin);
            }
        }
        let low = bump(2, 1.0, 2.0, 0.0); // C³ only
        assert!(verify_two_term(&low, 10.0, 1.5, 2.25, 1e-10).is_err());
    }

    #[test]
    fn packaged_estimates_modes() {
        let u = bump(3, 1.0, 2.0, -0.5);
        let (d1, d2) = (0.75, 2.25);
        let tol = 1e-10;
        let i = verify_packaged_estimate(&u, 1.0, 0.3, EstimateMode::SupNorm, d1, d2, tol)
            .unwrap();
        assert!(i.pass);
        let ii =
            verify_packaged_estimate(&u, 25.0, 1.4, EstimateMode::InsideBand, d1, d2, tol)
                .unwrap();
        assert!(ii.pass);
        let iii =
            verify_packaged_estimate(&u, 25.0, 3.0, EstimateMode::OutsideBand, d1, d2, tol)
                .unwrap();
        assert!(iii.pass);
        let iv = verify_packaged_estimate(
            &u,
            25.0,
            3.0,
            EstimateMode::OutsideBandC4,
            d1,
            d2,
            tol,
        )
        .unwrap();
        assert!(iv.pass);
        // mode preconditions
        assert!(verify_packaged_estimate(&u, 0.5, 0.3, EstimateMode::SupNorm, d1, d2, tol)
            .is_err());
        assert!(
            verify_packaged_estimate(&u, 10.0, 3.0, EstimateMode::InsideBand, d1, d2, tol)
                .is_err()
        );
        assert!(
            verify_packaged_estimate(&u, 10.0, 1.5, EstimateMode::OutsideBand, d1, d2, tol)
                .is_err()
        );
    }

    #[test]
    fn c4_off_band_estimate_decays_faster() {
        // two-point log slope between ω=10 and ω=10³ is at most -2
        let u = bump(3, 1.0, 2.0, 0.0);
        let p0 = 3.0;
        let v10 = verify_packaged_estimate(
            &u,
            10.0,
            p0,
            EstimateMode::OutsideBandC4,
            0.75,
            2.25,
            1e-11,
        )
        .unwrap()
        .oracle
        .norm();
        let v1000 = verify_packaged_estimate(
            &u,
            1000.0,
            p0,
            EstimateMode::OutsideBandC4,
            0.75,
            2.25,
            1e-11,
        )
        .unwrap()
        .oracle
        .norm();
        let slope = (v1000.ln() - v10.ln()) / (1000f64.ln() - 10f64.ln());
        assert!(slope <= -2.0, "slope {slope}");
    }
}
