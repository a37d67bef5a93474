//! Long-time structure of the first-interaction amplitude: the
//! decomposition `W(t,p) = W₁(p) + W₂(t,p)/t` on the admissible frequency
//! set, the uniform `W₂` bound, the refined expansion of the
//! first-interaction packet around `W₁`, and the intervals where
//! `|W₁| > 0` (hence where the `t^{-1/2}` rate is attained).

use std::f64::consts::PI;

use crate::bands::{BandForm, BandFunction, NORM_INFLATION};
use crate::dyson::{s2_eval, AmplitudeW};
use crate::error::{Error, Result};
use crate::expansion::ExpansionReport;
use crate::quad;
use crate::{cis, C64};

const SQRT_PI: f64 = 1.772_453_850_905_516_1;

/// `q(y,p) = (p-y)² - p²`; factorizes as `y(y-2p)`.
#[inline]
pub fn q(y: f64, p: f64) -> f64 {
    (p - y) * (p - y) - p * p
}

/// `q̃(y,p) = 2(y-2p)(y-p) = (y-2p) ∂_y q(y,p)`.
#[inline]
pub fn q_tilde(y: f64, p: f64) -> f64 {
    2.0 * (y - 2.0 * p) * (y - p)
}

/// `∂_y q̃(y,p) = 2(2y-3p)`.
#[inline]
pub fn q_tilde_dy(y: f64, p: f64) -> f64 {
    2.0 * (2.0 * y - 3.0 * p)
}

/// The C¹ extension of `y ↦ V̂(y)/y`.
///
/// When the potential band carries the factorization structurally
/// (`BandForm::Factored`, i.e. `V̂(y) = y·Ṽ(y)` by construction) the
/// quotient is read off directly; dividing out numerically near `y = 0`
/// would be catastrophically ill-conditioned. Otherwise the band must not
/// contain the zero frequency, and the plain quotient is smooth.
#[derive(Debug, Clone)]
pub struct TildeV {
    base: BandFunction,
    quotient: BandFunction,
    structural: bool,
}

impl TildeV {
    pub fn new(potential: &BandFunction) -> Result<Self> {
        let (a, b) = potential.band();
        match potential.form() {
            BandForm::Factored => {
                let quotient = BandFunction::new(
                    potential.profile().clone(),
                    a,
                    b,
                    potential.center(),
                )?;
                Ok(Self {
                    base: potential.clone(),
                    quotient,
                    structural: true,
                })
            }
            BandForm::Plain => {
                if a <= 0.0 && b >= 0.0 {
                    return Err(Error::HypothesisViolation(
                        "the zero frequency lies in the potential band but the \
                         profile carries no explicit factorization of it; use a \
                         factored band"
                            .into(),
                    ));
                }
                let quotient = BandFunction::new(
                    potential.profile().clone(),
                    a,
                    b,
                    potential.center(),
                )?;
                Ok(Self {
                    base: potential.clone(),
                    quotient,
                    structural: false,
                })
            }
        }
    }

    pub fn base(&self) -> &BandFunction {
        &self.base
    }

    /// `Ṽ(y)`.
    pub fn eval(&self, y: f64) -> C64 {
        if self.structural {
            self.quotient.fourier_eval(y)
        } else if y != 0.0 {
            self.quotient.fourier_eval(y) / y
        } else {
            C64::new(0.0, 0.0) // outside the band by construction
        }
    }

    /// `Ṽ'(y)`.
    pub fn deriv1(&self, y: f64) -> C64 {
        if self.structural {
            self.quotient.fourier_deriv_unchecked(1, y)
        } else if y != 0.0 {
            (self.quotient.fourier_deriv_unchecked(1, y) - self.eval(y)) / y
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// `max(sup|Ṽ|, sup|Ṽ'|)` on the band grid.
    pub fn w1inf_norm(&self) -> f64 {
        let (a, b) = self.base.band();
        let n = crate::bands::SUP_NORM_GRID;
        let mut best = 0.0f64;
        for i in 0..n {
            let y = a + (b - a) * (i as f64 + 0.5) / n as f64;
            best = best.max(self.eval(y).norm()).max(self.deriv1(y).norm());
        }
        best
    }
}

fn forbidden_interval(a: f64, b: f64) -> (f64, f64) {
    (0.5 * a, 0.5 * b)
}

fn reject_forbidden(a: f64, b: f64, p: f64) -> Result<()> {
    let (lo, hi) = forbidden_interval(a, b);
    if p >= lo && p <= hi {
        return Err(Error::InvalidParameter(format!(
            "p = {p} lies in [{lo}, {hi}] where the kernel y-2p vanishes"
        )));
    }
    Ok(())
}

/// Time-independent part `W₁(p) = -∫ Ṽ(y) û₀(p-y) / (y-2p) dy` over the
/// interaction interval; zero outside the sum band.
pub fn w1_eval(tv: &TildeV, u0: &BandFunction, p: f64, tol: f64) -> Result<C64> {
    let (a, b) = tv.base.band();
    reject_forbidden(a, b, p)?;
    let w = AmplitudeW::new(tv.base.clone(), u0.clone(), tol)?;
    let Some((lo, hi)) = w.interaction_interval(p) else {
        return Ok(C64::new(0.0, 0.0));
    };
    let f = |y: f64| tv.eval(y) * u0.fourier_eval(p - y) / (y - 2.0 * p);
    let r = quad::integrate_time_kernel(&f, lo, hi, tol)?
        .require_converged("time-independent amplitude")?;
    Ok(-r.value)
}

/// Time-bounded correction
/// `W₂(t,p) = -i ∫ ∂_y[Ṽ(·)û₀(p-·)/q̃(·,p)](y) e^{-it q(y,p)} dy`,
/// with the derivative expanded analytically by the quotient rule.
pub fn w2_eval(tv: &TildeV, u0: &BandFunction, t: f64, p: f64, tol: f64) -> Result<C64> {
    let (a, b) = tv.base.band();
    let (p1, p2) = u0.band();
    reject_forbidden(a, b, p)?;
    if p1 <= 0.0 && p2 >= 0.0 {
        return Err(Error::HypothesisViolation(
            "the amplitude correction needs 0 outside the initial band".into(),
        ));
    }
    if u0.smoothness_order() < 1 {
        return Err(Error::InvalidParameter(
            "the amplitude correction needs a C¹ initial profile".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "the amplitude correction needs t > 0, got {t}"
        )));
    }
    let w = AmplitudeW::new(tv.base.clone(), u0.clone(), tol)?;
    let Some((lo, hi)) = w.interaction_interval(p) else {
        return Ok(C64::new(0.0, 0.0));
    };
    let h = |y: f64| {
        let qt = q_tilde(y, p);
        let num = tv.deriv1(y) * u0.fourier_eval(p - y)
            - tv.eval(y) * u0.fourier_deriv_unchecked(1, p - y);
        num / qt - tv.eval(y) * u0.fourier_eval(p - y) * q_tilde_dy(y, p) / (qt * qt)
    };
    let f = |y: f64| h(y) * cis(-t * q(y, p));
    let panels = quad::osc_panels(t, p, lo, hi);
    let r = quad::adaptive(&f, &panels, tol, false);
    if !r.converged {
        return Err(Error::QuadratureFailure {
            context: format!("amplitude correction at t={t}, p={p}"),
            value_re: r.value.re,
            value_im: r.value.im,
            estimate: r.abs_error_estimate,
            tol,
            panels: r.panels_used,
        });
    }
    Ok(C64::new(0.0, -1.0) * r.value)
}

/// Constants bounding the correction:
/// `c̃₃ = (b-a)/(2 min|pᵢ|) ε⁻¹ + max{|2a-3(p₂+b)|, |2b-3(p₁+a)|}(b-a)/(8 min|pᵢ|²) ε⁻²`
/// and `c₃ = c̃₃/(2√π)`.
pub fn c3_constants(a: f64, b: f64, p1: f64, p2: f64, eps: f64) -> Result<(f64, f64)> {
    if p1 <= 0.0 && p2 >= 0.0 {
        return Err(Error::InvalidParameter(
            "the correction bound needs 0 outside the initial band".into(),
        ));
    }
    if !(eps > 0.0 && eps < 0.5 * (p2 - p1)) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, (p₂-p₁)/2), got {eps}"
        )));
    }
    let min_p = p1.abs().min(p2.abs());
    let coef = (2.0 * a - 3.0 * (p2 + b))
        .abs()
        .max((2.0 * b - 3.0 * (p1 + a)).abs());
    let c3_tilde =
        (b - a) / (2.0 * min_p) / eps + coef * (b - a) / (8.0 * min_p * min_p) / (eps * eps);
    Ok((c3_tilde, c3_tilde / (2.0 * SQRT_PI)))
}

/// The frequency set where the decomposition applies: the sum band minus
/// the ε-fattened forbidden interval `[a/2-ε, b/2+ε]`; at most two pieces.
pub fn admissible_intervals(
    a: f64,
    b: f64,
    p1: f64,
    p2: f64,
    eps: f64,
) -> Vec<(f64, f64)> {
    let (lo, hi) = (p1 + a, p2 + b);
    let (flo, fhi) = (0.5 * a - eps, 0.5 * b + eps);
    let mut out = Vec::new();
    if lo < flo.min(hi) {
        out.push((lo, flo.min(hi)));
    }
    if fhi.max(lo) < hi {
        out.push((fhi.max(lo), hi));
    }
    out
}

/// Refined long-time check of the first-interaction packet: on
/// `ξ ∈ [p₁+a, p₂+b] \ [a/2-ε, b/2+ε]` the packet matches
/// `(2√π)⁻¹ e^{-iπ/4} e^{ix²/4t} W₁(ξ) t^{-1/2}` up to
/// `c₂ ‖V̂‖_{W⁴,∞}‖û₀‖_{W⁵,∞} t^{-δ₁} + c₃ ‖Ṽ‖_{W¹,∞}‖û₀‖_{W¹,∞} t^{-3/2}`.
#[allow(clippy::too_many_arguments)]
pub fn verify_refined_expansion(
    tv: &TildeV,
    u0: &BandFunction,
    t: f64,
    x: f64,
    delta1: f64,
    delta2: f64,
    eps: f64,
    tol: f64,
) -> Result<ExpansionReport> {
    let (a, b) = tv.base.band();
    let (p1, p2) = u0.band();
    if u0.smoothness_order() < 5 || tv.base.smoothness_order() < 4 {
        return Err(Error::HypothesisViolation(
            "the refined expansion needs a C⁵ initial and C⁴ potential profile".into(),
        ));
    }
    if p1 <= 0.0 && p2 >= 0.0 {
        return Err(Error::HypothesisViolation(
            "the refined expansion needs 0 outside the initial band".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParameter("t must be positive".into()));
    }
    let xi = x / (2.0 * t);
    let admissible = admissible_intervals(a, b, p1, p2, eps);
    if !admissible.iter().any(|&(lo, hi)| xi >= lo && xi <= hi) {
        return Err(Error::InvalidParameter(format!(
            "(t, x) with ξ = {xi} is outside the admissible region {admissible:?}"
        )));
    }
    let w = AmplitudeW::new(tv.base.clone(), u0.clone(), tol)?;
    let oracle = s2_eval(&w, t, x, tol)?;
    let w1 = w1_eval(tv, u0, xi, tol)?;
    let leading = 0.5 / SQRT_PI * cis(-0.25 * PI) * cis(x * x / (4.0 * t)) * w1 / t.sqrt();
    let (_, c2) = crate::dyson::c_constants(delta1, delta2, a, b, p1, p2)?;
    let (_, c3) = c3_constants(a, b, p1, p2, eps)?;
    let norm_v4 = tv.base.wkinf_norm(4)? * NORM_INFLATION;
    let norm_u5 = u0.wkinf_norm(5)? * NORM_INFLATION;
    let norm_tv = tv.w1inf_norm() * NORM_INFLATION;
    let norm_u1 = u0.wkinf_norm(1)? * NORM_INFLATION;
    let bound = c2 * norm_v4 * norm_u5 * t.powf(-delta1)
        + c3 * norm_tv * norm_u1 * t.powf(-1.5);
    let remainder = oracle - leading;
    let allowance = 10.0 * tol;
    Ok(ExpansionReport {
        oracle,
        leading,
        second: C64::new(0.0, 0.0),
        remainder,
        bound,
        pass: remainder.norm() <= bound + allowance,
        margin: bound + allowance - remainder.norm(),
    })
}

/// An interval on which `|W₁| > 0` was established, with the smallest
/// sampled modulus as evidence.
#[derive(Debug, Clone, Copy)]
pub struct PositivityInterval {
    pub lo: f64,
    pub hi: f64,
    pub min_sampled: f64,
}

/// Number of interior samples taken per positivity interval.
pub const POSITIVITY_SAMPLES: usize = 32;

fn sign_definite(values: impl Iterator<Item = f64>) -> bool {
    let mut sign = 0.0f64;
    for v in values {
        if v == 0.0 {
            return false;
        }
        if sign == 0.0 {
            sign = v.signum();
        } else if v.signum() != sign {
            return false;
        }
    }
    sign != 0.0
}

fn check_part_signs(
    label: &str,
    mut eval: impl FnMut(f64) -> C64,
    lo: f64,
    hi: f64,
) -> Result<()> {
    let n = 64;
    let sample = |k: usize| lo + (hi - lo) * (k as f64 + 0.5) / n as f64;
    let re_ok = sign_definite((0..n).map(|k| eval(sample(k)).re));
    let im_ok = sign_definite((0..n).map(|k| eval(sample(k)).im));
    if re_ok && im_ok {
        Ok(())
    } else {
        Err(Error::HypothesisViolation(format!(
            "{label} must have sign-definite real and imaginary parts on \
             ({lo}, {hi}); the sampled values change sign or vanish"
        )))
    }
}

/// Intervals of frequencies where `|W₁| > 0`, under the separation
/// condition `p₁ > b/2 - a + ε` (or its mirror) and sign-definiteness of
/// the spectral data on the frequency ranges each case actually uses.
/// Each returned interval is certified by sampling `|W₁|` at
/// [`POSITIVITY_SAMPLES`] interior points.
pub fn positivity_intervals(
    tv: &TildeV,
    u0: &BandFunction,
    eps: f64,
    tol: f64,
) -> Result<Vec<PositivityInterval>> {
    let (a, b) = tv.base.band();
    let (p1, p2) = u0.band();
    if !(eps > 0.0 && eps < 0.5 * (p2 - p1)) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, (p₂-p₁)/2), got {eps}"
        )));
    }
    let separated = p1 > 0.5 * b - a + eps || p2 < 0.5 * a - b - eps;
    if !separated {
        return Err(Error::HypothesisViolation(format!(
            "need p₁ > b/2 - a + ε or p₂ < a/2 - b - ε so the whole sum band \
             is admissible; got p₁={p1}, p₂={p2}, a={a}, b={b}, ε={eps}"
        )));
    }
    check_part_signs("û₀", |p| u0.fourier_eval(p), p1, p2)?;
    let mut intervals = Vec::new();
    if b > 0.0 {
        let eta1 = a.max(0.0);
        // the case uses V̂ frequencies in (η₁, b)
        check_part_signs("V̂", |y| tv.base.fourier_eval(y), eta1, b)?;
        intervals.push((p2 + eta1, p2 + b));
    }
    if a < 0.0 {
        let eta2 = b.min(0.0);
        check_part_signs("V̂", |y| tv.base.fourier_eval(y), a, eta2)?;
        intervals.push((p1 + a, p1 + eta2));
    }
    if intervals.is_empty() {
        return Err(Error::HypothesisViolation(
            "the potential band touches zero width on both sides; no interval \
             is produced"
                .into(),
        ));
    }
    intervals.sort_by(|u, v| u.0.partial_cmp(&v.0).unwrap());
    let mut out = Vec::new();
    for (lo, hi) in intervals {
        let mut min_sampled = f64::INFINITY;
        for k in 0..POSITIVITY_SAMPLES {
            let p = lo + (hi - lo) * (k as f64 + 0.5) / POSITIVITY_SAMPLES as f64;
            min_sampled = min_sampled.min(w1_eval(tv, u0, p, tol)?.norm());
        }
        out.push(PositivityInterval {
            lo,
            hi,
            min_sampled,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::BandProfile;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn packet() -> BandFunction {
        BandFunction::new(
            BandProfile::cos_power_rotated(3, 0.25 * PI).unwrap(),
            1.0,
            2.0,
            0.0,
        )
        .unwrap()
    }

    fn potential() -> BandFunction {
        BandFunction::new_factored(BandProfile::sin_mix(3).unwrap(), -0.5, 0.5, 0.0)
            .unwrap()
    }

    #[test]
    fn q_factorization_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let y = rng.gen_range(-10.0..10.0);
            let p = rng.gen_range(-10.0..10.0);
            assert!((q(y, p) - y * (y - 2.0 * p)).abs() < 1e-12 * (1.0 + q(y, p).abs()));
            let dq = -2.0 * (p - y);
            assert!((q_tilde(y, p) - (y - 2.0 * p) * dq).abs() < 1e-12 * (1.0 + q_tilde(y, p).abs()));
        }
    }

    #[test]
    fn tilde_v_is_quotient_of_base() {
        let v = potential();
        let tv = TildeV::new(&v).unwrap();
        for y in [-0.45, -0.2, 0.1, 0.3, 0.49] {
            let lhs = tv.eval(y);
            let rhs = v.fourier_eval(y) / y;
            assert!((lhs - rhs).norm() < 1e-12, "y={y}");
        }
        // boundary vanishing used by the integration by parts
        assert_eq!(tv.eval(-0.5), C64::new(0.0, 0.0));
        assert_eq!(tv.eval(0.5), C64::new(0.0, 0.0));
    }

    #[test]
    fn tilde_v_requires_structure_through_zero() {
        let plain = BandFunction::new(BandProfile::cos_power(3).unwrap(), -0.5, 0.5, 0.0)
            .unwrap();
        assert!(matches!(
            TildeV::new(&plain),
            Err(Error::HypothesisViolation(_))
        ));
        // away from zero the plain quotient is fine
        let off = BandFunction::new(BandProfile::cos_power(3).unwrap(), 1.0, 2.0, 0.0)
            .unwrap();
        let tv = TildeV::new(&off).unwrap();
        let y = 1.5;
        assert!((tv.eval(y) - off.fourier_eval(y) / y).norm() < 1e-14);
        // quotient derivative vs finite differences
        let h = 1e-5;
        let fd = (tv.eval(y + h) - tv.eval(y - h)) / (2.0 * h);
        assert!((fd - tv.deriv1(y)).norm() < 1e-7);
    }

    #[test]
    fn w1_rejects_forbidden_frequencies() {
        let tv = TildeV::new(&potential()).unwrap();
        let u0 = packet();
        assert!(w1_eval(&tv, &u0, 0.0, 1e-10).is_err());
        assert!(w1_eval(&tv, &u0, 0.25, 1e-10).is_err());
        assert!(w1_eval(&tv, &u0, 0.26, 1e-10).is_ok());
        assert!(w2_eval(&tv, &u0, 1.0, 0.1, 1e-10).is_err());
    }

    #[test]
    fn w1_zero_outside_sum_band() {
        let tv = TildeV::new(&potential()).unwrap();
        let u0 = packet();
        assert_eq!(w1_eval(&tv, &u0, 3.0, 1e-10).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(w1_eval(&tv, &u0, -1.0, 1e-10).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn zero_potential_gives_zero_parts() {
        let v = BandFunction::new_factored(BandProfile::zero(), -0.5, 0.5, 0.0).unwrap();
        let tv = TildeV::new(&v).unwrap();
        let u0 = packet();
        assert_eq!(w1_eval(&tv, &u0, 1.5, 1e-10).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(
            w2_eval(&tv, &u0, 2.0, 1.5, 1e-10).unwrap(),
            C64::new(0.0, 0.0)
        );
    }

    #[test]
    fn decomposition_identity_spot_checks() {
        let v = potential();
        let tv = TildeV::new(&v).unwrap();
        let u0 = packet();
        let w = AmplitudeW::new(v.clone(), u0.clone(), 1e-10).unwrap();
        for (t, p) in [(0.7, 1.1), (3.0, 1.9), (12.0, 2.3), (40.0, 0.9)] {
            let full = w.eval(t, p).unwrap();
            let w1 = w1_eval(&tv, &u0, p, 1e-10).unwrap();
            let w2 = w2_eval(&tv, &u0, t, p, 1e-10).unwrap();
            let diff = (full - w1 - w2 / t).norm();
            assert!(diff <= 3e-9, "t={t} p={p}: diff {diff:.3e}");
        }
    }

    #[test]
    fn w2_uniformly_bounded() {
        let v = potential();
        let tv = TildeV::new(&v).unwrap();
        let u0 = packet();
        let (a, b) = v.band();
        let (p1, p2) = u0.band();
        let eps = 0.2;
        let (c3t, _) = c3_constants(a, b, p1, p2, eps).unwrap();
        let cap = c3t * tv.w1inf_norm() * NORM_INFLATION * u0.wkinf_norm(1).unwrap()
            * NORM_INFLATION;
        for t in [1.0, 10.0, 100.0, 1e3, 1e4] {
            for &(lo, hi) in &admissible_intervals(a, b, p1, p2, eps) {
                for k in 0..9 {
                    let p = lo + (hi - lo) * (k as f64 + 0.5) / 9.0;
                    let w2 = w2_eval(&tv, &u0, t, p, 1e-9).unwrap().norm();
                    assert!(w2 <= cap + 1e-7, "t={t} p={p}: |W₂|={w2} cap={cap}");
                }
            }
        }
    }

    #[test]
    fn c3_constants_values() {
        // a=-1, b=1, p₁=1, p₂=2, ε=1/4 → c̃₃ = 4 + 11·0.25·16 = 48
        let (c3t, c3) = c3_constants(-1.0, 1.0, 1.0, 2.0, 0.25).unwrap();
        assert_abs_diff_eq!(c3t, 48.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c3, 48.0 / (2.0 * SQRT_PI), epsilon = 1e-12);
        // ε → 0 blows up like ε⁻²
        let (fine, _) = c3_constants(-1.0, 1.0, 1.0, 2.0, 0.025).unwrap();
        assert!(fine > 90.0 * c3t);
        assert!(c3_constants(-1.0, 1.0, 1.0, 2.0, 0.5).is_err());
        assert!(c3_constants(-1.0, 1.0, -1.0, 2.0, 0.25).is_err());
    }

    #[test]
    fn admissible_region_geometry() {
        // separated case: the whole sum band
        let r = admissible_intervals(-0.5, 0.5, 10.0, 11.0, 0.2);
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(r[0].0, 9.5, epsilon = 1e-14);
        assert_abs_diff_eq!(r[0].1, 11.5, epsilon = 1e-14);
        // fixture-style overlap: strip removed
        let r = admissible_intervals(-0.5, 0.5, 1.0, 2.0, 0.2);
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(r[0].0, 0.45, epsilon = 1e-14);
        assert_abs_diff_eq!(r[0].1, 2.5, epsilon = 1e-14);
    }

    #[test]
    fn refined_expansion_spot_checks() {
        let tv = TildeV::new(&potential()).unwrap();
        let u0 = packet();
        for (t, xi) in [(5.0, 1.5), (20.0, 2.2), (100.0, 0.8)] {
            let r = verify_refined_expansion(&tv, &u0, t, 2.0 * t * xi, 0.75, 2.25, 0.2, 1e-9)
                .unwrap();
            assert!(r.pass, "t={t} ξ={xi}: margin {}", r.margin);
        }
        // outside the admissible region the check refuses to run
        assert!(verify_refined_expansion(
            &tv,
            &u0,
            10.0,
            2.0 * 10.0 * 0.1,
            0.75,
            2.25,
            0.2,
            1e-9
        )
        .is_err());
    }

    #[test]
    fn positivity_intervals_fixture() {
        // a=-1/2 < 0 < b=1/2 inside the band: both side intervals appear
        let tv = TildeV::new(&potential()).unwrap();
        let u0 = packet();
        let ivs = positivity_intervals(&tv, &u0, 0.2, 1e-10).unwrap();
        assert_eq!(ivs.len(), 2);
        assert_abs_diff_eq!(ivs[0].lo, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(ivs[0].hi, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ivs[1].lo, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ivs[1].hi, 2.5, epsilon = 1e-14);
        for iv in ivs {
            assert!(iv.min_sampled > 0.0, "sampled |W₁| vanished on {iv:?}");
        }
    }

    #[test]
    fn positivity_one_sided_band() {
        // potential band strictly positive: only the right interval, with
        // η₁ = a
        let v = BandFunction::new(
            BandProfile::cos_power_rotated(3, 0.25 * PI).unwrap(),
            0.1,
            0.3,
            0.0,
        )
        .unwrap();
        let tv = TildeV::new(&v).unwrap();
        let u0 = packet();
        let ivs = positivity_intervals(&tv, &u0, 0.1, 1e-10).unwrap();
        assert_eq!(ivs.len(), 1);
        assert_abs_diff_eq!(ivs[0].lo, 2.1, epsilon = 1e-14);
        assert_abs_diff_eq!(ivs[0].hi, 2.3, epsilon = 1e-14);
        assert!(ivs[0].min_sampled > 0.0);
    }

    #[test]
    fn positivity_requires_separation_and_signs() {
        let tv = TildeV::new(&potential()).unwrap();
        // initial band too close to the forbidden strip: p₁ = 0.5 fails
        // p₁ > b/2 - a + ε = 0.95
        let near = BandFunction::new(
            BandProfile::cos_power_rotated(3, 0.25 * PI).unwrap(),
            0.5,
            0.9,
            0.0,
        )
        .unwrap();
        assert!(matches!(
            positivity_intervals(&tv, &near, 0.1, 1e-10),
            Err(Error::HypothesisViolation(_))
        ));
        // real profile: imaginary part vanishes identically → hypothesis
        // violation is reported, not silently ignored
        let real_packet =
            BandFunction::new(BandProfile::cos_power(3).unwrap(), 1.0, 2.0, 0.0).unwrap();
        assert!(matches!(
            positivity_intervals(&tv, &real_packet, 0.2, 1e-10),
            Err(Error::HypothesisViolation(_))
        ));
    }
}
