//! Iterated primitives `φₙ(s, ω)` of `s ↦ e^{-iωs²}` realized as contour
//! integrals along the rotated half-line `Λ(s) = {s + t e^{-iπ/4}}`, their
//! closed-form values at the origin, and the envelope constants `Lₙ(δ)`
//! controlling `|φₙ(s,ω)| ≤ Lₙ(δ) s^{n-2δ} ω^{-δ}`.
//!
//! On the contour the integrand gains the factor `e^{-ωt² - √2 ω s t}`, so
//! the quadrature is a plain truncated Gauss–Legendre rule on a Gaussian
//! tail — the oscillatory kernel never has to be resolved on the real
//! line.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::{cis, C64};

const SQRT_PI: f64 = 1.772_453_850_905_516_1;
/// Highest primitive order used anywhere (four integrations by parts).
pub const MAX_ORDER: usize = 4;

/// `Γ(n/2)` for n = 1..=4 (half-integer closed forms only).
fn gamma_half(n: usize) -> f64 {
    match n {
        1 => SQRT_PI,
        2 => 1.0,
        3 => 0.5 * SQRT_PI,
        4 => 1.0,
        _ => unreachable!("order checked before"),
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::InvalidParameter(format!(
            "primitive order must lie in 1..={MAX_ORDER}, got {n}"
        )));
    }
    Ok(())
}

/// Closed form `φₙ(0, ω) = (-1)ⁿ/(n-1)! · ½ Γ(n/2) e^{-iπn/4} ω^{-n/2}`.
pub fn phi_n_at_zero(n: usize, omega: f64) -> Result<C64> {
    check_order(n)?;
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "omega must be positive, got {omega}"
        )));
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let magnitude =
        sign / factorial(n - 1) * 0.5 * gamma_half(n) * omega.powf(-0.5 * n as f64);
    Ok(magnitude * cis(-0.25 * PI * n as f64))
}

/// Contour evaluator for `φₙ(s, ω)`, `s ≥ 0`, `ω > 0`.
#[derive(Debug, Clone, Copy)]
pub struct PhiEvaluator {
    pub n: usize,
    pub quad_tol: f64,
}

impl PhiEvaluator {
    pub fn new(n: usize, quad_tol: f64) -> Result<Self> {
        check_order(n)?;
        if !(quad_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "quad_tol must be positive".into(),
            ));
        }
        Ok(Self { n, quad_tol })
    }

    /// Quadrature value of `φₙ(s, ω)` with `|error| ≤ quad_tol`.
    ///
    /// Parameterizes `z = s + t e^{-iπ/4}`; the integrand becomes
    /// `t^{n-1} e^{-ωt² - √2ωst}` times a unimodular phase, truncated at
    /// `T` with `e^{-ωT²} T^{n-1} < quad_tol` and integrated by node
    /// doubling until two successive estimates agree.
    pub fn eval(&self, s: f64, omega: f64) -> Result<C64> {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "contour start must satisfy s ≥ 0, got {s}"
            )));
        }
        if !(omega > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega must be positive, got {omega}"
            )));
        }
        let n = self.n;
        let truncation = ((1.0 / self.quad_tol).ln().max(1.0) / omega).sqrt() + n as f64;
        let decay = |t: f64| {
            (-omega * t * t - std::f64::consts::SQRT_2 * omega * s * t).exp()
                * t.powi(n as i64 as i32 - 1)
        };
        let phase = |t: f64| -omega * (s * s + std::f64::consts::SQRT_2 * s * t);
        let integrand = |t: f64| decay(t) * cis(phase(t));

        let mut nodes = 64usize;
        let mut prev = gl_on(&integrand, 0.0, truncation, nodes);
        let value = loop {
            nodes *= 2;
            let next = gl_on(&integrand, 0.0, truncation, nodes);
            if (next - prev).norm() < self.quad_tol {
                break next;
            }
            if nodes >= (1 << 22) {
                return Err(Error::QuadratureFailure {
                    context: format!("phi_{n}({s}, {omega})"),
                    value_re: next.re,
                    value_im: next.im,
                    estimate: (next - prev).norm(),
                    tol: self.quad_tol,
                    panels: nodes / 64,
                });
            }
            prev = next;
        };
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign / factorial(n - 1) * cis(-0.25 * PI * n as f64) * value)
    }
}

/// Convenience wrapper around [`PhiEvaluator::eval`].
pub fn phi_n(n: usize, s: f64, omega: f64, quad_tol: f64) -> Result<C64> {
    PhiEvaluator::new(n, quad_tol)?.eval(s, omega)
}

/// Quadratic-equation data behind `Lₙ(δ) = aₙ Kₙ^{2δ-n}`.
#[derive(Debug, Clone, Copy)]
pub struct ErdelyiConstants {
    pub n: usize,
    pub a_n: f64,
    pub b_n: f64,
    pub c_n: f64,
    /// Positive root of `aₙ X² - bₙ X - cₙ = 0`.
    pub k_n: f64,
}

impl ErdelyiConstants {
    pub fn for_order(n: usize) -> Result<Self> {
        check_order(n)?;
        let (a_n, b_n, c_n) = if n == 1 {
            (0.5 * SQRT_PI, 0.5, 0.25 * SQRT_PI)
        } else {
            (
                0.5 * gamma_half(n) / factorial(n - 1),
                0.25 * gamma_half(n - 1) / factorial(n - 2),
                0.25 * gamma_half(n) / factorial(n - 1),
            )
        };
        let k_n = (b_n + (b_n * b_n + 4.0 * a_n * c_n).sqrt()) / (2.0 * a_n);
        Ok(Self { n, a_n, b_n, c_n, k_n })
    }

    /// `Lₙ(δ) = aₙ Kₙ^{2δ-n}`, defined for `δ` strictly inside
    /// `(n/2, (n+1)/2)`; endpoint values are rejected rather than guessed.
    pub fn l_n(&self, delta: f64) -> Result<f64> {
        let lo = 0.5 * self.n as f64;
        let hi = 0.5 * (self.n as f64 + 1.0);
        if !(delta > lo && delta < hi) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in the open interval ({lo}, {hi}), got {delta}"
            )));
        }
        Ok(self.a_n * self.k_n.powf(2.0 * delta - self.n as f64))
    }
}

/// `Lₙ(δ)` for `δ ∈ (n/2, (n+1)/2)`.
pub fn l_n(n: usize, delta: f64) -> Result<f64> {
    ErdelyiConstants::for_order(n)?.l_n(delta)
}

/// One envelope check `|φₙ(s,ω)| ≤ Lₙ(δ) s^{n-2δ} ω^{-δ}`.
#[derive(Debug, Clone, Copy)]
pub struct PhiBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn check_phi_bound(
    n: usize,
    delta: f64,
    s: f64,
    omega: f64,
    quad_tol: f64,
) -> Result<PhiBoundCheck> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "envelope check needs s > 0, got {s}"
        )));
    }
    let lhs = phi_n(n, s, omega, quad_tol)?.norm();
    let rhs = l_n(n, delta)? * s.powf(n as f64 - 2.0 * delta) * omega.powf(-delta);
    Ok(PhiBoundCheck {
        lhs,
        rhs,
        pass: lhs <= rhs + quad_tol,
    })
}

fn gl_on<F: Fn(f64) -> C64>(f: &F, lo: f64, hi: f64, n: usize) -> C64 {
    // reuse the band module's panelized fixed rule shape: 64-node panels
    let panels = (n + 63) / 64;
    let step = (hi - lo) / panels as f64;
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..panels {
        let a = lo + k as f64 * step;
        acc += gl64_panel(f, a, a + step);
    }
    acc
}

fn gl64_panel<F: Fn(f64) -> C64>(f: &F, lo: f64, hi: f64) -> C64 {
    let rule = crate::phase::gl64_rule();
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut acc = C64::new(0.0, 0.0);
    for (&x, &w) in rule.0.iter().zip(rule.1.iter()) {
        acc += f(mid + half * x) * (w * half);
    }
    acc
}

pub(crate) fn gl64_rule() -> &'static (Vec<f64>, Vec<f64>) {
    use std::sync::OnceLock;
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = 64usize;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-10;

    #[test]
    fn closed_forms_at_zero() {
        // φ₁(0,1) = -(√π/2) e^{-iπ/4}
        let v = phi_n_at_zero(1, 1.0).unwrap();
        assert_abs_diff_eq!(v.re, -0.626_657_068_657_750_1, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.626_657_068_657_750_1, epsilon = 1e-12);
        // φ₂(0,1) = -i/2
        let v = phi_n_at_zero(2, 1.0).unwrap();
        assert_abs_diff_eq!(v.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, -0.5, epsilon = 1e-15);
        // φ₄(0,1) = -1/12
        let v = phi_n_at_zero(4, 1.0).unwrap();
        assert_abs_diff_eq!(v.re, -1.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 2e-16);
    }

    #[test]
    fn omega_homogeneity() {
        let a = phi_n_at_zero(1, 4.0).unwrap();
        let b = phi_n_at_zero(1, 1.0).unwrap();
        assert!((a - b / 2.0).norm() < 1e-15);
    }

    #[test]
    fn quadrature_matches_closed_form_at_origin() {
        for n in 1..=4 {
            for omega in [0.5, 1.0, 10.0, 100.0] {
                let q = phi_n(n, 0.0, omega, TOL).unwrap();
                let c = phi_n_at_zero(n, omega).unwrap();
                assert!(
                    (q - c).norm() <= 10.0 * TOL,
                    "n={n} ω={omega}: {} vs {}",
                    q,
                    c
                );
            }
        }
    }

    #[test]
    fn primitive_property_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-4;
        for _ in 0..40 {
            let n = rng.gen_range(1..=4usize);
            let s = rng.gen_range(h..3.0);
            let omega = rng.gen_range(0.5..50.0);
            let up = phi_n(n, s + h, omega, 1e-12).unwrap();
            let dn = phi_n(n, s - h, omega, 1e-12).unwrap();
            let diff = (up - dn) / (2.0 * h);
            let expected = if n == 1 {
                cis(-omega * s * s)
            } else {
                phi_n(n - 1, s, omega, 1e-12).unwrap()
            };
            let denom = expected.norm().max(1e-6);
            assert!(
                (diff - expected).norm() / denom < 1e-5,
                "n={n} s={s} ω={omega}: {diff} vs {expected}"
            );
        }
    }

    #[test]
    fn k1_value_and_quadratic_root() {
        let e = ErdelyiConstants::for_order(1).unwrap();
        assert_abs_diff_eq!(e.k_n, 1.043_395, epsilon = 1e-6);
        // K₁ coincides with 1/(2√π) + √(1/(4π) + 1/2)
        let alt = 0.5 / SQRT_PI + (0.25 / PI + 0.5).sqrt();
        assert_abs_diff_eq!(e.k_n, alt, epsilon = 1e-12);
        for n in 1..=4 {
            let e = ErdelyiConstants::for_order(n).unwrap();
            let residual = e.a_n * e.k_n * e.k_n - e.b_n * e.k_n - e.c_n;
            assert_abs_diff_eq!(residual, 0.0, epsilon = 1e-14);
            assert!(e.k_n > 0.0);
        }
    }

    #[test]
    fn l1_limit_toward_left_endpoint() {
        // exponent 2δ-1 → 0, so L₁ → a₁ = √π/2
        let l = l_n(1, 0.5 + 1e-9).unwrap();
        assert_abs_diff_eq!(l, 0.5 * SQRT_PI, epsilon = 1e-8);
    }

    #[test]
    fn delta_endpoints_rejected() {
        assert!(l_n(1, 0.5).is_err());
        assert!(l_n(1, 1.0).is_err());
        assert!(l_n(4, 2.0).is_err());
        assert!(l_n(4, 2.5).is_err());
        assert!(l_n(2, 1.3).unwrap() > 0.0);
    }

    #[test]
    fn envelope_bound_random_suite() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let n = rng.gen_range(1..=4usize);
            let lo = 0.5 * n as f64;
            let delta = lo + rng.gen_range(0.02..0.48);
            let s = rng.gen_range(1e-3..5.0f64);
            let omega = 10f64.powf(rng.gen_range(-0.3..4.0));
            let check = check_phi_bound(n, delta, s, omega, 1e-10).unwrap();
            assert!(
                check.lhs <= check.rhs + 1e-9,
                "n={n} δ={delta} s={s} ω={omega}: lhs {} rhs {}",
                check.lhs,
                check.rhs
            );
        }
    }

    #[test]
    fn fresnel_tail_vanishes_for_large_s() {
        // n=1, δ=0.75: rhs ~ s^{-1/2} and the measured lhs follows it down
        let a = check_phi_bound(1, 0.75, 10.0, 1.0, 1e-11).unwrap();
        let b = check_phi_bound(1, 0.75, 100.0, 1.0, 1e-11).unwrap();
        assert!(b.lhs < a.lhs);
        assert!(b.rhs < a.rhs);
        assert!(a.pass && b.pass);
    }

    #[test]
    fn omega_scaling_of_lhs_uniform() {
        // lhs(ω) ω^δ stays bounded over ω ∈ [1, 1e4] at fixed s
        let s = 0.7;
        let delta = 0.75;
        let bound = l_n(1, delta).unwrap() * s.powf(1.0 - 2.0 * delta);
        for omega in [1.0, 10.0, 100.0, 1e3, 1e4] {
            let lhs = phi_n(1, s, omega, 1e-11).unwrap().norm();
            assert!(lhs * omega.powf(delta) <= bound + 1e-8);
        }
    }

    #[test]
    fn power_mean_inequality_guard() {
        // x^μ - y^μ ≤ (x-y)^μ for x ≥ y ≥ 0, μ ∈ (0,1]
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let y = rng.gen_range(0.0..10.0f64);
            let x = y + rng.gen_range(0.0..10.0f64);
            let mu = rng.gen_range(1e-6..=1.0f64);
            assert!(x.powf(mu) - y.powf(mu) <= (x - y).powf(mu) + 1e-12);
        }
    }

    #[test]
    fn invalid_orders_rejected() {
        assert!(phi_n_at_zero(0, 1.0).is_err());
        assert!(phi_n_at_zero(5, 1.0).is_err());
        assert!(phi_n(1, -0.1, 1.0, 1e-10).is_err());
        assert!(phi_n(1, 0.0, -1.0, 1e-10).is_err());
    }
}
