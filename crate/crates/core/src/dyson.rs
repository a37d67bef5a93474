//! First two terms of the perturbation series for the evolution with
//! potential: the free wave packet `S₁(t)u₀`, the first-interaction packet
//! `S₂(t)u₀` with its Fourier amplitude `W(t,p)`, the uniform amplitude
//! bounds `M₁/M₂`, and the space-time cone estimates.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;

use crate::bands::{BandFunction, NORM_INFLATION};
use crate::error::{Error, Result};
use crate::expansion::{tilde_c1, tilde_c2};
use crate::phase::ErdelyiConstants;
use crate::quad::{self, OscillatoryIntegral};
use crate::{cis, C64};

const SQRT_PI: f64 = 1.772_453_850_905_516_1;

/// Space-time cone `{(t,x) : t > 0, 2 p_lo ≤ x/t ≤ 2 p_hi}`.
#[derive(Debug, Clone, Copy)]
pub struct Cone {
    pub p_lo: f64,
    pub p_hi: f64,
}

impl Cone {
    pub fn contains(&self, t: f64, x: f64) -> bool {
        t > 0.0 && self.contains_xi(x / (2.0 * t))
    }

    /// Membership in terms of `ξ = x/(2t)`.
    pub fn contains_xi(&self, xi: f64) -> bool {
        xi >= self.p_lo && xi <= self.p_hi
    }
}

/// Space-time direction `{(t,x) : x/t = 2 p̄}`.
#[derive(Debug, Clone, Copy)]
pub struct Direction {
    pub p_bar: f64,
}

impl Direction {
    pub fn x_at(&self, t: f64) -> f64 {
        2.0 * self.p_bar * t
    }

    pub fn contains(&self, t: f64, x: f64) -> bool {
        t > 0.0 && x == 2.0 * self.p_bar * t
    }
}

/// `(S₁(t)u₀)(x) = (2π)⁻¹ ∫ û₀(p) e^{-itp² + ixp} dp`, evaluated after
/// factorizing the phase as `e^{ix²/4t} e^{-it(p - x/2t)²}`.
pub fn s1_eval(u0: &BandFunction, t: f64, x: f64, tol: f64) -> Result<C64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "free evolution needs t > 0, got {t}"
        )));
    }
    let (p1, p2) = u0.band();
    let amp = |p: f64| u0.fourier_eval(p) / (2.0 * PI);
    let oi = OscillatoryIntegral {
        amplitude: &amp,
        support_lo: p1,
        support_hi: p2,
        omega: t,
        p0: x / (2.0 * t),
    };
    let r = quad::integrate(&oi, tol)?.require_converged("free wave packet")?;
    Ok(cis(x * x / (4.0 * t)) * r.value)
}

/// Stationary-phase coefficient of the free packet:
/// `(2√π)⁻¹ e^{-iπ/4} e^{ix²/4t} û₀(x/2t) t^{-1/2}`.
pub fn s1_leading(u0: &BandFunction, t: f64, x: f64) -> C64 {
    let amp = u0.fourier_eval(x / (2.0 * t));
    0.5 / SQRT_PI * cis(-0.25 * PI) * cis(x * x / (4.0 * t)) * amp / t.sqrt()
}

/// `∫₀ᵗ e^{-iτq} dτ`, entire in `q`, evaluated in the numerically stable
/// form `t e^{-iθ} sinc(θ)` with `θ = tq/2`.
#[inline]
fn time_kernel_0(t: f64, q: f64) -> C64 {
    let theta = 0.5 * t * q;
    t * cis(-theta) * sinc(theta)
}

/// `∫₀ᵗ τ e^{-iτq} dτ = t² G(tq)` with
/// `G(θ) = i e^{-iθ}/θ - (1 - e^{-iθ})/θ²`, series near the origin.
#[inline]
fn time_kernel_1(t: f64, q: f64) -> C64 {
    let theta = t * q;
    let g = if theta.abs() > 0.5 {
        let e = cis(-theta);
        C64::new(0.0, 1.0) * e / theta - (C64::new(1.0, 0.0) - e) / (theta * theta)
    } else {
        // Σ_k (-iθ)^k / (k! (k+2))
        let z = C64::new(0.0, -theta);
        let mut term = C64::new(1.0, 0.0);
        let mut acc = C64::new(0.5, 0.0);
        for k in 1..=16 {
            term *= z / k as f64;
            acc += term / (k + 2) as f64;
        }
        acc
    };
    t * t * g
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() > 1e-5 {
        x.sin() / x
    } else {
        1.0 - x * x / 6.0
    }
}

/// Fourier amplitude of the first-interaction packet:
/// `W(t,p) = -i ∫₀ᵗ (V̂ ∗ e^{-iτ·²}û₀)(p) e^{iτp²} dτ`.
///
/// The default evaluator integrates the τ-variable in closed form (the
/// exact primitive of `e^{-iτ q(y,p)}`), leaving a single y-quadrature
/// over the interaction interval `I_p = [a,b] ∩ [p-p₂, p-p₁]` with panels
/// sized for the `e^{-it(y-p)²}`-type oscillation. The literal iterated
/// route (outer τ-panels, inner y-quadrature) is kept as
/// [`AmplitudeW::eval_time_quadrature`] and cross-checked in tests; it
/// costs O(t) inner quadratures and is only practical for moderate t.
#[derive(Debug, Clone)]
pub struct AmplitudeW {
    potential: BandFunction,
    initial: BandFunction,
    pub quad_tol: f64,
}

impl AmplitudeW {
    pub fn new(potential: BandFunction, initial: BandFunction, quad_tol: f64) -> Result<Self> {
        if !(quad_tol > 0.0) {
            return Err(Error::InvalidParameter("quad_tol must be positive".into()));
        }
        Ok(Self {
            potential,
            initial,
            quad_tol,
        })
    }

    pub fn potential(&self) -> &BandFunction {
        &self.potential
    }

    pub fn initial(&self) -> &BandFunction {
        &self.initial
    }

    /// Support of `W(t,·)`: the sum band `[p₁+a, p₂+b]`.
    pub fn support(&self) -> (f64, f64) {
        let (a, b) = self.potential.band();
        let (p1, p2) = self.initial.band();
        (p1 + a, p2 + b)
    }

    /// `I_p = [a,b] ∩ [p-p₂, p-p₁]`, the set where the convolution
    /// integrand is nonzero; `None` when empty.
    pub fn interaction_interval(&self, p: f64) -> Option<(f64, f64)> {
        let (a, b) = self.potential.band();
        let (p1, p2) = self.initial.band();
        let lo = a.max(p - p2);
        let hi = b.min(p - p1);
        (lo < hi).then_some((lo, hi))
    }

    /// `q(y,p) = (p-y)² - p²` (equivalently `y(y-2p)`).
    #[inline]
    pub fn q(y: f64, p: f64) -> f64 {
        (p - y) * (p - y) - p * p
    }

    /// `W(t, p)`; zero for `t = 0` and outside the sum band.
    pub fn eval(&self, t: f64, p: f64) -> Result<C64> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "amplitude time must satisfy t ≥ 0, got {t}"
            )));
        }
        if t == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let Some((lo, hi)) = self.interaction_interval(p) else {
            return Ok(C64::new(0.0, 0.0));
        };
        let f = |y: f64| {
            self.potential.fourier_eval(y)
                * self.initial.fourier_eval(p - y)
                * time_kernel_0(t, Self::q(y, p))
        };
        let panels = quad::osc_panels(t, p, lo, hi);
        let r = quad::adaptive(&f, &panels, self.quad_tol, false);
        if !r.converged {
            return Err(Error::QuadratureFailure {
                context: format!("W({t}, {p})"),
                value_re: r.value.re,
                value_im: r.value.im,
                estimate: r.abs_error_estimate,
                tol: self.quad_tol,
                panels: r.panels_used,
            });
        }
        Ok(C64::new(0.0, -1.0) * r.value)
    }

    /// `∂_p W(t, p)`: the differentiated integrand has one term with
    /// `û₀'` and one with the extra factor `2τ y`, whose τ-primitives are
    /// again closed forms.
    pub fn deriv_p(&self, t: f64, p: f64) -> Result<C64> {
        if self.initial.smoothness_order() < 1 {
            return Err(Error::InvalidParameter(
                "amplitude derivative needs a C¹ initial profile".into(),
            ));
        }
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "amplitude time must satisfy t ≥ 0, got {t}"
            )));
        }
        if t == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let Some((lo, hi)) = self.interaction_interval(p) else {
            return Ok(C64::new(0.0, 0.0));
        };
        let f = |y: f64| {
            let v = self.potential.fourier_eval(y);
            let u = self.initial.fourier_eval(p - y);
            let du = self.initial.fourier_deriv_unchecked(1, p - y);
            let q = Self::q(y, p);
            C64::new(0.0, -1.0) * v * du * time_kernel_0(t, q)
                + 2.0 * y * v * u * time_kernel_1(t, q)
        };
        let panels = quad::osc_panels(t, p, lo, hi);
        let r = quad::adaptive(&f, &panels, self.quad_tol, false);
        if !r.converged {
            return Err(Error::QuadratureFailure {
                context: format!("∂W({t}, {p})"),
                value_re: r.value.re,
                value_im: r.value.im,
                estimate: r.abs_error_estimate,
                tol: self.quad_tol,
                panels: r.panels_used,
            });
        }
        Ok(r.value)
    }

    /// Literal iterated evaluation: outer τ-quadrature over `[0,t]` split
    /// at τ = 1, oscillation-aware panels from the range of `q` on `I_p`;
    /// inner y-quadrature per τ node.
    pub fn eval_time_quadrature(&self, t: f64, p: f64) -> Result<C64> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "amplitude time must satisfy t ≥ 0, got {t}"
            )));
        }
        if t == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let Some((lo, hi)) = self.interaction_interval(p) else {
            return Ok(C64::new(0.0, 0.0));
        };
        let q_max = {
            let mut m = Self::q(lo, p).abs().max(Self::q(hi, p).abs());
            if lo < p && p < hi {
                m = m.max(p * p);
            }
            m.max(1e-12)
        };
        let inner_tol = self.quad_tol / (4.0 * t.max(1.0));
        let inner_fail = AtomicBool::new(false);
        let inner = |tau: f64| -> C64 {
            let g = |y: f64| {
                self.potential.fourier_eval(y)
                    * self.initial.fourier_eval(p - y)
                    * cis(-tau * (p - y) * (p - y))
            };
            let panels = quad::osc_panels(tau.max(1e-12), p, lo, hi);
            let r = quad::adaptive(&g, &panels, inner_tol, false);
            if !r.converged {
                inner_fail.store(true, Ordering::Relaxed);
            }
            r.value * cis(tau * p * p)
        };
        // panel rule: the integrand oscillates in τ no faster than q_max
        let panel_width = 32.0 / quad::NODES_PER_WAVELENGTH * 2.0 * PI / q_max;
        let mut init = Vec::new();
        let push_range = |a: f64, b: f64, init: &mut Vec<(f64, f64)>| {
            let n = (((b - a) / panel_width).ceil() as usize).max(1);
            for i in 0..n {
                init.push((
                    a + (b - a) * i as f64 / n as f64,
                    a + (b - a) * (i + 1) as f64 / n as f64,
                ));
            }
        };
        if t <= 1.0 {
            push_range(0.0, t, &mut init);
        } else {
            push_range(0.0, 1.0, &mut init);
            push_range(1.0, t, &mut init);
        }
        let r = quad::adaptive(&inner, &init, 0.5 * self.quad_tol, false);
        if inner_fail.load(Ordering::Relaxed) || !r.converged {
            return Err(Error::QuadratureFailure {
                context: format!("iterated W({t}, {p})"),
                value_re: r.value.re,
                value_im: r.value.im,
                estimate: r.abs_error_estimate,
                tol: self.quad_tol,
                panels: r.panels_used,
            });
        }
        Ok(C64::new(0.0, -1.0) * r.value)
    }
}

/// `(S₂(t)u₀)(x) = (2π)⁻¹ ∫ W(t,p) e^{-itp² + ixp} dp` over the sum band,
/// factorized like the free packet. Amplitude values along a panel are
/// evaluated in parallel (each is itself a quadrature).
pub fn s2_eval(w: &AmplitudeW, t: f64, x: f64, tol: f64) -> Result<C64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "first-interaction packet needs t > 0, got {t}"
        )));
    }
    let (lo, hi) = w.support();
    let failed = AtomicBool::new(false);
    let amp = |p: f64| match w.eval(t, p) {
        Ok(v) => v / (2.0 * PI),
        Err(_) => {
            failed.store(true, Ordering::Relaxed);
            C64::new(0.0, 0.0)
        }
    };
    let oi = OscillatoryIntegral {
        amplitude: &amp,
        support_lo: lo,
        support_hi: hi,
        omega: t,
        p0: x / (2.0 * t),
    };
    let r = quad::integrate_parallel_amplitude(&oi, tol)?;
    if failed.load(Ordering::Relaxed) {
        return Err(Error::QuadratureFailure {
            context: format!("amplitude W inside S₂ at t={t}, x={x}"),
            value_re: r.value.re,
            value_im: r.value.im,
            estimate: f64::NAN,
            tol: w.quad_tol,
            panels: r.panels_used,
        });
    }
    let r = r.require_converged("first-interaction packet")?;
    Ok(cis(x * x / (4.0 * t)) * r.value)
}

/// Stationary-phase coefficient of the first-interaction packet:
/// `(2√π)⁻¹ e^{-iπ/4} e^{ix²/4t} W(t, x/2t) t^{-1/2}`.
pub fn s2_leading(w: &AmplitudeW, t: f64, x: f64) -> Result<C64> {
    let amp = w.eval(t, x / (2.0 * t))?;
    Ok(0.5 / SQRT_PI * cis(-0.25 * PI) * cis(x * x / (4.0 * t)) * amp / t.sqrt())
}

/// Uniform amplitude bounds:
/// `‖W(t,·)‖_∞   ≤ M₁(a,b) ‖V̂‖_{W⁴,∞} ‖û₀‖_{W⁴,∞}` and
/// `‖∂ₚW(t,·)‖_∞ ≤ M₂(a,b) ‖V̂‖_{W⁴,∞} ‖û₀‖_{W⁵,∞}`.
pub fn m_constants(a: f64, b: f64, delta2: f64) -> Result<(f64, f64)> {
    if !(a < b) {
        return Err(Error::InvalidParameter(format!(
            "band [{a}, {b}] is degenerate"
        )));
    }
    if !(delta2 > 2.0 && delta2 < 2.5) {
        return Err(Error::InvalidParameter(format!(
            "delta2 must lie in (2, 5/2), got {delta2}"
        )));
    }
    let k4 = ErdelyiConstants::for_order(4)?.k_n;
    let width = b - a;
    let envelope = k4.powf(2.0 * delta2 - 4.0) * width.powf(5.0 - 2.0 * delta2);
    let abs_max = a.abs().max(b.abs());
    let m1 = width + 5.0 / ((5.0 - 2.0 * delta2) * (delta2 - 1.0)) * envelope;
    let m2 = m1
        + abs_max * width
        + (12.0 + 30.0 * abs_max) / ((15.0 - 6.0 * delta2) * (delta2 - 2.0)) * envelope;
    Ok((m1, m2))
}

/// Cone-estimate constants for the first-interaction packet:
/// `c₁ = C̃₁(δ₁, p₁+a, p₂+b)(M₁+M₂)` and `c₂ = C̃₂(δ₁, p₁+a, p₂+b) M₂`.
/// The amplitude bounds hide a δ₂ choice, which is taken explicitly here.
pub fn c_constants(
    delta1: f64,
    delta2: f64,
    a: f64,
    b: f64,
    p1: f64,
    p2: f64,
) -> Result<(f64, f64)> {
    let (m1, m2) = m_constants(a, b, delta2)?;
    let c1 = tilde_c1(delta1, p1 + a, p2 + b)? * (m1 + m2);
    let c2 = tilde_c2(delta1, p1 + a, p2 + b)? * m2;
    Ok((c1, c2))
}

/// One grid point of a cone check.
#[derive(Debug, Clone, Copy)]
pub struct ConeRow {
    pub t: f64,
    pub xi: f64,
    pub x: f64,
    pub amp: C64,
    pub leading: C64,
    pub bound: f64,
    pub in_cone: bool,
    pub pass: bool,
}

/// Per-time sup-norm check row.
#[derive(Debug, Clone, Copy)]
pub struct SupRow {
    pub t: f64,
    pub observed: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ConeReport {
    pub rows: Vec<ConeRow>,
    pub sup_rows: Vec<SupRow>,
}

impl ConeReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
            + self.sup_rows.iter().filter(|r| !r.pass).count()
    }
}

/// Check the free-packet cone estimates on a `(t, ξ)` grid: inside the
/// cone the one-term expansion with the `C̃₂ ‖û₀'‖ t^{-δ₁}` remainder,
/// outside the plain `t^{-δ₁}` envelope, plus the `t^{-1/2}` sup-norm row
/// for every `t ≥ 1`.
pub fn verify_s1_cone(
    u0: &BandFunction,
    t_grid: &[f64],
    xi_grid: &[f64],
    delta1: f64,
    tol: f64,
) -> Result<ConeReport> {
    let (p1, p2) = u0.band();
    let cone = Cone { p_lo: p1, p_hi: p2 };
    let du_sup = u0.deriv_sup(1)? * NORM_INFLATION;
    let u_sup = u0.deriv_sup(0)? * NORM_INFLATION;
    let ct2 = tilde_c2(delta1, p1, p2)?;
    let ct1 = tilde_c1(delta1, p1, p2)?;
    let points: Vec<(f64, f64)> = t_grid
        .iter()
        .flat_map(|&t| xi_grid.iter().map(move |&xi| (t, xi)))
        .collect();
    let rows: Vec<Result<ConeRow>> = points
        .par_iter()
        .map(|&(t, xi)| {
            let x = 2.0 * t * xi;
            let amp = s1_eval(u0, t, x, tol)?;
            let in_cone = cone.contains_xi(xi);
            let leading = if in_cone {
                s1_leading(u0, t, x)
            } else {
                C64::new(0.0, 0.0)
            };
            let bound = ct2 * du_sup * t.powf(-delta1);
            let lhs = (amp - leading).norm();
            Ok(ConeRow {
                t,
                xi,
                x,
                amp,
                leading,
                bound,
                in_cone,
                pass: lhs <= bound + 10.0 * tol,
            })
        })
        .collect();
    let rows: Vec<ConeRow> = rows.into_iter().collect::<Result<_>>()?;
    let mut sup_rows = Vec::new();
    for &t in t_grid.iter().filter(|&&t| t >= 1.0) {
        let observed = rows
            .iter()
            .filter(|r| r.t == t)
            .map(|r| r.amp.norm())
            .fold(0.0f64, f64::max);
        let bound = ct1 * (u_sup + du_sup) / t.sqrt();
        sup_rows.push(SupRow {
            t,
            observed,
            bound,
            pass: observed <= bound + 10.0 * tol,
        });
    }
    Ok(ConeReport { rows, sup_rows })
}

/// Check the first-interaction cone estimates on a `(t, ξ)` grid against
/// the shifted cone `[p₁+a, p₂+b]` with the `c₁/c₂` constants.
pub fn verify_s2_cone(
    w: &AmplitudeW,
    t_grid: &[f64],
    xi_grid: &[f64],
    delta1: f64,
    delta2: f64,
    tol: f64,
) -> Result<ConeReport> {
    let (p1, p2) = w.initial().band();
    if p1 <= 0.0 && p2 >= 0.0 {
        return Err(Error::HypothesisViolation(
            "first-interaction cone estimates need 0 outside the initial band".into(),
        ));
    }
    if w.initial().smoothness_order() < 5 || w.potential().smoothness_order() < 4 {
        return Err(Error::HypothesisViolation(
            "first-interaction cone estimates need a C⁵ initial and C⁴ potential profile"
                .into(),
        ));
    }
    let (a, b) = w.potential().band();
    let (lo, hi) = w.support();
    let cone = Cone { p_lo: lo, p_hi: hi };
    let (c1, c2) = c_constants(delta1, delta2, a, b, p1, p2)?;
    let norm_v = w.potential().wkinf_norm(4)? * NORM_INFLATION;
    let norm_u = w.initial().wkinf_norm(5)? * NORM_INFLATION;
    let points: Vec<(f64, f64)> = t_grid
        .iter()
        .flat_map(|&t| xi_grid.iter().map(move |&xi| (t, xi)))
        .collect();
    let rows: Vec<Result<ConeRow>> = points
        .par_iter()
        .map(|&(t, xi)| {
            let x = 2.0 * t * xi;
            let amp = s2_eval(w, t, x, tol)?;
            let in_cone = cone.contains_xi(xi);
            let leading = if in_cone {
                s2_leading(w, t, x)?
            } else {
                C64::new(0.0, 0.0)
            };
            let bound = c2 * norm_v * norm_u * t.powf(-delta1);
            let lhs = (amp - leading).norm();
            Ok(ConeRow {
                t,
                xi,
                x,
                amp,
                leading,
                bound,
                in_cone,
                pass: lhs <= bound + 10.0 * tol,
            })
        })
        .collect();
    let rows: Vec<ConeRow> = rows.into_iter().collect::<Result<_>>()?;
    let mut sup_rows = Vec::new();
    for &t in t_grid.iter().filter(|&&t| t >= 1.0) {
        let observed = rows
            .iter()
            .filter(|r| r.t == t)
            .map(|r| r.amp.norm())
            .fold(0.0f64, f64::max);
        let bound = c1 * norm_v * norm_u / t.sqrt();
        sup_rows.push(SupRow {
            t,
            observed,
            bound,
            pass: observed <= bound + 10.0 * tol,
        });
    }
    Ok(ConeReport { rows, sup_rows })
}
