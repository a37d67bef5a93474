//! Adaptive Gauss–Legendre quadrature for quadratic-phase oscillatory
//! integrals `∫ U(p) e^{-iω(p-p₀)²} dp`.
//!
//! Oscillation is handled by panel density rather than Filon/Levin
//! machinery: initial panels are sized so that every local oscillation
//! wavelength receives at least [`NODES_PER_WAVELENGTH`] quadrature nodes,
//! then panels are bisected largest-error-first until the embedded
//! estimate (order 32 vs order 16) falls below the requested tolerance.
//! Panels of a single integral are processed sequentially so the error
//! accounting, and therefore the output, is deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::{cis, C64};

/// High-order panel rule.
const GL_HIGH: usize = 32;
/// Embedded low-order rule used for the error estimate.
const GL_LOW: usize = 16;
/// Hard refinement budget.
pub const MAX_PANELS: usize = 1 << 20;
/// Minimum node density per local oscillation wavelength.
pub const NODES_PER_WAVELENGTH: f64 = 10.0;
/// Frequencies far past this lose accuracy to phase rounding; refused.
pub const MAX_OMEGA: f64 = 1.0e6;

struct GlRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss–Legendre nodes/weights on [-1, 1] via Newton iteration on the
/// Legendre polynomial (standard three-term recurrence).
fn compute_gl(n: usize) -> GlRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // P_n(x) and P_n'(x)
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
        // recompute derivative at the converged node for the weight
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
    GlRule { nodes, weights }
}

fn gl_high() -> &'static GlRule {
    static RULE: OnceLock<GlRule> = OnceLock::new();
    RULE.get_or_init(|| compute_gl(GL_HIGH))
}

fn gl_low() -> &'static GlRule {
    static RULE: OnceLock<GlRule> = OnceLock::new();
    RULE.get_or_init(|| compute_gl(GL_LOW))
}

/// Value and error bookkeeping of one oscillatory quadrature.
#[derive(Debug, Clone, Copy)]
pub struct PhaseIntegralResult {
    pub value: C64,
    pub abs_error_estimate: f64,
    pub panels_used: usize,
    /// False when the refinement budget ran out before the estimate met
    /// the tolerance; the partial value is still reported.
    pub converged: bool,
}

impl PhaseIntegralResult {
    /// Promote a budget-exhaustion flag into an error, keeping the partial
    /// value in the message.
    pub fn require_converged(self, context: &str) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::QuadratureFailure {
                context: context.to_string(),
                value_re: self.value.re,
                value_im: self.value.im,
                estimate: self.abs_error_estimate,
                tol: f64::NAN,
                panels: self.panels_used,
            })
        }
    }
}

/// `∫_{support_lo}^{support_hi} amplitude(p) e^{-iω(p-p₀)²} dp`.
pub struct OscillatoryIntegral<'a> {
    pub amplitude: &'a (dyn Fn(f64) -> C64 + Sync),
    pub support_lo: f64,
    pub support_hi: f64,
    pub omega: f64,
    pub p0: f64,
}

#[derive(Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: C64,
    err: f64,
}

struct HeapEntry {
    err_bits: u64,
    idx: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.err_bits == other.err_bits && self.idx == other.idx
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on error; ties broken by insertion order for determinism
        self.err_bits
            .cmp(&other.err_bits)
            .then(other.idx.cmp(&self.idx))
    }
}

fn eval_panel<F: Fn(f64) -> C64 + Sync + ?Sized>(
    f: &F,
    lo: f64,
    hi: f64,
    parallel: bool,
) -> (C64, f64) {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let hi_rule = gl_high();
    let lo_rule = gl_low();
    let eval_rule = |rule: &GlRule| -> C64 {
        if parallel {
            let vals: Vec<C64> = rule
                .nodes
                .par_iter()
                .map(|&x| f(mid + half * x))
                .collect();
            let mut acc = C64::new(0.0, 0.0);
            for (v, w) in vals.iter().zip(rule.weights.iter()) {
                acc += v * *w;
            }
            acc * half
        } else {
            let mut acc = C64::new(0.0, 0.0);
            for (&x, &w) in rule.nodes.iter().zip(rule.weights.iter()) {
                acc += f(mid + half * x) * w;
            }
            acc * half
        }
    };
    let high = eval_rule(hi_rule);
    let low = eval_rule(lo_rule);
    (high, (high - low).norm())
}

/// Initial panels over `[lo, hi]` such that a 32-node rule puts at least
/// [`NODES_PER_WAVELENGTH`] nodes on every local wavelength of the phase
/// `ω (p - p₀)²`. Capped by the refinement budget.
pub(crate) fn osc_panels(omega: f64, p0: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut stack = vec![(lo, hi)];
    let max_width = |l: f64, h: f64| -> f64 {
        let dist = (l - p0).abs().max((h - p0).abs());
        if dist <= 0.0 {
            return h - l;
        }
        // width * (2 ω dist) / (2π) wavelengths per panel; 32 nodes spread
        // over them must leave ≥ NODES_PER_WAVELENGTH per wavelength.
        GL_HIGH as f64 / NODES_PER_WAVELENGTH * std::f64::consts::PI / (omega * dist)
    };
    while let Some((l, h)) = stack.pop() {
        if h - l <= max_width(l, h) || out.len() + stack.len() + 2 > MAX_PANELS {
            out.push((l, h));
        } else {
            let m = 0.5 * (l + h);
            stack.push((m, h));
            stack.push((l, m));
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Adaptive engine: refine `init` panels largest-error-first until the
/// summed embedded estimate is below `tol` or the budget runs out.
/// `parallel` evaluates the integrand at a panel's nodes concurrently
/// (values are identical either way; used when the amplitude itself is an
/// inner quadrature).
pub(crate) fn adaptive<F: Fn(f64) -> C64 + Sync + ?Sized>(
    f: &F,
    init: &[(f64, f64)],
    tol: f64,
    parallel: bool,
) -> PhaseIntegralResult {
    let mut panels: Vec<Panel> = Vec::with_capacity(init.len().max(8));
    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    for &(lo, hi) in init {
        let (value, err) = eval_panel(f, lo, hi, parallel);
        total_err += err;
        heap.push(HeapEntry {
            err_bits: err.to_bits(),
            idx: panels.len(),
        });
        panels.push(Panel { lo, hi, value, err });
    }
    while total_err > tol && panels.len() + 1 < MAX_PANELS {
        let Some(top) = heap.pop() else { break };
        let p = panels[top.idx];
        if p.err.to_bits() != top.err_bits {
            continue; // stale entry
        }
        if p.hi - p.lo < 1e-14 * (p.lo.abs() + p.hi.abs() + 1.0) {
            break; // cannot subdivide further in f64
        }
        let m = 0.5 * (p.lo + p.hi);
        let (v1, e1) = eval_panel(f, p.lo, m, parallel);
        let (v2, e2) = eval_panel(f, m, p.hi, parallel);
        total_err += e1 + e2 - p.err;
        panels[top.idx] = Panel {
            lo: p.lo,
            hi: m,
            value: v1,
            err: e1,
        };
        heap.push(HeapEntry {
            err_bits: e1.to_bits(),
            idx: top.idx,
        });
        heap.push(HeapEntry {
            err_bits: e2.to_bits(),
            idx: panels.len(),
        });
        panels.push(Panel {
            lo: m,
            hi: p.hi,
            value: v2,
            err: e2,
        });
    }
    let mut value = C64::new(0.0, 0.0);
    let mut err = 0.0;
    for p in &panels {
        value += p.value;
        err += p.err;
    }
    PhaseIntegralResult {
        value,
        abs_error_estimate: err,
        panels_used: panels.len(),
        converged: err <= tol,
    }
}

/// Evaluate an oscillatory integral to absolute tolerance `tol`.
pub fn integrate(oi: &OscillatoryIntegral, tol: f64) -> Result<PhaseIntegralResult> {
    integrate_impl(oi, tol, false)
}

/// As [`integrate`], but the amplitude at a panel's nodes is evaluated in
/// parallel. Intended for amplitudes that are themselves quadratures.
pub fn integrate_parallel_amplitude(
    oi: &OscillatoryIntegral,
    tol: f64,
) -> Result<PhaseIntegralResult> {
    integrate_impl(oi, tol, true)
}

fn integrate_impl(
    oi: &OscillatoryIntegral,
    tol: f64,
    parallel: bool,
) -> Result<PhaseIntegralResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "quadrature tolerance must be positive, got {tol}"
        )));
    }
    if !(oi.support_lo < oi.support_hi) {
        return Err(Error::InvalidParameter(format!(
            "integration support [{}, {}] is empty",
            oi.support_lo, oi.support_hi
        )));
    }
    if !(oi.omega > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "oscillation frequency must be positive, got {}",
            oi.omega
        )));
    }
    if oi.omega > MAX_OMEGA {
        return Err(Error::Unsupported(format!(
            "oscillation frequency {:.3e} exceeds the supported maximum {:.1e}; \
             panel quadrature would silently lose accuracy",
            oi.omega, MAX_OMEGA
        )));
    }
    let amp = oi.amplitude;
    let omega = oi.omega;
    let p0 = oi.p0;
    let f = move |p: f64| {
        let d = p - p0;
        amp(p) * cis(-omega * d * d)
    };
    let init = osc_panels(omega, p0, oi.support_lo, oi.support_hi);
    Ok(adaptive(&f, &init, tol, parallel))
}

/// Adaptive quadrature of a complex integrand over `[t_lo, t_hi]` with the
/// same panel/error contract as [`integrate`]. The caller is responsible
/// for supplying any oscillation-aware initial split via `integrate`-style
/// wrappers; this entry point starts from a single panel.
pub fn integrate_time_kernel(
    f: &(dyn Fn(f64) -> C64 + Sync),
    t_lo: f64,
    t_hi: f64,
    tol: f64,
) -> Result<PhaseIntegralResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "quadrature tolerance must be positive, got {tol}"
        )));
    }
    if t_lo > t_hi {
        return Err(Error::InvalidParameter(format!(
            "time interval [{t_lo}, {t_hi}] is reversed"
        )));
    }
    if t_lo == t_hi {
        return Ok(PhaseIntegralResult {
            value: C64::new(0.0, 0.0),
            abs_error_estimate: 0.0,
            panels_used: 0,
            converged: true,
        });
    }
    Ok(adaptive(f, &[(t_lo, t_hi)], tol, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gl_rules_are_sane() {
        for rule in [gl_low(), gl_high()] {
            let sum: f64 = rule.weights.iter().sum();
            assert_abs_diff_eq!(sum, 2.0, epsilon = 1e-14);
            // exact for x^4
            let quartic: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(4))
                .sum();
            assert_abs_diff_eq!(quartic, 0.4, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_amplitude_integrates_to_zero() {
        let amp = |_: f64| C64::new(0.0, 0.0);
        let oi = OscillatoryIntegral {
            amplitude: &amp,
            support_lo: -1.0,
            support_hi: 1.0,
            omega: 100.0,
            p0: 0.3,
        };
        let r = integrate(&oi, 1e-12).unwrap();
        assert_eq!(r.value, C64::new(0.0, 0.0));
        assert!(r.converged);
    }

    #[test]
    fn constant_over_time_interval() {
        let f = |_: f64| C64::new(1.0, 0.0);
        let r = integrate_time_kernel(&f, 0.0, 7.25, 1e-12).unwrap();
        assert_abs_diff_eq!(r.value.re, 7.25, epsilon = 1e-12);
        assert_abs_diff_eq!(r.value.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn complex_exponential_closed_form() {
        let c = 3.7;
        let t = 2.0;
        let f = move |tau: f64| crate::cis(c * tau);
        let r = integrate_time_kernel(&f, 0.0, t, 1e-12).unwrap();
        let expected = (crate::cis(c * t) - C64::new(1.0, 0.0)) / C64::new(0.0, c);
        assert!((r.value - expected).norm() < 1e-11);
    }

    #[test]
    fn fresnel_full_line_against_closed_form() {
        // ∫_{-L}^{L} e^{-iω p²} dp → √(π/ω) e^{-iπ/4} as L → ∞; at finite L
        // compare against the same integral computed by fine fixed-step
        // Simpson as an independent check.
        let omega = 50.0;
        let l = 6.0;
        let amp = |_: f64| C64::new(1.0, 0.0);
        let oi = OscillatoryIntegral {
            amplitude: &amp,
            support_lo: -l,
            support_hi: l,
            omega,
            p0: 0.0,
        };
        let r = integrate(&oi, 1e-11).unwrap();
        assert!(r.converged);
        let n = 2_000_001usize;
        let h = 2.0 * l / (n - 1) as f64;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let p = -l + i as f64 * h;
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += crate::cis(-omega * p * p) * w;
        }
        acc *= h / 3.0;
        assert!((r.value - acc).norm() < 1e-9, "diff {}", (r.value - acc).norm());
    }

    #[test]
    fn symmetry_about_stationary_point() {
        // real even amplitude about p0: value equals twice the half integral
        let p0 = 1.0;
        let amp = move |p: f64| C64::new((-(p - p0) * (p - p0)).exp(), 0.0);
        let oi = OscillatoryIntegral {
            amplitude: &amp,
            support_lo: p0 - 2.0,
            support_hi: p0 + 2.0,
            omega: 40.0,
            p0,
        };
        let whole = integrate(&oi, 1e-12).unwrap().value;
        let right = OscillatoryIntegral {
            amplitude: &amp,
            support_lo: p0,
            support_hi: p0 + 2.0,
            omega: 40.0,
            p0,
        };
        let half = integrate(&right, 1e-12).unwrap().value;
        assert!((whole - 2.0 * half).norm() < 5e-12);
    }

    #[test]
    fn linearity_within_two_tolerances() {
        let tol = 1e-10;
        let omega = 300.0;
        let p0 = 0.2;
        let u1 = |p: f64| C64::new((1.0 - p * p).max(0.0), 0.0);
        let u2 = |p: f64| C64::new(0.0, (1.0 - p.abs()).max(0.0));
        let alpha = C64::new(0.7, -1.3);
        let combo = move |p: f64| alpha * u1(p) + u2(p);
        let run = |amp: &(dyn Fn(f64) -> C64 + Sync)| {
            integrate(
                &OscillatoryIntegral {
                    amplitude: amp,
                    support_lo: -1.0,
                    support_hi: 1.0,
                    omega,
                    p0,
                },
                tol,
            )
            .unwrap()
            .value
        };
        let lhs = run(&combo);
        let rhs = alpha * run(&u1) + run(&u2);
        assert!((lhs - rhs).norm() <= 2.0 * tol + 1e-12);
    }

    #[test]
    fn translation_covariance_within_two_tolerances() {
        let tol = 1e-10;
        let omega = 200.0;
        let shift = 2.5;
        let base = |p: f64| C64::new((1.0 - p * p).max(0.0).powi(2), 0.3 * p);
        let shifted = move |p: f64| base(p - shift);
        let v0 = integrate(
            &OscillatoryIntegral {
                amplitude: &base,
                support_lo: -1.0,
                support_hi: 1.0,
                omega,
                p0: 0.4,
            },
            tol,
        )
        .unwrap()
        .value;
        let v1 = integrate(
            &OscillatoryIntegral {
                amplitude: &shifted,
                support_lo: -1.0 + shift,
                support_hi: 1.0 + shift,
                omega,
                p0: 0.4 + shift,
            },
            tol,
        )
        .unwrap()
        .value;
        assert!((v0 - v1).norm() <= 2.0 * tol + 1e-12);
    }

    #[test]
    fn refinement_consistency() {
        let omega = 1000.0;
        let amp = |p: f64| C64::new((1.0 - p * p).max(0.0).powi(3), 0.0);
        let mk = |tol: f64| {
            integrate(
                &OscillatoryIntegral {
                    amplitude: &amp,
                    support_lo: -1.0,
                    support_hi: 1.0,
                    omega,
                    p0: 0.1,
                },
                tol,
            )
            .unwrap()
        };
        let coarse = mk(1e-8);
        let fine = mk(5e-9);
        assert!((coarse.value - fine.value).norm() <= coarse.abs_error_estimate + 1e-12);
    }

    #[test]
    fn refuses_extreme_frequencies() {
        let amp = |_: f64| C64::new(1.0, 0.0);
        let oi = OscillatoryIntegral {
            amplitude: &amp,
            support_lo: 0.0,
            support_hi: 1.0,
            omega: 5.0e6,
            p0: 0.0,
        };
        assert!(matches!(integrate(&oi, 1e-9), Err(Error::Unsupported(_))));
    }

    #[test]
    fn rejects_bad_inputs() {
        let amp = |_: f64| C64::new(1.0, 0.0);
        let oi = OscillatoryIntegral {
            amplitude: &amp,
            support_lo: 1.0,
            support_hi: 0.0,
            omega: 1.0,
            p0: 0.0,
        };
        assert!(matches!(
            integrate(&oi, 1e-9),
            Err(Error::InvalidParameter(_))
        ));
        let f = |_: f64| C64::new(1.0, 0.0);
        assert!(integrate_time_kernel(&f, 1.0, 0.0, 1e-9).is_err());
        assert!(integrate_time_kernel(&f, 0.0, 1.0, -1.0).is_err());
    }
}
