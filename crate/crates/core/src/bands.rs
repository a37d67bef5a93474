//! Band-limited functions built from compactly supported spectral
//! profiles.
//!
//! A [`BandProfile`] is a smooth template on `[-1, 1]`; a [`BandFunction`]
//! is the function `f` whose Fourier transform is the profile shifted and
//! scaled onto a band `[a, b]` and modulated by a spatial center:
//! `f̂(p) = φ((2p - (a+b))/(b-a)) e^{-i x₀ p}`. Profiles are stored as
//! finite trigonometric sums so derivatives up to the smoothness order are
//! exact closed forms, never finite differences.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use crate::error::{Error, Result};
use crate::{cis, quad, C64};

/// Grid resolution for sup-norm estimates over a band.
pub const SUP_NORM_GRID: usize = 4096;
/// Sup norms read off a finite grid slightly underestimate; bound checks
/// inflate them by this factor so grid slack never produces false failures.
pub const NORM_INFLATION: f64 = 1.01;

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Smooth compactly supported template on `[-1, 1]`, stored as
/// `Σ_j A_j cos(jπs) + B_j sin(jπs)` gated to the support.
#[derive(Debug, Clone)]
pub struct BandProfile {
    cos_coeffs: Vec<C64>,
    sin_coeffs: Vec<C64>,
    smoothness: usize,
}

impl BandProfile {
    /// `cos^{2m}(πs/2)`: real bump, `C^{2m-1}` across the support edge.
    pub fn cos_power(m: usize) -> Result<Self> {
        if m == 0 || m > 8 {
            return Err(Error::InvalidParameter(format!(
                "bump exponent m must be in 1..=8, got {m}"
            )));
        }
        // cos^{2m}θ = 4^{-m} (C(2m,m) + 2 Σ_{k=1}^m C(2m, m-k) cos 2kθ)
        let scale = 0.25f64.powi(m as i32);
        let mut cos_coeffs = vec![C64::new(0.0, 0.0); m + 1];
        cos_coeffs[0] = C64::new(scale * binomial(2 * m, m), 0.0);
        for k in 1..=m {
            cos_coeffs[k] = C64::new(2.0 * scale * binomial(2 * m, m - k), 0.0);
        }
        Ok(Self {
            cos_coeffs,
            sin_coeffs: vec![C64::new(0.0, 0.0); m + 1],
            smoothness: 2 * m - 1,
        })
    }

    /// `e^{iγ} cos^{2m}(πs/2)`: the bump rotated by a constant phase, so
    /// both real and imaginary parts are strictly positive inside the
    /// support when `γ ∈ (0, π/2)`.
    pub fn cos_power_rotated(m: usize, gamma: f64) -> Result<Self> {
        let mut p = Self::cos_power(m)?;
        let rot = cis(gamma);
        for c in &mut p.cos_coeffs {
            *c *= rot;
        }
        Ok(p)
    }

    /// `(sin(πs) + i) cos^{2m}(πs/2)`: odd real part, even imaginary part.
    /// Used as the quotient template of potentials with a removable zero
    /// frequency; the resulting potential is real-valued on a symmetric
    /// band.
    pub fn sin_mix(m: usize) -> Result<Self> {
        let bump = Self::cos_power(m)?;
        let n = m + 2;
        let mut cos_coeffs = vec![C64::new(0.0, 0.0); n];
        let mut sin_coeffs = vec![C64::new(0.0, 0.0); n];
        for (k, a) in bump.cos_coeffs.iter().enumerate() {
            // i * cos^{2m} part
            cos_coeffs[k] += C64::new(0.0, 1.0) * a;
            // sin(πs) cos(kπs) = ½ [sin((k+1)πs) + sin((1-k)πs)]
            let a = a.re;
            match k {
                0 => sin_coeffs[1] += C64::new(a, 0.0),
                1 => sin_coeffs[2] += C64::new(0.5 * a, 0.0),
                _ => {
                    sin_coeffs[k + 1] += C64::new(0.5 * a, 0.0);
                    sin_coeffs[k - 1] -= C64::new(0.5 * a, 0.0);
                }
            }
        }
        Ok(Self {
            cos_coeffs,
            sin_coeffs,
            smoothness: 2 * m - 1,
        })
    }

    /// Identically zero profile.
    pub fn zero() -> Self {
        Self {
            cos_coeffs: vec![C64::new(0.0, 0.0)],
            sin_coeffs: vec![C64::new(0.0, 0.0)],
            smoothness: 5,
        }
    }

    /// Scale the template by a complex constant.
    pub fn scaled(mut self, c: C64) -> Self {
        for a in &mut self.cos_coeffs {
            *a *= c;
        }
        for b in &mut self.sin_coeffs {
            *b *= c;
        }
        self
    }

    pub fn smoothness_order(&self) -> usize {
        self.smoothness
    }

    pub fn eval(&self, s: f64) -> C64 {
        self.deriv_unchecked(0, s)
    }

    /// Analytic derivative of the given order; rejects orders past the
    /// profile's smoothness.
    pub fn deriv(&self, order: usize, s: f64) -> Result<C64> {
        if order > self.smoothness {
            return Err(Error::InvalidParameter(format!(
                "derivative order {order} exceeds profile smoothness {}",
                self.smoothness
            )));
        }
        Ok(self.deriv_unchecked(order, s))
    }

    pub(crate) fn deriv_unchecked(&self, order: usize, s: f64) -> C64 {
        if s.abs() >= 1.0 {
            return C64::new(0.0, 0.0);
        }
        let shift = order as f64 * 0.5 * PI;
        let mut acc = C64::new(0.0, 0.0);
        for (j, (a, b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let jpi = j as f64 * PI;
            let factor = jpi.powi(order as i32);
            if factor == 0.0 && order > 0 {
                continue;
            }
            let arg = jpi * s + shift;
            acc += a * (factor * arg.cos()) + b * (factor * arg.sin());
        }
        acc
    }
}

/// How the band maps the profile onto the Fourier side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandForm {
    /// `f̂(p) = φ(s(p)) e^{-i x₀ p}`.
    Plain,
    /// `f̂(p) = p · φ(s(p)) e^{-i x₀ p}` — the zero frequency is a built-in
    /// factor, so `f̂(p)/p` extends smoothly through `p = 0`.
    Factored,
}

/// A function whose Fourier transform is a profile supported on
/// `[band_lo, band_hi]`, spatially centered at `center`.
#[derive(Debug, Clone)]
pub struct BandFunction {
    profile: BandProfile,
    band_lo: f64,
    band_hi: f64,
    center: f64,
    form: BandForm,
}

/// Result of checking the spatial-localization bound.
#[derive(Debug, Clone, Copy)]
pub struct TailCheck {
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl BandFunction {
    pub fn new(profile: BandProfile, band_lo: f64, band_hi: f64, center: f64) -> Result<Self> {
        Self::with_form(profile, band_lo, band_hi, center, BandForm::Plain)
    }

    /// Band whose transform carries an explicit factor `p`, so the
    /// quotient `f̂(p)/p` is the stored profile mapped onto the band.
    pub fn new_factored(
        profile: BandProfile,
        band_lo: f64,
        band_hi: f64,
        center: f64,
    ) -> Result<Self> {
        Self::with_form(profile, band_lo, band_hi, center, BandForm::Factored)
    }

    fn with_form(
        profile: BandProfile,
        band_lo: f64,
        band_hi: f64,
        center: f64,
        form: BandForm,
    ) -> Result<Self> {
        if !(band_lo < band_hi) {
            return Err(Error::InvalidParameter(format!(
                "band [{band_lo}, {band_hi}] is degenerate"
            )));
        }
        if !band_lo.is_finite() || !band_hi.is_finite() || !center.is_finite() {
            return Err(Error::InvalidParameter(
                "band endpoints and center must be finite".into(),
            ));
        }
        Ok(Self {
            profile,
            band_lo,
            band_hi,
            center,
            form,
        })
    }

    pub fn band(&self) -> (f64, f64) {
        (self.band_lo, self.band_hi)
    }

    pub fn width(&self) -> f64 {
        self.band_hi - self.band_lo
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn form(&self) -> BandForm {
        self.form
    }

    pub fn profile(&self) -> &BandProfile {
        &self.profile
    }

    pub fn smoothness_order(&self) -> usize {
        self.profile.smoothness
    }

    /// Band map `s(p) = (2p - (a+b))/(b-a)`.
    #[inline]
    fn s_of(&self, p: f64) -> f64 {
        (2.0 * p - (self.band_lo + self.band_hi)) / self.width()
    }

    /// `f̂(p)`; exactly zero outside the band.
    pub fn fourier_eval(&self, p: f64) -> C64 {
        let base = self.profile.eval(self.s_of(p)) * cis(-self.center * p);
        match self.form {
            BandForm::Plain => base,
            BandForm::Factored => base * p,
        }
    }

    /// Analytic `d^n/dp^n f̂(p)` via the Leibniz rule on the scaled profile,
    /// the modulation factor and (for factored bands) the prefactor `p`.
    pub fn fourier_deriv(&self, order: usize, p: f64) -> Result<C64> {
        if order > self.profile.smoothness {
            return Err(Error::InvalidParameter(format!(
                "derivative order {order} exceeds profile smoothness {}",
                self.profile.smoothness
            )));
        }
        Ok(self.fourier_deriv_unchecked(order, p))
    }

    pub(crate) fn fourier_deriv_unchecked(&self, order: usize, p: f64) -> C64 {
        // g(p) = φ(s(p)) e^{-i x₀ p}
        let g = |n: usize| -> C64 {
            let sigma = 2.0 / self.width();
            let s = self.s_of(p);
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..=n {
                let phi_i = self.profile.deriv_unchecked(i, s) * sigma.powi(i as i32);
                let mod_j = (C64::new(0.0, -self.center)).powu((n - i) as u32);
                acc += binomial(n, i) * phi_i * mod_j;
            }
            acc * cis(-self.center * p)
        };
        match self.form {
            BandForm::Plain => g(order),
            BandForm::Factored => {
                let mut acc = g(order) * p;
                if order >= 1 {
                    acc += order as f64 * g(order - 1);
                }
                acc
            }
        }
    }

    /// Effective template on `[-1, 1]` after absorbing any factored-band
    /// prefactor: `f̂(p) = φ_eff(s(p)) e^{-i x₀ p}`.
    fn effective_template(&self, s: f64) -> C64 {
        let v = self.profile.eval(s);
        match self.form {
            BandForm::Plain => v,
            BandForm::Factored => {
                let p = 0.5 * (self.width() * s + self.band_lo + self.band_hi);
                v * p
            }
        }
    }

    fn effective_template_deriv1(&self, s: f64) -> C64 {
        let d = self.profile.deriv_unchecked(1, s);
        match self.form {
            BandForm::Plain => d,
            BandForm::Factored => {
                let p = 0.5 * (self.width() * s + self.band_lo + self.band_hi);
                d * p + self.profile.eval(s) * (0.5 * self.width())
            }
        }
    }

    /// Transform of the effective template, `∫_{-1}^{1} φ(s) e^{-isu} ds`,
    /// by Gauss–Legendre with node doubling until two successive estimates
    /// agree to 1e-10.
    fn template_transform(&self, u: f64, ok: &AtomicBool) -> C64 {
        let f = |s: f64| self.effective_template(s) * cis(-s * u);
        let mut n = 128usize;
        let mut prev = gl_fixed(&f, -1.0, 1.0, n);
        loop {
            n *= 2;
            let next = gl_fixed(&f, -1.0, 1.0, n);
            if (next - prev).norm() < 1e-10 {
                return next;
            }
            if n >= (1 << 21) {
                ok.store(false, Ordering::Relaxed);
                return next;
            }
            prev = next;
        }
    }

    /// Spatial value
    /// `f(x) = (b-a)/(4π) e^{i(a+b)(x-x₀)/2} φ̂((b-a)(x₀-x)/2)`.
    pub fn spatial_eval(&self, x: f64) -> Result<C64> {
        let ok = AtomicBool::new(true);
        let v = self.spatial_eval_flagged(x, &ok);
        if ok.load(Ordering::Relaxed) {
            Ok(v)
        } else {
            Err(Error::QuadratureFailure {
                context: format!("template transform at x = {x}"),
                value_re: v.re,
                value_im: v.im,
                estimate: f64::NAN,
                tol: 1e-10,
                panels: 1 << 21,
            })
        }
    }

    fn spatial_eval_flagged(&self, x: f64, ok: &AtomicBool) -> C64 {
        let half_sum = 0.5 * (self.band_lo + self.band_hi);
        let half_diff = 0.5 * self.width();
        let transform = self.template_transform(half_diff * (self.center - x), ok);
        self.width() / (4.0 * PI) * cis(half_sum * (x - self.center)) * transform
    }

    /// Spatial-localization bound
    /// `∫_{|x-x₀|≥c} |f(x)|² dx ≤ (2/c²) (b-a)⁻¹ ‖φ_eff'‖²_{L²(-1,1)}`,
    /// the L² norm computed by quadrature.
    pub fn chebyshev_tail_bound(&self, c: f64) -> Result<f64> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "localization radius must be positive, got {c}"
            )));
        }
        let f = |s: f64| C64::new(self.effective_template_deriv1(s).norm_sqr(), 0.0);
        let norm_sq = quad::integrate_time_kernel(&f, -1.0, 1.0, 1e-12)?
            .require_converged("profile derivative L2 norm")?
            .value
            .re;
        Ok(2.0 / (c * c) / self.width() * norm_sq)
    }

    /// Measure the spatial tail mass `∫_{|x-x₀|≥c} |f|² dx` by quadrature
    /// (truncated once the integrand stays below `tol`) and compare it
    /// against [`Self::chebyshev_tail_bound`].
    pub fn verify_tail(&self, c: f64, tol: f64) -> Result<TailCheck> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "localization radius must be positive, got {c}"
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be positive".into()));
        }
        let bound = self.chebyshev_tail_bound(c)?;
        let ok = AtomicBool::new(true);
        let density = |x: f64| C64::new(self.spatial_eval_flagged(x, &ok).norm_sqr(), 0.0);
        let mut measured = 0.0;
        for side in [-1.0f64, 1.0] {
            let mut lo = c;
            let mut width = c.max(1.0);
            for _ in 0..64 {
                let (a, b) = (self.center + side * (lo + width), self.center + side * lo);
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                let part = quad::integrate_time_kernel(&density, a, b, tol * 1e-2)?;
                measured += part.value.re;
                if part.value.re.abs() < tol * 1e-2 && width > 8.0 * c.max(1.0) {
                    break;
                }
                lo += width;
                width *= 2.0;
            }
        }
        if !ok.load(Ordering::Relaxed) {
            return Err(Error::QuadratureFailure {
                context: "tail mass integrand".into(),
                value_re: measured,
                value_im: 0.0,
                estimate: f64::NAN,
                tol,
                panels: 0,
            });
        }
        Ok(TailCheck {
            measured,
            bound,
            pass: measured <= bound + tol,
        })
    }

    /// Sup of the single derivative order `j`, `sup |f̂^{(j)}|`, read off a
    /// uniform grid over the band.
    pub fn deriv_sup(&self, j: usize) -> Result<f64> {
        if j > self.profile.smoothness {
            return Err(Error::InvalidParameter(format!(
                "derivative order {j} exceeds profile smoothness {}",
                self.profile.smoothness
            )));
        }
        let mut best = 0.0f64;
        for i in 0..SUP_NORM_GRID {
            let p = self.band_lo + self.width() * (i as f64 + 0.5) / SUP_NORM_GRID as f64;
            best = best.max(self.fourier_deriv_unchecked(j, p).norm());
        }
        Ok(best)
    }

    /// Sup norm of the order-`k` Sobolev family: `max_{j≤k} sup |f̂^{(j)}|`.
    pub fn wkinf_norm(&self, k: usize) -> Result<f64> {
        let mut best = 0.0f64;
        for j in 0..=k {
            best = best.max(self.deriv_sup(j)?);
        }
        Ok(best)
    }

    /// `∫ |f(x)|² dx` via Plancherel: `(2π)⁻¹ ∫_band |f̂|² dp`.
    pub fn l2_norm_squared(&self) -> Result<f64> {
        let f = |p: f64| C64::new(self.fourier_eval(p).norm_sqr(), 0.0);
        let v = quad::integrate_time_kernel(&f, self.band_lo, self.band_hi, 1e-12)?
            .require_converged("band mass")?
            .value
            .re;
        Ok(v / (2.0 * PI))
    }
}

/// Fixed-order Gauss–Legendre on `[lo, hi]` built by scaling panel rules;
/// `n` is rounded up to a multiple of 64 and distributed over panels.
fn gl_fixed<F: Fn(f64) -> C64>(f: &F, lo: f64, hi: f64, n: usize) -> C64 {
    let panels = (n + 63) / 64;
    let step = (hi - lo) / panels as f64;
    let rule = gl64();
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..panels {
        let a = lo + k as f64 * step;
        let mid = a + 0.5 * step;
        let half = 0.5 * step;
        for (&x, &w) in rule.0.iter().zip(rule.1.iter()) {
            acc += f(mid + half * x) * (w * half);
        }
    }
    acc
}

fn gl64() -> &'static (Vec<f64>, Vec<f64>) {
    use std::sync::OnceLock;
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        // Newton iteration, same scheme as the 16/32 rules in `quad`.
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
