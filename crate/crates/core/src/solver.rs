//! Split-step spectral reference solver for
//! `i ∂ₜ u = -∂ₓₓ u + V(x) u` on a large periodic grid, used to validate
//! the truncated perturbation series and the ε²-scaling of its residual.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::bands::BandFunction;
use crate::dyson::{s1_eval, s2_eval, AmplitudeW};
use crate::error::{Error, Result};
use crate::C64;

/// Periodic grid `[-X, X)` with a power-of-two number of points.
#[derive(Debug, Clone, Copy)]
pub struct SpectralGrid {
    pub half_width: f64,
    pub n_points: usize,
    pub dt: f64,
}

impl SpectralGrid {
    pub fn new(half_width: f64, n_points: usize, dt: f64) -> Result<Self> {
        if n_points < 1 << 10 || !n_points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "grid size must be a power of two ≥ 1024, got {n_points}"
            )));
        }
        if !(half_width > 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidParameter(
                "grid half-width and dt must be positive".into(),
            ));
        }
        Ok(Self {
            half_width,
            n_points,
            dt,
        })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points)
            .map(|j| -self.half_width + j as f64 * self.dx())
            .collect()
    }

    /// FFT-ordered wavenumbers `π j / X`.
    fn ks(&self) -> Vec<f64> {
        let n = self.n_points as i64;
        (0..n)
            .map(|j| {
                let j = if j < n / 2 { j } else { j - n };
                PI * j as f64 / self.half_width
            })
            .collect()
    }

    /// Check the packet stays resolvable and inside the box: the Nyquist
    /// frequency must dominate every band edge by the usual safety factor
    /// and the box must out-run the fastest group speed `2p`.
    pub fn validate_for(
        &self,
        u0: &BandFunction,
        v: Option<&BandFunction>,
        t_final: f64,
    ) -> Result<()> {
        let (p1, p2) = u0.band();
        let mut p_extent = p1.abs().max(p2.abs());
        if let Some(v) = v {
            let (a, b) = v.band();
            p_extent = p_extent.max((p1 + a).abs()).max((p2 + b).abs());
        }
        let nyquist = PI * self.n_points as f64 / (2.0 * self.half_width);
        if nyquist < 4.0 * p_extent {
            return Err(Error::InvalidParameter(format!(
                "Nyquist frequency {nyquist:.2} is below 4×band extent {:.2}",
                4.0 * p_extent
            )));
        }
        let needed = u0.center().abs() + 2.0 * p_extent * t_final + 20.0;
        if self.half_width < needed {
            return Err(Error::InvalidParameter(format!(
                "grid half-width {} cannot contain the packet; need ≥ {needed:.1}",
                self.half_width
            )));
        }
        Ok(())
    }
}

/// Sample a band-limited function on the grid (cached once per scenario by
/// callers; each sample is a spectral quadrature).
pub fn sample_on_grid(f: &BandFunction, grid: &SpectralGrid) -> Result<Vec<C64>> {
    grid.xs()
        .par_iter()
        .map(|&x| f.spatial_eval(x))
        .collect::<Result<Vec<_>>>()
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Plans {
    let mut planner = FftPlanner::new();
    Plans {
        forward: planner.plan_fft_forward(n),
        inverse: planner.plan_fft_inverse(n),
    }
}

/// Strang-split evolution of a sampled state to `t_final`: half potential
/// phase, full kinetic phase in frequency space, half potential phase per
/// step; second order in `dt`. The potential samples are scaled by
/// `epsilon` before use.
pub fn evolve_sampled(
    u0_grid: &[C64],
    v_grid: Option<&[C64]>,
    epsilon: f64,
    grid: &SpectralGrid,
    t_final: f64,
) -> Result<Vec<C64>> {
    if u0_grid.len() != grid.n_points {
        return Err(Error::InvalidParameter(
            "state samples do not match the grid".into(),
        ));
    }
    if !(t_final > 0.0) {
        return Err(Error::InvalidParameter("t_final must be positive".into()));
    }
    let steps = (t_final / grid.dt).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;
    let v_scaled: Vec<C64> = match v_grid {
        Some(v) => {
            if v.len() != grid.n_points {
                return Err(Error::InvalidParameter(
                    "potential samples do not match the grid".into(),
                ));
            }
            v.iter().map(|&z| z * epsilon).collect()
        }
        None => vec![C64::new(0.0, 0.0); grid.n_points],
    };
    let v_max = v_scaled.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if dt * v_max > 0.1 {
        return Err(Error::InvalidParameter(format!(
            "dt·max|V| = {:.3} exceeds 0.1; reduce the step",
            dt * v_max
        )));
    }
    // e^{-i V dt/2}: for complex V this is exp of a complex argument
    let half_phase: Vec<C64> = v_scaled
        .iter()
        .map(|&v| (C64::new(0.0, -0.5 * dt) * v).exp())
        .collect();
    let kinetic: Vec<C64> = grid
        .ks()
        .iter()
        .map(|&k| crate::cis(-k * k * dt))
        .collect();
    let plans = plans(grid.n_points);
    let scale = 1.0 / grid.n_points as f64;
    let mut u = u0_grid.to_vec();
    for _ in 0..steps {
        for (z, h) in u.iter_mut().zip(&half_phase) {
            *z *= h;
        }
        plans.forward.process(&mut u);
        for (z, k) in u.iter_mut().zip(&kinetic) {
            *z *= k;
        }
        plans.inverse.process(&mut u);
        for (z, h) in u.iter_mut().zip(&half_phase) {
            *z *= *h * scale;
        }
    }
    Ok(u)
}

/// Sample-and-run convenience wrapper.
pub fn evolve(
    u0: &BandFunction,
    v: Option<&BandFunction>,
    grid: &SpectralGrid,
    t_final: f64,
) -> Result<Vec<C64>> {
    grid.validate_for(u0, v, t_final)?;
    let u0_grid = sample_on_grid(u0, grid)?;
    let v_grid = v.map(|v| sample_on_grid(v, grid)).transpose()?;
    evolve_sampled(&u0_grid, v_grid.as_deref(), 1.0, grid, t_final)
}

/// One row of the truncation-residual table.
#[derive(Debug, Clone, Copy)]
pub struct ResidualRow {
    pub epsilon: f64,
    pub residual: f64,
}

/// Residuals of the two-term series against the solver, with the
/// log-log slope over ε.
#[derive(Debug, Clone)]
pub struct ResidualTable {
    pub rows: Vec<ResidualRow>,
    pub slope: f64,
    pub r2: f64,
    /// `max|free solver - S₁| / max|S₁|` over the interior window.
    pub free_rel_err: f64,
}

/// Plain least-squares fit of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        syy += ly * ly;
    }
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let ss_tot = syy - sy * sy / n;
    let ss_res = ss_tot - slope * (sxy - sx * sy / n);
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Some((slope, r2))
}

/// For each ε, the sup-norm distance between the solver run with potential
/// `εV` and the two-term series `S₁ + εS₂` at time `t`; the series omits
/// terms quadratic and higher in ε, so the residual should scale like ε².
pub fn dyson_residual(
    u0: &BandFunction,
    v: &BandFunction,
    grid: &SpectralGrid,
    t: f64,
    eps_list: &[f64],
    tol: f64,
) -> Result<ResidualTable> {
    grid.validate_for(u0, Some(v), t)?;
    if eps_list.is_empty() {
        return Err(Error::InvalidParameter("empty epsilon list".into()));
    }
    let u0_grid = sample_on_grid(u0, grid)?;
    let v_grid = sample_on_grid(v, grid)?;
    let xs = grid.xs();
    let window: Vec<usize> = (0..grid.n_points)
        .filter(|&j| xs[j].abs() <= 0.9 * grid.half_width)
        .collect();

    let s1: Vec<C64> = window
        .par_iter()
        .map(|&j| s1_eval(u0, t, xs[j], tol))
        .collect::<Result<Vec<_>>>()?;
    let w = AmplitudeW::new(v.clone(), u0.clone(), tol)?;
    let s2: Vec<C64> = window
        .par_iter()
        .map(|&j| s2_eval(&w, t, xs[j], tol))
        .collect::<Result<Vec<_>>>()?;

    let free = evolve_sampled(&u0_grid, None, 0.0, grid, t)?;
    let s1_max = s1.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let free_rel_err = window
        .iter()
        .enumerate()
        .map(|(i, &j)| (free[j] - s1[i]).norm())
        .fold(0.0f64, f64::max)
        / s1_max;

    let mut rows = Vec::new();
    for &eps in eps_list {
        if !(eps >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be non-negative, got {eps}"
            )));
        }
        let u_eps = evolve_sampled(&u0_grid, Some(&v_grid), eps, grid, t)?;
        let residual = window
            .iter()
            .enumerate()
            .map(|(i, &j)| (u_eps[j] - s1[i] - eps * s2[i]).norm())
            .fold(0.0f64, f64::max);
        rows.push(ResidualRow {
            epsilon: eps,
            residual,
        });
    }
    let fit_points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.epsilon > 0.0 && r.residual > 0.0)
        .map(|r| (r.epsilon, r.residual))
        .collect();
    let (slope, r2) = loglog_slope(&fit_points).unwrap_or((f64::NAN, f64::NAN));
    Ok(ResidualTable {
        rows,
        slope,
        r2,
        free_rel_err,
    })
}
