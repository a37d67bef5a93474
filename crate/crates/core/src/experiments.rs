//! Scenario orchestration: builds the band data, runs the selected checks
//! over deterministic grids and randomized suites, fits decay slopes along
//! space-time directions, classifies the cone geometry and assembles the
//! CSV artifacts.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::amplitude::{self, PositivityInterval, TildeV};
use crate::bands::{BandFunction, BandProfile, NORM_INFLATION};
use crate::dyson::{self, AmplitudeW, Cone};
use crate::error::{Error, Result};
use crate::expansion::{self, EstimateMode};
use crate::phase;
use crate::report::{fmt_bool, fmt_c, fmt_f};
use crate::solver::{self, ResidualTable, SpectralGrid};
use crate::{cis, C64};

const SQRT_PI: f64 = 1.772_453_850_905_516_1;

/// Slope fits are abandoned below this amplitude (quadrature noise floor).
pub const AMPLITUDE_FLOOR: f64 = 1e-12;
/// Fraction of the free packet's squared amplitude required inside the
/// free cone at the largest grid time.
pub const LOCALIZATION_THRESHOLD: f64 = 0.9;

/// Selectable checks. The scenario-file tokens are part of the external
/// interface and parsed in [`Check::parse`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    /// Free-packet cone estimates and decay slopes (`s1_cone`).
    FreeCone,
    /// First-interaction cone estimates (`s2_cone`).
    InteractionCone,
    /// Refined long-time expansion around `W₁` and positivity (`thm69`).
    RefinedExpansion,
    /// Randomized stationary-phase remainder suites (`bounds4`).
    ExpansionBounds,
    /// Phase-primitive closed forms and envelope (`phi`).
    PhasePrimitives,
    /// Spatial-localization tail bound (`tail`).
    SpatialTail,
    /// Series truncation residual against the reference solver
    /// (`residual`).
    SeriesResidual,
}

impl Check {
    pub fn parse(token: &str) -> Result<Self> {
        Ok(match token {
            "s1_cone" => Check::FreeCone,
            "s2_cone" => Check::InteractionCone,
            "thm69" => Check::RefinedExpansion,
            "bounds4" => Check::ExpansionBounds,
            "phi" => Check::PhasePrimitives,
            "tail" => Check::SpatialTail,
            "residual" => Check::SeriesResidual,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown check '{other}' (expected s1_cone, s2_cone, thm69, \
                     bounds4, phi, tail or residual)"
                )))
            }
        })
    }

    pub fn token(&self) -> &'static str {
        match self {
            Check::FreeCone => "s1_cone",
            Check::InteractionCone => "s2_cone",
            Check::RefinedExpansion => "thm69",
            Check::ExpansionBounds => "bounds4",
            Check::PhasePrimitives => "phi",
            Check::SpatialTail => "tail",
            Check::SeriesResidual => "residual",
        }
    }

    pub fn all() -> [Check; 7] {
        [
            Check::FreeCone,
            Check::InteractionCone,
            Check::RefinedExpansion,
            Check::ExpansionBounds,
            Check::PhasePrimitives,
            Check::SpatialTail,
            Check::SeriesResidual,
        ]
    }
}

/// Profile family selector used by scenario files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileKind {
    /// `cos^{2m}(πs/2)`.
    CosBump,
    /// `e^{iγ} cos^{2m}(πs/2)`.
    PhaseBump,
    /// `(sin(πs)+i) cos^{2m}(πs/2)`.
    SinMixBump,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    pub m: usize,
    pub gamma: f64,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<BandProfile> {
        match self.kind {
            ProfileKind::CosBump => BandProfile::cos_power(self.m),
            ProfileKind::PhaseBump => BandProfile::cos_power_rotated(self.m, self.gamma),
            ProfileKind::SinMixBump => BandProfile::sin_mix(self.m),
            ProfileKind::Zero => Ok(BandProfile::zero()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSpec {
    pub profile: ProfileSpec,
    pub band_lo: f64,
    pub band_hi: f64,
    pub center: f64,
    /// Store the transform as `p·(profile)`, exposing the smooth quotient.
    pub factored: bool,
}

impl BandSpec {
    pub fn build(&self) -> Result<BandFunction> {
        let profile = self.profile.build()?;
        if self.factored {
            BandFunction::new_factored(profile, self.band_lo, self.band_hi, self.center)
        } else {
            BandFunction::new(profile, self.band_lo, self.band_hi, self.center)
        }
    }
}

/// Reference-solver parameters; `half_width = 0` selects the automatic
/// box size from the band data.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub half_width: f64,
    pub n_points: usize,
    pub dt: f64,
    pub t_final: f64,
    pub eps_list: Vec<f64>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            half_width: 0.0,
            n_points: 1 << 14,
            dt: 2.5e-4,
            t_final: 1.0,
            eps_list: vec![0.0125, 0.025, 0.05, 0.1],
        }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub initial: BandSpec,
    pub potential: Option<BandSpec>,
    pub delta1: f64,
    pub delta2: f64,
    pub eps: f64,
    /// Tolerance for bound-verification quadratures.
    pub quad_tol: f64,
    /// Tolerance for grid sweeps (speed).
    pub grid_tol: f64,
    pub t_grid: Vec<f64>,
    /// Explicit ξ grid; empty means the automatic grid.
    pub xi_grid: Vec<f64>,
    pub xi_points: usize,
    /// Times used for decay-slope fits (two decades by default).
    pub slope_t_grid: Vec<f64>,
    pub checks: BTreeSet<Check>,
    /// Randomized-suite size for the expansion-bound and phase checks.
    pub cases: usize,
    pub seed: u64,
    pub solver: SolverSpec,
}

impl Scenario {
    /// The built-in scenario: a phase-rotated C⁵ packet on the band
    /// `[1, 2]` and a real-valued potential whose transform is
    /// `y·(sin(2πy)+i as profile)`-shaped on `[-1/2, 1/2]`.
    pub fn fixture() -> Self {
        Self {
            name: "symmetric-real-potential".into(),
            initial: BandSpec {
                profile: ProfileSpec {
                    kind: ProfileKind::PhaseBump,
                    m: 3,
                    gamma: 0.25 * PI,
                },
                band_lo: 1.0,
                band_hi: 2.0,
                center: 0.0,
                factored: false,
            },
            potential: Some(BandSpec {
                profile: ProfileSpec {
                    kind: ProfileKind::SinMixBump,
                    m: 3,
                    gamma: 0.0,
                },
                band_lo: -0.5,
                band_hi: 0.5,
                center: 0.0,
                factored: true,
            }),
            delta1: 0.75,
            delta2: 2.25,
            eps: 0.2,
            quad_tol: 1e-9,
            grid_tol: 1e-7,
            t_grid: vec![1.0, 3.16, 10.0, 31.6, 100.0, 316.0, 1000.0],
            xi_grid: Vec::new(),
            xi_points: 61,
            slope_t_grid: vec![
                100.0,
                316.227_766_016_837_96,
                1000.0,
                3162.277_660_168_379_5,
                10000.0,
            ],
            checks: Check::all().into_iter().collect(),
            cases: 1000,
            seed: 20_260_810,
            solver: SolverSpec::default(),
        }
    }

    /// The automatic ξ grid: `xi_points` uniform samples spanning the free
    /// and shifted bands padded by one unit each side.
    pub fn effective_xi_grid(&self) -> Vec<f64> {
        if !self.xi_grid.is_empty() {
            return self.xi_grid.clone();
        }
        let (p1, p2) = (self.initial.band_lo, self.initial.band_hi);
        let (mut lo, mut hi) = (p1, p2);
        if let Some(v) = &self.potential {
            lo = lo.min(p1 + v.band_lo);
            hi = hi.max(p2 + v.band_hi);
        }
        let (lo, hi) = (lo - 1.0, hi + 1.0);
        let n = self.xi_points.max(2);
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Validate all invariants and build the band data.
    pub fn validate(&self) -> Result<ValidatedScenario> {
        if !(self.delta1 > 0.5 && self.delta1 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta1 must lie in (1/2, 1), got {}",
                self.delta1
            )));
        }
        if !(self.delta2 > 2.0 && self.delta2 < 2.5) {
            return Err(Error::InvalidParameter(format!(
                "delta2 must lie in (2, 5/2), got {}",
                self.delta2
            )));
        }
        let width = self.initial.band_hi - self.initial.band_lo;
        if !(self.eps > 0.0 && self.eps < 0.5 * width) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in (0, (p₂-p₁)/2) = (0, {}), got {}",
                0.5 * width,
                self.eps
            )));
        }
        if !(self.quad_tol > 0.0 && self.grid_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "tolerances must be positive".into(),
            ));
        }
        if self.t_grid.iter().any(|&t| t <= 0.0) {
            return Err(Error::InvalidParameter("t grid must be positive".into()));
        }
        let initial = self.initial.build()?;
        let potential = self.potential.as_ref().map(|p| p.build()).transpose()?;
        let needs_potential = [
            Check::InteractionCone,
            Check::RefinedExpansion,
            Check::SeriesResidual,
        ];
        if potential.is_none() && needs_potential.iter().any(|c| self.checks.contains(c)) {
            return Err(Error::InvalidParameter(
                "the selected checks need a potential section".into(),
            ));
        }
        let s2_theorems = [Check::InteractionCone, Check::RefinedExpansion];
        if s2_theorems.iter().any(|c| self.checks.contains(c)) {
            let (p1, p2) = initial.band();
            if p1 <= 0.0 && p2 >= 0.0 {
                return Err(Error::InvalidParameter(
                    "interaction-cone checks need 0 outside the initial band".into(),
                ));
            }
            if initial.smoothness_order() < 5 {
                return Err(Error::InvalidParameter(
                    "interaction-cone checks need a C⁵ initial profile (m ≥ 3)".into(),
                ));
            }
            if let Some(v) = &potential {
                if v.smoothness_order() < 4 {
                    return Err(Error::InvalidParameter(
                        "interaction-cone checks need a C⁴ potential profile".into(),
                    ));
                }
            }
        }
        Ok(ValidatedScenario {
            scenario: self.clone(),
            initial,
            potential,
        })
    }
}

/// A scenario together with its constructed band data.
pub struct ValidatedScenario {
    pub scenario: Scenario,
    pub initial: BandFunction,
    pub potential: Option<BandFunction>,
}

/// One space-time grid point of the propagate sweep.
#[derive(Debug, Clone, Copy)]
pub struct SpacetimeSample {
    pub t: f64,
    pub x: f64,
    pub xi: f64,
    pub amp_s1: C64,
    pub amp_s2: C64,
    pub in_free_cone: bool,
    pub in_shifted_cone: bool,
    pub leading_s1: C64,
    pub leading_s2: C64,
    pub bound_s1: f64,
    pub bound_s2: f64,
}

/// Decay-slope fit along a direction.
#[derive(Debug, Clone, Copy)]
pub struct SlopeFit {
    pub slope: f64,
    pub r2: f64,
    pub n: usize,
}

/// Least-squares slope of `log|amp|` against `log t`; requires at least
/// five samples spanning two decades, abandons amplitudes below
/// [`AMPLITUDE_FLOOR`].
pub fn fit_decay_slope(samples: &[(f64, f64)]) -> Result<SlopeFit> {
    if samples.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "slope fit needs at least 5 samples, got {}",
            samples.len()
        )));
    }
    let t_min = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let t_max = samples.iter().map(|s| s.0).fold(0.0f64, f64::max);
    if t_max < 100.0 * t_min {
        return Err(Error::InvalidParameter(
            "slope fit needs samples spanning at least two decades".into(),
        ));
    }
    let kept: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(_, a)| a > AMPLITUDE_FLOOR)
        .copied()
        .collect();
    if kept.len() < 3 {
        return Err(Error::Unsupported(
            "amplitudes underflowed the fit floor; no fit".into(),
        ));
    }
    let (slope, r2) = solver::loglog_slope(&kept)
        .ok_or_else(|| Error::Unsupported("degenerate slope fit".into()))?;
    Ok(SlopeFit {
        slope,
        r2,
        n: kept.len(),
    })
}

/// A fitted direction with its acceptance window.
#[derive(Debug, Clone)]
pub struct SlopeRow {
    pub label: String,
    pub xi: f64,
    pub slope: f64,
    pub r2: f64,
    pub n: usize,
    pub criterion: String,
    pub pass: bool,
}

/// Qualitative interpretation of the shifted cone against the free cone.
#[derive(Debug, Clone, Copy)]
pub struct ConeClassification {
    pub free_edges: (f64, f64),
    pub shifted_edges: (f64, f64),
    /// Positive potential frequencies can push the front faster (`b > 0`).
    pub advanced_transmission: bool,
    /// The back can lag behind the free packet (`a < 0` with `p₁ > b`).
    pub retarded_transmission: bool,
    /// Part of the packet can reverse direction (`a = -b`, `0 < p₁ < b`).
    pub reflection: bool,
    /// Strictly positive potential band shifts the whole cone right.
    pub acceleration: bool,
}

/// Classify the cone geometry from the two bands.
pub fn classify_cones(initial: &BandFunction, potential: &BandFunction) -> ConeClassification {
    let (p1, p2) = initial.band();
    let (a, b) = potential.band();
    ConeClassification {
        free_edges: (2.0 * p1, 2.0 * p2),
        shifted_edges: (2.0 * (p1 + a), 2.0 * (p2 + b)),
        advanced_transmission: b > 0.0,
        retarded_transmission: a < 0.0 && p1 > b,
        reflection: a == -b && p1 > 0.0 && p1 < b,
        acceleration: a > 0.0,
    }
}

/// One randomized bound-verification case.
#[derive(Debug, Clone)]
pub struct BoundCaseRow {
    pub suite: String,
    pub idx: usize,
    pub order: usize,
    pub band_lo: f64,
    pub band_hi: f64,
    pub center: f64,
    pub omega: f64,
    pub point: f64,
    pub delta: f64,
    pub lhs: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Per-check aggregate.
#[derive(Debug, Clone)]
pub struct CheckSummary {
    pub check: Check,
    pub cases: usize,
    pub violations: usize,
}

/// Everything a run produces.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub scenario_name: String,
    pub samples: Vec<SpacetimeSample>,
    pub slopes: Vec<SlopeRow>,
    pub bound_cases: Vec<BoundCaseRow>,
    pub residual: Option<ResidualTable>,
    pub check_summaries: Vec<CheckSummary>,
    pub classification: Option<ConeClassification>,
    pub positivity: Vec<PositivityInterval>,
    /// Fraction of Σ|S₁|² inside the free cone at the largest grid time.
    pub localization_fraction: Option<f64>,
    pub sup_rows_s1: Vec<dyson::SupRow>,
    pub sup_rows_s2: Vec<dyson::SupRow>,
}

impl RunOutput {
    pub fn violations(&self) -> usize {
        self.check_summaries.iter().map(|c| c.violations).sum()
    }
}

/// Execute every enabled check of a validated scenario.
pub fn run(validated: &ValidatedScenario) -> Result<RunOutput> {
    let sc = &validated.scenario;
    let u0 = &validated.initial;
    let xi_grid = sc.effective_xi_grid();
    let mut out = RunOutput {
        scenario_name: sc.name.clone(),
        ..Default::default()
    };

    let amp_w = match &validated.potential {
        Some(v) => Some(AmplitudeW::new(v.clone(), u0.clone(), sc.grid_tol)?),
        None => None,
    };
    if let Some(v) = &validated.potential {
        out.classification = Some(classify_cones(u0, v));
    }

    let s1_report = if sc.checks.contains(&Check::FreeCone) {
        Some(dyson::verify_s1_cone(
            u0,
            &sc.t_grid,
            &xi_grid,
            sc.delta1,
            sc.grid_tol,
        )?)
    } else {
        None
    };
    let need_s2 = sc.checks.contains(&Check::InteractionCone)
        || sc.checks.contains(&Check::RefinedExpansion);
    let s2_report = if need_s2 {
        let w = amp_w.as_ref().expect("validated: potential present");
        Some(dyson::verify_s2_cone(
            w,
            &sc.t_grid,
            &xi_grid,
            sc.delta1,
            sc.delta2,
            sc.grid_tol,
        )?)
    } else {
        None
    };

    // assemble the space-time samples from whatever was computed
    if s1_report.is_some() || s2_report.is_some() {
        let free_cone = {
            let (p1, p2) = u0.band();
            Cone { p_lo: p1, p_hi: p2 }
        };
        let shifted_cone = amp_w.as_ref().map(|w| {
            let (lo, hi) = w.support();
            Cone { p_lo: lo, p_hi: hi }
        });
        for idx in 0..sc.t_grid.len() * xi_grid.len() {
            let t = sc.t_grid[idx / xi_grid.len()];
            let xi = xi_grid[idx % xi_grid.len()];
            let x = 2.0 * t * xi;
            let (amp_s1, leading_s1, bound_s1) = match &s1_report {
                Some(r) => {
                    let row = &r.rows[idx];
                    (row.amp, row.leading, row.bound)
                }
                None => (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.0),
            };
            let (amp_s2, leading_s2, bound_s2) = match &s2_report {
                Some(r) => {
                    let row = &r.rows[idx];
                    (row.amp, row.leading, row.bound)
                }
                None => (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.0),
            };
            out.samples.push(SpacetimeSample {
                t,
                x,
                xi,
                amp_s1,
                amp_s2,
                in_free_cone: free_cone.contains_xi(xi),
                in_shifted_cone: shifted_cone.map_or(false, |c| c.contains_xi(xi)),
                leading_s1,
                leading_s2,
                bound_s1,
                bound_s2,
            });
        }
    }

    if let Some(r) = &s1_report {
        out.sup_rows_s1 = r.sup_rows.clone();
        let mut violations = r.violations();
        // localization fraction at the largest time
        let t_max = sc.t_grid.iter().cloned().fold(0.0f64, f64::max);
        let (p1, p2) = u0.band();
        let row_energy: Vec<(f64, f64)> = r
            .rows
            .iter()
            .filter(|row| row.t == t_max)
            .map(|row| (row.xi, row.amp.norm_sqr()))
            .collect();
        let total: f64 = row_energy.iter().map(|e| e.1).sum();
        let inside: f64 = row_energy
            .iter()
            .filter(|e| e.0 >= p1 && e.0 <= p2)
            .map(|e| e.1)
            .sum();
        let fraction = if total > 0.0 { inside / total } else { 1.0 };
        out.localization_fraction = Some(fraction);
        if fraction < LOCALIZATION_THRESHOLD {
            violations += 1;
        }
        violations += fit_free_slopes(sc, u0, &mut out)?;
        out.check_summaries.push(CheckSummary {
            check: Check::FreeCone,
            cases: r.rows.len() + r.sup_rows.len() + 3,
            violations,
        });
    }

    if sc.checks.contains(&Check::InteractionCone) {
        let r = s2_report.as_ref().expect("computed above");
        out.sup_rows_s2 = r.sup_rows.clone();
        out.check_summaries.push(CheckSummary {
            check: Check::InteractionCone,
            cases: r.rows.len() + r.sup_rows.len(),
            violations: r.violations(),
        });
    }

    if sc.checks.contains(&Check::RefinedExpansion) {
        let v = validated.potential.as_ref().expect("validated");
        let w = amp_w.as_ref().expect("validated");
        let (cases, violations) =
            refined_expansion_check(sc, v, u0, w, s2_report.as_ref(), &mut out)?;
        out.check_summaries.push(CheckSummary {
            check: Check::RefinedExpansion,
            cases,
            violations,
        });
    }

    if sc.checks.contains(&Check::ExpansionBounds) {
        let violations = expansion_bound_suites(sc, &mut out)?;
        out.check_summaries.push(CheckSummary {
            check: Check::ExpansionBounds,
            cases: 3 * sc.cases,
            violations,
        });
    }

    if sc.checks.contains(&Check::PhasePrimitives) {
        let violations = phase_primitive_suite(sc, &mut out)?;
        out.check_summaries.push(CheckSummary {
            check: Check::PhasePrimitives,
            cases: 16 + sc.cases,
            violations,
        });
    }

    if sc.checks.contains(&Check::SpatialTail) {
        let violations = tail_suite(sc, &mut out)?;
        out.check_summaries.push(CheckSummary {
            check: Check::SpatialTail,
            cases: 104,
            violations,
        });
    }

    if sc.checks.contains(&Check::SeriesResidual) {
        let v = validated.potential.as_ref().expect("validated");
        let table = residual_check(sc, u0, v)?;
        let mut violations = 0;
        if !(1.7..=2.3).contains(&table.slope) {
            violations += 1;
        }
        if !(table.free_rel_err <= 1e-6) {
            violations += 1;
        }
        out.residual = Some(table);
        out.check_summaries.push(CheckSummary {
            check: Check::SeriesResidual,
            cases: sc.solver.eps_list.len() + 1,
            violations,
        });
    }

    Ok(out)
}

fn fit_free_slopes(sc: &Scenario, u0: &BandFunction, out: &mut RunOutput) -> Result<usize> {
    let (p1, p2) = u0.band();
    let mut violations = 0;
    let mid = 0.5 * (p1 + p2);
    let outside = p2 + 1.0;
    for (label, xi, criterion) in [
        ("s1_midpoint", mid, "slope in [-0.55, -0.45]"),
        ("s1_outside", outside, "slope <= -delta1 + 0.05"),
    ] {
        let samples: Vec<(f64, f64)> = sc
            .slope_t_grid
            .par_iter()
            .map(|&t| Ok((t, dyson::s1_eval(u0, t, 2.0 * t * xi, sc.quad_tol)?.norm())))
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_decay_slope(&samples)?;
        let pass = if label == "s1_midpoint" {
            (fit.slope + 0.5).abs() <= 0.05
        } else {
            fit.slope <= -sc.delta1 + 0.05
        };
        if !pass {
            violations += 1;
        }
        out.slopes.push(SlopeRow {
            label: label.into(),
            xi,
            slope: fit.slope,
            r2: fit.r2,
            n: fit.n,
            criterion: criterion.into(),
            pass,
        });
    }
    Ok(violations)
}

fn refined_expansion_check(
    sc: &Scenario,
    v: &BandFunction,
    u0: &BandFunction,
    w: &AmplitudeW,
    s2_report: Option<&dyson::ConeReport>,
    out: &mut RunOutput,
) -> Result<(usize, usize)> {
    let tv = TildeV::new(v)?;
    let mut cases = 0;
    let mut violations = 0;

    // positivity intervals with sampled evidence
    let intervals = amplitude::positivity_intervals(&tv, u0, sc.eps, sc.quad_tol)?;
    for iv in &intervals {
        cases += 1;
        if !(iv.min_sampled > 10.0 * sc.quad_tol) {
            violations += 1;
        }
    }
    out.positivity = intervals;

    // refined remainder bound on the admissible grid points, reusing the
    // packet values already computed for the cone sweep
    if let Some(report) = s2_report {
        let (a, b) = v.band();
        let (p1, p2) = u0.band();
        let admissible = amplitude::admissible_intervals(a, b, p1, p2, sc.eps);
        let (_, c2) = dyson::c_constants(sc.delta1, sc.delta2, a, b, p1, p2)?;
        let (_, c3) = amplitude::c3_constants(a, b, p1, p2, sc.eps)?;
        let norm_v4 = v.wkinf_norm(4)? * NORM_INFLATION;
        let norm_u5 = u0.wkinf_norm(5)? * NORM_INFLATION;
        let norm_tv = tv.w1inf_norm() * NORM_INFLATION;
        let norm_u1 = u0.wkinf_norm(1)? * NORM_INFLATION;
        for row in &report.rows {
            if !admissible
                .iter()
                .any(|&(lo, hi)| row.xi >= lo && row.xi <= hi)
            {
                continue;
            }
            cases += 1;
            let w1 = amplitude::w1_eval(&tv, u0, row.xi, sc.quad_tol)?;
            let leading = 0.5 / SQRT_PI
                * cis(-0.25 * PI)
                * cis(row.x * row.x / (4.0 * row.t))
                * w1
                / row.t.sqrt();
            let bound = c2 * norm_v4 * norm_u5 * row.t.powf(-sc.delta1)
                + c3 * norm_tv * norm_u1 * row.t.powf(-1.5);
            if (row.amp - leading).norm() > bound + 10.0 * sc.grid_tol {
                violations += 1;
            }
        }
    }

    // decay slope along the strongest positivity direction
    if let Some(best) = out
        .positivity
        .iter()
        .max_by(|a, b| a.min_sampled.partial_cmp(&b.min_sampled).unwrap())
    {
        cases += 1;
        let xi = 0.5 * (best.lo + best.hi);
        let samples: Vec<(f64, f64)> = sc
            .slope_t_grid
            .iter()
            .map(|&t| Ok((t, dyson::s2_eval(w, t, 2.0 * t * xi, sc.grid_tol)?.norm())))
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_decay_slope(&samples)?;
        let pass = (fit.slope + 0.5).abs() <= 0.07;
        if !pass {
            violations += 1;
        }
        out.slopes.push(SlopeRow {
            label: "s2_positivity".into(),
            xi,
            slope: fit.slope,
            r2: fit.r2,
            n: fit.n,
            criterion: "slope in [-0.57, -0.43]".into(),
            pass,
        });
    }
    Ok((cases, violations))
}

struct ExpansionCase {
    suite: &'static str,
    idx: usize,
    m: usize,
    p1: f64,
    width: f64,
    x0: f64,
    omega: f64,
    p0: f64,
    mode: Option<EstimateMode>,
}

fn expansion_bound_suites(sc: &Scenario, out: &mut RunOutput) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let tol = sc.quad_tol;
    let mut specs: Vec<ExpansionCase> = Vec::with_capacity(3 * sc.cases);
    for idx in 0..sc.cases {
        // one-term suite: any C¹ profile, stationary point inside or out
        let m = rng.gen_range(1..=3usize);
        let p1 = rng.gen_range(-4.0..4.0);
        let width = rng.gen_range(0.5..8.0);
        let x0 = rng.gen_range(-3.0..3.0);
        let omega = 10f64.powf(rng.gen_range(0.0..4.0));
        let p0 = rng.gen_range(p1 - 3.0..p1 + width + 3.0);
        specs.push(ExpansionCase {
            suite: "one_term",
            idx,
            m,
            p1,
            width,
            x0,
            omega,
            p0,
            mode: None,
        });
        // two-term suite: the four-fold integration by parts needs C⁴
        let p1 = rng.gen_range(-4.0..4.0);
        let width = rng.gen_range(0.5..8.0);
        let x0 = rng.gen_range(-3.0..3.0);
        let omega = 10f64.powf(rng.gen_range(0.0..4.0));
        let p0 = rng.gen_range(p1 - 3.0..p1 + width + 3.0);
        specs.push(ExpansionCase {
            suite: "two_term",
            idx,
            m: 3,
            p1,
            width,
            x0,
            omega,
            p0,
            mode: None,
        });
        // packaged estimates: cycle the four modes
        let mode = match idx % 4 {
            0 => EstimateMode::SupNorm,
            1 => EstimateMode::InsideBand,
            2 => EstimateMode::OutsideBand,
            _ => EstimateMode::OutsideBandC4,
        };
        let m = if mode == EstimateMode::OutsideBandC4 {
            3
        } else {
            rng.gen_range(1..=3usize)
        };
        let p1 = rng.gen_range(-4.0..4.0);
        let width = rng.gen_range(0.5..8.0);
        let x0 = rng.gen_range(-3.0..3.0);
        let omega = 10f64.powf(rng.gen_range(0.0..4.0));
        let p0 = match mode {
            EstimateMode::SupNorm => rng.gen_range(p1 - 3.0..p1 + width + 3.0),
            EstimateMode::InsideBand => rng.gen_range(p1..p1 + width),
            _ => {
                if rng.gen_bool(0.5) {
                    p1 + width + rng.gen_range(0.01..3.0)
                } else {
                    p1 - rng.gen_range(0.01..3.0)
                }
            }
        };
        specs.push(ExpansionCase {
            suite: "packaged",
            idx,
            m,
            p1,
            width,
            x0,
            omega,
            p0,
            mode: Some(mode),
        });
    }

    let rows: Vec<Result<BoundCaseRow>> = specs
        .par_iter()
        .map(|c| {
            let u = BandFunction::new(
                BandProfile::cos_power(c.m)?,
                c.p1,
                c.p1 + c.width,
                c.x0,
            )?;
            let (report, delta) = match c.mode {
                None if c.suite == "one_term" => (
                    expansion::verify_one_term(&u, c.omega, c.p0, sc.delta1, tol)?,
                    sc.delta1,
                ),
                None => (
                    expansion::verify_two_term(&u, c.omega, c.p0, sc.delta2, tol)?,
                    sc.delta2,
                ),
                Some(mode) => {
                    let delta = match mode {
                        EstimateMode::SupNorm => 0.5,
                        EstimateMode::OutsideBandC4 => sc.delta2,
                        _ => sc.delta1,
                    };
                    (
                        expansion::verify_packaged_estimate(
                            &u, c.omega, c.p0, mode, sc.delta1, sc.delta2, tol,
                        )?,
                        delta,
                    )
                }
            };
            Ok(BoundCaseRow {
                suite: c.suite.into(),
                idx: c.idx,
                order: c.m,
                band_lo: c.p1,
                band_hi: c.p1 + c.width,
                center: c.x0,
                omega: c.omega,
                point: c.p0,
                delta,
                lhs: report.remainder.norm(),
                bound: report.bound,
                margin: report.margin,
                pass: report.pass,
            })
        })
        .collect();
    let mut violations = 0;
    for row in rows {
        let row = row?;
        if !row.pass {
            violations += 1;
        }
        out.bound_cases.push(row);
    }
    Ok(violations)
}

fn phase_primitive_suite(sc: &Scenario, out: &mut RunOutput) -> Result<usize> {
    let mut violations = 0;
    // closed forms at the origin
    let mut idx = 0;
    for n in 1..=4usize {
        for omega in [0.5, 1.0, 10.0, 100.0] {
            let q = phase::phi_n(n, 0.0, omega, sc.quad_tol)?;
            let c = phase::phi_n_at_zero(n, omega)?;
            let lhs = (q - c).norm();
            let bound = 1e-8;
            let pass = lhs <= bound;
            if !pass {
                violations += 1;
            }
            out.bound_cases.push(BoundCaseRow {
                suite: "phi_closed_form".into(),
                idx,
                order: n,
                band_lo: 0.0,
                band_hi: 0.0,
                center: 0.0,
                omega,
                point: 0.0,
                delta: 0.5 * n as f64,
                lhs,
                bound,
                margin: bound - lhs,
                pass,
            });
            idx += 1;
        }
    }
    // randomized envelope suite
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ 0x00f1);
    let cases: Vec<(usize, f64, f64, f64)> = (0..sc.cases)
        .map(|_| {
            let n = rng.gen_range(1..=4usize);
            let delta = 0.5 * n as f64 + rng.gen_range(0.02..0.48);
            let s = rng.gen_range(1e-3..5.0f64);
            let omega = 10f64.powf(rng.gen_range(-0.301..4.0));
            (n, delta, s, omega)
        })
        .collect();
    let rows: Vec<Result<BoundCaseRow>> = cases
        .par_iter()
        .enumerate()
        .map(|(idx, &(n, delta, s, omega))| {
            let check = phase::check_phi_bound(n, delta, s, omega, sc.quad_tol)?;
            Ok(BoundCaseRow {
                suite: "phi_envelope".into(),
                idx,
                order: n,
                band_lo: 0.0,
                band_hi: 0.0,
                center: 0.0,
                omega,
                point: s,
                delta,
                lhs: check.lhs,
                bound: check.rhs,
                margin: check.rhs + 10.0 * sc.quad_tol - check.lhs,
                pass: check.lhs <= check.rhs + 10.0 * sc.quad_tol,
            })
        })
        .collect();
    for row in rows {
        let row = row?;
        if !row.pass {
            violations += 1;
        }
        out.bound_cases.push(row);
    }
    Ok(violations)
}

fn tail_suite(sc: &Scenario, out: &mut RunOutput) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ 0x7a11);
    let cases: Vec<(usize, f64, f64, f64, f64)> = (0..100)
        .map(|_| {
            let m = rng.gen_range(1..=3usize);
            let a = rng.gen_range(-4.0..2.0);
            let width = rng.gen_range(0.5..8.0);
            let x0 = rng.gen_range(-3.0..3.0);
            let c = rng.gen_range(0.2..4.0f64);
            (m, a, width, x0, c)
        })
        .collect();
    let rows: Vec<Result<BoundCaseRow>> = cases
        .par_iter()
        .enumerate()
        .map(|(idx, &(m, a, width, x0, c))| {
            let f = BandFunction::new(BandProfile::cos_power(m)?, a, a + width, x0)?;
            let check = f.verify_tail(c, sc.quad_tol)?;
            Ok(BoundCaseRow {
                suite: "tail".into(),
                idx,
                order: m,
                band_lo: a,
                band_hi: a + width,
                center: x0,
                omega: 0.0,
                point: c,
                delta: 0.0,
                lhs: check.measured,
                bound: check.bound,
                margin: check.bound + sc.quad_tol - check.measured,
                pass: check.pass,
            })
        })
        .collect();
    let mut violations = 0;
    for row in rows {
        let row = row?;
        if !row.pass {
            violations += 1;
        }
        out.bound_cases.push(row);
    }
    // width monotonicity at fixed c = 1: the measured tail decreases as
    // the band widens
    let mut last = f64::INFINITY;
    for (k, width) in [2.0, 4.0, 8.0, 16.0].into_iter().enumerate() {
        let f = BandFunction::new(BandProfile::cos_power(2)?, 0.0, width, 0.0)?;
        let check = f.verify_tail(1.0, sc.quad_tol)?;
        let pass = check.measured <= last + sc.quad_tol && check.pass;
        if !pass {
            violations += 1;
        }
        out.bound_cases.push(BoundCaseRow {
            suite: "tail_monotone".into(),
            idx: k,
            order: 2,
            band_lo: 0.0,
            band_hi: width,
            center: 0.0,
            omega: 0.0,
            point: 1.0,
            delta: 0.0,
            lhs: check.measured,
            bound: if last.is_finite() { last } else { check.bound },
            margin: if last.is_finite() {
                last - check.measured
            } else {
                check.bound - check.measured
            },
            pass,
        });
        last = check.measured;
    }
    Ok(violations)
}

fn residual_check(sc: &Scenario, u0: &BandFunction, v: &BandFunction) -> Result<ResidualTable> {
    let spec = &sc.solver;
    let half_width = if spec.half_width > 0.0 {
        spec.half_width
    } else {
        let (p1, p2) = u0.band();
        let (a, b) = v.band();
        let p_extent = p1
            .abs()
            .max(p2.abs())
            .max((p1 + a).abs())
            .max((p2 + b).abs());
        let needed = u0.center().abs() + 2.0 * p_extent * spec.t_final + 20.0;
        (needed / 8.0).ceil() * 8.0
    };
    let grid = SpectralGrid::new(half_width, spec.n_points, spec.dt)?;
    solver::dyson_residual(u0, v, &grid, spec.t_final, &spec.eps_list, 1e-8)
}

// ---------------------------------------------------------------------
// CSV rendering
// ---------------------------------------------------------------------

pub fn spacetime_csv(samples: &[SpacetimeSample]) -> String {
    let mut s = String::from(
        "t,x,xi,amp_s1_re,amp_s1_im,amp_s2_re,amp_s2_im,in_free_cone,in_shifted_cone,\
         leading_s1_re,leading_s1_im,leading_s2_re,leading_s2_im,bound_s1,bound_s2\n",
    );
    for r in samples {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f(r.t),
            fmt_f(r.x),
            fmt_f(r.xi),
            fmt_c(r.amp_s1),
            fmt_c(r.amp_s2),
            fmt_bool(r.in_free_cone),
            fmt_bool(r.in_shifted_cone),
            fmt_c(r.leading_s1),
            fmt_c(r.leading_s2),
            fmt_f(r.bound_s1),
            fmt_f(r.bound_s2),
        ));
    }
    s
}

pub fn slopes_csv(rows: &[SlopeRow]) -> String {
    let mut s = String::from("label,xi,slope,r2,n_samples,pass\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.label,
            fmt_f(r.xi),
            fmt_f(r.slope),
            fmt_f(r.r2),
            r.n,
            fmt_bool(r.pass),
        ));
    }
    s
}

pub fn bounds_csv(rows: &[BoundCaseRow]) -> String {
    let mut s = String::from(
        "suite,idx,order,band_lo,band_hi,center,omega,point,delta,lhs,bound,margin,pass\n",
    );
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.suite,
            r.idx,
            r.order,
            fmt_f(r.band_lo),
            fmt_f(r.band_hi),
            fmt_f(r.center),
            fmt_f(r.omega),
            fmt_f(r.point),
            fmt_f(r.delta),
            fmt_f(r.lhs),
            fmt_f(r.bound),
            fmt_f(r.margin),
            fmt_bool(r.pass),
        ));
    }
    s
}

pub fn residual_csv(table: &ResidualTable) -> String {
    let mut s = String::from("epsilon,residual\n");
    for r in &table.rows {
        s.push_str(&format!("{},{}\n", fmt_f(r.epsilon), fmt_f(r.residual)));
    }
    s
}

/// Human-readable run summary (the content of `summary.txt`).
pub fn summary_text(out: &RunOutput) -> String {
    let mut s = String::new();
    s.push_str(&format!("scenario: {}\n", out.scenario_name));
    if let Some(c) = &out.classification {
        s.push_str(&format!(
            "free cone edges:    x/t in [{:.6}, {:.6}]\n",
            c.free_edges.0, c.free_edges.1
        ));
        s.push_str(&format!(
            "shifted cone edges: x/t in [{:.6}, {:.6}]\n",
            c.shifted_edges.0, c.shifted_edges.1
        ));
        s.push_str(&format!(
            "interpretation: advanced={} retarded={} reflection={} acceleration={}\n",
            c.advanced_transmission, c.retarded_transmission, c.reflection, c.acceleration
        ));
    }
    if let Some(f) = out.localization_fraction {
        s.push_str(&format!(
            "free-cone localization at largest t: {:.4} (threshold {})\n",
            f, LOCALIZATION_THRESHOLD
        ));
    }
    for iv in &out.positivity {
        s.push_str(&format!(
            "positivity interval: ({:.6}, {:.6}), min sampled |W1| = {:.3e}\n",
            iv.lo, iv.hi, iv.min_sampled
        ));
    }
    for r in &out.slopes {
        s.push_str(&format!(
            "slope {}: xi={:.6} slope={:.4} r2={:.6} n={} [{}] {}\n",
            r.label,
            r.xi,
            r.slope,
            r.r2,
            r.n,
            r.criterion,
            if r.pass { "pass" } else { "FAIL" }
        ));
    }
    if let Some(t) = &out.residual {
        for row in &t.rows {
            s.push_str(&format!(
                "residual eps={:.4}: {:.6e}\n",
                row.epsilon, row.residual
            ));
        }
        s.push_str(&format!(
            "residual slope: {:.4} (r2={:.4}), free-case relative error {:.3e}\n",
            t.slope, t.r2, t.free_rel_err
        ));
    }
    for c in &out.check_summaries {
        s.push_str(&format!(
            "check {}: {} cases, {} violations\n",
            c.check.token(),
            c.cases,
            c.violations
        ));
    }
    s.push_str(&format!("total violations: {}\n", out.violations()));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::BandForm;

    #[test]
    fn fixture_validates() {
        let sc = Scenario::fixture();
        let v = sc.validate().unwrap();
        assert_eq!(v.initial.band(), (1.0, 2.0));
        assert_eq!(v.potential.as_ref().unwrap().band(), (-0.5, 0.5));
        assert_eq!(v.potential.as_ref().unwrap().form(), BandForm::Factored);
    }

    #[test]
    fn fixture_xi_grid_spans_both_cones() {
        let sc = Scenario::fixture();
        let grid = sc.effective_xi_grid();
        assert_eq!(grid.len(), 61);
        assert!((grid[0] - (-0.5)).abs() < 1e-12);
        assert!((grid[60] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut sc = Scenario::fixture();
        sc.delta1 = 1.0;
        assert!(sc.validate().is_err());
        let mut sc = Scenario::fixture();
        sc.delta2 = 2.5;
        assert!(sc.validate().is_err());
        let mut sc = Scenario::fixture();
        sc.eps = 0.5; // = (p2-p1)/2
        assert!(sc.validate().is_err());
        // 0 inside the initial band with interaction checks enabled
        let mut sc = Scenario::fixture();
        sc.initial.band_lo = -1.0;
        assert!(sc.validate().is_err());
        // dropping the interaction checks makes the same band acceptable
        sc.checks = [Check::FreeCone].into_iter().collect();
        assert!(sc.validate().is_ok());
        // potential needed for residual
        let mut sc = Scenario::fixture();
        sc.potential = None;
        assert!(sc.validate().is_err());
        sc.checks = [Check::FreeCone, Check::PhasePrimitives]
            .into_iter()
            .collect();
        assert!(sc.validate().is_ok());
    }

    #[test]
    fn empty_checks_gives_empty_summary() {
        let mut sc = Scenario::fixture();
        sc.checks = BTreeSet::new();
        let out = run(&sc.validate().unwrap()).unwrap();
        assert_eq!(out.violations(), 0);
        assert!(out.samples.is_empty());
        assert!(out.check_summaries.is_empty());
    }

    #[test]
    fn check_tokens_round_trip() {
        for c in Check::all() {
            assert_eq!(Check::parse(c.token()).unwrap(), c);
        }
        assert!(Check::parse("nope").is_err());
    }

    #[test]
    fn slope_fit_contract() {
        // exact power law recovered to machine precision
        let pts: Vec<(f64, f64)> = [1.0, 10.0, 31.6, 100.0, 316.0]
            .iter()
            .map(|&t: &f64| (t, t.powf(-0.5)))
            .collect();
        let fit = fit_decay_slope(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        // too few samples
        assert!(fit_decay_slope(&pts[..4]).is_err());
        // not enough decades
        let narrow: Vec<(f64, f64)> = [1.0, 2.0, 3.0, 4.0, 5.0]
            .iter()
            .map(|&t: &f64| (t, t.powf(-0.5)))
            .collect();
        assert!(fit_decay_slope(&narrow).is_err());
        // underflow: all samples below the floor
        let tiny: Vec<(f64, f64)> = [1.0, 10.0, 31.6, 100.0, 316.0]
            .iter()
            .map(|&t: &f64| (t, 1e-15))
            .collect();
        assert!(matches!(fit_decay_slope(&tiny), Err(Error::Unsupported(_))));
    }

    #[test]
    fn classification_cases() {
        let mk = |p1: f64, p2: f64, a: f64, b: f64| {
            let u =
                BandFunction::new(BandProfile::cos_power(3).unwrap(), p1, p2, 0.0).unwrap();
            let v =
                BandFunction::new(BandProfile::cos_power(3).unwrap(), a, b, 0.0).unwrap();
            classify_cones(&u, &v)
        };
        // symmetric band, p1 > b: advanced and retarded, no reflection
        let c = mk(1.0, 2.0, -0.5, 0.5);
        assert!(c.advanced_transmission && c.retarded_transmission && !c.reflection);
        assert_eq!(c.free_edges, (2.0, 4.0));
        assert_eq!(c.shifted_edges, (1.0, 5.0));
        // symmetric band, 0 < p1 < b: reflection
        let c = mk(0.5, 2.0, -1.0, 1.0);
        assert!(c.reflection);
        // strictly positive potential band: acceleration
        let c = mk(1.0, 2.0, 0.25, 0.75);
        assert!(c.acceleration && !c.retarded_transmission);
    }

    #[test]
    fn csv_headers_are_stable() {
        assert!(spacetime_csv(&[]).starts_with("t,x,xi,amp_s1_re"));
        assert!(slopes_csv(&[]).starts_with("label,xi,slope,r2,n_samples,pass"));
        assert!(bounds_csv(&[]).starts_with("suite,idx,order,band_lo"));
    }

    #[test]
    fn small_run_is_deterministic() {
        let mut sc = Scenario::fixture();
        sc.t_grid = vec![1.0, 10.0];
        sc.xi_points = 9;
        sc.cases = 5;
        sc.checks = [Check::FreeCone, Check::PhasePrimitives]
            .into_iter()
            .collect();
        let a = run(&sc.validate().unwrap()).unwrap();
        let b = run(&sc.validate().unwrap()).unwrap();
        assert_eq!(spacetime_csv(&a.samples), spacetime_csv(&b.samples));
        assert_eq!(bounds_csv(&a.bound_cases), bounds_csv(&b.bound_cases));
        assert_eq!(slopes_csv(&a.slopes), slopes_csv(&b.slopes));
        assert_eq!(a.violations(), 0);
        assert_eq!(b.violations(), 0);
    }
}
