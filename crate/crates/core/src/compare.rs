//! Fixed-arc-length finite differences, the variation identity linking the
//! geodesic spread to the tangent vector, and kinetic-energy spectra.
//!
//! With `s` an arc length along the orbit and `τ` the family parameter,
//!
//! ```text
//! ξ_G = ξ_T − q̇ (∂s/∂τ)_t / (∂s/∂t)_τ
//! ```
//!
//! where `(∂s/∂t)_τ = 2T` for the Jacobi metric and `κ` for Eisenhart. The
//! correction vanishes exactly when the arc length is affine in time.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::integrate::{run_trajectory_with, RunConfig, Sample, Scheme, TrajectoryRecord};
use crate::systems::{Hamiltonian, PhaseState};
use crate::tangent::{check_direction, displaced, tangent_flow, Difference, TangentState};

/// Floor on `‖ξ_T‖` in relative residuals.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Which arc length parameterizes the geodesics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArcKind {
    /// `ds = 2T dt`.
    #[default]
    Jacobi,
    /// `ds = κ dt`.
    Eisenhart,
}

impl ArcKind {
    pub fn name(self) -> &'static str {
        match self {
            ArcKind::Jacobi => "jacobi",
            ArcKind::Eisenhart => "eisenhart",
        }
    }

    fn of(self, sample: &Sample) -> f64 {
        match self {
            ArcKind::Jacobi => sample.arc.s_jacobi,
            ArcKind::Eisenhart => sample.arc.s_eisenhart,
        }
    }

    /// `(∂s/∂t)_τ`.
    fn rate(self, sample: &Sample, kappa: f64) -> f64 {
        match self {
            ArcKind::Jacobi => 2.0 * sample.kinetic,
            ArcKind::Eisenhart => kappa,
        }
    }
}

fn rk4_run<H: Hamiltonian + ?Sized>(
    system: &H,
    initial: &PhaseState,
    config: &RunConfig,
    stride: usize,
) -> Result<TrajectoryRecord> {
    let cfg = RunConfig {
        record_stride: stride,
        ..config.clone()
    };
    run_trajectory_with(system, initial, &cfg, Scheme::Rk4)
}

/// `(∂s/∂τ)_t` by finite differences of the arc length at matched times,
/// sampled every `record_stride` steps.
pub fn ds_dtau_fixed_t<H: Hamiltonian + ?Sized>(
    system: &H,
    initial: &PhaseState,
    direction: &[f64],
    config: &RunConfig,
    arc: ArcKind,
    difference: Difference,
) -> Result<Vec<(f64, f64)>> {
    initial.validate(system)?;
    check_direction(direction, system.n_dof())?;
    let h = config.dtau;
    let plus = rk4_run(system, &displaced(initial, direction, h), config, config.record_stride)?;
    let (minus, width) = match difference {
        Difference::Forward => (rk4_run(system, initial, config, config.record_stride)?, h),
        Difference::Central => (
            rk4_run(system, &displaced(initial, direction, -h), config, config.record_stride)?,
            2.0 * h,
        ),
    };
    Ok(plus
        .samples
        .iter()
        .zip(&minus.samples)
        .map(|(a, b)| (a.t(), (arc.of(a) - arc.of(b)) / width))
        .collect())
}

/// One point of the fixed-arc-length spread.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadPoint {
    /// Time on the reference orbit at which `s` is reached.
    pub t: f64,
    pub s: f64,
    pub xi: Vec<f64>,
}

/// Dense record that can be evaluated at any arc length inside its range.
struct ArcInterpolant<'a> {
    record: &'a TrajectoryRecord,
    masses: &'a [f64],
    arc: ArcKind,
}

impl ArcInterpolant<'_> {
    fn s_range(&self) -> (f64, f64) {
        let s = &self.record.samples;
        (self.arc.of(&s[0]), self.arc.of(&s[s.len() - 1]))
    }

    /// Configuration at arc length `target`, from cubic Hermite interpolation
    /// in `t` of both `s(t)` (slopes `ds/dt`) and `q(t)` (slopes `p/m`).
    fn q_at(&self, target: f64) -> Option<Vec<f64>> {
        let samples = &self.record.samples;
        let (lo, hi) = self.s_range();
        if !(lo..=hi).contains(&target) {
            return None;
        }
        let kappa = self.record.kappa;
        let j = samples
            .partition_point(|x| self.arc.of(x) <= target)
            .clamp(1, samples.len() - 1);
        let (a, b) = (&samples[j - 1], &samples[j]);
        let h = b.t() - a.t();
        let (sa, sb) = (self.arc.of(a), self.arc.of(b));
        let (da, db) = (self.arc.rate(a, kappa) * h, self.arc.rate(b, kappa) * h);
        let s_of = |u: f64| hermite(u, sa, sb, da, db);

        let (mut u0, mut u1) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (u0 + u1);
            if s_of(mid) < target {
                u0 = mid;
            } else {
                u1 = mid;
            }
        }
        let u = 0.5 * (u0 + u1);
        Some(
            (0..self.masses.len())
                .map(|i| {
                    let va = a.state.p[i] / self.masses[i] * h;
                    let vb = b.state.p[i] / self.masses[i] * h;
                    hermite(u, a.state.q[i], b.state.q[i], va, vb)
                })
                .collect(),
        )
    }
}

/// Cubic Hermite on `[0, 1]` with endpoint values and scaled slopes.
fn hermite(u: f64, ya: f64, yb: f64, da: f64, db: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * ya + (u3 - 2.0 * u2 + u) * da + (-2.0 * u3 + 3.0 * u2) * yb + (u3 - u2) * db
}

fn require_monotone<H: Hamiltonian + ?Sized>(
    record: &TrajectoryRecord,
    arc: ArcKind,
    guard: f64,
    system: &H,
) -> Result<()> {
    if arc == ArcKind::Eisenhart {
        return Ok(());
    }
    if let Some(s) = record.samples.iter().find(|s| s.kinetic < guard || s.kinetic <= 0.0) {
        return Err(Error::Precondition(format!(
            "kinetic energy {:e} below guard {guard:e} at t = {} (n_dof = {}); arc length is not invertible",
            s.kinetic,
            s.t(),
            system.n_dof()
        )));
    }
    Ok(())
}

/// Finite-difference geodesic spread at fixed arc length,
/// `ξ_G(s) = [q(s, τ + h) − q(s, τ − h)] / 2h` (or one-sided).
///
/// The grid is the reference orbit's recorded samples; each point carries the
/// time at which the reference orbit reaches that `s`. Points whose arc length
/// is not reached by a displaced orbit are dropped from the end.
pub fn fd_geodesic_spread<H: Hamiltonian + ?Sized>(
    system: &H,
    initial: &PhaseState,
    direction: &[f64],
    config: &RunConfig,
    arc: ArcKind,
    difference: Difference,
) -> Result<Vec<SpreadPoint>> {
    initial.validate(system)?;
    check_direction(direction, system.n_dof())?;
    let h = config.dtau;
    let guard = config.guard_for(system.energy(&initial.q, &initial.p));

    let reference = rk4_run(system, initial, config, config.record_stride)?;
    let plus = rk4_run(system, &displaced(initial, direction, h), config, 1)?;
    let minus = match difference {
        Difference::Forward => None,
        Difference::Central => Some(rk4_run(system, &displaced(initial, direction, -h), config, 1)?),
    };
    for rec in std::iter::once(&plus).chain(minus.as_ref()) {
        require_monotone(rec, arc, guard, system)?;
    }
    require_monotone(&reference, arc, guard, system)?;

    let masses = system.masses();
    let interp = |record| ArcInterpolant { record, masses, arc };
    let plus_i = interp(&plus);
    let minus_i = minus.as_ref().map(interp);

    let mut out = Vec::with_capacity(reference.samples.len());
    for sample in &reference.samples {
        let s = arc.of(sample);
        let Some(qp) = plus_i.q_at(s) else { break };
        let xi = match &minus_i {
            Some(mi) => {
                let Some(qm) = mi.q_at(s) else { break };
                qp.iter().zip(&qm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
            }
            None => qp.iter().zip(&sample.state.q).map(|(a, b)| (a - b) / h).collect(),
        };
        out.push(SpreadPoint { t: sample.t(), s, xi });
    }
    Ok(out)
}

/// Ingredients and per-time residual of the variation identity on one orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadComparison {
    pub arc: ArcKind,
    pub times: Vec<f64>,
    pub s_jacobi: Vec<f64>,
    pub xi_t: Vec<Vec<f64>>,
    pub xi_g_fd: Vec<Vec<f64>>,
    pub ds_dtau: Vec<f64>,
    /// `q̇ (∂s/∂τ)_t / (∂s/∂t)_τ`.
    pub correction: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl SpreadComparison {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Residuals of the deliberately wrong identity `ξ_G = ξ_G − correction`
    /// (the tangent vector replaced by the spread itself), normalized the
    /// same way. These stay O(1) whenever the correction is active.
    pub fn negative_control_residuals(&self) -> Vec<f64> {
        self.correction
            .iter()
            .zip(&self.xi_t)
            .map(|(c, xt)| norm(c) / norm(xt).max(RESIDUAL_FLOOR))
            .collect()
    }

    pub fn correction_norms(&self) -> Vec<f64> {
        self.correction.iter().map(|c| norm(c)).collect()
    }

    pub fn xi_t_norms(&self) -> Vec<f64> {
        self.xi_t.iter().map(|c| norm(c)).collect()
    }

    pub fn xi_g_fd_norms(&self) -> Vec<f64> {
        self.xi_g_fd.iter().map(|c| norm(c)).collect()
    }
}

/// Evaluates `‖ξ_G^FD − [ξ_T − q̇ (∂s/∂τ)_t / (∂s/∂t)_τ]‖ / max(‖ξ_T‖, ε)`
/// along the recorded samples of one orbit.
///
/// `ξ_T` comes from the integrated tangent flow started at
/// `(ξ, ξ̇) = (δq, δp/m)` for `direction = (δq, δp)`; the other two
/// ingredients are finite differences with the same `dtau` and stencil.
pub fn relation_residual<H: Hamiltonian + ?Sized>(
    system: &H,
    initial: &PhaseState,
    direction: &[f64],
    config: &RunConfig,
    arc: ArcKind,
    difference: Difference,
) -> Result<SpreadComparison> {
    let spread = fd_geodesic_spread(system, initial, direction, config, arc, difference)?;
    let ds = ds_dtau_fixed_t(system, initial, direction, config, arc, difference)?;
    let reference = rk4_run(system, initial, config, config.record_stride)?;
    let xi_t = tangent_flow(
        system,
        initial,
        &TangentState::from_direction(direction, system.masses()),
        config,
    )?;

    let n = spread.len();
    if ds.len() < n || xi_t.len() < n || reference.samples.len() < n {
        return Err(Error::Internal("comparison grids have different lengths".into()));
    }
    let masses = system.masses();
    let mut out = SpreadComparison {
        arc,
        times: Vec::with_capacity(n),
        s_jacobi: Vec::with_capacity(n),
        xi_t: Vec::with_capacity(n),
        xi_g_fd: Vec::with_capacity(n),
        ds_dtau: Vec::with_capacity(n),
        correction: Vec::with_capacity(n),
        residuals: Vec::with_capacity(n),
    };
    for (k, point) in spread.into_iter().enumerate() {
        let sample = &reference.samples[k];
        let (t_ds, ds_k) = ds[k];
        let (t_xi, ref xt) = xi_t[k];
        let tol = 1e-9 * point.t.abs().max(1.0);
        if (t_ds - point.t).abs() > tol || (t_xi - point.t).abs() > tol || (sample.t() - point.t).abs() > tol {
            return Err(Error::Internal(format!(
                "comparison grids disagree at index {k}: {} / {t_ds} / {t_xi}",
                point.t
            )));
        }
        let rate = arc.rate(sample, config.kappa);
        let correction: Vec<f64> = sample
            .state
            .p
            .iter()
            .zip(masses)
            .map(|(p, m)| p / m * ds_k / rate)
            .collect();
        let diff: Vec<f64> = point
            .xi
            .iter()
            .zip(xt)
            .zip(&correction)
            .map(|((g, t), c)| g - (t - c))
            .collect();
        out.residuals.push(norm(&diff) / norm(xt).max(RESIDUAL_FLOOR));
        out.times.push(point.t);
        out.s_jacobi.push(sample.arc.s_jacobi);
        out.xi_t.push(xt.clone());
        out.xi_g_fd.push(point.xi);
        out.ds_dtau.push(ds_k);
        out.correction.push(correction);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    None,
    #[default]
    Hann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Angular frequencies of bins `0..=N/2`.
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Angular frequency of the largest positive-frequency bin (0 if dc-only).
    pub peak_frequency: f64,
    /// No positive-frequency content above the numerical floor.
    pub dc_only: bool,
}

impl SpectrumReport {
    pub fn bin_width(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    /// Local maxima over positive frequencies, strongest first.
    pub fn peaks(&self, min_relative: f64) -> Vec<f64> {
        let top = self.amplitudes.iter().skip(1).copied().fold(0.0, f64::max);
        let a = &self.amplitudes;
        let mut found: Vec<(f64, f64)> = (1..a.len().saturating_sub(1))
            .filter(|&k| a[k] >= a[k - 1] && a[k] > a[k + 1] && a[k] >= min_relative * top)
            .map(|k| (a[k], self.frequencies[k]))
            .collect();
        found.sort_by(|x, y| y.0.total_cmp(&x.0));
        found.into_iter().map(|(_, f)| f).collect()
    }
}

pub const MIN_SPECTRUM_SAMPLES: usize = 1024;

/// Magnitude spectrum of a uniformly sampled real signal (mean removed).
pub fn spectrum_peak(signal: &[f64], dt: f64, window: Window) -> Result<SpectrumReport> {
    let n = signal.len();
    if n < MIN_SPECTRUM_SAMPLES {
        return Err(Error::Precondition(format!(
            "spectrum needs at least {MIN_SPECTRUM_SAMPLES} samples, got {n}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::config("dt", format!("must be > 0, got {dt}")));
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let weights: Vec<f64> = match window {
        Window::None => vec![1.0; n],
        Window::Hann => (0..n)
            .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
            .collect(),
    };
    let mut buf: Vec<Complex<f64>> = signal
        .iter()
        .zip(&weights)
        .map(|(x, w)| Complex::new((x - mean) * w, 0.0))
        .collect();
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    fft.process(&mut buf);

    let gain: f64 = weights.iter().sum();
    let half = n / 2;
    let bin = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let frequencies: Vec<f64> = (0..=half).map(|k| k as f64 * bin).collect();
    let amplitudes: Vec<f64> = buf[..=half].iter().map(|c| 2.0 * c.norm() / gain).collect();

    let scale = signal.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (k_peak, a_peak) = amplitudes
        .iter()
        .enumerate()
        .skip(1)
        .fold((0, 0.0), |best, (k, &a)| if a > best.1 { (k, a) } else { best });
    let dc_only = a_peak <= 1e-10 * scale.max(f64::MIN_POSITIVE);
    Ok(SpectrumReport {
        peak_frequency: if dc_only { 0.0 } else { frequencies[k_peak] },
        frequencies,
        amplitudes,
        dc_only,
    })
}

/// Least-squares line `y = a + b x`; returns `(slope, intercept, r²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len().min(ys.len()) as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}
