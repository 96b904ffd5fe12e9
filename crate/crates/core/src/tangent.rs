//! Tangent dynamics and Lyapunov exponents.
//!
//! `ξ_T` is the variation `(∂q/∂τ)_t` taken at fixed time; with constant
//! masses it obeys `ξ̈^n = −(1/m_n) V_{,nl} ξ^l`. The Benettin estimator
//! integrates it alongside the base orbit and renormalizes `(ξ, ξ̇)`
//! periodically. Two independent cross-checks are provided: the naive
//! two-trajectory separation rate and a finite-difference oracle that
//! differentiates the flow map numerically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::integrate::{run_trajectory, run_trajectory_with, NormKind, RunConfig, Scheme};
use crate::systems::{Hamiltonian, PhaseState};
use crate::variational::{evolve, Scratch, VarOptions, VarRun, VariationalFlow};

/// Variational vector `ξ` with `ξ̇ = Δp / m`, plus the renormalization ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentState {
    pub xi: Vec<f64>,
    pub xi_dot: Vec<f64>,
    pub log_sum: f64,
    pub renorm_count: usize,
}

impl TangentState {
    pub fn new(xi: Vec<f64>, xi_dot: Vec<f64>) -> Self {
        Self {
            xi,
            xi_dot,
            log_sum: 0.0,
            renorm_count: 0,
        }
    }

    /// Deterministic pseudo-random unit vector in `(ξ, ξ̇)` space.
    pub fn seeded(n_dof: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..2 * n_dof).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let xi_dot = v.split_off(n_dof);
        Self::new(v, xi_dot)
    }

    /// Maps a phase-space direction `(δq, δp)` to `(ξ, ξ̇) = (δq, δp / m)`.
    pub fn from_direction(direction: &[f64], masses: &[f64]) -> Self {
        let n = masses.len();
        let xi = direction[..n].to_vec();
        let xi_dot = direction[n..].iter().zip(masses).map(|(d, m)| d / m).collect();
        Self::new(xi, xi_dot)
    }
}

/// One point of a finite-time exponent series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovPoint {
    pub t: f64,
    pub s_jacobi: f64,
    /// Exponent per unit time.
    pub lambda_t: f64,
    /// Exponent per unit Jacobi arc length.
    pub lambda_s: f64,
    pub renorm_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LyapunovSeries {
    pub points: Vec<LyapunovPoint>,
    pub norm: NormKind,
}

impl LyapunovSeries {
    pub fn last(&self) -> Option<&LyapunovPoint> {
        self.points.last()
    }

    /// Latest point with `point.t <= t` (up to rounding of the time grid).
    pub fn at(&self, t: f64) -> Option<&LyapunovPoint> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.points.iter().rev().find(|p| p.t <= t + tol)
    }

    /// Points with `lo <= t <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = &LyapunovPoint> {
        self.points.iter().filter(move |p| p.t >= lo && p.t <= hi)
    }

    pub(crate) fn from_run(run: &VarRun, norm: NormKind) -> Self {
        let points = run
            .samples
            .iter()
            .filter(|s| s.t > 0.0)
            .map(|s| LyapunovPoint {
                t: s.t,
                s_jacobi: s.s_jacobi,
                lambda_t: s.log_growth / s.t,
                lambda_s: if s.s_jacobi > 0.0 {
                    s.log_growth / s.s_jacobi
                } else {
                    f64::NAN
                },
                renorm_count: s.renorm_count,
            })
            .collect();
        Self { points, norm }
    }
}

pub(crate) fn tangent_accel_into<H: Hamiltonian + ?Sized>(
    system: &H,
    q: &[f64],
    xi: &[f64],
    out: &mut [f64],
    scratch: &mut Scratch,
) {
    let n = q.len();
    system.hessian_into(q, &mut scratch.hess);
    let masses = system.masses();
    for (k, o) in out.iter_mut().enumerate() {
        let row = &scratch.hess[k * n..(k + 1) * n];
        let s: f64 = row.iter().zip(xi).map(|(h, x)| h * x).sum();
        *o = -s / masses[k];
    }
}

/// Right-hand side of the tangent flow: returns `(ξ̇, ξ̈)`.
pub fn tangent_rhs<H: Hamiltonian + ?Sized>(
    system: &H,
    state: &PhaseState,
    ts: &TangentState,
) -> Result<(Vec<f64>, Vec<f64>)> {
    state.validate(system)?;
    let n = system.n_dof();
    check_len("xi", n, ts.xi.len())?;
    check_len("xi_dot", n, ts.xi_dot.len())?;
    let mut acc = vec![0.0; n];
    tangent_accel_into(system, &state.q, &ts.xi, &mut acc, &mut Scratch::new(n));
    Ok((ts.xi_dot.clone(), acc))
}

/// Benettin estimate of the largest Lyapunov exponent from tangent dynamics.
///
/// The starting vector is normalized in the configured norm. Every
/// `renorm_interval` steps the pair `(ξ, ξ̇)` is rescaled to unit norm and the
/// log of the growth factor is accumulated, so that
/// `λ(t) = (log_sum + ln‖(ξ, ξ̇)‖) / t`.
pub fn benettin_exponent<H: Hamiltonian + ?Sized>(
    system: &H,
    initial: &PhaseState,
    ts0: &TangentState,
    config: &RunConfig,
) -> Result<LyapunovSeries> {
    let run = evolve(
        system,
        initial,
        &ts0.xi,
        &ts0.xi_dot,
        config,
        VarOptions {
            flow: VariationalFlow::Tangent,
            renormalize: true,
            normalize_start: true,
            halt_on_guard: false,
        },
    )?;
    Ok(LyapunovSeries::from_run(&run, config.norm_kind))
}

/// Integrated tangent vector `ξ_T(t)` without renormalization, at the
/// recorded times.
pub fn tangent_flow<H: Hamiltonian + ?Sized>(
    system: &H,
    initial: &PhaseState,
    ts0: &TangentState,
    config: &RunConfig,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let run = evolve(
        system,
        initial,
        &ts0.xi,
        &ts0.xi_dot,
        config,
        VarOptions {
            flow: VariationalFlow::Tangent,
            renormalize: false,
            normalize_start: false,
            halt_on_guard: false,
        },
    )?;
    Ok(run.samples.into_iter().map(|s| (s.t, s.xi)).collect())
}

/// Naive exponent from the separation of two trajectories,
/// `λ(t) = ln(‖Δq(t)‖ / ‖Δq(0)‖) / t`.
///
/// For bounded systems this saturates: the separation can never exceed the
/// size of the accessible region, so `λ(t)` decays once it gets there.
pub fn two_trajectory_exponent<H: Hamiltonian + ?Sized>(
    system: &H,
    tau1: &PhaseState,
    tau2: &PhaseState,
    config: &RunConfig,
) -> Result<LyapunovSeries> {
    tau1.validate(system)?;
    tau2.validate(system)?;
    let d0 = distance(&tau1.q, &tau2.q);
    if d0 == 0.0 {
        return Err(Error::Precondition(
            "initial configurations coincide; separation ratio is undefined".into(),
        ));
    }
    let a = run_trajectory(system, tau1, config)?;
    let b = run_trajectory(system, tau2, config)?;
    let points = a
        .samples
        .iter()
        .zip(&b.samples)
        .filter(|(sa, _)| sa.t() > 0.0)
        .map(|(sa, sb)| {
            let growth = (distance(&sa.state.q, &sb.state.q) / d0).ln();
            LyapunovPoint {
                t: sa.t(),
                s_jacobi: sa.arc.s_jacobi,
                lambda_t: growth / sa.t(),
                lambda_s: growth / sa.arc.s_jacobi,
                renorm_count: 0,
            }
        })
        .collect();
    Ok(LyapunovSeries {
        points,
        norm: NormKind::Euclidean,
    })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Finite-difference stencil for the oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Difference {
    /// `[f(τ + h) − f(τ)] / h`, first order.
    Forward,
    /// `[f(τ + h) − f(τ − h)] / 2h`, second order.
    #[default]
    Central,
}

pub(crate) fn check_direction(direction: &[f64], n_dof: usize) -> Result<()> {
    check_len("direction", 2 * n_dof, direction.len())?;
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "perturbation direction must be a unit vector in (q, p) space, norm is {norm}"
        )));
    }
    Ok(())
}

/// `initial` displaced by `h · direction` in `(q, p)` space.
pub fn displaced(initial: &PhaseState, direction: &[f64], h: f64) -> PhaseState {
    let n = initial.n_dof();
    PhaseState::new(
        initial.t,
        initial.q.iter().zip(&direction[..n]).map(|(x, d)| x + h * d).collect(),
        initial.p.iter().zip(&direction[n..]).map(|(x, d)| x + h * d).collect(),
    )
}

/// Finite-difference estimate of `ξ_T = (∂q/∂τ)_t` along `direction`.
///
/// The displaced trajectories are integrated with RK4 so that the estimate
/// converges to the jointly integrated tangent flow as `dtau → 0`.
pub fn fd_tangent_oracle<H: Hamiltonian + ?Sized>(
    system: &H,
    initial: &PhaseState,
    direction: &[f64],
    config: &RunConfig,
    difference: Difference,
) -> Result<Vec<(f64, Vec<f64>)>> {
    initial.validate(system)?;
    check_direction(direction, system.n_dof())?;
    let h = config.dtau;
    let plus = run_trajectory_with(system, &displaced(initial, direction, h), config, Scheme::Rk4)?;
    let (minus, width) = match difference {
        Difference::Forward => (run_trajectory_with(system, initial, config, Scheme::Rk4)?, h),
        Difference::Central => (
            run_trajectory_with(system, &displaced(initial, direction, -h), config, Scheme::Rk4)?,
            2.0 * h,
        ),
    };
    Ok(plus
        .samples
        .iter()
        .zip(&minus.samples)
        .map(|(a, b)| {
            let xi = a.state.q.iter().zip(&b.state.q).map(|(x, y)| (x - y) / width).collect();
            (a.t(), xi)
        })
        .collect())
}
