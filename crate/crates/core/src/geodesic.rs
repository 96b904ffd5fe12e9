//! Geometric divergence measures.
//!
//! Two metrics are handled:
//!
//! * the Jacobi (kinetic energy) metric `g_J = 2(E − V) a`, whose arc length
//!   obeys `ds/dt = 2T` and is therefore not affine in time. The geodesic
//!   spread `ξ_J` is integrated in `t` through the Cartesian form of the
//!   opened Jacobi–Levi-Civita equation (constant masses):
//!
//!   ```text
//!   ξ̈ⁿ = −aⁿᵏV,ₖₗξˡ − (1/T)( aⁿᵐV,ₘ{aᵢⱼq̇ⁱξ̇ʲ + V,ₗξˡ}
//!                         − q̇ⁿ{V,ᵢₗq̇ⁱξˡ + V,ⱼξ̇ʲ + (1/T)V,ᵢq̇ⁱV,ₗξˡ} )
//!   ```
//!
//! * the Eisenhart metric on `(t, q, q^{N+1})`,
//!   `ds² = −2V dt² + a_{ij}dq^i dq^j + 2 dt dq^{N+1}`, whose arc length is
//!   affine (`ds = κ dt`). Its spatial spread equations reduce to tangent
//!   dynamics; [`eisenhart_jlc_rhs`] evaluates them from the Christoffel
//!   symbols so the reduction can be checked numerically.
//!
//! The curvature tensor itself is never formed: everything goes through
//! Christoffel symbols and their first derivatives.

use nalgebra::{Complex, DMatrix};

use crate::error::{check_len, Error, Result};
use crate::integrate::{run_trajectory_with, RunConfig, Scheme};
use crate::systems::{Hamiltonian, PhaseState};
use crate::tangent::LyapunovSeries;
use crate::variational::{evolve, Scratch, VarOptions, VariationalFlow};

/// Returned instead of derivatives when the kinetic energy is below the guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardSignal {
    pub kinetic: f64,
    pub guard: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobiVariationalState {
    pub xi: Vec<f64>,
    pub xi_dot: Vec<f64>,
    pub log_sum: f64,
    pub renorm_count: usize,
    pub t_guard_hits: usize,
}

impl JacobiVariationalState {
    pub fn new(xi: Vec<f64>, xi_dot: Vec<f64>) -> Self {
        Self {
            xi,
            xi_dot,
            log_sum: 0.0,
            renorm_count: 0,
            t_guard_hits: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobiMetricValue {
    pub g: DMatrix<f64>,
    pub energy: f64,
    /// `E − V(q)`, i.e. the kinetic energy available at `q`.
    pub available: f64,
}

impl JacobiMetricValue {
    pub fn is_positive_definite(&self) -> bool {
        self.available > 0.0
    }

    /// The metric degenerates on the boundary `T = 0`.
    pub fn is_singular(&self) -> bool {
        self.available == 0.0
    }
}

/// `g_J = 2(E − V(q)) diag(m)`.
pub fn jacobi_metric<H: Hamiltonian + ?Sized>(system: &H, q: &[f64], energy: f64) -> Result<JacobiMetricValue> {
    check_len("q", system.n_dof(), q.len())?;
    let available = energy - system.potential(q);
    let diag: Vec<f64> = system.masses().iter().map(|m| 2.0 * available * m).collect();
    Ok(JacobiMetricValue {
        g: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)),
        energy,
        available,
    })
}

/// Jacobi spread acceleration. Fails with a [`GuardSignal`] when
/// `T < guard` or `T <= 0`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn jacobi_accel_into<H: Hamiltonian + ?Sized>(
    system: &H,
    q: &[f64],
    p: &[f64],
    xi: &[f64],
    xi_dot: &[f64],
    guard: f64,
    out: &mut [f64],
    scratch: &mut Scratch,
) -> Result<(), GuardSignal> {
    let kinetic = system.kinetic(p);
    if kinetic < guard || kinetic <= 0.0 {
        return Err(GuardSignal { kinetic, guard });
    }
    let n = q.len();
    let masses = system.masses();
    system.gradient_into(q, &mut scratch.grad);
    system.hessian_into(q, &mut scratch.hess);
    for k in 0..n {
        scratch.q_dot[k] = p[k] / masses[k];
        let row = &scratch.hess[k * n..(k + 1) * n];
        scratch.hess_xi[k] = row.iter().zip(xi).map(|(h, x)| h * x).sum();
    }
    let grad = &scratch.grad;
    let q_dot = &scratch.q_dot;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let grad_xi = dot(grad, xi);
    // a_{ij} q̇^i ξ̇^j + V_{,l} ξ^l
    let along_force = masses
        .iter()
        .zip(q_dot.iter().zip(xi_dot))
        .map(|(m, (v, w))| m * v * w)
        .sum::<f64>()
        + grad_xi;
    // V_{,il} q̇^i ξ^l + V_{,j} ξ̇^j + (1/T) V_{,i} q̇^i V_{,l} ξ^l
    let along_velocity =
        dot(q_dot, &scratch.hess_xi) + dot(grad, xi_dot) + dot(grad, q_dot) * grad_xi / kinetic;

    for k in 0..n {
        let tangent = -scratch.hess_xi[k] / masses[k];
        let extra = (grad[k] / masses[k]) * along_force - q_dot[k] * along_velocity;
        out[k] = tangent - extra / kinetic;
    }
    Ok(())
}

/// Result of [`jacobi_xi_rhs`].
#[derive(Debug, Clone, PartialEq)]
pub enum JacobiRhs {
    /// `(ξ̇_J, ξ̈_J)`.
    Derivatives(Vec<f64>, Vec<f64>),
    /// Kinetic energy below `t_min_guard`; no derivative is produced.
    Guard(GuardSignal),
}

pub fn jacobi_xi_rhs<H: Hamiltonian + ?Sized>(
    system: &H,
    state: &PhaseState,
    jv: &JacobiVariationalState,
    t_min_guard: f64,
) -> Result<JacobiRhs> {
    state.validate(system)?;
    let n = system.n_dof();
    check_len("xi", n, jv.xi.len())?;
    check_len("xi_dot", n, jv.xi_dot.len())?;
    let mut acc = vec![0.0; n];
    let mut scratch = Scratch::new(n);
    Ok(
        match jacobi_accel_into(system, &state.q, &state.p, &jv.xi, &jv.xi_dot, t_min_guard, &mut acc, &mut scratch) {
            Ok(()) => JacobiRhs::Derivatives(jv.xi_dot.clone(), acc),
            Err(g) => JacobiRhs::Guard(g),
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobiSeries {
    pub series: LyapunovSeries,
    pub t_guard_hits: usize,
    /// Time at which the guard stopped the run, if it did.
    pub singular_at: Option<f64>,
}

impl JacobiSeries {
    pub fn is_singular(&self) -> bool {
        self.singular_at.is_some()
    }
}

/// Benettin estimate driven by the Jacobi spread equation.
///
/// Both the per-time exponent and the per-arc-length one (`λ_G`, normalized
/// by `s_J`) are reported. If the kinetic energy drops below the guard the run
/// stops and the partial series is returned with `singular_at` set.
pub fn jacobi_exponent<H: Hamiltonian + ?Sized>(
    system: &H,
    initial: &PhaseState,
    jv0: &JacobiVariationalState,
    config: &RunConfig,
) -> Result<JacobiSeries> {
    let run = evolve(
        system,
        initial,
        &jv0.xi,
        &jv0.xi_dot,
        config,
        VarOptions {
            flow: VariationalFlow::Jacobi,
            renormalize: true,
            normalize_start: true,
            halt_on_guard: true,
        },
    )?;
    let singular_at = match run.halted {
        Some(Error::Singular { t, .. }) => Some(t),
        _ => None,
    };
    Ok(JacobiSeries {
        series: LyapunovSeries::from_run(&run, config.norm_kind),
        t_guard_hits: jv0.t_guard_hits + run.guard_hits,
        singular_at,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloquetResult {
    pub period: f64,
    pub flow: VariationalFlow,
    /// Monodromy in `(ξ, ξ̇)` coordinates, `2N × 2N`.
    pub monodromy: DMatrix<f64>,
    pub multipliers: Vec<Complex<f64>>,
    /// `ln|μ| / period`, sorted descending.
    pub exponents: Vec<f64>,
}

impl FloquetResult {
    pub fn max_exponent(&self) -> f64 {
        self.exponents[0]
    }
}

/// Tolerance on `‖y(T) − y(0)‖∞` for accepting an orbit as periodic.
pub const PERIODICITY_TOL: f64 = 1e-6;

/// Monodromy matrix of a variational flow over one period of a periodic base
/// orbit, assembled column by column from the `2N` unit initial conditions.
///
/// The step is adjusted down from `config.dt` so that a whole number of steps
/// spans the period exactly.
pub fn floquet_oracle<H: Hamiltonian + ?Sized>(
    system: &H,
    initial: &PhaseState,
    period: f64,
    flow: VariationalFlow,
    config: &RunConfig,
) -> Result<FloquetResult> {
    initial.validate(system)?;
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::Precondition(format!("period must be > 0, got {period}")));
    }
    let n = system.n_dof();
    let steps = (period / config.dt).ceil().max(1.0);
    let cfg = RunConfig {
        dt: period / steps,
        t_max: period,
        record_stride: usize::MAX,
        ..config.clone()
    };

    let base = run_trajectory_with(system, initial, &cfg, Scheme::Rk4)?;
    let end = &base.last().state;
    let mismatch = end
        .q
        .iter()
        .zip(&initial.q)
        .chain(end.p.iter().zip(&initial.p))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if mismatch > PERIODICITY_TOL {
        return Err(Error::Precondition(format!(
            "base orbit is not periodic with period {period}: mismatch {mismatch:e}"
        )));
    }

    let dim = 2 * n;
    let mut monodromy = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut unit = vec![0.0; dim];
        unit[j] = 1.0;
        let run = evolve(
            system,
            initial,
            &unit[..n],
            &unit[n..],
            &cfg,
            VarOptions {
                flow,
                renormalize: false,
                normalize_start: false,
                halt_on_guard: false,
            },
        )?;
        let last = run.samples.last().expect("evolve records the final step");
        for (i, v) in last.xi.iter().chain(&last.xi_dot).enumerate() {
            monodromy[(i, j)] = *v;
        }
    }

    let multipliers: Vec<Complex<f64>> = monodromy.clone().complex_eigenvalues().iter().copied().collect();
    let mut exponents: Vec<f64> = multipliers.iter().map(|m| m.norm().ln() / period).collect();
    exponents.sort_by(|a, b| b.total_cmp(a));
    Ok(FloquetResult {
        period,
        flow,
        monodromy,
        multipliers,
        exponents,
    })
}

/// Christoffel symbols of the Eisenhart metric on `(t, q¹…qᴺ, q^{N+1})` and
/// their first derivatives, for constant masses.
///
/// Index 0 is time, `1..=N` the configuration, `N + 1` the extra coordinate.
/// The nonzero symbols are `Γ^i_{00} = a^{ij}V_{,j}` and
/// `Γ^{N+1}_{0i} = Γ^{N+1}_{i0} = −V_{,i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EisenhartChristoffel {
    dim: usize,
    gamma: Vec<f64>,
    d_gamma: Vec<f64>,
}

impl EisenhartChristoffel {
    pub fn at<H: Hamiltonian + ?Sized>(system: &H, q: &[f64]) -> Self {
        let n = system.n_dof();
        let dim = n + 2;
        let extra = n + 1;
        let masses = system.masses();
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        system.gradient_into(q, &mut grad);
        system.hessian_into(q, &mut hess);

        let mut out = Self {
            dim,
            gamma: vec![0.0; dim * dim * dim],
            d_gamma: vec![0.0; dim * dim * dim * dim],
        };
        for i in 0..n {
            *out.gamma_mut(i + 1, 0, 0) = grad[i] / masses[i];
            *out.gamma_mut(extra, 0, i + 1) = -grad[i];
            *out.gamma_mut(extra, i + 1, 0) = -grad[i];
            for j in 0..n {
                let h = hess[i * n + j];
                *out.d_gamma_mut(i + 1, 0, 0, j + 1) = h / masses[i];
                *out.d_gamma_mut(extra, 0, i + 1, j + 1) = -h;
                *out.d_gamma_mut(extra, i + 1, 0, j + 1) = -h;
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Γ^k_{lm}`.
    pub fn gamma(&self, k: usize, l: usize, m: usize) -> f64 {
        self.gamma[(k * self.dim + l) * self.dim + m]
    }

    /// `∂_j Γ^k_{lm}`.
    pub fn d_gamma(&self, k: usize, l: usize, m: usize, j: usize) -> f64 {
        self.d_gamma[((k * self.dim + l) * self.dim + m) * self.dim + j]
    }

    fn gamma_mut(&mut self, k: usize, l: usize, m: usize) -> &mut f64 {
        &mut self.gamma[(k * self.dim + l) * self.dim + m]
    }

    fn d_gamma_mut(&mut self, k: usize, l: usize, m: usize, j: usize) -> &mut f64 {
        &mut self.d_gamma[((k * self.dim + l) * self.dim + m) * self.dim + j]
    }
}

/// Eisenhart metric `g_{μν}` at `q` on `(t, q, q^{N+1})`.
pub fn eisenhart_metric<H: Hamiltonian + ?Sized>(system: &H, q: &[f64]) -> DMatrix<f64> {
    let n = system.n_dof();
    let mut g = DMatrix::zeros(n + 2, n + 2);
    g[(0, 0)] = -2.0 * system.potential(q);
    g[(0, n + 1)] = 1.0;
    g[(n + 1, 0)] = 1.0;
    for (i, m) in system.masses().iter().enumerate() {
        g[(i + 1, i + 1)] = *m;
    }
    g
}

/// Spatial components of the opened Jacobi–Levi-Civita equation for the
/// Eisenhart metric, converted from arc length to time (`ds = κ dt`).
///
/// The spread is taken at fixed time, so `ξ^0 = 0`; the result should coincide
/// with the tangent-dynamics acceleration.
pub fn eisenhart_jlc_rhs<H: Hamiltonian + ?Sized>(
    system: &H,
    state: &PhaseState,
    xi: &[f64],
    xi_dot: &[f64],
    kappa: f64,
) -> Result<Vec<f64>> {
    state.validate(system)?;
    let n = system.n_dof();
    check_len("xi", n, xi.len())?;
    check_len("xi_dot", n, xi_dot.len())?;
    let dim = n + 2;
    let chris = EisenhartChristoffel::at(system, &state.q);

    let lagrangian = system.kinetic(&state.p) - system.potential(&state.q);
    // dq^μ/ds
    let mut u = vec![0.0; dim];
    u[0] = 1.0 / kappa;
    for (i, (p, m)) in state.p.iter().zip(system.masses()).enumerate() {
        u[i + 1] = p / m / kappa;
    }
    u[n + 1] = (0.5 * kappa * kappa - lagrangian) / kappa;
    // ξ^μ and dξ^μ/ds
    let mut spread = vec![0.0; dim];
    let mut spread_s = vec![0.0; dim];
    for i in 0..n {
        spread[i + 1] = xi[i];
        spread_s[i + 1] = xi_dot[i] / kappa;
    }

    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let k = i + 1;
        let mut acc = 0.0;
        for l in 0..dim {
            for j in 0..dim {
                acc -= 2.0 * chris.gamma(k, l, j) * u[l] * spread_s[j];
            }
        }
        for l in 0..dim {
            for m in 0..dim {
                for j in 0..dim {
                    acc -= chris.d_gamma(k, l, m, j) * u[l] * u[m] * spread[j];
                }
            }
        }
        *o = kappa * kappa * acc;
    }
    Ok(out)
}

/// Largest relative deviation of `ds²/dt²` from `κ²` over a recorded
/// trajectory, with `ds²/dt² = −2V + Σ m_i q̇_i² + 2 q̇^{N+1}` and
/// `q̇^{N+1} = κ²/2 − L`.
pub fn eisenhart_affine_check(record: &crate::integrate::TrajectoryRecord, kappa: f64, masses: &[f64]) -> f64 {
    let k2 = kappa * kappa;
    record
        .samples
        .iter()
        .map(|s| {
            let twice_kinetic: f64 = s.state.p.iter().zip(masses).map(|(p, m)| p * p / m).sum();
            let extra_rate = 0.5 * k2 - s.lagrangian();
            let ds2 = -2.0 * s.potential + twice_kinetic + 2.0 * extra_rate;
            (ds2 / k2 - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::run_trajectory;
    use crate::systems::{PotentialKind, SystemSpec};
    use crate::tangent::{tangent_rhs, TangentState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn osc() -> SystemSpec {
        SystemSpec::harmonic(&[1.0]).unwrap()
    }

    fn accel(rhs: JacobiRhs) -> Vec<f64> {
        match rhs {
            JacobiRhs::Derivatives(_, a) => a,
            JacobiRhs::Guard(g) => panic!("unexpected guard {g:?}"),
        }
    }

    #[test]
    fn metric_examples() {
        let m = jacobi_metric(&osc(), &[1.0], 0.5).unwrap();
        assert_eq!(m.g, DMatrix::zeros(1, 1));
        assert!(m.is_singular());

        let m = jacobi_metric(&osc(), &[0.0], 0.5).unwrap();
        assert_eq!(m.g, DMatrix::from_element(1, 1, 1.0));
        assert!(m.is_positive_definite());

        let heavy = SystemSpec::new(vec![2.0, 2.0], PotentialKind::Harmonic { omegas: vec![1.0, 1.0] }).unwrap();
        let m = jacobi_metric(&heavy, &[0.0, 0.0], 3.0).unwrap();
        assert_eq!(m.g, DMatrix::identity(2, 2) * 12.0);
    }

    /// Hand reduction for `V = q²/2`, `m = 1`: `ξ̈ = (2E/T − 1) ξ`.
    fn reduced_1dof(energy: f64, kinetic: f64, xi: f64) -> f64 {
        (2.0 * energy / kinetic - 1.0) * xi
    }

    #[test]
    fn one_dof_harmonic_reduces_to_closed_form() {
        let energy = 0.5;
        for phase in [0.0f64, 0.3, 1.0, 2.0, -2.7] {
            let q = phase.sin();
            let p = phase.cos();
            let st = PhaseState::new(0.0, vec![q], vec![p]);
            let jv = JacobiVariationalState::new(vec![0.7], vec![-1.3]);
            let a = accel(jacobi_xi_rhs(&osc(), &st, &jv, 0.0).unwrap());
            let expected = reduced_1dof(energy, 0.5 * p * p, 0.7);
            assert!((a[0] - expected).abs() < 1e-10 * expected.abs().max(1.0), "phase {phase}");
        }
        // at the minimum the sign is opposite to tangent dynamics
        let st = PhaseState::new(0.0, vec![0.0], vec![1.0]);
        let a = accel(jacobi_xi_rhs(&osc(), &st, &JacobiVariationalState::new(vec![1.0], vec![0.0]), 0.0).unwrap());
        assert!((a[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reduction_holds_at_random_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let amp: f64 = rng.gen_range(0.2..3.0);
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            let (q, p) = (amp * phase.sin(), amp * phase.cos());
            if 0.5 * p * p < 1e-3 {
                continue;
            }
            let xi: f64 = rng.gen_range(-1.0..1.0);
            let st = PhaseState::new(0.0, vec![q], vec![p]);
            let jv = JacobiVariationalState::new(vec![xi], vec![rng.gen_range(-1.0..1.0)]);
            let a = accel(jacobi_xi_rhs(&osc(), &st, &jv, 0.0).unwrap())[0];
            let expected = reduced_1dof(0.5 * amp * amp, 0.5 * p * p, xi);
            assert!((a - expected).abs() <= 1e-10 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn two_dof_hand_evaluation_at_minimum() {
        let s = SystemSpec::harmonic(&[1.0, 2.0]).unwrap();
        let st = PhaseState::new(0.0, vec![0.0, 0.0], vec![1.0, 1.0]);
        let jv = JacobiVariationalState::new(vec![1.0, 0.0], vec![0.0, 0.0]);
        assert_eq!(accel(jacobi_xi_rhs(&s, &st, &jv, 0.0).unwrap()), vec![0.0, 1.0]);
    }

    #[test]
    fn zero_spread_is_a_solution() {
        let st = PhaseState::new(0.0, vec![0.1, -0.2], vec![0.3, 0.2]);
        let jv = JacobiVariationalState::new(vec![0.0; 2], vec![0.0; 2]);
        let a = accel(jacobi_xi_rhs(&SystemSpec::henon_heiles(), &st, &jv, 0.0).unwrap());
        assert_eq!(a, vec![0.0, 0.0]);
    }

    #[test]
    fn guard_signal_below_floor_and_at_rest() {
        let jv = JacobiVariationalState::new(vec![1.0], vec![0.0]);
        let st = PhaseState::new(0.0, vec![1.0], vec![1e-4]);
        assert!(matches!(jacobi_xi_rhs(&osc(), &st, &jv, 1e-6).unwrap(), JacobiRhs::Guard(_)));
        let rest = PhaseState::new(0.0, vec![1.0], vec![0.0]);
        assert!(matches!(jacobi_xi_rhs(&osc(), &rest, &jv, 0.0).unwrap(), JacobiRhs::Guard(_)));
    }

    #[test]
    fn growth_rate_scales_like_inverse_kinetic_energy() {
        // |ξ̈|/|ξ| against T over two decades: log-log slope −1 ± 0.05
        let energy = 0.5;
        let ratio = |kinetic: f64| {
            let p = (2.0 * kinetic).sqrt();
            let q = (2.0 * (energy - kinetic)).sqrt();
            let st = PhaseState::new(0.0, vec![q], vec![p]);
            let jv = JacobiVariationalState::new(vec![1.0], vec![0.0]);
            accel(jacobi_xi_rhs(&osc(), &st, &jv, 0.0).unwrap())[0].abs()
        };
        let (t_hi, t_lo) = (1e-2, 1e-4);
        let slope = (ratio(t_lo).ln() - ratio(t_hi).ln()) / (t_lo.ln() - t_hi.ln());
        assert!((slope + 1.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn jacobi_flow_is_linear_in_spread() {
        let s = SystemSpec::henon_heiles();
        let st = PhaseState::new(0.0, vec![0.1, -0.2], vec![0.3, 0.25]);
        let base = JacobiVariationalState::new(vec![0.3, -0.4], vec![0.1, 0.2]);
        let a = accel(jacobi_xi_rhs(&s, &st, &base, 0.0).unwrap());
        for alpha in [2.0, -1.0, 1e-3] {
            let scaled = JacobiVariationalState::new(
                base.xi.iter().map(|x| alpha * x).collect(),
                base.xi_dot.iter().map(|x| alpha * x).collect(),
            );
            let b = accel(jacobi_xi_rhs(&s, &st, &scaled, 0.0).unwrap());
            for (x, y) in a.iter().zip(&b) {
                assert!((alpha * x - y).abs() <= 1e-15 * y.abs().max(1e-300) + 1e-17);
            }
        }
    }

    #[test]
    fn singular_flag_at_first_turning_point() {
        // q = sin t: first turning point at t = π/2
        let cfg = RunConfig {
            dt: 1e-3,
            t_max: 10.0,
            ..RunConfig::default()
        };
        let init = PhaseState::new(0.0, vec![0.0], vec![1.0]);
        let jv = JacobiVariationalState::new(vec![1.0], vec![0.0]);
        let out = jacobi_exponent(&osc(), &init, &jv, &cfg).unwrap();
        let t = out.singular_at.expect("guard must fire");
        assert!((t - PI / 2.0).abs() <= cfg.dt, "t = {t}");
        assert_eq!(out.t_guard_hits, 1);
        assert!(!out.series.points.is_empty());
    }

    #[test]
    fn christoffel_symbols_match_general_formula() {
        // Γ^k_{lm} = ½ g^{kr}(∂_m g_{rl} + ∂_l g_{rm} − ∂_r g_{lm}); only ∂_j g_00 = −2V_{,j} is nonzero
        let s = SystemSpec::new(vec![1.5, 0.5], PotentialKind::HenonHeiles).unwrap();
        let q = [0.2, -0.3];
        let n = 2;
        let dim = n + 2;
        let g = eisenhart_metric(&s, &q);
        let g_inv = g.clone().try_inverse().unwrap();
        let grad = crate::systems::potential_gradient(&s, &q).unwrap();
        let dg = |r: usize, l: usize, m: usize| -> f64 {
            if r == 0 && l == 0 && (1..=n).contains(&m) {
                -2.0 * grad[m - 1]
            } else {
                0.0
            }
        };
        let chris = EisenhartChristoffel::at(&s, &q);
        for k in 0..dim {
            for l in 0..dim {
                for m in 0..dim {
                    let general: f64 = (0..dim)
                        .map(|r| 0.5 * g_inv[(k, r)] * (dg(r, l, m) + dg(r, m, l) - dg(l, m, r)))
                        .sum();
                    assert!((general - chris.gamma(k, l, m)).abs() < 1e-14, "Γ^{k}_{l}{m}");
                }
            }
        }
    }

    #[test]
    fn eisenhart_spread_equals_tangent_dynamics() {
        let s = SystemSpec::henon_heiles();
        let st = PhaseState::new(0.0, vec![0.2, 0.1], vec![0.1, -0.3]);
        let ts = TangentState::new(vec![1.0, -2.0], vec![0.5, 0.25]);
        let tangent = tangent_rhs(&s, &st, &ts).unwrap().1;
        assert_eq!(eisenhart_jlc_rhs(&s, &st, &ts.xi, &ts.xi_dot, 1.0).unwrap(), tangent);
        let k2 = eisenhart_jlc_rhs(&s, &st, &ts.xi, &ts.xi_dot, 2.0).unwrap();
        for (a, b) in k2.iter().zip(&tangent) {
            assert!((a - b).abs() < 1e-14);
        }
        let osc_st = PhaseState::new(0.0, vec![0.3], vec![0.0]);
        assert_eq!(eisenhart_jlc_rhs(&osc(), &osc_st, &[1.0], &[0.0], 1.0).unwrap(), vec![-1.0]);
        assert_eq!(eisenhart_jlc_rhs(&s, &st, &[0.0; 2], &[0.0; 2], 1.0).unwrap(), vec![0.0; 2]);
    }

    #[test]
    fn affine_check_is_kappa_invariant() {
        let cfg = RunConfig {
            dt: 1e-3,
            t_max: 100.0,
            record_stride: 10,
            ..RunConfig::default()
        };
        let rec = run_trajectory(&osc(), &PhaseState::new(0.0, vec![1.0], vec![0.0]), &cfg).unwrap();
        let d1 = eisenhart_affine_check(&rec, 1.0, &[1.0]);
        let d2 = eisenhart_affine_check(&rec, 2.0, &[1.0]);
        assert!(d1 < 1e-8 && d2 < 1e-8, "{d1} {d2}");
    }

    fn commensurate() -> (SystemSpec, PhaseState) {
        (
            SystemSpec::harmonic(&[1.0, 2.0]).unwrap(),
            PhaseState::new(0.0, vec![1.0, 0.0], vec![0.0, 1.0]),
        )
    }

    #[test]
    fn tangent_monodromy_of_linear_oscillator_is_a_rotation() {
        let (s, init) = commensurate();
        let cfg = RunConfig {
            dt: 1e-3,
            ..RunConfig::default()
        };
        let f = floquet_oracle(&s, &init, 2.0 * PI, VariationalFlow::Tangent, &cfg).unwrap();
        assert_eq!(f.exponents.len(), 4);
        for e in &f.exponents {
            assert!(e.abs() < 1e-6, "{e}");
        }
    }

    #[test]
    fn monodromy_semigroup_property() {
        let (s, init) = commensurate();
        let cfg = RunConfig {
            dt: 1e-3,
            ..RunConfig::default()
        };
        let one = floquet_oracle(&s, &init, 2.0 * PI, VariationalFlow::Jacobi, &cfg).unwrap();
        let two = floquet_oracle(&s, &init, 4.0 * PI, VariationalFlow::Jacobi, &cfg).unwrap();
        let sq = &one.monodromy * &one.monodromy;
        let diff = (&two.monodromy - &sq).amax();
        assert!(diff < 1e-8, "max difference {diff}");
        // exponents of a symplectic-like flow pair up
        let e = &one.exponents;
        assert!((e[0] + e[3]).abs() < 1e-6 && (e[1] + e[2]).abs() < 1e-6, "{e:?}");
    }

    #[test]
    fn non_periodic_orbit_is_rejected() {
        let s = SystemSpec::harmonic(&[1.0, 2.0f64.sqrt()]).unwrap();
        let init = PhaseState::new(0.0, vec![1.0, 0.0], vec![0.0, 1.0]);
        let e = floquet_oracle(&s, &init, 2.0 * PI, VariationalFlow::Jacobi, &RunConfig::default()).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
    }
}
