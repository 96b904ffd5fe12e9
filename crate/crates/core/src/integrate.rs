//! Fixed-step integration of the base flow and of augmented (base plus
//! variational) systems.
//!
//! Pure base runs use velocity Verlet. Anything carrying a variational vector
//! goes through [`Rk4Stepper`], because the Jacobi spread equation couples to
//! `ξ̇` and is not of Newtonian form.
//!
//! Along every run two arc lengths are carried: the Jacobi one,
//! `s_J = ∫ 2T dt`, and the Eisenhart one, `s_E = κ t`, together with the
//! extra Eisenhart coordinate `q^{N+1} = κ²t/2 − ∫ L dt` (`C_0 = 0`).

use crate::error::{Error, Result};
use crate::systems::{Hamiltonian, PhaseState};

/// Norm used on the doubled variational vector `(ξ, ξ̇)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormKind {
    /// Plain Euclidean norm of `(ξ, ξ̇)`.
    #[default]
    Euclidean,
    /// `g_{ij}ξ^iξ^j + g_{ij}ξ̇^iξ̇^j` with the metric of the measure in use
    /// (mass matrix for tangent dynamics, `2(E − V)a` for the Jacobi spread).
    Metric,
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::Euclidean => "euclidean",
            NormKind::Metric => "metric",
        }
    }
}

/// Which integrator advances a plain base trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Verlet,
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Steps between recorded samples.
    pub record_stride: usize,
    /// Steps between variational renormalizations.
    pub renorm_interval: usize,
    /// Offset used by the finite-difference oracles.
    pub dtau: f64,
    /// Absolute kinetic-energy floor for Jacobi dynamics. `None` means
    /// `1e-6·|E|` for the orbit at hand.
    pub t_min_guard: Option<f64>,
    /// Eisenhart constant κ.
    pub kappa: f64,
    pub norm_kind: NormKind,
    /// Seed for the default initial variational vector.
    pub seed: u64,
    /// Relative secular energy drift above which a trajectory is flagged.
    pub energy_drift_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_max: 100.0,
            record_stride: 10,
            renorm_interval: 100,
            dtau: 1e-6,
            t_min_guard: None,
            kappa: 1.0,
            norm_kind: NormKind::Euclidean,
            seed: 20_240_901,
            energy_drift_tol: 1e-6,
        }
    }
}

/// Relative guard used when `t_min_guard` is not set explicitly.
pub const DEFAULT_GUARD_FRACTION: f64 = 1e-6;

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("run.dt", format!("must be finite and > 0, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(Error::config(
                "run.t_max",
                format!("must be finite and >= 0, got {}", self.t_max),
            ));
        }
        if !(self.t_max / self.dt).is_finite() || self.t_max / self.dt > 1e12 {
            return Err(Error::config("run.t_max", "t_max / dt is too large"));
        }
        if self.record_stride == 0 {
            return Err(Error::config("run.record_stride", "must be >= 1"));
        }
        if self.renorm_interval == 0 {
            return Err(Error::config("run.renorm_interval", "must be >= 1"));
        }
        if !(self.dtau.is_finite() && self.dtau > 0.0) {
            return Err(Error::config("run.dtau", format!("must be finite and > 0, got {}", self.dtau)));
        }
        if let Some(g) = self.t_min_guard {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::config("run.t_min_guard", format!("must be finite and >= 0, got {g}")));
            }
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::config("run.kappa", format!("must be finite and > 0, got {}", self.kappa)));
        }
        if !(self.energy_drift_tol.is_finite() && self.energy_drift_tol > 0.0) {
            return Err(Error::config("run.energy_drift_tol", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Number of fixed steps covering `[0, t_max]`.
    pub fn n_steps(&self) -> usize {
        let r = self.t_max / self.dt;
        // tolerate t_max values that are a whole number of steps up to rounding
        (r - 1e-9 * r.max(1.0)).ceil().max(0.0) as usize
    }

    pub fn guard_for(&self, energy: f64) -> f64 {
        self.t_min_guard
            .unwrap_or(DEFAULT_GUARD_FRACTION * energy.abs())
    }
}

/// Arc lengths carried along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArcAccumulator {
    /// `∫ 2T dt`, non-decreasing.
    pub s_jacobi: f64,
    /// `κ t`.
    pub s_eisenhart: f64,
    /// Eisenhart coordinate `q^{N+1}`.
    pub q_extra: f64,
}

/// Trapezoidal update of the arc accumulators over one step of length `dt`.
///
/// `l_prev`/`l_next` are Lagrangian values `T − V` at the step ends.
pub fn accumulate_arc(
    acc: ArcAccumulator,
    t_prev: f64,
    t_next: f64,
    l_prev: f64,
    l_next: f64,
    dt: f64,
    kappa: f64,
) -> Result<ArcAccumulator> {
    if t_prev < 0.0 || t_next < 0.0 {
        return Err(Error::Invariant(format!(
            "negative kinetic energy passed to arc accumulator ({t_prev}, {t_next})"
        )));
    }
    Ok(ArcAccumulator {
        s_jacobi: acc.s_jacobi + dt * (t_prev + t_next),
        s_eisenhart: acc.s_eisenhart + kappa * dt,
        q_extra: acc.q_extra + 0.5 * kappa * kappa * dt - 0.5 * dt * (l_prev + l_next),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: PhaseState,
    pub kinetic: f64,
    pub potential: f64,
    pub energy: f64,
    pub arc: ArcAccumulator,
}

impl Sample {
    fn new<H: Hamiltonian + ?Sized>(system: &H, state: PhaseState, arc: ArcAccumulator) -> Self {
        let kinetic = system.kinetic(&state.p);
        let potential = system.potential(&state.q);
        Self {
            state,
            kinetic,
            potential,
            energy: kinetic + potential,
            arc,
        }
    }

    pub fn t(&self) -> f64 {
        self.state.t
    }

    pub fn lagrangian(&self) -> f64 {
        self.kinetic - self.potential
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    pub kappa: f64,
    pub dt: f64,
    /// Relative secular energy drift: least-squares slope of `E(t)` times the
    /// run length, over `|E(0)|`. Bounded oscillations of a symplectic scheme
    /// do not contribute.
    pub energy_drift: f64,
    /// `max |E(t) − E(0)| / |E(0)|` over the samples.
    pub max_energy_deviation: f64,
    /// Set when `energy_drift` exceeds the configured tolerance.
    pub drift_flag: bool,
}

impl TrajectoryRecord {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("records always hold the initial sample")
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(Sample::t).collect()
    }
}

/// One velocity-Verlet step. `dt = 0` returns the state unchanged.
pub fn verlet_step<H: Hamiltonian + ?Sized>(
    system: &H,
    state: &PhaseState,
    dt: f64,
) -> Result<PhaseState> {
    state.validate(system)?;
    let n = system.n_dof();
    let mut q = state.q.clone();
    let mut p = state.p.clone();
    let mut force = vec![0.0; n];
    system.gradient_into(&q, &mut force);
    verlet_inplace(system, &mut q, &mut p, &mut force, dt, state.t)?;
    Ok(PhaseState::new(state.t + dt, q, p))
}

/// Advances `(q, p)` in place. `grad` must hold `∇V(q)` on entry and holds
/// `∇V` at the new position on exit.
fn verlet_inplace<H: Hamiltonian + ?Sized>(
    system: &H,
    q: &mut [f64],
    p: &mut [f64],
    grad: &mut [f64],
    dt: f64,
    t: f64,
) -> Result<()> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Blowup { t });
    }
    let masses = system.masses();
    for i in 0..q.len() {
        p[i] -= 0.5 * dt * grad[i];
        q[i] += dt * p[i] / masses[i];
    }
    system.gradient_into(q, grad);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Blowup { t: t + dt });
    }
    for i in 0..p.len() {
        p[i] -= 0.5 * dt * grad[i];
    }
    Ok(())
}

/// Reusable classical RK4 stepper for the joint vector `y = [q, p, aux]`.
///
/// The base part follows Hamilton's equations; `aux` follows a caller
/// supplied right-hand side `f(t, q, p, aux, aux_dot)`.
#[derive(Debug, Clone)]
pub struct Rk4Stepper {
    n: usize,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4Stepper {
    pub fn new(n_dof: usize, n_aux: usize) -> Self {
        let len = 2 * n_dof + n_aux;
        Self {
            n: n_dof,
            k: std::array::from_fn(|_| vec![0.0; len]),
            tmp: vec![0.0; len],
        }
    }

    fn derivative<H, F>(&self, system: &H, t: f64, y: &[f64], out: &mut [f64], aux_rhs: &mut F) -> Result<()>
    where
        H: Hamiltonian + ?Sized,
        F: FnMut(f64, &[f64], &[f64], &[f64], &mut [f64]) -> Result<()>,
    {
        let n = self.n;
        let (q, rest) = y.split_at(n);
        let (p, aux) = rest.split_at(n);
        let (dq, rest_out) = out.split_at_mut(n);
        let (dp, daux) = rest_out.split_at_mut(n);
        for ((d, pi), m) in dq.iter_mut().zip(p).zip(system.masses()) {
            *d = pi / m;
        }
        system.gradient_into(q, dp);
        dp.iter_mut().for_each(|f| *f = -*f);
        if !aux.is_empty() {
            aux_rhs(t, q, p, aux, daux)?;
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Blowup { t });
        }
        Ok(())
    }

    /// Advances `y` from `t` to `t + dt` in place.
    pub fn step<H, F>(&mut self, system: &H, t: f64, y: &mut [f64], dt: f64, mut aux_rhs: F) -> Result<()>
    where
        H: Hamiltonian + ?Sized,
        F: FnMut(f64, &[f64], &[f64], &[f64], &mut [f64]) -> Result<()>,
    {
        debug_assert_eq!(y.len(), self.tmp.len());
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);
        let result = (|| {
            self.derivative(system, t, y, &mut k[0], &mut aux_rhs)?;
            for (s, (a, b)) in tmp.iter_mut().zip(y.iter().zip(&k[0])) {
                *s = a + 0.5 * dt * b;
            }
            self.derivative(system, t + 0.5 * dt, &tmp, &mut k[1], &mut aux_rhs)?;
            for (s, (a, b)) in tmp.iter_mut().zip(y.iter().zip(&k[1])) {
                *s = a + 0.5 * dt * b;
            }
            self.derivative(system, t + 0.5 * dt, &tmp, &mut k[2], &mut aux_rhs)?;
            for (s, (a, b)) in tmp.iter_mut().zip(y.iter().zip(&k[2])) {
                *s = a + dt * b;
            }
            self.derivative(system, t + dt, &tmp, &mut k[3], &mut aux_rhs)?;
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
            }
            Ok(())
        })();
        self.k = k;
        self.tmp = tmp;
        result
    }
}

/// One RK4 step of the joint system (base flow plus `aux`).
pub fn rk4_augmented_step<H, F>(
    system: &H,
    state: &PhaseState,
    aux: &[f64],
    aux_rhs: F,
    dt: f64,
) -> Result<(PhaseState, Vec<f64>)>
where
    H: Hamiltonian + ?Sized,
    F: FnMut(f64, &[f64], &[f64], &[f64], &mut [f64]) -> Result<()>,
{
    state.validate(system)?;
    let n = system.n_dof();
    let mut y = Vec::with_capacity(2 * n + aux.len());
    y.extend_from_slice(&state.q);
    y.extend_from_slice(&state.p);
    y.extend_from_slice(aux);
    Rk4Stepper::new(n, aux.len()).step(system, state.t, &mut y, dt, aux_rhs)?;
    let aux_next = y.split_off(2 * n);
    let p = y.split_off(n);
    Ok((PhaseState::new(state.t + dt, y, p), aux_next))
}

/// Helper for callers with no auxiliary variables.
pub fn no_aux(_: f64, _: &[f64], _: &[f64], _: &[f64], _: &mut [f64]) -> Result<()> {
    Ok(())
}

/// Velocity-Verlet base run (see [`run_trajectory_with`]).
pub fn run_trajectory<H: Hamiltonian + ?Sized>(
    system: &H,
    initial: &PhaseState,
    config: &RunConfig,
) -> Result<TrajectoryRecord> {
    run_trajectory_with(system, initial, config, Scheme::Verlet)
}

/// Integrates the base flow from `initial` over `[t0, t0 + t_max]`, keeping a
/// sample every `record_stride` steps (plus the final step).
pub fn run_trajectory_with<H: Hamiltonian + ?Sized>(
    system: &H,
    initial: &PhaseState,
    config: &RunConfig,
    scheme: Scheme,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    initial.validate(system)?;
    let n = system.n_dof();
    let dt = config.dt;
    let steps = config.n_steps();

    let mut q = initial.q.clone();
    let mut p = initial.p.clone();
    let mut grad = vec![0.0; n];
    system.gradient_into(&q, &mut grad);
    let mut rk = Rk4Stepper::new(n, 0);
    let mut y = [q.as_slice(), p.as_slice()].concat();

    let mut acc = ArcAccumulator::default();
    let mut kin = system.kinetic(&p);
    let mut lag = kin - system.potential(&q);
    let mut samples = vec![Sample::new(system, initial.clone(), acc)];

    for step in 1..=steps {
        let t_prev = initial.t + (step - 1) as f64 * dt;
        match scheme {
            Scheme::Verlet => verlet_inplace(system, &mut q, &mut p, &mut grad, dt, t_prev)?,
            Scheme::Rk4 => {
                rk.step(system, t_prev, &mut y, dt, no_aux)?;
                q.copy_from_slice(&y[..n]);
                p.copy_from_slice(&y[n..]);
            }
        }
        let kin_next = system.kinetic(&p);
        let lag_next = kin_next - system.potential(&q);
        acc = accumulate_arc(acc, kin, kin_next, lag, lag_next, dt, config.kappa)?;
        kin = kin_next;
        lag = lag_next;
        if step % config.record_stride == 0 || step == steps {
            let t = initial.t + step as f64 * dt;
            samples.push(Sample::new(system, PhaseState::new(t, q.clone(), p.clone()), acc));
        }
    }

    let (energy_drift, max_energy_deviation) = energy_diagnostics(&samples);
    Ok(TrajectoryRecord {
        samples,
        kappa: config.kappa,
        dt,
        energy_drift,
        max_energy_deviation,
        drift_flag: energy_drift > config.energy_drift_tol,
    })
}

fn energy_diagnostics(samples: &[Sample]) -> (f64, f64) {
    let e0 = samples[0].energy;
    let scale = if e0.abs() > 0.0 { e0.abs() } else { 1.0 };
    let max_dev = samples
        .iter()
        .map(|s| (s.energy - e0).abs() / scale)
        .fold(0.0, f64::max);
    if samples.len() < 3 {
        return (max_dev, max_dev);
    }
    let n = samples.len() as f64;
    let t_mean = samples.iter().map(Sample::t).sum::<f64>() / n;
    let e_mean = samples.iter().map(|s| s.energy).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for s in samples {
        let dt = s.t() - t_mean;
        sxy += dt * (s.energy - e_mean);
        sxx += dt * dt;
    }
    let span = samples[samples.len() - 1].t() - samples[0].t();
    let drift = if sxx > 0.0 { (sxy / sxx * span).abs() / scale } else { 0.0 };
    (drift, max_dev)
}
