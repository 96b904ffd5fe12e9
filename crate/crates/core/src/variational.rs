//! Joint integration of the base flow with a second-order linear variational
//! equation for `ξ`, with optional Benettin renormalization.

use crate::error::{Error, Result};
use crate::geodesic::jacobi_accel_into;
use crate::integrate::{accumulate_arc, ArcAccumulator, NormKind, Rk4Stepper, RunConfig};
use crate::systems::{Hamiltonian, PhaseState};
use crate::tangent::tangent_accel_into;

/// Which linearized dynamics drives `ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariationalFlow {
    /// `ξ̈ = −a⁻¹ Hess V ξ`.
    Tangent,
    /// Jacobi-metric geodesic spread, written in time.
    Jacobi,
}

impl VariationalFlow {
    pub fn name(self) -> &'static str {
        match self {
            VariationalFlow::Tangent => "tangent",
            VariationalFlow::Jacobi => "jacobi",
        }
    }
}

/// Scratch buffers shared by the acceleration kernels.
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub hess_xi: Vec<f64>,
    pub q_dot: Vec<f64>,
}

impl Scratch {
    pub fn new(n: usize) -> Self {
        Self {
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
            hess_xi: vec![0.0; n],
            q_dot: vec![0.0; n],
        }
    }
}

/// Everything a kernel needs besides the current point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FlowContext {
    pub flow: VariationalFlow,
    pub guard: f64,
}

impl FlowContext {
    #[allow(clippy::too_many_arguments)]
    pub fn accel<H: Hamiltonian + ?Sized>(
        &self,
        system: &H,
        t: f64,
        q: &[f64],
        p: &[f64],
        xi: &[f64],
        xi_dot: &[f64],
        out: &mut [f64],
        scratch: &mut Scratch,
    ) -> Result<()> {
        match self.flow {
            VariationalFlow::Tangent => {
                tangent_accel_into(system, q, xi, out, scratch);
                Ok(())
            }
            VariationalFlow::Jacobi => {
                jacobi_accel_into(system, q, p, xi, xi_dot, self.guard, out, scratch).map_err(|g| {
                    Error::Singular {
                        t,
                        kinetic: g.kinetic,
                        guard: g.guard,
                    }
                })
            }
        }
    }
}

/// Norm of `(ξ, ξ̇)` at configuration `q`.
pub(crate) fn pair_norm<H: Hamiltonian + ?Sized>(
    system: &H,
    kind: NormKind,
    flow: VariationalFlow,
    energy: f64,
    q: &[f64],
    xi: &[f64],
    xi_dot: &[f64],
) -> f64 {
    match kind {
        NormKind::Euclidean => xi
            .iter()
            .chain(xi_dot)
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt(),
        NormKind::Metric => {
            let conformal = match flow {
                VariationalFlow::Tangent => 1.0,
                VariationalFlow::Jacobi => 2.0 * (energy - system.potential(q)),
            };
            let s: f64 = system
                .masses()
                .iter()
                .zip(xi.iter().zip(xi_dot))
                .map(|(m, (a, b))| m * (a * a + b * b))
                .sum();
            (conformal * s).max(0.0).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct VarSample {
    pub t: f64,
    pub s_jacobi: f64,
    pub state: PhaseState,
    pub xi: Vec<f64>,
    pub xi_dot: Vec<f64>,
    /// `log_sum + ln‖(ξ, ξ̇)‖`: log growth since the (normalized) start.
    pub log_growth: f64,
    pub renorm_count: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct VarRun {
    pub samples: Vec<VarSample>,
    pub log_sum: f64,
    pub renorm_count: usize,
    /// Steps on which the Jacobi guard fired (0 or 1: runs stop on the first).
    pub guard_hits: usize,
    /// Set when the run stopped early on the Jacobi guard.
    pub halted: Option<Error>,
}

pub(crate) struct VarOptions {
    pub flow: VariationalFlow,
    pub renormalize: bool,
    /// Normalize `(ξ₀, ξ̇₀)` to unit norm before starting.
    pub normalize_start: bool,
    /// Stop on the guard instead of returning the error.
    pub halt_on_guard: bool,
}

/// Integrates base + variational flow with RK4, recording every
/// `record_stride` steps and at the last step.
pub(crate) fn evolve<H: Hamiltonian + ?Sized>(
    system: &H,
    initial: &PhaseState,
    xi0: &[f64],
    xi_dot0: &[f64],
    config: &RunConfig,
    opts: VarOptions,
) -> Result<VarRun> {
    config.validate()?;
    initial.validate(system)?;
    let n = system.n_dof();
    crate::error::check_len("xi", n, xi0.len())?;
    crate::error::check_len("xi_dot", n, xi_dot0.len())?;

    let energy = system.energy(&initial.q, &initial.p);
    let ctx = FlowContext {
        flow: opts.flow,
        guard: match opts.flow {
            VariationalFlow::Tangent => f64::NEG_INFINITY,
            VariationalFlow::Jacobi => config.guard_for(energy),
        },
    };
    let norm_of = |y: &[f64]| {
        pair_norm(
            system,
            config.norm_kind,
            opts.flow,
            energy,
            &y[..n],
            &y[2 * n..3 * n],
            &y[3 * n..],
        )
    };

    let mut y = Vec::with_capacity(4 * n);
    y.extend_from_slice(&initial.q);
    y.extend_from_slice(&initial.p);
    y.extend_from_slice(xi0);
    y.extend_from_slice(xi_dot0);

    let mut log_sum = 0.0;
    let n0 = norm_of(&y);
    if opts.normalize_start {
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(Error::Precondition(
                "initial variational vector must be nonzero".into(),
            ));
        }
        y[2 * n..].iter_mut().for_each(|x| *x /= n0);
    } else if n0 > 0.0 {
        log_sum = -n0.ln();
    }

    let mut run = VarRun {
        samples: Vec::new(),
        log_sum,
        renorm_count: 0,
        guard_hits: 0,
        halted: None,
    };
    let mut scratch = Scratch::new(n);
    let record = |y: &[f64], t: f64, acc: &ArcAccumulator, run: &mut VarRun| {
        let norm = norm_of(y);
        run.samples.push(VarSample {
            t,
            s_jacobi: acc.s_jacobi,
            state: PhaseState::new(t, y[..n].to_vec(), y[n..2 * n].to_vec()),
            xi: y[2 * n..3 * n].to_vec(),
            xi_dot: y[3 * n..].to_vec(),
            log_growth: run.log_sum + norm.ln(),
            renorm_count: run.renorm_count,
        });
    };

    // the guard also applies to the starting point
    if let Err(e) = ctx.accel(
        system,
        initial.t,
        &initial.q,
        &initial.p,
        xi0,
        xi_dot0,
        &mut vec![0.0; n],
        &mut scratch,
    ) {
        return match e {
            Error::Singular { .. } if opts.halt_on_guard => {
                run.guard_hits = 1;
                run.halted = Some(e);
                record(&y, initial.t, &ArcAccumulator::default(), &mut run);
                Ok(run)
            }
            e => Err(e),
        };
    }

    let mut acc = ArcAccumulator::default();
    record(&y, initial.t, &acc, &mut run);
    let mut stepper = Rk4Stepper::new(n, 2 * n);
    let dt = config.dt;
    let steps = config.n_steps();
    let mut kin = system.kinetic(&initial.p);
    let mut lag = kin - system.potential(&initial.q);

    for step in 1..=steps {
        let t_prev = initial.t + (step - 1) as f64 * dt;
        let result = stepper.step(system, t_prev, &mut y, dt, |t, q, p, aux, out| {
            let (xi, xi_dot) = aux.split_at(n);
            let (d_xi, d_xi_dot) = out.split_at_mut(n);
            d_xi.copy_from_slice(xi_dot);
            ctx.accel(system, t, q, p, xi, xi_dot, d_xi_dot, &mut scratch)
        });
        match result {
            Ok(()) => {}
            Err(e @ Error::Singular { .. }) if opts.halt_on_guard => {
                run.guard_hits += 1;
                run.halted = Some(e);
                break;
            }
            Err(e) => return Err(e),
        }
        let t = initial.t + step as f64 * dt;
        let kin_next = system.kinetic(&y[n..2 * n]);
        let lag_next = kin_next - system.potential(&y[..n]);
        acc = accumulate_arc(acc, kin, kin_next, lag, lag_next, dt, config.kappa)?;
        kin = kin_next;
        lag = lag_next;

        if step % config.record_stride == 0 || step == steps {
            record(&y, t, &acc, &mut run);
        }
        if opts.renormalize && step % config.renorm_interval == 0 {
            let r = norm_of(&y);
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Internal(format!(
                    "variational norm {r} at t = {t} cannot be renormalized"
                )));
            }
            run.log_sum += r.ln();
            run.renorm_count += 1;
            y[2 * n..].iter_mut().for_each(|x| *x /= r);
        }
    }
    Ok(run)
}
