//! Hamiltonian systems `H = ½ a^{ij} p_i p_j + V(q)` with a constant diagonal
//! mass matrix `a_{ij} = m_i δ_{ij}`.
//!
//! The [`Hamiltonian`] trait is the single source of truth for `V`, its
//! derivatives and the energy; every integrator and variational flow in the
//! crate goes through it. [`SystemSpec`] is the concrete catalog used by
//! experiments, while tests are free to implement the trait for ad-hoc
//! potentials (free particle, inverted oscillator, ...).

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

/// A separable Hamiltonian with constant diagonal masses.
///
/// The `*_into` methods are the allocation-free kernels used inside the
/// integrators. They assume correctly sized slices.
pub trait Hamiltonian {
    fn n_dof(&self) -> usize;

    fn masses(&self) -> &[f64];

    fn potential(&self, q: &[f64]) -> f64;

    /// Writes `V_{,k}` into `out`.
    fn gradient_into(&self, q: &[f64], out: &mut [f64]);

    /// Writes `V_{,kl}` into `out` in row-major order (`out[k * n + l]`).
    fn hessian_into(&self, q: &[f64], out: &mut [f64]);

    /// `T = ½ Σ p_i² / m_i`.
    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p
            .iter()
            .zip(self.masses())
            .map(|(pi, mi)| pi * pi / mi)
            .sum::<f64>()
    }

    fn energy(&self, q: &[f64], p: &[f64]) -> f64 {
        self.kinetic(p) + self.potential(q)
    }
}

/// Potential families available to experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `V = ½ Σ ω_i² q_i²`.
    Harmonic { omegas: Vec<f64> },
    /// Fixed-end chain, `V = Σ_{b=0}^{N} ½k2 d_b² + ¼k4 d_b⁴` with
    /// `d_b = q_{b+1} − q_b` and `q_0 = q_{N+1} = 0`.
    AnharmonicChain { k2: f64, k4: f64 },
    /// `V = ½(x² + y²) + x²y − y³/3`, two degrees of freedom only.
    HenonHeiles,
}

impl PotentialKind {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialKind::Harmonic { .. } => "harmonic",
            PotentialKind::AnharmonicChain { .. } => "anharmonic_chain",
            PotentialKind::HenonHeiles => "henon_heiles",
        }
    }
}

/// Validated system description: masses plus a potential family.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    masses: Vec<f64>,
    potential: PotentialKind,
}

impl SystemSpec {
    pub fn new(masses: Vec<f64>, potential: PotentialKind) -> Result<Self> {
        let n = masses.len();
        if n == 0 {
            return Err(Error::config("system.n_dof", "must be at least 1"));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::config(
                "system.masses",
                format!("masses must be finite and > 0, got {m}"),
            ));
        }
        match &potential {
            PotentialKind::Harmonic { omegas } => {
                if omegas.len() != n {
                    return Err(Error::config(
                        "system.potential.omegas",
                        format!("expected {n} frequencies (n_dof), got {}", omegas.len()),
                    ));
                }
                if let Some(w) = omegas.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                    return Err(Error::config(
                        "system.potential.omegas",
                        format!("frequencies must be finite and > 0, got {w}"),
                    ));
                }
            }
            PotentialKind::AnharmonicChain { k2, k4 } => {
                for (name, k) in [("k2", k2), ("k4", k4)] {
                    if !(k.is_finite() && *k >= 0.0) {
                        return Err(Error::config(
                            format!("system.potential.{name}"),
                            format!("must be finite and >= 0, got {k}"),
                        ));
                    }
                }
            }
            PotentialKind::HenonHeiles => {
                if n != 2 {
                    return Err(Error::config(
                        "system.n_dof",
                        format!("henon_heiles requires n_dof = 2, got {n}"),
                    ));
                }
            }
        }
        Ok(Self { masses, potential })
    }

    /// Unit masses with `V = ½ Σ ω_i² q_i²`.
    pub fn harmonic(omegas: &[f64]) -> Result<Self> {
        Self::new(
            vec![1.0; omegas.len()],
            PotentialKind::Harmonic {
                omegas: omegas.to_vec(),
            },
        )
    }

    pub fn henon_heiles() -> Self {
        Self {
            masses: vec![1.0, 1.0],
            potential: PotentialKind::HenonHeiles,
        }
    }

    pub fn anharmonic_chain(n_dof: usize, k2: f64, k4: f64) -> Result<Self> {
        Self::new(vec![1.0; n_dof], PotentialKind::AnharmonicChain { k2, k4 })
    }

    pub fn potential_kind(&self) -> &PotentialKind {
        &self.potential
    }
}

impl Hamiltonian for SystemSpec {
    fn n_dof(&self) -> usize {
        self.masses.len()
    }

    fn masses(&self) -> &[f64] {
        &self.masses
    }

    fn potential(&self, q: &[f64]) -> f64 {
        match &self.potential {
            PotentialKind::Harmonic { omegas } => {
                0.5 * omegas
                    .iter()
                    .zip(q)
                    .map(|(w, x)| w * w * x * x)
                    .sum::<f64>()
            }
            PotentialKind::AnharmonicChain { k2, k4 } => (0..=q.len())
                .map(|b| {
                    let d = chain_bond(q, b);
                    let d2 = d * d;
                    0.5 * k2 * d2 + 0.25 * k4 * d2 * d2
                })
                .sum(),
            PotentialKind::HenonHeiles => {
                let (x, y) = (q[0], q[1]);
                0.5 * (x * x + y * y) + x * x * y - y * y * y / 3.0
            }
        }
    }

    fn gradient_into(&self, q: &[f64], out: &mut [f64]) {
        match &self.potential {
            PotentialKind::Harmonic { omegas } => {
                for ((g, w), x) in out.iter_mut().zip(omegas).zip(q) {
                    *g = w * w * x;
                }
            }
            PotentialKind::AnharmonicChain { k2, k4 } => {
                let force = |d: f64| k2 * d + k4 * d * d * d;
                // dV/dq_i = f(d_{i-1}) - f(d_i) with bond b joining sites b and b+1
                for (i, g) in out.iter_mut().enumerate() {
                    *g = force(chain_bond(q, i)) - force(chain_bond(q, i + 1));
                }
            }
            PotentialKind::HenonHeiles => {
                let (x, y) = (q[0], q[1]);
                out[0] = x + 2.0 * x * y;
                out[1] = y + x * x - y * y;
            }
        }
    }

    fn hessian_into(&self, q: &[f64], out: &mut [f64]) {
        let n = q.len();
        out.fill(0.0);
        match &self.potential {
            PotentialKind::Harmonic { omegas } => {
                for (i, w) in omegas.iter().enumerate() {
                    out[i * n + i] = w * w;
                }
            }
            PotentialKind::AnharmonicChain { k2, k4 } => {
                let stiffness = |d: f64| k2 + 3.0 * k4 * d * d;
                for i in 0..n {
                    out[i * n + i] = stiffness(chain_bond(q, i)) + stiffness(chain_bond(q, i + 1));
                    if i + 1 < n {
                        let h = -stiffness(chain_bond(q, i + 1));
                        out[i * n + i + 1] = h;
                        out[(i + 1) * n + i] = h;
                    }
                }
            }
            PotentialKind::HenonHeiles => {
                let (x, y) = (q[0], q[1]);
                out[0] = 1.0 + 2.0 * y;
                out[1] = 2.0 * x;
                out[2] = 2.0 * x;
                out[3] = 1.0 - 2.0 * y;
            }
        }
    }
}

/// Bond `b` of the fixed-end chain: `x_{b+1} - x_b` where `x_0 = x_{N+1} = 0`
/// and `x_j = q[j - 1]` otherwise.
fn chain_bond(q: &[f64], b: usize) -> f64 {
    let site = |j: usize| {
        if j == 0 || j > q.len() {
            0.0
        } else {
            q[j - 1]
        }
    };
    site(b + 1) - site(b)
}

/// Point of the base trajectory in phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn new(t: f64, q: Vec<f64>, p: Vec<f64>) -> Self {
        Self { t, q, p }
    }

    pub fn at_rest(q: Vec<f64>) -> Self {
        let n = q.len();
        Self::new(0.0, q, vec![0.0; n])
    }

    pub fn n_dof(&self) -> usize {
        self.q.len()
    }

    /// `q̇^i = p_i / m_i`.
    pub fn velocities(&self, masses: &[f64]) -> Vec<f64> {
        self.p.iter().zip(masses).map(|(p, m)| p / m).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }

    /// Checks dimensions against `system` and finiteness of all entries.
    pub fn validate<H: Hamiltonian + ?Sized>(&self, system: &H) -> Result<()> {
        check_len("state.q", system.n_dof(), self.q.len())?;
        check_len("state.p", system.n_dof(), self.p.len())?;
        if !self.is_finite() {
            return Err(Error::Precondition(
                "phase state contains non-finite entries".into(),
            ));
        }
        Ok(())
    }
}

pub fn potential_value<H: Hamiltonian + ?Sized>(system: &H, q: &[f64]) -> Result<f64> {
    check_len("q", system.n_dof(), q.len())?;
    Ok(system.potential(q))
}

pub fn potential_gradient<H: Hamiltonian + ?Sized>(system: &H, q: &[f64]) -> Result<Vec<f64>> {
    check_len("q", system.n_dof(), q.len())?;
    let mut g = vec![0.0; q.len()];
    system.gradient_into(q, &mut g);
    Ok(g)
}

pub fn potential_hessian<H: Hamiltonian + ?Sized>(system: &H, q: &[f64]) -> Result<DMatrix<f64>> {
    let n = system.n_dof();
    check_len("q", n, q.len())?;
    let mut h = vec![0.0; n * n];
    system.hessian_into(q, &mut h);
    Ok(DMatrix::from_row_slice(n, n, &h))
}

/// Canonical equations: `q̇^i = p_i / m_i`, `ṗ_i = −V_{,i}`.
pub fn hamilton_rhs<H: Hamiltonian + ?Sized>(
    system: &H,
    state: &PhaseState,
) -> Result<(Vec<f64>, Vec<f64>)> {
    state.validate(system)?;
    let q_dot = state.velocities(system.masses());
    let mut p_dot = vec![0.0; state.n_dof()];
    system.gradient_into(&state.q, &mut p_dot);
    p_dot.iter_mut().for_each(|f| *f = -*f);
    Ok((q_dot, p_dot))
}

pub fn kinetic_energy<H: Hamiltonian + ?Sized>(system: &H, state: &PhaseState) -> Result<f64> {
    check_len("state.p", system.n_dof(), state.p.len())?;
    Ok(system.kinetic(&state.p))
}

pub fn total_energy<H: Hamiltonian + ?Sized>(system: &H, state: &PhaseState) -> Result<f64> {
    state.validate(system)?;
    Ok(system.energy(&state.q, &state.p))
}
