//! Reproduction checks run by the `acceptance` test target and by
//! `geospread accept`.
//!
//! Each criterion runs its experiment(s), compares against its tolerance and
//! wall-clock budget, and reports one [`Outcome`].

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compare::{relation_residual, spectrum_peak, ArcKind, Window};
use crate::error::Result;
use crate::geodesic::{eisenhart_affine_check, eisenhart_jlc_rhs, floquet_oracle, jacobi_exponent, JacobiVariationalState};
use crate::integrate::{run_trajectory, RunConfig};
use crate::systems::{Hamiltonian, PhaseState, SystemSpec};
use crate::tangent::{
    benettin_exponent, fd_tangent_oracle, tangent_flow, tangent_rhs, two_trajectory_exponent, Difference,
    LyapunovSeries, TangentState,
};
use crate::variational::VariationalFlow;

#[derive(Debug, Clone, Copy)]
pub struct Criterion {
    pub id: &'static str,
    pub title: &'static str,
    pub budget: Duration,
    check: fn() -> Result<Check>,
}

/// Numerical verdict of one criterion, before the runtime budget is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub numerics_passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<3} {} [{:.2}s / {}s] {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            self.detail
        )
    }
}

impl Criterion {
    pub fn evaluate(&self) -> Outcome {
        let start = Instant::now();
        let check = (self.check)().unwrap_or_else(|e| Check {
            passed: false,
            detail: format!("error: {e}"),
        });
        let elapsed = start.elapsed();
        let in_budget = elapsed <= self.budget;
        let detail = if in_budget {
            check.detail
        } else {
            format!("{}; over runtime budget", check.detail)
        };
        Outcome {
            id: self.id,
            title: self.title,
            passed: check.passed && in_budget,
            numerics_passed: check.passed,
            detail,
            elapsed,
            budget: self.budget,
        }
    }
}

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

pub const CRITERIA: [Criterion; 9] = [
    Criterion { id: "A1", title: "Eisenhart affineness", budget: secs(5), check: a1 },
    Criterion { id: "A2", title: "stable system, tangent dynamics", budget: secs(30), check: a2 },
    Criterion { id: "A3", title: "stable system, Jacobi measure", budget: secs(60), check: a3 },
    Criterion { id: "A4", title: "variation identity", budget: secs(30), check: a4 },
    Criterion { id: "A5", title: "frequency doubling", budget: secs(2), check: a5 },
    Criterion { id: "A6", title: "Eisenhart/tangent equivalence", budget: secs(1), check: a6 },
    Criterion { id: "A7", title: "singularity detection", budget: secs(1), check: a7 },
    Criterion { id: "A8", title: "tangent finite-difference oracle", budget: secs(10), check: a8 },
    Criterion { id: "A9", title: "chaotic regime sanity", budget: secs(60), check: a9 },
];

pub fn criterion(id: &str) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id.eq_ignore_ascii_case(id))
}

/// Hénon–Heiles state at energy `e` with `x = 0`, given `y`, `p_y`, and
/// `p_x > 0` fixed by the energy.
pub fn henon_heiles_state(e: f64, y: f64, p_y: f64) -> PhaseState {
    let hh = SystemSpec::henon_heiles();
    let v = hh.potential(&[0.0, y]);
    let p_x = (2.0 * (e - v) - p_y * p_y).sqrt();
    PhaseState::new(0.0, vec![0.0, y], vec![p_x, p_y])
}

/// Chaotic orbit at `E = 1/8`.
pub fn chaotic_henon_heiles() -> PhaseState {
    henon_heiles_state(0.125, -0.2, 0.0)
}

/// Regular orbit at `E = 1/12`.
pub fn regular_henon_heiles() -> PhaseState {
    henon_heiles_state(1.0 / 12.0, 0.1, 0.0)
}

/// Incommensurate two-mode oscillator `ω = (1, √2)` with its reference orbit.
pub fn stable_pair() -> (SystemSpec, PhaseState) {
    (
        SystemSpec::harmonic(&[1.0, SQRT_2]).expect("valid frequencies"),
        PhaseState::new(0.0, vec![1.0, 0.0], vec![0.0, 1.0]),
    )
}

/// Commensurate variant `ω = (1, 2)`, periodic with period `2π`.
pub fn commensurate_pair() -> (SystemSpec, PhaseState) {
    (
        SystemSpec::harmonic(&[1.0, 2.0]).expect("valid frequencies"),
        PhaseState::new(0.0, vec![1.0, 0.0], vec![0.0, 1.0]),
    )
}

fn a1() -> Result<Check> {
    let cfg = RunConfig {
        dt: 1e-3,
        t_max: 100.0,
        record_stride: 1,
        ..RunConfig::default()
    };
    let hh = SystemSpec::henon_heiles();
    let rec = run_trajectory(&hh, &chaotic_henon_heiles(), &cfg)?;
    let dev = [1.0, 2.0].map(|k| eisenhart_affine_check(&rec, k, hh.masses()));
    Ok(Check {
        passed: dev.iter().all(|d| *d < 1e-8),
        detail: format!(
            "max |ds²/dt²/κ² − 1| = {:.3e} (κ=1), {:.3e} (κ=2); energy drift {:.2e}",
            dev[0], dev[1], rec.energy_drift
        ),
    })
}

/// Largest `|λ|` over `[lo, hi]`.
fn envelope(series: &LyapunovSeries, lo: f64, hi: f64) -> f64 {
    series.window(lo, hi).map(|p| p.lambda_t.abs()).fold(0.0, f64::max)
}

fn lambda_at(series: &LyapunovSeries, t: f64) -> Result<f64> {
    series
        .at(t)
        .map(|p| p.lambda_t)
        .ok_or_else(|| crate::Error::Internal(format!("no exponent sample at t = {t}")))
}

fn a2() -> Result<Check> {
    let (sys, init) = stable_pair();
    let cfg = RunConfig {
        dt: 1e-2,
        t_max: 1e4,
        record_stride: 100,
        ..RunConfig::default()
    };
    let series = benettin_exponent(&sys, &init, &TangentState::seeded(2, cfg.seed), &cfg)?;
    let last = lambda_at(&series, 1e4)?;
    let first_half = envelope(&series, 1e3, 5.5e3);
    let second_half = envelope(&series, 5.5e3, 1e4);
    Ok(Check {
        passed: last < 1e-2 && second_half < first_half,
        detail: format!(
            "λ_T(1e4) = {last:.3e} (< 1e-2); max|λ_T| on [1e3, 5.5e3] = {first_half:.3e}, on [5.5e3, 1e4] = {second_half:.3e}"
        ),
    })
}

/// Step and guard used for Jacobi runs on the oscillator orbits, whose
/// kinetic energy comes within ~3e-7 of zero on the incommensurate orbit.
fn jacobi_config(t_max: f64) -> RunConfig {
    RunConfig {
        dt: 2e-4,
        t_max,
        record_stride: 500,
        t_min_guard: Some(1e-9),
        ..RunConfig::default()
    }
}

fn a3() -> Result<Check> {
    let (sys, init) = stable_pair();
    let seed = RunConfig::default().seed;
    let jv0 = {
        let ts = TangentState::seeded(2, seed);
        JacobiVariationalState::new(ts.xi, ts.xi_dot)
    };

    let jac = jacobi_exponent(&sys, &init, &jv0, &jacobi_config(2e3))?;
    let tan_cfg = RunConfig {
        dt: 1e-2,
        t_max: 2e3,
        record_stride: 100,
        ..RunConfig::default()
    };
    let tan = benettin_exponent(&sys, &init, &TangentState::seeded(2, seed), &tan_cfg)?;
    let lambda_t = lambda_at(&tan, 2e3)?;
    let (lambda_j, lambda_j_s) = match (jac.singular_at, jac.series.at(2e3)) {
        (None, Some(p)) => (p.lambda_t, p.lambda_s),
        _ => (f64::NAN, f64::NAN),
    };
    let main_ok = lambda_j > 10.0 * lambda_t.abs() && lambda_j_s > 0.0;

    // cross-check on the periodic variant
    let (csys, cinit) = commensurate_pair();
    let floquet = floquet_oracle(&csys, &cinit, 2.0 * PI, VariationalFlow::Jacobi, &jacobi_config(2.0 * PI))?;
    let f_max = floquet.max_exponent();
    let long = jacobi_exponent(&csys, &cinit, &jv0, &jacobi_config(2e3))?;
    let lambda_long = match long.singular_at {
        None => lambda_at(&long.series, 2e3)?,
        Some(_) => f64::NAN,
    };
    let positive = f_max > 1e-6;
    let agree = (lambda_long - f_max).abs() <= 0.25 * f_max.abs();
    let multiplier_moduli: Vec<String> = floquet.multipliers.iter().map(|m| format!("{:.9}", m.norm())).collect();

    Ok(Check {
        passed: main_ok && positive && agree,
        detail: format!(
            "λ_J(2e3) = {lambda_j:.3e} vs 10·|λ_T(2e3)| = {:.3e}, λ_J per unit s = {lambda_j_s:.3e} [{}]; \
             cross-check ω=(1,2): Floquet max exponent = {f_max:.3e} (|μ| = {}), long-run λ_J(2e3) = {lambda_long:.3e} [{}]",
            10.0 * lambda_t.abs(),
            if main_ok { "pass" } else { "fail" },
            multiplier_moduli.join(", "),
            if positive && agree { "pass" } else { "fail" },
        ),
    })
}

fn a4() -> Result<Check> {
    let (sys, init) = commensurate_pair();
    let direction = [FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0];
    let base = RunConfig {
        dt: 1e-3,
        t_max: 50.0,
        record_stride: 10,
        ..RunConfig::default()
    };
    let run = |dtau: f64| {
        relation_residual(
            &sys,
            &init,
            &direction,
            &RunConfig { dtau, ..base.clone() },
            ArcKind::Jacobi,
            Difference::Central,
        )
    };
    let coarse = run(1e-5)?;
    let fine = run(1e-6)?;
    let (r_coarse, r_fine) = (coarse.max_residual(), fine.max_residual());
    let control = fine.negative_control_residuals().into_iter().fold(0.0, f64::max);
    Ok(Check {
        passed: r_coarse < 1e-2 && r_fine < 1e-3 && control > 0.1,
        detail: format!(
            "max residual {r_coarse:.3e} (dtau=1e-5, < 1e-2), {r_fine:.3e} (dtau=1e-6, < 1e-3); wrong identity {control:.3e} (> 0.1)"
        ),
    })
}

fn a5() -> Result<Check> {
    let sys = SystemSpec::harmonic(&[1.0])?;
    let cfg = RunConfig {
        dt: 1e-2,
        t_max: 400.0,
        record_stride: 1,
        ..RunConfig::default()
    };
    let rec = run_trajectory(&sys, &PhaseState::new(0.0, vec![1.0], vec![0.0]), &cfg)?;
    let kinetic: Vec<f64> = rec.samples.iter().map(|s| s.kinetic).collect();
    let spec = spectrum_peak(&kinetic, cfg.dt, Window::Hann)?;
    let miss = (spec.peak_frequency - 2.0).abs();
    Ok(Check {
        passed: !spec.dc_only && miss <= spec.bin_width(),
        detail: format!(
            "peak at ω = {:.5} (bin width {:.5}, {} samples)",
            spec.peak_frequency,
            spec.bin_width(),
            kinetic.len()
        ),
    })
}

fn a6() -> Result<Check> {
    let hh = SystemSpec::henon_heiles();
    let mut rng = ChaCha8Rng::seed_from_u64(RunConfig::default().seed);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for _ in 0..100 {
        let mut draw = || rng.gen_range(-0.5..0.5);
        let state = PhaseState::new(0.0, vec![draw(), draw()], vec![draw(), draw()]);
        let ts = TangentState::new(vec![draw(), draw()], vec![draw(), draw()]);
        let tangent = tangent_rhs(&hh, &state, &ts)?.1;
        let eisen = eisenhart_jlc_rhs(&hh, &state, &ts.xi, &ts.xi_dot, 1.0)?;
        for (a, b) in tangent.iter().zip(&eisen) {
            worst = worst.max((a - b).abs());
            scale = scale.max(a.abs());
        }
    }
    Ok(Check {
        passed: worst <= f64::EPSILON * scale.max(1.0),
        detail: format!("max |Eisenhart − tangent| = {worst:.3e} over 100 states (|ξ̈| up to {scale:.3})"),
    })
}

fn a7() -> Result<Check> {
    let sys = SystemSpec::harmonic(&[1.0])?;
    let cfg = RunConfig {
        dt: 1e-3,
        t_max: 10.0,
        ..RunConfig::default()
    };
    // q = sin t: kinetic energy vanishes first at t = π/2
    let out = jacobi_exponent(
        &sys,
        &PhaseState::new(0.0, vec![0.0], vec![1.0]),
        &JacobiVariationalState::new(vec![1.0], vec![0.0]),
        &cfg,
    )?;
    Ok(match out.singular_at {
        Some(t) => Check {
            passed: (t - PI / 2.0).abs() <= cfg.dt,
            detail: format!("guard at t = {t:.6}, |t − π/2| = {:.2e} (dt = {})", (t - PI / 2.0).abs(), cfg.dt),
        },
        None => Check {
            passed: false,
            detail: "guard never raised".into(),
        },
    })
}

/// Max deviation between the integrated tangent flow and the oracle.
fn oracle_error(sys: &SystemSpec, init: &PhaseState, dir: &[f64], dtau: f64, diff: Difference) -> Result<f64> {
    let cfg = RunConfig {
        dt: 1e-3,
        t_max: 20.0,
        record_stride: 20,
        dtau,
        ..RunConfig::default()
    };
    let flow = tangent_flow(sys, init, &TangentState::from_direction(dir, sys.masses()), &cfg)?;
    let fd = fd_tangent_oracle(sys, init, dir, &cfg, diff)?;
    Ok(flow
        .iter()
        .zip(&fd)
        .flat_map(|((_, a), (_, b))| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max))
}

fn a8() -> Result<Check> {
    let dir = [0.5; 4];
    let steps = [4e-3, 2e-3, 1e-3];

    let (hsys, hinit) = stable_pair();
    let h_err = steps
        .iter()
        .map(|&h| oracle_error(&hsys, &hinit, &dir, h, Difference::Forward))
        .collect::<Result<Vec<_>>>()?;
    // the oscillator flow is linear, so the one-sided error is pure rounding
    let harmonic_ok = h_err.iter().zip(&steps).all(|(e, h)| e <= h);

    let hh = SystemSpec::henon_heiles();
    let init = regular_henon_heiles();
    let errs = steps
        .iter()
        .map(|&h| oracle_error(&hh, &init, &dir, h, Difference::Forward))
        .collect::<Result<Vec<_>>>()?;
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let hh_ok = orders.iter().all(|p| (p - 1.0).abs() < 0.2);
    let central = [2e-3, 1e-3]
        .iter()
        .map(|&h| oracle_error(&hh, &init, &dir, h, Difference::Central))
        .collect::<Result<Vec<_>>>()?;

    Ok(Check {
        passed: harmonic_ok && hh_ok,
        detail: format!(
            "harmonic max error {:.2e} at dtau = {:e} (≤ dtau); Hénon–Heiles errors {:.3e}, {:.3e}, {:.3e}, observed orders {:.3}, {:.3}; central ratio {:.2}",
            h_err[2], steps[2], errs[0], errs[1], errs[2], orders[0], orders[1], central[0] / central[1]
        ),
    })
}

fn a9() -> Result<Check> {
    let hh = SystemSpec::henon_heiles();
    let init = chaotic_henon_heiles();
    let cfg = RunConfig {
        dt: 1e-2,
        t_max: 1e4,
        record_stride: 100,
        ..RunConfig::default()
    };
    let seed = cfg.seed;
    let series = benettin_exponent(&hh, &init, &TangentState::seeded(2, seed), &cfg)?;
    let lambda_end = lambda_at(&series, 1e4)?;
    let lambda_mid = lambda_at(&series, 1e3)?;
    let positive = series.window(1e2, 1e4).all(|p| p.lambda_t > 0.0);
    let spread = |lo, hi| {
        let (mn, mx) = series
            .window(lo, hi)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.lambda_t), b.max(p.lambda_t)));
        mx - mn
    };
    let (early, late) = (spread(1e2, 1e3), spread(1e3, 1e4));
    let stabilizing = positive && late < early && (lambda_end - lambda_mid).abs() < 0.5 * lambda_end;

    let jcfg = RunConfig {
        dt: 1e-3,
        t_max: 1e3,
        record_stride: 100,
        ..RunConfig::default()
    };
    let ts = TangentState::seeded(2, seed);
    let jac = jacobi_exponent(&hh, &init, &JacobiVariationalState::new(ts.xi, ts.xi_dot), &jcfg)?;
    let j_last = jac.series.last().map(|p| (p.t, p.lambda_t, p.lambda_s));
    let jacobi_ok = matches!(j_last, Some((t, l, s)) if t >= 100.0 && l > 0.0 && s > 0.0);

    // separation rate against Benettin along the same initial direction, up to saturation
    let d0 = 1e-10;
    let short = RunConfig {
        dt: 1e-3,
        t_max: 400.0,
        record_stride: 100,
        ..RunConfig::default()
    };
    let shifted = PhaseState::new(0.0, vec![init.q[0] + d0, init.q[1]], init.p.clone());
    let two = two_trajectory_exponent(&hh, &init, &shifted, &short)?;
    let ben = benettin_exponent(&hh, &init, &TangentState::new(vec![1.0, 0.0], vec![0.0, 0.0]), &short)?;
    let saturation = 1e-3;
    let t_sat = two
        .points
        .iter()
        .take_while(|p| d0 * (p.lambda_t * p.t).exp() <= saturation)
        .last()
        .map(|p| p.t)
        .unwrap_or(0.0);
    let (l_two, l_ben) = (lambda_at(&two, t_sat)?, lambda_at(&ben, t_sat)?);
    let agree = t_sat >= 50.0 && (l_two - l_ben).abs() <= 0.2 * l_ben.abs();

    let j_text = match j_last {
        Some((t, l, s)) => format!("λ_J({t:.0}) = {l:.4} per t, {s:.4} per s"),
        None => "no Jacobi samples".into(),
    };
    Ok(Check {
        passed: stabilizing && jacobi_ok && agree,
        detail: format!(
            "λ_T(1e3) = {lambda_mid:.4}, λ_T(1e4) = {lambda_end:.4}, range on [1e2,1e3] = {early:.3e}, on [1e3,1e4] = {late:.3e}; \
             {j_text}{}; at t = {t_sat:.0} (separation ≤ {saturation:e}) two-trajectory {l_two:.4} vs Benettin {l_ben:.4}",
            match jac.singular_at {
                Some(t) => format!(" (guard at t = {t:.2})"),
                None => String::new(),
            }
        ),
    })
}

/// Floquet oracle on the periodic `ω = (1, 2)` orbit with the step used by
/// the acceptance run.
pub fn reference_floquet(flow: VariationalFlow) -> Result<crate::geodesic::FloquetResult> {
    let (sys, init) = commensurate_pair();
    floquet_oracle(&sys, &init, 2.0 * PI, flow, &jacobi_config(2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_unique_and_resolvable() {
        for c in &CRITERIA {
            assert_eq!(criterion(c.id).unwrap().id, c.id);
        }
        assert!(criterion("a5").is_some());
        assert!(criterion("A10").is_none());
    }

    #[test]
    fn reference_states_have_requested_energy() {
        let hh = SystemSpec::henon_heiles();
        let s = chaotic_henon_heiles();
        assert!((hh.energy(&s.q, &s.p) - 0.125).abs() < 1e-15);
        let s = regular_henon_heiles();
        assert!((hh.energy(&s.q, &s.p) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn fast_criteria_pass() {
        for id in ["A5", "A6", "A7"] {
            let o = criterion(id).unwrap().evaluate();
            assert!(o.numerics_passed, "{o}");
        }
    }
}
