//! Experiment configuration files (TOML, strict keys).
//!
//! ```toml
//! kind = "tangent_lyapunov"
//! output_dir = "out/harmonic"
//!
//! [system]
//! n_dof = 2
//! potential = { type = "harmonic", omegas = [1.0, 1.4142135623730951] }
//!
//! [initial]
//! q = [1.0, 0.0]
//! p = [0.0, 1.0]
//!
//! [run]
//! t_max = 1000.0
//!
//! [thresholds]
//! lambda_t_final = { max = 1e-2 }
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use geospread_core::compare::{ArcKind, Window};
use geospread_core::tangent::Difference;
use geospread_core::{NormKind, PhaseState, PotentialKind, RunConfig, SystemSpec, VariationalFlow};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Trajectory,
    TangentLyapunov,
    JacobiLyapunov,
    RelationCheck,
    FloquetOracle,
    Spectrum,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Trajectory => "trajectory",
            ExperimentKind::TangentLyapunov => "tangent_lyapunov",
            ExperimentKind::JacobiLyapunov => "jacobi_lyapunov",
            ExperimentKind::RelationCheck => "relation_check",
            ExperimentKind::FloquetOracle => "floquet_oracle",
            ExperimentKind::Spectrum => "spectrum",
        }
    }

    /// Summary scalars that thresholds may refer to.
    pub fn summary_scalars(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Trajectory => &["energy_drift", "max_energy_deviation", "affine_deviation", "s_jacobi_final"],
            ExperimentKind::TangentLyapunov => &["lambda_t_final", "lambda_s_final"],
            ExperimentKind::JacobiLyapunov => &["lambda_t_final", "lambda_s_final", "t_guard_hits", "singular_flag"],
            ExperimentKind::RelationCheck => &["max_residual", "max_negative_control", "max_abs_ds_dtau"],
            ExperimentKind::FloquetOracle => &["max_exponent", "min_exponent"],
            ExperimentKind::Spectrum => &["peak_frequency", "bin_width"],
        }
    }
}

/// Inclusive bounds on one summary scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub name: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Threshold {
    pub fn check(&self, value: f64) -> bool {
        self.min.is_none_or(|m| value >= m) && self.max.is_none_or(|m| value <= m)
    }
}

/// Starting vector and perturbation settings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Variation {
    /// Unit phase-space direction `(δq, δp)`.
    pub direction: Option<Vec<f64>>,
    /// Explicit `(ξ, ξ̇)`; seeded when absent.
    pub xi: Option<(Vec<f64>, Vec<f64>)>,
    pub arc: ArcKind,
    pub difference: Difference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub system: SystemSpec,
    pub initial: PhaseState,
    pub run: RunConfig,
    pub output_dir: PathBuf,
    pub emit_svg: bool,
    pub variation: Variation,
    pub period: Option<f64>,
    pub flow: VariationalFlow,
    pub window: Window,
    pub thresholds: Vec<Threshold>,
}

impl ExperimentSpec {
    /// Applies `GEOSPREAD_SEED` if it is set.
    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<(), CliError> {
        if let Some(v) = value {
            self.run.seed = v
                .trim()
                .parse()
                .map_err(|_| CliError::Validation(format!("GEOSPREAD_SEED must be an unsigned integer, got `{v}`")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: ExperimentKind,
    output_dir: PathBuf,
    #[serde(default)]
    emit_svg: bool,
    system: RawSystem,
    initial: RawInitial,
    #[serde(default)]
    run: RawRun,
    variation: Option<RawVariation>,
    floquet: Option<RawFloquet>,
    spectrum: Option<RawSpectrum>,
    #[serde(default)]
    thresholds: BTreeMap<String, RawBound>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    n_dof: usize,
    masses: Option<Vec<f64>>,
    potential: RawPotential,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PotentialName {
    Harmonic,
    AnharmonicChain,
    HenonHeiles,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    #[serde(rename = "type")]
    name: PotentialName,
    omegas: Option<Vec<f64>>,
    k2: Option<f64>,
    k4: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    q: Vec<f64>,
    p: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    dt: Option<f64>,
    t_max: Option<f64>,
    record_stride: Option<usize>,
    renorm_interval: Option<usize>,
    dtau: Option<f64>,
    t_min_guard: Option<f64>,
    kappa: Option<f64>,
    norm: Option<NormName>,
    seed: Option<u64>,
    energy_drift_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NormName {
    Euclidean,
    Metric,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariation {
    direction: Option<Vec<f64>>,
    xi: Option<Vec<f64>>,
    xi_dot: Option<Vec<f64>>,
    arc: Option<ArcName>,
    difference: Option<DifferenceName>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ArcName {
    Jacobi,
    Eisenhart,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum DifferenceName {
    Forward,
    Central,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFloquet {
    period: f64,
    flow: Option<FlowName>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FlowName {
    Tangent,
    Jacobi,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectrum {
    window: Option<WindowName>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum WindowName {
    None,
    Hann,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBound {
    min: Option<f64>,
    max: Option<f64>,
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("invalid value for `{field}`: {reason}"))
}

/// Parses and fully validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Validation(format!("config parse error: {e}")))?;
    let n = raw.system.n_dof;
    if n == 0 {
        return Err(invalid("system.n_dof", "must be >= 1"));
    }

    let pot = &raw.system.potential;
    let potential = match pot.name {
        PotentialName::Harmonic => {
            if pot.k2.is_some() || pot.k4.is_some() {
                return Err(invalid("system.potential", "harmonic takes only `omegas`"));
            }
            PotentialKind::Harmonic {
                omegas: pot
                    .omegas
                    .clone()
                    .ok_or_else(|| invalid("system.potential.omegas", "required for harmonic"))?,
            }
        }
        PotentialName::AnharmonicChain => {
            if pot.omegas.is_some() {
                return Err(invalid("system.potential", "anharmonic_chain takes only `k2` and `k4`"));
            }
            PotentialKind::AnharmonicChain {
                k2: pot.k2.ok_or_else(|| invalid("system.potential.k2", "required for anharmonic_chain"))?,
                k4: pot.k4.ok_or_else(|| invalid("system.potential.k4", "required for anharmonic_chain"))?,
            }
        }
        PotentialName::HenonHeiles => {
            if pot.omegas.is_some() || pot.k2.is_some() || pot.k4.is_some() {
                return Err(invalid("system.potential", "henon_heiles takes no parameters"));
            }
            PotentialKind::HenonHeiles
        }
    };
    let masses = raw.system.masses.clone().unwrap_or_else(|| vec![1.0; n]);
    if masses.len() != n {
        return Err(invalid(
            "system.masses",
            format!("expected {n} entries (system.n_dof), got {}", masses.len()),
        ));
    }
    let system = SystemSpec::new(masses, potential)?;

    let initial = PhaseState::new(0.0, raw.initial.q, raw.initial.p);
    if initial.q.len() != n {
        return Err(invalid("initial.q", format!("expected {n} entries, got {}", initial.q.len())));
    }
    if initial.p.len() != n {
        return Err(invalid("initial.p", format!("expected {n} entries, got {}", initial.p.len())));
    }
    if !initial.is_finite() {
        return Err(invalid("initial", "entries must be finite"));
    }

    let defaults = RunConfig::default();
    let r = raw.run;
    let run = RunConfig {
        dt: r.dt.unwrap_or(defaults.dt),
        t_max: r.t_max.unwrap_or(defaults.t_max),
        record_stride: r.record_stride.unwrap_or(defaults.record_stride),
        renorm_interval: r.renorm_interval.unwrap_or(defaults.renorm_interval),
        dtau: r.dtau.unwrap_or(defaults.dtau),
        t_min_guard: r.t_min_guard.or(defaults.t_min_guard),
        kappa: r.kappa.unwrap_or(defaults.kappa),
        norm_kind: match r.norm {
            Some(NormName::Metric) => NormKind::Metric,
            Some(NormName::Euclidean) => NormKind::Euclidean,
            None => defaults.norm_kind,
        },
        seed: r.seed.unwrap_or(defaults.seed),
        energy_drift_tol: r.energy_drift_tol.unwrap_or(defaults.energy_drift_tol),
    };
    run.validate()?;

    let variation = match raw.variation {
        None => Variation::default(),
        Some(v) => {
            let xi = match (v.xi, v.xi_dot) {
                (None, None) => None,
                (Some(a), Some(b)) => {
                    if a.len() != n || b.len() != n {
                        return Err(invalid("variation.xi", format!("xi and xi_dot need {n} entries each")));
                    }
                    Some((a, b))
                }
                _ => return Err(invalid("variation.xi", "xi and xi_dot must be given together")),
            };
            if let Some(d) = &v.direction {
                if d.len() != 2 * n {
                    return Err(invalid("variation.direction", format!("expected {} entries, got {}", 2 * n, d.len())));
                }
                let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(invalid("variation.direction", format!("must have unit Euclidean norm, got {norm}")));
                }
            }
            Variation {
                direction: v.direction,
                xi,
                arc: match v.arc {
                    Some(ArcName::Eisenhart) => ArcKind::Eisenhart,
                    _ => ArcKind::Jacobi,
                },
                difference: match v.difference {
                    Some(DifferenceName::Forward) => Difference::Forward,
                    _ => Difference::Central,
                },
            }
        }
    };

    let (period, flow) = match raw.floquet {
        Some(f) => {
            if !(f.period.is_finite() && f.period > 0.0) {
                return Err(invalid("floquet.period", format!("must be > 0, got {}", f.period)));
            }
            let flow = match f.flow {
                Some(FlowName::Tangent) => VariationalFlow::Tangent,
                _ => VariationalFlow::Jacobi,
            };
            (Some(f.period), flow)
        }
        None => (None, VariationalFlow::Jacobi),
    };
    let window = match raw.spectrum.and_then(|s| s.window) {
        Some(WindowName::None) => Window::None,
        _ => Window::Hann,
    };

    match raw.kind {
        ExperimentKind::RelationCheck if variation.direction.is_none() => {
            return Err(invalid("variation.direction", "required for relation_check"));
        }
        ExperimentKind::FloquetOracle if period.is_none() => {
            return Err(invalid("floquet.period", "required for floquet_oracle"));
        }
        ExperimentKind::Spectrum => {
            let samples = run.n_steps() / run.record_stride + 1;
            if samples < geospread_core::compare::MIN_SPECTRUM_SAMPLES {
                return Err(invalid(
                    "run.t_max",
                    format!(
                        "spectrum needs at least {} samples, run gives {samples}",
                        geospread_core::compare::MIN_SPECTRUM_SAMPLES
                    ),
                ));
            }
        }
        _ => {}
    }

    let allowed = raw.kind.summary_scalars();
    let mut thresholds = Vec::with_capacity(raw.thresholds.len());
    for (name, b) in raw.thresholds {
        if !allowed.contains(&name.as_str()) {
            return Err(invalid(
                &format!("thresholds.{name}"),
                format!("not a summary scalar of {}; expected one of {}", raw.kind.name(), allowed.join(", ")),
            ));
        }
        if b.min.is_none() && b.max.is_none() {
            return Err(invalid(&format!("thresholds.{name}"), "needs `min` or `max`"));
        }
        thresholds.push(Threshold {
            name,
            min: b.min,
            max: b.max,
        });
    }

    Ok(ExperimentSpec {
        kind: raw.kind,
        system,
        initial,
        run,
        output_dir: raw.output_dir,
        emit_svg: raw.emit_svg,
        variation,
        period,
        flow,
        window,
        thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use geospread_core::Hamiltonian;

    const MINIMAL: &str = r#"
kind = "trajectory"
output_dir = "out"

[system]
n_dof = 1
potential = { type = "harmonic", omegas = [1.0] }

[initial]
q = [1.0]
p = [0.0]
"#;

    fn err(text: &str) -> String {
        parse_config(text).unwrap_err().to_string()
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let s = parse_config(MINIMAL).unwrap();
        assert_eq!(s.kind, ExperimentKind::Trajectory);
        assert_eq!(s.run.dt, 1e-3);
        assert_eq!(s.run.kappa, 1.0);
        assert_eq!(s.run.norm_kind, NormKind::Euclidean);
        assert_eq!(s.system.masses(), &[1.0]);
        assert!(!s.emit_svg);
    }

    #[test]
    fn negative_dt_names_the_field() {
        let e = err(&format!("{MINIMAL}\n[run]\ndt = -0.1\n"));
        assert!(e.contains("run.dt"), "{e}");
    }

    #[test]
    fn henon_heiles_needs_two_dof() {
        let text = MINIMAL
            .replace("n_dof = 1", "n_dof = 3")
            .replace(r#"{ type = "harmonic", omegas = [1.0] }"#, r#"{ type = "henon_heiles" }"#)
            .replace("q = [1.0]", "q = [0.0, 0.0, 0.0]")
            .replace("p = [0.0]", "p = [0.0, 0.0, 0.0]");
        let e = err(&text);
        assert!(e.contains("n_dof"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let e = err(&format!("{MINIMAL}\n[run]\nstep = 0.1\n"));
        assert!(e.contains("step") && e.contains("line"), "{e}");
        let e = err(&MINIMAL.replace("output_dir", "outdir"));
        assert!(e.contains("outdir"), "{e}");
    }

    #[test]
    fn syntax_errors_report_line() {
        let e = err("kind = \"trajectory\"\noutput_dir = \n");
        assert!(e.contains("line 2"), "{e}");
    }

    #[test]
    fn relation_check_requires_unit_direction() {
        let base = MINIMAL.replace("\"trajectory\"", "\"relation_check\"");
        assert!(err(&base).contains("variation.direction"));
        let e = err(&format!("{base}\n[variation]\ndirection = [1.0, 1.0]\n"));
        assert!(e.contains("unit"), "{e}");
        let s = parse_config(&format!("{base}\n[variation]\ndirection = [0.0, 1.0]\narc = \"eisenhart\"\n")).unwrap();
        assert_eq!(s.variation.arc, ArcKind::Eisenhart);
        assert_eq!(s.variation.difference, Difference::Central);
    }

    #[test]
    fn thresholds_must_name_known_scalars() {
        let e = err(&format!("{MINIMAL}\n[thresholds]\nlambda_t_final = {{ max = 1.0 }}\n"));
        assert!(e.contains("thresholds.lambda_t_final"), "{e}");
        let s = parse_config(&format!("{MINIMAL}\n[thresholds]\nenergy_drift = {{ max = 1e-6 }}\n")).unwrap();
        assert!(s.thresholds[0].check(1e-7) && !s.thresholds[0].check(1e-5));
    }

    #[test]
    fn mismatched_lengths_name_the_field() {
        assert!(err(&MINIMAL.replace("q = [1.0]", "q = [1.0, 2.0]")).contains("initial.q"));
        assert!(err(&MINIMAL.replace("n_dof = 1", "n_dof = 1\nmasses = [1.0, 1.0]")).contains("system.masses"));
    }

    #[test]
    fn seed_override() {
        let mut s = parse_config(MINIMAL).unwrap();
        s.apply_seed_override(Some("42")).unwrap();
        assert_eq!(s.run.seed, 42);
        assert!(s.apply_seed_override(Some("x")).is_err());
    }

    #[test]
    fn short_spectrum_is_rejected_before_running() {
        let text = MINIMAL.replace("\"trajectory\"", "\"spectrum\"");
        assert!(err(&format!("{text}\n[run]\nt_max = 1.0\n")).contains("run.t_max"));
    }
}
