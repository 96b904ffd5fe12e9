//! Runs one configured experiment and writes its artifacts.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use geospread_core::compare::relation_residual;
use geospread_core::geodesic::{eisenhart_affine_check, floquet_oracle, jacobi_exponent, JacobiVariationalState};
use geospread_core::integrate::run_trajectory;
use geospread_core::tangent::{benettin_exponent, LyapunovSeries, TangentState};
use geospread_core::Hamiltonian;

use crate::config::{ExperimentKind, ExperimentSpec};
use crate::error::CliError;
use crate::svg::render_svg;
use crate::table::{format_real, Cell, Columns, Table};

pub const SUMMARY_FILE: &str = "summary.txt";

/// Key scalars of a run, in output order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    lines: Vec<(String, String)>,
    scalars: Vec<(String, f64)>,
}

impl Summary {
    fn text(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.into(), value.to_string()));
    }

    fn scalar(&mut self, key: &str, value: f64) {
        self.lines.push((key.into(), format_real(value)));
        self.scalars.push((key.into(), value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.scalars.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn render(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// What a finished run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: Summary,
    pub passed: bool,
    pub singular: bool,
    pub files: Vec<PathBuf>,
}

struct Artifacts {
    table_name: &'static str,
    table: Table,
    plot: (&'static str, Vec<String>),
    summary: Summary,
    singular: bool,
}

fn starting_vector(spec: &ExperimentSpec) -> TangentState {
    match &spec.variation.xi {
        Some((xi, xi_dot)) => TangentState::new(xi.clone(), xi_dot.clone()),
        None => TangentState::seeded(spec.system.n_dof(), spec.run.seed),
    }
}

fn exponent_table(series: &LyapunovSeries, jacobi: Option<(usize, bool)>) -> Table {
    let mut header = vec!["t", "s_jacobi", "lambda_t", "lambda_s", "renorm_count"];
    if jacobi.is_some() {
        header.extend(["t_guard_hits", "singular_flag"]);
    }
    let mut table = Table::new(header);
    let last = series.points.len().saturating_sub(1);
    for (k, p) in series.points.iter().enumerate() {
        let mut row: Vec<Cell> = vec![p.t.into(), p.s_jacobi.into(), p.lambda_t.into(), p.lambda_s.into(), p.renorm_count.into()];
        if let Some((hits, singular)) = jacobi {
            // the guard can only fire after the last recorded point
            let at_end = k == last;
            row.push(if at_end { hits.into() } else { 0usize.into() });
            row.push(Cell::Int((at_end && singular) as i64));
        }
        table.push(row);
    }
    table
}

fn final_exponents(summary: &mut Summary, series: &LyapunovSeries) {
    let (lt, ls, t) = series.last().map_or((f64::NAN, f64::NAN, 0.0), |p| (p.lambda_t, p.lambda_s, p.t));
    summary.scalar("t_final", t);
    summary.scalar("lambda_t_final", lt);
    summary.scalar("lambda_s_final", ls);
}

fn compute(spec: &ExperimentSpec) -> Result<Artifacts, CliError> {
    let sys = &spec.system;
    let n = sys.n_dof();
    let mut summary = Summary::default();
    summary.text("kind", spec.kind.name());
    summary.text("potential", sys.potential_kind().name());
    summary.text("n_dof", n);
    summary.text("seed", spec.run.seed);
    summary.text("norm", spec.run.norm_kind.name());
    let mut singular = false;

    let (table_name, table, plot) = match spec.kind {
        ExperimentKind::Trajectory => {
            let rec = run_trajectory(sys, &spec.initial, &spec.run)?;
            let mut header: Vec<String> = vec!["t".into()];
            header.extend((1..=n).map(|i| format!("q_{i}")));
            header.extend((1..=n).map(|i| format!("p_{i}")));
            header.extend(["T", "V", "E", "s_jacobi", "q_extra"].map(String::from));
            let mut table = Table::new(header);
            for s in &rec.samples {
                let mut row: Vec<Cell> = vec![s.t().into()];
                row.extend(s.state.q.iter().chain(&s.state.p).map(|&x| Cell::Real(x)));
                row.extend([s.kinetic, s.potential, s.energy, s.arc.s_jacobi, s.arc.q_extra].map(Cell::Real));
                table.push(row);
            }
            summary.scalar("t_final", rec.last().t());
            summary.scalar("energy_drift", rec.energy_drift);
            summary.scalar("max_energy_deviation", rec.max_energy_deviation);
            summary.text("drift_flag", rec.drift_flag as u8);
            summary.scalar("affine_deviation", eisenhart_affine_check(&rec, spec.run.kappa, sys.masses()));
            summary.scalar("s_jacobi_final", rec.last().arc.s_jacobi);
            let ys = (1..=n).map(|i| format!("q_{i}")).collect();
            ("trajectory.csv", table, ("t", ys))
        }
        ExperimentKind::TangentLyapunov => {
            let series = benettin_exponent(sys, &spec.initial, &starting_vector(spec), &spec.run)?;
            final_exponents(&mut summary, &series);
            summary.text("renorm_count", series.last().map_or(0, |p| p.renorm_count));
            ("exponent.csv", exponent_table(&series, None), ("t", vec!["lambda_t".into()]))
        }
        ExperimentKind::JacobiLyapunov => {
            let ts = starting_vector(spec);
            let out = jacobi_exponent(sys, &spec.initial, &JacobiVariationalState::new(ts.xi, ts.xi_dot), &spec.run)?;
            singular = out.is_singular();
            final_exponents(&mut summary, &out.series);
            summary.text("renorm_count", out.series.last().map_or(0, |p| p.renorm_count));
            summary.scalar("t_guard_hits", out.t_guard_hits as f64);
            summary.scalar("singular_flag", singular as u8 as f64);
            if let Some(t) = out.singular_at {
                summary.scalar("singular_t", t);
            }
            (
                "exponent.csv",
                exponent_table(&out.series, Some((out.t_guard_hits, singular))),
                ("t", vec!["lambda_t".into(), "lambda_s".into()]),
            )
        }
        ExperimentKind::RelationCheck => {
            let direction = spec.variation.direction.as_deref().expect("validated");
            let cmp = relation_residual(sys, &spec.initial, direction, &spec.run, spec.variation.arc, spec.variation.difference)?;
            let mut table = Table::new(["t", "s_jacobi", "residual", "ds_dtau", "correction_norm", "xi_t_norm", "xi_g_fd_norm"]);
            let (cn, tn, gn) = (cmp.correction_norms(), cmp.xi_t_norms(), cmp.xi_g_fd_norms());
            for k in 0..cmp.len() {
                table.push(
                    [cmp.times[k], cmp.s_jacobi[k], cmp.residuals[k], cmp.ds_dtau[k], cn[k], tn[k], gn[k]]
                        .map(Cell::Real)
                        .to_vec(),
                );
            }
            summary.text("arc", cmp.arc.name());
            summary.text("difference", format!("{:?}", spec.variation.difference).to_lowercase());
            summary.text("direction", direction.iter().map(|x| format_real(*x)).collect::<Vec<_>>().join(" "));
            summary.scalar("dtau", spec.run.dtau);
            summary.scalar("max_residual", cmp.max_residual());
            summary.scalar(
                "max_negative_control",
                cmp.negative_control_residuals().into_iter().fold(0.0, f64::max),
            );
            summary.scalar("max_abs_ds_dtau", cmp.ds_dtau.iter().fold(0.0, |m, v| m.max(v.abs())));
            ("comparison.csv", table, ("t", vec!["residual".into()]))
        }
        ExperimentKind::FloquetOracle => {
            let period = spec.period.expect("validated");
            let f = floquet_oracle(sys, &spec.initial, period, spec.flow, &spec.run)?;
            let mut mult = f.multipliers.clone();
            mult.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
            let mut table = Table::new(["index", "multiplier_re", "multiplier_im", "modulus", "exponent"]);
            for (k, (m, e)) in mult.iter().zip(&f.exponents).enumerate() {
                table.push(vec![k.into(), m.re.into(), m.im.into(), m.norm().into(), (*e).into()]);
            }
            summary.text("flow", f.flow.name());
            summary.scalar("period", period);
            summary.scalar("max_exponent", f.max_exponent());
            summary.scalar("min_exponent", *f.exponents.last().expect("2N exponents"));
            ("floquet.csv", table, ("index", vec!["exponent".into()]))
        }
        ExperimentKind::Spectrum => {
            let rec = run_trajectory(sys, &spec.initial, &spec.run)?;
            let kinetic: Vec<f64> = rec.samples.iter().map(|s| s.kinetic).collect();
            let sample_dt = spec.run.dt * spec.run.record_stride as f64;
            let report = geospread_core::compare::spectrum_peak(&kinetic, sample_dt, spec.window)?;
            let mut table = Table::new(["angular_frequency", "amplitude"]);
            for (f, a) in report.frequencies.iter().zip(&report.amplitudes) {
                table.push(vec![(*f).into(), (*a).into()]);
            }
            summary.text("signal", "kinetic_energy");
            summary.text("samples", kinetic.len());
            summary.scalar("peak_frequency", report.peak_frequency);
            summary.scalar("bin_width", report.bin_width());
            summary.text("dc_only", report.dc_only as u8);
            ("spectrum.csv", table, ("angular_frequency", vec!["amplitude".into()]))
        }
    };
    Ok(Artifacts {
        table_name,
        table,
        plot,
        summary,
        singular,
    })
}

fn judge(spec: &ExperimentSpec, summary: &mut Summary) -> bool {
    let mut all = true;
    for th in &spec.thresholds {
        let value = summary.value(&th.name).unwrap_or(f64::NAN);
        let ok = th.check(value);
        all &= ok;
        let bound = match (th.min, th.max) {
            (Some(lo), Some(hi)) => format!("in [{lo:e}, {hi:e}]"),
            (Some(lo), None) => format!(">= {lo:e}"),
            (None, Some(hi)) => format!("<= {hi:e}"),
            (None, None) => unreachable!("validated"),
        };
        summary.text(&format!("threshold.{}", th.name), format!("{} ({bound})", if ok { "pass" } else { "fail" }));
    }
    summary.text("pass", all as u8);
    all
}

/// Writes every file to a temporary sibling first and renames only once all
/// writes succeeded.
pub fn write_all(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}", dir.display()), e))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let mut tmp = tempfile::Builder::new()
            .prefix(".geospread-")
            .tempfile_in(dir)
            .map_err(|e| CliError::io(format!("cannot write to {}", dir.display()), e))?;
        tmp.write_all(contents.as_bytes())
            .map_err(|e| CliError::io(format!("cannot write {name}"), e))?;
        staged.push((tmp, dir.join(name)));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, path) in staged {
        tmp.persist(&path).map_err(|e| CliError::io(path.display(), e.error))?;
        written.push(path);
    }
    Ok(written)
}

/// Runs the experiment and writes its CSV, summary and optional SVG into
/// `spec.output_dir`. Nothing is written if the computation fails.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report, CliError> {
    let mut art = compute(spec)?;
    let passed = judge(spec, &mut art.summary);
    let csv = art.table.to_csv()?;
    let mut files = vec![(art.table_name.to_string(), csv.clone())];
    if spec.emit_svg {
        let (x, ys) = &art.plot;
        let svg = render_svg(&Columns::parse(&csv)?, x, ys)?;
        files.push((art.table_name.replace(".csv", ".svg"), svg));
    }
    files.push((SUMMARY_FILE.to_string(), art.summary.render()));
    let written = write_all(&spec.output_dir, &files)?;
    Ok(Report {
        summary: art.summary,
        passed,
        singular: art.singular,
        files: written,
    })
}
