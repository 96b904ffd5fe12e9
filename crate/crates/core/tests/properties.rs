use geospread_core::compare::{ds_dtau_fixed_t, ArcKind};
use geospread_core::geodesic::{
    eisenhart_affine_check, eisenhart_jlc_rhs, jacobi_xi_rhs, JacobiRhs, JacobiVariationalState,
};
use geospread_core::integrate::run_trajectory;
use geospread_core::systems::total_energy;
use geospread_core::tangent::{benettin_exponent, fd_tangent_oracle, tangent_flow, tangent_rhs, Difference, TangentState};
use geospread_core::{Hamiltonian, PhaseState, RunConfig, SystemSpec};
use proptest::prelude::*;

fn hh_state() -> impl Strategy<Value = PhaseState> {
    (-0.3f64..0.3, -0.3f64..0.3, -0.25f64..0.25, -0.25f64..0.25)
        .prop_map(|(x, y, px, py)| PhaseState::new(0.0, vec![x, y], vec![px, py]))
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn direction4() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, 4)
        .prop_filter("non-degenerate", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
        .prop_map(|v| unit(&v))
}

fn accel(r: JacobiRhs) -> Vec<f64> {
    match r {
        JacobiRhs::Derivatives(_, a) => a,
        JacobiRhs::Guard(g) => panic!("unexpected guard {g:?}"),
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let s = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / s.max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tangent_flow_is_linear(init in hh_state(), dir in direction4()) {
        let s = SystemSpec::henon_heiles();
        let cfg = RunConfig { dt: 1e-2, t_max: 5.0, record_stride: 50, ..RunConfig::default() };
        let base = tangent_flow(&s, &init, &TangentState::from_direction(&dir, s.masses()), &cfg).unwrap();
        for alpha in [2.0, -1.0, 1e-3] {
            let scaled: Vec<f64> = dir.iter().map(|d| alpha * d).collect();
            let run = tangent_flow(&s, &init, &TangentState::from_direction(&scaled, s.masses()), &cfg).unwrap();
            for ((t, a), (_, b)) in run.iter().zip(&base) {
                let expect: Vec<f64> = b.iter().map(|x| alpha * x).collect();
                prop_assert!(rel(a, &expect) < 1e-12, "alpha {alpha} t {t}");
            }
        }
    }

    #[test]
    fn jacobi_spread_is_linear(
        init in hh_state(),
        a in proptest::collection::vec(-1.0f64..1.0, 4),
        b in proptest::collection::vec(-1.0f64..1.0, 4),
        alpha in -3.0f64..3.0,
    ) {
        let s = SystemSpec::henon_heiles();
        prop_assume!(s.kinetic(&init.p) > 1e-3);
        let rhs = |v: &[f64]| {
            accel(jacobi_xi_rhs(&s, &init, &JacobiVariationalState::new(v[..2].to_vec(), v[2..].to_vec()), 0.0).unwrap())
        };
        let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + y).collect();
        let lhs = rhs(&combo);
        let (ra, rb) = (rhs(&a), rhs(&b));
        let scale = ra.iter().chain(&rb).fold(1.0f64, |m, x| m.max(x.abs())) * (1.0 + alpha.abs());
        for i in 0..2 {
            prop_assert!((lhs[i] - (alpha * ra[i] + rb[i])).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn eisenhart_spread_equals_tangent_dynamics(
        init in hh_state(),
        v in proptest::collection::vec(-1.0f64..1.0, 4),
        kappa in 0.1f64..5.0,
    ) {
        let s = SystemSpec::henon_heiles();
        let ts = TangentState::new(v[..2].to_vec(), v[2..].to_vec());
        let (_, tangent) = tangent_rhs(&s, &init, &ts).unwrap();
        let eis = eisenhart_jlc_rhs(&s, &init, &ts.xi, &ts.xi_dot, kappa).unwrap();
        let scale = tangent.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (e, t) in eis.iter().zip(&tangent) {
            prop_assert!((e - t).abs() <= 1e-12 * scale, "{e} vs {t}");
        }
    }

    #[test]
    fn one_dof_harmonic_reduction(q in -1.0f64..1.0, p in -1.0f64..1.0, xi in -2.0f64..2.0, xi_dot in -2.0f64..2.0) {
        prop_assume!(0.5 * p * p > 1e-3);
        let s = SystemSpec::harmonic(&[1.0]).unwrap();
        let st = PhaseState::new(0.0, vec![q], vec![p]);
        let a = accel(jacobi_xi_rhs(&s, &st, &JacobiVariationalState::new(vec![xi], vec![xi_dot]), 0.0).unwrap());
        let (e, t) = (0.5 * (q * q + p * p), 0.5 * p * p);
        let expected = (2.0 * e / t - 1.0) * xi;
        prop_assert!((a[0] - expected).abs() <= 1e-10 * expected.abs().max(1.0), "{} vs {expected}", a[0]);
    }

    #[test]
    fn arcs_are_monotone_and_affine(init in hh_state(), kappa in 0.2f64..4.0) {
        let s = SystemSpec::henon_heiles();
        prop_assume!(total_energy(&s, &init).unwrap() < 1.0 / 6.0);
        let cfg = RunConfig { dt: 1e-3, t_max: 20.0, record_stride: 20, kappa, ..RunConfig::default() };
        let rec = run_trajectory(&s, &init, &cfg).unwrap();
        for w in rec.samples.windows(2) {
            prop_assert!(w[1].arc.s_jacobi >= w[0].arc.s_jacobi);
        }
        for smp in &rec.samples {
            prop_assert!((smp.energy - (smp.kinetic + smp.potential)).abs() == 0.0);
            prop_assert!((smp.arc.s_eisenhart - kappa * smp.t()).abs() <= 1e-10 * (1.0 + kappa * smp.t()));
        }
        prop_assert!(eisenhart_affine_check(&rec, kappa, s.masses()) < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn eisenhart_arc_does_not_depend_on_the_variation(init in hh_state(), dir in direction4(), kappa in 0.2f64..4.0) {
        let s = SystemSpec::henon_heiles();
        prop_assume!(total_energy(&s, &init).unwrap() < 1.0 / 6.0);
        let cfg = RunConfig { dt: 1e-2, t_max: 20.0, record_stride: 10, dtau: 1e-6, kappa, ..RunConfig::default() };
        for diff in [Difference::Forward, Difference::Central] {
            for (t, d) in ds_dtau_fixed_t(&s, &init, &dir, &cfg, ArcKind::Eisenhart, diff).unwrap() {
                prop_assert!(d.abs() <= 1e-10, "t {t}: {d}");
            }
        }
    }

    #[test]
    fn harmonic_growth_stays_under_a_linear_envelope(
        w0 in 0.5f64..2.0,
        w1 in 0.5f64..2.0,
        seed in any::<u64>(),
    ) {
        let s = SystemSpec::harmonic(&[w0, w1]).unwrap();
        let init = PhaseState::new(0.0, vec![1.0, -0.5], vec![0.2, 0.7]);
        let cfg = RunConfig { dt: 1e-2, t_max: 500.0, record_stride: 100, ..RunConfig::default() };
        let series = benettin_exponent(&s, &init, &TangentState::seeded(2, seed), &cfg).unwrap();
        // the mode energies bound the growth of (ξ, ξ̇) by max(ω, 1/ω)
        let a = 1.01 * [w0, w1].iter().map(|w| w.max(1.0 / w)).fold(1.0, f64::max);
        let b = 1e-6;
        for pt in series.points.iter().filter(|p| p.t > 0.0) {
            prop_assert!(pt.lambda_t <= (a + b * pt.t).ln() / pt.t, "t {}: {}", pt.t, pt.lambda_t);
        }
    }
}

#[test]
fn fd_oracle_error_scales_with_dtau() {
    let systems = [
        (SystemSpec::harmonic(&[1.0, 2.0f64.sqrt()]).unwrap(), PhaseState::new(0.0, vec![1.0, 0.0], vec![0.0, 1.0])),
        (SystemSpec::henon_heiles(), PhaseState::new(0.0, vec![0.0, 0.1], vec![0.35, 0.0])),
    ];
    let dir = [0.5; 4];
    for (s, init) in &systems {
        for dtau in [1e-3, 1e-4] {
            let cfg = RunConfig { dt: 1e-2, t_max: 10.0, record_stride: 10, dtau, ..RunConfig::default() };
            let flow = tangent_flow(s, init, &TangentState::from_direction(&dir, s.masses()), &cfg).unwrap();
            let fd = fd_tangent_oracle(s, init, &dir, &cfg, Difference::Forward).unwrap();
            let worst = flow.iter().zip(&fd).map(|((_, a), (_, b))| rel(a, b)).fold(0.0, f64::max);
            let c = worst / dtau;
            assert!(c < 100.0, "{:?} dtau {dtau}: C = {c}", s.potential_kind());
        }
    }
}
