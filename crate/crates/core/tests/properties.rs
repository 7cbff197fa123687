mod common;

use common::v;
use nalgebra::DVector;
use proptest::prelude::*;
use torque_track::*;

fn analytic_series(osc: &AnalyticOscillator, dt: f64, t_end: f64) -> Vec<f64> {
    (0..=(t_end / dt).round() as usize)
        .map(|k| osc.eval(k as f64 * dt))
        .collect()
}

#[test]
fn analytic_error_hits_the_band_at_one_settling_time() {
    let osc = AnalyticOscillator::new(5.8339, 1.0, 0.0).unwrap();
    assert!((analytic_error(&osc, 1.0).unwrap() - 0.02).abs() <= 2e-5);
    assert_eq!(analytic_error(&osc, 0.0).unwrap(), 1.0);
    let h = 1e-6;
    let slope = (osc.eval(h) - osc.eval(-h)) / (2.0 * h);
    assert!(slope.abs() <= 1e-8);
}

#[test]
fn settling_time_of_closed_form_series() {
    let dt = 1e-4;
    for ts in [0.2, 0.5, 1.0, 2.0] {
        let omega0 = settling_constant() / ts;
        let osc = AnalyticOscillator::new(omega0, 0.7, 0.0).unwrap();
        let series = analytic_series(&osc, dt, 2.0 * ts);
        let t = measured_settling_time(&series, dt, 0.02)
            .unwrap()
            .time()
            .unwrap();
        assert!((t - ts).abs() <= dt * (1.0 + 1e-9), "ts={ts} t={t}");
    }
}

#[test]
fn self_comparison_is_exact() {
    let gains = tune_gains(&[0.5]).unwrap();
    let osc = AnalyticOscillator::new(gains.omega0()[0], -0.4, 1.5).unwrap();
    let dt = 1e-3;
    let rows = (0..1000)
        .map(|k| {
            let t = k as f64 * dt;
            let h = 1e-7;
            let eps = osc.eval(t);
            let eps_dot = (osc.eval(t + h) - osc.eval(t - h)) / (2.0 * h);
            TraceRow {
                t,
                q: v(&[eps]),
                qdot: v(&[eps_dot]),
                qddot: v(&[0.0]),
                q_d: v(&[0.0]),
                qd_d: v(&[0.0]),
                qdd_d: v(&[0.0]),
                eps: v(&[eps]),
                eps_dot: v(&[if k == 0 { 1.5 } else { eps_dot }]),
                u: v(&[0.0]),
                u_raw: v(&[0.0]),
                energy: 0.0,
            }
        })
        .collect();
    let trace = Trace::new(1, dt, rows);
    assert_eq!(compare_to_oracle(&trace, &gains, 0).unwrap(), 0.0);
    assert!(compare_to_oracle(&trace, &gains, 1).is_err());
}

proptest! {
    #[test]
    fn analytic_error_solves_the_ode(omega0 in 0.5..30.0f64, x0 in -3.0..3.0f64, v0 in -5.0..5.0f64, t in 0.01..2.0f64) {
        let osc = AnalyticOscillator::new(omega0, x0, v0).unwrap();
        let h = 1e-4;
        let (xm, x, xp) = (osc.eval(t - h), osc.eval(t), osc.eval(t + h));
        let d1 = (xp - xm) / (2.0 * h);
        let d2 = (xp - 2.0 * x + xm) / (h * h);
        let residual = d2 + 2.0 * omega0 * d1 + omega0 * omega0 * x;
        let scale = (x0.abs() + v0.abs() / omega0) * omega0 * omega0;
        prop_assert!(residual.abs() <= 1e-5 * scale.max(1.0), "residual {residual:e}");
    }

    #[test]
    fn no_overshoot_from_rest(omega0 in 0.5..30.0f64, x0 in -3.0..3.0f64) {
        let osc = AnalyticOscillator::new(omega0, x0, 0.0).unwrap();
        let series = analytic_series(&osc, 1e-3, 10.0 / omega0);
        prop_assert!(series.windows(2).all(|w| w[1].abs() <= w[0].abs()));
    }

    #[test]
    fn settling_is_scale_invariant(scale in 1e-3..1e3f64, ts in 0.1..2.0f64) {
        let osc = AnalyticOscillator::new(settling_constant() / ts, 1.0, 0.3).unwrap();
        let series = analytic_series(&osc, 1e-3, 3.0 * ts);
        let scaled: Vec<f64> = series.iter().map(|x| x * scale).collect();
        prop_assert_eq!(
            measured_settling_time(&series, 1e-3, 0.02).unwrap(),
            measured_settling_time(&scaled, 1e-3, 0.02).unwrap()
        );
    }

    #[test]
    fn tuned_gains_are_critically_damped(ts in proptest::collection::vec(1e-3..100.0f64, 1..6)) {
        let g = tune_gains(&ts).unwrap();
        let half: Vec<f64> = ts.iter().map(|t| t / 2.0).collect();
        let g_half = tune_gains(&half).unwrap();
        for i in 0..ts.len() {
            prop_assert_eq!(g.kv()[i] * g.kv()[i], 4.0 * g.kp()[i]);
            prop_assert!((g.omega0()[i] * g.ts()[i] - settling_constant()).abs() <= 1e-12 * settling_constant());
            prop_assert_eq!(g_half.omega0()[i], 2.0 * g.omega0()[i]);
        }
    }

    #[test]
    fn commanded_acceleration_is_diagonal(
        ts in proptest::collection::vec(0.1..2.0f64, 3),
        q in proptest::collection::vec(-3.0..3.0f64, 3),
        qdot in proptest::collection::vec(-3.0..3.0f64, 3),
        bump in -2.0..2.0f64,
    ) {
        let gains = tune_gains(&ts).unwrap();
        let desired = TrajectorySample::stationary(0.0, v(&[0.1, 0.2, 0.3]));
        let base = JointState::from_slices(&q, &qdot);
        let mut moved = base.clone();
        moved.q[1] += bump;
        moved.qdot[1] -= bump;
        let a = commanded_acceleration(&gains, &base, &desired).unwrap();
        let b = commanded_acceleration(&gains, &moved, &desired).unwrap();
        prop_assert_eq!(a[0], b[0]);
        prop_assert_eq!(a[2], b[2]);
        let on_track = JointState::from_slices(&[0.1, 0.2, 0.3], &[0.0; 3]);
        prop_assert_eq!(commanded_acceleration(&gains, &on_track, &desired).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn quintic_derivatives_are_consistent(
        start in proptest::collection::vec(-3.0..3.0f64, 2),
        end in proptest::collection::vec(-3.0..3.0f64, 2),
        duration in 0.5..5.0f64,
        frac in 0.01..0.99f64,
    ) {
        let spec = TrajectorySpec::Quintic { start: v(&start), end: v(&end), duration };
        check_derivatives(&spec, frac * duration)?;
    }

    #[test]
    fn sinusoid_derivatives_are_consistent(
        amplitude in proptest::collection::vec(-2.0..2.0f64, 2),
        frequency in proptest::collection::vec(0.0..2.0f64, 2),
        t in 0.01..10.0f64,
    ) {
        let spec = TrajectorySpec::Sinusoid { offset: v(&[0.3, -0.1]), amplitude: v(&amplitude), frequency: v(&frequency) };
        check_derivatives(&spec, t)?;
    }

    #[test]
    fn steps_and_holds_have_zero_derivatives(t in 0.0..10.0f64, target in -4.0..4.0f64) {
        let steps = TrajectorySpec::StepSequence {
            initial: v(&[0.0]),
            steps: vec![Step { t: 1.0, target: v(&[target]) }, Step { t: 3.0, target: v(&[-target]) }],
        };
        let hold = TrajectorySpec::Hold { q: v(&[target]) };
        for spec in [steps, hold] {
            let s = spec.evaluate(t).unwrap();
            prop_assert_eq!(s.qd_d[0], 0.0);
            prop_assert_eq!(s.qdd_d[0], 0.0);
            prop_assert_eq!(spec.evaluate(t).unwrap(), s);
        }
    }
}

fn check_derivatives(spec: &TrajectorySpec, t: f64) -> Result<(), TestCaseError> {
    let h = 1e-6;
    let (m, c, p) = (
        spec.evaluate(t - h).unwrap(),
        spec.evaluate(t).unwrap(),
        spec.evaluate(t + h).unwrap(),
    );
    let vel = (&p.q_d - &m.q_d) / (2.0 * h);
    let acc = (&p.qd_d - &m.qd_d) / (2.0 * h);
    prop_assert!((vel - &c.qd_d).amax() <= 1e-6);
    prop_assert!((acc - &c.qdd_d).amax() <= 1e-4);
    Ok(())
}
