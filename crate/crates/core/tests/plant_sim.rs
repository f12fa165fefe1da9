use vrft_buck::circuit::{STATES, V_OUT};
use vrft_buck::*;

fn plant() -> Plant<f64> {
    Plant::new(Params::default()).unwrap()
}

fn state_at(ts: &Series, k: usize) -> [f64; STATES] {
    let names = ["I_L1", "I_L2", "V_C1", "V_C2", "V_C_IN", "V_out"];
    let mut x = [0.0; STATES];
    for (v, n) in x.iter_mut().zip(names) {
        *v = ts.channel(n).unwrap()[k];
    }
    x
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

#[test]
fn equilibrium_is_a_fixed_point() {
    let p = plant();
    let mut plan = SimulationPlan::new(&p, 0.05, PlantMode::Averaged, DutySource::Constant(0.5));
    plan.initial_state = InitialState::EquilibriumAt(0.5);
    let ts = integrate_averaged(&p, &plan).unwrap();
    let x0 = equilibrium(&p.model, 0.5, &p.nominal_input()).unwrap();
    for k in 0..ts.len() {
        let x = state_at(&ts, k);
        for i in 0..STATES {
            let scale = x0[i].abs().max(1e-3);
            assert!(
                (x[i] - x0[i]).abs() / scale < 1e-6,
                "state {i} drifted at sample {k}"
            );
        }
    }
}

#[test]
fn cold_start_converges_to_equilibrium() {
    let p = plant();
    let plan = SimulationPlan::new(&p, 0.05, PlantMode::Averaged, DutySource::Constant(0.5));
    let ts = integrate_averaged(&p, &plan).unwrap();
    let target = equilibrium(&p.model, 0.5, &p.nominal_input()).unwrap()[V_OUT];
    let y = ts.channel("V_out").unwrap();
    assert!(rel(*y.last().unwrap(), target) < 1e-3);
    assert!(y.iter().all(|v| v.is_finite()));
    assert!(ts.has_channel("d"));
}

#[test]
fn halving_the_step_barely_moves_the_final_state() {
    let p = plant();
    let run = |h: f64| {
        let mut plan =
            SimulationPlan::new(&p, 0.01, PlantMode::Averaged, DutySource::Constant(0.5));
        plan.integrator_step = h;
        let ts = integrate_averaged(&p, &plan).unwrap();
        state_at(&ts, ts.len() - 1)
    };
    let (a, b) = (run(1e-6), run(5e-7));
    for i in 0..STATES {
        assert!(
            (a[i] - b[i]).abs() <= 1e-8 * a[i].abs().max(1.0),
            "state {i}"
        );
    }
}

#[test]
fn pwm_half_duty_counts() {
    let d = Series::with_channel(0.0, 1e-4, "d", vec![0.5; 3]).unwrap();
    let s = pwm_generate(&d, "d", 5e-6, 1e-7).unwrap();
    let s1 = s.channel("s1").unwrap();
    assert_eq!(s1.len(), 3000);
    for period in s1.chunks(50) {
        assert_eq!(period.iter().filter(|v| **v == 1.0).count(), 25);
        assert!(period[..25].iter().all(|v| *v == 1.0));
    }
    assert_eq!(s.channel("s2").unwrap(), s1);
}

#[test]
fn pwm_boundary_duties() {
    for (d, level) in [(1.0, 1.0), (0.0, 0.0)] {
        let ds = Series::with_channel(0.0, 1e-4, "d", vec![d; 2]).unwrap();
        let s = pwm_generate(&ds, "d", 5e-6, 1e-7).unwrap();
        assert!(s.channel("s1").unwrap().iter().all(|v| *v == level));
    }
    let bad = Series::with_channel(0.0, 1e-4, "d", vec![1.2]).unwrap();
    assert!(pwm_generate(&bad, "d", 5e-6, 1e-7).is_err());
}

#[test]
fn full_duty_switched_matches_averaged() {
    let p = plant();
    let mut a = SimulationPlan::new(&p, 0.005, PlantMode::Averaged, DutySource::Constant(1.0));
    a.record_stride = Some(1);
    let mut s = a.clone();
    s.mode = PlantMode::Switched;
    let ya = integrate(&p, &a).unwrap();
    let ys = integrate(&p, &s).unwrap();
    let (va, vs) = (ya.channel("V_out").unwrap(), ys.channel("V_out").unwrap());
    for (x, y) in va.iter().zip(vs) {
        assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
    }
}

fn steady_ripple(params: Params) -> f64 {
    let p = Plant::new(params).unwrap();
    let mut plan = SimulationPlan::new(&p, 0.003, PlantMode::Switched, DutySource::Constant(0.5));
    plan.initial_state = InitialState::EquilibriumAt(0.5);
    plan.record_stride = Some(1);
    let ts = integrate_switched(&p, &plan).unwrap();
    let y = ts.channel("V_out").unwrap();
    let tail = &y[y.len() - 500..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    hi - lo
}

#[test]
fn ripple_shrinks_with_larger_output_capacitor() {
    let base = Params::default();
    let r1 = steady_ripple(base);
    let mut doubled = base;
    doubled.c_out *= 2.0;
    let r2 = steady_ripple(doubled);
    assert!(r1 > 0.0 && r1 < 1.0, "ripple {r1}");
    assert!(r2 > 0.0 && r2 < r1, "ripple {r2} vs {r1}");
}

#[test]
fn communication_delay_shifts_the_response() {
    let params = Params {
        tau_meas: 0.0,
        ..Params::default()
    };
    let p = Plant::new(params).unwrap();
    let mut duties = vec![0.0];
    duties.extend(vec![0.5; 20]);
    let mut plan = SimulationPlan::new(&p, 0.002, PlantMode::Switched, DutySource::Series(duties));
    plan.initial_state = InitialState::EquilibriumAt(0.0);
    plan.record_stride = Some(1);
    let mut undelayed = plan.clone();
    undelayed.delays = false;
    let yd = integrate_switched(&p, &plan).unwrap();
    let yu = integrate_switched(&p, &undelayed).unwrap();
    let k = 25;
    let (vd, vu) = (yd.channel("V_out").unwrap(), yu.channel("V_out").unwrap());
    let peak = vu.iter().cloned().fold(0.0, f64::max);
    for i in 0..vu.len() - k {
        assert!((vd[i + k] - vu[i]).abs() <= 1e-9 * peak, "sample {i}");
    }
    // the step itself has really moved the output
    assert!(peak > 5.0);
}

#[test]
fn noise_contract() {
    let ts = Series::with_channel(0.0, 1e-4, "y", vec![3.0; 1000]).unwrap();
    let same = apply_noise(&ts, "y", 0.0, 1).unwrap();
    assert_eq!(same, ts);
    let a = apply_noise(&ts, "y", 0.5, 7).unwrap();
    let b = apply_noise(&ts, "y", 0.5, 7).unwrap();
    let c = apply_noise(&ts, "y", 0.5, 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a
        .channel("y")
        .unwrap()
        .iter()
        .all(|v| (v - 3.0).abs() <= 0.5));
    assert!(matches!(
        apply_noise(&ts, "nope", 0.5, 1),
        Err(Error::UnknownChannel(_))
    ));
}

#[test]
fn oversized_step_reports_divergence_time() {
    let p = plant();
    let mut plan = SimulationPlan::new(&p, 0.05, PlantMode::Averaged, DutySource::Constant(0.5));
    plan.integrator_step = 1e-4;
    match integrate_averaged(&p, &plan) {
        Err(Error::Integration { time }) => assert!(time > 0.0 && time <= 0.05),
        other => panic!("expected divergence, got {:?}", other.map(|t| t.len())),
    }
}

#[test]
fn mode_mismatch_rejected() {
    let p = plant();
    let plan = SimulationPlan::new(&p, 0.001, PlantMode::Switched, DutySource::Constant(0.5));
    assert!(integrate_averaged(&p, &plan).is_err());
    let mut bad = plan.clone();
    bad.integrator_step = 3e-7;
    assert!(integrate_switched(&p, &bad).is_err());
}

#[test]
fn input_disturbance_profiles_take_effect() {
    let p = plant();
    let mut plan = SimulationPlan::new(&p, 0.03, PlantMode::Averaged, DutySource::Constant(0.5));
    plan.initial_state = InitialState::EquilibriumAt(0.5);
    plan.v_in_profile = Schedule::new(vec![(0.0, 40.0), (0.01, 30.0)]).unwrap();
    let ts = integrate_averaged(&p, &plan).unwrap();
    let y = ts.channel("V_out").unwrap();
    let eq30 = equilibrium(&p.model, 0.5, &[30.0, 0.0]).unwrap()[V_OUT];
    assert!(rel(*y.last().unwrap(), eq30) < 1e-3);
}
