//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the binary
//! exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrft_buck::circuit::{STATES, V_OUT};
use vrft_buck::control::PiController;
use vrft_buck::pipeline::{
    fit_experiment, run_pipeline, switched_vs_averaged, training_experiment, validation_run,
    zn_criteria, PipelineConfig, Recipe,
};
use vrft_buck::tuning::ControllerGains;
use vrft_buck::*;

/// Outcome of one criterion: pass flag and a one-line detail.
type Verdict = (bool, String);

fn within(value: f64, target: f64, rel_tol: f64) -> bool {
    (value - target).abs() <= rel_tol * target.abs()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let p = Params::default();
    let m = build_model(&p).unwrap();
    let diag = [33e-6, 33e-6, 47e-6, 47e-6, 120e-6, 240e-6];
    let mut ok = m.check_structure().is_ok();
    for (i, &k) in diag.iter().enumerate() {
        ok &= m.k_mat[i][i] == k;
        for j in 0..STATES {
            ok &= i == j || m.k_mat[i][j] == 0.0;
        }
    }
    for row in [2, 3, 5] {
        ok &= m.a1[row].iter().all(|v| *v == 0.0);
    }
    ok &= m.c_row == [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
    ok &= m.b0[V_OUT][1] == 1.0;
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(1);
    (
        ok,
        format!("K diagonal, zero A1 rows, C row, B0(6,2) exact; {elapsed:.2?}"),
    )
}

fn criterion_2() -> Verdict {
    let cfg = PipelineConfig::new(std::env::temp_dir());
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for d in [0.2, 0.5, 0.8] {
        let (eq, mean, ts) = switched_vs_averaged(&cfg, d).unwrap();
        assert!(ts.time(ts.len() - 1) >= 0.02 - 1e-12);
        let rel = (mean - eq).abs() / eq;
        worst = worst.max(rel);
        detail.push(format!("d={d}: {mean:.4} vs {eq:.4}"));
    }
    (
        worst < 0.02,
        format!("{}; worst {:.2e} (tol 2e-2)", detail.join(", "), worst),
    )
}

fn normal_equations(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let phi = DMatrix::from_fn(y.len(), cols.len(), |i, j| cols[j][i]);
    let lhs = phi.transpose() * &phi;
    let rhs = phi.transpose() * DVector::from_column_slice(y);
    lhs.lu().solve(&rhs).unwrap().iter().cloned().collect()
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let e: Vec<f64> = (0..501).map(|_| rng.gen_range(-10.0..10.0)).collect();
    let s = accumulate(&e).unwrap();
    let d: Vec<f64> = e
        .iter()
        .zip(&s)
        .map(|(e, s)| 0.01 * e + 0.002 * s)
        .collect();
    let f = vrft_fit(&d, &e, 1e-4).unwrap();
    let classic = (f.gains.kp - 0.01).abs().max((f.gains.ki - 0.002).abs());

    let g = ControllerGains::pi_aw(0.0018, 0.0056, 120.0, 1, 1e-4);
    let mut c = PiController::new(g);
    let e_aw: Vec<f64> = (0..501)
        .map(|k| 40.0 * (0.05 * k as f64).sin() + rng.gen_range(-5.0..5.0))
        .collect();
    let (mut d_aw, mut u_aw) = (Vec::new(), Vec::new());
    for &ek in &e_aw {
        c.step(ek).unwrap();
        d_aw.push(c.state.last_d);
        u_aw.push(c.state.last_u_d());
    }
    let saturated = u_aw.iter().filter(|u| **u != 0.0).count();
    let fa = vrft_fit_aw(&d_aw, &e_aw, &u_aw, 1, 1e-4).unwrap();
    let aw = (fa.gains.kp - 0.0018)
        .abs()
        .max((fa.gains.ki - 0.0056).abs())
        .max((fa.gains.kaw.unwrap() - 120.0).abs() / 120.0);

    let mut worst_ne: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(100..600);
        let e: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = accumulate(&e).unwrap();
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let fit = vrft_fit(&d, &e, 1e-4).unwrap();
        let oracle = normal_equations(&[e.clone(), s], &d);
        for (a, b) in fit.theta.iter().zip(&oracle) {
            worst_ne = worst_ne.max((a - b).abs() / b.abs());
        }
    }
    let elapsed = start.elapsed();
    let ok = classic < 1e-6
        && aw < 1e-6
        && saturated > 0
        && worst_ne < 1e-8
        && elapsed < Duration::from_secs(10);
    (
        ok,
        format!(
            "classic err {classic:.1e}, anti-windup err {aw:.1e} ({saturated} saturated samples), \
             normal equations rel {worst_ne:.1e}; {elapsed:.2?}"
        ),
    )
}

fn criterion_4() -> Verdict {
    let cfg = PipelineConfig::new(std::env::temp_dir());
    let ts = training_experiment(&cfg, false).unwrap();
    let (g, fits) = fit_experiment(&cfg, &ts, false).unwrap();
    let ts_aw = training_experiment(&cfg, true).unwrap();
    let (ga, _) = fit_experiment(&cfg, &ts_aw, true).unwrap();
    let kaw = ga.kaw.unwrap();
    let checks = [
        within(g.kp, 0.0031, 0.5),
        within(g.ki, 0.0065, 0.5),
        within(ga.kp, 0.0018, 0.5),
        within(ga.ki, 0.0056, 0.5),
        within(kaw, 441.47, 0.5),
    ];
    (
        checks.iter().all(|c| *c),
        format!(
            "N={} x {} seeds; classic [{:.5}, {:.5}] vs [0.0031, 0.0065]; \
             anti-windup ({:.5}, {:.5}, {:.2}) vs (0.0018, 0.0056, 441.47); bands ±50%: {:?}",
            fits[0].samples + 1,
            fits.len(),
            g.kp,
            g.ki,
            ga.kp,
            ga.ki,
            kaw,
            checks
        ),
    )
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let cfg = PipelineConfig::new(std::env::temp_dir());
    let p = Plant::new(cfg.params).unwrap();
    let plan = SimulationPlan::new(
        &p,
        cfg.settings.zn_duration,
        cfg.mode,
        DutySource::InTheLoop,
    );
    let handle = ConverterLoop::new(p, plan);
    let ult = find_ultimate_gain(
        &handle,
        &cfg.settings.gain_grid(),
        cfg.settings.v_ref,
        &zn_criteria(&cfg),
    )
    .unwrap();
    let zn = zn_gains(ult.ku, ult.tu, cfg.params.t_samp).unwrap();
    let (vrft, _) =
        fit_experiment(&cfg, &training_experiment(&cfg, false).unwrap(), false).unwrap();
    let (aw, _) = fit_experiment(&cfg, &training_experiment(&cfg, true).unwrap(), true).unwrap();

    let metrics = |g: &ControllerGains<f64>, name: &str| validation_run(&cfg, g, name).unwrap().1;
    let (mz, mv, ma) = (
        metrics(&zn, "zn"),
        metrics(&vrft, "vrft"),
        metrics(&aw, "vrft_aw"),
    );
    let settle = |r: &PerformanceReport<f64>| r.settling_time_5pct.unwrap_or(f64::INFINITY);
    let (sz, sv, sa) = (settle(&mz), settle(&mv), settle(&ma));
    let checks = [
        ("us(AW)<=20", ma.undershoot_pct <= 20.0),
        ("us(ZN)>=45", mz.undershoot_pct >= 45.0),
        ("us(VRFT)>=45", mv.undershoot_pct >= 45.0),
        ("ts(AW)<ts(VRFT)<ts(ZN)", sa < sv && sv < sz),
        (
            "ZN band",
            within(mz.undershoot_pct, 61.0, 0.5) && within(sz, 2.7e-3, 0.5),
        ),
        (
            "VRFT band",
            within(mv.undershoot_pct, 60.8, 0.5) && within(sv, 1.8e-3, 0.5),
        ),
        (
            "AW band",
            within(ma.undershoot_pct, 11.4, 0.5) && within(sa, 0.9e-3, 0.5),
        ),
    ];
    let elapsed = start.elapsed();
    let ok = checks.iter().all(|c| c.1) && elapsed <= Duration::from_secs(300);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();

    // informational: the published gains on the same plant
    let published = [
        ("zn", ControllerGains::pi(0.02925, 0.00351, 1e-4)),
        ("vrft", ControllerGains::pi(0.0031, 0.0065, 1e-4)),
        ("vrft_aw", ControllerGains::pi_aw(0.0018, 0.0056, 441.47, 1, 1e-4)),
    ];
    let reference: Vec<String> = published
        .iter()
        .map(|(n, g)| {
            let r = metrics(g, n);
            format!("{n} {:.1}%/{:.2} ms", r.undershoot_pct, settle(&r) * 1e3)
        })
        .collect();
    (
        ok,
        format!(
            "undershoot/settling ZN {:.1}%/{:.2} ms, VRFT {:.1}%/{:.2} ms, VRFT-AW {:.1}%/{:.2} ms; \
             failed checks {:?}; published gains give [{}]; {elapsed:.2?}",
            mz.undershoot_pct,
            sz * 1e3,
            mv.undershoot_pct,
            sv * 1e3,
            ma.undershoot_pct,
            sa * 1e3,
            failed,
            reference.join(", ")
        ),
    )
}

fn criterion_6() -> Verdict {
    let p = Plant::new(Params::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut accepted, mut tried, mut identical) = (0, 0, 0);
    while accepted < 100 && tried < 5000 {
        tried += 1;
        let v_ref = rng.gen_range(5.0..15.0);
        let kp = rng.gen_range(0.01..0.03);
        let ki = rng.gen_range(0.0002..0.003);
        let kaw = rng.gen_range(1.0..1000.0);
        let mut plan = SimulationPlan::new(&p, 0.005, PlantMode::Averaged, DutySource::InTheLoop);
        plan.integrator_step = 1e-6;
        let pi = ControllerGains::pi(kp, ki, 1e-4);
        let a = closed_loop(&p, &plan, &pi, &Schedule::constant(v_ref)).unwrap();
        if a.channel("u_d").unwrap().iter().any(|u| *u != 0.0) {
            continue;
        }
        accepted += 1;
        let aw = ControllerGains {
            kaw: Some(kaw),
            ..pi
        };
        let b = closed_loop(&p, &plan, &aw, &Schedule::constant(v_ref)).unwrap();
        let same = a.names() == b.names()
            && a.names().iter().all(|n| {
                let (x, y) = (a.channel(n).unwrap(), b.channel(n).unwrap());
                x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits())
            });
        identical += usize::from(same);
    }
    (
        accepted == 100 && identical == 100,
        format!("{identical}/{accepted} non-saturating scenarios bit-identical ({tried} drawn)"),
    )
}

/// Full trajectory of a constant-duty cold start, sampled every controller tick.
fn trajectory(p: &Plant<f64>, h: f64) -> Vec<f64> {
    let mut plan = SimulationPlan::new(p, 0.005, PlantMode::Averaged, DutySource::Constant(0.5));
    plan.integrator_step = h;
    plan.delays = false;
    let ts = integrate_averaged(p, &plan).unwrap();
    ["I_L1", "I_L2", "V_C1", "V_C2", "V_C_IN", "V_out"]
        .iter()
        .flat_map(|n| ts.channel(n).unwrap().to_vec())
        .collect()
}

fn criterion_7() -> Verdict {
    let p = Plant::new(Params::default()).unwrap();
    let reference = trajectory(&p, 2.5e-7);
    let err = |h: f64| {
        let x = trajectory(&p, h);
        x.iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2, e3) = (err(1e-5), err(5e-6), err(2.5e-6));
    let order = ((e1 / e2).log2()).min((e2 / e3).log2());

    let m = ReferenceModel::from_switching(5e-6, 100.0, 1e-4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let y: Vec<f64> = (0..501).map(|_| rng.gen_range(-20.0..20.0)).collect();
    let r = virtual_reference(&y, &m).unwrap();
    let back = m.filter(&r, y[0]);
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let round_trip = y
        .iter()
        .zip(&back)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale;

    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut outputs = Vec::new();
    for dir in &dirs {
        let mut cfg = PipelineConfig::new(dir.path());
        cfg.seed = 42;
        let mut files = run_pipeline(Recipe::CollectOl, &cfg).unwrap().files;
        files.extend(run_pipeline(Recipe::Fig4Check, &cfg).unwrap().files);
        outputs.push(
            files
                .iter()
                .map(|f| std::fs::read(f).unwrap())
                .collect::<Vec<_>>(),
        );
    }
    let deterministic = outputs[0] == outputs[1];

    (
        order >= 3.5 && round_trip <= 1e-10 && deterministic,
        format!(
            "RK4 order {order:.2} (errors {e1:.1e}, {e2:.1e}, {e3:.1e}); round trip {round_trip:.1e}; \
             byte-identical artifacts: {deterministic}"
        ),
    )
}

fn criterion_8() -> Verdict {
    let cfg = PipelineConfig::new(std::env::temp_dir());
    let p = Plant::new(cfg.params).unwrap();
    let plan = SimulationPlan::new(
        &p,
        cfg.settings.zn_duration,
        cfg.mode,
        DutySource::InTheLoop,
    );
    let handle = ConverterLoop::new(p, plan);
    let res = find_ultimate_gain(
        &handle,
        &cfg.settings.gain_grid(),
        cfg.settings.v_ref,
        &zn_criteria(&cfg),
    )
    .unwrap();
    let (ku_ok, tu_ok) = (within(res.ku, 0.065, 0.3), within(res.tu, 1e-3, 0.3));
    (
        ku_ok && tu_ok,
        format!(
            "ku {:.4} (0.065 ±30%: {ku_ok}), tu {:.3} ms (1 ms ±30%: {tu_ok})",
            res.ku,
            res.tu * 1e3
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 8] = [
        ("model structure", criterion_1),
        ("averaged/switched consistency", criterion_2),
        ("identification oracles", criterion_3),
        ("VRFT gain ballpark", criterion_4),
        ("closed-loop ordering", criterion_5),
        ("anti-windup neutrality", criterion_6),
        ("numerical hygiene", criterion_7),
        ("ZN auto-tune band", criterion_8),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(v) => v,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        failures += usize::from(!ok);
        println!(
            "criterion {} {name}: {} | {detail}",
            i + 1,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
