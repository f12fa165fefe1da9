//! Discrete PI / PI anti-windup control law with duty saturation, and the
//! closed loop around the converter simulator.

use std::collections::VecDeque;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::plant::{simulate, Commander, DutySource, Plant, Schedule, SimulationPlan};
use crate::scalar::Real;
use crate::series::TimeSeries;
use crate::signals::Accumulator;
use crate::tuning::{ControllerGains, ProportionalLoop};

/// Clamps `d` to `[lo, hi]`.
pub fn saturate<T: Real>(d: T, lo: T, hi: T) -> T {
    if d > hi {
        hi
    } else if d < lo {
        lo
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState<T> {
    pub integrator: Accumulator<T>,
    /// Most recent first; length `n_aw`.
    pub u_d_history: VecDeque<T>,
    pub last_d: T,
    pub last_d_sat: T,
}

impl<T: Real> ControllerState<T> {
    pub fn new(g: &ControllerGains<T>) -> Self {
        Self {
            integrator: Accumulator::new(),
            u_d_history: std::iter::repeat_n(T::zero(), g.n_aw.max(1)).collect(),
            last_d: g.sat_lo,
            last_d_sat: g.sat_lo,
        }
    }

    /// `u_d = d − d_sat` of the latest step.
    pub fn last_u_d(&self) -> T {
        self.u_d_history.front().copied().unwrap_or_else(T::zero)
    }
}

/// One controller tick:
/// `d = kp·e + ki·Σe + ki·kaw·Σ_{j=1..n_aw} u_d(t−j)`, `d_sat = sat(d)`.
pub fn controller_step<T: Real>(
    g: &ControllerGains<T>,
    st: &ControllerState<T>,
    e: T,
) -> Result<(T, ControllerState<T>)> {
    if !e.is_finite() {
        return Err(Error::Signal(format!("tracking error {e}")));
    }
    let mut next = st.clone();
    let integral = next.integrator.push(e);
    let mut d = g.kp * e + g.ki * integral;
    if let Some(kaw) = g.kaw {
        let past = next
            .u_d_history
            .iter()
            .take(g.n_aw)
            .fold(T::zero(), |acc, &u| acc + u);
        if past != T::zero() {
            d = d + g.ki * kaw * past;
        }
    }
    let d_sat = saturate(d, g.sat_lo, g.sat_hi);
    next.u_d_history.push_front(d - d_sat);
    next.u_d_history.truncate(g.n_aw.max(1));
    next.last_d = d;
    next.last_d_sat = d_sat;
    Ok((d_sat, next))
}

/// Mutable convenience wrapper around [`controller_step`].
#[derive(Debug, Clone)]
pub struct PiController<T> {
    pub gains: ControllerGains<T>,
    pub state: ControllerState<T>,
}

impl<T: Real> PiController<T> {
    pub fn new(gains: ControllerGains<T>) -> Self {
        let state = ControllerState::new(&gains);
        Self { gains, state }
    }

    pub fn step(&mut self, e: T) -> Result<T> {
        let (d_sat, next) = controller_step(&self.gains, &self.state, e)?;
        self.state = next;
        Ok(d_sat)
    }
}

struct ClosedLoop<'a, T> {
    controller: PiController<T>,
    v_ref: &'a Schedule<T>,
    noise: Option<(ChaCha8Rng, Uniform<f64>)>,
    last: [T; 5],
}

impl<T: Real> Commander<T> for ClosedLoop<'_, T> {
    fn warmup(&self) -> T {
        self.controller.gains.sat_lo
    }

    fn channels(&self) -> Vec<&'static str> {
        vec!["V_ref", "e", "d", "d_sat", "u_d"]
    }

    fn command(&mut self, _tick: usize, t: T, v_meas: T) -> Result<T> {
        let mut y = v_meas;
        if let Some((rng, dist)) = self.noise.as_mut() {
            y = y + T::lit(dist.sample(rng));
        }
        let r = self.v_ref.at(t);
        let e = r - y;
        let d_sat = self.controller.step(e)?;
        let st = &self.controller.state;
        self.last = [r, e, st.last_d, d_sat, st.last_u_d()];
        Ok(d_sat)
    }

    fn snapshot(&self, out: &mut Vec<T>) {
        out.extend_from_slice(&self.last);
    }
}

/// Simulates the converter under PI(-AW) control. The controller runs every
/// `t_samp` on the (delayed) output sample and holds `d_sat` until the next
/// tick; before the first command reaches the plant the duty is `sat_lo`.
///
/// The plan's noise amplitude, when positive, corrupts the measurement the
/// controller sees (the recorded `V_meas` stays clean).
pub fn closed_loop<T: Real>(
    plant: &Plant<T>,
    plan: &SimulationPlan<T>,
    gains: &ControllerGains<T>,
    v_ref: &Schedule<T>,
) -> Result<TimeSeries<T>> {
    if plan.duty_source != DutySource::InTheLoop {
        return Err(Error::Domain(
            "closed_loop needs a controller-in-the-loop plan".into(),
        ));
    }
    gains.validate()?;
    let noise = (plan.noise_amplitude > T::zero()).then(|| {
        let a = plan.noise_amplitude.to_f64().unwrap();
        (
            ChaCha8Rng::seed_from_u64(plan.rng_seed),
            Uniform::new_inclusive(-a, a),
        )
    });
    let mut cl = ClosedLoop {
        controller: PiController::new(gains.clone()),
        v_ref,
        noise,
        last: [T::zero(); 5],
    };
    simulate(plant, plan, &mut cl)
}

/// Proportional-only converter loop for the ultimate-gain search.
#[derive(Debug, Clone)]
pub struct ConverterLoop<T> {
    pub plant: Plant<T>,
    pub plan: SimulationPlan<T>,
}

impl<T: Real> ConverterLoop<T> {
    pub fn new(plant: Plant<T>, mut plan: SimulationPlan<T>) -> Self {
        plan.duty_source = DutySource::InTheLoop;
        plan.record_stride = None;
        Self { plant, plan }
    }
}

impl<T: Real> ProportionalLoop<T> for ConverterLoop<T> {
    fn sample_time(&self) -> T {
        self.plant.params.t_samp
    }

    fn respond(&self, kp: T, v_ref: T) -> Result<Vec<T>> {
        let g = ControllerGains::pi(kp, T::zero(), self.plant.params.t_samp);
        let ts = closed_loop(&self.plant, &self.plan, &g, &Schedule::constant(v_ref))?;
        Ok(ts.channel("V_meas")?.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wide(kp: f64, ki: f64) -> ControllerGains<f64> {
        ControllerGains {
            sat_lo: -1e9,
            sat_hi: 1e9,
            ..ControllerGains::pi(kp, ki, 1e-4)
        }
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(saturate(0.95, 0.1, 0.9), 0.9);
        assert_eq!(saturate(0.05, 0.1, 0.9), 0.1);
        assert_eq!(saturate(0.5, 0.1, 0.9), 0.5);
    }

    #[test]
    fn hand_evaluated_recursion() {
        let g = wide(0.1, 0.01);
        let mut c = PiController::new(g);
        let d1: f64 = c.step(1.0).unwrap();
        let d2: f64 = c.step(1.0).unwrap();
        assert!((d1 - 0.11).abs() < 1e-15);
        assert!((d2 - 0.12).abs() < 1e-15);
    }

    #[test]
    fn zero_error_clamps_to_lower_limit() {
        let mut c = PiController::new(ControllerGains::pi(0.1, 0.01, 1e-4));
        for _ in 0..5 {
            assert_eq!(c.step(0.0).unwrap(), 0.1);
            assert_eq!(c.state.last_d, 0.0);
        }
    }

    #[test]
    fn anti_windup_inactive_off_saturation() {
        let pi = ControllerGains::pi(0.001, 0.002, 1e-4);
        let aw = ControllerGains {
            kaw: Some(441.47),
            ..pi.clone()
        };
        let mut a = PiController::new(pi);
        let mut b = PiController::new(aw);
        for k in 0..200 {
            let e = if k == 0 {
                250.0
            } else {
                5.0 * (k as f64 * 0.3).sin()
            };
            let (da, db) = (a.step(e).unwrap(), b.step(e).unwrap());
            assert_eq!(da.to_bits(), db.to_bits());
            assert!(da > 0.1 && da < 0.9);
        }
    }

    #[test]
    fn anti_windup_uses_previous_excess() {
        let g = ControllerGains {
            kaw: Some(2.0),
            ..ControllerGains::pi(1.0_f64, 0.5, 1e-4)
        };
        let st = ControllerState::new(&g);
        let (d_sat, st) = controller_step(&g, &st, 2.0).unwrap();
        // d = 2 + 0.5·2 = 3 → u_d = 2.1
        assert_eq!(d_sat, 0.9);
        assert!((st.last_u_d() - 2.1).abs() < 1e-15);
        let (_, st) = controller_step(&g, &st, 0.0).unwrap();
        // d = 0 + 0.5·2 + 0.5·2·2.1
        assert!((st.last_d - (1.0 + 2.1)).abs() < 1e-12);
    }

    #[test]
    fn non_finite_error_rejected() {
        let g = ControllerGains::pi(0.1, 0.01, 1e-4);
        let st = ControllerState::new(&g);
        assert!(matches!(
            controller_step(&g, &st, f64::NAN),
            Err(Error::Signal(_))
        ));
    }

    #[test]
    fn single_precision_matches_double() {
        let g64 = wide(0.003, 0.0065);
        let g32 = ControllerGains::<f32> {
            kp: 0.003,
            ki: 0.0065,
            kaw: None,
            n_aw: 1,
            t_samp: 1e-4,
            sat_lo: -1e9,
            sat_hi: 1e9,
        };
        let mut a = PiController::new(g64);
        let mut b = PiController::new(g32);
        for k in 0..50 {
            let e = (k as f64 * 0.7).cos();
            let da = a.step(e).unwrap();
            let db = b.step(e as f32).unwrap();
            assert!((da - f64::from(db)).abs() < 1e-5);
        }
    }
}
