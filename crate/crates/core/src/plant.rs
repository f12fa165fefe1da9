//! Fixed-step simulation of the converter in averaged or switched (PWM) form,
//! with zero-order-held duty commands, measurement and command delays, and
//! piecewise-constant disturbance schedules.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{
    self, BilinearModel, CircuitParameters, State, INPUTS, STATES, STATE_LABELS, V_OUT,
};
use crate::error::{domain, Error, Result};
use crate::linalg::{mat_vec, SquareMatrix};
use crate::ode::rk4_step;
use crate::scalar::Real;
use crate::series::TimeSeries;

/// Model plus the timing constants the simulators need.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant<T> {
    pub model: BilinearModel<T>,
    pub params: CircuitParameters<T>,
}

impl<T: Real> Plant<T> {
    pub fn new(params: CircuitParameters<T>) -> Result<Self> {
        Ok(Self {
            model: circuit::build_model(&params)?,
            params,
        })
    }

    pub fn nominal_input(&self) -> [T; INPUTS] {
        [self.params.v_in_nominal, T::zero()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantMode {
    Averaged,
    Switched,
}

impl std::str::FromStr for PlantMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "averaged" => Ok(Self::Averaged),
            "switched" => Ok(Self::Switched),
            other => Err(Error::Domain(format!("unknown plant mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for PlantMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Averaged => "averaged",
            Self::Switched => "switched",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState<T> {
    /// Cold start.
    Zero,
    /// Averaged equilibrium at the given duty and the `t = 0` inputs.
    EquilibriumAt(T),
    Given(State<T>),
}

/// Piecewise-constant schedule of `(start time, value)` breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule<T> {
    points: Vec<(T, T)>,
}

impl<T: Real> Schedule<T> {
    pub fn constant(v: T) -> Self {
        Self {
            points: vec![(T::zero(), v)],
        }
    }

    pub fn new(mut points: Vec<(T, T)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain(
                "schedule needs at least one breakpoint".into(),
            ));
        }
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(Self { points })
    }

    /// Value in effect at `t`; the first value also covers earlier times.
    pub fn at(&self, t: T) -> T {
        let idx = self.points.partition_point(|&(start, _)| start <= t);
        self.points[idx.saturating_sub(1)].1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DutySource<T> {
    Constant(T),
    /// One command per controller tick, held; the last value is held past the end.
    Series(Vec<T>),
    /// The duty comes from a controller; see [`crate::control::closed_loop`].
    InTheLoop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan<T> {
    pub duration: T,
    pub integrator_step: T,
    pub initial_state: InitialState<T>,
    pub duty_source: DutySource<T>,
    pub v_in_profile: Schedule<T>,
    pub delta_r_profile: Schedule<T>,
    pub mode: PlantMode,
    /// Uniform measurement noise bound on the `V_meas` channel.
    pub noise_amplitude: T,
    pub rng_seed: u64,
    /// Shift the second leg's carrier by half a period.
    pub interleaved: bool,
    /// Apply `tau_meas` / `tau_comm`.
    pub delays: bool,
    /// Saturation applied to open-loop duty commands before they reach the
    /// plant; when set, `d_sat` and `u_d` channels are recorded.
    pub open_loop_saturation: Option<(T, T)>,
    /// Integrator steps between recorded samples; defaults to one controller tick.
    pub record_stride: Option<usize>,
}

impl<T: Real> SimulationPlan<T> {
    /// Cold-start plan at the PWM resolution with nominal inputs.
    pub fn new(plant: &Plant<T>, duration: T, mode: PlantMode, duty_source: DutySource<T>) -> Self {
        Self {
            duration,
            integrator_step: plant.params.dt_pwm,
            initial_state: InitialState::Zero,
            duty_source,
            v_in_profile: Schedule::constant(plant.params.v_in_nominal),
            delta_r_profile: Schedule::constant(T::zero()),
            mode,
            noise_amplitude: T::zero(),
            rng_seed: 0,
            interleaved: false,
            delays: true,
            open_loop_saturation: None,
            record_stride: None,
        }
    }

    pub fn inputs_at(&self, t: T) -> [T; INPUTS] {
        [self.v_in_profile.at(t), self.delta_r_profile.at(t)]
    }
}

pub(crate) fn integer_ratio<T: Real>(num: T, den: T, what: &str) -> Result<usize> {
    let r = num / den;
    let n = r.round();
    if !(n >= T::one()) || (r - n).abs() > T::lit(1e-6) * n {
        return Err(domain(
            what,
            format!("{num} is not an integer multiple of {den}"),
        ));
    }
    Ok(n.to_usize().unwrap())
}

fn check_duty<T: Real>(d: T) -> Result<T> {
    if d >= T::zero() && d <= T::one() {
        Ok(d)
    } else {
        Err(Error::Domain(format!("duty {d} outside [0, 1]")))
    }
}

/// Carrier comparator on a tick grid.
#[derive(Debug, Clone, Copy)]
struct Carrier {
    ticks_per_period: usize,
    interleaved: bool,
}

impl Carrier {
    fn offset(&self, leg: usize) -> usize {
        if self.interleaved && leg == 1 {
            self.ticks_per_period / 2
        } else {
            0
        }
    }

    /// Tick at which the period containing `tick` began for `leg`, in the
    /// undelayed frame (may be negative for the shifted leg).
    fn period_start(&self, tick: usize, leg: usize) -> i64 {
        let off = self.offset(leg);
        let shifted = tick + off;
        (shifted - shifted % self.ticks_per_period) as i64 - off as i64
    }

    fn switch<T: Real>(&self, tick: usize, leg: usize, latched_duty: T) -> bool {
        let pos = (tick + self.offset(leg)) % self.ticks_per_period;
        let high = (latched_duty * T::from_usize_lossy(self.ticks_per_period))
            .round()
            .to_usize()
            .unwrap_or(0);
        pos < high
    }
}

/// Converts a duty sequence into binary per-leg switch signals on the
/// `dt_pwm` grid. Each carrier period latches the duty in effect at its
/// start and stays high for `round(d·t_s/dt_pwm)` ticks.
pub fn pwm_generate<T: Real>(
    duty_samples: &TimeSeries<T>,
    channel: &str,
    t_s: T,
    dt_pwm: T,
) -> Result<TimeSeries<T>> {
    pwm_generate_with(duty_samples, channel, t_s, dt_pwm, false)
}

pub fn pwm_generate_with<T: Real>(
    duty_samples: &TimeSeries<T>,
    channel: &str,
    t_s: T,
    dt_pwm: T,
    interleaved: bool,
) -> Result<TimeSeries<T>> {
    let duty = duty_samples.channel(channel)?;
    for &d in duty {
        check_duty(d)?;
    }
    let tpp = integer_ratio(t_s, dt_pwm, "t_s")?;
    let ticks_per_sample = integer_ratio(duty_samples.dt(), dt_pwm, "duty sample period")?;
    let carrier = Carrier {
        ticks_per_period: tpp,
        interleaved,
    };
    let total = duty.len() * ticks_per_sample;
    let mut legs = [Vec::with_capacity(total), Vec::with_capacity(total)];
    for tick in 0..total {
        for (leg, out) in legs.iter_mut().enumerate() {
            let start = carrier.period_start(tick, leg).max(0) as usize;
            let d = duty[start / ticks_per_sample];
            out.push(if carrier.switch(tick, leg, d) {
                T::one()
            } else {
                T::zero()
            });
        }
    }
    let [s1, s2] = legs;
    let mut ts = TimeSeries::with_channel(duty_samples.t0(), dt_pwm, "s1", s1)?;
    ts.push_channel("s2", s2)?;
    Ok(ts)
}

/// Adds i.i.d. uniform noise on `[-amplitude, amplitude]` to one channel.
pub fn apply_noise<T: Real>(
    ts: &TimeSeries<T>,
    channel: &str,
    amplitude: T,
    seed: u64,
) -> Result<TimeSeries<T>> {
    if !(amplitude >= T::zero()) {
        return Err(Error::Domain(format!(
            "noise amplitude {amplitude} must be >= 0"
        )));
    }
    let mut out = ts.clone();
    let values = out.channel_mut(channel)?;
    if amplitude == T::zero() {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = amplitude.to_f64().unwrap();
    let dist = Uniform::new_inclusive(-a, a);
    for v in values.iter_mut() {
        *v = *v + T::lit(dist.sample(&mut rng));
    }
    Ok(out)
}

/// Source of duty commands for the engine, queried once per controller tick.
pub(crate) trait Commander<T> {
    /// Duty seen by the plant before the first command arrives.
    fn warmup(&self) -> T;
    fn channels(&self) -> Vec<&'static str>;
    /// Returns the duty command to send to the plant.
    fn command(&mut self, tick: usize, t: T, v_meas: T) -> Result<T>;
    /// Latest values of [`Self::channels`].
    fn snapshot(&self, out: &mut Vec<T>);
}

struct OpenLoop<T> {
    source: DutySource<T>,
    saturation: Option<(T, T)>,
    last: [T; 3],
    first: T,
}

impl<T: Real> OpenLoop<T> {
    fn new(source: DutySource<T>, saturation: Option<(T, T)>) -> Result<Self> {
        let first = match &source {
            DutySource::Constant(d) => *d,
            DutySource::Series(v) => *v
                .first()
                .ok_or_else(|| Error::Domain("empty duty series".into()))?,
            DutySource::InTheLoop => {
                return Err(Error::Domain(
                    "controller-in-the-loop plans are run through closed_loop".into(),
                ))
            }
        };
        let mut ol = Self {
            source,
            saturation,
            last: [T::zero(); 3],
            first,
        };
        ol.first = ol.apply(first)?.1;
        Ok(ol)
    }

    fn apply(&self, d: T) -> Result<(T, T)> {
        match self.saturation {
            Some((lo, hi)) => Ok((d, check_duty(d.max(lo).min(hi))?)),
            None => Ok((d, check_duty(d)?)),
        }
    }
}

impl<T: Real> Commander<T> for OpenLoop<T> {
    fn warmup(&self) -> T {
        self.first
    }

    fn channels(&self) -> Vec<&'static str> {
        match self.saturation {
            Some(_) => vec!["d", "d_sat", "u_d"],
            None => vec!["d"],
        }
    }

    fn command(&mut self, tick: usize, _t: T, _v_meas: T) -> Result<T> {
        let d = match &self.source {
            DutySource::Constant(d) => *d,
            DutySource::Series(v) => v[tick.min(v.len() - 1)],
            DutySource::InTheLoop => unreachable!(),
        };
        let (d, d_sat) = self.apply(d)?;
        self.last = [d, d_sat, d - d_sat];
        Ok(d_sat)
    }

    fn snapshot(&self, out: &mut Vec<T>) {
        let n = if self.saturation.is_some() { 3 } else { 1 };
        out.extend_from_slice(&self.last[..n]);
    }
}

/// Right-hand side with cached `K⁻¹A` for the current switching configuration.
struct Field<T> {
    a: SquareMatrix<T, STATES>,
    b: [[T; INPUTS]; STATES],
}

impl<T: Real> Field<T> {
    /// Leg-resolved configuration: leg `i` conducts with weight `s[i]`.
    /// Entry `(r, c)` of `A1` is weighted by the weights of the legs that
    /// row `r` and column `c` belong to, so equal legs give `A0 + s·A1`
    /// for binary `s` and `A0 + d·A1` when both weights equal `d` and the
    /// table has no cross-leg products; the averaged path uses the latter.
    fn leg_resolved(m: &BilinearModel<T>, s: [T; 2]) -> Self {
        let w = |i: usize| if i < 2 { s[i] } else { T::one() };
        let mut a = m.a0;
        let mut b = m.b0;
        for i in 0..STATES {
            for j in 0..STATES {
                a[i][j] = (a[i][j] + w(i) * w(j) * m.a1[i][j]) / m.k_mat[i][i];
            }
            for j in 0..INPUTS {
                b[i][j] = (b[i][j] + w(i) * m.b1[i][j]) / m.k_mat[i][i];
            }
        }
        Self { a, b }
    }

    fn averaged(m: &BilinearModel<T>, d: T) -> Self {
        let mut a = m.system_matrix(d);
        let mut b = m.b0;
        for i in 0..STATES {
            for j in 0..STATES {
                a[i][j] = a[i][j] / m.k_mat[i][i];
            }
            for j in 0..INPUTS {
                b[i][j] = (b[i][j] + d * m.b1[i][j]) / m.k_mat[i][i];
            }
        }
        Self { a, b }
    }

    fn forcing(&self, w: &[T; INPUTS]) -> [T; STATES] {
        mat_vec(&self.b, w)
    }
}

fn step_field<T: Real>(field: &Field<T>, x: &State<T>, w: &[T; INPUTS], h: T) -> State<T> {
    let f = field.forcing(w);
    rk4_step(x, h, |x| {
        let mut dx = mat_vec(&field.a, x);
        for (d, fi) in dx.iter_mut().zip(&f) {
            *d = *d + *fi;
        }
        dx
    })
}

/// Core fixed-step loop shared by every simulation entry point.
pub(crate) fn simulate<T: Real, C: Commander<T>>(
    plant: &Plant<T>,
    plan: &SimulationPlan<T>,
    commander: &mut C,
) -> Result<TimeSeries<T>> {
    let p = &plant.params;
    let m = &plant.model;
    let h = plan.integrator_step;
    if !(h > T::zero()) {
        return Err(domain("integrator_step", "must be positive"));
    }
    if !(plan.duration > T::zero()) {
        return Err(domain("duration", "must be positive"));
    }
    let steps_per_tick = integer_ratio(p.t_samp, h, "t_samp / integrator_step")?;
    let (steps_per_pwm_tick, carrier) = match plan.mode {
        PlantMode::Averaged => (0, None),
        PlantMode::Switched => {
            if h > p.dt_pwm * (T::one() + T::lit(1e-9)) {
                return Err(domain(
                    "integrator_step",
                    "switched mode needs integrator_step <= dt_pwm",
                ));
            }
            let sub = integer_ratio(p.dt_pwm, h, "dt_pwm / integrator_step")?;
            let carrier = Carrier {
                ticks_per_period: integer_ratio(p.t_s, p.dt_pwm, "t_s / dt_pwm")?,
                interleaved: plan.interleaved,
            };
            (sub, Some(carrier))
        }
    };
    let ticks = (plan.duration / p.t_samp)
        .round()
        .to_usize()
        .unwrap_or(0)
        .max(1);
    let total_steps = ticks * steps_per_tick;
    let stride = plan.record_stride.unwrap_or(steps_per_tick).max(1);
    let (k_meas, k_comm) = if plan.delays {
        (
            (p.tau_meas / h).round().to_usize().unwrap_or(0),
            (p.tau_comm / h).round().to_usize().unwrap_or(0),
        )
    } else {
        (0, 0)
    };

    let w0 = plan.inputs_at(T::zero());
    let mut x: State<T> = match &plan.initial_state {
        InitialState::Zero => [T::zero(); STATES],
        InitialState::EquilibriumAt(d) => circuit::equilibrium(m, *d, &w0)?,
        InitialState::Given(x) => *x,
    };

    // Per-step V_out history for the measurement delay and the period mean.
    let period_steps = match carrier {
        Some(c) => c.ticks_per_period * steps_per_pwm_tick,
        None => 1,
    };
    let hist_len = (k_meas + 1).max(period_steps);
    let mut hist = std::collections::VecDeque::with_capacity(hist_len + 1);
    hist.push_back(m.output(&x));
    let mut window_sum = m.output(&x);

    let mut commands: Vec<T> = Vec::with_capacity(ticks + 1);
    let warmup = commander.warmup();
    let extra = commander.channels();
    let mut names: Vec<String> = STATE_LABELS.iter().map(|s| s.to_string()).collect();
    names[V_OUT] = "V_out".into();
    names.push("V_meas".into());
    if carrier.is_some() {
        names.push("V_out_avg".into());
    }
    names.extend(extra.iter().map(|s| s.to_string()));
    let mut columns: Vec<Vec<T>> = vec![Vec::with_capacity(total_steps / stride + 1); names.len()];
    let mut scratch = Vec::with_capacity(extra.len());
    let mut v_meas = m.output(&x);

    let mut averaged_cache: Option<(T, Field<T>)> = None;
    let mut switched_cache: [Option<Field<T>>; 4] = [None, None, None, None];

    for i in 0..=total_steps {
        let t = h * T::from_usize_lossy(i);
        if i % steps_per_tick == 0 {
            let back = k_meas.min(hist.len() - 1);
            v_meas = hist[hist.len() - 1 - back];
            let tick = i / steps_per_tick;
            let cmd = commander.command(tick, t, v_meas)?;
            commands.push(cmd);
        }
        if i % stride == 0 {
            for (col, v) in columns.iter_mut().zip(x.iter()) {
                col.push(*v);
            }
            columns[STATES].push(v_meas);
            let mut c = STATES + 1;
            if carrier.is_some() {
                columns[c].push(window_sum / T::from_usize_lossy(hist.len().min(period_steps)));
                c += 1;
            }
            scratch.clear();
            commander.snapshot(&mut scratch);
            for (col, v) in columns[c..].iter_mut().zip(&scratch) {
                col.push(*v);
            }
        }
        if i == total_steps {
            break;
        }

        let w = plan.inputs_at(t);
        let command_at = |step: i64| -> T {
            if step < 0 {
                warmup
            } else {
                commands[step as usize / steps_per_tick]
            }
        };
        let j = i as i64 - k_comm as i64;
        x = match carrier {
            None => {
                let d = command_at(j);
                let fresh = !matches!(&averaged_cache, Some((cd, _)) if *cd == d);
                if fresh {
                    averaged_cache = Some((d, Field::averaged(m, d)));
                }
                step_field(&averaged_cache.as_ref().unwrap().1, &x, &w, h)
            }
            Some(c) => {
                let mut s = [false; 2];
                for (leg, s_leg) in s.iter_mut().enumerate() {
                    *s_leg = if j < 0 {
                        let tick = j.div_euclid(steps_per_pwm_tick as i64);
                        let wrapped = tick.rem_euclid(c.ticks_per_period as i64) as usize;
                        c.switch(wrapped, leg, warmup)
                    } else {
                        let tick = j as usize / steps_per_pwm_tick;
                        let start = c.period_start(tick, leg);
                        let d = command_at(start * steps_per_pwm_tick as i64);
                        c.switch(tick, leg, d)
                    };
                }
                let key = (s[0] as usize) | ((s[1] as usize) << 1);
                let field = switched_cache[key].get_or_insert_with(|| {
                    let f = |b: bool| if b { T::one() } else { T::zero() };
                    Field::leg_resolved(m, [f(s[0]), f(s[1])])
                });
                step_field(field, &x, &w, h)
            }
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                time: (t + h).to_f64().unwrap_or(f64::NAN),
            });
        }
        let y = m.output(&x);
        hist.push_back(y);
        window_sum = window_sum + y;
        if hist.len() > period_steps {
            let idx = hist.len() - 1 - period_steps;
            window_sum = window_sum - hist[idx];
        }
        while hist.len() > hist_len {
            hist.pop_front();
        }
    }

    let record_dt = h * T::from_usize_lossy(stride);
    let mut ts = TimeSeries::new(T::zero(), record_dt)?;
    for (name, col) in names.iter().zip(columns) {
        ts.push_channel(name, col)?;
    }
    Ok(ts)
}

fn run_open_loop<T: Real>(plant: &Plant<T>, plan: &SimulationPlan<T>) -> Result<TimeSeries<T>> {
    let mut ol = OpenLoop::new(plan.duty_source.clone(), plan.open_loop_saturation)?;
    let ts = simulate(plant, plan, &mut ol)?;
    if plan.noise_amplitude > T::zero() {
        return apply_noise(&ts, "V_meas", plan.noise_amplitude, plan.rng_seed);
    }
    Ok(ts)
}

/// Averaged model under zero-order-held duty commands, integrated by RK4.
pub fn integrate_averaged<T: Real>(
    plant: &Plant<T>,
    plan: &SimulationPlan<T>,
) -> Result<TimeSeries<T>> {
    if plan.mode != PlantMode::Averaged {
        return Err(Error::Domain(
            "integrate_averaged needs an averaged plan".into(),
        ));
    }
    run_open_loop(plant, plan)
}

/// Switched model: the duty is replaced by the PWM switch signal of each leg.
pub fn integrate_switched<T: Real>(
    plant: &Plant<T>,
    plan: &SimulationPlan<T>,
) -> Result<TimeSeries<T>> {
    if plan.mode != PlantMode::Switched {
        return Err(Error::Domain(
            "integrate_switched needs a switched plan".into(),
        ));
    }
    run_open_loop(plant, plan)
}

/// Dispatches on `plan.mode`.
pub fn integrate<T: Real>(plant: &Plant<T>, plan: &SimulationPlan<T>) -> Result<TimeSeries<T>> {
    run_open_loop(plant, plan)
}
