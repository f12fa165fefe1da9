//! Controller synthesis: Ziegler–Nichols auto-tuning, VRFT least squares and
//! the anti-windup extension.

use crate::error::{domain, Error, Result};
use crate::linalg::least_squares;
use crate::scalar::Real;
use crate::signals::{accumulate, virtual_error, virtual_reference, Prefilter, ReferenceModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains<T> {
    pub kp: T,
    /// Per-sample accumulator gain.
    pub ki: T,
    pub kaw: Option<T>,
    pub n_aw: usize,
    pub t_samp: T,
    pub sat_lo: T,
    pub sat_hi: T,
}

impl<T: Real> ControllerGains<T> {
    /// Plain PI with the default duty limits `[0.1, 0.9]`.
    pub fn pi(kp: T, ki: T, t_samp: T) -> Self {
        Self {
            kp,
            ki,
            kaw: None,
            n_aw: 1,
            t_samp,
            sat_lo: T::lit(0.1),
            sat_hi: T::lit(0.9),
        }
    }

    pub fn pi_aw(kp: T, ki: T, kaw: T, n_aw: usize, t_samp: T) -> Self {
        Self {
            kaw: Some(kaw),
            n_aw,
            ..Self::pi(kp, ki, t_samp)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.kp, self.ki, self.t_samp, self.sat_lo, self.sat_hi]
            .iter()
            .chain(self.kaw.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(domain("gains", "must be finite"));
        }
        if !(self.t_samp > T::zero()) {
            return Err(domain("t_samp", "must be positive"));
        }
        if !(self.sat_lo < self.sat_hi) {
            return Err(domain("sat_lo", "must be below sat_hi"));
        }
        if self.kaw.is_some() && self.n_aw == 0 {
            return Err(domain("n_aw", "must be at least 1 with anti-windup"));
        }
        Ok(())
    }

    /// Continuous-time integral gain `ki / t_samp`.
    pub fn ki_continuous(&self) -> T {
        self.ki / self.t_samp
    }
}

/// One evaluated grid gain of the ultimate-gain search.
#[derive(Debug, Clone, PartialEq)]
pub struct GainProbe {
    pub gain: f64,
    pub sustained: bool,
    /// Last-to-first cycle amplitude over the analysed periods (0 if none).
    pub amplitude_ratio: f64,
    /// Mean peak spacing in seconds (0 if fewer than two peaks).
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UltimateGainResult<T> {
    pub ku: T,
    pub tu: T,
    pub gain_trace: Vec<GainProbe>,
}

/// Thresholds deciding when an oscillation counts as sustained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationCriteria {
    pub periods: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Cycle amplitudes below `amplitude_floor · v_ref` count as settled.
    pub amplitude_floor: f64,
    /// Absolute amplitude floor in output units; used to ignore limit cycles
    /// caused by duty quantization.
    pub absolute_floor: f64,
}

impl Default for OscillationCriteria {
    fn default() -> Self {
        Self {
            periods: 20,
            min_ratio: 0.1,
            max_ratio: 10.0,
            amplitude_floor: 1e-3,
            absolute_floor: 0.0,
        }
    }
}

/// Closed loop under proportional-only control, sampled at the controller rate.
pub trait ProportionalLoop<T>: Sync {
    fn sample_time(&self) -> T;
    /// Measured output at every controller tick for gain `kp` and setpoint `v_ref`.
    fn respond(&self, kp: T, v_ref: T) -> Result<Vec<T>>;
}

/// Classifies the tail of a sampled response.
pub fn analyze_oscillation<T: Real>(
    y: &[T],
    dt: T,
    v_ref: T,
    criteria: &OscillationCriteria,
) -> (bool, f64, f64) {
    let y: Vec<f64> = y.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return (false, f64::INFINITY, 0.0);
    }
    let peaks: Vec<usize> = (1..y.len().saturating_sub(1))
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .collect();
    let need = criteria.periods + 1;
    if peaks.len() < need {
        return (false, 0.0, 0.0);
    }
    let tail = &peaks[peaks.len() - need..];
    let amps: Vec<f64> = tail
        .windows(2)
        .map(|w| {
            let lo = y[w[0]..=w[1]].iter().cloned().fold(f64::INFINITY, f64::min);
            y[w[0]] - lo
        })
        .collect();
    let period = (tail[need - 1] - tail[0]) as f64 / criteria.periods as f64 * dt.to_f64().unwrap();
    let first = amps[0];
    let last = amps[amps.len() - 1];
    let floor =
        (criteria.amplitude_floor * v_ref.to_f64().unwrap().abs()).max(criteria.absolute_floor);
    if first <= 0.0 {
        return (false, 0.0, period);
    }
    let ratio = last / first;
    let sustained =
        last > floor && first > floor && ratio >= criteria.min_ratio && ratio <= criteria.max_ratio;
    (sustained, ratio, period)
}

/// Smallest grid gain producing a sustained oscillation. Grid points are
/// simulated in parallel and reduced in grid order.
pub fn find_ultimate_gain<T: Real, L: ProportionalLoop<T>>(
    plant: &L,
    gain_grid: &[T],
    v_ref: T,
    criteria: &OscillationCriteria,
) -> Result<UltimateGainResult<T>> {
    if gain_grid.is_empty() {
        return Err(domain("gain_grid", "must be nonempty"));
    }
    if gain_grid.windows(2).any(|w| !(w[0] < w[1])) || !(gain_grid[0] > T::zero()) {
        return Err(domain(
            "gain_grid",
            "must be positive and strictly ascending",
        ));
    }
    let dt = plant.sample_time();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut trace = Vec::new();
    for chunk in gain_grid.chunks(workers) {
        let results: Vec<Result<GainProbe>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&kp| {
                    s.spawn(move || -> Result<GainProbe> {
                        let gain = kp.to_f64().unwrap();
                        let (sustained, amplitude_ratio, period) = match plant.respond(kp, v_ref) {
                            Ok(y) => analyze_oscillation(&y, dt, v_ref, criteria),
                            Err(Error::Integration { .. }) => (false, f64::INFINITY, 0.0),
                            Err(e) => return Err(e),
                        };
                        Ok(GainProbe {
                            gain,
                            sustained,
                            amplitude_ratio,
                            period,
                        })
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("probe thread panicked"))
                .collect()
        });
        for r in results {
            let probe = r?;
            let hit = probe.sustained;
            trace.push(probe);
            if hit {
                let p = trace.last().unwrap();
                return Ok(UltimateGainResult {
                    ku: T::lit(p.gain),
                    tu: T::lit(p.period),
                    gain_trace: trace,
                });
            }
        }
    }
    Err(Error::SearchFailure { trace })
}

/// `kp = 0.45·ku`, `ki = 0.54·ku/tu · t_samp`.
pub fn zn_gains<T: Real>(ku: T, tu: T, t_samp: T) -> Result<ControllerGains<T>> {
    if !(ku > T::zero()) || !ku.is_finite() {
        return Err(domain("ku", "must be positive"));
    }
    if !(tu > T::zero()) || !tu.is_finite() {
        return Err(domain("tu", "must be positive"));
    }
    if !(t_samp > T::zero()) {
        return Err(domain("t_samp", "must be positive"));
    }
    let kp = T::lit(0.45) * ku;
    let ki = T::lit(0.54) * ku / tu * t_samp;
    Ok(ControllerGains::pi(kp, ki, t_samp))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport<T> {
    pub gains: ControllerGains<T>,
    pub theta: Vec<T>,
    pub residual_rms: T,
    pub condition_number: T,
    pub samples: usize,
}

fn check_aligned<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Alignment {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 samples, got {}",
            a.len()
        )));
    }
    Ok(())
}

/// Classic VRFT: regress `d` on `[e, Σe]`.
pub fn vrft_fit<T: Real>(d: &[T], e: &[T], t_samp: T) -> Result<FitReport<T>> {
    check_aligned(d, e)?;
    let s = accumulate(e)?;
    let ls = least_squares(&[e.to_vec(), s], d)?;
    Ok(FitReport {
        gains: ControllerGains::pi(ls.theta[0], ls.theta[1], t_samp),
        condition_number: ls.condition_number(),
        theta: ls.theta,
        residual_rms: ls.residual_rms,
        samples: d.len(),
    })
}

/// `Σ_{j=1..n} u(t−j)` with zeros before the record.
pub fn lagged_sum<T: Real>(u: &[T], n: usize) -> Vec<T> {
    (0..u.len())
        .map(|t| {
            (1..=n)
                .filter(|&j| j <= t)
                .fold(T::zero(), |acc, j| acc + u[t - j])
        })
        .collect()
}

/// Anti-windup VRFT: regress `d` on `[e, Σe, Σ_{j=1..n_aw} u_d(t−j)]` and
/// return `kaw = θ3/θ2`.
pub fn vrft_fit_aw<T: Real>(
    d: &[T],
    e: &[T],
    u_d: &[T],
    n_aw: usize,
    t_samp: T,
) -> Result<FitReport<T>> {
    check_aligned(d, e)?;
    check_aligned(d, u_d)?;
    if n_aw == 0 {
        return Err(domain("n_aw", "must be at least 1"));
    }
    let lagged = lagged_sum(u_d, n_aw);
    if lagged.iter().all(|v| *v == T::zero()) {
        return Err(Error::Excitation);
    }
    let s = accumulate(e)?;
    let ls = least_squares(&[e.to_vec(), s, lagged], d)?;
    let (kp, ki, k3) = (ls.theta[0], ls.theta[1], ls.theta[2]);
    let scale = kp.abs().max(k3.abs()).max(T::min_positive_value());
    if ki.abs() <= scale * T::epsilon().sqrt() {
        return Err(Error::Degenerate(format!(
            "integral gain {ki} too close to zero for kaw = θ3/θ2"
        )));
    }
    Ok(FitReport {
        gains: ControllerGains::pi_aw(kp, ki, k3 / ki, n_aw, t_samp),
        condition_number: ls.condition_number(),
        theta: ls.theta,
        residual_rms: ls.residual_rms,
        samples: d.len(),
    })
}

/// Regression data on the common N−1 grid: the final virtual-reference sample
/// is dropped and `d`, `u_d` are truncated to match.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T> {
    pub d: Vec<T>,
    pub e: Vec<T>,
    pub u_d: Option<Vec<T>>,
}

impl<T: Real> TrainingSet<T> {
    pub fn from_open_loop(
        y: &[T],
        d: &[T],
        u_d: Option<&[T]>,
        model: &ReferenceModel<T>,
        prefilter: &dyn Prefilter<T>,
    ) -> Result<Self> {
        if y.len() != d.len() {
            return Err(Error::Alignment {
                left: y.len(),
                right: d.len(),
            });
        }
        if let Some(u) = u_d {
            if u.len() != d.len() {
                return Err(Error::Alignment {
                    left: d.len(),
                    right: u.len(),
                });
            }
        }
        let y = prefilter.apply(y);
        let d = prefilter.apply(d);
        let r = virtual_reference(&y, model)?;
        let e = virtual_error(&y[..r.len()], &r)?;
        let n = e.len();
        Ok(Self {
            d: d[..n].to_vec(),
            e,
            u_d: u_d.map(|u| prefilter.apply(u)[..n].to_vec()),
        })
    }
}
