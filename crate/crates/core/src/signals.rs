//! Excitation signals and the discrete-time filtering used to build
//! virtual-reference training data.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::TimeSeries;

/// First-order closed-loop target `1/(1 + s·tau)` and its ZOH equivalent
/// `y(k) = a_d·y(k−1) + b_d·u(k−1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceModel<T> {
    pub tau: T,
    pub t_samp: T,
    pub a_d: T,
    pub b_d: T,
}

pub fn discretize_first_order<T: Real>(tau: T, t_samp: T) -> Result<ReferenceModel<T>> {
    if !(tau > T::zero() && t_samp > T::zero()) {
        return Err(Error::Domain(format!(
            "reference model needs tau > 0 and t_samp > 0 (got {tau}, {t_samp})"
        )));
    }
    let a_d = (-t_samp / tau).exp();
    Ok(ReferenceModel {
        tau,
        t_samp,
        a_d,
        b_d: T::one() - a_d,
    })
}

impl<T: Real> ReferenceModel<T> {
    /// Target whose bandwidth is a fixed fraction of the switching frequency:
    /// `tau = 1/f_c` with `f_c = (1/t_s)/ratio`.
    pub fn from_switching(t_s: T, ratio: T, t_samp: T) -> Result<Self> {
        let f_c = T::one() / t_s / ratio;
        discretize_first_order(T::one() / f_c, t_samp)
    }

    /// Runs the forward recursion from `y(0) = y0`; output has `u.len() + 1`
    /// samples.
    pub fn filter(&self, u: &[T], y0: T) -> Vec<T> {
        let mut out = Vec::with_capacity(u.len() + 1);
        let mut y = y0;
        out.push(y);
        for &uk in u {
            y = self.a_d * y + self.b_d * uk;
            out.push(y);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpSpec<T> {
    pub f_start: T,
    pub f_end: T,
    pub duration: T,
    pub amplitude: T,
    pub offset: T,
}

impl<T: Real> ChirpSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_start > T::zero() && self.f_end > T::zero() && self.duration > T::zero()) {
            return Err(Error::Domain(
                "chirp needs positive frequencies and duration".into(),
            ));
        }
        if !(self.amplitude >= T::zero()) {
            return Err(Error::Domain("chirp amplitude must be non-negative".into()));
        }
        let lo = self.offset - self.amplitude;
        let hi = self.offset + self.amplitude;
        if !(lo >= T::zero() && hi <= T::one()) {
            return Err(Error::Domain(format!(
                "chirp range [{lo}, {hi}] leaves [0, 1]"
            )));
        }
        Ok(())
    }
}

/// Linear-frequency chirp sampled every `dt` over `[0, duration]`
/// (both ends included), in a channel named `d`.
pub fn chirp<T: Real>(spec: &ChirpSpec<T>, dt: T) -> Result<TimeSeries<T>> {
    spec.validate()?;
    if !(dt > T::zero()) {
        return Err(Error::Domain("chirp sample period must be positive".into()));
    }
    let n = (spec.duration / dt).round().to_usize().unwrap_or(0) + 1;
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    let sweep = (spec.f_end - spec.f_start) / (T::lit(2.0) * spec.duration);
    let values = (0..n)
        .map(|k| {
            let t = dt * T::from_usize_lossy(k);
            let phase = two_pi * (spec.f_start * t + sweep * t * t);
            spec.offset + spec.amplitude * phase.sin()
        })
        .collect();
    TimeSeries::with_channel(T::zero(), dt, "d", values)
}

/// Inverts the reference-model recursion:
/// `r(k−1) = (y(k) − a_d·y(k−1)) / b_d` for `k = 1..N−1`.
/// The result has one sample fewer than `y`.
pub fn virtual_reference<T: Real>(y: &[T], m: &ReferenceModel<T>) -> Result<Vec<T>> {
    if y.len() < 2 {
        return Err(Error::Domain(
            "virtual reference needs at least two samples".into(),
        ));
    }
    if !(m.b_d.abs() > T::epsilon().sqrt()) {
        return Err(Error::Conditioning {
            singular_values: vec![m.b_d.to_f64().unwrap_or(f64::NAN)],
        });
    }
    Ok(y.windows(2)
        .map(|w| (w[1] - m.a_d * w[0]) / m.b_d)
        .collect())
}

/// `e(k) = r(k) − y(k)`.
pub fn virtual_error<T: Real>(y: &[T], r: &[T]) -> Result<Vec<T>> {
    if y.len() != r.len() {
        return Err(Error::Alignment {
            left: y.len(),
            right: r.len(),
        });
    }
    Ok(r.iter().zip(y).map(|(&r, &y)| r - y).collect())
}

/// Running sum, the discrete integrator `z/(z−1)`; shared by the
/// identification regressors and the controller runtime.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator<T> {
    sum: T,
}

impl<T: Real> Accumulator<T> {
    pub fn new() -> Self {
        Self { sum: T::zero() }
    }

    pub fn value(&self) -> T {
        self.sum
    }

    /// Adds `e` and returns the new sum.
    pub fn push(&mut self, e: T) -> T {
        self.sum = self.sum + e;
        self.sum
    }
}

/// `s(k) = Σ_{j≤k} e(j)`.
pub fn accumulate<T: Real>(e: &[T]) -> Result<Vec<T>> {
    if e.is_empty() {
        return Err(Error::Domain("cannot accumulate an empty signal".into()));
    }
    let mut acc = Accumulator::new();
    Ok(e.iter().map(|&v| acc.push(v)).collect())
}

/// `x(k) − x(k−1)` with `x(−1) = 0`.
pub fn first_difference<T: Real>(x: &[T]) -> Vec<T> {
    let mut prev = T::zero();
    x.iter()
        .map(|&v| {
            let d = v - prev;
            prev = v;
            d
        })
        .collect()
}

/// Optional data prefilter applied to every regression signal.
pub trait Prefilter<T> {
    fn apply(&self, x: &[T]) -> Vec<T>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl<T: Real> Prefilter<T> for Identity {
    fn apply(&self, x: &[T]) -> Vec<T> {
        x.to_vec()
    }
}
