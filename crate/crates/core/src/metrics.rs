//! Transient performance indicators of a closed-loop run.

use crate::error::{domain, Result};
use crate::scalar::Real;
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceReport<T> {
    pub controller_name: String,
    pub undershoot_pct: T,
    /// `None` when the output never stays inside the ±5% band.
    pub settling_time_5pct: Option<T>,
    pub steady_state_error: T,
    pub saturation_duration: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsConfig<T> {
    pub controller_name: String,
    pub output_channel: String,
    /// Duty limits; saturation time is counted on the `d_sat` channel.
    pub saturation: Option<(T, T)>,
    /// Extra time kept after the first band entry when no window is given.
    pub tail: T,
}

impl<T: Real> Default for MetricsConfig<T> {
    fn default() -> Self {
        Self {
            controller_name: String::new(),
            output_channel: "V_out".into(),
            saturation: Some((T::lit(0.1), T::lit(0.9))),
            tail: T::lit(5e-3),
        }
    }
}

impl<T: Real> MetricsConfig<T> {
    pub fn named(name: &str) -> Self {
        Self {
            controller_name: name.into(),
            ..Self::default()
        }
    }
}

fn band<T: Real>(y: T, v_ref: T) -> bool {
    (y - v_ref).abs() <= T::lit(0.05) * v_ref
}

/// Metrics over `window` (absolute times, inclusive). Without a window the
/// first transient is used: series start until first 5%-band entry plus
/// `cfg.tail`.
///
/// Undershoot is the dip below `v_ref` after the first upward crossing of
/// `v_ref`; if the output never crosses, the global minimum in the window is
/// used instead.
pub fn compute_metrics<T: Real>(
    ts: &TimeSeries<T>,
    v_ref: T,
    window: Option<(T, T)>,
    cfg: &MetricsConfig<T>,
) -> Result<PerformanceReport<T>> {
    if !(v_ref > T::zero()) {
        return Err(domain("v_ref", "must be positive"));
    }
    let y = ts.channel(&cfg.output_channel)?;
    if y.is_empty() {
        return Err(domain("series", "is empty"));
    }
    let dt = ts.dt();
    let t_end = ts.time(y.len() - 1);
    let half = dt / T::lit(2.0);
    let (w0, w1) = match window {
        Some((a, b)) => {
            if !(a <= b) || a < ts.t0() - half || b > t_end + half {
                return Err(domain("window", "must lie within the series"));
            }
            (a, b)
        }
        None => {
            let end = match y.iter().position(|&v| band(v, v_ref)) {
                Some(k) => (ts.time(k) + cfg.tail).min(t_end),
                None => t_end,
            };
            (ts.t0(), end)
        }
    };
    let index = |t: T| -> usize {
        let k = ((t - ts.t0()) / dt).round().to_usize().unwrap_or(0);
        k.min(y.len() - 1)
    };
    let (i0, i1) = (index(w0), index(w1));
    let yw = &y[i0..=i1];

    let lowest = |s: &[T]| s.iter().cloned().fold(T::infinity(), T::min);
    let dip = match yw.iter().position(|&v| v >= v_ref) {
        Some(c) => lowest(&yw[c..]),
        None => lowest(yw),
    };
    let undershoot_pct = ((v_ref - dip) / v_ref * T::lit(100.0)).max(T::zero());

    let settling_time_5pct = match yw.iter().rposition(|&v| !band(v, v_ref)) {
        None => Some(T::zero()),
        Some(k) if k + 1 == yw.len() => None,
        Some(k) => Some(ts.time(i0 + k + 1) - ts.time(i0)),
    };

    let n_tail = (yw.len() / 10).max(1);
    let tail = &yw[yw.len() - n_tail..];
    let steady_state_error =
        tail.iter().fold(T::zero(), |acc, &v| acc + (v_ref - v)) / T::from_usize_lossy(n_tail);

    let saturation_duration = match (cfg.saturation, ts.channel("d_sat")) {
        (Some((lo, hi)), Ok(d)) => {
            let hits = d[i0..=i1].iter().filter(|&&v| v <= lo || v >= hi).count();
            dt * T::from_usize_lossy(hits)
        }
        _ => T::zero(),
    };

    Ok(PerformanceReport {
        controller_name: cfg.controller_name.clone(),
        undershoot_pct,
        settling_time_5pct,
        steady_state_error,
        saturation_duration,
    })
}
