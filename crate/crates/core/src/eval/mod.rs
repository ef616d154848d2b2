// Copyright (c) 2026 The trsbd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Analytic oracles and run metrics.
//!
//! Rates are in Mbps unless noted, times in ms for intervals and in seconds
//! for the queue-growth fits.

use std::io::Write;

use serde::Serialize;

use crate::detect::{DetectError, DetectorConfig, RttSample, SlopeTracker, TimeWindow, WindowVerdict};
use crate::netsim::QueueMonitor;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("both rates are zero")]
    BothZero,
    #[error("rates must be non-negative and finite")]
    NegativeRate,
    #[error("single-path mean rate must be positive")]
    ZeroDenominator,
    #[error("segment has {0} samples, need at least 5")]
    ShortSegment(usize),
    #[error("all sample times are equal")]
    DegenerateTimes,
    #[error("loss rate must be in (0, 1), got {0}")]
    BadLossRate(f64),
    #[error("rtt must be positive, got {0}")]
    BadRtt(f64),
    #[error("no paths")]
    NoPaths,
}

/// Two-party Jain index between the mean single-path rate and the
/// multipath rate: `(a + b)^2 / (2 (a^2 + b^2))`.
pub fn jain_index(x_sp_mean: f64, x_mp: f64) -> Result<f64, EvalError> {
    if !(x_sp_mean >= 0.0 && x_mp >= 0.0 && x_sp_mean.is_finite() && x_mp.is_finite()) {
        return Err(EvalError::NegativeRate);
    }
    let den = 2.0 * (x_sp_mean * x_sp_mean + x_mp * x_mp);
    if den == 0.0 {
        return Err(EvalError::BothZero);
    }
    let s = x_sp_mean + x_mp;
    Ok(s * s / den)
}

/// `x_mp / x_sp_mean`.
pub fn throughput_ratio(x_mp: f64, x_sp_mean: f64) -> Result<f64, EvalError> {
    if !(x_sp_mean > 0.0) {
        return Err(EvalError::ZeroDenominator);
    }
    if !(x_mp >= 0.0) {
        return Err(EvalError::NegativeRate);
    }
    Ok(x_mp / x_sp_mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    SqrtLaw,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitReport {
    pub model: FitModel,
    /// `r^2 = slope * t + intercept` for the square-root law, `y = slope * t +
    /// intercept` for the linear model
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// (first, last) sample time
    pub segment: (f64, f64),
}

impl FitReport {
    /// Flow count implied by a square-root-law fit at capacity `c_pps`.
    pub fn implied_flows(&self, c_pps: f64) -> f64 {
        self.slope * c_pps / 2.0
    }

    /// Fitted base RTT of a square-root-law fit, when the intercept allows.
    pub fn r_min(&self) -> Option<f64> {
        (self.intercept >= 0.0).then(|| self.intercept.sqrt())
    }
}

fn least_squares(t: &[f64], y: &[f64]) -> Result<(f64, f64, f64), EvalError> {
    let n = t.len();
    if n < 5 {
        return Err(EvalError::ShortSegment(n));
    }
    let nf = n as f64;
    let t0 = t[0];
    let mt = t.iter().map(|x| x - t0).sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, v) in t.iter().zip(y) {
        let dx = x - t0 - mt;
        let dy = v - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(EvalError::DegenerateTimes);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * (mt + t0);
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok((slope, intercept, r2))
}

/// Least-squares line through `(t, y)`.
pub fn fit_linear(t: &[f64], y: &[f64]) -> Result<FitReport, EvalError> {
    let (slope, intercept, r_squared) = least_squares(t, y)?;
    Ok(FitReport {
        model: FitModel::Linear,
        slope,
        intercept,
        r_squared,
        segment: (t[0], t[t.len() - 1]),
    })
}

/// Fits `r(t)^2 = (2n/C) t + r_min^2` to RTT samples of one queue-filling
/// episode; `t` in seconds since the episode start, `r` in seconds.
pub fn fit_sqrt_law(t_s: &[f64], rtt_s: &[f64]) -> Result<FitReport, EvalError> {
    let r2: Vec<f64> = rtt_s.iter().map(|r| r * r).collect();
    let (slope, intercept, r_squared) = least_squares(t_s, &r2)?;
    Ok(FitReport {
        model: FitModel::SqrtLaw,
        slope,
        intercept,
        r_squared,
        segment: (t_s[0], t_s[t_s.len() - 1]),
    })
}

/// RTT after `t_s` seconds of queue growth by `n` flows at capacity `c_pps`.
pub fn sqrt_law_rtt(n: f64, c_pps: f64, r_min_s: f64, t_s: f64) -> f64 {
    (2.0 * n * t_s / c_pps + r_min_s * r_min_s).sqrt()
}

/// Packets per second of a link.
pub fn capacity_pps(c_mbps: f64, mss: u32) -> f64 {
    c_mbps * 1e6 / (8.0 * f64::from(mss))
}

/// Queue-building RTT slope, ms/s, of `n` flows on a `c_mbps` bottleneck.
pub fn predicted_slope(n: f64, c_mbps: f64, mss: u32) -> f64 {
    1000.0 * n / capacity_pps(c_mbps, mss)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Reno,
    Lia,
    Uncoupled,
}

fn reno_rate(rtt_s: f64, p: f64) -> Result<f64, EvalError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(EvalError::BadLossRate(p));
    }
    if !(rtt_s > 0.0) {
        return Err(EvalError::BadRtt(rtt_s));
    }
    Ok((2.0 * (1.0 - p) / p).sqrt() / rtt_s)
}

/// Long-run rate in packets/s over `paths` of `(rtt_s, p)`. Reno takes the
/// first path only, LIA the best path, uncoupled the sum.
pub fn equilibrium_throughput(variant: Variant, paths: &[(f64, f64)]) -> Result<f64, EvalError> {
    if paths.is_empty() {
        return Err(EvalError::NoPaths);
    }
    let rates = paths
        .iter()
        .map(|&(r, p)| reno_rate(r, p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match variant {
        Variant::Reno => rates[0],
        Variant::Lia => rates.iter().copied().fold(f64::MIN, f64::max),
        Variant::Uncoupled => rates.iter().sum(),
    })
}

/// A closed interval of consecutive positive windows, ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub start_ms: f64,
    pub end_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalReport {
    pub intervals: Vec<Interval>,
    /// end of the first positive window
    pub time_to_first_positive_ms: Option<f64>,
    pub positive_windows: usize,
    pub evaluated_windows: usize,
}

/// Coalesces positive windows that touch into maximal intervals.
pub fn positive_intervals(verdicts: &[WindowVerdict]) -> IntervalReport {
    let mut intervals: Vec<Interval> = Vec::new();
    let mut positives = 0;
    for v in verdicts.iter().filter(|v| v.verdict.shared) {
        positives += 1;
        match intervals.last_mut() {
            Some(last) if v.window.start_ms <= last.end_ms => {
                last.end_ms = last.end_ms.max(v.window.end_ms);
            }
            _ => intervals.push(Interval {
                start_ms: v.window.start_ms,
                end_ms: v.window.end_ms,
            }),
        }
    }
    IntervalReport {
        time_to_first_positive_ms: verdicts.iter().find(|v| v.verdict.shared).map(|v| v.window.end_ms),
        intervals,
        positive_windows: positives,
        evaluated_windows: verdicts.len(),
    }
}

/// Episodes in which the queue grows from a trough to the next drop, from
/// link occupancy samples. Only episodes of at least `min_ms` are kept.
/// Returned as (start, end) in ms.
pub fn queue_filling_segments(monitor: &QueueMonitor, min_ms: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut drops = monitor.drops.iter().map(|t| t.as_millis_f64()).peekable();
    let mut trough: Option<(f64, u32)> = None;
    for &(t, q) in &monitor.samples {
        let t = t.as_millis_f64();
        while let Some(&d) = drops.peek() {
            if d > t {
                break;
            }
            drops.next();
            if let Some((t0, _)) = trough.take() {
                if d - t0 >= min_ms {
                    out.push((t0, d));
                }
            }
        }
        match trough {
            Some((_, q0)) if q >= q0 => {}
            _ => trough = Some((t, q)),
        }
    }
    if let (Some(d), Some((t0, _))) = (drops.next(), trough) {
        if d - t0 >= min_ms {
            out.push((t0, d));
        }
    }
    out
}

/// RTT samples whose data packet was sent inside `[start_ms, end_ms]`, as
/// (seconds since `start_ms`, rtt in seconds). An ack at `t` carries the
/// queueing its data packet met at `t - rtt`.
pub fn segment_samples(trace: &[RttSample], start_ms: f64, end_ms: f64) -> (Vec<f64>, Vec<f64>) {
    trace
        .iter()
        .filter(|s| {
            let sent = s.t_ms - s.rtt_ms;
            sent >= start_ms && sent <= end_ms
        })
        .map(|s| ((s.t_ms - start_ms) / 1000.0, s.rtt_ms / 1000.0))
        .unzip()
}

/// Square-root-law fit of `trace` over the longest queue-filling episode of
/// at least `min_ms`; `None` without such an episode.
pub fn fit_longest_segment(
    monitor: &QueueMonitor,
    trace: &[RttSample],
    min_ms: f64,
) -> Option<Result<(FitReport, (f64, f64)), EvalError>> {
    let seg = queue_filling_segments(monitor, min_ms)
        .into_iter()
        .max_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))?;
    let (t, r) = segment_samples(trace, seg.0, seg.1);
    Some(fit_sqrt_law(&t, &r).map(|f| (f, seg)))
}

/// Dominant slope, ms/s, of every detection window inside `[from_ms, to_ms)`
/// that has one.
pub fn window_dominant_slopes(
    trace: &[RttSample],
    cfg: &DetectorConfig,
    from_ms: f64,
    to_ms: f64,
) -> Result<Vec<f64>, DetectError> {
    let mut tracker = SlopeTracker::new(*cfg)?;
    for s in trace {
        tracker.push(*s)?;
    }
    let mut out = Vec::new();
    let mut k = (from_ms / cfg.window_ms).ceil() as u64;
    loop {
        let w = TimeWindow::aligned(k, cfg.window_ms);
        if w.end_ms > to_ms {
            break;
        }
        if let Some(e) = tracker.dominant_slope(w) {
            out.push(e.slope);
        }
        k += 1;
    }
    Ok(out)
}

/// Linear-interpolated quantile, `q` in [0, 1]; `None` for an empty series.
pub fn quantile(xs: &[f64], q: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Mean of a rate series.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// One `metric,scenario,value` row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub metric: String,
    pub scenario: String,
    pub value: f64,
}

impl Metric {
    pub fn new(metric: impl Into<String>, scenario: impl Into<String>, value: f64) -> Self {
        Self {
            metric: metric.into(),
            scenario: scenario.into(),
            value,
        }
    }
}

pub fn write_report_csv<W: Write>(metrics: &[Metric], writer: W) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "metric,scenario,value")?;
    for m in metrics {
        writeln!(w, "{},{},{}", m.metric, m.scenario, m.value)?;
    }
    w.flush()
}
