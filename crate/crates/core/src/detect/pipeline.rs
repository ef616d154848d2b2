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

//! Windowed detection: smooth, extract, merge, regress, pick, decide.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    decide, extract_groups, merge_groups, pick_dominant_slope, regress_slope, DetectError,
    FlowTrace, Point, RttSample, SbdVerdict, SlopeEstimate, SmoothingState,
};

/// Detector parameters. Missing keys in a config file take the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub alpha: f64,
    pub delta_ms: f64,
    pub epsilon: f64,
    pub tau_ms: f64,
    pub window_ms: f64,
    pub min_group_points: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            alpha: super::DEFAULT_ALPHA,
            delta_ms: 50.0,
            epsilon: super::DEFAULT_EPSILON,
            tau_ms: super::DEFAULT_TAU_MS,
            window_ms: 5000.0,
            min_group_points: super::DEFAULT_MIN_GROUP_POINTS,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |key: &'static str, value: f64| Err(DetectError::BadConfig { key, value });
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha", self.alpha);
        }
        if !(self.delta_ms >= 0.0) {
            return bad("delta_ms", self.delta_ms);
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon", self.epsilon);
        }
        if !(self.tau_ms >= 0.0) {
            return bad("tau_ms", self.tau_ms);
        }
        if !(self.window_ms > 0.0 && self.window_ms.is_finite()) {
            return bad("window_ms", self.window_ms);
        }
        if self.min_group_points < 2 {
            return bad("min_group_points", self.min_group_points as f64);
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, DetectError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Half-open interval `[start_ms, end_ms)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start_ms: f64,
    pub end_ms: f64,
}

impl TimeWindow {
    pub fn new(start_ms: f64, end_ms: f64) -> Self {
        Self { start_ms, end_ms }
    }

    pub fn contains(&self, t_ms: f64) -> bool {
        t_ms >= self.start_ms && t_ms < self.end_ms
    }

    pub fn len_ms(&self) -> f64 {
        self.end_ms - self.start_ms
    }

    /// The `k`-th epoch-aligned window of length `len_ms`.
    pub fn aligned(k: u64, len_ms: f64) -> Self {
        Self::new(k as f64 * len_ms, (k + 1) as f64 * len_ms)
    }
}

/// Per-flow incremental state: smoothed samples plus slope extraction.
///
/// Samples are smoothed as they arrive. A window's dominant slope is computed
/// from the samples before the window end, looking back one window length
/// before its start so that runs straddling the boundary stay whole.
#[derive(Debug, Clone)]
pub struct SlopeTracker {
    cfg: DetectorConfig,
    smoothing: SmoothingState,
    points: Vec<Point>,
}

impl SlopeTracker {
    pub fn new(cfg: DetectorConfig) -> Result<Self, DetectError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            smoothing: SmoothingState::new(cfg.alpha)?,
            points: Vec::new(),
        })
    }

    pub fn push(&mut self, sample: RttSample) -> Result<(), DetectError> {
        if let Some(last) = self.points.last() {
            if sample.t_ms <= last.t_ms {
                return Err(DetectError::NonIncreasingTime {
                    index: self.points.len(),
                    t_ms: sample.t_ms,
                });
            }
        }
        let (next, v) = self.smoothing.smooth(sample.rtt_ms)?;
        self.smoothing = next;
        self.points.push(Point::new(sample.t_ms, v));
        Ok(())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Positive slope estimates of the merged groups ending inside `window`.
    pub fn estimates(&self, window: TimeWindow) -> Vec<SlopeEstimate> {
        let from = window.start_ms - self.cfg.window_ms;
        let lo = self.points.partition_point(|p| p.t_ms < from);
        let hi = self.points.partition_point(|p| p.t_ms < window.end_ms);
        let groups = extract_groups(&self.points[lo..hi]);
        merge_groups(&groups, self.cfg.delta_ms)
            .iter()
            .filter(|g| window.contains(g.end()))
            .filter_map(|g| regress_slope(g, self.cfg.min_group_points).ok())
            // a flat or falling trend carries no queue-building signal
            .filter(|e| e.slope > 0.0)
            .collect()
    }

    pub fn dominant_slope(&self, window: TimeWindow) -> Option<SlopeEstimate> {
        pick_dominant_slope(&self.estimates(window), window)
    }

    /// Drops samples that no window ending after `t_ms` can look at.
    pub fn forget_before(&mut self, t_ms: f64) {
        let cut = self
            .points
            .partition_point(|p| p.t_ms < t_ms - self.cfg.window_ms);
        self.points.drain(..cut);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowVerdict {
    pub window: TimeWindow,
    pub verdict: SbdVerdict,
}

/// Runs the detector over every epoch-aligned window touching the common
/// span of both traces. Windows where either flow lacks a dominant slope
/// produce no verdict; traces that do not overlap produce none at all.
pub fn run_detector(
    a: &FlowTrace,
    b: &FlowTrace,
    cfg: &DetectorConfig,
) -> Result<Vec<WindowVerdict>, DetectError> {
    cfg.validate()?;
    let (a0, a1) = a.span();
    let (b0, b1) = b.span();
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    if lo > hi {
        return Ok(Vec::new());
    }
    let mut ta = SlopeTracker::new(*cfg)?;
    for s in a.samples() {
        ta.push(*s)?;
    }
    let mut tb = SlopeTracker::new(*cfg)?;
    for s in b.samples() {
        tb.push(*s)?;
    }
    let first = (lo / cfg.window_ms).floor() as u64;
    let mut out = Vec::new();
    let mut k = first;
    loop {
        let w = TimeWindow::aligned(k, cfg.window_ms);
        if w.start_ms > hi {
            break;
        }
        if let (Some(ea), Some(eb)) = (ta.dominant_slope(w), tb.dominant_slope(w)) {
            out.push(WindowVerdict {
                window: w,
                verdict: decide(ea, eb, cfg.epsilon, cfg.tau_ms),
            });
        }
        k += 1;
    }
    Ok(out)
}

/// Writes `window_start_ms,window_end_ms,shared,error,slope_a,slope_b`.
/// `error` is empty when it is undefined.
pub fn write_verdicts_csv<W: Write>(verdicts: &[WindowVerdict], writer: W) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "window_start_ms,window_end_ms,shared,error,slope_a,slope_b")?;
    for v in verdicts {
        let err = v.verdict.error.map(|e| format!("{e:.6}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{:.6},{:.6}",
            v.window.start_ms,
            v.window.end_ms,
            v.verdict.shared,
            err,
            v.verdict.slope_a.slope,
            v.verdict.slope_b.slope
        )?;
    }
    w.flush()
}

/// A verdict row read back from a verdict CSV.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct VerdictRow {
    pub window_start_ms: f64,
    pub window_end_ms: f64,
    pub shared: bool,
    pub error: Option<f64>,
    pub slope_a: f64,
    pub slope_b: f64,
}

pub fn read_verdicts_csv<R: std::io::Read>(reader: R) -> Result<Vec<VerdictRow>, DetectError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
