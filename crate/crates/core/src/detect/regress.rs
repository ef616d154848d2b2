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

//! Trend-line slope of a merged group and dominant-slope selection.

use serde::Serialize;

use super::{DetectError, MergedGroup, Point, TimeWindow};

/// Smallest merged group that is regressed.
pub const DEFAULT_MIN_GROUP_POINTS: usize = 5;

/// Delay growth rate over one merged group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeEstimate {
    /// ms of delay per second.
    pub slope: f64,
    pub start: f64,
    pub end: f64,
    pub n_points: usize,
}

/// Least-squares slope of smoothed delay against time, in ms/s.
///
/// Timestamps are re-based to the group's first sample before fitting.
pub fn regress_slope(group: &MergedGroup, min_points: usize) -> Result<SlopeEstimate, DetectError> {
    let pts = group.points();
    if pts.len() < min_points.max(2) {
        return Err(DetectError::TooFewPoints {
            have: pts.len(),
            need: min_points.max(2),
        });
    }
    let slope = least_squares_slope(pts).ok_or(DetectError::DegenerateTimestamps)?;
    Ok(SlopeEstimate {
        slope: 1000.0 * slope,
        start: group.start(),
        end: group.end(),
        n_points: pts.len(),
    })
}

/// Slope in ms per ms; `None` when all timestamps coincide.
fn least_squares_slope(pts: &[Point]) -> Option<f64> {
    let n = pts.len() as f64;
    let t0 = pts[0].t_ms;
    let x_mean = pts.iter().map(|p| p.t_ms - t0).sum::<f64>() / n;
    let y_mean = pts.iter().map(|p| p.delay_ms).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for p in pts {
        let dx = p.t_ms - t0 - x_mean;
        sxy += dx * (p.delay_ms - y_mean);
        sxx += dx * dx;
    }
    if sxx > 0.0 {
        Some(sxy / sxx)
    } else {
        None
    }
}

/// Picks the estimate with the most points among those ending inside
/// `window` (half-open). Ties go to the earlier end, then the earlier start.
pub fn pick_dominant_slope(estimates: &[SlopeEstimate], window: TimeWindow) -> Option<SlopeEstimate> {
    estimates
        .iter()
        .filter(|e| window.contains(e.end))
        .min_by(|a, b| {
            b.n_points
                .cmp(&a.n_points)
                .then(a.end.total_cmp(&b.end))
                .then(a.start.total_cmp(&b.start))
                .then(a.slope.total_cmp(&b.slope))
        })
        .copied()
}
