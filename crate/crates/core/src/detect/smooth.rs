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

//! Exponential smoothing of raw RTT samples.

use super::{DetectError, Point, RttSample};

/// Default weight of the newest sample.
pub const DEFAULT_ALPHA: f64 = 0.9;

/// Smoothing filter `s' = alpha * rtt + (1 - alpha) * s`, seeded with the
/// first raw sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingState {
    alpha: f64,
    s: Option<f64>,
}

impl SmoothingState {
    pub fn new(alpha: f64) -> Result<Self, DetectError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(DetectError::BadAlpha(alpha));
        }
        Ok(Self { alpha, s: None })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Current smoothed delay, `None` before the first sample.
    pub fn value(&self) -> Option<f64> {
        self.s
    }

    pub fn smooth(self, rtt_ms: f64) -> Result<(Self, f64), DetectError> {
        if !(rtt_ms.is_finite() && rtt_ms > 0.0) {
            return Err(DetectError::NonPositiveRtt { index: 0, rtt_ms });
        }
        let next = match self.s {
            None => rtt_ms,
            Some(s) => {
                let v = self.alpha * rtt_ms + (1.0 - self.alpha) * s;
                // keep the convex combination inside [min, max] under rounding
                v.clamp(s.min(rtt_ms), s.max(rtt_ms))
            }
        };
        Ok((
            Self {
                alpha: self.alpha,
                s: Some(next),
            },
            next,
        ))
    }
}

/// Smooths a whole sample sequence.
pub fn smooth_samples(samples: &[RttSample], alpha: f64) -> Result<Vec<Point>, DetectError> {
    let mut state = SmoothingState::new(alpha)?;
    let mut out = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let (next, v) = state.smooth(s.rtt_ms).map_err(|e| match e {
            DetectError::NonPositiveRtt { rtt_ms, .. } => DetectError::NonPositiveRtt { index: i, rtt_ms },
            other => other,
        })?;
        state = next;
        out.push(Point::new(s.t_ms, v));
    }
    Ok(out)
}
