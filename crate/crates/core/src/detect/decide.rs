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

//! Pairwise shared-bottleneck decision.

use serde::Serialize;

use super::SlopeEstimate;

pub const DEFAULT_EPSILON: f64 = 0.2;
pub const DEFAULT_TAU_MS: f64 = 1000.0;

/// Why a verdict came out the way it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictBasis {
    /// Slopes were compared; `error` is set.
    Compared,
    /// The two spans are disjoint by more than `tau`.
    TimeGated,
    /// Neither slope is positive, so the relative error is undefined.
    NonPositiveSlope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SbdVerdict {
    pub shared: bool,
    /// Relative slope difference; `None` unless `basis` is `Compared`.
    pub error: Option<f64>,
    pub basis: VerdictBasis,
    pub slope_a: SlopeEstimate,
    pub slope_b: SlopeEstimate,
}

/// Relative slope difference `|a - b| / max(a, b)`.
pub fn slope_error(a: f64, b: f64) -> Option<f64> {
    let denom = a.max(b);
    if denom > 0.0 {
        Some((a - b).abs() / denom)
    } else {
        None
    }
}

/// Decides whether two flows share a bottleneck from their dominant slopes.
///
/// Spans that are disjoint by more than `tau_ms` are never compared. A
/// disjoint gap of at most `tau_ms` is treated like an overlap.
pub fn decide(a: SlopeEstimate, b: SlopeEstimate, epsilon: f64, tau_ms: f64) -> SbdVerdict {
    let s = a.start.max(b.start);
    let e = a.end.min(b.end);
    let gap = e - s;
    if gap < 0.0 && gap.abs() > tau_ms {
        return SbdVerdict {
            shared: false,
            error: None,
            basis: VerdictBasis::TimeGated,
            slope_a: a,
            slope_b: b,
        };
    }
    match slope_error(a.slope, b.slope) {
        Some(error) => SbdVerdict {
            shared: error <= epsilon,
            error: Some(error),
            basis: VerdictBasis::Compared,
            slope_a: a,
            slope_b: b,
        },
        None => SbdVerdict {
            shared: false,
            error: None,
            basis: VerdictBasis::NonPositiveSlope,
            slope_a: a,
            slope_b: b,
        },
    }
}
