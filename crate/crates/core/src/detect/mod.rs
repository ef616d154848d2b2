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

//! Shared bottleneck detection by delay trend-line regression.
//!
//! Each flow's RTT trace is smoothed, split into runs of non-decreasing delay
//! (queue-building episodes), fragmented runs are merged, and every merged run
//! is reduced to a least-squares slope in ms/s. Once per detection window the
//! longest run of each flow is compared: two flows whose slopes are within a
//! relative error `epsilon`, and whose runs overlap in time (or are at most
//! `tau` apart), are reported as sharing a bottleneck.
//!
//! All functions here are pure; the pipeline holds no shared state.

mod decide;
mod group;
mod pipeline;
mod regress;
mod smooth;
mod trace;

pub use decide::{decide, slope_error, SbdVerdict, VerdictBasis, DEFAULT_EPSILON, DEFAULT_TAU_MS};
pub use group::{extract_groups, merge_groups, Group, MergedGroup, Point};
pub use pipeline::{
    read_verdicts_csv, run_detector, write_verdicts_csv, DetectorConfig, SlopeTracker, TimeWindow,
    VerdictRow, WindowVerdict,
};
pub use regress::{pick_dominant_slope, regress_slope, SlopeEstimate, DEFAULT_MIN_GROUP_POINTS};
pub use smooth::{smooth_samples, SmoothingState, DEFAULT_ALPHA};
pub use trace::{write_samples_csv, FlowTrace, RttSample};

#[derive(Debug, thiserror::Error)]
pub enum DetectError {
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("sample {index}: rtt must be positive, got {rtt_ms}")]
    NonPositiveRtt { index: usize, rtt_ms: f64 },
    #[error("sample {index}: invalid timestamp {t_ms}")]
    BadTimestamp { index: usize, t_ms: f64 },
    #[error("sample {index}: timestamp {t_ms} does not increase")]
    NonIncreasingTime { index: usize, t_ms: f64 },
    #[error("smoothing coefficient must be in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("group has {have} points, need at least {need}")]
    TooFewPoints { have: usize, need: usize },
    #[error("all timestamps in the group are equal")]
    DegenerateTimestamps,
    #[error("invalid detector config: {key} = {value}")]
    BadConfig { key: &'static str, value: f64 },
    #[error("expected trace header `t_ms,rtt_ms`, found `{0}`")]
    BadHeader(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("config: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
