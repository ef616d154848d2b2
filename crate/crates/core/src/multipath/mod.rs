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

//! Multipath sender control: LIA coupled increase, per-path decrease, and the
//! coupling state machine driven by shared-bottleneck verdicts.
//!
//! A session starts uncoupled, with every subflow running its own Reno law.
//! A positive verdict switches it to LIA; it falls back to uncoupled once no
//! positive verdict has been seen for `fallback_after_ms`.

use serde::{Deserialize, Serialize};

use crate::detect::{DetectorConfig, SbdVerdict};
use crate::netsim::{reno_on_loss, CongestionState};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LiaError {
    #[error("subflow {0} has no positive rtt")]
    BadRtt(usize),
    #[error("acked subflow {0} is not in the session")]
    UnknownSubflow(usize),
    #[error("session has no subflows")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubflowState {
    pub path_id: usize,
    pub cc: CongestionState,
}

impl SubflowState {
    pub fn new(path_id: usize, cwnd: f64, srtt_ms: f64) -> Self {
        let mut cc = CongestionState::new(cwnd);
        cc.srtt_ms = Some(srtt_ms);
        cc.min_rtt_ms = Some(srtt_ms);
        Self { path_id, cc }
    }

    fn rtt(&self) -> Option<f64> {
        self.cc.srtt_ms.filter(|r| *r > 0.0 && r.is_finite())
    }
}

/// Per-ack window increase of the acked subflow under LIA:
/// `max_k(w_k / rtt_k^2) / (sum_k w_k / rtt_k)^2`, capped at `1 / w_acked`.
///
/// The result does not depend on the rtt unit.
pub fn lia_increase(subflows: &[SubflowState], acked_path: usize) -> Result<f64, LiaError> {
    if subflows.is_empty() {
        return Err(LiaError::Empty);
    }
    let acked = subflows
        .iter()
        .find(|s| s.path_id == acked_path)
        .ok_or(LiaError::UnknownSubflow(acked_path))?;
    let mut rates = Vec::with_capacity(subflows.len());
    for s in subflows {
        let rtt = s.rtt().ok_or(LiaError::BadRtt(s.path_id))?;
        rates.push((s.cc.cwnd, rtt));
    }
    // factored around the path b with the largest w/rtt^2:
    // (w_b / r_b^2) / (sum w_k / r_k)^2 = 1 / (w_b * S^2),
    // S = sum_k (w_k r_b) / (w_b r_k), so one subflow gives exactly 1 / w
    let (wb, rb) = rates
        .iter()
        .copied()
        .max_by(|a, b| (a.0 / (a.1 * a.1)).total_cmp(&(b.0 / (b.1 * b.1))))
        .expect("non-empty");
    let mut sum = 0.0f64;
    let mut seen_b = false;
    for &(w, r) in &rates {
        if !seen_b && w == wb && r == rb {
            seen_b = true;
            sum += 1.0;
        } else {
            sum += (w * rb) / (wb * r);
        }
    }
    let coupled = 1.0 / (wb * sum * sum);
    Ok(coupled.min(1.0 / acked.cc.cwnd))
}

/// Loss on one subflow halves that subflow only.
pub fn lia_decrease(subflow: SubflowState) -> CongestionState {
    reno_on_loss(subflow.cc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    Uncoupled,
    Coupled,
}

/// Default time without a positive verdict before uncoupling.
pub const DEFAULT_FALLBACK_MS: f64 = 100_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingMode {
    pub mode: Coupling,
    pub last_positive: Option<f64>,
    pub fallback_after_ms: f64,
}

impl Default for CouplingMode {
    fn default() -> Self {
        Self::new(DEFAULT_FALLBACK_MS)
    }
}

impl CouplingMode {
    pub fn new(fallback_after_ms: f64) -> Self {
        Self {
            mode: Coupling::Uncoupled,
            last_positive: None,
            fallback_after_ms,
        }
    }

    pub fn is_coupled(&self) -> bool {
        self.mode == Coupling::Coupled
    }

    /// A positive verdict couples the session and refreshes the fallback
    /// clock; a negative one changes nothing.
    pub fn on_sbd_signal(self, verdict: &SbdVerdict, now_ms: f64) -> Self {
        if verdict.shared {
            Self {
                mode: Coupling::Coupled,
                last_positive: Some(now_ms),
                ..self
            }
        } else {
            self
        }
    }

    pub fn on_tick(self, now_ms: f64) -> Self {
        match (self.mode, self.last_positive) {
            (Coupling::Coupled, Some(t)) if now_ms - t > self.fallback_after_ms => Self {
                mode: Coupling::Uncoupled,
                ..self
            },
            _ => self,
        }
    }
}

/// How a session chooses between coupled and uncoupled increase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingPolicy {
    /// Follow the detector.
    #[default]
    Sbd,
    /// Always LIA.
    Coupled,
    /// Always independent Reno.
    Uncoupled,
}

/// Controller keys of a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingConfig {
    pub fallback_s: f64,
    pub epsilon: f64,
    pub tau_ms: f64,
    pub window_ms: f64,
    pub policy: CouplingPolicy,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            fallback_s: DEFAULT_FALLBACK_MS / 1000.0,
            epsilon: crate::detect::DEFAULT_EPSILON,
            tau_ms: crate::detect::DEFAULT_TAU_MS,
            window_ms: 5000.0,
            policy: CouplingPolicy::Sbd,
        }
    }
}

impl CouplingConfig {
    /// The detector settings with this controller's decision keys applied.
    pub fn detector(&self, base: &DetectorConfig) -> DetectorConfig {
        DetectorConfig {
            epsilon: self.epsilon,
            tau_ms: self.tau_ms,
            window_ms: self.window_ms,
            ..*base
        }
    }

    pub fn initial_mode(&self) -> CouplingMode {
        let mut m = CouplingMode::new(self.fallback_s * 1000.0);
        if self.policy == CouplingPolicy::Coupled {
            m.mode = Coupling::Coupled;
        }
        m
    }
}
