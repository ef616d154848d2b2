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

//! Window laws: Reno AIMD and CUBIC.

use serde::Serialize;

/// Windows are in packets.
pub const INITIAL_CWND: f64 = 2.0;
/// Initial slow-start threshold; effectively unbounded.
pub const INITIAL_SSTHRESH: f64 = 1.0e9;

pub const CUBIC_C: f64 = 0.4;
pub const CUBIC_BETA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    SlowStart,
    CongestionAvoidance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CongestionState {
    pub cwnd: f64,
    pub ssthresh: f64,
    pub srtt_ms: Option<f64>,
    pub min_rtt_ms: Option<f64>,
    pub phase: Phase,
}

impl Default for CongestionState {
    fn default() -> Self {
        Self::new(INITIAL_CWND)
    }
}

impl CongestionState {
    pub fn new(cwnd: f64) -> Self {
        Self {
            cwnd: cwnd.max(1.0),
            ssthresh: INITIAL_SSTHRESH,
            srtt_ms: None,
            min_rtt_ms: None,
            phase: Phase::SlowStart,
        }
    }

    pub fn with_phase(mut self, cwnd: f64, ssthresh: f64, phase: Phase) -> Self {
        self.cwnd = cwnd;
        self.ssthresh = ssthresh;
        self.phase = phase;
        self
    }

    /// Folds an RTT sample into `srtt` (gain 1/8) and `min_rtt`.
    pub fn on_rtt_sample(&mut self, rtt_ms: f64) {
        self.srtt_ms = Some(match self.srtt_ms {
            None => rtt_ms,
            Some(s) => s + (rtt_ms - s) / 8.0,
        });
        self.min_rtt_ms = Some(self.min_rtt_ms.map_or(rtt_ms, |m| m.min(rtt_ms)));
    }
}

/// Per-ack increase: +1 in slow start, +1/cwnd in congestion avoidance.
pub fn reno_on_ack(state: CongestionState) -> CongestionState {
    let mut s = state;
    match s.phase {
        Phase::SlowStart => {
            s.cwnd += 1.0;
            if s.cwnd >= s.ssthresh {
                s.phase = Phase::CongestionAvoidance;
            }
        }
        Phase::CongestionAvoidance => s.cwnd += 1.0 / s.cwnd,
    }
    s
}

/// Multiplicative decrease on a detected loss.
pub fn reno_on_loss(state: CongestionState) -> CongestionState {
    let mut s = state;
    s.cwnd = (s.cwnd / 2.0).max(1.0);
    s.ssthresh = s.cwnd;
    s.phase = Phase::CongestionAvoidance;
    s
}

/// Retransmission timeout: back to one packet in slow start.
pub fn on_timeout(state: CongestionState) -> CongestionState {
    let mut s = state;
    s.ssthresh = (s.cwnd / 2.0).max(2.0);
    s.cwnd = 1.0;
    s.phase = Phase::SlowStart;
    s
}

/// Time for the cubic curve to climb back to `w_max` after a reduction.
pub fn cubic_k(w_max: f64) -> f64 {
    (w_max * CUBIC_BETA / CUBIC_C).cbrt()
}

/// `C (t - K)^3 + w_max`, `t` in seconds since the last reduction.
pub fn cubic_window(t_since_loss_s: f64, w_max: f64) -> f64 {
    let d = t_since_loss_s - cubic_k(w_max);
    CUBIC_C * d * d * d + w_max
}

/// CUBIC congestion-avoidance epoch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CubicState {
    w_max: f64,
    k: f64,
    /// seconds
    epoch_start: Option<f64>,
    /// window at the start of the epoch, for the Reno-friendly estimate
    origin_cwnd: f64,
}

impl CubicState {
    pub fn on_loss(&mut self, state: CongestionState, now_s: f64) -> CongestionState {
        let mut s = state;
        self.w_max = s.cwnd;
        s.cwnd = (s.cwnd * (1.0 - CUBIC_BETA)).max(1.0);
        s.ssthresh = s.cwnd;
        s.phase = Phase::CongestionAvoidance;
        self.k = cubic_k(self.w_max);
        self.epoch_start = Some(now_s);
        self.origin_cwnd = s.cwnd;
        s
    }

    pub fn on_timeout(&mut self) {
        self.epoch_start = None;
    }

    /// Congestion-avoidance increase for one ack.
    pub fn on_ack(&mut self, state: CongestionState, now_s: f64) -> CongestionState {
        let mut s = state;
        if s.phase == Phase::SlowStart {
            return reno_on_ack(s);
        }
        let start = *self.epoch_start.get_or_insert_with(|| {
            // entered avoidance without a loss: the curve starts flat here
            self.w_max = self.w_max.max(s.cwnd);
            self.k = ((self.w_max - s.cwnd) / CUBIC_C).cbrt();
            self.origin_cwnd = s.cwnd;
            now_s
        });
        let rtt_s = s.srtt_ms.unwrap_or(100.0) / 1000.0;
        let t = now_s - start + rtt_s;
        let d = t - self.k;
        let target = CUBIC_C * d * d * d + self.w_max;
        let friendly = self.origin_cwnd + 3.0 * CUBIC_BETA / (2.0 - CUBIC_BETA) * (t / rtt_s);
        let target = target.max(friendly);
        if target > s.cwnd {
            s.cwnd += ((target - s.cwnd) / s.cwnd).min(1.0);
        } else {
            s.cwnd += 0.01 / s.cwnd;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ca(cwnd: f64) -> CongestionState {
        CongestionState::default().with_phase(cwnd, cwnd, Phase::CongestionAvoidance)
    }

    #[test]
    fn avoidance_adds_inverse_window() {
        assert!((reno_on_ack(ca(10.0)).cwnd - 10.1).abs() < 1e-12);
    }

    #[test]
    fn slow_start_adds_one() {
        let s = CongestionState::default().with_phase(2.0, 8.0, Phase::SlowStart);
        let s = reno_on_ack(s);
        assert_eq!(s.cwnd, 3.0);
        assert_eq!(s.phase, Phase::SlowStart);
    }

    #[test]
    fn slow_start_exits_at_threshold() {
        let s = CongestionState::default().with_phase(7.0, 8.0, Phase::SlowStart);
        assert_eq!(reno_on_ack(s).phase, Phase::CongestionAvoidance);
    }

    #[test]
    fn one_window_of_acks_adds_about_one() {
        let mut s = ca(20.0);
        for _ in 0..20 {
            s = reno_on_ack(s);
        }
        assert!((s.cwnd - 21.0).abs() < 0.05, "{}", s.cwnd);
    }

    #[test]
    fn halving_and_floor() {
        assert_eq!(reno_on_loss(ca(10.0)).cwnd, 5.0);
        assert_eq!(reno_on_loss(ca(1.0)).cwnd, 1.0);
        let mut s = ca(64.0);
        let mut prev = s.cwnd;
        for _ in 0..10 {
            s = reno_on_loss(s);
            assert!(s.cwnd <= prev);
            prev = s.cwnd;
        }
        assert_eq!(s.cwnd, 1.0);
    }

    #[test]
    fn timeout_resets() {
        let s = on_timeout(ca(30.0));
        assert_eq!(s.cwnd, 1.0);
        assert_eq!(s.ssthresh, 15.0);
        assert_eq!(s.phase, Phase::SlowStart);
    }

    #[test]
    fn cubic_shape() {
        let w = 100.0;
        assert!((cubic_window(cubic_k(w), w) - w).abs() < 1e-9);
        assert!((cubic_window(0.0, w) - 0.7 * w).abs() < 1e-9);
        let mut prev = cubic_window(0.0, w);
        for i in 1..200 {
            let v = cubic_window(i as f64 * 0.1, w);
            assert!(v >= prev);
            prev = v;
        }
        assert!(cubic_window(3.0 * cubic_k(w), w) > w);
    }

    #[test]
    fn cubic_reduction_and_regrowth() {
        let mut c = CubicState::default();
        let mut s = ca(100.0);
        s.srtt_ms = Some(100.0);
        s = c.on_loss(s, 0.0);
        assert!((s.cwnd - 70.0).abs() < 1e-9);
        let mut t = 0.0;
        while t < 2.0 * cubic_k(100.0) {
            s = c.on_ack(s, t);
            t += 0.001;
        }
        assert!(s.cwnd > 95.0, "{}", s.cwnd);
    }

    #[test]
    fn rtt_estimator() {
        let mut s = CongestionState::default();
        s.on_rtt_sample(100.0);
        s.on_rtt_sample(180.0);
        assert_eq!(s.srtt_ms, Some(110.0));
        assert_eq!(s.min_rtt_ms, Some(100.0));
    }
}
