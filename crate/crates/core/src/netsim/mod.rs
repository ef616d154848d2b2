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

//! Deterministic packet-level discrete-event network simulator.
//!
//! Links are full duplex: every configured link is two directional channels,
//! each with its own output queue, serialization at the link rate and a fixed
//! propagation delay. Data packets are MSS-sized and acks are 40 bytes; acks
//! queue on the reverse path like any other packet. Senders are bulk
//! transfers with SACK-style loss detection, Reno or CUBIC windows, or
//! multipath subflows governed by [`crate::multipath`].
//!
//! A simulation is single threaded. The same spec and seed always yield the
//! same event order and the same outputs.

mod cc;
mod queue;
mod sim;
mod stats;
mod tcp;
mod topology;

use std::ops::Add;

pub use cc::{
    cubic_k, cubic_window, on_timeout, reno_on_ack, reno_on_loss, CongestionState, CubicState,
    Phase, CUBIC_BETA, CUBIC_C, INITIAL_CWND,
};
pub use queue::{
    droptail_enqueue, red_decision, red_enqueue, Admission, Aqm, PacketQueue, QueueMonitor,
    RedParams, RedState,
};
pub use sim::{build_topology, run, Simulation};
pub use sim::BIN_MS;
pub use stats::{FlowStats, LinkStats, ModeChange, RunResult, SessionStats, SessionVerdict};
pub use topology::{
    queue_packets, AqmSpec, CcKind, FlowSpec, LinkConfig, LinkSpec, QueueSize, SessionSpec,
    TopologySpec, ACK_BYTES, MTU_BYTES,
};

#[derive(Debug, thiserror::Error)]
pub enum NetsimError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("link `{id}`: {reason}")]
    BadLink { id: String, reason: String },
    #[error("flow `{id}`: {reason}")]
    BadFlow { id: String, reason: String },
    #[error("flow `{id}`: no route from `{src}` to `{dst}`")]
    Unroutable { id: String, src: String, dst: String },
    #[error("session `{id}`: {reason}")]
    BadSession { id: String, reason: String },
    #[error("duration must be positive, got {0}")]
    BadDuration(f64),
    #[error(transparent)]
    Detect(#[from] crate::detect::DetectError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Simulation clock in integer nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_nanos(ns: u64) -> Self {
        Self(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        Self(us * 1_000)
    }

    pub fn from_millis_f64(ms: f64) -> Self {
        Self((ms * 1e6).round().max(0.0) as u64)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PacketKind {
    Data { seq: u64, sent_at: SimTime },
    /// `cum` is the next expected sequence; `sack` is the sequence of the
    /// data packet that triggered this ack, whose send time is `echo`.
    Ack { cum: u64, sack: u64, echo: SimTime },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub flow: u32,
    /// index into the flow's route for the current direction
    pub hop: u16,
    pub reverse: bool,
    pub size: u32,
    pub kind: PacketKind,
}

impl Packet {
    #[cfg(test)]
    pub(crate) fn test_data() -> Self {
        Self {
            flow: 0,
            hop: 0,
            reverse: false,
            size: MTU_BYTES,
            kind: PacketKind::Data {
                seq: 0,
                sent_at: SimTime::ZERO,
            },
        }
    }
}
