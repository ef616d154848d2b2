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

//! Link output queues: drop-tail and RED.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Packet, SimTime};

/// RED weight for the average queue estimate.
pub const DEFAULT_RED_WEIGHT: f64 = 0.002;
pub const DEFAULT_RED_MAX_P: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Accept,
    Drop,
}

/// RED thresholds in packets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RedParams {
    pub min_th: f64,
    pub max_th: f64,
    pub queue_limit: u32,
    pub max_p: f64,
    pub weight: f64,
}

impl RedParams {
    pub fn new(min_th: f64, max_th: f64, queue_limit: u32) -> Self {
        Self {
            min_th,
            max_th,
            queue_limit,
            max_p: DEFAULT_RED_MAX_P,
            weight: DEFAULT_RED_WEIGHT,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.min_th > 0.0
            && self.min_th < self.max_th
            && self.max_th <= self.queue_limit as f64
            && self.max_p > 0.0
            && self.max_p <= 1.0
            && self.weight > 0.0
            && self.weight <= 1.0
    }

    /// Early-drop probability for an average queue of `avg` packets.
    pub fn drop_probability(&self, avg: f64) -> f64 {
        if avg < self.min_th {
            0.0
        } else if avg >= self.max_th {
            1.0
        } else {
            self.max_p * (avg - self.min_th) / (self.max_th - self.min_th)
        }
    }
}

/// Tail drop: refuse when the queue already holds `capacity` packets.
pub fn droptail_enqueue(len: usize, capacity: u32) -> Admission {
    if len >= capacity as usize {
        Admission::Drop
    } else {
        Admission::Accept
    }
}

/// RED admission for the given average and instantaneous queue. `u` is a
/// uniform draw in `[0, 1)`.
pub fn red_decision(avg: f64, len: usize, red: &RedParams, u: f64) -> Admission {
    if len >= red.queue_limit as usize {
        return Admission::Drop;
    }
    let p = red.drop_probability(avg);
    if p >= 1.0 || u < p {
        Admission::Drop
    } else {
        Admission::Accept
    }
}

/// Applies RED to one arriving packet: updates the running average and
/// draws from `rng`.
pub fn red_enqueue<R: Rng + ?Sized>(state: &mut RedState, len: usize, red: &RedParams, rng: &mut R) -> Admission {
    state.avg = (1.0 - red.weight) * state.avg + red.weight * len as f64;
    let u: f64 = rng.gen();
    red_decision(state.avg, len, red, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RedState {
    pub avg: f64,
    idle_since: Option<SimTime>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aqm {
    DropTail,
    Red(RedParams),
}

/// Occupancy samples of one link, for ground truth.
#[derive(Debug, Clone, Default)]
pub struct QueueMonitor {
    /// (time, queue length after the change)
    pub samples: Vec<(SimTime, u32)>,
    pub drops: Vec<SimTime>,
}

/// FIFO output queue. The packet being serialized is not counted.
#[derive(Debug)]
pub struct PacketQueue {
    aqm: Aqm,
    capacity: u32,
    red: RedState,
    /// transmission time of one full-size packet, for RED idle decay
    packet_time: SimTime,
    q: VecDeque<Packet>,
    pub arrivals: u64,
    pub dequeued: u64,
    pub dropped: u64,
    pub monitor: Option<QueueMonitor>,
}

impl PacketQueue {
    pub fn new(aqm: Aqm, capacity: u32, packet_time: SimTime, monitor: bool) -> Self {
        Self {
            aqm,
            capacity,
            red: RedState::default(),
            packet_time,
            q: VecDeque::new(),
            arrivals: 0,
            dequeued: 0,
            dropped: 0,
            monitor: monitor.then(QueueMonitor::default),
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn red_average(&self) -> f64 {
        self.red.avg
    }

    pub fn enqueue<R: Rng + ?Sized>(&mut self, pkt: Packet, now: SimTime, rng: &mut R) -> Admission {
        self.arrivals += 1;
        let len = self.q.len();
        let verdict = match self.aqm {
            Aqm::DropTail => droptail_enqueue(len, self.capacity),
            Aqm::Red(red) => {
                if let Some(idle) = self.red.idle_since.take() {
                    // decay the average as if small packets had been sent while idle
                    let m = now.saturating_sub(idle).as_nanos() as f64
                        / self.packet_time.as_nanos().max(1) as f64;
                    self.red.avg *= (1.0 - red.weight).powf(m);
                }
                match red_enqueue(&mut self.red, len, &red, rng) {
                    Admission::Accept => droptail_enqueue(len, self.capacity),
                    Admission::Drop => Admission::Drop,
                }
            }
        };
        match verdict {
            Admission::Accept => {
                self.q.push_back(pkt);
                self.record(now);
            }
            Admission::Drop => {
                self.dropped += 1;
                if let Some(m) = self.monitor.as_mut() {
                    m.drops.push(now);
                }
            }
        }
        verdict
    }

    pub fn dequeue(&mut self, now: SimTime) -> Option<Packet> {
        let pkt = self.q.pop_front()?;
        self.dequeued += 1;
        if self.q.is_empty() {
            self.red.idle_since = Some(now);
        }
        self.record(now);
        Some(pkt)
    }

    fn record(&mut self, now: SimTime) {
        let len = self.q.len() as u32;
        if let Some(m) = self.monitor.as_mut() {
            m.samples.push((now, len));
        }
    }
}
