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

//! Bulk-transfer sender and receiver.
//!
//! Every data packet is acked individually. An ack carries the cumulative
//! next-expected sequence plus the sequence of the packet that triggered it,
//! so the sender keeps an exact scoreboard. A segment is declared lost once a
//! segment at least three sequence numbers above it has been acked; the first
//! loss beyond the previous recovery point causes one window reduction.

use std::collections::{BTreeSet, VecDeque};

use super::cc::{on_timeout, reno_on_ack, reno_on_loss, CongestionState, CubicState, INITIAL_CWND};
use super::topology::CcKind;
use super::SimTime;
use crate::detect::RttSample;

const DUP_THRESH: u64 = 3;
const MIN_RTO_MS: f64 = 1000.0;
const MAX_RTO_MS: f64 = 60_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Seg {
    InFlight,
    Sacked,
    Lost,
    Retx,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct AckOutcome {
    /// The ack acknowledged new data outside loss recovery; the window may
    /// grow.
    pub may_grow: bool,
}

#[derive(Debug)]
pub(crate) struct Sender {
    kind: CcKind,
    pub cc: CongestionState,
    cubic: CubicState,
    snd_una: u64,
    snd_nxt: u64,
    /// state of every sequence in `[snd_una, snd_nxt)`
    board: VecDeque<Seg>,
    /// segments believed to be in the network
    pipe: u32,
    high_sacked: Option<u64>,
    loss_cursor: u64,
    retx: VecDeque<u64>,
    in_recovery: bool,
    /// losses below this sequence belong to an episode already reacted to
    reduce_guard: u64,
    pub rto_deadline: Option<SimTime>,
    pub rto_event_pending: bool,
    backoff: u32,
    pub trace: Vec<RttSample>,
    pub sent_packets: u64,
    pub retransmits: u64,
    pub loss_events: u64,
    pub timeouts: u64,
    pub ack_bins: Vec<u32>,
}

impl Sender {
    pub fn new(kind: CcKind, n_bins: usize) -> Self {
        Self {
            kind,
            cc: CongestionState::new(INITIAL_CWND),
            cubic: CubicState::default(),
            snd_una: 0,
            snd_nxt: 0,
            board: VecDeque::new(),
            pipe: 0,
            high_sacked: None,
            loss_cursor: 0,
            retx: VecDeque::new(),
            in_recovery: false,
            reduce_guard: 0,
            rto_deadline: None,
            rto_event_pending: false,
            backoff: 0,
            trace: Vec::new(),
            sent_packets: 0,
            retransmits: 0,
            loss_events: 0,
            timeouts: 0,
            ack_bins: vec![0; n_bins],
        }
    }

    pub fn outstanding(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    fn can_send(&self) -> bool {
        (self.pipe as f64) < self.cc.cwnd.floor().max(1.0)
    }

    /// Next sequence to transmit and whether it is a retransmission.
    pub fn next_segment(&mut self, now: SimTime) -> Option<(u64, bool)> {
        if !self.can_send() {
            return None;
        }
        let out = loop {
            match self.retx.pop_front() {
                Some(seq) if seq >= self.snd_una => {
                    let ix = (seq - self.snd_una) as usize;
                    if self.board[ix] == Seg::Lost {
                        self.board[ix] = Seg::Retx;
                        self.retransmits += 1;
                        break (seq, true);
                    }
                }
                Some(_) => {}
                None => {
                    let seq = self.snd_nxt;
                    self.board.push_back(Seg::InFlight);
                    self.snd_nxt += 1;
                    break (seq, false);
                }
            }
        };
        self.pipe += 1;
        self.sent_packets += 1;
        if self.rto_deadline.is_none() {
            self.rto_deadline = Some(now + self.rto());
        }
        Some(out)
    }

    pub fn rto(&self) -> SimTime {
        let base = (4.0 * self.cc.srtt_ms.unwrap_or(0.0)).max(MIN_RTO_MS);
        let ms = (base * f64::from(1u32 << self.backoff.min(16))).min(MAX_RTO_MS);
        SimTime::from_millis_f64(ms)
    }

    pub fn on_ack(&mut self, now: SimTime, cum: u64, sack: u64, echo: SimTime, bin: usize) -> AckOutcome {
        if let Some(b) = self.ack_bins.get_mut(bin) {
            *b += 1;
        }
        let t_ms = now.as_millis_f64();
        let rtt_ms = now.saturating_sub(echo).as_millis_f64();
        if rtt_ms > 0.0 && self.trace.last().is_none_or(|s| s.t_ms < t_ms) {
            self.trace.push(RttSample::new(t_ms, rtt_ms));
            self.cc.on_rtt_sample(rtt_ms);
        }

        let mut newly_acked = false;
        if cum > self.snd_una {
            while self.snd_una < cum {
                match self.board.pop_front() {
                    Some(Seg::InFlight | Seg::Retx) => self.pipe -= 1,
                    Some(_) => {}
                    None => break,
                }
                self.snd_una += 1;
            }
            newly_acked = true;
            self.backoff = 0;
            self.rto_deadline = (self.outstanding() > 0).then(|| now + self.rto());
        }
        if sack >= self.snd_una && sack < self.snd_nxt {
            let ix = (sack - self.snd_una) as usize;
            match self.board[ix] {
                Seg::InFlight | Seg::Retx => {
                    self.pipe -= 1;
                    self.board[ix] = Seg::Sacked;
                    newly_acked = true;
                }
                Seg::Lost => {
                    self.board[ix] = Seg::Sacked;
                    newly_acked = true;
                }
                Seg::Sacked => {}
            }
            self.high_sacked = Some(self.high_sacked.map_or(sack, |h| h.max(sack)));
        }
        if self.in_recovery && self.snd_una >= self.reduce_guard {
            self.in_recovery = false;
        }

        let mut first_loss = None;
        if let Some(h) = self.high_sacked {
            self.loss_cursor = self.loss_cursor.max(self.snd_una);
            while self.loss_cursor + DUP_THRESH <= h {
                let ix = (self.loss_cursor - self.snd_una) as usize;
                if self.board[ix] == Seg::InFlight {
                    self.board[ix] = Seg::Lost;
                    self.pipe -= 1;
                    self.retx.push_back(self.loss_cursor);
                    first_loss.get_or_insert(self.loss_cursor);
                }
                self.loss_cursor += 1;
            }
        }
        let mut reduced = false;
        if let Some(seq) = first_loss {
            if seq >= self.reduce_guard {
                self.cc = match self.kind {
                    CcKind::Cubic => self.cubic.on_loss(self.cc, now.as_secs_f64()),
                    CcKind::Reno | CcKind::MultipathSubflow => reno_on_loss(self.cc),
                };
                self.in_recovery = true;
                self.reduce_guard = self.snd_nxt;
                self.loss_events += 1;
                reduced = true;
            }
        }
        AckOutcome {
            may_grow: newly_acked && !self.in_recovery && !reduced,
        }
    }

    /// Window growth of an uncoupled flow for one ack.
    pub fn grow(&mut self, now: SimTime) {
        self.cc = match self.kind {
            CcKind::Cubic => self.cubic.on_ack(self.cc, now.as_secs_f64()),
            CcKind::Reno | CcKind::MultipathSubflow => reno_on_ack(self.cc),
        };
    }

    pub fn grow_by(&mut self, increment: f64) {
        self.cc.cwnd += increment;
    }

    /// Retransmission timeout. Returns false when nothing was outstanding.
    pub fn on_timeout(&mut self, now: SimTime) -> bool {
        if self.outstanding() == 0 {
            self.rto_deadline = None;
            return false;
        }
        self.cc = on_timeout(self.cc);
        self.cubic.on_timeout();
        self.timeouts += 1;
        self.backoff += 1;
        self.retx.clear();
        for (i, s) in self.board.iter_mut().enumerate() {
            if matches!(s, Seg::InFlight | Seg::Retx | Seg::Lost) {
                *s = Seg::Lost;
                self.retx.push_back(self.snd_una + i as u64);
            }
        }
        self.pipe = 0;
        self.in_recovery = false;
        self.reduce_guard = self.snd_nxt;
        self.loss_cursor = self.snd_nxt;
        self.rto_deadline = Some(now + self.rto());
        true
    }
}

#[derive(Debug)]
pub(crate) struct Receiver {
    rcv_nxt: u64,
    ooo: BTreeSet<u64>,
    pub delivered_packets: u64,
    pub delivered_bins: Vec<u64>,
}

impl Receiver {
    pub fn new(n_bins: usize) -> Self {
        Self {
            rcv_nxt: 0,
            ooo: BTreeSet::new(),
            delivered_packets: 0,
            delivered_bins: vec![0; n_bins],
        }
    }

    /// Accepts a data packet and returns the cumulative ack.
    pub fn on_data(&mut self, seq: u64, mss: u32, bin: usize) -> u64 {
        if seq == self.rcv_nxt {
            let mut n = 1;
            self.rcv_nxt += 1;
            while self.ooo.remove(&self.rcv_nxt) {
                self.rcv_nxt += 1;
                n += 1;
            }
            self.delivered_packets += n;
            if let Some(b) = self.delivered_bins.get_mut(bin) {
                *b += n * mss as u64;
            }
        } else if seq > self.rcv_nxt {
            self.ooo.insert(seq);
        }
        self.rcv_nxt
    }
}
