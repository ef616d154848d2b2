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

//! Event engine.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::queue::{Admission, PacketQueue};
use super::stats::{FlowStats, LinkStats, ModeChange, RunResult, SessionStats, SessionVerdict};
use super::tcp::{Receiver, Sender};
use super::topology::{LinkConfig, RoutedFlow, TopologySpec, ACK_BYTES};
use super::{NetsimError, Packet, PacketKind, SimTime};
use crate::detect::{decide, DetectorConfig, SlopeTracker, TimeWindow, WindowVerdict};
use crate::multipath::{lia_increase, CouplingConfig, CouplingMode, CouplingPolicy, SubflowState};

/// Width of the throughput bins.
pub const BIN_MS: f64 = 100.0;

#[derive(Debug, Clone, Copy)]
enum EventKind {
    FlowStart(usize),
    /// the head packet of directional link `.0` finished serializing
    TxDone(usize),
    /// `pkt` reached the far end of its current link
    Arrive(Packet),
    Rto(usize),
    /// end of detection window `k - 1`
    DetectTick(u64),
}

#[derive(Debug)]
struct Event {
    t: SimTime,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.t, self.seq) == (other.t, other.seq)
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // min-heap on (time, insertion order)
    fn cmp(&self, other: &Self) -> Ordering {
        (other.t, other.seq).cmp(&(self.t, self.seq))
    }
}

#[derive(Debug)]
struct Link {
    cfg: LinkConfig,
    id: String,
    queue: PacketQueue,
    busy: Option<Packet>,
    /// end of the current transmission
    busy_until: SimTime,
    busy_ns: u64,
}

impl Link {
    fn tx_time(&self, size: u32) -> SimTime {
        let secs = f64::from(size) * 8.0 / (self.cfg.bandwidth_mbps * 1e6);
        SimTime::from_nanos((secs * 1e9).round().max(1.0) as u64)
    }
}

#[derive(Debug)]
struct Flow {
    route: RoutedFlow,
    start: SimTime,
    sender: Sender,
    receiver: Receiver,
}

#[derive(Debug)]
struct Session {
    id: String,
    coupling: CouplingConfig,
    mode: CouplingMode,
    members: Vec<usize>,
    trackers: Vec<SlopeTracker>,
    fed: Vec<usize>,
    detector: DetectorConfig,
    stats: SessionStats,
}

/// A built, not yet run, simulation.
#[derive(Debug)]
pub struct Simulation {
    spec: TopologySpec,
    links: Vec<Link>,
    flows: Vec<RoutedFlow>,
}

impl Simulation {
    pub fn spec(&self) -> &TopologySpec {
        &self.spec
    }

    pub fn flow_ids(&self) -> Vec<String> {
        self.flows.iter().map(|f| f.spec.id.clone()).collect()
    }
}

/// Validates the topology and resolves routes and queue sizes.
pub fn build_topology(spec: &TopologySpec) -> Result<Simulation, NetsimError> {
    let resolved = spec.resolve()?;
    let links = resolved
        .links
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let l = &spec.links[i / 2];
            let id = if i % 2 == 0 { l.id.clone() } else { format!("{}.rev", l.id) };
            let pkt_time = f64::from(super::MTU_BYTES) * 8.0 / (cfg.bandwidth_mbps * 1e6);
            Link {
                cfg: *cfg,
                id,
                queue: PacketQueue::new(
                    cfg.aqm,
                    cfg.queue_capacity,
                    SimTime::from_nanos((pkt_time * 1e9) as u64),
                    l.monitor,
                ),
                busy: None,
                busy_until: SimTime::ZERO,
                busy_ns: 0,
            }
        })
        .collect();
    Ok(Simulation {
        spec: spec.clone(),
        links,
        flows: resolved.flows,
    })
}

struct Engine {
    links: Vec<Link>,
    flows: Vec<Flow>,
    sessions: Vec<Session>,
    /// session index of each flow
    flow_session: Vec<Option<usize>>,
    heap: BinaryHeap<Event>,
    seq: u64,
    rng: ChaCha8Rng,
    end: SimTime,
    events: u64,
}

impl Engine {
    fn schedule(&mut self, t: SimTime, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Event { t, seq: self.seq, kind });
    }

    fn bin(t: SimTime) -> usize {
        (t.as_millis_f64() / BIN_MS) as usize
    }

    /// Offers `pkt` to the output queue of `link`, starting service if idle.
    fn offer(&mut self, link: usize, pkt: Packet, now: SimTime) {
        let l = &mut self.links[link];
        if l.queue.enqueue(pkt, now, &mut self.rng) == Admission::Drop {
            return;
        }
        if l.busy.is_none() {
            self.start_tx(link, now);
        }
    }

    fn start_tx(&mut self, link: usize, now: SimTime) {
        let l = &mut self.links[link];
        if let Some(pkt) = l.queue.dequeue(now) {
            let d = l.tx_time(pkt.size);
            l.busy = Some(pkt);
            l.busy_until = now + d;
            l.busy_ns += d.as_nanos();
            self.schedule(now + d, EventKind::TxDone(link));
        }
    }

    fn route(&self, pkt: &Packet) -> &[usize] {
        let r = &self.flows[pkt.flow as usize].route;
        if pkt.reverse {
            &r.rev
        } else {
            &r.fwd
        }
    }

    fn try_send(&mut self, f: usize, now: SimTime) {
        while let Some((seq, _retx)) = self.flows[f].sender.next_segment(now) {
            let flow = &self.flows[f];
            let pkt = Packet {
                flow: f as u32,
                hop: 0,
                reverse: false,
                size: flow.route.spec.mss,
                kind: PacketKind::Data { seq, sent_at: now },
            };
            let first = flow.route.fwd[0];
            self.offer(first, pkt, now);
        }
        self.arm_rto(f);
    }

    fn arm_rto(&mut self, f: usize) {
        let s = &mut self.flows[f].sender;
        if let (Some(d), false) = (s.rto_deadline, s.rto_event_pending) {
            s.rto_event_pending = true;
            self.schedule(d, EventKind::Rto(f));
        }
    }

    fn deliver(&mut self, pkt: Packet, now: SimTime) {
        let f = pkt.flow as usize;
        match pkt.kind {
            PacketKind::Data { seq, sent_at } => {
                let mss = self.flows[f].route.spec.mss;
                let cum = self.flows[f].receiver.on_data(seq, mss, Self::bin(now));
                let ack = Packet {
                    flow: pkt.flow,
                    hop: 0,
                    reverse: true,
                    size: ACK_BYTES,
                    kind: PacketKind::Ack {
                        cum,
                        sack: seq,
                        echo: sent_at,
                    },
                };
                let first = self.flows[f].route.rev[0];
                self.offer(first, ack, now);
            }
            PacketKind::Ack { cum, sack, echo } => {
                let out = self.flows[f].sender.on_ack(now, cum, sack, echo, Self::bin(now));
                if out.may_grow {
                    self.grow(f, now);
                }
                self.try_send(f, now);
            }
        }
    }

    fn grow(&mut self, f: usize, now: SimTime) {
        let coupled_inc = match self.flow_session[f] {
            Some(s) if self.sessions[s].mode.is_coupled() => {
                let sess = &self.sessions[s];
                let me = &self.flows[f].sender.cc;
                if me.phase == super::Phase::SlowStart {
                    None
                } else {
                    let subs: Vec<SubflowState> = sess
                        .members
                        .iter()
                        .map(|&m| SubflowState {
                            path_id: m,
                            cc: self.flows[m].sender.cc,
                        })
                        .collect();
                    lia_increase(&subs, f).ok()
                }
            }
            _ => None,
        };
        match coupled_inc {
            Some(inc) => self.flows[f].sender.grow_by(inc),
            None => self.flows[f].sender.grow(now),
        }
    }

    fn on_rto(&mut self, f: usize, now: SimTime) {
        let s = &mut self.flows[f].sender;
        s.rto_event_pending = false;
        match s.rto_deadline {
            Some(d) if d <= now => {
                s.on_timeout(now);
                self.try_send(f, now);
            }
            _ => self.arm_rto(f),
        }
    }

    fn on_detect(&mut self, k: u64, now: SimTime) {
        let now_ms = now.as_millis_f64();
        for si in 0..self.sessions.len() {
            let sess = &mut self.sessions[si];
            let w = TimeWindow::aligned(k - 1, sess.detector.window_ms);
            for (j, &m) in sess.members.iter().enumerate() {
                let trace = &self.flows[m].sender.trace;
                for s in &trace[sess.fed[j]..] {
                    // the sender only records strictly increasing times
                    let _ = sess.trackers[j].push(*s);
                }
                sess.fed[j] = trace.len();
            }
            let slopes: Vec<_> = sess.trackers.iter().map(|t| t.dominant_slope(w)).collect();
            let mut any_shared = false;
            for a in 0..slopes.len() {
                for b in a + 1..slopes.len() {
                    if let (Some(ea), Some(eb)) = (slopes[a], slopes[b]) {
                        let v = decide(ea, eb, sess.detector.epsilon, sess.detector.tau_ms);
                        any_shared |= v.shared;
                        sess.stats.verdicts.push(SessionVerdict {
                            a: self.flows[sess.members[a]].route.spec.id.clone(),
                            b: self.flows[sess.members[b]].route.spec.id.clone(),
                            verdict: WindowVerdict { window: w, verdict: v },
                        });
                    }
                }
            }
            for t in &mut sess.trackers {
                t.forget_before(w.end_ms);
            }
            let before = sess.mode.mode;
            if sess.coupling.policy == CouplingPolicy::Sbd {
                if any_shared {
                    let v = sess.stats.verdicts.iter().rev().find(|v| v.verdict.verdict.shared);
                    if let Some(v) = v {
                        sess.mode = sess.mode.on_sbd_signal(&v.verdict.verdict, now_ms);
                    }
                }
                sess.mode = sess.mode.on_tick(now_ms);
            }
            if sess.mode.mode != before {
                sess.stats.mode_log.push(ModeChange {
                    t_ms: now_ms,
                    mode: sess.mode.mode,
                });
            }
        }
        if let Some(first) = self.sessions.first() {
            let next = SimTime::from_millis_f64((k + 1) as f64 * first.detector.window_ms);
            if next <= self.end {
                self.schedule(next, EventKind::DetectTick(k + 1));
            }
        }
    }

    fn step(&mut self, ev: Event) {
        let now = ev.t;
        self.events += 1;
        match ev.kind {
            EventKind::FlowStart(f) => self.try_send(f, now),
            EventKind::TxDone(link) => {
                let l = &mut self.links[link];
                let pkt = l.busy.take().expect("tx done on idle link");
                let prop = SimTime::from_millis_f64(l.cfg.prop_delay_ms);
                self.schedule(now + prop, EventKind::Arrive(pkt));
                self.start_tx(link, now);
            }
            EventKind::Arrive(mut pkt) => {
                pkt.hop += 1;
                let route = self.route(&pkt);
                match route.get(pkt.hop as usize) {
                    Some(&next) => self.offer(next, pkt, now),
                    None => self.deliver(pkt, now),
                }
            }
            EventKind::Rto(f) => self.on_rto(f, now),
            EventKind::DetectTick(k) => self.on_detect(k, now),
        }
    }
}

/// Runs `sim` for `duration_ms`. Flows without an explicit start time begin
/// at a uniform draw in `[0, 1 s)` from `seed`.
pub fn run(sim: Simulation, duration_ms: f64, seed: u64) -> Result<RunResult, NetsimError> {
    if !(duration_ms > 0.0 && duration_ms.is_finite()) {
        return Err(NetsimError::BadDuration(duration_ms));
    }
    let Simulation { spec, links, flows } = sim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_bins = (duration_ms / BIN_MS).ceil() as usize + 1;
    let end = SimTime::from_millis_f64(duration_ms);

    let flows: Vec<Flow> = flows
        .into_iter()
        .map(|route| {
            let start_ms = route.spec.start_ms.unwrap_or_else(|| rng.gen_range(0.0..1000.0));
            Flow {
                start: SimTime::from_millis_f64(start_ms),
                sender: Sender::new(route.spec.cc, n_bins),
                receiver: Receiver::new(n_bins),
                route,
            }
        })
        .collect();

    let mut sessions = Vec::with_capacity(spec.sessions.len());
    for s in &spec.sessions {
        let detector = s.coupling.detector(&spec.detector);
        let ix = sessions.len();
        let members: Vec<usize> = (0..flows.len())
            .filter(|&f| flows[f].route.session == Some(ix))
            .collect();
        let trackers = members
            .iter()
            .map(|_| SlopeTracker::new(detector))
            .collect::<Result<Vec<_>, _>>()?;
        let mode = s.coupling.initial_mode();
        sessions.push(Session {
            id: s.id.clone(),
            coupling: s.coupling,
            mode,
            fed: vec![0; members.len()],
            members,
            trackers,
            detector,
            stats: SessionStats {
                id: s.id.clone(),
                verdicts: Vec::new(),
                mode_log: vec![ModeChange {
                    t_ms: 0.0,
                    mode: mode.mode,
                }],
            },
        });
    }
    let flow_session = flows.iter().map(|f| f.route.session).collect();

    let mut eng = Engine {
        links,
        flows,
        sessions,
        flow_session,
        heap: BinaryHeap::new(),
        seq: 0,
        rng,
        end,
        events: 0,
    };
    for f in 0..eng.flows.len() {
        let t = eng.flows[f].start;
        if t <= end {
            eng.schedule(t, EventKind::FlowStart(f));
        }
    }
    if let Some(first) = eng.sessions.first() {
        let t = SimTime::from_millis_f64(first.detector.window_ms);
        if t <= end {
            eng.schedule(t, EventKind::DetectTick(1));
        }
    }
    while let Some(ev) = eng.heap.pop() {
        if ev.t > end {
            break;
        }
        eng.step(ev);
    }
    log::debug!("simulated {} events", eng.events);

    let flows = eng
        .flows
        .into_iter()
        .map(|f| {
            let session = f.route.session.map(|s| eng.sessions[s].id.clone());
            FlowStats {
                id: f.route.spec.id.clone(),
                cc: f.route.spec.cc,
                session,
                start_ms: f.start.as_millis_f64(),
                mss: f.route.spec.mss,
                sent_packets: f.sender.sent_packets,
                retransmits: f.sender.retransmits,
                loss_events: f.sender.loss_events,
                timeouts: f.sender.timeouts,
                delivered_packets: f.receiver.delivered_packets,
                delivered_bins: f.receiver.delivered_bins,
                ack_bins: f.sender.ack_bins,
                final_cwnd: f.sender.cc.cwnd,
                trace: f.sender.trace,
            }
        })
        .collect();
    let links = eng
        .links
        .into_iter()
        .map(|l| LinkStats {
            id: l.id,
            capacity: l.queue.capacity(),
            arrivals: l.queue.arrivals,
            dequeued: l.queue.dequeued,
            dropped: l.queue.dropped,
            queued: l.queue.len() as u64,
            in_service: u64::from(l.busy.is_some()),
            // only the part of the last transmission inside the run
            busy_ms: (l.busy_ns - l.busy_until.saturating_sub(end).as_nanos()) as f64 / 1e6,
            monitor: l.queue.monitor,
        })
        .collect();
    let sessions = eng.sessions.into_iter().map(|s| s.stats).collect();
    Ok(RunResult {
        duration_ms,
        seed,
        bin_ms: BIN_MS,
        flows,
        links,
        sessions,
    })
}
