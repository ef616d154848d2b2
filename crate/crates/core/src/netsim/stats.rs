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

//! Run results and their CSV outputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::queue::QueueMonitor;
use super::NetsimError;
use super::topology::CcKind;
use crate::detect::{write_samples_csv, RttSample, WindowVerdict};
use crate::multipath::Coupling;

#[derive(Debug, Clone)]
pub struct FlowStats {
    pub id: String,
    pub cc: CcKind,
    pub session: Option<String>,
    pub start_ms: f64,
    pub mss: u32,
    pub sent_packets: u64,
    pub retransmits: u64,
    pub loss_events: u64,
    pub timeouts: u64,
    /// in-order packets handed to the receiving application
    pub delivered_packets: u64,
    /// delivered bytes per throughput bin
    pub delivered_bins: Vec<u64>,
    /// acks received by the sender per throughput bin
    pub ack_bins: Vec<u32>,
    pub final_cwnd: f64,
    /// RTT samples seen by the sender, one per ack
    pub trace: Vec<RttSample>,
}

impl FlowStats {
    pub fn delivered_bytes(&self) -> u64 {
        self.delivered_packets * u64::from(self.mss)
    }

    /// Fraction of transmissions that were retransmissions.
    pub fn loss_rate(&self) -> f64 {
        if self.sent_packets == 0 {
            0.0
        } else {
            self.retransmits as f64 / self.sent_packets as f64
        }
    }
}

/// Counters of one direction of a link. The reverse direction of link `L`
/// is reported as `L.rev`.
#[derive(Debug, Clone)]
pub struct LinkStats {
    pub id: String,
    pub capacity: u32,
    pub arrivals: u64,
    pub dequeued: u64,
    pub dropped: u64,
    /// still waiting at the end of the run
    pub queued: u64,
    /// 1 if a packet was being serialized at the end of the run
    pub in_service: u64,
    pub busy_ms: f64,
    pub monitor: Option<QueueMonitor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeChange {
    pub t_ms: f64,
    pub mode: Coupling,
}

/// One pairwise verdict between two subflows of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionVerdict {
    pub a: String,
    pub b: String,
    pub verdict: WindowVerdict,
}

#[derive(Debug, Clone, Default)]
pub struct SessionStats {
    pub id: String,
    pub verdicts: Vec<SessionVerdict>,
    /// starts with the initial mode at time zero
    pub mode_log: Vec<ModeChange>,
}

impl SessionStats {
    /// Time spent coupled within `[from_ms, to_ms)`.
    pub fn coupled_ms(&self, from_ms: f64, to_ms: f64) -> f64 {
        let mut total = 0.0;
        for (i, m) in self.mode_log.iter().enumerate() {
            if m.mode != Coupling::Coupled {
                continue;
            }
            let s = m.t_ms.max(from_ms);
            let e = self.mode_log.get(i + 1).map_or(to_ms, |n| n.t_ms).min(to_ms);
            if e > s {
                total += e - s;
            }
        }
        total
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub duration_ms: f64,
    pub seed: u64,
    pub bin_ms: f64,
    pub flows: Vec<FlowStats>,
    pub links: Vec<LinkStats>,
    pub sessions: Vec<SessionStats>,
}

impl RunResult {
    pub fn flow(&self, id: &str) -> Option<&FlowStats> {
        self.flows.iter().find(|f| f.id == id)
    }

    pub fn link(&self, id: &str) -> Option<&LinkStats> {
        self.links.iter().find(|l| l.id == id)
    }

    pub fn session(&self, id: &str) -> Option<&SessionStats> {
        self.sessions.iter().find(|s| s.id == id)
    }

    /// Mean delivery rate of a flow in Mbps over `[from_ms, duration)`,
    /// counting whole bins.
    pub fn mean_rate_mbps(&self, flow: &FlowStats, from_ms: f64) -> f64 {
        let first = (from_ms / self.bin_ms).ceil() as usize;
        let last = (self.duration_ms / self.bin_ms).floor() as usize;
        if last <= first {
            return 0.0;
        }
        let bytes: u64 = flow.delivered_bins[first..last].iter().sum();
        bytes as f64 * 8.0 / ((last - first) as f64 * self.bin_ms * 1e3)
    }

    /// Aggregate rate of all flows of a session, or of a single flow.
    pub fn group_rate_mbps(&self, ids: &[&str], from_ms: f64) -> f64 {
        self.flows
            .iter()
            .filter(|f| ids.contains(&f.id.as_str()) || f.session.as_deref().is_some_and(|s| ids.contains(&s)))
            .map(|f| self.mean_rate_mbps(f, from_ms))
            .sum()
    }

    /// Writes one `<flow_id>.csv` RTT trace per flow into `dir`.
    pub fn write_traces(&self, dir: &Path) -> Result<Vec<PathBuf>, NetsimError> {
        let mut out = Vec::with_capacity(self.flows.len());
        for f in &self.flows {
            let p = dir.join(format!("{}.csv", f.id));
            write_samples_csv(&f.trace, File::create(&p)?)?;
            out.push(p);
        }
        Ok(out)
    }

    /// `flow_id,delivered_bytes,mean_rate_mbps,loss_rate`
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "flow_id,delivered_bytes,mean_rate_mbps,loss_rate")?;
        for f in &self.flows {
            writeln!(
                w,
                "{},{},{:.6},{:.6}",
                f.id,
                f.delivered_bytes(),
                self.mean_rate_mbps(f, f.start_ms),
                f.loss_rate()
            )?;
        }
        w.flush()
    }

    /// Per-bin delivery rate, one column per flow.
    pub fn write_rates_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        write!(w, "t_ms")?;
        for f in &self.flows {
            write!(w, ",{}", f.id)?;
        }
        writeln!(w)?;
        let n = (self.duration_ms / self.bin_ms).ceil() as usize;
        for b in 0..n {
            write!(w, "{:.1}", b as f64 * self.bin_ms)?;
            for f in &self.flows {
                let mbps = f.delivered_bins[b] as f64 * 8.0 / (self.bin_ms * 1e3);
                write!(w, ",{mbps:.6}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    /// `session_id,flow_a,flow_b,window_start_ms,window_end_ms,shared,error,slope_a,slope_b`
    pub fn write_session_verdicts_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(
            w,
            "session_id,flow_a,flow_b,window_start_ms,window_end_ms,shared,error,slope_a,slope_b"
        )?;
        for s in &self.sessions {
            for v in &s.verdicts {
                let wv = &v.verdict;
                let err = wv.verdict.error.map(|e| format!("{e:.6}")).unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{:.3},{:.3},{},{},{:.6},{:.6}",
                    s.id,
                    v.a,
                    v.b,
                    wv.window.start_ms,
                    wv.window.end_ms,
                    wv.verdict.shared,
                    err,
                    wv.verdict.slope_a.slope,
                    wv.verdict.slope_b.slope
                )?;
            }
        }
        w.flush()
    }

    /// `session_id,t_ms,mode`
    pub fn write_modes_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "session_id,t_ms,mode")?;
        for s in &self.sessions {
            for m in &s.mode_log {
                let mode = match m.mode {
                    Coupling::Coupled => "coupled",
                    Coupling::Uncoupled => "uncoupled",
                };
                writeln!(w, "{},{:.3},{}", s.id, m.t_ms, mode)?;
            }
        }
        w.flush()
    }

    /// `link_id,t_ms,queue_pkts` for every monitored direction.
    pub fn write_queue_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "link_id,t_ms,queue_pkts")?;
        for l in &self.links {
            if let Some(m) = &l.monitor {
                for (t, q) in &m.samples {
                    writeln!(w, "{},{:.6},{}", l.id, t.as_millis_f64(), q)?;
                }
            }
        }
        w.flush()
    }

    /// `link_id,t_ms` for every drop at a monitored direction.
    pub fn write_drops_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "link_id,t_ms")?;
        for l in &self.links {
            if let Some(m) = &l.monitor {
                for t in &m.drops {
                    writeln!(w, "{},{:.6}", l.id, t.as_millis_f64())?;
                }
            }
        }
        w.flush()
    }

    /// `link_id,arrivals,dequeued,dropped,busy_ms`
    pub fn write_links_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "link_id,arrivals,dequeued,dropped,busy_ms")?;
        for l in &self.links {
            writeln!(w, "{},{},{},{},{:.3}", l.id, l.arrivals, l.dequeued, l.dropped, l.busy_ms)?;
        }
        w.flush()
    }
}
