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

//! Topology and flow descriptions, and their validation.

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::queue::{Aqm, RedParams, DEFAULT_RED_MAX_P, DEFAULT_RED_WEIGHT};
use super::NetsimError;
use crate::detect::DetectorConfig;
use crate::multipath::CouplingConfig;

pub const MTU_BYTES: u32 = 1500;
pub const ACK_BYTES: u32 = 40;

/// A queue size given directly in packets or as a maximum queueing delay at
/// the link rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum QueueSize {
    Pkts(u32),
    DelayMs(f64),
}

impl QueueSize {
    pub fn packets(&self, bandwidth_mbps: f64) -> f64 {
        match *self {
            QueueSize::Pkts(p) => p as f64,
            QueueSize::DelayMs(ms) => bandwidth_mbps * 1e6 * ms / 1000.0 / (8.0 * MTU_BYTES as f64),
        }
    }
}

/// Packets that fit in `delay_ms` of queueing at `bandwidth_mbps`, rounded
/// down, at least one.
pub fn queue_packets(bandwidth_mbps: f64, delay_ms: f64) -> u32 {
    (QueueSize::DelayMs(delay_ms).packets(bandwidth_mbps).floor() as u32).max(1)
}

fn default_max_p() -> f64 {
    DEFAULT_RED_MAX_P
}

fn default_weight() -> f64 {
    DEFAULT_RED_WEIGHT
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AqmSpec {
    #[default]
    DropTail,
    /// Thresholds on the average queue. The link's `queue` is the hard limit.
    Red {
        min_th: QueueSize,
        max_th: QueueSize,
        #[serde(default = "default_max_p")]
        max_p: f64,
        #[serde(default = "default_weight")]
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub id: String,
    pub a: String,
    pub b: String,
    pub bandwidth_mbps: f64,
    /// one-way propagation delay
    pub delay_ms: f64,
    pub queue: QueueSize,
    #[serde(default)]
    pub aqm: AqmSpec,
    /// record queue occupancy of both directions
    #[serde(default)]
    pub monitor: bool,
}

/// A link resolved to packet units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub bandwidth_mbps: f64,
    pub prop_delay_ms: f64,
    pub queue_capacity: u32,
    pub aqm: Aqm,
}

impl LinkSpec {
    pub fn resolve(&self) -> Result<LinkConfig, NetsimError> {
        let bad = |reason: &str| NetsimError::BadLink {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if !(self.bandwidth_mbps > 0.0 && self.bandwidth_mbps.is_finite()) {
            return Err(bad("bandwidth must be positive"));
        }
        if !(self.delay_ms >= 0.0 && self.delay_ms.is_finite()) {
            return Err(bad("delay must be non-negative"));
        }
        let capacity = match self.queue {
            QueueSize::Pkts(0) => return Err(bad("queue must hold at least one packet")),
            QueueSize::Pkts(p) => p,
            QueueSize::DelayMs(ms) if ms > 0.0 => queue_packets(self.bandwidth_mbps, ms),
            QueueSize::DelayMs(_) => return Err(bad("queue delay must be positive")),
        };
        let aqm = match self.aqm {
            AqmSpec::DropTail => Aqm::DropTail,
            AqmSpec::Red {
                min_th,
                max_th,
                max_p,
                weight,
            } => {
                let red = RedParams {
                    min_th: min_th.packets(self.bandwidth_mbps),
                    max_th: max_th.packets(self.bandwidth_mbps),
                    queue_limit: capacity,
                    max_p,
                    weight,
                };
                if !red.is_valid() {
                    return Err(bad("RED needs 0 < min_th < max_th <= queue limit and max_p, weight in (0, 1]"));
                }
                Aqm::Red(red)
            }
        };
        Ok(LinkConfig {
            bandwidth_mbps: self.bandwidth_mbps,
            prop_delay_ms: self.delay_ms,
            queue_capacity: capacity,
            aqm,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CcKind {
    #[default]
    Reno,
    Cubic,
    MultipathSubflow,
}

fn default_mss() -> u32 {
    MTU_BYTES
}

fn default_count() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub id: String,
    pub src: String,
    pub dst: String,
    #[serde(default)]
    pub cc: CcKind,
    /// Start time; drawn uniformly from [0, 1 s) when absent.
    #[serde(default)]
    pub start_ms: Option<f64>,
    #[serde(default = "default_mss")]
    pub mss: u32,
    /// Explicit node path from `src` to `dst`; shortest hop path otherwise.
    #[serde(default)]
    pub path: Option<Vec<String>>,
    /// Owning multipath session, required for `multipath-subflow`.
    #[serde(default)]
    pub session: Option<String>,
    /// Number of identical flows; with `count > 1` ids become `<id>-<i>`.
    #[serde(default = "default_count")]
    pub count: u32,
}

impl FlowSpec {
    pub fn new(id: impl Into<String>, src: impl Into<String>, dst: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            src: src.into(),
            dst: dst.into(),
            cc: CcKind::Reno,
            start_ms: None,
            mss: MTU_BYTES,
            path: None,
            session: None,
            count: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    pub id: String,
    #[serde(default)]
    pub coupling: CouplingConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub nodes: Vec<String>,
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub flows: Vec<FlowSpec>,
    #[serde(default)]
    pub sessions: Vec<SessionSpec>,
    /// Detector used by multipath sessions.
    #[serde(default)]
    pub detector: DetectorConfig,
}

/// A flow after `count` expansion and routing.
#[derive(Debug, Clone)]
pub(crate) struct RoutedFlow {
    pub spec: FlowSpec,
    /// directional link indices, source to destination
    pub fwd: Vec<usize>,
    pub rev: Vec<usize>,
    pub session: Option<usize>,
}

/// Validated topology: directional links `2i` (a to b) and `2i + 1` (b to a).
#[derive(Debug, Clone)]
pub(crate) struct Resolved {
    pub links: Vec<LinkConfig>,
    pub flows: Vec<RoutedFlow>,
}

impl TopologySpec {
    /// Flow list with `count` expanded.
    pub fn expanded_flows(&self) -> Vec<FlowSpec> {
        let mut out = Vec::new();
        for f in &self.flows {
            if f.count <= 1 {
                out.push(FlowSpec { count: 1, ..f.clone() });
            } else {
                for i in 0..f.count {
                    out.push(FlowSpec {
                        id: format!("{}-{}", f.id, i),
                        count: 1,
                        ..f.clone()
                    });
                }
            }
        }
        out
    }

    /// Forward link ids of every expanded flow, in route order.
    pub fn flow_routes(&self) -> Result<Vec<(String, Vec<String>)>, NetsimError> {
        let r = self.resolve()?;
        Ok(r.flows
            .iter()
            .map(|f| {
                let links = f
                    .fwd
                    .iter()
                    .map(|&l| {
                        let id = &self.links[l / 2].id;
                        if l % 2 == 0 {
                            id.clone()
                        } else {
                            format!("{id}.rev")
                        }
                    })
                    .collect();
                (f.spec.id.clone(), links)
            })
            .collect())
    }

    pub(crate) fn resolve(&self) -> Result<Resolved, NetsimError> {
        let mut node_ix = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if node_ix.insert(n.as_str(), i).is_some() {
                return Err(NetsimError::DuplicateId(n.clone()));
            }
        }
        let lookup = |n: &str| {
            node_ix
                .get(n)
                .copied()
                .ok_or_else(|| NetsimError::UnknownNode(n.to_string()))
        };

        let mut seen = HashSet::new();
        let mut links = Vec::with_capacity(self.links.len() * 2);
        // adjacency: node -> [(neighbor, directional link)] in spec order
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.nodes.len()];
        for (i, l) in self.links.iter().enumerate() {
            if !seen.insert(l.id.as_str()) {
                return Err(NetsimError::DuplicateId(l.id.clone()));
            }
            let a = lookup(&l.a)?;
            let b = lookup(&l.b)?;
            if a == b {
                return Err(NetsimError::BadLink {
                    id: l.id.clone(),
                    reason: "link endpoints must differ".into(),
                });
            }
            let cfg = l.resolve()?;
            links.push(cfg);
            links.push(cfg);
            adj[a].push((b, 2 * i));
            adj[b].push((a, 2 * i + 1));
        }

        let mut session_ix = BTreeMap::new();
        for (i, s) in self.sessions.iter().enumerate() {
            if session_ix.insert(s.id.as_str(), i).is_some() {
                return Err(NetsimError::DuplicateId(s.id.clone()));
            }
            self.detector.validate()?;
            s.coupling.detector(&self.detector).validate().map_err(|e| NetsimError::BadSession {
                id: s.id.clone(),
                reason: e.to_string(),
            })?;
            if !(s.coupling.fallback_s >= 0.0) {
                return Err(NetsimError::BadSession {
                    id: s.id.clone(),
                    reason: "fallback_s must be non-negative".into(),
                });
            }
        }

        let mut flows = Vec::new();
        let mut flow_ids = HashSet::new();
        let mut session_members = vec![0usize; self.sessions.len()];
        for f in self.expanded_flows() {
            if !flow_ids.insert(f.id.clone()) {
                return Err(NetsimError::DuplicateId(f.id));
            }
            let bad = |reason: &str| NetsimError::BadFlow {
                id: f.id.clone(),
                reason: reason.to_string(),
            };
            let src = lookup(&f.src)?;
            let dst = lookup(&f.dst)?;
            if src == dst {
                return Err(bad("source and destination must differ"));
            }
            if f.mss == 0 {
                return Err(bad("mss must be positive"));
            }
            if let Some(t) = f.start_ms {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(bad("start_ms must be non-negative"));
                }
            }
            let session = match (&f.cc, &f.session) {
                (CcKind::MultipathSubflow, Some(s)) => {
                    let ix = *session_ix
                        .get(s.as_str())
                        .ok_or_else(|| bad(&format!("unknown session `{s}`")))?;
                    session_members[ix] += 1;
                    Some(ix)
                }
                (CcKind::MultipathSubflow, None) => return Err(bad("multipath-subflow needs a session")),
                (_, Some(_)) => return Err(bad("only multipath-subflow flows belong to a session")),
                (_, None) => None,
            };
            let fwd = match &f.path {
                Some(p) => explicit_route(p, src, dst, &adj, &lookup).ok_or_else(|| {
                    bad("path is not a chain of links from src to dst")
                })?,
                None => shortest_route(src, dst, &adj).ok_or_else(|| NetsimError::Unroutable {
                    id: f.id.clone(),
                    src: f.src.clone(),
                    dst: f.dst.clone(),
                })?,
            };
            // reverse channels of the same links, in reverse order
            let rev = fwd.iter().rev().map(|l| l ^ 1).collect();
            flows.push(RoutedFlow {
                spec: f,
                fwd,
                rev,
                session,
            });
        }
        for (i, n) in session_members.iter().enumerate() {
            if *n == 0 {
                return Err(NetsimError::BadSession {
                    id: self.sessions[i].id.clone(),
                    reason: "session has no subflows".into(),
                });
            }
        }
        Ok(Resolved { links, flows })
    }
}

fn explicit_route(
    path: &[String],
    src: usize,
    dst: usize,
    adj: &[Vec<(usize, usize)>],
    lookup: &dyn Fn(&str) -> Result<usize, NetsimError>,
) -> Option<Vec<usize>> {
    let nodes: Vec<usize> = path.iter().map(|n| lookup(n).ok()).collect::<Option<_>>()?;
    if nodes.len() < 2 || nodes[0] != src || nodes[nodes.len() - 1] != dst {
        return None;
    }
    nodes
        .windows(2)
        .map(|w| adj[w[0]].iter().find(|(n, _)| *n == w[1]).map(|(_, l)| *l))
        .collect()
}

/// Breadth-first shortest hop path; ties go to links listed first.
fn shortest_route(src: usize, dst: usize, adj: &[Vec<(usize, usize)>]) -> Option<Vec<usize>> {
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; adj.len()];
    let mut visited = vec![false; adj.len()];
    let mut q = VecDeque::from([src]);
    visited[src] = true;
    while let Some(u) = q.pop_front() {
        if u == dst {
            break;
        }
        for &(v, l) in &adj[u] {
            if !visited[v] {
                visited[v] = true;
                prev[v] = Some((u, l));
                q.push_back(v);
            }
        }
    }
    if !visited[dst] {
        return None;
    }
    let mut route = Vec::new();
    let mut cur = dst;
    while let Some((p, l)) = prev[cur] {
        route.push(l);
        cur = p;
    }
    route.reverse();
    Some(route)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(id: &str, a: &str, b: &str, mbps: f64) -> LinkSpec {
        LinkSpec {
            id: id.into(),
            a: a.into(),
            b: b.into(),
            bandwidth_mbps: mbps,
            delay_ms: 10.0,
            queue: QueueSize::Pkts(100),
            aqm: AqmSpec::DropTail,
            monitor: false,
        }
    }

    #[test]
    fn queue_conversion() {
        // 40 Mbps, 100 ms of buffering, 1500 byte packets
        assert_eq!(queue_packets(40.0, 100.0), 333);
        assert_eq!(queue_packets(500.0, 100.0), 4166);
        assert_eq!(queue_packets(0.01, 1.0), 1);
    }

    #[test]
    fn routes_both_directions() {
        let spec = TopologySpec {
            nodes: vec!["a".into(), "b".into(), "c".into()],
            links: vec![link("l0", "a", "b", 10.0), link("l1", "b", "c", 10.0)],
            flows: vec![FlowSpec::new("f", "a", "c")],
            ..Default::default()
        };
        let r = spec.resolve().unwrap();
        assert_eq!(r.flows[0].fwd, vec![0, 2]);
        assert_eq!(r.flows[0].rev, vec![3, 1]);
    }

    #[test]
    fn disconnected_is_unroutable() {
        let spec = TopologySpec {
            nodes: vec!["a".into(), "b".into(), "c".into()],
            links: vec![link("l0", "a", "b", 10.0)],
            flows: vec![FlowSpec::new("f", "a", "c")],
            ..Default::default()
        };
        assert!(matches!(spec.resolve(), Err(NetsimError::Unroutable { .. })));
    }

    #[test]
    fn rejects_bad_links() {
        let mut l = link("l0", "a", "b", 0.0);
        assert!(l.resolve().is_err());
        l.bandwidth_mbps = 10.0;
        l.queue = QueueSize::Pkts(0);
        assert!(l.resolve().is_err());
        l.queue = QueueSize::Pkts(100);
        l.aqm = AqmSpec::Red {
            min_th: QueueSize::Pkts(80),
            max_th: QueueSize::Pkts(50),
            max_p: 0.1,
            weight: 0.002,
        };
        assert!(l.resolve().is_err());
    }

    #[test]
    fn red_thresholds_in_delay_units() {
        let mut l = link("l2", "a", "b", 40.0);
        l.queue = QueueSize::DelayMs(140.0);
        l.aqm = AqmSpec::Red {
            min_th: QueueSize::DelayMs(100.0),
            max_th: QueueSize::DelayMs(120.0),
            max_p: 0.1,
            weight: 0.002,
        };
        let cfg = l.resolve().unwrap();
        assert_eq!(cfg.queue_capacity, 466);
        match cfg.aqm {
            Aqm::Red(r) => {
                assert!((r.min_th - 333.333).abs() < 1e-3);
                assert!((r.max_th - 400.0).abs() < 1e-9);
            }
            _ => panic!("expected RED"),
        }
    }

    #[test]
    fn count_expansion_and_duplicates() {
        let mut f = FlowSpec::new("bg", "a", "b");
        f.count = 3;
        let spec = TopologySpec {
            nodes: vec!["a".into(), "b".into()],
            links: vec![link("l0", "a", "b", 10.0)],
            flows: vec![f, FlowSpec::new("bg-1", "a", "b")],
            ..Default::default()
        };
        let ids: Vec<_> = spec.expanded_flows().into_iter().map(|f| f.id).collect();
        assert_eq!(ids, ["bg-0", "bg-1", "bg-2", "bg-1"]);
        assert!(matches!(spec.resolve(), Err(NetsimError::DuplicateId(_))));
    }

    #[test]
    fn explicit_path_must_follow_links() {
        let mut f = FlowSpec::new("f", "a", "c");
        f.path = Some(vec!["a".into(), "c".into()]);
        let spec = TopologySpec {
            nodes: vec!["a".into(), "b".into(), "c".into()],
            links: vec![link("l0", "a", "b", 10.0), link("l1", "b", "c", 10.0)],
            flows: vec![f],
            ..Default::default()
        };
        assert!(matches!(spec.resolve(), Err(NetsimError::BadFlow { .. })));
    }

    #[test]
    fn subflow_needs_session() {
        let mut f = FlowSpec::new("f", "a", "b");
        f.cc = CcKind::MultipathSubflow;
        let spec = TopologySpec {
            nodes: vec!["a".into(), "b".into()],
            links: vec![link("l0", "a", "b", 10.0)],
            flows: vec![f],
            ..Default::default()
        };
        assert!(matches!(spec.resolve(), Err(NetsimError::BadFlow { .. })));
    }
}
