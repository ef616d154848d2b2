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

//! Randomized invariants, each run for a given number of cases.
//!
//! Runs use a fixed generator seed so failures reproduce.

#![allow(dead_code)]

use std::fmt::Debug;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trsbd::detect::{
    decide, extract_groups, merge_groups, regress_slope, run_detector, smooth_samples, write_verdicts_csv,
    DetectorConfig, FlowTrace, MergedGroup, Point, RttSample, SbdVerdict, SlopeEstimate, SmoothingState,
    VerdictBasis,
};
use trsbd::eval::{equilibrium_throughput, fit_sqrt_law, jain_index, sqrt_law_rtt, throughput_ratio, Variant};
use trsbd::multipath::{lia_increase, Coupling, CouplingMode, SubflowState};
use trsbd::netsim::{
    build_topology, reno_on_ack, run, Admission, Aqm, AqmSpec, CcKind, CongestionState, FlowSpec, LinkSpec, Packet,
    PacketKind, PacketQueue, Phase, QueueSize, RedParams, RunResult, SimTime, TopologySpec, MTU_BYTES,
};

pub type Check = fn(u32) -> Result<(), String>;

/// Invariants of the detection pipeline.
pub const DETECT: &[(&str, Check)] = &[
    ("smoothing stays within the seen range", smoothing_bounds),
    ("batch smoothing equals incremental smoothing", smoothing_incremental),
    ("groups are monotone, disjoint and ordered", group_monotonicity),
    ("merging conserves points", point_conservation),
    ("regression ignores the time origin", regression_shift),
    ("decide is symmetric", decide_symmetry),
    ("zero epsilon needs equal slopes", decide_zero_epsilon),
    ("pipeline is deterministic", pipeline_determinism),
];

/// Invariants of the simulator.
pub const NETSIM: &[(&str, Check)] = &[
    ("queue conserves packets and stays bounded", queue_conservation),
    ("simulation conserves packets, bounds queues and rtt", simulation_conservation),
    ("simulation is deterministic", simulation_determinism),
];

/// Invariants of the controller and the metrics.
pub const CONTROL: &[(&str, Check)] = &[
    ("lia increase is positive and capped", lia_cap),
    ("single-subflow lia equals reno", lia_single_subflow),
    ("lia increase ignores the rtt unit", lia_rtt_unit),
    ("mode transitions follow the graph", mode_graph),
    ("jain index is symmetric and scale free", jain_props),
    ("throughput ratio is homogeneous", ratio_homogeneous),
    ("lia never exceeds uncoupled", lia_le_uncoupled),
    ("sqrt-law fit recovers its own model", sqrt_law_recovery),
];

fn check<S>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S: Strategy,
    S::Value: Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

// detection

/// Strictly increasing timestamps with positive delays.
fn series(max_len: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((0.01f64..50.0, 1.0f64..500.0), 0..max_len).prop_map(|v| {
        let mut t = 0.0;
        v.into_iter()
            .map(|(dt, y)| {
                t += dt;
                Point::new(t, y)
            })
            .collect()
    })
}

/// Series whose delays come from a small set, so ties and plateaus occur.
fn stepped_series(max_len: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((1u32..20, 0u32..6), 0..max_len).prop_map(|v| {
        let mut t = 0.0;
        v.into_iter()
            .map(|(dt, y)| {
                t += f64::from(dt);
                Point::new(t, 100.0 + f64::from(y))
            })
            .collect()
    })
}

fn any_series() -> impl Strategy<Value = Vec<Point>> {
    prop_oneof![series(300), stepped_series(300)]
}

fn estimate() -> impl Strategy<Value = SlopeEstimate> {
    (-50.0f64..500.0, 0.0f64..20_000.0, 0.0f64..5000.0, 2usize..200).prop_map(|(slope, start, len, n)| {
        SlopeEstimate {
            slope,
            start,
            end: start + len,
            n_points: n,
        }
    })
}

fn trace() -> impl Strategy<Value = Vec<RttSample>> {
    prop::collection::vec((1.0f64..30.0, -3.0f64..4.0), 50..600).prop_map(|v| {
        let (mut t, mut r) = (0.0, 100.0f64);
        v.into_iter()
            .map(|(dt, dr)| {
                t += dt;
                r = (r + dr).clamp(20.0, 2000.0);
                RttSample::new(t, r)
            })
            .collect()
    })
}

fn bits(v: &[Point]) -> Vec<(u64, u64)> {
    let mut b: Vec<_> = v.iter().map(|p| (p.t_ms.to_bits(), p.delay_ms.to_bits())).collect();
    b.sort_unstable();
    b
}

pub fn smoothing_bounds(cases: u32) -> Result<(), String> {
    let s = (0.001f64..=1.0, prop::collection::vec(0.001f64..1.0e4, 1..200));
    check(cases, s, |(alpha, rtts)| {
        let mut s = SmoothingState::new(alpha).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in rtts {
            lo = lo.min(r);
            hi = hi.max(r);
            let (next, v) = s.smooth(r).unwrap();
            prop_assert!(v >= lo && v <= hi, "{v} outside [{lo}, {hi}]");
            s = next;
        }
        Ok(())
    })
}

pub fn smoothing_incremental(cases: u32) -> Result<(), String> {
    check(cases, (trace(), 0.01f64..=1.0), |(a, alpha)| {
        let batch = smooth_samples(&a, alpha).unwrap();
        let mut s = SmoothingState::new(alpha).unwrap();
        for (p, x) in batch.iter().zip(&a) {
            let (next, v) = s.smooth(x.rtt_ms).unwrap();
            prop_assert_eq!(p.delay_ms.to_bits(), v.to_bits());
            prop_assert_eq!(p.t_ms, x.t_ms);
            s = next;
        }
        Ok(())
    })
}

pub fn group_monotonicity(cases: u32) -> Result<(), String> {
    check(cases, any_series(), |pts| {
        let mut prev_end = f64::NEG_INFINITY;
        for g in &extract_groups(&pts) {
            prop_assert!(!g.is_empty());
            prop_assert!(g.points()[0].t_ms > prev_end);
            for w in g.points().windows(2) {
                prop_assert!(w[1].t_ms > w[0].t_ms);
                prop_assert!(w[1].delay_ms >= w[0].delay_ms);
            }
            prev_end = g.points()[g.len() - 1].t_ms;
        }
        Ok(())
    })
}

pub fn point_conservation(cases: u32) -> Result<(), String> {
    check(cases, (any_series(), 0.0f64..200.0), |(pts, delta)| {
        let groups = extract_groups(&pts);
        let merged = merge_groups(&groups, delta);
        let before: Vec<Point> = groups.iter().flat_map(|g| g.points().to_vec()).collect();
        let after: Vec<Point> = merged.iter().flat_map(|g| g.points().to_vec()).collect();
        prop_assert_eq!(bits(&before), bits(&after));
        prop_assert!(merged.len() <= groups.len());
        for w in merged.windows(2) {
            prop_assert!(w[1].start() > w[0].end());
        }
        Ok(())
    })
}

/// Timestamps on a 1/8 ms grid and an integer shift, so the shifted series
/// is exactly representable.
pub fn regression_shift(cases: u32) -> Result<(), String> {
    let s = (
        prop::collection::vec((1u32..800, 0.0f64..1000.0), 5..100),
        -1_000_000i32..1_000_000,
    );
    check(cases, s, |(pts, shift)| {
        let shift = f64::from(shift);
        let mut t = 0.0;
        let a: Vec<Point> = pts
            .iter()
            .map(|&(dt, y)| {
                t += f64::from(dt) / 8.0;
                Point::new(t, y)
            })
            .collect();
        let b: Vec<Point> = a.iter().map(|p| Point::new(p.t_ms + shift, p.delay_ms)).collect();
        let sa = regress_slope(&MergedGroup::new(a).unwrap(), 5).unwrap().slope;
        let sb = regress_slope(&MergedGroup::new(b).unwrap(), 5).unwrap().slope;
        prop_assert!((sa - sb).abs() <= 1e-9 * sa.abs().max(1e-6), "{sa} vs {sb}");
        Ok(())
    })
}

pub fn decide_symmetry(cases: u32) -> Result<(), String> {
    check(cases, (estimate(), estimate(), 0.0f64..1.0, 0.0f64..5000.0), |(a, b, eps, tau)| {
        let ab = decide(a, b, eps, tau);
        let ba = decide(b, a, eps, tau);
        prop_assert_eq!(ab.shared, ba.shared);
        prop_assert_eq!(ab.error, ba.error);
        prop_assert_eq!(ab.basis, ba.basis);
        Ok(())
    })
}

pub fn decide_zero_epsilon(cases: u32) -> Result<(), String> {
    let s = (estimate(), estimate(), any::<bool>(), 0.0f64..5000.0);
    check(cases, s, |(a, b, same, tau)| {
        let b = if same { SlopeEstimate { slope: a.slope, ..b } } else { b };
        let v = decide(a, b, 0.0, tau);
        let in_time = a.start.max(b.start) - a.end.min(b.end) <= tau;
        prop_assert_eq!(v.shared, in_time && a.slope == b.slope && a.slope > 0.0);
        if !in_time {
            prop_assert_eq!(v.basis, VerdictBasis::TimeGated);
        }
        Ok(())
    })
}

pub fn pipeline_determinism(cases: u32) -> Result<(), String> {
    check(cases, (trace(), trace()), |(a, b)| {
        let cfg = DetectorConfig {
            window_ms: 1000.0,
            ..DetectorConfig::default()
        };
        let ta = FlowTrace::new("a", a).unwrap();
        let tb = FlowTrace::new("b", b).unwrap();
        let v1 = run_detector(&ta, &tb, &cfg).unwrap();
        let v2 = run_detector(&ta.clone(), &tb.clone(), &cfg).unwrap();
        let (mut c1, mut c2) = (Vec::new(), Vec::new());
        write_verdicts_csv(&v1, &mut c1).unwrap();
        write_verdicts_csv(&v2, &mut c2).unwrap();
        prop_assert_eq!(c1, c2);
        prop_assert_eq!(v1, v2);
        Ok(())
    })
}

// simulator

fn data(seq: u64) -> Packet {
    Packet {
        flow: 0,
        hop: 0,
        reverse: false,
        size: MTU_BYTES,
        kind: PacketKind::Data {
            seq,
            sent_at: SimTime::ZERO,
        },
    }
}

fn aqm() -> impl Strategy<Value = (Aqm, u32)> {
    (1u32..60, any::<bool>(), 0.0f64..1.0, 0.0f64..1.0).prop_map(|(cap, red, a, b)| {
        if red && cap >= 3 {
            let lo = 1.0 + a * f64::from(cap - 2);
            let hi = lo + 1.0 + b * (f64::from(cap) - lo - 1.0).max(0.0);
            (Aqm::Red(RedParams::new(lo, hi, cap)), cap)
        } else {
            (Aqm::DropTail, cap)
        }
    })
}

/// Arrivals = dequeued + dropped + waiting, 0 <= waiting <= capacity and
/// FIFO order, after every operation.
pub fn queue_conservation(cases: u32) -> Result<(), String> {
    let s = (
        aqm(),
        prop::collection::vec((any::<bool>(), 0u64..2000), 1..400),
        any::<u64>(),
    );
    check(cases, s, |((aqm, cap), ops, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = PacketQueue::new(aqm, cap, SimTime::from_micros(100), true);
        let mut now = SimTime::ZERO;
        let mut seq = 0;
        let mut waiting = std::collections::VecDeque::new();
        for (enq, dt) in ops {
            now = now + SimTime::from_micros(dt);
            if enq {
                seq += 1;
                if q.enqueue(data(seq), now, &mut rng) == Admission::Accept {
                    waiting.push_back(seq);
                }
            } else if let Some(p) = q.dequeue(now) {
                let PacketKind::Data { seq: s, .. } = p.kind else {
                    unreachable!()
                };
                prop_assert_eq!(Some(s), waiting.pop_front(), "not FIFO");
            }
            prop_assert_eq!(q.arrivals, q.dequeued + q.dropped + q.len() as u64);
            prop_assert!(q.len() <= cap as usize);
            prop_assert!(q.red_average() >= 0.0);
        }
        let m = q.monitor.as_ref().unwrap();
        prop_assert!(m.samples.iter().all(|&(_, n)| n <= cap));
        prop_assert_eq!(m.drops.len() as u64, q.dropped);
        Ok(())
    })
}

#[derive(Debug, Clone)]
struct Tiny {
    spec: TopologySpec,
    duration_ms: f64,
    seed: u64,
    /// one-way propagation delay from source to destination
    prop_ms: f64,
}

fn link(id: &str, a: &str, b: &str, mbps: f64, delay_ms: f64, queue: u32, red: bool) -> LinkSpec {
    LinkSpec {
        id: id.into(),
        a: a.into(),
        b: b.into(),
        bandwidth_mbps: mbps,
        delay_ms,
        queue: QueueSize::Pkts(queue),
        aqm: if red && queue >= 6 {
            AqmSpec::Red {
                min_th: QueueSize::Pkts(queue / 3),
                max_th: QueueSize::Pkts(2 * queue / 3),
                max_p: 0.1,
                weight: 0.002,
            }
        } else {
            AqmSpec::DropTail
        },
        monitor: true,
    }
}

/// A two-hop path with up to three Reno or CUBIC flows, run for at most
/// 1.5 s.
fn tiny() -> impl Strategy<Value = Tiny> {
    (
        (0.3f64..8.0, 0.5f64..30.0, 1u32..40, any::<bool>()),
        (20.0f64..100.0, 0.5f64..10.0, 5u32..100),
        prop::collection::vec((any::<bool>(), prop::option::of(0.0f64..500.0)), 0..4),
        100.0f64..1500.0,
        any::<u64>(),
    )
        .prop_map(|((bw, d, q, red), (bw2, d2, q2), flows, duration_ms, seed)| {
            let flows = flows
                .into_iter()
                .enumerate()
                .map(|(i, (cubic, start))| FlowSpec {
                    cc: if cubic { CcKind::Cubic } else { CcKind::Reno },
                    start_ms: start,
                    ..FlowSpec::new(format!("f{i}"), "s", "d")
                })
                .collect();
            Tiny {
                spec: TopologySpec {
                    nodes: vec!["s".into(), "r".into(), "d".into()],
                    links: vec![
                        link("A", "s", "r", bw2, d2, q2, false),
                        link("B", "r", "d", bw, d, q, red),
                    ],
                    flows,
                    ..TopologySpec::default()
                },
                duration_ms,
                seed,
                prop_ms: d + d2,
            }
        })
}

fn simulate(t: &Tiny) -> RunResult {
    run(build_topology(&t.spec).unwrap(), t.duration_ms, t.seed).unwrap()
}

pub fn simulation_conservation(cases: u32) -> Result<(), String> {
    check(cases, tiny(), |t| {
        let r = simulate(&t);
        for l in &r.links {
            prop_assert_eq!(l.arrivals, l.dequeued + l.dropped + l.queued, "link {}", l.id);
            prop_assert!(l.queued <= u64::from(l.capacity));
            prop_assert!(l.in_service <= 1);
            prop_assert!(l.busy_ms <= t.duration_ms + 1e-9);
            let m = l.monitor.as_ref().unwrap();
            prop_assert!(m.samples.iter().all(|&(_, n)| n <= l.capacity));
            prop_assert_eq!(m.drops.len() as u64, l.dropped);
        }
        for f in &r.flows {
            prop_assert!(f.delivered_packets <= f.sent_packets);
            prop_assert_eq!(f.delivered_bins.iter().sum::<u64>(), f.delivered_bytes());
            for s in &f.trace {
                prop_assert!(s.rtt_ms >= 2.0 * t.prop_ms - 1e-6, "rtt {} below {}", s.rtt_ms, 2.0 * t.prop_ms);
            }
            for w in f.trace.windows(2) {
                prop_assert!(w[1].t_ms > w[0].t_ms);
            }
        }
        Ok(())
    })
}

pub fn simulation_determinism(cases: u32) -> Result<(), String> {
    check(cases, tiny(), |t| {
        let a = simulate(&t);
        let b = simulate(&t);
        prop_assert_eq!(a.flows.len(), b.flows.len());
        for (x, y) in a.flows.iter().zip(&b.flows) {
            prop_assert_eq!(&x.trace, &y.trace);
            prop_assert_eq!(&x.delivered_bins, &y.delivered_bins);
            prop_assert_eq!(x.sent_packets, y.sent_packets);
            prop_assert_eq!(x.start_ms.to_bits(), y.start_ms.to_bits());
        }
        for (x, y) in a.links.iter().zip(&b.links) {
            prop_assert_eq!((x.arrivals, x.dropped, x.dequeued), (y.arrivals, y.dropped, y.dequeued));
            prop_assert_eq!(&x.monitor.as_ref().unwrap().samples, &y.monitor.as_ref().unwrap().samples);
        }
        Ok(())
    })
}

// controller and metrics

fn subflows() -> impl Strategy<Value = Vec<SubflowState>> {
    prop::collection::vec((1.0f64..2000.0, 0.1f64..5000.0), 1..8).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (w, rtt))| SubflowState::new(i, w, rtt))
            .collect()
    })
}

fn verdict(shared: bool) -> SbdVerdict {
    let e = SlopeEstimate {
        slope: 1.0,
        start: 0.0,
        end: 1.0,
        n_points: 5,
    };
    SbdVerdict {
        shared,
        error: Some(if shared { 0.0 } else { 1.0 }),
        basis: VerdictBasis::Compared,
        slope_a: e,
        slope_b: e,
    }
}

pub fn lia_cap(cases: u32) -> Result<(), String> {
    check(cases, (subflows(), any::<prop::sample::Index>()), |(subs, pick)| {
        let acked = pick.index(subs.len());
        let inc = lia_increase(&subs, acked).unwrap();
        prop_assert!(inc > 0.0);
        prop_assert!(inc <= 1.0 / subs[acked].cc.cwnd);
        Ok(())
    })
}

/// Congestion-avoidance increments of one LIA subflow and of Reno agree
/// bit for bit.
pub fn lia_single_subflow(cases: u32) -> Result<(), String> {
    check(cases, (1.0f64..1.0e5, 1.0e-3f64..1.0e4), |(w, rtt)| {
        let inc = lia_increase(&[SubflowState::new(0, w, rtt)], 0).unwrap();
        let reno = reno_on_ack(CongestionState::new(w).with_phase(w, 1.0, Phase::CongestionAvoidance));
        prop_assert_eq!(inc.to_bits(), (1.0 / w).to_bits());
        prop_assert_eq!((w + inc).to_bits(), reno.cwnd.to_bits());
        Ok(())
    })
}

pub fn lia_rtt_unit(cases: u32) -> Result<(), String> {
    check(cases, (subflows(), 1.0e-3f64..1.0e3), |(subs, k)| {
        let scaled: Vec<SubflowState> = subs
            .iter()
            .map(|s| SubflowState::new(s.path_id, s.cc.cwnd, s.cc.srtt_ms.unwrap() * k))
            .collect();
        let a = lia_increase(&subs, 0).unwrap();
        let b = lia_increase(&scaled, 0).unwrap();
        prop_assert!((a - b).abs() <= 16.0e-12 * a, "{a} vs {b}");
        Ok(())
    })
}

/// Only uncoupled to coupled on a positive verdict and coupled to uncoupled
/// after the fallback time are ever taken.
pub fn mode_graph(cases: u32) -> Result<(), String> {
    let s = (
        1.0f64..50_000.0,
        prop::collection::vec((any::<bool>(), any::<bool>(), 1.0f64..20_000.0), 1..100),
    );
    check(cases, s, |(fallback, steps)| {
        let mut m = CouplingMode::new(fallback);
        let mut now = 0.0;
        for (is_signal, shared, dt) in steps {
            now += dt;
            let before = m;
            m = if is_signal {
                m.on_sbd_signal(&verdict(shared), now)
            } else {
                m.on_tick(now)
            };
            match (before.mode, m.mode) {
                (Coupling::Uncoupled, Coupling::Coupled) => prop_assert!(is_signal && shared),
                (Coupling::Coupled, Coupling::Uncoupled) => {
                    prop_assert!(!is_signal);
                    prop_assert!(now - before.last_positive.unwrap() > fallback);
                }
                (Coupling::Coupled, Coupling::Coupled) if !is_signal => {
                    prop_assert!(now - before.last_positive.unwrap() <= fallback);
                }
                _ => {}
            }
            if is_signal && shared {
                prop_assert_eq!(m.last_positive, Some(now));
                prop_assert_eq!(m.mode, Coupling::Coupled);
            }
            if is_signal && !shared {
                prop_assert_eq!(m, before);
            }
        }
        Ok(())
    })
}

pub fn jain_props(cases: u32) -> Result<(), String> {
    check(cases, (0.0f64..1.0e4, 1.0e-9f64..1.0e4, 1.0e-3f64..1.0e3, any::<bool>()), |(a, b, k, swap)| {
        let (a, b) = if swap { (b, a) } else { (a, b) };
        let j = jain_index(a, b).unwrap();
        prop_assert_eq!(j, jain_index(b, a).unwrap());
        let js = jain_index(k * a, k * b).unwrap();
        prop_assert!((j - js).abs() <= 1e-12, "{j} vs {js}");
        prop_assert!((0.5..=1.0).contains(&j));
        Ok(())
    })
}

pub fn ratio_homogeneous(cases: u32) -> Result<(), String> {
    check(cases, (0.0f64..1.0e4, 1.0e-3f64..1.0e4, 1.0e-3f64..1.0e3), |(a, b, k)| {
        let r = throughput_ratio(a, b).unwrap();
        let rs = throughput_ratio(k * a, k * b).unwrap();
        prop_assert!((r - rs).abs() <= 1e-12 * r.max(1.0), "{r} vs {rs}");
        Ok(())
    })
}

pub fn lia_le_uncoupled(cases: u32) -> Result<(), String> {
    check(cases, prop::collection::vec((1.0e-3f64..5.0, 1.0e-6f64..0.999), 1..8), |paths| {
        let lia = equilibrium_throughput(Variant::Lia, &paths).unwrap();
        let unc = equilibrium_throughput(Variant::Uncoupled, &paths).unwrap();
        prop_assert!(lia > 0.0 && lia <= unc);
        Ok(())
    })
}

pub fn sqrt_law_recovery(cases: u32) -> Result<(), String> {
    let s = (1.0f64..100.0, 50.0f64..50_000.0, 0.005f64..1.0, 0.5f64..30.0, 5usize..400);
    check(cases, s, |(n, c_pps, r_min, len_s, count)| {
        let t: Vec<f64> = (0..count).map(|i| len_s * i as f64 / (count - 1) as f64).collect();
        let r: Vec<f64> = t.iter().map(|&t| sqrt_law_rtt(n, c_pps, r_min, t)).collect();
        let fit = fit_sqrt_law(&t, &r).unwrap();
        let (slope, icpt) = (2.0 * n / c_pps, r_min * r_min);
        prop_assert!((fit.slope - slope).abs() <= 1e-6 * slope, "{} vs {slope}", fit.slope);
        prop_assert!((fit.intercept - icpt).abs() <= 1e-6 * icpt, "{} vs {icpt}", fit.intercept);
        prop_assert!((fit.r_squared - 1.0).abs() <= 1e-9, "{}", fit.r_squared);
        prop_assert!((fit.implied_flows(c_pps) - n).abs() <= 1e-6 * n);
        Ok(())
    })
}
