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

//! Metrics of a finished run, computed from the files `simulate` wrote.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use trsbd::detect::{run_detector, FlowTrace, VerdictBasis};
use trsbd::eval::{
    capacity_pps, fit_longest_segment, jain_index, positive_intervals, predicted_slope, quantile,
    throughput_ratio, window_dominant_slopes, write_report_csv, IntervalReport, Metric,
};
use trsbd::netsim::{QueueMonitor, SimTime, BIN_MS};
use trsbd::scenario::ScenarioFile;

use crate::failure::{Class, Failure, ResultExt};
use crate::manifest::{Manifest, MANIFEST_FILE};

pub const REPORT_FILE: &str = "report.csv";
/// shortest queue-filling episode used for the square-root-law fit
const MIN_SEGMENT_MS: f64 = 2000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub scenario: String,
    pub metrics: Vec<Metric>,
    lines: Vec<String>,
}

impl Report {
    fn push(&mut self, label: &str, metric: &str, value: f64) {
        self.metrics.push(Metric::new(metric, label, value));
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        write_report_csv(&self.metrics, File::create(path).class(Class::Io)?).class(Class::Io)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(l);
            s.push('\n');
        }
        s
    }

    fn value(&self, metric: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.metric == metric).map(|m| m.value)
    }
}

fn missing(dir: &Path, what: &str) -> Failure {
    Failure::new(
        Class::Input,
        format!("{} is not a run directory: missing {what}", dir.display()),
    )
}

/// Per-flow mean rate over whole bins in `[from_ms, duration)`, from
/// `rates.csv`.
fn mean_rates(dir: &Path, from_ms: f64, duration_ms: f64) -> Result<BTreeMap<String, f64>, Failure> {
    let path = dir.join("rates.csv");
    if !path.is_file() {
        return Err(missing(dir, "rates.csv"));
    }
    let mut rdr = csv::Reader::from_path(&path).class(Class::Input)?;
    let ids: Vec<String> = rdr.headers().class(Class::Input)?.iter().skip(1).map(String::from).collect();
    let first = (from_ms / BIN_MS).ceil() as usize;
    let last = (duration_ms / BIN_MS).floor() as usize;
    let mut sums = vec![0.0; ids.len()];
    for (b, rec) in rdr.records().enumerate() {
        let rec = rec.class(Class::Input)?;
        if b < first || b >= last {
            continue;
        }
        for (i, v) in rec.iter().skip(1).enumerate() {
            sums[i] += v.parse::<f64>().class(Class::Input)?;
        }
    }
    let n = last.saturating_sub(first).max(1) as f64;
    Ok(ids.into_iter().zip(sums).map(|(id, s)| (id, s / n)).collect())
}

/// Session verdict rows, grouped per window: a window is positive when any
/// subflow pair is.
fn session_windows(dir: &Path) -> Result<BTreeMap<String, Vec<(f64, f64, bool)>>, Failure> {
    let path = dir.join("verdicts.csv");
    if !path.is_file() {
        return Err(missing(dir, "verdicts.csv"));
    }
    let mut rdr = csv::Reader::from_path(&path).class(Class::Input)?;
    let mut out: BTreeMap<String, Vec<(f64, f64, bool)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.class(Class::Input)?;
        let field = |i: usize| rec.get(i).unwrap_or_default().to_string();
        let start: f64 = field(3).parse().class(Class::Input)?;
        let end: f64 = field(4).parse().class(Class::Input)?;
        let shared: bool = field(5).parse().class(Class::Input)?;
        let ws = out.entry(field(0)).or_default();
        match ws.last_mut() {
            Some(w) if w.0 == start => w.2 |= shared,
            _ => ws.push((start, end, shared)),
        }
    }
    Ok(out)
}

fn windows_report(ws: &[(f64, f64, bool)]) -> IntervalReport {
    use trsbd::detect::{SbdVerdict, SlopeEstimate, TimeWindow, WindowVerdict};
    let est = SlopeEstimate {
        slope: 0.0,
        start: 0.0,
        end: 0.0,
        n_points: 0,
    };
    let verdicts: Vec<WindowVerdict> = ws
        .iter()
        .map(|&(s, e, shared)| WindowVerdict {
            window: TimeWindow::new(s, e),
            verdict: SbdVerdict {
                shared,
                error: None,
                slope_a: est,
                slope_b: est,
                basis: VerdictBasis::Compared,
            },
        })
        .collect();
    positive_intervals(&verdicts)
}

fn push_intervals(report: &mut Report, label: &str, ir: &IntervalReport) {
    report.push(label, "positive_windows", ir.positive_windows as f64);
    report.push(label, "evaluated_windows", ir.evaluated_windows as f64);
    report.push(label, "positive_intervals", ir.intervals.len() as f64);
    if let Some(t) = ir.time_to_first_positive_ms {
        report.push(label, "time_to_first_positive_ms", t);
    }
    let spans: Vec<String> = ir
        .intervals
        .iter()
        .map(|i| format!("[{:.0}, {:.0}]", i.start_ms / 1000.0, i.end_ms / 1000.0))
        .collect();
    report.lines.push(format!(
        "  {label}: {}/{} windows positive, first at {}, intervals (s) {}",
        ir.positive_windows,
        ir.evaluated_windows,
        ir.time_to_first_positive_ms
            .map_or("never".to_string(), |t| format!("{:.0} ms", t)),
        if spans.is_empty() { "none".to_string() } else { spans.join(" ") }
    ));
}

fn load_trace(dir: &Path, id: &str) -> Result<FlowTrace, Failure> {
    let p = dir.join("traces").join(format!("{id}.csv"));
    if !p.is_file() {
        return Err(missing(dir, &format!("traces/{id}.csv")));
    }
    FlowTrace::from_path(&p).map_err(|e| Failure::new(Class::Input, format!("{}: {e}", p.display())))
}

fn load_monitors(dir: &Path) -> Result<BTreeMap<String, QueueMonitor>, Failure> {
    let mut out: BTreeMap<String, QueueMonitor> = BTreeMap::new();
    let (q, d) = (dir.join("queue.csv"), dir.join("drops.csv"));
    if !q.is_file() || !d.is_file() {
        return Ok(out);
    }
    let mut rdr = csv::Reader::from_path(&q).class(Class::Input)?;
    for rec in rdr.deserialize::<(String, f64, u32)>() {
        let (id, t, n) = rec.class(Class::Input)?;
        out.entry(id).or_default().samples.push((SimTime::from_millis_f64(t), n));
    }
    let mut rdr = csv::Reader::from_path(&d).class(Class::Input)?;
    for rec in rdr.deserialize::<(String, f64)>() {
        let (id, t) = rec.class(Class::Input)?;
        out.entry(id).or_default().drops.push(SimTime::from_millis_f64(t));
    }
    Ok(out)
}

pub fn evaluate_dir(dir: &Path) -> Result<Report, Failure> {
    let scen_path = dir.join("scenario.json");
    if !scen_path.is_file() {
        return Err(missing(dir, "scenario.json"));
    }
    let text = fs::read_to_string(&scen_path).class(Class::Io)?;
    let scenario = ScenarioFile::from_json(&text).map_err(crate::failure::scenario)?;
    if let Ok(m) = fs::read_to_string(dir.join(MANIFEST_FILE)) {
        let m: Manifest = serde_json::from_str(&m).class(Class::Input)?;
        let changed = m.verify(dir).class(Class::Input)?;
        if !changed.is_empty() {
            log::warn!("outputs changed since the run: {}", changed.join(", "));
        }
    }

    let name = scenario.name.clone();
    let ev = &scenario.evaluation;
    let topo = scenario.topology();
    let flows = topo.expanded_flows();
    let mut report = Report {
        scenario: name.clone(),
        metrics: Vec::new(),
        lines: vec![format!("scenario {name}: {} flows, {:.0} s", flows.len(), scenario.duration_ms / 1000.0)],
    };
    let rates = mean_rates(dir, ev.from_ms, scenario.duration_ms)?;
    let windows = session_windows(dir)?;
    for f in &flows {
        if !dir.join("traces").join(format!("{}.csv", f.id)).is_file() {
            return Err(missing(dir, &format!("traces/{}.csv", f.id)));
        }
    }

    // fairness and gain of every multipath session
    let refs: Vec<&str> = if ev.reference_flows.is_empty() {
        flows.iter().filter(|f| f.session.is_none()).map(|f| f.id.as_str()).collect()
    } else {
        ev.reference_flows.iter().map(String::as_str).collect()
    };
    let ref_rates: Vec<f64> = refs.iter().filter_map(|id| rates.get(*id).copied()).collect();
    if ref_rates.len() != refs.len() {
        return Err(Failure::new(Class::Config, "evaluation.reference_flows names an unknown flow"));
    }
    let x_sp = trsbd::eval::mean(&ref_rates);
    for s in &scenario.sessions {
        let label = if scenario.sessions.len() == 1 { name.clone() } else { format!("{name}/{}", s.id) };
        let x_mp: f64 = flows
            .iter()
            .filter(|f| f.session.as_deref() == Some(s.id.as_str()))
            .filter_map(|f| rates.get(&f.id))
            .sum();
        report.push(&label, "x_mp_mbps", x_mp);
        let mut line = format!("  session {}: x_mp {x_mp:.3} Mbps", s.id);
        if !ref_rates.is_empty() {
            report.push(&label, "x_sp_mean_mbps", x_sp);
            report.push(&label, "n_single_flows", ref_rates.len() as f64);
            line.push_str(&format!(", mean of {} single-path flows {x_sp:.3} Mbps", ref_rates.len()));
            if let Ok(j) = jain_index(x_sp, x_mp) {
                report.push(&label, "jain_index", j);
                line.push_str(&format!(", J {j:.4}"));
            }
            if let Ok(r) = throughput_ratio(x_mp, x_sp) {
                report.push(&label, "throughput_ratio", r);
                line.push_str(&format!(", R {r:.3}"));
            }
        }
        report.lines.push(line);
        let ws = windows.get(&s.id).map_or(&[][..], Vec::as_slice);
        push_intervals(&mut report, &label, &windows_report(ws));
    }

    // offline detection between chosen flow pairs
    for [a, b] in &ev.detect_pairs {
        let label = format!("{name}/{a}~{b}");
        let ta = load_trace(dir, a)?;
        let tb = load_trace(dir, b)?;
        let v = run_detector(&ta, &tb, &scenario.detector).class(Class::Config)?;
        push_intervals(&mut report, &label, &positive_intervals(&v));
    }

    // slope law on the declared bottleneck
    if let (Some(n), Some(c)) = (ev.bottleneck_flows, ev.bottleneck_mbps) {
        let mss = flows.first().map_or(1500, |f| f.mss);
        let predicted = predicted_slope(n, c, mss);
        let mut slopes = Vec::new();
        for f in &flows {
            let t = load_trace(dir, &f.id)?;
            slopes.extend(
                window_dominant_slopes(t.samples(), &scenario.detector, ev.from_ms, scenario.duration_ms)
                    .class(Class::Config)?,
            );
        }
        report.push(&name, "predicted_slope_ms_per_s", predicted);
        let mut line = format!("  slope law: predicted {predicted:.2} ms/s");
        if let (Some(q1), Some(med), Some(q3)) =
            (quantile(&slopes, 0.25), quantile(&slopes, 0.5), quantile(&slopes, 0.75))
        {
            report.push(&name, "median_dominant_slope_ms_per_s", med);
            report.push(&name, "q1_dominant_slope_ms_per_s", q1);
            report.push(&name, "q3_dominant_slope_ms_per_s", q3);
            report.push(&name, "slope_ratio", med / predicted);
            line.push_str(&format!(
                ", measured median {med:.2} (IQR {q1:.2} to {q3:.2}) over {} windows",
                slopes.len()
            ));
        }
        report.lines.push(line);
    }

    // square-root-law fit on every monitored direction
    let monitors = load_monitors(dir)?;
    if !monitors.is_empty() {
        let routes = topo.flow_routes().map_err(|e| Failure::new(Class::Topology, e.to_string()))?;
        for (link, mon) in &monitors {
            let Some((flow, _)) = routes.iter().find(|(_, r)| r.contains(link)) else {
                continue;
            };
            let trace = load_trace(dir, flow)?;
            let label = format!("{name}/{link}");
            let Some(fit) = fit_longest_segment(mon, trace.samples(), MIN_SEGMENT_MS) else {
                report.lines.push(format!("  sqrt law on {link}: no queue-filling episode of 2 s"));
                continue;
            };
            let (fit, (s, e)) = fit.class(Class::Input)?;
            report.push(&label, "sqrt_law_r_squared", fit.r_squared);
            report.push(&label, "sqrt_law_segment_ms", e - s);
            let mut line = format!(
                "  sqrt law on {link} via {flow}: r^2 {:.4} over [{:.1}, {:.1}] s",
                fit.r_squared,
                s / 1000.0,
                e / 1000.0
            );
            let base = link.trim_end_matches(".rev");
            if let Some(spec) = scenario.links.iter().find(|l| l.id == base) {
                let mss = flows.iter().find(|f| &f.id == flow).map_or(1500, |f| f.mss);
                let n = fit.implied_flows(capacity_pps(spec.bandwidth_mbps, mss));
                report.push(&label, "sqrt_law_implied_flows", n);
                line.push_str(&format!(", implied flows {n:.2}"));
            }
            report.lines.push(line);
        }
    }
    Ok(report)
}

/// `scenario,jain_index,throughput_ratio,time_to_first_positive_ms` for one
/// run.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: String,
    pub jain: Option<f64>,
    pub ratio: Option<f64>,
    pub ttfp_ms: Option<f64>,
}

pub fn report_row(dir: &Path) -> Result<Row, Failure> {
    let report = evaluate_dir(dir)?;
    Ok(Row {
        scenario: report.scenario.clone(),
        jain: report.value("jain_index"),
        ratio: report.value("throughput_ratio"),
        ttfp_ms: report.value("time_to_first_positive_ms"),
    })
}

pub fn write_table<W: Write>(rows: &[Row], writer: W) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "scenario,jain_index,throughput_ratio,time_to_first_positive_ms")?;
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in rows {
        writeln!(w, "{},{},{},{}", r.scenario, cell(r.jain), cell(r.ratio), cell(r.ttfp_ms))?;
    }
    w.flush()
}
