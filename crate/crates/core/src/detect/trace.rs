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

//! RTT traces: the detector's only input.
//!
//! A trace is a time series of `(ack arrival time, round-trip delay)` pairs
//! for one flow, both in milliseconds. On disk a trace is a CSV file with the
//! header `t_ms,rtt_ms` and rows in ascending `t_ms`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DetectError;

/// One RTT measurement taken when an acknowledgement arrives at the sender.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RttSample {
    /// Arrival time of the ack, ms since the trace epoch.
    pub t_ms: f64,
    /// Round-trip delay, ms.
    pub rtt_ms: f64,
}

impl RttSample {
    pub fn new(t_ms: f64, rtt_ms: f64) -> Self {
        Self { t_ms, rtt_ms }
    }
}

/// A validated per-flow trace. Samples are non-empty, finite, with positive
/// rtt and strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    flow_id: String,
    samples: Vec<RttSample>,
}

impl FlowTrace {
    pub fn new(flow_id: impl Into<String>, samples: Vec<RttSample>) -> Result<Self, DetectError> {
        if samples.is_empty() {
            return Err(DetectError::EmptyTrace);
        }
        let mut prev: Option<f64> = None;
        for (i, s) in samples.iter().enumerate() {
            if !s.t_ms.is_finite() || s.t_ms < 0.0 {
                return Err(DetectError::BadTimestamp { index: i, t_ms: s.t_ms });
            }
            if !(s.rtt_ms.is_finite() && s.rtt_ms > 0.0) {
                return Err(DetectError::NonPositiveRtt { index: i, rtt_ms: s.rtt_ms });
            }
            if let Some(p) = prev {
                if s.t_ms <= p {
                    return Err(DetectError::NonIncreasingTime { index: i, t_ms: s.t_ms });
                }
            }
            prev = Some(s.t_ms);
        }
        Ok(Self {
            flow_id: flow_id.into(),
            samples,
        })
    }

    pub fn flow_id(&self) -> &str {
        &self.flow_id
    }

    pub fn samples(&self) -> &[RttSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// First and last timestamp.
    pub fn span(&self) -> (f64, f64) {
        (self.samples[0].t_ms, self.samples[self.samples.len() - 1].t_ms)
    }

    pub fn read_csv<R: Read>(flow_id: impl Into<String>, reader: R) -> Result<Self, DetectError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "t_ms" || &headers[1] != "rtt_ms" {
            return Err(DetectError::BadHeader(headers.iter().collect::<Vec<_>>().join(",")));
        }
        let mut samples = Vec::new();
        for row in rdr.deserialize() {
            let s: RttSample = row?;
            samples.push(s);
        }
        Self::new(flow_id, samples)
    }

    /// Reads a trace file; the flow id is the file stem.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DetectError> {
        let path = path.as_ref();
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = std::fs::File::open(path)?;
        Self::read_csv(id, std::io::BufReader::new(file))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DetectError> {
        write_samples_csv(&self.samples, writer)
    }
}

/// Writes samples in the trace CSV format. Values are written in their
/// shortest form that parses back to the same `f64`.
pub fn write_samples_csv<W: Write>(samples: &[RttSample], writer: W) -> Result<(), DetectError> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "t_ms,rtt_ms")?;
    for s in samples {
        writeln!(w, "{},{}", s.t_ms, s.rtt_ms)?;
    }
    w.flush()?;
    Ok(())
}
