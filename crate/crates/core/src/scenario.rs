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

//! Versioned scenario files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detect::DetectorConfig;
use crate::netsim::{build_topology, run, FlowSpec, LinkSpec, NetsimError, RunResult, SessionSpec, TopologySpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("at `{path}`: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    Version(u32),
    #[error(transparent)]
    Netsim(#[from] NetsimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which flows the evaluation compares.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSpec {
    /// single-path flows whose mean rate is the fairness reference
    pub reference_flows: Vec<String>,
    /// rates are averaged from here to the end of the run
    pub from_ms: f64,
    /// flow count and capacity of the bottleneck, for the slope law
    pub bottleneck_flows: Option<f64>,
    pub bottleneck_mbps: Option<f64>,
    /// flow pairs to run the offline detector on
    pub detect_pairs: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub duration_ms: f64,
    #[serde(default)]
    pub seed: u64,
    pub nodes: Vec<String>,
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub flows: Vec<FlowSpec>,
    #[serde(default)]
    pub sessions: Vec<SessionSpec>,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub evaluation: EvaluationSpec,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Parse {
            path: e.path().to_string(),
            source: e.into_inner(),
        })?;
        if s.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Version(s.schema_version));
        }
        if !(s.duration_ms > 0.0 && s.duration_ms.is_finite()) {
            return Err(NetsimError::BadDuration(s.duration_ms).into());
        }
        s.topology().resolve()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn topology(&self) -> TopologySpec {
        TopologySpec {
            nodes: self.nodes.clone(),
            links: self.links.clone(),
            flows: self.flows.clone(),
            sessions: self.sessions.clone(),
            detector: self.detector,
        }
    }

    /// Builds and runs the scenario with `seed`, or its own seed.
    pub fn simulate(&self, seed: Option<u64>) -> Result<RunResult, ScenarioError> {
        let sim = build_topology(&self.topology())?;
        Ok(run(sim, self.duration_ms, seed.unwrap_or(self.seed))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P2P: &str = r#"{
        "schema_version": 1, "name": "p2p", "duration_ms": 1000,
        "nodes": ["a", "b"],
        "links": [{"id": "L0", "a": "a", "b": "b", "bandwidth_mbps": 1, "delay_ms": 50, "queue": {"pkts": 10}}],
        "flows": [{"id": "f", "src": "a", "dst": "b", "start_ms": 0}]
    }"#;

    #[test]
    fn parses_minimal() {
        let s = ScenarioFile::from_json(P2P).unwrap();
        assert_eq!(s.flows[0].mss, 1500);
        let r = s.simulate(None).unwrap();
        assert!(r.flows[0].delivered_packets > 0);
    }

    #[test]
    fn unknown_key_is_named() {
        let bad = P2P.replace("\"seed\"", "x").replace("\"name\"", "\"nmae\"");
        let e = ScenarioFile::from_json(&bad).unwrap_err().to_string();
        assert!(e.contains("nmae"), "{e}");
    }

    #[test]
    fn bad_type_names_the_key() {
        let bad = P2P.replace("\"bandwidth_mbps\": 1", "\"bandwidth_mbps\": \"fast\"");
        let e = ScenarioFile::from_json(&bad).unwrap_err().to_string();
        assert!(e.contains("links[0].bandwidth_mbps"), "{e}");
    }

    #[test]
    fn version_checked() {
        let bad = P2P.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(ScenarioFile::from_json(&bad), Err(ScenarioError::Version(2))));
    }
}
