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

//! Run manifest: scenario hash, seed, tool version and hashed outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Output {
    /// relative to the run directory, `/`-separated
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scenario_sha256: String,
    pub seed: u64,
    pub outputs: Vec<Output>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    /// Hashes every file in `files`, which must lie under `root`.
    pub fn new(command: &str, scenario: &[u8], seed: u64, root: &Path, files: &[PathBuf]) -> std::io::Result<Self> {
        let mut outputs = files
            .iter()
            .map(|p| {
                let rel = p.strip_prefix(root).unwrap_or(p);
                let path = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                Ok(Output {
                    path,
                    sha256: sha256_hex(&fs::read(p)?),
                })
            })
            .collect::<std::io::Result<Vec<_>>>()?;
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Self {
            tool: env!("CARGO_BIN_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            scenario_sha256: sha256_hex(scenario),
            seed,
            outputs,
        })
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)
    }

    /// Paths whose current content no longer matches the recorded hash.
    pub fn verify(&self, root: &Path) -> std::io::Result<Vec<String>> {
        let mut bad = Vec::new();
        for o in &self.outputs {
            if sha256_hex(&fs::read(root.join(&o.path))?) != o.sha256 {
                bad.push(o.path.clone());
            }
        }
        Ok(bad)
    }
}
