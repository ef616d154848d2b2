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

//! One-line, machine-parseable failures: `error: <class>: <message>`.

use std::fmt::Display;

use trsbd::netsim::NetsimError;
use trsbd::scenario::ScenarioError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Usage,
    Parse,
    Config,
    Topology,
    Input,
    Io,
}

impl Class {
    pub fn name(self) -> &'static str {
        match self {
            Class::Usage => "usage",
            Class::Parse => "parse",
            Class::Config => "config",
            Class::Topology => "topology",
            Class::Input => "input",
            Class::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub class: Class,
    pub message: String,
}

impl Failure {
    pub fn new(class: Class, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }

    /// Single line; embedded newlines are folded.
    pub fn line(&self) -> String {
        let msg = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error: {}: {}", self.class.name(), msg)
    }
}

pub trait ResultExt<T> {
    fn class(self, class: Class) -> Result<T, Failure>;
}

impl<T, E: Display> ResultExt<T> for Result<T, E> {
    fn class(self, class: Class) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(class, e.to_string()))
    }
}

pub fn scenario(e: ScenarioError) -> Failure {
    let class = match &e {
        ScenarioError::Parse { .. } => Class::Parse,
        ScenarioError::Version(_) => Class::Config,
        ScenarioError::Io(_) => Class::Io,
        ScenarioError::Netsim(NetsimError::Io(_)) => Class::Io,
        ScenarioError::Netsim(_) => Class::Topology,
    };
    Failure::new(class, e.to_string())
}
