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

//! Extraction of queue-building runs and merging of fragmented runs.

use serde::Serialize;

/// A smoothed sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub t_ms: f64,
    pub delay_ms: f64,
}

impl Point {
    pub fn new(t_ms: f64, delay_ms: f64) -> Self {
        Self { t_ms, delay_ms }
    }
}

/// A run of consecutive samples with non-decreasing smoothed delay.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    points: Vec<Point>,
}

impl Group {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn first(&self) -> Point {
        self.points[0]
    }

    fn last(&self) -> Point {
        self.points[self.points.len() - 1]
    }

    fn mean_delay(&self) -> f64 {
        self.points.iter().map(|p| p.delay_ms).sum::<f64>() / self.points.len() as f64
    }
}

/// One or more adjacent groups joined into a single queue-filling episode.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedGroup {
    points: Vec<Point>,
}

impl MergedGroup {
    pub fn new(points: Vec<Point>) -> Option<Self> {
        if points.is_empty() {
            None
        } else {
            Some(Self { points })
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.points[0].t_ms
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1].t_ms
    }
}

/// Splits a smoothed series into runs of non-decreasing delay.
///
/// A sample joins the current run when its delay is at least the previous
/// sample's delay; a strictly decreasing step closes the run. The sample that
/// opens a rise is never itself stored, so the first point of a group is the
/// first sample that is not below its predecessor.
pub fn extract_groups(points: &[Point]) -> Vec<Group> {
    let mut groups: Vec<Group> = Vec::new();
    let Some(first) = points.first() else {
        return groups;
    };
    let mut last = first.delay_ms;
    // index of the last sample stored in a group, 0 while none stored
    let mut last_index = 0usize;
    for (i, p) in points.iter().enumerate().skip(1) {
        if p.delay_ms >= last {
            if last_index == 0 || i - last_index > 1 {
                groups.push(Group { points: Vec::new() });
            }
            groups
                .last_mut()
                .expect("a group was opened above")
                .points
                .push(*p);
            last_index = i;
        }
        last = p.delay_ms;
    }
    groups
}

/// Joins adjacent groups into merged groups.
///
/// Group `i + 1` is appended to the chain ending in group `i` when the last
/// delay of group `i` is below the mean delay of group `i + 1` and the time
/// gap between them is below `delta_ms`. Every input point appears in exactly
/// one output group.
pub fn merge_groups(groups: &[Group], delta_ms: f64) -> Vec<MergedGroup> {
    let mut merged: Vec<MergedGroup> = Vec::new();
    let mut current: Vec<Point> = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        if g.is_empty() {
            continue;
        }
        current.extend_from_slice(&g.points);
        let joins_next = match groups.get(i + 1) {
            Some(next) if !next.is_empty() => {
                let gap = next.first().t_ms - g.last().t_ms;
                g.last().delay_ms < next.mean_delay() && gap < delta_ms
            }
            _ => false,
        };
        if !joins_next {
            merged.push(MergedGroup {
                points: std::mem::take(&mut current),
            });
        }
    }
    merged
}
