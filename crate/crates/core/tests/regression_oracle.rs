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

//! Trend-line slopes against an exact rational least-squares oracle.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trsbd::detect::{regress_slope, MergedGroup, Point};

#[test]
fn thousand_random_groups_match_exact_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for i in 0..1000 {
        let g = common::random_group(&mut rng);
        let got = regress_slope(&g, 5).unwrap().slope;
        let want = common::exact_slope(g.points());
        assert!(common::within_rel(got, &want, 1e-9), "group {i}: {got} vs {want}");
    }
}

#[test]
fn oracle_agrees_on_a_hand_line() {
    let pts = vec![
        Point::new(0.0, 100.0),
        Point::new(1000.0, 118.0),
        Point::new(2000.0, 136.0),
        Point::new(3000.0, 154.0),
        Point::new(4000.0, 172.0),
    ];
    let want = common::exact_slope(&pts);
    assert!(common::within_rel(18.0, &want, 0.0));
    let got = regress_slope(&MergedGroup::new(pts).unwrap(), 5).unwrap().slope;
    assert!(common::within_rel(got, &want, 1e-12));
}
