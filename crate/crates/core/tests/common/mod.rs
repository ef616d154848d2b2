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

//! Helpers shared by the integration tests.

#![allow(dead_code)]

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Signed, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use trsbd::detect::{MergedGroup, Point};

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Least-squares slope of `(t, y)` in exact rational arithmetic from the raw
/// normal equations, scaled to ms/s.
pub fn exact_slope(pts: &[Point]) -> BigRational {
    let n = BigRational::from_integer(BigInt::from(pts.len()));
    let (mut sx, mut sy, mut sxx, mut sxy) =
        (BigRational::zero(), BigRational::zero(), BigRational::zero(), BigRational::zero());
    for p in pts {
        let (x, y) = (exact(p.t_ms), exact(p.delay_ms));
        sxx += &x * &x;
        sxy += &x * &y;
        sx += x;
        sy += y;
    }
    let num = &n * sxy - &sx * &sy;
    let den = n * sxx - &sx * &sx;
    num / den * BigRational::from_integer(BigInt::from(1000))
}

/// `|x - exact| <= tol * |exact|`, evaluated exactly.
pub fn within_rel(x: f64, exact_value: &BigRational, tol: f64) -> bool {
    let diff = (exact(x) - exact_value).abs();
    diff <= exact(tol) * exact_value.abs()
}

/// A merged group shaped like a queue-building run: strictly increasing
/// timestamps far from the origin and non-decreasing delays.
pub fn random_group(rng: &mut ChaCha8Rng) -> MergedGroup {
    let n = rng.gen_range(5..500);
    let mut t = rng.gen_range(0.0..1.0e6);
    let mut y = rng.gen_range(20.0..500.0);
    let trend = rng.gen_range(0.001..2.0);
    let pts = (0..n)
        .map(|_| {
            let dt = rng.gen_range(0.05..40.0);
            t += dt;
            y += trend * dt * rng.gen_range(0.0..2.0);
            Point::new(t, y)
        })
        .collect();
    MergedGroup::new(pts).expect("non-empty")
}
