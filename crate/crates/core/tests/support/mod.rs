//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls into the solver or the metrics code; each oracle
//! recomputes its answer from first principles.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small two-feature classification instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<bool>,
    pub c: f64,
    pub cost_positive: f64,
    pub cost_negative: f64,
}

impl Instance {
    pub fn flat_features(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| p.iter().copied()).collect()
    }
}

/// 20 points in the unit square with a noisy linear labeling rule, so the
/// classes overlap. Even seeds use class-balanced costs.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..20 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let noise = rng.random_range(-0.3..0.3);
            labels.push(x[0] + 0.5 * x[1] + noise > 0.75);
            points.push(x);
        }
        let n_pos = labels.iter().filter(|&&l| l).count();
        if !(3..=17).contains(&n_pos) {
            continue;
        }
        let n = labels.len() as f64;
        let (cost_positive, cost_negative) = if seed.is_multiple_of(2) {
            (n / (2.0 * n_pos as f64), n / (2.0 * (20 - n_pos) as f64))
        } else {
            (1.0, 1.0)
        };
        return Instance {
            points,
            labels,
            c: 1.0,
            cost_positive,
            cost_negative,
        };
    }
}

pub fn objective(inst: &Instance, w: [f64; 2], b: f64) -> f64 {
    let mut loss = 0.0;
    for (p, &l) in inst.points.iter().zip(&inst.labels) {
        let y = if l { 1.0 } else { -1.0 };
        let cost = if l {
            inst.cost_positive
        } else {
            inst.cost_negative
        };
        let f = w[0] * p[0] + w[1] * p[1] + b;
        loss += cost * f64::max(0.0, 1.0 - y * f);
    }
    0.5 * (w[0] * w[0] + w[1] * w[1]) + inst.c * loss
}

/// Dense grid search over `(w1, w2, b)`, zooming in on the best cell until
/// the grid step falls below `1e-6`.
///
/// The starting box comes from `P(w, b) >= |w|^2 / 2` and `P(0, 0) = C sum c_i`:
/// every minimizer has `|w| <= sqrt(2 P(0, 0))`, and with features in the
/// unit square the bias needs at most `1 + 2 |w|` in magnitude.
pub fn grid_oracle(inst: &Instance) -> (f64, [f64; 3]) {
    const STEPS: usize = 24;
    let w_bound = (2.0 * objective(inst, [0.0, 0.0], 0.0)).sqrt();
    let mut center = [0.0; 3];
    let mut half = [w_bound, w_bound, 1.0 + 2.0 * w_bound];
    let mut best = (objective(inst, [0.0, 0.0], 0.0), center);
    while half.iter().any(|&h| 2.0 * h / STEPS as f64 > 1e-6) {
        let axis =
            |k: usize, i: usize| center[k] - half[k] + 2.0 * half[k] * i as f64 / STEPS as f64;
        for i in 0..=STEPS {
            for j in 0..=STEPS {
                for k in 0..=STEPS {
                    let p = [axis(0, i), axis(1, j), axis(2, k)];
                    let v = objective(inst, [p[0], p[1]], p[2]);
                    if v < best.0 {
                        best = (v, p);
                    }
                }
            }
        }
        center = best.1;
        for h in &mut half {
            *h *= 0.5;
        }
    }
    best
}

/// Naive confusion counts `[tp, fp, fn, tn]`.
pub fn recount(pairs: impl IntoIterator<Item = (u8, u8)>) -> [u64; 4] {
    let mut c = [0u64; 4];
    for (pred, label) in pairs {
        let slot = match (pred, label) {
            (1, 1) => 0,
            (1, 0) => 1,
            (0, 1) => 2,
            _ => 3,
        };
        c[slot] += 1;
    }
    c
}

pub fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Per-group naive counts keyed by group value.
pub fn recount_by_group(
    ids: &[String],
    group_of: impl Fn(&str) -> String,
    pred: &BTreeMap<String, u8>,
    label: &BTreeMap<String, u8>,
) -> BTreeMap<String, [u64; 4]> {
    let mut out: BTreeMap<String, Vec<(u8, u8)>> = BTreeMap::new();
    for id in ids {
        out.entry(group_of(id))
            .or_default()
            .push((pred[id], label[id]));
    }
    out.into_iter()
        .map(|(g, pairs)| (g, recount(pairs)))
        .collect()
}

/// Sorted-sample median with midpoint interpolation for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn sampling_weight_oracle(x: f64, n: f64) -> f64 {
    0.98 / (1.0 - n) * x + (0.01 - 0.99 * n) / (1.0 - n)
}
