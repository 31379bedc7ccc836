//! Soft-margin linear SVM solver.
//!
//! Minimizes the primal
//!
//! ```text
//! P(w, b) = 1/2 |w|^2 + C * sum_i c_i * max(0, 1 - y_i (w.x_i + b))
//! ```
//!
//! through its dual with sequential minimal optimization: maximal-violating
//! pair selection with second-order choice of the partner, as in LIBSVM,
//! sweeping in index order with no randomization. The weight vector is kept
//! explicitly (`w = sum_i alpha_i y_i x_i`), so the linear kernel never needs
//! a Gram matrix.
//!
//! Progress is measured in *iterations*; one iteration is up to `n` pair
//! updates for `n` training points. At the end of each iteration the bias is
//! set to the exact minimizer of `P(w, .)` for the current `w`, and if the
//! resulting primal objective beats the best seen so far, `(w, b)` becomes the
//! incumbent. The recorded objective trace is the incumbent's objective, so it
//! never increases. The solver stops when the KKT violation drops below
//! `tolerance`, when the relative duality gap of the incumbent drops below
//! `tolerance`, or when the iteration budget runs out.

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub c: f64,
    /// Per-sample cost multiplier for the positive class.
    pub cost_positive: f64,
    /// Per-sample cost multiplier for the negative class.
    pub cost_negative: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            cost_positive: 1.0,
            cost_negative: 1.0,
            tolerance: 1e-6,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutput {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Incumbent primal objective after each iteration.
    pub objective_trace: Vec<f64>,
    pub alphas: Vec<f64>,
}

/// Row-major dense design matrix.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub features: &'a [f64],
    pub dim: usize,
    /// `true` for the positive class.
    pub labels: &'a [bool],
}

impl Problem<'_> {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    fn y(&self, i: usize) -> f64 {
        if self.labels[i] {
            1.0
        } else {
            -1.0
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn primal_objective(
    problem: &Problem<'_>,
    params: &SolverParams,
    weights: &[f64],
    bias: f64,
) -> f64 {
    let reg = 0.5 * dot(weights, weights);
    let loss: f64 = (0..problem.len())
        .map(|i| {
            let cost = if problem.labels[i] {
                params.cost_positive
            } else {
                params.cost_negative
            };
            let margin = problem.y(i) * (dot(weights, problem.row(i)) + bias);
            cost * (1.0 - margin).max(0.0)
        })
        .sum();
    reg + params.c * loss
}

/// Exact minimizer over `b` of the hinge term for fixed scores `s_i = w.x_i`.
///
/// The hinge sum is convex and piecewise linear in `b` with breakpoints
/// `y_i - s_i`. When the minimum is attained on a flat segment the segment
/// midpoint is returned.
pub fn optimal_bias(scores: &[f64], labels: &[bool], upper_pos: f64, upper_neg: f64) -> f64 {
    let mut points: Vec<(f64, bool)> = scores
        .iter()
        .zip(labels)
        .map(|(&s, &positive)| (if positive { 1.0 - s } else { -1.0 - s }, positive))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_pos = labels.iter().filter(|&&p| p).count();

    // Right-derivative just after a breakpoint: positives still to the right
    // pull b up, negatives already passed push it down.
    let mut pos_passed = 0usize;
    let mut neg_passed = 0usize;
    let mut i = 0;
    while i < points.len() {
        let at = points[i].0;
        while i < points.len() && points[i].0 == at {
            if points[i].1 {
                pos_passed += 1;
            } else {
                neg_passed += 1;
            }
            i += 1;
        }
        let down = upper_pos * (total_pos - pos_passed) as f64;
        let up = upper_neg * neg_passed as f64;
        if up > down {
            return at;
        }
        if up == down {
            return match points.get(i) {
                Some(&(next, _)) => 0.5 * (at + next),
                None => at,
            };
        }
    }
    points.last().map(|p| p.0).unwrap_or(0.0)
}

pub fn solve(problem: &Problem<'_>, params: &SolverParams) -> SolverOutput {
    let n = problem.len();
    let dim = problem.dim;
    assert_eq!(problem.features.len(), n * dim, "feature matrix shape");
    let upper_pos = params.c * params.cost_positive;
    let upper_neg = params.c * params.cost_negative;
    let upper = |i: usize| {
        if problem.labels[i] {
            upper_pos
        } else {
            upper_neg
        }
    };
    let y: Vec<f64> = (0..n).map(|i| problem.y(i)).collect();
    let diag: Vec<f64> = (0..n)
        .map(|i| dot(problem.row(i), problem.row(i)))
        .collect();

    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    // gradient of the dual (minimization form): G_i = y_i w.x_i - 1
    let mut grad = vec![-1.0; n];
    let mut scores = vec![0.0; n];

    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let refresh = |w: &[f64], scores: &mut [f64], grad: &mut [f64]| {
        for i in 0..n {
            scores[i] = dot(w, problem.row(i));
            grad[i] = y[i] * scores[i] - 1.0;
        }
    };

    while iterations < params.max_iterations && !converged {
        iterations += 1;
        for _ in 0..n.max(1) {
            // i: maximal -y G over I_up
            let mut gmax = f64::NEG_INFINITY;
            let mut sel_i = None;
            for t in 0..n {
                let in_up = if y[t] > 0.0 {
                    alpha[t] < upper(t)
                } else {
                    alpha[t] > 0.0
                };
                if in_up && -y[t] * grad[t] >= gmax {
                    gmax = -y[t] * grad[t];
                    sel_i = Some(t);
                }
            }
            let Some(i) = sel_i else {
                converged = true;
                break;
            };
            // j: second-order choice over I_low; track min -y G for the stop test
            let mut gmin = f64::INFINITY;
            let mut best_obj = f64::INFINITY;
            let mut sel_j = None;
            for t in 0..n {
                let in_low = if y[t] > 0.0 {
                    alpha[t] > 0.0
                } else {
                    alpha[t] < upper(t)
                };
                if !in_low {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let diff = gmax - v;
                if diff > 0.0 {
                    let kit = dot(problem.row(i), problem.row(t));
                    let mut quad = diag[i] + diag[t] - 2.0 * kit;
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -(diff * diff) / quad;
                    if obj <= best_obj {
                        best_obj = obj;
                        sel_j = Some(t);
                    }
                }
            }
            if gmax - gmin < params.tolerance {
                converged = true;
                break;
            }
            let Some(j) = sel_j else {
                converged = true;
                break;
            };

            let kij = dot(problem.row(i), problem.row(j));
            let mut quad = diag[i] + diag[j] - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let (ci, cj) = (upper(i), upper(j));
            let (old_i, old_j) = (alpha[i], alpha[j]);
            let (mut ai, mut aj) = (old_i, old_j);
            if y[i] != y[j] {
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = ai - aj;
                ai += delta;
                aj += delta;
                if diff > 0.0 {
                    if aj < 0.0 {
                        aj = 0.0;
                        ai = diff;
                    }
                } else if ai < 0.0 {
                    ai = 0.0;
                    aj = -diff;
                }
                if diff > ci - cj {
                    if ai > ci {
                        ai = ci;
                        aj = ci - diff;
                    }
                } else if aj > cj {
                    aj = cj;
                    ai = cj + diff;
                }
            } else {
                let delta = (grad[i] - grad[j]) / quad;
                let sum = ai + aj;
                ai -= delta;
                aj += delta;
                if sum > ci {
                    if ai > ci {
                        ai = ci;
                        aj = sum - ci;
                    }
                } else if aj < 0.0 {
                    aj = 0.0;
                    ai = sum;
                }
                if sum > cj {
                    if aj > cj {
                        aj = cj;
                        ai = sum - cj;
                    }
                } else if ai < 0.0 {
                    ai = 0.0;
                    aj = sum;
                }
            }
            alpha[i] = ai;
            alpha[j] = aj;
            let (di, dj) = ((ai - old_i) * y[i], (aj - old_j) * y[j]);
            for (k, wk) in w.iter_mut().enumerate() {
                *wk += di * problem.row(i)[k] + dj * problem.row(j)[k];
            }
            for t in 0..n {
                let ds = di * dot(problem.row(i), problem.row(t))
                    + dj * dot(problem.row(j), problem.row(t));
                scores[t] += ds;
                grad[t] = y[t] * scores[t] - 1.0;
            }
        }

        // Rebuild w and scores from alpha so rounding drift cannot accumulate.
        w.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            if alpha[i] != 0.0 {
                for (k, wk) in w.iter_mut().enumerate() {
                    *wk += alpha[i] * y[i] * problem.row(i)[k];
                }
            }
        }
        refresh(&w, &mut scores, &mut grad);

        let bias = optimal_bias(&scores, problem.labels, upper_pos, upper_neg);
        let objective = primal_objective(problem, params, &w, bias);
        if best.as_ref().is_none_or(|(_, _, o)| objective < *o) {
            best = Some((w.clone(), bias, objective));
        }
        let incumbent = best.as_ref().map(|b| b.2).unwrap_or(objective);
        trace.push(incumbent);

        let dual = alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w);
        if (incumbent - dual) <= params.tolerance * incumbent.abs().max(1.0) {
            converged = true;
        }
    }

    let (weights, bias, objective) = best.unwrap_or_else(|| {
        let bias = optimal_bias(&scores, problem.labels, upper_pos, upper_neg);
        let objective = primal_objective(problem, params, &w, bias);
        (w.clone(), bias, objective)
    });
    let dual_objective = alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w);
    SolverOutput {
        weights,
        bias,
        objective,
        dual_objective,
        iterations,
        converged,
        objective_trace: trace,
        alphas: alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimal_bias_finds_hinge_minimizer() {
        // one positive at score 0 and one negative at score 0: any b in [-1, 1]
        // is optimal, midpoint 0
        assert_eq!(optimal_bias(&[0.0, 0.0], &[true, false], 1.0, 1.0), 0.0);
        // positives outweigh: b pushed to the positive breakpoint 1 - 0 = 1
        assert_eq!(optimal_bias(&[0.0, 0.0], &[true, false], 3.0, 1.0), 1.0);
        assert_eq!(optimal_bias(&[0.0, 0.0], &[true, false], 1.0, 3.0), -1.0);
    }

    #[test]
    fn optimal_bias_matches_scan() {
        let scores = [0.3, -0.2, 1.4, 0.1, -1.1, 0.7, 0.05];
        let labels = [true, false, true, false, false, true, true];
        let (up, un) = (1.7, 0.6);
        let hinge = |b: f64| -> f64 {
            scores
                .iter()
                .zip(&labels)
                .map(|(&s, &l)| {
                    let y = if l { 1.0 } else { -1.0 };
                    (if l { up } else { un }) * (1.0 - y * (s + b)).max(0.0)
                })
                .sum()
        };
        let b = optimal_bias(&scores, &labels, up, un);
        let best_scan = (-4000..=4000)
            .map(|k| hinge(k as f64 * 1e-3))
            .fold(f64::INFINITY, f64::min);
        assert!(hinge(b) <= best_scan + 1e-12);
    }

    #[test]
    fn trace_is_non_increasing_and_duality_gap_closes() {
        let features = [0.1, 0.2, 0.4, 0.1, 0.9, 0.8, 0.6, 0.7, 0.5, 0.5, 0.3, 0.9];
        let labels = [false, false, true, true, false, true];
        let problem = Problem {
            features: &features,
            dim: 2,
            labels: &labels,
        };
        let out = solve(
            &problem,
            &SolverParams {
                c: 5.0,
                ..SolverParams::default()
            },
        );
        assert!(out.converged);
        for pair in out.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
        assert!(out.objective - out.dual_objective <= 1e-4 * out.objective.max(1.0));
        assert!(out.dual_objective <= out.objective + 1e-9);
    }
}
