//! One-vs-rest linear hinge-loss classifier trained with averaged SGD.
//!
//! Each label `c` owns a weight vector `w_c` and bias `b_c`. A step on example
//! `(x, y)` with step size `η` does, for every label,
//!
//! ```text
//! w_c ← (1 − ηλ)·w_c + η·s·x   if s·(w_c·x + b_c) < 1,   s = ±1
//! ```
//!
//! and the returned model is the running average of all iterates. Weights are
//! stored as `α·u` so the decay is O(1), and the running sum as `A + B·u` so
//! both stay sparse per step.

use crate::text::SparseVector;

use super::{ClassifierSpec, TrainingSet};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    /// Row-major `labels × features`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub features: usize,
}

impl LinearParams {
    pub fn labels(&self) -> usize {
        self.bias.len()
    }

    pub fn row(&self, label: usize) -> &[f64] {
        &self.weights[label * self.features..(label + 1) * self.features]
    }

    /// `w_c·x + b_c` for every label.
    pub fn margins(&self, x: &SparseVector) -> Vec<f64> {
        (0..self.labels())
            .map(|c| {
                let row = self.row(c);
                x.entries.iter().map(|&(i, v)| row[i] * v).sum::<f64>() + self.bias[c]
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    /// Mean one-vs-rest hinge loss plus `λ/2·Σ‖w_c‖²`.
    pub fn objective(&self, examples: &[SparseVector], targets: &[usize], l2: f64) -> f64 {
        let mut hinge = 0.0;
        for (x, &y) in examples.iter().zip(targets) {
            let x = normalize(x);
            for (c, m) in self.margins(&x).into_iter().enumerate() {
                let s = if c == y { 1.0 } else { -1.0 };
                hinge += (1.0 - s * m).max(0.0);
            }
        }
        let norm2: f64 = self.weights.iter().map(|w| w * w).sum();
        hinge / examples.len() as f64 + 0.5 * l2 * norm2
    }

    /// Parameters with labels rearranged: row `k` of the result is row
    /// `order[k]` of `self`.
    pub(crate) fn select_labels(&self, order: &[usize]) -> LinearParams {
        LinearParams {
            weights: order.iter().flat_map(|&c| self.row(c).iter().copied()).collect(),
            bias: order.iter().map(|&c| self.bias[c]).collect(),
            features: self.features,
        }
    }
}

/// Scales a count vector to unit Euclidean norm. Zero vectors pass through.
pub fn normalize(x: &SparseVector) -> SparseVector {
    let norm = x.norm();
    if norm == 0.0 {
        return x.clone();
    }
    SparseVector {
        dim: x.dim,
        entries: x.entries.iter().map(|&(i, v)| (i, v / norm)).collect(),
    }
}

/// Weight vector `α·u` of one binary scorer with the running sum of its
/// iterates kept as `A + B·u`.
struct Scorer {
    u: Vec<f64>,
    alpha: f64,
    sum_a: Vec<f64>,
    sum_b: f64,
    bias: f64,
    bias_sum: f64,
}

impl Scorer {
    fn new(dim: usize) -> Self {
        Scorer {
            u: vec![0.0; dim],
            alpha: 1.0,
            sum_a: vec![0.0; dim],
            sum_b: 0.0,
            bias: 0.0,
            bias_sum: 0.0,
        }
    }

    fn score(&self, x: &SparseVector) -> f64 {
        self.alpha * x.entries.iter().map(|&(i, v)| self.u[i] * v).sum::<f64>() + self.bias
    }

    fn step(&mut self, x: &SparseVector, sign: f64, eta: f64, l2: f64) {
        let margin = sign * self.score(x);
        self.alpha *= 1.0 - eta * l2;
        if margin < 1.0 {
            let scale = eta * sign / self.alpha;
            for &(i, v) in &x.entries {
                let delta = scale * v;
                self.u[i] += delta;
                self.sum_a[i] -= self.sum_b * delta;
            }
            self.bias += eta * sign;
        }
        self.sum_b += self.alpha;
        self.bias_sum += self.bias;
        if self.alpha < 1e-9 {
            self.rescale();
        }
    }

    /// Folds `α` into `u`; the running sum is unchanged.
    fn rescale(&mut self) {
        for v in &mut self.u {
            *v *= self.alpha;
        }
        self.sum_b /= self.alpha;
        self.alpha = 1.0;
    }

    fn averaged(&self, steps: usize, out: &mut [f64]) -> f64 {
        let n = steps as f64;
        for (o, (a, u)) in out.iter_mut().zip(self.sum_a.iter().zip(&self.u)) {
            *o = (a + self.sum_b * u) / n;
        }
        self.bias_sum / n
    }
}

fn averaged(scorers: &[Scorer], steps: usize, dim: usize) -> LinearParams {
    let mut weights = vec![0.0; scorers.len() * dim];
    let bias = scorers
        .iter()
        .zip(weights.chunks_mut(dim))
        .map(|(s, row)| s.averaged(steps, row))
        .collect();
    LinearParams {
        weights,
        bias,
        features: dim,
    }
}

pub(crate) fn fit(set: &TrainingSet, spec: &ClassifierSpec, trace: bool) -> (LinearParams, Vec<f64>) {
    let dim = set.vocabulary.len();
    let labels = set.sorted_labels.len();
    let examples: Vec<SparseVector> = set.examples.iter().map(normalize).collect();
    let mut scorers: Vec<Scorer> = (0..labels).map(|_| Scorer::new(dim)).collect();
    let total = spec.epochs * examples.len();
    let mut step = 0;
    let mut history = Vec::new();
    for epoch in 0..spec.epochs {
        for i in set.epoch_order(spec.seed, epoch) {
            let eta = spec.learning_rate * (1.0 - step as f64 / total as f64);
            let (x, y) = (&examples[i], set.targets[i]);
            for (c, scorer) in scorers.iter_mut().enumerate() {
                let sign = if c == y { 1.0 } else { -1.0 };
                scorer.step(x, sign, eta, spec.l2);
            }
            step += 1;
        }
        if trace {
            let params = averaged(&scorers, step, dim);
            history.push(params.objective(&set.examples, &set.targets, spec.l2));
        }
    }
    (averaged(&scorers, step, dim), history)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(entries: &[(usize, f64)], dim: usize) -> SparseVector {
        SparseVector {
            dim,
            entries: entries.to_vec(),
        }
    }

    /// Dense reference implementation of the same recursion.
    fn dense_average(xs: &[SparseVector], signs: &[f64], etas: &[f64], l2: f64) -> (Vec<f64>, f64) {
        let dim = xs[0].dim;
        let (mut w, mut b) = (vec![0.0; dim], 0.0);
        let (mut sum_w, mut sum_b) = (vec![0.0; dim], 0.0);
        for ((x, &s), &eta) in xs.iter().zip(signs).zip(etas) {
            let dense = x.to_dense();
            let margin = s * (w.iter().zip(&dense).map(|(a, b)| a * b).sum::<f64>() + b);
            for wi in &mut w {
                *wi *= 1.0 - eta * l2;
            }
            if margin < 1.0 {
                for (wi, xi) in w.iter_mut().zip(&dense) {
                    *wi += eta * s * xi;
                }
                b += eta * s;
            }
            for (acc, wi) in sum_w.iter_mut().zip(&w) {
                *acc += wi;
            }
            sum_b += b;
        }
        let n = xs.len() as f64;
        (sum_w.iter().map(|v| v / n).collect(), sum_b / n)
    }

    #[test]
    fn lazy_averaging_matches_dense_recursion() {
        let xs = vec![
            sv(&[(0, 1.0), (2, 0.5)], 4),
            sv(&[(1, 2.0)], 4),
            sv(&[(0, -1.0), (3, 1.5)], 4),
            sv(&[(2, 1.0), (3, -0.5)], 4),
            sv(&[], 4),
            sv(&[(0, 0.3), (1, 0.3), (2, 0.3)], 4),
        ];
        let signs = [1.0, -1.0, 1.0, -1.0, 1.0, 1.0];
        let etas = [0.5, 0.4, 0.3, 0.2, 0.15, 0.1];
        let l2 = 0.3;
        let mut scorer = Scorer::new(4);
        for ((x, &s), &eta) in xs.iter().zip(&signs).zip(&etas) {
            scorer.step(x, s, eta, l2);
        }
        let mut avg = vec![0.0; 4];
        let bias = scorer.averaged(xs.len(), &mut avg);
        let (ref_w, ref_b) = dense_average(&xs, &signs, &etas, l2);
        for (a, b) in avg.iter().zip(&ref_w) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((bias - ref_b).abs() < 1e-12);
    }

    #[test]
    fn rescaling_preserves_the_average() {
        let x = sv(&[(0, 1.0), (1, 0.5)], 2);
        let mut a = Scorer::new(2);
        let mut b = Scorer::new(2);
        for k in 0..5 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            a.step(&x, sign, 0.2, 0.5);
            b.step(&x, sign, 0.2, 0.5);
            if k == 2 {
                b.rescale();
            }
        }
        let (mut wa, mut wb) = (vec![0.0; 2], vec![0.0; 2]);
        a.averaged(5, &mut wa);
        b.averaged(5, &mut wb);
        for (x, y) in wa.iter().zip(&wb) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_gives_unit_norm() {
        let x = normalize(&sv(&[(0, 3.0), (1, 4.0)], 2));
        assert_eq!(x.entries, vec![(0, 0.6), (1, 0.8)]);
        assert!(normalize(&sv(&[], 3)).entries.is_empty());
    }
}
