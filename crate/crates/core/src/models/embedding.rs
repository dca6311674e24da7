//! Averaged word-embedding classifier.
//!
//! A document is the count-weighted mean `h` of the embedding rows of its
//! in-vocabulary tokens; scores are `softmax(W·h + b)`. Embeddings start
//! uniform in `±1/dim`, the output layer Glorot-uniform in
//! `±sqrt(6/(dim + labels))`, the bias at zero. Everything is trained
//! jointly by SGD on cross-entropy with an L2 penalty on `W`.

use rand::Rng;

use crate::seed;
use crate::text::SparseVector;

use super::{ClassifierSpec, TrainingSet};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingParams {
    pub dim: usize,
    /// Row-major `features × dim`.
    pub embeddings: Vec<f64>,
    /// Row-major `labels × dim`.
    pub output: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Loss and intermediate gradients for one example.
pub struct ExampleGradient {
    pub loss: f64,
    pub hidden: Vec<f64>,
    /// `∂loss/∂logits = p − onehot(y)`.
    pub d_logits: Vec<f64>,
    /// `∂loss/∂h = Wᵀ·d_logits`.
    pub d_hidden: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

impl EmbeddingParams {
    pub fn init(features: usize, labels: usize, dim: usize, seed: u64) -> Self {
        let mut rng = seed::stream(seed, "embedding/init");
        let bound = 1.0 / dim as f64;
        let embeddings = (0..features * dim).map(|_| rng.random_range(-bound..bound)).collect();
        // a zero output layer starts training on a plateau
        let bound = (6.0 / (dim + labels) as f64).sqrt();
        EmbeddingParams {
            dim,
            embeddings,
            output: (0..labels * dim).map(|_| rng.random_range(-bound..bound)).collect(),
            bias: vec![0.0; labels],
        }
    }

    pub fn labels(&self) -> usize {
        self.bias.len()
    }

    pub fn features(&self) -> usize {
        self.embeddings.len() / self.dim
    }

    fn embedding(&self, feature: usize) -> &[f64] {
        &self.embeddings[feature * self.dim..(feature + 1) * self.dim]
    }

    fn output_row(&self, label: usize) -> &[f64] {
        &self.output[label * self.dim..(label + 1) * self.dim]
    }

    pub fn hidden(&self, x: &SparseVector) -> Vec<f64> {
        let mut h = vec![0.0; self.dim];
        let total = x.sum();
        if total == 0.0 {
            return h;
        }
        for &(i, count) in &x.entries {
            let w = count / total;
            for (hk, ek) in h.iter_mut().zip(self.embedding(i)) {
                *hk += w * ek;
            }
        }
        h
    }

    fn logits(&self, h: &[f64]) -> Vec<f64> {
        (0..self.labels())
            .map(|c| self.output_row(c).iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.bias[c])
            .collect()
    }

    pub fn probabilities(&self, x: &SparseVector) -> Vec<f64> {
        softmax(&self.logits(&self.hidden(x)))
    }

    pub fn is_finite(&self) -> bool {
        self.embeddings
            .iter()
            .chain(&self.output)
            .chain(&self.bias)
            .all(|v| v.is_finite())
    }

    pub fn example_gradient(&self, x: &SparseVector, target: usize) -> ExampleGradient {
        let hidden = self.hidden(x);
        let mut d_logits = softmax(&self.logits(&hidden));
        let loss = -d_logits[target].max(f64::MIN_POSITIVE).ln();
        d_logits[target] -= 1.0;
        let mut d_hidden = vec![0.0; self.dim];
        for (c, g) in d_logits.iter().enumerate() {
            for (d, w) in d_hidden.iter_mut().zip(self.output_row(c)) {
                *d += g * w;
            }
        }
        ExampleGradient {
            loss,
            hidden,
            d_logits,
            d_hidden,
        }
    }

    /// Mean cross-entropy plus `λ/2·‖W‖²`.
    pub fn objective(&self, examples: &[SparseVector], targets: &[usize], l2: f64) -> f64 {
        let ce: f64 = examples
            .iter()
            .zip(targets)
            .map(|(x, &y)| self.example_gradient(x, y).loss)
            .sum();
        let norm2: f64 = self.output.iter().map(|w| w * w).sum();
        ce / examples.len() as f64 + 0.5 * l2 * norm2
    }

    /// Gradient of [`EmbeddingParams::objective`], shaped like `self`.
    pub fn gradient(&self, examples: &[SparseVector], targets: &[usize], l2: f64) -> EmbeddingParams {
        let n = examples.len() as f64;
        let mut grad = EmbeddingParams {
            dim: self.dim,
            embeddings: vec![0.0; self.embeddings.len()],
            output: self.output.iter().map(|w| l2 * w).collect(),
            bias: vec![0.0; self.bias.len()],
        };
        for (x, &y) in examples.iter().zip(targets) {
            let g = self.example_gradient(x, y);
            for (c, dz) in g.d_logits.iter().enumerate() {
                grad.bias[c] += dz / n;
                let row = &mut grad.output[c * self.dim..(c + 1) * self.dim];
                for (r, h) in row.iter_mut().zip(&g.hidden) {
                    *r += dz * h / n;
                }
            }
            let total = x.sum();
            if total > 0.0 {
                for &(i, count) in &x.entries {
                    let row = &mut grad.embeddings[i * self.dim..(i + 1) * self.dim];
                    for (r, d) in row.iter_mut().zip(&g.d_hidden) {
                        *r += count / total * d / n;
                    }
                }
            }
        }
        grad
    }

    /// One SGD step on a single example.
    fn step(&mut self, x: &SparseVector, target: usize, eta: f64, l2: f64) {
        let g = self.example_gradient(x, target);
        let dim = self.dim;
        for (c, dz) in g.d_logits.iter().enumerate() {
            self.bias[c] -= eta * dz;
            let row = &mut self.output[c * dim..(c + 1) * dim];
            for (w, h) in row.iter_mut().zip(&g.hidden) {
                *w -= eta * (dz * h + l2 * *w);
            }
        }
        let total = x.sum();
        if total > 0.0 {
            for &(i, count) in &x.entries {
                let scale = eta * count / total;
                let row = &mut self.embeddings[i * dim..(i + 1) * dim];
                for (e, d) in row.iter_mut().zip(&g.d_hidden) {
                    *e -= scale * d;
                }
            }
        }
    }

    pub(crate) fn select_labels(&self, order: &[usize]) -> EmbeddingParams {
        EmbeddingParams {
            dim: self.dim,
            embeddings: self.embeddings.clone(),
            output: order.iter().flat_map(|&c| self.output_row(c).iter().copied()).collect(),
            bias: order.iter().map(|&c| self.bias[c]).collect(),
        }
    }
}

pub(crate) fn fit(set: &TrainingSet, spec: &ClassifierSpec, trace: bool) -> (EmbeddingParams, Vec<f64>) {
    let mut params = EmbeddingParams::init(
        set.vocabulary.len(),
        set.sorted_labels.len(),
        spec.embedding_dim,
        spec.seed,
    );
    let total = spec.epochs * set.examples.len();
    let mut step = 0;
    let mut history = Vec::new();
    for epoch in 0..spec.epochs {
        for i in set.epoch_order(spec.seed, epoch) {
            let eta = spec.learning_rate * (1.0 - step as f64 / total as f64);
            params.step(&set.examples[i], set.targets[i], eta, spec.l2);
            step += 1;
        }
        if trace {
            history.push(params.objective(&set.examples, &set.targets, spec.l2));
        }
    }
    (params, history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_is_normalized_and_stable() {
        let p = softmax(&[1000.0, 1000.0, -1000.0]);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let a = EmbeddingParams::init(10, 3, 4, 7);
        assert!(a.embeddings.iter().all(|v| v.abs() <= 0.25));
        let glorot = (6.0f64 / 7.0).sqrt();
        assert!(a.output.iter().all(|v| v.abs() <= glorot));
        assert!(a.bias.iter().all(|&v| v == 0.0));
        assert_eq!(a, EmbeddingParams::init(10, 3, 4, 7));
        assert_ne!(a, EmbeddingParams::init(10, 3, 4, 8));
    }

    #[test]
    fn sgd_step_follows_the_single_example_gradient() {
        let mut p = EmbeddingParams::init(3, 2, 2, 1);
        p.output = vec![0.3, -0.2, 0.1, 0.4];
        let x = SparseVector {
            dim: 3,
            entries: vec![(0, 2.0), (2, 1.0)],
        };
        let g = p.gradient(std::slice::from_ref(&x), &[1], 0.01);
        let mut stepped = p.clone();
        stepped.step(&x, 1, 0.5, 0.01);
        let pairs = [
            (&p.embeddings, &g.embeddings, &stepped.embeddings),
            (&p.output, &g.output, &stepped.output),
            (&p.bias, &g.bias, &stepped.bias),
        ];
        for (before, grad, after) in pairs {
            for ((b, g), a) in before.iter().zip(grad.iter()).zip(after.iter()) {
                assert!((b - 0.5 * g - a).abs() < 1e-12);
            }
        }
    }
}
