//! Per-pair losses and analytic gradients for both training modes.

use rand::Rng;

use crate::skipgram::huffman::HuffmanTree;
use crate::skipgram::model::{dot, EmbeddingModel};
use crate::skipgram::vocab::Vocabulary;

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gradients of one pair loss: with respect to the center's input vector
/// and to every touched context/inner row (accumulated per row).
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradients {
    pub center: Vec<f64>,
    pub rows: Vec<(u32, Vec<f64>)>,
}

impl PairGradients {
    fn new(dim: usize) -> Self {
        PairGradients {
            center: vec![0.0; dim],
            rows: Vec::new(),
        }
    }

    fn row_mut(&mut self, idx: u32, dim: usize) -> &mut Vec<f64> {
        if let Some(pos) = self.rows.iter().position(|(i, _)| *i == idx) {
            return &mut self.rows[pos].1;
        }
        self.rows.push((idx, vec![0.0; dim]));
        &mut self.rows.last_mut().unwrap().1
    }
}

/// Probability of `leaf` under the hierarchical softmax: the product of
/// branch sigmoids along its path, where the second child contributes
/// sigma(-x). Sums to 1 over all leaves by construction.
pub fn hs_leaf_probability(
    model: &EmbeddingModel,
    tree: &HuffmanTree,
    center: usize,
    leaf: usize,
) -> f64 {
    let u = model.input_row(center);
    let (path, code) = tree.path(leaf);
    path.iter()
        .zip(code)
        .map(|(&inner, &bit)| {
            let x = dot(model.context_row(inner as usize), u);
            sigmoid(if bit { -x } else { x })
        })
        .product()
}

/// Negative log of the context leaf's hierarchical-softmax probability,
/// with analytic gradients.
pub fn hs_pair_loss_and_gradients(
    model: &EmbeddingModel,
    tree: &HuffmanTree,
    center: usize,
    context: usize,
) -> (f64, PairGradients) {
    let dim = model.dim();
    let u = model.input_row(center);
    let (path, code) = tree.path(context);
    let mut loss = 0.0;
    let mut grads = PairGradients::new(dim);
    for (&inner, &bit) in path.iter().zip(code) {
        let w = model.context_row(inner as usize);
        let sign = if bit { -1.0 } else { 1.0 };
        let g = sigmoid(sign * dot(w, u));
        loss -= g.max(f64::MIN_POSITIVE).ln();
        // d(-log sigma(s x))/dx = s (g - 1)
        let coeff = sign * (g - 1.0);
        for (gu, wi) in grads.center.iter_mut().zip(w) {
            *gu += coeff * wi;
        }
        let row = grads.row_mut(inner, dim);
        for (gw, ui) in row.iter_mut().zip(u) {
            *gw += coeff * ui;
        }
    }
    (loss, grads)
}

/// Unigram distribution raised to a power (standard 0.75), sampled by
/// binary search over the cumulative mass.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDistribution {
    cumulative: Vec<f64>,
}

impl NoiseDistribution {
    pub fn new(vocab: &Vocabulary, power: f64) -> Self {
        let mut cumulative = Vec::with_capacity(vocab.len());
        let mut acc = 0.0;
        for i in 0..vocab.len() {
            acc += (vocab.count(i) as f64).powf(power);
            cumulative.push(acc);
        }
        NoiseDistribution { cumulative }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        let total = *self.cumulative.last().expect("nonempty vocabulary");
        let x = rng.gen_range(0.0..total);
        self.cumulative.partition_point(|&c| c <= x) as u32
    }

    /// Probability mass of one word (tests).
    pub fn mass(&self, idx: usize) -> f64 {
        let total = *self.cumulative.last().unwrap();
        let prev = if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        };
        (self.cumulative[idx] - prev) / total
    }
}

/// Negative-sampling loss for a fixed set of negatives:
/// -log sigma(v'_c . v_u) - sum_i log sigma(-v'_ni . v_u).
///
/// Taking the negatives as an argument keeps the function deterministic,
/// which the finite-difference oracle relies on; [`ns_pair_loss_and_gradients`]
/// draws them. A negative equal to the context is kept as drawn.
pub fn ns_loss_and_gradients_with_negatives(
    model: &EmbeddingModel,
    center: usize,
    context: usize,
    negatives: &[u32],
) -> (f64, PairGradients) {
    let dim = model.dim();
    let u = model.input_row(center);
    let mut loss = 0.0;
    let mut grads = PairGradients::new(dim);
    let targets = std::iter::once((context as u32, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (word, label) in targets {
        let w = model.context_row(word as usize);
        let g = sigmoid(dot(w, u));
        let p = if label > 0.5 { g } else { 1.0 - g };
        loss -= p.max(f64::MIN_POSITIVE).ln();
        let coeff = g - label;
        for (gu, wi) in grads.center.iter_mut().zip(w) {
            *gu += coeff * wi;
        }
        let row = grads.row_mut(word, dim);
        for (gw, ui) in row.iter_mut().zip(u) {
            *gw += coeff * ui;
        }
    }
    (loss, grads)
}

/// Negative-sampling loss with `k` negatives drawn from `noise`.
pub fn ns_pair_loss_and_gradients(
    model: &EmbeddingModel,
    noise: &NoiseDistribution,
    center: usize,
    context: usize,
    k: usize,
    rng: &mut impl Rng,
) -> (f64, PairGradients) {
    let negatives: Vec<u32> = (0..k).map(|_| noise.sample(rng)).collect();
    ns_loss_and_gradients_with_negatives(model, center, context, &negatives)
}

#[cfg(test)]
pub(crate) mod fd {
    use super::*;

    /// Central finite-difference gradient of `f` in the model parameters,
    /// one coordinate at a time.
    #[allow(clippy::needless_range_loop)] // i names the perturbed coordinate
    pub fn check_against(
        model: &EmbeddingModel,
        analytic: &PairGradients,
        center: usize,
        f: &dyn Fn(&EmbeddingModel) -> f64,
        h: f64,
        rel_tol: f64,
    ) {
        let dim = model.dim();
        let check = |numeric: f64, exact: f64, what: &str| {
            let denom = exact.abs().max(numeric.abs()).max(1e-8);
            let rel = (numeric - exact).abs() / denom;
            assert!(
                rel <= rel_tol,
                "{what}: numeric {numeric} vs analytic {exact} (rel {rel})"
            );
        };
        for i in 0..dim {
            let mut up = model.clone();
            up.input_row_mut(center)[i] += h;
            let mut down = model.clone();
            down.input_row_mut(center)[i] -= h;
            let numeric = (f(&up) - f(&down)) / (2.0 * h);
            check(numeric, analytic.center[i], &format!("center[{i}]"));
        }
        for (row, grad) in &analytic.rows {
            for i in 0..dim {
                let mut up = model.clone();
                up.context_row_mut(*row as usize)[i] += h;
                let mut down = model.clone();
                down.context_row_mut(*row as usize)[i] -= h;
                let numeric = (f(&up) - f(&down)) / (2.0 * h);
                check(numeric, grad[i], &format!("row {row}[{i}]"));
            }
        }
    }
}
