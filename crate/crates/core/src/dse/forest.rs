//! Bagged regression trees used as the search surrogate.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForestOptions {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for ForestOptions {
    fn default() -> Self {
        ForestOptions { trees: 48, max_depth: 12, min_leaf: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Tree>,
}

fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

impl Forest {
    /// Fits one tree per bootstrap resample. Each split considers a random
    /// third of the features.
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], opts: ForestOptions, seed: u64) -> Forest {
        assert_eq!(xs.len(), ys.len());
        assert!(!xs.is_empty(), "cannot fit on no samples");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = xs[0].len();
        let mtry = dims.div_ceil(3).max(1);
        let trees = (0..opts.trees)
            .map(|_| {
                let sample: Vec<usize> = (0..xs.len()).map(|_| below(&mut rng, xs.len())).collect();
                let mut t = Tree { nodes: Vec::new() };
                grow(&mut t, xs, ys, sample, 0, dims, mtry, opts, &mut rng);
                t
            })
            .collect();
        Forest { trees }
    }

    /// Mean and standard deviation of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        let n = preds.len() as f64;
        let mean = preds.iter().sum::<f64>() / n;
        let var = preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
        (mean, libm::sqrt(var))
    }
}

#[allow(clippy::too_many_arguments)]
fn grow(
    t: &mut Tree,
    xs: &[Vec<f64>],
    ys: &[f64],
    sample: Vec<usize>,
    depth: usize,
    dims: usize,
    mtry: usize,
    opts: ForestOptions,
    rng: &mut ChaCha8Rng,
) -> usize {
    let id = t.nodes.len();
    let mean = sample.iter().map(|&i| ys[i]).sum::<f64>() / sample.len() as f64;
    t.nodes.push(Node::Leaf(mean));
    if depth >= opts.max_depth || sample.len() < 2 * opts.min_leaf {
        return id;
    }
    let sse = |idx: &mut dyn Iterator<Item = &usize>| {
        let v: Vec<f64> = idx.map(|&i| ys[i]).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|y| (y - m) * (y - m)).sum::<f64>()
    };
    let parent = sse(&mut sample.iter());
    if parent <= 1e-12 {
        return id;
    }
    // Partial Fisher-Yates to draw `mtry` distinct features.
    let mut feats: Vec<usize> = (0..dims).collect();
    for k in 0..mtry.min(dims) {
        let j = k + below(rng, dims - k);
        feats.swap(k, j);
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for &f in &feats[..mtry.min(dims)] {
        let mut vals: Vec<f64> = sample.iter().map(|&i| xs[i][f]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = sample.iter().partition(|&&i| xs[i][f] <= thr);
            if l.len() < opts.min_leaf || r.len() < opts.min_leaf {
                continue;
            }
            let total = sse(&mut l.iter()) + sse(&mut r.iter());
            if best.is_none_or(|(b, _, _)| total < b) {
                best = Some((total, f, thr));
            }
        }
    }
    let Some((total, feature, threshold)) = best else { return id };
    if total >= parent {
        return id;
    }
    let (l, r): (Vec<usize>, Vec<usize>) = sample.iter().partition(|&&i| xs[i][feature] <= threshold);
    let left = grow(t, xs, ys, l, depth + 1, dims, mtry, opts, rng);
    let right = grow(t, xs, ys, r, depth + 1, dims, mtry, opts, rng);
    t.nodes[id] = Node::Split { feature, threshold, left, right };
    id
}

/// Expected improvement below `best` of a normal prediction.
pub fn expected_improvement(mean: f64, std: f64, best: f64) -> f64 {
    let imp = best - mean;
    if std <= 1e-12 {
        return imp.max(0.0);
    }
    let z = imp / std;
    let cdf = 0.5 * libm::erfc(-z / core::f64::consts::SQRT_2);
    let pdf = libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * core::f64::consts::PI);
    imp * cdf + std * pdf
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn fits_a_step() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0]).collect();
        let ys: Vec<f64> = (0..20).map(|i| if i < 10 { 1.0 } else { 5.0 }).collect();
        let f = Forest::fit(&xs, &ys, ForestOptions::default(), 1);
        assert!(f.predict(&[0.0]).0 < 2.0);
        assert!(f.predict(&[1.0]).0 > 4.0);
    }

    #[test]
    fn ei_is_nonnegative_and_grows_with_std() {
        assert_eq!(expected_improvement(3.0, 0.0, 2.0), 0.0);
        assert_eq!(expected_improvement(1.0, 0.0, 2.0), 1.0);
        assert!(expected_improvement(3.0, 1.0, 2.0) > 0.0);
        assert!(expected_improvement(3.0, 2.0, 2.0) > expected_improvement(3.0, 1.0, 2.0));
        // At mean == best, EI = std * pdf(0).
        let e = expected_improvement(2.0, 1.0, 2.0);
        assert!((e - 0.398_942_280_401_432_7).abs() < 1e-12);
    }
}
