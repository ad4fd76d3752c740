use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    /// Fraction of features tried at each node, in `(0, 1]`.
    pub max_features: f64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 30,
            min_samples_leaf: 4,
            min_samples_split: 2,
            bootstrap: true,
            max_features: 1.0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Model(format!("forest config: {m}")));
        if self.n_trees == 0 {
            return bad("n_trees must be positive");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        if self.min_samples_split < 2 {
            return bad("min_samples_split must be at least 2");
        }
        if !(self.max_features > 0.0 && self.max_features <= 1.0) {
            return bad("max_features must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

/// Mean clamped to the range of its inputs, so rounding can never push an
/// average of identical values off that value.
pub(crate) fn bounded_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n, mut lo, mut hi) = (0.0, 0usize, f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        sum += v;
        n += 1;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (sum / n as f64).clamp(lo, hi)
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    config: &'a ForestConfig,
    mtry: usize,
    rng: SeededStream,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes
            .push(Node::Leaf(bounded_mean(rows.iter().map(|&r| self.y[r]))));
        let constant = rows.iter().all(|&r| self.y[r] == self.y[rows[0]]);
        if depth >= self.config.max_depth || rows.len() < self.config.min_samples_split || constant {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, f64)> {
        let p = self.x[0].len();
        let features = self.rng.sample_indices(p, self.mtry);
        let n = rows.len();
        let total: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let parent = total * total / n as f64;
        let min_leaf = self.config.min_samples_leaf;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = rows.to_vec();
        for f in features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for i in 1..n {
                left_sum += self.y[order[i - 1]];
                let (lo, hi) = (self.x[order[i - 1]][f], self.x[order[i]][f]);
                if i < min_leaf || n - i < min_leaf || lo == hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / i as f64 + right_sum * right_sum / (n - i) as f64;
                if best.is_none_or(|(s, _, _)| score > s) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((score, f, threshold));
                }
            }
        }
        let (score, f, t) = best?;
        (score > parent + 1e-12 * parent.abs().max(1.0)).then_some((f, t))
    }
}

/// One CART regression tree on a bootstrap sample drawn from stream `tree`.
pub(crate) fn grow_tree(x: &[Vec<f64>], y: &[f64], config: &ForestConfig, seed: u64, tree: u64) -> Tree {
    let n = y.len();
    let mut rng = SeededStream::new(seed, tree);
    let rows: Vec<usize> = if config.bootstrap {
        (0..n).map(|_| rng.below(n)).collect()
    } else {
        (0..n).collect()
    };
    let p = x.first().map_or(0, Vec::len);
    let mtry = ((config.max_features * p as f64).ceil() as usize).clamp(1, p.max(1));
    let mut b = Builder {
        x,
        y,
        config,
        mtry,
        rng,
        nodes: Vec::new(),
    };
    if p == 0 {
        b.nodes.push(Node::Leaf(bounded_mean(rows.iter().map(|&r| y[r]))));
    } else {
        b.grow(rows, 0);
    }
    Tree { nodes: b.nodes }
}

pub(crate) fn fit(x: &[Vec<f64>], y: &[f64], config: &ForestConfig, seed: u64) -> Result<Vec<Tree>> {
    config.validate()?;
    if y.is_empty() || x.len() != y.len() {
        return Err(Error::Model(
            "forest needs a non-empty design with one row per target".into(),
        ));
    }
    Ok((0..config.n_trees as u64)
        .into_par_iter()
        .map(|t| grow_tree(x, y, config, seed, t))
        .collect())
}

pub(crate) fn predict(trees: &[Tree], row: &[f64]) -> f64 {
    bounded_mean(trees.iter().map(|t| t.predict(row)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stump() -> ForestConfig {
        ForestConfig {
            n_trees: 1,
            max_depth: 1,
            min_samples_leaf: 1,
            min_samples_split: 2,
            bootstrap: false,
            max_features: 1.0,
        }
    }

    /// Threshold minimising total squared error over every midpoint.
    fn exhaustive_split(xs: &[f64], ys: &[f64]) -> f64 {
        let mut cuts: Vec<f64> = xs.to_vec();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let sse = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - m) * (a - m)).sum::<f64>()
        };
        let mut best = (f64::INFINITY, 0.0);
        for w in cuts.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let l: Vec<f64> = xs.iter().zip(ys).filter(|(x, _)| **x <= t).map(|(_, y)| *y).collect();
            let r: Vec<f64> = xs.iter().zip(ys).filter(|(x, _)| **x > t).map(|(_, y)| *y).collect();
            let total = sse(&l) + sse(&r);
            if total < best.0 {
                best = (total, t);
            }
        }
        best.1
    }

    #[test]
    fn step_function_split_matches_exhaustive_oracle() {
        for seed in 0..20u64 {
            let mut rng = SeededStream::new(seed, 7);
            let xs: Vec<f64> = (0..30).map(|_| rng.uniform() * 10.0 - 5.0).collect();
            let ys: Vec<f64> = xs.iter().map(|&x| if x < 0.0 { 0.0 } else { 1.0 }).collect();
            let x: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
            let trees = fit(&x, &ys, &stump(), seed).unwrap();
            let Node::Split { threshold, .. } = trees[0].nodes[0] else {
                panic!("expected a split");
            };
            assert_eq!(threshold, exhaustive_split(&xs, &ys));
            for (row, y) in x.iter().zip(&ys) {
                assert_eq!(predict(&trees, row), *y);
            }
        }
    }

    #[test]
    fn constant_target() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![0.1; 20];
        let cfg = ForestConfig {
            n_trees: 5,
            ..ForestConfig::default()
        };
        let trees = fit(&x, &y, &cfg, 3).unwrap();
        for row in &x {
            assert_eq!(predict(&trees, row), 0.1);
        }
    }

    #[test]
    fn config_validation() {
        for cfg in [
            ForestConfig {
                max_depth: 0,
                ..stump()
            },
            ForestConfig { n_trees: 0, ..stump() },
            ForestConfig {
                max_features: 0.0,
                ..stump()
            },
            ForestConfig {
                min_samples_split: 1,
                ..stump()
            },
        ] {
            assert!(fit(&[vec![1.0]], &[1.0], &cfg, 0).is_err());
        }
    }

    #[test]
    fn min_samples_leaf_respected() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i == 0 { 100.0 } else { 0.0 }).collect();
        let cfg = ForestConfig {
            min_samples_leaf: 3,
            ..stump()
        };
        let trees = fit(&x, &y, &cfg, 0).unwrap();
        let Node::Split { threshold, .. } = trees[0].nodes[0] else {
            panic!("expected a split");
        };
        assert_eq!(threshold, 2.5);
    }

    #[test]
    fn deterministic_across_runs() {
        let mut rng = SeededStream::new(9, 0);
        let x: Vec<Vec<f64>> = (0..80).map(|_| (0..4).map(|_| rng.uniform()).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 3.0 + r[2]).collect();
        let cfg = ForestConfig {
            n_trees: 8,
            max_features: 0.5,
            ..ForestConfig::default()
        };
        assert_eq!(fit(&x, &y, &cfg, 11).unwrap(), fit(&x, &y, &cfg, 11).unwrap());
        assert_ne!(fit(&x, &y, &cfg, 11).unwrap(), fit(&x, &y, &cfg, 12).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn predictions_within_training_range(
            seed in any::<u64>(),
            rows in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -50.0f64..50.0), 2..40),
            probe in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..10),
        ) {
            let x: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0, r.1]).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let cfg = ForestConfig { n_trees: 4, min_samples_leaf: 1, max_features: 0.5, ..ForestConfig::default() };
            let trees = fit(&x, &y, &cfg, seed).unwrap();
            let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (a, b) in probe {
                let v = predict(&trees, &[a, b]);
                prop_assert!(lo <= v && v <= hi);
            }
        }
    }
}
