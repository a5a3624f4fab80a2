//! Random forest classifier: bootstrap-sampled Gini CART trees with random
//! feature subsets at each split.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::par;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means `floor(sqrt(p))`.
    pub mtry: Option<usize>,
    pub min_node_size: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 500,
            mtry: None,
            min_node_size: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl RfParams {
    fn resolved_mtry(&self, p: usize) -> Result<usize> {
        let m = self.mtry.unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1));
        if m == 0 || m > p {
            return Err(Error::InvalidArgument(format!("mtry {m} outside [1, {p}]")));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum RfNode {
    Leaf {
        vote: u8,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassTree {
    nodes: Vec<RfNode>,
}

impl ClassTree {
    fn vote(&self, row: impl Fn(usize) -> f64) -> u8 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                RfNode::Leaf { vote } => return vote,
                RfNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row(feature) <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    p: usize,
    trees: Vec<ClassTree>,
    /// Per training row: fraction of out-of-bag trees voting 1, when any.
    oob_prob: Vec<Option<f64>>,
    oob_accuracy: Option<f64>,
}

fn gini(n0: usize, n1: usize) -> f64 {
    let n = (n0 + n1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let a = n0 as f64 / n;
    let b = n1 as f64 / n;
    1.0 - a * a - b * b
}

struct Builder<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [u8],
    mtry: usize,
    min_node: usize,
    nodes: Vec<RfNode>,
}

impl Builder<'_> {
    fn build<R: Rng>(&mut self, rows: &mut [usize], rng: &mut R) -> usize {
        let id = self.nodes.len();
        let n1 = rows.iter().filter(|&&i| self.y[i] == 1).count();
        let n0 = rows.len() - n1;
        self.nodes.push(RfNode::Leaf { vote: u8::from(n1 > n0) });
        if n0 == 0 || n1 == 0 || rows.len() < 2 * self.min_node {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, n0, n1, rng) else {
            return id;
        };
        let mid = partition_in_place(rows, |i| self.x[(i, feature)] <= threshold);
        let (l_rows, r_rows) = rows.split_at_mut(mid);
        let left = self.build(l_rows, rng);
        let right = self.build(r_rows, rng);
        self.nodes[id] = RfNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Best Gini split over a random feature subset; ties go to the lower
    /// feature index, then the lower threshold.
    fn best_split<R: Rng>(&self, rows: &[usize], n0: usize, n1: usize, rng: &mut R) -> Option<(usize, f64)> {
        let p = self.x.ncols();
        let mut features: Vec<usize> = sample(rng, p, self.mtry).into_vec();
        features.sort_unstable();
        let parent = gini(n0, n1);
        let n = rows.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
        for &f in &features {
            sorted.clear();
            sorted.extend(rows.iter().map(|&i| (self.x[(i, f)], self.y[i])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut l0, mut l1) = (0usize, 0usize);
            for k in 0..sorted.len() - 1 {
                if sorted[k].1 == 1 {
                    l1 += 1;
                } else {
                    l0 += 1;
                }
                if sorted[k].0 == sorted[k + 1].0 {
                    continue;
                }
                let nl = k + 1;
                let nr = sorted.len() - nl;
                if nl < self.min_node || nr < self.min_node {
                    continue;
                }
                let gain = parent
                    - (nl as f64 / n) * gini(l0, l1)
                    - (nr as f64 / n) * gini(n0 - l0, n1 - l1);
                if best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                    best = Some((gain, f, 0.5 * (sorted[k].0 + sorted[k + 1].0)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn partition_in_place(rows: &mut [usize], goes_left: impl Fn(usize) -> bool) -> usize {
    let mut mid = 0;
    for k in 0..rows.len() {
        if goes_left(rows[k]) {
            rows.swap(k, mid);
            mid += 1;
        }
    }
    mid
}

pub fn fit_random_forest(x: &DMatrix<f64>, y: &[u8], params: &RfParams) -> Result<RandomForest> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("{} labels for {n} rows", y.len())));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("random forest needs n >= 2".into()));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("random forest needs at least one feature".into()));
    }
    if params.n_trees == 0 || params.min_node_size == 0 {
        return Err(Error::InvalidArgument("n_trees and min_node_size must be >= 1".into()));
    }
    ensure_finite(x.as_slice(), "forest design")?;
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidArgument("forest outcome must be 0/1".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::Data("random forest needs both outcome classes".into()));
    }
    let mtry = params.resolved_mtry(p)?;

    let grown = par::map_indexed(params.n_trees, |t| {
        let mut rng = rng::stream(params.seed, t as u64);
        let mut in_bag = vec![false; n];
        let mut rows: Vec<usize> = if params.bootstrap {
            (0..n)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    in_bag[i] = true;
                    i
                })
                .collect()
        } else {
            in_bag.iter_mut().for_each(|b| *b = true);
            (0..n).collect()
        };
        let mut b = Builder {
            x,
            y,
            mtry,
            min_node: params.min_node_size,
            nodes: Vec::new(),
        };
        b.build(&mut rows, &mut rng);
        (ClassTree { nodes: b.nodes }, in_bag)
    });

    let mut votes = vec![(0usize, 0usize); n];
    for (tree, in_bag) in &grown {
        for i in (0..n).filter(|&i| !in_bag[i]) {
            votes[i].0 += usize::from(tree.vote(|j| x[(i, j)]));
            votes[i].1 += 1;
        }
    }
    let oob_prob: Vec<Option<f64>> = votes
        .iter()
        .map(|&(ones, total)| (total > 0).then(|| ones as f64 / total as f64))
        .collect();
    let scored: Vec<(f64, u8)> = oob_prob
        .iter()
        .zip(y)
        .filter_map(|(p, &t)| p.map(|p| (p, t)))
        .collect();
    let oob_accuracy = (!scored.is_empty()).then(|| {
        scored.iter().filter(|(p, t)| u8::from(*p >= 0.5) == *t).count() as f64 / scored.len() as f64
    });
    Ok(RandomForest {
        p,
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        oob_prob,
        oob_accuracy,
    })
}

impl RandomForest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn oob_probabilities(&self) -> &[Option<f64>] {
        &self.oob_prob
    }

    pub fn oob_accuracy(&self) -> Option<f64> {
        self.oob_accuracy
    }

    /// Fraction of trees voting for class 1.
    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.p {
            return Err(Error::InvalidArgument(format!(
                "prediction matrix has {} columns, forest was trained on {}",
                x.ncols(),
                self.p
            )));
        }
        let k = self.trees.len() as f64;
        Ok(par::map_indexed(x.nrows(), |i| {
            self.trees.iter().map(|t| f64::from(t.vote(|j| x[(i, j)]))).sum::<f64>() / k
        }))
    }
}
