//! Bayesian additive regression trees for a binary outcome.
//!
//! The outcome enters through probit data augmentation: a latent
//! `z ~ N(sum of trees, 1)` truncated to the side of zero given by `y`.
//! Each sweep visits the `m` trees in turn (Bayesian backfitting), proposes a
//! grow, prune or change move on the tree structure with the leaf values
//! integrated out, accepts it by Metropolis-Hastings, and then draws the
//! leaf values from their conjugate normal conditionals.

mod scores;
pub mod tree;
pub mod truncnorm;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::par;
use crate::rng;
use crate::stats::norm_cdf;

pub use scores::{
    heatmap, heatmap_export, inclusion_proportions, interaction_scores, read_heatmap, summarize_scores,
    write_split_counts, Heatmap, ScoreBand, ScoreSummary,
};
pub use tree::{DecisionTree, Node};

use tree::ROOT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BartHyper {
    pub m: usize,
    pub n_iter: usize,
    pub n_burn: usize,
    pub tree_prior_alpha: f64,
    pub tree_prior_beta: f64,
    pub k_scale: f64,
    pub seed: u64,
    pub n_chains: usize,
    pub p_grow: f64,
    pub p_prune: f64,
}

impl Default for BartHyper {
    fn default() -> Self {
        BartHyper {
            m: 20,
            n_iter: 1000,
            n_burn: 250,
            tree_prior_alpha: 0.95,
            tree_prior_beta: 2.0,
            k_scale: 2.0,
            seed: 0,
            n_chains: 1,
            p_grow: 0.28,
            p_prune: 0.28,
        }
    }
}

impl BartHyper {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("BART needs m >= 1 trees".into()));
        }
        if self.n_burn >= self.n_iter {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} must be below the iteration count {}",
                self.n_burn, self.n_iter
            )));
        }
        if !(self.tree_prior_alpha > 0.0 && self.tree_prior_alpha < 1.0) || !(self.tree_prior_beta >= 0.0) {
            return Err(Error::InvalidArgument("tree prior needs alpha in (0,1), beta >= 0".into()));
        }
        if !(self.k_scale > 0.0) {
            return Err(Error::InvalidArgument("k_scale must be > 0".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::InvalidArgument("n_chains must be >= 1".into()));
        }
        if !(self.p_grow > 0.0 && self.p_prune > 0.0 && self.p_grow + self.p_prune < 1.0) {
            return Err(Error::InvalidArgument("move probabilities must leave room for change moves".into()));
        }
        Ok(())
    }

    /// Prior standard deviation of each leaf value.
    pub fn leaf_sd(&self) -> f64 {
        3.0 / (self.k_scale * (self.m as f64).sqrt())
    }

    pub fn retained_per_chain(&self) -> usize {
        self.n_iter - self.n_burn
    }

    fn split_prob(&self, depth: usize) -> f64 {
        self.tree_prior_alpha * (1.0 + depth as f64).powf(-self.tree_prior_beta)
    }
}

/// One retained posterior draw: the forest and its split bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetainedSample {
    pub forest: Vec<DecisionTree>,
    /// Splitting rules per feature.
    pub split_counts: Vec<u32>,
    /// Parent-child split pairs, symmetric `p x p`, row-major.
    pub pair_counts: Vec<u32>,
}

impl RetainedSample {
    pub fn from_forest(forest: Vec<DecisionTree>, p: usize) -> Self {
        let mut split_counts = vec![0; p];
        let mut pair_counts = vec![0; p * p];
        for t in &forest {
            t.count_splits(p, &mut split_counts, &mut pair_counts);
        }
        RetainedSample {
            forest,
            split_counts,
            pair_counts,
        }
    }

    pub fn total_splits(&self) -> u64 {
        self.split_counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn total_pairs(&self) -> u64 {
        self.pair_counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn latent_mean(&self, row: impl Fn(usize) -> f64 + Copy) -> f64 {
        self.forest.iter().map(|t| t.predict(row)).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveStats {
    pub grow_proposed: u64,
    pub grow_accepted: u64,
    pub prune_proposed: u64,
    pub prune_accepted: u64,
    pub change_proposed: u64,
    pub change_accepted: u64,
    /// Proposals rejected because a child would be empty.
    pub empty_rejected: u64,
    /// Log acceptance ratios that came out NaN or infinite.
    pub non_finite_ratios: u64,
}

impl MoveStats {
    fn merge(&mut self, o: &MoveStats) {
        self.grow_proposed += o.grow_proposed;
        self.grow_accepted += o.grow_accepted;
        self.prune_proposed += o.prune_proposed;
        self.prune_accepted += o.prune_accepted;
        self.change_proposed += o.change_proposed;
        self.change_accepted += o.change_accepted;
        self.empty_rejected += o.empty_rejected;
        self.non_finite_ratios += o.non_finite_ratios;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BartPosterior {
    pub p: usize,
    pub samples: Vec<RetainedSample>,
    pub moves: MoveStats,
}

impl BartPosterior {
    /// Posterior built from explicit forests (one per retained sample).
    pub fn from_forests(p: usize, forests: Vec<Vec<DecisionTree>>) -> Self {
        BartPosterior {
            p,
            samples: forests.into_iter().map(|f| RetainedSample::from_forest(f, p)).collect(),
            moves: MoveStats::default(),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    /// Mean over retained trees of the maximum leaf depth.
    pub fn mean_tree_depth(&self) -> f64 {
        let (sum, count) = self
            .samples
            .iter()
            .flat_map(|s| s.forest.iter())
            .fold((0usize, 0usize), |(s, c), t| (s + t.max_depth(), c + 1));
        if count == 0 {
            0.0
        } else {
            sum as f64 / count as f64
        }
    }
}

struct RowMajor {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl RowMajor {
    fn from_matrix(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let mut data = Vec::with_capacity(n * p);
        for i in 0..n {
            for j in 0..p {
                data.push(x[(i, j)]);
            }
        }
        RowMajor { n, p, data }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }
}

/// Runs the sampler and returns the post-burn-in draws of every chain, in
/// chain order.
pub fn run_sampler(x: &DMatrix<f64>, y: &[u8], hyper: &BartHyper) -> Result<BartPosterior> {
    run_sampler_observed(x, y, hyper, |_, _| {})
}

/// As [`run_sampler`], calling `observe(iteration, latent)` after every
/// latent update of the first chain.
pub(crate) fn run_sampler_observed(
    x: &DMatrix<f64>,
    y: &[u8],
    hyper: &BartHyper,
    observe: impl FnMut(usize, &[f64]) + Send,
) -> Result<BartPosterior> {
    hyper.validate()?;
    let (n, p) = x.shape();
    if p == 0 {
        return Err(Error::InvalidArgument("BART needs at least one feature".into()));
    }
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("{} outcomes for {n} rows", y.len())));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidArgument("BART outcome must be 0/1".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::Data("BART needs both outcome classes".into()));
    }
    ensure_finite(x.as_slice(), "BART design")?;
    let data = RowMajor::from_matrix(x);
    let observe = std::sync::Mutex::new(observe);
    let chains = par::map_indexed(hyper.n_chains, |c| {
        let mut rng = rng::stream(hyper.seed, c as u64);
        let mut chain = Chain::new(&data, y, hyper);
        let mut samples = Vec::with_capacity(hyper.retained_per_chain());
        for it in 0..hyper.n_iter {
            chain.sweep(&mut rng);
            if c == 0 {
                let mut obs = observe.lock().expect("observer lock");
                (obs)(it, &chain.latent);
            }
            if it >= hyper.n_burn {
                let forest: Vec<DecisionTree> = chain.trees.iter().map(DecisionTree::compacted).collect();
                samples.push(RetainedSample::from_forest(forest, p));
            }
        }
        (samples, chain.moves)
    });
    let mut moves = MoveStats::default();
    let mut samples = Vec::with_capacity(hyper.n_chains * hyper.retained_per_chain());
    for (s, m) in chains {
        samples.extend(s);
        moves.merge(&m);
    }
    Ok(BartPosterior { p, samples, moves })
}

struct Chain<'a> {
    data: &'a RowMajor,
    y: &'a [u8],
    hyper: &'a BartHyper,
    tau2: f64,
    trees: Vec<DecisionTree>,
    leaf_of: Vec<Vec<usize>>,
    tree_fit: Vec<Vec<f64>>,
    fit: Vec<f64>,
    latent: Vec<f64>,
    resid: Vec<f64>,
    moves: MoveStats,
}

#[derive(Clone, Copy)]
enum Move {
    Grow,
    Prune,
    Change,
}

/// Log marginal likelihood of `count` residuals summing to `sum` in one
/// leaf, up to terms shared by every tree structure.
fn leaf_log_marginal(count: usize, sum: f64, tau2: f64) -> f64 {
    let a = 1.0 + count as f64 * tau2;
    -0.5 * a.ln() + tau2 * sum * sum / (2.0 * a)
}

impl<'a> Chain<'a> {
    fn new(data: &'a RowMajor, y: &'a [u8], hyper: &'a BartHyper) -> Self {
        let n = data.n;
        let tau = hyper.leaf_sd();
        Chain {
            data,
            y,
            hyper,
            tau2: tau * tau,
            trees: vec![DecisionTree::stump(0.0); hyper.m],
            leaf_of: vec![vec![ROOT; n]; hyper.m],
            tree_fit: vec![vec![0.0; n]; hyper.m],
            fit: vec![0.0; n],
            latent: vec![0.0; n],
            resid: vec![0.0; n],
            moves: MoveStats::default(),
        }
    }

    fn sweep<R: Rng>(&mut self, rng: &mut R) {
        self.draw_latent(rng);
        for t in 0..self.hyper.m {
            for i in 0..self.data.n {
                self.resid[i] = self.latent[i] - self.fit[i] + self.tree_fit[t][i];
            }
            self.update_structure(t, rng);
            self.draw_leaves(t, rng);
        }
    }

    fn draw_latent<R: Rng>(&mut self, rng: &mut R) {
        for i in 0..self.data.n {
            self.latent[i] = if self.y[i] == 1 {
                truncnorm::above(rng, self.fit[i], 0.0)
            } else {
                truncnorm::below(rng, self.fit[i], 0.0)
            };
        }
    }

    fn rows_of(&self, t: usize, nodes: &[usize]) -> Vec<usize> {
        (0..self.data.n)
            .filter(|&i| nodes.contains(&self.leaf_of[t][i]))
            .collect()
    }

    fn resid_sum(&self, rows: &[usize]) -> f64 {
        rows.iter().map(|&i| self.resid[i]).sum()
    }

    /// Features taking at least two distinct values over `rows`.
    fn splittable_features(&self, rows: &[usize]) -> Vec<usize> {
        (0..self.data.p)
            .filter(|&j| {
                let first = match rows.first() {
                    Some(&i) => self.data.get(i, j),
                    None => return false,
                };
                rows.iter().any(|&i| self.data.get(i, j) != first)
            })
            .collect()
    }

    fn is_growable(&self, rows: &[usize]) -> bool {
        rows.len() >= 2
            && (0..self.data.p).any(|j| {
                let first = self.data.get(rows[0], j);
                rows.iter().any(|&i| self.data.get(i, j) != first)
            })
    }

    /// Cut points for `feature` that leave both children non-empty: every
    /// observed value except the largest.
    fn cut_points(&self, rows: &[usize], feature: usize) -> Vec<f64> {
        let mut vals: Vec<f64> = rows.iter().map(|&i| self.data.get(i, feature)).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        vals.pop();
        vals
    }

    fn draw_rule<R: Rng>(&self, rows: &[usize], rng: &mut R) -> Option<(usize, f64)> {
        let features = self.splittable_features(rows);
        if features.is_empty() {
            return None;
        }
        let feature = features[rng.random_range(0..features.len())];
        let cuts = self.cut_points(rows, feature);
        Some((feature, cuts[rng.random_range(0..cuts.len())]))
    }

    fn partition(&self, rows: &[usize], feature: usize, value: f64) -> (Vec<usize>, Vec<usize>) {
        rows.iter().partition(|&&i| self.data.get(i, feature) <= value)
    }

    fn rows_by_leaf(&self, t: usize) -> Vec<(usize, Vec<usize>)> {
        let leaves = self.trees[t].leaves();
        let mut slot = std::collections::HashMap::with_capacity(leaves.len());
        for (k, &l) in leaves.iter().enumerate() {
            slot.insert(l, k);
        }
        let mut groups: Vec<(usize, Vec<usize>)> = leaves.iter().map(|&l| (l, Vec::new())).collect();
        for i in 0..self.data.n {
            groups[slot[&self.leaf_of[t][i]]].1.push(i);
        }
        groups
    }

    fn update_structure<R: Rng>(&mut self, t: usize, rng: &mut R) {
        let mv = if self.trees[t].is_stump() {
            Move::Grow
        } else {
            let u: f64 = rng.random();
            if u < self.hyper.p_grow {
                Move::Grow
            } else if u < self.hyper.p_grow + self.hyper.p_prune {
                Move::Prune
            } else {
                Move::Change
            }
        };
        match mv {
            Move::Grow => self.propose_grow(t, rng),
            Move::Prune => self.propose_prune(t, rng),
            Move::Change => self.propose_change(t, rng),
        }
    }

    fn accept<R: Rng>(&mut self, log_ratio: f64, rng: &mut R) -> bool {
        if !log_ratio.is_finite() {
            self.moves.non_finite_ratios += 1;
            return log_ratio == f64::INFINITY;
        }
        let u: f64 = rng.random();
        u.ln() < log_ratio
    }

    fn propose_grow<R: Rng>(&mut self, t: usize, rng: &mut R) {
        self.moves.grow_proposed += 1;
        let groups = self.rows_by_leaf(t);
        let growable: Vec<&(usize, Vec<usize>)> = groups.iter().filter(|(_, r)| self.is_growable(r)).collect();
        if growable.is_empty() {
            return;
        }
        let b = growable.len();
        let (leaf, rows) = growable[rng.random_range(0..b)];
        let (leaf, rows) = (*leaf, rows.clone());
        let Some((feature, value)) = self.draw_rule(&rows, rng) else {
            return;
        };
        let (left, right) = self.partition(&rows, feature, value);
        if left.is_empty() || right.is_empty() {
            self.moves.empty_rejected += 1;
            return;
        }
        let tree = &self.trees[t];
        let depth = tree.depth_of(leaf);
        let nog_before = tree.nog_nodes().len();
        let parent_was_nog = tree
            .parent_of(leaf)
            .is_some_and(|par| match tree.node(par) {
                Node::Split { left, right, .. } => tree.is_leaf(left) && tree.is_leaf(right),
                Node::Leaf { .. } => false,
            });
        let nog_after = nog_before + 1 - usize::from(parent_was_nog);
        let p_grow_here = if tree.is_stump() { 1.0 } else { self.hyper.p_grow };
        let p_prune_there = self.hyper.p_prune;

        let ps = self.hyper.split_prob(depth);
        let ps_child = self.hyper.split_prob(depth + 1);
        let log_prior = ps.ln() + 2.0 * (1.0 - ps_child).ln() - (1.0 - ps).ln();
        let log_transition = (p_prune_there / p_grow_here).ln() + (b as f64 / nog_after as f64).ln();
        let log_lik = leaf_log_marginal(left.len(), self.resid_sum(&left), self.tau2)
            + leaf_log_marginal(right.len(), self.resid_sum(&right), self.tau2)
            - leaf_log_marginal(rows.len(), self.resid_sum(&rows), self.tau2);
        if self.accept(log_prior + log_transition + log_lik, rng) {
            let (l, r) = self.trees[t].grow(leaf, feature, value);
            for &i in &left {
                self.leaf_of[t][i] = l;
            }
            for &i in &right {
                self.leaf_of[t][i] = r;
            }
            self.moves.grow_accepted += 1;
        }
    }

    fn propose_prune<R: Rng>(&mut self, t: usize, rng: &mut R) {
        self.moves.prune_proposed += 1;
        let nogs = self.trees[t].nog_nodes();
        if nogs.is_empty() {
            return;
        }
        let w = nogs.len();
        let node = nogs[rng.random_range(0..w)];
        let (l, r) = match self.trees[t].node(node) {
            Node::Split { left, right, .. } => (left, right),
            Node::Leaf { .. } => return,
        };
        let groups = self.rows_by_leaf(t);
        let growable_after = groups
            .iter()
            .filter(|(leaf, rows)| *leaf != l && *leaf != r && self.is_growable(rows))
            .count()
            + 1;
        let left = self.rows_of(t, &[l]);
        let right = self.rows_of(t, &[r]);
        let mut rows = left.clone();
        rows.extend_from_slice(&right);

        let depth = self.trees[t].depth_of(node);
        let p_grow_after = if node == ROOT { 1.0 } else { self.hyper.p_grow };
        let ps = self.hyper.split_prob(depth);
        let ps_child = self.hyper.split_prob(depth + 1);
        let log_prior = (1.0 - ps).ln() - ps.ln() - 2.0 * (1.0 - ps_child).ln();
        let log_transition = (p_grow_after / self.hyper.p_prune).ln() + (w as f64 / growable_after as f64).ln();
        let log_lik = leaf_log_marginal(rows.len(), self.resid_sum(&rows), self.tau2)
            - leaf_log_marginal(left.len(), self.resid_sum(&left), self.tau2)
            - leaf_log_marginal(right.len(), self.resid_sum(&right), self.tau2);
        if self.accept(log_prior + log_transition + log_lik, rng) {
            self.trees[t].prune(node);
            for &i in &rows {
                self.leaf_of[t][i] = node;
            }
            self.moves.prune_accepted += 1;
        }
    }

    fn propose_change<R: Rng>(&mut self, t: usize, rng: &mut R) {
        self.moves.change_proposed += 1;
        let nogs = self.trees[t].nog_nodes();
        if nogs.is_empty() {
            return;
        }
        let node = nogs[rng.random_range(0..nogs.len())];
        let (l, r) = match self.trees[t].node(node) {
            Node::Split { left, right, .. } => (left, right),
            Node::Leaf { .. } => return,
        };
        let old_left = self.rows_of(t, &[l]);
        let old_right = self.rows_of(t, &[r]);
        let mut rows = old_left.clone();
        rows.extend_from_slice(&old_right);
        let Some((feature, value)) = self.draw_rule(&rows, rng) else {
            return;
        };
        let (new_left, new_right) = self.partition(&rows, feature, value);
        if new_left.is_empty() || new_right.is_empty() {
            self.moves.empty_rejected += 1;
            return;
        }
        let ll = |rows: &[usize]| leaf_log_marginal(rows.len(), self.resid_sum(rows), self.tau2);
        let log_lik = ll(&new_left) + ll(&new_right) - ll(&old_left) - ll(&old_right);
        if self.accept(log_lik, rng) {
            self.trees[t].set_rule(node, feature, value);
            for &i in &new_left {
                self.leaf_of[t][i] = l;
            }
            for &i in &new_right {
                self.leaf_of[t][i] = r;
            }
            self.moves.change_accepted += 1;
        }
    }

    fn draw_leaves<R: Rng>(&mut self, t: usize, rng: &mut R) {
        for (leaf, rows) in self.rows_by_leaf(t) {
            let count = rows.len() as f64;
            let sum = self.resid_sum(&rows);
            let a = 1.0 + count * self.tau2;
            let mean = self.tau2 * sum / a;
            let sd = (self.tau2 / a).sqrt();
            let mu = Normal::new(mean, sd).expect("finite leaf posterior").sample(rng);
            self.trees[t].set_mu(leaf, mu);
            for &i in &rows {
                let delta = mu - self.tree_fit[t][i];
                self.tree_fit[t][i] = mu;
                self.fit[i] += delta;
            }
        }
    }
}

/// Posterior mean of `Phi(sum of trees)` per row of `x_new`.
pub fn predict_prob(posterior: &BartPosterior, x_new: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x_new.ncols() != posterior.p {
        return Err(Error::InvalidArgument(format!(
            "prediction matrix has {} columns, model was trained on {}",
            x_new.ncols(),
            posterior.p
        )));
    }
    if posterior.samples.is_empty() {
        return Err(Error::InvalidArgument("posterior holds no samples".into()));
    }
    let data = RowMajor::from_matrix(x_new);
    let k = posterior.samples.len() as f64;
    Ok(par::map_indexed(data.n, |i| {
        let row = data.row(i);
        posterior
            .samples
            .iter()
            .map(|s| norm_cdf(s.latent_mean(|j| row[j])))
            .sum::<f64>()
            / k
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::metrics::auc;
    use crate::synthetic;

    fn quick(seed: u64) -> BartHyper {
        BartHyper {
            n_iter: 300,
            n_burn: 100,
            seed,
            ..BartHyper::default()
        }
    }

    #[test]
    fn retains_post_burn_in_samples() {
        let h = BartHyper::default();
        assert_eq!(h.retained_per_chain(), 750);
        let (x, y) = synthetic::xor_classification(120, 2, 1);
        let post = run_sampler(&x, &y, &quick(1)).unwrap();
        assert_eq!(post.n_samples(), 200);
        let two = BartHyper {
            n_chains: 2,
            ..quick(1)
        };
        assert_eq!(run_sampler(&x, &y, &two).unwrap().n_samples(), 400);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, _) = synthetic::xor_classification(20, 0, 1);
        assert!(run_sampler(&x, &[1; 20], &quick(0)).is_err());
        let empty = DMatrix::<f64>::zeros(20, 0);
        let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        assert!(run_sampler(&empty, &y, &quick(0)).is_err());
        let bad = BartHyper {
            n_burn: 10,
            n_iter: 10,
            ..BartHyper::default()
        };
        assert!(run_sampler(&x, &y, &bad).is_err());
    }

    #[test]
    fn latent_respects_truncation_every_iteration() {
        let (x, y) = synthetic::xor_classification(80, 3, 5);
        let mut violations = 0usize;
        let mut seen = 0usize;
        let hyper = BartHyper {
            n_iter: 50,
            n_burn: 10,
            ..BartHyper::default()
        };
        let post = run_sampler_observed(&x, &y, &hyper, |_, z| {
            seen += 1;
            violations += z
                .iter()
                .zip(&y)
                .filter(|(z, y)| if **y == 1 { **z <= 0.0 } else { **z >= 0.0 })
                .count();
        })
        .unwrap();
        assert_eq!(seen, 50);
        assert_eq!(violations, 0);
        assert_eq!(post.moves.non_finite_ratios, 0);
        assert!(post.moves.grow_accepted > 0);
    }

    #[test]
    fn every_leaf_is_reachable_by_training_rows() {
        let (x, y) = synthetic::xor_classification(100, 4, 9);
        let post = run_sampler(&x, &y, &quick(9)).unwrap();
        let data = RowMajor::from_matrix(&x);
        for s in post.samples.iter().step_by(37) {
            for t in &s.forest {
                let mut hit = std::collections::HashSet::new();
                for i in 0..data.n {
                    hit.insert(t.find_leaf(|j| data.get(i, j)));
                }
                assert_eq!(hit.len(), t.leaves().len());
            }
        }
    }

    #[test]
    fn zero_stumps_predict_one_half() {
        let post = BartPosterior::from_forests(2, vec![vec![DecisionTree::stump(0.0); 5]]);
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        assert_eq!(predict_prob(&post, &x).unwrap(), vec![0.5, 0.5]);
        assert!(predict_prob(&post, &DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn single_split_matches_hand_computed_probit() {
        let mut t = DecisionTree::stump(0.0);
        let (l, r) = t.grow(tree::ROOT, 0, 0.5);
        t.set_mu(l, 0.3);
        t.set_mu(r, -0.7);
        let post = BartPosterior::from_forests(1, vec![vec![t]]);
        let x = DMatrix::from_column_slice(3, 1, &[0.2, 0.5, 0.9]);
        let p = predict_prob(&post, &x).unwrap();
        let expected = [norm_cdf(0.3), norm_cdf(0.3), norm_cdf(-0.7)];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_feature_orders_probabilities() {
        let n = 60;
        let x = DMatrix::from_fn(n, 1, |i, _| i as f64);
        let y: Vec<u8> = (0..n).map(|i| u8::from(i >= n / 2)).collect();
        let post = run_sampler(&x, &y, &quick(3)).unwrap();
        let p = predict_prob(&post, &x).unwrap();
        let low = p[..n / 2].iter().cloned().fold(f64::MIN, f64::max);
        let high = p[n / 2..].iter().cloned().fold(f64::MAX, f64::min);
        assert!(low < high, "max negative {low} vs min positive {high}");
        assert!(p.iter().all(|v| *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn duplicate_rows_get_identical_probabilities() {
        let (x, y) = synthetic::xor_classification(100, 2, 4);
        let post = run_sampler(&x, &y, &quick(4)).unwrap();
        let dup = DMatrix::from_fn(2, x.ncols(), |_, j| x[(7, j)]);
        let p = predict_prob(&post, &dup).unwrap();
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = synthetic::xor_classification(80, 2, 6);
        let a = run_sampler(&x, &y, &quick(6)).unwrap();
        let b = run_sampler(&x, &y, &quick(6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn xor_is_learned() {
        let (x, y) = synthetic::xor_classification(500, 8, 2);
        let (xt, yt) = synthetic::xor_classification(500, 8, 1002);
        let post = run_sampler(&x, &y, &BartHyper { seed: 2, ..BartHyper::default() }).unwrap();
        let p = predict_prob(&post, &xt).unwrap();
        let a = auc(&p, &yt).unwrap();
        assert!(a >= 0.85, "auc {a}");
    }
}
