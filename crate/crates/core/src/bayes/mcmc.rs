//! No-U-turn Hamiltonian Monte Carlo with multinomial trajectory sampling,
//! dual-averaging step size adaptation and a windowed diagonal metric, plus a
//! random-walk Metropolis sampler sharing the same warmup schedule.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Energy error beyond which a trajectory is declared divergent.
const MAX_DELTA_H: f64 = 1000.0;

pub(crate) trait Target: Sync {
    fn dim(&self) -> usize;
    /// Log density at `q`; writes its gradient into `grad`. Non-finite
    /// values mark points outside the support.
    fn log_density_grad(&self, q: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    #[default]
    Nuts,
    RandomWalk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionInfo {
    pub accept_stat: f64,
    pub n_leapfrog: usize,
    pub depth: usize,
    pub divergent: bool,
}

#[derive(Clone)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    g: Vec<f64>,
    logp: f64,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Generalized no-U-turn criterion.
fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

#[derive(Default)]
struct Acc {
    n_leapfrog: usize,
    sum_metro: f64,
    divergent: bool,
}

/// Momentum-side quantities at the two ends of a subtree, in build order.
struct Ends {
    p_beg: Vec<f64>,
    p_sharp_beg: Vec<f64>,
    p_end: Vec<f64>,
    p_sharp_end: Vec<f64>,
}

impl Ends {
    fn new(d: usize) -> Self {
        Ends {
            p_beg: vec![0.0; d],
            p_sharp_beg: vec![0.0; d],
            p_end: vec![0.0; d],
            p_sharp_end: vec![0.0; d],
        }
    }
}

pub(crate) struct Nuts<'a, T: Target> {
    target: &'a T,
    pub eps: f64,
    pub inv_metric: Vec<f64>,
    pub max_depth: usize,
}

impl<'a, T: Target> Nuts<'a, T> {
    pub fn new(target: &'a T, max_depth: usize) -> Self {
        Nuts {
            target,
            eps: 1.0,
            inv_metric: vec![1.0; target.dim()],
            max_depth,
        }
    }

    fn sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.inv_metric).map(|(a, m)| a * m).collect()
    }

    fn hamiltonian(&self, z: &Point) -> f64 {
        let kinetic: f64 = 0.5 * z.p.iter().zip(&self.inv_metric).map(|(p, m)| p * p * m).sum::<f64>();
        let h = -z.logp + kinetic;
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn leapfrog(&self, z: &mut Point, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.g) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        z.logp = self.target.log_density_grad(&z.q, &mut z.g);
        if z.g.iter().any(|g| !g.is_finite()) {
            z.logp = f64::NEG_INFINITY;
            z.g.iter_mut().for_each(|g| *g = 0.0);
        }
        for (p, g) in z.p.iter_mut().zip(&z.g) {
            *p += 0.5 * eps * g;
        }
    }

    fn sample_momentum<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.inv_metric
            .iter()
            .map(|m| rng.sample::<f64, _>(StandardNormal) / m.sqrt())
            .collect()
    }

    fn point(&self, q: &[f64]) -> Point {
        let mut g = vec![0.0; q.len()];
        let logp = self.target.log_density_grad(q, &mut g);
        Point {
            q: q.to_vec(),
            p: vec![0.0; q.len()],
            g,
            logp,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree<R: Rng>(
        &self,
        depth: usize,
        z: &mut Point,
        z_propose: &mut Point,
        ends: &mut Ends,
        rho: &mut [f64],
        h0: f64,
        sign: f64,
        log_sum_weight: &mut f64,
        acc: &mut Acc,
        rng: &mut R,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, sign * self.eps);
            acc.n_leapfrog += 1;
            let h = self.hamiltonian(z);
            if h - h0 > MAX_DELTA_H {
                acc.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, h0 - h);
            acc.sum_metro += if h0 - h > 0.0 { 1.0 } else { (h0 - h).exp() };
            *z_propose = z.clone();
            let sharp = self.sharp(&z.p);
            ends.p_sharp_beg.clone_from(&sharp);
            ends.p_sharp_end = sharp;
            ends.p_beg.clone_from(&z.p);
            ends.p_end.clone_from(&z.p);
            for (r, p) in rho.iter_mut().zip(&z.p) {
                *r += p;
            }
            return !acc.divergent;
        }
        let d = z.q.len();

        let mut init = Ends::new(d);
        let mut rho_init = vec![0.0; d];
        let mut lsw_init = f64::NEG_INFINITY;
        if !self.build_tree(depth - 1, z, z_propose, &mut init, &mut rho_init, h0, sign, &mut lsw_init, acc, rng) {
            return false;
        }

        let mut z_propose_final = z.clone();
        let mut fin = Ends::new(d);
        let mut rho_final = vec![0.0; d];
        let mut lsw_final = f64::NEG_INFINITY;
        if !self.build_tree(
            depth - 1,
            z,
            &mut z_propose_final,
            &mut fin,
            &mut rho_final,
            h0,
            sign,
            &mut lsw_final,
            acc,
            rng,
        ) {
            return false;
        }

        let lsw_sub = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_sub);
        if lsw_final > lsw_sub || rng.random::<f64>() < (lsw_final - lsw_sub).exp() {
            *z_propose = z_propose_final;
        }

        let rho_sub = add(&rho_init, &rho_final);
        for (r, s) in rho.iter_mut().zip(&rho_sub) {
            *r += s;
        }
        let persist = no_u_turn(&init.p_sharp_beg, &fin.p_sharp_end, &rho_sub)
            && no_u_turn(&init.p_sharp_beg, &fin.p_sharp_beg, &add(&rho_init, &fin.p_beg))
            && no_u_turn(&init.p_sharp_end, &fin.p_sharp_end, &add(&rho_final, &init.p_end));

        ends.p_beg = init.p_beg;
        ends.p_sharp_beg = init.p_sharp_beg;
        ends.p_end = fin.p_end;
        ends.p_sharp_end = fin.p_sharp_end;
        persist
    }

    /// One NUTS transition from `q` (with cached density and gradient).
    pub fn transition<R: Rng>(&self, q: &[f64], logp: f64, grad: &[f64], rng: &mut R) -> (Vec<f64>, f64, Vec<f64>, TransitionInfo) {
        let d = q.len();
        let p0 = self.sample_momentum(rng);
        let z0 = Point {
            q: q.to_vec(),
            p: p0.clone(),
            g: grad.to_vec(),
            logp,
        };
        let h0 = self.hamiltonian(&z0);
        let sharp0 = self.sharp(&p0);
        let mut left = (z0.clone(), p0.clone(), sharp0.clone());
        let mut right = (z0.clone(), p0.clone(), sharp0);
        let mut z_sample = z0.clone();
        let mut z_propose = z0;
        let mut rho = p0;
        let mut log_sum_weight = 0.0;
        let mut depth = 0;
        let mut acc = Acc::default();

        while depth < self.max_depth {
            let forward = rng.random::<f64>() > 0.5;
            let mut ends = Ends::new(d);
            let mut rho_new = vec![0.0; d];
            let mut lsw_sub = f64::NEG_INFINITY;
            let (mut z, sign) = if forward {
                (right.0.clone(), 1.0)
            } else {
                (left.0.clone(), -1.0)
            };
            let valid = self.build_tree(
                depth,
                &mut z,
                &mut z_propose,
                &mut ends,
                &mut rho_new,
                h0,
                sign,
                &mut lsw_sub,
                &mut acc,
                rng,
            );
            if !valid {
                break;
            }
            depth += 1;

            if lsw_sub > log_sum_weight || rng.random::<f64>() < (lsw_sub - log_sum_weight).exp() {
                z_sample = z_propose.clone();
            }
            log_sum_weight = log_sum_exp(log_sum_weight, lsw_sub);

            // The existing trajectory is the first half in build order.
            let (old_beg, old_end) = if forward { (&left, &right) } else { (&right, &left) };
            let rho_old = rho;
            rho = add(&rho_old, &rho_new);
            let persist = no_u_turn(&old_beg.2, &ends.p_sharp_end, &rho)
                && no_u_turn(&old_beg.2, &ends.p_sharp_beg, &add(&rho_old, &ends.p_beg))
                && no_u_turn(&old_end.2, &ends.p_sharp_end, &add(&rho_new, &old_end.1));

            let new_edge = (z, ends.p_end, ends.p_sharp_end);
            if forward {
                right = new_edge;
            } else {
                left = new_edge;
            }
            if !persist {
                break;
            }
        }
        let info = TransitionInfo {
            accept_stat: if acc.n_leapfrog > 0 {
                acc.sum_metro / acc.n_leapfrog as f64
            } else {
                0.0
            },
            n_leapfrog: acc.n_leapfrog,
            depth,
            divergent: acc.divergent,
        };
        (z_sample.q, z_sample.logp, z_sample.g, info)
    }

    /// Doubles or halves the step size until a single leapfrog step crosses
    /// an acceptance probability of 0.8.
    pub fn init_stepsize<R: Rng>(&mut self, q: &[f64], rng: &mut R) {
        let base = self.point(q);
        let log_target = 0.8f64.ln();
        let probe = |nuts: &Self, rng: &mut R| {
            let mut z = base.clone();
            z.p = nuts.sample_momentum(rng);
            let h0 = nuts.hamiltonian(&z);
            nuts.leapfrog(&mut z, nuts.eps);
            h0 - nuts.hamiltonian(&z)
        };
        let delta = probe(self, rng);
        let up = delta > log_target;
        for _ in 0..100 {
            let delta = probe(self, rng);
            if up && !(delta > log_target) || !up && !(delta < log_target) {
                break;
            }
            self.eps = if up { 2.0 * self.eps } else { 0.5 * self.eps };
            if self.eps > 1e7 || self.eps == 0.0 {
                self.eps = self.eps.clamp(1e-10, 1e7);
                break;
            }
        }
    }
}

/// Nesterov dual averaging of the log step size toward a target mean
/// acceptance statistic.
#[derive(Debug, Clone)]
pub(crate) struct DualAveraging {
    delta: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    mu: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    pub fn new(delta: f64, eps: f64) -> Self {
        DualAveraging {
            delta,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            mu: (10.0 * eps).ln(),
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    pub fn restart(&mut self, eps: f64) {
        *self = DualAveraging::new(self.delta, eps);
    }

    /// Returns the next step size.
    pub fn learn(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let stat = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + self.t0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - stat);
        let x = self.mu - self.s_bar * self.counter.sqrt() / self.gamma;
        let x_eta = self.counter.powf(-self.kappa);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    pub fn final_eps(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Metric adaptation windows `[start, end)` for a warmup of `n` iterations:
/// an initial fast phase, doubling slow windows, and a terminal fast phase.
pub(crate) fn metric_windows(n: usize) -> Vec<(usize, usize)> {
    if n < 20 {
        return Vec::new();
    }
    let (mut init, mut term, mut base) = (75usize, 50usize, 25usize);
    if init + term + base > n {
        init = (0.15 * n as f64) as usize;
        term = (0.1 * n as f64) as usize;
        base = n - init - term;
    }
    let last = n - term;
    let mut out = Vec::new();
    let mut start = init;
    let mut size = base;
    while start < last {
        let mut end = start + size;
        if end + 2 * size > last {
            end = last;
        }
        out.push((start, end));
        start = end;
        size *= 2;
    }
    out
}

/// Running mean and variance.
#[derive(Debug, Clone)]
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(d: usize) -> Self {
        Welford {
            n: 0,
            mean: vec![0.0; d],
            m2: vec![0.0; d],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / self.n as f64;
            *s += delta * (v - *m);
        }
    }

    /// Sample variance shrunk toward a small constant.
    fn regularized(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|s| {
                let var = if self.n > 1 { s / (n - 1.0) } else { 1.0 };
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub mean_accept_stat: f64,
    pub n_divergent: usize,
    pub mean_tree_depth: f64,
    pub total_leapfrog: usize,
}

pub(crate) struct ChainSettings {
    pub kind: SamplerKind,
    pub n_iter: usize,
    pub n_warmup: usize,
    pub max_depth: usize,
    pub target_accept: f64,
}

/// Runs one chain from `init` and returns its post-warmup draws.
pub(crate) fn run_chain<T: Target, R: Rng>(
    target: &T,
    settings: &ChainSettings,
    init: &[f64],
    rng: &mut R,
) -> (Vec<Vec<f64>>, ChainStats) {
    match settings.kind {
        SamplerKind::Nuts => run_nuts(target, settings, init, rng),
        SamplerKind::RandomWalk => run_random_walk(target, settings, init, rng),
    }
}

fn run_nuts<T: Target, R: Rng>(
    target: &T,
    settings: &ChainSettings,
    init: &[f64],
    rng: &mut R,
) -> (Vec<Vec<f64>>, ChainStats) {
    let d = target.dim();
    let mut nuts = Nuts::new(target, settings.max_depth);
    let mut q = init.to_vec();
    let mut g = vec![0.0; d];
    let mut logp = target.log_density_grad(&q, &mut g);
    nuts.init_stepsize(&q, rng);
    let mut da = DualAveraging::new(settings.target_accept, nuts.eps);
    let windows = metric_windows(settings.n_warmup);
    let mut welford = Welford::new(d);

    let n_keep = settings.n_iter - settings.n_warmup;
    let mut draws = Vec::with_capacity(n_keep);
    let (mut accept_sum, mut divergent, mut depth_sum, mut leapfrogs) = (0.0, 0usize, 0usize, 0usize);
    for it in 0..settings.n_iter {
        let (nq, nl, ng, info) = nuts.transition(&q, logp, &g, rng);
        q = nq;
        logp = nl;
        g = ng;
        if it < settings.n_warmup {
            nuts.eps = da.learn(info.accept_stat);
            if let Some(&(_, end)) = windows.iter().find(|(s, e)| it >= *s && it < *e) {
                welford.push(&q);
                if it + 1 == end {
                    nuts.inv_metric = welford.regularized();
                    welford = Welford::new(d);
                    nuts.init_stepsize(&q, rng);
                    da.restart(nuts.eps);
                }
            }
            if it + 1 == settings.n_warmup {
                nuts.eps = da.final_eps();
            }
        } else {
            accept_sum += info.accept_stat;
            divergent += usize::from(info.divergent);
            depth_sum += info.depth;
            leapfrogs += info.n_leapfrog;
            draws.push(q.clone());
        }
    }
    let k = n_keep.max(1) as f64;
    let stats = ChainStats {
        step_size: nuts.eps,
        inv_metric: nuts.inv_metric.clone(),
        mean_accept_stat: accept_sum / k,
        n_divergent: divergent,
        mean_tree_depth: depth_sum as f64 / k,
        total_leapfrog: leapfrogs,
    };
    (draws, stats)
}

fn run_random_walk<T: Target, R: Rng>(
    target: &T,
    settings: &ChainSettings,
    init: &[f64],
    rng: &mut R,
) -> (Vec<Vec<f64>>, ChainStats) {
    let d = target.dim();
    let mut grad = vec![0.0; d];
    let mut q = init.to_vec();
    let mut logp = target.log_density_grad(&q, &mut grad);
    let mut scale = 2.38 / (d as f64).sqrt();
    let mut inv_metric = vec![1.0; d];
    let windows = metric_windows(settings.n_warmup);
    let mut welford = Welford::new(d);
    let n_keep = settings.n_iter - settings.n_warmup;
    let mut draws = Vec::with_capacity(n_keep);
    let mut accepted = 0usize;
    for it in 0..settings.n_iter {
        let cand: Vec<f64> = q
            .iter()
            .zip(&inv_metric)
            .map(|(v, m): (&f64, &f64)| v + scale * m.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let cand_logp = target.log_density_grad(&cand, &mut grad);
        let log_ratio = cand_logp - logp;
        let accept = cand_logp.is_finite() && rng.random::<f64>().ln() < log_ratio;
        if accept {
            q = cand;
            logp = cand_logp;
        }
        if it < settings.n_warmup {
            let a = if accept { 1.0 } else { 0.0 };
            scale *= ((a - 0.234) / ((it + 1) as f64).sqrt()).exp();
            if let Some(&(_, end)) = windows.iter().find(|(s, e)| it >= *s && it < *e) {
                welford.push(&q);
                if it + 1 == end {
                    inv_metric = welford.regularized();
                    welford = Welford::new(d);
                }
            }
        } else {
            accepted += usize::from(accept);
            draws.push(q.clone());
        }
    }
    let stats = ChainStats {
        step_size: scale,
        inv_metric,
        mean_accept_stat: accepted as f64 / n_keep.max(1) as f64,
        n_divergent: 0,
        mean_tree_depth: 0.0,
        total_leapfrog: 0,
    };
    (draws, stats)
}
