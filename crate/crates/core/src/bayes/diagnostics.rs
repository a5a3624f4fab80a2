//! Split-chain potential scale reduction and effective sample sizes.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::stats::{average_ranks, mean, norm_quantile, quantile, variance};

/// Effective sample size reported for chains without any variation.
pub const ESS_SENTINEL: f64 = 0.0;

fn check_chains(chains: &[Vec<f64>]) -> Result<()> {
    if chains.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "diagnostics need at least 2 chains, got {}",
            chains.len()
        )));
    }
    let n = chains[0].len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "diagnostics need at least 10 draws per chain, got {n}"
        )));
    }
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidArgument("chains have different lengths".into()));
    }
    Ok(())
}

/// Halves every chain; with an odd length the middle draw is dropped.
fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains[0].len();
    let half = n / 2;
    chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[n - half..].to_vec()])
        .collect()
}

/// Split-chain R-hat of one parameter, `chains[c][i]`. Identical constant
/// chains give 1; constant chains that disagree give infinity.
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64> {
    check_chains(chains)?;
    let split = split_chains(chains);
    let n = split[0].len() as f64;
    let means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let within = mean(&split.iter().map(|c| variance(c)).collect::<Vec<_>>());
    let between = n * variance(&means);
    if within == 0.0 {
        return Ok(if between == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(((between / within + n - 1.0) / n).sqrt())
}

/// Autocovariance `(1/n) sum_i (x_i - m)(x_{i+k} - m)` for every lag `k`.
fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|v| Complex::new(v - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf.iter().take(n).map(|c| c.re / size as f64 / n as f64).collect()
}

/// Effective sample size of already split chains, using Geyer's initial
/// monotone sequence on the multi-chain autocorrelation estimate.
fn ess_of_chains(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let total = (m * n) as f64;
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(c)).collect();
    let chain_mean: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let chain_var: Vec<f64> = acov.iter().map(|a| a[0] * n as f64 / (n as f64 - 1.0)).collect();
    let mean_var = mean(&chain_var);
    let mut var_plus = mean_var * (n as f64 - 1.0) / n as f64;
    if m > 1 {
        var_plus += variance(&chain_mean);
    }
    if !(var_plus > 0.0) || !var_plus.is_finite() {
        log::warn!("draws have no variation; effective sample size set to {ESS_SENTINEL}");
        return ESS_SENTINEL;
    }
    let lag_mean = |t: usize| acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;
    let mut rho = vec![0.0; n + 2];
    let mut rho_even = 1.0;
    rho[0] = rho_even;
    let mut rho_odd = 1.0 - (mean_var - lag_mean(1)) / var_plus;
    rho[1] = rho_odd;
    let mut t = 1;
    while t + 4 < n && rho_even + rho_odd > 0.0 {
        rho_even = 1.0 - (mean_var - lag_mean(t + 1)) / var_plus;
        rho_odd = 1.0 - (mean_var - lag_mean(t + 2)) / var_plus;
        if rho_even + rho_odd >= 0.0 {
            rho[t + 1] = rho_even;
            rho[t + 2] = rho_odd;
        }
        t += 2;
    }
    let max_t = t;
    if rho_even > 0.0 {
        rho[max_t + 1] = rho_even;
    }
    let mut s = 1;
    while s + 3 <= max_t {
        if rho[s + 1] + rho[s + 2] > rho[s - 1] + rho[s] {
            rho[s + 1] = (rho[s - 1] + rho[s]) / 2.0;
            rho[s + 2] = rho[s + 1];
        }
        s += 2;
    }
    let tau = -1.0 + 2.0 * rho[..max_t].iter().sum::<f64>() + rho[max_t + 1];
    let tau = tau.max(1.0 / total.log10());
    (total / tau).min(total * total.log10())
}

/// Rank-normalized split-chain ("bulk") effective sample size.
pub fn ess_bulk(chains: &[Vec<f64>]) -> Result<f64> {
    check_chains(chains)?;
    let split = split_chains(chains);
    let len = split[0].len();
    let pooled: Vec<f64> = split.iter().flatten().copied().collect();
    let s = pooled.len() as f64;
    let ranks = average_ranks(&pooled);
    let z: Vec<f64> = ranks.iter().map(|r| norm_quantile((r - 0.375) / (s + 0.25))).collect();
    let z_chains: Vec<Vec<f64>> = z.chunks(len).map(<[f64]>::to_vec).collect();
    Ok(ess_of_chains(&z_chains))
}

/// Minimum effective sample size of the 5% and 95% quantile indicators.
pub fn ess_tail(chains: &[Vec<f64>]) -> Result<f64> {
    check_chains(chains)?;
    let split = split_chains(chains);
    let pooled: Vec<f64> = split.iter().flatten().copied().collect();
    let mut out = f64::INFINITY;
    for prob in [0.05, 0.95] {
        let q = quantile(&pooled, prob);
        let ind: Vec<Vec<f64>> = split
            .iter()
            .map(|c| c.iter().map(|&v| if v <= q { 1.0 } else { 0.0 }).collect())
            .collect();
        out = out.min(ess_of_chains(&ind));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn iid_chains(seed: u64, m: usize, n: usize, offsets: &[f64]) -> Vec<Vec<f64>> {
        (0..m)
            .map(|c| {
                let mut r = rng::stream(seed, c as u64);
                (0..n).map(|_| r.sample::<f64, _>(StandardNormal) + offsets[c]).collect()
            })
            .collect()
    }

    #[test]
    fn iid_chains_look_converged() {
        let chains = iid_chains(1, 4, 1000, &[0.0; 4]);
        let r = rhat(&chains).unwrap();
        assert!((0.99..=1.01).contains(&r), "{r}");
        let e = ess_bulk(&chains).unwrap();
        assert!((3200.0..=4800.0).contains(&e), "{e}");
        let t = ess_tail(&chains).unwrap();
        assert!(t > 2500.0, "{t}");
    }

    #[test]
    fn shifted_chain_inflates_rhat() {
        let chains = iid_chains(2, 4, 1000, &[0.0, 0.0, 0.0, 5.0]);
        let r = rhat(&chains).unwrap();
        assert!(r > 1.5, "{r}");
        // Direct formula on the split halves.
        let split = split_chains(&chains);
        let n = split[0].len() as f64;
        let means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
        let w = split.iter().map(|c| variance(c)).sum::<f64>() / split.len() as f64;
        let b = n * variance(&means);
        let direct = (((n - 1.0) / n * w + b / n) / w).sqrt();
        assert!((r - direct).abs() < 1e-12);
    }

    #[test]
    fn ar1_matches_analytic_ess() {
        let rho = 0.9;
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|c| {
                let mut r = rng::stream(7, c);
                let mut x = r.sample::<f64, _>(StandardNormal) / (1.0f64 - rho * rho).sqrt();
                (0..1000)
                    .map(|_| {
                        x = rho * x + r.sample::<f64, _>(StandardNormal);
                        x
                    })
                    .collect()
            })
            .collect();
        let expected = 4000.0 * (1.0 - rho) / (1.0 + rho);
        let e = ess_bulk(&chains).unwrap();
        assert!(e > expected / 1.5 && e < expected * 1.5, "{e} vs {expected}");
    }

    #[test]
    fn constant_chains_give_sentinel() {
        let chains = vec![vec![2.0; 50]; 4];
        assert_eq!(ess_bulk(&chains).unwrap(), ESS_SENTINEL);
        assert_eq!(ess_tail(&chains).unwrap(), ESS_SENTINEL);
        assert_eq!(rhat(&chains).unwrap(), 1.0);
    }

    #[test]
    fn rejects_short_or_single_chains() {
        assert!(rhat(&[vec![0.0; 100]]).is_err());
        assert!(ess_bulk(&[vec![0.0; 5], vec![0.0; 5]]).is_err());
    }

    #[test]
    fn autocovariance_matches_direct_sum() {
        let x = [1.0, 3.0, -2.0, 0.5, 4.0, 2.0, -1.0];
        let m = mean(&x);
        let fast = autocovariance(&x);
        for k in 0..x.len() {
            let direct: f64 = (0..x.len() - k).map(|i| (x[i] - m) * (x[i + k] - m)).sum::<f64>() / x.len() as f64;
            assert!((fast[k] - direct).abs() < 1e-12);
        }
    }
}
