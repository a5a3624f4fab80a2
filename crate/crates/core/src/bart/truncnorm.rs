//! One-sided truncated normal draws with unit variance, for the probit
//! latent variables.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

/// Below this standardized bound plain rejection accepts at least ~1/3 of
/// proposals; above it the exponential proposal is used.
const NAIVE_CUTOFF: f64 = 0.45;

/// Draw from N(mean, 1) conditioned on `z > lower`.
pub fn above<R: Rng + ?Sized>(rng: &mut R, mean: f64, lower: f64) -> f64 {
    let a = lower - mean;
    if a < NAIVE_CUTOFF {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z > a {
                return mean + z;
            }
        }
    }
    // Robert (1995) exponential rejection sampler.
    let rate = (a + (a * a + 4.0).sqrt()) / 2.0;
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        let u: f64 = rng.random();
        if z > a && u <= (-(z - rate).powi(2) / 2.0).exp() {
            return mean + z;
        }
    }
}

/// Draw from N(mean, 1) conditioned on `z < upper`.
pub fn below<R: Rng + ?Sized>(rng: &mut R, mean: f64, upper: f64) -> f64 {
    -above(rng, -mean, -upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::stats::{norm_cdf, norm_quantile};

    /// Mean of N(mu,1) truncated below at 0: mu + phi(mu)/Phi(mu).
    fn truncated_mean(mu: f64) -> f64 {
        let phi = (-0.5 * mu * mu).exp() / (2.0 * std::f64::consts::PI).sqrt();
        mu + phi / norm_cdf(mu)
    }

    #[test]
    fn respects_bounds_and_matches_moments() {
        let mut r = rng::stream(3, 0);
        for mu in [2.0, 0.0, -1.0, -4.0] {
            let draws: Vec<f64> = (0..20_000).map(|_| above(&mut r, mu, 0.0)).collect();
            assert!(draws.iter().all(|z| *z > 0.0));
            let m = draws.iter().sum::<f64>() / draws.len() as f64;
            assert!((m - truncated_mean(mu)).abs() < 0.02, "mu={mu} mean={m}");
        }
        let lows: Vec<f64> = (0..1000).map(|_| below(&mut r, 3.0, 0.0)).collect();
        assert!(lows.iter().all(|z| *z < 0.0));
    }

    #[test]
    fn median_matches_inverse_cdf() {
        let mut r = rng::stream(4, 0);
        let mu = -2.5;
        let mut draws: Vec<f64> = (0..20_000).map(|_| above(&mut r, mu, 0.0)).collect();
        draws.sort_by(f64::total_cmp);
        // Median of the truncated law: mu + Phi^-1(Phi(a) + (1 - Phi(a)) / 2), a = -mu.
        let pa = norm_cdf(-mu);
        let expected = mu + norm_quantile(pa + (1.0 - pa) / 2.0);
        assert!((draws[10_000] - expected).abs() < 0.02);
    }
}
