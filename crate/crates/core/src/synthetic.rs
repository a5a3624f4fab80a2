//! Seeded synthetic data sets with known structure.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal, Uniform};

use crate::dataset::{ColumnKind, FeatureTable};
use crate::gallstone::{Roles, COLUMNS};
use crate::ode::interaction_features;
use crate::rng;
use crate::stats::logistic;

/// `y = 1` iff exactly one of the first two features is positive; the
/// remaining `n_noise` features are irrelevant. Features are uniform on
/// `(-1, 1)`.
pub fn xor_classification(n: usize, n_noise: usize, seed: u64) -> (DMatrix<f64>, Vec<u8>) {
    let mut rng = rng::stream(seed, 0x0a);
    let p = 2 + n_noise;
    let u = Uniform::new(-1.0, 1.0).expect("valid range");
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = u.sample(&mut rng);
        }
    }
    let y = (0..n).map(|i| u8::from((x[(i, 0)] > 0.0) != (x[(i, 1)] > 0.0))).collect();
    (x, y)
}

/// Gaussian linear model with `n_true` nonzero coefficients of magnitude in
/// `[1, 2]` at random positions and unit noise.
pub struct SparseLinear {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub beta: Vec<f64>,
    pub support: Vec<usize>,
}

pub fn sparse_linear(n: usize, p: usize, n_true: usize, seed: u64) -> SparseLinear {
    let mut rng = rng::stream(seed, 0x0b);
    let mut positions: Vec<usize> = (0..p).collect();
    for i in 0..n_true.min(p) {
        let j = rng.random_range(i..p);
        positions.swap(i, j);
    }
    let mut support = positions[..n_true.min(p)].to_vec();
    support.sort_unstable();
    let mut beta = vec![0.0; p];
    for &j in &support {
        let mag: f64 = rng.random_range(1.0..2.0);
        beta[j] = if rng.random_bool(0.5) { mag } else { -mag };
    }
    let x = gaussian_matrix(n, p, &mut rng);
    let y = (0..n)
        .map(|i| {
            let eta: f64 = (0..p).map(|j| x[(i, j)] * beta[j]).sum();
            eta + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    SparseLinear { x, y, beta, support }
}

/// Standard normal features with an outcome independent of them.
pub fn pure_noise_gaussian(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = rng::stream(seed, 0x0c);
    let x = gaussian_matrix(n, p, &mut rng);
    let y = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (x, y)
}

/// Standard normal features with a fair-coin binary outcome.
pub fn pure_noise_binary(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, Vec<u8>) {
    let mut rng = rng::stream(seed, 0x0d);
    let x = gaussian_matrix(n, p, &mut rng);
    let y = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
    (x, y)
}

pub struct LogisticProblem {
    pub x: DMatrix<f64>,
    pub y: Vec<u8>,
    /// Intercept first.
    pub beta: Vec<f64>,
}

/// Logistic model with standard normal features and moderate coefficients
/// (`|beta_j| <= 0.8`), intercept drawn in `[-0.5, 0.5]`.
pub fn well_scaled_logistic(n: usize, p: usize, seed: u64) -> LogisticProblem {
    let mut rng = rng::stream(seed, 0x0e);
    let mut beta = vec![rng.random_range(-0.5..0.5)];
    beta.extend((0..p).map(|_| rng.random_range(-0.8..0.8)));
    let x = gaussian_matrix(n, p, &mut rng);
    let y = (0..n)
        .map(|i| {
            let eta = beta[0] + (0..p).map(|j| x[(i, j)] * beta[j + 1]).sum::<f64>();
            u8::from(rng.random_bool(logistic(eta)))
        })
        .collect();
    LogisticProblem { x, y, beta }
}

fn gaussian_matrix<R: Rng>(n: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = rng.sample(StandardNormal);
        }
    }
    x
}

/// Rough per-column location and spread for the cohort-like generator.
fn column_profile(name: &str) -> (f64, f64) {
    match name {
        "Age" => (48.0, 12.0),
        "Comorbidity" => (0.6, 0.7),
        "Height" => (168.0, 10.0),
        "Weight" => (80.0, 15.0),
        "Body Mass Index (BMI)" => (28.5, 5.0),
        "Total Body Water (TBW)" => (40.0, 8.0),
        "Extracellular Water (ECW)" => (17.0, 3.0),
        "Intracellular Water (ICW)" => (23.5, 5.0),
        "Extracellular Fluid/Total Body Water (ECF/TBW)" => (42.0, 3.0),
        "Total Body Fat Ratio (TBFR) (%)" => (28.0, 8.0),
        "Lean Mass (LM) (%)" => (71.5, 8.0),
        "Body Protein Content (Protein) (%)" => (15.9, 2.3),
        "Visceral Fat Rating (VFR)" => (9.0, 4.5),
        "Bone Mass (BM)" => (2.8, 0.5),
        "Muscle Mass (MM)" => (54.0, 10.0),
        "Obesity (%)" => (35.0, 25.0),
        "Total Fat Content (TFC)" => (23.5, 9.0),
        "Visceral Fat Area (VFA)" => (12.0, 5.5),
        "Visceral Muscle Area (VMA) (Kg)" => (30.0, 4.5),
        "Hepatic Fat Accumulation (HFA)" => (1.2, 1.1),
        "Glucose" => (108.0, 45.0),
        "Total Cholesterol (TC)" => (204.0, 45.0),
        "Low Density Lipoprotein (LDL)" => (126.0, 38.0),
        "High Density Lipoprotein (HDL)" => (50.0, 13.0),
        "Triglyceride" => (145.0, 95.0),
        "Aspartat Aminotransferaz (AST)" => (21.5, 16.0),
        "Alanin Aminotransferaz (ALT)" => (26.0, 27.0),
        "Alkaline Phosphatase (ALP)" => (73.0, 24.0),
        "Creatinine" => (0.8, 0.18),
        "Glomerular Filtration Rate (GFR)" => (100.0, 16.0),
        "C-Reactive Protein (CRP)" => (1.9, 4.0),
        "Hemoglobin (HGB)" => (14.4, 1.6),
        "Vitamin D" => (21.4, 9.9),
        _ => (0.0, 1.0),
    }
}

fn binary_prevalence(name: &str) -> f64 {
    match name {
        "Gender" => 0.49,
        "Coronary Artery Disease (CAD)" => 0.04,
        "Hypothyroidism" => 0.03,
        "Hyperlipidemia" => 0.03,
        "Diabetes Mellitus (DM)" => 0.13,
        _ => 0.5,
    }
}

/// A table with the cohort's 38 column names, plausible marginal ranges and
/// an outcome driven by a few of the role columns. Only meant for exercising
/// the pipeline end to end.
pub fn gallstone_like(n: usize, seed: u64) -> FeatureTable {
    let mut rng = rng::stream(seed, 0x0f);
    let names: Vec<String> = COLUMNS.iter().map(|(c, _)| c.to_string()).collect();
    let kinds: Vec<ColumnKind> = COLUMNS.iter().map(|(_, k)| *k).collect();
    let p = names.len();
    let mut values = DMatrix::zeros(n, p);
    for (j, (name, kind)) in COLUMNS.iter().enumerate() {
        match kind {
            ColumnKind::Binary => {
                let b = Bernoulli::new(binary_prevalence(name)).expect("probability");
                for i in 0..n {
                    values[(i, j)] = f64::from(u8::from(b.sample(&mut rng)));
                }
            }
            ColumnKind::Continuous => {
                let (mu, s) = column_profile(name);
                let normal = Normal::new(mu, s).expect("finite profile");
                for i in 0..n {
                    let v: f64 = normal.sample(&mut rng);
                    values[(i, j)] = if mu > 0.0 { v.max(0.05 * mu) } else { v };
                }
            }
        }
    }
    let roles = Roles::default();
    let idx = |name: &str| names.iter().position(|c| c == name).expect("role column");
    let main: Vec<usize> = roles.main_effects().iter().map(|c| idx(c)).collect();
    let outcome = (0..n)
        .map(|i| {
            let m: Vec<f64> = main.iter().map(|&j| values[(i, j)]).collect();
            let f = interaction_features(&Roles::inputs_from_main(&m)).expect("non-negative inputs");
            let eta = 0.35 * (m[0] - 1.9) - 0.06 * (m[1] - 21.4) - 0.25 * (m[2] - 42.0) - 1.2 * (m[3] - 2.8)
                + 0.08 * (m[5] - 12.0)
                - 2.0 * (f.f2 - 0.12);
            u8::from(rng.random_bool(logistic(eta)))
        })
        .collect();
    FeatureTable::new(names, kinds, values, outcome).expect("generator honours table invariants")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_labels_follow_the_rule() {
        let (x, y) = xor_classification(200, 8, 1);
        assert_eq!(x.ncols(), 10);
        for i in 0..200 {
            assert_eq!(y[i] == 1, (x[(i, 0)] > 0.0) ^ (x[(i, 1)] > 0.0));
        }
        let (x2, _) = xor_classification(200, 8, 1);
        assert_eq!(x, x2);
    }

    #[test]
    fn sparse_support_is_exact() {
        let s = sparse_linear(50, 20, 3, 4);
        assert_eq!(s.support.len(), 3);
        let nz: Vec<usize> = (0..20).filter(|&j| s.beta[j] != 0.0).collect();
        assert_eq!(nz, s.support);
        assert!(s.support.iter().all(|&j| s.beta[j].abs() >= 1.0));
    }

    #[test]
    fn cohort_like_table_is_balanced_enough() {
        let t = gallstone_like(319, 7);
        assert_eq!(t.n_cols(), 38);
        let (neg, pos) = t.class_counts();
        assert!(neg > 60 && pos > 60, "{neg}/{pos}");
    }
}
