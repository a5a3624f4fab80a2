//! Variable inclusion (Vimp) and interaction (Vint) scores from split counts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BartPosterior;
use crate::error::{Error, Result};
use crate::stats::{mean, quantile, sd};

/// Below this mean the coefficient of variation is reported as `None`.
const CV_MEAN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBand {
    pub mean: f64,
    pub q25: f64,
    pub q75: f64,
    pub sd: f64,
    pub cv: Option<f64>,
}

impl ScoreBand {
    fn from_draws(draws: &[f64]) -> Self {
        let m = mean(draws);
        let s = if draws.len() > 1 { sd(draws) } else { 0.0 };
        ScoreBand {
            mean: m,
            q25: quantile(draws, 0.25),
            q75: quantile(draws, 0.75),
            sd: s,
            cv: (m >= CV_MEAN_FLOOR).then(|| s / m),
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-feature share of splitting rules, summarized over retained samples.
pub fn inclusion_proportions(post: &BartPosterior) -> Vec<ScoreBand> {
    let p = post.p;
    (0..p)
        .map(|r| {
            let draws: Vec<f64> = post
                .samples
                .iter()
                .map(|s| ratio(u64::from(s.split_counts[r]), s.total_splits()))
                .collect();
            ScoreBand::from_draws(&draws)
        })
        .collect()
}

/// Share of parent-child split pairs per feature pair, `p x p`, symmetric.
pub fn interaction_scores(post: &BartPosterior) -> Vec<Vec<ScoreBand>> {
    let p = post.p;
    let totals: Vec<u64> = post.samples.iter().map(|s| s.total_pairs()).collect();
    (0..p)
        .map(|r| {
            (0..p)
                .map(|q| {
                    let draws: Vec<f64> = post
                        .samples
                        .iter()
                        .zip(&totals)
                        .map(|(s, &tot)| ratio(u64::from(s.pair_counts[r * p + q]), tot))
                        .collect();
                    ScoreBand::from_draws(&draws)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub feature_names: Vec<String>,
    pub n_samples: usize,
    pub vimp: Vec<ScoreBand>,
    pub vint: Vec<Vec<ScoreBand>>,
}

pub fn summarize_scores(post: &BartPosterior, feature_names: &[String]) -> Result<ScoreSummary> {
    if feature_names.len() != post.p {
        return Err(Error::InvalidArgument(format!(
            "{} feature names for {} features",
            feature_names.len(),
            post.p
        )));
    }
    if post.samples.is_empty() {
        return Err(Error::InvalidArgument("posterior holds no samples".into()));
    }
    Ok(ScoreSummary {
        feature_names: feature_names.to_vec(),
        n_samples: post.samples.len(),
        vimp: inclusion_proportions(post),
        vint: interaction_scores(post),
    })
}

impl ScoreSummary {
    pub fn vimp_means(&self) -> Vec<f64> {
        self.vimp.iter().map(|b| b.mean).collect()
    }

    pub fn vint_means(&self) -> Vec<Vec<f64>> {
        self.vint.iter().map(|row| row.iter().map(|b| b.mean).collect()).collect()
    }

    /// Feature indices by decreasing mean Vimp; ties keep column order.
    pub fn ranked_features(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.vimp.len()).collect();
        idx.sort_by(|&a, &b| self.vimp[b].mean.total_cmp(&self.vimp[a].mean));
        idx
    }

    /// Off-diagonal pairs `(r, q)` with `r < q` by decreasing mean Vint.
    pub fn ranked_pairs(&self) -> Vec<(usize, usize, f64)> {
        let p = self.vint.len();
        let mut pairs: Vec<(usize, usize, f64)> = (0..p)
            .flat_map(|r| ((r + 1)..p).map(move |q| (r, q)))
            .map(|(r, q)| (r, q, self.vint[r][q].mean))
            .collect();
        pairs.sort_by(|a, b| b.2.total_cmp(&a.2));
        pairs
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    /// Long-format Vimp table: feature, mean, q25, q75, sd, cv.
    pub fn write_vimp_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        w.write_record(["feature", "vimp_mean", "vimp_q25", "vimp_q75", "vimp_sd", "vimp_cv"])?;
        for (name, b) in self.feature_names.iter().zip(&self.vimp) {
            w.write_record([
                name.clone(),
                b.mean.to_string(),
                b.q25.to_string(),
                b.q75.to_string(),
                b.sd.to_string(),
                b.cv.map_or_else(|| "NA".to_string(), |v| v.to_string()),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Interaction heatmap payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub features: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    pub q25: Vec<Vec<f64>>,
    pub q75: Vec<Vec<f64>>,
    pub cv: Vec<Vec<Option<f64>>>,
}

pub fn heatmap(summary: &ScoreSummary) -> Heatmap {
    let grid = |f: &dyn Fn(&ScoreBand) -> f64| -> Vec<Vec<f64>> {
        summary.vint.iter().map(|row| row.iter().map(f).collect()).collect()
    };
    Heatmap {
        features: summary.feature_names.clone(),
        mean: grid(&|b| b.mean),
        q25: grid(&|b| b.q25),
        q75: grid(&|b| b.q75),
        cv: summary.vint.iter().map(|row| row.iter().map(|b| b.cv).collect()).collect(),
    }
}

pub fn heatmap_export(summary: &ScoreSummary, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), &heatmap(summary))?;
    Ok(())
}

pub fn read_heatmap(path: &Path) -> Result<Heatmap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let h: Heatmap = serde_json::from_str(&text)?;
    let p = h.features.len();
    if [&h.mean, &h.q25, &h.q75].iter().any(|m| m.len() != p || m.iter().any(|r| r.len() != p)) {
        return Err(Error::Data(format!("heatmap in {} is not {p} x {p}", path.display())));
    }
    Ok(h)
}

/// One row per retained sample: the split count of every feature.
pub fn write_split_counts(post: &BartPosterior, feature_names: &[String], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let mut header = vec!["sample".to_string()];
    header.extend(feature_names.iter().cloned());
    w.write_record(&header)?;
    for (k, s) in post.samples.iter().enumerate() {
        let mut rec = vec![k.to_string()];
        rec.extend(s.split_counts.iter().map(|c| c.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::tree::ROOT;
    use super::super::{run_sampler, BartHyper, DecisionTree};
    use super::*;
    use crate::synthetic;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn vimp_sums_to_one_and_vint_is_symmetric() {
        let (x, y) = synthetic::xor_classification(150, 4, 3);
        let hyper = BartHyper {
            n_iter: 200,
            n_burn: 50,
            seed: 3,
            ..BartHyper::default()
        };
        let post = run_sampler(&x, &y, &hyper).unwrap();
        for s in &post.samples {
            if s.total_splits() > 0 {
                let total: f64 = (0..post.p).map(|r| ratio(u64::from(s.split_counts[r]), s.total_splits())).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
        let sum = summarize_scores(&post, &names(post.p)).unwrap();
        let vint = sum.vint_means();
        for r in 0..post.p {
            for q in 0..post.p {
                assert_eq!(vint[r][q], vint[q][r]);
            }
        }
        for b in &sum.vimp {
            assert!(b.q25 <= b.mean.max(b.q75) && b.q25 <= b.q75);
        }
    }

    #[test]
    fn stumps_give_zero_scores() {
        let post = BartPosterior::from_forests(3, vec![vec![DecisionTree::stump(0.1); 4]; 5]);
        let s = summarize_scores(&post, &names(3)).unwrap();
        assert!(s.vimp.iter().all(|b| b.mean == 0.0 && b.cv.is_none()));
        assert!(s.vint.iter().flatten().all(|b| b.mean == 0.0));
    }

    #[test]
    fn single_feature_trees_concentrate_vimp() {
        let mut t = DecisionTree::stump(0.0);
        t.grow(ROOT, 1, 0.0);
        let post = BartPosterior::from_forests(3, vec![vec![t.clone(), t]; 4]);
        let s = summarize_scores(&post, &names(3)).unwrap();
        assert_eq!(s.vimp_means(), vec![0.0, 1.0, 0.0]);
        assert_eq!(s.vimp[1].cv, Some(0.0));
    }

    #[test]
    fn heatmap_roundtrips_bit_exact() {
        let (x, y) = synthetic::xor_classification(100, 3, 8);
        let hyper = BartHyper {
            n_iter: 120,
            n_burn: 20,
            seed: 8,
            ..BartHyper::default()
        };
        let post = run_sampler(&x, &y, &hyper).unwrap();
        let sum = summarize_scores(&post, &names(post.p)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("heat.json");
        heatmap_export(&sum, &path).unwrap();
        let back = read_heatmap(&path).unwrap();
        assert_eq!(back, heatmap(&sum));
        let csv_path = dir.path().join("splits.csv");
        write_split_counts(&post, &names(post.p), &csv_path).unwrap();
        let lines = std::fs::read_to_string(&csv_path).unwrap().lines().count();
        assert_eq!(lines, post.n_samples() + 1);
    }

    #[test]
    fn name_count_must_match() {
        let post = BartPosterior::from_forests(2, vec![vec![DecisionTree::stump(0.0)]]);
        assert!(summarize_scores(&post, &names(3)).is_err());
    }
}
