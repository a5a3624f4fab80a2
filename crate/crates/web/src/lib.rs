//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export returns a JSON string. The `demo` functions hold the logic so
//! they can be tested natively; the exported wrappers only convert errors.

use wasm_bindgen::prelude::*;

pub mod demo {
    use gallrisk::bart::{self, heatmap, summarize_scores, BartHyper};
    use gallrisk::baselines::auc;
    use gallrisk::bayes::{interaction_surface, PosteriorDraws, SurfacePair};
    use gallrisk::gallstone::{INTERACTION_LABELS, MAIN_EFFECT_LABELS};
    use gallrisk::ode::{closed_form, rk4_integrate, OdeSpec};
    use gallrisk::synthetic;
    use serde::Serialize;

    /// Typical cohort values of the nine main effects, in label order.
    pub const PROFILE: [f64; 9] = [1.9, 21.4, 42.0, 2.8, 0.0, 12.0, 14.0, 0.0, 0.0];

    const MAX_POINTS: usize = 400;

    #[derive(Serialize)]
    struct TrajectoryView {
        label: &'static str,
        state: &'static str,
        driver: &'static str,
        x: Vec<f64>,
        rk4: Vec<f64>,
        exact: Vec<f64>,
        max_rel_error: f64,
    }

    pub fn ode_trajectory(slug: &str, y0: f64, x0: f64, x1: f64, step: f64) -> Result<String, String> {
        let spec = OdeSpec::from_slug(slug).ok_or_else(|| format!("unknown equation `{slug}`"))?;
        let t = rk4_integrate(spec, y0, x0, x1, step).map_err(|e| e.to_string())?;
        let stride = t.driver_grid.len().div_ceil(MAX_POINTS).max(1);
        let mut view = TrajectoryView {
            label: spec.label(),
            state: spec.state_name(),
            driver: spec.driver_name(),
            x: Vec::new(),
            rk4: Vec::new(),
            exact: Vec::new(),
            max_rel_error: 0.0,
        };
        let last = t.driver_grid.len() - 1;
        for (k, (&x, &y)) in t.driver_grid.iter().zip(&t.state_values).enumerate() {
            let e = closed_form(spec, y0, x0, x).map_err(|e| e.to_string())?;
            if e != 0.0 {
                view.max_rel_error = view.max_rel_error.max(((y - e) / e).abs());
            }
            if k % stride == 0 || k == last {
                view.x.push(x);
                view.rk4.push(y);
                view.exact.push(e);
            }
        }
        serde_json::to_string(&view).map_err(|e| e.to_string())
    }

    /// Predicted probability over one covariate pair when only the intercept,
    /// the two main effects and their interaction covariate are non-zero.
    pub fn probability_surface(
        pair: &str,
        intercept: f64,
        beta_x: f64,
        beta_y: f64,
        gamma: f64,
        points: usize,
    ) -> Result<String, String> {
        let (pair, x_range, y_binary, interaction) = match pair {
            "crp_hgb" => (SurfacePair::CrpHgb, (0.0, 20.0), false, 1),
            "vitd_hyper" => (SurfacePair::VitdHyper, (0.0, 60.0), true, 2),
            other => return Err(format!("unknown pair `{other}`")),
        };
        if !(2..=200).contains(&points) {
            return Err(format!("points must lie in [2, 200], got {points}"));
        }
        let grid = |lo: f64, hi: f64| -> Vec<f64> {
            (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect()
        };
        let xs = grid(x_range.0, x_range.1);
        let ys = if y_binary { vec![0.0, 1.0] } else { grid(8.0, 18.0) };
        let (ax, ay) = pair.axes();
        let mut beta = vec![0.0; 14];
        beta[0] = intercept;
        beta[1 + ax] = beta_x;
        beta[1 + ay] = beta_y;
        beta[10 + interaction] = gamma;
        let mut names = vec!["Intercept".to_string()];
        names.extend(MAIN_EFFECT_LABELS.iter().chain(INTERACTION_LABELS.iter()).map(|s| s.to_string()));
        let draws = PosteriorDraws {
            names,
            chains: vec![vec![beta]],
            iters_per_chain: 1,
            warmup: 0,
            seed: 0,
            chain_stats: Vec::new(),
        };
        let surface = interaction_surface(&draws, pair, &xs, &ys, &PROFILE).map_err(|e| e.to_string())?;
        serde_json::to_string(&surface).map_err(|e| e.to_string())
    }

    #[derive(Serialize)]
    struct HeatmapView {
        heatmap: gallrisk::bart::Heatmap,
        top_pair: (String, String),
        held_out_auc: f64,
        mean_tree_depth: f64,
    }

    /// BART on the XOR benchmark: features x1, x2 carry the signal and the
    /// rest are noise.
    pub fn xor_heatmap(n: usize, n_noise: usize, n_iter: usize, seed: u64) -> Result<String, String> {
        if !(20..=2000).contains(&n) || n_noise > 20 || !(20..=2000).contains(&n_iter) {
            return Err("need 20 <= n <= 2000, n_noise <= 20 and 20 <= n_iter <= 2000".into());
        }
        let (x, y) = synthetic::xor_classification(n, n_noise, seed);
        let (xt, yt) = synthetic::xor_classification(n, n_noise, seed ^ 0x5eed);
        let hyper = BartHyper {
            n_iter,
            n_burn: n_iter / 4,
            seed,
            ..BartHyper::default()
        };
        let post = bart::run_sampler(&x, &y, &hyper).map_err(|e| e.to_string())?;
        let names: Vec<String> = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        let summary = summarize_scores(&post, &names).map_err(|e| e.to_string())?;
        let (r, q, _) = summary.ranked_pairs()[0];
        let p = bart::predict_prob(&post, &xt).map_err(|e| e.to_string())?;
        let view = HeatmapView {
            heatmap: heatmap(&summary),
            top_pair: (names[r].clone(), names[q].clone()),
            held_out_auc: auc(&p, &yt).map_err(|e| e.to_string())?,
            mean_tree_depth: post.mean_tree_depth(),
        };
        serde_json::to_string(&view).map_err(|e| e.to_string())
    }
}

#[wasm_bindgen(js_name = odeTrajectory)]
pub fn ode_trajectory(slug: &str, y0: f64, x0: f64, x1: f64, step: f64) -> Result<String, JsError> {
    demo::ode_trajectory(slug, y0, x0, x1, step).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = probabilitySurface)]
pub fn probability_surface(
    pair: &str,
    intercept: f64,
    beta_x: f64,
    beta_y: f64,
    gamma: f64,
    points: usize,
) -> Result<String, JsError> {
    demo::probability_surface(pair, intercept, beta_x, beta_y, gamma, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = xorHeatmap)]
pub fn xor_heatmap(n: usize, n_noise: usize, n_iter: usize, seed: u64) -> Result<String, JsError> {
    demo::xor_heatmap(n, n_noise, n_iter, seed).map_err(|e| JsError::new(&e))
}
