use gallrisk_web::demo;
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn trajectory_tracks_the_exact_solution() {
    for slug in ["ecf_vitd", "crp_hgb", "hyper_vitd", "dm_bm"] {
        let v = parse(demo::ode_trajectory(slug, 1.0, 0.0, 1.5, 1e-3).unwrap());
        assert!(v["max_rel_error"].as_f64().unwrap() < 1e-6, "{slug}");
        let n = v["x"].as_array().unwrap().len();
        assert!(n > 100 && n <= 401, "{n}");
        assert_eq!(v["x"].as_array().unwrap().last().unwrap().as_f64().unwrap(), 1.5);
    }
    assert!(demo::ode_trajectory("nope", 1.0, 0.0, 1.0, 1e-3).is_err());
    assert!(demo::ode_trajectory("crp_hgb", 1.0, 1.0, 0.0, 1e-3).is_err());
}

#[test]
fn surface_follows_the_interaction_sign() {
    let v = parse(demo::probability_surface("crp_hgb", -1.0, 0.2, 0.0, -1.5, 6).unwrap());
    let p = v["probability"].as_array().unwrap();
    assert_eq!(p.len(), 6);
    let at = |a: usize, b: usize| p[a][b].as_f64().unwrap();
    // With a negative CRP/(1+HGB) coefficient, risk at high CRP rises with HGB.
    assert!(at(5, 5) > at(5, 0));

    // The covariate is -2 VitD Hyper: a positive coefficient lowers risk as
    // VitD grows among Hyper = 1, a negative one raises it.
    for (gamma, falling) in [(0.05, true), (-0.05, false)] {
        let v = parse(demo::probability_surface("vitd_hyper", 0.0, 0.0, 0.5, gamma, 5).unwrap());
        let p = v["probability"].as_array().unwrap();
        let hyper: Vec<f64> = p.iter().map(|row| row[1].as_f64().unwrap()).collect();
        assert!(hyper.windows(2).all(|w| (w[1] < w[0]) == falling), "{hyper:?}");
    }
    assert!(demo::probability_surface("crp_vfa", 0.0, 0.0, 0.0, 0.0, 5).is_err());
    assert!(demo::probability_surface("crp_hgb", 0.0, 0.0, 0.0, 0.0, 1).is_err());
}

#[test]
fn xor_heatmap_finds_the_pair() {
    let v = parse(demo::xor_heatmap(300, 3, 400, 1).unwrap());
    assert_eq!(v["top_pair"], serde_json::json!(["x1", "x2"]));
    assert!(v["held_out_auc"].as_f64().unwrap() > 0.85);
    let mean = v["heatmap"]["mean"].as_array().unwrap();
    assert_eq!(mean.len(), 5);
    assert!(demo::xor_heatmap(5, 3, 400, 1).is_err());
}
