//! First-order interaction ODEs, their pointwise right-hand sides (used as
//! regression covariates), an RK4 integrator and closed-form solutions.
//!
//! | id          | state | driver | rhs                     |
//! |-------------|-------|--------|-------------------------|
//! | `EcfVitd`   | ECF   | VitD   | `ECF * ln(1 + VitD)`    |
//! | `CrpHgb`    | CRP   | HGB    | `CRP / (1 + HGB)`       |
//! | `HyperVitd` | Hyper | VitD   | `-2 * VitD * Hyper`     |
//! | `DmBm`      | DM    | BM     | `BM^2 * DM`             |

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integration aborts once the state leaves `[-OVERFLOW_GUARD, OVERFLOW_GUARD]`.
pub const OVERFLOW_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OdeSpec {
    EcfVitd,
    CrpHgb,
    HyperVitd,
    DmBm,
}

impl OdeSpec {
    pub const ALL: [OdeSpec; 4] = [OdeSpec::EcfVitd, OdeSpec::CrpHgb, OdeSpec::HyperVitd, OdeSpec::DmBm];

    pub fn state_name(self) -> &'static str {
        match self {
            OdeSpec::EcfVitd => "ECF",
            OdeSpec::CrpHgb => "CRP",
            OdeSpec::HyperVitd => "Hyper",
            OdeSpec::DmBm => "DM",
        }
    }

    pub fn driver_name(self) -> &'static str {
        match self {
            OdeSpec::EcfVitd | OdeSpec::HyperVitd => "VitD",
            OdeSpec::CrpHgb => "HGB",
            OdeSpec::DmBm => "BM",
        }
    }

    /// Short label used for file names and covariate names.
    pub fn label(self) -> &'static str {
        match self {
            OdeSpec::EcfVitd => "ECF x VitD",
            OdeSpec::CrpHgb => "CRP x HGB",
            OdeSpec::HyperVitd => "VitD x Hyper",
            OdeSpec::DmBm => "BM x DM",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            OdeSpec::EcfVitd => "ecf_vitd",
            OdeSpec::CrpHgb => "crp_hgb",
            OdeSpec::HyperVitd => "hyper_vitd",
            OdeSpec::DmBm => "dm_bm",
        }
    }

    pub fn from_slug(s: &str) -> Option<OdeSpec> {
        OdeSpec::ALL.into_iter().find(|o| o.slug() == s)
    }

    fn check_driver(self, driver: f64) -> Result<()> {
        if !driver.is_finite() {
            return Err(Error::Domain(format!("{} driver is not finite", self.driver_name())));
        }
        match self {
            OdeSpec::EcfVitd | OdeSpec::CrpHgb if driver <= -1.0 => Err(Error::Domain(format!(
                "{} = {driver} must exceed -1",
                self.driver_name()
            ))),
            _ => Ok(()),
        }
    }
}

/// Right-hand side `d(state)/d(driver)`.
pub fn rhs_eval(spec: OdeSpec, state: f64, driver: f64) -> Result<f64> {
    spec.check_driver(driver)?;
    Ok(rhs_unchecked(spec, state, driver))
}

fn rhs_unchecked(spec: OdeSpec, state: f64, driver: f64) -> f64 {
    match spec {
        OdeSpec::EcfVitd => state * driver.ln_1p(),
        OdeSpec::CrpHgb => state / (1.0 + driver),
        OdeSpec::HyperVitd => -2.0 * driver * state,
        OdeSpec::DmBm => driver * driver * state,
    }
}

/// Exact solution through `(x0, y0)` obtained by separating variables.
pub fn closed_form(spec: OdeSpec, y0: f64, x0: f64, x: f64) -> Result<f64> {
    spec.check_driver(x0)?;
    spec.check_driver(x)?;
    let g = |v: f64| (1.0 + v) * v.ln_1p() - v;
    Ok(match spec {
        OdeSpec::EcfVitd => y0 * (g(x) - g(x0)).exp(),
        OdeSpec::CrpHgb => y0 * (1.0 + x) / (1.0 + x0),
        OdeSpec::HyperVitd => y0 * (-(x * x - x0 * x0)).exp(),
        OdeSpec::DmBm => y0 * ((x.powi(3) - x0.powi(3)) / 3.0).exp(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub spec: OdeSpec,
    pub driver_grid: Vec<f64>,
    pub state_values: Vec<f64>,
    pub step: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> f64 {
        *self.state_values.last().expect("trajectory has at least one point")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([self.spec.driver_name(), self.spec.state_name()])?;
        for (x, y) in self.driver_grid.iter().zip(&self.state_values) {
            w.write_record([x.to_string(), y.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Classical fourth-order Runge-Kutta on a uniform grid from `x0` to `x1`;
/// the last step is shortened to land exactly on `x1`.
pub fn rk4_integrate(spec: OdeSpec, y0: f64, x0: f64, x1: f64, step: f64) -> Result<Trajectory> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be > 0, got {step}")));
    }
    if !(x1 > x0) {
        return Err(Error::InvalidArgument(format!("need x1 > x0, got [{x0}, {x1}]")));
    }
    if !y0.is_finite() {
        return Err(Error::InvalidArgument("initial state is not finite".into()));
    }
    // Drivers are monotone over the interval, so checking the left end covers it.
    spec.check_driver(x0)?;
    spec.check_driver(x1)?;
    let full_steps = ((x1 - x0) / step).floor() as usize;
    let mut grid = Vec::with_capacity(full_steps + 2);
    let mut states = Vec::with_capacity(full_steps + 2);
    let f = |x: f64, y: f64| rhs_unchecked(spec, y, x);
    let mut y = y0;
    grid.push(x0);
    states.push(y0);
    let mut i = 0usize;
    loop {
        let x = x0 + i as f64 * step;
        let remaining = x1 - x;
        if remaining <= step * 1e-9 {
            break;
        }
        let h = remaining.min(step);
        let k1 = f(x, y);
        let k2 = f(x + h / 2.0, y + h / 2.0 * k1);
        let k3 = f(x + h / 2.0, y + h / 2.0 * k2);
        let k4 = f(x + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let x_next = if h < step { x1 } else { x0 + (i + 1) as f64 * step };
        if !y.is_finite() || y.abs() > OVERFLOW_GUARD {
            return Err(Error::Numerical(format!(
                "{} trajectory left the finite range at {} = {x_next} (state {y})",
                spec.state_name(),
                spec.driver_name()
            )));
        }
        grid.push(x_next);
        states.push(y);
        i += 1;
        if h < step {
            break;
        }
    }
    // Snap the final abscissa.
    if let Some(last) = grid.last_mut() {
        *last = x1;
    }
    Ok(Trajectory {
        spec,
        driver_grid: grid,
        state_values: states,
        step,
    })
}

/// Raw clinical values feeding the interaction covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionInputs {
    pub ecf: f64,
    pub vitd: f64,
    pub crp: f64,
    pub hgb: f64,
    pub hyper: f64,
    pub bm: f64,
    pub dm: f64,
}

/// ODE right-hand sides evaluated at one subject's values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionFeatures {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

impl InteractionFeatures {
    pub fn get(&self, spec: OdeSpec) -> f64 {
        match spec {
            OdeSpec::EcfVitd => self.f1,
            OdeSpec::CrpHgb => self.f2,
            OdeSpec::HyperVitd => self.f3,
            OdeSpec::DmBm => self.f4,
        }
    }
}

pub fn interaction_features(row: &InteractionInputs) -> Result<InteractionFeatures> {
    let fields = [
        ("ECF", row.ecf),
        ("VitD", row.vitd),
        ("CRP", row.crp),
        ("HGB", row.hgb),
        ("Hyper", row.hyper),
        ("BM", row.bm),
        ("DM", row.dm),
    ];
    if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Domain(format!("{name} = {v} is not finite")));
    }
    if row.vitd < 0.0 {
        return Err(Error::Domain(format!("VitD = {} is negative", row.vitd)));
    }
    if row.hgb < 0.0 {
        return Err(Error::Domain(format!("HGB = {} is negative", row.hgb)));
    }
    Ok(InteractionFeatures {
        f1: rhs_unchecked(OdeSpec::EcfVitd, row.ecf, row.vitd),
        f2: rhs_unchecked(OdeSpec::CrpHgb, row.crp, row.hgb),
        f3: rhs_unchecked(OdeSpec::HyperVitd, row.hyper, row.vitd),
        f4: rhs_unchecked(OdeSpec::DmBm, row.dm, row.bm),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationRange {
    pub y0: f64,
    pub x0: f64,
    pub x1: f64,
    pub step: f64,
}

/// Per-equation initial value and driver range for trajectory simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub ecf_vitd: SimulationRange,
    pub crp_hgb: SimulationRange,
    pub hyper_vitd: SimulationRange,
    pub dm_bm: SimulationRange,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let r = |x1| SimulationRange {
            y0: 1.0,
            x0: 0.0,
            x1,
            step: 1e-3,
        };
        SimulationConfig {
            ecf_vitd: r(3.0),
            crp_hgb: r(3.0),
            hyper_vitd: r(3.0),
            dm_bm: r(1.5),
        }
    }
}

impl SimulationConfig {
    pub fn range(&self, spec: OdeSpec) -> SimulationRange {
        match spec {
            OdeSpec::EcfVitd => self.ecf_vitd,
            OdeSpec::CrpHgb => self.crp_hgb,
            OdeSpec::HyperVitd => self.hyper_vitd,
            OdeSpec::DmBm => self.dm_bm,
        }
    }
}

/// Integrates all four equations over their configured ranges.
pub fn simulate_all(config: &SimulationConfig) -> Result<Vec<Trajectory>> {
    OdeSpec::ALL
        .iter()
        .map(|&spec| {
            let r = config.range(spec);
            rk4_integrate(spec, r.y0, r.x0, r.x1, r.step)
        })
        .collect()
}

/// Writes one `<slug>.csv` per trajectory plus a combined JSON document.
pub fn write_trajectories(trajectories: &[Trajectory], dir: &Path, json_name: &str) -> Result<Vec<String>> {
    let mut written = Vec::new();
    for t in trajectories {
        let name = format!("trajectory_{}.csv", t.spec.slug());
        t.write_csv(&dir.join(&name))?;
        written.push(name);
    }
    let path = dir.join(json_name);
    let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(&mut f, trajectories)?;
    f.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    written.push(json_name.to_string());
    Ok(written)
}
