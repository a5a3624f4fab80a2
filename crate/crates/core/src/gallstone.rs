//! Column layout of the public gallstone cohort and the roles the model
//! assigns to individual columns.

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, ColumnSpec, MissingPolicy, Schema};
use crate::ode::InteractionInputs;

pub const OUTCOME: &str = "Gallstone Status";

use ColumnKind::{Binary as B, Continuous as C};

/// The 38 predictors in file order.
pub const COLUMNS: [(&str, ColumnKind); 38] = [
    ("Age", C),
    ("Gender", B),
    ("Comorbidity", C),
    ("Coronary Artery Disease (CAD)", B),
    ("Hypothyroidism", B),
    ("Hyperlipidemia", B),
    ("Diabetes Mellitus (DM)", B),
    ("Height", C),
    ("Weight", C),
    ("Body Mass Index (BMI)", C),
    ("Total Body Water (TBW)", C),
    ("Extracellular Water (ECW)", C),
    ("Intracellular Water (ICW)", C),
    ("Extracellular Fluid/Total Body Water (ECF/TBW)", C),
    ("Total Body Fat Ratio (TBFR) (%)", C),
    ("Lean Mass (LM) (%)", C),
    ("Body Protein Content (Protein) (%)", C),
    ("Visceral Fat Rating (VFR)", C),
    ("Bone Mass (BM)", C),
    ("Muscle Mass (MM)", C),
    ("Obesity (%)", C),
    ("Total Fat Content (TFC)", C),
    ("Visceral Fat Area (VFA)", C),
    ("Visceral Muscle Area (VMA) (Kg)", C),
    ("Hepatic Fat Accumulation (HFA)", C),
    ("Glucose", C),
    ("Total Cholesterol (TC)", C),
    ("Low Density Lipoprotein (LDL)", C),
    ("High Density Lipoprotein (HDL)", C),
    ("Triglyceride", C),
    ("Aspartat Aminotransferaz (AST)", C),
    ("Alanin Aminotransferaz (ALT)", C),
    ("Alkaline Phosphatase (ALP)", C),
    ("Creatinine", C),
    ("Glomerular Filtration Rate (GFR)", C),
    ("C-Reactive Protein (CRP)", C),
    ("Hemoglobin (HGB)", C),
    ("Vitamin D", C),
];

pub fn schema() -> Schema {
    Schema {
        outcome: OUTCOME.to_string(),
        positive_value: 1,
        columns: COLUMNS
            .iter()
            .map(|(name, kind)| ColumnSpec {
                name: name.to_string(),
                kind: *kind,
            })
            .collect(),
        missing: MissingPolicy::Drop,
    }
}

/// Which table column plays each clinical role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Roles {
    pub crp: String,
    pub vitd: String,
    pub ecf: String,
    pub bm: String,
    pub hyper: String,
    pub vfa: String,
    pub hgb: String,
    pub dm: String,
    pub cad: String,
}

impl Default for Roles {
    fn default() -> Self {
        Roles {
            crp: "C-Reactive Protein (CRP)".into(),
            vitd: "Vitamin D".into(),
            ecf: "Extracellular Fluid/Total Body Water (ECF/TBW)".into(),
            bm: "Bone Mass (BM)".into(),
            hyper: "Hyperlipidemia".into(),
            vfa: "Visceral Fat Area (VFA)".into(),
            hgb: "Hemoglobin (HGB)".into(),
            dm: "Diabetes Mellitus (DM)".into(),
            cad: "Coronary Artery Disease (CAD)".into(),
        }
    }
}

/// Short labels of the nine main effects, in reporting order.
pub const MAIN_EFFECT_LABELS: [&str; 9] = ["CRP", "VitD", "ECF", "BM", "Hyper", "VFA", "HGB", "DM", "CAD"];

/// Labels of the four interaction covariates, in reporting order.
pub const INTERACTION_LABELS: [&str; 4] = ["ECF x VitD", "CRP x HGB", "VitD x Hyper", "BM x DM"];

impl Roles {
    /// Column names in the order of [`MAIN_EFFECT_LABELS`].
    pub fn main_effects(&self) -> [&str; 9] {
        [
            &self.crp, &self.vitd, &self.ecf, &self.bm, &self.hyper, &self.vfa, &self.hgb, &self.dm, &self.cad,
        ]
    }

    /// Interaction inputs from a row given as the nine main-effect values in
    /// [`MAIN_EFFECT_LABELS`] order.
    pub fn inputs_from_main(main: &[f64]) -> InteractionInputs {
        InteractionInputs {
            crp: main[0],
            vitd: main[1],
            ecf: main[2],
            bm: main[3],
            hyper: main[4],
            hgb: main[6],
            dm: main[7],
        }
    }
}
