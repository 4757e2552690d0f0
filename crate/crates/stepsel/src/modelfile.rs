//! Tagged JSON container for fitted models.
//!
//! All three fitters serialize into one self-describing document so tooling
//! can load any model, score with it, and (for bootstrap refits) re-run the
//! recipe that produced it.

use serde::{Deserialize, Serialize};

use crate::baselines::{ClogitFit, SplineFit, SplineSettings};
use crate::net::{SsfNetwork, TrainConfig};
use crate::xai::SsfModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDocument {
    Dnn {
        feature_names: Vec<String>,
        network: SsfNetwork,
        /// Training recipe used for the fit; reused by bootstrap refits.
        train: TrainConfig,
    },
    Glm {
        feature_names: Vec<String>,
        fit: ClogitFit,
    },
    Spline {
        feature_names: Vec<String>,
        fit: SplineFit,
        settings: SplineSettings,
    },
}

impl ModelDocument {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelDocument::Dnn { .. } => "dnn",
            ModelDocument::Glm { .. } => "glm",
            ModelDocument::Spline { .. } => "spline",
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            ModelDocument::Dnn { feature_names, .. } => feature_names,
            ModelDocument::Glm { feature_names, .. } => feature_names,
            ModelDocument::Spline { feature_names, .. } => feature_names,
        }
    }

    /// The document as a scoring model.
    pub fn as_model(&self) -> &dyn SsfModel {
        match self {
            ModelDocument::Dnn { network, .. } => network,
            ModelDocument::Glm { fit, .. } => fit,
            ModelDocument::Spline { fit, .. } => fit,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents are serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("bad model JSON: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{fit_clogit_glm, FormulaSpec};
    use crate::net::{build_network, ArchSpec};
    use crate::sim::{simulate_selection, SelectionSpec};

    #[test]
    fn all_kinds_round_trip() {
        let spec = SelectionSpec::linear(vec![0.8], 80, 4);
        let d = simulate_selection(&spec, 91).unwrap();

        let glm = fit_clogit_glm(&d, &FormulaSpec::mains(1)).unwrap();
        let doc = ModelDocument::Glm { feature_names: d.feature_names.clone(), fit: glm };
        let back = ModelDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(doc, back);
        assert_eq!(back.kind(), "glm");

        let net = build_network(&ArchSpec::mlp(1, vec![4]), 92).unwrap();
        let doc = ModelDocument::Dnn {
            feature_names: d.feature_names.clone(),
            network: net,
            train: TrainConfig::default(),
        };
        let back = ModelDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(doc, back);
        // Scoring goes through the trait object.
        assert!(back.as_model().score(&[0.1], None, None).unwrap().is_finite());

        assert!(ModelDocument::from_json("{\"kind\": \"nope\"}").is_err());
    }
}
