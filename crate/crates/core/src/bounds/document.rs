//! Text serialization of [`AffineBoundForm`].
//!
//! ```json
//! {
//!   "layout": ["y_x", "y_xp", "x_y", "x_yp", "xp_y", "xp_yp"],
//!   "upper_terms": [{"coeffs": [1, 0, 0, 0, 0, 0], "offset": 0}],
//!   "lower_terms": [{"coeffs": [0, 0, 0, 0, 0, 0], "offset": 0}],
//!   "denominator": "one"
//! }
//! ```
//!
//! `denominator` is either `"one"` or the name of a layout symbol. JSON and
//! TOML are both accepted; files are dispatched on their extension.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AffineBoundForm, AffineTerm, Denominator};
use crate::error::{Error, Result};
use crate::theta::ThetaLayout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDocument {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormDocument {
    pub layout: Vec<String>,
    pub upper_terms: Vec<TermDocument>,
    pub lower_terms: Vec<TermDocument>,
    pub denominator: String,
}

impl TryFrom<FormDocument> for AffineBoundForm {
    type Error = Error;

    fn try_from(doc: FormDocument) -> Result<Self> {
        let layout = Arc::new(ThetaLayout::new(&doc.layout)?);
        let denominator = match doc.denominator.as_str() {
            "one" => Denominator::One,
            symbol => Denominator::Component(layout.require(symbol)?),
        };
        let terms = |ts: Vec<TermDocument>| {
            ts.into_iter()
                .map(|t| AffineTerm {
                    coeffs: t.coeffs,
                    offset: t.offset,
                })
                .collect()
        };
        AffineBoundForm::new(layout, terms(doc.upper_terms), terms(doc.lower_terms), denominator)
    }
}

impl From<AffineBoundForm> for FormDocument {
    fn from(form: AffineBoundForm) -> Self {
        let terms = |ts: &[AffineTerm]| {
            ts.iter()
                .map(|t| TermDocument {
                    coeffs: t.coeffs.clone(),
                    offset: t.offset,
                })
                .collect()
        };
        FormDocument {
            layout: form.layout().symbols().to_vec(),
            upper_terms: terms(form.terms(super::Endpoint::Upper)),
            lower_terms: terms(form.terms(super::Endpoint::Lower)),
            denominator: match form.denominator() {
                Denominator::One => "one".to_owned(),
                Denominator::Component(k) => form.layout().symbol(k).to_owned(),
            },
        }
    }
}

impl AffineBoundForm {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forms always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            _ => Self::from_json(&text),
        }
    }
}
