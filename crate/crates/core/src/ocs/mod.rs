//! The bundled conference-management example: its library, fixture data and
//! deterministic activity stubs.

mod stubs;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::library::{GraphLibrary, LibraryDocument};
use crate::synth::SynthesisSpec;

pub use stubs::register_stub_activities;

const LIBRARY_FILES: &[&str] = &[
    include_str!("../../corpus/ocs/library/00-declarations.json"),
    include_str!("../../corpus/ocs/library/10-conference-flow.json"),
    include_str!("../../corpus/ocs/library/11-register-to-conference.json"),
    include_str!("../../corpus/ocs/library/12-CreditCardPayment.json"),
    include_str!("../../corpus/ocs/library/13-InvoicePayment.json"),
    include_str!("../../corpus/ocs/library/14-prepare-proceedings.json"),
    include_str!("../../corpus/ocs/library/15-simple-proceedings-validation.json"),
    include_str!("../../corpus/ocs/library/16-loose-proceedings-validation.json"),
    include_str!("../../corpus/ocs/library/17-validate-payment.json"),
    include_str!("../../corpus/ocs/library/18-validate-payment-flight-hotel.json"),
];

const DEFAULT_FIXTURES: &str = include_str!("../../corpus/ocs/fixtures/default.json");

/// The example library as shipped in `corpus/ocs/library`.
pub fn library() -> GraphLibrary {
    let mut doc = LibraryDocument::default();
    for text in LIBRARY_FILES {
        doc.merge(LibraryDocument::from_json(text).expect("bundled corpus parses")).expect("bundled corpus merges");
    }
    GraphLibrary::from_document(doc).expect("bundled corpus validates")
}

/// The synthesis spec on the loose edge of `loose-proceedings-validation`.
pub fn validation_spec(lib: &GraphLibrary) -> SynthesisSpec {
    use crate::library::Catalog;
    let g = lib.service("loose-proceedings-validation").expect("corpus graph present");
    g.loose_edges[0].spec.clone()
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct UserRecord {
    pub registered: bool,
    pub paid: bool,
    pub flight_booked: bool,
    pub hotel_booked: bool,
    pub card_valid: bool,
    pub payment_preference: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ProceedingsRecord {
    pub papers: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PaperRecord {
    pub authors: Vec<String>,
    pub final_version: bool,
    pub sources: bool,
    pub compiles: bool,
    pub margins_ok: bool,
    pub plagiarism: bool,
    pub copyright_form: bool,
}

/// Backing data for the stubs, keyed by record id.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct Fixtures {
    pub users: BTreeMap<String, UserRecord>,
    pub proceedings: BTreeMap<String, ProceedingsRecord>,
    pub papers: BTreeMap<String, PaperRecord>,
}

impl Fixtures {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn default_set() -> Self {
        Self::from_json(DEFAULT_FIXTURES).expect("bundled fixtures parse")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::check_library;

    #[test]
    fn corpus_loads_and_checks() {
        let lib = library();
        assert_eq!(lib.services().count(), 9);
        assert!(check_library(&lib).is_empty(), "{:?}", check_library(&lib));
        let f = Fixtures::default_set();
        assert_eq!(f.proceedings["ocs-2012"].papers.len(), 2);
        assert!(!f.papers["paper-2"].sources);
    }
}
