//! Ordering constraints derived from what activities require and provide.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::logic::formula::Formula;
use crate::synth::ActivityProfile;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DerivedConstraints {
    pub formulas: Vec<Formula>,
    /// `(activity, datum)` pairs with no producer; the activity can never run.
    pub unproducible: Vec<(String, String)>,
}

/// For every activity `a` and every datum `d` it requires that is not
/// initially available: `!a WU (p1 | ... | pn)` over the producers of `d`.
/// Ordered by `(a, d)`; producers are sorted and folded to the left.
pub fn derive_dataflow_constraints(profiles: &[ActivityProfile], initially: &BTreeSet<String>) -> DerivedConstraints {
    let mut sorted: Vec<&ActivityProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| a.activity_id.cmp(&b.activity_id));
    let mut out = DerivedConstraints { formulas: Vec::new(), unproducible: Vec::new() };
    for a in &sorted {
        for d in a.requires.iter().filter(|d| !initially.contains(*d)) {
            let producers: Vec<&str> = sorted
                .iter()
                .filter(|p| p.activity_id != a.activity_id && p.provides.contains(d))
                .map(|p| p.activity_id.as_str())
                .collect();
            let rhs = producers.iter().map(|p| Formula::atom(*p)).reduce(Formula::or).unwrap_or_else(|| {
                out.unproducible.push((a.activity_id.clone(), d.clone()));
                Formula::falsum()
            });
            out.formulas.push(Formula::weak_until(Formula::not(Formula::atom(a.activity_id.clone())), rhs));
        }
    }
    out
}
