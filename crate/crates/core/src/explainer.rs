//! Instance-wise and class-wise explanations from a mined [`ItemsetStore`].
//!
//! An instance is explained by collecting, from every class, the stored
//! itemsets it contains. Each class scores the sum of its matched
//! confidences and the highest score wins. Score ties go to the class the
//! black-box predicted more often on the mining set, then to the smaller
//! label; when nothing matches, the most frequent class is the fallback.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blackbox::PredictionMap;
use crate::concept_space::ConceptInstance;
use crate::error::{Error, Result};
use crate::miner::{ConfidentItemset, Itemset, ItemsetStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedItemset {
    pub items: Itemset,
    pub confidence: f64,
}

impl From<&ConfidentItemset> for MatchedItemset {
    fn from(ci: &ConfidentItemset) -> Self {
        MatchedItemset {
            items: ci.items.clone(),
            confidence: ci.confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub instance_id: String,
    pub assigned_label: String,
    pub fallback_used: bool,
    pub class_scores: BTreeMap<String, f64>,
    pub matched: BTreeMap<String, Vec<MatchedItemset>>,
}

/// Per class, the stored itemsets contained in `instance`, in store order.
pub fn match_itemsets<'s>(
    instance: &ConceptInstance,
    store: &'s ItemsetStore,
) -> BTreeMap<String, Vec<&'s ConfidentItemset>> {
    store
        .classes()
        .map(|class| {
            let hits = store
                .per_class
                .get(class)
                .into_iter()
                .flatten()
                .filter(|ci| ci.items.is_subset_of(&instance.concepts))
                .collect();
            (class.to_string(), hits)
        })
        .collect()
}

/// Sum of matched confidences per class; classes without matches score 0.
pub fn score(matched: &BTreeMap<String, Vec<&ConfidentItemset>>) -> BTreeMap<String, f64> {
    matched
        .iter()
        .map(|(class, hits)| (class.clone(), hits.iter().map(|ci| ci.confidence).sum()))
        .collect()
}

/// Argmax with the frequency / lexicographic tie-break chain and the
/// most-frequent-class fallback when no score is positive.
///
/// Returns `None` only when `frequencies` is empty.
pub fn pick_label(
    scores: &BTreeMap<String, f64>,
    frequencies: &BTreeMap<String, usize>,
) -> Option<(String, bool)> {
    let freq = |class: &str| frequencies.get(class).copied().unwrap_or(0);
    let best_by_freq = |candidates: &mut dyn Iterator<Item = &str>| -> Option<String> {
        let mut best: Option<&str> = None;
        for class in candidates {
            // BTreeMap order is lexicographic, so strict > keeps the smaller label.
            if best.is_none_or(|b| freq(class) > freq(b)) {
                best = Some(class);
            }
        }
        best.map(str::to_string)
    };

    let top = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if top > 0.0 {
        let mut tied = scores
            .iter()
            .filter(|(_, &s)| s == top)
            .map(|(c, _)| c.as_str());
        return best_by_freq(&mut tied).map(|c| (c, false));
    }
    let mut all = frequencies.keys().map(String::as_str);
    best_by_freq(&mut all).map(|c| (c, true))
}

pub fn assign_label(scores: &BTreeMap<String, f64>, store: &ItemsetStore) -> (String, bool) {
    pick_label(scores, &store.class_instance_counts)
        .expect("a validated store has at least one class")
}

pub fn explain(instance: &ConceptInstance, store: &ItemsetStore) -> Explanation {
    let matched = match_itemsets(instance, store);
    let class_scores = score(&matched);
    let (assigned_label, fallback_used) = assign_label(&class_scores, store);
    Explanation {
        instance_id: instance.id.clone(),
        assigned_label,
        fallback_used,
        class_scores,
        matched: matched
            .into_iter()
            .map(|(class, hits)| (class, hits.into_iter().map(Into::into).collect()))
            .collect(),
    }
}

/// Explains every instance; output order follows input order.
pub fn explain_all(instances: &[ConceptInstance], store: &ItemsetStore) -> Vec<Explanation> {
    instances.par_iter().map(|i| explain(i, store)).collect()
}

/// Assigned labels keyed by instance id.
pub fn label_map(explanations: &[Explanation]) -> PredictionMap {
    explanations
        .iter()
        .map(|e| (e.instance_id.clone(), e.assigned_label.clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassExplanation {
    pub class_label: String,
    pub itemsets: Vec<ConfidentItemset>,
}

/// The first `n` itemsets of each class under the store's canonical order.
pub fn class_wise(store: &ItemsetStore, n: usize) -> Result<Vec<ClassExplanation>> {
    if n == 0 {
        return Err(Error::Config("class-wise budget must be at least 1".into()));
    }
    Ok(store
        .per_class
        .iter()
        .map(|(class, list)| ClassExplanation {
            class_label: class.clone(),
            itemsets: list.iter().take(n).cloned().collect(),
        })
        .collect())
}

/// A copy of `store` holding only the top-`n` itemsets of each class.
pub fn restrict(store: &ItemsetStore, n: usize) -> Result<ItemsetStore> {
    let per_class = class_wise(store, n)?
        .into_iter()
        .map(|ce| (ce.class_label, ce.itemsets))
        .collect();
    Ok(ItemsetStore {
        per_class,
        ..store.clone()
    })
}

fn format_confidence(c: f64) -> String {
    format!("{:?}", (c * 100.0).round() / 100.0)
}

fn format_itemset(items: &Itemset, names: &BTreeMap<String, String>) -> String {
    let parts: Vec<&str> = items
        .items()
        .iter()
        .map(|id| names.get(id).map_or(id.as_str(), String::as_str))
        .collect();
    format!("<{}>", parts.join(", "))
}

/// Plain-text block: sample id, predicted class, then the winning class's
/// matched itemsets with confidences (two decimals).
pub fn render(explanation: &Explanation, names: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Sample: {}", explanation.instance_id);
    let hits = explanation
        .matched
        .get(&explanation.assigned_label)
        .filter(|h| !h.is_empty() && !explanation.fallback_used);
    match hits {
        None => {
            let _ = writeln!(
                out,
                "Predicted class: {} (fallback: most frequent class)",
                explanation.assigned_label
            );
            let _ = writeln!(out, "Explanation: no matched itemsets");
        }
        Some(hits) => {
            let _ = writeln!(out, "Predicted class: {}", explanation.assigned_label);
            let _ = writeln!(out, "Explanation:");
            let mut hits: Vec<&MatchedItemset> = hits.iter().collect();
            hits.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
            for m in hits {
                let _ = writeln!(
                    out,
                    "  {} {}",
                    format_itemset(&m.items, names),
                    format_confidence(m.confidence)
                );
            }
        }
    }
    out
}

/// Rendered blocks separated by blank lines.
pub fn render_report(explanations: &[Explanation], names: &BTreeMap<String, String>) -> String {
    explanations
        .iter()
        .map(|e| render(e, names))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::toy6;
    use crate::miner::{mine, MinerConfig};

    fn store(min_conf: f64) -> ItemsetStore {
        let (instances, predictions) = toy6();
        let config = MinerConfig {
            min_conf,
            ..MinerConfig::default()
        };
        mine(&instances, &predictions, &config).unwrap()
    }

    fn inst(concepts: &[&str]) -> ConceptInstance {
        ConceptInstance::new("q", concepts.iter().copied())
    }

    fn scores(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(c, s)| (c.to_string(), *s)).collect()
    }

    #[test]
    fn matches_for_ab() {
        let s = store(0.7);
        let m = match_itemsets(&inst(&["a", "b"]), &s);
        assert_eq!(m["X"].len(), 1);
        assert_eq!(m["X"][0].items.items(), ["a"]);
        assert_eq!(m["X"][0].confidence, 0.75);
        assert!(m["Y"].is_empty());
    }

    #[test]
    fn empty_and_universal_instances() {
        let s = store(0.6);
        assert!(match_itemsets(&inst(&[]), &s).values().all(Vec::is_empty));
        let all = match_itemsets(&inst(&["a", "b", "c"]), &s);
        let total: usize = all.values().map(Vec::len).sum();
        assert_eq!(total, s.len());
    }

    #[test]
    fn scores_sum_matches() {
        let s = store(0.7);
        assert_eq!(
            score(&match_itemsets(&inst(&["a", "b"]), &s)),
            scores(&[("X", 0.75), ("Y", 0.0)])
        );
        assert_eq!(
            score(&match_itemsets(&inst(&["a", "c"]), &s)),
            scores(&[("X", 0.75), ("Y", 0.75)])
        );
        assert_eq!(
            score(&match_itemsets(&inst(&["zzz"]), &s)),
            scores(&[("X", 0.0), ("Y", 0.0)])
        );
    }

    #[test]
    fn label_assignment_chain() {
        let s = store(0.7);
        assert_eq!(
            assign_label(&scores(&[("X", 0.75), ("Y", 0.0)]), &s),
            ("X".to_string(), false)
        );
        assert_eq!(
            assign_label(&scores(&[("X", 0.75), ("Y", 0.75)]), &s),
            ("X".to_string(), false)
        );
        assert_eq!(
            assign_label(&scores(&[("X", 0.0), ("Y", 0.0)]), &s),
            ("X".to_string(), true)
        );
    }

    #[test]
    fn frequency_breaks_score_ties() {
        let freq: BTreeMap<String, usize> = [
            ("A".to_string(), 2),
            ("B".to_string(), 5),
            ("C".to_string(), 5),
        ]
        .into();
        let tied = scores(&[("A", 1.0), ("B", 1.0), ("C", 1.0)]);
        assert_eq!(pick_label(&tied, &freq), Some(("B".into(), false)));
        let zero = scores(&[("A", 0.0), ("B", 0.0), ("C", 0.0)]);
        assert_eq!(pick_label(&zero, &freq), Some(("B".into(), true)));
        let lone = scores(&[("A", 0.5), ("B", 0.2), ("C", 0.0)]);
        assert_eq!(pick_label(&lone, &freq), Some(("A".into(), false)));
    }

    #[test]
    fn explain_toy6_instances() {
        let s = store(0.7);
        let e = explain(&ConceptInstance::new("I4", ["b", "c"]), &s);
        assert_eq!(e.assigned_label, "Y");
        assert!(!e.fallback_used);
        assert_eq!(e.class_scores, scores(&[("X", 0.0), ("Y", 0.75)]));
        assert_eq!(e.matched["Y"].len(), 1);
        assert_eq!(e.matched["Y"][0].items.items(), ["c"]);

        let e = explain(&inst(&["b"]), &s);
        assert_eq!(e.assigned_label, "X");
        assert!(e.fallback_used);
    }

    #[test]
    fn empty_store_falls_back() {
        let s = store(1.5);
        assert!(s.is_empty());
        let e = explain(&inst(&["a", "b", "c"]), &s);
        assert!(e.fallback_used);
        assert_eq!(e.assigned_label, "X");
    }

    #[test]
    fn class_wise_top_n() {
        let s = store(0.7);
        let cw = class_wise(&s, 1).unwrap();
        assert_eq!(cw[0].class_label, "X");
        assert_eq!(cw[0].itemsets[0].items.items(), ["a"]);
        assert_eq!(cw[1].itemsets[0].items.items(), ["c"]);

        let s6 = store(0.6);
        let cw = class_wise(&s6, 1).unwrap();
        assert_eq!(cw[0].itemsets.len(), 1);
        assert_eq!(cw[0].itemsets[0].items.items(), ["a", "b"]);
        assert_eq!(cw[0].itemsets[0].confidence, 1.0);
        assert_eq!(cw[1].itemsets[0].items.items(), ["c"]);

        assert_eq!(restrict(&s6, 100).unwrap(), s6);
        assert!(class_wise(&s6, 0).is_err());
    }

    #[test]
    fn render_winning_class() {
        let s = store(0.7);
        let e = explain(&ConceptInstance::new("I4", ["b", "c"]), &s);
        let text = render(&e, &BTreeMap::new());
        assert!(text.contains("Sample: I4"));
        assert!(text.contains("Predicted class: Y"));
        assert!(text.contains("<c> 0.75"));

        let names = [("c".to_string(), "Cardiovascular morbidity".to_string())].into();
        assert!(render(&e, &names).contains("<Cardiovascular morbidity> 0.75"));
    }

    #[test]
    fn render_fallback() {
        let s = store(0.7);
        let e = explain(&inst(&["b"]), &s);
        let text = render(&e, &BTreeMap::new());
        assert!(text.contains("no matched itemsets"));
        assert!(text.contains("Predicted class: X"));
    }

    #[test]
    fn confidence_formatting() {
        assert_eq!(format_confidence(1.0), "1.0");
        assert_eq!(format_confidence(0.79), "0.79");
        assert_eq!(format_confidence(2.0 / 3.0), "0.67");
    }
}
