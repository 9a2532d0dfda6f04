//! The classifier boundary.
//!
//! The explainer only ever sees class labels. External models take part by
//! writing a predictions file ([`PredictionMap`]); in-process callers (the
//! perturbation baseline) go through [`ClassifierOracle`]. [`ReferenceNb`] is
//! a multinomial Naive Bayes over concept occurrences that lets the whole
//! pipeline run without an external model.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::concept_space::ConceptInstance;
use crate::error::{Error, Result};
use crate::io::{read_json, read_jsonl, write_json, write_jsonl};

/// A deterministic black-box classifier over concept sets.
pub trait ClassifierOracle {
    /// Ordered class labels; every prediction is one of these.
    fn label_set(&self) -> &[String];

    /// `concepts` is sorted and deduplicated.
    fn predict(&self, concepts: &[String]) -> String;
}

/// Adapts a closure into an oracle. Mostly useful in tests and examples.
pub struct FnOracle<F> {
    labels: Vec<String>,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&[String]) -> String,
{
    pub fn new(labels: Vec<String>, f: F) -> Self {
        FnOracle { labels, f }
    }
}

impl<F> ClassifierOracle for FnOracle<F>
where
    F: Fn(&[String]) -> String,
{
    fn label_set(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, concepts: &[String]) -> String {
        (self.f)(concepts)
    }
}

/// Instance id to black-box label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionMap {
    entries: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct PredictionRecord {
    id: String,
    label: String,
}

impl PredictionMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails if `id` is already present.
    pub fn insert(&mut self, id: impl Into<String>, label: impl Into<String>) -> Result<()> {
        let id = id.into();
        if self.entries.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.entries.insert(id, label.into());
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.entries.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let rows: Vec<PredictionRecord> = self
            .entries
            .iter()
            .map(|(id, label)| PredictionRecord {
                id: id.clone(),
                label: label.clone(),
            })
            .collect();
        write_jsonl(path, &rows)
    }
}

impl FromIterator<(String, String)> for PredictionMap {
    /// Later duplicates overwrite earlier ones; use [`PredictionMap::insert`]
    /// when duplicates must be rejected.
    fn from_iter<T: IntoIterator<Item = (String, String)>>(iter: T) -> Self {
        PredictionMap {
            entries: iter.into_iter().collect(),
        }
    }
}

pub fn load_predictions(path: &Path) -> Result<PredictionMap> {
    let rows: Vec<PredictionRecord> = read_jsonl(path)?;
    let mut map = PredictionMap::new();
    for row in rows {
        map.insert(row.id, row.label)?;
    }
    Ok(map)
}

/// Multinomial Naive Bayes with additive smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceNb {
    pub label_set: Vec<String>,
    pub smoothing_alpha: f64,
    pub vocabulary: Vec<String>,
    pub class_log_priors: BTreeMap<String, f64>,
    pub concept_log_likelihoods: BTreeMap<String, BTreeMap<String, f64>>,
}

pub fn train_reference(instances: &[ConceptInstance], alpha: f64) -> Result<ReferenceNb> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!(
            "smoothing alpha must be positive, got {alpha}"
        )));
    }
    if instances.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut class_sizes: BTreeMap<&str, usize> = BTreeMap::new();
    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    let mut vocabulary: BTreeSet<&str> = BTreeSet::new();
    for inst in instances {
        let label = inst
            .label
            .as_deref()
            .ok_or_else(|| Error::MissingLabel(inst.id.clone()))?;
        *class_sizes.entry(label).or_default() += 1;
        let per_class = counts.entry(label).or_default();
        for c in &inst.concepts {
            *per_class.entry(c.as_str()).or_default() += 1;
            vocabulary.insert(c.as_str());
        }
    }

    let n = instances.len() as f64;
    let v = vocabulary.len() as f64;
    let mut class_log_priors = BTreeMap::new();
    let mut concept_log_likelihoods = BTreeMap::new();
    for (&label, &size) in &class_sizes {
        class_log_priors.insert(label.to_string(), (size as f64).ln() - n.ln());
        let per_class = &counts[label];
        let total: usize = per_class.values().sum();
        let denom = (total as f64 + alpha * v).ln();
        let lik = vocabulary
            .iter()
            .map(|&c| {
                let k = per_class.get(c).copied().unwrap_or(0) as f64;
                (c.to_string(), (k + alpha).ln() - denom)
            })
            .collect();
        concept_log_likelihoods.insert(label.to_string(), lik);
    }

    Ok(ReferenceNb {
        label_set: class_sizes.keys().map(|s| s.to_string()).collect(),
        smoothing_alpha: alpha,
        vocabulary: vocabulary.into_iter().map(str::to_string).collect(),
        class_log_priors,
        concept_log_likelihoods,
    })
}

impl ReferenceNb {
    /// Log-posterior (up to a shared constant) for each label, in label_set order.
    ///
    /// Likelihood terms are summed in ascending order of value, so two classes
    /// whose terms are permutations of each other score bit-identically.
    pub fn log_scores(&self, concepts: &[String]) -> Vec<f64> {
        self.label_set
            .iter()
            .map(|label| {
                let lik = &self.concept_log_likelihoods[label];
                let mut terms: Vec<f64> = concepts
                    .iter()
                    .filter_map(|c| lik.get(c).copied())
                    .collect();
                terms.sort_by(f64::total_cmp);
                self.class_log_priors[label] + terms.into_iter().sum::<f64>()
            })
            .collect()
    }

    pub fn predict_instance(&self, instance: &ConceptInstance) -> &str {
        self.predict_label(&instance.concepts)
    }

    fn predict_label(&self, concepts: &[String]) -> &str {
        let scores = self.log_scores(concepts);
        let mut best = 0;
        for (i, s) in scores.iter().enumerate().skip(1) {
            if *s > scores[best] {
                best = i;
            }
        }
        &self.label_set[best]
    }

    pub fn predict_all(&self, instances: &[ConceptInstance]) -> PredictionMap {
        instances
            .iter()
            .map(|i| (i.id.clone(), self.predict_instance(i).to_string()))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let model: ReferenceNb = read_json(path)?;
        if model.label_set.is_empty() {
            return Err(Error::Invalid("model has an empty label set".into()));
        }
        for label in &model.label_set {
            if !model.class_log_priors.contains_key(label)
                || !model.concept_log_likelihoods.contains_key(label)
            {
                return Err(Error::Invalid(format!(
                    "model is missing parameters for class {label:?}"
                )));
            }
        }
        Ok(model)
    }
}

impl ClassifierOracle for ReferenceNb {
    fn label_set(&self) -> &[String] {
        &self.label_set
    }

    fn predict(&self, concepts: &[String]) -> String {
        self.predict_label(concepts).to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn labeled(id: &str, concepts: &[&str], label: &str) -> ConceptInstance {
        ConceptInstance::new(id, concepts.iter().copied()).with_label(Some(label.into()))
    }

    fn set(concepts: &[&str]) -> Vec<String> {
        concepts.iter().map(|s| s.to_string()).collect()
    }

    fn separable() -> Vec<ConceptInstance> {
        vec![
            labeled("1", &["a"], "X"),
            labeled("2", &["a"], "X"),
            labeled("3", &["c"], "Y"),
            labeled("4", &["c"], "Y"),
        ]
    }

    #[test]
    fn single_class_always_wins() {
        let data = vec![labeled("1", &["a"], "X"), labeled("2", &["b", "c"], "X")];
        let m = train_reference(&data, 1.0).unwrap();
        for q in [&[][..], &["a"], &["z"], &["a", "b", "c"]] {
            assert_eq!(m.predict(&set(q)), "X");
        }
    }

    #[test]
    fn separable_posteriors_match_hand_computation() {
        let m = train_reference(&separable(), 1.0).unwrap();
        // Each class has 2 occurrences over a 2-concept vocabulary:
        // P(own|class) = (2+1)/(2+2) = 3/4, P(other|class) = 1/4, priors 1/2.
        let ln = f64::ln;
        assert!((m.concept_log_likelihoods["X"]["a"] - ln(0.75)).abs() < 1e-15);
        assert!((m.concept_log_likelihoods["X"]["c"] - ln(0.25)).abs() < 1e-15);
        assert!((m.class_log_priors["Y"] - ln(0.5)).abs() < 1e-15);
        let s = m.log_scores(&set(&["a"]));
        assert!((s[0] - (ln(0.5) + ln(0.75))).abs() < 1e-15);
        assert!((s[1] - (ln(0.5) + ln(0.25))).abs() < 1e-15);
        assert_eq!(m.predict(&set(&["a"])), "X");
        assert_eq!(m.predict(&set(&["c"])), "Y");
    }

    #[test]
    fn exact_tie_goes_to_first_label() {
        let m = train_reference(&separable(), 1.0).unwrap();
        // ln(1/2) + ln(3/4) + ln(1/4) for both classes.
        let s = m.log_scores(&set(&["a", "c"]));
        assert_eq!(s[0].to_bits(), s[1].to_bits());
        assert_eq!(m.predict(&set(&["a", "c"])), "X");
    }

    #[test]
    fn empty_input_uses_priors() {
        let mut data = separable();
        data.push(labeled("5", &["c"], "Y"));
        let m = train_reference(&data, 1.0).unwrap();
        assert_eq!(m.predict(&[]), "Y");
        assert_eq!(m.predict(&set(&["unseen"])), "Y");
    }

    #[test]
    fn likelihoods_are_normalized() {
        let data = vec![
            labeled("1", &["a", "b"], "X"),
            labeled("2", &["a", "d"], "X"),
            labeled("3", &["c"], "Y"),
        ];
        let m = train_reference(&data, 0.5).unwrap();
        for lik in m.concept_log_likelihoods.values() {
            let total: f64 = lik.values().map(|l| l.exp()).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
        let priors: f64 = m.class_log_priors.values().map(|l| l.exp()).sum();
        assert!((priors - 1.0).abs() < 1e-9);
    }

    #[test]
    fn training_errors() {
        assert!(matches!(
            train_reference(&separable(), 0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            train_reference(&[], 1.0),
            Err(Error::EmptyDataset)
        ));
        let unlabeled = vec![ConceptInstance::new("u1", ["a"])];
        match train_reference(&unlabeled, 1.0) {
            Err(Error::MissingLabel(id)) => assert_eq!(id, "u1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn model_json_round_trips_exactly() {
        let data = vec![
            labeled("1", &["a", "b"], "X"),
            labeled("2", &["a", "d"], "X"),
            labeled("3", &["c"], "Y"),
        ];
        let m = train_reference(&data, 0.3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        assert_eq!(ReferenceNb::load(&path).unwrap(), m);
    }

    #[test]
    fn prediction_file_parsing() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        let empty = load_predictions(f.path()).unwrap();
        assert!(empty.is_empty());

        writeln!(f, r#"{{"id":"I1","label":"X"}}"#).unwrap();
        writeln!(f, r#"{{"id":"I2","label":"Y"}}"#).unwrap();
        f.flush().unwrap();
        let map = load_predictions(f.path()).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map.get("I2"), Some("Y"));

        writeln!(f, r#"{{"id":"I1","label":"Y"}}"#).unwrap();
        f.flush().unwrap();
        assert!(matches!(
            load_predictions(f.path()),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn malformed_prediction_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"I1","label":"X"}}"#).unwrap();
        writeln!(f, "not json").unwrap();
        f.flush().unwrap();
        match load_predictions(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
