//! Small hand-checkable datasets.

use crate::blackbox::PredictionMap;
use crate::concept_space::ConceptInstance;

/// Six instances over items a, b, c with black-box labels X and Y:
///
/// | id | concepts | label |
/// |----|----------|-------|
/// | I1 | a b      | X     |
/// | I2 | a b      | X     |
/// | I3 | a c      | X     |
/// | I4 | b c      | Y     |
/// | I5 | c        | Y     |
/// | I6 | a c      | Y     |
pub fn toy6() -> (Vec<ConceptInstance>, PredictionMap) {
    let rows: [(&str, &[&str], &str); 6] = [
        ("I1", &["a", "b"], "X"),
        ("I2", &["a", "b"], "X"),
        ("I3", &["a", "c"], "X"),
        ("I4", &["b", "c"], "Y"),
        ("I5", &["c"], "Y"),
        ("I6", &["a", "c"], "Y"),
    ];
    let instances = rows
        .iter()
        .map(|(id, concepts, _)| ConceptInstance::new(*id, concepts.iter().copied()))
        .collect();
    let predictions = rows
        .iter()
        .map(|(id, _, label)| (id.to_string(), label.to_string()))
        .collect();
    (instances, predictions)
}
