//! Perturbation-based local linear explanations over concept sets.
//!
//! For one instance, random subsets of its concepts are sent to the oracle and
//! a weighted ridge regression is fitted from "which concepts were kept" to
//! "did the oracle still say `target_class`". Samples closer to the original
//! instance weigh more: `w = exp(-d^2 / width^2)` with `d` the dropped fraction.
//! The intercept is not penalized.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::blackbox::{ClassifierOracle, PredictionMap};
use crate::concept_space::ConceptInstance;
use crate::error::{Error, Result};
use crate::explainer::pick_label;
use crate::miner::discretize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbParams {
    pub num_samples: usize,
    pub kernel_width: f64,
    pub ridge_lambda: f64,
    pub seed: u64,
}

impl Default for PerturbParams {
    fn default() -> Self {
        PerturbParams {
            num_samples: 500,
            kernel_width: 0.75,
            ridge_lambda: 1.0,
            seed: 42,
        }
    }
}

impl PerturbParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples < 10 {
            return Err(Error::Config(format!(
                "num_samples must be at least 10, got {}",
                self.num_samples
            )));
        }
        if !(self.kernel_width > 0.0 && self.kernel_width.is_finite()) {
            return Err(Error::Config(format!(
                "kernel_width must be positive, got {}",
                self.kernel_width
            )));
        }
        if !(self.ridge_lambda > 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::Config(format!(
                "ridge_lambda must be positive, got {}",
                self.ridge_lambda
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalLinearModel {
    pub target_class: String,
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
    pub kernel_width: f64,
    pub ridge_lambda: f64,
    pub num_samples: usize,
    pub seed: u64,
}

/// Per-fit random stream keyed by the global seed and the instance id, so
/// fits agree regardless of scheduling.
fn instance_rng(seed: u64, instance_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(instance_id.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Solves `(X^T W X + P) beta = X^T W y` where `P` is `lambda` on the
/// diagonal except for column 0 (the intercept).
pub fn weighted_ridge(
    design: &DMatrix<f64>,
    targets: &DVector<f64>,
    weights: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    let weighted = DMatrix::from_fn(design.nrows(), design.ncols(), |r, c| {
        design[(r, c)] * weights[r]
    });
    let mut normal = weighted.transpose() * design;
    for j in 1..normal.ncols() {
        normal[(j, j)] += lambda;
    }
    let rhs = weighted.transpose() * targets;
    normal
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .ok_or(Error::Singular)
}

pub fn perturb_fit<O: ClassifierOracle + ?Sized>(
    instance: &ConceptInstance,
    oracle: &O,
    target_class: &str,
    params: &PerturbParams,
) -> Result<LocalLinearModel> {
    params.validate()?;
    if instance.concepts.is_empty() {
        return Err(Error::Invalid(format!(
            "instance {:?} has no concepts to perturb",
            instance.id
        )));
    }
    if !oracle.label_set().iter().any(|l| l == target_class) {
        return Err(Error::UnknownClass(target_class.to_string()));
    }

    let p = instance.concepts.len();
    let mut rng = instance_rng(params.seed, &instance.id);
    let mut design = DMatrix::zeros(params.num_samples, p + 1);
    let mut targets = DVector::zeros(params.num_samples);
    let mut weights = DVector::zeros(params.num_samples);
    let mut kept = Vec::with_capacity(p);
    for row in 0..params.num_samples {
        kept.clear();
        design[(row, 0)] = 1.0;
        for (j, concept) in instance.concepts.iter().enumerate() {
            // Row 0 is the unperturbed instance.
            if row == 0 || rng.gen_bool(0.5) {
                design[(row, j + 1)] = 1.0;
                kept.push(concept.clone());
            }
        }
        if oracle.predict(&kept) == target_class {
            targets[row] = 1.0;
        }
        let d = 1.0 - kept.len() as f64 / p as f64;
        weights[row] = (-(d * d) / (params.kernel_width * params.kernel_width)).exp();
    }

    let beta = weighted_ridge(&design, &targets, &weights, params.ridge_lambda)?;
    Ok(LocalLinearModel {
        target_class: target_class.to_string(),
        intercept: beta[0],
        coefficients: instance
            .concepts
            .iter()
            .enumerate()
            .map(|(j, c)| (c.clone(), beta[j + 1]))
            .collect(),
        kernel_width: params.kernel_width,
        ridge_lambda: params.ridge_lambda,
        num_samples: params.num_samples,
        seed: params.seed,
    })
}

/// Every concept seen in the class's instances, ranked by its mean local
/// coefficient (descending, ties by concept id). Instances without concepts
/// are skipped.
pub fn rank_concepts<O: ClassifierOracle + Sync + ?Sized>(
    instances: &[ConceptInstance],
    oracle: &O,
    class_label: &str,
    params: &PerturbParams,
) -> Result<Vec<(String, f64)>> {
    if instances.is_empty() {
        return Err(Error::Invalid(format!(
            "class {class_label:?} has no instances"
        )));
    }
    let fits = instances
        .par_iter()
        .filter(|i| !i.concepts.is_empty())
        .map(|i| perturb_fit(i, oracle, class_label, params))
        .collect::<Result<Vec<_>>>()?;

    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for fit in &fits {
        for (concept, coef) in &fit.coefficients {
            let entry = sums.entry(concept.as_str()).or_default();
            entry.0 += coef;
            entry.1 += 1;
        }
    }
    let mut ranked: Vec<(String, f64)> = sums
        .into_iter()
        .map(|(c, (sum, k))| (c.to_string(), sum / k as f64))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Full concept rankings for every class, each computed over the reference
/// instances the black-box assigned to that class.
pub fn rank_by_class<O: ClassifierOracle + Sync + ?Sized>(
    reference: &[ConceptInstance],
    predictions: &PredictionMap,
    oracle: &O,
    params: &PerturbParams,
) -> Result<LinearClassWise> {
    params.validate()?;
    let mut ranked = LinearClassWise::new();
    for subspace in discretize(reference, predictions)? {
        let members: Vec<ConceptInstance> = reference
            .iter()
            .filter(|i| subspace.instance_ids.binary_search(&i.id).is_ok())
            .cloned()
            .collect();
        let list = rank_concepts(&members, oracle, &subspace.class_label, params)?;
        ranked.insert(subspace.class_label, list);
    }
    Ok(ranked)
}

/// Top-`n` concepts of a class by mean local coefficient.
pub fn class_wise_linear<O: ClassifierOracle + Sync + ?Sized>(
    instances: &[ConceptInstance],
    oracle: &O,
    class_label: &str,
    n: usize,
    params: &PerturbParams,
) -> Result<Vec<(String, f64)>> {
    if n == 0 {
        return Err(Error::Config("class-wise budget must be at least 1".into()));
    }
    let mut ranked = rank_concepts(instances, oracle, class_label, params)?;
    ranked.truncate(n);
    Ok(ranked)
}

/// Per-class selected concepts with their aggregate coefficients.
pub type LinearClassWise = BTreeMap<String, Vec<(String, f64)>>;

/// Scores each class by the summed aggregates of its selected concepts present
/// in the instance, then applies the same tie-break and fallback chain as the
/// itemset explainer.
pub fn linear_assign(
    instance: &ConceptInstance,
    explanations: &LinearClassWise,
    frequencies: &BTreeMap<String, usize>,
) -> (String, bool) {
    let scores: BTreeMap<String, f64> = explanations
        .iter()
        .map(|(class, concepts)| {
            let s = concepts
                .iter()
                .filter(|(c, _)| instance.contains(c))
                .map(|(_, coef)| coef)
                .sum();
            (class.clone(), s)
        })
        .collect();
    pick_label(&scores, frequencies).expect("class frequencies must be non-empty")
}

/// `class,rank,concept_id,aggregate_coefficient` with 1-based ranks.
pub fn write_class_wise_csv(path: &Path, explanations: &LinearClassWise) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["class", "rank", "concept_id", "aggregate_coefficient"])?;
    for (class, concepts) in explanations {
        for (rank, (concept, coef)) in concepts.iter().enumerate() {
            w.write_record([
                class.as_str(),
                &(rank + 1).to_string(),
                concept.as_str(),
                &format!("{coef:?}"),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::FnOracle;

    fn labels() -> Vec<String> {
        vec!["X".into(), "Y".into()]
    }

    fn a_means_x() -> FnOracle<impl Fn(&[String]) -> String> {
        FnOracle::new(labels(), |c: &[String]| {
            if c.iter().any(|s| s == "a") { "X" } else { "Y" }.to_string()
        })
    }

    #[test]
    fn constant_oracle_gives_flat_model() {
        let oracle = FnOracle::new(labels(), |_: &[String]| "X".to_string());
        let params = PerturbParams {
            ridge_lambda: 1e-3,
            ..PerturbParams::default()
        };
        let inst = ConceptInstance::new("i", ["a", "b", "c"]);
        let m = perturb_fit(&inst, &oracle, "X", &params).unwrap();
        assert!((m.intercept - 1.0).abs() < 1e-6);
        for coef in m.coefficients.values() {
            assert!(coef.abs() < 1e-6);
        }
    }

    #[test]
    fn decisive_concept_dominates() {
        let inst = ConceptInstance::new("i", ["a", "b", "c"]);
        let params = PerturbParams {
            num_samples: 200,
            ..PerturbParams::default()
        };
        let m = perturb_fit(&inst, &a_means_x(), "X", &params).unwrap();
        assert!(m.coefficients["a"] > m.coefficients["b"]);
        assert!(m.coefficients["a"] > m.coefficients["c"]);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let inst = ConceptInstance::new("i", ["a", "b", "c", "d"]);
        let params = PerturbParams::default();
        let m1 = perturb_fit(&inst, &a_means_x(), "X", &params).unwrap();
        let m2 = perturb_fit(&inst, &a_means_x(), "X", &params).unwrap();
        assert_eq!(m1.intercept.to_bits(), m2.intercept.to_bits());
        for (c, v) in &m1.coefficients {
            assert_eq!(v.to_bits(), m2.coefficients[c].to_bits());
        }
    }

    #[test]
    fn coefficients_only_for_present_concepts() {
        let inst = ConceptInstance::new("i", ["b", "c"]);
        let m = perturb_fit(&inst, &a_means_x(), "X", &PerturbParams::default()).unwrap();
        assert_eq!(m.coefficients.keys().collect::<Vec<_>>(), ["b", "c"]);
    }

    #[test]
    fn fit_errors() {
        let empty = ConceptInstance::new("e", Vec::<String>::new());
        assert!(perturb_fit(&empty, &a_means_x(), "X", &PerturbParams::default()).is_err());
        let inst = ConceptInstance::new("i", ["a"]);
        let few = PerturbParams {
            num_samples: 5,
            ..PerturbParams::default()
        };
        assert!(matches!(
            perturb_fit(&inst, &a_means_x(), "X", &few),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            perturb_fit(&inst, &a_means_x(), "Z", &PerturbParams::default()),
            Err(Error::UnknownClass(_))
        ));
    }

    #[test]
    fn ridge_recovers_exact_line() {
        // y = 2 + 3x with negligible penalty.
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_row_slice(&[2.0, 5.0, 8.0]);
        let w = DVector::from_element(3, 1.0);
        let beta = weighted_ridge(&x, &y, &w, 1e-12).unwrap();
        assert!((beta[0] - 2.0).abs() < 1e-9);
        assert!((beta[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn single_instance_aggregate_is_its_fit() {
        let inst = ConceptInstance::new("i", ["a", "b", "c"]);
        let params = PerturbParams::default();
        let fit = perturb_fit(&inst, &a_means_x(), "X", &params).unwrap();
        let ranked =
            rank_concepts(std::slice::from_ref(&inst), &a_means_x(), "X", &params).unwrap();
        for (c, v) in &ranked {
            assert_eq!(*v, fit.coefficients[c]);
        }
        assert_eq!(ranked[0].0, "a");
        let all = class_wise_linear(&[inst], &a_means_x(), "X", 99, &params).unwrap();
        assert_eq!(all.len(), 3);
        assert!(class_wise_linear(&[], &a_means_x(), "X", 3, &params).is_err());
    }

    #[test]
    fn linear_assignment() {
        let cw: LinearClassWise = [
            ("X".to_string(), vec![("a".to_string(), 0.8)]),
            ("Y".to_string(), vec![("c".to_string(), 0.8)]),
        ]
        .into();
        let freq: BTreeMap<String, usize> = [("X".to_string(), 3), ("Y".to_string(), 5)].into();
        let same: BTreeMap<String, usize> = [("X".to_string(), 4), ("Y".to_string(), 4)].into();
        assert_eq!(
            linear_assign(&ConceptInstance::new("i", ["a", "b"]), &cw, &freq),
            ("X".into(), false)
        );
        assert_eq!(
            linear_assign(&ConceptInstance::new("i", ["b"]), &cw, &freq),
            ("Y".into(), true)
        );
        assert_eq!(
            linear_assign(&ConceptInstance::new("i", ["a", "c"]), &cw, &same),
            ("X".into(), false)
        );
    }
}
