//! Fidelity, size-vs-fidelity curves, dataset splits and the planted-pattern
//! generator.
//!
//! Fidelity always compares an explainer's labels with the black-box labels,
//! never with gold labels.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{linear_assign, LinearClassWise};
use crate::blackbox::PredictionMap;
use crate::concept_space::ConceptInstance;
use crate::error::{Error, Result};
use crate::explainer::{explain_all, label_map, restrict};
use crate::miner::ItemsetStore;

/// Shuffles with `seed` and cuts at `round(fraction * len)`, keeping at least
/// one element on each side. Each part keeps the input's relative order.
pub fn split<T: Clone>(items: &[T], train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if items.len() < 2 {
        return Err(Error::Invalid("need at least 2 instances to split".into()));
    }
    let n = items.len();
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((
        train_idx.into_iter().map(|i| items[i].clone()).collect(),
        test_idx.into_iter().map(|i| items[i].clone()).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub total: usize,
    pub agreements: usize,
    pub fidelity: f64,
    #[serde(rename = "per_class")]
    pub per_class_fidelity: BTreeMap<String, f64>,
}

/// Agreement between explainer and black-box labels over identical id sets.
/// Per-class values are taken over the instances the black-box put in each
/// class. Two empty maps agree vacuously (fidelity 1).
pub fn fidelity(explainer: &PredictionMap, blackbox: &PredictionMap) -> Result<FidelityReport> {
    let mut offending: BTreeSet<&str> = BTreeSet::new();
    for (id, _) in explainer.iter() {
        if blackbox.get(id).is_none() {
            offending.insert(id);
        }
    }
    for (id, _) in blackbox.iter() {
        if explainer.get(id).is_none() {
            offending.insert(id);
        }
    }
    if !offending.is_empty() {
        return Err(Error::IdMismatch(
            offending.into_iter().map(str::to_string).collect(),
        ));
    }

    let mut per_class: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut agreements = 0;
    for (id, bb) in blackbox.iter() {
        let agree = explainer.get(id) == Some(bb);
        let entry = per_class.entry(bb).or_default();
        entry.1 += 1;
        if agree {
            entry.0 += 1;
            agreements += 1;
        }
    }
    let total = blackbox.len();
    Ok(FidelityReport {
        total,
        agreements,
        fidelity: if total == 0 {
            1.0
        } else {
            agreements as f64 / total as f64
        },
        per_class_fidelity: per_class
            .into_iter()
            .map(|(c, (a, t))| (c.to_string(), a as f64 / t as f64))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub fidelity: f64,
}

fn normalize_budgets(budgets: &[usize]) -> Result<Vec<usize>> {
    if budgets.is_empty() {
        return Err(Error::Config("budget list is empty".into()));
    }
    if budgets.contains(&0) {
        return Err(Error::Config("budgets must be at least 1".into()));
    }
    Ok(budgets
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect())
}

/// Black-box labels for exactly the given instances.
fn labels_for(instances: &[ConceptInstance], blackbox: &PredictionMap) -> Result<PredictionMap> {
    let mut out = PredictionMap::new();
    for inst in instances {
        let label = blackbox
            .get(&inst.id)
            .ok_or_else(|| Error::MissingPrediction(inst.id.clone()))?;
        out.insert(inst.id.clone(), label)?;
    }
    Ok(out)
}

/// Fidelity of the itemset explainer restricted to the top-n itemsets per
/// class, for each budget n (ascending, duplicates removed).
pub fn curve(
    store: &ItemsetStore,
    test: &[ConceptInstance],
    blackbox: &PredictionMap,
    budgets: &[usize],
) -> Result<Vec<CurvePoint>> {
    let budgets = normalize_budgets(budgets)?;
    let reference = labels_for(test, blackbox)?;
    budgets
        .par_iter()
        .map(|&n| {
            let restricted = restrict(store, n)?;
            let labels = label_map(&explain_all(test, &restricted));
            Ok(CurvePoint {
                n,
                fidelity: fidelity(&labels, &reference)?.fidelity,
            })
        })
        .collect()
}

/// The same protocol for the linear baseline. `ranked` holds each class's
/// full concept ranking; budget n keeps its first n entries.
pub fn linear_curve(
    ranked: &LinearClassWise,
    frequencies: &BTreeMap<String, usize>,
    test: &[ConceptInstance],
    blackbox: &PredictionMap,
    budgets: &[usize],
) -> Result<Vec<CurvePoint>> {
    let budgets = normalize_budgets(budgets)?;
    let reference = labels_for(test, blackbox)?;
    budgets
        .par_iter()
        .map(|&n| {
            let top: LinearClassWise = ranked
                .iter()
                .map(|(c, list)| (c.clone(), list.iter().take(n).cloned().collect()))
                .collect();
            let labels: PredictionMap = test
                .iter()
                .map(|i| (i.id.clone(), linear_assign(i, &top, frequencies).0))
                .collect();
            Ok(CurvePoint {
                n,
                fidelity: fidelity(&labels, &reference)?.fidelity,
            })
        })
        .collect()
}

/// `method,n,fidelity`, one row per (method, budget).
pub fn write_curve_csv(path: &Path, rows: &[(&str, Vec<CurvePoint>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "n", "fidelity"])?;
    for (method, points) in rows {
        for p in points {
            w.write_record([*method, &p.n.to_string(), &format!("{:?}", p.fidelity)])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Shape of a planted-pattern dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub exclusive_per_class: usize,
    pub shared_noise: usize,
    pub instances: usize,
    pub concepts_per_instance: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_classes: 4,
            exclusive_per_class: 10,
            shared_noise: 20,
            instances: 500,
            concepts_per_instance: 5,
            seed: 42,
        }
    }
}

/// Probability that a draw comes from the instance's class-exclusive pool.
pub const EXCLUSIVE_DRAW_PROBABILITY: f64 = 0.7;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_classes < 2 {
            return bad(format!(
                "num_classes must be at least 2, got {}",
                self.num_classes
            ));
        }
        if self.exclusive_per_class < 1 {
            return bad("exclusive_per_class must be at least 1".into());
        }
        if self.instances < self.num_classes {
            return bad(format!(
                "instances ({}) must be at least num_classes ({})",
                self.instances, self.num_classes
            ));
        }
        if self.concepts_per_instance < 1 {
            return bad("concepts_per_instance must be at least 1".into());
        }
        if self.concepts_per_instance > self.exclusive_per_class + self.shared_noise {
            return bad(format!(
                "concepts_per_instance ({}) exceeds the {} concepts available per class",
                self.concepts_per_instance,
                self.exclusive_per_class + self.shared_noise
            ));
        }
        Ok(())
    }

    pub fn class_label(q: usize) -> String {
        format!("class_{q}")
    }

    pub fn exclusive_concept(q: usize, j: usize) -> String {
        format!("c{q}_{j:02}")
    }

    pub fn noise_concept(j: usize) -> String {
        format!("noise_{j:02}")
    }
}

/// Draws each instance's class uniformly, then distinct concepts: each draw
/// takes from the class-exclusive pool with probability 0.7 and from the
/// shared noise pool otherwise, falling over to the other pool when one is
/// used up. Gold labels are set on every instance.
pub fn gen_synth(spec: &SynthSpec) -> Result<Vec<ConceptInstance>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.instances);
    for i in 0..spec.instances {
        let q = rng.gen_range(0..spec.num_classes);
        let mut exclusive: Vec<usize> = (0..spec.exclusive_per_class).collect();
        let mut noise: Vec<usize> = (0..spec.shared_noise).collect();
        let mut concepts = Vec::with_capacity(spec.concepts_per_instance);
        while concepts.len() < spec.concepts_per_instance {
            let from_exclusive = if noise.is_empty() {
                true
            } else if exclusive.is_empty() {
                false
            } else {
                rng.gen_bool(EXCLUSIVE_DRAW_PROBABILITY)
            };
            let concept = if from_exclusive {
                let j = exclusive.swap_remove(rng.gen_range(0..exclusive.len()));
                SynthSpec::exclusive_concept(q, j)
            } else {
                let j = noise.swap_remove(rng.gen_range(0..noise.len()));
                SynthSpec::noise_concept(j)
            };
            concepts.push(concept);
        }
        out.push(
            ConceptInstance::new(format!("s{i:05}"), concepts)
                .with_label(Some(SynthSpec::class_label(q))),
        );
    }
    Ok(out)
}
