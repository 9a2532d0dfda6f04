//! Confident itemset mining.
//!
//! The mining set is split into one subspace per black-box label. Within each
//! subspace itemsets are grown level by level: a K-itemset is kept when its
//! own confidence for the class reaches `min_conf` and every (K-1)-subset was
//! kept at the previous level. Confidence is not anti-monotone, so the subset
//! check is part of the definition and not just pruning.
//!
//! Counting uses per-item instance bitsets; the count of an itemset is the
//! popcount of the intersection of its items' bitsets.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blackbox::PredictionMap;
use crate::concept_space::ConceptInstance;
use crate::error::{Error, Result};
use crate::io::{read_json, write_json};

/// A non-empty, strictly ascending set of concept ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Itemset(Vec<String>);

impl Itemset {
    /// Sorts and deduplicates; fails on an empty input.
    pub fn new<I, S>(items: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = items.into_iter().map(Into::into).collect();
        if set.is_empty() {
            return Err(Error::Invalid(
                "itemset must contain at least one item".into(),
            ));
        }
        Ok(Itemset(set.into_iter().collect()))
    }

    pub fn items(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every item occurs in `concepts`, which must be sorted.
    pub fn is_subset_of(&self, concepts: &[String]) -> bool {
        let mut rest = concepts;
        for item in &self.0 {
            match rest.binary_search(item) {
                Ok(pos) => rest = &rest[pos + 1..],
                Err(_) => return false,
            }
        }
        true
    }
}

impl TryFrom<Vec<String>> for Itemset {
    type Error = Error;

    fn try_from(items: Vec<String>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Invalid(
                "itemset must contain at least one item".into(),
            ));
        }
        if items.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!(
                "itemset items must be strictly ascending: {items:?}"
            )));
        }
        Ok(Itemset(items))
    }
}

impl From<Itemset> for Vec<String> {
    fn from(s: Itemset) -> Self {
        s.0
    }
}

impl fmt::Display for Itemset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// P(class | itemset), in [0, 1].
    RuleConfidence,
    /// P(itemset | class) / P(itemset), unbounded above.
    Lift,
}

impl Measure {
    fn score(self, global: usize, in_class: usize, class_size: usize, total: usize) -> f64 {
        if global == 0 {
            return 0.0;
        }
        match self {
            Measure::RuleConfidence => in_class as f64 / global as f64,
            Measure::Lift => (in_class as f64 / class_size as f64) / (global as f64 / total as f64),
        }
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rule" | "rule_confidence" => Ok(Measure::RuleConfidence),
            "lift" => Ok(Measure::Lift),
            other => Err(Error::Config(format!("unknown measure {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinerConfig {
    pub min_conf: f64,
    pub max_k: usize,
    pub measure: Measure,
    pub min_global_count: usize,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            min_conf: 0.7,
            max_k: 3,
            measure: Measure::RuleConfidence,
            min_global_count: 1,
        }
    }
}

impl MinerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_conf > 0.0 && self.min_conf.is_finite()) {
            return Err(Error::Config(format!(
                "min_conf must be positive, got {}",
                self.min_conf
            )));
        }
        if self.max_k == 0 {
            return Err(Error::Config("max_k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidentItemset {
    pub items: Itemset,
    #[serde(skip)]
    pub class_label: String,
    pub confidence: f64,
    pub global_count: usize,
    pub class_count: usize,
}

/// Canonical order: confidence desc, global count desc, items ascending.
pub fn canonical_order(a: &ConfidentItemset, b: &ConfidentItemset) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(b.global_count.cmp(&a.global_count))
        .then_with(|| a.items.cmp(&b.items))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subspace {
    pub class_label: String,
    pub instance_ids: Vec<String>,
}

/// Groups instances by black-box label. Subspaces come out in label order,
/// ids within a subspace in id order.
pub fn discretize(
    instances: &[ConceptInstance],
    predictions: &PredictionMap,
) -> Result<Vec<Subspace>> {
    let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for inst in instances {
        let label = predictions
            .get(&inst.id)
            .ok_or_else(|| Error::MissingPrediction(inst.id.clone()))?;
        groups.entry(label).or_default().push(inst.id.clone());
    }
    Ok(groups
        .into_iter()
        .map(|(label, mut ids)| {
            ids.sort();
            Subspace {
                class_label: label.to_string(),
                instance_ids: ids,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Bitset(Vec<u64>);

impl Bitset {
    fn zeros(n: usize) -> Self {
        Bitset(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn and(&self, other: &Bitset) -> Bitset {
        Bitset(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn count_and(&self, other: &Bitset) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }
}

/// Occurrence counts over a labeled mining set.
#[derive(Debug, Clone)]
pub struct CountContext {
    items: Vec<String>,
    item_tids: Vec<Bitset>,
    classes: Vec<String>,
    class_tids: Vec<Bitset>,
    class_sizes: Vec<usize>,
    total: usize,
}

impl CountContext {
    pub fn new(instances: &[ConceptInstance], predictions: &PredictionMap) -> Result<Self> {
        let total = instances.len();
        let items: Vec<String> = instances
            .iter()
            .flat_map(|i| i.concepts.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let subspaces = discretize(instances, predictions)?;
        let classes: Vec<String> = subspaces.iter().map(|s| s.class_label.clone()).collect();

        let mut item_tids = vec![Bitset::zeros(total); items.len()];
        let mut class_tids = vec![Bitset::zeros(total); classes.len()];
        let mut class_sizes = vec![0; classes.len()];
        for (t, inst) in instances.iter().enumerate() {
            for c in &inst.concepts {
                let idx = items
                    .binary_search(c)
                    .expect("item index built from instances");
                item_tids[idx].set(t);
            }
            let label = predictions.get(&inst.id).expect("checked by discretize");
            let q = classes
                .binary_search_by(|c| c.as_str().cmp(label))
                .expect("known class");
            class_tids[q].set(t);
            class_sizes[q] += 1;
        }
        Ok(CountContext {
            items,
            item_tids,
            classes,
            class_tids,
            class_sizes,
            total,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn total_instances(&self) -> usize {
        self.total
    }

    fn class_index(&self, class_label: &str) -> Result<usize> {
        self.classes
            .binary_search_by(|c| c.as_str().cmp(class_label))
            .map_err(|_| Error::UnknownClass(class_label.to_string()))
    }

    /// `(global_count, class_count)` for an itemset.
    pub fn counts(&self, itemset: &Itemset, class_label: &str) -> Result<(usize, usize)> {
        let q = self.class_index(class_label)?;
        let mut tids: Option<Bitset> = None;
        for item in itemset.items() {
            let Ok(idx) = self.items.binary_search(item) else {
                return Ok((0, 0));
            };
            tids = Some(match tids {
                None => self.item_tids[idx].clone(),
                Some(t) => t.and(&self.item_tids[idx]),
            });
        }
        let tids = tids.expect("itemsets are non-empty");
        Ok((tids.count(), tids.count_and(&self.class_tids[q])))
    }

    pub fn confidence(
        &self,
        itemset: &Itemset,
        class_label: &str,
        measure: Measure,
    ) -> Result<f64> {
        let q = self.class_index(class_label)?;
        let (global, in_class) = self.counts(itemset, class_label)?;
        Ok(measure.score(global, in_class, self.class_sizes[q], self.total))
    }
}

/// All mined itemsets, grouped by class, with the counts needed downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemsetStore {
    pub config: MinerConfig,
    pub total_instances: usize,
    pub class_instance_counts: BTreeMap<String, usize>,
    pub per_class: BTreeMap<String, Vec<ConfidentItemset>>,
}

impl ItemsetStore {
    /// Class labels in lexicographic order.
    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.class_instance_counts.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.per_class.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.class_instance_counts.is_empty() {
            return Err(Error::Invalid("store has no classes".into()));
        }
        let sum: usize = self.class_instance_counts.values().sum();
        if sum != self.total_instances {
            return Err(Error::Invalid(format!(
                "class_instance_counts sum to {sum}, total_instances is {}",
                self.total_instances
            )));
        }
        for (class, list) in &self.per_class {
            if !self.class_instance_counts.contains_key(class) {
                return Err(Error::Invalid(format!(
                    "per_class has class {class:?} without an instance count"
                )));
            }
            for ci in list {
                if ci.class_label != *class {
                    return Err(Error::Invalid(format!(
                        "itemset {} labeled {:?} stored under {class:?}",
                        ci.items, ci.class_label
                    )));
                }
                if ci.class_count > ci.global_count {
                    return Err(Error::Invalid(format!(
                        "itemset {} has class_count above global_count",
                        ci.items
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut store: ItemsetStore = read_json(path)?;
        store.relabel();
        for class in store.class_instance_counts.keys() {
            store.per_class.entry(class.clone()).or_default();
        }
        store.validate()?;
        Ok(store)
    }

    fn relabel(&mut self) {
        for (class, list) in self.per_class.iter_mut() {
            for ci in list {
                ci.class_label = class.clone();
            }
        }
    }
}

/// One level's worth of itemsets for a class, as item indices.
struct LevelEntry {
    items: Vec<u32>,
    tids: Bitset,
    global: usize,
    in_class: usize,
    confidence: f64,
}

pub fn mine(
    instances: &[ConceptInstance],
    predictions: &PredictionMap,
    config: &MinerConfig,
) -> Result<ItemsetStore> {
    config.validate()?;
    if instances.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let ctx = CountContext::new(instances, predictions)?;

    let per_class: Vec<Vec<ConfidentItemset>> = (0..ctx.classes.len())
        .into_par_iter()
        .map(|q| mine_class(&ctx, q, config))
        .collect();

    Ok(ItemsetStore {
        config: *config,
        total_instances: ctx.total,
        class_instance_counts: ctx
            .classes
            .iter()
            .cloned()
            .zip(ctx.class_sizes.iter().copied())
            .collect(),
        per_class: ctx.classes.iter().cloned().zip(per_class).collect(),
    })
}

fn mine_class(ctx: &CountContext, q: usize, config: &MinerConfig) -> Vec<ConfidentItemset> {
    let class_tids = &ctx.class_tids[q];
    let class_size = ctx.class_sizes[q];
    let evaluate = |items: Vec<u32>, tids: Bitset| -> Option<LevelEntry> {
        let global = tids.count();
        let in_class = tids.count_and(class_tids);
        let confidence = config
            .measure
            .score(global, in_class, class_size, ctx.total);
        (confidence >= config.min_conf && global >= config.min_global_count.max(1)).then_some(
            LevelEntry {
                items,
                tids,
                global,
                in_class,
                confidence,
            },
        )
    };

    let mut level: Vec<LevelEntry> = (0..ctx.items.len())
        .into_par_iter()
        .filter_map(|i| evaluate(vec![i as u32], ctx.item_tids[i].clone()))
        .collect();

    let mut out = Vec::new();
    let mut k = 1;
    while !level.is_empty() {
        let next = if k < config.max_k {
            next_level(&level, &evaluate)
        } else {
            Vec::new()
        };
        out.extend(level.into_iter().map(|e| {
            ConfidentItemset {
                items: Itemset(
                    e.items
                        .iter()
                        .map(|&i| ctx.items[i as usize].clone())
                        .collect(),
                ),
                class_label: ctx.classes[q].clone(),
                confidence: e.confidence,
                global_count: e.global,
                class_count: e.in_class,
            }
        }));
        level = next;
        k += 1;
    }
    out.sort_by(canonical_order);
    out
}

/// Prefix join over a lexicographically sorted level, keeping candidates whose
/// every (K-1)-subset is in `level` and which pass `evaluate`.
fn next_level<F>(level: &[LevelEntry], evaluate: &F) -> Vec<LevelEntry>
where
    F: Fn(Vec<u32>, Bitset) -> Option<LevelEntry> + Sync,
{
    let known: HashSet<&[u32]> = level.iter().map(|e| e.items.as_slice()).collect();
    let prefix_len = level[0].items.len() - 1;

    let mut pairs = Vec::new();
    let mut start = 0;
    while start < level.len() {
        let prefix = &level[start].items[..prefix_len];
        let mut end = start + 1;
        while end < level.len() && &level[end].items[..prefix_len] == prefix {
            end += 1;
        }
        for a in start..end {
            for b in a + 1..end {
                pairs.push((a, b));
            }
        }
        start = end;
    }

    pairs
        .into_par_iter()
        .filter_map(|(a, b)| {
            let (a, b) = (&level[a], &level[b]);
            let mut items = a.items.clone();
            items.push(*b.items.last().expect("non-empty"));
            // Dropping either of the last two positions gives back a parent.
            let closed = (0..prefix_len).all(|skip| {
                let subset: Vec<u32> = items
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &x)| x)
                    .collect();
                known.contains(subset.as_slice())
            });
            if !closed {
                return None;
            }
            evaluate(items, a.tids.and(&b.tids))
        })
        .collect()
}
