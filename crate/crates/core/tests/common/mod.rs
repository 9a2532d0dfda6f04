//! Test-only helpers: a literal brute-force confident itemset miner and a
//! random small-dataset generator. Nothing here calls into the miner.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cie::{ConceptInstance, Measure, MinerConfig, PredictionMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// class -> (items -> (confidence, global_count, class_count))
pub type OracleStore = BTreeMap<String, BTreeMap<Vec<String>, (f64, usize, usize)>>;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub instances: Vec<ConceptInstance>,
    pub predictions: PredictionMap,
}

/// Enumerates every itemset up to `max_k` over the items present, counting by
/// scanning instances, and applies both criteria literally: own confidence at
/// least `min_conf` and every one-smaller subset confident for the same class.
pub fn brute_force(data: &Dataset, config: &MinerConfig) -> OracleStore {
    let sets: Vec<BTreeSet<&str>> = data
        .instances
        .iter()
        .map(|i| i.concepts.iter().map(String::as_str).collect())
        .collect();
    let labels: Vec<&str> = data
        .instances
        .iter()
        .map(|i| data.predictions.get(&i.id).unwrap())
        .collect();
    let universe: Vec<&str> = sets
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let classes: BTreeSet<&str> = labels.iter().copied().collect();
    let total = sets.len();

    // All subsets of the universe of size 1..=max_k, smallest first.
    let mut candidates: Vec<Vec<&str>> = (1u32..(1 << universe.len()))
        .map(|mask| {
            (0..universe.len())
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| universe[b])
                .collect::<Vec<_>>()
        })
        .filter(|s| s.len() <= config.max_k)
        .collect();
    candidates.sort_by_key(|s| s.len());

    let mut out = OracleStore::new();
    for class in classes {
        let class_size = labels.iter().filter(|&&l| l == class).count();
        let mut confident: BTreeSet<Vec<&str>> = BTreeSet::new();
        let mut found = BTreeMap::new();
        for cand in &candidates {
            let mut global = 0;
            let mut in_class = 0;
            for (set, label) in sets.iter().zip(&labels) {
                if cand.iter().all(|item| set.contains(item)) {
                    global += 1;
                    if *label == class {
                        in_class += 1;
                    }
                }
            }
            let conf = if global == 0 {
                0.0
            } else {
                match config.measure {
                    Measure::RuleConfidence => in_class as f64 / global as f64,
                    Measure::Lift => {
                        (in_class as f64 / class_size as f64) / (global as f64 / total as f64)
                    }
                }
            };
            let subsets_ok = cand.len() == 1
                || (0..cand.len()).all(|skip| {
                    let sub: Vec<&str> = cand
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, &x)| x)
                        .collect();
                    confident.contains(&sub)
                });
            if conf >= config.min_conf && global >= config.min_global_count.max(1) && subsets_ok {
                confident.insert(cand.clone());
                found.insert(
                    cand.iter().map(|s| s.to_string()).collect(),
                    (conf, global, in_class),
                );
            }
        }
        out.insert(class.to_string(), found);
    }
    out
}

pub fn store_as_oracle(store: &cie::ItemsetStore) -> OracleStore {
    store
        .per_class
        .iter()
        .map(|(class, list)| {
            (
                class.clone(),
                list.iter()
                    .map(|ci| {
                        (
                            ci.items.items().to_vec(),
                            (ci.confidence, ci.global_count, ci.class_count),
                        )
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Same itemsets per class, equal counts, confidences within `tol`.
pub fn compare(mined: &OracleStore, oracle: &OracleStore, tol: f64) -> Result<(), String> {
    if mined.keys().collect::<Vec<_>>() != oracle.keys().collect::<Vec<_>>() {
        return Err(format!(
            "class sets differ: {:?} vs {:?}",
            mined.keys().collect::<Vec<_>>(),
            oracle.keys().collect::<Vec<_>>()
        ));
    }
    for (class, expected) in oracle {
        let got = &mined[class];
        if got.keys().collect::<Vec<_>>() != expected.keys().collect::<Vec<_>>() {
            return Err(format!(
                "class {class}: itemsets {:?} vs oracle {:?}",
                got.keys().collect::<Vec<_>>(),
                expected.keys().collect::<Vec<_>>()
            ));
        }
        for (items, (conf, g, c)) in expected {
            let (mconf, mg, mc) = got[items];
            if (mconf - conf).abs() > tol || mg != *g || mc != *c {
                return Err(format!(
                    "class {class} itemset {items:?}: ({mconf}, {mg}, {mc}) vs oracle ({conf}, {g}, {c})"
                ));
            }
        }
    }
    Ok(())
}

/// Every one-smaller non-empty subset of every stored itemset is stored for
/// the same class.
pub fn downward_closed(store: &cie::ItemsetStore) -> Result<(), String> {
    for (class, list) in &store.per_class {
        let present: BTreeSet<&[String]> = list.iter().map(|ci| ci.items.items()).collect();
        for ci in list {
            let items = ci.items.items();
            if items.len() < 2 {
                continue;
            }
            for skip in 0..items.len() {
                let sub: Vec<String> = items
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, x)| x.clone())
                    .collect();
                if !present.contains(sub.as_slice()) {
                    return Err(format!("class {class}: {items:?} stored without {sub:?}"));
                }
            }
        }
    }
    Ok(())
}

/// Up to 8 items, up to 40 instances, up to 4 classes.
pub fn random_dataset(rng: &mut ChaCha8Rng) -> Dataset {
    let n_items = rng.gen_range(1..=8);
    let n_instances = rng.gen_range(1..=40);
    let n_classes = rng.gen_range(1..=4);
    let density = rng.gen_range(0.2..0.7);
    let items: Vec<String> = (0..n_items).map(|i| format!("item{i}")).collect();
    let mut instances = Vec::new();
    let mut predictions = PredictionMap::new();
    for t in 0..n_instances {
        let concepts: Vec<String> = items
            .iter()
            .filter(|_| rng.gen_bool(density))
            .cloned()
            .collect();
        let id = format!("i{t:02}");
        let label = format!("C{}", rng.gen_range(0..n_classes));
        predictions.insert(id.clone(), label).unwrap();
        instances.push(ConceptInstance::new(id, concepts));
    }
    Dataset {
        instances,
        predictions,
    }
}

pub const MIN_CONFS: [f64; 4] = [0.5, 0.6, 0.7, 0.8];

pub fn random_config(rng: &mut ChaCha8Rng, measure: Measure) -> MinerConfig {
    MinerConfig {
        min_conf: MIN_CONFS[rng.gen_range(0..MIN_CONFS.len())],
        max_k: rng.gen_range(1..=4),
        measure,
        min_global_count: rng.gen_range(1..=2),
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub mod cli {
    use std::path::{Path, PathBuf};
    use std::process::{Command, Output};

    pub fn run<I, S>(args: I) -> Output
    where
        I: IntoIterator<Item = S>,
        S: AsRef<std::ffi::OsStr>,
    {
        Command::new(env!("CARGO_BIN_EXE_cie"))
            .args(args)
            .output()
            .expect("spawn cie")
    }

    /// Runs and panics with stderr on a non-zero exit.
    pub fn ok<I, S>(args: I) -> String
    where
        I: IntoIterator<Item = S>,
        S: AsRef<std::ffi::OsStr>,
    {
        let out = run(args);
        assert!(
            out.status.success(),
            "cie failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    pub fn p(dir: &Path, name: &str) -> PathBuf {
        dir.join(name)
    }

    /// Writes the six-instance fixture as instances.jsonl / predictions.jsonl.
    pub fn write_toy6(dir: &Path) -> (PathBuf, PathBuf) {
        let (instances, predictions) = cie::fixtures::toy6();
        let inst = dir.join("instances.jsonl");
        let pred = dir.join("predictions.jsonl");
        cie::io::write_jsonl(&inst, &instances).unwrap();
        predictions.save(&pred).unwrap();
        (inst, pred)
    }
}
