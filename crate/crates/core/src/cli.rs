//! Command-line frontend. Every command reads files, writes files and returns
//! a short human-readable summary for stdout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::baseline::{rank_by_class, write_class_wise_csv, PerturbParams};
use crate::blackbox::{load_predictions, train_reference, PredictionMap, ReferenceNb};
use crate::concept_space::{
    load_concept_instances, load_lexicon, load_raw_instances, map_text, ConceptInstance,
};
use crate::evaluation::{
    curve, fidelity, gen_synth, linear_curve, split, write_curve_csv, SynthSpec,
};
use crate::explainer::{explain_all, render_report, Explanation};
use crate::io::{read_jsonl, write_json, write_jsonl, write_text};
use crate::miner::{mine, ItemsetStore, Measure, MinerConfig};

#[derive(Debug, Parser)]
#[command(
    name = "cie",
    version,
    about = "Confident itemset explanations for black-box classifiers"
)]
pub struct Cli {
    /// Worker threads (0 = one per core). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Map raw text instances to concept sets with a TSV lexicon.
    Map {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mine confident itemsets per black-box class.
    Mine {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        min_conf: f64,
        #[arg(long, default_value_t = 3)]
        max_k: usize,
        /// rule (P(class|itemset)) or lift (P(itemset|class)/P(itemset)).
        #[arg(long, default_value = "rule")]
        measure: Measure,
        #[arg(long, default_value_t = 1)]
        min_global_count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explain instances against a mined store.
    Explain {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a plain-text report here.
        #[arg(long)]
        render: Option<PathBuf>,
        /// Lexicon used for preferred names in the report.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Fidelity of explanation labels against black-box predictions.
    Eval {
        #[arg(long)]
        explanations: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fidelity as a function of the class-wise explanation size.
    Curve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value = "10,20,30,40,50", value_parser = parse_budgets)]
        budgets: Budgets,
        #[arg(long)]
        out: PathBuf,
        /// Add rows for the perturbation baseline (needs --reference and
        /// --reference-predictions).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        reference_predictions: Option<PathBuf>,
        #[command(flatten)]
        perturb: PerturbArgs,
    },
    /// Train the reference Naive Bayes classifier on gold labels.
    BbTrain {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict with the reference classifier.
    BbPredict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Class-wise explanations from the perturbation baseline.
    Baseline {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[command(flatten)]
        perturb: PerturbArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a planted-pattern dataset.
    Synth {
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 10)]
        exclusive: usize,
        #[arg(long, default_value_t = 20)]
        noise: usize,
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 5)]
        concepts_per_instance: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded train/test split of an instances file.
    Split {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        fraction: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct PerturbArgs {
    #[arg(long, default_value_t = 500)]
    pub num_samples: usize,
    #[arg(long, default_value_t = 0.75)]
    pub kernel_width: f64,
    #[arg(long, default_value_t = 1.0)]
    pub ridge_lambda: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

impl From<&PerturbArgs> for PerturbParams {
    fn from(a: &PerturbArgs) -> Self {
        PerturbParams {
            num_samples: a.num_samples,
            kernel_width: a.kernel_width,
            ridge_lambda: a.ridge_lambda,
            seed: a.seed,
        }
    }
}

pub type Budgets = Vec<usize>;

/// Comma-separated positive integers, e.g. `10,20,30`.
pub fn parse_budgets(s: &str) -> Result<Budgets, String> {
    let budgets = s
        .split(',')
        .map(|part| {
            let part = part.trim();
            match part.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(format!("invalid budget {part:?}")),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(budgets)
}

pub fn run(cli: Cli) -> anyhow::Result<String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .context("building thread pool")?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> anyhow::Result<String> {
    match command {
        Command::Map {
            lexicon,
            input,
            out,
        } => cmd_map(&lexicon, &input, &out),
        Command::Mine {
            instances,
            predictions,
            min_conf,
            max_k,
            measure,
            min_global_count,
            out,
        } => {
            let config = MinerConfig {
                min_conf,
                max_k,
                measure,
                min_global_count,
            };
            cmd_mine(&instances, &predictions, &config, &out)
        }
        Command::Explain {
            store,
            instances,
            out,
            render,
            lexicon,
        } => cmd_explain(
            &store,
            &instances,
            &out,
            render.as_deref(),
            lexicon.as_deref(),
        ),
        Command::Eval {
            explanations,
            predictions,
            out,
        } => cmd_eval(&explanations, &predictions, out.as_deref()),
        Command::Curve {
            store,
            instances,
            predictions,
            budgets,
            out,
            model,
            reference,
            reference_predictions,
            perturb,
        } => {
            let baseline = match (model, reference, reference_predictions) {
                (None, None, None) => None,
                (Some(m), Some(r), Some(p)) => Some((m, r, p)),
                _ => bail!("--model, --reference and --reference-predictions go together"),
            };
            cmd_curve(
                &store,
                &instances,
                &predictions,
                &budgets,
                &out,
                baseline
                    .as_ref()
                    .map(|(m, r, p)| (m.as_path(), r.as_path(), p.as_path())),
                &(&perturb).into(),
            )
        }
        Command::BbTrain {
            instances,
            alpha,
            out,
        } => cmd_bb_train(&instances, alpha, &out),
        Command::BbPredict {
            model,
            instances,
            out,
        } => cmd_bb_predict(&model, &instances, &out),
        Command::Baseline {
            model,
            instances,
            predictions,
            n,
            perturb,
            out,
        } => cmd_baseline(
            &model,
            &instances,
            &predictions,
            n,
            &(&perturb).into(),
            &out,
        ),
        Command::Synth {
            classes,
            exclusive,
            noise,
            instances,
            concepts_per_instance,
            seed,
            out,
        } => {
            let spec = SynthSpec {
                num_classes: classes,
                exclusive_per_class: exclusive,
                shared_noise: noise,
                instances,
                concepts_per_instance,
                seed,
            };
            cmd_synth(&spec, &out)
        }
        Command::Split {
            instances,
            fraction,
            seed,
            train_out,
            test_out,
        } => cmd_split(&instances, fraction, seed, &train_out, &test_out),
    }
}

pub fn cmd_map(lexicon: &Path, input: &Path, out: &Path) -> anyhow::Result<String> {
    let lexicon = load_lexicon(lexicon)?;
    let raw = load_raw_instances(input)?;
    let mapped: Vec<ConceptInstance> = raw.iter().map(|r| map_text(r, &lexicon)).collect();
    write_jsonl(out, &mapped)?;
    let empty = mapped.iter().filter(|m| m.concepts.is_empty()).count();
    Ok(format!(
        "mapped {} instances ({} without concepts) with {} surface forms\n",
        mapped.len(),
        empty,
        lexicon.len()
    ))
}

pub fn cmd_mine(
    instances: &Path,
    predictions: &Path,
    config: &MinerConfig,
    out: &Path,
) -> anyhow::Result<String> {
    config.validate()?;
    let instances = load_concept_instances(instances)?;
    let predictions = load_predictions(predictions)?;
    let store = mine(&instances, &predictions, config)?;
    store.save(out)?;
    let mut summary = format!(
        "mined {} itemsets from {} instances\n",
        store.len(),
        store.total_instances
    );
    for (class, list) in &store.per_class {
        let _ = writeln!(
            summary,
            "  {class}: {} itemsets over {} instances",
            list.len(),
            store.class_instance_counts[class]
        );
    }
    Ok(summary)
}

pub fn cmd_explain(
    store: &Path,
    instances: &Path,
    out: &Path,
    render: Option<&Path>,
    lexicon: Option<&Path>,
) -> anyhow::Result<String> {
    let store = ItemsetStore::load(store)?;
    let instances = load_concept_instances(instances)?;
    let explanations = explain_all(&instances, &store);
    write_jsonl(out, &explanations)?;
    if let Some(path) = render {
        let names = match lexicon {
            Some(l) => load_lexicon(l)?.concept_names(),
            None => BTreeMap::new(),
        };
        write_text(path, &render_report(&explanations, &names))?;
    }
    let fallback = explanations.iter().filter(|e| e.fallback_used).count();
    Ok(format!(
        "explained {} instances ({} by fallback)\n",
        explanations.len(),
        fallback
    ))
}

pub fn cmd_eval(
    explanations: &Path,
    predictions: &Path,
    out: Option<&Path>,
) -> anyhow::Result<String> {
    let explanations: Vec<Explanation> = read_jsonl(explanations)?;
    let mut labels = PredictionMap::new();
    for e in &explanations {
        labels.insert(e.instance_id.clone(), e.assigned_label.clone())?;
    }
    let blackbox = load_predictions(predictions)?;
    let report = fidelity(&labels, &blackbox)?;
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(format!("{}\n", serde_json::to_string_pretty(&report)?))
}

fn class_frequencies(
    predictions: &PredictionMap,
    ids: &[ConceptInstance],
) -> BTreeMap<String, usize> {
    let mut freq = BTreeMap::new();
    for inst in ids {
        if let Some(label) = predictions.get(&inst.id) {
            *freq.entry(label.to_string()).or_insert(0) += 1;
        }
    }
    freq
}

pub fn cmd_curve(
    store: &Path,
    instances: &Path,
    predictions: &Path,
    budgets: &[usize],
    out: &Path,
    baseline: Option<(&Path, &Path, &Path)>,
    params: &PerturbParams,
) -> anyhow::Result<String> {
    let store = ItemsetStore::load(store)?;
    let test = load_concept_instances(instances)?;
    let blackbox = load_predictions(predictions)?;
    let mut rows = vec![("cie", curve(&store, &test, &blackbox, budgets)?)];
    if let Some((model, reference, reference_predictions)) = baseline {
        let model = ReferenceNb::load(model)?;
        let reference = load_concept_instances(reference)?;
        let ref_predictions = load_predictions(reference_predictions)?;
        let ranked = rank_by_class(&reference, &ref_predictions, &model, params)?;
        let freq = class_frequencies(&ref_predictions, &reference);
        rows.push((
            "perturb",
            linear_curve(&ranked, &freq, &test, &blackbox, budgets)?,
        ));
    }
    write_curve_csv(out, &rows)?;
    let mut summary = String::new();
    for (method, points) in &rows {
        for p in points {
            let _ = writeln!(summary, "{method}\tN={}\tfidelity={:.4}", p.n, p.fidelity);
        }
    }
    Ok(summary)
}

pub fn cmd_bb_train(instances: &Path, alpha: f64, out: &Path) -> anyhow::Result<String> {
    let instances = load_concept_instances(instances)?;
    let model = train_reference(&instances, alpha)?;
    model.save(out)?;
    Ok(format!(
        "trained on {} instances: {} classes, {} concepts\n",
        instances.len(),
        model.label_set.len(),
        model.vocabulary.len()
    ))
}

pub fn cmd_bb_predict(model: &Path, instances: &Path, out: &Path) -> anyhow::Result<String> {
    let model = ReferenceNb::load(model)?;
    let instances = load_concept_instances(instances)?;
    let predictions = model.predict_all(&instances);
    predictions.save(out)?;
    let gold: Vec<bool> = instances
        .iter()
        .filter_map(|i| {
            i.label
                .as_ref()
                .map(|l| predictions.get(&i.id) == Some(l.as_str()))
        })
        .collect();
    let mut summary = format!("predicted {} instances\n", predictions.len());
    if !gold.is_empty() {
        let correct = gold.iter().filter(|&&c| c).count();
        let _ = writeln!(
            summary,
            "accuracy against gold labels: {:.4} ({correct}/{})",
            correct as f64 / gold.len() as f64,
            gold.len()
        );
    }
    Ok(summary)
}

pub fn cmd_baseline(
    model: &Path,
    instances: &Path,
    predictions: &Path,
    n: usize,
    params: &PerturbParams,
    out: &Path,
) -> anyhow::Result<String> {
    if n == 0 {
        bail!("--n must be at least 1");
    }
    let model = ReferenceNb::load(model)?;
    let instances = load_concept_instances(instances)?;
    let predictions = load_predictions(predictions)?;
    let mut ranked = rank_by_class(&instances, &predictions, &model, params)?;
    for list in ranked.values_mut() {
        list.truncate(n);
    }
    write_class_wise_csv(out, &ranked)?;
    Ok(format!(
        "wrote top-{n} linear explanations for {} classes\n",
        ranked.len()
    ))
}

pub fn cmd_synth(spec: &SynthSpec, out: &Path) -> anyhow::Result<String> {
    let instances = gen_synth(spec)?;
    write_jsonl(out, &instances)?;
    Ok(format!("generated {} instances\n", instances.len()))
}

pub fn cmd_split(
    instances: &Path,
    fraction: f64,
    seed: u64,
    train_out: &Path,
    test_out: &Path,
) -> anyhow::Result<String> {
    let instances = load_concept_instances(instances)?;
    let (train, test) = split(&instances, fraction, seed)?;
    write_jsonl(train_out, &train)?;
    write_jsonl(test_out, &test)?;
    Ok(format!(
        "split into {} train / {} test\n",
        train.len(),
        test.len()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_parsing() {
        assert_eq!(parse_budgets("10,20, 30").unwrap(), vec![10, 20, 30]);
        assert!(parse_budgets("10,,20").is_err());
        assert!(parse_budgets("0").is_err());
        assert!(parse_budgets("ten").is_err());
    }

    #[test]
    fn command_line_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
