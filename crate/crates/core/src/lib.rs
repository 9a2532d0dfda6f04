//! Confident itemset explanations for black-box text classifiers.
//!
//! Pipeline: map text to concept sets ([`concept_space`]), label them with a
//! black-box ([`blackbox`]), mine per-class confident itemsets ([`miner`]),
//! explain instances and classes with them ([`explainer`]), and measure how
//! well the explanations reproduce the black-box ([`evaluation`]).
//! [`baseline`] provides a perturbation-based linear explainer for comparison.

pub mod baseline;
pub mod blackbox;
pub mod cli;
pub mod concept_space;
pub mod error;
pub mod evaluation;
pub mod explainer;
pub mod fixtures;
pub mod io;
pub mod miner;

pub use blackbox::{ClassifierOracle, PredictionMap, ReferenceNb};
pub use concept_space::{ConceptInstance, Lexicon, RawInstance};
pub use error::{Error, Result};
pub use explainer::Explanation;
pub use miner::{ConfidentItemset, Itemset, ItemsetStore, Measure, MinerConfig};
