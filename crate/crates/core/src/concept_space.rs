//! Dictionary-based concept mapping.
//!
//! A [`Lexicon`] maps normalized surface forms (lowercase token n-grams) to
//! concept identifiers. [`map_text`] scans a text left to right and emits the
//! concept of the longest n-gram starting at each position, consuming the
//! matched tokens. Unmatched tokens are dropped.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_jsonl;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub concept_id: String,
    pub preferred_name: String,
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, String>,
    concepts: BTreeMap<String, Concept>,
    max_ngram: usize,
}

impl Lexicon {
    /// Builds a lexicon from `(concept_id, preferred_name, surface forms)` rows.
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String, Vec<S>)>,
        S: AsRef<str>,
    {
        let mut lex = Lexicon {
            max_ngram: 1,
            ..Default::default()
        };
        for (concept_id, preferred_name, forms) in rows {
            lex.insert(concept_id, preferred_name, &forms, None)?;
        }
        Ok(lex)
    }

    fn insert<S: AsRef<str>>(
        &mut self,
        concept_id: String,
        preferred_name: String,
        forms: &[S],
        at: Option<(&Path, usize)>,
    ) -> Result<()> {
        let invalid = |message: String| match at {
            Some((path, line)) => Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            None => Error::Invalid(message),
        };
        if concept_id.is_empty() {
            return Err(invalid("empty concept id".into()));
        }
        if let Some(existing) = self.concepts.get(&concept_id) {
            if existing.preferred_name != preferred_name {
                return Err(invalid(format!(
                    "concept {concept_id} redefined with a different preferred name"
                )));
            }
        }
        for form in forms {
            let tokens = tokenize(form.as_ref());
            if tokens.is_empty() {
                return Err(invalid(format!(
                    "empty surface form for concept {concept_id}"
                )));
            }
            self.max_ngram = self.max_ngram.max(tokens.len());
            let key = tokens.join(" ");
            match self.entries.get(&key) {
                Some(other) if *other != concept_id => {
                    return Err(Error::LexiconConflict {
                        surface: key,
                        first: other.clone(),
                        second: concept_id,
                    });
                }
                Some(_) => {}
                None => {
                    self.entries.insert(key, concept_id.clone());
                }
            }
        }
        self.concepts.insert(
            concept_id.clone(),
            Concept {
                concept_id,
                preferred_name,
            },
        );
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_ngram(&self) -> usize {
        self.max_ngram
    }

    /// Concept id for an already-normalized surface form.
    pub fn lookup(&self, surface: &str) -> Option<&str> {
        self.entries.get(surface).map(String::as_str)
    }

    pub fn concept(&self, concept_id: &str) -> Option<&Concept> {
        self.concepts.get(concept_id)
    }

    /// Preferred names keyed by concept id, as used by the renderer.
    pub fn concept_names(&self) -> BTreeMap<String, String> {
        self.concepts
            .values()
            .map(|c| (c.concept_id.clone(), c.preferred_name.clone()))
            .collect()
    }
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Reads a three-column TSV lexicon: `concept_id \t preferred_name \t form|form|...`.
pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lex = Lexicon {
        max_ngram: 1,
        ..Default::default()
    };
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        let forms: Vec<&str> = cols[2].split('|').collect();
        lex.insert(
            cols[0].trim().to_string(),
            cols[1].trim().to_string(),
            &forms,
            Some((path, line_no)),
        )?;
    }
    Ok(lex)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawInstance {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// An instance reduced to its concept set. `concepts` is always sorted and
/// free of duplicates, including after deserialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "MappedRecord")]
pub struct ConceptInstance {
    pub id: String,
    pub concepts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Deserialize)]
struct MappedRecord {
    id: String,
    concepts: Vec<String>,
    #[serde(default)]
    label: Option<String>,
}

impl From<MappedRecord> for ConceptInstance {
    fn from(r: MappedRecord) -> Self {
        ConceptInstance::new(r.id, r.concepts).with_label(r.label)
    }
}

impl ConceptInstance {
    pub fn new<I, S>(id: impl Into<String>, concepts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = concepts.into_iter().map(Into::into).collect();
        ConceptInstance {
            id: id.into(),
            concepts: set.into_iter().collect(),
            label: None,
        }
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.concepts
            .binary_search_by(|c| c.as_str().cmp(concept))
            .is_ok()
    }
}

/// Greedy longest-match mapping of one raw instance onto the lexicon.
pub fn map_text(instance: &RawInstance, lexicon: &Lexicon) -> ConceptInstance {
    let tokens = tokenize(&instance.text);
    let mut found = BTreeSet::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = lexicon.max_ngram.min(tokens.len() - i);
        let hit = (1..=longest).rev().find_map(|n| {
            lexicon
                .lookup(&tokens[i..i + n].join(" "))
                .map(|id| (n, id))
        });
        match hit {
            Some((n, id)) => {
                found.insert(id.to_string());
                i += n;
            }
            None => i += 1,
        }
    }
    ConceptInstance {
        id: instance.id.clone(),
        concepts: found.into_iter().collect(),
        label: instance.label.clone(),
    }
}

fn ensure_unique_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

pub fn load_raw_instances(path: &Path) -> Result<Vec<RawInstance>> {
    let rows: Vec<RawInstance> = read_jsonl(path)?;
    ensure_unique_ids(rows.iter().map(|r| r.id.as_str()))?;
    Ok(rows)
}

pub fn load_concept_instances(path: &Path) -> Result<Vec<ConceptInstance>> {
    let rows: Vec<ConceptInstance> = read_jsonl(path)?;
    ensure_unique_ids(rows.iter().map(|r| r.id.as_str()))?;
    Ok(rows)
}
