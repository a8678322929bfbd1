//! Weighted choice between feeding options.
//!
//! Every choice node keeps, per option, a success weight (`w_pos`) and a
//! failure weight (`w_neg`). Selection prefers the highest success weight; when
//! several options are within [`POSITIVE_TOLERANCE`] of the best, the one with
//! the smallest failure weight wins, and exact ties fall to the seeded RNG.
//!
//! Outcomes update both weights as a running average with the binary result:
//! `w <- (w + outcome) / 2`. A failure therefore halves `w_pos`.

use indexmap::IndexMap;
use rand::Rng;
use thiserror::Error;

/// Two success weights closer than this are treated as equally good.
pub const POSITIVE_TOLERANCE: f64 = 0.1;

// Absorbs binary rounding so that e.g. 0.8 - 0.7 still counts as "within 0.1".
const TOLERANCE_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("choice node {node} has no options to select from")]
    EmptyOptions { node: String },
    #[error("weight out of range for {node}.{option}: {value}")]
    WeightOutOfRange {
        node: String,
        option: String,
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChoiceOutcome {
    Success,
    Failure,
}

impl ChoiceOutcome {
    /// The binary value folded into the running average.
    pub fn value(self) -> f64 {
        match self {
            ChoiceOutcome::Success => 1.0,
            ChoiceOutcome::Failure => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChoiceOutcome::Success => "success",
            ChoiceOutcome::Failure => "failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeightEntry {
    pub w_pos: f64,
    pub w_neg: f64,
    pub successes: u64,
    pub failures: u64,
}

impl WeightEntry {
    pub fn new(w_pos: f64, w_neg: f64) -> Self {
        Self {
            w_pos,
            w_neg,
            successes: 0,
            failures: 0,
        }
    }

    /// Entry after folding in one outcome.
    pub fn updated(self, outcome: ChoiceOutcome) -> Self {
        let mut next = self;
        match outcome {
            ChoiceOutcome::Success => {
                next.w_pos = (self.w_pos + 1.0) / 2.0;
                next.w_neg = self.w_neg / 2.0;
                next.successes += 1;
            }
            ChoiceOutcome::Failure => {
                next.w_pos = self.w_pos / 2.0;
                next.w_neg = (self.w_neg + 1.0) / 2.0;
                next.failures += 1;
            }
        }
        next.w_pos = next.w_pos.clamp(0.0, 1.0);
        next.w_neg = next.w_neg.clamp(0.0, 1.0);
        next
    }

    pub fn is_zero(&self) -> bool {
        self.w_pos == 0.0 && self.w_neg == 0.0 && self.successes == 0 && self.failures == 0
    }
}

fn in_unit_range(w: f64) -> bool {
    (0.0..=1.0).contains(&w)
}

/// Weights for every (choice node, option) pair seen so far.
///
/// Insertion order is kept so that equal-weight rankings follow the order in
/// which options were declared. Equality ignores order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightTable {
    nodes: IndexMap<String, IndexMap<String, WeightEntry>>,
}

impl WeightTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn entry(&self, node: &str, option: &str) -> Option<&WeightEntry> {
        self.nodes.get(node).and_then(|opts| opts.get(option))
    }

    fn put(&mut self, node: &str, option: &str, entry: WeightEntry) {
        let opts = match self.nodes.get_mut(node) {
            Some(opts) => opts,
            None => self.nodes.entry(node.to_owned()).or_default(),
        };
        match opts.get_mut(option) {
            Some(slot) => *slot = entry,
            None => {
                opts.insert(option.to_owned(), entry);
            }
        }
    }

    /// Entry for `(node, option)`; absent entries read as all zeros.
    pub fn get(&self, node: &str, option: &str) -> WeightEntry {
        self.entry(node, option).copied().unwrap_or_default()
    }

    pub fn contains(&self, node: &str, option: &str) -> bool {
        self.entry(node, option).is_some()
    }

    pub fn set(&mut self, node: &str, option: &str, entry: WeightEntry) -> Result<(), DecisionError> {
        for value in [entry.w_pos, entry.w_neg] {
            if !in_unit_range(value) {
                return Err(DecisionError::WeightOutOfRange {
                    node: node.to_owned(),
                    option: option.to_owned(),
                    value,
                });
            }
        }
        self.put(node, option, entry);
        Ok(())
    }

    /// Seeds a fresh entry with zeroed counters.
    pub fn seed(&mut self, node: &str, option: &str, w_pos: f64, w_neg: f64) -> Result<(), DecisionError> {
        self.set(node, option, WeightEntry::new(w_pos, w_neg))
    }

    pub fn len(&self) -> usize {
        self.nodes.values().map(IndexMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entries grouped by node, nodes in order of first appearance.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &WeightEntry)> {
        self.nodes.iter().flat_map(|(node, opts)| {
            opts.iter()
                .map(move |(option, e)| (node.as_str(), option.as_str(), e))
        })
    }

    /// Options recorded for `node`, in insertion order.
    pub fn options_of<'a>(&'a self, node: &str) -> impl Iterator<Item = (&'a str, &'a WeightEntry)> + 'a {
        self.nodes
            .get(node)
            .into_iter()
            .flat_map(|opts| opts.iter().map(|(o, e)| (o.as_str(), e)))
    }

    /// True when every stored entry (if any) is zero.
    pub fn is_all_zero(&self) -> bool {
        self.iter().all(|(_, _, e)| e.is_zero())
    }
}

/// Picks one of `options` at `node`.
///
/// Exact ties on the failure weight are broken by drawing an index uniformly
/// from the tied options, taken in the order they appear in `options`.
pub fn select_option<'o, S, R>(
    table: &WeightTable,
    node: &str,
    options: &'o [S],
    rng: &mut R,
) -> Result<&'o str, DecisionError>
where
    S: AsRef<str>,
    R: Rng + ?Sized,
{
    if options.is_empty() {
        return Err(DecisionError::EmptyOptions {
            node: node.to_owned(),
        });
    }
    let entries: Vec<WeightEntry> = options
        .iter()
        .map(|o| table.get(node, o.as_ref()))
        .collect();

    let best = entries
        .iter()
        .map(|e| e.w_pos)
        .fold(f64::NEG_INFINITY, f64::max);
    let candidates: Vec<usize> = (0..options.len())
        .filter(|&i| best - entries[i].w_pos <= POSITIVE_TOLERANCE + TOLERANCE_SLACK)
        .collect();
    if candidates.len() == 1 {
        return Ok(options[candidates[0]].as_ref());
    }

    let least_neg = candidates
        .iter()
        .map(|&i| entries[i].w_neg)
        .fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = candidates
        .into_iter()
        .filter(|&i| entries[i].w_neg == least_neg)
        .collect();
    let pick = if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    };
    Ok(options[pick].as_ref())
}

/// Folds `outcome` into the entry for `(node, option)` and returns the new entry.
pub fn record_outcome(
    table: &mut WeightTable,
    node: &str,
    option: &str,
    outcome: ChoiceOutcome,
) -> WeightEntry {
    let next = table.get(node, option).updated(outcome);
    table.put(node, option, next);
    next
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedOption {
    pub option: String,
    pub w_pos: f64,
    pub w_neg: f64,
}

/// Options of `node` sorted by success weight, highest first.
/// Equal weights keep declaration order.
pub fn ranked_options(table: &WeightTable, node: &str) -> Vec<RankedOption> {
    let mut ranked: Vec<RankedOption> = table
        .options_of(node)
        .map(|(option, e)| RankedOption {
            option: option.to_owned(),
            w_pos: e.w_pos,
            w_neg: e.w_neg,
        })
        .collect();
    ranked.sort_by(|a, b| b.w_pos.total_cmp(&a.w_pos));
    ranked
}
