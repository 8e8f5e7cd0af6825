//! Nomination validity and interpretation accuracy scores.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{mechanism_of, Direction, Mechanism, MechanismSummary};
use crate::terms::{parse_lenient, ModelSpec, TermUniverse};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominationScore {
    /// Admissible share of the distinct nominations.
    pub precision: f64,
    /// Share of the universe that was nominated.
    pub recall: f64,
    /// Share of nominations outside the universe.
    pub offmenu: f64,
    /// Set when nothing was nominated; the ratios are then reported as 0.
    pub empty: bool,
}

/// Scores raw nominated term strings against a universe.
///
/// Strings are canonicalized leniently and deduplicated first; unparseable
/// ones count as distinct off-menu nominations.
pub fn score_nominations<S: AsRef<str>>(
    nominations: &[S],
    universe: &TermUniverse,
) -> NominationScore {
    let mut distinct: BTreeSet<String> = BTreeSet::new();
    let mut admissible = 0usize;
    for raw in nominations {
        let raw = raw.as_ref();
        let (key, ok) = match parse_lenient(raw) {
            Ok(t) => {
                let ok = universe.contains(&t);
                (t.to_string(), ok)
            }
            Err(_) => (format!("\u{0}{raw}"), false),
        };
        if distinct.insert(key) && ok {
            admissible += 1;
        }
    }
    if distinct.is_empty() {
        return NominationScore {
            precision: 0.0,
            recall: 0.0,
            offmenu: 0.0,
            empty: true,
        };
    }
    let n = distinct.len() as f64;
    NominationScore {
        precision: admissible as f64 / n,
        recall: admissible as f64 / universe.len().max(1) as f64,
        offmenu: (distinct.len() - admissible) as f64 / n,
        empty: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpretationScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Share of correctly signed claims among supported claims that state a direction.
    pub directional_accuracy: f64,
    /// Share of claimed mechanisms with no supporting term.
    pub overreach: f64,
    /// Share of fitted mechanisms the summary leaves out.
    pub omission: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Compares a summary's mechanism claims with those implied by the fitted terms.
pub fn score_interpretation(
    summary: &MechanismSummary,
    spec: &ModelSpec,
    theta: &[f64],
) -> InterpretationScore {
    let claimed: BTreeSet<Mechanism> = summary.claims.iter().map(|c| c.mechanism).collect();
    let reference: BTreeSet<Mechanism> = spec
        .terms()
        .iter()
        .map(|t| mechanism_of(t.family()))
        .collect();
    let hit = claimed.intersection(&reference).count();

    let precision = ratio(hit, claimed.len());
    let recall = ratio(hit, reference.len());
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };

    let truth = |m: Mechanism| {
        Direction::combine(
            spec.terms()
                .iter()
                .zip(theta)
                .filter(|(t, _)| mechanism_of(t.family()) == m)
                .map(|(_, &x)| x),
        )
    };
    let mut directed = 0;
    let mut correct = 0;
    for c in summary
        .claims
        .iter()
        .filter(|c| reference.contains(&c.mechanism))
    {
        if let Some(d) = c.direction {
            directed += 1;
            correct += (Some(d) == truth(c.mechanism)) as usize;
        }
    }
    // nothing to get wrong counts as fully accurate
    let directional_accuracy = if directed == 0 {
        1.0
    } else {
        ratio(correct, directed)
    };

    InterpretationScore {
        precision,
        recall,
        f1,
        directional_accuracy,
        overreach: ratio(claimed.difference(&reference).count(), claimed.len()),
        omission: ratio(reference.difference(&claimed).count(), reference.len()),
    }
}
