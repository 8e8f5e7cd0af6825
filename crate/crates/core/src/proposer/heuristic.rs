//! Rule-based engine. Pure functions of their inputs.

use crate::estim::FitResult;
use crate::gof::{GofGroup, GofReport};
use crate::network::{AttributeKind, DegreeDiagnostics, Diagnostics, Metadata};
use crate::terms::{Decay, Family, ModelSpec, Term, DECAY_GRID, MAX_TERMS};

use super::{
    mechanism_of, reference_summary, EditProposal, MechanismSummary, Nomination, ProposalEngine,
    ProposerError, SpecProposal, Strength,
};

/// Reciprocity above which `mutual` is nominated.
pub const RECIPROCITY_THRESHOLD: f64 = 0.1;
/// Clustering above which shared-partner terms are nominated.
pub const CLUSTERING_THRESHOLD: f64 = 0.05;
/// Degree variance-to-mean ratio above which degree terms are nominated.
pub const DISPERSION_THRESHOLD: f64 = 1.5;

const PREFERRED_DECAY: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicEngine;

fn grid() -> impl Iterator<Item = Decay> {
    DECAY_GRID.iter().map(|&d| Decay::new(d).unwrap())
}

fn preferred() -> Decay {
    Decay::new(PREFERRED_DECAY).unwrap()
}

fn nominate(out: &mut Vec<Nomination>, term: Term, why: String) {
    out.push(Nomination {
        term: term.to_string(),
        mechanism: mechanism_of(term.family()).to_string(),
        justification: why,
    });
}

fn is_structural(t: &Term) -> bool {
    t.attribute().is_none() && *t != Term::Edges
}

/// One term per structural family, at the preferred decay when offered.
/// A raw triangle count gives way to gwesp.
fn structural_picks(admissible: &[Term]) -> Vec<Term> {
    let mut picks: Vec<Term> = Vec::new();
    for t in admissible.iter().filter(|t| is_structural(t)) {
        match picks.iter_mut().find(|p| p.family() == t.family()) {
            Some(p) if t.decay() == Some(preferred()) => *p = t.clone(),
            Some(_) => {}
            None => picks.push(t.clone()),
        }
    }
    if picks.iter().any(|p| p.family() == Family::Gwesp) {
        picks.retain(|p| *p != Term::Triangle);
    }
    picks.sort();
    picks
}

fn with_edges(rest: &[Term]) -> Vec<Term> {
    let mut v = vec![Term::Edges];
    v.extend(rest.iter().take(MAX_TERMS - 1).cloned());
    v
}

/// Grid neighbour of `d`; `up` picks the larger one when both exist.
fn neighbour(d: Decay, up: bool) -> Option<Decay> {
    let pos = DECAY_GRID.iter().position(|&g| g == d.get())?;
    let next = if up { pos + 1 } else { pos.wrapping_sub(1) };
    let other = if up { pos.wrapping_sub(1) } else { pos + 1 };
    DECAY_GRID
        .get(next)
        .or_else(|| DECAY_GRID.get(other))
        .and_then(|&x| Decay::new(x))
}

/// What one unit of the term's change statistic stands for.
fn counted(term: &Term) -> String {
    let attr = term.attribute().unwrap_or("");
    match term.family() {
        Family::Edges => "any tie".into(),
        Family::Mutual => "a tie that returns an existing one".into(),
        Family::Triangle | Family::Gwesp => {
            "a tie that closes triangles with shared partners".into()
        }
        Family::Twopath | Family::Gwdsp => "a tie that opens two-paths".into(),
        Family::Gwdegree | Family::Gwidegree | Family::Gwodegree => {
            "a tie at a node that has few ties so far".into()
        }
        Family::Nodematch => format!("a tie between nodes with the same {attr}"),
        Family::Nodefactor => format!("a tie at a node outside the baseline {attr} level"),
        Family::Nodecov => format!("a tie between nodes with high {attr}"),
        Family::Absdiff => format!("a tie between nodes far apart in {attr}"),
    }
}

impl HeuristicEngine {
    fn retune(
        &self,
        spec: &ModelSpec,
        term: &Term,
        gof: &GofReport,
        group: GofGroup,
        admissible: &[Term],
    ) -> Option<EditProposal> {
        // a positive residual in the top bin asks for more weight on high counts
        let up = gof
            .group(group)
            .and_then(|g| g.bins.last())
            .is_some_and(|b| b.z > 0.0);
        let d = neighbour(term.decay()?, up)?;
        let new = term.with_decay(d)?;
        (admissible.contains(&new) && !spec.contains(&new)).then(|| {
            EditProposal::replace(
                term,
                &new,
                format!("{group} misfit persists; move the decay to {}", d.get()),
            )
        })
    }

    fn add_or_retune(
        &self,
        spec: &ModelSpec,
        family: Family,
        gof: &GofReport,
        group: GofGroup,
        admissible: &[Term],
    ) -> Option<EditProposal> {
        match spec.terms().iter().find(|t| t.family() == family) {
            Some(current) => self.retune(spec, current, gof, group, admissible),
            None => {
                let new = Term::from_parts(family, None, Some(PREFERRED_DECAY))?;
                if !admissible.contains(&new) {
                    return None;
                }
                let why = format!("largest residuals are in the {group} distribution");
                if family == Family::Gwesp && spec.contains(&Term::Triangle) {
                    Some(EditProposal::replace(&Term::Triangle, &new, why))
                } else {
                    Some(EditProposal::add(&new, why))
                }
            }
        }
    }
}

impl ProposalEngine for HeuristicEngine {
    fn id(&self) -> String {
        "heuristic".to_owned()
    }

    fn propose_terms(
        &self,
        diagnostics: &Diagnostics,
        metadata: &Metadata,
        _query: &str,
    ) -> Result<Vec<Nomination>, ProposerError> {
        let mut out = Vec::new();
        nominate(&mut out, Term::Edges, "baseline tie propensity".into());
        if metadata.directed {
            if let Some(r) = diagnostics
                .reciprocity
                .filter(|&r| r > RECIPROCITY_THRESHOLD)
            {
                nominate(&mut out, Term::Mutual, format!("reciprocity {r:.3}"));
            }
        }
        let c = diagnostics.clustering;
        if c > CLUSTERING_THRESHOLD {
            for d in grid() {
                nominate(&mut out, Term::Gwesp(d), format!("clustering {c:.3}"));
            }
            for d in grid() {
                nominate(&mut out, Term::Gwdsp(d), format!("clustering {c:.3}"));
            }
        }
        let degree_terms: Vec<(f64, fn(Decay) -> Term)> = match &diagnostics.degrees {
            DegreeDiagnostics::Undirected { degree } => vec![(degree.dispersion(), Term::Gwdegree)],
            DegreeDiagnostics::Directed {
                in_degree,
                out_degree,
            } => vec![
                (in_degree.dispersion(), Term::Gwidegree),
                (out_degree.dispersion(), Term::Gwodegree),
            ],
        };
        for (disp, make) in degree_terms {
            if disp > DISPERSION_THRESHOLD {
                for d in grid() {
                    nominate(&mut out, make(d), format!("degree dispersion {disp:.2}"));
                }
            }
        }
        for a in metadata.attributes.iter().filter(|a| a.usable) {
            match a.kind {
                AttributeKind::Categorical => nominate(
                    &mut out,
                    Term::Nodematch(a.name.clone()),
                    format!("categorical `{}`", a.name),
                ),
                AttributeKind::Numeric => {
                    nominate(
                        &mut out,
                        Term::Absdiff(a.name.clone()),
                        format!("numeric `{}`", a.name),
                    );
                    nominate(
                        &mut out,
                        Term::Nodecov(a.name.clone()),
                        format!("numeric `{}`", a.name),
                    );
                }
            }
        }
        Ok(out)
    }

    fn propose_specs(
        &self,
        admissible: &[Term],
        _diagnostics: &Diagnostics,
        _query: &str,
    ) -> Result<Vec<SpecProposal>, ProposerError> {
        let structure = structural_picks(admissible);
        let attributes: Vec<Term> = admissible
            .iter()
            .filter(|t| t.attribute().is_some())
            .cloned()
            .collect();
        let combined: Vec<Term> = structure.iter().chain(&attributes).cloned().collect();
        let mut lean = Vec::new();
        lean.extend(structure.first().cloned());
        lean.extend(attributes.first().cloned());

        let mut ladder = vec![
            (
                "structure".to_owned(),
                with_edges(&structure),
                "structural terms only".to_owned(),
            ),
            (
                "attributes".to_owned(),
                with_edges(&attributes),
                "attribute terms only".to_owned(),
            ),
            (
                "combined".to_owned(),
                with_edges(&combined),
                "structure and attributes together".to_owned(),
            ),
            (
                "parsimonious".to_owned(),
                with_edges(&lean),
                "one structural and one attribute term".to_owned(),
            ),
        ];
        // single additions to the density baseline
        for t in &combined {
            ladder.push((
                format!("single:{t}"),
                with_edges(std::slice::from_ref(t)),
                format!("{t} on its own"),
            ));
        }
        let mut out: Vec<SpecProposal> = Vec::new();
        let mut seen: Vec<Vec<Term>> = Vec::new();
        for (id, terms, why) in ladder {
            if terms.len() < 2 || seen.contains(&terms) {
                continue;
            }
            seen.push(terms.clone());
            out.push(SpecProposal {
                id,
                terms: terms.iter().map(Term::to_string).collect(),
                rationale: why,
            });
        }
        if out.is_empty() {
            out.push(SpecProposal {
                id: "baseline".into(),
                terms: vec![Term::Edges.to_string()],
                rationale: "no admissible term beyond edges".into(),
            });
        }
        Ok(out)
    }

    fn propose_edit(
        &self,
        spec: &ModelSpec,
        fit: &FitResult,
        gof: &GofReport,
        admissible: &[Term],
    ) -> Result<EditProposal, ProposerError> {
        if gof.adequate {
            return spec
                .terms()
                .iter()
                .zip(&fit.theta)
                .filter(|(t, _)| **t != Term::Edges)
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(t, th)| {
                    EditProposal::remove(
                        t,
                        format!("fit is adequate; smallest coefficient {th:.3}"),
                    )
                })
                .ok_or_else(|| ProposerError::NoEdit("adequate edges-only model".into()));
        }
        let group = gof
            .worst_group()
            .ok_or_else(|| ProposerError::NoEdit("no residual to act on".into()))?;
        let edit = match group {
            GofGroup::Esp => self.add_or_retune(spec, Family::Gwesp, gof, group, admissible),
            GofGroup::Degree => self.add_or_retune(spec, Family::Gwdegree, gof, group, admissible),
            GofGroup::InDegree => {
                self.add_or_retune(spec, Family::Gwidegree, gof, group, admissible)
            }
            GofGroup::OutDegree => {
                self.add_or_retune(spec, Family::Gwodegree, gof, group, admissible)
            }
            GofGroup::Geodesic => {
                if spec.terms().iter().any(|t| t.family() == Family::Gwesp) {
                    self.add_or_retune(spec, Family::Gwdsp, gof, group, admissible)
                } else {
                    self.add_or_retune(spec, Family::Gwesp, gof, group, admissible)
                }
            }
        };
        edit.ok_or_else(|| ProposerError::NoEdit(format!("no remedy left for {group} misfit")))
    }

    fn synthesize(
        &self,
        spec: &ModelSpec,
        theta: &[f64],
        _metadata: &Metadata,
    ) -> Result<MechanismSummary, ProposerError> {
        let mut summary = reference_summary(spec, theta);
        let mut text = String::new();
        for c in &summary.claims {
            let strength = match c.strength {
                Some(Strength::Weak) => "weak",
                Some(Strength::Moderate) => "moderate",
                _ => "strong",
            };
            let clauses: Vec<String> = c
                .terms
                .iter()
                .filter_map(|e| {
                    let term: Term = e.term.parse().ok()?;
                    let verb = if e.coefficient < 0.0 {
                        "lowers"
                    } else {
                        "raises"
                    };
                    Some(format!(
                        "{} ({:+.3}) {verb} the log-odds of {}",
                        e.term,
                        e.coefficient,
                        counted(&term)
                    ))
                })
                .collect();
            text.push_str(&format!(
                "- {} ({strength}): {}.\n",
                c.mechanism,
                clauses.join("; ")
            ));
        }
        summary.text = text;
        Ok(summary.filtered(spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{AttributeColumn, Network};
    use crate::terms::{enumerate_universe, parse_lenient};

    fn d(x: f64) -> Decay {
        Decay::new(x).unwrap()
    }

    #[test]
    fn ladder_example() {
        let admissible = vec![
            Term::Edges,
            Term::Gwesp(d(0.5)),
            Term::Nodematch("g".into()),
        ];
        let net = Network::empty(3, false);
        let specs = HeuristicEngine
            .propose_specs(&admissible, &net.diagnostics(), "")
            .unwrap();
        let lists: Vec<Vec<String>> = specs.into_iter().map(|s| s.terms).collect();
        assert_eq!(
            lists,
            vec![
                vec!["edges".to_string(), "gwesp(decay=0.5)".into()],
                vec!["edges".to_string(), "nodematch(attr=g)".into()],
                vec![
                    "edges".to_string(),
                    "gwesp(decay=0.5)".into(),
                    "nodematch(attr=g)".into()
                ],
            ]
        );
        let only = HeuristicEngine
            .propose_specs(&[Term::Edges], &net.diagnostics(), "")
            .unwrap();
        assert_eq!(only.len(), 1);
        assert_eq!(only[0].terms, vec!["edges".to_string()]);
    }

    #[test]
    fn structural_picks_prefer_middle_decay() {
        let adm = vec![
            Term::Edges,
            Term::Gwesp(d(0.25)),
            Term::Gwesp(d(0.5)),
            Term::Gwesp(d(0.75)),
            Term::Gwdsp(d(0.75)),
            Term::Triangle,
        ];
        assert_eq!(
            structural_picks(&adm),
            vec![Term::Gwesp(d(0.5)), Term::Gwdsp(d(0.75))]
        );
    }

    #[test]
    fn clustered_undirected_nominations() {
        // two triangles sharing a node plus a categorical attribute
        let net = Network::from_edges(5, false, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)])
            .unwrap()
            .with_attribute(
                "g",
                AttributeColumn::categorical(&[
                    Some("a"),
                    Some("a"),
                    Some("b"),
                    Some("b"),
                    Some("a"),
                ]),
            )
            .unwrap();
        let noms = HeuristicEngine
            .propose_terms(&net.diagnostics(), &net.metadata(), "")
            .unwrap();
        let terms: Vec<Term> = noms
            .iter()
            .map(|n| parse_lenient(&n.term).unwrap())
            .collect();
        let universe = enumerate_universe(&net);
        assert!(terms.iter().all(|t| universe.contains(t)));
        assert!(terms.contains(&Term::Nodematch("g".into())));
        assert_eq!(
            terms.iter().filter(|t| t.family() == Family::Gwesp).count(),
            3
        );
        assert!(!terms.contains(&Term::Nodefactor("g".into())));
    }

    #[test]
    fn no_mutual_without_reciprocity() {
        let net = Network::from_edges(3, true, [(0, 1), (1, 2)]).unwrap();
        let noms = HeuristicEngine
            .propose_terms(&net.diagnostics(), &net.metadata(), "")
            .unwrap();
        assert!(noms.iter().all(|n| n.term != "mutual"));
    }

    #[test]
    fn neighbours() {
        assert_eq!(neighbour(d(0.5), true), Some(d(0.75)));
        assert_eq!(neighbour(d(0.75), true), Some(d(0.5)));
        assert_eq!(neighbour(d(0.25), false), Some(d(0.5)));
        assert_eq!(neighbour(d(0.3), false), None);
    }
}
