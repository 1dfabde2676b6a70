//! From a validated certificate plus a feasible assignment back to a
//! concrete subdivision and full firing schedule: pair replication by the
//! gap variables, interior insertion for engulfed edges, the staircase
//! schedule moving chips along each departure/arrival window, and replay
//! verification of the result.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::certificate::{validate, Pair, PartialCertificate};
use crate::chip_firing::{run_script, Divisor, FiringScript, ScriptError};
use crate::ilp::{
    build_ilp, check_assignment, gap_var, length_var, target_traffic, EdgeTransit, IlpAssignment,
    IlpError,
};
use crate::multigraph::{
    expand_by_lengths, EdgeIx, Multigraph, SubdivisionError, SubdivisionMap, Vertex,
};
use crate::witness::Witness;

#[derive(Debug, Error)]
pub enum ExpansionError {
    #[error("certificate has {0} violations; expansion requires a validated certificate")]
    CertificateInvalid(usize),
    #[error("assignment does not satisfy the certificate's integer program")]
    AssignmentRejected,
    #[error("assignment is missing variable {0:?}")]
    MissingVariable(String),
    #[error(
        "window of edge {edge:?} for target {target:?} violates the transit inequalities"
    )]
    InequalityViolation { edge: String, target: String },
    #[error(
        "in-transit chips on edge {edge:?} for target {target:?} cannot absorb {positions} trailing firings with length {length}"
    )]
    TrailingOverflow {
        edge: String,
        target: String,
        positions: usize,
        length: u64,
    },
    #[error(transparent)]
    Ilp(#[from] IlpError),
    #[error(transparent)]
    Subdivision(#[from] SubdivisionError),
    #[error(transparent)]
    Script(#[from] ScriptError),
}

/// A certificate pair sequence replicated by its gap values: block `i` of
/// the original sequence is copied `t[w,i]` times, the final block once.
#[derive(Debug, Clone)]
pub struct ReplicatedSequence {
    /// Base-vertex sets per expanded position.
    pub sets: Vec<BTreeSet<Vertex>>,
    /// 0-based start position of each original block.
    pub block_start: Vec<usize>,
}

/// Copies each pair's set `gaps[i]` times (the final set once), preserving
/// block structure. `gaps` holds the `t` values for pairs `1..a_w`; the last
/// entry is ignored in favour of the single final copy.
pub fn replicate_sets(pairs: &[Pair], gaps: &[u64]) -> ReplicatedSequence {
    let mut sets = Vec::new();
    let mut block_start = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        block_start.push(sets.len());
        let copies = if i + 1 == pairs.len() {
            1
        } else {
            gaps[i] as usize
        };
        for _ in 0..copies {
            sets.push(pair.set.clone());
        }
    }
    ReplicatedSequence { sets, block_start }
}

/// The staircase schedule of one departure/arrival window: how many interior
/// vertices (counted from the departure endpoint) each of the window's
/// `sum_t` sets includes. Requires the transit inequalities
/// `q*l + (p-q) <= sum_t <= p*l - (p-q)`; the `p = q` case forces
/// `sum_t = p*l` and a plain staircase with no wide steps.
pub fn schedule_interior(
    transit: &EdgeTransit,
    l_e: u64,
    sum_t: u64,
) -> Result<Vec<u64>, ExpansionError> {
    let p = transit.p();
    let q = transit.q();
    let lower = q * l_e + (p - q);
    let upper = p * l_e - (p - q);
    if p < q || sum_t < lower || sum_t > upper {
        return Err(ExpansionError::InequalityViolation {
            edge: String::new(),
            target: String::new(),
        });
    }
    let r = sum_t - q * l_e;
    let steps = if p == q { 0 } else { r / (p - q) };
    let mut prefixes = Vec::with_capacity(sum_t as usize);
    for c in 0..steps {
        for _ in 0..p {
            prefixes.push(c);
        }
    }
    let middle = q + r - (p - q) * steps;
    for _ in 0..middle {
        prefixes.push(steps);
    }
    for c in steps + 1..l_e {
        for _ in 0..q {
            prefixes.push(c);
        }
    }
    debug_assert_eq!(prefixes.len() as u64, sum_t);
    Ok(prefixes)
}

/// Reconstructs the subdivision and the full firing schedule of a validated
/// certificate under a feasible assignment. The result is a witness whose
/// scripts replay the certificate's chip traffic.
pub fn expand_certificate(
    g1: &Multigraph,
    cert: &PartialCertificate,
    assignment: &IlpAssignment,
) -> Result<Witness, ExpansionError> {
    let violations = validate(g1, cert);
    if !violations.is_empty() {
        return Err(ExpansionError::CertificateInvalid(violations.len()));
    }
    let instance = build_ilp(g1, cert)?;
    if !check_assignment(&instance, assignment)? {
        return Err(ExpansionError::AssignmentRejected);
    }

    let lengths: BTreeMap<String, u64> = g1
        .edges()
        .iter()
        .map(|e| {
            let var = length_var(&e.id);
            assignment
                .get(&var)
                .map(|l| (e.id.clone(), l))
                .ok_or(ExpansionError::MissingVariable(var))
        })
        .collect::<Result<_, _>>()?;
    let h = expand_by_lengths(&SubdivisionMap::identity(g1), &lengths)?;
    let derived = h.derived();

    let mut scripts = BTreeMap::new();
    for target in g1.vertices() {
        let pairs = cert.pairs_for(target);
        if pairs.is_empty() {
            continue;
        }
        let label = g1.vertex_label(target);
        let gaps: Vec<u64> = (1..=pairs.len())
            .map(|i| {
                let var = gap_var(label, i);
                assignment.get(&var).ok_or(ExpansionError::MissingVariable(var))
            })
            .collect::<Result<_, _>>()?;
        let repl = replicate_sets(pairs, &gaps);
        let width = |block: usize| -> usize {
            if block == pairs.len() {
                1
            } else {
                gaps[block - 1] as usize
            }
        };

        // Base sets mapped into H.
        let mut expanded: Vec<BTreeSet<Vertex>> = repl
            .sets
            .iter()
            .map(|s| s.iter().map(|&v| h.map_vertex(v)).collect())
            .collect();

        // Both endpoints inside: the whole path joins the set.
        for (eix, e) in g1.edges().iter().enumerate() {
            let path = h.path(EdgeIx(eix));
            for (pos, base_set) in repl.sets.iter().enumerate() {
                if base_set.contains(&e.ends[0]) && base_set.contains(&e.ends[1]) {
                    expanded[pos].extend(path.interior().iter().copied());
                }
            }
        }

        let traffic = target_traffic(cert, target);

        // Complete windows: staircase insertion along the window positions.
        for (&edge, transit) in &traffic.windows {
            let tail = departure_endpoint(cert, target, edge);
            let l_e = lengths[&g1.edge(edge).id];
            let start = repl.block_start[transit.i0 - 1];
            let end = repl.block_start[transit.i3 - 1] + width(transit.i3);
            let sum_t = (end - start) as u64;
            let prefixes = schedule_interior(transit, l_e, sum_t).map_err(|e| match e {
                ExpansionError::InequalityViolation { .. } => {
                    ExpansionError::InequalityViolation {
                        edge: g1.edge(edge).id.clone(),
                        target: label.to_string(),
                    }
                }
                other => other,
            })?;
            let interiors = oriented_interiors(g1, &h, edge, tail);
            for (offset, &prefix) in prefixes.iter().enumerate() {
                expanded[start + offset].extend(interiors[..prefix as usize].iter().copied());
            }
        }

        // Departure-only edges: chips stay in transit. The stack left on the
        // first interior drains forward one step per trailing firing until
        // the head joins the set or the script ends.
        for (&edge, &(i0, i1)) in &traffic.departures_only {
            let tail = departure_endpoint(cert, target, edge);
            let head = g1.edge(edge).other_end(tail).unwrap();
            let l_e = lengths[&g1.edge(edge).id];
            let p = (i1 - i0 + 1) as u64;
            let last_dep = repl.block_start[i1 - 1];
            let trailing_end = (last_dep + 1..repl.sets.len())
                .find(|&pos| repl.sets[pos].contains(&head))
                .unwrap_or(repl.sets.len());
            let interiors = oriented_interiors(g1, &h, edge, tail);
            for (s, pos) in (last_dep + 1..trailing_end).enumerate() {
                let stage = (s as u64) / p + 1;
                if stage + 1 > l_e {
                    return Err(ExpansionError::TrailingOverflow {
                        edge: g1.edge(edge).id.clone(),
                        target: label.to_string(),
                        positions: trailing_end - last_dep - 1,
                        length: l_e,
                    });
                }
                for later in pos..trailing_end {
                    expanded[later].extend(interiors[..stage as usize].iter().copied());
                }
            }
        }

        let script = FiringScript::new(derived, expanded)?;
        scripts.insert(target, script);
    }

    let mut start = Divisor::zero(derived);
    for j in 1..=cert.start.degree() {
        start.add(h.map_vertex(cert.start.chip(j)), 1);
    }
    Ok(Witness { h, start, scripts })
}

fn departure_endpoint(cert: &PartialCertificate, target: Vertex, edge: EdgeIx) -> Vertex {
    cert.pairs_for(target)
        .iter()
        .flat_map(|p| p.moves.iter())
        .find(|t| t.is_departure() && t.edge == edge)
        .map(|t| t.vertex)
        .expect("window edges have at least one departure")
}

/// Interior vertices of `edge`'s path ordered from the departure endpoint.
fn oriented_interiors(
    g1: &Multigraph,
    h: &SubdivisionMap,
    edge: EdgeIx,
    tail: Vertex,
) -> Vec<Vertex> {
    let path = h.path(edge);
    let mut interiors: Vec<Vertex> = path.interior().to_vec();
    if g1.edge(edge).ends[0] != tail {
        interiors.reverse();
    }
    interiors
}

/// Why an expansion failed verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyFailure {
    /// A script set was invalid during replay.
    InvalidSet { target: String, index: usize },
    /// A replay finished without a chip on its target.
    TargetUnreached { target: String },
    /// An interior vertex of the subdivision is never reached.
    InteriorUnreached { vertex: String },
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub failures: Vec<VerifyFailure>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Replays every target script and checks that each replay is legal and ends
/// with a chip on its target, and that every interior vertex of the
/// subdivision is reached: a chip lands on it or crosses it during some
/// replay, or some divisor along some replay covers both endpoints of its
/// carrier edge simultaneously.
pub fn verify_expansion(
    h: &SubdivisionMap,
    start: &Divisor,
    scripts: &BTreeMap<Vertex, FiringScript>,
) -> VerifyReport {
    let base = h.origin();
    let derived = h.derived();
    let mut failures = Vec::new();
    let mut ever_chipped: Vec<bool> = start.counts().iter().map(|&c| c > 0).collect();
    let mut both_covered = vec![false; base.edge_count()];
    let empty = FiringScript::empty();

    let mark_both = |d: &Divisor, both: &mut Vec<bool>| {
        for (i, e) in base.edges().iter().enumerate() {
            if !both[i]
                && d.get(h.map_vertex(e.ends[0])) >= 1
                && d.get(h.map_vertex(e.ends[1])) >= 1
            {
                both[i] = true;
            }
        }
    };
    mark_both(start, &mut both_covered);

    for target in base.vertices() {
        let script = scripts.get(&target).unwrap_or(&empty);
        match run_script(derived, start, script) {
            Err(crate::chip_firing::ChipError::InvalidSetAtIndex { index }) => {
                failures.push(VerifyFailure::InvalidSet {
                    target: base.vertex_label(target).to_string(),
                    index,
                });
            }
            Err(_) => unreachable!("run_script only fails with an index"),
            Ok(trajectory) => {
                for state in &trajectory {
                    for (v, &c) in state.counts().iter().enumerate() {
                        if c > 0 {
                            ever_chipped[v] = true;
                        }
                    }
                    mark_both(state, &mut both_covered);
                }
                if trajectory.last().unwrap().get(h.map_vertex(target)) == 0 {
                    failures.push(VerifyFailure::TargetUnreached {
                        target: base.vertex_label(target).to_string(),
                    });
                }
            }
        }
    }

    for (eix, _) in base.edges().iter().enumerate() {
        for &x in h.path(EdgeIx(eix)).interior() {
            if !ever_chipped[x.0] && !both_covered[eix] {
                failures.push(VerifyFailure::InteriorUnreached {
                    vertex: derived.vertex_label(x).to_string(),
                });
            }
        }
    }
    VerifyReport { failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::test_fixtures::{figure_certificate_json, parallel_pair};
    use crate::certificate::PartialCertificate;
    use crate::ilp::solve;

    fn figure_setup() -> (Multigraph, PartialCertificate, IlpAssignment) {
        let g = parallel_pair();
        let cert = PartialCertificate::from_json(&g, &figure_certificate_json()).unwrap();
        let inst = build_ilp(&g, &cert).unwrap();
        let assignment = solve(&inst, 100).unwrap();
        (g, cert, assignment)
    }

    #[test]
    fn replication_block_sizes() {
        let (g, cert, assignment) = figure_setup();
        let v = g.vertex_by_label("v").unwrap();
        let gaps: Vec<u64> = (1..=8)
            .map(|i| assignment.get(&gap_var("v", i)).unwrap())
            .collect();
        let repl = replicate_sets(cert.pairs_for(v), &gaps);
        assert_eq!(repl.sets.len(), 12);
        assert_eq!(repl.block_start, vec![0, 1, 2, 3, 8, 9, 10, 11]);
    }

    #[test]
    fn replication_identity_when_all_gaps_one() {
        let (g, cert, _) = figure_setup();
        let v = g.vertex_by_label("v").unwrap();
        let repl = replicate_sets(cert.pairs_for(v), &[1; 8]);
        assert_eq!(repl.sets.len(), 8);
    }

    #[test]
    fn replication_copies_plus_final() {
        let (g, cert, _) = figure_setup();
        let v = g.vertex_by_label("v").unwrap();
        let two_pairs = &cert.pairs_for(v)[..2];
        let repl = replicate_sets(two_pairs, &[3, 1]);
        assert_eq!(repl.sets.len(), 4);
    }

    #[test]
    fn staircase_even_window() {
        // Four departures, four arrivals, length 3, twelve sets.
        let tr = EdgeTransit { i0: 1, i1: 4, i2: 5, i3: 8 };
        let prefixes = schedule_interior(&tr, 3, 12).unwrap();
        assert_eq!(prefixes, vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]);
    }

    #[test]
    fn staircase_uneven_window() {
        // Two departures, one arrival, length 2, three sets: unique schedule.
        let tr = EdgeTransit { i0: 1, i1: 2, i2: 3, i3: 3 };
        let prefixes = schedule_interior(&tr, 2, 3).unwrap();
        assert_eq!(prefixes, vec![0, 0, 1]);
    }

    #[test]
    fn staircase_rejects_bogus_assignment() {
        let tr = EdgeTransit { i0: 1, i1: 4, i2: 5, i3: 8 };
        assert!(matches!(
            schedule_interior(&tr, 3, 13),
            Err(ExpansionError::InequalityViolation { .. })
        ));
        assert!(matches!(
            schedule_interior(&tr, 3, 11),
            Err(ExpansionError::InequalityViolation { .. })
        ));
    }

    /// Exhaustive oracle for the uneven staircase: enumerate every monotone
    /// prefix schedule of the right length and keep those whose replay moves
    /// the chips consistently with the window.
    #[test]
    fn staircase_matches_enumeration_oracle() {
        let (p, q, l_e, sum_t) = (2u64, 1u64, 2u64, 3u64);
        let mut feasible = Vec::new();
        // Prefix sequences are monotone from 0 to at most l_e - 1.
        fn enumerate(seq: &mut Vec<u64>, len: usize, max: u64, out: &mut Vec<Vec<u64>>) {
            if seq.len() == len {
                out.push(seq.clone());
                return;
            }
            let lo = seq.last().copied().unwrap_or(0);
            for v in lo..=max {
                seq.push(v);
                enumerate(seq, len, max, out);
                seq.pop();
            }
        }
        let mut all = Vec::new();
        enumerate(&mut Vec::new(), sum_t as usize, l_e - 1, &mut all);
        for seq in all {
            // Replay: chips on positions 0..=l_e relative to the tail, one
            // departure per position for the first p sets.
            let mut chips = vec![0u64; (l_e + 1) as usize];
            let mut ok = true;
            let mut arrivals = Vec::new();
            for (s, &c) in seq.iter().enumerate() {
                if (s as u64) < p {
                    if c != 0 {
                        ok = false;
                        break;
                    }
                    chips[1] += 1; // departure lands on the first interior
                } else {
                    // The set's cut sits after interior c; a chip moves from
                    // position c to c + 1.
                    if c == 0 || chips[c as usize] == 0 {
                        ok = false;
                        break;
                    }
                    chips[c as usize] -= 1;
                    chips[(c + 1) as usize] += 1;
                    if c + 1 == l_e {
                        arrivals.push(s);
                    }
                }
            }
            if !ok {
                continue;
            }
            // Exactly q arrivals, all in the last q sets.
            if arrivals.len() == q as usize
                && arrivals.iter().all(|&s| s as u64 >= sum_t - q)
            {
                feasible.push(seq);
            }
        }
        let tr = EdgeTransit { i0: 1, i1: p as usize, i2: (sum_t - q + 1) as usize, i3: sum_t as usize };
        let ours = schedule_interior(&tr, l_e, sum_t).unwrap();
        assert_eq!(feasible, vec![ours], "the flow-feasible schedule is unique");
    }

    #[test]
    fn expansion_reproduces_the_twelve_sets() {
        let (g, cert, assignment) = figure_setup();
        let witness = expand_certificate(&g, &cert, &assignment).unwrap();
        let v = g.vertex_by_label("v").unwrap();
        let script = witness.scripts.get(&v).unwrap();
        let derived = witness.h.derived();
        let expected: Vec<Vec<&str>> = vec![
            vec!["u"],
            vec!["u"],
            vec!["u"],
            vec!["u", "e2.1"],
            vec!["u", "e1.1", "e2.1"],
            vec!["u", "e1.1", "e2.1"],
            vec!["u", "e1.1", "e2.1", "e2.2"],
            vec!["u", "e1.1", "e2.1", "e2.2"],
            vec!["u", "e1.1", "e1.2", "e2.1", "e2.2"],
            vec!["u", "e1.1", "e1.2", "e2.1", "e2.2", "e2.3"],
            vec!["u", "e1.1", "e1.2", "e2.1", "e2.2", "e2.3"],
            vec!["u", "e1.1", "e1.2", "e2.1", "e2.2", "e2.3"],
        ];
        let got: Vec<BTreeSet<String>> = script
            .sets()
            .iter()
            .map(|s| s.iter().map(|&v| derived.vertex_label(v).to_string()).collect())
            .collect();
        let want: Vec<BTreeSet<String>> = expected
            .into_iter()
            .map(|s| s.into_iter().map(String::from).collect())
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn expansion_verifies() {
        let (g, cert, assignment) = figure_setup();
        let witness = expand_certificate(&g, &cert, &assignment).unwrap();
        let report = verify_expansion(&witness.h, &witness.start, &witness.scripts);
        assert!(report.ok(), "failures: {:?}", report.failures);
        let _ = g;
    }

    #[test]
    fn empty_certificate_expands_to_g1_with_empty_scripts() {
        let g = parallel_pair();
        let json = crate::certificate::CertificateJson {
            k: 2,
            divisor: crate::chip_firing::LabeledDivisorJson {
                chips: [
                    ("1".to_string(), "u".to_string()),
                    ("2".to_string(), "v".to_string()),
                ]
                .into(),
            },
            sequences: vec![],
        };
        let cert = PartialCertificate::from_json(&g, &json).unwrap();
        let inst = build_ilp(&g, &cert).unwrap();
        let assignment = solve(&inst, 16).unwrap();
        let witness = expand_certificate(&g, &cert, &assignment).unwrap();
        assert_eq!(witness.h.derived(), &g);
        assert!(witness.scripts.is_empty());
        let report = verify_expansion(&witness.h, &witness.start, &witness.scripts);
        assert!(report.ok(), "failures: {:?}", report.failures);
    }

    #[test]
    fn verify_flags_invalid_set() {
        let (g, cert, assignment) = figure_setup();
        let mut witness = expand_certificate(&g, &cert, &assignment).unwrap();
        // Remove a chip so the first firing set is short.
        let u = witness.h.derived().vertex_by_label("u").unwrap();
        witness.start.set(u, 1);
        let report = verify_expansion(&witness.h, &witness.start, &witness.scripts);
        assert!(report
            .failures
            .iter()
            .any(|f| matches!(f, VerifyFailure::InvalidSet { .. })));
    }

    #[test]
    fn verify_flags_stranded_interior() {
        // A length-3 edge whose interior is never visited: one chip on each
        // endpoint, no scripts that cross.
        let g = Multigraph::new(vec!["a", "b"], vec![("e", "a", "b")]).unwrap();
        let lengths: BTreeMap<String, u64> = [("e".to_string(), 3)].into();
        let h = expand_by_lengths(&SubdivisionMap::identity(&g), &lengths).unwrap();
        let derived = h.derived();
        let mut start = Divisor::zero(derived);
        start.set(derived.vertex_by_label("a").unwrap(), 1);
        start.set(derived.vertex_by_label("b").unwrap(), 1);
        let report = verify_expansion(&h, &start, &BTreeMap::new());
        // Both targets are covered by the start divisor, but the interior
        // vertices are stranded... except both endpoints hold chips
        // simultaneously, which covers them. Remove one chip to strand.
        assert!(report.ok());
        start.set(derived.vertex_by_label("b").unwrap(), 0);
        let report = verify_expansion(&h, &start, &BTreeMap::new());
        assert!(report
            .failures
            .iter()
            .any(|f| matches!(f, VerifyFailure::InteriorUnreached { .. })));
    }
}
