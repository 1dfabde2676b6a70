//! The partial-certificate data model and its validator.
//!
//! A partial certificate records, for a degree-`k` labelled divisor on a base
//! graph, one monotone sequence of (vertex set, move-tuple set) pairs per
//! target vertex. The validator checks the fourteen structural requirements
//! and reports violations as data; it never fails on a well-formed
//! certificate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chip_firing::{LabeledDivisor, LabeledDivisorJson};
use crate::multigraph::{EdgeIx, Multigraph, Vertex};

/// The fourteen certificate requirements, numbered as reported in
/// violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Requirement {
    Incidence = 1,
    Departure = 2,
    Arrival = 3,
    UniqueDeparturePerEdge = 4,
    UniqueArrivalPerEdge = 5,
    UniqueDeparturePerChip = 6,
    UniqueArrivalPerChip = 7,
    ImmediateArrival = 8,
    DepartureLocation = 9,
    ArrivalLocation = 10,
    OutgoingEdges = 11,
    PreviousDeparture = 12,
    NextArrival = 13,
    ReachAllVertices = 14,
}

impl Requirement {
    pub const ALL: [Requirement; 14] = [
        Requirement::Incidence,
        Requirement::Departure,
        Requirement::Arrival,
        Requirement::UniqueDeparturePerEdge,
        Requirement::UniqueArrivalPerEdge,
        Requirement::UniqueDeparturePerChip,
        Requirement::UniqueArrivalPerChip,
        Requirement::ImmediateArrival,
        Requirement::DepartureLocation,
        Requirement::ArrivalLocation,
        Requirement::OutgoingEdges,
        Requirement::PreviousDeparture,
        Requirement::NextArrival,
        Requirement::ReachAllVertices,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }
}

/// One chip movement record: chip `chip` departs (`sign = -1`) from or
/// arrives (`sign = +1`) at `vertex` along `edge`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MoveTuple {
    pub vertex: Vertex,
    pub chip: u32,
    pub sign: i8,
    pub edge: EdgeIx,
}

impl MoveTuple {
    pub fn is_departure(&self) -> bool {
        self.sign < 0
    }

    pub fn is_arrival(&self) -> bool {
        self.sign > 0
    }
}

/// One certificate step: the firing set restricted to base vertices plus the
/// chip moves it causes on base vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub set: BTreeSet<Vertex>,
    pub moves: BTreeSet<MoveTuple>,
}

/// A labelled divisor plus one pair sequence per base vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialCertificate {
    pub k: u32,
    pub start: LabeledDivisor,
    /// Pair sequence per target, indexed by vertex index; absent targets hold
    /// empty sequences.
    pub sequences: Vec<Vec<Pair>>,
}

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("certificate is not valid JSON: {0}")]
    Parse(String),
    #[error("unknown vertex id {0:?}")]
    UnknownVertex(String),
    #[error("unknown edge id {0:?}")]
    UnknownEdge(String),
    #[error("duplicate sequence for target {0:?}")]
    DuplicateTarget(String),
    #[error("divisor degree {degree} exceeds k = {k}")]
    DegreeExceedsK { degree: u32, k: u32 },
    #[error("chip label {0} outside 1..=k")]
    ChipOutOfRange(u32),
    #[error("move tuple sign must be -1 or +1, got {0}")]
    BadSign(i8),
    #[error("duplicate move tuple in sequence for {target:?}, pair {index}")]
    DuplicateTuple { target: String, index: usize },
    #[error("sets for target {target:?} are not monotone at pair {index}")]
    NotMonotone { target: String, index: usize },
    #[error(
        "sequence for target {target:?} has {len} pairs, above the bound {bound} (= 2kn + n)"
    )]
    SequenceTooLong {
        target: String,
        len: usize,
        bound: usize,
    },
    #[error(transparent)]
    Chip(#[from] crate::chip_firing::ChipError),
}

/// Serialized certificate. Move tuples are 4-element arrays
/// `[vertex, chip, sign, edge]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateJson {
    pub k: u32,
    pub divisor: LabeledDivisorJson,
    pub sequences: Vec<SequenceJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceJson {
    pub target: String,
    pub pairs: Vec<PairJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairJson {
    #[serde(rename = "A")]
    pub set: Vec<String>,
    #[serde(rename = "M")]
    pub moves: Vec<(String, u32, i8, String)>,
}

impl PartialCertificate {
    /// Builds a certificate from per-target pair lists, enforcing the
    /// structural invariants (degree bound, monotone sets, duplicate-free
    /// move sets, sequence-length bound).
    pub fn new(
        g1: &Multigraph,
        k: u32,
        start: LabeledDivisor,
        sequences: BTreeMap<Vertex, Vec<Pair>>,
    ) -> Result<PartialCertificate, CertificateError> {
        let degree = start.degree();
        if degree > k {
            return Err(CertificateError::DegreeExceedsK { degree, k });
        }
        let n = g1.vertex_count();
        let bound = 2 * (k as usize) * n + n;
        let mut table = vec![Vec::new(); n];
        for (target, pairs) in sequences {
            if pairs.len() > bound {
                return Err(CertificateError::SequenceTooLong {
                    target: g1.vertex_label(target).to_string(),
                    len: pairs.len(),
                    bound,
                });
            }
            for (i, pair) in pairs.iter().enumerate() {
                if i > 0 && !pair.set.is_superset(&pairs[i - 1].set) {
                    return Err(CertificateError::NotMonotone {
                        target: g1.vertex_label(target).to_string(),
                        index: i + 1,
                    });
                }
                for t in &pair.moves {
                    if t.sign != -1 && t.sign != 1 {
                        return Err(CertificateError::BadSign(t.sign));
                    }
                    if t.chip == 0 || t.chip > k {
                        return Err(CertificateError::ChipOutOfRange(t.chip));
                    }
                }
            }
            table[target.0] = pairs;
        }
        Ok(PartialCertificate {
            k,
            start,
            sequences: table,
        })
    }

    pub fn from_json(
        g1: &Multigraph,
        json: &CertificateJson,
    ) -> Result<PartialCertificate, CertificateError> {
        let start = LabeledDivisor::from_json(g1, &json.divisor)?;
        let mut sequences: BTreeMap<Vertex, Vec<Pair>> = BTreeMap::new();
        for seq in &json.sequences {
            let target = g1
                .vertex_by_label(&seq.target)
                .map_err(|_| CertificateError::UnknownVertex(seq.target.clone()))?;
            if sequences.contains_key(&target) {
                return Err(CertificateError::DuplicateTarget(seq.target.clone()));
            }
            let mut pairs = Vec::with_capacity(seq.pairs.len());
            for (i, p) in seq.pairs.iter().enumerate() {
                let mut set = BTreeSet::new();
                for label in &p.set {
                    set.insert(
                        g1.vertex_by_label(label)
                            .map_err(|_| CertificateError::UnknownVertex(label.clone()))?,
                    );
                }
                let mut moves = BTreeSet::new();
                for (vertex, chip, sign, edge) in &p.moves {
                    let tuple = MoveTuple {
                        vertex: g1
                            .vertex_by_label(vertex)
                            .map_err(|_| CertificateError::UnknownVertex(vertex.clone()))?,
                        chip: *chip,
                        sign: *sign,
                        edge: g1
                            .edge_by_id(edge)
                            .map_err(|_| CertificateError::UnknownEdge(edge.clone()))?,
                    };
                    if !moves.insert(tuple) {
                        return Err(CertificateError::DuplicateTuple {
                            target: seq.target.clone(),
                            index: i + 1,
                        });
                    }
                }
                pairs.push(Pair { set, moves });
            }
            sequences.insert(target, pairs);
        }
        PartialCertificate::new(g1, json.k, start, sequences)
    }

    pub fn parse(g1: &Multigraph, text: &str) -> Result<PartialCertificate, CertificateError> {
        let json: CertificateJson =
            serde_json::from_str(text).map_err(|e| CertificateError::Parse(e.to_string()))?;
        PartialCertificate::from_json(g1, &json)
    }

    pub fn to_json(&self, g1: &Multigraph) -> CertificateJson {
        let sequences = self
            .sequences
            .iter()
            .enumerate()
            .filter(|(_, pairs)| !pairs.is_empty())
            .map(|(v, pairs)| SequenceJson {
                target: g1.vertex_label(Vertex(v)).to_string(),
                pairs: pairs
                    .iter()
                    .map(|p| PairJson {
                        set: p
                            .set
                            .iter()
                            .map(|&v| g1.vertex_label(v).to_string())
                            .collect(),
                        moves: p
                            .moves
                            .iter()
                            .map(|t| {
                                (
                                    g1.vertex_label(t.vertex).to_string(),
                                    t.chip,
                                    t.sign,
                                    g1.edge(t.edge).id.clone(),
                                )
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        CertificateJson {
            k: self.k,
            divisor: self.start.to_json(g1),
            sequences,
        }
    }

    pub fn pairs_for(&self, target: Vertex) -> &[Pair] {
        &self.sequences[target.0]
    }
}

/// A single requirement violation with machine-readable coordinates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub requirement: Requirement,
    /// Target vertex whose sequence is at fault (the vertex itself for
    /// requirement 14).
    pub target: String,
    /// 1-based pair index, when one applies.
    pub index: Option<usize>,
    /// Offending move tuple, when one applies.
    pub tuple: Option<(String, u32, i8, String)>,
    /// Offending edge, for the outgoing-edges requirement.
    pub edge: Option<String>,
}

/// Checks all fourteen requirements and returns the sorted, deduplicated
/// violation list; empty means the certificate is valid.
///
/// Requirement 13 is evaluated exactly as its formal condition states: for an
/// arrival at pair `i` with the vertex outside both the `i`-th and `i+1`-st
/// sets, a different chip must arrive along the same edge at pair `i+1`; no
/// condition is imposed at the final pair.
///
/// Violations are reported per defect: the location requirements (9 and 10)
/// are not re-reported for tuples already implicated in a same-pair
/// uniqueness or immediacy violation (4-8), since those tuples' chip chains
/// are broken by that same defect. A non-empty report is never emptied by
/// this, so the empty-report criterion is unchanged.
pub fn validate(g1: &Multigraph, cert: &PartialCertificate) -> Vec<Violation> {
    let mut violations: BTreeSet<Violation> = BTreeSet::new();
    for target in g1.vertices() {
        validate_target(g1, cert, target, &mut violations);
    }
    violations.into_iter().collect()
}

struct TargetView<'a> {
    pairs: &'a [Pair],
    /// Membership masks per pair.
    masks: Vec<Vec<bool>>,
    /// Chip event timeline: per chip, (0-based pair index, tuple) ordered by
    /// index. Requirements 6/7 make same-sign duplicates per index
    /// impossible, so the greatest-earlier-index lookups are unambiguous.
    timeline: BTreeMap<u32, Vec<(usize, MoveTuple)>>,
}

impl<'a> TargetView<'a> {
    fn new(g1: &Multigraph, pairs: &'a [Pair]) -> TargetView<'a> {
        let masks = pairs
            .iter()
            .map(|p| {
                let mut mask = vec![false; g1.vertex_count()];
                for &v in &p.set {
                    mask[v.0] = true;
                }
                mask
            })
            .collect();
        let mut timeline: BTreeMap<u32, Vec<(usize, MoveTuple)>> = BTreeMap::new();
        for (i, p) in pairs.iter().enumerate() {
            for t in &p.moves {
                timeline.entry(t.chip).or_default().push((i, *t));
            }
        }
        TargetView {
            pairs,
            masks,
            timeline,
        }
    }

    fn in_set(&self, i: usize, v: Vertex) -> bool {
        self.masks[i][v.0]
    }

    /// Greatest pair index strictly below `i` holding any event of `chip`.
    fn last_event_before(&self, chip: u32, i: usize) -> Option<usize> {
        self.timeline
            .get(&chip)?
            .iter()
            .rev()
            .map(|&(idx, _)| idx)
            .find(|&idx| idx < i)
    }

    fn has_tuple_at(&self, i: usize, pred: impl Fn(&MoveTuple) -> bool) -> bool {
        self.pairs[i].moves.iter().any(|t| pred(t))
    }
}

fn violation(
    g1: &Multigraph,
    requirement: Requirement,
    target: Vertex,
    index: Option<usize>,
    tuple: Option<&MoveTuple>,
    edge: Option<EdgeIx>,
) -> Violation {
    Violation {
        requirement,
        target: g1.vertex_label(target).to_string(),
        index,
        tuple: tuple.map(|t| {
            (
                g1.vertex_label(t.vertex).to_string(),
                t.chip,
                t.sign,
                g1.edge(t.edge).id.clone(),
            )
        }),
        edge: edge.map(|e| g1.edge(e).id.clone()),
    }
}

fn validate_target(
    g1: &Multigraph,
    cert: &PartialCertificate,
    target: Vertex,
    out: &mut BTreeSet<Violation>,
) {
    let pairs = cert.pairs_for(target);
    let view = TargetView::new(g1, pairs);
    let incident = |t: &MoveTuple| g1.edge(t.edge).is_incident(t.vertex);

    for (i, pair) in pairs.iter().enumerate() {
        let index = Some(i + 1);
        let mut dep_per_edge: BTreeMap<(Vertex, EdgeIx), Vec<MoveTuple>> = BTreeMap::new();
        let mut arr_per_edge: BTreeMap<(Vertex, EdgeIx), Vec<MoveTuple>> = BTreeMap::new();
        let mut dep_per_chip: BTreeMap<u32, Vec<MoveTuple>> = BTreeMap::new();
        let mut arr_per_chip: BTreeMap<u32, Vec<MoveTuple>> = BTreeMap::new();
        for t in &pair.moves {
            // 1. Incidence: the edge must be incident to the vertex. The
            // vertex- and edge-level checks below only apply to incident
            // tuples, so a bad edge reference is reported once.
            if !incident(t) {
                out.insert(violation(g1, Requirement::Incidence, target, index, Some(t), None));
                continue;
            }
            let other = g1.edge(t.edge).other_end(t.vertex).unwrap();
            if t.is_departure() {
                // 2. Departure: the vertex is fired and its neighbour is not.
                if !view.in_set(i, t.vertex) || view.in_set(i, other) {
                    out.insert(violation(g1, Requirement::Departure, target, index, Some(t), None));
                }
                dep_per_edge.entry((t.vertex, t.edge)).or_default().push(*t);
                dep_per_chip.entry(t.chip).or_default().push(*t);
            } else {
                // 3. Arrival: the vertex is not fired and its neighbour is.
                if view.in_set(i, t.vertex) || !view.in_set(i, other) {
                    out.insert(violation(g1, Requirement::Arrival, target, index, Some(t), None));
                }
                arr_per_edge.entry((t.vertex, t.edge)).or_default().push(*t);
                arr_per_chip.entry(t.chip).or_default().push(*t);
            }
        }

        // Tuples implicated in a same-pair structural violation; their
        // location chains are not re-reported.
        let mut implicated: BTreeSet<MoveTuple> = BTreeSet::new();

        // 4/5. At most one chip departs/arrives along each edge at a vertex.
        for (req, table) in [
            (Requirement::UniqueDeparturePerEdge, &dep_per_edge),
            (Requirement::UniqueArrivalPerEdge, &arr_per_edge),
        ] {
            for tuples in table.values() {
                if tuples.len() > 1 {
                    out.insert(violation(g1, req, target, index, Some(&tuples[1]), None));
                    implicated.extend(tuples.iter().copied());
                }
            }
        }
        // 6/7. A chip departs/arrives along at most one edge.
        for (req, table) in [
            (Requirement::UniqueDeparturePerChip, &dep_per_chip),
            (Requirement::UniqueArrivalPerChip, &arr_per_chip),
        ] {
            for tuples in table.values() {
                if tuples.len() > 1 {
                    out.insert(violation(g1, req, target, index, Some(&tuples[1]), None));
                    implicated.extend(tuples.iter().copied());
                }
            }
        }
        // 8. Immediate arrival: a chip departing and arriving in the same
        // pair moves along one edge joining the two vertices.
        for (chip, deps) in &dep_per_chip {
            if let Some(arrs) = arr_per_chip.get(chip) {
                for d in deps {
                    for a in arrs {
                        let same_edge = d.edge == a.edge;
                        let joins = d.vertex != a.vertex
                            && g1.edge(d.edge).is_incident(d.vertex)
                            && g1.edge(d.edge).is_incident(a.vertex);
                        if !(same_edge && joins) {
                            out.insert(violation(
                                g1,
                                Requirement::ImmediateArrival,
                                target,
                                index,
                                Some(a),
                                None,
                            ));
                            implicated.insert(*d);
                            implicated.insert(*a);
                        }
                    }
                }
            }
        }

        for t in &pair.moves {
            if !incident(t) || implicated.contains(t) {
                continue;
            }
            if t.is_departure() {
                // 9. Departure location: the chip's most recent event put it
                // on this vertex, or the start divisor did.
                let ok = match view.last_event_before(t.chip, i) {
                    Some(prev) => view.has_tuple_at(prev, |p| {
                        p.chip == t.chip && p.is_arrival() && p.vertex == t.vertex
                    }),
                    None => {
                        t.chip <= cert.start.degree() && cert.start.chip(t.chip) == t.vertex
                    }
                };
                if !ok {
                    out.insert(violation(
                        g1,
                        Requirement::DepartureLocation,
                        target,
                        index,
                        Some(t),
                        None,
                    ));
                }
            } else {
                // 10. Arrival location: the chip was fired along this edge in
                // the same pair, or its most recent event was a departure
                // along this edge from the other endpoint.
                let same_pair = view.has_tuple_at(i, |p| {
                    p.chip == t.chip && p.is_departure() && p.edge == t.edge && p.vertex != t.vertex
                });
                let ok = same_pair
                    || match view.last_event_before(t.chip, i) {
                        Some(prev) => {
                            view.has_tuple_at(prev, |p| {
                                p.chip == t.chip
                                    && p.is_departure()
                                    && p.edge == t.edge
                                    && p.vertex != t.vertex
                            }) && !view.has_tuple_at(prev, |p| {
                                p.chip == t.chip
                                    && p.is_arrival()
                                    && p.edge == t.edge
                                    && p.vertex == t.vertex
                            })
                        }
                        None => false,
                    };
                if !ok {
                    out.insert(violation(
                        g1,
                        Requirement::ArrivalLocation,
                        target,
                        index,
                        Some(t),
                        None,
                    ));
                }
            }
        }

        // 11. Outgoing edges: every cut edge of the fired set carries a chip,
        // either departing now or already in flight.
        for (eix, e) in g1.edges().iter().enumerate() {
            let eix = EdgeIx(eix);
            let in0 = view.in_set(i, e.ends[0]);
            let in1 = view.in_set(i, e.ends[1]);
            if in0 == in1 {
                continue;
            }
            let (inside, outside) = if in0 {
                (e.ends[0], e.ends[1])
            } else {
                (e.ends[1], e.ends[0])
            };
            let departs_now = view.has_tuple_at(i, |p| {
                p.is_departure() && p.vertex == inside && p.edge == eix
            });
            if departs_now {
                continue;
            }
            let in_flight = (0..i).any(|earlier| {
                pairs[earlier].moves.iter().any(|p| {
                    p.is_departure()
                        && p.vertex == inside
                        && p.edge == eix
                        && !(earlier..i).any(|mid| {
                            view.has_tuple_at(mid, |q| {
                                q.chip == p.chip
                                    && q.is_arrival()
                                    && q.vertex == outside
                                    && q.edge == eix
                            })
                        })
                })
            });
            if !in_flight {
                out.insert(violation(
                    g1,
                    Requirement::OutgoingEdges,
                    target,
                    index,
                    None,
                    Some(eix),
                ));
            }
        }

        // 12. Previous departure: a departure from a vertex already in the
        // previous set requires a departure along the same edge there.
        if i > 0 {
            for t in &pair.moves {
                if !incident(t) || !t.is_departure() {
                    continue;
                }
                if view.in_set(i - 1, t.vertex) && view.in_set(i, t.vertex) {
                    let ok = view.has_tuple_at(i - 1, |p| {
                        p.is_departure() && p.vertex == t.vertex && p.edge == t.edge && p.chip != t.chip
                    });
                    if !ok {
                        out.insert(violation(
                            g1,
                            Requirement::PreviousDeparture,
                            target,
                            index,
                            Some(t),
                            None,
                        ));
                    }
                }
            }
        }

        // 13. Next arrival: an arrival at a vertex outside this and the next
        // set must be followed by an arrival along the same edge.
        if i + 1 < pairs.len() {
            for t in &pair.moves {
                if !incident(t) || !t.is_arrival() {
                    continue;
                }
                if !view.in_set(i, t.vertex) && !view.in_set(i + 1, t.vertex) {
                    let ok = view.has_tuple_at(i + 1, |p| {
                        p.is_arrival() && p.vertex == t.vertex && p.edge == t.edge && p.chip != t.chip
                    });
                    if !ok {
                        out.insert(violation(
                            g1,
                            Requirement::NextArrival,
                            target,
                            index,
                            Some(t),
                            None,
                        ));
                    }
                }
            }
        }
    }

    // 14. Reach all vertices: at the end of the target's sequence a chip sits
    // on it, via either a never-undone arrival or the start divisor.
    let reached = reach_satisfied(cert, &view, target);
    if !reached {
        out.insert(violation(
            g1,
            Requirement::ReachAllVertices,
            target,
            None,
            None,
            None,
        ));
    }
}

fn reach_satisfied(cert: &PartialCertificate, view: &TargetView<'_>, target: Vertex) -> bool {
    // An arrival of some chip at the target with no later departure from it.
    for events in view.timeline.values() {
        for &(i, t) in events {
            if t.is_arrival() && t.vertex == target {
                let departs_later = events.iter().any(|&(i2, t2)| {
                    i2 >= i && t2.is_departure() && t2.vertex == target
                });
                if !departs_later {
                    return true;
                }
            }
        }
    }
    // Or a start chip on the target that never departs from it.
    for j in 1..=cert.start.degree() {
        if cert.start.chip(j) == target {
            let departs = view
                .timeline
                .get(&j)
                .map(|events| {
                    events
                        .iter()
                        .any(|(_, t)| t.is_departure() && t.vertex == target)
                })
                .unwrap_or(false);
            if !departs {
                return true;
            }
        }
    }
    false
}


#[cfg(test)]
mod tests {
    use super::test_fixtures::{figure_certificate_json, parallel_pair};
    use super::*;
    use crate::multigraph::Multigraph;

    #[test]
    fn figure_certificate_is_valid() {
        let g = parallel_pair();
        let cert = PartialCertificate::from_json(&g, &figure_certificate_json()).unwrap();
        let violations = validate(&g, &cert);
        assert!(violations.is_empty(), "unexpected: {:?}", violations);
    }

    #[test]
    fn deleting_first_departure_breaks_outgoing_edges() {
        let g = parallel_pair();
        let mut json = figure_certificate_json();
        json.sequences[0].pairs[0].moves.remove(0);
        let cert = PartialCertificate::from_json(&g, &json).unwrap();
        let violations = validate(&g, &cert);
        let expected = Violation {
            requirement: Requirement::OutgoingEdges,
            target: "v".to_string(),
            index: Some(1),
            tuple: None,
            edge: Some("e1".to_string()),
        };
        assert!(
            violations.contains(&expected),
            "missing outgoing-edges violation at (v,1): {:?}",
            violations
        );
    }

    #[test]
    fn single_vertex_start_chip_satisfies_reach() {
        let g = Multigraph::new(vec!["w"], Vec::<(&str, &str, &str)>::new()).unwrap();
        let json = CertificateJson {
            k: 1,
            divisor: LabeledDivisorJson {
                chips: [("1".to_string(), "w".to_string())].into(),
            },
            sequences: vec![],
        };
        let cert = PartialCertificate::from_json(&g, &json).unwrap();
        assert!(validate(&g, &cert).is_empty());
    }

    #[test]
    fn missing_sequence_for_uncovered_vertex_violates_reach() {
        let g = parallel_pair();
        let json = CertificateJson {
            k: 1,
            divisor: LabeledDivisorJson {
                chips: [("1".to_string(), "u".to_string())].into(),
            },
            sequences: vec![],
        };
        let cert = PartialCertificate::from_json(&g, &json).unwrap();
        let violations = validate(&g, &cert);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].requirement, Requirement::ReachAllVertices);
        assert_eq!(violations[0].target, "v");
    }

    #[test]
    fn validation_is_storage_order_independent() {
        let g = parallel_pair();
        let mut json = figure_certificate_json();
        // Permute tuple storage order in every pair.
        for seq in &mut json.sequences {
            for pair in &mut seq.pairs {
                pair.moves.reverse();
            }
        }
        let cert = PartialCertificate::from_json(&g, &json).unwrap();
        assert!(validate(&g, &cert).is_empty());
    }

    #[test]
    fn structural_errors_are_rejected_at_parse() {
        let g = parallel_pair();

        let mut too_big = figure_certificate_json();
        too_big.k = 6; // degree 7 start
        assert!(matches!(
            PartialCertificate::from_json(&g, &too_big),
            Err(CertificateError::DegreeExceedsK { degree: 7, k: 6 })
        ));

        let mut non_monotone = figure_certificate_json();
        non_monotone.sequences[0].pairs[3].set = vec!["u".to_string(), "v".to_string()];
        assert!(matches!(
            PartialCertificate::from_json(&g, &non_monotone),
            Err(CertificateError::NotMonotone { .. })
        ));

        let mut dupe = figure_certificate_json();
        let t = dupe.sequences[0].pairs[0].moves[0].clone();
        dupe.sequences[0].pairs[0].moves.push(t);
        assert!(matches!(
            PartialCertificate::from_json(&g, &dupe),
            Err(CertificateError::DuplicateTuple { .. })
        ));

        let mut bad_chip = figure_certificate_json();
        bad_chip.sequences[0].pairs[0].moves[0].1 = 99;
        assert!(matches!(
            PartialCertificate::from_json(&g, &bad_chip),
            Err(CertificateError::ChipOutOfRange(99))
        ));
    }

    #[test]
    fn json_roundtrip() {
        let g = parallel_pair();
        let json = figure_certificate_json();
        let cert = PartialCertificate::from_json(&g, &json).unwrap();
        let back = cert.to_json(&g);
        let cert2 = PartialCertificate::from_json(&g, &back).unwrap();
        assert_eq!(cert, cert2);
    }
}
