//! From a concrete subdivision, divisor, and per-target firing scripts to a
//! partial certificate: chip consolidation onto base vertices, extraction of
//! the relevant firing sets, deterministic labelled chip tracking, and the
//! ground-truth variable assignment that the built certificate's integer
//! program is guaranteed to accept.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificate::{CertificateError, MoveTuple, Pair, PartialCertificate};
use crate::chip_firing::{
    fire_set, run_script, ChipError, Divisor, DivisorJson, FiringScript, LabeledDivisor,
    ScriptError,
};
use crate::ilp::{gap_var, length_var, IlpAssignment};
use crate::multigraph::{
    expand_by_lengths, EdgeIx, GraphError, GraphJson, Multigraph, SubdivisionError,
    SubdivisionMap, Vertex,
};

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("witness is not valid JSON: {0}")]
    Parse(String),
    #[error("start divisor has a chip on {vertex:?}, which is not a base vertex")]
    ChipsOffBase { vertex: String },
    #[error("start divisor degree {degree} exceeds k = {k}")]
    DegreeExceedsK { degree: u32, k: u32 },
    #[error("script for target {target:?} is illegal at set {index}")]
    IllegalScript { target: String, index: usize },
    #[error("expansion path of edge {edge:?} holds {count} interior chips; consolidate first")]
    NotConsolidated { edge: String, count: u32 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Subdivision(#[from] SubdivisionError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Chip(#[from] ChipError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
}

/// A subdivision `H` of a base graph, a divisor on `H`, and one firing
/// script per base target vertex. The scripts must replay legally and end
/// with a chip on their target.
#[derive(Debug, Clone)]
pub struct Witness {
    /// Base graph -> H.
    pub h: SubdivisionMap,
    /// Start divisor on H.
    pub start: Divisor,
    /// Target (base vertex) -> script on H. Absent targets use the empty
    /// script.
    pub scripts: BTreeMap<Vertex, FiringScript>,
}

/// Serialized witness: the base graph, per-base-edge path lengths, the
/// divisor on the expanded graph, and label-based scripts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessJson {
    pub graph: GraphJson,
    pub lengths: BTreeMap<String, u64>,
    pub divisor: DivisorJson,
    #[serde(default)]
    pub scripts: BTreeMap<String, Vec<Vec<String>>>,
}

impl Witness {
    pub fn from_json(json: &WitnessJson) -> Result<(Multigraph, Witness), WitnessError> {
        let base = crate::multigraph::load_graph_json(json.graph.clone())?.graph;
        let h = expand_by_lengths(&SubdivisionMap::identity(&base), &json.lengths)?;
        let start = Divisor::from_json(h.derived(), &json.divisor)?;
        let mut scripts = BTreeMap::new();
        for (target, sets) in &json.scripts {
            let w = base.vertex_by_label(target)?;
            let script = FiringScript::from_labels(h.derived(), sets)?;
            scripts.insert(w, script);
        }
        Ok((base, Witness { h, start, scripts }))
    }

    pub fn parse(text: &str) -> Result<(Multigraph, Witness), WitnessError> {
        let json: WitnessJson =
            serde_json::from_str(text).map_err(|e| WitnessError::Parse(e.to_string()))?;
        Witness::from_json(&json)
    }

    pub fn to_json(&self) -> WitnessJson {
        let base = self.h.origin();
        let derived = self.h.derived();
        WitnessJson {
            graph: base.to_json(),
            lengths: base
                .edges()
                .iter()
                .enumerate()
                .map(|(i, e)| (e.id.clone(), self.h.path(EdgeIx(i)).len() as u64))
                .collect(),
            divisor: self.start.to_json(derived),
            scripts: self
                .scripts
                .iter()
                .filter(|(_, s)| !s.is_empty())
                .map(|(&w, s)| (base.vertex_label(w).to_string(), s.to_labels(derived)))
                .collect(),
        }
    }

    pub fn script_for(&self, target: Vertex) -> FiringScript {
        self.scripts
            .get(&target)
            .cloned()
            .unwrap_or_else(FiringScript::empty)
    }
}

/// Pushes pairs of chips on the interior of each expansion path outward with
/// growing interval firings until at most one interior chip remains per
/// path; everything else ends on base vertices. Returns the consolidated
/// divisor together with one monotone script realizing the equivalence (the
/// level-set decomposition of the accumulated firing counts). A divisor
/// already clear of path interiors comes back unchanged with the empty
/// script.
pub fn consolidate_chips(
    h1: &SubdivisionMap,
    d: &Divisor,
) -> Result<(Divisor, FiringScript), WitnessError> {
    let derived = h1.derived();
    let mut current = d.clone();
    let mut fire_counts = vec![0u64; derived.vertex_count()];

    // Edges in lexicographic id order.
    let mut order: Vec<EdgeIx> = (0..h1.origin().edge_count()).map(EdgeIx).collect();
    order.sort_by(|a, b| h1.origin().edge(*a).id.cmp(&h1.origin().edge(*b).id));

    for e in order {
        let path = h1.path(e).vertices.clone();
        let last = path.len() - 1;
        loop {
            // Interior chip positions, smallest first, with multiplicity.
            let mut positions = Vec::new();
            for (pos, &v) in path.iter().enumerate().skip(1).take(last - 1) {
                for _ in 0..current.get(v) {
                    positions.push(pos);
                }
            }
            if positions.len() < 2 {
                break;
            }
            let (mut i, mut j) = (positions[0], positions[1]);
            // Grow the interval one step per firing until a chip exits.
            loop {
                for pos in i..=j {
                    fire_counts[path[pos].0] += 1;
                }
                current.set(path[i], current.get(path[i]) - 1);
                current.add(path[i - 1], 1);
                current.set(path[j], current.get(path[j]) - 1);
                current.add(path[j + 1], 1);
                if i == 1 || j == last - 1 {
                    break;
                }
                i -= 1;
                j += 1;
            }
        }
    }
    let script = crate::chip_firing::level_set_script(derived, &fire_counts)?;
    debug_assert_eq!(
        run_script(derived, d, &script)
            .expect("consolidation script replays legally")
            .last(),
        Some(&current)
    );
    Ok((current, script))
}

/// Re-cuts the composed `origin -> H` paths so that each base midpoint sits
/// on the (at most one) interior chip of its full path, keeping the base
/// graph and `H` fixed. `g1map` is the origin-to-base map, `h` the
/// base-to-H map, and `d` a consolidated divisor on `H`.
pub fn rebase_midpoints(
    g1map: &SubdivisionMap,
    h: &SubdivisionMap,
    d: &Divisor,
) -> Result<SubdivisionMap, WitnessError> {
    let base = h.origin(); // the once-subdivided graph
    let derived = h.derived();
    let mut vertex_map: Vec<Vertex> = base.vertices().map(|v| h.map_vertex(v)).collect();
    let mut paths = h.paths().to_vec();

    for (orig_e, g1_path) in g1map.paths().iter().enumerate() {
        // The base-level path of this origin edge: its two halves through the
        // midpoint.
        assert_eq!(g1_path.edges.len(), 2, "base graph is not once-subdivided");
        let half1 = g1_path.edges[0];
        let half2 = g1_path.edges[1];
        let midpoint = g1_path.vertices[1];
        // Full H path, oriented along the origin edge.
        let (p1, rev1) = oriented(base, h, half1, g1_path.vertices[0]);
        let (p2, rev2) = oriented(base, h, half2, midpoint);
        let mut full_vertices = p1.clone();
        full_vertices.extend(p2[1..].iter().copied());
        let mut full_edges = oriented_edges(h, half1, rev1);
        full_edges.extend(oriented_edges(h, half2, rev2));

        let interior: Vec<usize> = (1..full_vertices.len() - 1)
            .filter(|&pos| d.get(full_vertices[pos]) > 0)
            .collect();
        let chips: u32 = interior.iter().map(|&pos| d.get(full_vertices[pos])).sum();
        if chips > 1 {
            return Err(WitnessError::NotConsolidated {
                edge: g1map.origin().edge(EdgeIx(orig_e)).id.clone(),
                count: chips,
            });
        }
        let cut = interior
            .first()
            .copied()
            .unwrap_or_else(|| p1.len() - 1); // default: the existing midpoint
        vertex_map[midpoint.0] = full_vertices[cut];
        paths[half1.0] = crate::multigraph::ExpansionPath {
            vertices: full_vertices[..=cut].to_vec(),
            edges: full_edges[..cut].to_vec(),
        };
        paths[half2.0] = crate::multigraph::ExpansionPath {
            vertices: full_vertices[cut..].to_vec(),
            edges: full_edges[cut..].to_vec(),
        };
    }
    let rebased = SubdivisionMap::with_paths(base.clone(), derived.clone(), vertex_map, paths);
    rebased.validate()?;
    Ok(rebased)
}

fn oriented(
    base: &Multigraph,
    h: &SubdivisionMap,
    e: EdgeIx,
    from: Vertex,
) -> (Vec<Vertex>, bool) {
    let path = h.path(e);
    if base.edge(e).ends[0] == from {
        (path.vertices.clone(), false)
    } else {
        let mut v = path.vertices.clone();
        v.reverse();
        (v, true)
    }
}

fn oriented_edges(h: &SubdivisionMap, e: EdgeIx, reversed: bool) -> Vec<EdgeIx> {
    let mut edges = h.path(e).edges.clone();
    if reversed {
        edges.reverse();
    }
    edges
}

/// 1-based indices of the relevant sets of a legal script: those that move a
/// chip off or onto a base vertex, or that first engulf one (the zeroth set
/// is taken to be empty).
pub fn extract_relevant(
    gmap: &SubdivisionMap,
    d: &Divisor,
    s: &FiringScript,
) -> Result<Vec<usize>, WitnessError> {
    let trajectory = run_script(gmap.derived(), d, s).map_err(|e| match e {
        ChipError::InvalidSetAtIndex { index } => WitnessError::IllegalScript {
            target: String::new(),
            index,
        },
        other => WitnessError::Chip(other),
    })?;
    let images: Vec<Vertex> = gmap.origin().vertices().map(|v| gmap.map_vertex(v)).collect();
    let mut relevant = Vec::new();
    let mut previously_included: BTreeSet<Vertex> = BTreeSet::new();
    for (i, set) in s.sets().iter().enumerate() {
        let moved = images.iter().any(|&img| {
            trajectory[i + 1].get(img) != trajectory[i].get(img)
        });
        let first_inclusion = images
            .iter()
            .any(|&img| set.contains(&img) && !previously_included.contains(&img));
        if moved || first_inclusion {
            relevant.push(i + 1);
        }
        for &img in &images {
            if set.contains(&img) {
                previously_included.insert(img);
            }
        }
    }
    Ok(relevant)
}

/// Replays a script with individually labelled chips and records, per firing
/// set, which chips depart from or arrive at base vertices and along which
/// base edge. When a vertex loses `c` chips across `c` cut edges, the
/// lowest-labelled resident chips depart, matched to cut edges in
/// lexicographic edge-id order.
pub fn track_moves(
    gmap: &SubdivisionMap,
    labeled: &LabeledDivisor,
    s: &FiringScript,
) -> Result<Vec<BTreeSet<MoveTuple>>, WitnessError> {
    let derived = gmap.derived();
    let origin_of = gmap.origin_vertex_of();
    let carrier = gmap.carrier_of();
    let mut positions: Vec<Vertex> = (1..=labeled.degree()).map(|j| labeled.chip(j)).collect();
    let mut records = Vec::with_capacity(s.len());
    let mut current = labeled.forget(derived);

    for (i, set) in s.sets().iter().enumerate() {
        if !crate::chip_firing::is_valid_set(derived, &current, set) {
            return Err(WitnessError::IllegalScript {
                target: String::new(),
                index: i,
            });
        }
        let mut mask = vec![false; derived.vertex_count()];
        for &v in set {
            mask[v.0] = true;
        }
        let mut tuples = BTreeSet::new();
        let mut moves: Vec<(usize, Vertex)> = Vec::new(); // chip index -> destination
        for &x in set {
            // Cut edges of x in lexicographic edge-id order.
            let mut cut_edges: Vec<EdgeIx> = derived
                .incident(x)
                .iter()
                .filter(|(other, _)| !mask[other.0])
                .map(|&(_, e)| e)
                .collect();
            cut_edges.sort_by(|a, b| derived.edge(*a).id.cmp(&derived.edge(*b).id));
            if cut_edges.is_empty() {
                continue;
            }
            let mut residents: Vec<usize> = positions
                .iter()
                .enumerate()
                .filter(|(_, &pos)| pos == x)
                .map(|(ci, _)| ci)
                .collect();
            residents.sort();
            assert!(
                residents.len() >= cut_edges.len(),
                "valid set has enough chips"
            );
            for (chip_index, &edge) in residents.iter().zip(cut_edges.iter()) {
                let destination = derived.edge(edge).other_end(x).unwrap();
                moves.push((*chip_index, destination));
                let chip_label = *chip_index as u32 + 1;
                if let Some(base_v) = origin_of[x.0] {
                    tuples.insert(MoveTuple {
                        vertex: base_v,
                        chip: chip_label,
                        sign: -1,
                        edge: carrier[edge.0],
                    });
                }
                if let Some(base_v) = origin_of[destination.0] {
                    tuples.insert(MoveTuple {
                        vertex: base_v,
                        chip: chip_label,
                        sign: 1,
                        edge: carrier[edge.0],
                    });
                }
            }
        }
        for (chip_index, destination) in moves {
            positions[chip_index] = destination;
        }
        current = fire_set(derived, &current, set)?;
        debug_assert_eq!(
            {
                let mut counts = Divisor::zero(derived);
                for &pos in &positions {
                    counts.add(pos, 1);
                }
                counts
            },
            current,
            "labelled replay tracks the multiset replay"
        );
        records.push(tuples);
    }
    Ok(records)
}

/// A built certificate together with the relevant-set indices it came from,
/// which carry the ground-truth gap values.
#[derive(Debug, Clone)]
pub struct CompiledWitness {
    pub certificate: PartialCertificate,
    /// Per target, the 1-based indices of the relevant sets in the witness
    /// script.
    pub relevant: BTreeMap<Vertex, Vec<usize>>,
}

/// Builds the partial certificate of a witness: chips are labelled
/// canonically, every target's script is replayed with move tracking, and
/// the relevant sets (intersected with the base vertex set) become the pair
/// sequence. The start divisor must live on base vertices and have degree at
/// most `k`.
pub fn build_certificate(
    g1: &Multigraph,
    witness: &Witness,
    k: u32,
) -> Result<PartialCertificate, WitnessError> {
    compile_witness(g1, witness, k).map(|c| c.certificate)
}

pub fn compile_witness(
    g1: &Multigraph,
    witness: &Witness,
    k: u32,
) -> Result<CompiledWitness, WitnessError> {
    let h = &witness.h;
    let derived = h.derived();
    let degree = witness.start.degree();
    if degree > k {
        return Err(WitnessError::DegreeExceedsK { degree, k });
    }
    let origin_of = h.origin_vertex_of();
    for v in witness.start.support() {
        if origin_of[v.0].is_none() {
            return Err(WitnessError::ChipsOffBase {
                vertex: derived.vertex_label(v).to_string(),
            });
        }
    }
    let labeled_h = LabeledDivisor::canonical(derived, &witness.start);
    let start_base = LabeledDivisor::new(
        (1..=degree)
            .map(|j| origin_of[labeled_h.chip(j).0].unwrap())
            .collect(),
    );

    let mut sequences: BTreeMap<Vertex, Vec<Pair>> = BTreeMap::new();
    let mut relevant_map = BTreeMap::new();
    for target in g1.vertices() {
        let script = witness.script_for(target);
        let tuples = track_moves(h, &labeled_h, &script).map_err(|e| match e {
            WitnessError::IllegalScript { index, .. } => WitnessError::IllegalScript {
                target: g1.vertex_label(target).to_string(),
                index,
            },
            other => other,
        })?;
        let relevant = extract_relevant(h, &witness.start, &script)?;
        for (i, t) in tuples.iter().enumerate() {
            debug_assert!(
                relevant.contains(&(i + 1)) || t.is_empty(),
                "base chip events only occur at relevant sets"
            );
        }
        let pairs = relevant
            .iter()
            .map(|&i| {
                let set = script.sets()[i - 1]
                    .iter()
                    .filter_map(|&v| origin_of[v.0])
                    .collect();
                Pair {
                    set,
                    moves: tuples[i - 1].clone(),
                }
            })
            .collect();
        sequences.insert(target, pairs);
        relevant_map.insert(target, relevant);
    }
    let certificate = PartialCertificate::new(g1, k, start_base, sequences)?;
    Ok(CompiledWitness {
        certificate,
        relevant: relevant_map,
    })
}

/// The ground-truth assignment of a compiled witness: true path lengths for
/// the `l` variables and true relevant-set gaps for the `t` variables (the
/// final gap of each sequence is 1).
pub fn ground_truth_assignment(g1: &Multigraph, witness: &Witness, compiled: &CompiledWitness) -> IlpAssignment {
    let mut values = BTreeMap::new();
    for (i, e) in g1.edges().iter().enumerate() {
        values.insert(length_var(&e.id), witness.h.path(EdgeIx(i)).len() as u64);
    }
    for (&target, relevant) in &compiled.relevant {
        let label = g1.vertex_label(target);
        for (j, window) in relevant.windows(2).enumerate() {
            values.insert(gap_var(label, j + 1), (window[1] - window[0]) as u64);
        }
        if !relevant.is_empty() {
            values.insert(gap_var(label, relevant.len()), 1);
        }
    }
    IlpAssignment { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::test_fixtures::{figure_certificate_json, parallel_pair};
    use crate::certificate::validate;
    use crate::chip_firing::reaches;
    use crate::ilp::{build_ilp, check_assignment};
    use crate::multigraph::build_g1;

    /// The parallel-pair witness: H with path lengths 3 and 4, seven chips on
    /// u, and the twelve-set script delivering chips to v.
    fn figure_witness() -> (Multigraph, Witness) {
        let base = parallel_pair();
        let lengths: BTreeMap<String, u64> =
            [("e1".to_string(), 3), ("e2".to_string(), 4)].into();
        let h = expand_by_lengths(&SubdivisionMap::identity(&base), &lengths).unwrap();
        let derived = h.derived();
        let mut start = Divisor::zero(derived);
        start.set(derived.vertex_by_label("u").unwrap(), 7);
        let x1 = "e1.1";
        let x2 = "e1.2";
        let y1 = "e2.1";
        let y2 = "e2.2";
        let y3 = "e2.3";
        let sets: Vec<Vec<&str>> = vec![
            vec!["u"],
            vec!["u"],
            vec!["u"],
            vec!["u", y1],
            vec!["u", x1, y1],
            vec!["u", x1, y1],
            vec!["u", x1, y1, y2],
            vec!["u", x1, y1, y2],
            vec!["u", x1, x2, y1, y2],
            vec!["u", x1, x2, y1, y2, y3],
            vec!["u", x1, x2, y1, y2, y3],
            vec!["u", x1, x2, y1, y2, y3],
        ];
        let labelled: Vec<Vec<String>> = sets
            .into_iter()
            .map(|s| s.into_iter().map(String::from).collect())
            .collect();
        let script = FiringScript::from_labels(derived, &labelled).unwrap();
        let target_v = base.vertex_by_label("v").unwrap();
        let witness = Witness {
            h,
            start,
            scripts: [(target_v, script)].into(),
        };
        (base, witness)
    }

    #[test]
    fn figure_script_replays_and_reaches_v() {
        let (_, witness) = figure_witness();
        let derived = witness.h.derived();
        let script = witness.scripts.values().next().unwrap();
        let trajectory = run_script(derived, &witness.start, script).unwrap();
        let v = derived.vertex_by_label("v").unwrap();
        assert!(trajectory.last().unwrap().get(v) >= 1);
    }

    #[test]
    fn figure_relevant_sets_are_the_eight() {
        let (_, witness) = figure_witness();
        let script = witness.scripts.values().next().unwrap().clone();
        let relevant = extract_relevant(&witness.h, &witness.start, &script).unwrap();
        assert_eq!(relevant, vec![1, 2, 3, 4, 9, 10, 11, 12]);
    }

    #[test]
    fn figure_compiles_to_the_frozen_certificate() {
        let (base, witness) = figure_witness();
        let compiled = compile_witness(&base, &witness, 7).unwrap();
        let expected =
            PartialCertificate::from_json(&base, &figure_certificate_json()).unwrap();
        assert_eq!(compiled.certificate, expected);
        assert!(validate(&base, &compiled.certificate).is_empty());
    }

    #[test]
    fn figure_ground_truth_satisfies_its_ilp() {
        let (base, witness) = figure_witness();
        let compiled = compile_witness(&base, &witness, 7).unwrap();
        let inst = build_ilp(&base, &compiled.certificate).unwrap();
        let truth = ground_truth_assignment(&base, &witness, &compiled);
        assert_eq!(truth.get("l[e1]"), Some(3));
        assert_eq!(truth.get("l[e2]"), Some(4));
        assert_eq!(truth.get("t[v,4]"), Some(5));
        assert_eq!(truth.get("t[v,8]"), Some(1));
        assert!(check_assignment(&inst, &truth).unwrap());
    }

    #[test]
    fn single_vertex_empty_witness() {
        let base = Multigraph::new(vec!["w"], Vec::<(&str, &str, &str)>::new()).unwrap();
        let h = SubdivisionMap::identity(&base);
        let mut start = Divisor::zero(&base);
        start.set(Vertex(0), 1);
        let witness = Witness {
            h,
            start,
            scripts: BTreeMap::new(),
        };
        let cert = build_certificate(&base, &witness, 1).unwrap();
        assert!(validate(&base, &cert).is_empty());
        assert!(cert.sequences.iter().all(Vec::is_empty));
    }

    #[test]
    fn tracking_on_unsubdivided_graph_records_every_move() {
        // On an identity map every chip move is a base event and every
        // chip-moving set is relevant.
        let base = parallel_pair();
        let map = SubdivisionMap::identity(&base);
        let mut start = Divisor::zero(&base);
        let u = base.vertex_by_label("u").unwrap();
        start.set(u, 2);
        let script =
            FiringScript::from_labels(&base, &[vec!["u".to_string()]]).unwrap();
        let labeled = LabeledDivisor::canonical(&base, &start);
        let tuples = track_moves(&map, &labeled, &script).unwrap();
        assert_eq!(tuples.len(), 1);
        let expected: BTreeSet<MoveTuple> = [
            MoveTuple { vertex: u, chip: 1, sign: -1, edge: EdgeIx(0) },
            MoveTuple { vertex: u, chip: 2, sign: -1, edge: EdgeIx(1) },
            MoveTuple { vertex: Vertex(1), chip: 1, sign: 1, edge: EdgeIx(0) },
            MoveTuple { vertex: Vertex(1), chip: 2, sign: 1, edge: EdgeIx(1) },
        ]
        .into();
        // Lowest label takes the lexicographically least edge (e1).
        assert_eq!(tuples[0], expected);
        let relevant = extract_relevant(&map, &start, &script).unwrap();
        assert_eq!(relevant, vec![1]);
    }

    #[test]
    fn consolidation_pushes_interior_pair_to_an_endpoint() {
        // Two chips on the interior of one length-5 path.
        let base = Multigraph::new(vec!["a", "b"], vec![("e", "a", "b")]).unwrap();
        let lengths: BTreeMap<String, u64> = [("e".to_string(), 5)].into();
        let h = expand_by_lengths(&SubdivisionMap::identity(&base), &lengths).unwrap();
        let derived = h.derived();
        let mut d = Divisor::zero(derived);
        d.set(derived.vertex_by_label("e.2").unwrap(), 1);
        d.set(derived.vertex_by_label("e.3").unwrap(), 1);
        let (consolidated, script) = consolidate_chips(&h, &d).unwrap();
        let trajectory = run_script(derived, &d, &script).unwrap();
        assert_eq!(trajectory.last().unwrap(), &consolidated);
        let interior_chips: u32 = (1..=4)
            .map(|i| consolidated.get(derived.vertex_by_label(&format!("e.{}", i)).unwrap()))
            .sum();
        assert!(interior_chips <= 1);
        assert_eq!(consolidated.degree(), 2);
    }

    #[test]
    fn consolidation_is_identity_on_base_supported_divisors() {
        let base = parallel_pair();
        let g1 = build_g1(&base);
        let mut d = Divisor::zero(g1.derived());
        d.set(g1.derived().vertex_by_label("u").unwrap(), 3);
        let (consolidated, script) = consolidate_chips(&g1, &d).unwrap();
        assert_eq!(consolidated, d);
        assert!(script.is_empty());
    }

    #[test]
    fn rebase_moves_midpoint_onto_chip() {
        let base = Multigraph::new(vec!["a", "b"], vec![("e", "a", "b")]).unwrap();
        let g1map = build_g1(&base);
        let g1 = g1map.derived().clone();
        // H: subdivide both halves once more, then put a chip off-centre.
        let lengths: BTreeMap<String, u64> = g1
            .edges()
            .iter()
            .map(|e| (e.id.clone(), 2))
            .collect();
        let h = expand_by_lengths(&SubdivisionMap::identity(&g1), &lengths).unwrap();
        let derived = h.derived().clone();
        let mut d = Divisor::zero(&derived);
        // Full path a - e:1.1 - e.1 - e:2.1 - b; chip on e:2.1.
        let chip_vertex = derived.vertex_by_label("e:2.1").unwrap();
        d.set(chip_vertex, 1);
        d.set(derived.vertex_by_label("a").unwrap(), 1);
        let rebased = rebase_midpoints(&g1map, &h, &d).unwrap();
        let mid = g1.vertex_by_label("e.1").unwrap();
        assert_eq!(rebased.map_vertex(mid), chip_vertex);
        rebased.validate().unwrap();
        // Now every chip sits on the image of a base vertex.
        let origin_of = rebased.origin_vertex_of();
        for v in d.support() {
            assert!(origin_of[v.0].is_some());
        }
    }

    #[test]
    fn reachability_is_preserved_by_consolidation() {
        let base = parallel_pair();
        let lengths: BTreeMap<String, u64> =
            [("e1".to_string(), 2), ("e2".to_string(), 3)].into();
        let h = expand_by_lengths(&SubdivisionMap::identity(&base), &lengths).unwrap();
        let derived = h.derived();
        let mut d = Divisor::zero(derived);
        d.set(derived.vertex_by_label("e1.1").unwrap(), 1);
        d.set(derived.vertex_by_label("e2.1").unwrap(), 1);
        let (consolidated, _) = consolidate_chips(&h, &d).unwrap();
        for v in derived.vertices() {
            assert_eq!(
                reaches(derived, &d, v),
                reaches(derived, &consolidated, v),
                "equivalent divisors reach the same vertices"
            );
        }
    }
}
