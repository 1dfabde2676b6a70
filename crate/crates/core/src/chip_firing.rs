//! Divisor semantics on multigraphs: set firing, monotone firing scripts,
//! brute-force and reduced-divisor reachability oracles, and divisorial
//! gonality by exhaustive divisor enumeration.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::multigraph::{Multigraph, Vertex};

/// Default cap on visited divisor states in [`reaches_bruteforce`].
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ChipError {
    #[error("unknown vertex id {0:?}")]
    UnknownVertex(String),
    #[error("set is not valid for the divisor: vertex {vertex:?} has {chips} chips but {cut} cut edges")]
    InvalidSet {
        vertex: String,
        chips: u32,
        cut: usize,
    },
    #[error("script set {index} is not valid when fired in order")]
    InvalidSetAtIndex { index: usize },
    #[error("state cap of {cap} divisor states exceeded")]
    StateCapExceeded { cap: usize },
    #[error("brute-force exploration supports at most 64 vertices, got {0}")]
    TooManyVertices(usize),
    #[error("chip labels must be exactly 1..=k, found {0:?}")]
    BadChipLabel(String),
    #[error("reduced-divisor reachability disagrees with brute force for target {target:?}")]
    OracleDisagreement { target: String },
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("script set {0} does not contain the previous set")]
    NotMonotone(usize),
    #[error("script set {0} is empty")]
    EmptySet(usize),
    #[error("script set {0} fires the whole vertex set")]
    FiresWholeGraph(usize),
    #[error("script set {index} references vertex {label:?} outside the graph")]
    UnknownVertex { index: usize, label: String },
}

/// An effective divisor: a non-negative chip count per vertex. Only
/// effective divisors are materialized.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Divisor {
    counts: Vec<u32>,
}

/// Serialized divisor form: `{"counts": {"u": 7}}`; omitted vertices hold 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivisorJson {
    pub counts: BTreeMap<String, u32>,
}

impl Divisor {
    pub fn zero(g: &Multigraph) -> Divisor {
        Divisor {
            counts: vec![0; g.vertex_count()],
        }
    }

    pub fn from_counts(counts: Vec<u32>) -> Divisor {
        Divisor { counts }
    }

    pub fn from_json(g: &Multigraph, json: &DivisorJson) -> Result<Divisor, ChipError> {
        let mut d = Divisor::zero(g);
        for (label, &c) in &json.counts {
            let v = g
                .vertex_by_label(label)
                .map_err(|_| ChipError::UnknownVertex(label.clone()))?;
            d.counts[v.0] = c;
        }
        Ok(d)
    }

    pub fn to_json(&self, g: &Multigraph) -> DivisorJson {
        let counts = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (g.vertex_label(Vertex(i)).to_string(), c))
            .collect();
        DivisorJson { counts }
    }

    pub fn get(&self, v: Vertex) -> u32 {
        self.counts[v.0]
    }

    pub fn set(&mut self, v: Vertex, c: u32) {
        self.counts[v.0] = c;
    }

    pub fn add(&mut self, v: Vertex, c: u32) {
        self.counts[v.0] += c;
    }

    /// Total chip count; invariant under firing.
    pub fn degree(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn support(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| Vertex(i))
    }
}

/// A divisor with individually labelled chips `1..=k`; `location[j-1]` is the
/// vertex holding chip `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDivisor {
    location: Vec<Vertex>,
}

/// Serialized labelled form: `{"chips": {"1": "u", "2": "u"}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledDivisorJson {
    pub chips: BTreeMap<String, String>,
}

impl LabeledDivisor {
    pub fn new(location: Vec<Vertex>) -> LabeledDivisor {
        LabeledDivisor { location }
    }

    /// Labels chips canonically: vertices in label-lexicographic order, chips
    /// `1..multiplicity` within a vertex.
    pub fn canonical(g: &Multigraph, d: &Divisor) -> LabeledDivisor {
        let mut location = Vec::with_capacity(d.degree() as usize);
        for v in g.vertices_by_label() {
            for _ in 0..d.get(v) {
                location.push(v);
            }
        }
        LabeledDivisor { location }
    }

    pub fn degree(&self) -> u32 {
        self.location.len() as u32
    }

    /// Vertex of chip `j` (1-based).
    pub fn chip(&self, j: u32) -> Vertex {
        self.location[(j - 1) as usize]
    }

    pub fn forget(&self, g: &Multigraph) -> Divisor {
        let mut d = Divisor::zero(g);
        for &v in &self.location {
            d.add(v, 1);
        }
        d
    }

    pub fn from_json(g: &Multigraph, json: &LabeledDivisorJson) -> Result<LabeledDivisor, ChipError> {
        let k = json.chips.len() as u32;
        let mut location = vec![None; k as usize];
        for (label, vertex) in &json.chips {
            let j: u32 = label
                .parse()
                .map_err(|_| ChipError::BadChipLabel(label.clone()))?;
            if j == 0 || j > k || location[(j - 1) as usize].is_some() {
                return Err(ChipError::BadChipLabel(label.clone()));
            }
            let v = g
                .vertex_by_label(vertex)
                .map_err(|_| ChipError::UnknownVertex(vertex.clone()))?;
            location[(j - 1) as usize] = Some(v);
        }
        Ok(LabeledDivisor {
            location: location.into_iter().map(Option::unwrap).collect(),
        })
    }

    pub fn to_json(&self, g: &Multigraph) -> LabeledDivisorJson {
        LabeledDivisorJson {
            chips: self
                .location
                .iter()
                .enumerate()
                .map(|(i, &v)| ((i + 1).to_string(), g.vertex_label(v).to_string()))
                .collect(),
        }
    }
}

/// An increasing sequence of vertex sets. Each set must contain the previous
/// one, be non-empty, and be a strict subset of the vertex set (firing all of
/// V is a no-op and rejected).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiringScript {
    sets: Vec<BTreeSet<Vertex>>,
}

impl FiringScript {
    pub fn new(g: &Multigraph, sets: Vec<BTreeSet<Vertex>>) -> Result<FiringScript, ScriptError> {
        let n = g.vertex_count();
        for (i, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(ScriptError::EmptySet(i));
            }
            if set.len() >= n {
                return Err(ScriptError::FiresWholeGraph(i));
            }
            if set.iter().any(|v| v.0 >= n) {
                return Err(ScriptError::UnknownVertex {
                    index: i,
                    label: format!("{:?}", set.iter().find(|v| v.0 >= n).unwrap()),
                });
            }
            if i > 0 && !set.is_superset(&sets[i - 1]) {
                return Err(ScriptError::NotMonotone(i));
            }
        }
        Ok(FiringScript { sets })
    }

    pub fn empty() -> FiringScript {
        FiringScript { sets: Vec::new() }
    }

    pub fn sets(&self) -> &[BTreeSet<Vertex>] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn from_labels(g: &Multigraph, sets: &[Vec<String>]) -> Result<FiringScript, ScriptError> {
        let mut typed = Vec::with_capacity(sets.len());
        for (i, set) in sets.iter().enumerate() {
            let mut s = BTreeSet::new();
            for label in set {
                let v = g.vertex_by_label(label).map_err(|_| ScriptError::UnknownVertex {
                    index: i,
                    label: label.clone(),
                })?;
                s.insert(v);
            }
            typed.push(s);
        }
        FiringScript::new(g, typed)
    }

    pub fn to_labels(&self, g: &Multigraph) -> Vec<Vec<String>> {
        self.sets
            .iter()
            .map(|s| s.iter().map(|&v| g.vertex_label(v).to_string()).collect())
            .collect()
    }
}

fn set_mask(g: &Multigraph, set: &BTreeSet<Vertex>) -> Vec<bool> {
    let mut mask = vec![false; g.vertex_count()];
    for &v in set {
        mask[v.0] = true;
    }
    mask
}

/// True iff every vertex of `set` holds at least as many chips as it has
/// edges leaving the set (counted with multiplicity). The empty set is
/// vacuously valid.
pub fn is_valid_set(g: &Multigraph, d: &Divisor, set: &BTreeSet<Vertex>) -> bool {
    let mask = set_mask(g, set);
    set.iter()
        .all(|&v| d.get(v) as usize >= g.cut_degree(v, &mask))
}

/// Fires `set`: every member loses one chip per cut edge, every outside
/// vertex gains one chip per edge into the set. Degree is preserved.
pub fn fire_set(g: &Multigraph, d: &Divisor, set: &BTreeSet<Vertex>) -> Result<Divisor, ChipError> {
    let mask = set_mask(g, set);
    for &v in set {
        let cut = g.cut_degree(v, &mask);
        if (d.get(v) as usize) < cut {
            return Err(ChipError::InvalidSet {
                vertex: g.vertex_label(v).to_string(),
                chips: d.get(v),
                cut,
            });
        }
    }
    let mut next = d.clone();
    for e in g.edges() {
        let inside0 = mask[e.ends[0].0];
        let inside1 = mask[e.ends[1].0];
        if inside0 && !inside1 {
            next.counts[e.ends[0].0] -= 1;
            next.counts[e.ends[1].0] += 1;
        } else if inside1 && !inside0 {
            next.counts[e.ends[1].0] -= 1;
            next.counts[e.ends[0].0] += 1;
        }
    }
    Ok(next)
}

/// Replays a script, returning the trajectory `D_0 .. D_r`. Fails atomically
/// at the first invalid set, reporting its index.
pub fn run_script(
    g: &Multigraph,
    d: &Divisor,
    script: &FiringScript,
) -> Result<Vec<Divisor>, ChipError> {
    let mut trajectory = vec![d.clone()];
    for (i, set) in script.sets().iter().enumerate() {
        let current = trajectory.last().unwrap();
        let next =
            fire_set(g, current, set).map_err(|_| ChipError::InvalidSetAtIndex { index: i })?;
        trajectory.push(next);
    }
    Ok(trajectory)
}

/// Exhaustive reachability oracle: breadth-first search over the effective
/// divisors obtainable by firing valid non-empty proper subsets, in canonical
/// lexicographic order. Exploration is exhaustive over the finite equivalence
/// class; exceeding `cap` visited states is an error so callers can fall back
/// to the fast path.
pub fn reaches_bruteforce(
    g: &Multigraph,
    d: &Divisor,
    target: Vertex,
    cap: usize,
) -> Result<bool, ChipError> {
    Ok(explore_class(g, d, cap)?.iter().any(|s| s.get(target) >= 1))
}

/// All divisors in the firing equivalence class of `d` (proper-subset
/// firings), up to `cap` states.
pub fn explore_class(g: &Multigraph, d: &Divisor, cap: usize) -> Result<Vec<Divisor>, ChipError> {
    let n = g.vertex_count();
    if n > 64 {
        return Err(ChipError::TooManyVertices(n));
    }
    let neighbor_mult: Vec<Vec<(usize, u32)>> = (0..n)
        .map(|v| {
            let mut m: BTreeMap<usize, u32> = BTreeMap::new();
            for &(u, _) in g.incident(Vertex(v)) {
                *m.entry(u.0).or_default() += 1;
            }
            m.into_iter().collect()
        })
        .collect();
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut visited: HashSet<Vec<u32>> = HashSet::new();
    let mut order: Vec<Divisor> = Vec::new();
    let mut queue: VecDeque<Vec<u32>> = VecDeque::new();
    visited.insert(d.counts().to_vec());
    order.push(d.clone());
    queue.push_back(d.counts().to_vec());
    while let Some(state) = queue.pop_front() {
        let mut mask: u64 = 1;
        while mask < full {
            if mask & full == mask && mask != 0 {
                if let Some(next) = fire_mask(&state, mask, &neighbor_mult) {
                    if !visited.contains(&next) {
                        if visited.len() >= cap {
                            return Err(ChipError::StateCapExceeded { cap });
                        }
                        visited.insert(next.clone());
                        order.push(Divisor::from_counts(next.clone()));
                        queue.push_back(next);
                    }
                }
            }
            mask += 1;
        }
    }
    Ok(order)
}

fn fire_mask(state: &[u32], mask: u64, neighbor_mult: &[Vec<(usize, u32)>]) -> Option<Vec<u32>> {
    let n = state.len();
    let mut next = state.to_vec();
    for v in 0..n {
        if mask >> v & 1 == 1 {
            let mut out = 0u32;
            for &(u, mult) in &neighbor_mult[v] {
                if mask >> u & 1 == 0 {
                    out += mult;
                }
            }
            if state[v] < out {
                return None;
            }
            next[v] -= out;
        } else {
            for &(u, mult) in &neighbor_mult[v] {
                if mask >> u & 1 == 1 {
                    next[v] += mult;
                }
            }
        }
    }
    Some(next)
}

/// Dhar's burning algorithm: returns the `q`-reduced divisor equivalent to
/// `d`. The divisor reaches `q` iff the result has a chip on `q`.
pub fn reduce_at(g: &Multigraph, d: &Divisor, q: Vertex) -> Divisor {
    reduce_at_with_counts(g, d, q).0
}

/// As [`reduce_at`], also returning how often each vertex fired along the
/// way. The counts induce a monotone level-set script realizing the
/// equivalence.
pub fn reduce_at_with_counts(g: &Multigraph, d: &Divisor, q: Vertex) -> (Divisor, Vec<u64>) {
    let n = g.vertex_count();
    let mut d = d.clone();
    let mut fire_counts = vec![0u64; n];
    loop {
        let mut burnt = vec![false; n];
        burnt[q.0] = true;
        loop {
            let mut changed = false;
            for v in 0..n {
                if burnt[v] {
                    continue;
                }
                let burnt_edges = g
                    .incident(Vertex(v))
                    .iter()
                    .filter(|(u, _)| burnt[u.0])
                    .count() as u32;
                if burnt_edges > d.get(Vertex(v)) {
                    burnt[v] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if burnt.iter().all(|&b| b) {
            break;
        }
        // Fire the unburnt set; it is valid by the burning fixpoint.
        for e in g.edges() {
            let b0 = burnt[e.ends[0].0];
            let b1 = burnt[e.ends[1].0];
            if !b0 && b1 {
                d.counts[e.ends[0].0] -= 1;
                d.counts[e.ends[1].0] += 1;
            } else if !b1 && b0 {
                d.counts[e.ends[1].0] -= 1;
                d.counts[e.ends[0].0] += 1;
            }
        }
        for v in 0..n {
            if !burnt[v] {
                fire_counts[v] += 1;
            }
        }
    }
    (d, fire_counts)
}

/// Converts per-vertex firing counts into the monotone level-set script that
/// fires each vertex that many times: thresholds descend from the maximum
/// count, so the sets grow.
pub fn level_set_script(g: &Multigraph, counts: &[u64]) -> Result<FiringScript, ScriptError> {
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut sets = Vec::with_capacity(max as usize);
    for threshold in (1..=max).rev() {
        let set: BTreeSet<Vertex> = (0..counts.len())
            .filter(|&v| counts[v] >= threshold)
            .map(Vertex)
            .collect();
        sets.push(set);
    }
    FiringScript::new(g, sets)
}

/// Does `d` reach `v`? Fast path via the `v`-reduced divisor.
pub fn reaches(g: &Multigraph, d: &Divisor, v: Vertex) -> bool {
    reduce_at(g, d, v).get(v) >= 1
}

/// Monotone script from `d` that ends with a chip on `target`, if one
/// exists: the level-set decomposition of the Dhar reduction's firing
/// counts.
pub fn script_reaching(
    g: &Multigraph,
    d: &Divisor,
    target: Vertex,
) -> Option<(FiringScript, Divisor)> {
    let (reduced, counts) = reduce_at_with_counts(g, d, target);
    if reduced.get(target) == 0 {
        return None;
    }
    let script = level_set_script(g, &counts).expect("level-set script is monotone");
    Some((script, reduced))
}

/// Outcome of a capped gonality search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DgonOutcome {
    Found { k: u32, divisor: Divisor },
    Exceeded { k_max: u32 },
}

impl DgonOutcome {
    pub fn value(&self) -> Option<u32> {
        match self {
            DgonOutcome::Found { k, .. } => Some(*k),
            DgonOutcome::Exceeded { .. } => None,
        }
    }
}

/// Options for [`dgon_with`].
#[derive(Debug, Clone, Default)]
pub struct DgonOptions {
    /// Cross-check every reduced-divisor reachability answer against the
    /// brute-force oracle.
    pub cross_check: bool,
    /// State cap for the cross-check oracle.
    pub state_cap: Option<usize>,
    /// Vertex permutations declared by the caller to be automorphisms;
    /// candidate divisors that are not lexicographically minimal in their
    /// orbit are skipped. No automorphism computation is performed here.
    pub symmetry_hint: Vec<Vec<Vertex>>,
}

/// Enumerates weak compositions of `k` over `n` slots in ascending
/// lexicographic order, stopping early when `f` returns `true`.
pub fn for_each_divisor_of_degree(n: usize, k: u32, mut f: impl FnMut(&[u32]) -> bool) -> bool {
    fn recurse(buf: &mut Vec<u32>, pos: usize, remaining: u32, f: &mut impl FnMut(&[u32]) -> bool) -> bool {
        if pos + 1 == buf.len() {
            buf[pos] = remaining;
            return f(buf);
        }
        for c in 0..=remaining {
            buf[pos] = c;
            if recurse(buf, pos + 1, remaining - c, f) {
                return true;
            }
        }
        false
    }
    if n == 0 {
        return false;
    }
    let mut buf = vec![0u32; n];
    recurse(&mut buf, 0, k, &mut f)
}

/// Divisorial gonality capped at `k_max`: the least `k` such that some
/// effective divisor of degree `k` reaches every vertex. Divisors are
/// enumerated in lexicographic order, so the reported witness is the least
/// one.
pub fn dgon(g: &Multigraph, k_max: u32) -> DgonOutcome {
    dgon_with(g, k_max, &DgonOptions::default()).expect("dgon without cross-check cannot fail")
}

pub fn dgon_with(g: &Multigraph, k_max: u32, opts: &DgonOptions) -> Result<DgonOutcome, ChipError> {
    let n = g.vertex_count();
    for perm in &opts.symmetry_hint {
        assert!(
            is_automorphism(g, perm),
            "symmetry hint is not an automorphism"
        );
    }
    for k in 1..=k_max {
        let mut witness: Option<Divisor> = None;
        let mut check_error: Option<ChipError> = None;
        for_each_divisor_of_degree(n, k, |counts| {
            if !opts.symmetry_hint.is_empty() && !orbit_minimal(counts, &opts.symmetry_hint) {
                return false;
            }
            let d = Divisor::from_counts(counts.to_vec());
            let mut all = true;
            for v in g.vertices() {
                let fast = reaches(g, &d, v);
                if opts.cross_check {
                    let cap = opts.state_cap.unwrap_or(DEFAULT_STATE_CAP);
                    match reaches_bruteforce(g, &d, v, cap) {
                        Ok(slow) if slow == fast => {}
                        Ok(_) => {
                            check_error = Some(ChipError::OracleDisagreement {
                                target: g.vertex_label(v).to_string(),
                            });
                            return true;
                        }
                        Err(e) => {
                            check_error = Some(e);
                            return true;
                        }
                    }
                }
                if !fast {
                    all = false;
                    break;
                }
            }
            if all {
                witness = Some(d);
                true
            } else {
                false
            }
        });
        if let Some(e) = check_error {
            return Err(e);
        }
        if let Some(divisor) = witness {
            return Ok(DgonOutcome::Found { k, divisor });
        }
    }
    Ok(DgonOutcome::Exceeded { k_max })
}

fn is_automorphism(g: &Multigraph, perm: &[Vertex]) -> bool {
    if perm.len() != g.vertex_count() {
        return false;
    }
    let mut edge_multiset: BTreeMap<(Vertex, Vertex), u32> = BTreeMap::new();
    let mut image_multiset: BTreeMap<(Vertex, Vertex), u32> = BTreeMap::new();
    for e in g.edges() {
        let mut ends = [e.ends[0], e.ends[1]];
        ends.sort();
        *edge_multiset.entry((ends[0], ends[1])).or_default() += 1;
        let mut imgs = [perm[e.ends[0].0], perm[e.ends[1].0]];
        imgs.sort();
        *image_multiset.entry((imgs[0], imgs[1])).or_default() += 1;
    }
    edge_multiset == image_multiset
}

fn orbit_minimal(counts: &[u32], perms: &[Vec<Vertex>]) -> bool {
    let mut permuted = vec![0u32; counts.len()];
    for perm in perms {
        for (v, &img) in perm.iter().enumerate() {
            permuted[img.0] = counts[v];
        }
        if permuted.as_slice() < counts {
            return false;
        }
    }
    true
}
