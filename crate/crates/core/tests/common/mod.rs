//! Shared test utilities: exhaustive small-multigraph enumeration up to
//! isomorphism, independent brute-force oracles, and seeded random witness
//! generation.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use sdgon_core::chip_firing::{explore_class, fire_set, is_valid_set, Divisor, FiringScript};
use sdgon_core::multigraph::{Multigraph, Vertex};

/// All connected loop-free multigraphs with `n` vertices and `m_min..=m_max`
/// edges, one representative per isomorphism class. Canonicalization is the
/// minimum edge multiset over all vertex permutations, so it is only usable
/// for small `n`.
pub fn connected_multigraphs(n: usize, m_min: usize, m_max: usize) -> Vec<Multigraph> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    if n == 1 {
        if m_min == 0 {
            out.push(single_vertex());
        }
        return out;
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    let mut mult = vec![0u32; pairs.len()];
    enumerate_multiplicities(
        &mut mult,
        0,
        m_min,
        m_max,
        &mut |mult: &[u32]| {
            if !connected(n, &pairs, mult) {
                return;
            }
            let canon = canonical_form(n, &pairs, mult);
            if seen.insert(canon) {
                out.push(graph_from_multiplicities(n, &pairs, mult));
            }
        },
    );
    out
}

fn single_vertex() -> Multigraph {
    Multigraph::new(vec!["v0"], Vec::<(&str, &str, &str)>::new()).unwrap()
}

fn enumerate_multiplicities(
    mult: &mut Vec<u32>,
    pos: usize,
    m_min: usize,
    m_max: usize,
    f: &mut impl FnMut(&[u32]),
) {
    let used: u32 = mult[..pos].iter().sum();
    if pos == mult.len() {
        if (used as usize) >= m_min {
            f(mult);
        }
        return;
    }
    let remaining = m_max as u32 - used;
    for c in 0..=remaining {
        mult[pos] = c;
        enumerate_multiplicities(mult, pos + 1, m_min, m_max, f);
    }
    mult[pos] = 0;
}

fn connected(n: usize, pairs: &[(usize, usize)], mult: &[u32]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        if mult[k] > 0 {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                count += 1;
                queue.push_back(u);
            }
        }
    }
    count == n
}

fn canonical_form(n: usize, pairs: &[(usize, usize)], mult: &[u32]) -> Vec<u32> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<Vec<u32>> = None;
    permute(&mut perm, 0, &mut |perm: &[usize]| {
        let mut image = vec![0u32; pairs.len()];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let (a, b) = (perm[i].min(perm[j]), perm[i].max(perm[j]));
            let idx = pairs.iter().position(|&p| p == (a, b)).unwrap();
            image[idx] += mult[k];
        }
        if best.as_ref().map_or(true, |b| image < *b) {
            best = Some(image);
        }
    });
    best.unwrap()
}

fn permute(perm: &mut Vec<usize>, pos: usize, f: &mut impl FnMut(&[usize])) {
    if pos == perm.len() {
        f(perm);
        return;
    }
    for i in pos..perm.len() {
        perm.swap(pos, i);
        permute(perm, pos + 1, f);
        perm.swap(pos, i);
    }
}

fn graph_from_multiplicities(n: usize, pairs: &[(usize, usize)], mult: &[u32]) -> Multigraph {
    let vertices: Vec<String> = (0..n).map(|i| format!("v{}", i)).collect();
    let mut edges = Vec::new();
    let mut id = 0;
    for (k, &(i, j)) in pairs.iter().enumerate() {
        for _ in 0..mult[k] {
            edges.push((format!("e{}", id), vertices[i].clone(), vertices[j].clone()));
            id += 1;
        }
    }
    Multigraph::new(vertices, edges).unwrap()
}

pub fn cycle(n: usize) -> Multigraph {
    let labels: Vec<String> = (0..n).map(|i| format!("v{}", i)).collect();
    let edges: Vec<(String, String, String)> = (0..n)
        .map(|i| {
            (
                format!("e{}", i),
                labels[i].clone(),
                labels[(i + 1) % n].clone(),
            )
        })
        .collect();
    Multigraph::new(labels, edges).unwrap()
}

pub fn complete_graph(n: usize) -> Multigraph {
    let labels: Vec<String> = (0..n).map(|i| format!("v{}", i)).collect();
    let mut edges = Vec::new();
    let mut id = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((format!("e{}", id), labels[i].clone(), labels[j].clone()));
            id += 1;
        }
    }
    Multigraph::new(labels, edges).unwrap()
}

pub fn parallel_pair() -> Multigraph {
    Multigraph::new(vec!["u", "v"], vec![("e1", "u", "v"), ("e2", "u", "v")]).unwrap()
}

/// All effective divisors of the given degree, lexicographic.
pub fn divisors_of_degree(g: &Multigraph, k: u32) -> Vec<Divisor> {
    let mut out = Vec::new();
    sdgon_core::chip_firing::for_each_divisor_of_degree(g.vertex_count(), k, |counts| {
        out.push(Divisor::from_counts(counts.to_vec()));
        false
    });
    out
}

/// Which vertices the divisor reaches, by exhaustive class exploration.
pub fn reached_by_bruteforce(g: &Multigraph, d: &Divisor, cap: usize) -> Vec<bool> {
    let class = explore_class(g, d, cap).expect("state cap hit in oracle");
    let mut reached = vec![false; g.vertex_count()];
    for state in class {
        for v in state.support() {
            reached[v.0] = true;
        }
    }
    reached
}

/// Divisorial gonality computed with the brute-force oracle only; the
/// independent route against the reduced-divisor fast path.
pub fn dgon_bruteforce(g: &Multigraph, k_max: u32, cap: usize) -> Option<u32> {
    for k in 1..=k_max {
        for d in divisors_of_degree(g, k) {
            if reached_by_bruteforce(g, &d, cap).iter().all(|&r| r) {
                return Some(k);
            }
        }
    }
    None
}

/// Reachability restricted to monotone scripts: breadth-first search over
/// (divisor, last fired set) states where each fired set must contain the
/// previous one.
pub fn reaches_monotone_bruteforce(g: &Multigraph, d: &Divisor, target: Vertex) -> bool {
    let n = g.vertex_count();
    assert!(n < 16);
    if d.get(target) >= 1 {
        return true;
    }
    let full: u32 = (1 << n) - 1;
    let mut visited: HashSet<(Vec<u32>, u32)> = HashSet::new();
    let mut queue: VecDeque<(Divisor, u32)> = VecDeque::new();
    visited.insert((d.counts().to_vec(), 0));
    queue.push_back((d.clone(), 0));
    while let Some((state, last)) = queue.pop_front() {
        // Enumerate proper non-empty supersets of `last`.
        let mut mask = last;
        loop {
            mask = (mask + 1) | last;
            if mask >= full {
                break;
            }
            if mask == 0 {
                continue;
            }
            let set: BTreeSet<Vertex> = (0..n).filter(|&v| mask >> v & 1 == 1).map(Vertex).collect();
            if !is_valid_set(g, &state, &set) {
                continue;
            }
            let next = fire_set(g, &state, &set).unwrap();
            if next.get(target) >= 1 {
                return true;
            }
            let key = (next.counts().to_vec(), mask);
            if visited.insert(key) {
                queue.push_back((next, mask));
            }
        }
    }
    false
}

/// A random connected multigraph with `n` vertices and up to `extra` edges
/// beyond a spanning tree.
pub fn random_connected_graph(rng: &mut StdRng, n: usize, extra: usize) -> Multigraph {
    let vertices: Vec<String> = (0..n).map(|i| format!("v{}", i)).collect();
    let mut edges = Vec::new();
    let mut id = 0;
    let mut push = |edges: &mut Vec<(String, String, String)>, i: usize, j: usize, id: &mut usize| {
        edges.push((format!("e{}", id), format!("v{}", i), format!("v{}", j)));
        *id += 1;
    };
    for v in 1..n {
        let parent = rng.gen_range(0..v);
        push(&mut edges, parent, v, &mut id);
    }
    if n >= 2 {
        for _ in 0..extra {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n);
            while j == i {
                j = rng.gen_range(0..n);
            }
            push(&mut edges, i.min(j), i.max(j), &mut id);
        }
    }
    Multigraph::new(vertices, edges).unwrap()
}

/// A random effective divisor of the given degree supported on the listed
/// vertices.
pub fn random_divisor_on(
    rng: &mut StdRng,
    g: &Multigraph,
    support: &[Vertex],
    degree: u32,
) -> Divisor {
    let mut d = Divisor::zero(g);
    for _ in 0..degree {
        let v = *support.choose(rng).unwrap();
        d.add(v, 1);
    }
    d
}

/// A random legal monotone script from `d`: grows a random chain of sets,
/// keeping only prefixes that replay.
pub fn random_monotone_script(rng: &mut StdRng, g: &Multigraph, d: &Divisor, max_len: usize) -> FiringScript {
    let n = g.vertex_count();
    let mut sets: Vec<BTreeSet<Vertex>> = Vec::new();
    let mut current = d.clone();
    let mut set: BTreeSet<Vertex> = BTreeSet::new();
    for _ in 0..max_len {
        // Randomly grow (or keep) the current set, then try to fire it.
        if set.is_empty() || rng.gen_bool(0.5) {
            let candidates: Vec<Vertex> = g.vertices().filter(|v| !set.contains(v)).collect();
            if candidates.len() <= 1 {
                break;
            }
            set.insert(*candidates.choose(rng).unwrap());
        }
        if set.len() >= n {
            break;
        }
        if is_valid_set(g, &current, &set) {
            current = fire_set(g, &current, &set).unwrap();
            sets.push(set.clone());
        }
    }
    FiringScript::new(g, sets).expect("grown chain is monotone")
}

/// BTreeMap helper for building length maps.
pub fn lengths_map(entries: &[(&str, u64)]) -> BTreeMap<String, u64> {
    entries
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect()
}
