//! The integer program attached to a partial certificate: variables are one
//! edge length `l[e]` per base edge and one firing gap `t[w,i]` per pair of
//! each target's sequence. Construction, assignment checking (the verifier
//! path), a small complete feasibility solver (the generator path), and the
//! explicit solution-magnitude bound.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificate::{validate, PartialCertificate};
use crate::multigraph::{EdgeIx, Multigraph, Vertex};

#[derive(Debug, Error)]
pub enum IlpError {
    #[error("instance is not valid JSON: {0}")]
    Parse(String),
    #[error("certificate has {0} violations; build requires a validated certificate")]
    CertificateInvalid(usize),
    #[error("assignment is missing variable {0:?}")]
    MissingVariable(String),
    #[error("assignment value for {0:?} must be a positive integer")]
    NonPositiveValue(String),
    #[error("unknown constraint relation {0:?}")]
    UnknownRelation(String),
    #[error("unknown rule tag {0:?}")]
    UnknownRule(String),
}

/// Which construction rule emitted a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleTag {
    EdgeLength,
    FiringGap,
    ImmediateArrival,
    ConsecutiveDeparture,
    ArrivalStep,
    TransitUpper,
    TransitLower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

/// A linear constraint `sum(coeffs) REL rhs` with integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Constraint {
    pub rule: RuleTag,
    pub coeffs: BTreeMap<String, i64>,
    pub rel: Relation,
    pub rhs: i64,
}

impl Constraint {
    fn single(rule: RuleTag, var: &str, rel: Relation, rhs: i64) -> Constraint {
        Constraint {
            rule,
            coeffs: [(var.to_string(), 1)].into(),
            rel,
            rhs,
        }
    }
}

/// An integer program over named positive integer variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IlpInstance {
    pub variables: BTreeSet<String>,
    pub constraints: Vec<Constraint>,
}

impl IlpInstance {
    pub fn parse(text: &str) -> Result<IlpInstance, IlpError> {
        serde_json::from_str(text).map_err(|e| IlpError::Parse(e.to_string()))
    }

    /// Constraints sorted into a canonical order, for comparisons that must
    /// not depend on emission order.
    pub fn canonical_constraints(&self) -> Vec<Constraint> {
        let mut sorted = self.constraints.clone();
        sorted.sort();
        sorted
    }
}

/// A total assignment of positive integers to instance variables.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IlpAssignment {
    pub values: BTreeMap<String, u64>,
}

impl IlpAssignment {
    pub fn parse(text: &str) -> Result<IlpAssignment, IlpError> {
        let values: BTreeMap<String, u64> =
            serde_json::from_str(text).map_err(|e| IlpError::Parse(e.to_string()))?;
        for (name, &v) in &values {
            if v == 0 {
                return Err(IlpError::NonPositiveValue(name.clone()));
            }
        }
        Ok(IlpAssignment { values })
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        self.values.get(name).copied()
    }
}

pub fn length_var(edge_id: &str) -> String {
    format!("l[{}]", edge_id)
}

pub fn gap_var(target: &str, index: usize) -> String {
    format!("t[{},{}]", target, index)
}

/// A departure/arrival window of one (target, edge) pair: `i0..=i1` are the
/// pair indices with departures, `i2..=i3` those with arrivals (all
/// 1-based). `p` chips leave and `q` arrive within the window, with `p >= q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeTransit {
    pub i0: usize,
    pub i1: usize,
    pub i2: usize,
    pub i3: usize,
}

impl EdgeTransit {
    pub fn p(&self) -> u64 {
        (self.i1 - self.i0 + 1) as u64
    }

    pub fn q(&self) -> u64 {
        (self.i3 - self.i2 + 1) as u64
    }
}

/// Departure-and-arrival windows per edge for one target, plus the edges
/// that have departures but no arrivals (chips left in transit).
pub(crate) struct TargetTraffic {
    pub windows: BTreeMap<EdgeIx, EdgeTransit>,
    pub departures_only: BTreeMap<EdgeIx, (usize, usize)>,
}

pub(crate) fn target_traffic(cert: &PartialCertificate, target: Vertex) -> TargetTraffic {
    let mut deps: BTreeMap<EdgeIx, Vec<usize>> = BTreeMap::new();
    let mut arrs: BTreeMap<EdgeIx, Vec<usize>> = BTreeMap::new();
    for (i, pair) in cert.pairs_for(target).iter().enumerate() {
        for t in &pair.moves {
            if t.is_departure() {
                deps.entry(t.edge).or_default().push(i + 1);
            } else {
                arrs.entry(t.edge).or_default().push(i + 1);
            }
        }
    }
    let mut windows = BTreeMap::new();
    let mut departures_only = BTreeMap::new();
    for (edge, d) in deps {
        let (i0, i1) = (*d.iter().min().unwrap(), *d.iter().max().unwrap());
        match arrs.get(&edge) {
            Some(a) => {
                let (i2, i3) = (*a.iter().min().unwrap(), *a.iter().max().unwrap());
                windows.insert(edge, EdgeTransit { i0, i1, i2, i3 });
            }
            None => {
                departures_only.insert(edge, (i0, i1));
            }
        }
    }
    TargetTraffic {
        windows,
        departures_only,
    }
}

/// Builds the integer program of a validated certificate. Refuses
/// certificates with outstanding violations.
pub fn build_ilp(g1: &Multigraph, cert: &PartialCertificate) -> Result<IlpInstance, IlpError> {
    let violations = validate(g1, cert);
    if !violations.is_empty() {
        return Err(IlpError::CertificateInvalid(violations.len()));
    }
    let mut variables = BTreeSet::new();
    let mut constraints = Vec::new();

    // Every edge has length at least one.
    for e in g1.edges() {
        let var = length_var(&e.id);
        variables.insert(var.clone());
        constraints.push(Constraint::single(RuleTag::EdgeLength, &var, Relation::Ge, 1));
    }

    // Every firing gap is at least one.
    for w in g1.vertices() {
        let label = g1.vertex_label(w);
        for i in 1..=cert.pairs_for(w).len() {
            let var = gap_var(label, i);
            variables.insert(var.clone());
            constraints.push(Constraint::single(RuleTag::FiringGap, &var, Relation::Ge, 1));
        }
    }

    // A chip departing and arriving in the same pair forces length one.
    let mut immediate: BTreeSet<EdgeIx> = BTreeSet::new();
    for w in g1.vertices() {
        for pair in cert.pairs_for(w) {
            for d in pair.moves.iter().filter(|t| t.is_departure()) {
                let arrived = pair
                    .moves
                    .iter()
                    .any(|a| a.is_arrival() && a.chip == d.chip && a.edge == d.edge);
                if arrived {
                    immediate.insert(d.edge);
                }
            }
        }
    }
    for e in immediate {
        constraints.push(Constraint::single(
            RuleTag::ImmediateArrival,
            &length_var(&g1.edge(e).id),
            Relation::Eq,
            1,
        ));
    }

    // Consecutive departures along one edge pin the gap to one.
    for w in g1.vertices() {
        let label = g1.vertex_label(w);
        let pairs = cert.pairs_for(w);
        let mut pinned: BTreeSet<usize> = BTreeSet::new();
        for i in 0..pairs.len().saturating_sub(1) {
            let consecutive = pairs[i].moves.iter().any(|t| {
                t.is_departure()
                    && pairs[i + 1]
                        .moves
                        .iter()
                        .any(|u| u.is_departure() && u.vertex == t.vertex && u.edge == t.edge)
            });
            if consecutive {
                pinned.insert(i + 1);
            }
        }
        for i in pinned {
            constraints.push(Constraint::single(
                RuleTag::ConsecutiveDeparture,
                &gap_var(label, i),
                Relation::Eq,
                1,
            ));
        }
    }

    // Any arrival pins the gap of its pair to one.
    for w in g1.vertices() {
        let label = g1.vertex_label(w);
        for (i, pair) in cert.pairs_for(w).iter().enumerate() {
            if pair.moves.iter().any(|t| t.is_arrival()) {
                constraints.push(Constraint::single(
                    RuleTag::ArrivalStep,
                    &gap_var(label, i + 1),
                    Relation::Eq,
                    1,
                ));
            }
        }
    }

    // Transit inequalities per (target, edge) with both departures and
    // arrivals. Edges missing either side contribute none.
    for w in g1.vertices() {
        let label = g1.vertex_label(w);
        let traffic = target_traffic(cert, w);
        for (edge, tr) in traffic.windows {
            let lvar = length_var(&g1.edge(edge).id);
            let p = tr.p() as i64;
            let q = tr.q() as i64;
            let mut upper: BTreeMap<String, i64> = [(lvar.clone(), p)].into();
            let mut lower: BTreeMap<String, i64> = [(lvar.clone(), q)].into();
            for i in tr.i0..=tr.i3 {
                upper.insert(gap_var(label, i), -1);
                lower.insert(gap_var(label, i), -1);
            }
            constraints.push(Constraint {
                rule: RuleTag::TransitUpper,
                coeffs: upper,
                rel: Relation::Ge,
                rhs: p - q,
            });
            constraints.push(Constraint {
                rule: RuleTag::TransitLower,
                coeffs: lower,
                rel: Relation::Le,
                rhs: q - p,
            });
        }
    }

    Ok(IlpInstance {
        variables,
        constraints,
    })
}

fn eval(coeffs: &BTreeMap<String, i64>, a: &IlpAssignment) -> Result<i128, IlpError> {
    let mut total: i128 = 0;
    for (name, &c) in coeffs {
        let v = a
            .get(name)
            .ok_or_else(|| IlpError::MissingVariable(name.clone()))?;
        total += c as i128 * v as i128;
    }
    Ok(total)
}

/// The verifier path: substitute and evaluate, no solving.
pub fn check_assignment(inst: &IlpInstance, a: &IlpAssignment) -> Result<bool, IlpError> {
    for name in &inst.variables {
        if a.get(name).is_none() {
            return Err(IlpError::MissingVariable(name.clone()));
        }
    }
    for c in &inst.constraints {
        let lhs = eval(&c.coeffs, a)?;
        let ok = match c.rel {
            Relation::Ge => lhs >= c.rhs as i128,
            Relation::Le => lhs <= c.rhs as i128,
            Relation::Eq => lhs == c.rhs as i128,
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

#[derive(Clone)]
struct Domains {
    names: Vec<String>,
    lo: Vec<i128>,
    hi: Vec<i128>,
}

/// Tightens every variable bound against every constraint until a fixpoint;
/// returns false on an emptied domain. Only removes values that cannot occur
/// in any solution within the current boxes.
fn propagate(
    doms: &mut Domains,
    constraints: &[(RuleTag, Vec<(usize, i64)>, Relation, i64)],
) -> bool {
    loop {
        let mut changed = false;
        for (_, coeffs, rel, rhs) in constraints {
            let (want_ge, want_le) = match rel {
                Relation::Ge => (true, false),
                Relation::Le => (false, true),
                Relation::Eq => (true, true),
            };
            for &(v, c) in coeffs {
                let c = c as i128;
                let mut max_other: i128 = 0;
                let mut min_other: i128 = 0;
                for &(u, cu) in coeffs {
                    if u == v {
                        continue;
                    }
                    let cu = cu as i128;
                    if cu > 0 {
                        max_other += cu * doms.hi[u];
                        min_other += cu * doms.lo[u];
                    } else {
                        max_other += cu * doms.lo[u];
                        min_other += cu * doms.hi[u];
                    }
                }
                if want_ge {
                    // c*x >= rhs - max_other
                    let bound = *rhs as i128 - max_other;
                    if c > 0 {
                        let lo = ceil_div(bound, c);
                        if lo > doms.lo[v] {
                            doms.lo[v] = lo;
                            changed = true;
                        }
                    } else {
                        let hi = floor_div(bound, c);
                        if hi < doms.hi[v] {
                            doms.hi[v] = hi;
                            changed = true;
                        }
                    }
                }
                if want_le {
                    // c*x <= rhs - min_other
                    let bound = *rhs as i128 - min_other;
                    if c > 0 {
                        let hi = floor_div(bound, c);
                        if hi < doms.hi[v] {
                            doms.hi[v] = hi;
                            changed = true;
                        }
                    } else {
                        let lo = ceil_div(bound, c);
                        if lo > doms.lo[v] {
                            doms.lo[v] = lo;
                            changed = true;
                        }
                    }
                }
                if doms.lo[v] > doms.hi[v] {
                    return false;
                }
            }
        }
        if !changed {
            return true;
        }
    }
}

/// Complete feasibility search over `[1, cap]` domains: interval propagation
/// plus depth-first branching in variable-name order, trying small values
/// first, so the first solution found is the lexicographically least. Never
/// misses a solution whose values all lie within the cap.
pub fn solve(inst: &IlpInstance, cap: u64) -> Option<IlpAssignment> {
    let names: Vec<String> = inst.variables.iter().cloned().collect();
    let index: BTreeMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let constraints: Vec<(RuleTag, Vec<(usize, i64)>, Relation, i64)> = inst
        .constraints
        .iter()
        .map(|c| {
            let coeffs = c
                .coeffs
                .iter()
                .map(|(n, &v)| (*index.get(n.as_str()).expect("constraint names a variable"), v))
                .collect();
            (c.rule, coeffs, c.rel, c.rhs)
        })
        .collect();
    let mut doms = Domains {
        names,
        lo: vec![1; inst.variables.len()],
        hi: vec![cap as i128; inst.variables.len()],
    };
    if !propagate(&mut doms, &constraints) {
        return None;
    }
    dfs(&doms, &constraints).map(|doms| IlpAssignment {
        values: doms
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), doms.lo[i] as u64))
            .collect(),
    })
}

fn dfs(
    doms: &Domains,
    constraints: &[(RuleTag, Vec<(usize, i64)>, Relation, i64)],
) -> Option<Domains> {
    let branch = (0..doms.lo.len()).find(|&v| doms.lo[v] < doms.hi[v]);
    let v = match branch {
        None => return Some(doms.clone()),
        Some(v) => v,
    };
    let (lo, hi) = (doms.lo[v], doms.hi[v]);
    for value in lo..=hi {
        let mut next = doms.clone();
        next.lo[v] = value;
        next.hi[v] = value;
        if propagate(&mut next, constraints) {
            if let Some(solution) = dfs(&next, constraints) {
                return Some(solution);
            }
        }
    }
    None
}

/// The explicit magnitude bound `n * (m * a)^(2m + 1)` for the instance in
/// equation form: every inequality gains one slack variable, `n` counts
/// variables after slacks, `m` counts equations, and `a` is the largest
/// absolute coefficient or right-hand side (at least 1).
pub fn magnitude_bound(inst: &IlpInstance) -> BigUint {
    let slacks = inst
        .constraints
        .iter()
        .filter(|c| c.rel != Relation::Eq)
        .count() as u64;
    let n = inst.variables.len() as u64 + slacks;
    let m = inst.constraints.len() as u64;
    let mut a: u64 = 1;
    for c in &inst.constraints {
        a = a.max(c.rhs.unsigned_abs());
        for &coeff in c.coeffs.values() {
            a = a.max(coeff.unsigned_abs());
        }
        if c.rel != Relation::Eq {
            a = a.max(1); // slack coefficient
        }
    }
    BigUint::from(n) * BigUint::from(m * a).pow(2 * m as u32 + 1)
}
