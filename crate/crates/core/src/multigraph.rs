//! Connected loop-free multigraphs with stable string identifiers, plus the
//! subdivision machinery: the once-subdivided graph, arbitrary per-edge
//! expansions, and composition of subdivision maps.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a vertex inside a particular [`Multigraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vertex(pub usize);

/// Index of an edge inside a particular [`Multigraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeIx(pub usize);

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// An undirected edge with an ordered endpoint pair.
///
/// The endpoint order is fixed at load time (input order) and is the
/// canonical orientation used to index interior vertices of expansion paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub id: String,
    pub ends: [Vertex; 2],
}

impl Edge {
    pub fn other_end(&self, v: Vertex) -> Option<Vertex> {
        if self.ends[0] == v {
            Some(self.ends[1])
        } else if self.ends[1] == v {
            Some(self.ends[0])
        } else {
            None
        }
    }

    pub fn is_incident(&self, v: Vertex) -> bool {
        self.ends[0] == v || self.ends[1] == v
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph description is not valid JSON: {0}")]
    Parse(String),
    #[error("graph has no vertices")]
    Empty,
    #[error("duplicate vertex id {0:?}")]
    DuplicateVertex(String),
    #[error("duplicate edge id {0:?}")]
    DuplicateEdge(String),
    #[error("edge {edge:?} references unknown vertex {vertex:?}")]
    UnknownEndpoint { edge: String, vertex: String },
    #[error("graph is not connected")]
    Disconnected,
    #[error("edge {0:?} is a self-loop")]
    SelfLoop(String),
    #[error("unknown vertex id {0:?}")]
    UnknownVertex(String),
    #[error("unknown edge id {0:?}")]
    UnknownEdge(String),
}

/// Serialized graph form: `{"vertices": ["u"], "edges": [{"id":"e1","ends":["u","v"]}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphJson {
    pub vertices: Vec<String>,
    #[serde(default)]
    pub edges: Vec<EdgeJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeJson {
    pub id: String,
    pub ends: [String; 2],
}

/// A connected undirected multigraph without self-loops.
///
/// Parallel edges are allowed and distinguished by their edge ids. The
/// structure is immutable after construction; all operations hand out fresh
/// graphs.
#[derive(Debug, Clone)]
pub struct Multigraph {
    vertex_labels: Vec<String>,
    vertex_by_label: BTreeMap<String, Vertex>,
    edges: Vec<Edge>,
    edge_by_id: BTreeMap<String, EdgeIx>,
    adjacency: Vec<Vec<(Vertex, EdgeIx)>>,
}

/// Result of [`load_graph`]: the graph plus ids of any dropped self-loops.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Multigraph,
    pub dropped_self_loops: Vec<String>,
}

impl PartialEq for Multigraph {
    fn eq(&self, other: &Self) -> bool {
        self.vertex_labels == other.vertex_labels
            && self.edges.len() == other.edges.len()
            && self
                .edges
                .iter()
                .zip(&other.edges)
                .all(|(a, b)| a.id == b.id && a.ends == b.ends)
    }
}
impl Eq for Multigraph {}

impl Multigraph {
    /// Builds a graph from vertex labels and `(edge id, endpoint labels)`
    /// pairs. Self-loops are rejected; use [`load_graph`] for lenient
    /// ingestion that drops them.
    pub fn new<S: Into<String>>(
        vertices: Vec<S>,
        edges: Vec<(S, S, S)>,
    ) -> Result<Multigraph, GraphError> {
        let vertices: Vec<String> = vertices.into_iter().map(Into::into).collect();
        let edges: Vec<EdgeJson> = edges
            .into_iter()
            .map(|(id, a, b)| EdgeJson {
                id: id.into(),
                ends: [a.into(), b.into()],
            })
            .collect();
        let (g, _) = Self::build(vertices, edges, false)?;
        Ok(g)
    }

    fn build(
        vertices: Vec<String>,
        edges: Vec<EdgeJson>,
        drop_self_loops: bool,
    ) -> Result<(Multigraph, Vec<String>), GraphError> {
        if vertices.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut vertex_by_label = BTreeMap::new();
        for (i, label) in vertices.iter().enumerate() {
            if vertex_by_label.insert(label.clone(), Vertex(i)).is_some() {
                return Err(GraphError::DuplicateVertex(label.clone()));
            }
        }
        let mut dropped = Vec::new();
        let mut built = Vec::new();
        let mut edge_by_id = BTreeMap::new();
        for e in edges {
            let a = *vertex_by_label
                .get(&e.ends[0])
                .ok_or_else(|| GraphError::UnknownEndpoint {
                    edge: e.id.clone(),
                    vertex: e.ends[0].clone(),
                })?;
            let b = *vertex_by_label
                .get(&e.ends[1])
                .ok_or_else(|| GraphError::UnknownEndpoint {
                    edge: e.id.clone(),
                    vertex: e.ends[1].clone(),
                })?;
            if a == b {
                if drop_self_loops {
                    dropped.push(e.id);
                    continue;
                }
                return Err(GraphError::SelfLoop(e.id));
            }
            let ix = EdgeIx(built.len());
            if edge_by_id.insert(e.id.clone(), ix).is_some() {
                return Err(GraphError::DuplicateEdge(e.id));
            }
            built.push(Edge {
                id: e.id,
                ends: [a, b],
            });
        }
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for (i, e) in built.iter().enumerate() {
            adjacency[e.ends[0].0].push((e.ends[1], EdgeIx(i)));
            adjacency[e.ends[1].0].push((e.ends[0], EdgeIx(i)));
        }
        let g = Multigraph {
            vertex_labels: vertices,
            vertex_by_label,
            edges: built,
            edge_by_id,
            adjacency,
        };
        if !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok((g, dropped))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> {
        (0..self.vertex_labels.len()).map(Vertex)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeIx) -> &Edge {
        &self.edges[e.0]
    }

    pub fn vertex_label(&self, v: Vertex) -> &str {
        &self.vertex_labels[v.0]
    }

    pub fn vertex_by_label(&self, label: &str) -> Result<Vertex, GraphError> {
        self.vertex_by_label
            .get(label)
            .copied()
            .ok_or_else(|| GraphError::UnknownVertex(label.to_string()))
    }

    pub fn edge_by_id(&self, id: &str) -> Result<EdgeIx, GraphError> {
        self.edge_by_id
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownEdge(id.to_string()))
    }

    /// Neighbours of `v` as `(other endpoint, edge)` pairs, one entry per
    /// parallel edge.
    pub fn incident(&self, v: Vertex) -> &[(Vertex, EdgeIx)] {
        &self.adjacency[v.0]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adjacency[v.0].len()
    }

    /// Number of edges from `v` to vertices outside `set`, counted with
    /// multiplicity. `set` is an inclusion mask over vertices.
    pub fn cut_degree(&self, v: Vertex, set: &[bool]) -> usize {
        self.adjacency[v.0]
            .iter()
            .filter(|(u, _)| !set[u.0])
            .count()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertex_count()];
        let mut queue = VecDeque::new();
        seen[0] = true;
        queue.push_back(Vertex(0));
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &(u, _) in self.incident(v) {
                if !seen[u.0] {
                    seen[u.0] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == self.vertex_count()
    }

    /// Vertices in label-lexicographic order; the canonical order used when
    /// assigning chip labels.
    pub fn vertices_by_label(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.vertex_by_label.values().copied()
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            vertices: self.vertex_labels.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeJson {
                    id: e.id.clone(),
                    ends: [
                        self.vertex_labels[e.ends[0].0].clone(),
                        self.vertex_labels[e.ends[1].0].clone(),
                    ],
                })
                .collect(),
        }
    }

    /// Graphviz export; edge labels are the edge ids.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph {\n");
        for label in &self.vertex_labels {
            out.push_str(&format!("    \"{}\";\n", label));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "    \"{}\" -- \"{}\" [label=\"{}\"];\n",
                self.vertex_labels[e.ends[0].0], self.vertex_labels[e.ends[1].0], e.id
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Parses a graph description, dropping any self-loops (their ids are
/// reported back) and rejecting disconnected input.
pub fn load_graph(text: &str) -> Result<LoadedGraph, GraphError> {
    let json: GraphJson =
        serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;
    load_graph_json(json)
}

/// As [`load_graph`], from an already-parsed description.
pub fn load_graph_json(json: GraphJson) -> Result<LoadedGraph, GraphError> {
    let (graph, dropped_self_loops) = Multigraph::build(json.vertices, json.edges, true)?;
    Ok(LoadedGraph {
        graph,
        dropped_self_loops,
    })
}

/// One expanded edge of a [`SubdivisionMap`]: the derived path replacing an
/// origin edge, oriented from the origin edge's first endpoint to its second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionPath {
    /// Derived vertices along the path, endpoints included (`len + 1` entries).
    pub vertices: Vec<Vertex>,
    /// Derived edges along the path in order (`len` entries).
    pub edges: Vec<EdgeIx>,
}

impl ExpansionPath {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Interior vertices (everything strictly between the endpoints).
    pub fn interior(&self) -> &[Vertex] {
        &self.vertices[1..self.vertices.len() - 1]
    }
}

/// A subdivision relationship between two multigraphs: every origin edge
/// expands to a path in the derived graph, and the paths are disjoint except
/// at images of origin vertices.
#[derive(Debug, Clone)]
pub struct SubdivisionMap {
    origin: Multigraph,
    derived: Multigraph,
    /// Image of each origin vertex in the derived graph.
    vertex_map: Vec<Vertex>,
    /// Expansion path of each origin edge, indexed by origin `EdgeIx`.
    paths: Vec<ExpansionPath>,
}

#[derive(Debug, Error)]
pub enum SubdivisionError {
    #[error("no length given for edge {0:?}")]
    MissingLength(String),
    #[error("edge {0:?} has non-positive length")]
    NonPositiveLength(String),
    #[error("subdivision map is inconsistent: {0}")]
    Inconsistent(String),
}

impl SubdivisionMap {
    pub fn origin(&self) -> &Multigraph {
        &self.origin
    }

    pub fn derived(&self) -> &Multigraph {
        &self.derived
    }

    pub fn map_vertex(&self, v: Vertex) -> Vertex {
        self.vertex_map[v.0]
    }

    pub fn path(&self, e: EdgeIx) -> &ExpansionPath {
        &self.paths[e.0]
    }

    pub fn paths(&self) -> &[ExpansionPath] {
        &self.paths
    }

    /// The identity map: derived graph equals the origin, every path a single
    /// edge.
    pub fn identity(g: &Multigraph) -> SubdivisionMap {
        let paths = g
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| ExpansionPath {
                vertices: vec![e.ends[0], e.ends[1]],
                edges: vec![EdgeIx(i)],
            })
            .collect();
        SubdivisionMap {
            origin: g.clone(),
            derived: g.clone(),
            vertex_map: g.vertices().collect(),
            paths,
        }
    }

    /// For each derived vertex, the origin vertex it is the image of, if any.
    pub fn origin_vertex_of(&self) -> Vec<Option<Vertex>> {
        let mut back = vec![None; self.derived.vertex_count()];
        for v in self.origin.vertices() {
            back[self.vertex_map[v.0].0] = Some(v);
        }
        back
    }

    /// For each derived edge, the origin edge whose expansion path carries it.
    pub fn carrier_of(&self) -> Vec<EdgeIx> {
        let mut carrier = vec![EdgeIx(usize::MAX); self.derived.edge_count()];
        for (i, p) in self.paths.iter().enumerate() {
            for &e in &p.edges {
                carrier[e.0] = EdgeIx(i);
            }
        }
        carrier
    }

    /// Checks the structural invariants: every derived edge lies on exactly
    /// one path, interior vertices have degree 2, and contracting the paths
    /// recovers the origin's edge multiset.
    pub fn validate(&self) -> Result<(), SubdivisionError> {
        if self.vertex_map.len() != self.origin.vertex_count() {
            return Err(SubdivisionError::Inconsistent(
                "vertex map size mismatch".into(),
            ));
        }
        if self.paths.len() != self.origin.edge_count() {
            return Err(SubdivisionError::Inconsistent("path count mismatch".into()));
        }
        let mut edge_seen = vec![false; self.derived.edge_count()];
        let mut is_image = vec![false; self.derived.vertex_count()];
        for &v in &self.vertex_map {
            is_image[v.0] = true;
        }
        for (i, p) in self.paths.iter().enumerate() {
            let e = &self.origin.edges[i];
            if p.vertices.len() != p.edges.len() + 1 || p.edges.is_empty() {
                return Err(SubdivisionError::Inconsistent(format!(
                    "path for {:?} malformed",
                    e.id
                )));
            }
            if p.vertices[0] != self.vertex_map[e.ends[0].0]
                || *p.vertices.last().unwrap() != self.vertex_map[e.ends[1].0]
            {
                return Err(SubdivisionError::Inconsistent(format!(
                    "path for {:?} does not join the mapped endpoints",
                    e.id
                )));
            }
            for (k, &de) in p.edges.iter().enumerate() {
                if edge_seen[de.0] {
                    return Err(SubdivisionError::Inconsistent(format!(
                        "derived edge {:?} on two paths",
                        self.derived.edges[de.0].id
                    )));
                }
                edge_seen[de.0] = true;
                let ends: BTreeSet<Vertex> =
                    self.derived.edges[de.0].ends.iter().copied().collect();
                let expect: BTreeSet<Vertex> =
                    [p.vertices[k], p.vertices[k + 1]].into_iter().collect();
                if ends != expect {
                    return Err(SubdivisionError::Inconsistent(format!(
                        "path for {:?} disagrees with derived edge {:?}",
                        e.id, self.derived.edges[de.0].id
                    )));
                }
            }
            for &x in p.interior() {
                if is_image[x.0] {
                    return Err(SubdivisionError::Inconsistent(format!(
                        "interior vertex {:?} is the image of an origin vertex",
                        self.derived.vertex_label(x)
                    )));
                }
                if self.derived.degree(x) != 2 {
                    return Err(SubdivisionError::Inconsistent(format!(
                        "interior vertex {:?} has degree {}",
                        self.derived.vertex_label(x),
                        self.derived.degree(x)
                    )));
                }
            }
        }
        if !edge_seen.iter().all(|&b| b) {
            return Err(SubdivisionError::Inconsistent(
                "some derived edge lies on no path".into(),
            ));
        }
        Ok(())
    }

    /// Composes `self: X -> Y` with `next: Y -> Z` into `X -> Z`.
    pub fn compose(&self, next: &SubdivisionMap) -> Result<SubdivisionMap, SubdivisionError> {
        if self.derived != next.origin {
            return Err(SubdivisionError::Inconsistent(
                "composition mismatch: derived graph differs from next origin".into(),
            ));
        }
        let vertex_map: Vec<Vertex> = self
            .vertex_map
            .iter()
            .map(|&v| next.vertex_map[v.0])
            .collect();
        let mut paths = Vec::with_capacity(self.paths.len());
        for p in &self.paths {
            let mut vertices = vec![next.vertex_map[p.vertices[0].0]];
            let mut edges = Vec::new();
            for (k, &mid_edge) in p.edges.iter().enumerate() {
                let sub = next.path(mid_edge);
                let forward =
                    next.origin.edges[mid_edge.0].ends[0] == p.vertices[k];
                if forward {
                    edges.extend(sub.edges.iter().copied());
                    vertices.extend(sub.vertices[1..].iter().copied());
                } else {
                    edges.extend(sub.edges.iter().rev().copied());
                    vertices.extend(sub.vertices[..sub.vertices.len() - 1].iter().rev().copied());
                }
            }
            paths.push(ExpansionPath { vertices, edges });
        }
        Ok(SubdivisionMap {
            origin: self.origin.clone(),
            derived: next.derived.clone(),
            vertex_map,
            paths,
        })
    }

    /// Rebuilds this map with each expansion path re-cut at the given derived
    /// vertex positions. `cuts[e]` gives, per origin edge, the new path
    /// boundaries; used when re-choosing which derived vertices play the role
    /// of origin vertices is not needed, so only available internally.
    pub(crate) fn with_paths(
        origin: Multigraph,
        derived: Multigraph,
        vertex_map: Vec<Vertex>,
        paths: Vec<ExpansionPath>,
    ) -> SubdivisionMap {
        SubdivisionMap {
            origin,
            derived,
            vertex_map,
            paths,
        }
    }
}

/// Subdivides every edge once: the derived graph gains one private midpoint
/// per edge, so it has `|V| + |E|` vertices and `2|E|` edges and is always
/// simple.
pub fn build_g1(g: &Multigraph) -> SubdivisionMap {
    let all_twos: BTreeMap<String, u64> = g.edges.iter().map(|e| (e.id.clone(), 2)).collect();
    expand_by_lengths(&SubdivisionMap::identity(g), &all_twos)
        .expect("uniform expansion of a valid graph cannot fail")
}

/// Expands every derived edge of `map` into a path with `lengths[id]` edges.
///
/// Interior vertices of an edge `e` with length `l` are named `e.1 ..
/// e.(l-1)`, indexed from the edge's first endpoint; the path segments are
/// named `e:1 .. e:l`. The result composes `map` with the expansion, so its
/// origin is `map`'s origin.
pub fn expand_by_lengths(
    map: &SubdivisionMap,
    lengths: &BTreeMap<String, u64>,
) -> Result<SubdivisionMap, SubdivisionError> {
    let base = map.derived();
    for e in base.edges() {
        match lengths.get(&e.id) {
            None => return Err(SubdivisionError::MissingLength(e.id.clone())),
            Some(0) => return Err(SubdivisionError::NonPositiveLength(e.id.clone())),
            Some(_) => {}
        }
    }
    let mut vertices: Vec<String> = (0..base.vertex_count())
        .map(|i| base.vertex_label(Vertex(i)).to_string())
        .collect();
    let mut edges: Vec<EdgeJson> = Vec::new();
    let mut paths: Vec<(Vec<String>, Vec<String>)> = Vec::new();
    for e in base.edges() {
        let l = lengths[&e.id];
        let first = base.vertex_label(e.ends[0]).to_string();
        let last = base.vertex_label(e.ends[1]).to_string();
        let mut path_vertices = vec![first];
        for i in 1..l {
            let label = format!("{}.{}", e.id, i);
            vertices.push(label.clone());
            path_vertices.push(label);
        }
        path_vertices.push(last);
        let mut path_edges = Vec::new();
        for j in 0..l as usize {
            let id = if l == 1 {
                e.id.clone()
            } else {
                format!("{}:{}", e.id, j + 1)
            };
            edges.push(EdgeJson {
                id: id.clone(),
                ends: [path_vertices[j].clone(), path_vertices[j + 1].clone()],
            });
            path_edges.push(id);
        }
        paths.push((path_vertices, path_edges));
    }
    let (derived, _) = Multigraph::build(vertices, edges, false)
        .map_err(|e| SubdivisionError::Inconsistent(e.to_string()))?;
    let vertex_map = (0..base.vertex_count()).map(Vertex).collect();
    let expansion_paths = paths
        .into_iter()
        .map(|(vs, es)| ExpansionPath {
            vertices: vs
                .iter()
                .map(|l| derived.vertex_by_label(l).unwrap())
                .collect(),
            edges: es.iter().map(|id| derived.edge_by_id(id).unwrap()).collect(),
        })
        .collect();
    let step = SubdivisionMap {
        origin: base.clone(),
        derived,
        vertex_map,
        paths: expansion_paths,
    };
    map.compose(&step)
}
