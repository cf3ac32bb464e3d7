//! Flag-based graphs and marked abstract tropical curves.
//!
//! A graph is a set of vertices and a set of flags (half-edges). Each flag sits
//! at a vertex and is either paired with a partner flag (a bounded edge) or
//! unpaired (an unbounded end). Marked points are unbounded ends.

use std::collections::VecDeque;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{format_rational, parse_rational, Rational};

pub type FlagId = usize;
pub type VertexId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("flag {flag} refers to vertex {vertex} but the graph has {count} vertices")]
    BadVertex { flag: FlagId, vertex: VertexId, count: usize },
    #[error("partner relation is not an involution at flag {0}")]
    BadPartner(FlagId),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("graph has genus {0}, expected a tree")]
    NotATree(usize),
    #[error("vertex {vertex} has valence {valence} < 3")]
    LowValence { vertex: VertexId, valence: usize },
    #[error("mark {0} is not an unbounded end")]
    MarkNotEnd(FlagId),
    #[error("flag {0} is marked twice")]
    DuplicateMark(FlagId),
    #[error("expected {expected} edge lengths, got {got}")]
    LengthCount { expected: usize, got: usize },
    #[error("bounded edge {0} has non-positive length")]
    NonPositiveLength(usize),
    #[error("moduli space of {0}-marked curves is empty")]
    EmptyModuli(usize),
    #[error("bad curve data: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flag {
    pub vertex: VertexId,
    pub partner: Option<FlagId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Bounded(FlagId, FlagId),
    Unbounded(FlagId),
}

/// A finite graph given by vertices and flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    flags: Vec<Flag>,
    flags_at: Vec<Vec<FlagId>>,
    // bounded edges as (lower flag, higher flag), ordered by lower flag id
    bounded: Vec<(FlagId, FlagId)>,
    bounded_of_flag: Vec<Option<usize>>,
}

impl Graph {
    pub fn new(vertex_count: usize, flags: Vec<Flag>) -> Result<Self, GraphError> {
        let mut flags_at = vec![Vec::new(); vertex_count];
        for (id, f) in flags.iter().enumerate() {
            if f.vertex >= vertex_count {
                return Err(GraphError::BadVertex { flag: id, vertex: f.vertex, count: vertex_count });
            }
            if let Some(p) = f.partner {
                if p == id || p >= flags.len() || flags[p].partner != Some(id) {
                    return Err(GraphError::BadPartner(id));
                }
            }
            flags_at[f.vertex].push(id);
        }
        let mut bounded = Vec::new();
        let mut bounded_of_flag = vec![None; flags.len()];
        for (id, f) in flags.iter().enumerate() {
            if let Some(p) = f.partner {
                if id < p {
                    bounded_of_flag[id] = Some(bounded.len());
                    bounded_of_flag[p] = Some(bounded.len());
                    bounded.push((id, p));
                }
            }
        }
        Ok(Graph { vertex_count, flags, flags_at, bounded, bounded_of_flag })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Contracts bounded edge `e`, merging its two vertices. Returns the new
    /// graph and the new id of every old flag (`None` for the two removed ones).
    /// Relative order of the surviving flags and vertices is kept.
    pub fn contract(&self, e: usize) -> (Graph, Vec<Option<FlagId>>) {
        let (a, b) = self.bounded[e];
        let (keep, gone) = {
            let (u, w) = (self.flags[a].vertex, self.flags[b].vertex);
            (u.min(w), u.max(w))
        };
        let new_vertex = |v: VertexId| {
            let v = if v == gone { keep } else { v };
            if v > gone {
                v - 1
            } else {
                v
            }
        };
        let mut map = vec![None; self.flags.len()];
        let mut next = 0;
        for (id, m) in map.iter_mut().enumerate() {
            if id != a && id != b {
                *m = Some(next);
                next += 1;
            }
        }
        let flags = self
            .flags
            .iter()
            .enumerate()
            .filter(|&(id, _)| id != a && id != b)
            .map(|(_, f)| Flag {
                vertex: new_vertex(f.vertex),
                partner: f.partner.map(|p| map[p].expect("partner survives")),
            })
            .collect();
        let g = Graph::new(self.vertex_count - 1, flags).expect("contraction keeps the involution");
        (g, map)
    }

    pub fn flags(&self) -> &[Flag] {
        &self.flags
    }

    pub fn flag(&self, f: FlagId) -> Flag {
        self.flags[f]
    }

    pub fn vertex_of(&self, f: FlagId) -> VertexId {
        self.flags[f].vertex
    }

    pub fn partner(&self, f: FlagId) -> Option<FlagId> {
        self.flags[f].partner
    }

    pub fn flags_at(&self, v: VertexId) -> &[FlagId] {
        &self.flags_at[v]
    }

    pub fn valence(&self, v: VertexId) -> usize {
        self.flags_at[v].len()
    }

    /// Bounded edges in their canonical order, as flag pairs.
    pub fn bounded_edges(&self) -> &[(FlagId, FlagId)] {
        &self.bounded
    }

    pub fn bounded_edge_count(&self) -> usize {
        self.bounded.len()
    }

    /// Index of the bounded edge containing `f`, or `None` for an end.
    pub fn bounded_index(&self, f: FlagId) -> Option<usize> {
        self.bounded_of_flag[f]
    }

    pub fn ends(&self) -> Vec<FlagId> {
        (0..self.flags.len()).filter(|&f| self.flags[f].partner.is_none()).collect()
    }

    pub fn edges(&self) -> Vec<Edge> {
        (0..self.flags.len())
            .filter_map(|f| match self.flags[f].partner {
                None => Some(Edge::Unbounded(f)),
                Some(p) if f < p => Some(Edge::Bounded(f, p)),
                Some(_) => None,
            })
            .collect()
    }

    /// Vertex on the other side of a bounded flag.
    pub fn across(&self, f: FlagId) -> Option<VertexId> {
        self.flags[f].partner.map(|p| self.flags[p].vertex)
    }

    pub fn is_connected(&self) -> bool {
        if self.vertex_count == 0 {
            return true;
        }
        let mut seen = vec![false; self.vertex_count];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &f in &self.flags_at[v] {
                if let Some(w) = self.across(f) {
                    if !seen[w] {
                        seen[w] = true;
                        count += 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        count == self.vertex_count
    }

    /// First Betti number.
    pub fn genus(&self) -> Result<usize, GraphError> {
        if !self.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(self.bounded.len() + 1 - self.vertex_count)
    }

    /// Flags along the unique path from `from` to `to`, each flag taken at the
    /// vertex nearer to `from`. Requires a tree.
    pub fn path(&self, from: VertexId, to: VertexId) -> Vec<FlagId> {
        let mut via: Vec<Option<FlagId>> = vec![None; self.vertex_count];
        let mut seen = vec![false; self.vertex_count];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            if v == to {
                break;
            }
            for &f in &self.flags_at[v] {
                if let Some(w) = self.across(f) {
                    if !seen[w] {
                        seen[w] = true;
                        via[w] = Some(f);
                        queue.push_back(w);
                    }
                }
            }
        }
        let mut out = Vec::new();
        let mut v = to;
        while let Some(f) = via[v] {
            out.push(f);
            v = self.flags[f].vertex;
        }
        out.reverse();
        out
    }

    /// Vertices reachable from `start` without crossing `blocked` flags' edges.
    pub fn side(&self, start: VertexId, blocked: &[FlagId]) -> Vec<bool> {
        let mut seen = vec![false; self.vertex_count];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &f in &self.flags_at[v] {
                let Some(p) = self.flags[f].partner else { continue };
                if blocked.contains(&f) || blocked.contains(&p) {
                    continue;
                }
                let w = self.flags[p].vertex;
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }
}

/// A genus-0 marked graph with all valences at least 3; lengths are not part of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractType {
    graph: Graph,
    marks: Vec<FlagId>,
}

impl AbstractType {
    pub fn new(graph: Graph, marks: Vec<FlagId>) -> Result<Self, GraphError> {
        let g = graph.genus()?;
        if g != 0 {
            return Err(GraphError::NotATree(g));
        }
        for v in 0..graph.vertex_count() {
            let valence = graph.valence(v);
            if valence < 3 {
                return Err(GraphError::LowValence { vertex: v, valence });
            }
        }
        for (i, &m) in marks.iter().enumerate() {
            if m >= graph.flags().len() || graph.partner(m).is_some() {
                return Err(GraphError::MarkNotEnd(m));
            }
            if marks[..i].contains(&m) {
                return Err(GraphError::DuplicateMark(m));
            }
        }
        Ok(AbstractType { graph, marks })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Marked ends in order x_1, ..., x_n.
    pub fn marks(&self) -> &[FlagId] {
        &self.marks
    }

    pub fn mark_index(&self, f: FlagId) -> Option<usize> {
        self.marks.iter().position(|&m| m == f)
    }

    pub fn is_marked(&self, f: FlagId) -> bool {
        self.marks.contains(&f)
    }

    pub fn unmarked_ends(&self) -> Vec<FlagId> {
        self.graph.ends().into_iter().filter(|f| !self.is_marked(*f)).collect()
    }

    /// Sum over vertices of (valence - 3).
    pub fn codim(&self) -> usize {
        (0..self.graph.vertex_count()).map(|v| self.graph.valence(v) - 3).sum()
    }

    pub fn is_trivalent(&self) -> bool {
        self.codim() == 0
    }

    /// Dimension of this type's cell in the space of curves whose ends are all marked.
    pub fn cell_dimension(&self) -> Result<usize, GraphError> {
        abstract_cell_dimension(self.graph.ends().len(), self.codim())
    }

    pub fn canonical_form<K: Ord + Clone>(&self, end_class: impl Fn(FlagId) -> K) -> CanonicalForm<K> {
        canonical_form(self, end_class)
    }
}

/// `n - 3 - codim`, the dimension of a cell of the moduli space of n-marked curves.
pub fn abstract_cell_dimension(n: usize, codim: usize) -> Result<usize, GraphError> {
    if n < 3 {
        return Err(GraphError::EmptyModuli(n));
    }
    (n - 3)
        .checked_sub(codim)
        .ok_or_else(|| GraphError::Format(format!("codimension {codim} exceeds n - 3 = {}", n - 3)))
}

/// An abstract tropical curve: a type together with positive bounded-edge lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedAbstractCurve {
    ty: AbstractType,
    lengths: Vec<Rational>,
}

impl MarkedAbstractCurve {
    pub fn new(ty: AbstractType, lengths: Vec<Rational>) -> Result<Self, GraphError> {
        check_lengths(ty.graph(), &lengths, false)?;
        Ok(MarkedAbstractCurve { ty, lengths })
    }

    pub fn abstract_type(&self) -> &AbstractType {
        &self.ty
    }

    pub fn lengths(&self) -> &[Rational] {
        &self.lengths
    }
}

pub(crate) fn check_lengths(g: &Graph, lengths: &[Rational], allow_zero: bool) -> Result<(), GraphError> {
    if lengths.len() != g.bounded_edge_count() {
        return Err(GraphError::LengthCount { expected: g.bounded_edge_count(), got: lengths.len() });
    }
    for (i, l) in lengths.iter().enumerate() {
        if l.is_negative() || (!allow_zero && l.is_zero()) {
            return Err(GraphError::NonPositiveLength(i));
        }
    }
    Ok(())
}

/// Token of a canonical tree encoding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Token<K> {
    Open,
    Close,
    Mark(usize),
    End(K),
}

/// Relabeling-invariant encoding of a marked tree; equal iff isomorphic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalForm<K>(pub Vec<Token<K>>);

/// Canonical encoding of a marked tree in which unmarked ends with equal
/// `end_class` are interchangeable.
///
/// The tree is rooted at the lowest marked end when there is one; otherwise
/// the lexicographically smallest encoding over all end roots is taken.
pub fn canonical_form<K: Ord + Clone>(ty: &AbstractType, end_class: impl Fn(FlagId) -> K) -> CanonicalForm<K> {
    let g = ty.graph();
    let leaf = |f: FlagId| match ty.mark_index(f) {
        Some(i) => Token::Mark(i),
        None => Token::End(end_class(f)),
    };
    let roots: Vec<FlagId> = match ty.marks().first() {
        Some(&m) => vec![m],
        None => g.ends(),
    };
    roots
        .into_iter()
        .map(|r| {
            let mut out = vec![leaf(r)];
            out.extend(encode_below(g, g.vertex_of(r), r, &leaf));
            out
        })
        .min()
        .map(CanonicalForm)
        .unwrap_or(CanonicalForm(Vec::new()))
}

fn encode_below<K: Ord + Clone>(
    g: &Graph,
    v: VertexId,
    incoming: FlagId,
    leaf: &impl Fn(FlagId) -> Token<K>,
) -> Vec<Token<K>> {
    let mut children: Vec<Vec<Token<K>>> = g
        .flags_at(v)
        .iter()
        .filter(|&&f| f != incoming)
        .map(|&f| match g.partner(f) {
            None => vec![leaf(f)],
            Some(p) => encode_below(g, g.vertex_of(p), p, leaf),
        })
        .collect();
    children.sort();
    let mut out = vec![Token::Open];
    for c in children {
        out.extend(c);
    }
    out.push(Token::Close);
    out
}

/// Wire form of a marked abstract curve (`curve.graph`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub vertices: Vec<usize>,
    pub flags: Vec<FlagJson>,
    #[serde(default)]
    pub marks: Vec<FlagId>,
    #[serde(default)]
    pub lengths: Vec<EdgeLengthJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagJson {
    pub id: FlagId,
    pub vertex: usize,
    pub partner: Option<FlagId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeLengthJson {
    pub edge: [FlagId; 2],
    pub length: String,
}

impl GraphJson {
    pub fn from_parts(g: &Graph, marks: &[FlagId], lengths: &[Rational]) -> Self {
        GraphJson {
            vertices: (0..g.vertex_count()).collect(),
            flags: g
                .flags()
                .iter()
                .enumerate()
                .map(|(id, f)| FlagJson { id, vertex: f.vertex, partner: f.partner })
                .collect(),
            marks: marks.to_vec(),
            lengths: g
                .bounded_edges()
                .iter()
                .zip(lengths)
                .map(|(&(a, b), l)| EdgeLengthJson { edge: [a, b], length: format_rational(l) })
                .collect(),
        }
    }

    /// Rebuilds the graph, marks and lengths (ordered as the graph's bounded edges).
    pub fn to_parts(&self) -> Result<(Graph, Vec<FlagId>, Vec<Rational>), GraphError> {
        let index_of = |id: usize| {
            self.vertices
                .iter()
                .position(|&v| v == id)
                .ok_or_else(|| GraphError::Format(format!("unknown vertex id {id}")))
        };
        let mut flags = vec![None; self.flags.len()];
        for f in &self.flags {
            if f.id >= flags.len() || flags[f.id].is_some() {
                return Err(GraphError::Format(format!("flag ids must be 0..{}", flags.len())));
            }
            flags[f.id] = Some(Flag { vertex: index_of(f.vertex)?, partner: f.partner });
        }
        let flags: Vec<Flag> = flags.into_iter().map(|f| f.expect("filled above")).collect();
        let g = Graph::new(self.vertices.len(), flags)?;
        let mut lengths = vec![None; g.bounded_edge_count()];
        for l in &self.lengths {
            let idx = g
                .bounded_index(l.edge[0])
                .filter(|&i| {
                    let (a, b) = g.bounded_edges()[i];
                    (a, b) == (l.edge[0], l.edge[1]) || (b, a) == (l.edge[0], l.edge[1])
                })
                .ok_or_else(|| GraphError::Format(format!("{:?} is not a bounded edge", l.edge)))?;
            lengths[idx] = Some(parse_rational(&l.length).map_err(|e| GraphError::Format(e.to_string()))?);
        }
        let lengths = if self.lengths.is_empty() {
            Vec::new()
        } else {
            lengths
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| GraphError::Format("missing edge length".into()))?
        };
        Ok((g, self.marks.clone(), lengths))
    }
}
