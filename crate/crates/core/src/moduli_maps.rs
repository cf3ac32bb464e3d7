//! Evaluation, forgetful and π maps restricted to a moduli cell, as integer matrices.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AbstractType, Flag, FlagId, Graph, GraphError, VertexId};
use crate::linalg::{LinalgError, Matrix, Rational};
use crate::plane::{scalar, Direction, PlaneCurve, PlaneError, PlaneType};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModuliError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Plane(#[from] PlaneError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("mark {mark} does not exist (type has {count} marks)")]
    NoSuchMark { mark: usize, count: usize },
    #[error("expected {expected} marks, got {got}")]
    MarkCount { expected: usize, got: usize },
    #[error("vertex {0} is not 4-valent")]
    NotFourValent(VertexId),
    #[error("flags {0:?} are not the four flags of one vertex")]
    BadStar([FlagId; 4]),
    #[error("determinant {0} is not an integer")]
    NonInteger(Rational),
    #[error("multiplicity {0} does not fit in 64 bits")]
    Overflow(BigInt),
    #[error("forgetting marks leaves a degenerate curve")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// One coordinate `ev_i^axis`; `mark` is 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Selector {
    pub mark: usize,
    pub axis: Axis,
}

impl Selector {
    pub fn new(mark: usize, axis: Axis) -> Self {
        Selector { mark, axis }
    }
}

/// Both coordinates of every mark in `marks`, mark-major.
pub fn both_axes(marks: impl IntoIterator<Item = usize>) -> Vec<Selector> {
    marks.into_iter().flat_map(|m| [Selector::new(m, Axis::X), Selector::new(m, Axis::Y)]).collect()
}

/// Choice of coordinates on a cell: root x, root y, then bounded-edge lengths
/// in `edge_order`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellCoordinates {
    pub root: VertexId,
    pub edge_order: Vec<usize>,
}

impl CellCoordinates {
    /// Root at vertex 0, edges in graph order.
    pub fn standard(g: &Graph) -> Self {
        CellCoordinates::rooted(g, 0)
    }

    pub fn rooted(g: &Graph, root: VertexId) -> Self {
        CellCoordinates { root, edge_order: (0..g.bounded_edge_count()).collect() }
    }

    pub fn dimension(&self) -> usize {
        2 + self.edge_order.len()
    }

    fn column_of(&self, edge: usize) -> usize {
        2 + self.edge_order.iter().position(|&e| e == edge).expect("edge order is a permutation")
    }

    /// The coordinate values of a curve whose root is `self.root`.
    pub fn values(&self, c: &PlaneCurve) -> Vec<Rational> {
        let p = c.image_position(self.root);
        let mut v = vec![p.x, p.y];
        v.extend(self.edge_order.iter().map(|&e| c.lengths()[e].clone()));
        v
    }
}

/// The four strata of the moduli space of 4-marked rational tropical curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum M4Ray {
    /// `12|34`
    A,
    /// `13|24`
    B,
    /// `14|23`
    C,
    /// the 4-valent point
    D,
}

impl M4Ray {
    /// Ray whose split puts the 0-based quartet position `j` with position 0.
    fn pairing_with_first(j: usize) -> M4Ray {
        match j {
            1 => M4Ray::A,
            2 => M4Ray::B,
            3 => M4Ray::C,
            _ => unreachable!("partner of the first quartet member is 1, 2 or 3"),
        }
    }

    pub fn parse(s: &str) -> Option<M4Ray> {
        match s {
            "A" => Some(M4Ray::A),
            "B" => Some(M4Ray::B),
            "C" => Some(M4Ray::C),
            "D" => Some(M4Ray::D),
            _ => None,
        }
    }
}

impl fmt::Display for M4Ray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            M4Ray::A => "A",
            M4Ray::B => "B",
            M4Ray::C => "C",
            M4Ray::D => "D",
        };
        f.write_str(s)
    }
}

/// A point of the 4-marked moduli space; `length` is zero exactly on ray D.
/// Ordered by ray, then length.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct M4Point {
    pub ray: M4Ray,
    pub length: Rational,
}

impl M4Point {
    pub fn new(ray: M4Ray, length: Rational) -> Option<Self> {
        let ok = if ray == M4Ray::D { length.is_zero() } else { length.is_positive() };
        ok.then_some(M4Point { ray, length })
    }
}

/// A linear map on one cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMap {
    pub source: PlaneType,
    pub coords: CellCoordinates,
    pub matrix: Matrix,
    pub target_dim: usize,
    pub m4_ray: Option<M4Ray>,
}

/// Rows of the evaluation map for the given selectors.
pub fn ev_rows(t: &PlaneType, coords: &CellCoordinates, which: &[Selector]) -> Result<Matrix, ModuliError> {
    let g = t.graph();
    let n = t.marks().len();
    let mut m = Matrix::zeros(0, coords.dimension());
    for s in which {
        if s.mark >= n {
            return Err(ModuliError::NoSuchMark { mark: s.mark, count: n });
        }
        let mut row = vec![Rational::zero(); coords.dimension()];
        row[s.axis as usize] = Rational::from_integer(1.into());
        let target = g.vertex_of(t.marks()[s.mark]);
        for f in g.path(coords.root, target) {
            let e = g.bounded_index(f).expect("path flags are bounded");
            let d = t.dir(f);
            row[coords.column_of(e)] = scalar(match s.axis {
                Axis::X => d.x,
                Axis::Y => d.y,
            });
        }
        m.push_row(row)?;
    }
    Ok(m)
}

/// Evaluation map in standard coordinates.
pub fn ev_matrix(t: &PlaneType, which: &[Selector]) -> Result<CellMap, ModuliError> {
    ev_matrix_in(t, &CellCoordinates::standard(t.graph()), which)
}

pub fn ev_matrix_in(t: &PlaneType, coords: &CellCoordinates, which: &[Selector]) -> Result<CellMap, ModuliError> {
    let matrix = ev_rows(t, coords, which)?;
    Ok(CellMap { source: t.clone(), coords: coords.clone(), target_dim: which.len(), matrix, m4_ray: None })
}

/// Pairing of four marks (0-based indices into the marks) and the bounded
/// edges of the central path of their minimal subtree.
pub fn quartet(t: &PlaneType, quartet: [usize; 4]) -> Result<(M4Ray, Vec<usize>), ModuliError> {
    let g = t.graph();
    let n = t.marks().len();
    if let Some(&mark) = quartet.iter().find(|&&m| m >= n) {
        return Err(ModuliError::NoSuchMark { mark, count: n });
    }
    let at = quartet.map(|m| g.vertex_of(t.marks()[m]));
    let mut ray = M4Ray::D;
    let mut central = Vec::new();
    for (e, &(a, _)) in g.bounded_edges().iter().enumerate() {
        let side = g.side(g.vertex_of(a), &[a]);
        let inside: Vec<usize> = (0..4).filter(|&j| side[at[j]]).collect();
        if inside.len() == 2 {
            let partner = if inside[0] == 0 { inside[1] } else { (1..4).find(|j| !inside.contains(j)).unwrap() };
            ray = M4Ray::pairing_with_first(partner);
            central.push(e);
        }
    }
    Ok((ray, central))
}

/// Ray of `ft_4` and its integer row over `coords`.
pub fn ft4_coordinate(t: &PlaneType, coords: &CellCoordinates) -> Result<(M4Ray, Vec<i64>), ModuliError> {
    let (ray, central) = quartet(t, [0, 1, 2, 3])?;
    let mut row = vec![0; coords.dimension()];
    for e in central {
        row[coords.column_of(e)] = 1;
    }
    Ok((ray, row))
}

/// `ft_4` of a curve.
pub fn ft4_point(c: &PlaneCurve) -> Result<M4Point, ModuliError> {
    let (ray, central) = quartet(c.plane_type(), [0, 1, 2, 3])?;
    let length = central.iter().map(|&e| c.lengths()[e].clone()).sum();
    Ok(M4Point { ray, length })
}

/// Selectors of the point conditions of π: `ev_1^1`, `ev_2^2`, `ev_3`, ..., `ev_n`.
pub fn pi_selectors(n: usize) -> Vec<Selector> {
    let mut s = vec![Selector::new(0, Axis::X), Selector::new(1, Axis::Y)];
    s.extend(both_axes(2..n));
    s
}

/// `π = ev_1^1 × ev_2^2 × ev_3 × ... × ev_n × ft_4` in standard coordinates.
pub fn pi_matrix(t: &PlaneType, d: usize) -> Result<CellMap, ModuliError> {
    pi_matrix_in(t, d, &CellCoordinates::standard(t.graph()))
}

pub fn pi_matrix_in(t: &PlaneType, d: usize, coords: &CellCoordinates) -> Result<CellMap, ModuliError> {
    let n = t.marks().len();
    if n != 3 * d {
        return Err(ModuliError::MarkCount { expected: 3 * d, got: n });
    }
    let mut matrix = ev_rows(t, coords, &pi_selectors(n))?;
    let (ray, row) = ft4_coordinate(t, coords)?;
    matrix.push_row(row.into_iter().map(scalar).collect())?;
    Ok(CellMap { source: t.clone(), coords: coords.clone(), matrix, target_dim: 2 * n - 1, m4_ray: Some(ray) })
}

/// `|det|` of a square cell map.
pub fn multiplicity(cm: &CellMap) -> Result<u64, ModuliError> {
    abs_det(&cm.matrix)
}

pub(crate) fn abs_det(m: &Matrix) -> Result<u64, ModuliError> {
    let det = m.det()?;
    if !det.is_integer() {
        return Err(ModuliError::NonInteger(det));
    }
    let v = det.to_integer().abs();
    v.to_u64().ok_or(ModuliError::Overflow(v))
}

/// Keeps the first `m` marks.
pub fn forget_points(c: &PlaneCurve, m: usize) -> Result<PlaneCurve, ModuliError> {
    forget_marks(c, &(0..m).collect::<Vec<_>>())
}

/// Keeps the marks listed in `keep` (0-based, in that order), removes the
/// others and straightens the result.
pub fn forget_marks(c: &PlaneCurve, keep: &[usize]) -> Result<PlaneCurve, ModuliError> {
    let t = c.plane_type();
    let pos = c.vertex_positions();
    let (ptype, lengths, vertex_map) = prune(t, Some(c.lengths()), keep)?;
    let root = vertex_map[c.root()].unwrap_or(0);
    let old_root = vertex_map.iter().position(|&v| v == Some(root)).expect("some vertex survives");
    let lengths = lengths.expect("lengths were given");
    Ok(PlaneCurve::new(ptype, lengths, root, pos[old_root].clone())?)
}

/// `forget_marks` on a type.
pub fn forget_marks_type(t: &PlaneType, keep: &[usize]) -> Result<PlaneType, ModuliError> {
    Ok(prune(t, None, keep)?.0)
}

#[derive(Clone)]
struct FlagRec {
    vertex: VertexId,
    partner: Option<FlagId>,
    dir: Direction,
    length: Option<Rational>,
    mark: Option<usize>,
}

type Pruned = (PlaneType, Option<Vec<Rational>>, Vec<Option<VertexId>>);

fn prune(t: &PlaneType, lengths: Option<&[Rational]>, keep: &[usize]) -> Result<Pruned, ModuliError> {
    let g = t.graph();
    let n = t.marks().len();
    if let Some(&mark) = keep.iter().find(|&&m| m >= n) {
        return Err(ModuliError::NoSuchMark { mark, count: n });
    }
    let mut flags: Vec<Option<FlagRec>> = g
        .flags()
        .iter()
        .enumerate()
        .map(|(id, f)| {
            Some(FlagRec {
                vertex: f.vertex,
                partner: f.partner,
                dir: t.dir(id),
                length: lengths.and_then(|l| g.bounded_index(id).map(|e| l[e].clone())),
                mark: t.abstract_type().mark_index(id).and_then(|i| keep.iter().position(|&k| k == i)),
            })
        })
        .collect();
    for &m in t.marks() {
        if flags[m].as_ref().unwrap().mark.is_none() {
            flags[m] = None;
        }
    }
    let mut alive = vec![true; g.vertex_count()];
    loop {
        let at = |v: VertexId, flags: &[Option<FlagRec>]| -> Vec<FlagId> {
            (0..flags.len()).filter(|&f| flags[f].as_ref().is_some_and(|r| r.vertex == v)).collect()
        };
        let Some((v, here)) =
            (0..alive.len()).filter(|&v| alive[v]).map(|v| (v, at(v, &flags))).find(|(_, h)| h.len() < 3)
        else {
            break;
        };
        match here.as_slice() {
            [a] => {
                let p = flags[*a].as_ref().unwrap().partner.ok_or(ModuliError::Degenerate)?;
                flags[*a] = None;
                flags[p] = None;
                alive[v] = false;
            }
            [a, b] => {
                let (ra, rb) = (flags[*a].clone().unwrap(), flags[*b].clone().unwrap());
                match (ra.partner, rb.partner) {
                    (Some(pa), Some(pb)) => {
                        let len = match (ra.length, rb.length) {
                            (Some(x), Some(y)) => Some(x + y),
                            _ => None,
                        };
                        let fa = flags[pa].as_mut().unwrap();
                        fa.partner = Some(pb);
                        fa.length = len.clone();
                        let fb = flags[pb].as_mut().unwrap();
                        fb.partner = Some(pa);
                        fb.length = len;
                    }
                    (Some(pa), None) | (None, Some(pa)) => {
                        let end = if ra.partner.is_none() { ra } else { rb };
                        let far = flags[pa].as_mut().unwrap();
                        far.partner = None;
                        far.length = None;
                        far.dir = end.dir;
                        far.mark = end.mark;
                    }
                    (None, None) => return Err(ModuliError::Degenerate),
                }
                flags[*a] = None;
                flags[*b] = None;
                alive[v] = false;
            }
            _ => return Err(ModuliError::Degenerate),
        }
    }
    let mut vertex_map = vec![None; alive.len()];
    let mut next = 0;
    for (v, &a) in alive.iter().enumerate() {
        if a {
            vertex_map[v] = Some(next);
            next += 1;
        }
    }
    let mut flag_map = vec![None; flags.len()];
    let mut count = 0;
    for (f, r) in flags.iter().enumerate() {
        if r.is_some() {
            flag_map[f] = Some(count);
            count += 1;
        }
    }
    let live: Vec<&FlagRec> = flags.iter().flatten().collect();
    let new_flags: Vec<Flag> = live
        .iter()
        .map(|r| Flag {
            vertex: vertex_map[r.vertex].expect("flag on a live vertex"),
            partner: r.partner.map(|p| flag_map[p].expect("partner alive")),
        })
        .collect();
    let graph = Graph::new(next, new_flags)?;
    let mut marks = vec![0; keep.len()];
    for (f, r) in live.iter().enumerate() {
        if let Some(i) = r.mark {
            marks[i] = f;
        }
    }
    let new_lengths = lengths
        .map(|_| graph.bounded_edges().iter().map(|&(a, _)| live[a].length.clone().expect("bounded length")).collect());
    let dirs = live.iter().map(|r| r.dir).collect();
    let ptype = PlaneType::new(AbstractType::new(graph, marks)?, dirs)?;
    Ok((ptype, new_lengths, vertex_map))
}

/// The three resolutions of a 4-valent vertex `v` whose flags are `star`
/// (ordered `E1..E4`). Resolution `k` moves `{E2,E3}`, `{E3,E4}`, `{E2,E4}`
/// respectively to a new vertex joined to `v` by a new bounded edge. The
/// returned coordinates are rooted at `v` with the new edge last.
pub fn resolve_four_valent(
    t: &PlaneType,
    v: VertexId,
    star: [FlagId; 4],
) -> Result<[(PlaneType, CellCoordinates); 3], ModuliError> {
    let g = t.graph();
    if g.valence(v) != 4 {
        return Err(ModuliError::NotFourValent(v));
    }
    let mut sorted = star;
    sorted.sort();
    let mut here = g.flags_at(v).to_vec();
    here.sort();
    if sorted.as_slice() != here.as_slice() {
        return Err(ModuliError::BadStar(star));
    }
    let moved = [[star[1], star[2]], [star[2], star[3]], [star[1], star[3]]];
    let mut out = Vec::with_capacity(3);
    for pair in moved {
        let mut flags = g.flags().to_vec();
        let new_vertex = g.vertex_count();
        for f in pair {
            flags[f].vertex = new_vertex;
        }
        let near = flags.len();
        flags.push(Flag { vertex: v, partner: Some(near + 1) });
        flags.push(Flag { vertex: new_vertex, partner: Some(near) });
        let graph = Graph::new(new_vertex + 1, flags)?;
        let mut dirs = t.directions().to_vec();
        let out_dir = t.dir(pair[0]) + t.dir(pair[1]);
        dirs.push(out_dir);
        dirs.push(-out_dir);
        let coords = CellCoordinates::rooted(&graph, v);
        let ptype = PlaneType::new(AbstractType::new(graph, t.marks().to_vec())?, dirs)?;
        out.push((ptype, coords));
    }
    Ok(out.try_into().expect("three resolutions"))
}

/// Contracts bounded edge `e` of a type.
pub fn contract_edge(t: &PlaneType, e: usize) -> Result<PlaneType, ModuliError> {
    let (graph, map) = t.graph().contract(e);
    let mut dirs = vec![Direction::ZERO; graph.flags().len()];
    for (old, new) in map.iter().enumerate() {
        if let Some(nf) = new {
            dirs[*nf] = t.dir(old);
        }
    }
    let marks = t.marks().iter().map(|&m| map[m].expect("marks are ends")).collect();
    Ok(PlaneType::new(AbstractType::new(graph, marks)?, dirs)?)
}
