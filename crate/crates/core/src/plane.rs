//! Marked plane tropical curves: directions, balancing, degree and image geometry.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    check_lengths, AbstractType, CanonicalForm, FlagId, Graph, GraphError, GraphJson, MarkedAbstractCurve, VertexId,
};
use crate::linalg::{format_rational, parse_rational, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlaneError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("expected {expected} directions, got {got}")]
    DirectionCount { expected: usize, got: usize },
    #[error("flags {0} and {1} of a bounded edge do not have opposite directions")]
    NotOpposite(FlagId, FlagId),
    #[error("balancing fails at vertex {vertex}: directions sum to {sum}")]
    Unbalanced { vertex: VertexId, sum: Direction },
    #[error("marked end {0} has a nonzero direction")]
    MarkNotContracted(FlagId),
    #[error("root vertex {0} does not exist")]
    BadRoot(VertexId),
    #[error("bad curve data: {0}")]
    Format(String),
}

/// Integer direction vector of a flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(from = "[i64; 2]", into = "[i64; 2]")]
pub struct Direction {
    pub x: i64,
    pub y: i64,
}

impl Direction {
    pub const ZERO: Direction = Direction { x: 0, y: 0 };

    pub const fn new(x: i64, y: i64) -> Self {
        Direction { x, y }
    }

    pub fn is_zero(self) -> bool {
        self == Self::ZERO
    }

    /// `det(self, other)`.
    pub fn det(self, other: Direction) -> i64 {
        self.x * other.y - self.y * other.x
    }
}

impl From<[i64; 2]> for Direction {
    fn from([x, y]: [i64; 2]) -> Self {
        Direction { x, y }
    }
}

impl From<Direction> for [i64; 2] {
    fn from(d: Direction) -> Self {
        [d.x, d.y]
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl Add for Direction {
    type Output = Direction;
    fn add(self, o: Direction) -> Direction {
        Direction::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Direction {
    fn add_assign(&mut self, o: Direction) {
        *self = *self + o;
    }
}

impl Sub for Direction {
    type Output = Direction;
    fn sub(self, o: Direction) -> Direction {
        Direction::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Direction {
    type Output = Direction;
    fn neg(self) -> Direction {
        Direction::new(-self.x, -self.y)
    }
}

impl std::iter::Sum for Direction {
    fn sum<I: Iterator<Item = Direction>>(iter: I) -> Direction {
        iter.fold(Direction::ZERO, Add::add)
    }
}

/// Point of the plane with exact coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub x: Rational,
    pub y: Rational,
}

impl Point {
    pub fn new(x: Rational, y: Rational) -> Self {
        Point { x, y }
    }

    pub fn origin() -> Self {
        Point::new(Rational::zero(), Rational::zero())
    }

    /// `self + t * v`.
    pub fn offset(&self, t: &Rational, v: Direction) -> Point {
        Point::new(&self.x + t * scalar(v.x), &self.y + t * scalar(v.y))
    }

    pub fn to_strings(&self) -> [String; 2] {
        [format_rational(&self.x), format_rational(&self.y)]
    }

    pub fn parse(coords: &[String; 2]) -> Result<Point, PlaneError> {
        let p = |s: &String| parse_rational(s).map_err(|e| PlaneError::Format(e.to_string()));
        Ok(Point::new(p(&coords[0])?, p(&coords[1])?))
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add<&Point> for &Point {
    type Output = Point;
    fn add(self, o: &Point) -> Point {
        Point::new(&self.x + &o.x, &self.y + &o.y)
    }
}

impl Sub<&Point> for &Point {
    type Output = Point;
    fn sub(self, o: &Point) -> Point {
        Point::new(&self.x - &o.x, &self.y - &o.y)
    }
}

impl Mul<Direction> for &Rational {
    type Output = Point;
    fn mul(self, v: Direction) -> Point {
        Point::new(self * scalar(v.x), self * scalar(v.y))
    }
}

pub(crate) fn scalar(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// The multiset of directions of the unmarked ends, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Degree(Vec<Direction>);

impl Degree {
    pub fn new(mut dirs: Vec<Direction>) -> Self {
        dirs.sort();
        Degree(dirs)
    }

    /// `(-1,0)`, `(0,-1)`, `(1,1)`, each `d` times.
    pub fn projective(d: usize) -> Self {
        let mut v = Vec::with_capacity(3 * d);
        for _ in 0..d {
            v.extend([Direction::new(-1, 0), Direction::new(0, -1), Direction::new(1, 1)]);
        }
        Degree::new(v)
    }

    pub fn directions(&self) -> &[Direction] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Some(d)` when this is the projective degree `d`.
    pub fn projective_degree(&self) -> Option<usize> {
        let d = self.0.len() / 3;
        (self.0.len().is_multiple_of(3) && *self == Degree::projective(d)).then_some(d)
    }
}

/// Outcome of a balancing check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Balancing {
    Balanced,
    Unbalanced { vertex: VertexId, sum: Direction },
}

/// Checks that the directions of the flags at every vertex sum to zero.
pub fn check_balancing(g: &Graph, dir: &[Direction]) -> Balancing {
    for v in 0..g.vertex_count() {
        let sum: Direction = g.flags_at(v).iter().map(|&f| dir[f]).sum();
        if !sum.is_zero() {
            return Balancing::Unbalanced { vertex: v, sum };
        }
    }
    Balancing::Balanced
}

/// Combinatorial type of a marked plane curve: an abstract type plus a direction per flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneType {
    ty: AbstractType,
    dir: Vec<Direction>,
}

impl PlaneType {
    pub fn new(ty: AbstractType, dir: Vec<Direction>) -> Result<Self, PlaneError> {
        let g = ty.graph();
        if dir.len() != g.flags().len() {
            return Err(PlaneError::DirectionCount { expected: g.flags().len(), got: dir.len() });
        }
        for &(a, b) in g.bounded_edges() {
            if dir[a] != -dir[b] {
                return Err(PlaneError::NotOpposite(a, b));
            }
        }
        for &m in ty.marks() {
            if !dir[m].is_zero() {
                return Err(PlaneError::MarkNotContracted(m));
            }
        }
        if let Balancing::Unbalanced { vertex, sum } = check_balancing(g, &dir) {
            return Err(PlaneError::Unbalanced { vertex, sum });
        }
        Ok(PlaneType { ty, dir })
    }

    /// Builds a type from the directions of its unmarked ends; every bounded
    /// flag gets the sum of the end directions lying beyond it.
    pub fn from_end_directions(ty: AbstractType, end_dir: impl Fn(FlagId) -> Direction) -> Result<Self, PlaneError> {
        let g = ty.graph();
        let mut dir = vec![Direction::ZERO; g.flags().len()];
        for f in g.ends() {
            if !ty.is_marked(f) {
                dir[f] = end_dir(f);
            }
        }
        for &(a, b) in g.bounded_edges() {
            dir[a] = outward_sum(g, &dir, b);
            dir[b] = -dir[a];
        }
        PlaneType::new(ty, dir)
    }

    pub fn abstract_type(&self) -> &AbstractType {
        &self.ty
    }

    pub fn graph(&self) -> &Graph {
        self.ty.graph()
    }

    pub fn marks(&self) -> &[FlagId] {
        self.ty.marks()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.dir
    }

    pub fn dir(&self, f: FlagId) -> Direction {
        self.dir[f]
    }

    pub fn degree(&self) -> Degree {
        Degree::new(self.ty.unmarked_ends().into_iter().map(|f| self.dir[f]).collect())
    }

    pub fn codim(&self) -> usize {
        self.ty.codim()
    }

    /// `|Δ| - 1 + n - codim`; equals `2 + #bounded edges` for trivalent types.
    pub fn cell_dimension(&self) -> usize {
        (self.degree().len() + self.marks().len() + 1).saturating_sub(2 + self.codim())
    }

    /// Bounded edges whose direction is zero.
    pub fn contracted_bounded_edges(&self) -> Vec<usize> {
        self.graph()
            .bounded_edges()
            .iter()
            .enumerate()
            .filter(|(_, &(a, _))| self.dir[a].is_zero())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn canonical_form(&self) -> CanonicalForm<Direction> {
        self.ty.canonical_form(|f| self.dir[f])
    }
}

// Sum of end directions on the far side of flag `f` (seen from its own vertex,
// i.e. the ends reachable from vertex(f) without crossing f's edge).
fn outward_sum(g: &Graph, dir: &[Direction], f: FlagId) -> Direction {
    let mut sum = Direction::ZERO;
    let mut stack = vec![f];
    while let Some(incoming) = stack.pop() {
        let v = g.vertex_of(incoming);
        for &h in g.flags_at(v) {
            if h == incoming {
                continue;
            }
            match g.partner(h) {
                None => sum += dir[h],
                Some(p) => stack.push(p),
            }
        }
    }
    sum
}

/// `cell_dimension` of a plane type given by its numbers.
pub fn plane_cell_dimension(degree_size: usize, marks: usize, codim: usize) -> usize {
    (degree_size + marks + 1).saturating_sub(2 + codim)
}

/// One piece of the image `h(Γ)`: a segment or, when `length` is `None`, a ray.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub start: Point,
    pub dir: Direction,
    pub length: Option<Rational>,
    /// Flag at the start vertex this piece comes from.
    pub flag: FlagId,
}

impl Segment {
    pub fn end(&self) -> Option<Point> {
        self.length.as_ref().map(|l| self.start.offset(l, self.dir))
    }
}

/// A marked plane tropical curve, parametrized by a root vertex position and
/// the bounded-edge lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneCurve {
    ptype: PlaneType,
    lengths: Vec<Rational>,
    root: VertexId,
    root_pos: Point,
}

impl PlaneCurve {
    pub fn new(ptype: PlaneType, lengths: Vec<Rational>, root: VertexId, root_pos: Point) -> Result<Self, PlaneError> {
        check_lengths(ptype.graph(), &lengths, false)?;
        if root >= ptype.graph().vertex_count() {
            return Err(PlaneError::BadRoot(root));
        }
        Ok(PlaneCurve { ptype, lengths, root, root_pos })
    }

    pub fn plane_type(&self) -> &PlaneType {
        &self.ptype
    }

    pub fn graph(&self) -> &Graph {
        self.ptype.graph()
    }

    pub fn lengths(&self) -> &[Rational] {
        &self.lengths
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn root_position(&self) -> &Point {
        &self.root_pos
    }

    pub fn abstract_curve(&self) -> MarkedAbstractCurve {
        MarkedAbstractCurve::new(self.ptype.abstract_type().clone(), self.lengths.clone())
            .expect("lengths validated on construction")
    }

    pub fn degree(&self) -> Degree {
        self.ptype.degree()
    }

    pub fn check_balancing(&self) -> Balancing {
        check_balancing(self.graph(), self.ptype.directions())
    }

    /// Image of a vertex: root position plus length times direction along the tree path.
    pub fn image_position(&self, v: VertexId) -> Point {
        let g = self.graph();
        let mut p = self.root_pos.clone();
        for f in g.path(self.root, v) {
            let e = g.bounded_index(f).expect("path flags are bounded");
            p = p.offset(&self.lengths[e], self.ptype.dir(f));
        }
        p
    }

    /// Images of all vertices, computed in one traversal.
    pub fn vertex_positions(&self) -> Vec<Point> {
        let g = self.graph();
        let mut pos: Vec<Option<Point>> = vec![None; g.vertex_count()];
        pos[self.root] = Some(self.root_pos.clone());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            let here = pos[v].clone().expect("visited");
            for &f in g.flags_at(v) {
                if let Some(w) = g.across(f) {
                    if pos[w].is_none() {
                        let e = g.bounded_index(f).expect("bounded");
                        pos[w] = Some(here.offset(&self.lengths[e], self.ptype.dir(f)));
                        stack.push(w);
                    }
                }
            }
        }
        pos.into_iter().map(|p| p.expect("connected")).collect()
    }

    /// Image of marked point `x_{i+1}`.
    pub fn mark_position(&self, i: usize) -> Point {
        self.image_position(self.graph().vertex_of(self.ptype.marks()[i]))
    }

    /// One piece per non-contracted edge; contracted edges and marked ends are skipped.
    pub fn image_segments(&self) -> Vec<Segment> {
        let g = self.graph();
        let pos = self.vertex_positions();
        let mut out = Vec::new();
        for (f, flag) in g.flags().iter().enumerate() {
            let d = self.ptype.dir(f);
            if d.is_zero() {
                continue;
            }
            match flag.partner {
                Some(p) if f < p => out.push(Segment {
                    start: pos[flag.vertex].clone(),
                    dir: d,
                    length: Some(self.lengths[g.bounded_index(f).expect("bounded")].clone()),
                    flag: f,
                }),
                Some(_) => {}
                None => out.push(Segment { start: pos[flag.vertex].clone(), dir: d, length: None, flag: f }),
            }
        }
        out
    }

    pub fn to_json(&self) -> PlaneJson {
        PlaneJson {
            graph: GraphJson::from_parts(self.graph(), self.ptype.marks(), &self.lengths),
            directions: self.ptype.directions().to_vec(),
            root: self.root,
            root_position: self.root_pos.to_strings(),
        }
    }

    pub fn from_json(j: &PlaneJson) -> Result<Self, PlaneError> {
        let (g, marks, lengths) = j.graph.to_parts()?;
        let root = j.graph.vertices.iter().position(|&v| v == j.root).ok_or(PlaneError::BadRoot(j.root))?;
        let ptype = PlaneType::new(AbstractType::new(g, marks)?, j.directions.clone())?;
        PlaneCurve::new(ptype, lengths, root, Point::parse(&j.root_position)?)
    }
}

/// Wire form of a plane curve (`curve.plane`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneJson {
    pub graph: GraphJson,
    /// Direction of each flag, indexed by flag id.
    pub directions: Vec<Direction>,
    pub root: usize,
    pub root_position: [String; 2],
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::graph::tests::tree;
    use crate::graph::Flag;
    use crate::linalg::{int, ratio};

    pub(crate) const W: Direction = Direction::new(-1, 0);
    pub(crate) const S: Direction = Direction::new(0, -1);
    pub(crate) const NE: Direction = Direction::new(1, 1);

    /// Degree-1 line with vertex at `pos`.
    pub(crate) fn line_at(pos: Point) -> PlaneCurve {
        let (g, _) = tree(1, &[], &[0, 0, 0]);
        let t = PlaneType::new(AbstractType::new(g, vec![]).unwrap(), vec![W, S, NE]).unwrap();
        PlaneCurve::new(t, vec![], 0, pos).unwrap()
    }

    #[test]
    fn balancing_checks() {
        let (g, _) = tree(1, &[], &[0, 0, 0]);
        assert_eq!(
            check_balancing(&g, &[Direction::new(1, 0), Direction::new(0, 1), Direction::new(-1, -1)]),
            Balancing::Balanced
        );
        assert_eq!(check_balancing(&g, &[NE, -NE, Direction::ZERO]), Balancing::Balanced);
        let (g2, _) = tree(1, &[], &[0, 0]);
        assert_eq!(
            check_balancing(&g2, &[Direction::new(1, 0), Direction::new(0, 1)]),
            Balancing::Unbalanced { vertex: 0, sum: Direction::new(1, 1) }
        );
    }

    #[test]
    fn derived_directions_balance() {
        // conic-like tree: two cherries joined by an edge
        let (g, ends) = tree(2, &[(0, 1)], &[0, 0, 1, 1]);
        let ty = AbstractType::new(g, vec![]).unwrap();
        let end_dirs = [W, S, NE, NE];
        let at = |f: FlagId| end_dirs[ends.iter().position(|&e| e == f).unwrap()];
        assert!(matches!(PlaneType::from_end_directions(ty.clone(), at), Err(PlaneError::Unbalanced { .. })));
        let end_dirs = [W, S, NE + NE, -NE];
        let t = PlaneType::from_end_directions(ty, |f| end_dirs[ends.iter().position(|&e| e == f).unwrap()]).unwrap();
        assert_eq!(t.dir(0), -(W + S));
        assert_eq!(t.dir(1), W + S);
    }

    #[test]
    fn image_positions() {
        let c = line_at(Point::new(int(1), ratio(1, 2)));
        assert_eq!(c.image_position(0), Point::new(int(1), ratio(1, 2)));
        // root at origin, one bounded edge of length 2 and direction (1,1)
        let (g, _) = tree(2, &[(0, 1)], &[0, 0, 1, 1]);
        let dirs = vec![NE, -NE, W, S, NE + NE, -NE];
        let t = PlaneType::new(AbstractType::new(g, vec![]).unwrap(), dirs).unwrap();
        let c = PlaneCurve::new(t, vec![int(2)], 0, Point::origin()).unwrap();
        assert_eq!(c.image_position(1), Point::new(int(2), int(2)));
    }

    #[test]
    fn line_segments_are_three_rays() {
        let c = line_at(Point::origin());
        let segs = c.image_segments();
        assert_eq!(segs.len(), 3);
        assert!(segs.iter().all(|s| s.length.is_none() && s.start == Point::origin()));
        let mut dirs: Vec<_> = segs.iter().map(|s| s.dir).collect();
        dirs.sort();
        assert_eq!(Degree::new(dirs).projective_degree(), Some(1));
    }

    #[test]
    fn contracted_edges_emit_no_segment() {
        // two lines glued by a contracted bounded edge between points on their rays
        let flags = vec![
            Flag { vertex: 0, partner: Some(1) }, // V1 -> P along NE
            Flag { vertex: 1, partner: Some(0) },
            Flag { vertex: 1, partner: Some(3) }, // P -> Q contracted
            Flag { vertex: 2, partner: Some(2) },
            Flag { vertex: 2, partner: Some(5) }, // Q -> V2
            Flag { vertex: 3, partner: Some(4) },
            Flag { vertex: 0, partner: None },
            Flag { vertex: 0, partner: None },
            Flag { vertex: 1, partner: None },
            Flag { vertex: 2, partner: None },
            Flag { vertex: 3, partner: None },
            Flag { vertex: 3, partner: None },
        ];
        let g = Graph::new(4, flags).unwrap();
        let ty = AbstractType::new(g, vec![]).unwrap();
        let end = |f: FlagId| match f {
            6 => W,
            7 => S,
            8 => NE,
            9 => S,
            10 => W,
            _ => NE,
        };
        let t = PlaneType::from_end_directions(ty, end).unwrap();
        assert_eq!(t.contracted_bounded_edges(), vec![1]);
        let c = PlaneCurve::new(t, vec![int(1), int(5), int(2)], 0, Point::origin()).unwrap();
        let segs = c.image_segments();
        assert_eq!(segs.len(), 8);
        assert!(segs.iter().all(|s| s.flag != 2 && s.flag != 3));
        // the glueing point lies on both lines
        let p = c.image_position(1);
        assert_eq!(p, c.image_position(2));
    }

    #[test]
    fn plane_cell_dimensions() {
        assert_eq!(plane_cell_dimension(3, 0, 0), 2);
        assert_eq!(plane_cell_dimension(6, 4, 0), 9);
        for d in 1..5 {
            let n = 3 * d;
            assert_eq!(plane_cell_dimension(3 * d, n, 0), 2 * n - 1);
        }
        let c = line_at(Point::origin());
        assert_eq!(c.plane_type().cell_dimension(), 2);
    }

    #[test]
    fn curve_json_round_trip() {
        let c = line_at(Point::new(ratio(-3, 7), int(2)));
        let text = serde_json::to_string(&c.to_json()).unwrap();
        let back: PlaneJson = serde_json::from_str(&text).unwrap();
        assert_eq!(PlaneCurve::from_json(&back).unwrap(), c);
    }
}
