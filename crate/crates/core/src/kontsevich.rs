//! The recursion for rational plane curve counts, the two degree expressions
//! it equates, transverse tropical intersection, and the bookkeeping of
//! large-length π fibers into reducible pieces.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::enumeration::{decompose_reducible, ev_multiplicity, EnumerationError, FiberSolution, PiConfig};
use crate::graph::VertexId;
use crate::linalg::Rational;
use crate::moduli_maps::{forget_marks, M4Ray, ModuliError};
use crate::plane::{scalar, Direction, PlaneCurve, Point};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KontsevichError {
    #[error("curves do not meet transversally: {0}")]
    NonTransverse(String),
    #[error("fiber solution fits no reducible case: {0}")]
    Structural(String),
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error(transparent)]
    Moduli(#[from] ModuliError),
}

pub type Result<T, E = KontsevichError> = std::result::Result<T, E>;

/// `N_1..N_dmax`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NdTable(Vec<BigInt>);

impl NdTable {
    pub fn dmax(&self) -> usize {
        self.0.len()
    }

    /// `N_d` for `1 <= d <= dmax`.
    pub fn get(&self, d: usize) -> Option<&BigInt> {
        d.checked_sub(1).and_then(|i| self.0.get(i))
    }

    fn n(&self, d: usize) -> &BigInt {
        self.get(d).expect("table filled through d")
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BigInt)> {
        self.0.iter().enumerate().map(|(i, n)| (i + 1, n))
    }
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    num_integer::binomial(BigInt::from(n), BigInt::from(k))
}

fn pow(x: usize, e: u32) -> BigInt {
    BigInt::from(x).pow(e)
}

/// Summand of the fiber count on a ray-A target for the split `d = d1 + d2`:
/// `d1³·d2·C(3d-4, 3d1-1)·N_d1·N_d2`.
pub fn type_a_term(d1: usize, d2: usize, nd: &NdTable) -> BigInt {
    let d = d1 + d2;
    pow(d1, 3) * pow(d2, 1) * binomial(3 * d as u64 - 4, 3 * d1 as u64 - 1) * nd.n(d1) * nd.n(d2)
}

/// Summand on a ray-B (or ray-C) target: `d1²·d2²·C(3d-4, 3d1-2)·N_d1·N_d2`.
pub fn type_b_term(d1: usize, d2: usize, nd: &NdTable) -> BigInt {
    let d = d1 + d2;
    pow(d1, 2) * pow(d2, 2) * binomial(3 * d as u64 - 4, 3 * d1 as u64 - 2) * nd.n(d1) * nd.n(d2)
}

/// `N_d` for `d <= dmax`, from `N_1 = 1`.
pub fn recursion_nd(dmax: usize) -> NdTable {
    let mut table = NdTable(Vec::with_capacity(dmax));
    for d in 1..=dmax {
        let n = if d == 1 {
            BigInt::one()
        } else {
            (1..d).map(|d1| type_b_term(d1, d - d1, &table) - type_a_term(d1, d - d1, &table)).sum()
        };
        table.0.push(n);
    }
    table
}

/// The two evaluations of `deg π` for degree `d >= 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WdvvSides {
    /// `N_d` plus the ray-A split terms.
    pub lhs_a: BigInt,
    /// Sum of the ray-B split terms.
    pub rhs_b: BigInt,
}

pub fn wdvv_sides(d: usize, nd: &NdTable) -> WdvvSides {
    assert!(d >= 2 && d <= nd.dmax(), "need 2 <= d <= dmax");
    let lhs_a = nd.n(d) + (1..d).map(|d1| type_a_term(d1, d - d1, nd)).sum::<BigInt>();
    let rhs_b = (1..d).map(|d1| type_b_term(d1, d - d1, nd)).sum();
    WdvvSides { lhs_a, rhs_b }
}

// ---------------------------------------------------------------------------
// Intersections

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct IntersectionPoint {
    pub point: Point,
    pub mult: u64,
}

/// Image pieces of a curve grouped into straight branches: pieces meeting at
/// a point where only two opposite directions leave are one branch.
struct Branches {
    pieces: Vec<Piece>,
}

struct Piece {
    start: Point,
    dir: Direction,
    length: Option<Rational>,
    branch: usize,
    /// Whether the start resp. end point is a genuine vertex of the image.
    start_genuine: bool,
    end_genuine: bool,
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

impl Branches {
    fn of(c: &PlaneCurve) -> Self {
        let t = c.plane_type();
        let g = t.graph();
        // vertices joined by contracted edges share an image point
        let mut class: Vec<usize> = (0..g.vertex_count()).collect();
        for &(a, b) in g.bounded_edges() {
            if t.dir(a).is_zero() {
                let (ra, rb) = (find(&mut class, g.vertex_of(a)), find(&mut class, g.vertex_of(b)));
                class[ra] = rb;
            }
        }
        let segments = c.image_segments();
        let mut piece_of = vec![usize::MAX; g.flags().len()];
        for (i, s) in segments.iter().enumerate() {
            piece_of[s.flag] = i;
            if let Some(p) = g.partner(s.flag) {
                piece_of[p] = i;
            }
        }
        let mut leaving: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for f in 0..g.flags().len() {
            if !t.dir(f).is_zero() {
                leaving.entry(find(&mut class, g.vertex_of(f))).or_default().push(f);
            }
        }
        let mut branch: Vec<usize> = (0..segments.len()).collect();
        let mut genuine = BTreeMap::new();
        for (&cl, flags) in &leaving {
            let straight = flags.len() == 2 && t.dir(flags[0]) == -t.dir(flags[1]);
            if straight {
                let (ra, rb) = (find(&mut branch, piece_of[flags[0]]), find(&mut branch, piece_of[flags[1]]));
                branch[ra] = rb;
            }
            genuine.insert(cl, !straight);
        }
        let mut genuine_at = |v: VertexId| genuine.get(&find(&mut class, v)).copied().unwrap_or(true);
        let pieces = segments
            .iter()
            .enumerate()
            .map(|(i, s)| Piece {
                start: s.start.clone(),
                dir: s.dir,
                length: s.length.clone(),
                branch: find(&mut branch, i),
                start_genuine: genuine_at(g.vertex_of(s.flag)),
                end_genuine: g.partner(s.flag).is_some_and(|p| genuine_at(g.vertex_of(p))),
            })
            .collect();
        Branches { pieces }
    }
}

fn dot(p: &Point, d: Direction) -> Rational {
    &p.x * scalar(d.x) + &p.y * scalar(d.y)
}

/// Position of a parameter within `[0, length]`: `None` outside, else whether it is an endpoint.
fn locate(t: &Rational, length: &Option<Rational>) -> Option<(bool, bool)> {
    if t.is_negative() || length.as_ref().is_some_and(|l| t > l) {
        return None;
    }
    Some((t.is_zero(), length.as_ref() == Some(t)))
}

/// Points where the images of `c1` and `c2` cross, with multiplicity
/// `|det(v', v'')|` of the crossing directions. Shared segments and
/// crossings at a vertex of either image are rejected.
pub fn tropical_intersection(c1: &PlaneCurve, c2: &PlaneCurve) -> Result<Vec<IntersectionPoint>> {
    let (b1, b2) = (Branches::of(c1), Branches::of(c2));
    let mut hits: BTreeMap<(usize, usize), IntersectionPoint> = BTreeMap::new();
    for p in &b1.pieces {
        for q in &b2.pieces {
            let r = &q.start - &p.start;
            let det = p.dir.det(q.dir);
            if det == 0 {
                let normal = Direction::new(-p.dir.y, p.dir.x);
                if !dot(&r, normal).is_zero() {
                    continue;
                }
                // collinear: compare parameter intervals along p
                let scale = scalar(p.dir.x * p.dir.x + p.dir.y * p.dir.y);
                let s0 = dot(&r, p.dir) / &scale;
                let step = scalar(p.dir.x * q.dir.x + p.dir.y * q.dir.y) / &scale;
                let far = q.length.as_ref().map(|l| &s0 + &step * l);
                let (lo, hi) = match &far {
                    Some(f) if f < &s0 => (Some(f.clone()), Some(s0.clone())),
                    Some(f) => (Some(s0.clone()), Some(f.clone())),
                    None if step.is_negative() => (None, Some(s0.clone())),
                    None => (Some(s0.clone()), None),
                };
                let below = hi.as_ref().is_some_and(|h| h.is_negative());
                let above = match (&lo, &p.length) {
                    (Some(l), Some(len)) => l > len,
                    _ => false,
                };
                if !below && !above {
                    return Err(KontsevichError::NonTransverse(format!("collinear pieces overlap near {}", p.start)));
                }
                continue;
            }
            let d = scalar(det);
            let a = (&r.x * scalar(q.dir.y) - &r.y * scalar(q.dir.x)) / &d;
            let b = (&r.x * scalar(p.dir.y) - &r.y * scalar(p.dir.x)) / &d;
            let (Some((p_start, p_end)), Some((q_start, q_end))) = (locate(&a, &p.length), locate(&b, &q.length))
            else {
                continue;
            };
            let at_vertex = (p_start && p.start_genuine)
                || (p_end && p.end_genuine)
                || (q_start && q.start_genuine)
                || (q_end && q.end_genuine);
            let point = p.start.offset(&a, p.dir);
            if at_vertex {
                return Err(KontsevichError::NonTransverse(format!("a vertex lies on the other curve at {point}")));
            }
            hits.entry((p.branch, q.branch)).or_insert(IntersectionPoint { point, mult: det.unsigned_abs() });
        }
    }
    let mut out: Vec<IntersectionPoint> = hits.into_values().collect();
    out.sort();
    Ok(out)
}

pub fn intersection_total(points: &[IntersectionPoint]) -> u64 {
    points.iter().map(|p| p.mult).sum()
}

// ---------------------------------------------------------------------------
// Reducible census

/// Multiplicity factors of a split solution: `ev` multiplicities of both
/// components at their full points, the crossing at the glue point, and the
/// crossings of the line conditions with the components through `x_1`, `x_2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitFactors {
    pub ev_first: u64,
    pub ev_second: u64,
    pub glue: u64,
    pub vertical_line: u64,
    pub horizontal_line: u64,
}

impl SplitFactors {
    pub fn product(&self) -> u64 {
        self.ev_first * self.ev_second * self.glue * self.vertical_line * self.horizontal_line
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CensusCase {
    /// `x_1`, `x_2` at one vertex; predicted multiplicity is `ev` after forgetting `x_1`.
    Pair { predicted: u64 },
    /// Two components glued at one contracted edge; `first` holds `x_1`.
    Split {
        degrees: (usize, usize),
        first_marks: Vec<usize>,
        second_marks: Vec<usize>,
        glue: Point,
        factors: SplitFactors,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusEntry {
    pub mult: u64,
    pub case: CensusCase,
}

impl CensusEntry {
    pub fn predicted(&self) -> u64 {
        match &self.case {
            CensusCase::Pair { predicted } => *predicted,
            CensusCase::Split { factors, .. } => factors.product(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bucket {
    Pair,
    Split(usize, usize),
    Total,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermCheck {
    pub bucket: Bucket,
    pub observed: BigInt,
    pub expected: BigInt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Census {
    pub ray: M4Ray,
    pub d: usize,
    pub entries: Vec<CensusEntry>,
}

impl Census {
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.mult).sum()
    }

    pub fn pair_total(&self) -> u64 {
        self.entries.iter().filter(|e| matches!(e.case, CensusCase::Pair { .. })).map(|e| e.mult).sum()
    }

    pub fn split_totals(&self) -> BTreeMap<(usize, usize), u64> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            if let CensusCase::Split { degrees, .. } = e.case {
                *out.entry(degrees).or_insert(0) += e.mult;
            }
        }
        out
    }

    /// Entries whose multiplicity differs from the product of its factors.
    pub fn factorization_mismatches(&self) -> usize {
        self.entries.iter().filter(|e| e.mult != e.predicted()).count()
    }

    /// Observed bucket totals against the terms of the matching degree expression.
    pub fn compare(&self, nd: &NdTable) -> Vec<TermCheck> {
        let d = self.d;
        let observed = self.split_totals();
        let mut out = vec![TermCheck {
            bucket: Bucket::Pair,
            observed: self.pair_total().into(),
            expected: if self.ray == M4Ray::A { nd.n(d).clone() } else { BigInt::zero() },
        }];
        for d1 in 1..d {
            let term = if self.ray == M4Ray::A { type_a_term(d1, d - d1, nd) } else { type_b_term(d1, d - d1, nd) };
            out.push(TermCheck {
                bucket: Bucket::Split(d1, d - d1),
                observed: observed.get(&(d1, d - d1)).copied().unwrap_or(0).into(),
                expected: term,
            });
        }
        let sides = wdvv_sides(d, nd);
        out.push(TermCheck {
            bucket: Bucket::Total,
            observed: self.total().into(),
            expected: if self.ray == M4Ray::A { sides.lhs_a } else { sides.rhs_b },
        });
        out
    }

    pub fn is_consistent(&self, nd: &NdTable) -> bool {
        self.factorization_mismatches() == 0 && self.compare(nd).iter().all(|c| c.observed == c.expected)
    }
}

/// The marks that must lie with `x_1` resp. apart from it for the given ray.
fn required_split(ray: M4Ray) -> Option<([usize; 2], [usize; 2])> {
    match ray {
        M4Ray::A => Some(([0, 1], [2, 3])),
        M4Ray::B => Some(([0, 2], [1, 3])),
        M4Ray::C => Some(([0, 3], [1, 2])),
        M4Ray::D => None,
    }
}

/// `|det|` against the vertical (`x`) or horizontal (`y`) line at a mark.
fn line_crossing(c: &PlaneCurve, mark: usize, vertical: bool) -> Result<u64> {
    let t = c.plane_type();
    let g = t.graph();
    let v = g.vertex_of(t.marks()[mark]);
    let dir = g
        .flags_at(v)
        .iter()
        .map(|&f| t.dir(f))
        .find(|d| !d.is_zero())
        .ok_or_else(|| KontsevichError::Structural(format!("mark {mark} sits on a contracted component")))?;
    Ok(if vertical { dir.x } else { dir.y }.unsigned_abs())
}

/// `ev` multiplicity of a component at its marks with index >= 2 (original numbering).
fn ev_at_points(c: &PlaneCurve, original: &[usize]) -> Result<u64> {
    let keep: Vec<usize> = original.iter().enumerate().filter(|(_, &m)| m >= 2).map(|(i, _)| i).collect();
    let d = c.degree().projective_degree().unwrap_or(0);
    if keep.len() + 1 != 3 * d {
        return Err(KontsevichError::Structural(format!(
            "component of degree {d} carries {} point conditions, expected {}",
            keep.len(),
            (3 * d).saturating_sub(1)
        )));
    }
    Ok(ev_multiplicity(&forget_marks(c, &keep)?)?)
}

fn classify(cfg: &PiConfig, ray: [usize; 2], apart: [usize; 2], s: &FiberSolution) -> Result<CensusCase> {
    let c = &s.curve;
    let t = c.plane_type();
    let g = t.graph();
    let contracted = t.contracted_bounded_edges();
    if contracted.len() != 1 {
        return Err(KontsevichError::Structural(format!("{} contracted bounded edges", contracted.len())));
    }
    if g.vertex_of(t.marks()[0]) == g.vertex_of(t.marks()[1]) {
        if ray != [0, 1] {
            return Err(KontsevichError::Structural("x1 and x2 share a vertex off ray A".into()));
        }
        if c.mark_position(0) != Point::new(cfg.a.clone(), cfg.b.clone()) {
            return Err(KontsevichError::Structural("shared vertex of x1, x2 is not at (a, b)".into()));
        }
        let keep: Vec<usize> = (1..t.marks().len()).collect();
        let predicted = ev_multiplicity(&forget_marks(c, &keep)?)?;
        return Ok(CensusCase::Pair { predicted });
    }
    let split = decompose_reducible(c, contracted[0])?;
    let holds = |marks: &[usize], want: [usize; 2]| want.iter().all(|m| marks.contains(m));
    if !holds(&split.first_marks, ray) || !holds(&split.second_marks, apart) {
        return Err(KontsevichError::Structural(format!(
            "mark split {:?} | {:?}",
            split.first_marks, split.second_marks
        )));
    }
    let degree_of = |c: &PlaneCurve| {
        c.degree()
            .projective_degree()
            .ok_or_else(|| KontsevichError::Structural("component is not of projective degree".into()))
    };
    let degrees = (degree_of(&split.first)?, degree_of(&split.second)?);
    let glue = split.first.mark_position(split.first_marks.len());
    let crossings = tropical_intersection(&split.first, &split.second)?;
    let glue_mult =
        crossings.iter().find(|p| p.point == glue).map(|p| p.mult).ok_or_else(|| {
            KontsevichError::Structural(format!("glue point {glue} is not a crossing of the components"))
        })?;
    let position = |marks: &[usize], m: usize| marks.iter().position(|&x| x == m);
    let horizontal_line = match position(&split.first_marks, 1) {
        Some(i) => line_crossing(&split.first, i, false)?,
        None => line_crossing(&split.second, position(&split.second_marks, 1).expect("x2 on one side"), false)?,
    };
    let factors = SplitFactors {
        ev_first: ev_at_points(&split.first, &split.first_marks)?,
        ev_second: ev_at_points(&split.second, &split.second_marks)?,
        glue: glue_mult,
        vertical_line: line_crossing(&split.first, 0, true)?,
        horizontal_line,
    };
    Ok(CensusCase::Split { degrees, first_marks: split.first_marks, second_marks: split.second_marks, glue, factors })
}

/// Sorts the solutions of a large-length π fiber into the pair and split
/// cases and records the multiplicity factors of each.
pub fn reducible_census(d: usize, cfg: &PiConfig, solutions: &[FiberSolution]) -> Result<Census> {
    let (with_first, apart) = required_split(cfg.z.ray)
        .ok_or_else(|| KontsevichError::Structural("target on ray D has no large length".into()))?;
    let entries = solutions
        .iter()
        .map(|s| Ok(CensusEntry { mult: s.mult, case: classify(cfg, with_first, apart, s)? }))
        .collect::<Result<_>>()?;
    Ok(Census { ray: cfg.z.ray, d, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::{fiber, random_ev_config, rng_from_seed, sample_fiber, PointConfig, Request};
    use crate::linalg::ratio;
    use crate::plane::tests::line_at;
    use crate::plane::Degree;

    fn n(v: i64) -> BigInt {
        BigInt::from(v)
    }

    /// Independent evaluation of the recursion with `i128` and a Pascal table.
    fn small_recursion(dmax: usize) -> Vec<i128> {
        let size = 3 * dmax + 1;
        let mut pascal = vec![vec![0i128; size]; size];
        for i in 0..size {
            pascal[i][0] = 1;
            for j in 1..=i {
                pascal[i][j] = pascal[i - 1][j - 1] + if j < i { pascal[i - 1][j] } else { 0 };
            }
        }
        let mut nd = vec![0i128, 1];
        for d in 2..=dmax {
            let mut total = 0;
            for d1 in 1..d {
                let (a, b) = (d1 as i128, (d - d1) as i128);
                let c2 = pascal[3 * d - 4][3 * d1 - 2];
                let c1 = pascal[3 * d - 4][3 * d1 - 1];
                total += (a * a * b * b * c2 - a * a * a * b * c1) * nd[d1] * nd[d - d1];
            }
            nd.push(total);
        }
        nd
    }

    #[test]
    fn golden_values() {
        let t = recursion_nd(4);
        let got: Vec<BigInt> = t.iter().map(|(_, v)| v.clone()).collect();
        assert_eq!(got, vec![n(1), n(1), n(12), n(620)]);
        assert_eq!(t.get(0), None);
        assert_eq!(t.get(5), None);
    }

    #[test]
    fn matches_machine_integer_oracle() {
        let oracle = small_recursion(8);
        let t = recursion_nd(8);
        for d in 1..=8 {
            assert_eq!(t.get(d).unwrap(), &BigInt::from(oracle[d]));
        }
        assert_eq!(t.get(5).unwrap(), &n(87304));
    }

    #[test]
    fn sides_agree() {
        let t = recursion_nd(10);
        assert_eq!(wdvv_sides(2, &t), WdvvSides { lhs_a: n(2), rhs_b: n(2) });
        for d in 2..=10 {
            let s = wdvv_sides(d, &t);
            assert_eq!(s.lhs_a, s.rhs_b, "d = {d}");
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(2, 1), n(2));
        assert_eq!(binomial(26, 13), n(10_400_600));
        assert_eq!(binomial(3, 5), n(0));
    }

    fn at(x: i64, y: i64) -> Point {
        Point::new(scalar(x), scalar(y))
    }

    #[test]
    fn two_lines_meet_once() {
        let a = line_at(at(0, 0));
        let b = line_at(Point::new(ratio(3, 2), ratio(-5, 7)));
        let hits = tropical_intersection(&a, &b).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(intersection_total(&hits), 1);
    }

    #[test]
    fn shared_leg_is_not_transverse() {
        let a = line_at(at(0, 0));
        let b = line_at(at(2, 0));
        assert!(matches!(tropical_intersection(&a, &b), Err(KontsevichError::NonTransverse(_))));
        let c = line_at(at(3, 3));
        assert!(matches!(tropical_intersection(&a, &c), Err(KontsevichError::NonTransverse(_))));
    }

    #[test]
    fn vertex_on_other_curve_is_not_transverse() {
        // vertex of the second line on the first line's downward leg
        let a = line_at(at(0, 0));
        let b = line_at(at(0, -4));
        assert!(matches!(tropical_intersection(&a, &b), Err(KontsevichError::NonTransverse(_))));
    }

    #[test]
    fn marks_do_not_split_crossings() {
        // a marked line crossing exactly at one of its marks still counts once
        let degree = Degree::projective(1);
        let (_, sols) = sample_fiber(&degree, &Request::Ev, &mut rng_from_seed(9)).unwrap();
        let marked = &sols[0].curve;
        let p = marked.mark_position(0);
        let other = line_at(Point::new(&p.x + ratio(1, 3), p.y.clone()));
        let hits = tropical_intersection(marked, &other).unwrap();
        assert_eq!(intersection_total(&hits), 1);
    }

    #[test]
    fn line_meets_conic_twice() {
        let mut rng = rng_from_seed(21);
        let degree = Degree::projective(2);
        let conic = fiber(&degree, &PointConfig::Ev(random_ev_config(&degree, &mut rng))).unwrap();
        let c = &conic[0].curve;
        let mut transverse = 0;
        for k in 0..5 {
            let line = line_at(Point::new(ratio(17 * k - 40, 7), ratio(11 - 13 * k, 5)));
            if let Ok(hits) = tropical_intersection(c, &line) {
                assert_eq!(intersection_total(&hits), 2);
                transverse += 1;
            }
        }
        assert!(transverse >= 4);
    }

    #[test]
    fn census_requires_a_large_length_ray() {
        let mut rng = rng_from_seed(1);
        let mut cfg = crate::enumeration::random_pi_config(&Degree::projective(2), M4Ray::A, None, &mut rng);
        cfg.z = crate::moduli_maps::M4Point::new(M4Ray::D, Rational::zero()).unwrap();
        assert!(matches!(reducible_census(2, &cfg, &[]), Err(KontsevichError::Structural(_))));
    }

    #[test]
    fn census_of_degree_two() {
        let nd = recursion_nd(2);
        for (ray, seed) in [(M4Ray::A, 3), (M4Ray::B, 4)] {
            let (cfg, sols) =
                sample_fiber(&Degree::projective(2), &Request::Pi { ray, scale: 1 }, &mut rng_from_seed(seed)).unwrap();
            let PointConfig::Pi(cfg) = cfg else { unreachable!() };
            let census = reducible_census(2, &cfg, &sols).unwrap();
            assert!(census.is_consistent(&nd), "{ray}: {:?}", census.compare(&nd));
            let expected_pair = if ray == M4Ray::A { 1 } else { 0 };
            assert_eq!(census.pair_total(), expected_pair);
        }
    }
}
