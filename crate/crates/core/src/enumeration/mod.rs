//! Combinatorial types, strings and rigidity, and fibers of `ev` and `π`.
//!
//! The fiber search parametrizes a 3-valent curve by the unmarked tree `T`
//! of its image (ends of the degree, internal directions from balancing) and
//! the positions of its marks on the edges of `T`. Unknowns are the root
//! position, the bounded lengths of `T` and one position per placed item; the
//! linear system is grown edge by edge in post-order and abandoned as soon as
//! it loses rank, becomes inconsistent or forces a nonpositive length.
//! Rigid `ev` fibers instead propagate rays from the points through `T`,
//! which needs no elimination; the elimination route stays as a cross-check.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod flow;
mod system;
use system::{SearchSystem, Targets};

use crate::graph::{AbstractType, CanonicalForm, Flag, FlagId, Graph, GraphError, VertexId};
use crate::linalg::{format_rational, parse_rational, Rational, RowOutcome};
use crate::moduli_maps::{
    both_axes, contract_edge, ev_matrix, ft4_point, multiplicity, pi_matrix, Axis, CellCoordinates, M4Point, M4Ray,
    ModuliError,
};
use crate::plane::{scalar, Degree, Direction, PlaneCurve, PlaneError, PlaneType, Point};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnumerationError {
    #[error("configuration is not in general position: {0}")]
    GeneralPositionViolation(String),
    #[error("no configuration in general position after {0} attempts")]
    ResampleExhausted(usize),
    #[error("bad point configuration: {0}")]
    Config(String),
    #[error("fiber solution failed verification: {0}")]
    Verification(String),
    #[error("bounded edge {0} is not contracted")]
    NotContracted(usize),
    #[error(transparent)]
    Moduli(#[from] ModuliError),
    #[error(transparent)]
    Plane(#[from] PlaneError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

type Result<T, E = EnumerationError> = std::result::Result<T, E>;

// ---------------------------------------------------------------------------
// Type enumeration

/// Label of an end during tree construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum EndKey {
    Dir(Direction),
    Mark(usize),
}

/// A 3-valent tree under construction: internal vertices plus labeled leaves.
#[derive(Debug, Clone)]
struct LeafTree {
    internal: usize,
    inner: Vec<(usize, usize)>,
    leaves: Vec<(usize, EndKey)>,
}

impl LeafTree {
    fn star(keys: &[EndKey]) -> Self {
        LeafTree { internal: 1, inner: Vec::new(), leaves: keys.iter().map(|&k| (0, k)).collect() }
    }

    fn edge_count(&self) -> usize {
        self.inner.len() + self.leaves.len()
    }

    /// Subdivides edge `e` and hangs a new leaf from the new vertex.
    fn insert(&self, e: usize, key: EndKey) -> Self {
        let mut t = self.clone();
        let c = t.internal;
        t.internal += 1;
        if e < t.inner.len() {
            let (a, b) = t.inner[e];
            t.inner[e] = (a, c);
            t.inner.push((c, b));
        } else {
            let (u, k) = t.leaves[e - t.inner.len()];
            t.inner.push((u, c));
            t.leaves[e - self.inner.len()] = (c, k);
        }
        t.leaves.push((c, key));
        t
    }

    fn to_type(&self) -> (AbstractType, Vec<Option<EndKey>>) {
        let mut flags = Vec::new();
        let mut keys = Vec::new();
        for &(a, b) in &self.inner {
            let i = flags.len();
            flags.push(Flag { vertex: a, partner: Some(i + 1) });
            flags.push(Flag { vertex: b, partner: Some(i) });
            keys.extend([None, None]);
        }
        let mut marks = Vec::new();
        for &(v, k) in &self.leaves {
            if let EndKey::Mark(i) = k {
                marks.push((i, flags.len()));
            }
            flags.push(Flag { vertex: v, partner: None });
            keys.push(Some(k));
        }
        marks.sort();
        let g = Graph::new(self.internal, flags).expect("leaf trees are valid graphs");
        let ty = AbstractType::new(g, marks.into_iter().map(|(_, f)| f).collect()).expect("leaf trees are stable");
        (ty, keys)
    }

    fn canonical(&self) -> CanonicalForm<Direction> {
        let (ty, keys) = self.to_type();
        ty.canonical_form(|f| match keys[f] {
            Some(EndKey::Dir(d)) => d,
            _ => Direction::ZERO,
        })
    }
}

/// All 3-valent trees on the given leaf labels up to isomorphism.
fn leaf_trees(keys: &[EndKey]) -> Vec<LeafTree> {
    if keys.len() < 3 {
        return Vec::new();
    }
    let mut level = vec![LeafTree::star(&keys[..3])];
    for &k in &keys[3..] {
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for t in &level {
            for e in 0..t.edge_count() {
                let u = t.insert(e, k);
                if seen.insert(u.canonical()) {
                    next.push(u);
                }
            }
        }
        level = next;
    }
    level
}

fn plane_type_of(t: &LeafTree) -> PlaneType {
    let (ty, keys) = t.to_type();
    PlaneType::from_end_directions(ty, |f| match keys[f] {
        Some(EndKey::Dir(d)) => d,
        _ => Direction::ZERO,
    })
    .expect("ends of a degree sum to zero")
}

/// Every 3-valent `n`-marked plane type of the given degree, once per
/// isomorphism class. Types with contracted bounded edges are included.
pub fn enumerate_plane_types(degree: &Degree, n: usize) -> Vec<PlaneType> {
    let mut keys: Vec<EndKey> = degree.directions().iter().map(|&d| EndKey::Dir(d)).collect();
    keys.extend((0..n).map(EndKey::Mark));
    leaf_trees(&keys).iter().map(plane_type_of).collect()
}

/// Every `n`-marked abstract type (any valence), once per isomorphism class.
pub fn enumerate_abstract_types(n: usize) -> Vec<AbstractType> {
    let keys: Vec<EndKey> = (0..n).map(EndKey::Mark).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut queue: Vec<AbstractType> = leaf_trees(&keys).iter().map(|t| t.to_type().0).collect();
    while let Some(ty) = queue.pop() {
        if !seen.insert(ty.canonical_form(|_| ())) {
            continue;
        }
        let g = ty.graph();
        for e in 0..g.bounded_edge_count() {
            let (h, map) = g.contract(e);
            let marks = ty.marks().iter().map(|&m| map[m].expect("marks survive")).collect();
            queue.push(AbstractType::new(h, marks).expect("contraction keeps stability"));
        }
        out.push(ty);
    }
    out.sort_by_key(|t| t.codim());
    out
}

/// Plane types of `enumerate_plane_types` together with all their contractions.
pub fn enumerate_plane_types_all_codim(degree: &Degree, n: usize) -> Result<Vec<PlaneType>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut queue = enumerate_plane_types(degree, n);
    while let Some(t) = queue.pop() {
        if !seen.insert(t.canonical_form()) {
            continue;
        }
        for e in 0..t.graph().bounded_edge_count() {
            queue.push(contract_edge(&t, e)?);
        }
        out.push(t);
    }
    out.sort_by_key(|t| t.codim());
    Ok(out)
}

// ---------------------------------------------------------------------------
// Strings and multiplicity

/// Vertices carrying a marked end.
fn mark_vertices(t: &PlaneType) -> Vec<bool> {
    let g = t.graph();
    let mut at = vec![false; g.vertex_count()];
    for &m in t.marks() {
        at[g.vertex_of(m)] = true;
    }
    at
}

/// All strings: paths between two unmarked ends avoiding the closures of
/// marked ends, each given as `[end, bounded flags..., end]`.
pub fn strings(t: &PlaneType) -> Vec<Vec<FlagId>> {
    let g = t.graph();
    let marked = mark_vertices(t);
    let mut comp = vec![usize::MAX; g.vertex_count()];
    let mut count = 0;
    for s in 0..g.vertex_count() {
        if marked[s] || comp[s] != usize::MAX {
            continue;
        }
        comp[s] = count;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &f in g.flags_at(v) {
                if let Some(w) = g.across(f) {
                    if !marked[w] && comp[w] == usize::MAX {
                        comp[w] = count;
                        stack.push(w);
                    }
                }
            }
        }
        count += 1;
    }
    let mut ends: Vec<Vec<FlagId>> = vec![Vec::new(); count];
    for f in t.abstract_type().unmarked_ends() {
        let v = g.vertex_of(f);
        if !marked[v] {
            ends[comp[v]].push(f);
        }
    }
    let mut out = Vec::new();
    for group in ends {
        for (i, &e1) in group.iter().enumerate() {
            for &e2 in &group[i + 1..] {
                let mut path = vec![e1];
                path.extend(g.path(g.vertex_of(e1), g.vertex_of(e2)));
                path.push(e2);
                out.push(path);
            }
        }
    }
    out
}

/// Some string of `t`, if any.
pub fn find_string(t: &PlaneType) -> Option<Vec<FlagId>> {
    strings(t).into_iter().next()
}

pub fn is_rigid(t: &PlaneType) -> bool {
    find_string(t).is_none()
}

/// 0 when a string exists, else the product of `|det(v1,v2)|` over the
/// vertices not adjacent to a marked end. Requires a 3-valent type.
pub fn curve_multiplicity(t: &PlaneType) -> u64 {
    if !is_rigid(t) {
        return 0;
    }
    let g = t.graph();
    let marked = mark_vertices(t);
    (0..g.vertex_count())
        .filter(|&v| !marked[v])
        .map(|v| {
            let f = g.flags_at(v);
            t.dir(f[0]).det(t.dir(f[1])).unsigned_abs()
        })
        .product()
}

// ---------------------------------------------------------------------------
// Point configurations

/// Points `p_1..p_n` for `ev`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvConfig {
    pub points: Vec<Point>,
}

/// Target of `π`: `a = ev_1^1`, `b = ev_2^2`, points for `x_3..x_n`, and `ft_4`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiConfig {
    pub a: Rational,
    pub b: Rational,
    pub points: Vec<Point>,
    pub z: M4Point,
}

impl PiConfig {
    pub fn marks(&self) -> usize {
        self.points.len() + 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    Ev,
    Pi,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PointConfig {
    Ev(EvConfig),
    Pi(PiConfig),
}

impl PointConfig {
    pub fn kind(&self) -> MapKind {
        match self {
            PointConfig::Ev(_) => MapKind::Ev,
            PointConfig::Pi(_) => MapKind::Pi,
        }
    }

    /// Right-hand side of the cell map equations, in the row order of
    /// `ev_matrix(both_axes)` resp. `pi_matrix`.
    pub fn target(&self) -> Vec<Rational> {
        match self {
            PointConfig::Ev(c) => c.points.iter().flat_map(|p| [p.x.clone(), p.y.clone()]).collect(),
            PointConfig::Pi(c) => {
                let mut v = vec![c.a.clone(), c.b.clone()];
                v.extend(c.points.iter().flat_map(|p| [p.x.clone(), p.y.clone()]));
                v.push(c.z.length.clone());
                v
            }
        }
    }

    pub fn to_json(&self) -> ConfigJson {
        match self {
            PointConfig::Ev(c) => ConfigJson { points: c.points.iter().map(Point::to_strings).collect(), m4: None },
            PointConfig::Pi(c) => {
                let zero = Rational::zero();
                let mut points = vec![
                    Point::new(c.a.clone(), zero.clone()).to_strings(),
                    Point::new(zero, c.b.clone()).to_strings(),
                ];
                points.extend(c.points.iter().map(Point::to_strings));
                let m4 = M4Json { ray: c.z.ray.to_string(), length: format_rational(&c.z.length) };
                ConfigJson { points, m4: Some(m4) }
            }
        }
    }

    /// Reads a configuration; with an `m4` block the first two points only
    /// contribute `p_1.x` and `p_2.y`.
    pub fn from_json(j: &ConfigJson) -> Result<Self> {
        let points = j.points.iter().map(Point::parse).collect::<Result<Vec<_>, _>>()?;
        let Some(m4) = &j.m4 else {
            return Ok(PointConfig::Ev(EvConfig { points }));
        };
        if points.len() < 4 {
            return Err(EnumerationError::Config(format!("π needs at least 4 points, got {}", points.len())));
        }
        let ray = M4Ray::parse(&m4.ray).ok_or_else(|| EnumerationError::Config(format!("unknown ray {}", m4.ray)))?;
        let length = parse_rational(&m4.length).map_err(|e| EnumerationError::Config(e.to_string()))?;
        let z = M4Point::new(ray, length)
            .ok_or_else(|| EnumerationError::Config("ray D needs length 0, rays A-C a positive length".into()))?;
        Ok(PointConfig::Pi(PiConfig {
            a: points[0].x.clone(),
            b: points[1].y.clone(),
            points: points[2..].to_vec(),
            z,
        }))
    }
}

/// Wire form of a point configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigJson {
    pub points: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m4: Option<M4Json>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct M4Json {
    pub ray: String,
    pub length: String,
}

const COORD_RANGE: i64 = 1_000_000;

/// Primes in `[lo, ..)`, `count` of them.
fn primes_from(lo: u64, count: usize) -> Vec<u64> {
    (lo..).filter(|&p| p > 1 && (2..).take_while(|q| q * q <= p).all(|q| p % q != 0)).take(count).collect()
}

/// `count` rationals `k / p` with `k` uniform in `[-10^6, 10^6]` and pairwise distinct primes `p`.
fn random_coordinates(rng: &mut impl Rng, count: usize) -> Vec<Rational> {
    let mut primes = primes_from(1009, 4 * count + 8);
    primes.shuffle(rng);
    primes
        .into_iter()
        .take(count)
        .map(|p| Rational::new(BigInt::from(rng.gen_range(-COORD_RANGE..=COORD_RANGE)), BigInt::from(p)))
        .collect()
}

fn random_points(rng: &mut impl Rng, count: usize) -> Vec<Point> {
    let c = random_coordinates(rng, 2 * count);
    c.chunks(2).map(|xy| Point::new(xy[0].clone(), xy[1].clone())).collect()
}

/// `|Δ| - 1` random points.
pub fn random_ev_config(degree: &Degree, rng: &mut impl Rng) -> EvConfig {
    EvConfig { points: random_points(rng, degree.len().saturating_sub(1)) }
}

/// Largest coordinate of a direction that can occur in a type of this degree.
pub fn max_direction_entry(degree: &Degree) -> i64 {
    let sum = |f: fn(&Direction) -> i64| degree.directions().iter().map(f).filter(|&x| x > 0).sum::<i64>();
    [sum(|d| d.x), sum(|d| -d.x), sum(|d| d.y), sum(|d| -d.y)].into_iter().max().unwrap_or(0)
}

/// `4 · diam · max|direction entry| + 1` with the L1 diameter of the
/// points `(a, b), p_3, ..., p_n`.
pub fn large_length(degree: &Degree, a: &Rational, b: &Rational, points: &[Point]) -> Rational {
    let mut all = vec![Point::new(a.clone(), b.clone())];
    all.extend(points.iter().cloned());
    let mut diam = Rational::zero();
    for p in &all {
        for q in &all {
            let d = (&p.x - &q.x).abs() + (&p.y - &q.y).abs();
            if d > diam {
                diam = d;
            }
        }
    }
    Rational::from_integer(4.into()) * diam * scalar(max_direction_entry(degree)) + Rational::one()
}

/// Random `π` configuration for `|Δ|` marks; `length` defaults to `large_length`.
pub fn random_pi_config(degree: &Degree, ray: M4Ray, length: Option<Rational>, rng: &mut impl Rng) -> PiConfig {
    let ab = random_coordinates(rng, 2);
    let points = random_points(rng, degree.len().saturating_sub(2));
    let length = length.unwrap_or_else(|| large_length(degree, &ab[0], &ab[1], &points));
    PiConfig {
        a: ab[0].clone(),
        b: ab[1].clone(),
        points,
        z: M4Point::new(ray, length).expect("positive length on A-C"),
    }
}

// ---------------------------------------------------------------------------
// Fiber search

/// A curve in the fiber together with its standard cell coordinates and multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberSolution {
    pub curve: PlaneCurve,
    pub coords: Vec<Rational>,
    pub mult: u64,
}

impl FiberSolution {
    pub fn plane_type(&self) -> &PlaneType {
        self.curve.plane_type()
    }
}

/// A unit placed on one edge of the image tree.
#[derive(Debug, Clone)]
struct Item {
    /// Marks sitting at this unit's vertex (two for the pair `{x_1, x_2}`).
    marks: Vec<usize>,
    /// Conditions on the unit's position, as indices into the target vector.
    rows: Vec<(Axis, usize)>,
    /// Whether the unit carries one of `x_1..x_4`.
    quartet: bool,
}

impl Item {
    /// Unknowns minus conditions: a position (plus a contracted length for a pair) against its rows.
    fn balance(&self) -> i64 {
        self.marks.len() as i64 - self.rows.len() as i64
    }
}

/// Edge of the image tree seen from the root: the flag at the vertex nearer the root.
#[derive(Debug, Clone)]
struct Slot {
    flag: FlagId,
    vertex: VertexId,
    bounded: Option<usize>,
    dir: Direction,
    ends_below: usize,
    /// Slots directly below (empty for ends).
    children: Vec<usize>,
}

/// A functional that must stay positive: a length, a mark position, or the rest of an edge beyond a mark.
type Condition = [(usize, i64); 2];

struct Search<'a> {
    tree: &'a PlaneType,
    slots: Vec<Slot>,
    /// `(edge, direction)` along the path from the root to each vertex.
    paths: Vec<Vec<(usize, Direction)>>,
    items: Vec<Item>,
    kind: MapKind,
    pair: bool,
    edge_cols: usize,
    target: &'a [Rational],
    targets: &'a Targets,
    z: Option<&'a M4Point>,
    marks: usize,
}

#[derive(Clone)]
struct State {
    system: SearchSystem,
    placed: Vec<Vec<usize>>,
    slot_of: Vec<Option<usize>>,
    /// Marks in the closed subtree of each finished slot.
    closed: Vec<usize>,
    /// Unknowns minus conditions of the items in each finished closed subtree.
    item_balance: Vec<i64>,
    /// Largest total deficit over sets of disjoint closed subtrees within each finished slot.
    worst: Vec<i64>,
    /// Positivity conditions not yet decided by the system.
    pending: Vec<Condition>,
}

impl<'a> Search<'a> {
    fn new(tree: &'a PlaneType, items: Vec<Item>, cfg: &'a Prepared) -> Self {
        let pair = items.iter().any(|i| i.marks.len() == 2);
        let marks = items.iter().map(|i| i.marks.len()).sum();
        let g = tree.graph();
        let mut slots = Vec::new();
        let mut paths = vec![Vec::new(); g.vertex_count()];
        Self::visit(tree, 0, None, &mut slots, &mut paths);
        Search {
            tree,
            slots,
            paths,
            items,
            kind: cfg.kind,
            pair,
            edge_cols: g.bounded_edge_count(),
            target: &cfg.target,
            targets: &cfg.targets,
            z: cfg.z.as_ref(),
            marks,
        }
    }

    // Post-order slots below vertex `v`; returns their indices for the children list.
    fn visit(
        tree: &PlaneType,
        v: VertexId,
        incoming: Option<FlagId>,
        slots: &mut Vec<Slot>,
        paths: &mut Vec<Vec<(usize, Direction)>>,
    ) -> Vec<usize> {
        let g = tree.graph();
        let mut mine = Vec::new();
        for &f in g.flags_at(v) {
            if Some(f) == incoming {
                continue;
            }
            let (children, bounded, ends_below) = match g.partner(f) {
                None => (Vec::new(), None, 1),
                Some(p) => {
                    let w = g.vertex_of(p);
                    let e = g.bounded_index(f).expect("bounded");
                    let mut path = paths[v].clone();
                    path.push((e, tree.dir(f)));
                    paths[w] = path;
                    let children = Self::visit(tree, w, Some(p), slots, paths);
                    let below = children.iter().map(|&c| slots[c].ends_below).sum();
                    (children, Some(e), below)
                }
            };
            slots.push(Slot { flag: f, vertex: v, bounded, dir: tree.dir(f), ends_below, children });
            mine.push(slots.len() - 1);
        }
        mine
    }

    fn cols(&self) -> usize {
        2 + self.edge_cols + self.items.len() + usize::from(self.pair)
    }

    fn item_col(&self, i: usize) -> usize {
        2 + self.edge_cols + i
    }

    fn pair_col(&self) -> usize {
        2 + self.edge_cols + self.items.len()
    }

    fn initial(&self) -> State {
        let pending = (0..self.edge_cols).map(|e| [(2 + e, 1), (0, 0)]).collect();
        State {
            system: SearchSystem::new(self.cols(), self.targets),
            placed: vec![Vec::new(); self.slots.len()],
            slot_of: vec![None; self.items.len()],
            closed: vec![0; self.slots.len()],
            item_balance: vec![0; self.slots.len()],
            worst: vec![0; self.slots.len()],
            pending,
        }
    }

    fn item_row(&self, slot: &Slot, item: usize, axis: Axis) -> Vec<i64> {
        let pick = |d: Direction| match axis {
            Axis::X => d.x,
            Axis::Y => d.y,
        };
        let mut row = vec![0; self.cols()];
        row[axis as usize] = 1;
        for &(e, d) in &self.paths[slot.vertex] {
            row[2 + e] = pick(d);
        }
        row[self.item_col(item)] = pick(slot.dir);
        row
    }

    /// Places `item` on slot `s`; `None` when the partial system must be abandoned.
    fn place(&self, state: &State, s: usize, item: usize) -> Result<Option<State>> {
        let slot = &self.slots[s];
        let mut next = state.clone();
        for &(axis, target) in &self.items[item].rows {
            if next.system.push(&self.item_row(slot, item, axis), target, self.targets) != RowOutcome::Independent {
                return Ok(None);
            }
        }
        next.placed[s].push(item);
        next.slot_of[item] = Some(s);
        next.pending.push([(self.item_col(item), 1), (0, 0)]);
        if let Some(e) = slot.bounded {
            next.pending.push([(2 + e, 1), (self.item_col(item), -1)]);
        }
        if !self.still_positive(&mut next)? {
            return Ok(None);
        }
        Ok(Some(next))
    }

    // Determined values never change as rows are added, so decided conditions are dropped.
    fn still_positive(&self, state: &mut State) -> Result<bool> {
        let mut undecided = Vec::with_capacity(state.pending.len());
        for f in std::mem::take(&mut state.pending) {
            match state.system.determined_sign(&f, self.targets) {
                Some(Ordering::Equal) => {
                    return Err(EnumerationError::GeneralPositionViolation(
                        "a length or position is forced to zero".into(),
                    ))
                }
                Some(Ordering::Less) => return Ok(false),
                Some(Ordering::Greater) => {}
                None => undecided.push(f),
            }
        }
        state.pending = undecided;
        Ok(true)
    }

    fn run(&self) -> Result<Vec<FiberSolution>> {
        let mut out = Vec::new();
        self.slot_step(0, self.initial(), &mut out)?;
        Ok(out)
    }

    fn slot_step(&self, s: usize, state: State, out: &mut Vec<FiberSolution>) -> Result<()> {
        if s == self.slots.len() {
            return self.finish(state, out);
        }
        self.choose(s, 0, state, out)
    }

    // Chooses the items of slot `s` in increasing index order, starting at `from`.
    fn choose(&self, s: usize, from: usize, state: State, out: &mut Vec<FiberSolution>) -> Result<()> {
        let slot = &self.slots[s];
        let count = state.placed[s].len();
        let inside: usize = slot.children.iter().map(|&c| state.closed[c]).sum();
        if self.kind == MapKind::Ev {
            // rigid: every subtree with k ends holds k-1 or k marks, one per edge
            let k = slot.ends_below;
            let fits = match (inside + 1 == k, inside == k) {
                (true, _) => count <= 1,
                (_, true) => count == 0,
                _ => false,
            };
            if !fits {
                return Ok(());
            }
        }
        // Unknowns of a closed subtree (its k-1 bounded lengths and the item
        // unknowns) occur only in its own conditions and in the ft4 row, so a
        // nonsingular system allows a total deficit of at most one (none for ev).
        let bound = if self.kind == MapKind::Ev { 0 } else { 1 };
        let balance = slot.children.iter().map(|&c| state.item_balance[c]).sum::<i64>()
            + state.placed[s].iter().map(|&i| self.items[i].balance()).sum::<i64>();
        let deficit = slot.ends_below as i64 - 1 + balance;
        let worst = deficit.max(slot.children.iter().map(|&c| state.worst[c]).sum()).max(0);
        if worst <= bound {
            let mut done = state.clone();
            done.closed[s] = inside + state.placed[s].iter().map(|&i| self.items[i].marks.len()).sum::<usize>();
            done.item_balance[s] = balance;
            done.worst[s] = worst;
            self.slot_step(s + 1, done, out)?;
        }
        if self.kind == MapKind::Ev && count == 1 {
            return Ok(());
        }
        for item in from..self.items.len() {
            if state.slot_of[item].is_some() {
                continue;
            }
            if let Some(next) = self.place(&state, s, item)? {
                self.choose(s, item + 1, next, out)?;
            }
        }
        Ok(())
    }

    fn finish(&self, state: State, out: &mut Vec<FiberSolution>) -> Result<()> {
        if state.slot_of.iter().any(Option::is_none) {
            return Ok(());
        }
        let bound = if self.kind == MapKind::Ev { 0 } else { 1 };
        let roots = self.slots.iter().enumerate().filter(|(_, sl)| sl.vertex == 0).map(|(i, _)| state.worst[i]);
        if roots.sum::<i64>() > bound {
            return Ok(());
        }
        match self.kind {
            MapKind::Ev => {
                if let Some(sol) = state.system.unique_solution(self.targets) {
                    self.accept(&state, sol, Vec::new(), out)?;
                }
                Ok(())
            }
            MapKind::Pi => self.finish_pi(state, out),
        }
    }

    fn finish_pi(&self, state: State, out: &mut Vec<FiberSolution>) -> Result<()> {
        let z = self.z.expect("π search has a target in M4");
        let quartet_on: Vec<Vec<usize>> = state
            .placed
            .iter()
            .map(|items| items.iter().copied().filter(|&i| self.items[i].quartet).collect())
            .collect();
        for order in orderings(&quartet_on) {
            let Some((ray, functional)) = self.ft4_functional(&order) else { continue };
            if ray != z.ray {
                continue;
            }
            let mut row = vec![0; self.cols()];
            for (c, k) in functional {
                row[c] += k;
            }
            let mut system = state.system.clone();
            if system.push(&row, self.targets.len() - 1, self.targets) != RowOutcome::Independent {
                continue;
            }
            if let Some(sol) = system.unique_solution(self.targets) {
                let mut st = state.clone();
                st.system = system;
                self.accept(&st, sol, order, out)?;
            }
        }
        Ok(())
    }

    /// Quartet marks in the subtree strictly below each slot.
    fn quartet_below(&self, order: &[Vec<usize>]) -> Vec<Vec<usize>> {
        let mut below: Vec<Vec<usize>> = vec![Vec::new(); self.slots.len()];
        for s in 0..self.slots.len() {
            let mut acc = Vec::new();
            for &c in &self.slots[s].children {
                acc.extend(below[c].iter().copied());
                acc.extend(order[c].iter().flat_map(|&i| self.quartet_marks(i)));
            }
            below[s] = acc;
        }
        below
    }

    fn quartet_marks(&self, item: usize) -> impl Iterator<Item = usize> + '_ {
        self.items[item].marks.iter().copied().filter(|&m| m < 4)
    }

    /// Ray and `ft_4` functional for the given order of quartet units on each slot.
    fn ft4_functional(&self, order: &[Vec<usize>]) -> Option<(M4Ray, Vec<(usize, i64)>)> {
        let below = self.quartet_below(order);
        let mut ray = None;
        let mut functional = Vec::new();
        let mut record = |beyond: &[usize], form: Vec<(usize, i64)>| -> bool {
            if beyond.len() != 2 {
                return true;
            }
            let partner = if beyond.contains(&0) {
                beyond.iter().copied().find(|&m| m != 0).expect("two marks")
            } else {
                (1..4).find(|m| !beyond.contains(m)).expect("one of 1..3 is missing")
            };
            let r = match partner {
                1 => M4Ray::A,
                2 => M4Ray::B,
                _ => M4Ray::C,
            };
            let consistent = ray.is_none_or(|x| x == r);
            ray = Some(r);
            functional.extend(form);
            consistent
        };
        for (s, slot) in self.slots.iter().enumerate() {
            let units = &order[s];
            let col = |i: usize| self.item_col(units[i]);
            for j in 0..=units.len() {
                let mut beyond: Vec<usize> = units[j..].iter().flat_map(|&i| self.quartet_marks(i)).collect();
                let far_bounded = slot.bounded.is_some();
                if far_bounded {
                    beyond.extend(below[s].iter().copied());
                } else if j == units.len() {
                    continue;
                }
                let mut form = Vec::new();
                match (j, j == units.len()) {
                    (0, true) => form.push((2 + slot.bounded.expect("bounded"), 1)),
                    (0, false) => form.push((col(0), 1)),
                    (_, false) => form.extend([(col(j), 1), (col(j - 1), -1)]),
                    (_, true) => form.extend([(2 + slot.bounded.expect("bounded"), 1), (col(j - 1), -1)]),
                }
                if !record(&beyond, form) {
                    return None;
                }
            }
        }
        if self.pair && !record(&[0, 1], vec![(self.pair_col(), 1)]) {
            return None;
        }
        Some((ray.unwrap_or(M4Ray::D), functional))
    }

    fn value(sol: &[Rational], f: &[(usize, i64)]) -> Rational {
        f.iter().map(|&(c, k)| &sol[c] * scalar(k)).sum()
    }

    fn accept(
        &self,
        state: &State,
        sol: Vec<Rational>,
        order: Vec<Vec<usize>>,
        out: &mut Vec<FiberSolution>,
    ) -> Result<()> {
        let mut positive: Vec<Vec<(usize, i64)>> = (0..self.edge_cols).map(|e| vec![(2 + e, 1)]).collect();
        for (slot, items) in self.slots.iter().zip(&state.placed) {
            for &i in items {
                positive.push(vec![(self.item_col(i), 1)]);
                if let Some(e) = slot.bounded {
                    positive.push(vec![(2 + e, 1), (self.item_col(i), -1)]);
                }
            }
        }
        if self.pair {
            positive.push(vec![(self.pair_col(), 1)]);
        }
        for f in &positive {
            let v = Self::value(&sol, f);
            if v.is_zero() {
                return Err(EnumerationError::GeneralPositionViolation("solution on a cell boundary".into()));
            }
            if v.is_negative() {
                return Ok(());
            }
        }
        let mut sorted = state.placed.clone();
        for (s, items) in sorted.iter_mut().enumerate() {
            items.sort_by(|&i, &j| sol[self.item_col(i)].cmp(&sol[self.item_col(j)]));
            if items.windows(2).any(|w| sol[self.item_col(w[0])] == sol[self.item_col(w[1])]) {
                return Err(EnumerationError::GeneralPositionViolation("two marks at one point".into()));
            }
            if self.kind == MapKind::Pi {
                let q: Vec<usize> = items.iter().copied().filter(|&i| self.items[i].quartet).collect();
                if q != order[s] {
                    return Ok(());
                }
            }
        }
        let curve = self.build(&sol, &sorted)?;
        out.push(self.verify(curve)?);
        Ok(())
    }

    fn build(&self, sol: &[Rational], sorted: &[Vec<usize>]) -> Result<PlaneCurve> {
        let g = self.tree.graph();
        let mut b = Builder::new(g.vertex_count(), self.marks);
        for (s, slot) in self.slots.iter().enumerate() {
            let mut cur = slot.vertex;
            let mut prev = Rational::zero();
            for &i in &sorted[s] {
                let t = &sol[self.item_col(i)];
                let m = b.vertex();
                b.bounded(cur, m, slot.dir, t - &prev);
                let marks = &self.items[i].marks;
                if marks.len() == 1 {
                    b.mark(m, marks[0]);
                } else {
                    let v = b.vertex();
                    b.bounded(m, v, Direction::ZERO, sol[self.pair_col()].clone());
                    for &mk in marks {
                        b.mark(v, mk);
                    }
                }
                cur = m;
                prev = t.clone();
            }
            match slot.bounded {
                Some(e) => {
                    let w = g.vertex_of(g.partner(slot.flag).expect("bounded"));
                    b.bounded(cur, w, slot.dir, &sol[2 + e] - &prev);
                }
                None => {
                    b.end(cur, slot.dir);
                }
            }
        }
        b.finish(Point::new(sol[0].clone(), sol[1].clone()))
    }

    fn verify(&self, curve: PlaneCurve) -> Result<FiberSolution> {
        let t = curve.plane_type();
        let cm = match self.kind {
            MapKind::Ev => ev_matrix(t, &both_axes(0..self.marks))?,
            MapKind::Pi => pi_matrix(t, self.marks / 3)?,
        };
        let coords = CellCoordinates::standard(curve.graph()).values(&curve);
        if cm.matrix.mul_vec(&coords).map_err(ModuliError::from)? != self.target {
            return Err(EnumerationError::Verification("cell map does not hit the target".into()));
        }
        if let Some(z) = self.z {
            if ft4_point(&curve)? != *z {
                return Err(EnumerationError::Verification("ft4 image differs from the target".into()));
            }
        }
        let mult = multiplicity(&cm)?;
        if mult == 0 {
            return Err(EnumerationError::Verification("solution on a cell where the map is not injective".into()));
        }
        Ok(FiberSolution { curve, coords, mult })
    }
}

/// Every combination of permutations of the given per-slot lists.
fn orderings(lists: &[Vec<usize>]) -> Vec<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for l in lists {
        let perms = permutations(l);
        out = out
            .into_iter()
            .flat_map(|prefix| {
                perms.iter().map(move |p| {
                    let mut v = prefix.clone();
                    v.push(p.clone());
                    v
                })
            })
            .collect();
    }
    out
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let first = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, first);
            out.push(p);
        }
    }
    out
}

/// Incremental construction of a plane curve; bounded edges are numbered in
/// the order they are added.
struct Builder {
    vertices: usize,
    flags: Vec<Flag>,
    dirs: Vec<Direction>,
    lengths: Vec<Rational>,
    marks: Vec<Option<FlagId>>,
}

impl Builder {
    fn new(vertices: usize, marks: usize) -> Self {
        Builder { vertices, flags: Vec::new(), dirs: Vec::new(), lengths: Vec::new(), marks: vec![None; marks] }
    }

    fn vertex(&mut self) -> VertexId {
        self.vertices += 1;
        self.vertices - 1
    }

    fn bounded(&mut self, u: VertexId, w: VertexId, dir: Direction, length: Rational) {
        let i = self.flags.len();
        self.flags.push(Flag { vertex: u, partner: Some(i + 1) });
        self.flags.push(Flag { vertex: w, partner: Some(i) });
        self.dirs.extend([dir, -dir]);
        self.lengths.push(length);
    }

    fn end(&mut self, u: VertexId, dir: Direction) -> FlagId {
        self.flags.push(Flag { vertex: u, partner: None });
        self.dirs.push(dir);
        self.flags.len() - 1
    }

    fn mark(&mut self, u: VertexId, label: usize) {
        let f = self.end(u, Direction::ZERO);
        self.marks[label] = Some(f);
    }

    fn finish(self, root_pos: Point) -> Result<PlaneCurve> {
        let g = Graph::new(self.vertices, self.flags)?;
        let marks = self.marks.into_iter().map(|m| m.expect("every mark placed")).collect();
        let t = PlaneType::new(AbstractType::new(g, marks)?, self.dirs)?;
        Ok(PlaneCurve::new(t, self.lengths, 0, root_pos)?)
    }
}

/// Per-configuration data shared by all searches.
struct Prepared {
    kind: MapKind,
    target: Vec<Rational>,
    targets: Targets,
    z: Option<M4Point>,
}

fn has_degenerate_vertex(t: &PlaneType) -> bool {
    let g = t.graph();
    (0..g.vertex_count()).any(|v| {
        let f = g.flags_at(v);
        t.dir(f[0]).det(t.dir(f[1])) == 0
    })
}

/// Solutions of `ev = cfg` (`|Δ| - 1` points) or `π = cfg` (projective
/// degree, `3d` marks), each verified against the cell map of its type and
/// listed once per isomorphism class, sorted by canonical form.
pub fn fiber(degree: &Degree, cfg: &PointConfig) -> Result<Vec<FiberSolution>> {
    fiber_with(degree, cfg, Route::Flow)
}

/// How `ev` fibers are solved; `π` always uses elimination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    Flow,
    #[cfg_attr(not(test), allow(dead_code))]
    Elimination,
}

fn fiber_with(degree: &Degree, cfg: &PointConfig, route: Route) -> Result<Vec<FiberSolution>> {
    let prepared = Prepared {
        kind: cfg.kind(),
        target: cfg.target(),
        targets: Targets::new(cfg.target()),
        z: match cfg {
            PointConfig::Pi(c) => Some(c.z.clone()),
            PointConfig::Ev(_) => None,
        },
    };
    let trees = enumerate_plane_types(degree, 0);
    let jobs: Vec<(&PlaneType, Vec<Item>)> = match cfg {
        PointConfig::Ev(c) => {
            if c.points.len() + 1 != degree.len() {
                return Err(EnumerationError::Config(format!(
                    "ev needs {} points for this degree, got {}",
                    degree.len().saturating_sub(1),
                    c.points.len()
                )));
            }
            let items: Vec<Item> = (0..c.points.len())
                .map(|i| Item { marks: vec![i], rows: vec![(Axis::X, 2 * i), (Axis::Y, 2 * i + 1)], quartet: i < 4 })
                .collect();
            trees
                .iter()
                .filter(|t| t.contracted_bounded_edges().is_empty() && !has_degenerate_vertex(t))
                .map(|t| (t, items.clone()))
                .collect()
        }
        PointConfig::Pi(c) => {
            let d = degree
                .projective_degree()
                .filter(|&d| d >= 2)
                .ok_or_else(|| EnumerationError::Config("π is defined for projective degrees d >= 2".into()))?;
            if c.marks() != 3 * d {
                return Err(EnumerationError::Config(format!("π needs {} marks, got {}", 3 * d, c.marks())));
            }
            // targets: a, b, then both coordinates of x_3..x_n, then the ft4 length
            let single = |m: usize, rows: Vec<(Axis, usize)>| Item { marks: vec![m], rows, quartet: m < 4 };
            let mut rest: Vec<Item> =
                (2..c.marks()).map(|m| single(m, vec![(Axis::X, 2 * m - 2), (Axis::Y, 2 * m - 1)])).collect();
            let mut singles = vec![single(0, vec![(Axis::X, 0)]), single(1, vec![(Axis::Y, 1)])];
            singles.extend(rest.iter().cloned());
            let pair = Item { marks: vec![0, 1], rows: vec![(Axis::X, 0), (Axis::Y, 1)], quartet: true };
            rest.insert(0, pair);
            let mut jobs = Vec::new();
            for t in &trees {
                let contracted = t.contracted_bounded_edges().len();
                if contracted <= 1 {
                    jobs.push((t, singles.clone()));
                }
                if contracted == 0 && c.z.ray == M4Ray::A {
                    jobs.push((t, rest.clone()));
                }
            }
            jobs
        }
    };
    let found: Vec<Vec<FiberSolution>> = jobs
        .into_par_iter()
        .map(|(t, items)| {
            let search = Search::new(t, items, &prepared);
            match (cfg, route) {
                (PointConfig::Ev(c), Route::Flow) => flow::Flow::new(&search, &c.points).solve(),
                _ => search.run(),
            }
        })
        .collect::<Result<_>>()?;
    let mut unique = BTreeMap::new();
    for s in found.into_iter().flatten() {
        unique.entry(s.plane_type().canonical_form()).or_insert(s);
    }
    Ok(unique.into_values().collect())
}

/// `deg = Σ mult` over a fiber.
pub fn fiber_degree(solutions: &[FiberSolution]) -> u64 {
    solutions.iter().map(|s| s.mult).sum()
}

/// The degree of `ev` or `π` at `cfg`.
pub fn degree(degree: &Degree, cfg: &PointConfig) -> Result<u64> {
    Ok(fiber_degree(&fiber(degree, cfg)?))
}

pub const MAX_ATTEMPTS: usize = 20;

/// What to sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    Ev,
    /// `ft_4` target on `ray` at `scale` times `large_length`.
    Pi {
        ray: M4Ray,
        scale: u32,
    },
}

/// Draws configurations until one is in general position.
pub fn sample_fiber(
    degree: &Degree,
    request: &Request,
    rng: &mut impl Rng,
) -> Result<(PointConfig, Vec<FiberSolution>)> {
    for _ in 0..MAX_ATTEMPTS {
        let cfg = match request {
            Request::Ev => PointConfig::Ev(random_ev_config(degree, rng)),
            Request::Pi { ray, scale } => {
                let mut c = random_pi_config(degree, *ray, None, rng);
                c.z.length *= scalar(i64::from(*scale));
                PointConfig::Pi(c)
            }
        };
        match fiber(degree, &cfg) {
            Ok(sols) => return Ok((cfg, sols)),
            Err(EnumerationError::GeneralPositionViolation(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(EnumerationError::ResampleExhausted(MAX_ATTEMPTS))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One sampled degree of `π`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvarianceSample {
    pub ray: M4Ray,
    pub length: Rational,
    pub degree: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvarianceReport {
    pub samples: Vec<InvarianceSample>,
}

impl InvarianceReport {
    /// The common degree, if all samples agree.
    pub fn common_degree(&self) -> Option<u64> {
        let first = self.samples.first()?.degree;
        self.samples.iter().all(|s| s.degree == first).then_some(first)
    }
}

/// `trials` configurations per ray A, B, C, each evaluated at `large_length`
/// and at twice that length.
pub fn invariance_check(d: usize, trials: usize, seed: u64) -> Result<InvarianceReport> {
    let degree = Degree::projective(d);
    let mut rng = rng_from_seed(seed);
    let mut samples = Vec::new();
    for ray in [M4Ray::A, M4Ray::B, M4Ray::C] {
        for _ in 0..trials {
            samples.extend(sample_with_doubling(&degree, ray, &mut rng)?);
        }
    }
    Ok(InvarianceReport { samples })
}

/// Degrees of one general configuration at `large_length` and twice it.
pub fn sample_with_doubling(degree: &Degree, ray: M4Ray, rng: &mut impl Rng) -> Result<Vec<InvarianceSample>> {
    'attempt: for _ in 0..MAX_ATTEMPTS {
        let base = random_pi_config(degree, ray, None, rng);
        let mut out = Vec::new();
        for scale in [1, 2] {
            let mut c = base.clone();
            c.z.length *= scalar(scale);
            match self::degree(degree, &PointConfig::Pi(c.clone())) {
                Ok(deg) => out.push(InvarianceSample { ray, length: c.z.length, degree: deg }),
                Err(EnumerationError::GeneralPositionViolation(_)) => continue 'attempt,
                Err(e) => return Err(e),
            }
        }
        return Ok(out);
    }
    Err(EnumerationError::ResampleExhausted(MAX_ATTEMPTS))
}

// ---------------------------------------------------------------------------
// Reducible curves

/// The two components of a curve cut at a contracted bounded edge. Each
/// component carries its original marks in increasing order followed by the
/// glue point as its last mark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub first: PlaneCurve,
    pub second: PlaneCurve,
    /// Original indices of the non-glue marks of `first` resp. `second`.
    pub first_marks: Vec<usize>,
    pub second_marks: Vec<usize>,
}

impl Split {
    /// Joins the glue points by a contracted edge of the given length.
    pub fn reglue(&self, length: Rational) -> Result<PlaneCurve> {
        let (c1, c2) = (&self.first, &self.second);
        if c1.mark_position(self.first_marks.len()) != c2.mark_position(self.second_marks.len()) {
            return Err(EnumerationError::Verification("glue points of the components differ".into()));
        }
        let (g1, g2) = (c1.graph(), c2.graph());
        let shift_v = g1.vertex_count();
        let shift_f = g1.flags().len();
        let glue1 = *c1.plane_type().marks().last().expect("glue mark");
        let glue2 = *c2.plane_type().marks().last().expect("glue mark");
        let mut flags: Vec<Flag> = g1.flags().to_vec();
        flags.extend(
            g2.flags().iter().map(|f| Flag { vertex: f.vertex + shift_v, partner: f.partner.map(|p| p + shift_f) }),
        );
        flags[glue1].partner = Some(glue2 + shift_f);
        flags[glue2 + shift_f].partner = Some(glue1);
        let mut dirs = c1.plane_type().directions().to_vec();
        dirs.extend_from_slice(c2.plane_type().directions());
        let n = self.first_marks.len() + self.second_marks.len();
        let mut marks = vec![0; n];
        for (i, &m) in self.first_marks.iter().enumerate() {
            marks[m] = c1.plane_type().marks()[i];
        }
        for (i, &m) in self.second_marks.iter().enumerate() {
            marks[m] = c2.plane_type().marks()[i] + shift_f;
        }
        let g = Graph::new(shift_v + g2.vertex_count(), flags)?;
        let t = PlaneType::new(AbstractType::new(g, marks)?, dirs)?;
        let mut lengths = vec![Rational::zero(); t.graph().bounded_edge_count()];
        for (e, &(a, _)) in t.graph().bounded_edges().iter().enumerate() {
            lengths[e] = if a == glue1 {
                length.clone()
            } else if a < shift_f {
                c1.lengths()[g1.bounded_index(a).expect("bounded")].clone()
            } else {
                c2.lengths()[g2.bounded_index(a - shift_f).expect("bounded")].clone()
            };
        }
        let root = c1.root();
        Ok(PlaneCurve::new(t, lengths, root, c1.root_position().clone())?)
    }
}

/// Cuts `c` at the contracted bounded edge `e`. `first` is the component
/// containing mark 0 (or the side of the edge's lower flag if unmarked).
pub fn decompose_reducible(c: &PlaneCurve, e: usize) -> Result<Split> {
    let t = c.plane_type();
    let g = t.graph();
    let &(a, b) = g.bounded_edges().get(e).ok_or(EnumerationError::NotContracted(e))?;
    if !t.dir(a).is_zero() {
        return Err(EnumerationError::NotContracted(e));
    }
    let side_a = g.side(g.vertex_of(a), &[a]);
    let mark0_on_a = t.marks().first().is_none_or(|&m| side_a[g.vertex_of(m)]);
    let (cut1, cut2) = if mark0_on_a { (a, b) } else { (b, a) };
    let pos = c.vertex_positions();
    let (first, first_marks) = component(c, &pos, cut1)?;
    let (second, second_marks) = component(c, &pos, cut2)?;
    Ok(Split { first, second, first_marks, second_marks })
}

/// The side of `cut`'s vertex after turning `cut` into a marked end.
fn component(c: &PlaneCurve, pos: &[Point], cut: FlagId) -> Result<(PlaneCurve, Vec<usize>)> {
    let t = c.plane_type();
    let g = t.graph();
    let side = g.side(g.vertex_of(cut), &[cut]);
    let vmap: Vec<Option<usize>> = {
        let mut next = 0;
        side.iter()
            .map(|&s| {
                s.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let keep: Vec<FlagId> = (0..g.flags().len()).filter(|&f| side[g.vertex_of(f)]).collect();
    let fmap = |f: FlagId| keep.iter().position(|&k| k == f);
    let flags: Vec<Flag> = keep
        .iter()
        .map(|&f| Flag {
            vertex: vmap[g.vertex_of(f)].expect("kept"),
            partner: if f == cut { None } else { g.partner(f).map(|p| fmap(p).expect("same side")) },
        })
        .collect();
    let dirs = keep.iter().map(|&f| t.dir(f)).collect();
    let mut original = Vec::new();
    let mut marks = Vec::new();
    for (i, &m) in t.marks().iter().enumerate() {
        if side[g.vertex_of(m)] {
            original.push(i);
            marks.push(fmap(m).expect("kept"));
        }
    }
    marks.push(fmap(cut).expect("kept"));
    let graph = Graph::new(vmap.iter().flatten().count(), flags)?;
    let lengths = graph
        .bounded_edges()
        .iter()
        .map(|&(x, _)| c.lengths()[g.bounded_index(keep[x]).expect("bounded")].clone())
        .collect();
    let root_old = side.iter().position(|&s| s).expect("nonempty side");
    let ptype = PlaneType::new(AbstractType::new(graph, marks)?, dirs)?;
    Ok((PlaneCurve::new(ptype, lengths, 0, pos[root_old].clone())?, original))
}

/// `|det ev|` over all marks of `c`.
pub fn ev_multiplicity(c: &PlaneCurve) -> Result<u64> {
    let t = c.plane_type();
    Ok(multiplicity(&ev_matrix(t, &both_axes(0..t.marks().len()))?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ratio;

    fn ev_degree(d: usize, seed: u64) -> (u64, Vec<FiberSolution>) {
        let degree = Degree::projective(d);
        let (_, sols) = sample_fiber(&degree, &Request::Ev, &mut rng_from_seed(seed)).unwrap();
        (fiber_degree(&sols), sols)
    }

    #[test]
    fn ev_degree_one_and_two() {
        for seed in 0..3 {
            assert_eq!(ev_degree(1, seed).0, 1);
            assert_eq!(ev_degree(2, seed).0, 1);
        }
    }

    #[test]
    fn flow_matches_elimination() {
        for (d, seed) in [(1, 3), (2, 4), (2, 5)] {
            let degree = Degree::projective(d);
            let cfg = PointConfig::Ev(random_ev_config(&degree, &mut rng_from_seed(seed)));
            let key = |sols: Vec<FiberSolution>| -> Vec<_> {
                sols.into_iter().map(|s| (s.plane_type().canonical_form(), s.coords, s.mult)).collect()
            };
            let by_flow = key(fiber_with(&degree, &cfg, Route::Flow).unwrap());
            let by_elimination = key(fiber_with(&degree, &cfg, Route::Elimination).unwrap());
            assert!(!by_flow.is_empty());
            assert_eq!(by_flow, by_elimination);
        }
    }

    #[test]
    fn pi_degree_two() {
        let degree = Degree::projective(2);
        for ray in [M4Ray::A, M4Ray::B, M4Ray::C] {
            let (_, sols) = sample_fiber(&degree, &Request::Pi { ray, scale: 1 }, &mut rng_from_seed(7)).unwrap();
            assert_eq!(fiber_degree(&sols), 2, "ray {ray}");
        }
    }

    /// Orbits of 3-valent trees on labeled leaves under relabelings that
    /// keep each leaf's class, with trees encoded as sets of splits.
    fn tree_orbits(classes: &[usize]) -> usize {
        let n = classes.len();
        let full = (1u32 << n) - 1;
        // a split is stored by the side avoiding leaf 0
        let splits: Vec<u32> =
            (1..full).filter(|s| s & 1 == 0 && (2..=n as u32 - 2).contains(&s.count_ones())).collect();
        let compatible = |a: u32, b: u32| a & b == 0 || a & b == a || a & b == b;
        let mut trees = Vec::new();
        let mut pick = vec![];
        fn go(
            i: usize,
            splits: &[u32],
            want: usize,
            pick: &mut Vec<u32>,
            ok: &dyn Fn(u32, u32) -> bool,
            out: &mut Vec<Vec<u32>>,
        ) {
            if pick.len() == want {
                out.push(pick.clone());
                return;
            }
            for j in i..splits.len() {
                if pick.iter().all(|&p| ok(p, splits[j])) {
                    pick.push(splits[j]);
                    go(j + 1, splits, want, pick, ok, out);
                    pick.pop();
                }
            }
        }
        go(0, &splits, n - 3, &mut pick, &compatible, &mut trees);
        let perms: Vec<Vec<usize>> = permutations(&(0..n).collect::<Vec<_>>())
            .into_iter()
            .filter(|p| (0..n).all(|i| classes[p[i]] == classes[i]))
            .collect();
        let image = |tree: &[u32], p: &[usize]| -> Vec<u32> {
            let mut v: Vec<u32> = tree
                .iter()
                .map(|&s| {
                    let m = (0..n).filter(|&i| s & (1 << i) != 0).fold(0u32, |m, i| m | 1 << p[i]);
                    if m & 1 == 0 {
                        m
                    } else {
                        full & !m
                    }
                })
                .collect();
            v.sort();
            v
        };
        trees.iter().map(|t| perms.iter().map(|p| image(t, p)).min().unwrap()).collect::<HashSet<_>>().len()
    }

    #[test]
    fn plane_type_counts_match_split_oracle() {
        let line = tree_orbits(&[0, 1, 2, 3, 4]);
        assert_eq!(line, 15);
        assert_eq!(enumerate_plane_types(&Degree::projective(1), 2).len(), line);
        let conic = tree_orbits(&[0, 0, 1, 1, 2, 2]);
        assert_eq!(enumerate_plane_types(&Degree::projective(2), 0).len(), conic);
        assert_eq!(enumerate_plane_types(&Degree::projective(2), 1).len(), tree_orbits(&[0, 0, 1, 1, 2, 2, 3]));
    }

    #[test]
    fn abstract_type_counts() {
        let four = enumerate_abstract_types(4);
        assert_eq!(four.len(), 4);
        assert_eq!(four.iter().filter(|t| t.codim() == 0).count(), 3);
        let five = enumerate_abstract_types(5);
        assert_eq!(five.iter().filter(|t| t.codim() == 0).count(), 15);
        assert_eq!(five.iter().filter(|t| t.codim() == 1).count(), 10);
        assert_eq!(five.len(), 26);
    }

    #[test]
    fn unmarked_line_has_three_strings() {
        let types = enumerate_plane_types(&Degree::projective(1), 0);
        assert_eq!(types.len(), 1);
        assert_eq!(strings(&types[0]).len(), 3);
        assert!(!is_rigid(&types[0]));
        assert_eq!(curve_multiplicity(&types[0]), 0);
    }

    fn ev_det(t: &PlaneType) -> u64 {
        multiplicity(&ev_matrix(t, &both_axes(0..t.marks().len())).unwrap()).unwrap()
    }

    #[test]
    fn vertex_product_matches_ev_determinant() {
        let skew = Degree::new(vec![Direction::new(1, 1), Direction::new(-2, 1), Direction::new(1, -2)]);
        for (degree, n) in [(Degree::projective(1), 2), (skew.clone(), 2), (Degree::projective(2), 1)] {
            for t in enumerate_plane_types(&degree, n) {
                if t.contracted_bounded_edges().is_empty() && 2 * n == t.cell_dimension() {
                    assert_eq!(curve_multiplicity(&t), ev_det(&t), "{:?}", t.canonical_form());
                }
            }
        }
        let rigid: Vec<u64> =
            enumerate_plane_types(&skew, 2).iter().filter(|t| is_rigid(t)).map(curve_multiplicity).collect();
        assert!(!rigid.is_empty());
        assert!(rigid.iter().all(|&m| m == 3));
    }

    #[test]
    fn split_and_reglue_round_trip() {
        let types = enumerate_plane_types(&Degree::projective(1), 2);
        let t = types.iter().find(|t| is_rigid(t)).unwrap().clone();
        let lengths = vec![scalar(1); t.graph().bounded_edge_count()];
        let first = PlaneCurve::new(t.clone(), lengths.clone(), 0, Point::new(scalar(5), scalar(-7))).unwrap();
        let at_origin = PlaneCurve::new(t.clone(), lengths.clone(), 0, Point::origin()).unwrap();
        let shift = &first.mark_position(1) - &at_origin.mark_position(1);
        let second = PlaneCurve::new(t, lengths, 0, shift).unwrap();
        let split = Split { first, second, first_marks: vec![0], second_marks: vec![1] };
        let mut apart = split.clone();
        apart.second = at_origin;
        assert!(apart.reglue(scalar(1)).is_err());
        let glued = split.reglue(ratio(3, 2)).unwrap();
        let pt = glued.plane_type();
        assert_eq!(pt.degree(), Degree::projective(2));
        let e = pt.contracted_bounded_edges();
        assert_eq!(e.len(), 1);
        let again = decompose_reducible(&glued, e[0]).unwrap();
        assert_eq!((again.first_marks.clone(), again.second_marks.clone()), (vec![0], vec![1]));
        for (a, b) in [(&again.first, &split.first), (&again.second, &split.second)] {
            assert_eq!(a.plane_type().canonical_form(), b.plane_type().canonical_form());
            for m in 0..2 {
                assert_eq!(a.mark_position(m), b.mark_position(m));
            }
        }
        let reglued = again.reglue(ratio(3, 2)).unwrap();
        assert_eq!(reglued.plane_type().canonical_form(), pt.canonical_form());
        assert_eq!(ev_multiplicity(&again.first).unwrap(), ev_det(split.first.plane_type()));
    }

    #[test]
    fn config_json_round_trip() {
        let mut rng = rng_from_seed(11);
        let ev = PointConfig::Ev(random_ev_config(&Degree::projective(2), &mut rng));
        let pi = PointConfig::Pi(random_pi_config(&Degree::projective(2), M4Ray::B, None, &mut rng));
        for cfg in [ev, pi] {
            let text = serde_json::to_string(&cfg.to_json()).unwrap();
            let back: ConfigJson = serde_json::from_str(&text).unwrap();
            assert_eq!(PointConfig::from_json(&back).unwrap(), cfg);
        }
    }

    #[test]
    fn large_length_exceeds_configuration_spread() {
        let mut rng = rng_from_seed(2);
        let c = random_pi_config(&Degree::projective(2), M4Ray::A, None, &mut rng);
        let mut coords = vec![c.a.clone(), c.b.clone()];
        coords.extend(c.points.iter().flat_map(|p| [p.x.clone(), p.y.clone()]));
        let spread = coords.iter().max().unwrap() - coords.iter().min().unwrap();
        assert!(c.z.length > spread);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        // one line through two general points, meeting both
        #[test]
        fn line_through_two_points(seed in 0u64..10_000) {
            let degree = Degree::projective(1);
            let (cfg, sols) = sample_fiber(&degree, &Request::Ev, &mut rng_from_seed(seed)).unwrap();
            proptest::prop_assert_eq!(fiber_degree(&sols), 1);
            let PointConfig::Ev(c) = cfg else { unreachable!() };
            for s in &sols {
                for (i, p) in c.points.iter().enumerate() {
                    proptest::prop_assert_eq!(&s.curve.mark_position(i), p);
                }
            }
        }
    }
}
