//! Rigid `ev` solutions on a fixed image tree by ray propagation.
//!
//! On a rigid curve every component of the curve minus its marks holds
//! exactly one end. Seen from its parent vertex, a branch with `k` ends then
//! either holds `k` marks and feeds a ray of known position into the parent
//! (`out`), or holds `k - 1` marks and is determined by the parent's
//! position (`hang`). Vertices are intersections of two such rays.

use std::collections::HashMap;
use std::rc::Rc;

use num_traits::{Signed, Zero};

use super::{EnumerationError, FiberSolution, Result, Search};
use crate::linalg::Rational;
use crate::plane::{scalar, Direction, Point};

/// Lengths and mark positions fixed inside a branch.
#[derive(Debug, Clone, Default)]
struct Partial {
    lengths: Vec<(usize, Rational)>,
    /// `(slot, item, t)`: item at distance `t` from the slot's vertex.
    marks: Vec<(usize, usize, Rational)>,
}

impl Partial {
    fn merged(&self, other: &Partial) -> Partial {
        let mut p = self.clone();
        p.lengths.extend(other.lengths.iter().cloned());
        p.marks.extend(other.marks.iter().cloned());
        p
    }
}

/// A branch feeding a ray into its parent vertex, against the slot direction.
#[derive(Debug, Clone)]
struct Ray {
    origin: Point,
    /// Mark at the origin and the distance from it down to the branch vertex.
    top: Option<(usize, Rational)>,
    inside: Partial,
}

/// `(a, b)` with `p + a·v = q + b·w`, when the lines are not parallel.
fn meet(p: &Point, v: Direction, q: &Point, w: Direction) -> Option<(Rational, Rational)> {
    let det = v.det(w);
    if det == 0 {
        return None;
    }
    let r = q - p;
    let det = scalar(det);
    let a = (&r.x * scalar(w.y) - &r.y * scalar(w.x)) / &det;
    let b = (&r.x * scalar(v.y) - &r.y * scalar(v.x)) / &det;
    Some((a, b))
}

/// Both parameters strictly positive; an exact zero is a degenerate configuration.
fn forward(a: &Rational, b: &Rational) -> Result<bool> {
    if a.is_zero() || b.is_zero() {
        return Err(EnumerationError::GeneralPositionViolation("two rays meet at an endpoint".into()));
    }
    Ok(a.is_positive() && b.is_positive())
}

/// Submasks of `mask` with `size` bits.
fn submasks(mask: u32, size: u32) -> impl Iterator<Item = u32> {
    let mut sub = mask;
    let mut done = false;
    std::iter::from_fn(move || {
        while !done {
            let cur = sub;
            if sub == 0 {
                done = true;
            } else {
                sub = (sub - 1) & mask;
            }
            if cur.count_ones() == size {
                return Some(cur);
            }
        }
        None
    })
}

pub(super) struct Flow<'s, 'a> {
    search: &'s Search<'a>,
    points: &'s [Point],
    memo: HashMap<(usize, u32), Rc<Vec<Ray>>>,
}

impl<'s, 'a> Flow<'s, 'a> {
    pub(super) fn new(search: &'s Search<'a>, points: &'s [Point]) -> Self {
        Flow { search, points, memo: HashMap::new() }
    }

    fn ends(&self, s: usize) -> u32 {
        self.search.slots[s].ends_below as u32
    }

    /// Records the branch at `s` meeting its parent after travelling `a`.
    fn attach(&self, s: usize, ray: &Ray, a: Rational) -> Partial {
        let mut p = ray.inside.clone();
        let slot = &self.search.slots[s];
        match &ray.top {
            Some((item, below)) => {
                if let Some(e) = slot.bounded {
                    p.lengths.push((e, &a + below));
                }
                p.marks.push((s, *item, a));
            }
            None => p.lengths.push((slot.bounded.expect("unmarked out branch is bounded"), a)),
        }
        p
    }

    /// Branches at `s` holding exactly the marks in `mask`, one per end.
    fn out(&mut self, s: usize, mask: u32) -> Result<Rc<Vec<Ray>>> {
        if let Some(r) = self.memo.get(&(s, mask)) {
            return Ok(r.clone());
        }
        let slot = self.search.slots[s].clone();
        let mut rays = Vec::new();
        if slot.children.is_empty() {
            let item = mask.trailing_zeros() as usize;
            rays.push(Ray {
                origin: self.points[item].clone(),
                top: Some((item, Rational::zero())),
                inside: Partial::default(),
            });
        } else {
            let (c1, c2) = (slot.children[0], slot.children[1]);
            for m1 in submasks(mask, self.ends(c1)) {
                let (r1s, r2s) = (self.out(c1, m1)?, self.out(c2, mask & !m1)?);
                for r1 in r1s.iter() {
                    for r2 in r2s.iter() {
                        let (d1, d2) = (self.search.slots[c1].dir, self.search.slots[c2].dir);
                        let Some((a, b)) = meet(&r1.origin, -d1, &r2.origin, -d2) else { continue };
                        if !forward(&a, &b)? {
                            continue;
                        }
                        let origin = r1.origin.offset(&a, -d1);
                        let inside = self.attach(c1, r1, a).merged(&self.attach(c2, r2, b));
                        rays.push(Ray { origin, top: None, inside });
                    }
                }
            }
            for item in (0..32).filter(|i| mask & (1 << i) != 0) {
                let rest = mask & !(1 << item);
                let p = self.points[item].clone();
                for (co, ci) in [(c1, c2), (c2, c1)] {
                    for mo in submasks(rest, self.ends(co)) {
                        for r in self.out(co, mo)?.iter() {
                            let Some((b, a)) = meet(&p, slot.dir, &r.origin, -self.search.slots[co].dir) else {
                                continue;
                            };
                            if !forward(&a, &b)? {
                                continue;
                            }
                            let w = p.offset(&b, slot.dir);
                            let here = self.attach(co, r, a);
                            for hung in self.hang(ci, rest & !mo, &w)? {
                                rays.push(Ray {
                                    origin: p.clone(),
                                    top: Some((item, b.clone())),
                                    inside: here.merged(&hung),
                                });
                            }
                        }
                    }
                }
            }
        }
        let rays = Rc::new(rays);
        self.memo.insert((s, mask), rays.clone());
        Ok(rays)
    }

    /// Branches at `s` holding the marks in `mask` (one fewer than ends), with the slot's vertex at `u`.
    fn hang(&mut self, s: usize, mask: u32, u: &Point) -> Result<Vec<Partial>> {
        let slot = self.search.slots[s].clone();
        if slot.children.is_empty() {
            return Ok(vec![Partial::default()]);
        }
        let e = slot.bounded.expect("inner slot is bounded");
        let mut out = Vec::new();
        let (c1, c2) = (slot.children[0], slot.children[1]);
        for (co, ci) in [(c1, c2), (c2, c1)] {
            for mo in submasks(mask, self.ends(co)) {
                for r in self.out(co, mo)?.iter() {
                    let Some((len, a)) = meet(u, slot.dir, &r.origin, -self.search.slots[co].dir) else { continue };
                    if !forward(&len, &a)? {
                        continue;
                    }
                    let w = u.offset(&len, slot.dir);
                    let mut here = self.attach(co, r, a);
                    here.lengths.push((e, len));
                    for hung in self.hang(ci, mask & !mo, &w)? {
                        out.push(here.merged(&hung));
                    }
                }
            }
        }
        Ok(out)
    }

    /// All rigid solutions on the search's tree.
    pub(super) fn solve(&mut self) -> Result<Vec<FiberSolution>> {
        let all = (1u32 << self.points.len()) - 1;
        let roots: Vec<usize> = (0..self.search.slots.len()).filter(|&s| self.search.slots[s].vertex == 0).collect();
        let mut found = Vec::new();
        for j in 0..roots.len() {
            let (h, o1, o2) = (roots[j], roots[(j + 1) % 3], roots[(j + 2) % 3]);
            for m1 in submasks(all, self.ends(o1)) {
                for m2 in submasks(all & !m1, self.ends(o2)) {
                    let (r1s, r2s) = (self.out(o1, m1)?, self.out(o2, m2)?);
                    for r1 in r1s.iter() {
                        for r2 in r2s.iter() {
                            let (d1, d2) = (self.search.slots[o1].dir, self.search.slots[o2].dir);
                            let Some((a, b)) = meet(&r1.origin, -d1, &r2.origin, -d2) else { continue };
                            if !forward(&a, &b)? {
                                continue;
                            }
                            let root = r1.origin.offset(&a, -d1);
                            let fixed = self.attach(o1, r1, a).merged(&self.attach(o2, r2, b));
                            for hung in self.hang(h, all & !m1 & !m2, &root)? {
                                found.push(self.assemble(&root, fixed.merged(&hung))?);
                            }
                        }
                    }
                }
            }
        }
        Ok(found)
    }

    fn assemble(&self, root: &Point, p: Partial) -> Result<FiberSolution> {
        let search = self.search;
        let mut sol = vec![Rational::zero(); search.cols()];
        sol[0] = root.x.clone();
        sol[1] = root.y.clone();
        for (e, len) in p.lengths {
            sol[2 + e] = len;
        }
        let mut placed = vec![Vec::new(); search.slots.len()];
        for (s, item, t) in p.marks {
            sol[search.item_col(item)] = t;
            placed[s].push(item);
        }
        let curve = search.build(&sol, &placed)?;
        search.verify(curve)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn submasks_of_given_size() {
        let subs: Vec<u32> = submasks(0b1011, 2).collect();
        assert_eq!(subs, vec![0b1010, 0b1001, 0b0011]);
        assert_eq!(submasks(0b101, 0).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn rays_meet_forward() {
        let p = Point::new(Rational::zero(), Rational::zero());
        let q = Point::new(scalar(2), scalar(-1));
        let (a, b) = meet(&p, Direction { x: 1, y: 0 }, &q, Direction { x: 0, y: 1 }).unwrap();
        assert_eq!((a, b), (scalar(2), scalar(1)));
        assert!(meet(&p, Direction { x: 1, y: 1 }, &q, Direction { x: -2, y: -2 }).is_none());
    }
}
