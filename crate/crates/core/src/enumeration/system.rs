//! Incremental elimination for the fiber search.
//!
//! Left-hand sides are small integers and stay in fraction-free reduced
//! echelon form over `i64`, each row divided by the gcd of its entries.
//! Right-hand sides are kept symbolically as integer combinations of the
//! target values, so only sign decisions and final solutions touch the
//! (large) rational targets.

use std::cmp::Ordering;

use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::linalg::{Rational, RowOutcome};

/// Target values with `f64` shadows for fast sign decisions.
#[derive(Debug, Clone)]
pub(crate) struct Targets {
    exact: Vec<Rational>,
    approx: Vec<f64>,
}

impl Targets {
    pub(crate) fn new(exact: Vec<Rational>) -> Self {
        let approx = exact.iter().map(|r| r.to_f64().expect("finite target")).collect();
        Targets { exact, approx }
    }

    pub(crate) fn len(&self) -> usize {
        self.exact.len()
    }

    /// Sign of `Σ acc_j b_j`, exact.
    fn sign(&self, acc: &[i64]) -> Ordering {
        let mut sum = 0.0f64;
        let mut mag = 0.0f64;
        for (&a, &b) in acc.iter().zip(&self.approx) {
            let term = a as f64 * b;
            sum += term;
            mag += term.abs();
        }
        // float error stays below 1e-13 * mag for the sizes used here
        if sum.abs() > mag * 1e-9 {
            return sum.partial_cmp(&0.0).expect("finite");
        }
        self.value(acc, 1).cmp(&Rational::zero())
    }

    /// `(Σ acc_j b_j) / scale`.
    fn value(&self, acc: &[i64], scale: i64) -> Rational {
        let sum: Rational = acc
            .iter()
            .zip(&self.exact)
            .filter(|(&a, _)| a != 0)
            .map(|(&a, b)| b * Rational::from_integer(a.into()))
            .sum();
        sum / Rational::from_integer(scale.into())
    }
}

/// Widest row (columns plus targets) the fixed buffers hold.
const MAX_WIDTH: usize = 64;

/// Rows stored flat as `[lhs | rhs]`, where `rhs` holds coefficients over the
/// targets; each pivot entry is positive and zero in every other row.
#[derive(Debug, Clone)]
pub(crate) struct SearchSystem {
    cols: usize,
    width: usize,
    data: Vec<i64>,
    pivots: Vec<usize>,
}

fn checked(x: Option<i64>) -> i64 {
    x.expect("elimination coefficient exceeds i64")
}

/// `x = a·x - c·y`, entrywise.
fn combine(a: i64, x: &mut [i64], c: i64, y: &[i64]) {
    for (xi, &yi) in x.iter_mut().zip(y) {
        if yi == 0 {
            *xi = checked(a.checked_mul(*xi));
        } else {
            *xi = checked(checked(a.checked_mul(*xi)).checked_sub(checked(c.checked_mul(yi))));
        }
    }
}

/// Divides by the gcd of all entries and `extra`.
fn normalize(x: &mut [i64], extra: &mut i64) {
    let mut g = *extra;
    for &v in x.iter() {
        if v != 0 {
            g = g.gcd(&v);
            if g == 1 {
                return;
            }
        }
    }
    if g > 1 {
        x.iter_mut().for_each(|v| *v /= g);
        *extra /= g;
    }
}

impl SearchSystem {
    pub(crate) fn new(cols: usize, targets: &Targets) -> Self {
        let width = cols + targets.len();
        assert!(width <= MAX_WIDTH, "search system wider than {MAX_WIDTH}");
        SearchSystem { cols, width, data: Vec::with_capacity(cols * width), pivots: Vec::with_capacity(cols) }
    }

    fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    /// Adds `row · x = b_target`; the system is unchanged unless the row is independent.
    pub(crate) fn push(&mut self, row: &[i64], target: usize, targets: &Targets) -> RowOutcome {
        debug_assert_eq!(row.len(), self.cols);
        let mut buf = [0i64; MAX_WIDTH];
        let new = &mut buf[..self.width];
        new[..self.cols].copy_from_slice(row);
        new[self.cols + target] = 1;
        for (i, &p) in self.pivots.iter().enumerate() {
            let c = new[p];
            if c != 0 {
                let r = &self.data[i * self.width..(i + 1) * self.width];
                combine(r[p], new, c, r);
                normalize(new, &mut 0);
            }
        }
        let Some(pivot) = new[..self.cols].iter().position(|&v| v != 0) else {
            return match targets.sign(&new[self.cols..]) {
                Ordering::Equal => RowOutcome::Redundant,
                _ => RowOutcome::Inconsistent,
            };
        };
        if new[pivot] < 0 {
            new.iter_mut().for_each(|v| *v = -*v);
        }
        let p = new[pivot];
        for r in self.data.chunks_mut(self.width) {
            let c = r[pivot];
            if c != 0 {
                combine(p, r, c, new);
                normalize(r, &mut 0);
            }
        }
        self.data.extend_from_slice(new);
        self.pivots.push(pivot);
        RowOutcome::Independent
    }

    /// Target coefficients `acc` and `scale > 0` with `f(x) = acc·b / scale` on every solution, when determined.
    fn express(&self, f: &[(usize, i64)], buf: &mut [i64; MAX_WIDTH]) -> Option<i64> {
        let cur = &mut buf[..self.width];
        cur.fill(0);
        for &(c, k) in f {
            cur[c] += k;
        }
        let mut scale = 1i64;
        for (i, &p) in self.pivots.iter().enumerate() {
            let c = cur[p];
            if c == 0 {
                continue;
            }
            let r = self.row(i);
            let a = r[p];
            // the target part accumulates a·acc - c·rhs, i.e. f = -acc·b / scale
            combine(a, cur, c, r);
            scale = checked(scale.checked_mul(a));
            normalize(cur, &mut scale);
        }
        if cur[..self.cols].iter().any(|&v| v != 0) {
            return None;
        }
        cur[self.cols..].iter_mut().for_each(|v| *v = -*v);
        Some(scale)
    }

    /// Sign of `f` when the system determines it.
    pub(crate) fn determined_sign(&self, f: &[(usize, i64)], targets: &Targets) -> Option<Ordering> {
        let mut buf = [0i64; MAX_WIDTH];
        self.express(f, &mut buf)?;
        Some(targets.sign(&buf[self.cols..self.width]))
    }

    /// The solution when the system has full column rank.
    pub(crate) fn unique_solution(&self, targets: &Targets) -> Option<Vec<Rational>> {
        if self.pivots.len() != self.cols {
            return None;
        }
        let mut sol = vec![Rational::zero(); self.cols];
        for (i, &p) in self.pivots.iter().enumerate() {
            let r = self.row(i);
            sol[p] = targets.value(&r[self.cols..], r[p]);
        }
        Some(sol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{int, ratio, EchelonSystem};
    use proptest::prelude::*;

    #[test]
    fn solves_small_system() {
        let t = Targets::new(vec![ratio(1, 3), ratio(-2, 7), int(5)]);
        let mut s = SearchSystem::new(2, &t);
        assert_eq!(s.push(&[1, 1], 0, &t), RowOutcome::Independent);
        assert_eq!(s.determined_sign(&[(0, 1)], &t), None);
        assert_eq!(s.determined_sign(&[(0, 1), (1, 1)], &t), Some(Ordering::Greater));
        assert_eq!(s.push(&[2, 2], 1, &t), RowOutcome::Inconsistent);
        assert_eq!(s.push(&[1, -1], 1, &t), RowOutcome::Independent);
        let sol = s.unique_solution(&t).unwrap();
        assert_eq!(sol, vec![ratio(1, 42), ratio(13, 42)]);
        assert_eq!(s.determined_sign(&[(0, -1)], &t), Some(Ordering::Less));
    }

    proptest! {
        // agrees with the rational echelon system on small integer systems
        #[test]
        fn matches_rational_elimination(
            rows in prop::collection::vec(prop::collection::vec(-3i64..=3, 4), 1..6),
            num in prop::collection::vec(-50i64..=50, 6),
            probe in prop::collection::vec(-2i64..=2, 4),
        ) {
            let exact: Vec<Rational> = num.iter().enumerate().map(|(i, &k)| ratio(k, [1009, 1013, 1019, 1021, 1031, 1033][i])).collect();
            let t = Targets::new(exact.clone());
            let mut fast = SearchSystem::new(4, &t);
            let mut slow = EchelonSystem::new(4);
            for (i, r) in rows.iter().enumerate() {
                let mut trial = slow.clone();
                let expect = trial.push(r.iter().map(|&v| int(v)).collect(), exact[i].clone());
                prop_assert_eq!(fast.push(r, i, &t), expect);
                if expect == RowOutcome::Independent {
                    slow = trial;
                }
            }
            let f: Vec<(usize, i64)> = probe.iter().copied().enumerate().collect();
            let slow_sign = slow.determined_value(&f).map(|v| v.cmp(&Rational::zero()));
            prop_assert_eq!(fast.determined_sign(&f, &t), slow_sign);
            prop_assert_eq!(fast.unique_solution(&t), slow.unique_solution());
        }
    }
}
