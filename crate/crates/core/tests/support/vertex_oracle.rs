//! Brute-force reference for realizability: enumerate every basic solution
//! of the 36 x 8 system by trying all column subsets.

#![allow(dead_code)]

use mermin_core::rational::Rational;
use mermin_core::realizability::NineDistributions;
use mermin_core::types::{InstructionSet, Outcome, SettingPair};
use num_traits::{One, Signed, Zero};

pub struct System {
    pub a: Vec<Vec<Rational>>,
    pub b: Vec<Rational>,
}

/// Rows in pair-major order, cells `++, +-, -+, --` within a pair.
pub fn system(nine: &NineDistributions) -> System {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for pair in SettingPair::ALL {
        for x in [Outcome::Plus, Outcome::Minus] {
            for y in [Outcome::Plus, Outcome::Minus] {
                a.push(
                    (0..8)
                        .map(|k| {
                            let s = InstructionSet::from_row(k);
                            if s.color(pair.left) == x && s.color(pair.right) == y {
                                Rational::one()
                            } else {
                                Rational::zero()
                            }
                        })
                        .collect(),
                );
                b.push(nine.get(pair).prob(x, y).clone());
            }
        }
    }
    System { a, b }
}

/// Unique solution of `A[:, cols] z = b`, if the columns are independent
/// and the system is consistent.
fn solve_on(sys: &System, cols: &[usize]) -> Option<Vec<Rational>> {
    let m = sys.a.len();
    let n = cols.len();
    let mut rows: Vec<Vec<Rational>> = (0..m)
        .map(|i| {
            let mut r: Vec<Rational> = cols.iter().map(|&j| sys.a[i][j].clone()).collect();
            r.push(sys.b[i].clone());
            r
        })
        .collect();
    for c in 0..n {
        let r = c;
        let p = (r..m).find(|&i| !rows[i][c].is_zero())?;
        rows.swap(r, p);
        let lead = rows[r][c].clone();
        for v in rows[r].iter_mut() {
            *v = &*v / &lead;
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= &f * pv;
                }
            }
        }
    }
    if rows[n..].iter().any(|row| !row[n].is_zero()) {
        return None;
    }
    Some(rows[..n].iter().map(|row| row[n].clone()).collect())
}

/// All nonnegative basic solutions, as full 8-vectors.
pub fn vertices(sys: &System) -> Vec<Vec<Rational>> {
    let mut out: Vec<Vec<Rational>> = Vec::new();
    for mask in 1u32..256 {
        let cols: Vec<usize> = (0..8).filter(|j| mask >> j & 1 == 1).collect();
        if let Some(z) = solve_on(sys, &cols) {
            if z.iter().all(|v| !v.is_negative()) {
                let mut x = vec![Rational::zero(); 8];
                for (&j, v) in cols.iter().zip(z) {
                    x[j] = v;
                }
                if !out.contains(&x) {
                    out.push(x);
                }
            }
        }
    }
    out
}

/// The polytope is bounded, so its lexicographic minimum is a vertex.
pub fn lexmin(sys: &System) -> Option<Vec<Rational>> {
    vertices(sys).into_iter().min()
}

pub fn is_feasible(sys: &System) -> bool {
    !vertices(sys).is_empty()
}

pub fn is_farkas(sys: &System, y: &[Rational]) -> bool {
    if y.len() != sys.a.len() {
        return false;
    }
    let col_ok = (0..8).all(|j| {
        let s: Rational = sys.a.iter().zip(y).map(|(row, yi)| &row[j] * yi).sum();
        !s.is_negative()
    });
    let rhs: Rational = sys.b.iter().zip(y).map(|(bi, yi)| bi * yi).sum();
    col_ok && rhs.is_negative()
}
