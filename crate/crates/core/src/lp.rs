//! Exact rational simplex for equality systems `A x = b, x >= 0`.
//!
//! Phase I either reaches a feasible basis or proves infeasibility; in the
//! latter case the Phase I duals give a Farkas vector `y` with
//! `y^T A >= 0` componentwise and `y^T b < 0`. Feasible systems are then
//! optimised for `x_0`, `x_1`, ... in turn, which yields the
//! lexicographically smallest feasible point (always a basic solution).
//! Bland's rule is used throughout, so degenerate pivots cannot cycle.

use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Feasibility {
    Feasible(Vec<Rational>),
    Infeasible(Vec<Rational>),
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = self.rows[r][c].recip();
        if !inv.is_one() {
            for v in self.rows[r].iter_mut().filter(|v| !v.is_zero()) {
                *v *= &inv;
            }
            self.rhs[r] *= &inv;
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let nonzero: Vec<usize> = (0..pivot_row.len())
            .filter(|&j| !pivot_row[j].is_zero())
            .collect();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let factor = self.rows[i][c].clone();
            for &j in &nonzero {
                let delta = &factor * &pivot_row[j];
                self.rows[i][j] -= delta;
            }
            let delta = &factor * &self.rhs[r];
            self.rhs[i] -= delta;
        }
        self.rows[r] = pivot_row;
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[Rational]) -> Vec<Rational> {
        let mut rc = cost.to_vec();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = &cost[self.basis[i]];
            if cb.is_zero() {
                continue;
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    rc[j] -= cb * v;
                }
            }
        }
        rc
    }

    /// Minimises `cost` over the allowed columns; returns the final reduced costs.
    fn minimise(&mut self, cost: &[Rational], allowed: &[bool]) -> Vec<Rational> {
        loop {
            let rc = self.reduced_costs(cost);
            let entering = (0..rc.len()).find(|&j| allowed[j] && rc[j].is_negative());
            let Some(c) = entering else {
                return rc;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &leave {
                    None => true,
                    Some((best, best_ratio)) => {
                        ratio < *best_ratio
                            || (ratio == *best_ratio && self.basis[i] < self.basis[*best])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            // Objectives used here are bounded below on the feasible set.
            let (r, _) = leave.expect("objective is bounded below by zero");
            self.pivot(r, c);
        }
    }

    fn value(&self, n: usize) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rhs[i].clone();
            }
        }
        x
    }
}

/// Decides `A x = b, x >= 0` exactly. Redundant or duplicated rows are fine.
///
/// Returns the lexicographically smallest feasible `x`, or a Farkas
/// certificate `y` (one entry per row of `a`).
pub fn lexmin_feasible(a: &[Vec<Rational>], b: &[Rational]) -> Feasibility {
    assert_eq!(a.len(), b.len(), "one right-hand side per row");
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    assert!(
        a.iter().all(|row| row.len() == n),
        "ragged constraint matrix"
    );

    // Flip rows so that b >= 0, then append one artificial per row.
    let signs: Vec<bool> = b.iter().map(|v| v.is_negative()).collect();
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for i in 0..m {
        let mut row: Vec<Rational> = Vec::with_capacity(n + m);
        row.extend(a[i].iter().map(|v| if signs[i] { -v } else { v.clone() }));
        row.extend((0..m).map(|k| {
            if k == i {
                Rational::one()
            } else {
                Rational::zero()
            }
        }));
        rows.push(row);
        rhs.push(if signs[i] { -&b[i] } else { b[i].clone() });
    }
    let mut t = Tableau {
        rows,
        rhs,
        basis: (n..n + m).collect(),
    };

    let phase1_cost: Vec<Rational> = (0..n + m)
        .map(|j| {
            if j < n {
                Rational::zero()
            } else {
                Rational::one()
            }
        })
        .collect();
    let rc = t.minimise(&phase1_cost, &vec![true; n + m]);
    let infeasibility: Rational = t
        .basis
        .iter()
        .zip(&t.rhs)
        .filter(|(&bv, _)| bv >= n)
        .map(|(_, v)| v.clone())
        .sum();

    if infeasibility.is_positive() {
        // dual u_i = 1 - rc(artificial_i); certificate is -u mapped back through the flips
        let y = (0..m)
            .map(|i| {
                let u = Rational::one() - &rc[n + i];
                if signs[i] {
                    u
                } else {
                    -u
                }
            })
            .collect();
        return Feasibility::Infeasible(y);
    }

    // Drive zero-level artificials out of the basis; rows where that is
    // impossible are linear combinations of the others and are dropped.
    let mut keep = vec![true; m];
    for (i, kept) in keep.iter_mut().enumerate() {
        if t.basis[i] < n {
            continue;
        }
        match (0..n).find(|&j| !t.rows[i][j].is_zero()) {
            Some(j) => t.pivot(i, j),
            None => *kept = false,
        }
    }
    let mut k = 0;
    t.rows.retain(|_| {
        k += 1;
        keep[k - 1]
    });
    let mut k = 0;
    t.rhs.retain(|_| {
        k += 1;
        keep[k - 1]
    });
    let mut k = 0;
    t.basis.retain(|_| {
        k += 1;
        keep[k - 1]
    });

    let mut allowed: Vec<bool> = (0..n + m).map(|j| j < n).collect();
    for target in 0..n {
        let cost: Vec<Rational> = (0..n + m)
            .map(|j| {
                if j == target {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        let rc = t.minimise(&cost, &allowed);
        // Optimal face: nonbasic columns with positive reduced cost stay at zero.
        for j in 0..n {
            if allowed[j] && rc[j].is_positive() && !t.basis.contains(&j) {
                allowed[j] = false;
            }
        }
    }
    Feasibility::Feasible(t.value(n))
}

/// `y^T A >= 0` on every column and `y^T b < 0`, in exact arithmetic.
pub fn is_farkas_certificate(a: &[Vec<Rational>], b: &[Rational], y: &[Rational]) -> bool {
    if y.len() != a.len() || a.len() != b.len() {
        return false;
    }
    let n = a.first().map_or(0, Vec::len);
    let columns_ok = (0..n).all(|j| {
        let s: Rational = a.iter().zip(y).map(|(row, yi)| &row[j] * yi).sum();
        !s.is_negative()
    });
    let constant: Rational = b.iter().zip(y).map(|(bi, yi)| bi * yi).sum();
    columns_ok && constant.is_negative()
}
