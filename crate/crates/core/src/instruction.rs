//! Exact evaluation of the setting-independent instruction-set model.
//!
//! Two routes compute the same overall average of the nine products:
//! [`average_eq1`] sums table rows directly, [`average_eq2`] factors each
//! row into `(sum_i A_i)(sum_j B_j)` with `B = A`. They must agree exactly.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::Signed;
use serde::Serialize;

use crate::rational::{self, Rational};
use crate::types::{product_table, InstructionSet, ProbabilityVector8, Setting};

/// The classical lower bound on the average product, 1/9.
pub fn bound() -> Rational {
    rational::ratio(1, 9)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundReport {
    #[serde(with = "rational::serde_str")]
    pub average: Rational,
    #[serde(with = "rational::serde_str")]
    pub bound: Rational,
    pub satisfied: bool,
    #[serde(with = "rational::serde_str")]
    pub margin: Rational,
    /// `average == 1/9` exactly.
    pub equality: bool,
    /// Rows in the support of `p` whose own row average is 1/9.
    pub equality_rows: BTreeSet<String>,
}

/// `(1/9) * sum over the nine pairs` of the row's products.
pub fn row_average(row: InstructionSet) -> Rational {
    let table = product_table();
    let sum: i64 = table.row(row).iter().map(|o| i64::from(o.value())).sum();
    rational::ratio(sum, 9)
}

pub fn average_eq1(p: &ProbabilityVector8) -> BoundReport {
    let average: Rational = InstructionSet::ALL
        .iter()
        .map(|&row| p.get(row) * row_average(row))
        .sum();
    let bound = bound();
    let margin = &average - &bound;
    let equality_rows = p
        .support()
        .filter(|&row| row_average(row) == bound)
        .map(|row| row.to_string())
        .collect();
    BoundReport {
        satisfied: !margin.is_negative(),
        equality: average == bound,
        average,
        bound,
        margin,
        equality_rows,
    }
}

/// `(A_a + A_b + A_c)^2` for the row; always 1 or 9.
pub fn square_sum(row: InstructionSet) -> i64 {
    let s: i64 = Setting::ALL
        .iter()
        .map(|&j| i64::from(row.color(j).value()))
        .sum();
    s * s
}

/// Same-setting outcomes agree at both stations. Always true for an
/// instruction set, because one triple drives both particles.
pub fn condition_i_holds(row: InstructionSet) -> bool {
    let station1 = |s: Setting| row.color(s);
    let station2 = |s: Setting| row.color(s);
    Setting::ALL.iter().all(|&s| station1(s) == station2(s))
}

/// Factored route: `(1/9) sum_l p_l (sum_i A_i)(sum_j B_j)` with `B = A`.
pub fn average_eq2(p: &ProbabilityVector8) -> Rational {
    InstructionSet::ALL
        .iter()
        .map(|&row| {
            let a: i64 = Setting::ALL
                .iter()
                .map(|&i| i64::from(row.color(i).value()))
                .sum();
            let b: i64 = Setting::ALL
                .iter()
                .map(|&j| i64::from(row.color(j).value()))
                .sum();
            p.get(row) * Rational::new(BigInt::from(a * b), BigInt::from(9))
        })
        .sum()
}

/// The "average product is about zero" target, with an explicit tolerance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionIi {
    pub target: Rational,
    pub tolerance: Rational,
}

impl ConditionIi {
    pub fn about_zero(tolerance: Rational) -> Self {
        ConditionIi {
            target: rational::zero(),
            tolerance,
        }
    }

    pub fn holds(&self, average: &Rational) -> bool {
        (average - &self.target).abs() <= self.tolerance
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::types::SettingPair;

    fn row(s: &str) -> InstructionSet {
        s.parse().unwrap()
    }

    #[test]
    fn row_averages() {
        assert_eq!(row_average(row("RRR")), ratio(1, 1));
        assert_eq!(row_average(row("GGG")), ratio(1, 1));
        for name in ["RRG", "RGR", "GRR", "GGR", "GRG", "RGG"] {
            assert_eq!(row_average(row(name)), ratio(1, 9), "{name}");
        }
    }

    #[test]
    fn uniform_average_is_one_third_by_brute_force() {
        // independent route: sum all 72 cells of the table weighted by 1/8
        let mut total = 0i64;
        for set in InstructionSet::ALL {
            for pair in SettingPair::ALL {
                total += i64::from((set.color(pair.left) * set.color(pair.right)).value());
            }
        }
        let brute = ratio(total, 72);
        assert_eq!(brute, ratio(1, 3));
        let report = average_eq1(&ProbabilityVector8::uniform());
        assert_eq!(report.average, brute);
        assert!(report.satisfied && !report.equality);
        assert_eq!(report.margin, ratio(2, 9));
    }

    #[test]
    fn point_masses() {
        let rrg = average_eq1(&ProbabilityVector8::point_mass(row("RRG")));
        assert_eq!(rrg.average, ratio(1, 9));
        assert!(rrg.equality && rrg.satisfied);
        assert_eq!(rrg.equality_rows.iter().collect::<Vec<_>>(), ["RRG"]);
        let rrr = average_eq1(&ProbabilityVector8::point_mass(row("RRR")));
        assert_eq!(rrr.average, ratio(1, 1));
        assert!(rrr.equality_rows.is_empty());
    }

    #[test]
    fn square_sums() {
        assert_eq!(square_sum(row("RRR")), 9);
        assert_eq!(square_sum(row("GGR")), 1);
        assert_eq!(square_sum(row("RGR")), 1);
        assert!(InstructionSet::ALL.iter().all(|&r| square_sum(r) >= 1));
    }

    #[test]
    fn condition_i_on_all_rows() {
        assert!(InstructionSet::ALL.iter().all(|&r| condition_i_holds(r)));
    }

    #[test]
    fn eq2_examples() {
        assert_eq!(average_eq2(&ProbabilityVector8::uniform()), ratio(1, 3));
        assert_eq!(
            average_eq2(&ProbabilityVector8::point_mass(row("GGR"))),
            ratio(1, 9)
        );
        assert_eq!(
            average_eq2(&ProbabilityVector8::point_mass(row("GGG"))),
            ratio(1, 1)
        );
    }

    #[test]
    fn condition_ii_tolerance() {
        let c = ConditionIi::about_zero(ratio(1, 20));
        assert!(c.holds(&ratio(0, 1)));
        assert!(c.holds(&ratio(-1, 20)));
        assert!(!c.holds(&ratio(1, 9)));
    }

    fn arb_p() -> impl proptest::strategy::Strategy<Value = ProbabilityVector8> {
        use proptest::prelude::*;
        (proptest::array::uniform8(0u64..50), any::<bool>()).prop_filter_map(
            "nonzero",
            |(mut w, mixed_only)| {
                if mixed_only {
                    w[0] = 0;
                    w[7] = 0;
                }
                ProbabilityVector8::from_weights(&w).ok()
            },
        )
    }

    proptest::proptest! {
        #[test]
        fn bound_and_routes_agree(p in arb_p()) {
            let report = average_eq1(&p);
            proptest::prop_assert!(report.average >= bound());
            let mixed_only = p.support().all(|r| !r.is_uniform());
            proptest::prop_assert_eq!(report.equality, mixed_only);
            proptest::prop_assert_eq!(average_eq2(&p), report.average);
        }

        #[test]
        fn average_is_affine(p in arb_p(), q in arb_p(), k in 0i64..=10) {
            let alpha = ratio(k, 10);
            let mixed = p.mix(&q, &alpha).unwrap();
            let lhs = average_eq1(&mixed).average;
            let rhs = &alpha * average_eq1(&p).average
                + (ratio(1, 1) - &alpha) * average_eq1(&q).average;
            proptest::prop_assert_eq!(lhs, rhs);
        }
    }
}
