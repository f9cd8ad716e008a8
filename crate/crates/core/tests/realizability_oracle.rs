#[path = "support/vertex_oracle.rs"]
mod vertex_oracle;

use mermin_core::rational::{ratio, Rational};
use mermin_core::realizability::{
    joint_realizability, nine_from_p, verify_certificate, NineDistributions, PairDistribution,
    Status,
};
use mermin_core::types::{ProbabilityVector8, SettingPair};
use num_bigint::BigInt;
use proptest::prelude::*;

fn arb_p() -> impl Strategy<Value = ProbabilityVector8> {
    prop::collection::vec(0u64..6, 8)
        .prop_filter("nonzero", |w| w.iter().any(|&x| x > 0))
        .prop_map(|w| ProbabilityVector8::from_weights(&w).unwrap())
}

/// Arbitrary 2x2 tables with denominator `d`, not necessarily realizable.
fn arb_nine() -> impl Strategy<Value = NineDistributions> {
    (2i64..7).prop_flat_map(|d| {
        prop::collection::vec(prop::collection::vec(0..=d, 3), 9).prop_map(move |cells| {
            let tables = SettingPair::ALL
                .iter()
                .zip(cells)
                .map(|(&pair, c)| {
                    let mut parts = c.clone();
                    parts.sort();
                    let cuts = [
                        parts[0],
                        parts[1] - parts[0],
                        parts[2] - parts[1],
                        d - parts[2],
                    ];
                    let q = |k: i64| Rational::new(BigInt::from(k), BigInt::from(d));
                    PairDistribution::new(
                        pair,
                        [[q(cuts[0]), q(cuts[1])], [q(cuts[2]), q(cuts[3])]],
                    )
                    .unwrap()
                })
                .collect();
            NineDistributions::new(tables).unwrap()
        })
    })
}

#[test]
fn quantum_target_agrees_with_oracle() {
    let nine = NineDistributions::quantum_target();
    let sys = vertex_oracle::system(&nine);
    assert!(!vertex_oracle::is_feasible(&sys));
    let res = joint_realizability(&nine);
    assert_eq!(res.status, Status::Infeasible);
    let cert = res.certificate.unwrap();
    assert!(vertex_oracle::is_farkas(&sys, &cert.0));
    assert!(verify_certificate(&cert, &nine).unwrap());
}

#[test]
fn uniform_witness_is_oracle_lexmin() {
    let nine = nine_from_p(&ProbabilityVector8::uniform());
    let res = joint_realizability(&nine);
    let sys = vertex_oracle::system(&nine);
    let expected = vertex_oracle::lexmin(&sys).unwrap();
    assert_eq!(res.witness.unwrap().as_slice(), expected.as_slice());
    // uniform tables are also reproduced by mixing complementary rows only
    assert_eq!(expected[0], ratio(0, 1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn realizable_tables_match_oracle(p in arb_p()) {
        let nine = nine_from_p(&p);
        let sys = vertex_oracle::system(&nine);
        let res = joint_realizability(&nine);
        prop_assert_eq!(res.status, Status::Feasible);
        let w = res.witness.unwrap();
        prop_assert_eq!(nine_from_p(&w), nine);
        let expected = vertex_oracle::lexmin(&sys).unwrap();
        prop_assert_eq!(w.as_slice(), expected.as_slice());
    }

    #[test]
    fn arbitrary_tables_match_oracle(nine in arb_nine()) {
        let sys = vertex_oracle::system(&nine);
        let res = joint_realizability(&nine);
        match res.status {
            Status::Feasible => {
                let w = res.witness.unwrap();
                let expected = vertex_oracle::lexmin(&sys).unwrap();
                prop_assert_eq!(w.as_slice(), expected.as_slice());
            }
            Status::Infeasible => {
                prop_assert!(!vertex_oracle::is_feasible(&sys));
                let cert = res.certificate.unwrap();
                prop_assert!(vertex_oracle::is_farkas(&sys, &cert.0));
                prop_assert!(verify_certificate(&cert, &nine).unwrap());
            }
        }
    }
}
