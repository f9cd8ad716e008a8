//! Mergeable run statistics.

use num_bigint::BigInt;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::realizability::{NineDistributions, PairDistribution};
use crate::types::{Outcome, RunRecord, SettingPair};

/// Outcome-pair counts per setting pair.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StatsAccumulator {
    counts: [[[u64; 2]; 2]; 9],
    total_runs: u64,
}

/// A floating-point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n: u64,
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(&mut self, record: &RunRecord) {
        self.counts[record.pair.index()][record.outcome1.index()][record.outcome2.index()] += 1;
        self.total_runs += 1;
    }

    pub fn merge(mut self, other: &StatsAccumulator) -> StatsAccumulator {
        for (mine, theirs) in self.counts.iter_mut().zip(other.counts.iter()) {
            for (a, b) in mine.iter_mut().flatten().zip(theirs.iter().flatten()) {
                *a += b;
            }
        }
        self.total_runs += other.total_runs;
        self
    }

    pub fn total_runs(&self) -> u64 {
        self.total_runs
    }

    pub fn count(&self, pair: SettingPair, x: Outcome, y: Outcome) -> u64 {
        self.counts[pair.index()][x.index()][y.index()]
    }

    pub fn pair_total(&self, pair: SettingPair) -> u64 {
        self.counts[pair.index()].iter().flatten().sum()
    }

    /// Runs with product +1 minus runs with product -1.
    fn product_balance(&self) -> (u64, u64) {
        let mut plus = 0;
        let mut minus = 0;
        for table in &self.counts {
            plus += table[0][0] + table[1][1];
            minus += table[0][1] + table[1][0];
        }
        (plus, minus)
    }

    /// Exact count ratios per pair.
    pub fn empirical_nine(&self) -> Result<NineDistributions> {
        let tables = SettingPair::ALL
            .iter()
            .map(|&pair| {
                let total = self.pair_total(pair);
                if total == 0 {
                    return Err(Error::EmptyPair(pair));
                }
                let t = &self.counts[pair.index()];
                let cell =
                    |x: usize, y: usize| Rational::new(BigInt::from(t[x][y]), BigInt::from(total));
                PairDistribution::new(pair, [[cell(0, 0), cell(0, 1)], [cell(1, 0), cell(1, 1)]])
            })
            .collect::<Result<Vec<_>>>()?;
        NineDistributions::new(tables)
    }

    /// Mean product over all runs, each run weighted equally.
    pub fn run_weighted_average(&self) -> Option<Rational> {
        if self.total_runs == 0 {
            return None;
        }
        let (plus, minus) = self.product_balance();
        Some(Rational::new(
            BigInt::from(plus) - BigInt::from(minus),
            BigInt::from(self.total_runs),
        ))
    }

    /// Mean product with `sd / sqrt(n)` (sample standard deviation).
    pub fn average_estimate(&self) -> Result<Estimate> {
        let n = self.total_runs;
        if n < 2 {
            return Err(Error::Precondition(format!(
                "need at least 2 runs, have {n}"
            )));
        }
        let (plus, minus) = self.product_balance();
        let nf = n as f64;
        let mean = (plus as f64 - minus as f64) / nf;
        // products are +-1, so sum of squares is n
        let var = ((nf - nf * mean * mean) / (nf - 1.0)).max(0.0);
        Ok(Estimate {
            value: mean,
            std_error: (var / nf).sqrt(),
            n,
        })
    }
}

impl FromIterator<RunRecord> for StatsAccumulator {
    fn from_iter<I: IntoIterator<Item = RunRecord>>(iter: I) -> Self {
        let mut acc = StatsAccumulator::new();
        for r in iter {
            acc.accumulate(&r);
        }
        acc
    }
}

impl<'a> FromIterator<&'a RunRecord> for StatsAccumulator {
    fn from_iter<I: IntoIterator<Item = &'a RunRecord>>(iter: I) -> Self {
        let mut acc = StatsAccumulator::new();
        for r in iter {
            acc.accumulate(r);
        }
        acc
    }
}

/// The uniform-pair average is only defined when every pair was sampled.
pub fn uniform_pair_average(acc: &StatsAccumulator) -> Option<Rational> {
    acc.empirical_nine()
        .ok()
        .map(|nine| crate::realizability::average_from_nine(&nine))
}

pub fn binomial_std_error(p: &Rational, n: u64) -> f64 {
    let p = rational::to_f64(p);
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::realizability::average_from_nine;
    use crate::types::Time;
    use proptest::prelude::*;

    fn rec(id: u64, pair: SettingPair, o1: Outcome, o2: Outcome) -> RunRecord {
        RunRecord::new(id, pair, Time::ZERO, Time::ZERO, o1, o2)
    }

    #[test]
    fn accumulate_counts() {
        let mut acc = StatsAccumulator::new();
        let r = rec(0, SettingPair::ALL[1], Outcome::Plus, Outcome::Minus);
        acc.accumulate(&r);
        assert_eq!(acc.total_runs(), 1);
        acc.accumulate(&r);
        assert_eq!(acc.count(r.pair, Outcome::Plus, Outcome::Minus), 2);

        let all: StatsAccumulator = SettingPair::ALL
            .iter()
            .enumerate()
            .map(|(i, &p)| rec(i as u64, p, Outcome::Plus, Outcome::Plus))
            .collect();
        assert!(SettingPair::ALL.iter().all(|&p| all.pair_total(p) == 1));
        let nine = all.empirical_nine().unwrap();
        assert_eq!(
            nine.get(SettingPair::ALL[4])
                .prob(Outcome::Plus, Outcome::Plus),
            &ratio(1, 1)
        );
    }

    #[test]
    fn missing_pair_is_reported() {
        let acc: StatsAccumulator = SettingPair::ALL
            .iter()
            .filter(|p| p.to_string() != "cb")
            .map(|&p| rec(0, p, Outcome::Plus, Outcome::Plus))
            .collect();
        match acc.empirical_nine() {
            Err(Error::EmptyPair(p)) => assert_eq!(p.to_string(), "cb"),
            other => panic!("expected EmptyPair, got {other:?}"),
        }
    }

    #[test]
    fn estimates() {
        let all_plus: StatsAccumulator = (0..10)
            .map(|i| rec(i, SettingPair::ALL[0], Outcome::Plus, Outcome::Plus))
            .collect();
        let e = all_plus.average_estimate().unwrap();
        assert_eq!((e.value, e.std_error, e.n), (1.0, 0.0, 10));

        let half: StatsAccumulator = (0..10)
            .map(|i| {
                let o = if i % 2 == 0 {
                    Outcome::Plus
                } else {
                    Outcome::Minus
                };
                rec(i, SettingPair::ALL[1], Outcome::Plus, o)
            })
            .collect();
        let e = half.average_estimate().unwrap();
        assert_eq!(e.value, 0.0);
        // sd of five +1 and five -1 with n-1 denominator is sqrt(10/9)
        assert!((e.std_error - (10.0f64 / 9.0).sqrt() / 10f64.sqrt()).abs() < 1e-15);
        assert!(StatsAccumulator::new().average_estimate().is_err());
    }

    fn arb_records() -> impl Strategy<Value = Vec<RunRecord>> {
        prop::collection::vec((0usize..9, any::<bool>(), any::<bool>()), 0..60).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (p, a, b))| {
                    let o = |x: bool| if x { Outcome::Plus } else { Outcome::Minus };
                    rec(i as u64, SettingPair::ALL[p], o(a), o(b))
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn merge_is_a_commutative_monoid(a in arb_records(), b in arb_records(), c in arb_records()) {
            let (a, b, c): (StatsAccumulator, StatsAccumulator, StatsAccumulator) =
                (a.iter().collect(), b.iter().collect(), c.iter().collect());
            prop_assert_eq!(a.clone().merge(&StatsAccumulator::new()), a.clone());
            prop_assert_eq!(a.clone().merge(&b), b.clone().merge(&a));
            prop_assert_eq!(a.clone().merge(&b).merge(&c), a.clone().merge(&b.clone().merge(&c)));
        }

        #[test]
        fn merged_shards_equal_concatenated_log(a in arb_records(), b in arb_records()) {
            let merged = a.iter().collect::<StatsAccumulator>().merge(&b.iter().collect());
            let concat: StatsAccumulator = a.iter().chain(b.iter()).collect();
            prop_assert_eq!(merged, concat);
        }

        #[test]
        fn weightings_agree_on_balanced_counts(reps in 1usize..4, seed_bits in any::<u64>()) {
            let mut records = Vec::new();
            for r in 0..reps {
                for (i, &p) in SettingPair::ALL.iter().enumerate() {
                    let bit = (seed_bits >> ((r * 9 + i) % 64)) & 1 == 1;
                    let o2 = if bit { Outcome::Plus } else { Outcome::Minus };
                    records.push(rec(0, p, Outcome::Plus, o2));
                }
            }
            let acc: StatsAccumulator = records.iter().collect();
            let uniform = average_from_nine(&acc.empirical_nine().unwrap());
            prop_assert_eq!(Some(uniform), acc.run_weighted_average());
        }
    }
}
