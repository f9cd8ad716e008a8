//! The nine pair distributions and the exact decision of whether a single
//! setting-independent law over instruction sets reproduces them.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lp::{self, Feasibility};
use crate::rational::{self, RatStr, Rational};
use crate::types::{
    validate_probability_vector, InstructionSet, Outcome, ProbabilityVector8, Setting, SettingPair,
    Station,
};

/// Joint law of the two outcomes for one setting pair, indexed `[x][y]`
/// with `+` before `-`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairDistribution {
    pair: SettingPair,
    probs: [[Rational; 2]; 2],
}

impl PairDistribution {
    pub fn new(pair: SettingPair, probs: [[Rational; 2]; 2]) -> Result<Self> {
        if let Some(v) = probs.iter().flatten().find(|v| v.is_negative()) {
            return Err(Error::InvalidTables(format!("{pair}: negative cell {v}")));
        }
        let sum: Rational = probs.iter().flatten().sum();
        if !sum.is_one() {
            return Err(Error::InvalidTables(format!(
                "{pair}: cells sum to {sum}, not 1"
            )));
        }
        Ok(PairDistribution { pair, probs })
    }

    pub fn pair(&self) -> SettingPair {
        self.pair
    }

    pub fn prob(&self, x: Outcome, y: Outcome) -> &Rational {
        &self.probs[x.index()][y.index()]
    }

    /// Sum of `x * y * P(x, y)`.
    pub fn correlation(&self) -> Rational {
        cells()
            .map(|(x, y)| {
                let sign = (x * y).value();
                if sign > 0 {
                    self.prob(x, y).clone()
                } else {
                    -self.prob(x, y)
                }
            })
            .sum()
    }
}

/// Law of a station's outcome, `[P(+), P(-)]`.
pub type Marginal = [Rational; 2];

pub fn first_marginal(d: &PairDistribution) -> Marginal {
    Outcome::ALL.map(|x| Outcome::ALL.iter().map(|&y| d.prob(x, y)).sum())
}

pub fn second_marginal(d: &PairDistribution) -> Marginal {
    Outcome::ALL.map(|y| Outcome::ALL.iter().map(|&x| d.prob(x, y)).sum())
}

fn cells() -> impl Iterator<Item = (Outcome, Outcome)> {
    Outcome::ALL
        .into_iter()
        .flat_map(|x| Outcome::ALL.into_iter().map(move |y| (x, y)))
}

fn cell_key(x: Outcome, y: Outcome) -> String {
    format!("{}{}", x.sign(), y.sign())
}

/// One table per setting pair, in canonical pair order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NineDistributions {
    tables: Vec<PairDistribution>,
}

impl NineDistributions {
    pub fn new(mut tables: Vec<PairDistribution>) -> Result<Self> {
        tables.sort_by_key(|t| t.pair.index());
        let pairs: Vec<SettingPair> = tables.iter().map(|t| t.pair).collect();
        if pairs != SettingPair::ALL {
            return Err(Error::InvalidTables(format!(
                "need exactly one table per setting pair, got {}",
                pairs
                    .iter()
                    .map(|p| p.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            )));
        }
        Ok(NineDistributions { tables })
    }

    pub fn get(&self, pair: SettingPair) -> &PairDistribution {
        &self.tables[pair.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PairDistribution> {
        self.tables.iter()
    }

    /// Diagonal pairs perfectly correlated, off-diagonal product
    /// expectation -1/2, all marginals uniform.
    pub fn quantum_target() -> Self {
        let tables = SettingPair::ALL
            .iter()
            .map(|&pair| {
                let probs = if pair.is_diagonal() {
                    [
                        [rational::ratio(1, 2), rational::zero()],
                        [rational::zero(), rational::ratio(1, 2)],
                    ]
                } else {
                    [
                        [rational::ratio(1, 8), rational::ratio(3, 8)],
                        [rational::ratio(3, 8), rational::ratio(1, 8)],
                    ]
                };
                PairDistribution::new(pair, probs).expect("valid constant table")
            })
            .collect();
        NineDistributions::new(tables).expect("all nine pairs present")
    }
}

impl Serialize for NineDistributions {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, BTreeMap<String, RatStr>> = self
            .tables
            .iter()
            .map(|t| {
                let cells = cells()
                    .map(|(x, y)| (cell_key(x, y), RatStr(t.prob(x, y).clone())))
                    .collect();
                (t.pair.to_string(), cells)
            })
            .collect();
        TablesDoc { tables: map }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for NineDistributions {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = TablesDoc::deserialize(d)?;
        nine_from_doc(doc).map_err(serde::de::Error::custom)
    }
}

/// Wire form: `{"tables": {"ab": {"++": "1/8", "+-": ..., "-+": ..., "--": ...}, ...}}`.
#[derive(Serialize, Deserialize)]
struct TablesDoc {
    tables: BTreeMap<String, BTreeMap<String, RatStr>>,
}

fn nine_from_doc(doc: TablesDoc) -> Result<NineDistributions> {
    let mut tables = Vec::with_capacity(9);
    for (key, cells_in) in doc.tables {
        let pair: SettingPair = key.parse()?;
        let mut probs: [[Rational; 2]; 2] = Default::default();
        for (x, y) in cells() {
            let k = cell_key(x, y);
            probs[x.index()][y.index()] = cells_in
                .get(&k)
                .ok_or_else(|| Error::InvalidTables(format!("{pair}: missing cell {k:?}")))?
                .0
                .clone();
        }
        if cells_in.len() != 4 {
            return Err(Error::InvalidTables(format!(
                "{pair}: unexpected cell keys"
            )));
        }
        tables.push(PairDistribution::new(pair, probs)?);
    }
    NineDistributions::new(tables)
}

/// Pair tables induced by a law over instruction sets carried by both particles.
pub fn nine_from_p(p: &ProbabilityVector8) -> NineDistributions {
    let tables = SettingPair::ALL
        .iter()
        .map(|&pair| {
            let mut probs: [[Rational; 2]; 2] = Default::default();
            for row in InstructionSet::ALL {
                let x = row.color(pair.left).index();
                let y = row.color(pair.right).index();
                probs[x][y] += p.get(row);
            }
            PairDistribution { pair, probs }
        })
        .collect();
    NineDistributions { tables }
}

/// `(1/9) * sum over pairs` of the product expectation.
pub fn average_from_nine(nine: &NineDistributions) -> Rational {
    let total: Rational = nine.iter().map(PairDistribution::correlation).sum();
    total / rational::int(9)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MarginalCheck {
    pub station: Station,
    pub setting: Setting,
    /// The station's marginal in each of the three contexts (remote setting a, b, c).
    pub marginals: Vec<(SettingPair, [RatStr; 2])>,
    pub consistent: bool,
    /// Largest `|P(+)|` difference between any two contexts.
    pub max_discrepancy: RatStr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MarginalReport {
    pub consistent: bool,
    pub checks: Vec<MarginalCheck>,
}

/// Compares each station's outcome law across the three remote settings.
pub fn marginal_consistency(nine: &NineDistributions) -> MarginalReport {
    let mut checks = Vec::with_capacity(6);
    for station in [Station::S1, Station::S2] {
        for setting in Setting::ALL {
            let marginals: Vec<(SettingPair, Marginal)> = Setting::ALL
                .iter()
                .map(|&other| {
                    let pair = match station {
                        Station::S1 => SettingPair::new(setting, other),
                        Station::S2 => SettingPair::new(other, setting),
                    };
                    let d = nine.get(pair);
                    let m = match station {
                        Station::S1 => first_marginal(d),
                        Station::S2 => second_marginal(d),
                    };
                    (pair, m)
                })
                .collect();
            let mut max = rational::zero();
            for (_, m1) in &marginals {
                for (_, m2) in &marginals {
                    let diff = (&m1[0] - &m2[0]).abs();
                    if diff > max {
                        max = diff;
                    }
                }
            }
            checks.push(MarginalCheck {
                station,
                setting,
                consistent: max.is_zero(),
                marginals: marginals
                    .into_iter()
                    .map(|(p, m)| (p, m.map(RatStr)))
                    .collect(),
                max_discrepancy: RatStr(max),
            });
        }
    }
    MarginalReport {
        consistent: checks.iter().all(|c| c.consistent),
        checks,
    }
}

/// Farkas multipliers, one per constraint in [`constraint_system`] order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate(pub Vec<Rational>);

impl Serialize for Certificate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map: BTreeMap<String, BTreeMap<String, RatStr>> = BTreeMap::new();
        for (i, (pair, x, y)) in constraint_labels().enumerate() {
            let v = self.0.get(i).cloned().unwrap_or_default();
            map.entry(pair.to_string())
                .or_default()
                .insert(cell_key(x, y), RatStr(v));
        }
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Certificate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<String, BTreeMap<String, RatStr>>::deserialize(d)?;
        let mut y = Vec::with_capacity(36);
        for (pair, x, yy) in constraint_labels() {
            let v = map
                .get(&pair.to_string())
                .and_then(|cells| cells.get(&cell_key(x, yy)))
                .ok_or_else(|| serde::de::Error::custom(format!("missing multiplier {pair}")))?;
            y.push(v.0.clone());
        }
        Ok(Certificate(y))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    Feasible,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RealizabilityResult {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<ProbabilityVector8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

fn constraint_labels() -> impl Iterator<Item = (SettingPair, Outcome, Outcome)> {
    SettingPair::ALL
        .into_iter()
        .flat_map(|pair| cells().map(move |(x, y)| (pair, x, y)))
}

/// The 36 x 8 equality system `A p = b`: one row per (pair, x, y) cell,
/// one column per instruction set. Redundant rows are kept.
pub fn constraint_system(nine: &NineDistributions) -> (Vec<Vec<Rational>>, Vec<Rational>) {
    let mut a = Vec::with_capacity(36);
    let mut b = Vec::with_capacity(36);
    for (pair, x, y) in constraint_labels() {
        a.push(
            InstructionSet::ALL
                .iter()
                .map(|row| {
                    if row.color(pair.left) == x && row.color(pair.right) == y {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect(),
        );
        b.push(nine.get(pair).prob(x, y).clone());
    }
    (a, b)
}

/// Decides exactly whether some `p` satisfies `nine_from_p(p) == nine`.
pub fn joint_realizability(nine: &NineDistributions) -> RealizabilityResult {
    let (a, b) = constraint_system(nine);
    match lp::lexmin_feasible(&a, &b) {
        Feasibility::Feasible(x) => {
            let witness = validate_probability_vector(x)
                .expect("feasible point of normalised tables is a probability vector");
            RealizabilityResult {
                status: Status::Feasible,
                witness: Some(witness),
                certificate: None,
            }
        }
        Feasibility::Infeasible(y) => RealizabilityResult {
            status: Status::Infeasible,
            witness: None,
            certificate: Some(Certificate(y)),
        },
    }
}

/// Checks the Farkas identity: the multiplier combination of the
/// constraint rows is `>= 0` on every instruction-set coordinate while the
/// combined right-hand side is `< 0`.
pub fn verify_certificate(cert: &Certificate, nine: &NineDistributions) -> Result<bool> {
    if cert.0.len() != 36 {
        return Err(Error::MalformedCertificate(format!(
            "expected 36 multipliers, found {}",
            cert.0.len()
        )));
    }
    let (a, b) = constraint_system(nine);
    Ok(lp::is_farkas_certificate(&a, &b, &cert.0))
}
