//! The magnetic-coin double-counting example and a cardinality auditor for
//! counting procedures.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::rng::{bernoulli, threshold, Component, MasterSeed};
use crate::types::{RunRecord, SettingPair};

/// Position of the hidden magnet under the table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Magnet {
    N,
    S,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Face {
    Head,
    Tail,
}

/// Head probabilities for each magnet position. These are inputs, not
/// measured values; the defaults are 7/10 under N and 3/10 under S.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoinConfig {
    bias_n: Rational,
    bias_s: Rational,
}

impl CoinConfig {
    pub fn new(bias_n: Rational, bias_s: Rational) -> Result<Self> {
        for (name, b) in [("bias_n", &bias_n), ("bias_s", &bias_s)] {
            if b.is_negative() || *b > Rational::one() {
                return Err(Error::Precondition(format!("{name} = {b} outside [0,1]")));
            }
        }
        Ok(CoinConfig { bias_n, bias_s })
    }

    pub fn bias(&self, magnet: Magnet) -> &Rational {
        match magnet {
            Magnet::N => &self.bias_n,
            Magnet::S => &self.bias_s,
        }
    }
}

impl Default for CoinConfig {
    fn default() -> Self {
        CoinConfig {
            bias_n: rational::ratio(7, 10),
            bias_s: rational::ratio(3, 10),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Toss {
    pub magnet: Magnet,
    pub face: Face,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TossLog {
    pub tosses: Vec<Toss>,
}

impl TossLog {
    pub fn len(&self) -> usize {
        self.tosses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tosses.is_empty()
    }

    pub fn heads(&self) -> u64 {
        self.tosses.iter().filter(|t| t.face == Face::Head).count() as u64
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Precondition("toss log is empty".into()));
        }
        Ok(())
    }
}

/// One toss per magnet choice; toss `i` draws from its own seeded stream.
pub fn run_coin_experiment(
    cfg: &CoinConfig,
    choices: &[Magnet],
    seed: MasterSeed,
) -> Result<TossLog> {
    if choices.is_empty() {
        return Err(Error::Precondition(
            "magnet choice sequence is empty".into(),
        ));
    }
    let cut_n = threshold(&cfg.bias_n);
    let cut_s = threshold(&cfg.bias_s);
    let tosses = choices
        .iter()
        .enumerate()
        .map(|(i, &magnet)| {
            let cut = match magnet {
                Magnet::N => cut_n,
                Magnet::S => cut_s,
            };
            let head = bernoulli(cut, &mut seed.stream(i as u64, Component::Coin));
            Toss {
                magnet,
                face: if head { Face::Head } else { Face::Tail },
            }
        })
        .collect();
    Ok(TossLog { tosses })
}

/// The fallacious estimator: every toss contributes both of its potential
/// faces as counted elements, head counting 1 and tail 0. The observed
/// face is never consulted, so the result is 1/2 for every log.
pub fn naive_double_count(log: &TossLog) -> Result<Rational> {
    log.require_nonempty()?;
    let mut potential_heads = 0u64;
    let mut elements = 0u64;
    for _toss in &log.tosses {
        for face in [Face::Head, Face::Tail] {
            elements += 1;
            if face == Face::Head {
                potential_heads += 1;
            }
        }
    }
    Ok(Rational::new(
        BigInt::from(potential_heads),
        BigInt::from(elements),
    ))
}

/// Observed heads over tosses.
pub fn honest_frequency(log: &TossLog) -> Result<Rational> {
    log.require_nonempty()?;
    Ok(Rational::new(
        BigInt::from(log.heads()),
        BigInt::from(log.len()),
    ))
}

/// Honest frequency restricted to tosses with the given magnet setting.
pub fn honest_frequency_given(log: &TossLog, magnet: Magnet) -> Option<Rational> {
    let subset: Vec<&Toss> = log.tosses.iter().filter(|t| t.magnet == magnet).collect();
    if subset.is_empty() {
        return None;
    }
    let heads = subset.iter().filter(|t| t.face == Face::Head).count();
    Some(Rational::new(
        BigInt::from(heads),
        BigInt::from(subset.len()),
    ))
}

/// `N*3,S` style patterns: comma-separated letter groups, each optionally
/// repeated with `*k`. Whitespace is ignored.
pub fn parse_choices(pattern: &str) -> Result<Vec<Magnet>> {
    let compact: String = pattern.chars().filter(|c| !c.is_whitespace()).collect();
    let mut out = Vec::new();
    for group in compact.split(',').filter(|g| !g.is_empty()) {
        let (letters, repeat) = match group.split_once('*') {
            Some((l, k)) => (
                l,
                k.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad repeat count in {group:?}")))?,
            ),
            None => (group, 1),
        };
        let unit: Vec<Magnet> = letters
            .chars()
            .map(|c| match c {
                'N' | 'n' => Ok(Magnet::N),
                'S' | 's' => Ok(Magnet::S),
                _ => Err(Error::Parse(format!(
                    "magnet choice must be N or S, got {c:?}"
                ))),
            })
            .collect::<Result<_>>()?;
        for _ in 0..repeat {
            out.extend_from_slice(&unit);
        }
    }
    Ok(out)
}

impl FromStr for Magnet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match parse_choices(s)?.as_slice() {
            [m] => Ok(*m),
            _ => Err(Error::Parse(format!(
                "expected a single magnet choice, got {s:?}"
            ))),
        }
    }
}

/// Labelled element counts produced by some counting procedure.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountLedger {
    pub entries: Vec<(String, u64)>,
    pub declared_run_count: u64,
}

impl CountLedger {
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }

    fn add(&mut self, label: String, count: u64) {
        match self.entries.iter_mut().find(|(l, _)| *l == label) {
            Some((_, c)) => *c += count,
            None => self.entries.push((label, count)),
        }
    }
}

/// Counted elements per experimental run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OvercountReport {
    #[serde(with = "rational::serde_str")]
    pub factor: Rational,
    pub counted: u64,
    pub runs: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum AuditOutcome {
    Ok,
    Overcount(OvercountReport),
}

impl fmt::Display for AuditOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuditOutcome::Ok => f.write_str("ok"),
            AuditOutcome::Overcount(r) => write!(
                f,
                "{} elements counted for {} runs (factor {})",
                r.counted,
                r.runs,
                rational::format(&r.factor)
            ),
        }
    }
}

/// Passes iff the ledger counts exactly one element per run.
pub fn audit_counts(ledger: &CountLedger, run_count: u64) -> Result<AuditOutcome> {
    if run_count == 0 {
        return Err(Error::Precondition("run_count must be at least 1".into()));
    }
    let counted = ledger.total();
    if counted == run_count {
        return Ok(AuditOutcome::Ok);
    }
    Ok(AuditOutcome::Overcount(OvercountReport {
        factor: Rational::new(BigInt::from(counted), BigInt::from(run_count)),
        counted,
        runs: run_count,
    }))
}

fn face_label(face: Face) -> &'static str {
    match face {
        Face::Head => "head",
        Face::Tail => "tail",
    }
}

/// One element per toss: the face that showed.
pub fn coin_actual_ledger(log: &TossLog) -> CountLedger {
    let mut ledger = CountLedger {
        declared_run_count: log.len() as u64,
        ..Default::default()
    };
    for t in &log.tosses {
        ledger.add(face_label(t.face).to_string(), 1);
    }
    ledger
}

/// Both potential faces of every toss, as the naive estimator counts them.
pub fn coin_potential_ledger(log: &TossLog) -> CountLedger {
    let mut ledger = CountLedger {
        declared_run_count: log.len() as u64,
        ..Default::default()
    };
    for _ in &log.tosses {
        for face in [Face::Head, Face::Tail] {
            ledger.add(format!("potential {}", face_label(face)), 1);
        }
    }
    ledger
}

/// One element per run: the product actually recorded for its pair.
pub fn epr_actual_ledger(records: &[RunRecord]) -> CountLedger {
    let mut ledger = CountLedger {
        declared_run_count: records.len() as u64,
        ..Default::default()
    };
    for r in records {
        ledger.add(format!("{} {}", r.pair, r.product), 1);
    }
    ledger
}

/// Nine elements per run: a product for every setting pair, as if all of
/// them had been measured in that run.
pub fn epr_potential_ledger(records: &[RunRecord]) -> CountLedger {
    let mut ledger = CountLedger {
        declared_run_count: records.len() as u64,
        ..Default::default()
    };
    for _ in records {
        for pair in SettingPair::ALL {
            ledger.add(format!("potential {pair}"), 1);
        }
    }
    ledger
}
