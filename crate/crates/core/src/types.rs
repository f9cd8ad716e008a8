//! Shared vocabulary: settings, outcomes, instruction sets, exact
//! probability vectors, measurement times and run records.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

macro_rules! serde_via_str {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

/// Detector setting label. Only the label matters; no geometry is modelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Setting {
    A,
    B,
    C,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::A, Setting::B, Setting::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Setting {
        Self::ALL[i]
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::A => "a",
            Setting::B => "b",
            Setting::C => "c",
        })
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Setting::A),
            "b" => Ok(Setting::B),
            "c" => Ok(Setting::C),
            _ => Err(Error::Parse(format!("unknown setting {s:?}"))),
        }
    }
}

serde_via_str!(Setting);

/// Detector flash. Green is +1, red is -1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    /// Cell order used by every 2x2 table: `+` before `-`.
    pub const ALL: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn from_value(v: i64) -> Result<Outcome> {
        match v {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            _ => Err(Error::Parse(format!("outcome must be +1 or -1, got {v}"))),
        }
    }

    pub fn color(self) -> char {
        match self {
            Outcome::Plus => 'G',
            Outcome::Minus => 'R',
        }
    }

    pub fn from_color(c: char) -> Result<Outcome> {
        match c {
            'G' => Ok(Outcome::Plus),
            'R' => Ok(Outcome::Minus),
            _ => Err(Error::Parse(format!("unknown color {c:?}"))),
        }
    }

    pub fn sign(self) -> char {
        match self {
            Outcome::Plus => '+',
            Outcome::Minus => '-',
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl Mul for Outcome {
    type Output = Outcome;

    fn mul(self, rhs: Outcome) -> Outcome {
        if self == rhs {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.value())
    }
}

/// Which end of the experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Station {
    S1,
    S2,
}

impl Station {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Ordered pair of settings: `left` at S1, `right` at S2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SettingPair {
    pub left: Setting,
    pub right: Setting,
}

impl SettingPair {
    /// Canonical order aa, ab, ac, ba, ..., cc.
    pub const ALL: [SettingPair; 9] = {
        use Setting::*;
        let s = [A, B, C];
        let mut out = [SettingPair { left: A, right: A }; 9];
        let mut i = 0;
        while i < 9 {
            out[i] = SettingPair {
                left: s[i / 3],
                right: s[i % 3],
            };
            i += 1;
        }
        out
    };

    pub fn new(left: Setting, right: Setting) -> Self {
        SettingPair { left, right }
    }

    pub fn index(self) -> usize {
        self.left.index() * 3 + self.right.index()
    }

    pub fn from_index(i: usize) -> SettingPair {
        Self::ALL[i]
    }

    pub fn is_diagonal(self) -> bool {
        self.left == self.right
    }
}

impl fmt::Display for SettingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.left, self.right)
    }
}

impl FromStr for SettingPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some(l), Some(r), None) => Ok(SettingPair::new(
                l.to_string().parse()?,
                r.to_string().parse()?,
            )),
            _ => Err(Error::Parse(format!(
                "setting pair must be two letters, got {s:?}"
            ))),
        }
    }
}

serde_via_str!(SettingPair);

/// A color triple telling a particle which flash to show for each setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct InstructionSet {
    colors: [Outcome; 3],
}

impl InstructionSet {
    /// Canonical row order RRR, RRG, RGR, GRR, GGR, GRG, RGG, GGG.
    pub const ALL: [InstructionSet; 8] = {
        use Outcome::{Minus as R, Plus as G};
        [
            InstructionSet { colors: [R, R, R] },
            InstructionSet { colors: [R, R, G] },
            InstructionSet { colors: [R, G, R] },
            InstructionSet { colors: [G, R, R] },
            InstructionSet { colors: [G, G, R] },
            InstructionSet { colors: [G, R, G] },
            InstructionSet { colors: [R, G, G] },
            InstructionSet { colors: [G, G, G] },
        ]
    };

    pub fn new(colors: [Outcome; 3]) -> Self {
        InstructionSet { colors }
    }

    pub fn color(self, setting: Setting) -> Outcome {
        self.colors[setting.index()]
    }

    pub fn colors(self) -> [Outcome; 3] {
        self.colors
    }

    /// Position in the canonical row order.
    pub fn row(self) -> usize {
        Self::ALL
            .iter()
            .position(|&r| r == self)
            .expect("every color triple is a canonical row")
    }

    pub fn from_row(row: usize) -> InstructionSet {
        Self::ALL[row]
    }

    /// RRR and GGG: every setting shows the same color.
    pub fn is_uniform(self) -> bool {
        self.colors[0] == self.colors[1] && self.colors[1] == self.colors[2]
    }
}

impl fmt::Display for InstructionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.colors {
            write!(f, "{}", c.color())?;
        }
        Ok(())
    }
}

impl FromStr for InstructionSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let colors: Vec<Outcome> = s.chars().map(Outcome::from_color).collect::<Result<_>>()?;
        let colors: [Outcome; 3] = colors
            .try_into()
            .map_err(|_| Error::Parse(format!("instruction set must have 3 colors, got {s:?}")))?;
        Ok(InstructionSet { colors })
    }
}

serde_via_str!(InstructionSet);

/// The 8x9 table of products A_i B_j, one row per instruction set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductTable {
    entries: [[Outcome; 9]; 8],
}

impl ProductTable {
    pub fn get(&self, row: InstructionSet, pair: SettingPair) -> Outcome {
        self.entries[row.row()][pair.index()]
    }

    pub fn row(&self, row: InstructionSet) -> &[Outcome; 9] {
        &self.entries[row.row()]
    }

    pub fn rows(&self) -> impl Iterator<Item = (InstructionSet, &[Outcome; 9])> {
        InstructionSet::ALL.into_iter().zip(self.entries.iter())
    }
}

/// Products of the colors both particles carry, for every row and pair.
pub fn product_table() -> ProductTable {
    let mut entries = [[Outcome::Plus; 9]; 8];
    for (r, set) in InstructionSet::ALL.iter().enumerate() {
        for (c, pair) in SettingPair::ALL.iter().enumerate() {
            entries[r][c] = set.color(pair.left) * set.color(pair.right);
        }
    }
    ProductTable { entries }
}

/// Non-negative exact weights over the eight instruction sets, summing to 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProbabilityVector8 {
    p: [Rational; 8],
}

impl ProbabilityVector8 {
    pub fn uniform() -> Self {
        ProbabilityVector8 {
            p: std::array::from_fn(|_| rational::ratio(1, 8)),
        }
    }

    pub fn point_mass(row: InstructionSet) -> Self {
        let idx = row.row();
        ProbabilityVector8 {
            p: std::array::from_fn(|i| {
                if i == idx {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            }),
        }
    }

    /// Normalizes non-negative integer weights.
    pub fn from_weights(weights: &[u64]) -> Result<Self> {
        let total: u64 = weights.iter().sum();
        if total == 0 {
            return Err(Error::Precondition("weights sum to zero".into()));
        }
        validate_probability_vector(
            weights
                .iter()
                .map(|&w| Rational::new(BigInt::from(w), BigInt::from(total)))
                .collect(),
        )
    }

    pub fn get(&self, row: InstructionSet) -> &Rational {
        &self.p[row.row()]
    }

    pub fn as_slice(&self) -> &[Rational; 8] {
        &self.p
    }

    /// Rows carrying positive weight.
    pub fn support(&self) -> impl Iterator<Item = InstructionSet> + '_ {
        InstructionSet::ALL
            .into_iter()
            .filter(|r| self.p[r.row()].is_positive())
    }

    /// `alpha * self + (1 - alpha) * other`; `alpha` must lie in [0, 1].
    pub fn mix(&self, other: &ProbabilityVector8, alpha: &Rational) -> Result<Self> {
        if alpha.is_negative() || *alpha > Rational::one() {
            return Err(Error::Precondition(format!(
                "mixing weight {alpha} outside [0,1]"
            )));
        }
        let beta = Rational::one() - alpha;
        validate_probability_vector(
            self.p
                .iter()
                .zip(other.p.iter())
                .map(|(x, y)| alpha * x + &beta * y)
                .collect(),
        )
    }
}

/// Checks sign and exact normalisation of eight raw weights.
pub fn validate_probability_vector(entries: Vec<Rational>) -> Result<ProbabilityVector8> {
    let p: [Rational; 8] = entries
        .try_into()
        .map_err(|v: Vec<Rational>| Error::WrongLength {
            expected: 8,
            found: v.len(),
        })?;
    if let Some((index, value)) = p.iter().enumerate().find(|(_, v)| v.is_negative()) {
        return Err(Error::NegativeEntry {
            index,
            value: value.clone(),
        });
    }
    let sum: Rational = p.iter().sum();
    if !sum.is_one() {
        return Err(Error::SumNotOne {
            deficit: Rational::one() - sum,
        });
    }
    Ok(ProbabilityVector8 { p })
}

impl FromStr for ProbabilityVector8 {
    type Err = Error;

    /// `uniform`, `point:<ROW>` (e.g. `point:RRG`) or eight comma-separated rationals.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "uniform" {
            return Ok(Self::uniform());
        }
        if let Some(row) = s.strip_prefix("point:") {
            return Ok(Self::point_mass(row.parse()?));
        }
        validate_probability_vector(s.split(',').map(rational::parse).collect::<Result<_>>()?)
    }
}

impl Serialize for ProbabilityVector8 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(8))?;
        for v in &self.p {
            seq.serialize_element(&rational::format(v))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for ProbabilityVector8 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<rational::RatStr>::deserialize(d)?;
        validate_probability_vector(raw.into_iter().map(|r| r.0).collect())
            .map_err(serde::de::Error::custom)
    }
}

/// Measurement time as a 64-bit binary fraction of the unit interval:
/// the value is `bits / 2^64`. Two times are "the same" iff bit-identical.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Time(pub u64);

impl Time {
    pub const ZERO: Time = Time(0);

    /// Decimal digits written after the point; 10^-20 < 2^-64 keeps the
    /// encoding injective.
    pub const DIGITS: usize = 20;

    pub fn from_fraction(numer: u64, denom: u64) -> Time {
        assert!(denom > 0 && numer < denom, "time fraction outside [0,1)");
        Time(((u128::from(numer) << 64) / u128::from(denom)) as u64)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 18_446_744_073_709_551_616.0
    }

    pub fn wrapping_add(self, other: Time) -> Time {
        Time(self.0.wrapping_add(other.0))
    }

    pub fn to_rational(self) -> Rational {
        Rational::new(BigInt::from(self.0), BigInt::one() << 64)
    }
}

impl fmt::Display for Time {
    /// Truncated 20-digit decimal, e.g. `0.50000000000000000000`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut frac = self.0;
        let mut digits = String::with_capacity(Self::DIGITS + 2);
        digits.push_str("0.");
        for _ in 0..Self::DIGITS {
            let scaled = u128::from(frac) * 10;
            digits.push(char::from(b'0' + (scaled >> 64) as u8));
            frac = scaled as u64;
        }
        f.write_str(&digits)
    }
}

impl FromStr for Time {
    type Err = Error;

    /// Inverts `Display`: the smallest 64-bit fraction whose truncated
    /// decimal expansion matches the text.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("not a time in [0,1): {s:?}"));
        let frac = s.strip_prefix("0.").ok_or_else(bad)?;
        if frac.is_empty() || frac.len() > Self::DIGITS || !frac.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let digits: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let scaled = (digits << 64u32) + &scale - BigInt::one();
        let bits: BigInt = scaled / scale;
        u64::try_from(bits).map(Time).map_err(|_| bad())
    }
}

serde_via_str!(Time);

/// One simulated run of the experiment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: u64,
    pub pair: SettingPair,
    pub t1: Time,
    pub t2: Time,
    pub outcome1: Outcome,
    pub outcome2: Outcome,
    pub product: Outcome,
}

impl RunRecord {
    pub fn new(
        run_id: u64,
        pair: SettingPair,
        t1: Time,
        t2: Time,
        outcome1: Outcome,
        outcome2: Outcome,
    ) -> Self {
        RunRecord {
            run_id,
            pair,
            t1,
            t2,
            outcome1,
            outcome2,
            product: outcome1 * outcome2,
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.value())
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Outcome::from_value(i64::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}
