//! Time- and setting-dependent local models and the harness that runs them.
//!
//! A model is assembled from station-local pieces: a setting-independent
//! source, one parameter process per station, a time law, an optional
//! message function and one outcome function per station. Each outcome
//! function sees only its own station's setting; the remote setting is
//! not an input anywhere in the interface.
//!
//! The harness owns all randomness. Every run component draws from its own
//! stream keyed by `(seed, run_id, component)`, so runs can be replayed
//! individually and executed in any order.

pub mod builtin;

use std::fmt;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, ModelError, Result};
use crate::rational::{self, Rational};
use crate::realizability::{
    joint_realizability, marginal_consistency, MarginalReport, NineDistributions,
    RealizabilityResult,
};
use crate::rng::{below, Component, MasterSeed};
use crate::stats::{Estimate, StatsAccumulator};
use crate::types::{InstructionSet, Outcome, RunRecord, Setting, SettingPair, Station, Time};

/// Opaque payload exchanged between model components.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Value {
    Unit,
    Int(i64),
    Time(Time),
    Setting(Setting),
    Outcome(Outcome),
    Instruction(InstructionSet),
    Bytes(Vec<u8>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => f.write_str("()"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Time(t) => write!(f, "t={t}"),
            Value::Setting(s) => write!(f, "setting {s}"),
            Value::Outcome(o) => write!(f, "{o}"),
            Value::Instruction(i) => write!(f, "{i}"),
            Value::Bytes(b) => write!(f, "{b:02x?}"),
        }
    }
}

/// Shared hidden variable emitted by the source. Takes no setting.
pub trait SourceProcess: Send + Sync {
    fn sample(&self, time: Time, rng: &mut dyn RngCore) -> Value;
}

/// Station-local parameter `lambda(setting, time)`. `realization` is the
/// run's draw of the process; given it, the value is a deterministic
/// function of `(setting, time)`.
pub trait ParameterProcess: Send + Sync {
    fn evaluate(&self, setting: Setting, time: Time, realization: &mut dyn RngCore) -> Value;
}

/// Measurement-time law. `clock` is randomness shared by both stations
/// (a synchronized clock, independent of the settings); `local` belongs to
/// the station alone.
pub trait TimeLaw: Send + Sync {
    fn sample(
        &self,
        station: Station,
        setting: Setting,
        clock: &mut dyn RngCore,
        local: &mut dyn RngCore,
    ) -> Time;
}

/// What a message function may look at.
#[derive(Clone, Copy, Debug)]
pub struct MessageInput<'a> {
    pub station: Station,
    pub time: Time,
    pub history: &'a [RunRecord],
    /// The sender's current setting. A compliant function must ignore it;
    /// [`check_setting_independence`] substitutes it to catch violations.
    pub setting_slot: Setting,
}

/// Classical message sent to the other station during a run.
pub trait MessageFunction: Send + Sync {
    fn emit(&self, input: &MessageInput<'_>, rng: &mut dyn RngCore) -> Value;
}

/// Everything a station can see when producing its outcome.
#[derive(Clone, Copy, Debug)]
pub struct LocalView<'a> {
    pub setting: Setting,
    pub source: &'a Value,
    pub time: Time,
    pub parameter: &'a Value,
    pub message: Option<&'a Value>,
}

pub trait OutcomeFunction: Send + Sync {
    fn outcome(&self, view: &LocalView<'_>) -> Result<Outcome, ModelError>;
}

impl<F> SourceProcess for F
where
    F: Fn(Time, &mut dyn RngCore) -> Value + Send + Sync,
{
    fn sample(&self, time: Time, rng: &mut dyn RngCore) -> Value {
        self(time, rng)
    }
}

impl<F> ParameterProcess for F
where
    F: Fn(Setting, Time, &mut dyn RngCore) -> Value + Send + Sync,
{
    fn evaluate(&self, setting: Setting, time: Time, realization: &mut dyn RngCore) -> Value {
        self(setting, time, realization)
    }
}

impl<F> TimeLaw for F
where
    F: Fn(Station, Setting, &mut dyn RngCore, &mut dyn RngCore) -> Time + Send + Sync,
{
    fn sample(
        &self,
        station: Station,
        setting: Setting,
        clock: &mut dyn RngCore,
        local: &mut dyn RngCore,
    ) -> Time {
        self(station, setting, clock, local)
    }
}

impl<F> MessageFunction for F
where
    F: Fn(&MessageInput<'_>, &mut dyn RngCore) -> Value + Send + Sync,
{
    fn emit(&self, input: &MessageInput<'_>, rng: &mut dyn RngCore) -> Value {
        self(input, rng)
    }
}

impl<F> OutcomeFunction for F
where
    F: Fn(&LocalView<'_>) -> Result<Outcome, ModelError> + Send + Sync,
{
    fn outcome(&self, view: &LocalView<'_>) -> Result<Outcome, ModelError> {
        self(view)
    }
}

fn unit_source(_: Time, _: &mut dyn RngCore) -> Value {
    Value::Unit
}

fn unit_parameter(_: Setting, _: Time, _: &mut dyn RngCore) -> Value {
    Value::Unit
}

fn zero_time(_: Station, _: Setting, _: &mut dyn RngCore, _: &mut dyn RngCore) -> Time {
    Time::ZERO
}

pub struct ExtendedModel {
    name: String,
    source: Box<dyn SourceProcess>,
    parameters: [Box<dyn ParameterProcess>; 2],
    time_law: Box<dyn TimeLaw>,
    message: Option<Box<dyn MessageFunction>>,
    outcomes: [Box<dyn OutcomeFunction>; 2],
}

impl fmt::Debug for ExtendedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExtendedModel")
            .field("name", &self.name)
            .field("has_message", &self.message.is_some())
            .finish_non_exhaustive()
    }
}

impl ExtendedModel {
    /// A model with a unit source, unit parameters, both times fixed at 0
    /// and no messages.
    pub fn new(
        name: impl Into<String>,
        outcome_s1: impl OutcomeFunction + 'static,
        outcome_s2: impl OutcomeFunction + 'static,
    ) -> Self {
        ExtendedModel {
            name: name.into(),
            source: Box::new(unit_source),
            parameters: [Box::new(unit_parameter), Box::new(unit_parameter)],
            time_law: Box::new(zero_time),
            message: None,
            outcomes: [Box::new(outcome_s1), Box::new(outcome_s2)],
        }
    }

    pub fn with_source(mut self, source: impl SourceProcess + 'static) -> Self {
        self.source = Box::new(source);
        self
    }

    pub fn with_parameters(
        mut self,
        s1: impl ParameterProcess + 'static,
        s2: impl ParameterProcess + 'static,
    ) -> Self {
        self.parameters = [Box::new(s1), Box::new(s2)];
        self
    }

    pub fn with_time_law(mut self, law: impl TimeLaw + 'static) -> Self {
        self.time_law = Box::new(law);
        self
    }

    pub fn with_message(mut self, message: impl MessageFunction + 'static) -> Self {
        self.message = Some(Box::new(message));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn message(&self) -> Option<&dyn MessageFunction> {
        self.message.as_deref()
    }
}

/// One run: sample both times, draw the shared source at those times,
/// evaluate the local parameters, exchange messages, then both outcomes.
pub fn run_once(
    model: &ExtendedModel,
    run_id: u64,
    pair: SettingPair,
    seed: MasterSeed,
    history: &[RunRecord],
) -> Result<RunRecord, ModelError> {
    let clock = seed.stream(run_id, Component::Clock);
    let t1 = model.time_law.sample(
        Station::S1,
        pair.left,
        &mut clock.clone(),
        &mut seed.stream(run_id, Component::TimeS1),
    );
    let t2 = model.time_law.sample(
        Station::S2,
        pair.right,
        &mut clock.clone(),
        &mut seed.stream(run_id, Component::TimeS2),
    );

    let source = seed.stream(run_id, Component::Source);
    let v1 = model.source.sample(t1, &mut source.clone());
    // the source is a function of (time, randomness) only
    let v2 = if t1 == t2 {
        v1.clone()
    } else {
        model.source.sample(t2, &mut source.clone())
    };

    let lambda1 =
        model.parameters[0].evaluate(pair.left, t1, &mut seed.stream(run_id, Component::ParamS1));
    let lambda2 =
        model.parameters[1].evaluate(pair.right, t2, &mut seed.stream(run_id, Component::ParamS2));

    let (to_s2, to_s1) = match &model.message {
        Some(f) => {
            let from_s1 = f.emit(
                &MessageInput {
                    station: Station::S1,
                    time: t1,
                    history,
                    setting_slot: pair.left,
                },
                &mut seed.stream(run_id, Component::MessageS1),
            );
            let from_s2 = f.emit(
                &MessageInput {
                    station: Station::S2,
                    time: t2,
                    history,
                    setting_slot: pair.right,
                },
                &mut seed.stream(run_id, Component::MessageS2),
            );
            (Some(from_s1), Some(from_s2))
        }
        None => (None, None),
    };

    let outcome1 = model.outcomes[0].outcome(&LocalView {
        setting: pair.left,
        source: &v1,
        time: t1,
        parameter: &lambda1,
        message: to_s1.as_ref(),
    })?;
    let outcome2 = model.outcomes[1].outcome(&LocalView {
        setting: pair.right,
        source: &v2,
        time: t2,
        parameter: &lambda2,
        message: to_s2.as_ref(),
    })?;
    Ok(RunRecord::new(run_id, pair, t1, t2, outcome1, outcome2))
}

/// How setting pairs are assigned to runs. Both give every run a uniformly
/// distributed pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSchedule {
    /// Each block of nine consecutive runs is a random permutation of the
    /// nine pairs, so every pair is present once `n >= 9`.
    #[default]
    Balanced,
    /// Independent uniform pair per run.
    Iid,
}

impl std::str::FromStr for PairSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(PairSchedule::Balanced),
            "iid" => Ok(PairSchedule::Iid),
            _ => Err(Error::Parse(format!("unknown pair schedule {s:?}"))),
        }
    }
}

impl PairSchedule {
    pub fn pairs(self, seed: MasterSeed, n_runs: u64) -> Vec<SettingPair> {
        match self {
            PairSchedule::Iid => {
                (0..n_runs)
                    .map(|id| {
                        SettingPair::from_index(
                            below(9, &mut seed.stream(id, Component::Pair)) as usize
                        )
                    })
                    .collect()
            }
            PairSchedule::Balanced => {
                let mut out = Vec::with_capacity(n_runs as usize);
                for block in 0..n_runs.div_ceil(9) {
                    let mut rng = seed.stream(block, Component::Schedule);
                    let mut perm = SettingPair::ALL;
                    for i in (1..9).rev() {
                        perm.swap(i, below(i as u64 + 1, &mut rng) as usize);
                    }
                    let take = (n_runs - block * 9).min(9) as usize;
                    out.extend_from_slice(&perm[..take]);
                }
                out
            }
        }
    }
}

/// Runs `pairs.len()` runs with ids `0..`. Models without a message function
/// run in parallel; the log is identical to sequential execution.
pub fn simulate_pairs(
    model: &ExtendedModel,
    pairs: &[SettingPair],
    seed: MasterSeed,
) -> Result<Vec<RunRecord>> {
    if model.message.is_none() {
        let records = pairs
            .par_iter()
            .enumerate()
            .map(|(id, &pair)| run_once(model, id as u64, pair, seed, &[]))
            .collect::<Result<Vec<_>, ModelError>>()?;
        return Ok(records);
    }
    let mut log: Vec<RunRecord> = Vec::with_capacity(pairs.len());
    for (id, &pair) in pairs.iter().enumerate() {
        let record = run_once(model, id as u64, pair, seed, &log)?;
        log.push(record);
    }
    Ok(log)
}

pub fn simulate(
    model: &ExtendedModel,
    n_runs: u64,
    seed: MasterSeed,
    schedule: PairSchedule,
) -> Result<Vec<RunRecord>> {
    simulate_pairs(model, &schedule.pairs(seed, n_runs), seed)
}

/// Same statistics as `simulate(..).iter().collect()`, without keeping the log.
pub fn simulate_stats(
    model: &ExtendedModel,
    n_runs: u64,
    seed: MasterSeed,
    schedule: PairSchedule,
) -> Result<StatsAccumulator> {
    if model.message.is_some() {
        return Ok(simulate(model, n_runs, seed, schedule)?.iter().collect());
    }
    let pairs = schedule.pairs(seed, n_runs);
    let acc = pairs
        .par_iter()
        .enumerate()
        .try_fold(StatsAccumulator::new, |mut acc, (id, &pair)| {
            acc.accumulate(&run_once(model, id as u64, pair, seed, &[])?);
            Ok::<_, ModelError>(acc)
        })
        .try_reduce(StatsAccumulator::new, |a, b| Ok(a.merge(&b)))?;
    Ok(acc)
}

/// Agreement counts on same-setting runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AgreementStats {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub setting: Option<Setting>,
    pub runs: u64,
    pub agreements: u64,
    pub equal_time_runs: u64,
    pub equal_time_agreements: u64,
    pub agreement_rate: Option<f64>,
    pub equal_time_agreement_rate: Option<f64>,
}

impl AgreementStats {
    fn add(&mut self, record: &RunRecord) {
        let agree = record.outcome1 == record.outcome2;
        self.runs += 1;
        self.agreements += u64::from(agree);
        if record.t1 == record.t2 {
            self.equal_time_runs += 1;
            self.equal_time_agreements += u64::from(agree);
        }
    }

    fn finish(mut self) -> Self {
        let rate = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        self.agreement_rate = rate(self.agreements, self.runs);
        self.equal_time_agreement_rate = rate(self.equal_time_agreements, self.equal_time_runs);
        self
    }
}

/// Perfect correlation overall and restricted to bit-identical times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerfectCorrelationReport {
    pub overall: AgreementStats,
    pub per_setting: Vec<AgreementStats>,
}

impl PerfectCorrelationReport {
    /// Uses only the diagonal runs of the log.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a RunRecord>) -> Self {
        let mut overall = AgreementStats::default();
        let mut per: Vec<AgreementStats> = Setting::ALL
            .iter()
            .map(|&s| AgreementStats {
                setting: Some(s),
                ..Default::default()
            })
            .collect();
        for r in records.into_iter().filter(|r| r.pair.is_diagonal()) {
            overall.add(r);
            per[r.pair.left.index()].add(r);
        }
        PerfectCorrelationReport {
            overall: overall.finish(),
            per_setting: per.into_iter().map(AgreementStats::finish).collect(),
        }
    }
}

/// Runs only diagonal pairs, cycling a, b, c by run id.
pub fn check_perfect_correlation(
    model: &ExtendedModel,
    n_runs: u64,
    seed: MasterSeed,
) -> Result<PerfectCorrelationReport> {
    if n_runs == 0 {
        return Err(Error::Precondition("n_runs must be at least 1".into()));
    }
    let pairs: Vec<SettingPair> = (0..n_runs)
        .map(|i| {
            let s = Setting::from_index((i % 3) as usize);
            SettingPair::new(s, s)
        })
        .collect();
    let records = simulate_pairs(model, &pairs, seed)?;
    Ok(PerfectCorrelationReport::from_records(&records))
}

/// A probe on which the message changed with the substituted setting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SettingIndependenceWitness {
    pub probe: u64,
    pub station: Station,
    pub time: Time,
    pub history_len: usize,
    pub outputs: Vec<(Setting, Value)>,
}

impl fmt::Display for SettingIndependenceWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "probe {} ({:?}, t={}):",
            self.probe, self.station, self.time
        )?;
        for (s, v) in &self.outputs {
            write!(f, " {s}->{v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum IndependenceVerdict {
    Pass { probes: u64 },
    Fail { witness: SettingIndependenceWitness },
}

impl IndependenceVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, IndependenceVerdict::Pass { .. })
    }
}

fn synthetic_history(rng: &mut dyn RngCore) -> Vec<RunRecord> {
    let len = below(4, rng);
    (0..len)
        .map(|id| {
            let pair = SettingPair::from_index(below(9, rng) as usize);
            let o = |bit: u64| {
                if bit == 0 {
                    Outcome::Plus
                } else {
                    Outcome::Minus
                }
            };
            let bits = rng.next_u64();
            RunRecord::new(
                id,
                pair,
                Time(rng.next_u64()),
                Time(rng.next_u64()),
                o(bits & 1),
                o((bits >> 1) & 1),
            )
        })
        .collect()
}

/// Evaluates the message function on random (time, history, randomness)
/// probes with the setting slot set to a, b and c in turn; all three must
/// agree on every probe.
pub fn check_setting_independence(
    msg: &dyn MessageFunction,
    probe_count: u64,
    seed: MasterSeed,
) -> Result<IndependenceVerdict> {
    if probe_count == 0 {
        return Err(Error::Precondition("probe_count must be at least 1".into()));
    }
    for probe in 0..probe_count {
        let mut probe_rng = seed.stream(probe, Component::Probe);
        let time = Time(probe_rng.next_u64());
        let station = if probe_rng.next_u64() & 1 == 0 {
            Station::S1
        } else {
            Station::S2
        };
        let history = synthetic_history(&mut probe_rng);
        let randomness = seed.stream(probe, Component::MessageS1);
        let outputs: Vec<(Setting, Value)> = Setting::ALL
            .iter()
            .map(|&s| {
                let input = MessageInput {
                    station,
                    time,
                    history: &history,
                    setting_slot: s,
                };
                (s, msg.emit(&input, &mut randomness.clone()))
            })
            .collect();
        if outputs.iter().any(|(_, v)| *v != outputs[0].1) {
            return Ok(IndependenceVerdict::Fail {
                witness: SettingIndependenceWitness {
                    probe,
                    station,
                    time,
                    history_len: history.len(),
                    outputs,
                },
            });
        }
    }
    Ok(IndependenceVerdict::Pass {
        probes: probe_count,
    })
}

/// Changing only S2's setting must leave S1's time and outcome untouched
/// (and vice versa). Returns the runs where it did not.
pub fn audit_locality(
    model: &ExtendedModel,
    n_runs: u64,
    seed: MasterSeed,
) -> Result<Vec<(u64, SettingPair, SettingPair)>> {
    let mut violations = Vec::new();
    for id in 0..n_runs {
        for local in Setting::ALL {
            let s1_views: Vec<(SettingPair, Time, Outcome)> = Setting::ALL
                .iter()
                .map(|&remote| {
                    let pair = SettingPair::new(local, remote);
                    run_once(model, id, pair, seed, &[]).map(|r| (pair, r.t1, r.outcome1))
                })
                .collect::<Result<_, _>>()?;
            let s2_views: Vec<(SettingPair, Time, Outcome)> = Setting::ALL
                .iter()
                .map(|&remote| {
                    let pair = SettingPair::new(remote, local);
                    run_once(model, id, pair, seed, &[]).map(|r| (pair, r.t2, r.outcome2))
                })
                .collect::<Result<_, _>>()?;
            for views in [s1_views, s2_views] {
                for v in &views[1..] {
                    if (v.1, v.2) != (views[0].1, views[0].2) {
                        violations.push((id, views[0].0, v.0));
                    }
                }
            }
        }
    }
    Ok(violations)
}

/// Probes used by the message-policy gate in [`model_report`].
pub const POLICY_PROBES: u64 = 1_000;

/// Salt separating the policy-gate probes from the simulated runs.
const POLICY_SALT: u64 = 0x5e77_1a9c;

/// The stats document written for a simulation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsReport {
    pub runs: u64,
    pub per_pair_counts:
        std::collections::BTreeMap<String, std::collections::BTreeMap<String, u64>>,
    pub per_pair_tables: Option<NineDistributions>,
    #[serde(with = "rational::serde_str_opt")]
    pub overall_average_uniform: Option<Rational>,
    #[serde(with = "rational::serde_str_opt")]
    pub overall_average_runweighted: Option<Rational>,
    pub estimate: Option<Estimate>,
    pub marginal_report: Option<MarginalReport>,
    pub realizability: Option<RealizabilityResult>,
}

impl StatsReport {
    pub fn from_accumulator(acc: &StatsAccumulator) -> Self {
        let nine = acc.empirical_nine().ok();
        let per_pair_counts = SettingPair::ALL
            .iter()
            .map(|&pair| {
                let cells = Outcome::ALL
                    .iter()
                    .flat_map(|&x| Outcome::ALL.iter().map(move |&y| (x, y)))
                    .map(|(x, y)| (format!("{}{}", x.sign(), y.sign()), acc.count(pair, x, y)))
                    .collect();
                (pair.to_string(), cells)
            })
            .collect();
        StatsReport {
            runs: acc.total_runs(),
            per_pair_counts,
            overall_average_uniform: nine.as_ref().map(crate::realizability::average_from_nine),
            overall_average_runweighted: acc.run_weighted_average(),
            estimate: acc.average_estimate().ok(),
            marginal_report: nine.as_ref().map(marginal_consistency),
            realizability: nine.as_ref().map(joint_realizability),
            per_pair_tables: nine,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelReport {
    pub model: String,
    pub seed: u64,
    pub schedule: PairSchedule,
    #[serde(flatten)]
    pub stats: StatsReport,
    pub perfect_correlation: PerfectCorrelationReport,
}

/// Simulates `n_runs` runs and summarises them. Models whose message
/// function reads the current setting are refused.
pub fn model_report(
    model: &ExtendedModel,
    n_runs: u64,
    seed: MasterSeed,
    schedule: PairSchedule,
) -> Result<(ModelReport, Vec<RunRecord>)> {
    if n_runs < 9 {
        return Err(Error::Precondition(format!(
            "need at least 9 runs, got {n_runs}"
        )));
    }
    if let Some(msg) = model.message() {
        if let IndependenceVerdict::Fail { witness } =
            check_setting_independence(msg, POLICY_PROBES, seed.derive(POLICY_SALT))?
        {
            return Err(Error::PolicyViolation(Box::new(witness)));
        }
    }
    let records = simulate(model, n_runs, seed, schedule)?;
    let acc: StatsAccumulator = records.iter().collect();
    let report = ModelReport {
        model: model.name().to_string(),
        seed: seed.0,
        schedule,
        stats: StatsReport::from_accumulator(&acc),
        perfect_correlation: PerfectCorrelationReport::from_records(&records),
    };
    Ok((report, records))
}

#[cfg(test)]
mod tests;
