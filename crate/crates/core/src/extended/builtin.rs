//! Demonstration models shipped with the harness.
//!
//! * `static`: the classical instruction-set model for a given law `p`.
//! * `timeslot`: both stations read the same color triple from the time
//!   slot of a shared clock; times are always equal.
//! * `desync`: the same outcome rule, but each station's time is offset by
//!   a per-setting amount and, with probability `jitter`, replaced by a
//!   local draw, so equal settings no longer imply equal times.

use num_traits::Signed;
use rand::RngCore;
use serde::Deserialize;

use super::{ExtendedModel, LocalView, MessageInput, Value};
use crate::error::{Error, ModelError, Result};
use crate::rational::{self, RatStr, Rational};
use crate::rng::{bernoulli, threshold, DiscreteSampler};
use crate::types::{InstructionSet, Outcome, ProbabilityVector8, Setting, Station, Time};

/// The instruction set assigned to the eighth of the unit interval
/// containing `t`, in canonical row order.
pub fn slot_instruction(t: Time) -> InstructionSet {
    InstructionSet::from_row((t.0 >> 61) as usize)
}

fn read_instruction(view: &LocalView<'_>) -> Result<Outcome, ModelError> {
    match view.source {
        Value::Instruction(set) => Ok(set.color(view.setting)),
        other => Err(ModelError(format!(
            "expected an instruction set from the source, got {other}"
        ))),
    }
}

fn read_parameter(view: &LocalView<'_>) -> Result<Outcome, ModelError> {
    match view.parameter {
        Value::Outcome(o) => Ok(*o),
        other => Err(ModelError(format!(
            "expected an outcome-valued parameter, got {other}"
        ))),
    }
}

fn slot_parameter(setting: Setting, time: Time, _: &mut dyn RngCore) -> Value {
    Value::Outcome(slot_instruction(time).color(setting))
}

/// Both particles carry one instruction set drawn from `p`.
pub fn static_classical(p: &ProbabilityVector8) -> ExtendedModel {
    let name = format!("static:{}", describe_p(p));
    let sampler = DiscreteSampler::new(p.as_slice());
    ExtendedModel::new(name, read_instruction, read_instruction).with_source(
        move |_: Time, rng: &mut dyn RngCore| {
            Value::Instruction(InstructionSet::from_row(sampler.sample(rng)))
        },
    )
}

fn describe_p(p: &ProbabilityVector8) -> String {
    if *p == ProbabilityVector8::uniform() {
        return "uniform".into();
    }
    if let Some(row) = InstructionSet::ALL
        .into_iter()
        .find(|&r| *p == ProbabilityVector8::point_mass(r))
    {
        return format!("point:{row}");
    }
    p.as_slice()
        .iter()
        .map(rational::format)
        .collect::<Vec<_>>()
        .join(",")
}

/// Outcome `A_j(t) = B_j(t)` = color `j` of the slot instruction at the
/// common clock reading.
pub fn time_slot() -> ExtendedModel {
    ExtendedModel::new("timeslot", read_parameter, read_parameter)
        .with_parameters(slot_parameter, slot_parameter)
        .with_time_law(
            |_: Station, _: Setting, clock: &mut dyn RngCore, _: &mut dyn RngCore| {
                Time(clock.next_u64())
            },
        )
}

/// Per-setting time offset: a -> 0, b -> 1/3, c -> 2/3 (as 64-bit fractions).
pub fn setting_offset(setting: Setting) -> Time {
    Time((u64::MAX / 3) * setting.index() as u64)
}

pub fn desync_time(jitter: &Rational) -> Result<ExtendedModel> {
    if jitter.is_negative() || *jitter > rational::one() {
        return Err(Error::Precondition(format!(
            "jitter probability {jitter} outside [0,1]"
        )));
    }
    let cut = threshold(jitter);
    let law =
        move |_: Station, setting: Setting, clock: &mut dyn RngCore, local: &mut dyn RngCore| {
            let shared = Time(clock.next_u64());
            let base = if bernoulli(cut, local) {
                Time(local.next_u64())
            } else {
                shared
            };
            base.wrapping_add(setting_offset(setting))
        };
    Ok(ExtendedModel::new(
        format!("desync:{}", rational::format(jitter)),
        read_parameter,
        read_parameter,
    )
    .with_parameters(slot_parameter, slot_parameter)
    .with_time_law(law))
}

/// Message functions available to configured models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinMessage {
    /// Always `()`.
    Constant,
    /// The sender's measurement time.
    Time,
    /// Number of earlier runs.
    HistoryLength,
    /// The sender's current setting; refused by the policy gate.
    SettingCopy,
}

impl BuiltinMessage {
    pub fn emit(self, input: &MessageInput<'_>) -> Value {
        match self {
            BuiltinMessage::Constant => Value::Unit,
            BuiltinMessage::Time => Value::Time(input.time),
            BuiltinMessage::HistoryLength => Value::Int(input.history.len() as i64),
            BuiltinMessage::SettingCopy => Value::Setting(input.setting_slot),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PSpec {
    /// `uniform`, `point:RRG` or a comma-separated list.
    Text(String),
    List(Box<ProbabilityVector8>),
}

impl PSpec {
    pub fn resolve(&self) -> Result<ProbabilityVector8> {
        match self {
            PSpec::Text(s) => s.parse(),
            PSpec::List(p) => Ok((**p).clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelKind {
    Static {
        p: PSpec,
    },
    Timeslot,
    Desync {
        #[serde(default)]
        jitter: Option<RatStr>,
    },
}

/// A built-in model plus an optional message function, as read from a
/// model config file, e.g. `{"kind": "desync", "jitter": "1/4", "message": "time"}`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    #[serde(default)]
    pub message: Option<BuiltinMessage>,
}

impl ModelSpec {
    /// `static:<p>`, `timeslot`, `desync` or `desync:<jitter>`.
    pub fn from_selector(selector: &str) -> Result<Self> {
        let kind = if let Some(p) = selector.strip_prefix("static:") {
            ModelKind::Static {
                p: PSpec::Text(p.to_string()),
            }
        } else if selector == "timeslot" {
            ModelKind::Timeslot
        } else if selector == "desync" {
            ModelKind::Desync { jitter: None }
        } else if let Some(j) = selector.strip_prefix("desync:") {
            ModelKind::Desync {
                jitter: Some(RatStr(rational::parse(j)?)),
            }
        } else {
            return Err(Error::Parse(format!("unknown model {selector:?}")));
        };
        Ok(ModelSpec {
            kind,
            message: None,
        })
    }

    pub fn build(&self) -> Result<ExtendedModel> {
        let model = match &self.kind {
            ModelKind::Static { p } => static_classical(&p.resolve()?),
            ModelKind::Timeslot => time_slot(),
            ModelKind::Desync { jitter } => desync_time(
                &jitter
                    .as_ref()
                    .map_or_else(|| rational::ratio(1, 2), |j| j.0.clone()),
            )?,
        };
        Ok(match self.message {
            Some(m) => {
                let name = format!("{}+{}", model.name(), message_name(m));
                let mut model =
                    model.with_message(move |input: &MessageInput<'_>, _: &mut dyn RngCore| {
                        m.emit(input)
                    });
                model.name = name;
                model
            }
            None => model,
        })
    }
}

fn message_name(m: BuiltinMessage) -> &'static str {
    match m {
        BuiltinMessage::Constant => "constant",
        BuiltinMessage::Time => "time",
        BuiltinMessage::HistoryLength => "history-length",
        BuiltinMessage::SettingCopy => "setting-copy",
    }
}
