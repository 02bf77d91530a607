use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MULTI_CLASS_ACTIONS: [&str; 3] = ["modify", "cancel", "other"];
pub const MULTI_LABEL_ACTIONS: [&str; 6] = [
    "modify",
    "cancel",
    "add_attendee",
    "remove_attendee",
    "book_room",
    "send_notes",
];
pub const N_LABELS: usize = MULTI_LABEL_ACTIONS.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    MultiClass,
    MultiLabel,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::MultiClass => "multiclass",
            TaskKind::MultiLabel => "multilabel",
        }
    }

    pub fn action_names(self) -> &'static [&'static str] {
        match self {
            TaskKind::MultiClass => &MULTI_CLASS_ACTIONS,
            TaskKind::MultiLabel => &MULTI_LABEL_ACTIONS,
        }
    }
}

/// What the assistant decided to do with a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntentAction {
    MultiClass(usize),
    MultiLabel([bool; N_LABELS]),
}

impl IntentAction {
    pub fn multi_class(index: usize) -> Result<Self> {
        if index < MULTI_CLASS_ACTIONS.len() {
            Ok(IntentAction::MultiClass(index))
        } else {
            Err(Error::Contract(format!("intent index {index} out of range")))
        }
    }

    pub fn task(&self) -> TaskKind {
        match self {
            IntentAction::MultiClass(_) => TaskKind::MultiClass,
            IntentAction::MultiLabel(_) => TaskKind::MultiLabel,
        }
    }

    /// Names of the actions this intent asks for.
    pub fn action_names(&self) -> Vec<&'static str> {
        match self {
            IntentAction::MultiClass(i) => vec![MULTI_CLASS_ACTIONS[*i]],
            IntentAction::MultiLabel(bits) => bits
                .iter()
                .zip(MULTI_LABEL_ACTIONS)
                .filter(|(b, _)| **b)
                .map(|(_, n)| n)
                .collect(),
        }
    }

    /// Parses `modify`/`cancel`/`other` or a 6-character bit string.
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(i) = MULTI_CLASS_ACTIONS.iter().position(|&n| n == s) {
            return Ok(IntentAction::MultiClass(i));
        }
        parse_bits(s).map(IntentAction::MultiLabel)
    }
}

impl fmt::Display for IntentAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntentAction::MultiClass(i) => f.write_str(MULTI_CLASS_ACTIONS[*i]),
            IntentAction::MultiLabel(bits) => f.write_str(&bits_to_string(bits)),
        }
    }
}

impl Serialize for IntentAction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for IntentAction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        IntentAction::parse(&s).map_err(serde::de::Error::custom)
    }
}

pub fn bits_to_string(bits: &[bool; N_LABELS]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn parse_bits(s: &str) -> Result<[bool; N_LABELS]> {
    let mut out = [false; N_LABELS];
    if s.len() != N_LABELS {
        return Err(Error::Config(format!("expected {N_LABELS} bits, got {s:?}")));
    }
    for (o, c) in out.iter_mut().zip(s.chars()) {
        *o = match c {
            '0' => false,
            '1' => true,
            _ => return Err(Error::Config(format!("bad bit string {s:?}"))),
        };
    }
    Ok(out)
}

/// The multi-label action vectors a user can actually mean.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ValidComboSet(Vec<[bool; N_LABELS]>);

impl ValidComboSet {
    pub const DEFAULT: [&'static str; 6] = ["100000", "010000", "001000", "000100", "110000", "001100"];

    pub fn new(combos: Vec<[bool; N_LABELS]>) -> Result<Self> {
        if combos.is_empty() {
            return Err(Error::Config("valid combination set is empty".into()));
        }
        for (i, c) in combos.iter().enumerate() {
            if combos[..i].contains(c) {
                return Err(Error::Config(format!("duplicate combination {}", bits_to_string(c))));
            }
            if !c.iter().any(|&b| b) {
                return Err(Error::Config("the all-zero vector is not an intent".into()));
            }
        }
        Ok(ValidComboSet(combos))
    }

    pub fn contains(&self, bits: &[bool; N_LABELS]) -> bool {
        self.0.contains(bits)
    }

    pub fn combos(&self) -> &[[bool; N_LABELS]] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for ValidComboSet {
    fn default() -> Self {
        let combos = Self::DEFAULT
            .iter()
            .map(|s| parse_bits(s).expect("valid default"))
            .collect();
        ValidComboSet(combos)
    }
}

impl TryFrom<Vec<String>> for ValidComboSet {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        ValidComboSet::new(v.iter().map(|s| parse_bits(s)).collect::<Result<_>>()?)
    }
}

impl From<ValidComboSet> for Vec<String> {
    fn from(v: ValidComboSet) -> Self {
        v.0.iter().map(bits_to_string).collect()
    }
}
