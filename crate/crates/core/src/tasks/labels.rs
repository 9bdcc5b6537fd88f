use std::fmt;

use serde::{Deserialize, Serialize};

use crate::encode::{Instrument, ParticipantRecord};
use crate::error::{Error, Result};

/// Mania state for ASRM (> 5), depression state for QIDS (> 10).
pub const ASRM_ELEVATED_ABOVE: u8 = 5;
pub const QIDS_ELEVATED_ABOVE: u8 = 10;

/// Next-week outcome class. `Elevated` is manic for ASRM and depressed for QIDS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StateLabel {
    NoAnswer = 0,
    Normal = 1,
    Elevated = 2,
}

impl StateLabel {
    pub const ALL: [StateLabel; 3] = [StateLabel::NoAnswer, StateLabel::Normal, StateLabel::Elevated];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self, instrument: Instrument) -> &'static str {
        match (self, instrument) {
            (StateLabel::NoAnswer, _) => "no answer",
            (StateLabel::Normal, _) => "normal",
            (StateLabel::Elevated, Instrument::Asrm) => "manic",
            (StateLabel::Elevated, Instrument::Qids) => "depressed",
        }
    }
}

pub fn state_label(score: Option<u8>, instrument: Instrument) -> Result<StateLabel> {
    let Some(score) = score else {
        return Ok(StateLabel::NoAnswer);
    };
    check_range(score, instrument)?;
    let cut = match instrument {
        Instrument::Asrm => ASRM_ELEVATED_ABOVE,
        Instrument::Qids => QIDS_ELEVATED_ABOVE,
    };
    Ok(if score > cut { StateLabel::Elevated } else { StateLabel::Normal })
}

/// Symptom severity category obtained from raw-score cut-offs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    None0 = 0,
    Mild = 1,
    Moderate = 2,
    Severe = 3,
    VerySevere = 4,
}

impl Severity {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::None0 => "none",
            Severity::Mild => "mild",
            Severity::Moderate => "moderate",
            Severity::Severe => "severe",
            Severity::VerySevere => "very severe",
        })
    }
}

/// Boundary choices recorded alongside severity results.
pub const SEVERITY_NOTES: [&str; 2] = [
    "QIDS score 0 is assigned to the none bucket (cut-offs list none as 1-5)",
    "ASRM score 17 is listed under both severe (14-17) and very severe (17-20); assigned to severe",
];

/// QIDS: none 0-5, mild 6-10, moderate 11-15, severe 16-20, very severe 21-27.
/// ASRM: none 0-5, mild 6-9, moderate 10-13, severe 14-17, very severe 18-20.
pub fn severity_bucket(score: u8, instrument: Instrument) -> Result<Severity> {
    check_range(score, instrument)?;
    let upper: [u8; 4] = match instrument {
        Instrument::Qids => [5, 10, 15, 20],
        Instrument::Asrm => [5, 9, 13, 17],
    };
    Ok(match upper.iter().position(|&u| score <= u) {
        Some(0) => Severity::None0,
        Some(1) => Severity::Mild,
        Some(2) => Severity::Moderate,
        Some(3) => Severity::Severe,
        _ => Severity::VerySevere,
    })
}

fn check_range(score: u8, instrument: Instrument) -> Result<()> {
    if score > instrument.max_score() {
        return Err(Error::invalid(format!(
            "{} score {score} outside 0..={}",
            instrument,
            instrument.max_score()
        )));
    }
    Ok(())
}

/// Frequencies of the three state labels over a whole record.
pub fn true_proportions(record: &ParticipantRecord, instrument: Instrument) -> Result<[f64; 3]> {
    label_frequencies(record.weeks.iter().map(|w| w.score(instrument)), instrument)
}

pub(crate) fn label_frequencies<I>(scores: I, instrument: Instrument) -> Result<[f64; 3]>
where
    I: IntoIterator<Item = Option<u8>>,
{
    let mut counts = [0usize; 3];
    for s in scores {
        counts[state_label(s, instrument)?.index()] += 1;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::insufficient("no weeks to compute state proportions from"));
    }
    Ok(counts.map(|c| c as f64 / total as f64))
}
