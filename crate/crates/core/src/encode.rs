//! Missing-response encoding and feature extraction for paired weekly scores.
//!
//! A window of weekly ASRM/QIDS pairs becomes a 3-channel path: the
//! feed-forward-filled scores scaled by their instrument maxima, and the
//! cumulative missing count scaled by the window length, all cumulated over
//! time from a zero basepoint. Its truncated signature is the MRSF vector.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigcore::stream_signature;

pub const ASRM_MAX: u8 = 20;
pub const QIDS_MAX: u8 = 27;

/// Sentinel used for a missing response in the CSV schema.
pub const MISSING_SENTINEL: i64 = -1;

/// Channels in the encoded path: ASRM, QIDS, missing count.
pub const PATH_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "BD")]
    Bd,
    #[serde(rename = "HC")]
    Hc,
    #[serde(rename = "BPD")]
    Bpd,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Bd, Group::Hc, Group::Bpd];

    /// Class index used by the classifiers: BD=0, HC=1, BPD=2.
    pub fn index(self) -> usize {
        match self {
            Group::Bd => 0,
            Group::Hc => 1,
            Group::Bpd => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Group> {
        Group::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Bd => "BD",
            Group::Hc => "HC",
            Group::Bpd => "BPD",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "BD" => Ok(Group::Bd),
            "HC" => Ok(Group::Hc),
            "BPD" => Ok(Group::Bpd),
            other => Err(Error::invalid(format!("unknown group label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instrument {
    Asrm,
    Qids,
}

impl Instrument {
    pub const ALL: [Instrument; 2] = [Instrument::Asrm, Instrument::Qids];

    pub fn max_score(self) -> u8 {
        match self {
            Instrument::Asrm => ASRM_MAX,
            Instrument::Qids => QIDS_MAX,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Instrument::Asrm => "asrm",
            Instrument::Qids => "qids",
        }
    }
}

impl fmt::Display for Instrument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Instrument {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "asrm" => Ok(Instrument::Asrm),
            "qids" => Ok(Instrument::Qids),
            other => Err(Error::invalid(format!("unknown instrument {other:?}"))),
        }
    }
}

/// A paired weekly response. Both scores are present together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Response {
    asrm: u8,
    qids: u8,
}

impl Response {
    pub fn new(asrm: u8, qids: u8) -> Result<Self> {
        if asrm > ASRM_MAX {
            return Err(Error::invalid(format!("ASRM score {asrm} outside 0..={ASRM_MAX}")));
        }
        if qids > QIDS_MAX {
            return Err(Error::invalid(format!("QIDS score {qids} outside 0..={QIDS_MAX}")));
        }
        Ok(Self { asrm, qids })
    }

    pub fn asrm(self) -> u8 {
        self.asrm
    }

    pub fn qids(self) -> u8 {
        self.qids
    }

    pub fn score(self, instrument: Instrument) -> u8 {
        match instrument {
            Instrument::Asrm => self.asrm,
            Instrument::Qids => self.qids,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeeklyObservation {
    pub week: i64,
    /// `None` when the week's paired response is missing.
    pub response: Option<Response>,
}

impl WeeklyObservation {
    pub fn observed(week: i64, asrm: u8, qids: u8) -> Result<Self> {
        Ok(Self {
            week,
            response: Some(Response::new(asrm, qids)?),
        })
    }

    pub fn missing(week: i64) -> Self {
        Self { week, response: None }
    }

    pub fn is_missing(&self) -> bool {
        self.response.is_none()
    }

    pub fn score(&self, instrument: Instrument) -> Option<u8> {
        self.response.map(|r| r.score(instrument))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: String,
    pub group: Group,
    pub weeks: Vec<WeeklyObservation>,
}

impl ParticipantRecord {
    pub fn len(&self) -> usize {
        self.weeks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weeks.is_empty()
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.weeks.is_empty() {
            return 0.0;
        }
        self.weeks.iter().filter(|w| w.is_missing()).count() as f64 / self.weeks.len() as f64
    }
}

/// Labeled participants, in a stable order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    pub participants: Vec<ParticipantRecord>,
}

impl Cohort {
    pub fn new(participants: Vec<ParticipantRecord>) -> Self {
        Self { participants }
    }

    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    pub fn of_group(&self, group: Group) -> impl Iterator<Item = &ParticipantRecord> {
        self.participants.iter().filter(move |p| p.group == group)
    }
}

/// Output of [`feed_forward_fill`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilledWindow {
    /// `[asrm, qids]` per week, no gaps.
    pub filled: Vec<[f64; 2]>,
    /// Missing weeks among `0..=t`.
    pub missing_count: Vec<u32>,
}

/// Replace each missing week by the nearest earlier observed week.
///
/// Leading missing weeks take the first observed value; an all-missing window
/// is filled with zeros.
pub fn feed_forward_fill(window: &[WeeklyObservation]) -> FilledWindow {
    let first = window
        .iter()
        .find_map(|w| w.response)
        .map(|r| [f64::from(r.asrm), f64::from(r.qids)])
        .unwrap_or([0.0, 0.0]);
    let mut last = first;
    let mut missing = 0u32;
    let mut filled = Vec::with_capacity(window.len());
    let mut missing_count = Vec::with_capacity(window.len());
    for w in window {
        match w.response {
            Some(r) => last = [f64::from(r.asrm), f64::from(r.qids)],
            None => missing += 1,
        }
        filled.push(last);
        missing_count.push(missing);
    }
    FilledWindow {
        filled,
        missing_count,
    }
}

/// Scale each channel and cumulate over time from a zero basepoint.
///
/// Scaled week `t` is `(asrm/20, qids/27, missing_count/n)`; row `t+1` of the
/// returned `(n+1)×3` path is the running sum of scaled weeks `0..=t`.
pub fn normalize_and_cumulate(window: &FilledWindow) -> Result<Vec<[f64; PATH_DIM]>> {
    let n = window.filled.len();
    if n == 0 {
        return Err(Error::insufficient("cannot normalize an empty window"));
    }
    if window.missing_count.len() != n {
        return Err(Error::invalid("filled scores and missing counts differ in length"));
    }
    let scale = [
        1.0 / f64::from(ASRM_MAX),
        1.0 / f64::from(QIDS_MAX),
        1.0 / n as f64,
    ];
    let mut path = Vec::with_capacity(n + 1);
    let mut acc = [0.0; PATH_DIM];
    path.push(acc);
    for (scores, &count) in window.filled.iter().zip(&window.missing_count) {
        let week = [scores[0], scores[1], f64::from(count)];
        for c in 0..PATH_DIM {
            acc[c] += week[c] * scale[c];
        }
        path.push(acc);
    }
    Ok(path)
}

/// Length of the MRSF vector at a given truncation level.
pub fn mrsf_len(level: usize) -> usize {
    (1..=level).map(|k| PATH_DIM.pow(k as u32)).sum()
}

/// Missing-response-incorporated signature features of a window.
pub fn mrsf(window: &[WeeklyObservation], level: usize) -> Result<Vec<f64>> {
    if window.len() < 2 {
        return Err(Error::insufficient(format!(
            "MRSF needs a window of at least 2 weeks, got {}",
            window.len()
        )));
    }
    let path = normalize_and_cumulate(&feed_forward_fill(window))?;
    Ok(stream_signature(&path, level)?.to_features())
}

/// Per-instrument mean over observed weeks; 0 where nothing was observed.
pub fn naive_features(window: &[WeeklyObservation]) -> [f64; 2] {
    let (mut sa, mut sq, mut n) = (0.0, 0.0, 0usize);
    for r in window.iter().filter_map(|w| w.response) {
        sa += f64::from(r.asrm);
        sq += f64::from(r.qids);
        n += 1;
    }
    if n == 0 {
        [0.0, 0.0]
    } else {
        [sa / n as f64, sq / n as f64]
    }
}

/// A uniformly placed block of `length` consecutive weeks.
pub fn extract_window<'a, R: Rng + ?Sized>(
    record: &'a ParticipantRecord,
    length: usize,
    rng: &mut R,
) -> Result<&'a [WeeklyObservation]> {
    if length == 0 {
        return Err(Error::invalid("window length must be positive"));
    }
    if record.weeks.len() < length {
        return Err(Error::insufficient(format!(
            "participant {} has {} weeks, window needs {length}",
            record.id,
            record.weeks.len()
        )));
    }
    let start = rng.random_range(0..=record.weeks.len() - length);
    Ok(&record.weeks[start..start + length])
}
