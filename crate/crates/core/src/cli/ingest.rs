//! Cohort CSV reading and writing.
//!
//! Schema: `participant_id,group,week,asrm,qids`, comma-delimited, integer
//! scores, `-1` in both score columns for a missed week. Lines starting with
//! `#` are comments.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use log::{info, warn};

use crate::encode::{Cohort, Group, ParticipantRecord, WeeklyObservation, MISSING_SENTINEL};
use crate::error::{Error, Result};
use crate::synth::MIN_WEEKS;
use crate::tasks::Exclusion;

pub const COHORT_HEADER: [&str; 5] = ["participant_id", "group", "week", "asrm", "qids"];

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub cohort: Cohort,
    pub exclusions: Vec<Exclusion>,
    /// Rows identical to an earlier row.
    pub duplicates_removed: usize,
    /// Later rows for a (participant, week) already seen with other scores.
    pub repeats_removed: usize,
}

struct Row {
    id: String,
    group: Group,
    week: i64,
    scores: Option<(u8, u8)>,
}

/// Reads a cohort CSV. Participants keep their order of first appearance
/// and their weeks are sorted.
pub fn ingest(path: &Path) -> Result<Ingested> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ingest_str(&text, path)
}

/// [`ingest`] on in-memory text; `path` is only used in diagnostics.
pub fn ingest_str(text: &str, path: &Path) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != COHORT_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: reader.position().line().max(1),
            message: format!("header must be {}, found {}", COHORT_HEADER.join(","), header.join(",")),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, (Group, Vec<Row>)> = HashMap::new();
    let mut seen: HashMap<(String, i64), Option<(u8, u8)>> = HashMap::new();
    let (mut duplicates, mut repeats) = (0, 0);

    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row = parse_row(&record, path, line)?;
        let key = (row.id.clone(), row.week);
        if let Some(first) = seen.get(&key) {
            if *first == row.scores {
                duplicates += 1;
            } else {
                warn!("{}:{line}: participant {} week {} repeated; keeping the first response", path.display(), row.id, row.week);
                repeats += 1;
            }
            continue;
        }
        seen.insert(key, row.scores);
        match rows.get_mut(&row.id) {
            Some((group, _)) if *group != row.group => {
                return Err(Error::Validation {
                    path: path.to_path_buf(),
                    line,
                    message: format!("participant {} listed under {} and {}", row.id, group, row.group),
                });
            }
            Some((_, list)) => list.push(row),
            None => {
                order.push(row.id.clone());
                rows.insert(row.id.clone(), (row.group, vec![row]));
            }
        }
    }

    let mut participants = Vec::new();
    let mut exclusions = Vec::new();
    for id in order {
        let (group, mut list) = rows.remove(&id).expect("every id has rows");
        list.sort_by_key(|r| r.week);
        if list.len() < MIN_WEEKS {
            let reason = format!("{} weeks of data, need at least {MIN_WEEKS}", list.len());
            info!("excluding participant {id}: {reason}");
            exclusions.push(Exclusion { participant_id: id, reason });
            continue;
        }
        let weeks = list
            .into_iter()
            .map(|r| match r.scores {
                Some((a, q)) => WeeklyObservation::observed(r.week, a, q),
                None => Ok(WeeklyObservation::missing(r.week)),
            })
            .collect::<Result<Vec<_>>>()?;
        participants.push(ParticipantRecord { id, group, weeks });
    }
    if duplicates > 0 {
        info!("removed {duplicates} duplicate rows");
    }
    Ok(Ingested {
        cohort: Cohort::new(participants),
        exclusions,
        duplicates_removed: duplicates,
        repeats_removed: repeats,
    })
}

fn parse_row(record: &csv::StringRecord, path: &Path, line: u64) -> Result<Row> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if record.len() != COHORT_HEADER.len() {
        return Err(parse_err(format!("expected {} fields, found {}", COHORT_HEADER.len(), record.len())));
    }
    let id = record[0].to_string();
    if id.is_empty() {
        return Err(parse_err("empty participant_id".into()));
    }
    let group: Group = record[1].parse().map_err(|_| parse_err(format!("unknown group {:?}", &record[1])))?;
    let int = |i: usize| -> Result<i64> {
        record[i]
            .parse::<i64>()
            .map_err(|_| parse_err(format!("{} is not an integer: {:?}", COHORT_HEADER[i], &record[i])))
    };
    let week = int(2)?;
    let (asrm, qids) = (int(3)?, int(4)?);
    let invalid = |message: String| Error::Validation {
        path: path.to_path_buf(),
        line,
        message,
    };
    let sentinel = i64::from(MISSING_SENTINEL);
    let scores = match (asrm == sentinel, qids == sentinel) {
        (true, true) => None,
        (true, false) | (false, true) => {
            return Err(invalid(format!(
                "asrm={asrm}, qids={qids}: a missed week must have both scores {sentinel}"
            )))
        }
        (false, false) => {
            if !(0..=20).contains(&asrm) || !(0..=27).contains(&qids) {
                return Err(invalid(format!("asrm={asrm}, qids={qids} outside 0..=20 / 0..=27")));
            }
            Some((asrm as u8, qids as u8))
        }
    };
    Ok(Row { id, group, week, scores })
}

/// Writes `cohort` in the ingest schema, preceded by `# ` comment lines.
pub fn write_cohort_csv(cohort: &Cohort, path: &Path, comments: &[String]) -> Result<()> {
    let mut out = Vec::new();
    for c in comments {
        writeln!(out, "# {c}").expect("writing to memory");
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COHORT_HEADER)?;
    for p in &cohort.participants {
        for obs in &p.weeks {
            let (a, q) = match obs.response {
                Some(r) => (i64::from(r.asrm()), i64::from(r.qids())),
                None => (i64::from(MISSING_SENTINEL), i64::from(MISSING_SENTINEL)),
            };
            w.write_record([p.id.clone(), p.group.to_string(), obs.week.to_string(), a.to_string(), q.to_string()])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn rows(id: &str, group: &str, weeks: std::ops::Range<i64>) -> String {
        weeks.map(|w| format!("{id},{group},{w},2,5\n")).collect()
    }

    fn p() -> PathBuf {
        PathBuf::from("mem.csv")
    }

    #[test]
    fn duplicates_and_repeats() {
        let mut text = String::from("participant_id,group,week,asrm,qids\n");
        text += &rows("a", "BD", 0..20);
        text += "a,BD,3,2,5\n";
        text += "a,BD,4,9,9\n";
        let out = ingest_str(&text, &p()).unwrap();
        assert_eq!(out.duplicates_removed, 1);
        assert_eq!(out.repeats_removed, 1);
        let a = &out.cohort.participants[0];
        assert_eq!(a.len(), 20);
        assert_eq!(a.weeks[4].score(crate::encode::Instrument::Asrm), Some(2));
    }

    #[test]
    fn short_participants_are_excluded() {
        let mut text = String::from("participant_id,group,week,asrm,qids\n");
        text += &rows("a", "HC", 0..19);
        text += &rows("b", "HC", 0..20);
        let out = ingest_str(&text, &p()).unwrap();
        assert_eq!(out.cohort.len(), 1);
        assert_eq!(out.exclusions.len(), 1);
        assert_eq!(out.exclusions[0].participant_id, "a");
        assert!(out.exclusions[0].reason.contains("19 weeks"));
    }

    #[test]
    fn one_sided_missing_is_a_validation_error() {
        let text = "participant_id,group,week,asrm,qids\na,BD,0,-1,7\n";
        match ingest_str(text, &p()) {
            Err(Error::Validation { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("both scores"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_rows_report_their_line() {
        let text = "# comment\nparticipant_id,group,week,asrm,qids\na,BD,0,1,2\na,BD,x,1,2\n";
        match ingest_str(text, &p()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let text = "participant_id,group,week,asrm,qids\na,XX,0,1,2\n";
        assert!(matches!(ingest_str(text, &p()), Err(Error::Parse { line: 2, .. })));
        let text = "participant_id,group,week,asrm,qids\na,BD,0,1\n";
        assert!(matches!(ingest_str(text, &p()), Err(Error::Parse { line: 2, .. })));
        let text = "participant,group,week,asrm,qids\n";
        assert!(matches!(ingest_str(text, &p()), Err(Error::Parse { .. })));
    }

    #[test]
    fn other_sentinels_and_ranges_are_rejected() {
        for row in ["a,BD,0,-2,-2", "a,BD,0,21,3", "a,BD,0,3,28"] {
            let text = format!("participant_id,group,week,asrm,qids\n{row}\n");
            assert!(matches!(ingest_str(&text, &p()), Err(Error::Validation { .. })), "{row}");
        }
    }

    #[test]
    fn conflicting_groups_are_rejected() {
        let text = "participant_id,group,week,asrm,qids\na,BD,0,1,2\na,HC,1,1,2\n";
        assert!(matches!(ingest_str(text, &p()), Err(Error::Validation { line: 3, .. })));
    }

    #[test]
    fn weeks_are_sorted_and_missing_weeks_kept() {
        let mut text = String::from("participant_id,group,week,asrm,qids\n");
        for w in (0..20).rev() {
            text += &if w == 5 { format!("a,BPD,{w},-1,-1\n") } else { format!("a,BPD,{w},1,1\n") };
        }
        let out = ingest_str(&text, &p()).unwrap();
        let a = &out.cohort.participants[0];
        assert!(a.weeks.windows(2).all(|w| w[0].week < w[1].week));
        assert!(a.weeks[5].is_missing());
    }
}
