use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::labels::label_frequencies;
use super::{severity_bucket, split_train_test, state_label, true_proportions, Exclusion, FeatureMap, TaskConfig, SEVERITY_NOTES};
use crate::encode::{Cohort, Group, Instrument, ParticipantRecord};
use crate::error::{Error, Result};
use crate::eval::{bootstrap, EvalReport};
use crate::forest::{Targets, TreeEnsemble};
use crate::seed;

const N_STATES: usize = 3;

/// One (window, next week) pair: the window is `weeks[target - w .. target]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictionInstance {
    pub participant: usize,
    pub target: usize,
}

/// Every sliding window of `window_length` weeks followed by a target week.
pub fn prediction_instances(cohort: &Cohort, participant: usize, window_length: usize) -> Vec<PredictionInstance> {
    let len = cohort.participants[participant].len();
    (window_length..len)
        .map(|target| PredictionInstance { participant, target })
        .collect()
}

/// Number of (window, next week) buckets a record of `len` weeks yields.
pub fn rollout_bucket_count(len: usize, window_length: usize) -> usize {
    len.saturating_sub(window_length)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateCell {
    pub group: Group,
    pub instrument: Instrument,
    pub n_train: usize,
    /// Label frequencies (NoAnswer, Normal, Elevated) over all instances of the group.
    pub label_distribution: [f64; 3],
    pub mrsf: EvalReport,
    pub naive: EvalReport,
    /// Fitted (MRSF, naive) forests.
    #[serde(skip)]
    pub models: Option<(TreeEnsemble, TreeEnsemble)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateOutcome {
    pub cells: Vec<StateCell>,
    pub exclusions: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityReport {
    pub model: String,
    pub n_instances: usize,
    pub accuracy: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    /// Mean absolute difference of bucket indices.
    pub mae: f64,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCell {
    pub group: Group,
    pub instrument: Instrument,
    pub n_train: usize,
    pub mrsf: EvalReport,
    pub naive: EvalReport,
    pub mrsf_severity: SeverityReport,
    pub naive_severity: SeverityReport,
    /// Fitted (MRSF, naive) forests.
    #[serde(skip)]
    pub models: Option<(TreeEnsemble, TreeEnsemble)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    pub cells: Vec<ScoreCell>,
    pub exclusions: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutEntry {
    pub participant_id: String,
    pub group: Group,
    pub instrument: Instrument,
    pub predicted: [f64; 3],
    /// Label frequencies over the held-out target weeks.
    pub holdout_truth: [f64; 3],
    /// Label frequencies over the whole record.
    pub true_proportions: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutOutcome {
    pub horizon: usize,
    pub entries: Vec<RolloutEntry>,
    pub exclusions: Vec<Exclusion>,
}

/// Participants of each selected group with at least one instance, split
/// by participant so no record contributes to both sides.
struct GroupSplit {
    group: Group,
    members: Vec<usize>,
    train: Vec<usize>,
    test: Vec<usize>,
}

fn split_groups(cohort: &Cohort, config: &TaskConfig, tag: &str) -> Result<(Vec<GroupSplit>, Vec<Exclusion>)> {
    let w = config.window_length;
    let mut exclusions = Vec::new();
    let mut splits = Vec::new();
    for &group in &config.groups {
        let mut members = Vec::new();
        for (i, p) in cohort.participants.iter().enumerate() {
            if p.group != group {
                continue;
            }
            if p.len() <= w {
                exclusions.push(Exclusion {
                    participant_id: p.id.clone(),
                    reason: format!("{} weeks, need at least {}", p.len(), w + 1),
                });
            } else {
                members.push(i);
            }
        }
        if members.len() < 2 {
            return Err(Error::insufficient(format!(
                "group {group} has {} eligible participants, need at least 2",
                members.len()
            )));
        }
        let mut rng = seed::rng(config.seed, tag, group.index() as u64);
        let (mut train, mut test) = split_train_test(&members, config.split_fraction, &mut rng);
        train.sort_unstable();
        test.sort_unstable();
        splits.push(GroupSplit {
            group,
            members,
            train,
            test,
        });
    }
    Ok((splits, exclusions))
}

fn instances_of(cohort: &Cohort, participants: &[usize], w: usize) -> Vec<PredictionInstance> {
    participants
        .iter()
        .flat_map(|&p| prediction_instances(cohort, p, w))
        .collect()
}

fn window<'a>(cohort: &'a Cohort, inst: PredictionInstance, w: usize) -> &'a [crate::encode::WeeklyObservation] {
    &cohort.participants[inst.participant].weeks[inst.target - w..inst.target]
}

fn feature_rows(cohort: &Cohort, instances: &[PredictionInstance], w: usize, map: FeatureMap) -> Result<Vec<Vec<f64>>> {
    instances
        .par_iter()
        .map(|&i| map.features(window(cohort, i, w)))
        .collect()
}

fn target_score(cohort: &Cohort, inst: PredictionInstance, instrument: Instrument) -> Option<u8> {
    cohort.participants[inst.participant].weeks[inst.target].score(instrument)
}

fn state_labels(cohort: &Cohort, instances: &[PredictionInstance], instrument: Instrument) -> Result<Vec<usize>> {
    instances
        .iter()
        .map(|&i| state_label(target_score(cohort, i, instrument), instrument).map(|l| l.index()))
        .collect()
}

fn feature_maps(config: &TaskConfig) -> [FeatureMap; 2] {
    [FeatureMap::Mrsf { level: config.signature_level }, FeatureMap::Naive]
}

fn check_instances(group: Group, train: &[PredictionInstance], test: &[PredictionInstance]) -> Result<()> {
    if train.len() < 2 || test.is_empty() {
        return Err(Error::insufficient(format!(
            "group {group} yields {} training and {} test instances",
            train.len(),
            test.len()
        )));
    }
    Ok(())
}

/// Next-week state prediction, one pair of forests per group and instrument.
pub fn run_state_prediction(cohort: &Cohort, config: &TaskConfig) -> Result<StateOutcome> {
    config.validate()?;
    config.forest.validate()?;
    let w = config.window_length;
    let (splits, exclusions) = split_groups(cohort, config, "state-split")?;

    let mut cells = Vec::new();
    for split in &splits {
        let train = instances_of(cohort, &split.train, w);
        let test = instances_of(cohort, &split.test, w);
        check_instances(split.group, &train, &test)?;
        let all = instances_of(cohort, &split.members, w);
        let maps = feature_maps(config);
        let x_train: Vec<_> = maps.iter().map(|&m| feature_rows(cohort, &train, w, m)).collect::<Result<_>>()?;
        let x_test: Vec<_> = maps.iter().map(|&m| feature_rows(cohort, &test, w, m)).collect::<Result<_>>()?;

        for &instrument in &config.instruments {
            let cell_index = (split.group.index() * 2 + instrument_index(instrument)) as u64;
            let forest_seed = config.seed_for("state-forest", cell_index);
            let boot_seed = config.seed_for("state-bootstrap", cell_index);
            let y_train = state_labels(cohort, &train, instrument)?;
            let y_test = state_labels(cohort, &test, instrument)?;
            let label_distribution =
                label_frequencies(all.iter().map(|&i| target_score(cohort, i, instrument)), instrument)?;

            let mut reports = Vec::with_capacity(2);
            let mut models = Vec::with_capacity(2);
            for (k, map) in maps.iter().enumerate() {
                let model = TreeEnsemble::fit(
                    &x_train[k],
                    Targets::Classes { labels: &y_train, n_classes: N_STATES },
                    &config.forest,
                    forest_seed,
                )?;
                let probs = x_test[k].iter().map(|x| model.predict_proba(x)).collect::<Result<Vec<_>>>()?;
                reports.push(EvalReport::classification(
                    map.name(),
                    &y_test,
                    &probs,
                    N_STATES,
                    config.bootstrap_resamples,
                    boot_seed,
                )?);
                models.push(model);
            }
            let naive = reports.pop().expect("two reports");
            let mrsf = reports.pop().expect("two reports");
            let naive_model = models.pop().expect("two models");
            cells.push(StateCell {
                group: split.group,
                instrument,
                n_train: train.len(),
                label_distribution,
                mrsf,
                naive,
                models: Some((models.pop().expect("two models"), naive_model)),
            });
        }
    }
    Ok(StateOutcome { cells, exclusions })
}

fn instrument_index(instrument: Instrument) -> usize {
    match instrument {
        Instrument::Asrm => 0,
        Instrument::Qids => 1,
    }
}

/// Predicted state frequencies over the last `horizon` weeks of `record`,
/// each week predicted from the `window_length` weeks before it.
pub fn rollout_states(
    record: &ParticipantRecord,
    model: &TreeEnsemble,
    map: FeatureMap,
    window_length: usize,
    horizon: usize,
) -> Result<[f64; 3]> {
    if horizon == 0 {
        return Err(Error::invalid("rollout horizon must be positive"));
    }
    let buckets = rollout_bucket_count(record.len(), window_length);
    if buckets <= horizon {
        return Err(Error::insufficient(format!(
            "participant {} yields {buckets} buckets of {window_length} weeks, need more than {horizon}",
            record.id
        )));
    }
    let mut counts = [0usize; N_STATES];
    for target in record.len() - horizon..record.len() {
        let x = map.features(&record.weeks[target - window_length..target])?;
        counts[model.predict_class(&x)?] += 1;
    }
    Ok(counts.map(|c| c as f64 / horizon as f64))
}

/// Rollout for every participant with enough buckets, using an MRSF model
/// trained on all windows of the other participants in the same group.
pub fn run_rollout(cohort: &Cohort, config: &TaskConfig) -> Result<RolloutOutcome> {
    config.validate()?;
    config.forest.validate()?;
    let w = config.window_length;
    let h = config.rollout_horizon;
    if h == 0 {
        return Err(Error::invalid("rollout horizon must be positive"));
    }
    let map = FeatureMap::Mrsf { level: config.signature_level };

    let mut exclusions = Vec::new();
    let mut jobs = Vec::new();
    for &group in &config.groups {
        let in_group: Vec<usize> = (0..cohort.len())
            .filter(|&i| cohort.participants[i].group == group)
            .collect();
        for &i in &in_group {
            let p = &cohort.participants[i];
            let buckets = rollout_bucket_count(p.len(), w);
            if buckets <= h {
                exclusions.push(Exclusion {
                    participant_id: p.id.clone(),
                    reason: format!("{buckets} buckets of {w} weeks, need more than {h}"),
                });
                continue;
            }
            let others: Vec<usize> = in_group.iter().copied().filter(|&j| j != i).collect();
            for &instrument in &config.instruments {
                jobs.push((i, others.clone(), instrument));
            }
        }
    }

    let entries = jobs
        .par_iter()
        .map(|(i, others, instrument)| {
            let record = &cohort.participants[*i];
            let train = instances_of(cohort, others, w);
            if train.len() < 2 {
                return Err(Error::insufficient(format!(
                    "no training windows for the rollout of {}",
                    record.id
                )));
            }
            let x = feature_rows(cohort, &train, w, map)?;
            let y = state_labels(cohort, &train, *instrument)?;
            let stream = (*i as u64) << 1 | instrument_index(*instrument) as u64;
            let model = TreeEnsemble::fit(
                &x,
                Targets::Classes { labels: &y, n_classes: N_STATES },
                &config.forest,
                config.seed_for("rollout-forest", stream),
            )?;
            let predicted = rollout_states(record, &model, map, w, h)?;
            let holdout_truth = label_frequencies(
                record.weeks[record.len() - h..].iter().map(|o| o.score(*instrument)),
                *instrument,
            )?;
            Ok(RolloutEntry {
                participant_id: record.id.clone(),
                group: record.group,
                instrument: *instrument,
                predicted,
                holdout_truth,
                true_proportions: true_proportions(record, *instrument)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RolloutOutcome {
        horizon: h,
        entries,
        exclusions,
    })
}

/// Next-week score regression on instances whose target week was answered.
pub fn run_score_prediction(cohort: &Cohort, config: &TaskConfig) -> Result<ScoreOutcome> {
    config.validate()?;
    config.forest.validate()?;
    let w = config.window_length;
    let (splits, exclusions) = split_groups(cohort, config, "score-split")?;

    let mut cells = Vec::new();
    for split in &splits {
        for &instrument in &config.instruments {
            let answered = |inst: &PredictionInstance| target_score(cohort, *inst, instrument).is_some();
            let train: Vec<_> = instances_of(cohort, &split.train, w).into_iter().filter(answered).collect();
            let test: Vec<_> = instances_of(cohort, &split.test, w).into_iter().filter(answered).collect();
            check_instances(split.group, &train, &test)?;
            let score = |i: &PredictionInstance| f64::from(target_score(cohort, *i, instrument).expect("answered"));
            let y_train: Vec<f64> = train.iter().map(score).collect();
            let y_test: Vec<f64> = test.iter().map(score).collect();
            let max = f64::from(instrument.max_score());

            let cell_index = (split.group.index() * 2 + instrument_index(instrument)) as u64;
            let forest_seed = config.seed_for("score-forest", cell_index);
            let boot_seed = config.seed_for("score-bootstrap", cell_index);

            let mut reports = Vec::with_capacity(2);
            let mut severities = Vec::with_capacity(2);
            let mut models = Vec::with_capacity(2);
            for map in feature_maps(config) {
                let x_train = feature_rows(cohort, &train, w, map)?;
                let x_test = feature_rows(cohort, &test, w, map)?;
                let model = TreeEnsemble::fit(&x_train, Targets::Values(&y_train), &config.forest, forest_seed)?;
                let y_pred = x_test
                    .iter()
                    .map(|x| model.predict_value(x).map(|v| v.clamp(0.0, max)))
                    .collect::<Result<Vec<_>>>()?;
                reports.push(EvalReport::regression(
                    map.name(),
                    &y_test,
                    &y_pred,
                    config.bootstrap_resamples,
                    boot_seed,
                )?);
                severities.push(severity_report(
                    map.name(),
                    &y_test,
                    &y_pred,
                    instrument,
                    config.bootstrap_resamples,
                    boot_seed,
                )?);
                models.push(model);
            }
            let naive_model = models.pop().expect("two models");
            let naive_severity = severities.pop().expect("two reports");
            let mrsf_severity = severities.pop().expect("two reports");
            let naive = reports.pop().expect("two reports");
            let mrsf = reports.pop().expect("two reports");
            cells.push(ScoreCell {
                group: split.group,
                instrument,
                n_train: train.len(),
                mrsf,
                naive,
                mrsf_severity,
                naive_severity,
                models: Some((models.pop().expect("two models"), naive_model)),
            });
        }
    }
    Ok(ScoreOutcome { cells, exclusions })
}

/// Buckets rounded predictions and true scores, then compares bucket indices.
pub fn severity_report(
    model: &str,
    y_true: &[f64],
    y_pred: &[f64],
    instrument: Instrument,
    n_resamples: usize,
    seed: u64,
) -> Result<SeverityReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid("targets and predictions differ in length"));
    }
    if y_true.is_empty() {
        return Err(Error::insufficient("severity report over no instances"));
    }
    let bucket = |v: f64| -> Result<usize> {
        let max = f64::from(instrument.max_score());
        if !v.is_finite() {
            return Err(Error::invalid("non-finite score"));
        }
        Ok(severity_bucket(v.round().clamp(0.0, max) as u8, instrument)?.index())
    };
    let t: Vec<usize> = y_true.iter().map(|&v| bucket(v)).collect::<Result<_>>()?;
    let p: Vec<usize> = y_pred.iter().map(|&v| bucket(v)).collect::<Result<_>>()?;
    let acc = |idx: &[usize]| Ok(idx.iter().filter(|&&i| t[i] == p[i]).count() as f64 / idx.len() as f64);
    let err = |idx: &[usize]| Ok(idx.iter().map(|&i| t[i].abs_diff(p[i]) as f64).sum::<f64>() / idx.len() as f64);
    let all: Vec<usize> = (0..t.len()).collect();
    let acc_boot = bootstrap(t.len(), n_resamples, seed, acc)?;
    let err_boot = bootstrap(t.len(), n_resamples, seed, err)?;
    Ok(SeverityReport {
        model: model.to_string(),
        n_instances: t.len(),
        accuracy: acc(&all)?,
        accuracy_mean: acc_boot.mean,
        accuracy_std: acc_boot.std,
        mae: err(&all)?,
        mae_mean: err_boot.mean,
        mae_std: err_boot.std,
        notes: SEVERITY_NOTES.iter().map(|s| s.to_string()).collect(),
    })
}
