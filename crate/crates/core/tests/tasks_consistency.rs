use moodsig::encode::{Group, Instrument, ParticipantRecord};
use moodsig::synth::{generate_cohort, CohortSpec};
use moodsig::tasks::{
    run_classification, run_rollout, run_score_prediction, run_state_prediction, severity_bucket, state_label,
    true_proportions, TaskConfig,
};

fn small(mut c: TaskConfig) -> TaskConfig {
    c.forest.n_trees = 15;
    c.bootstrap_resamples = 50;
    c
}

fn cohort(seed: u64) -> moodsig::encode::Cohort {
    generate_cohort(&CohortSpec {
        sizes: [12, 10, 8],
        weeks: 30,
        weeks_jitter: 6,
        ..CohortSpec::with_seed(seed)
    })
    .unwrap()
}

fn tail(record: &ParticipantRecord, from: usize) -> ParticipantRecord {
    ParticipantRecord {
        weeks: record.weeks[from..].to_vec(),
        ..record.clone()
    }
}

#[test]
fn state_label_distribution_matches_true_proportions_of_targets() {
    let cohort = cohort(2);
    let config = small(TaskConfig::state_prediction());
    let w = config.window_length;
    let out = run_state_prediction(&cohort, &config).unwrap();
    assert_eq!(out.cells.len(), 6);
    for cell in &out.cells {
        let mut pooled = [0.0; 3];
        let mut total = 0.0;
        for p in cohort.of_group(cell.group).filter(|p| p.len() > w) {
            let n = (p.len() - w) as f64;
            let props = true_proportions(&tail(p, w), cell.instrument).unwrap();
            for k in 0..3 {
                pooled[k] += n * props[k];
            }
            total += n;
        }
        for k in 0..3 {
            assert!((pooled[k] / total - cell.label_distribution[k]).abs() < 1e-12, "{:?} {:?}", cell.group, cell.instrument);
        }
    }
}

#[test]
fn classification_is_deterministic_and_seed_sensitive() {
    let cohort = cohort(3);
    let config = small(TaskConfig::classification());
    let a = run_classification(&cohort, &config).unwrap();
    let b = run_classification(&cohort, &config).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = run_classification(&cohort, &config.clone().with_seed(1)).unwrap();
    assert_ne!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
    assert_eq!(a.leave_one_out.len(), cohort.len());
    for p in &a.leave_one_out {
        assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn rollout_proportions_are_fifths_and_truth_is_the_held_out_tail() {
    let cohort = cohort(4);
    let mut config = small(TaskConfig::state_prediction());
    config.instruments = vec![Instrument::Qids];
    let out = run_rollout(&cohort, &config).unwrap();
    let eligible = cohort.participants.iter().filter(|p| p.len() > 15).count();
    assert_eq!(out.entries.len(), eligible);
    for e in &out.entries {
        assert!((e.predicted.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for v in e.predicted {
            assert!(((v * 5.0).round() - v * 5.0).abs() < 1e-12);
        }
        let record = cohort.participants.iter().find(|p| p.id == e.participant_id).unwrap();
        let held_out = tail(record, record.len() - 5);
        assert_eq!(e.holdout_truth, true_proportions(&held_out, Instrument::Qids).unwrap());
        assert_eq!(e.true_proportions, true_proportions(record, Instrument::Qids).unwrap());
    }
}

#[test]
fn score_reports_cover_every_cell_with_answered_targets_only() {
    let cohort = cohort(5);
    let config = small(TaskConfig::score_prediction());
    let out = run_score_prediction(&cohort, &config).unwrap();
    assert_eq!(out.cells.len(), 6);
    for cell in &out.cells {
        assert_eq!(cell.mrsf.n_instances, cell.naive.n_instances);
        assert_eq!(cell.mrsf_severity.n_instances, cell.mrsf.n_instances);
        let max = cell.instrument.max_score() as f64;
        assert!(cell.mrsf.mae.unwrap() <= max && cell.naive.mae.unwrap() <= max);
        assert!(cell.mrsf_severity.mae <= 4.0);
    }
    let g: Vec<Group> = out.cells.iter().map(|c| c.group).collect();
    assert_eq!(g, [Group::Bd, Group::Bd, Group::Hc, Group::Hc, Group::Bpd, Group::Bpd]);
}

#[test]
fn label_thresholds_and_buckets_are_monotone() {
    for instrument in Instrument::ALL {
        let mut last_state = 0;
        let mut last_bucket = 0;
        for s in 0..=instrument.max_score() {
            let state = state_label(Some(s), instrument).unwrap().index();
            let bucket = severity_bucket(s, instrument).unwrap() as usize;
            assert!(state >= last_state && bucket >= last_bucket);
            last_state = state;
            last_bucket = bucket;
        }
    }
}
