use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{split_train_test, Exclusion, FeatureMap, TaskConfig};
use crate::encode::{extract_window, Cohort, Group, WeeklyObservation};
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::forest::{Targets, TreeEnsemble};
use crate::seed;

const N_GROUPS: usize = 3;

/// Class probabilities of one held-out participant under both models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestPrediction {
    pub participant_id: String,
    pub group: Group,
    pub mrsf: Vec<f64>,
    pub naive: Vec<f64>,
}

/// Probability vector over (BD, HC, BPD) from a model that never saw the participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantProbabilities {
    pub participant_id: String,
    pub group: Group,
    pub probs: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationOutcome {
    pub mrsf: EvalReport,
    pub naive: EvalReport,
    pub test_predictions: Vec<TestPrediction>,
    /// Empty unless `leave_one_out` is set.
    pub leave_one_out: Vec<ParticipantProbabilities>,
    pub exclusions: Vec<Exclusion>,
    #[serde(skip)]
    pub models: Option<(TreeEnsemble, TreeEnsemble)>,
}

struct Drawn<'a> {
    cohort_index: usize,
    group: Group,
    window: &'a [WeeklyObservation],
}

/// Diagnostic-group classification from one random window per participant.
pub fn run_classification(cohort: &Cohort, config: &TaskConfig) -> Result<ClassificationOutcome> {
    config.validate()?;
    config.forest.validate()?;
    let w = config.window_length;

    let mut drawn = Vec::new();
    let mut exclusions = Vec::new();
    for (i, p) in cohort.participants.iter().enumerate() {
        if !config.groups.contains(&p.group) {
            continue;
        }
        if p.len() < w {
            exclusions.push(Exclusion {
                participant_id: p.id.clone(),
                reason: format!("{} weeks, window needs {w}", p.len()),
            });
            continue;
        }
        let mut rng = seed::rng(config.seed, "classify-window", i as u64);
        drawn.push(Drawn {
            cohort_index: i,
            group: p.group,
            window: extract_window(p, w, &mut rng)?,
        });
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for &group in &config.groups {
        let members: Vec<usize> = (0..drawn.len()).filter(|&d| drawn[d].group == group).collect();
        if members.len() < 2 {
            return Err(Error::insufficient(format!(
                "group {group} has {} eligible participants, need at least 2",
                members.len()
            )));
        }
        let mut rng = seed::rng(config.seed, "classify-split", group.index() as u64);
        let (tr, te) = split_train_test(&members, config.split_fraction, &mut rng);
        train.extend(tr);
        test.extend(te);
    }
    train.sort_unstable();
    test.sort_unstable();

    let maps = [FeatureMap::Mrsf { level: config.signature_level }, FeatureMap::Naive];
    let features: Vec<Vec<Vec<f64>>> = maps
        .iter()
        .map(|m| drawn.iter().map(|d| m.features(d.window)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = drawn.iter().map(|d| d.group.index()).collect();

    let forest_seed = config.seed_for("classify-forest", 0);
    let boot_seed = config.seed_for("classify-bootstrap", 0);
    let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let y_test: Vec<usize> = test.iter().map(|&i| labels[i]).collect();

    let mut models = Vec::with_capacity(2);
    let mut reports = Vec::with_capacity(2);
    let mut probs_by_map = Vec::with_capacity(2);
    for (map, x) in maps.iter().zip(&features) {
        let x_train: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let model = TreeEnsemble::fit(
            &x_train,
            Targets::Classes { labels: &y_train, n_classes: N_GROUPS },
            &config.forest,
            forest_seed,
        )?;
        let probs = test
            .iter()
            .map(|&i| model.predict_proba(&x[i]))
            .collect::<Result<Vec<_>>>()?;
        reports.push(EvalReport::classification(
            map.name(),
            &y_test,
            &probs,
            N_GROUPS,
            config.bootstrap_resamples,
            boot_seed,
        )?);
        probs_by_map.push(probs);
        models.push(model);
    }

    let test_predictions = test
        .iter()
        .enumerate()
        .map(|(k, &i)| TestPrediction {
            participant_id: cohort.participants[drawn[i].cohort_index].id.clone(),
            group: drawn[i].group,
            mrsf: probs_by_map[0][k].clone(),
            naive: probs_by_map[1][k].clone(),
        })
        .collect();

    let leave_one_out = if config.leave_one_out {
        leave_one_out(cohort, config, &drawn, &features[0], &labels)?
    } else {
        Vec::new()
    };

    let naive_model = models.pop().expect("two models");
    let mrsf_model = models.pop().expect("two models");
    let naive = reports.pop().expect("two reports");
    let mrsf = reports.pop().expect("two reports");
    Ok(ClassificationOutcome {
        mrsf,
        naive,
        test_predictions,
        leave_one_out,
        exclusions,
        models: Some((mrsf_model, naive_model)),
    })
}

/// MRSF model retrained without each participant in turn.
fn leave_one_out(
    cohort: &Cohort,
    config: &TaskConfig,
    drawn: &[Drawn<'_>],
    x: &[Vec<f64>],
    labels: &[usize],
) -> Result<Vec<ParticipantProbabilities>> {
    (0..drawn.len())
        .into_par_iter()
        .map(|held| {
            let rest: Vec<usize> = (0..drawn.len()).filter(|&i| i != held).collect();
            let x_train: Vec<Vec<f64>> = rest.iter().map(|&i| x[i].clone()).collect();
            let y_train: Vec<usize> = rest.iter().map(|&i| labels[i]).collect();
            let model = TreeEnsemble::fit(
                &x_train,
                Targets::Classes { labels: &y_train, n_classes: N_GROUPS },
                &config.forest,
                config.seed_for("classify-loo", drawn[held].cohort_index as u64),
            )?;
            let p = model.predict_proba(&x[held])?;
            Ok(ParticipantProbabilities {
                participant_id: cohort.participants[drawn[held].cohort_index].id.clone(),
                group: drawn[held].group,
                probs: [p[0], p[1], p[2]],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_cohort, CohortSpec};

    fn small_config() -> TaskConfig {
        let mut c = TaskConfig::classification().with_seed(3);
        c.forest.n_trees = 20;
        c.bootstrap_resamples = 50;
        c
    }

    #[test]
    fn outputs_are_well_formed() {
        let mut spec = CohortSpec::with_seed(1);
        spec.sizes = [8, 8, 6];
        spec.weeks = 30;
        let cohort = generate_cohort(&spec).unwrap();
        let out = run_classification(&cohort, &small_config()).unwrap();
        assert_eq!(out.mrsf.n_instances, out.naive.n_instances);
        assert_eq!(out.test_predictions.len(), out.mrsf.n_instances);
        assert_eq!(out.leave_one_out.len(), 22);
        for p in &out.leave_one_out {
            assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for t in &out.test_predictions {
            assert!((t.mrsf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((t.naive.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_small_group_is_an_error() {
        let mut spec = CohortSpec::with_seed(1);
        spec.sizes = [5, 5, 1];
        let cohort = generate_cohort(&spec).unwrap();
        let err = run_classification(&cohort, &small_config()).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn short_records_are_excluded() {
        let mut spec = CohortSpec::with_seed(2);
        spec.sizes = [4, 4, 4];
        spec.weeks = 20;
        let mut cohort = generate_cohort(&spec).unwrap();
        cohort.participants[0].weeks.truncate(10);
        let out = run_classification(&cohort, &small_config()).unwrap();
        assert_eq!(out.exclusions.len(), 1);
        assert_eq!(out.exclusions[0].participant_id, "BD-001");
    }
}
