//! Synthetic cohorts with group-dependent mood dynamics and missingness.
//!
//! Each participant follows a latent weekly Markov chain over
//! euthymic / manic / depressed states. Observed scores are state means plus
//! a participant offset and AR(1) weekly noise, rounded and clipped to the
//! instrument range. A week goes missing with a state-dependent probability,
//! replaced by a persistence probability after a missed week and shifted on
//! the logit scale by a per-participant propensity.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::encode::{Cohort, Group, ParticipantRecord, Response, WeeklyObservation, ASRM_MAX, QIDS_MAX};
use crate::error::{Error, Result};
use crate::seed;

/// Minimum record length for task eligibility.
pub const MIN_WEEKS: usize = 20;

/// Steps discarded so the first observed week is not pinned to euthymia.
const BURN_IN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentState {
    Euthymic = 0,
    Manic = 1,
    Depressed = 2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingnessModel {
    /// Probability of missing a week, by current latent state.
    pub rate: [f64; 3],
    /// Probability of missing again right after a missed week.
    pub after_missing: Option<f64>,
    /// Std of the per-participant logit shift applied to both probabilities.
    pub propensity_sd: f64,
}

impl MissingnessModel {
    pub fn constant(p: f64) -> Self {
        Self {
            rate: [p; 3],
            after_missing: None,
            propensity_sd: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupGenerator {
    /// Row-stochastic transitions over euthymic, manic, depressed.
    pub transition: [[f64; 3]; 3],
    pub asrm_mean: [f64; 3],
    pub qids_mean: [f64; 3],
    /// Std of the per-participant offset, `[asrm, qids]`.
    pub participant_sd: [f64; 2],
    /// Stationary std of the weekly noise, `[asrm, qids]`.
    pub noise_sd: [f64; 2],
    /// Lag-one autocorrelation of the weekly noise.
    pub noise_ar: f64,
    pub missingness: MissingnessModel,
}

impl GroupGenerator {
    /// Near-absorbing euthymia, rare missed weeks.
    pub fn healthy_control() -> Self {
        Self {
            transition: [[0.97, 0.01, 0.02], [0.50, 0.45, 0.05], [0.45, 0.05, 0.50]],
            asrm_mean: [1.5, 7.0, 1.0],
            qids_mean: [3.0, 4.0, 12.0],
            participant_sd: [1.0, 1.5],
            noise_sd: [1.2, 1.5],
            noise_ar: 0.7,
            missingness: MissingnessModel {
                rate: [0.06, 0.15, 0.15],
                after_missing: Some(0.4),
                propensity_sd: 0.5,
            },
        }
    }

    /// Slow episodic switching between long manic and depressive spells.
    pub fn bipolar() -> Self {
        Self {
            transition: [[0.88, 0.05, 0.07], [0.15, 0.80, 0.05], [0.10, 0.03, 0.87]],
            asrm_mean: [2.5, 9.0, 1.5],
            qids_mean: [5.0, 6.0, 15.0],
            participant_sd: [1.5, 2.5],
            noise_sd: [1.5, 2.0],
            noise_ar: 0.7,
            missingness: MissingnessModel {
                rate: [0.12, 0.30, 0.30],
                after_missing: Some(0.6),
                propensity_sd: 0.6,
            },
        }
    }

    /// Fast switching and the most missed weeks, more so when unwell.
    pub fn borderline() -> Self {
        Self {
            transition: [[0.55, 0.15, 0.30], [0.40, 0.35, 0.25], [0.35, 0.15, 0.50]],
            asrm_mean: [3.0, 8.0, 2.5],
            qids_mean: [8.0, 8.0, 17.0],
            participant_sd: [1.5, 2.5],
            noise_sd: [1.5, 2.0],
            noise_ar: 0.7,
            missingness: MissingnessModel {
                rate: [0.20, 0.40, 0.40],
                after_missing: Some(0.65),
                propensity_sd: 0.6,
            },
        }
    }

    pub fn default_for(group: Group) -> Self {
        match group {
            Group::Bd => Self::bipolar(),
            Group::Hc => Self::healthy_control(),
            Group::Bpd => Self::borderline(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.transition.iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("transition row {i} is not a probability vector")));
            }
        }
        let m = &self.missingness;
        let probs = m.rate.iter().chain(m.after_missing.iter());
        if probs.clone().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::invalid("missingness probabilities must lie in [0, 1]"));
        }
        let sds = self.participant_sd.iter().chain(&self.noise_sd).chain(std::iter::once(&m.propensity_sd));
        if sds.clone().any(|&s| !(s.is_finite() && s >= 0.0)) {
            return Err(Error::invalid("standard deviations must be finite and nonnegative"));
        }
        if !(self.noise_ar.is_finite() && self.noise_ar.abs() < 1.0) {
            return Err(Error::invalid("noise_ar must lie in (-1, 1)"));
        }
        if self.asrm_mean.iter().chain(&self.qids_mean).any(|v| !v.is_finite()) {
            return Err(Error::invalid("score means must be finite"));
        }
        Ok(())
    }

    /// One participant's record of `weeks` weeks.
    pub fn generate(&self, id: String, group: Group, weeks: usize, rng: &mut ChaCha8Rng) -> ParticipantRecord {
        let offset = |sd: f64, rng: &mut ChaCha8Rng| if sd > 0.0 { Normal::new(0.0, sd).unwrap().sample(rng) } else { 0.0 };
        let asrm_offset = offset(self.participant_sd[0], rng);
        let qids_offset = offset(self.participant_sd[1], rng);
        let propensity = offset(self.missingness.propensity_sd, rng);

        let mut state = 0usize;
        for _ in 0..BURN_IN {
            state = step(&self.transition[state], rng);
        }
        let innovation = (1.0 - self.noise_ar * self.noise_ar).sqrt();
        let mut noise = [offset(self.noise_sd[0], rng), offset(self.noise_sd[1], rng)];
        let mut prev_missing = false;
        let mut out = Vec::with_capacity(weeks);
        for week in 0..weeks {
            let base = match (prev_missing, self.missingness.after_missing) {
                (true, Some(p)) => p,
                _ => self.missingness.rate[state],
            };
            let p_missing = shift_logit(base, propensity);
            let missing = rng.random::<f64>() < p_missing;
            for (k, e) in noise.iter_mut().enumerate() {
                *e = self.noise_ar * *e + innovation * offset(self.noise_sd[k], rng);
            }
            let [asrm_noise, qids_noise] = noise;
            let obs = if missing {
                WeeklyObservation::missing(week as i64)
            } else {
                let asrm = clip_score(self.asrm_mean[state] + asrm_offset + asrm_noise, ASRM_MAX);
                let qids = clip_score(self.qids_mean[state] + qids_offset + qids_noise, QIDS_MAX);
                WeeklyObservation {
                    week: week as i64,
                    response: Some(Response::new(asrm, qids).expect("clipped scores are in range")),
                }
            };
            out.push(obs);
            prev_missing = missing;
            state = step(&self.transition[state], rng);
        }
        ParticipantRecord { id, group, weeks: out }
    }
}

fn step<R: Rng + ?Sized>(row: &[f64; 3], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    2
}

fn shift_logit(p: f64, shift: f64) -> f64 {
    if shift == 0.0 || p <= 0.0 || p >= 1.0 {
        return p;
    }
    let logit = (p / (1.0 - p)).ln() + shift;
    1.0 / (1.0 + (-logit).exp())
}

fn clip_score(value: f64, max: u8) -> u8 {
    value.round().clamp(0.0, f64::from(max)) as u8
}

/// Shape and parameters of a synthetic cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    /// Participants per group in BD, HC, BPD order.
    pub sizes: [usize; 3],
    pub weeks: usize,
    /// Record lengths are drawn uniformly from `weeks ± weeks_jitter`.
    pub weeks_jitter: usize,
    pub seed: u64,
    /// Generators in BD, HC, BPD order.
    pub generators: [GroupGenerator; 3],
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            sizes: [49, 45, 32],
            weeks: 51,
            weeks_jitter: 0,
            seed: 0,
            generators: Group::ALL.map(GroupGenerator::default_for),
        }
    }
}

impl CohortSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Every group drawn from the same generator, so labels carry no signal.
    pub fn no_signal(mut self) -> Self {
        let shared = self.generators[Group::Bd.index()].clone();
        self.generators = [shared.clone(), shared.clone(), shared];
        self
    }

    /// Replace every missingness model by an i.i.d. Bernoulli(`p`) model.
    pub fn with_missing_rate(mut self, p: f64) -> Self {
        for g in &mut self.generators {
            g.missingness = MissingnessModel::constant(p);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid("every group needs at least one participant"));
        }
        if self.weeks < MIN_WEEKS + self.weeks_jitter {
            return Err(Error::invalid(format!(
                "weeks - weeks_jitter must be at least {MIN_WEEKS}, got {} - {}",
                self.weeks, self.weeks_jitter
            )));
        }
        self.generators.iter().try_for_each(GroupGenerator::validate)
    }
}

/// Deterministic in `spec.seed`; participant `i` of a group draws from its
/// own stream, so generation order does not matter.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort> {
    spec.validate()?;
    let mut participants = Vec::with_capacity(spec.sizes.iter().sum());
    for group in Group::ALL {
        let generator = &spec.generators[group.index()];
        for i in 0..spec.sizes[group.index()] {
            let stream = (group.index() as u64) << 32 | i as u64;
            let mut rng = seed::rng(spec.seed, "synth-participant", stream);
            let weeks = if spec.weeks_jitter == 0 {
                spec.weeks
            } else {
                rng.random_range(spec.weeks - spec.weeks_jitter..=spec.weeks + spec.weeks_jitter)
            };
            let id = format!("{}-{:03}", group, i + 1);
            participants.push(generator.generate(id, group, weeks, &mut rng));
        }
    }
    Ok(Cohort::new(participants))
}
