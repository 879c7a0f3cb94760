use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::space::{HyperparameterSpace, ParamDef, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeConfig {
    pub n_trials: usize,
    pub n_startup: usize,
    pub gamma: f64,
    pub n_candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self { n_trials: 50, n_startup: 10, gamma: 0.25, n_candidates: 24 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub number: usize,
    pub params: Params,
    pub objective: Option<f64>,
    pub fold_scores: Vec<f64>,
    pub status: TrialStatus,
    pub error: Option<String>,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyStatus {
    Ok,
    AllFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub trials: Vec<Trial>,
    /// Index into `trials` of the lowest completed objective; earliest wins ties.
    pub best: Option<usize>,
    pub status: StudyStatus,
    pub seed: u64,
    pub wall_time_s: f64,
}

impl StudyResult {
    pub fn best_trial(&self) -> Option<&Trial> {
        self.best.map(|i| &self.trials[i])
    }

    /// One JSON object per trial.
    pub fn to_jsonl(&self) -> String {
        self.trials
            .iter()
            .map(|t| serde_json::to_string(t).expect("trial serializes") + "\n")
            .collect()
    }
}

/// What an objective returns on success: the value to minimize and the fold scores behind it.
pub struct Evaluation {
    pub objective: f64,
    pub fold_scores: Vec<f64>,
}

/// Mixture of truncated Gaussians on one internal coordinate plus a uniform prior component.
struct Parzen {
    lo: f64,
    hi: f64,
    mus: Vec<f64>,
    sigma: f64,
}

impl Parzen {
    fn new(lo: f64, hi: f64, obs: &[f64]) -> Self {
        let range = hi - lo;
        let sigma = if obs.is_empty() { range } else { range / (obs.len() as f64).sqrt() };
        Self { lo, hi, mus: obs.to_vec(), sigma: sigma.max(range * 1e-3).max(1e-12) }
    }

    fn components(&self) -> usize {
        self.mus.len() + 1
    }

    fn kernel(&self, mu: f64) -> (Normal, f64) {
        let n = Normal::new(mu, self.sigma).expect("positive sigma");
        let mass = n.cdf(self.hi) - n.cdf(self.lo);
        (n, mass)
    }

    fn pdf(&self, x: f64) -> f64 {
        let range = self.hi - self.lo;
        let mut d = if range > 0.0 { 1.0 / range } else { 1.0 };
        for &mu in &self.mus {
            let (n, mass) = self.kernel(mu);
            if mass > 0.0 {
                d += n.pdf(x) / mass;
            }
        }
        d / self.components() as f64
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.hi <= self.lo {
            return self.lo;
        }
        let c = rng.random_range(0..self.components());
        if c == self.mus.len() {
            return rng.random_range(self.lo..self.hi);
        }
        let (n, _) = self.kernel(self.mus[c]);
        let (a, b) = (n.cdf(self.lo), n.cdf(self.hi));
        if b - a < 1e-12 {
            return self.mus[c].clamp(self.lo, self.hi);
        }
        let u = a + (b - a) * rng.random::<f64>();
        n.inverse_cdf(u).clamp(self.lo, self.hi)
    }
}

fn suggest<R: Rng>(def: &ParamDef, good: &[f64], bad: &[f64], n_candidates: usize, rng: &mut R) -> f64 {
    let (lo, hi) = def.internal_bounds();
    let l = Parzen::new(lo, hi, good);
    let g = Parzen::new(lo, hi, bad);
    let mut best = (f64::NEG_INFINITY, lo);
    for _ in 0..n_candidates.max(1) {
        let z = l.sample(rng);
        let score = l.pdf(z).ln() - g.pdf(z).ln();
        if score > best.0 {
            best = (score, z);
        }
    }
    best.1
}

/// Sequential tree-structured Parzen estimator search minimizing `objective`.
pub fn tpe_optimize<F>(space: &HyperparameterSpace, mut objective: F, cfg: &TpeConfig, seed: u64) -> StudyResult
where
    F: FnMut(&Params) -> Result<Evaluation, String>,
{
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials: Vec<Trial> = Vec::with_capacity(cfg.n_trials);
    for number in 0..cfg.n_trials {
        let mut done: Vec<&Trial> = trials.iter().filter(|t| t.status == TrialStatus::Complete).collect();
        let params = if number < cfg.n_startup || done.len() < 2 {
            space.sample_uniform(&mut rng)
        } else {
            done.sort_by(|a, b| {
                a.objective.unwrap().total_cmp(&b.objective.unwrap()).then(a.number.cmp(&b.number))
            });
            let n_good = ((cfg.gamma * done.len() as f64).ceil() as usize).clamp(1, done.len() - 1);
            let (good, bad) = done.split_at(n_good);
            space
                .params
                .iter()
                .map(|def| {
                    let obs = |set: &[&Trial]| -> Vec<f64> {
                        set.iter().map(|t| def.to_internal(&t.params[&def.name])).collect()
                    };
                    let z = suggest(def, &obs(good), &obs(bad), cfg.n_candidates, &mut rng);
                    (def.name.clone(), def.value_at(z))
                })
                .collect()
        };
        let t0 = Instant::now();
        let outcome = objective(&params);
        let elapsed_ms = t0.elapsed().as_millis() as u64;
        let trial = match outcome {
            Ok(e) if e.objective.is_finite() => Trial {
                number,
                params,
                objective: Some(e.objective),
                fold_scores: e.fold_scores,
                status: TrialStatus::Complete,
                error: None,
                elapsed_ms,
            },
            Ok(e) => Trial {
                number,
                params,
                objective: None,
                fold_scores: e.fold_scores,
                status: TrialStatus::Failed,
                error: Some(format!("non-finite objective {}", e.objective)),
                elapsed_ms,
            },
            Err(msg) => Trial {
                number,
                params,
                objective: None,
                fold_scores: Vec::new(),
                status: TrialStatus::Failed,
                error: Some(msg),
                elapsed_ms,
            },
        };
        log::debug!("trial {number}: {:?} {:?}", trial.status, trial.objective);
        trials.push(trial);
    }
    let best = trials
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.objective.map(|o| (i, o)))
        .fold(None, |acc: Option<(usize, f64)>, (i, o)| match acc {
            Some((_, bo)) if bo <= o => acc,
            _ => Some((i, o)),
        })
        .map(|(i, _)| i);
    StudyResult {
        status: if best.is_some() { StudyStatus::Ok } else { StudyStatus::AllFailed },
        best,
        trials,
        seed,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}
