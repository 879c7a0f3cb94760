use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::learners::LearnerSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Integer,
    Continuous,
    LogContinuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    pub kind: ParamKind,
    pub low: f64,
    pub high: f64,
}

impl ParamDef {
    pub fn new(name: &str, kind: ParamKind, low: f64, high: f64) -> Self {
        assert!(low <= high, "{name}: low > high");
        if kind == ParamKind::LogContinuous {
            assert!(low > 0.0, "{name}: log range must be positive");
        }
        Self { name: name.to_string(), kind, low, high }
    }

    /// Bounds of the internal sampling coordinate.
    pub(crate) fn internal_bounds(&self) -> (f64, f64) {
        match self.kind {
            ParamKind::Integer => (self.low - 0.5, self.high + 0.5),
            ParamKind::Continuous => (self.low, self.high),
            ParamKind::LogContinuous => (self.low.ln(), self.high.ln()),
        }
    }

    pub(crate) fn to_internal(&self, v: &ParamValue) -> f64 {
        match self.kind {
            ParamKind::LogContinuous => v.as_f64().ln(),
            _ => v.as_f64(),
        }
    }

    pub(crate) fn value_at(&self, z: f64) -> ParamValue {
        match self.kind {
            ParamKind::Integer => ParamValue::Int((z.round() as i64).clamp(self.low as i64, self.high as i64)),
            ParamKind::Continuous => ParamValue::Float(z.clamp(self.low, self.high)),
            ParamKind::LogContinuous => ParamValue::Float(z.exp().clamp(self.low, self.high)),
        }
    }

    pub fn contains(&self, v: &ParamValue) -> bool {
        match (self.kind, v) {
            (ParamKind::Integer, ParamValue::Int(i)) => (*i as f64) >= self.low && (*i as f64) <= self.high,
            (ParamKind::Integer, ParamValue::Float(_)) => false,
            (_, v) => v.as_f64() >= self.low && v.as_f64() <= self.high,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
}

impl ParamValue {
    pub fn as_f64(&self) -> f64 {
        match *self {
            ParamValue::Int(i) => i as f64,
            ParamValue::Float(f) => f,
        }
    }
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterSpace {
    pub params: Vec<ParamDef>,
}

impl HyperparameterSpace {
    pub fn random_forest() -> Self {
        use ParamKind::Integer;
        Self {
            params: vec![
                ParamDef::new("n_estimators", Integer, 50.0, 300.0),
                ParamDef::new("max_depth", Integer, 5.0, 50.0),
                ParamDef::new("min_samples_split", Integer, 2.0, 15.0),
                ParamDef::new("min_samples_leaf", Integer, 1.0, 6.0),
            ],
        }
    }

    pub fn gbdt() -> Self {
        use ParamKind::{Integer, LogContinuous};
        Self {
            params: vec![
                ParamDef::new("n_estimators", Integer, 50.0, 300.0),
                ParamDef::new("max_depth", Integer, -1.0, 7.0),
                ParamDef::new("learning_rate", LogContinuous, 0.01, 1.0),
                ParamDef::new("num_leaves", Integer, 31.0, 100.0),
                ParamDef::new("min_child_samples", Integer, 20.0, 50.0),
            ],
        }
    }

    pub fn adaboost() -> Self {
        use ParamKind::{Integer, LogContinuous};
        Self {
            params: vec![
                ParamDef::new("n_estimators", Integer, 50.0, 300.0),
                ParamDef::new("learning_rate", LogContinuous, 0.01, 1.0),
            ],
        }
    }

    /// Default space for a tunable learner kind; `None` for kinds without one.
    pub fn for_learner(spec: &LearnerSpec) -> Option<Self> {
        match spec {
            LearnerSpec::RandomForest(_) => Some(Self::random_forest()),
            LearnerSpec::Gbdt(_) => Some(Self::gbdt()),
            LearnerSpec::AdaBoost(_) => Some(Self::adaboost()),
            _ => None,
        }
    }

    /// Replaces definitions by name; unknown names are appended.
    pub fn with_overrides(mut self, overrides: &[ParamDef]) -> Self {
        for o in overrides {
            match self.params.iter_mut().find(|p| p.name == o.name) {
                Some(p) => *p = o.clone(),
                None => self.params.push(o.clone()),
            }
        }
        self
    }

    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Params {
        self.params
            .iter()
            .map(|p| {
                let (lo, hi) = p.internal_bounds();
                let z = if hi > lo { rng.random_range(lo..hi) } else { lo };
                (p.name.clone(), p.value_at(z))
            })
            .collect()
    }

    pub fn contains(&self, params: &Params) -> bool {
        self.params.iter().all(|p| params.get(&p.name).is_some_and(|v| p.contains(v)))
    }
}

/// Writes sampled values into a learner's hyperparameters. Unknown names are ignored.
pub fn apply_params(spec: &LearnerSpec, params: &Params) -> LearnerSpec {
    let int = |name: &str| params.get(name).map(|v| v.as_f64().round() as i64);
    let float = |name: &str| params.get(name).map(ParamValue::as_f64);
    let mut out = spec.clone();
    match &mut out {
        LearnerSpec::RandomForest(p) => {
            if let Some(v) = int("n_estimators") {
                p.n_estimators = v as usize;
            }
            if let Some(v) = int("max_depth") {
                p.max_depth = Some(v.max(1) as usize);
            }
            if let Some(v) = int("min_samples_split") {
                p.min_samples_split = v as usize;
            }
            if let Some(v) = int("min_samples_leaf") {
                p.min_samples_leaf = v as usize;
            }
        }
        LearnerSpec::Gbdt(p) => {
            if let Some(v) = int("n_estimators") {
                p.n_estimators = v as usize;
            }
            if let Some(v) = int("max_depth") {
                // 0 is not a usable depth; it joins -1 as "no limit".
                p.max_depth = if v <= 0 { -1 } else { v as i32 };
            }
            if let Some(v) = float("learning_rate") {
                p.learning_rate = v;
            }
            if let Some(v) = int("num_leaves") {
                p.num_leaves = v as usize;
            }
            if let Some(v) = int("min_child_samples") {
                p.min_child_samples = v as usize;
            }
        }
        LearnerSpec::AdaBoost(p) => {
            if let Some(v) = int("n_estimators") {
                p.n_estimators = v as usize;
            }
            if let Some(v) = float("learning_rate") {
                p.learning_rate = v;
            }
        }
        LearnerSpec::Knn(p) => {
            if let Some(v) = int("k") {
                p.k = v.max(1) as usize;
            }
        }
        LearnerSpec::Cart(_) | LearnerSpec::Stacked { .. } => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{GbdtParams, RandomForestParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_stay_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for space in [HyperparameterSpace::random_forest(), HyperparameterSpace::gbdt(), HyperparameterSpace::adaboost()] {
            for _ in 0..1000 {
                assert!(space.contains(&space.sample_uniform(&mut rng)));
            }
        }
    }

    #[test]
    fn integer_extremes_reachable() {
        let space = HyperparameterSpace { params: vec![ParamDef::new("a", ParamKind::Integer, 1.0, 3.0)] };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = [false; 3];
        for _ in 0..200 {
            if let ParamValue::Int(i) = space.sample_uniform(&mut rng)["a"] {
                seen[(i - 1) as usize] = true;
            }
        }
        assert_eq!(seen, [true; 3]);
    }

    #[test]
    fn apply_sets_fields() {
        let mut p = Params::new();
        p.insert("n_estimators".into(), ParamValue::Int(77));
        p.insert("max_depth".into(), ParamValue::Int(0));
        p.insert("learning_rate".into(), ParamValue::Float(0.2));
        match apply_params(&LearnerSpec::Gbdt(GbdtParams::default()), &p) {
            LearnerSpec::Gbdt(g) => {
                assert_eq!((g.n_estimators, g.max_depth, g.learning_rate), (77, -1, 0.2));
            }
            other => panic!("{other:?}"),
        }
        match apply_params(&LearnerSpec::RandomForest(RandomForestParams::default()), &p) {
            LearnerSpec::RandomForest(r) => assert_eq!((r.n_estimators, r.max_depth), (77, Some(1))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn params_serialize_plainly() {
        let mut p = Params::new();
        p.insert("n".into(), ParamValue::Int(3));
        p.insert("lr".into(), ParamValue::Float(0.5));
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"lr":0.5,"n":3}"#);
    }
}
