//! Structural causal models over finite variables, and the correction
//! mechanism that trades calibration for fairness.
//!
//! An [`ScmSpec`] lists variables in topological order, each with a
//! conditional probability table over its parents. [`ScmSpec::exact_joint`]
//! multiplies the tables into an exact [`JointTable`];
//! [`ScmSpec::ancestral_sample`] draws observations top-down.
//!
//! The correction machinery follows one convention throughout: group 0 of
//! the sensitive attribute is the advantaged group, group 1 the
//! disadvantaged. A [`CorrectionPolicy`] bundles the gate probabilities
//! `q_a = P(C=0 | A=a)`, the fallback distribution used when the gate fires,
//! and per-(group, label) training-label flip probabilities.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{JointTable, SampleSet, VariableSpec, NORMALIZATION_TOLERANCE};
use crate::error::{Error, Result};
use crate::fairness::{audit, FairnessTriple, MetricReport};

/// Joint state spaces beyond this size are rejected by exact computation.
pub const MAX_STATE_SPACE: usize = 1 << 20;

/// Name of the gate variable inserted by [`build_correction_scm`].
pub const GATE_NAME: &str = "C";

/// One variable of a structural causal model.
///
/// `cpd` holds one probability row per combination of parent states,
/// row-major over the parent order with the last parent varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmVariable {
    pub name: String,
    pub cardinality: usize,
    pub parents: Vec<String>,
    pub cpd: Vec<Vec<f64>>,
}

impl ScmVariable {
    /// Root variable: no parents, a single distribution row.
    pub fn root(name: impl Into<String>, dist: Vec<f64>) -> Self {
        ScmVariable {
            name: name.into(),
            cardinality: dist.len(),
            parents: Vec::new(),
            cpd: vec![dist],
        }
    }

    pub fn with_parents(
        name: impl Into<String>,
        cardinality: usize,
        parents: Vec<String>,
        cpd: Vec<Vec<f64>>,
    ) -> Self {
        ScmVariable {
            name: name.into(),
            cardinality,
            parents,
            cpd,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ScmSpecRepr {
    variables: Vec<ScmVariable>,
}

/// A validated structural causal model: topologically ordered variables with
/// conditional probability tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmSpec {
    variables: Vec<ScmVariable>,
}

impl ScmSpec {
    /// Validates ordering (parents precede children), row counts, and row
    /// normalization.
    pub fn new(variables: Vec<ScmVariable>) -> Result<Self> {
        for (i, v) in variables.iter().enumerate() {
            if v.name.is_empty() {
                return Err(Error::InvalidSpec("variable with empty name".to_string()));
            }
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::InvalidSpec(format!(
                    "duplicate variable name `{}`",
                    v.name
                )));
            }
            if v.cardinality < 2 {
                return Err(Error::InvalidSpec(format!(
                    "variable `{}` must have cardinality >= 2",
                    v.name
                )));
            }
            let mut parent_cards = Vec::with_capacity(v.parents.len());
            for p in &v.parents {
                match variables[..i].iter().find(|w| &w.name == p) {
                    Some(w) => parent_cards.push(w.cardinality),
                    None => {
                        return Err(Error::InvalidSpec(format!(
                            "variable `{}` lists parent `{p}` that does not precede it",
                            v.name
                        )))
                    }
                }
            }
            if v.parents.len()
                != v.parents
                    .iter()
                    .collect::<std::collections::BTreeSet<_>>()
                    .len()
            {
                return Err(Error::InvalidSpec(format!(
                    "variable `{}` lists a duplicate parent",
                    v.name
                )));
            }
            let expected_rows: usize = parent_cards.iter().product();
            if v.cpd.len() != expected_rows {
                return Err(Error::InvalidSpec(format!(
                    "variable `{}` has {} CPD rows, expected {expected_rows}",
                    v.name,
                    v.cpd.len()
                )));
            }
            for row in &v.cpd {
                if row.len() != v.cardinality {
                    return Err(Error::InvalidSpec(format!(
                        "variable `{}` has a CPD row of length {}, expected {}",
                        v.name,
                        row.len(),
                        v.cardinality
                    )));
                }
                if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "variable `{}` has a CPD row with negative or non-finite entries",
                        v.name
                    )));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return Err(Error::InvalidSpec(format!(
                        "variable `{}` has a CPD row summing to {total}",
                        v.name
                    )));
                }
            }
        }
        Ok(ScmSpec { variables })
    }

    pub fn variables(&self) -> &[ScmVariable] {
        &self.variables
    }

    pub fn variable(&self, name: &str) -> Option<&ScmVariable> {
        self.variables.iter().find(|v| v.name == name)
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn from_json(text: &str) -> Result<ScmSpec> {
        let repr: ScmSpecRepr = serde_json::from_str(text)?;
        ScmSpec::new(repr.variables)
    }

    pub fn to_json(&self) -> String {
        let repr = ScmSpecRepr {
            variables: self.variables.clone(),
        };
        serde_json::to_string_pretty(&repr).expect("model serialization cannot fail")
    }

    fn state_space(&self) -> usize {
        self.variables
            .iter()
            .map(|v| v.cardinality)
            .fold(1usize, |acc, c| acc.saturating_mul(c))
    }

    /// CPD row index for `var` given the states of all variables so far.
    fn row_index(&self, var: usize, states: &[usize]) -> usize {
        let mut row = 0usize;
        for p in &self.variables[var].parents {
            let pi = self.position(p).expect("validated parent");
            row = row * self.variables[pi].cardinality + states[pi];
        }
        row
    }

    /// Multiplies the conditional tables into the exact joint distribution,
    /// then sums out the variables named in `marginalize_out`.
    pub fn exact_joint<S: AsRef<str>>(&self, marginalize_out: &[S]) -> Result<JointTable> {
        let total = self.state_space();
        if total > MAX_STATE_SPACE {
            return Err(Error::TooLarge {
                size: total,
                bound: MAX_STATE_SPACE,
            });
        }
        for name in marginalize_out {
            if self.position(name.as_ref()).is_none() {
                return Err(Error::UnknownVariable(name.as_ref().to_string()));
            }
        }
        let n = self.variables.len();
        let mut probs = vec![0.0f64; total];
        let mut states = vec![0usize; n];
        for (flat, slot) in probs.iter_mut().enumerate() {
            let mut rem = flat;
            for (i, v) in self.variables.iter().enumerate().rev() {
                states[i] = rem % v.cardinality;
                rem /= v.cardinality;
            }
            let mut p = 1.0f64;
            for (i, v) in self.variables.iter().enumerate() {
                let row = self.row_index(i, &states);
                p *= v.cpd[row][states[i]];
                if p == 0.0 {
                    break;
                }
            }
            *slot = p;
        }
        let vars: Vec<VariableSpec> = self
            .variables
            .iter()
            .map(|v| VariableSpec {
                name: v.name.clone(),
                cardinality: v.cardinality,
            })
            .collect();
        let joint = JointTable::new(vars, probs)?;
        if marginalize_out.is_empty() {
            return Ok(joint);
        }
        let drop: Vec<&str> = marginalize_out.iter().map(AsRef::as_ref).collect();
        let keep: Vec<&str> = self
            .variables
            .iter()
            .map(|v| v.name.as_str())
            .filter(|name| !drop.contains(name))
            .collect();
        if keep.is_empty() {
            return Err(Error::InvalidQuery(
                "cannot marginalize out every variable".to_string(),
            ));
        }
        joint.marginalize(&keep)
    }

    /// Draws `n` observations by sampling each variable in topological order
    /// from its CPD row. Observation `i` uses a random stream derived from
    /// `(seed, i)`, so output is reproducible and order-independent.
    pub fn ancestral_sample(&self, n: u64, seed: u64) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::InvalidQuery("sample size must be >= 1".to_string()));
        }
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        let mut states = vec![0usize; self.variables.len()];
        for obs in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(obs);
            for (i, v) in self.variables.iter().enumerate() {
                let row = &v.cpd[self.row_index(i, &states)];
                let u: f64 = rng.random();
                let mut acc = 0.0f64;
                let mut chosen = v.cardinality - 1;
                for (s, &p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        chosen = s;
                        break;
                    }
                }
                states[i] = chosen;
            }
            *counts.entry(states.clone()).or_insert(0) += 1;
        }
        let vars: Vec<VariableSpec> = self
            .variables
            .iter()
            .map(|v| VariableSpec {
                name: v.name.clone(),
                cardinality: v.cardinality,
            })
            .collect();
        SampleSet::new(vars, counts)
    }
}

/// Gate specification: the probability that the correction fires,
/// `q_a = P(C=0 | A=a)`.
#[derive(Debug, Clone, PartialEq)]
pub enum GateSpec {
    /// Independent per-group gate probabilities, indexed by group state.
    PerGroup(Vec<f64>),
    /// Coupled form `C = A xor U_C` for binary groups: with
    /// `p = P(U_C = 1)`, group 0 gates at `1 - p` and group 1 at `p`.
    Xor { noise_prob: f64 },
}

impl GateSpec {
    /// Per-group gate rates for `groups` sensitive states.
    pub fn rates(&self, groups: usize) -> Result<Vec<f64>> {
        match self {
            GateSpec::PerGroup(q) => {
                if q.len() != groups {
                    return Err(Error::InvalidSpec(format!(
                        "gate lists {} groups, sensitive attribute has {groups}",
                        q.len()
                    )));
                }
                Ok(q.clone())
            }
            GateSpec::Xor { noise_prob } => {
                if groups != 2 {
                    return Err(Error::InvalidSpec(
                        "xor gate requires a binary sensitive attribute".to_string(),
                    ));
                }
                Ok(vec![1.0 - noise_prob, *noise_prob])
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        match self {
            GateSpec::PerGroup(q) => {
                if q.is_empty() || q.iter().any(|&p| !ok(p)) {
                    return Err(Error::InvalidSpec(
                        "gate probabilities must lie in [0, 1]".to_string(),
                    ));
                }
            }
            GateSpec::Xor { noise_prob } => {
                if !ok(*noise_prob) {
                    return Err(Error::InvalidSpec(
                        "xor noise probability must lie in [0, 1]".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Distribution over prediction states used when the gate fires.
#[derive(Debug, Clone, PartialEq)]
pub enum FallbackPolicy {
    /// One distribution for everyone; this is the form that ignores the
    /// sensitive attribute and therefore decouples prediction from group.
    Shared(Vec<f64>),
    /// One distribution per group. Exposed to demonstrate how a
    /// group-dependent fallback re-introduces dependence on the attribute.
    PerGroup(Vec<Vec<f64>>),
}

impl FallbackPolicy {
    fn row(&self, group: usize) -> &[f64] {
        match self {
            FallbackPolicy::Shared(row) => row,
            FallbackPolicy::PerGroup(rows) => &rows[group],
        }
    }

    fn validate(&self, groups: usize, prediction_states: usize) -> Result<()> {
        let check_row = |row: &[f64]| -> Result<()> {
            if row.len() != prediction_states {
                return Err(Error::InvalidSpec(format!(
                    "fallback row has {} entries, prediction has {prediction_states} states",
                    row.len()
                )));
            }
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(Error::InvalidSpec(
                    "fallback entries must be non-negative".to_string(),
                ));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::InvalidSpec(format!("fallback row sums to {total}")));
            }
            Ok(())
        };
        match self {
            FallbackPolicy::Shared(row) => check_row(row),
            FallbackPolicy::PerGroup(rows) => {
                if rows.len() != groups {
                    return Err(Error::InvalidSpec(format!(
                        "fallback lists {} groups, sensitive attribute has {groups}",
                        rows.len()
                    )));
                }
                rows.iter().try_for_each(|r| check_row(r))
            }
        }
    }
}

/// Correction policy: gate probabilities, fallback prediction distribution,
/// and per-(group, label) training-label flip probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionPolicy {
    pub gate: GateSpec,
    pub fairness_policy: FallbackPolicy,
    /// `flip[group][label]`: probability that the correction flips a
    /// training label of that group and value. Groups absent from the map
    /// never flip.
    pub flip: BTreeMap<usize, Vec<f64>>,
}

impl CorrectionPolicy {
    pub fn new(gate: GateSpec, fairness_policy: FallbackPolicy) -> Self {
        CorrectionPolicy {
            gate,
            fairness_policy,
            flip: BTreeMap::new(),
        }
    }

    pub fn with_flip(mut self, group: usize, per_label: Vec<f64>) -> Self {
        self.flip.insert(group, per_label);
        self
    }

    pub fn flip_prob(&self, group: usize, label: usize) -> f64 {
        self.flip
            .get(&group)
            .and_then(|row| row.get(label))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.gate.validate()?;
        for row in self.flip.values() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidSpec(
                    "flip probabilities must lie in [0, 1]".to_string(),
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<CorrectionPolicy> {
        let repr: PolicyRepr = serde_json::from_str(text)?;
        let policy = CorrectionPolicy::try_from(repr)?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PolicyRepr::from(self))
            .expect("policy serialization cannot fail")
    }
}

/// Serialized form: `gate` is either `{"xor": p}` or a map of group states
/// to gate probabilities; `fairness_policy` is either one distribution or a
/// map of group states to distributions; `flip` maps group states to
/// per-label flip probabilities.
#[derive(Serialize, Deserialize)]
struct PolicyRepr {
    gate: BTreeMap<String, f64>,
    fairness_policy: FallbackRepr,
    #[serde(default)]
    flip: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FallbackRepr {
    Shared(Vec<f64>),
    PerGroup(BTreeMap<String, Vec<f64>>),
}

fn dense_from_group_map<T: Clone>(map: &BTreeMap<String, T>, what: &str) -> Result<Vec<T>> {
    let mut entries: Vec<(usize, T)> = Vec::with_capacity(map.len());
    for (key, value) in map {
        let group: usize = key
            .parse()
            .map_err(|_| Error::Parse(format!("{what} key `{key}` is not a group state")))?;
        entries.push((group, value.clone()));
    }
    entries.sort_by_key(|(g, _)| *g);
    for (expected, (got, _)) in entries.iter().enumerate() {
        if *got != expected {
            return Err(Error::Parse(format!(
                "{what} must cover groups 0..{} contiguously",
                entries.len()
            )));
        }
    }
    Ok(entries.into_iter().map(|(_, v)| v).collect())
}

impl TryFrom<PolicyRepr> for CorrectionPolicy {
    type Error = Error;

    fn try_from(repr: PolicyRepr) -> Result<CorrectionPolicy> {
        let gate = if repr.gate.len() == 1 && repr.gate.contains_key("xor") {
            GateSpec::Xor {
                noise_prob: repr.gate["xor"],
            }
        } else {
            GateSpec::PerGroup(dense_from_group_map(&repr.gate, "gate")?)
        };
        let fairness_policy = match repr.fairness_policy {
            FallbackRepr::Shared(row) => FallbackPolicy::Shared(row),
            FallbackRepr::PerGroup(map) => {
                FallbackPolicy::PerGroup(dense_from_group_map(&map, "fairness_policy")?)
            }
        };
        let mut flip = BTreeMap::new();
        for (key, row) in repr.flip {
            let group: usize = key
                .parse()
                .map_err(|_| Error::Parse(format!("flip key `{key}` is not a group state")))?;
            flip.insert(group, row);
        }
        Ok(CorrectionPolicy {
            gate,
            fairness_policy,
            flip,
        })
    }
}

impl From<&CorrectionPolicy> for PolicyRepr {
    fn from(policy: &CorrectionPolicy) -> PolicyRepr {
        let gate = match &policy.gate {
            GateSpec::PerGroup(q) => q
                .iter()
                .enumerate()
                .map(|(g, &p)| (g.to_string(), p))
                .collect(),
            GateSpec::Xor { noise_prob } => BTreeMap::from([("xor".to_string(), *noise_prob)]),
        };
        let fairness_policy = match &policy.fairness_policy {
            FallbackPolicy::Shared(row) => FallbackRepr::Shared(row.clone()),
            FallbackPolicy::PerGroup(rows) => FallbackRepr::PerGroup(
                rows.iter()
                    .enumerate()
                    .map(|(g, r)| (g.to_string(), r.clone()))
                    .collect(),
            ),
        };
        let flip = policy
            .flip
            .iter()
            .map(|(g, row)| (g.to_string(), row.clone()))
            .collect();
        PolicyRepr {
            gate,
            fairness_policy,
            flip,
        }
    }
}

/// Inserts the correction gate into a base model.
///
/// The base must contain the triple's variables with the prediction's CPD
/// conditioned on the truth alone (the classifier behavior). The result adds
/// a binary gate `C` with parents `{sensitive}` and
/// `P(C=0 | A=a) = q_a`, and rewires the prediction to parents
/// `{C, truth, sensitive}`: when `C=1` it follows the classifier row for the
/// label, when `C=0` it follows the fallback distribution for the group.
pub fn build_correction_scm(
    base: &ScmSpec,
    policy: &CorrectionPolicy,
    triple: &FairnessTriple,
) -> Result<ScmSpec> {
    policy.validate()?;
    let sens_pos = base
        .position(&triple.sensitive)
        .ok_or_else(|| Error::MissingRole(triple.sensitive.clone()))?;
    let truth_pos = base
        .position(&triple.truth)
        .ok_or_else(|| Error::MissingRole(triple.truth.clone()))?;
    let pred_pos = base
        .position(&triple.prediction)
        .ok_or_else(|| Error::MissingRole(triple.prediction.clone()))?;
    if base.position(GATE_NAME).is_some() {
        return Err(Error::InvalidSpec(format!(
            "base model already declares a variable named `{GATE_NAME}`"
        )));
    }
    if sens_pos > pred_pos || truth_pos > pred_pos {
        return Err(Error::InvalidSpec(
            "sensitive and truth must precede the prediction".to_string(),
        ));
    }
    let sensitive = &base.variables()[sens_pos];
    let truth = &base.variables()[truth_pos];
    let prediction = &base.variables()[pred_pos];
    if prediction.parents != [triple.truth.clone()] {
        return Err(Error::InvalidSpec(
            "prediction must be conditioned on the truth alone".to_string(),
        ));
    }

    let groups = sensitive.cardinality;
    let rates = policy.gate.rates(groups)?;
    policy
        .fairness_policy
        .validate(groups, prediction.cardinality)?;

    let gate = ScmVariable {
        name: GATE_NAME.to_string(),
        cardinality: 2,
        parents: vec![triple.sensitive.clone()],
        cpd: rates.iter().map(|&q| vec![q, 1.0 - q]).collect(),
    };

    // Rows over (C, truth, sensitive) with the sensitive state fastest.
    let mut cpd = Vec::with_capacity(2 * truth.cardinality * groups);
    for c in 0..2usize {
        for y in 0..truth.cardinality {
            for a in 0..groups {
                let row = if c == 1 {
                    prediction.cpd[y].clone()
                } else {
                    policy.fairness_policy.row(a).to_vec()
                };
                cpd.push(row);
            }
        }
    }
    let corrected_prediction = ScmVariable {
        name: triple.prediction.clone(),
        cardinality: prediction.cardinality,
        parents: vec![
            GATE_NAME.to_string(),
            triple.truth.clone(),
            triple.sensitive.clone(),
        ],
        cpd,
    };

    let mut variables = Vec::with_capacity(base.variables().len() + 1);
    for (i, v) in base.variables().iter().enumerate() {
        if i == pred_pos {
            variables.push(gate.clone());
            variables.push(corrected_prediction.clone());
        } else {
            variables.push(v.clone());
        }
    }
    ScmSpec::new(variables)
}

/// Stochastically flips training labels, observation by observation.
///
/// Each unit of weight draws once from a stream derived from
/// `(seed, observation index)` and flips the truth column with probability
/// `flip[group][label]`. All other columns and the total count are
/// preserved. The truth must be binary.
pub fn apply_label_correction(
    samples: &SampleSet,
    policy: &CorrectionPolicy,
    sensitive: &str,
    truth: &str,
    seed: u64,
) -> Result<SampleSet> {
    policy.validate()?;
    let sens_idx = samples
        .var_index(sensitive)
        .map_err(|_| Error::MissingRole(sensitive.to_string()))?;
    let truth_idx = samples
        .var_index(truth)
        .map_err(|_| Error::MissingRole(truth.to_string()))?;
    let truth_card = samples.variables()[truth_idx].cardinality;
    if truth_card != 2 {
        return Err(Error::InvalidSpec(
            "label correction requires a binary truth".to_string(),
        ));
    }
    for row in policy.flip.values() {
        if row.len() != truth_card {
            return Err(Error::InvalidSpec(format!(
                "flip rows must list {truth_card} label probabilities"
            )));
        }
    }

    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let mut obs_index = 0u64;
    for (tuple, &weight) in samples.counts() {
        let p = policy.flip_prob(tuple[sens_idx], tuple[truth_idx]);
        for _ in 0..weight {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(obs_index);
            obs_index += 1;
            let flip = p > 0.0 && rng.random::<f64>() < p;
            let mut out = tuple.clone();
            if flip {
                out[truth_idx] = 1 - out[truth_idx];
            }
            *counts.entry(out).or_insert(0) += 1;
        }
    }
    SampleSet::new(samples.variables().to_vec(), counts)
}

/// Lookup-table classifier fitted by smoothed empirical argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct PluginClassifier {
    features: Vec<VariableSpec>,
    target: VariableSpec,
    /// Predicted target state per feature tuple, row-major over feature
    /// order.
    decisions: Vec<usize>,
    smoothing: f64,
}

impl PluginClassifier {
    pub fn features(&self) -> &[VariableSpec] {
        &self.features
    }

    pub fn target(&self) -> &VariableSpec {
        &self.target
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    fn flat_index(&self, states: &[usize]) -> Result<usize> {
        if states.len() != self.features.len() {
            return Err(Error::InvalidQuery(format!(
                "expected {} feature states, got {}",
                self.features.len(),
                states.len()
            )));
        }
        let mut idx = 0usize;
        for (s, v) in states.iter().zip(&self.features) {
            if *s >= v.cardinality {
                return Err(Error::InvalidQuery(format!(
                    "state {s} out of range for `{}`",
                    v.name
                )));
            }
            idx = idx * v.cardinality + s;
        }
        Ok(idx)
    }

    /// Predicted target state for one feature tuple.
    pub fn predict(&self, states: &[usize]) -> Result<usize> {
        Ok(self.decisions[self.flat_index(states)?])
    }

    /// Appends a prediction column to a sample set.
    pub fn annotate(&self, samples: &SampleSet, column: &str) -> Result<SampleSet> {
        if samples.var_index(column).is_ok() {
            return Err(Error::InvalidSpec(format!(
                "column `{column}` already exists"
            )));
        }
        let feature_idx: Vec<usize> = self
            .features
            .iter()
            .map(|f| samples.var_index(&f.name))
            .collect::<Result<_>>()?;
        let mut vars = samples.variables().to_vec();
        vars.push(VariableSpec {
            name: column.to_string(),
            cardinality: self.target.cardinality,
        });
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for (tuple, &w) in samples.counts() {
            let states: Vec<usize> = feature_idx.iter().map(|&i| tuple[i]).collect();
            let mut out = tuple.clone();
            out.push(self.predict(&states)?);
            *counts.entry(out).or_insert(0) += w;
        }
        SampleSet::new(vars, counts)
    }
}

/// Fits a [`PluginClassifier`]: for each feature tuple, predicts the target
/// state with the largest smoothed count, breaking ties toward the lower
/// state index. Unseen tuples fall back to state 0.
pub fn train_plugin_classifier(
    samples: &SampleSet,
    features: &[&str],
    target: &str,
    smoothing: f64,
) -> Result<PluginClassifier> {
    if features.is_empty() {
        return Err(Error::InvalidQuery(
            "classifier needs at least one feature".to_string(),
        ));
    }
    if smoothing < 0.0 || !smoothing.is_finite() {
        return Err(Error::InvalidQuery(
            "smoothing must be finite and >= 0".to_string(),
        ));
    }
    let feature_idx: Vec<usize> = features
        .iter()
        .map(|f| {
            samples
                .var_index(f)
                .map_err(|_| Error::MissingRole((*f).to_string()))
        })
        .collect::<Result<_>>()?;
    let target_idx = samples
        .var_index(target)
        .map_err(|_| Error::MissingRole(target.to_string()))?;
    if feature_idx.contains(&target_idx) {
        return Err(Error::InvalidQuery(
            "target cannot be one of the features".to_string(),
        ));
    }

    let feature_vars: Vec<VariableSpec> = feature_idx
        .iter()
        .map(|&i| samples.variables()[i].clone())
        .collect();
    let target_var = samples.variables()[target_idx].clone();
    let tuples: usize = feature_vars.iter().map(|v| v.cardinality).product();
    let mut table = vec![0.0f64; tuples * target_var.cardinality];
    for (tuple, &w) in samples.counts() {
        let mut idx = 0usize;
        for (&fi, v) in feature_idx.iter().zip(&feature_vars) {
            idx = idx * v.cardinality + tuple[fi];
        }
        table[idx * target_var.cardinality + tuple[target_idx]] += w as f64;
    }
    // Uniform additive smoothing never moves the argmax; it only documents
    // how unseen tuples resolve (all-tied counts, lower state wins).
    let decisions: Vec<usize> = (0..tuples)
        .map(|t| {
            let row = &table[t * target_var.cardinality..(t + 1) * target_var.cardinality];
            let mut best = 0usize;
            for (s, &count) in row.iter().enumerate() {
                if count > row[best] {
                    best = s;
                }
            }
            best
        })
        .collect();
    Ok(PluginClassifier {
        features: feature_vars,
        target: target_var,
        decisions,
        smoothing,
    })
}

/// Fairness conditional on the gate: demographic parity within the gated
/// slice and equalized odds given label and gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GatedFairnessReport {
    /// Prediction-attribute gap on the distribution conditioned on `C=0`.
    pub dp_given_c0: f64,
    /// Prediction-attribute gap given truth and gate.
    pub eo_given_yc: f64,
    pub both_hold: bool,
}

/// Computes the two gate-conditional independence gaps on a joint that
/// includes the gate variable. Fails when `P(C=0)` is below the floor.
pub fn gated_fairness_gaps(
    joint: &JointTable,
    triple: &FairnessTriple,
    gate: &str,
    epsilon: f64,
) -> Result<GatedFairnessReport> {
    joint.var_index(gate)?;
    let gated_slice = joint.condition(&[(gate, 0usize)])?;
    let dp_given_c0 = gated_slice.ci_gap::<&str>(&triple.prediction, &triple.sensitive, &[])?;
    let eo_given_yc = joint.ci_gap(
        &triple.prediction,
        &triple.sensitive,
        &[triple.truth.as_str(), gate],
    )?;
    Ok(GatedFairnessReport {
        dp_given_c0,
        eo_given_yc,
        both_hold: dp_given_c0 <= epsilon && eo_given_yc <= epsilon,
    })
}

/// One row of a gate sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub gate: f64,
    pub report: MetricReport,
    /// Absent when the gate never fires (`P(C=0) = 0`).
    pub gated: Option<GatedFairnessReport>,
}

/// Result of sweeping the disadvantaged group's gate probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// CSV with columns `gate, dp_gap, eo_gap, pp_gap, dp_given_c0,
    /// eo_given_yc`, one row per gate value, floats at six decimal places.
    /// Gate-conditional cells are empty when the gate never fires.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("gate,dp_gap,eo_gap,pp_gap,dp_given_c0,eo_given_yc\n");
        for p in &self.points {
            let gated = match &p.gated {
                Some(g) => format!("{:.6},{:.6}", g.dp_given_c0, g.eo_given_yc),
                None => ",".to_string(),
            };
            out.push_str(&format!(
                "{:.6},{:.6},{:.6},{:.6},{gated}\n",
                p.gate, p.report.dp_gap, p.report.eo_gap, p.report.pp_gap
            ));
        }
        out
    }
}

/// Evaluates the correction across gate settings.
///
/// Each value `q` in `gate_values` is applied as the disadvantaged group's
/// gate probability `q_1`, with `q_0` taken from the template, which must
/// use the per-group gate form. The sensitive attribute must be binary.
/// Every point is computed on the exact joint.
pub fn sweep_gate(
    base: &ScmSpec,
    policy_template: &CorrectionPolicy,
    gate_values: &[f64],
    triple: &FairnessTriple,
    epsilon: f64,
    tau: f64,
) -> Result<SweepResult> {
    if gate_values.is_empty() {
        return Err(Error::InvalidQuery("gate sweep needs values".to_string()));
    }
    if gate_values
        .iter()
        .any(|&q| !(0.0..=1.0).contains(&q) || !q.is_finite())
    {
        return Err(Error::InvalidQuery(
            "gate values must lie in [0, 1]".to_string(),
        ));
    }
    if gate_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidQuery(
            "gate values must be strictly increasing".to_string(),
        ));
    }
    let advantaged_rate = match &policy_template.gate {
        GateSpec::PerGroup(q) if q.len() == 2 => q[0],
        GateSpec::PerGroup(_) => {
            return Err(Error::InvalidSpec(
                "gate sweep requires a binary sensitive attribute".to_string(),
            ))
        }
        GateSpec::Xor { .. } => {
            return Err(Error::InvalidSpec(
                "gate sweep requires the per-group gate form".to_string(),
            ))
        }
    };

    let points = gate_values
        .iter()
        .map(|&q| -> Result<SweepPoint> {
            let mut policy = policy_template.clone();
            policy.gate = GateSpec::PerGroup(vec![advantaged_rate, q]);
            let model = build_correction_scm(base, &policy, triple)?;
            let joint = model.exact_joint::<&str>(&[])?;
            let report = audit(&joint, triple, epsilon, tau)?;
            let gated = match gated_fairness_gaps(&joint, triple, GATE_NAME, epsilon) {
                Ok(g) => Some(g),
                Err(Error::ZeroProbabilityEvent { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(SweepPoint {
                gate: q,
                report,
                gated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { points })
}

/// The running example used throughout the documentation and tests: a
/// hiring chain `A -> Y -> Yhat` with an advantaged group 0 and a
/// disadvantaged group 1.
pub mod examples {
    use super::*;

    /// `P(A=1)=0.5`, `P(Y=1|A=0)=0.6`, `P(Y=1|A=1)=0.3`,
    /// `P(Yhat=1|Y=1)=0.8`, `P(Yhat=1|Y=0)=0.1`.
    pub fn hiring_scm() -> ScmSpec {
        ScmSpec::new(vec![
            ScmVariable::root("A", vec![0.5, 0.5]),
            ScmVariable::with_parents(
                "Y",
                2,
                vec!["A".to_string()],
                vec![vec![0.4, 0.6], vec![0.7, 0.3]],
            ),
            ScmVariable::with_parents(
                "Yhat",
                2,
                vec!["Y".to_string()],
                vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            ),
        ])
        .expect("the hiring example is a valid model")
    }

    /// Group-blind fallback: the disadvantaged group gates at
    /// `gate_disadvantaged`, the advantaged group never gates, and the
    /// fallback is a fair coin regardless of group.
    pub fn shared_fallback_policy(gate_disadvantaged: f64) -> CorrectionPolicy {
        CorrectionPolicy::new(
            GateSpec::PerGroup(vec![0.0, gate_disadvantaged]),
            FallbackPolicy::Shared(vec![0.5, 0.5]),
        )
    }

    /// Preferential correction: the disadvantaged group always gates and its
    /// fallback matches the advantaged group's base rate, 0.6.
    pub fn preferential_policy() -> CorrectionPolicy {
        CorrectionPolicy::new(
            GateSpec::PerGroup(vec![0.0, 1.0]),
            FallbackPolicy::PerGroup(vec![vec![0.5, 0.5], vec![0.4, 0.6]]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::examples::*;
    use super::*;

    fn standard() -> FairnessTriple {
        FairnessTriple::standard()
    }

    #[test]
    fn exact_joint_matches_hand_computed_hiring_table() {
        let joint = hiring_scm().exact_joint::<&str>(&[]).unwrap();
        let expected = [0.18, 0.02, 0.06, 0.24, 0.315, 0.035, 0.03, 0.12];
        for (got, want) in joint.probs().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
        let pred = joint.marginalize(&["Yhat"]).unwrap();
        assert!((pred.probs()[1] - 0.415).abs() < 1e-12);
        let report = audit(&joint, &standard(), 0.01, 0.05).unwrap();
        assert!((report.dp_gap - 0.0525).abs() < 1e-12);
    }

    #[test]
    fn exact_joint_single_root() {
        let scm = ScmSpec::new(vec![ScmVariable::root("X", vec![0.2, 0.8])]).unwrap();
        let joint = scm.exact_joint::<&str>(&[]).unwrap();
        assert_eq!(joint.probs(), &[0.2, 0.8]);
    }

    #[test]
    fn exact_joint_deterministic_chain() {
        let scm = ScmSpec::new(vec![
            ScmVariable::root("X", vec![0.0, 1.0]),
            ScmVariable::with_parents(
                "Z",
                2,
                vec!["X".to_string()],
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            ),
        ])
        .unwrap();
        let joint = scm.exact_joint::<&str>(&[]).unwrap();
        assert_eq!(joint.probs(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn spec_validation_rejects_bad_models() {
        // Parent declared after the child.
        assert!(ScmSpec::new(vec![
            ScmVariable::with_parents("Z", 2, vec!["X".to_string()], vec![vec![0.5, 0.5]; 2]),
            ScmVariable::root("X", vec![0.5, 0.5]),
        ])
        .is_err());
        // Wrong row count.
        assert!(ScmSpec::new(vec![
            ScmVariable::root("X", vec![0.5, 0.5]),
            ScmVariable::with_parents("Z", 2, vec!["X".to_string()], vec![vec![0.5, 0.5]]),
        ])
        .is_err());
        // Row does not normalize.
        assert!(ScmSpec::new(vec![ScmVariable::root("X", vec![0.5, 0.6])]).is_err());
    }

    #[test]
    fn ancestral_sampling_is_deterministic_and_consistent() {
        let scm = hiring_scm();
        let a = scm.ancestral_sample(2_000, 7).unwrap();
        let b = scm.ancestral_sample(2_000, 7).unwrap();
        assert_eq!(a, b);

        let deterministic = ScmSpec::new(vec![
            ScmVariable::root("X", vec![0.0, 1.0]),
            ScmVariable::with_parents(
                "Z",
                2,
                vec!["X".to_string()],
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            ),
        ])
        .unwrap();
        let s = deterministic.ancestral_sample(100, 1).unwrap();
        assert_eq!(s.counts().len(), 1);
        assert_eq!(s.counts()[&vec![1usize, 1usize]], 100);
    }

    #[test]
    fn sampling_tracks_exact_joint() {
        let scm = hiring_scm();
        let exact = scm.exact_joint::<&str>(&[]).unwrap();
        let empirical =
            crate::dist::empirical_joint(&scm.ancestral_sample(100_000, 7).unwrap(), 0.0).unwrap();
        for (e, o) in exact.probs().iter().zip(empirical.probs()) {
            assert!((e - o).abs() < 0.01);
        }
    }

    #[test]
    fn correction_with_zero_gate_is_identity() {
        let base = hiring_scm();
        let policy = shared_fallback_policy(0.0);
        let model = build_correction_scm(&base, &policy, &standard()).unwrap();
        let corrected = model.exact_joint(&[GATE_NAME]).unwrap();
        let original = base.exact_joint::<&str>(&[]).unwrap();
        for (c, o) in corrected.probs().iter().zip(original.probs()) {
            assert!((c - o).abs() < 1e-12);
        }
    }

    #[test]
    fn correction_with_full_gate_decouples_prediction() {
        let base = hiring_scm();
        let policy = CorrectionPolicy::new(
            GateSpec::PerGroup(vec![1.0, 1.0]),
            FallbackPolicy::Shared(vec![0.5, 0.5]),
        );
        let model = build_correction_scm(&base, &policy, &standard()).unwrap();
        let joint = model.exact_joint(&[GATE_NAME]).unwrap();
        assert!(joint.ci_gap::<&str>("Yhat", "A", &[]).unwrap() < 1e-9);
        assert!(joint.ci_gap::<&str>("Yhat", "Y", &[]).unwrap() < 1e-9);
        let report = audit(&joint, &standard(), 0.01, 0.05).unwrap();
        assert!(report.satisfied.dp && report.satisfied.eo);
    }

    #[test]
    fn correction_matches_analytic_mixture() {
        // Independent route: marginalizing the gate by hand gives
        // P(a, y, yhat) = P(a) P(y|a) [(1-q_a) clf(yhat|y) + q_a fb_a(yhat)].
        let base = hiring_scm();
        let policy = preferential_policy();
        let model = build_correction_scm(&base, &policy, &standard()).unwrap();
        let joint = model.exact_joint(&[GATE_NAME]).unwrap();

        let p_a = [0.5, 0.5];
        let p_y_given_a = [[0.4, 0.6], [0.7, 0.3]];
        let clf = [[0.9, 0.1], [0.2, 0.8]];
        let fb = [[0.5, 0.5], [0.4, 0.6]];
        let q = [0.0, 1.0];
        for a in 0..2 {
            for y in 0..2 {
                for yh in 0..2 {
                    let expected =
                        p_a[a] * p_y_given_a[a][y] * ((1.0 - q[a]) * clf[y][yh] + q[a] * fb[a][yh]);
                    let got = joint.prob_of(&[a, y, yh]).unwrap();
                    assert!(
                        (got - expected).abs() < 1e-12,
                        "({a},{y},{yh}): {got} vs {expected}"
                    );
                }
            }
        }
    }

    #[test]
    fn correction_requires_roles_and_classifier_shape() {
        let policy = shared_fallback_policy(0.5);
        let no_truth = ScmSpec::new(vec![
            ScmVariable::root("A", vec![0.5, 0.5]),
            ScmVariable::root("Yhat", vec![0.5, 0.5]),
        ])
        .unwrap();
        assert!(matches!(
            build_correction_scm(&no_truth, &policy, &standard()),
            Err(Error::MissingRole(_))
        ));

        // Prediction conditioned on the attribute as well: rejected.
        let wide = ScmSpec::new(vec![
            ScmVariable::root("A", vec![0.5, 0.5]),
            ScmVariable::with_parents(
                "Y",
                2,
                vec!["A".to_string()],
                vec![vec![0.4, 0.6], vec![0.7, 0.3]],
            ),
            ScmVariable::with_parents(
                "Yhat",
                2,
                vec!["A".to_string(), "Y".to_string()],
                vec![vec![0.9, 0.1]; 4],
            ),
        ])
        .unwrap();
        assert!(matches!(
            build_correction_scm(&wide, &policy, &standard()),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn xor_gate_couples_group_rates() {
        let policy = CorrectionPolicy::new(
            GateSpec::Xor { noise_prob: 0.3 },
            FallbackPolicy::Shared(vec![0.5, 0.5]),
        );
        let rates = policy.gate.rates(2).unwrap();
        assert!((rates[0] - 0.7).abs() < 1e-15);
        assert!((rates[1] - 0.3).abs() < 1e-15);
        assert!(policy.gate.rates(3).is_err());
    }

    #[test]
    fn label_correction_identity_and_deterministic_flip() {
        let samples = hiring_scm().ancestral_sample(5_000, 11).unwrap();
        let noop = CorrectionPolicy::new(
            GateSpec::PerGroup(vec![0.0, 0.0]),
            FallbackPolicy::Shared(vec![0.5, 0.5]),
        );
        let same = apply_label_correction(&samples, &noop, "A", "Y", 3).unwrap();
        assert_eq!(samples, same);

        let flip_all = noop.clone().with_flip(1, vec![1.0, 0.0]);
        let flipped = apply_label_correction(&samples, &flip_all, "A", "Y", 3).unwrap();
        assert_eq!(flipped.total(), samples.total());
        // Every disadvantaged negative became positive.
        for (tuple, &w) in flipped.counts() {
            if tuple[0] == 1 && tuple[1] == 0 {
                panic!("unflipped disadvantaged negative with weight {w}");
            }
        }
        // Non-truth columns match: the (A, Yhat) margins are untouched.
        let margin = |s: &SampleSet| -> BTreeMap<(usize, usize), u64> {
            let mut m = BTreeMap::new();
            for (t, &w) in s.counts() {
                *m.entry((t[0], t[2])).or_insert(0) += w;
            }
            m
        };
        assert_eq!(margin(&samples), margin(&flipped));
    }

    #[test]
    fn label_correction_equalizes_base_rates() {
        // Flipping disadvantaged negatives at rate 0.3/0.7 lifts the group
        // base rate from 0.3 to 0.3 + 0.7 * (3/7) = 0.6 in expectation.
        let samples = hiring_scm().ancestral_sample(100_000, 13).unwrap();
        let policy = CorrectionPolicy::new(
            GateSpec::PerGroup(vec![0.0, 0.0]),
            FallbackPolicy::Shared(vec![0.5, 0.5]),
        )
        .with_flip(1, vec![0.3 / 0.7, 0.0]);
        let corrected = apply_label_correction(&samples, &policy, "A", "Y", 17).unwrap();
        let joint = crate::dist::empirical_joint(&corrected, 0.0).unwrap();
        let disadvantaged = joint.condition(&[("A", 1usize)]).unwrap();
        let rate = disadvantaged.marginalize(&["Y"]).unwrap().probs()[1];
        assert!((rate - 0.6).abs() < 0.01, "corrected base rate {rate}");
    }

    #[test]
    fn plugin_classifier_identity_and_tie_break() {
        let samples = SampleSet::from_csv_str("X,Y\n0,0\n0,0\n1,1\n1,1\n").unwrap();
        let clf = train_plugin_classifier(&samples, &["X"], "Y", 0.0).unwrap();
        assert_eq!(clf.predict(&[0]).unwrap(), 0);
        assert_eq!(clf.predict(&[1]).unwrap(), 1);

        // Unseen tuple: smoothed counts tie, the lower state wins.
        let sparse = SampleSet::from_csv_str("X,Z,Y\n0,0,1\n0,0,1\n").unwrap();
        let clf = train_plugin_classifier(&sparse, &["X", "Z"], "Y", 1.0).unwrap();
        assert_eq!(clf.predict(&[1, 1]).unwrap(), 0);
    }

    #[test]
    fn plugin_classifier_majority_per_group() {
        let samples = hiring_scm().ancestral_sample(100_000, 19).unwrap();
        let clf = train_plugin_classifier(&samples, &["A"], "Y", 0.0).unwrap();
        // P(Y=1|A=0)=0.6 > 0.5 and P(Y=1|A=1)=0.3 < 0.5.
        assert_eq!(clf.predict(&[0]).unwrap(), 1);
        assert_eq!(clf.predict(&[1]).unwrap(), 0);
    }

    #[test]
    fn plugin_classifier_reproduces_argmax_on_exact_conditionals() {
        // Infinite-data limit: weights proportional to the exact joint.
        let joint = hiring_scm().exact_joint::<&str>(&[]).unwrap();
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for (flat, &p) in joint.probs().iter().enumerate() {
            let w = (p * 1000.0).round() as u64;
            if w > 0 {
                counts.insert(joint.states_of(flat), w);
            }
        }
        let samples = SampleSet::new(joint.variables().to_vec(), counts).unwrap();
        let clf = train_plugin_classifier(&samples, &["Y"], "Yhat", 0.0).unwrap();
        // argmax of the classifier rows: y=0 -> 0, y=1 -> 1.
        assert_eq!(clf.predict(&[0]).unwrap(), 0);
        assert_eq!(clf.predict(&[1]).unwrap(), 1);

        let annotated = clf.annotate(&samples, "Yhat2").unwrap();
        assert!(annotated.var_index("Yhat2").is_ok());
        assert_eq!(annotated.total(), samples.total());
    }

    #[test]
    fn gated_gaps_vanish_with_group_blind_fallback() {
        let base = hiring_scm();
        for q in [0.25, 0.5, 1.0] {
            let model =
                build_correction_scm(&base, &shared_fallback_policy(q), &standard()).unwrap();
            let joint = model.exact_joint::<&str>(&[]).unwrap();
            let gated = gated_fairness_gaps(&joint, &standard(), GATE_NAME, 1e-9).unwrap();
            assert!(gated.dp_given_c0 <= 1e-9, "q={q}: {}", gated.dp_given_c0);
            assert!(gated.eo_given_yc <= 1e-9, "q={q}: {}", gated.eo_given_yc);
            assert!(gated.both_hold);
        }
    }

    #[test]
    fn gated_gaps_detect_group_dependent_fallback() {
        let base = hiring_scm();
        let policy = CorrectionPolicy::new(
            GateSpec::PerGroup(vec![0.5, 0.5]),
            FallbackPolicy::PerGroup(vec![vec![0.5, 0.5], vec![0.4, 0.6]]),
        );
        let model = build_correction_scm(&base, &policy, &standard()).unwrap();
        let joint = model.exact_joint::<&str>(&[]).unwrap();
        let gated = gated_fairness_gaps(&joint, &standard(), GATE_NAME, 1e-9).unwrap();
        assert!(gated.dp_given_c0 > 1e-4);
        assert!(!gated.both_hold);
    }

    #[test]
    fn gated_gaps_error_when_gate_never_fires() {
        let base = hiring_scm();
        let model = build_correction_scm(&base, &shared_fallback_policy(0.0), &standard()).unwrap();
        let joint = model.exact_joint::<&str>(&[]).unwrap();
        assert!(matches!(
            gated_fairness_gaps(&joint, &standard(), GATE_NAME, 1e-9),
            Err(Error::ZeroProbabilityEvent { .. })
        ));
    }

    #[test]
    fn sweep_first_point_matches_base_audit() {
        let base = hiring_scm();
        let sweep = sweep_gate(
            &base,
            &shared_fallback_policy(0.0),
            &[0.0],
            &standard(),
            0.01,
            0.05,
        )
        .unwrap();
        let base_report = audit(
            &base.exact_joint::<&str>(&[]).unwrap(),
            &standard(),
            0.01,
            0.05,
        )
        .unwrap();
        let point = &sweep.points[0];
        assert!((point.report.dp_gap - base_report.dp_gap).abs() < 1e-12);
        assert!((point.report.eo_gap - base_report.eo_gap).abs() < 1e-12);
        assert!((point.report.pp_gap - base_report.pp_gap).abs() < 1e-12);
        assert!(point.gated.is_none());
    }

    #[test]
    fn sweep_dp_gap_non_increasing_on_hiring() {
        let sweep = sweep_gate(
            &hiring_scm(),
            &shared_fallback_policy(0.0),
            &[0.0, 0.25, 0.5, 0.75, 1.0],
            &standard(),
            0.01,
            0.05,
        )
        .unwrap();
        let gaps: Vec<f64> = sweep.points.iter().map(|p| p.report.dp_gap).collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{gaps:?}");
        let csv = sweep.to_csv_string();
        assert!(csv.starts_with("gate,dp_gap,eo_gap,pp_gap,dp_given_c0,eo_given_yc\n"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn sweep_validates_grid() {
        let base = hiring_scm();
        let t = standard();
        let p = shared_fallback_policy(0.0);
        assert!(sweep_gate(&base, &p, &[], &t, 0.01, 0.05).is_err());
        assert!(sweep_gate(&base, &p, &[0.5, 0.5], &t, 0.01, 0.05).is_err());
        assert!(sweep_gate(&base, &p, &[0.5, 0.2], &t, 0.01, 0.05).is_err());
        assert!(sweep_gate(&base, &p, &[1.5], &t, 0.01, 0.05).is_err());
    }

    #[test]
    fn policy_json_round_trip() {
        let policy = preferential_policy().with_flip(1, vec![0.3 / 0.7, 0.0]);
        let text = policy.to_json();
        let back = CorrectionPolicy::from_json(&text).unwrap();
        assert_eq!(policy, back);

        let xor = CorrectionPolicy::new(
            GateSpec::Xor { noise_prob: 0.25 },
            FallbackPolicy::Shared(vec![0.5, 0.5]),
        );
        let back = CorrectionPolicy::from_json(&xor.to_json()).unwrap();
        assert_eq!(xor, back);

        assert!(CorrectionPolicy::from_json(
            "{\"gate\":{\"0\":1.5},\"fairness_policy\":[0.5,0.5]}"
        )
        .is_err());
    }

    #[test]
    fn scm_json_round_trip() {
        let scm = hiring_scm();
        let text = scm.to_json();
        let back = ScmSpec::from_json(&text).unwrap();
        assert_eq!(scm, back);
        assert!(ScmSpec::from_json("{\"variables\": [{\"name\": \"X\", \"cardinality\": 2, \"parents\": [], \"cpd\": [[0.7, 0.7]]}]}").is_err());
    }
}
