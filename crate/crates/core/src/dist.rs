//! Exact discrete joint distributions and finite sample sets.
//!
//! A [`JointTable`] stores the full probability table of a handful of finite
//! variables, row-major with the last variable fastest. Everything here is
//! exact arithmetic over `f64`: marginalization and conditioning sum table
//! entries, and [`JointTable::ci_gap`] measures conditional independence as
//! the worst-case deviation from product factorization.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance for a probability table to sum to one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Conditioning events and contexts below this mass are treated as impossible.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// A named finite variable.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub cardinality: usize,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Result<Self> {
        let name = name.into();
        if cardinality < 2 {
            return Err(Error::InvalidSpec(format!(
                "variable `{name}` must have cardinality >= 2"
            )));
        }
        Ok(VariableSpec { name, cardinality })
    }

    /// Two-state variable, the default throughout the crate.
    pub fn binary(name: impl Into<String>) -> Self {
        VariableSpec {
            name: name.into(),
            cardinality: 2,
        }
    }
}

fn check_unique_names(vars: &[VariableSpec]) -> Result<()> {
    for (i, v) in vars.iter().enumerate() {
        if vars[..i].iter().any(|w| w.name == v.name) {
            return Err(Error::InvalidSpec(format!(
                "duplicate variable name `{}`",
                v.name
            )));
        }
    }
    Ok(())
}

/// Exact joint probability distribution over an ordered list of variables.
///
/// The table is row-major over variable order with the last variable varying
/// fastest. Entries are non-negative and sum to one within
/// [`NORMALIZATION_TOLERANCE`]. Immutable after construction.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct JointTable {
    variables: Vec<VariableSpec>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(variables: Vec<VariableSpec>, probs: Vec<f64>) -> Result<Self> {
        check_unique_names(&variables)?;
        for v in &variables {
            if v.cardinality < 2 {
                return Err(Error::InvalidSpec(format!(
                    "variable `{}` must have cardinality >= 2",
                    v.name
                )));
            }
        }
        let expected: usize = variables.iter().map(|v| v.cardinality).product();
        if probs.len() != expected {
            return Err(Error::InvalidSpec(format!(
                "table has {} entries, expected {expected}",
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidSpec(
                "table entries must be finite and non-negative".to_string(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidSpec(format!(
                "table entries sum to {total}, expected 1"
            )));
        }
        Ok(JointTable { variables, probs })
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Overwrites the probability entries without re-validating. The caller
    /// must supply a table of the same length that sums to one; used by the
    /// grid scan to reuse one allocation across millions of grid points.
    pub(crate) fn overwrite_probs(&mut self, probs: &[f64]) {
        debug_assert_eq!(probs.len(), self.probs.len());
        self.probs.copy_from_slice(probs);
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Stride of each variable in the row-major layout.
    fn strides(&self) -> Vec<usize> {
        let n = self.variables.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.variables[i + 1].cardinality;
        }
        strides
    }

    /// Decodes a flat index into per-variable states.
    pub fn states_of(&self, mut index: usize) -> Vec<usize> {
        let mut states = vec![0usize; self.variables.len()];
        for (i, v) in self.variables.iter().enumerate().rev() {
            states[i] = index % v.cardinality;
            index /= v.cardinality;
        }
        states
    }

    /// Probability of a full state tuple.
    pub fn prob_of(&self, states: &[usize]) -> Result<f64> {
        if states.len() != self.variables.len() {
            return Err(Error::InvalidQuery(format!(
                "expected {} states, got {}",
                self.variables.len(),
                states.len()
            )));
        }
        let strides = self.strides();
        let mut idx = 0usize;
        for ((s, v), stride) in states.iter().zip(&self.variables).zip(&strides) {
            if *s >= v.cardinality {
                return Err(Error::InvalidQuery(format!(
                    "state {s} out of range for `{}`",
                    v.name
                )));
            }
            idx += s * stride;
        }
        Ok(self.probs[idx])
    }

    /// Sums out every variable not named in `keep`. The result preserves the
    /// original variable order restricted to `keep` and stays normalized.
    pub fn marginalize<S: AsRef<str>>(&self, keep: &[S]) -> Result<JointTable> {
        if keep.is_empty() {
            return Err(Error::InvalidQuery(
                "marginalization must keep at least one variable".to_string(),
            ));
        }
        let mut keep_idx = Vec::with_capacity(keep.len());
        for name in keep {
            let i = self.var_index(name.as_ref())?;
            if !keep_idx.contains(&i) {
                keep_idx.push(i);
            }
        }
        keep_idx.sort_unstable();
        let kept: Vec<VariableSpec> = keep_idx
            .iter()
            .map(|&i| self.variables[i].clone())
            .collect();
        let size: usize = kept.iter().map(|v| v.cardinality).product();
        let mut out = vec![0.0f64; size];
        for (flat, &p) in self.probs.iter().enumerate() {
            let states = self.states_of(flat);
            let mut idx = 0usize;
            for &i in &keep_idx {
                idx = idx * self.variables[i].cardinality + states[i];
            }
            out[idx] += p;
        }
        JointTable::new(kept, out)
    }

    /// Conditions on a set of variable assignments and returns the normalized
    /// distribution over the remaining variables.
    ///
    /// Fails with [`Error::ZeroProbabilityEvent`] when the event mass is
    /// below [`PROBABILITY_FLOOR`].
    pub fn condition<S: AsRef<str>>(&self, assignments: &[(S, usize)]) -> Result<JointTable> {
        let mut fixed: Vec<Option<usize>> = vec![None; self.variables.len()];
        for (name, state) in assignments {
            let i = self.var_index(name.as_ref())?;
            if *state >= self.variables[i].cardinality {
                return Err(Error::InvalidQuery(format!(
                    "state {state} out of range for `{}`",
                    self.variables[i].name
                )));
            }
            fixed[i] = Some(*state);
        }
        let remaining: Vec<usize> = (0..self.variables.len())
            .filter(|&i| fixed[i].is_none())
            .collect();
        let kept: Vec<VariableSpec> = remaining
            .iter()
            .map(|&i| self.variables[i].clone())
            .collect();
        let size: usize = kept.iter().map(|v| v.cardinality).product();
        let mut out = vec![0.0f64; size];
        let mut mass = 0.0f64;
        for (flat, &p) in self.probs.iter().enumerate() {
            let states = self.states_of(flat);
            if remaining.len() < self.variables.len() {
                let matches = fixed
                    .iter()
                    .enumerate()
                    .all(|(i, f)| f.is_none_or(|s| states[i] == s));
                if !matches {
                    continue;
                }
            }
            mass += p;
            let mut idx = 0usize;
            for &i in &remaining {
                idx = idx * self.variables[i].cardinality + states[i];
            }
            out[idx] += p;
        }
        if mass < PROBABILITY_FLOOR {
            return Err(Error::ZeroProbabilityEvent {
                floor: PROBABILITY_FLOOR,
            });
        }
        for p in &mut out {
            *p /= mass;
        }
        JointTable::new(kept, out)
    }

    /// Conditional-independence gap between `x` and `y` given the variables
    /// in `given`: the maximum over conditioning contexts `z` with mass at
    /// least [`PROBABILITY_FLOOR`], and over state pairs, of
    /// `|P(x,y|z) - P(x|z) P(y|z)|`.
    ///
    /// Vanishes (up to floating-point rounding) exactly when the conditional
    /// independence holds on every context above the floor. Symmetric in `x`
    /// and `y`.
    pub fn ci_gap<S: AsRef<str>>(&self, x: &str, y: &str, given: &[S]) -> Result<f64> {
        let xi = self.var_index(x)?;
        let yi = self.var_index(y)?;
        if xi == yi {
            return Err(Error::InvalidQuery("x and y must differ".to_string()));
        }
        let mut given_idx = Vec::with_capacity(given.len());
        for g in given {
            let i = self.var_index(g.as_ref())?;
            if i == xi || i == yi {
                return Err(Error::InvalidQuery(
                    "x and y must not appear in the conditioning set".to_string(),
                ));
            }
            if !given_idx.contains(&i) {
                given_idx.push(i);
            }
        }

        let cx = self.variables[xi].cardinality;
        let cy = self.variables[yi].cardinality;
        let n_ctx: usize = given_idx
            .iter()
            .map(|&i| self.variables[i].cardinality)
            .product();

        let mut pz = vec![0.0f64; n_ctx];
        let mut pxy = vec![0.0f64; n_ctx * cx * cy];
        let mut px = vec![0.0f64; n_ctx * cx];
        let mut py = vec![0.0f64; n_ctx * cy];
        for (flat, &p) in self.probs.iter().enumerate() {
            let states = self.states_of(flat);
            let mut ctx = 0usize;
            for &g in &given_idx {
                ctx = ctx * self.variables[g].cardinality + states[g];
            }
            let (xs, ys) = (states[xi], states[yi]);
            pz[ctx] += p;
            pxy[(ctx * cx + xs) * cy + ys] += p;
            px[ctx * cx + xs] += p;
            py[ctx * cy + ys] += p;
        }

        let mut worst = 0.0f64;
        for ctx in 0..n_ctx {
            if pz[ctx] < PROBABILITY_FLOOR {
                continue;
            }
            let z = pz[ctx];
            for xs in 0..cx {
                for ys in 0..cy {
                    let joint = pxy[(ctx * cx + xs) * cy + ys] / z;
                    let product = (px[ctx * cx + xs] / z) * (py[ctx * cy + ys] / z);
                    let dev = (joint - product).abs();
                    if dev > worst {
                        worst = dev;
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Draws `n` i.i.d. observations by inverse-CDF over the flattened table.
    ///
    /// The same `(seed, n, table)` always yields bit-identical output.
    pub fn sample(&self, n: u64, seed: u64) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::InvalidQuery("sample size must be >= 1".to_string()));
        }
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0f64;
        for &p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for _ in 0..n {
            let u: f64 = rng.random();
            let idx = cdf.partition_point(|&c| c <= u).min(self.probs.len() - 1);
            *counts.entry(self.states_of(idx)).or_insert(0) += 1;
        }
        SampleSet::new(self.variables.clone(), counts)
    }
}

/// Weighted observations of an ordered list of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    variables: Vec<VariableSpec>,
    counts: BTreeMap<Vec<usize>, u64>,
}

impl SampleSet {
    pub fn new(variables: Vec<VariableSpec>, counts: BTreeMap<Vec<usize>, u64>) -> Result<Self> {
        check_unique_names(&variables)?;
        let mut total = 0u64;
        for (tuple, &w) in &counts {
            if tuple.len() != variables.len() {
                return Err(Error::InvalidSpec(format!(
                    "tuple has {} states, expected {}",
                    tuple.len(),
                    variables.len()
                )));
            }
            for (s, v) in tuple.iter().zip(&variables) {
                if *s >= v.cardinality {
                    return Err(Error::InvalidSpec(format!(
                        "state {s} out of range for `{}`",
                        v.name
                    )));
                }
            }
            total += w;
        }
        if total == 0 {
            return Err(Error::InvalidSpec(
                "sample set must hold at least one observation".to_string(),
            ));
        }
        Ok(SampleSet { variables, counts })
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn counts(&self) -> &BTreeMap<Vec<usize>, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Reads the CSV exchange format: a header of variable names, one row per
    /// observation with states as non-negative integers. A trailing `weight`
    /// column aggregates identical observations.
    ///
    /// Cardinalities are inferred as one more than the largest observed
    /// state, with a floor of two.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<SampleSet> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut names: Vec<String> = headers.iter().map(str::to_string).collect();
        if names.is_empty() {
            return Err(Error::Parse("CSV has no columns".to_string()));
        }
        let weighted = names.last().map(String::as_str) == Some("weight");
        if weighted {
            names.pop();
        }
        if names.is_empty() {
            return Err(Error::Parse("CSV has no variable columns".to_string()));
        }
        if names.iter().any(|n| n == "weight") {
            return Err(Error::Parse(
                "`weight` is reserved for the trailing weight column".to_string(),
            ));
        }

        let mut raw: Vec<(Vec<usize>, u64)> = Vec::new();
        let mut maxima = vec![0usize; names.len()];
        for (rowno, record) in rdr.records().enumerate() {
            let record = record?;
            let expected = names.len() + usize::from(weighted);
            if record.len() != expected {
                return Err(Error::Parse(format!(
                    "row {}: expected {expected} fields, got {}",
                    rowno + 2,
                    record.len()
                )));
            }
            let mut tuple = Vec::with_capacity(names.len());
            for (col, field) in record.iter().take(names.len()).enumerate() {
                let state: usize = field.trim().parse().map_err(|_| {
                    Error::Parse(format!(
                        "row {}: column `{}` holds `{field}`, expected a non-negative integer",
                        rowno + 2,
                        names[col]
                    ))
                })?;
                maxima[col] = maxima[col].max(state);
                tuple.push(state);
            }
            let weight: u64 = if weighted {
                let field = record.get(names.len()).unwrap();
                field.trim().parse().map_err(|_| {
                    Error::Parse(format!("row {}: invalid weight `{field}`", rowno + 2))
                })?
            } else {
                1
            };
            raw.push((tuple, weight));
        }

        let variables: Vec<VariableSpec> = names
            .into_iter()
            .zip(&maxima)
            .map(|(name, &m)| VariableSpec {
                name,
                cardinality: (m + 1).max(2),
            })
            .collect();
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for (tuple, w) in raw {
            *counts.entry(tuple).or_insert(0) += w;
        }
        SampleSet::new(variables, counts)
    }

    pub fn from_csv_str(text: &str) -> Result<SampleSet> {
        SampleSet::from_csv_reader(text.as_bytes())
    }

    /// Writes the aggregated CSV form: variable columns plus a `weight`
    /// column, rows sorted by state tuple. Deterministic for equal inputs.
    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
        header.push("weight");
        wtr.write_record(&header)?;
        for (tuple, w) in &self.counts {
            let mut row: Vec<String> = tuple.iter().map(usize::to_string).collect();
            row.push(w.to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.to_csv_writer(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Estimates a joint table from samples with additive smoothing:
/// `P(t) = (count(t) + smoothing) / (N + smoothing * #tuples)`.
pub fn empirical_joint(samples: &SampleSet, smoothing: f64) -> Result<JointTable> {
    if smoothing < 0.0 || !smoothing.is_finite() {
        return Err(Error::InvalidQuery(
            "smoothing must be finite and >= 0".to_string(),
        ));
    }
    let variables = samples.variables().to_vec();
    let size: usize = variables.iter().map(|v| v.cardinality).product();
    let total = samples.total() as f64;
    let denom = total + smoothing * size as f64;
    let mut probs = vec![smoothing / denom; size];
    for (tuple, &w) in samples.counts() {
        let mut idx = 0usize;
        for (s, v) in tuple.iter().zip(&variables) {
            idx = idx * v.cardinality + s;
        }
        probs[idx] += w as f64 / denom;
    }
    JointTable::new(variables, probs)
}
