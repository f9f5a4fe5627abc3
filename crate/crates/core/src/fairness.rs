//! The three group-fairness metrics, their preconditions, graph-level
//! verdicts, and the brute-force grid scan of the impossibility theorem.
//!
//! Metric conventions, stated once and used everywhere:
//!
//! * demographic parity: prediction independent of the sensitive attribute,
//! * equalized odds: prediction independent of the sensitive attribute
//!   within each true-label group,
//! * predictive parity: true label independent of the sensitive attribute
//!   within each prediction group (equal group calibration).
//!
//! Every metric is quantified as a [`JointTable::ci_gap`], so zero means the
//! independence holds exactly.

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{empirical_joint, JointTable, SampleSet, VariableSpec};
use crate::error::{Error, Result};
use crate::graph::CausalDag;

/// Default satisfaction tolerance for metric gaps.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Default dependence threshold for the preconditions.
pub const DEFAULT_TAU: f64 = 0.05;

/// Default satisfaction tolerance for the grid scan. Grid tables with a gap
/// this small have the independence exactly, because the smallest nonzero
/// gap on a resolution-`r` grid is `1/r^2`.
pub const DEFAULT_SCAN_EPSILON: f64 = 1e-6;

/// Role assignment for a fairness audit: which variable is the sensitive
/// attribute, which the true label, and which the prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FairnessTriple {
    pub sensitive: String,
    pub truth: String,
    pub prediction: String,
}

impl FairnessTriple {
    pub fn new(
        sensitive: impl Into<String>,
        truth: impl Into<String>,
        prediction: impl Into<String>,
    ) -> Result<Self> {
        let t = FairnessTriple {
            sensitive: sensitive.into(),
            truth: truth.into(),
            prediction: prediction.into(),
        };
        if t.sensitive == t.truth || t.truth == t.prediction || t.sensitive == t.prediction {
            return Err(Error::InvalidQuery(
                "sensitive, truth, and prediction must be three distinct names".to_string(),
            ));
        }
        Ok(t)
    }

    /// The conventional roles used by the bundled examples: `A`, `Y`, `Yhat`.
    pub fn standard() -> Self {
        FairnessTriple {
            sensitive: "A".to_string(),
            truth: "Y".to_string(),
            prediction: "Yhat".to_string(),
        }
    }
}

/// Which metrics hold at tolerance epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SatisfiedFlags {
    pub dp: bool,
    pub eo: bool,
    pub pp: bool,
}

/// Full audit result: the three metric gaps, the two precondition
/// dependence gaps, and the satisfaction flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub dp_gap: f64,
    pub eo_gap: f64,
    pub pp_gap: f64,
    pub calibration_dep: f64,
    pub bias_dep: f64,
    pub satisfied: SatisfiedFlags,
    pub preconditions_met: bool,
    pub epsilon: f64,
    pub tau: f64,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

impl MetricReport {
    /// JSON document with the gap fields rounded to six decimal places.
    pub fn to_json(&self) -> String {
        let mut rounded = self.clone();
        rounded.dp_gap = round6(rounded.dp_gap);
        rounded.eo_gap = round6(rounded.eo_gap);
        rounded.pp_gap = round6(rounded.pp_gap);
        rounded.calibration_dep = round6(rounded.calibration_dep);
        rounded.bias_dep = round6(rounded.bias_dep);
        serde_json::to_string_pretty(&rounded).expect("report serialization cannot fail")
    }
}

fn validate_triple(joint: &JointTable, triple: &FairnessTriple) -> Result<()> {
    joint.var_index(&triple.sensitive)?;
    joint.var_index(&triple.truth)?;
    joint.var_index(&triple.prediction)?;
    Ok(())
}

/// Demographic-parity gap: dependence between prediction and sensitive
/// attribute.
pub fn dp_gap(joint: &JointTable, triple: &FairnessTriple) -> Result<f64> {
    validate_triple(joint, triple)?;
    joint.ci_gap::<&str>(&triple.prediction, &triple.sensitive, &[])
}

/// Equalized-odds gap: dependence between prediction and sensitive attribute
/// given the true label.
pub fn eo_gap(joint: &JointTable, triple: &FairnessTriple) -> Result<f64> {
    validate_triple(joint, triple)?;
    joint.ci_gap(
        &triple.prediction,
        &triple.sensitive,
        &[triple.truth.as_str()],
    )
}

/// Predictive-parity gap: dependence between true label and sensitive
/// attribute given the prediction.
pub fn pp_gap(joint: &JointTable, triple: &FairnessTriple) -> Result<f64> {
    validate_triple(joint, triple)?;
    joint.ci_gap(
        &triple.truth,
        &triple.sensitive,
        &[triple.prediction.as_str()],
    )
}

/// Both analysis preconditions at threshold `tau`: the prediction depends on
/// the true label (the classifier carries signal) and the true label depends
/// on the sensitive attribute (bias is possible at all).
pub fn check_preconditions(joint: &JointTable, triple: &FairnessTriple, tau: f64) -> Result<bool> {
    if tau <= 0.0 || tau.is_nan() {
        return Err(Error::InvalidQuery("tau must be positive".to_string()));
    }
    validate_triple(joint, triple)?;
    let calibration = joint.ci_gap::<&str>(&triple.truth, &triple.prediction, &[])?;
    let bias = joint.ci_gap::<&str>(&triple.sensitive, &triple.truth, &[])?;
    Ok(calibration >= tau && bias >= tau)
}

/// Audits an exact joint distribution.
pub fn audit(
    joint: &JointTable,
    triple: &FairnessTriple,
    epsilon: f64,
    tau: f64,
) -> Result<MetricReport> {
    if epsilon <= 0.0 || epsilon.is_nan() || tau <= 0.0 || tau.is_nan() {
        return Err(Error::InvalidQuery(
            "epsilon and tau must be positive".to_string(),
        ));
    }
    validate_triple(joint, triple)?;
    let dp = dp_gap(joint, triple)?;
    let eo = eo_gap(joint, triple)?;
    let pp = pp_gap(joint, triple)?;
    let calibration_dep = joint.ci_gap::<&str>(&triple.truth, &triple.prediction, &[])?;
    let bias_dep = joint.ci_gap::<&str>(&triple.sensitive, &triple.truth, &[])?;
    Ok(MetricReport {
        dp_gap: dp,
        eo_gap: eo,
        pp_gap: pp,
        calibration_dep,
        bias_dep,
        satisfied: SatisfiedFlags {
            dp: dp <= epsilon,
            eo: eo <= epsilon,
            pp: pp <= epsilon,
        },
        preconditions_met: calibration_dep >= tau && bias_dep >= tau,
        epsilon,
        tau,
    })
}

/// Audits a finite sample by first estimating the joint with additive
/// smoothing.
pub fn audit_samples(
    samples: &SampleSet,
    triple: &FairnessTriple,
    epsilon: f64,
    tau: f64,
    smoothing: f64,
) -> Result<MetricReport> {
    let joint = empirical_joint(samples, smoothing)?;
    audit(&joint, triple, epsilon, tau)
}

/// What a causal graph implies about each metric, by d-separation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphVerdicts {
    /// The graph forces demographic parity in every compatible distribution.
    pub dp_implied: bool,
    /// The graph forces equalized odds.
    pub eo_implied: bool,
    /// The graph forces predictive parity.
    pub pp_implied: bool,
    /// The graph permits prediction-label dependence (calibration).
    pub calibration_possible: bool,
    /// The graph permits label-attribute dependence (bias).
    pub bias_possible: bool,
}

/// Reads the metric verdicts off a causal graph: a metric is implied when
/// the matching d-separation holds, and a precondition is possible when the
/// matching pair is d-connected.
pub fn graph_metric_verdicts(dag: &CausalDag, triple: &FairnessTriple) -> Result<GraphVerdicts> {
    let a = triple.sensitive.as_str();
    let y = triple.truth.as_str();
    let yh = triple.prediction.as_str();
    Ok(GraphVerdicts {
        dp_implied: dag.d_separated::<&str>(yh, a, &[])?,
        eo_implied: dag.d_separated(yh, a, &[y])?,
        pp_implied: dag.d_separated(y, a, &[yh])?,
        calibration_possible: !dag.d_separated::<&str>(y, yh, &[])?,
        bias_possible: !dag.d_separated::<&str>(a, y, &[])?,
    })
}

/// One table of the scan grid: entry `i` has probability
/// `numerators[i] / resolution`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct GridTable {
    pub numerators: Vec<u64>,
    pub resolution: u64,
}

impl GridTable {
    /// Expands the grid point into a binary joint table over `(A, Y, Yhat)`.
    pub fn to_joint(&self) -> Result<JointTable> {
        let vars = vec![
            VariableSpec::binary("A"),
            VariableSpec::binary("Y"),
            VariableSpec::binary("Yhat"),
        ];
        let probs: Vec<f64> = self
            .numerators
            .iter()
            .map(|&k| k as f64 / self.resolution as f64)
            .collect();
        JointTable::new(vars, probs)
    }
}

/// Outcome of [`impossibility_scan`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpossibilityVerdict {
    pub grid_resolution: u64,
    /// Number of grid tables enumerated.
    pub tested: u64,
    /// Tables passing both preconditions at `tau`.
    pub precondition_passing: u64,
    /// Tables passing the preconditions, satisfying two or more metrics at
    /// `epsilon`, and not degenerate. The theorem predicts zero.
    pub multi_satisfying: u64,
    pub epsilon: f64,
    pub tau: f64,
    /// The offending tables, canonically sorted. Expected empty.
    pub witnesses: Vec<GridTable>,
    /// Tables satisfying two or more metrics only trivially: either a
    /// precondition fails, or the prediction is a deterministic copy (or
    /// deterministic inversion) of the true label, the degenerate case in
    /// which equalized odds and predictive parity coincide.
    pub trivial_witnesses: Vec<GridTable>,
}

impl ImpossibilityVerdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serialization cannot fail")
    }
}

#[derive(Default)]
struct ScanAccumulator {
    tested: u64,
    precondition_passing: u64,
    witnesses: Vec<GridTable>,
    trivial_witnesses: Vec<GridTable>,
}

impl ScanAccumulator {
    fn merge(mut self, other: ScanAccumulator) -> ScanAccumulator {
        self.tested += other.tested;
        self.precondition_passing += other.precondition_passing;
        self.witnesses.extend(other.witnesses);
        self.trivial_witnesses.extend(other.trivial_witnesses);
        self
    }
}

/// Brute-force check of the impossibility theorem on a probability grid.
///
/// Enumerates every binary joint table over `(A, Y, Yhat)` whose eight
/// entries are multiples of `1/resolution` summing to one. For each table
/// passing [`check_preconditions`] at `tau`, counts the metrics with gap at
/// most `epsilon`; tables with two or more satisfied metrics are recorded as
/// witnesses against the theorem unless they are degenerate (prediction
/// error mass within `epsilon` of zero or one), in which case they land in
/// `trivial_witnesses` together with the precondition failures.
///
/// Requires `resolution >= 10` and `epsilon < tau / 2`.
pub fn impossibility_scan(resolution: u64, epsilon: f64, tau: f64) -> Result<ImpossibilityVerdict> {
    if resolution < 10 {
        return Err(Error::InvalidQuery(
            "scan resolution must be at least 10".to_string(),
        ));
    }
    if epsilon <= 0.0 || epsilon.is_nan() || tau.is_nan() || epsilon >= tau / 2.0 {
        return Err(Error::InvalidQuery(
            "scan requires 0 < epsilon < tau / 2".to_string(),
        ));
    }

    let triple = FairnessTriple::standard();
    // Grid points are partitioned by their first entry; workers enumerate
    // the remaining seven-part compositions independently.
    let acc = (0..=resolution)
        .into_par_iter()
        .map(|first| {
            let mut acc = ScanAccumulator::default();
            let mut scratch = GridTable {
                numerators: vec![0u64; 8],
                resolution,
            };
            scratch.numerators[0] = first;
            let mut table = JointTable::new(
                vec![
                    VariableSpec::binary("A"),
                    VariableSpec::binary("Y"),
                    VariableSpec::binary("Yhat"),
                ],
                vec![0.125; 8],
            )
            .expect("scratch table is valid");
            let mut probs = [0.0f64; 8];
            compose_rest(resolution - first, 1, &mut scratch, &mut |grid| {
                for (p, &k) in probs.iter_mut().zip(&grid.numerators) {
                    *p = k as f64 / resolution as f64;
                }
                table.overwrite_probs(&probs);
                classify_grid_point(&table, grid, &triple, epsilon, tau, &mut acc)
                    .expect("grid tables are valid and roles are present");
            });
            acc
        })
        .reduce(ScanAccumulator::default, ScanAccumulator::merge);

    let mut witnesses = acc.witnesses;
    let mut trivial_witnesses = acc.trivial_witnesses;
    witnesses.sort();
    trivial_witnesses.sort();
    Ok(ImpossibilityVerdict {
        grid_resolution: resolution,
        tested: acc.tested,
        precondition_passing: acc.precondition_passing,
        multi_satisfying: witnesses.len() as u64,
        epsilon,
        tau,
        witnesses,
        trivial_witnesses,
    })
}

/// Enumerates the tail of an eight-part composition, invoking `f` once per
/// completed grid point.
fn compose_rest(left: u64, idx: usize, grid: &mut GridTable, f: &mut impl FnMut(&GridTable)) {
    if idx == 7 {
        grid.numerators[7] = left;
        f(grid);
        return;
    }
    for k in 0..=left {
        grid.numerators[idx] = k;
        compose_rest(left - k, idx + 1, grid, f);
    }
}

fn classify_grid_point(
    table: &JointTable,
    grid: &GridTable,
    triple: &FairnessTriple,
    epsilon: f64,
    tau: f64,
    acc: &mut ScanAccumulator,
) -> Result<()> {
    acc.tested += 1;
    let calibration = table.ci_gap::<&str>(&triple.truth, &triple.prediction, &[])?;
    let bias = table.ci_gap::<&str>(&triple.sensitive, &triple.truth, &[])?;
    let preconditions = calibration >= tau && bias >= tau;
    if preconditions {
        acc.precondition_passing += 1;
    }

    let dp = dp_gap(table, triple)?;
    let eo = eo_gap(table, triple)?;
    let pp = pp_gap(table, triple)?;
    let satisfied = u32::from(dp <= epsilon) + u32::from(eo <= epsilon) + u32::from(pp <= epsilon);
    if satisfied < 2 {
        return Ok(());
    }

    // Indices are (a, y, yhat) row-major; error mass is the probability that
    // the prediction disagrees with the label.
    let error_mass: f64 = grid
        .numerators
        .iter()
        .enumerate()
        .filter(|(i, _)| (i >> 1) & 1 != i & 1)
        .map(|(_, &k)| k as f64 / grid.resolution as f64)
        .sum();
    let degenerate = error_mass.min(1.0 - error_mass) <= epsilon;

    if preconditions && !degenerate {
        acc.witnesses.push(grid.clone());
    } else {
        acc.trivial_witnesses.push(grid.clone());
    }
    Ok(())
}

/// Group positive-predictive values for one prediction state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationAsymmetry {
    /// `P(truth = value | prediction = value, sensitive = 0)`.
    pub adv_ppv: f64,
    /// `P(truth = value | prediction = value, sensitive = 1)`.
    pub disadv_ppv: f64,
    /// True when the advantaged group's PPV strictly exceeds the
    /// disadvantaged group's.
    pub direction_holds: bool,
}

/// Compares group calibration for the given prediction state, with group 0
/// read as advantaged and group 1 as disadvantaged.
pub fn calibration_asymmetry(
    joint: &JointTable,
    triple: &FairnessTriple,
    value: usize,
) -> Result<CalibrationAsymmetry> {
    validate_triple(joint, triple)?;
    let ppv = |group: usize| -> Result<f64> {
        let conditioned = joint.condition(&[
            (triple.prediction.as_str(), value),
            (triple.sensitive.as_str(), group),
        ])?;
        let truth_marginal = conditioned.marginalize(&[triple.truth.as_str()])?;
        Ok(truth_marginal.probs()[value])
    };
    let adv_ppv = ppv(0)?;
    let disadv_ppv = ppv(1)?;
    Ok(CalibrationAsymmetry {
        adv_ppv,
        disadv_ppv,
        direction_holds: adv_ppv > disadv_ppv,
    })
}
