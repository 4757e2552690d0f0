//! Strata datasets: the exchange format between simulators, fitters, and
//! explainers.
//!
//! A dataset is a flat list of step records grouped into strata. Each stratum
//! is one decision point: exactly one observed (case) step plus at least one
//! sampled control step. All numeric covariates live in a fixed-width vector
//! per record; identities and movement variables are optional fields.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset is already centered; centering twice would corrupt the stored offsets")]
    AlreadyCentered,
    #[error("dataset has no stored centering offsets to invert")]
    NotCentered,
    #[error("dataset is invalid: {0}")]
    Invalid(String),
    #[error("CSV parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One candidate step (observed or control) within a stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub stratum_id: u64,
    pub is_case: bool,
    pub covariates: Vec<f64>,
    pub individual_id: Option<usize>,
    pub opponent_id: Option<usize>,
    pub step_length: Option<f64>,
    pub turning_angle: Option<f64>,
}

impl StepRecord {
    pub fn new(stratum_id: u64, is_case: bool, covariates: Vec<f64>) -> Self {
        StepRecord {
            stratum_id,
            is_case,
            covariates,
            individual_id: None,
            opponent_id: None,
            step_length: None,
            turning_angle: None,
        }
    }
}

/// Grouped case/control step records with shared feature naming.
#[derive(Debug, Clone, PartialEq)]
pub struct StrataDataset {
    pub records: Vec<StepRecord>,
    pub feature_names: Vec<String>,
    pub n_individuals: usize,
    pub n_opponents: usize,
    pub centered: bool,
    /// Per-column offsets subtracted by `center_covariates`, kept so the
    /// original scale can be restored.
    pub center_offsets: Option<Vec<f64>>,
    /// Per-column divisors applied by `standardize_covariates`, if any.
    pub scale_factors: Option<Vec<f64>>,
}

impl StrataDataset {
    pub fn new(records: Vec<StepRecord>, feature_names: Vec<String>) -> Self {
        let n_individuals = records
            .iter()
            .filter_map(|r| r.individual_id)
            .max()
            .map_or(0, |m| m + 1);
        let n_opponents = records
            .iter()
            .filter_map(|r| r.opponent_id)
            .max()
            .map_or(0, |m| m + 1);
        StrataDataset {
            records,
            feature_names,
            n_individuals,
            n_opponents,
            centered: false,
            center_offsets: None,
            scale_factors: None,
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_strata(&self) -> usize {
        strata_indices(self).len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Copy of one covariate column across all records.
    pub fn column(&self, feature: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.covariates[feature]).collect()
    }

    /// Standard deviation (n-1) of one covariate column.
    pub fn feature_sd(&self, feature: usize) -> f64 {
        crate::stats::sample_sd(&self.column(feature))
    }
}

/// Outcome of `validate_dataset`: every broken rule, nothing thrown.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub stratum_id: u64,
    pub rule: &'static str,
    pub message: String,
}

pub const RULE_STRATUM_SIZE: &str = "stratum_size";
pub const RULE_SINGLE_CASE: &str = "single_case";
pub const RULE_COVARIATE_LENGTH: &str = "covariate_length";
pub const RULE_NONFINITE_COVARIATE: &str = "nonfinite_covariate";
pub const RULE_NEGATIVE_STEP_LENGTH: &str = "negative_step_length";
pub const RULE_TURNING_ANGLE_RANGE: &str = "turning_angle_range";

/// Checks every dataset invariant and reports all violations.
pub fn validate_dataset(d: &StrataDataset) -> ValidationReport {
    let mut violations = Vec::new();
    let n_features = d.n_features();

    let mut by_stratum: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    for (idx, rec) in d.records.iter().enumerate() {
        let entry = by_stratum.entry(rec.stratum_id).or_insert((0, 0));
        entry.0 += 1;
        if rec.is_case {
            entry.1 += 1;
        }
        if rec.covariates.len() != n_features {
            violations.push(Violation {
                stratum_id: rec.stratum_id,
                rule: RULE_COVARIATE_LENGTH,
                message: format!(
                    "record {idx} has {} covariates, expected {n_features}",
                    rec.covariates.len()
                ),
            });
        }
        if let Some(j) = rec.covariates.iter().position(|v| !v.is_finite()) {
            violations.push(Violation {
                stratum_id: rec.stratum_id,
                rule: RULE_NONFINITE_COVARIATE,
                message: format!("record {idx} covariate {j} is not finite"),
            });
        }
        if let Some(sl) = rec.step_length {
            if !(sl >= 0.0) || !sl.is_finite() {
                violations.push(Violation {
                    stratum_id: rec.stratum_id,
                    rule: RULE_NEGATIVE_STEP_LENGTH,
                    message: format!("record {idx} step_length {sl} is not a nonnegative finite value"),
                });
            }
        }
        if let Some(ta) = rec.turning_angle {
            if !(ta > -std::f64::consts::PI && ta <= std::f64::consts::PI) {
                violations.push(Violation {
                    stratum_id: rec.stratum_id,
                    rule: RULE_TURNING_ANGLE_RANGE,
                    message: format!("record {idx} turning_angle {ta} outside (-pi, pi]"),
                });
            }
        }
    }

    for (&sid, &(count, cases)) in &by_stratum {
        if count < 2 {
            violations.push(Violation {
                stratum_id: sid,
                rule: RULE_STRATUM_SIZE,
                message: format!("stratum {sid} has {count} record(s); needs a case and at least one control"),
            });
        }
        if cases != 1 {
            violations.push(Violation {
                stratum_id: sid,
                rule: RULE_SINGLE_CASE,
                message: format!("stratum {sid} has {cases} case records; exactly one required"),
            });
        }
    }

    ValidationReport { ok: violations.is_empty(), violations }
}

/// Record indices grouped by stratum in first-appearance order.
pub fn strata_indices(d: &StrataDataset) -> Vec<Vec<usize>> {
    let mut order: Vec<u64> = Vec::new();
    let mut map: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (idx, rec) in d.records.iter().enumerate() {
        let entry = map.entry(rec.stratum_id).or_insert_with(|| {
            order.push(rec.stratum_id);
            Vec::new()
        });
        entry.push(idx);
    }
    order.into_iter().map(|sid| map.remove(&sid).unwrap()).collect()
}

/// One stratum resolved to record indices plus the position of its case.
#[derive(Debug, Clone)]
pub struct StratumView {
    pub record_idxs: Vec<usize>,
    /// Position of the case within `record_idxs`.
    pub case_pos: usize,
}

/// Groups a dataset into per-stratum views; fails on malformed strata.
pub fn strata_views(d: &StrataDataset) -> Result<Vec<StratumView>, DataError> {
    strata_indices(d)
        .into_iter()
        .map(|idxs| {
            let cases: Vec<usize> = idxs
                .iter()
                .enumerate()
                .filter(|(_, &ri)| d.records[ri].is_case)
                .map(|(pos, _)| pos)
                .collect();
            if idxs.len() < 2 || cases.len() != 1 {
                let sid = d.records[idxs[0]].stratum_id;
                return Err(DataError::Invalid(format!(
                    "stratum {sid} is malformed ({} records, {} cases)",
                    idxs.len(),
                    cases.len()
                )));
            }
            Ok(StratumView { record_idxs: idxs, case_pos: cases[0] })
        })
        .collect()
}

/// Subtracts the pooled per-column mean from every covariate.
///
/// Centering is computed over all records, cases and controls together.
/// Offsets are stored on the result so the transform can be inverted.
pub fn center_covariates(d: &StrataDataset) -> Result<StrataDataset, DataError> {
    center_impl(d, false)
}

/// Centers and additionally divides each column by its standard deviation.
/// Columns with zero spread are left unscaled.
pub fn standardize_covariates(d: &StrataDataset) -> Result<StrataDataset, DataError> {
    center_impl(d, true)
}

fn center_impl(d: &StrataDataset, scale: bool) -> Result<StrataDataset, DataError> {
    if d.centered {
        return Err(DataError::AlreadyCentered);
    }
    let n_features = d.n_features();
    let n = d.records.len();
    let mut sums = vec![0.0; n_features];
    for rec in &d.records {
        for (j, v) in rec.covariates.iter().enumerate() {
            sums[j] += v;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();

    let factors: Option<Vec<f64>> = if scale {
        let mut sq = vec![0.0; n_features];
        for rec in &d.records {
            for (j, v) in rec.covariates.iter().enumerate() {
                let c = v - means[j];
                sq[j] += c * c;
            }
        }
        Some(
            sq.iter()
                .map(|s| {
                    let sd = (s / (n as f64 - 1.0)).sqrt();
                    if sd > 0.0 { sd } else { 1.0 }
                })
                .collect(),
        )
    } else {
        None
    };

    let mut out = d.clone();
    for rec in &mut out.records {
        for (j, v) in rec.covariates.iter_mut().enumerate() {
            *v -= means[j];
            if let Some(f) = &factors {
                *v /= f[j];
            }
        }
    }
    out.centered = true;
    out.center_offsets = Some(means);
    out.scale_factors = factors;
    Ok(out)
}

/// Restores the original covariate scale using the stored offsets.
pub fn invert_centering(d: &StrataDataset) -> Result<StrataDataset, DataError> {
    let offsets = d.center_offsets.as_ref().ok_or(DataError::NotCentered)?;
    let mut out = d.clone();
    for rec in &mut out.records {
        for (j, v) in rec.covariates.iter_mut().enumerate() {
            if let Some(f) = &d.scale_factors {
                *v *= f[j];
            }
            *v += offsets[j];
        }
    }
    out.centered = false;
    out.center_offsets = None;
    out.scale_factors = None;
    Ok(out)
}

// --- CSV interchange -------------------------------------------------------
//
// Header: stratum_id,case,id,opp_id,sl_,ta_,<feature names...>
// `case` is 0/1, empty cells are absent optionals, LF line endings.

const FIXED_COLUMNS: [&str; 6] = ["stratum_id", "case", "id", "opp_id", "sl_", "ta_"];

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Serializes the dataset to its CSV interchange form.
pub fn to_csv(d: &StrataDataset) -> String {
    let mut out = String::new();
    out.push_str(&FIXED_COLUMNS.join(","));
    for name in &d.feature_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for rec in &d.records {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            rec.stratum_id,
            if rec.is_case { 1 } else { 0 },
            fmt_opt_usize(rec.individual_id),
            fmt_opt_usize(rec.opponent_id),
            fmt_opt_f64(rec.step_length),
            fmt_opt_f64(rec.turning_angle),
        );
        for v in &rec.covariates {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(d: &StrataDataset, path: &Path) -> Result<(), DataError> {
    std::fs::write(path, to_csv(d))?;
    Ok(())
}

/// Parses the CSV interchange form.
///
/// The `centered` flag is not part of the wire format; it is re-detected by
/// checking that every column mean is within 1e-8 of zero.
pub fn from_csv(text: &str) -> Result<StrataDataset, DataError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(DataError::Csv { line: 1, message: "empty input".into() })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < FIXED_COLUMNS.len() {
        return Err(DataError::Csv { line: 1, message: format!("header has {} columns, expected at least {}", cols.len(), FIXED_COLUMNS.len()) });
    }
    for (i, expected) in FIXED_COLUMNS.iter().enumerate() {
        if cols[i] != *expected {
            return Err(DataError::Csv { line: 1, message: format!("header column {} is '{}', expected '{}'", i + 1, cols[i], expected) });
        }
    }
    let feature_names: Vec<String> = cols[FIXED_COLUMNS.len()..].iter().map(|s| s.to_string()).collect();
    let n_features = feature_names.len();

    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != FIXED_COLUMNS.len() + n_features {
            return Err(DataError::Csv { line: lineno, message: format!("row has {} fields, expected {}", fields.len(), FIXED_COLUMNS.len() + n_features) });
        }
        let parse_f64 = |s: &str, what: &str| -> Result<f64, DataError> {
            s.parse::<f64>().map_err(|_| DataError::Csv { line: lineno, message: format!("cannot parse {what} '{s}'") })
        };
        let parse_opt_f64 = |s: &str, what: &str| -> Result<Option<f64>, DataError> {
            if s.is_empty() { Ok(None) } else { parse_f64(s, what).map(Some) }
        };
        let parse_opt_usize = |s: &str, what: &str| -> Result<Option<usize>, DataError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<usize>().map(Some).map_err(|_| DataError::Csv { line: lineno, message: format!("cannot parse {what} '{s}'") })
            }
        };
        let stratum_id = fields[0].parse::<u64>().map_err(|_| DataError::Csv { line: lineno, message: format!("cannot parse stratum_id '{}'", fields[0]) })?;
        let is_case = match fields[1] {
            "0" => false,
            "1" => true,
            other => return Err(DataError::Csv { line: lineno, message: format!("case must be 0 or 1, got '{other}'") }),
        };
        let individual_id = parse_opt_usize(fields[2], "id")?;
        let opponent_id = parse_opt_usize(fields[3], "opp_id")?;
        let step_length = parse_opt_f64(fields[4], "sl_")?;
        let turning_angle = parse_opt_f64(fields[5], "ta_")?;
        let mut covariates = Vec::with_capacity(n_features);
        for (j, f) in fields[FIXED_COLUMNS.len()..].iter().enumerate() {
            covariates.push(parse_f64(f, &format!("covariate {}", feature_names[j]))?);
        }
        records.push(StepRecord {
            stratum_id,
            is_case,
            covariates,
            individual_id,
            opponent_id,
            step_length,
            turning_angle,
        });
    }

    let mut d = StrataDataset::new(records, feature_names);
    if !d.records.is_empty() && d.n_features() > 0 {
        let n = d.records.len() as f64;
        let centered = (0..d.n_features()).all(|j| {
            let mean: f64 = d.records.iter().map(|r| r.covariates[j]).sum::<f64>() / n;
            mean.abs() < 1e-8
        });
        d.centered = centered;
    }
    Ok(d)
}

pub fn read_csv(path: &Path) -> Result<StrataDataset, DataError> {
    let text = std::fs::read_to_string(path)?;
    from_csv(&text)
}
