//! Accelerometry, covariate, and mortality ingestion.
//!
//! The preprocessing chain for minute-level data is: recode non-wear minutes
//! to zero, sum into 5-minute bins, drop day curves with any missing bin,
//! then summarize each subject by the rounded median across days at each
//! time point. Survey weights are rescaled to mean one.
//!
//! CSV schemas (headers are exact):
//! - `accel.csv`:  subject_id,day,min_0,...,min_1439 (cells may be empty =
//!   missing); a parallel wear file of identical shape holds 0/1 flags.
//! - `accel5.csv`: subject_id,bin_0,...,bin_{T-1} (one row per subject).
//! - `covariates.csv`: see [`SubjectCovariates::CSV_COLUMNS`].
//! - `mortality.csv`: subject_id,mortstat with mortstat in {0,1}.

use crate::error::{Error, Result};
use crate::quad::five_min_grid;
use ndarray::Array2;
use std::collections::{HashMap, HashSet};
use std::path::Path;

pub const MINUTES_PER_DAY: usize = 1440;
pub const BINS_PER_DAY: usize = 288;

/// One subject-day of minute-level accelerometry.
#[derive(Debug, Clone)]
pub struct MinuteRecord {
    pub subject_id: String,
    pub day_index: usize,
    pub counts: Vec<u64>,
    pub wear_flags: Vec<bool>,
}

impl MinuteRecord {
    pub fn new(
        subject_id: String,
        day_index: usize,
        counts: Vec<u64>,
        wear_flags: Vec<bool>,
    ) -> Result<Self> {
        if counts.len() != MINUTES_PER_DAY || wear_flags.len() != MINUTES_PER_DAY {
            return Err(Error::invalid(format!(
                "minute record for subject {subject_id} day {day_index} must have {MINUTES_PER_DAY} entries, got {} counts and {} flags",
                counts.len(),
                wear_flags.len()
            )));
        }
        if day_index < 1 {
            return Err(Error::invalid("day_index must be >= 1"));
        }
        Ok(Self {
            subject_id,
            day_index,
            counts,
            wear_flags,
        })
    }
}

/// Curves of nonnegative counts on a shared time grid, one row per subject.
#[derive(Debug, Clone)]
pub struct CountCurveSet {
    pub subject_ids: Vec<String>,
    pub grid: Vec<f64>,
    pub counts: Array2<u64>,
}

impl CountCurveSet {
    pub fn new(subject_ids: Vec<String>, grid: Vec<f64>, counts: Array2<u64>) -> Result<Self> {
        if counts.nrows() != subject_ids.len() {
            return Err(Error::dim(format!(
                "{} subject ids but {} count rows",
                subject_ids.len(),
                counts.nrows()
            )));
        }
        if counts.ncols() != grid.len() {
            return Err(Error::dim(format!(
                "grid has {} points but counts have {} columns",
                grid.len(),
                counts.ncols()
            )));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        let mut seen = HashSet::new();
        for id in &subject_ids {
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateSubject(id.clone()));
            }
        }
        Ok(Self {
            subject_ids,
            grid,
            counts,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.counts.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.counts.ncols()
    }
}

macro_rules! categorical {
    ($name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const LEVELS: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }

            pub fn parse(value: &str, variable: &str) -> Result<Self> {
                match value.trim() {
                    $($label => Ok($name::$variant),)+
                    other => Err(Error::UnknownLevel {
                        variable: variable.to_string(),
                        value: other.to_string(),
                    }),
                }
            }
        }
    };
}

categorical!(Race { White => "White", Black => "Black", Hispanic => "Hispanic", Other => "Other" });
categorical!(Gender { Male => "Male", Female => "Female" });
categorical!(Education {
    LessThanHighSchool => "Less than High School",
    HighSchool => "High School",
    CollegeAndAbove => "College and Above",
});
categorical!(Smoking { Never => "Never", Former => "Former", Current => "Current" });
categorical!(YesNo { No => "No", Yes => "Yes" });

/// Per-subject covariates, survey weight, and mortality outcome.
#[derive(Debug, Clone)]
pub struct SubjectCovariates {
    pub subject_id: String,
    pub age: f64,
    pub bmi: f64,
    pub drinks_per_week: f64,
    pub hdl_cholesterol: f64,
    pub total_cholesterol: f64,
    pub systolic_bp: f64,
    pub n_weekdays: f64,
    pub n_weekend_days: f64,
    pub race: Race,
    pub gender: Gender,
    pub education: Education,
    pub smoking: Smoking,
    pub diabetes: YesNo,
    pub chf: YesNo,
    pub chd: YesNo,
    pub cancer: YesNo,
    pub stroke: YesNo,
    pub raw_survey_weight: f64,
    pub mortality: u8,
}

impl SubjectCovariates {
    pub const CSV_COLUMNS: &'static [&'static str] = &[
        "subject_id",
        "age",
        "bmi",
        "drinks_per_week",
        "hdl_cholesterol",
        "total_cholesterol",
        "systolic_bp",
        "n_weekdays",
        "n_weekend_days",
        "race",
        "gender",
        "education",
        "smoking",
        "diabetes",
        "chf",
        "chd",
        "cancer",
        "stroke",
        "survey_weight",
    ];
}

/// Set counts to zero wherever the device was not worn.
pub fn recode_nonwear(rec: &MinuteRecord) -> Result<MinuteRecord> {
    if rec.counts.len() != rec.wear_flags.len() {
        return Err(Error::invalid("counts and wear flags differ in length"));
    }
    let counts = rec
        .counts
        .iter()
        .zip(rec.wear_flags.iter())
        .map(|(&c, &worn)| if worn { c } else { 0 })
        .collect();
    Ok(MinuteRecord {
        subject_id: rec.subject_id.clone(),
        day_index: rec.day_index,
        counts,
        wear_flags: rec.wear_flags.clone(),
    })
}

/// Sum 1440 minute counts into 288 five-minute bins.
pub fn bin_five_minutes(counts: &[u64]) -> Result<Vec<u64>> {
    if counts.len() != MINUTES_PER_DAY {
        return Err(Error::invalid(format!(
            "expected {MINUTES_PER_DAY} minute counts, got {}",
            counts.len()
        )));
    }
    Ok(counts.chunks(5).map(|c| c.iter().sum()).collect())
}

/// Pointwise rounded median across days. Halves round away from zero.
pub fn median_day(days: &[Vec<u64>]) -> Result<Vec<u64>> {
    if days.is_empty() {
        return Err(Error::invalid("median_day needs at least one day"));
    }
    let t = days[0].len();
    if days.iter().any(|d| d.len() != t) {
        return Err(Error::invalid("day vectors differ in length"));
    }
    let mut out = Vec::with_capacity(t);
    let mut column = Vec::with_capacity(days.len());
    for j in 0..t {
        column.clear();
        column.extend(days.iter().map(|d| d[j]));
        column.sort_unstable();
        let n = column.len();
        let med = if n % 2 == 1 {
            column[n / 2] as f64
        } else {
            (column[n / 2 - 1] as f64 + column[n / 2] as f64) / 2.0
        };
        // Counts are nonnegative, so away-from-zero is plain rounding up at .5.
        out.push((med + 0.5).floor() as u64);
    }
    Ok(out)
}

/// Rescale positive weights to mean one.
pub fn adjust_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::invalid("weight vector is empty"));
    }
    if raw.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::invalid("survey weights must be positive and finite"));
    }
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    Ok(raw.iter().map(|&w| w / mean).collect())
}

/// Where the accelerometry lives on disk.
#[derive(Debug, Clone)]
pub enum AccelSource<'a> {
    /// Pre-binned file: subject_id,bin_0,...,bin_{T-1}.
    FiveMin(&'a Path),
    /// Minute-level counts plus a parallel wear-flag file.
    Minute { accel: &'a Path, wear: &'a Path },
}

/// Load and preprocess the three input files. Only subjects present in all
/// sources with complete covariates and mortality are retained; count rows
/// follow the accelerometry file's subject order.
pub fn load_dataset(
    accel: AccelSource<'_>,
    covariate_path: &Path,
    mortality_path: &Path,
) -> Result<(CountCurveSet, Vec<SubjectCovariates>)> {
    let curves = match accel {
        AccelSource::FiveMin(path) => load_accel5(path)?,
        AccelSource::Minute { accel, wear } => load_minute_level(accel, wear)?,
    };
    let covariates = load_covariates(covariate_path)?;
    let mortality = load_mortality(mortality_path)?;

    let mut retained_ids = Vec::new();
    let mut retained_rows = Vec::new();
    let mut retained_covs = Vec::new();
    for (row, id) in curves.0.iter().enumerate() {
        let (Some(cov), Some(&mort)) = (covariates.get(id), mortality.get(id)) else {
            continue;
        };
        let mut cov = cov.clone();
        cov.mortality = mort;
        retained_ids.push(id.clone());
        retained_rows.push(row);
        retained_covs.push(cov);
    }
    if retained_ids.is_empty() {
        return Err(Error::invalid(
            "no subjects present in all of accelerometry, covariates, and mortality",
        ));
    }
    let t = curves.2;
    let mut counts = Array2::zeros((retained_ids.len(), t));
    for (out_row, &src_row) in retained_rows.iter().enumerate() {
        for j in 0..t {
            counts[[out_row, j]] = curves.1[src_row][j];
        }
    }
    let set = CountCurveSet::new(retained_ids, five_min_grid(t), counts)?;
    Ok((set, retained_covs))
}

fn csv_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e.to_string()))
}

/// Returns (subject order, per-subject binned curves, T).
fn load_accel5(path: &Path) -> Result<(Vec<String>, Vec<Vec<u64>>, usize)> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_err(path, e.to_string()))?.clone();
    if headers.len() < 2 || &headers[0] != "subject_id" {
        return Err(csv_err(path, "expected header subject_id,bin_0,..."));
    }
    let t = headers.len() - 1;
    for (j, name) in headers.iter().skip(1).enumerate() {
        if name != format!("bin_{j}") {
            return Err(csv_err(path, format!("expected column bin_{j}, found {name}")));
        }
    }
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<u64>> = Vec::new();
    let mut seen = HashSet::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e.to_string()))?;
        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateSubject(id));
        }
        let mut row = Vec::with_capacity(t);
        let mut complete = true;
        for j in 0..t {
            let cell = record[j + 1].trim();
            if cell.is_empty() {
                complete = false;
                break;
            }
            let v: u64 = cell
                .parse()
                .map_err(|_| csv_err(path, format!("row {}: bad count '{cell}'", line + 2)))?;
            row.push(v);
        }
        // A curve with any missing bin is dropped.
        if complete {
            ids.push(id);
            rows.push(row);
        }
    }
    Ok((ids, rows, t))
}

fn load_minute_level(accel_path: &Path, wear_path: &Path) -> Result<(Vec<String>, Vec<Vec<u64>>, usize)> {
    let accel_days = read_minute_file(accel_path)?;
    let wear_days = read_minute_file(wear_path)?;
    let wear_index: HashMap<(String, usize), Vec<Option<u64>>> = wear_days
        .into_iter()
        .map(|(id, day, cells)| ((id, day), cells))
        .collect();

    // Per subject, in file order: binned complete days.
    let mut order: Vec<String> = Vec::new();
    let mut day_curves: HashMap<String, Vec<Vec<u64>>> = HashMap::new();
    for (id, day, counts) in accel_days {
        let wear = wear_index
            .get(&(id.clone(), day))
            .ok_or_else(|| csv_err(wear_path, format!("no wear row for subject {id} day {day}")))?;
        // Non-wear minutes are recoded to zero before missingness is judged,
        // so a missing count on a non-worn minute does not poison its bin.
        let mut bins: Vec<Option<u64>> = vec![Some(0); BINS_PER_DAY];
        for m in 0..MINUTES_PER_DAY {
            let worn = match wear[m] {
                Some(v) => v != 0,
                None => false,
            };
            let value = if worn { counts[m] } else { Some(0) };
            let bin = &mut bins[m / 5];
            *bin = match (*bin, value) {
                (Some(acc), Some(v)) => Some(acc + v),
                _ => None,
            };
        }
        if bins.iter().all(|b| b.is_some()) {
            let complete: Vec<u64> = bins.into_iter().map(|b| b.unwrap()).collect();
            if !day_curves.contains_key(&id) {
                order.push(id.clone());
            }
            day_curves.entry(id).or_default().push(complete);
        }
    }

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for id in order {
        let days = &day_curves[&id];
        rows.push(median_day(days)?);
        ids.push(id);
    }
    Ok((ids, rows, BINS_PER_DAY))
}

/// Read accel.csv or wear.csv: subject_id,day,min_0..min_1439 with blank
/// cells treated as missing.
fn read_minute_file(path: &Path) -> Result<Vec<(String, usize, Vec<Option<u64>>)>> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_err(path, e.to_string()))?.clone();
    if headers.len() != MINUTES_PER_DAY + 2 || &headers[0] != "subject_id" || &headers[1] != "day" {
        return Err(csv_err(
            path,
            format!("expected header subject_id,day,min_0,...,min_1439 ({} columns)", MINUTES_PER_DAY + 2),
        ));
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e.to_string()))?;
        let id = record[0].to_string();
        let day: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| csv_err(path, format!("row {}: bad day index", line + 2)))?;
        if day < 1 {
            return Err(csv_err(path, format!("row {}: day index must be >= 1", line + 2)));
        }
        if !seen.insert((id.clone(), day)) {
            return Err(csv_err(path, format!("duplicate subject-day ({id}, {day})")));
        }
        let mut cells = Vec::with_capacity(MINUTES_PER_DAY);
        for m in 0..MINUTES_PER_DAY {
            let cell = record[m + 2].trim();
            if cell.is_empty() {
                cells.push(None);
            } else {
                let v: u64 = cell.parse().map_err(|_| {
                    csv_err(path, format!("row {}: bad value '{cell}' at min_{m}", line + 2))
                })?;
                cells.push(Some(v));
            }
        }
        out.push((id, day, cells));
    }
    Ok(out)
}

/// Subjects with any missing cell are dropped (complete-case rule).
fn load_covariates(path: &Path) -> Result<HashMap<String, SubjectCovariates>> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_err(path, e.to_string()))?.clone();
    let mut col: HashMap<&str, usize> = HashMap::new();
    for (i, name) in headers.iter().enumerate() {
        col.insert(name, i);
    }
    for required in SubjectCovariates::CSV_COLUMNS {
        if !col.contains_key(required) {
            return Err(csv_err(path, format!("missing column '{required}'")));
        }
    }
    let idx = |name: &str| col[name];

    let mut out = HashMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e.to_string()))?;
        let cell = |name: &str| record[idx(name)].trim().to_string();
        let id = cell("subject_id");
        if id.is_empty() {
            return Err(csv_err(path, format!("row {}: empty subject_id", line + 2)));
        }
        if out.contains_key(&id) {
            return Err(Error::DuplicateSubject(id));
        }
        if SubjectCovariates::CSV_COLUMNS.iter().any(|c| cell(c).is_empty()) {
            continue; // complete-case: drop subjects with any missing value
        }
        let numeric = |name: &str| -> Result<f64> {
            cell(name)
                .parse()
                .map_err(|_| csv_err(path, format!("row {}: bad numeric '{}' in {name}", line + 2, cell(name))))
        };
        let weight = numeric("survey_weight")?;
        if !(weight > 0.0) {
            return Err(Error::invalid(format!(
                "subject {id}: survey weight must be positive, got {weight}"
            )));
        }
        let cov = SubjectCovariates {
            subject_id: id.clone(),
            age: numeric("age")?,
            bmi: numeric("bmi")?,
            drinks_per_week: numeric("drinks_per_week")?,
            hdl_cholesterol: numeric("hdl_cholesterol")?,
            total_cholesterol: numeric("total_cholesterol")?,
            systolic_bp: numeric("systolic_bp")?,
            n_weekdays: numeric("n_weekdays")?,
            n_weekend_days: numeric("n_weekend_days")?,
            race: Race::parse(&cell("race"), "race")?,
            gender: Gender::parse(&cell("gender"), "gender")?,
            education: Education::parse(&cell("education"), "education")?,
            smoking: Smoking::parse(&cell("smoking"), "smoking")?,
            diabetes: YesNo::parse(&cell("diabetes"), "diabetes")?,
            chf: YesNo::parse(&cell("chf"), "chf")?,
            chd: YesNo::parse(&cell("chd"), "chd")?,
            cancer: YesNo::parse(&cell("cancer"), "cancer")?,
            stroke: YesNo::parse(&cell("stroke"), "stroke")?,
            raw_survey_weight: weight,
            mortality: 0, // filled in from the mortality file
        };
        out.insert(id, cov);
    }
    Ok(out)
}

fn load_mortality(path: &Path) -> Result<HashMap<String, u8>> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_err(path, e.to_string()))?.clone();
    if headers.len() < 2 || &headers[0] != "subject_id" || &headers[1] != "mortstat" {
        return Err(csv_err(path, "expected header subject_id,mortstat"));
    }
    let mut out = HashMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e.to_string()))?;
        let id = record[0].trim().to_string();
        let cell = record[1].trim();
        if cell.is_empty() {
            continue; // missing outcome: subject excluded
        }
        let mort: u8 = match cell {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(csv_err(path, format!("row {}: mortstat must be 0 or 1, got '{other}'", line + 2)))
            }
        };
        if out.insert(id.clone(), mort).is_some() {
            return Err(Error::DuplicateSubject(id));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn minute_record(counts: Vec<u64>, flags: Vec<bool>) -> MinuteRecord {
        let mut c = counts;
        let mut f = flags;
        c.resize(MINUTES_PER_DAY, 0);
        f.resize(MINUTES_PER_DAY, true);
        MinuteRecord::new("s1".into(), 1, c, f).unwrap()
    }

    #[test]
    fn recode_keeps_worn_minutes() {
        let rec = minute_record(vec![5, 0, 7], vec![true, true, true]);
        let out = recode_nonwear(&rec).unwrap();
        assert_eq!(&out.counts[..3], &[5, 0, 7]);
    }

    #[test]
    fn recode_zeroes_nonwear() {
        let rec = minute_record(vec![5, 0, 7], vec![false, true, true]);
        let out = recode_nonwear(&rec).unwrap();
        assert_eq!(&out.counts[..3], &[0, 0, 7]);
    }

    #[test]
    fn recode_all_nonwear_gives_zeros() {
        let rec = minute_record(vec![9; 10], vec![false; MINUTES_PER_DAY]);
        let out = recode_nonwear(&rec).unwrap();
        assert!(out.counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn recode_is_idempotent() {
        let rec = minute_record(vec![3, 1, 4, 1, 5, 9, 2, 6], vec![false, true, false, true]);
        let once = recode_nonwear(&rec).unwrap();
        let twice = recode_nonwear(&once).unwrap();
        assert_eq!(once.counts, twice.counts);
    }

    #[test]
    fn binning_sums_and_preserves_total() {
        let mut counts = vec![0u64; MINUTES_PER_DAY];
        counts[..5].copy_from_slice(&[1, 2, 3, 4, 5]);
        let bins = bin_five_minutes(&counts).unwrap();
        assert_eq!(bins.len(), BINS_PER_DAY);
        assert_eq!(bins[0], 15);
        assert!(bins[1..].iter().all(|&b| b == 0));
        assert_eq!(bins.iter().sum::<u64>(), counts.iter().sum::<u64>());

        let ones = vec![1u64; MINUTES_PER_DAY];
        let bins = bin_five_minutes(&ones).unwrap();
        assert!(bins.iter().all(|&b| b == 5));
    }

    #[test]
    fn binning_rejects_wrong_length() {
        assert!(bin_five_minutes(&[1, 2, 3]).is_err());
    }

    #[test]
    fn median_of_single_day_is_identity() {
        let day = vec![vec![4u64; BINS_PER_DAY]];
        assert_eq!(median_day(&day).unwrap(), day[0]);
    }

    #[test]
    fn median_rounds_half_away_from_zero() {
        // odd count: {0,3,4} -> 3; even count: {1,2} -> 1.5 -> 2
        let days = vec![vec![0u64, 1], vec![3, 2], vec![4, 1]];
        assert_eq!(median_day(&days).unwrap(), vec![3, 1]);
        let days = vec![vec![1u64], vec![2]];
        assert_eq!(median_day(&days).unwrap(), vec![2]);
    }

    #[test]
    fn median_is_permutation_invariant() {
        let days = vec![vec![5u64, 0, 2], vec![1, 7, 2], vec![3, 3, 9], vec![8, 1, 0]];
        let base = median_day(&days).unwrap();
        let perm = vec![days[2].clone(), days[0].clone(), days[3].clone(), days[1].clone()];
        assert_eq!(median_day(&perm).unwrap(), base);
    }

    #[test]
    fn median_rejects_empty() {
        assert!(median_day(&[]).is_err());
    }

    #[test]
    fn weights_normalize_to_mean_one() {
        assert_eq!(adjust_weights(&[2.0, 2.0, 2.0]).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(adjust_weights(&[1.0, 3.0]).unwrap(), vec![0.5, 1.5]);
        let out = adjust_weights(&[1.0, 2.0, 3.0, 6.0]).unwrap();
        let expect = [1.0 / 3.0, 2.0 / 3.0, 1.0, 2.0];
        for (a, b) in out.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weights_preserve_ratios() {
        let raw = [0.3, 1.9, 4.4, 0.7];
        let out = adjust_weights(&raw).unwrap();
        for i in 1..raw.len() {
            assert!((out[i] / out[0] - raw[i] / raw[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_reject_nonpositive() {
        assert!(adjust_weights(&[1.0, 0.0]).is_err());
        assert!(adjust_weights(&[1.0, -2.0]).is_err());
        assert!(adjust_weights(&[]).is_err());
    }

    fn write_file(dir: &std::path::Path, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    fn accel5_csv(rows: &[(&str, [&str; 3])]) -> String {
        let mut s = "subject_id,bin_0,bin_1,bin_2\n".to_string();
        for (id, bins) in rows {
            s.push_str(&format!("{id},{},{},{}\n", bins[0], bins[1], bins[2]));
        }
        s
    }

    fn cov_row(id: &str, bmi: &str) -> String {
        format!("{id},60,{bmi},2,55,200,130,5,2,White,Male,High School,Never,No,No,No,No,No,1.5\n")
    }

    fn cov_csv(rows: &[String]) -> String {
        let mut s = SubjectCovariates::CSV_COLUMNS.join(",");
        s.push('\n');
        for r in rows {
            s.push_str(r);
        }
        s
    }

    #[test]
    fn load_dataset_applies_complete_case_rule() {
        let dir = std::env::temp_dir().join(format!("funcount_ingest_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let accel = write_file(
            &dir,
            "accel5.csv",
            &accel5_csv(&[("a", ["1", "2", "3"]), ("b", ["0", "0", "0"]), ("c", ["4", "4", "4"])]),
        );
        // subject b is missing BMI -> dropped
        let cov = write_file(
            &dir,
            "covariates.csv",
            &cov_csv(&[cov_row("a", "28"), cov_row("b", ""), cov_row("c", "31")]),
        );
        let mort = write_file(&dir, "mortality.csv", "subject_id,mortstat\na,0\nb,1\nc,1\n");
        let (set, covs) = load_dataset(AccelSource::FiveMin(&accel), &cov, &mort).unwrap();
        assert_eq!(set.subject_ids, vec!["a", "c"]);
        assert_eq!(covs.len(), 2);
        assert_eq!(covs[1].mortality, 1);

        // mortality file lacking a subject also drops it
        let mort2 = write_file(&dir, "mortality2.csv", "subject_id,mortstat\na,0\nb,1\n");
        let cov2 = write_file(
            &dir,
            "covariates2.csv",
            &cov_csv(&[cov_row("a", "28"), cov_row("b", "30"), cov_row("c", "31")]),
        );
        let (set, _) = load_dataset(AccelSource::FiveMin(&accel), &cov2, &mort2).unwrap();
        assert_eq!(set.subject_ids, vec!["a", "b"]);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn accel5_rows_with_missing_bins_are_dropped() {
        let dir = std::env::temp_dir().join(format!("funcount_ingest_miss_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let accel = write_file(
            &dir,
            "accel5.csv",
            &accel5_csv(&[("a", ["1", "", "3"]), ("b", ["2", "2", "2"])]),
        );
        let cov = write_file(&dir, "covariates.csv", &cov_csv(&[cov_row("a", "25"), cov_row("b", "25")]));
        let mort = write_file(&dir, "mortality.csv", "subject_id,mortstat\na,0\nb,0\n");
        let (set, _) = load_dataset(AccelSource::FiveMin(&accel), &cov, &mort).unwrap();
        assert_eq!(set.subject_ids, vec!["b"]);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn duplicate_subjects_are_rejected() {
        let dir = std::env::temp_dir().join(format!("funcount_ingest_dup_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let accel = write_file(
            &dir,
            "accel5.csv",
            &accel5_csv(&[("a", ["1", "2", "3"]), ("a", ["2", "2", "2"])]),
        );
        let cov = write_file(&dir, "covariates.csv", &cov_csv(&[cov_row("a", "25")]));
        let mort = write_file(&dir, "mortality.csv", "subject_id,mortstat\na,0\n");
        let err = load_dataset(AccelSource::FiveMin(&accel), &cov, &mort).unwrap_err();
        assert!(matches!(err, Error::DuplicateSubject(_)));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn unknown_categorical_level_is_an_error() {
        let dir = std::env::temp_dir().join(format!("funcount_ingest_lvl_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let accel = write_file(&dir, "accel5.csv", &accel5_csv(&[("a", ["1", "2", "3"])]));
        let bad = "a,60,28,2,55,200,130,5,2,Martian,Male,High School,Never,No,No,No,No,No,1.5\n";
        let cov = write_file(&dir, "covariates.csv", &cov_csv(&[bad.to_string()]));
        let mort = write_file(&dir, "mortality.csv", "subject_id,mortstat\na,0\n");
        let err = load_dataset(AccelSource::FiveMin(&accel), &cov, &mort).unwrap_err();
        assert!(matches!(err, Error::UnknownLevel { .. }));
        std::fs::remove_dir_all(&dir).ok();
    }
}
