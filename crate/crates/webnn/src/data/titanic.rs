use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Feature columns in the order they are fed to the input neurons.
pub const TITANIC_FEATURES: [&str; 8] = [
    "Pclass",
    "Sex",
    "Age",
    "SibSp",
    "Parch",
    "Fare",
    "Embarked",
    "CabinKnown",
];

const REQUIRED_COLUMNS: [&str; 11] = [
    "PassengerId",
    "Pclass",
    "Name",
    "Sex",
    "Age",
    "SibSp",
    "Parch",
    "Ticket",
    "Fare",
    "Cabin",
    "Embarked",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sex {
    Male,
    Female,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Embarked {
    Southampton,
    Cherbourg,
    Queenstown,
}

/// One row of the Kaggle Titanic CSV. `survived` is absent in the test file.
#[derive(Clone, Debug, PartialEq)]
pub struct TitanicRecord {
    pub passenger_id: u32,
    pub survived: Option<u8>,
    pub pclass: u8,
    pub name: String,
    pub sex: Sex,
    pub age: Option<f64>,
    pub sib_sp: u32,
    pub parch: u32,
    pub ticket: String,
    pub fare: Option<f64>,
    pub cabin: Option<String>,
    pub embarked: Option<Embarked>,
}

pub fn load_titanic_csv(path: impl AsRef<Path>) -> Result<Vec<TitanicRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_titanic_csv(file, path)
}

struct Columns {
    survived: Option<usize>,
    idx: [usize; REQUIRED_COLUMNS.len()],
}

impl Columns {
    fn from_header(header: &csv::StringRecord, path: &Path) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let mut idx = [0; REQUIRED_COLUMNS.len()];
        let mut missing = Vec::new();
        for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
            match find(name) {
                Some(i) => *slot = i,
                None => missing.push(name),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!(
                    "missing columns {missing:?}; expected PassengerId,[Survived,]{}",
                    REQUIRED_COLUMNS[1..].join(",")
                ),
            });
        }
        Ok(Self {
            survived: find("Survived"),
            idx,
        })
    }
}

fn parse_row(row: &csv::StringRecord, cols: &Columns) -> std::result::Result<TitanicRecord, String> {
    let field = |i: usize| row.get(cols.idx[i]).map(str::trim).unwrap_or("");
    let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
    fn num<V: std::str::FromStr>(name: &str, s: &str) -> std::result::Result<V, String> {
        s.parse().map_err(|_| format!("{name}: cannot parse {s:?}"))
    }
    fn opt_num(name: &str, s: &str) -> std::result::Result<Option<f64>, String> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(name, s).map(Some)
        }
    }

    let survived = match cols.survived.and_then(|i| row.get(i)).map(str::trim) {
        None | Some("") => None,
        Some("0") => Some(0),
        Some("1") => Some(1),
        Some(other) => return Err(format!("Survived must be 0 or 1, got {other:?}")),
    };
    let pclass: u8 = num("Pclass", field(1))?;
    if !(1..=3).contains(&pclass) {
        return Err(format!("Pclass must be 1, 2 or 3, got {pclass}"));
    }
    let sex = match field(3) {
        "male" => Sex::Male,
        "female" => Sex::Female,
        other => return Err(format!("Sex: unknown value {other:?}")),
    };
    let embarked = match field(10) {
        "" => None,
        "S" => Some(Embarked::Southampton),
        "C" => Some(Embarked::Cherbourg),
        "Q" => Some(Embarked::Queenstown),
        other => return Err(format!("Embarked: unknown value {other:?}")),
    };
    Ok(TitanicRecord {
        passenger_id: num("PassengerId", field(0))?,
        survived,
        pclass,
        name: field(2).to_string(),
        sex,
        age: opt_num("Age", field(4))?,
        sib_sp: num("SibSp", field(5))?,
        parch: num("Parch", field(6))?,
        ticket: field(7).to_string(),
        fare: opt_num("Fare", field(8))?,
        cabin: opt(field(9)),
        embarked,
    })
}

/// Parses Titanic CSV text (RFC-4180 quoting, header required).
pub fn parse_titanic_csv(reader: impl Read, path: impl Into<PathBuf>) -> Result<Vec<TitanicRecord>> {
    let path = path.into();
    let format = |reason: String| Error::Format {
        path: path.clone(),
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| format(format!("header: {e}")))?.clone();
    let cols = Columns::from_header(&header, &path)?;

    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            format(format!("line {line}: {e}"))
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let record = parse_row(&row, &cols).map_err(|r| format(format!("line {line}: {r}")))?;
        if !ids.insert(record.passenger_id) {
            return Err(format(format!(
                "line {line}: duplicate PassengerId {}",
                record.passenger_id
            )));
        }
        records.push(record);
    }
    Ok(records)
}

/// Imputation medians and standardization moments, fit on the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub age_median: f64,
    pub fare_median: f64,
    pub mean: [f64; 8],
    pub std: [f64; 8],
}

/// Standardized `(N, 8)` features, labels when every record has one, and
/// the statistics that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct TitanicFeatures<T> {
    pub features: Tensor<T>,
    pub labels: Option<Vec<usize>>,
    pub stats: FeatureStats,
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    }
}

fn raw_row(r: &TitanicRecord, age_median: f64, fare_median: f64) -> [f64; 8] {
    [
        r.pclass as f64,
        match r.sex {
            Sex::Male => 0.0,
            Sex::Female => 1.0,
        },
        r.age.unwrap_or(age_median),
        r.sib_sp as f64,
        r.parch as f64,
        r.fare.unwrap_or(fare_median),
        match r.embarked {
            None | Some(Embarked::Southampton) => 0.0,
            Some(Embarked::Cherbourg) => 1.0,
            Some(Embarked::Queenstown) => 2.0,
        },
        if r.cabin.is_some() { 1.0 } else { 0.0 },
    ]
}

/// Encodes records into the 8 input features in [`TITANIC_FEATURES`]
/// order, imputes missing Age/Fare with medians and standardizes every
/// column.
///
/// With `stats = None` the statistics are fit on `records`; otherwise the
/// given statistics are applied unchanged. Labels are never read for
/// fitting.
pub fn preprocess_titanic<T: Real>(
    records: &[TitanicRecord],
    stats: Option<&FeatureStats>,
) -> Result<TitanicFeatures<T>> {
    if records.is_empty() {
        return Err(Error::Validation("no Titanic records to preprocess".into()));
    }
    let stats = match stats {
        Some(s) => s.clone(),
        None => {
            let age_median = median(records.iter().filter_map(|r| r.age).collect());
            let fare_median = median(records.iter().filter_map(|r| r.fare).collect());
            let rows: Vec<_> = records.iter().map(|r| raw_row(r, age_median, fare_median)).collect();
            let n = rows.len() as f64;
            let mut mean = [0.0; 8];
            let mut std = [0.0; 8];
            for c in 0..8 {
                mean[c] = rows.iter().map(|r| r[c]).sum::<f64>() / n;
                let var = rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / n;
                std[c] = if var > 0.0 { var.sqrt() } else { 1.0 };
            }
            FeatureStats {
                age_median,
                fare_median,
                mean,
                std,
            }
        }
    };
    let mut data = Vec::with_capacity(records.len() * 8);
    for r in records {
        let raw = raw_row(r, stats.age_median, stats.fare_median);
        data.extend((0..8).map(|c| T::of((raw[c] - stats.mean[c]) / stats.std[c])));
    }
    let labels = records
        .iter()
        .map(|r| r.survived.map(usize::from))
        .collect::<Option<Vec<_>>>();
    Ok(TitanicFeatures {
        features: Tensor::new([records.len(), 8], data)?,
        labels,
        stats,
    })
}
