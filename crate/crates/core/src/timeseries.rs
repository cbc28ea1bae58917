//! Hourly input series: loading, validation, saving and feature normalization.
//!
//! Three CSV files describe a horizon, each with a header row and one row per
//! hour (the hour index is the row order):
//!
//! * `demand.csv`     one column per bus, GW
//! * `renewables.csv` one column per bus, available renewable power in GW
//! * `inflows.csv`    one column per storage unit, GWh per hour
//!
//! Columns are matched by header name; extra columns are ignored. `inflows.csv`
//! may be omitted when the system has no storage units.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1, Axis};
use thiserror::Error;

use crate::scalar::Scalar;

pub const HOURS_PER_DAY: usize = 24;
pub const DEMAND_FILE: &str = "demand.csv";
pub const RENEWABLES_FILE: &str = "renewables.csv";
pub const INFLOWS_FILE: &str = "inflows.csv";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file}: row {row}, column `{column}`: `{value}` is not a number")]
    NonNumeric {
        file: String,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{file}: row {row}, column `{column}`: negative value {value}")]
    Negative {
        file: String,
        row: usize,
        column: String,
        value: f64,
    },
    #[error("{file}: row {row}, column `{column}`: value is not finite")]
    NonFinite {
        file: String,
        row: usize,
        column: String,
    },
    #[error("{file}: row {row} has {found} fields, header has {expected}")]
    Ragged {
        file: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("series disagree on horizon length: {0}")]
    LengthMismatch(String),
    #[error("horizon of {0} hours is not a positive whole number of days")]
    NotWholeDays(usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Csv { file: String, source: csv::Error },
}

/// Which columns a horizon must provide: bus ids for demand and renewables,
/// storage ids for inflows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnSchema {
    pub nodes: Vec<String>,
    pub storage_units: Vec<String>,
}

/// Hourly demand, renewable availability and storage inflows over a horizon
/// of `P` hours. Matrices are hour-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeHorizonData<T: Scalar = f64> {
    pub nodes: Vec<String>,
    pub storage_units: Vec<String>,
    /// hour × node, GW
    pub demand: Array2<T>,
    /// hour × node, GW
    pub renewable: Array2<T>,
    /// hour × storage unit, GWh
    pub inflows: Array2<T>,
}

impl<T: Scalar> TimeHorizonData<T> {
    pub fn new(
        nodes: Vec<String>,
        storage_units: Vec<String>,
        demand: Array2<T>,
        renewable: Array2<T>,
        inflows: Array2<T>,
    ) -> Result<Self, DataError> {
        let data = Self {
            nodes,
            storage_units,
            demand,
            renewable,
            inflows,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let p = self.demand.nrows();
        if self.renewable.nrows() != p || self.inflows.nrows() != p {
            return Err(DataError::LengthMismatch(format!(
                "demand {p}, renewables {}, inflows {}",
                self.renewable.nrows(),
                self.inflows.nrows()
            )));
        }
        if self.demand.ncols() != self.nodes.len()
            || self.renewable.ncols() != self.nodes.len()
            || self.inflows.ncols() != self.storage_units.len()
        {
            return Err(DataError::LengthMismatch(
                "column count does not match the declared nodes/units".into(),
            ));
        }
        if p == 0 || !p.is_multiple_of(HOURS_PER_DAY) {
            return Err(DataError::NotWholeDays(p));
        }
        for (file, names, m) in [
            (DEMAND_FILE, &self.nodes, &self.demand),
            (RENEWABLES_FILE, &self.nodes, &self.renewable),
            (INFLOWS_FILE, &self.storage_units, &self.inflows),
        ] {
            for ((row, col), &v) in m.indexed_iter() {
                if !v.is_finite() {
                    return Err(DataError::NonFinite {
                        file: file.into(),
                        row: row + 1,
                        column: names[col].clone(),
                    });
                }
                if v < T::zero() {
                    return Err(DataError::Negative {
                        file: file.into(),
                        row: row + 1,
                        column: names[col].clone(),
                        value: v.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn horizon_hours(&self) -> usize {
        self.demand.nrows()
    }

    pub fn num_days(&self) -> usize {
        self.horizon_hours() / HOURS_PER_DAY
    }

    /// Sum of demand over all buses in one hour.
    pub fn total_demand(&self, hour: usize) -> T {
        self.demand.row(hour).sum()
    }

    /// Copy of the horizon restricted to `hours` (in the given order).
    pub fn select_hours(&self, hours: &[usize]) -> Self {
        Self {
            nodes: self.nodes.clone(),
            storage_units: self.storage_units.clone(),
            demand: self.demand.select(Axis(0), hours),
            renewable: self.renewable.select(Axis(0), hours),
            inflows: self.inflows.select(Axis(0), hours),
        }
    }

    /// Number of feature series used for clustering.
    pub fn num_series(&self) -> usize {
        2 * self.nodes.len() + self.storage_units.len()
    }

    /// Series in the fixed clustering order: demand nodes, renewable nodes,
    /// inflow units.
    pub fn series(&self, index: usize) -> ArrayView1<'_, T> {
        let n = self.nodes.len();
        if index < n {
            self.demand.column(index)
        } else if index < 2 * n {
            self.renewable.column(index - n)
        } else {
            self.inflows.column(index - 2 * n)
        }
    }

    pub fn series_label(&self, index: usize) -> String {
        let n = self.nodes.len();
        if index < n {
            format!("demand:{}", self.nodes[index])
        } else if index < 2 * n {
            format!("renewable:{}", self.nodes[index - n])
        } else {
            format!("inflow:{}", self.storage_units[index - 2 * n])
        }
    }
}

/// Affine map of one series onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesScale<T> {
    pub min: T,
    pub max: T,
}

impl<T: Scalar> SeriesScale<T> {
    pub fn fit<'a>(values: impl IntoIterator<Item = &'a T>) -> Self {
        let mut min = T::infinity();
        let mut max = T::neg_infinity();
        for &v in values {
            min = min.min(v);
            max = max.max(v);
        }
        if min > max {
            min = T::zero();
            max = T::zero();
        }
        Self { min, max }
    }

    fn span(&self) -> T {
        self.max - self.min
    }

    /// Constant series map to zero.
    pub fn normalize(&self, value: T) -> T {
        let span = self.span();
        if span > T::zero() {
            (value - self.min) / span
        } else {
            T::zero()
        }
    }

    pub fn denormalize(&self, value: T) -> T {
        self.min + value * self.span()
    }
}

/// Hour × feature matrix of normalized series plus the scales that undo it.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFeatures<T: Scalar = f64> {
    pub values: Array2<T>,
    pub scales: Vec<SeriesScale<T>>,
    pub labels: Vec<String>,
}

impl<T: Scalar> NormalizedFeatures<T> {
    pub fn num_hours(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn denormalize(&self, feature: usize, value: T) -> T {
        self.scales[feature].denormalize(value)
    }

    /// Undo the scaling of every column.
    pub fn denormalized(&self) -> Array2<T> {
        let mut out = self.values.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| self.scales[j].denormalize(v));
        }
        out
    }

    /// One row per day: the 24 hourly feature vectors concatenated hour by
    /// hour.
    pub fn day_vectors(&self) -> Array2<T> {
        let days = self.num_hours() / HOURS_PER_DAY;
        let f = self.num_features();
        let flat: Vec<T> = self.values.iter().copied().collect();
        Array2::from_shape_vec((days, HOURS_PER_DAY * f), flat[..days * HOURS_PER_DAY * f].to_vec())
            .expect("day reshape")
    }
}

/// Min-max scale every series of the horizon to [0, 1].
pub fn normalize_series<T: Scalar>(data: &TimeHorizonData<T>) -> NormalizedFeatures<T> {
    let p = data.horizon_hours();
    let count = data.num_series();
    let mut values = Array2::zeros((p, count));
    let mut scales = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for j in 0..count {
        let series = data.series(j);
        let scale = SeriesScale::fit(series.iter());
        for (h, &v) in series.iter().enumerate() {
            values[[h, j]] = scale.normalize(v);
        }
        scales.push(scale);
        labels.push(data.series_label(j));
    }
    NormalizedFeatures {
        values,
        scales,
        labels,
    }
}

/// Read the named columns of one CSV file into an hour × column matrix.
pub fn read_series_csv<T: Scalar, R: Read>(
    reader: R,
    file: &str,
    columns: &[String],
) -> Result<Array2<T>, DataError> {
    let csv_err = |source| DataError::Csv {
        file: file.to_string(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let mut positions = Vec::with_capacity(columns.len());
    for c in columns {
        let pos = headers
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| DataError::MissingColumn {
                file: file.to_string(),
                column: c.clone(),
            })?;
        positions.push(pos);
    }
    let mut flat = Vec::new();
    let mut rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = i + 1;
        if record.len() != headers.len() {
            return Err(DataError::Ragged {
                file: file.to_string(),
                row,
                expected: headers.len(),
                found: record.len(),
            });
        }
        for (c, &pos) in columns.iter().zip(&positions) {
            let cell = &record[pos];
            let value: f64 = cell.parse().map_err(|_| DataError::NonNumeric {
                file: file.to_string(),
                row,
                column: c.clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite {
                    file: file.to_string(),
                    row,
                    column: c.clone(),
                });
            }
            if value < 0.0 {
                return Err(DataError::Negative {
                    file: file.to_string(),
                    row,
                    column: c.clone(),
                    value,
                });
            }
            flat.push(T::of(value));
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, columns.len()), flat).expect("csv shape"))
}

/// Write an hour × column matrix with a header row.
pub fn write_series_csv<T: Scalar, W: Write>(
    writer: W,
    file: &str,
    columns: &[String],
    values: &Array2<T>,
) -> Result<(), DataError> {
    let csv_err = |source| DataError::Csv {
        file: file.to_string(),
        source,
    };
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(columns).map_err(csv_err)?;
    for row in values.rows() {
        wtr.write_record(row.iter().map(|v| format!("{}", v.as_f64())))
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(|source| DataError::Io {
        path: PathBuf::from(file),
        source,
    })
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<File, DataError> {
    File::create(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Load `demand.csv`, `renewables.csv` and `inflows.csv` from `dir`.
pub fn load_horizon<T: Scalar>(
    dir: &Path,
    schema: &ColumnSchema,
) -> Result<TimeHorizonData<T>, DataError> {
    let demand = read_series_csv(open(&dir.join(DEMAND_FILE))?, DEMAND_FILE, &schema.nodes)?;
    let renewable = read_series_csv(
        open(&dir.join(RENEWABLES_FILE))?,
        RENEWABLES_FILE,
        &schema.nodes,
    )?;
    let inflow_path = dir.join(INFLOWS_FILE);
    let inflows = if schema.storage_units.is_empty() && !inflow_path.exists() {
        Array2::zeros((demand.nrows(), 0))
    } else {
        read_series_csv(open(&inflow_path)?, INFLOWS_FILE, &schema.storage_units)?
    };
    TimeHorizonData::new(
        schema.nodes.clone(),
        schema.storage_units.clone(),
        demand,
        renewable,
        inflows,
    )
}

/// Write the three series files into `dir` (created if missing).
pub fn save_horizon<T: Scalar>(dir: &Path, data: &TimeHorizonData<T>) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_series_csv(create(&dir.join(DEMAND_FILE))?, DEMAND_FILE, &data.nodes, &data.demand)?;
    write_series_csv(
        create(&dir.join(RENEWABLES_FILE))?,
        RENEWABLES_FILE,
        &data.nodes,
        &data.renewable,
    )?;
    write_series_csv(
        create(&dir.join(INFLOWS_FILE))?,
        INFLOWS_FILE,
        &data.storage_units,
        &data.inflows,
    )
}
