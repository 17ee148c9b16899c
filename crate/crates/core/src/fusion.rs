//! Lagged feature construction on the 3-hour prediction grid, plus the
//! training-set transforms applied before fitting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Sources, SolarQuantity, DST_CADENCE, KP_CADENCE, SOLAR_WIND_CADENCE};
use crate::rng::SplitMix64;
use crate::time::Timestamp;

/// Lag windows per source and the forecast horizon.
///
/// Each source contributes lags `0, step, 2*step, .., lookback - step`
/// minutes before the prediction instant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LagSpec {
    pub solar_wind_lookback_minutes: u32,
    pub solar_wind_step_minutes: u32,
    pub dst_lookback_hours: u32,
    pub kp_lookback_hours: u32,
    pub horizon_hours: u32,
}

impl Default for LagSpec {
    fn default() -> Self {
        Self {
            solar_wind_lookback_minutes: 540,
            solar_wind_step_minutes: 5,
            dst_lookback_hours: 3,
            kp_lookback_hours: 24,
            horizon_hours: 3,
        }
    }
}

impl LagSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.solar_wind_step_minutes == 0 || self.solar_wind_step_minutes % SOLAR_WIND_CADENCE != 0 {
            return bad("solar-wind step must be a positive multiple of 5 minutes");
        }
        if self.solar_wind_lookback_minutes == 0
            || self.solar_wind_lookback_minutes % self.solar_wind_step_minutes != 0
        {
            return bad("solar-wind lookback must be a positive multiple of its step");
        }
        if self.dst_lookback_hours == 0 {
            return bad("Dst lookback must be positive");
        }
        if self.kp_lookback_hours == 0 || self.kp_lookback_hours % 3 != 0 {
            return bad("Kp lookback must be a positive multiple of 3 hours");
        }
        if self.horizon_hours == 0 || self.horizon_hours % 3 != 0 {
            return bad("horizon must be a positive multiple of 3 hours");
        }
        Ok(())
    }

    fn solar_lags(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.solar_wind_lookback_minutes / self.solar_wind_step_minutes)
            .map(move |j| j * self.solar_wind_step_minutes)
    }

    fn dst_lags(&self) -> impl Iterator<Item = u32> {
        (0..self.dst_lookback_hours).map(|j| j * DST_CADENCE)
    }

    fn kp_lags(&self) -> impl Iterator<Item = u32> {
        (0..self.kp_lookback_hours / 3).map(|j| j * KP_CADENCE)
    }

    pub fn feature_count(&self) -> usize {
        7 * (self.solar_wind_lookback_minutes / self.solar_wind_step_minutes) as usize
            + self.dst_lookback_hours as usize
            + (self.kp_lookback_hours / 3) as usize
    }

    /// Column names in row order, e.g. `fma_m0`, `fma_m5`, .., `dst_m60`, `kp_m180`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.feature_count());
        for q in SolarQuantity::ALL {
            names.extend(self.solar_lags().map(|lag| feature_name(q.name(), lag)));
        }
        names.extend(self.dst_lags().map(|lag| feature_name("dst", lag)));
        names.extend(self.kp_lags().map(|lag| feature_name("kp", lag)));
        names
    }
}

pub fn feature_name(quantity: &str, lag_minutes: u32) -> String {
    format!("{quantity}_m{lag_minutes}")
}

/// Splits a feature name into its quantity and lag in minutes.
pub fn parse_feature_name(name: &str) -> Option<(&str, u32)> {
    let (quantity, lag) = name.rsplit_once("_m")?;
    Some((quantity, lag.parse().ok()?))
}

/// Lagged feature matrix (row-major) with future-Kp targets.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedDataset {
    feature_names: Vec<String>,
    values: Vec<f64>,
    targets: Vec<f64>,
    row_times: Vec<Timestamp>,
}

impl FusedDataset {
    pub fn new(
        feature_names: Vec<String>,
        values: Vec<f64>,
        targets: Vec<f64>,
        row_times: Vec<Timestamp>,
    ) -> Result<Self> {
        let width = feature_names.len();
        if targets.len() != row_times.len() {
            return Err(Error::LengthMismatch {
                left: targets.len(),
                right: row_times.len(),
            });
        }
        if values.len() != width * targets.len() {
            return Err(Error::DimensionMismatch {
                expected: width * targets.len(),
                actual: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("feature cell {v}")));
        }
        if let Some(t) = targets.iter().find(|t| !(0.0..=9.0).contains(*t)) {
            return Err(Error::NonFiniteValue(format!("target {t} outside [0, 9]")));
        }
        Ok(Self {
            feature_names,
            values,
            targets,
            row_times,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_features();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn row_times(&self) -> &[Timestamp] {
        &self.row_times
    }

    /// New dataset holding the given rows in the given order.
    pub fn take_rows(&self, indices: &[usize]) -> FusedDataset {
        let w = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FusedDataset {
            feature_names: self.feature_names.clone(),
            values,
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            row_times: indices.iter().map(|&i| self.row_times[i]).collect(),
        }
    }

    /// CSV with a header of feature names followed by `target,row_time`.
    /// Reals use the shortest representation that parses back bit-exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 12);
        for name in &self.feature_names {
            out.push_str(name);
            out.push(',');
        }
        out.push_str("target,row_time\n");
        for i in 0..self.n_rows() {
            for v in self.row(i) {
                write!(out, "{v},").unwrap();
            }
            writeln!(out, "{},{}", self.targets[i], self.row_times[i]).unwrap();
        }
        out
    }

    pub fn from_csv(content: &str) -> Result<Self> {
        let mut lines = content
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (header_line, header) = lines.next().ok_or(Error::EmptyDataset)?;
        let mut names: Vec<String> = header.split(',').map(str::to_string).collect();
        if names.len() < 2
            || names[names.len() - 2] != "target"
            || names[names.len() - 1] != "row_time"
        {
            return Err(Error::MalformedLine {
                line: header_line,
                reason: "header must end with `target,row_time`".into(),
            });
        }
        names.truncate(names.len() - 2);
        let width = names.len();
        let mut values = Vec::new();
        let mut targets = Vec::new();
        let mut row_times = Vec::new();
        for (line, text) in lines {
            let fields: Vec<&str> = text.split(',').collect();
            if fields.len() != width + 2 {
                return Err(Error::MalformedLine {
                    line,
                    reason: format!("expected {} columns, found {}", width + 2, fields.len()),
                });
            }
            let number = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::MalformedLine {
                        line,
                        reason: format!("`{s}` is not a finite number"),
                    })
            };
            for f in &fields[..width] {
                values.push(number(f)?);
            }
            let target = number(fields[width])?;
            if !(0.0..=9.0).contains(&target) {
                return Err(Error::ValueOutOfRange {
                    line,
                    reason: "target must lie in [0, 9]".into(),
                });
            }
            targets.push(target);
            row_times.push(
                Timestamp::parse(fields[width + 1])
                    .map_err(|reason| Error::BadTimestamp { line, reason })?,
            );
        }
        Self::new(names, values, targets, row_times)
    }
}

/// Ordered subset of feature columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub indices: Vec<usize>,
    pub names: Vec<String>,
}

impl FeatureSubset {
    /// Looks up `names` in the dataset's columns, keeping the given order.
    pub fn by_name(data: &FusedDataset, names: &[String]) -> Result<Self> {
        let mut indices = Vec::with_capacity(names.len());
        for n in names {
            let i = data
                .feature_names()
                .iter()
                .position(|f| f == n)
                .ok_or_else(|| Error::UnknownField(n.clone()))?;
            indices.push(i);
        }
        Ok(Self {
            indices,
            names: names.to_vec(),
        })
    }
}

/// Builds one row per 3-hour instant whose lag windows and target are all
/// present. Instants with any gap are skipped.
pub fn fuse(sources: &Sources, spec: &LagSpec) -> Result<FusedDataset> {
    spec.validate()?;
    for s in &sources.solar {
        check_cadence(s.cadence_minutes, SOLAR_WIND_CADENCE, &s.name)?;
    }
    check_cadence(sources.dst.cadence_minutes, DST_CADENCE, "dst")?;
    check_cadence(sources.kp.cadence_minutes, KP_CADENCE, "kp")?;

    let names = spec.feature_names();
    let width = names.len();
    let horizon = spec.horizon_hours as i64 * 60;
    let solar_lags: Vec<i64> = spec.solar_lags().map(i64::from).collect();
    let dst_lags: Vec<i64> = spec.dst_lags().map(i64::from).collect();
    let kp_lags: Vec<i64> = spec.kp_lags().map(i64::from).collect();

    let mut values = Vec::new();
    let mut targets = Vec::new();
    let mut row_times = Vec::new();
    let mut row = Vec::with_capacity(width);
    'instant: for i in 0..sources.kp.len() {
        let t = sources.kp.time_at(i);
        let Some(target) = sources.kp.value_at(t.plus_minutes(horizon)) else {
            continue;
        };
        row.clear();
        for series in &sources.solar {
            for &lag in &solar_lags {
                match series.value_at(t.plus_minutes(-lag)) {
                    Some(v) => row.push(v),
                    None => continue 'instant,
                }
            }
        }
        for (series, lags) in [(&sources.dst, &dst_lags), (&sources.kp, &kp_lags)] {
            for &lag in lags {
                match series.value_at(t.plus_minutes(-lag)) {
                    Some(v) => row.push(v),
                    None => continue 'instant,
                }
            }
        }
        debug_assert_eq!(row.len(), width);
        values.extend_from_slice(&row);
        targets.push(target);
        row_times.push(t);
    }
    if targets.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    FusedDataset::new(names, values, targets, row_times)
}

fn check_cadence(actual: u32, expected: u32, name: &str) -> Result<()> {
    if actual != expected {
        return Err(Error::CadenceMismatch(format!(
            "{name} has cadence {actual} min, expected {expected}"
        )));
    }
    Ok(())
}

/// Keeps every row with target above `threshold` and a seeded random
/// `ceil(count / l)` of the rest, in original row order.
pub fn downsample_low_kp(data: &FusedDataset, l: u32, threshold: f64, seed: u64) -> Result<FusedDataset> {
    if l == 0 {
        return Err(Error::InvalidConfig("downsampling factor L must be >= 1".into()));
    }
    if !(0.0..=9.0).contains(&threshold) {
        return Err(Error::InvalidConfig("downsampling threshold must lie in [0, 9]".into()));
    }
    if l == 1 {
        return Ok(data.clone());
    }
    let low: Vec<usize> = (0..data.n_rows())
        .filter(|&i| data.targets()[i] <= threshold)
        .collect();
    let keep = low.len().div_ceil(l as usize);
    let mut rng = SplitMix64::new(seed);
    let mut kept = vec![false; data.n_rows()];
    for j in rng.sample_indices(low.len(), keep) {
        kept[low[j]] = true;
    }
    let survivors: Vec<usize> = (0..data.n_rows())
        .filter(|&i| kept[i] || data.targets()[i] > threshold)
        .collect();
    Ok(data.take_rows(&survivors))
}

/// Projects the dataset onto `subset`, in subset order.
pub fn select_features(data: &FusedDataset, subset: &FeatureSubset) -> Result<FusedDataset> {
    let width = data.n_features();
    if let Some(&index) = subset.indices.iter().find(|&&i| i >= width) {
        return Err(Error::IndexOutOfRange { index, width });
    }
    let mut values = Vec::with_capacity(subset.indices.len() * data.n_rows());
    for row in data.rows() {
        values.extend(subset.indices.iter().map(|&i| row[i]));
    }
    Ok(FusedDataset {
        feature_names: subset
            .indices
            .iter()
            .map(|&i| data.feature_names[i].clone())
            .collect(),
        values,
        targets: data.targets.clone(),
        row_times: data.row_times.clone(),
    })
}

/// Rows strictly before `cutoff` train, the rest test.
pub fn split_by_time(data: &FusedDataset, cutoff: Timestamp) -> (FusedDataset, FusedDataset) {
    let (train, test): (Vec<usize>, Vec<usize>) =
        (0..data.n_rows()).partition(|&i| data.row_times[i] < cutoff);
    (data.take_rows(&train), data.take_rows(&test))
}
