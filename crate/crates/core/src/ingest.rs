//! Canonical measurement files and gap-aware time series.
//!
//! Three comma-separated layouts are accepted, one row per timestamp, `#`
//! comment lines ignored, optional header row:
//!
//! | source     | columns                                                    | cadence |
//! |------------|------------------------------------------------------------|---------|
//! | solar wind | `timestamp,fma,bx,by,bz,speed,density,temperature`         | 5 min   |
//! | Dst        | `timestamp,dst`                                            | 1 h     |
//! | Kp         | `timestamp,kp`                                             | 3 h     |
//!
//! An empty field is a missing value and stays missing in memory (`None`).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Timestamp;

pub const SOLAR_WIND_CADENCE: u32 = 5;
pub const DST_CADENCE: u32 = 60;
pub const KP_CADENCE: u32 = 180;

pub const SOLAR_WIND_HEADER: &str = "timestamp,fma,bx,by,bz,speed,density,temperature";
pub const DST_HEADER: &str = "timestamp,dst";
pub const KP_HEADER: &str = "timestamp,kp";

/// The seven solar-wind quantities, in file column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolarQuantity {
    Fma,
    Bx,
    By,
    Bz,
    Speed,
    Density,
    Temperature,
}

impl SolarQuantity {
    pub const ALL: [SolarQuantity; 7] = [
        SolarQuantity::Fma,
        SolarQuantity::Bx,
        SolarQuantity::By,
        SolarQuantity::Bz,
        SolarQuantity::Speed,
        SolarQuantity::Density,
        SolarQuantity::Temperature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolarQuantity::Fma => "fma",
            SolarQuantity::Bx => "bx",
            SolarQuantity::By => "by",
            SolarQuantity::Bz => "bz",
            SolarQuantity::Speed => "speed",
            SolarQuantity::Density => "density",
            SolarQuantity::Temperature => "temperature",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.name() == name)
    }

    fn non_negative(self) -> bool {
        matches!(
            self,
            SolarQuantity::Fma
                | SolarQuantity::Speed
                | SolarQuantity::Density
                | SolarQuantity::Temperature
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolarWindRecord {
    pub t: Timestamp,
    /// Indexed by [`SolarQuantity`] column order.
    pub values: [Option<f64>; 7],
}

impl SolarWindRecord {
    pub fn get(&self, q: SolarQuantity) -> Option<f64> {
        self.values[q as usize]
    }

    pub fn fma(&self) -> Option<f64> {
        self.get(SolarQuantity::Fma)
    }

    pub fn bz(&self) -> Option<f64> {
        self.get(SolarQuantity::Bz)
    }

    pub fn speed(&self) -> Option<f64> {
        self.get(SolarQuantity::Speed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DstRecord {
    pub t: Timestamp,
    pub dst: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpRecord {
    pub t: Timestamp,
    pub kp: Option<f64>,
}

/// Anything with a timestamp and named numeric fields that can feed [`to_series`].
pub trait TimedRecord {
    fn timestamp(&self) -> Timestamp;
    /// `None` for an unknown field name, `Some(None)` for a gap.
    fn field(&self, name: &str) -> Option<Option<f64>>;
}

impl TimedRecord for SolarWindRecord {
    fn timestamp(&self) -> Timestamp {
        self.t
    }

    fn field(&self, name: &str) -> Option<Option<f64>> {
        SolarQuantity::from_name(name).map(|q| self.get(q))
    }
}

impl TimedRecord for DstRecord {
    fn timestamp(&self) -> Timestamp {
        self.t
    }

    fn field(&self, name: &str) -> Option<Option<f64>> {
        (name == "dst").then_some(self.dst)
    }
}

impl TimedRecord for KpRecord {
    fn timestamp(&self) -> Timestamp {
        self.t
    }

    fn field(&self, name: &str) -> Option<Option<f64>> {
        (name == "kp").then_some(self.kp)
    }
}

/// A uniformly sampled series; `values[i]` is the reading at
/// `start + i * cadence_minutes`, `None` marking a gap.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    pub name: String,
    pub cadence_minutes: u32,
    pub start: Timestamp,
    pub values: Vec<Option<f64>>,
}

impl MeasurementSeries {
    pub fn new(
        name: impl Into<String>,
        cadence_minutes: u32,
        start: Timestamp,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        if cadence_minutes == 0 {
            return Err(Error::CadenceMismatch("cadence must be positive".into()));
        }
        if !start.is_aligned(cadence_minutes as i64) {
            return Err(Error::CadenceMismatch(format!(
                "start {start} is not on the {cadence_minutes}-minute grid"
            )));
        }
        Ok(Self {
            name: name.into(),
            cadence_minutes,
            start,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_at(&self, index: usize) -> Timestamp {
        self.start
            .plus_minutes(index as i64 * self.cadence_minutes as i64)
    }

    /// Last grid instant covered, if any.
    pub fn end(&self) -> Option<Timestamp> {
        self.len().checked_sub(1).map(|i| self.time_at(i))
    }

    /// Reading at `t`; `None` when `t` is off-grid, outside the span, or a gap.
    pub fn value_at(&self, t: Timestamp) -> Option<f64> {
        let offset = t.minutes() - self.start.minutes();
        let cadence = self.cadence_minutes as i64;
        if offset < 0 || offset % cadence != 0 {
            return None;
        }
        self.values.get((offset / cadence) as usize).copied().flatten()
    }

    pub fn gap_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

/// Builds a series for `field` spanning the first to last record. Grid
/// instants without a record become gaps.
pub fn to_series<R: TimedRecord>(
    records: &[R],
    field: &str,
    expected_cadence: u32,
) -> Result<MeasurementSeries> {
    let first = records.first().ok_or(Error::EmptyInput)?;
    if expected_cadence == 0 {
        return Err(Error::CadenceMismatch("cadence must be positive".into()));
    }
    let cadence = expected_cadence as i64;
    let start = first.timestamp();
    let last = records[records.len() - 1].timestamp();
    if last < start {
        return Err(Error::CadenceMismatch("records are not time-ordered".into()));
    }
    let len = ((last.minutes() - start.minutes()) / cadence + 1) as usize;
    let mut values = vec![None; len];
    let mut prev: Option<Timestamp> = None;
    for r in records {
        let t = r.timestamp();
        if !t.is_aligned(cadence) {
            return Err(Error::CadenceMismatch(format!(
                "{t} is not on the {expected_cadence}-minute grid"
            )));
        }
        if prev.is_some_and(|p| t <= p) {
            return Err(Error::CadenceMismatch(format!("{t} is out of order")));
        }
        prev = Some(t);
        let value = r
            .field(field)
            .ok_or_else(|| Error::UnknownField(field.to_string()))?;
        values[((t.minutes() - start.minutes()) / cadence) as usize] = value;
    }
    MeasurementSeries::new(field, expected_cadence, start, values)
}

fn parse_value(field: &str, line: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    let v: f64 = field.parse().map_err(|_| Error::MalformedLine {
        line,
        reason: format!("`{field}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::MalformedLine {
            line,
            reason: format!("`{field}` is not finite"),
        });
    }
    Ok(Some(v))
}

/// Shared row scanner: skips comments, blank lines and an exact header,
/// checks column count, parses the timestamp and enforces strict ordering.
fn scan_rows<R>(
    content: &str,
    header: &str,
    n_fields: usize,
    mut build: impl FnMut(usize, Timestamp, &[&str]) -> Result<R>,
) -> Result<Vec<R>> {
    let mut out = Vec::new();
    let mut prev: Option<Timestamp> = None;
    let mut seen_data = false;
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_data && line == header {
            seen_data = true;
            continue;
        }
        seen_data = true;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_fields + 1 {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: format!("expected {} columns, found {}", n_fields + 1, fields.len()),
            });
        }
        let t = Timestamp::parse(fields[0]).map_err(|reason| Error::BadTimestamp {
            line: line_no,
            reason,
        })?;
        if prev.is_some_and(|p| t <= p) {
            return Err(Error::NonMonotonicTime { line: line_no });
        }
        prev = Some(t);
        out.push(build(line_no, t, &fields[1..])?);
    }
    Ok(out)
}

pub fn parse_solar_wind(content: &str) -> Result<Vec<SolarWindRecord>> {
    scan_rows(content, SOLAR_WIND_HEADER, 7, |line, t, fields| {
        let mut values = [None; 7];
        for (q, field) in SolarQuantity::ALL.into_iter().zip(fields) {
            let v = parse_value(field, line)?;
            if q.non_negative() && v.is_some_and(|v| v < 0.0) {
                return Err(Error::ValueOutOfRange {
                    line,
                    reason: format!("{} must be non-negative", q.name()),
                });
            }
            values[q as usize] = v;
        }
        Ok(SolarWindRecord { t, values })
    })
}

pub fn parse_dst(content: &str) -> Result<Vec<DstRecord>> {
    scan_rows(content, DST_HEADER, 1, |line, t, fields| {
        if !t.is_aligned(DST_CADENCE as i64) {
            return Err(Error::BadTimestamp {
                line,
                reason: format!("{t} is not hour-aligned"),
            });
        }
        Ok(DstRecord {
            t,
            dst: parse_value(fields[0], line)?,
        })
    })
}

pub fn parse_kp(content: &str) -> Result<Vec<KpRecord>> {
    scan_rows(content, KP_HEADER, 1, |line, t, fields| {
        if !t.is_aligned(KP_CADENCE as i64) {
            return Err(Error::BadTimestamp {
                line,
                reason: format!("{t} is not on a 3-hour boundary"),
            });
        }
        let kp = parse_value(fields[0], line)?;
        if kp.is_some_and(|k| !(0.0..=9.0).contains(&k)) {
            return Err(Error::ValueOutOfRange {
                line,
                reason: "kp must lie in [0, 9]".into(),
            });
        }
        Ok(KpRecord { t, kp })
    })
}

fn push_value(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        // `Display` for f64 prints the shortest string that parses back exactly.
        write!(out, "{v}").unwrap();
    }
}

pub fn write_solar_wind(records: &[SolarWindRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 64);
    for r in records {
        write!(out, "{}", r.t).unwrap();
        for v in r.values {
            push_value(&mut out, v);
        }
        out.push('\n');
    }
    out
}

pub fn write_dst(records: &[DstRecord]) -> String {
    let mut out = String::new();
    for r in records {
        write!(out, "{}", r.t).unwrap();
        push_value(&mut out, r.dst);
        out.push('\n');
    }
    out
}

pub fn write_kp(records: &[KpRecord]) -> String {
    let mut out = String::new();
    for r in records {
        write!(out, "{}", r.t).unwrap();
        push_value(&mut out, r.kp);
        out.push('\n');
    }
    out
}

/// The three inputs of the pipeline as uniform series.
#[derive(Debug, Clone, PartialEq)]
pub struct Sources {
    /// Indexed by [`SolarQuantity`] column order.
    pub solar: [MeasurementSeries; 7],
    pub dst: MeasurementSeries,
    pub kp: MeasurementSeries,
}

impl Sources {
    pub fn solar(&self, q: SolarQuantity) -> &MeasurementSeries {
        &self.solar[q as usize]
    }

    /// Parses the three canonical files and lays them onto their grids.
    pub fn from_csv(solar_wind: &str, dst: &str, kp: &str) -> Result<Self> {
        let sw = parse_solar_wind(solar_wind)?;
        let dst = parse_dst(dst)?;
        let kp = parse_kp(kp)?;
        Self::from_records(&sw, &dst, &kp)
    }

    pub fn from_records(
        solar_wind: &[SolarWindRecord],
        dst: &[DstRecord],
        kp: &[KpRecord],
    ) -> Result<Self> {
        let mut solar = Vec::with_capacity(7);
        for q in SolarQuantity::ALL {
            solar.push(to_series(solar_wind, q.name(), SOLAR_WIND_CADENCE)?);
        }
        Ok(Self {
            solar: solar.try_into().expect("seven quantities"),
            dst: to_series(dst, "dst", DST_CADENCE)?,
            kp: to_series(kp, "kp", KP_CADENCE)?,
        })
    }

    /// Renders the canonical files (solar wind, Dst, Kp). Grid instants that
    /// are gaps in every column are written as rows of empty fields.
    pub fn to_csv(&self) -> Result<(String, String, String)> {
        let base = &self.solar[0];
        for s in &self.solar {
            if s.start != base.start || s.len() != base.len() || s.cadence_minutes != base.cadence_minutes {
                return Err(Error::CadenceMismatch(
                    "solar-wind series must share one time grid to be written together".into(),
                ));
            }
        }
        let solar: Vec<SolarWindRecord> = (0..base.len())
            .map(|i| SolarWindRecord {
                t: base.time_at(i),
                values: std::array::from_fn(|q| self.solar[q].values[i]),
            })
            .collect();
        let dst: Vec<DstRecord> = (0..self.dst.len())
            .map(|i| DstRecord {
                t: self.dst.time_at(i),
                dst: self.dst.values[i],
            })
            .collect();
        let kp: Vec<KpRecord> = (0..self.kp.len())
            .map(|i| KpRecord {
                t: self.kp.time_at(i),
                kp: self.kp.values[i],
            })
            .collect();
        Ok((write_solar_wind(&solar), write_dst(&dst), write_kp(&kp)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    #[test]
    fn solar_wind_direct_mapping() {
        let r = parse_solar_wind("2021-01-01T00:00Z,4.5,1.2,-0.3,2.1,389.0,5.4,120000").unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].t, ts("2021-01-01T00:00Z"));
        assert_eq!(r[0].fma(), Some(4.5));
        assert_eq!(r[0].bz(), Some(2.1));
        assert_eq!(r[0].speed(), Some(389.0));
        assert_eq!(r[0].get(SolarQuantity::Temperature), Some(120000.0));
    }

    #[test]
    fn solar_wind_all_gaps() {
        let r = parse_solar_wind("2021-01-01T00:05Z,,,,,,,").unwrap();
        assert_eq!(r[0].t, ts("2021-01-01T00:05Z"));
        assert!(r[0].values.iter().all(Option::is_none));
    }

    #[test]
    fn solar_wind_out_of_order() {
        let text = "2021-01-01T00:05Z,,,,,,,\n2021-01-01T00:00Z,,,,,,,\n";
        assert_eq!(
            parse_solar_wind(text),
            Err(Error::NonMonotonicTime { line: 2 })
        );
    }

    #[test]
    fn solar_wind_duplicate_time_is_non_monotonic() {
        let text = "2021-01-01T00:05Z,,,,,,,\n2021-01-01T00:05Z,,,,,,,\n";
        assert_eq!(
            parse_solar_wind(text),
            Err(Error::NonMonotonicTime { line: 2 })
        );
    }

    #[test]
    fn solar_wind_malformed() {
        assert!(matches!(
            parse_solar_wind("2021-01-01T00:00Z,1,2,3"),
            Err(Error::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_solar_wind("# c\n2021-01-01T00:00Z,1,2,3,4,abc,6,7"),
            Err(Error::MalformedLine { line: 2, .. })
        ));
        assert!(matches!(
            parse_solar_wind("2021-01-01T00:00Z,1,2,3,4,NaN,6,7"),
            Err(Error::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_solar_wind("2021-01-01T00:00Z,1,2,3,4, 5,6,7"),
            Err(Error::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_solar_wind("2021-01-01 00:00,1,2,3,4,5,6,7"),
            Err(Error::BadTimestamp { line: 1, .. })
        ));
        assert!(matches!(
            parse_solar_wind("2021-01-01T00:00Z,1,2,3,4,-5,6,7"),
            Err(Error::ValueOutOfRange { line: 1, .. })
        ));
    }

    #[test]
    fn comments_header_and_trailing_whitespace() {
        let text = "# solar wind export\ntimestamp,fma,bx,by,bz,speed,density,temperature\n2021-01-01T00:00Z,1,2,3,4,5,6,7  \n\n";
        let r = parse_solar_wind(text).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].get(SolarQuantity::Temperature), Some(7.0));
    }

    #[test]
    fn dst_examples() {
        let r = parse_dst("2021-01-01T05:00Z,-23").unwrap();
        assert_eq!(
            r,
            vec![DstRecord {
                t: ts("2021-01-01T05:00Z"),
                dst: Some(-23.0)
            }]
        );
        assert!(matches!(
            parse_dst("2021-01-01T05:30Z,-23"),
            Err(Error::BadTimestamp { line: 1, .. })
        ));
        assert_eq!(parse_dst("").unwrap(), vec![]);
    }

    #[test]
    fn kp_examples() {
        let r = parse_kp("2021-02-03T06:00Z,5.3").unwrap();
        assert_eq!(r[0].kp, Some(5.3));
        assert!(matches!(
            parse_kp("2021-02-03T06:00Z,9.5"),
            Err(Error::ValueOutOfRange { line: 1, .. })
        ));
        assert!(matches!(
            parse_kp("2021-02-03T07:00Z,3.0"),
            Err(Error::BadTimestamp { line: 1, .. })
        ));
        assert_eq!(parse_kp("2021-02-03T06:00Z,").unwrap()[0].kp, None);
    }

    #[test]
    fn series_gap_infill() {
        let recs = parse_solar_wind("2021-01-01T00:00Z,1,,,,,,\n2021-01-01T00:10Z,3,,,,,,\n").unwrap();
        let s = to_series(&recs, "fma", 5).unwrap();
        assert_eq!(s.values, vec![Some(1.0), None, Some(3.0)]);
        assert_eq!(s.value_at(ts("2021-01-01T00:10Z")), Some(3.0));
        assert_eq!(s.value_at(ts("2021-01-01T00:05Z")), None);
        assert_eq!(s.end(), Some(ts("2021-01-01T00:10Z")));
    }

    #[test]
    fn series_single_and_mismatch() {
        let recs = parse_kp("2021-01-01T03:00Z,2").unwrap();
        assert_eq!(to_series(&recs, "kp", 180).unwrap().len(), 1);
        let recs = parse_solar_wind("2021-01-01T00:07Z,1,,,,,,").unwrap();
        assert!(matches!(
            to_series(&recs, "fma", 5),
            Err(Error::CadenceMismatch(_))
        ));
        assert!(matches!(
            to_series(&recs, "nope", 1),
            Err(Error::UnknownField(_))
        ));
        assert_eq!(to_series::<KpRecord>(&[], "kp", 180), Err(Error::EmptyInput));
    }

    #[test]
    fn round_trip_examples() {
        let text = "2021-01-01T00:00Z,4.5,1.2,-0.3,2.1,389,5.4,120000\n2021-01-01T00:05Z,,,,,,,\n2021-01-01T00:15Z,0.1,,-0,1e-7,,,3\n";
        let r = parse_solar_wind(text).unwrap();
        assert_eq!(parse_solar_wind(&write_solar_wind(&r)).unwrap(), r);
    }
}
