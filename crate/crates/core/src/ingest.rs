//! Tweet corpus and event-series ingestion.
//!
//! Tweets arrive as JSON lines (`text`, `ts`, optional `loc` and `lang`) and are
//! bucketed into UTC calendar days of a fixed [`Timeframe`]. The ground-truth
//! event series (GSR) is a `date,count` CSV densified into a [`GsrVector`].

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive range of UTC calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeframe {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Timeframe {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidArgument(format!(
                "timeframe end {end} precedes start {start}"
            )));
        }
        Ok(Timeframe { start, end })
    }

    /// Timeframe of `days` days beginning at `start`.
    pub fn with_days(start: NaiveDate, days: usize) -> Result<Self> {
        if days == 0 {
            return Err(Error::InvalidArgument("timeframe must span at least one day".into()));
        }
        let end = start + chrono::Duration::days(days as i64 - 1);
        Self::new(start, end)
    }

    pub fn n_days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<DayIndex> {
        if date < self.start || date > self.end {
            return None;
        }
        Some(DayIndex((date - self.start).num_days() as u32))
    }

    pub fn date_of(&self, day: DayIndex) -> Option<NaiveDate> {
        if day.index() >= self.n_days() {
            return None;
        }
        Some(self.start + chrono::Duration::days(day.0 as i64))
    }
}

/// Day offset from the start of a timeframe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DayIndex(pub u32);

impl DayIndex {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTweet {
    pub text: String,
    pub timestamp: DateTime<Utc>,
    pub location_tag: Option<String>,
    pub lang_hint: Option<String>,
}

#[derive(Deserialize)]
struct TweetRecord {
    text: String,
    ts: String,
    #[serde(default)]
    loc: Option<String>,
    #[serde(default)]
    lang: Option<String>,
}

/// Parses an ISO-8601 instant. Offsets are honoured; naive timestamps are UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc());
        }
    }
    None
}

/// Case-insensitive place-name filter applied to the pre-resolved location tag.
#[derive(Debug, Clone, Default)]
pub struct GeoFilter {
    places: Vec<String>,
}

impl GeoFilter {
    pub fn new<I, S>(places: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        GeoFilter {
            places: places.into_iter().map(|p| p.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }

    /// An empty filter accepts everything; otherwise a tweet without a location is rejected.
    pub fn accepts(&self, location: Option<&str>) -> bool {
        if self.places.is_empty() {
            return true;
        }
        match location {
            Some(loc) => {
                let loc = loc.to_lowercase();
                self.places.iter().any(|p| loc.contains(p.as_str()))
            }
            None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub read: u64,
    pub yielded: u64,
    pub skipped_parse: u64,
    pub skipped_time: u64,
    pub skipped_geo: u64,
}

/// Streaming reader over a JSON-lines tweet file.
///
/// Lines that fail to parse are counted in the summary and skipped.
pub struct TweetReader<R> {
    lines: std::io::Lines<R>,
    timeframe: Timeframe,
    geo: GeoFilter,
    summary: IngestSummary,
}

impl TweetReader<BufReader<File>> {
    pub fn open(path: &Path, timeframe: Timeframe, geo: GeoFilter) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(BufReader::new(file), timeframe, geo))
    }
}

impl<R: BufRead> TweetReader<R> {
    pub fn new(reader: R, timeframe: Timeframe, geo: GeoFilter) -> Self {
        TweetReader {
            lines: reader.lines(),
            timeframe,
            geo,
            summary: IngestSummary::default(),
        }
    }

    pub fn summary(&self) -> IngestSummary {
        self.summary
    }

    fn classify(&mut self, line: &str) -> Option<(DayIndex, RawTweet)> {
        let record: TweetRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(_) => {
                self.summary.skipped_parse += 1;
                return None;
            }
        };
        let Some(timestamp) = parse_timestamp(&record.ts) else {
            self.summary.skipped_parse += 1;
            return None;
        };
        let Some(day) = self.timeframe.day_index(timestamp.date_naive()) else {
            self.summary.skipped_time += 1;
            return None;
        };
        if !self.geo.accepts(record.loc.as_deref()) {
            self.summary.skipped_geo += 1;
            return None;
        }
        self.summary.yielded += 1;
        Some((
            day,
            RawTweet {
                text: record.text,
                timestamp,
                location_tag: record.loc,
                lang_hint: record.lang,
            },
        ))
    }
}

impl<R: BufRead> Iterator for TweetReader<R> {
    type Item = Result<(DayIndex, RawTweet)>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(Error::Parse(format!("tweet stream: {e}")))),
            };
            self.summary.read += 1;
            if let Some(item) = self.classify(&line) {
                return Some(Ok(item));
            }
        }
    }
}

/// Daily event counts over a timeframe; absent days are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GsrVector {
    counts: Vec<u64>,
}

impl GsrVector {
    pub fn new(counts: Vec<u64>) -> Self {
        GsrVector { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

pub fn load_gsr(path: &Path, timeframe: Timeframe) -> Result<GsrVector> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_gsr(file, timeframe)
}

/// Reads a `date,count` CSV into a dense vector.
///
/// Duplicate dates and negative counts are fatal; dates outside the timeframe
/// are skipped with a warning.
pub fn read_gsr<R: Read>(reader: R, timeframe: Timeframe) -> Result<GsrVector> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| Error::Parse(format!("GSR header: {e}")))?
        .clone();
    let date_col = headers.iter().position(|h| h == "date");
    let count_col = headers.iter().position(|h| h == "count");
    let (Some(date_col), Some(count_col)) = (date_col, count_col) else {
        return Err(Error::Parse("GSR header must contain `date,count`".into()));
    };

    let mut rows: BTreeMap<NaiveDate, i64> = BTreeMap::new();
    for (line, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("GSR row {}: {e}", line + 2)))?;
        let date_str = record.get(date_col).unwrap_or("");
        let count_str = record.get(count_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d")
            .map_err(|e| Error::Parse(format!("GSR row {}: bad date {date_str:?}: {e}", line + 2)))?;
        let count: i64 = count_str
            .parse()
            .map_err(|e| Error::Parse(format!("GSR row {}: bad count {count_str:?}: {e}", line + 2)))?;
        if count < 0 {
            return Err(Error::NegativeCount { date, count });
        }
        if rows.insert(date, count).is_some() {
            return Err(Error::DuplicateGsrDate(date));
        }
    }

    let mut counts = vec![0u64; timeframe.n_days()];
    for (date, count) in rows {
        match timeframe.day_index(date) {
            Some(day) => counts[day.index()] = count as u64,
            None => warn!("GSR date {date} lies outside the timeframe; skipped"),
        }
    }
    Ok(GsrVector::new(counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn tf() -> Timeframe {
        Timeframe::new(date("2017-03-01"), date("2017-03-05")).unwrap()
    }

    fn line(text: &str, ts: &str, loc: Option<&str>) -> String {
        serde_json::json!({ "text": text, "ts": ts, "loc": loc }).to_string()
    }

    #[test]
    fn timeframe_round_trips_every_day() {
        let tf = tf();
        assert_eq!(tf.n_days(), 5);
        for i in 0..5 {
            let d = tf.date_of(DayIndex(i)).unwrap();
            assert_eq!(tf.day_index(d), Some(DayIndex(i)));
        }
        assert_eq!(tf.date_of(DayIndex(5)), None);
        assert!(Timeframe::new(date("2017-03-05"), date("2017-03-01")).is_err());
    }

    #[test]
    fn filter_match_is_yielded() {
        let input = line("rally today", "2017-03-02T10:00:00Z", Some("Melbourne, VIC"));
        let mut reader = TweetReader::new(input.as_bytes(), tf(), GeoFilter::new(["melbourne"]));
        let (day, tweet) = reader.next().unwrap().unwrap();
        assert_eq!(day, DayIndex(1));
        assert_eq!(tweet.text, "rally today");
        assert!(reader.next().is_none());
    }

    #[test]
    fn day_before_start_is_excluded() {
        let input = [
            line("late", "2017-02-28T23:59:59Z", None),
            line("first", "2017-03-01T00:00:00Z", None),
            line("after", "2017-03-06T00:00:00Z", None),
        ]
        .join("\n");
        let mut reader = TweetReader::new(input.as_bytes(), tf(), GeoFilter::default());
        let got: Vec<_> = reader.by_ref().map(|r| r.unwrap().1.text).collect();
        assert_eq!(got, vec!["first"]);
        assert_eq!(reader.summary().skipped_time, 2);
    }

    #[test]
    fn offsets_are_converted_to_utc_days() {
        // 2017-03-02 01:00 at +10:00 is 2017-03-01 15:00 UTC.
        let input = line("x", "2017-03-02T01:00:00+10:00", None);
        let mut reader = TweetReader::new(input.as_bytes(), tf(), GeoFilter::default());
        assert_eq!(reader.next().unwrap().unwrap().0, DayIndex(0));
    }

    #[test]
    fn geo_filter_rejects_missing_location() {
        let f = GeoFilter::new(["Melbourne"]);
        assert!(f.accepts(Some("inner MELBOURNE")));
        assert!(!f.accepts(Some("Sydney")));
        assert!(!f.accepts(None));
        assert!(GeoFilter::default().accepts(None));
    }

    #[test]
    fn gsr_densifies_and_defaults_to_zero() {
        let csv = "date,count\n2017-03-04,1\n2017-03-01,2\n";
        assert_eq!(read_gsr(csv.as_bytes(), tf()).unwrap().counts(), &[2, 0, 0, 1, 0]);
        let empty = Timeframe::with_days(date("2017-03-01"), 3).unwrap();
        assert_eq!(read_gsr("date,count\n".as_bytes(), empty).unwrap().counts(), &[0, 0, 0]);
    }

    #[test]
    fn gsr_errors() {
        let dup = "date,count\n2017-03-01,1\n2017-03-01,2\n";
        assert!(matches!(read_gsr(dup.as_bytes(), tf()), Err(Error::DuplicateGsrDate(_))));
        let neg = "date,count\n2017-03-01,-1\n";
        assert!(matches!(read_gsr(neg.as_bytes(), tf()), Err(Error::NegativeCount { .. })));
        let outside = "date,count\n2016-01-01,4\n2017-03-05,3\n";
        assert_eq!(read_gsr(outside.as_bytes(), tf()).unwrap().counts(), &[0, 0, 0, 0, 3]);
    }
}
