//! Timestamps, calendar months in a house's timezone, and injectable clocks.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{Datelike, NaiveDate, TimeZone};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::EngineError;

pub const MS_PER_MINUTE: u64 = 60_000;
pub const MS_PER_HOUR: u64 = 3_600_000;
pub const MS_PER_DAY: u64 = 86_400_000;

/// Milliseconds since the Unix epoch, UTC.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const fn from_millis(ms: u64) -> Self {
        Timestamp(ms)
    }

    pub const fn millis(self) -> u64 {
        self.0
    }

    pub const fn plus(self, ms: u64) -> Self {
        Timestamp(self.0 + ms)
    }

    pub fn since(self, earlier: Timestamp) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A calendar month, e.g. `2024-03`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self, EngineError> {
        if !(1..=12).contains(&month) {
            return Err(EngineError::InvalidMonth(format!("{year}-{month}")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn of_date(date: NaiveDate) -> Self {
        YearMonth {
            year: date.year(),
            month: date.month(),
        }
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            YearMonth {
                year: self.year + 1,
                month: 1,
            }
        } else {
            YearMonth {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    pub fn pred(self) -> Self {
        if self.month == 1 {
            YearMonth {
                year: self.year - 1,
                month: 12,
            }
        } else {
            YearMonth {
                year: self.year,
                month: self.month - 1,
            }
        }
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    pub fn last_day(self) -> NaiveDate {
        self.succ().first_day().pred_opt().expect("valid date")
    }

    pub fn days(self) -> u32 {
        self.last_day().day()
    }

    pub fn contains(self, date: NaiveDate) -> bool {
        YearMonth::of_date(date) == self
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EngineError::InvalidMonth(s.to_string());
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Month and day arithmetic in a house's IANA timezone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calendar {
    tz: Tz,
}

impl Default for Calendar {
    fn default() -> Self {
        Calendar { tz: Tz::UTC }
    }
}

impl Calendar {
    pub fn new(timezone: &str) -> Result<Self, EngineError> {
        let tz = timezone
            .parse::<Tz>()
            .map_err(|_| EngineError::ConfigInvalid {
                path: "timezone".into(),
                message: format!("unknown IANA timezone {timezone:?}"),
            })?;
        Ok(Calendar { tz })
    }

    pub fn timezone(&self) -> &'static str {
        self.tz.name()
    }

    pub fn date_of(&self, at: Timestamp) -> NaiveDate {
        self.tz
            .timestamp_millis_opt(at.0 as i64)
            .single()
            .expect("millisecond timestamps are unambiguous")
            .date_naive()
    }

    pub fn month_of(&self, at: Timestamp) -> YearMonth {
        YearMonth::of_date(self.date_of(at))
    }

    /// Start of the local day. Falls forward an hour at a time when local
    /// midnight does not exist.
    pub fn day_start(&self, date: NaiveDate) -> Timestamp {
        let mut naive = date.and_hms_opt(0, 0, 0).expect("midnight");
        for _ in 0..24 {
            if let Some(dt) = self.tz.from_local_datetime(&naive).earliest() {
                return Timestamp(dt.timestamp_millis().max(0) as u64);
            }
            naive += chrono::Duration::hours(1);
        }
        unreachable!("no valid local hour on {date}")
    }

    pub fn month_start(&self, month: YearMonth) -> Timestamp {
        self.day_start(month.first_day())
    }

    pub fn month_end(&self, month: YearMonth) -> Timestamp {
        self.month_start(month.succ())
    }

    pub fn month_len_ms(&self, month: YearMonth) -> u64 {
        self.month_end(month).0 - self.month_start(month).0
    }

    /// Elapsed time between `from` and `to` measured in months: each
    /// overlapped month contributes `overlap / month length`.
    pub fn month_fraction(&self, from: Timestamp, to: Timestamp) -> f64 {
        if to <= from {
            return 0.0;
        }
        let mut total = 0.0;
        let mut month = self.month_of(from);
        let mut cursor = from;
        while cursor < to {
            let end = self.month_end(month);
            let seg_end = end.min(to);
            total += (seg_end.0 - cursor.0) as f64 / self.month_len_ms(month) as f64;
            cursor = seg_end;
            month = month.succ();
        }
        total
    }

    /// Milliseconds of `[from, to)` that fall inside `month`.
    pub fn overlap_ms(&self, month: YearMonth, from: Timestamp, to: Option<Timestamp>) -> u64 {
        let start = self.month_start(month).max(from);
        let end = match to {
            Some(t) => self.month_end(month).min(t),
            None => self.month_end(month),
        };
        end.0.saturating_sub(start.0)
    }
}

/// Source of "now". Engines receive timestamps explicitly; clocks are used by
/// the service and simulation layers to supply them.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        let ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Timestamp(ms)
    }
}

/// Simulated clock. Never moves backward: setting an earlier time is ignored.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(at: Timestamp) -> Self {
        ManualClock(AtomicU64::new(at.0))
    }

    pub fn set(&self, at: Timestamp) {
        self.0.fetch_max(at.0, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) -> Timestamp {
        Timestamp(self.0.fetch_add(ms, Ordering::SeqCst) + ms)
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        Timestamp(self.0.load(Ordering::SeqCst))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utc_ms(y: i32, m: u32, d: u32) -> Timestamp {
        Calendar::default().day_start(NaiveDate::from_ymd_opt(y, m, d).unwrap())
    }

    #[test]
    fn month_boundaries_utc() {
        let cal = Calendar::default();
        let jan = YearMonth::new(2024, 1).unwrap();
        assert_eq!(cal.month_len_ms(jan), 31 * MS_PER_DAY);
        assert_eq!(cal.month_len_ms(YearMonth::new(2024, 2).unwrap()), 29 * MS_PER_DAY);
        assert_eq!(cal.month_of(utc_ms(2024, 2, 1)), jan.succ());
        assert_eq!(cal.month_of(Timestamp(utc_ms(2024, 2, 1).0 - 1)), jan);
    }

    #[test]
    fn month_boundaries_follow_local_time() {
        let la = Calendar::new("America/Los_Angeles").unwrap();
        let mar = YearMonth::new(2024, 3).unwrap();
        // March 2024 loses an hour to DST in Los Angeles.
        assert_eq!(la.month_len_ms(mar), 31 * MS_PER_DAY - MS_PER_HOUR);
        let start = la.month_start(mar);
        assert_eq!(start.0, utc_ms(2024, 3, 1).0 + 8 * MS_PER_HOUR);
    }

    #[test]
    fn month_fraction_spans_months() {
        let cal = Calendar::default();
        let from = utc_ms(2024, 1, 16);
        let to = utc_ms(2024, 2, 15);
        let f = cal.month_fraction(from, to);
        let expected = 16.0 / 31.0 + 14.0 / 29.0;
        assert!((f - expected).abs() < 1e-12);
        assert_eq!(cal.month_fraction(to, from), 0.0);
    }

    #[test]
    fn year_month_parse_and_order() {
        let m: YearMonth = "2023-12".parse().unwrap();
        assert_eq!(m.succ().to_string(), "2024-01");
        assert_eq!(m.succ().pred(), m);
        assert!("2023-13".parse::<YearMonth>().is_err());
        assert!("nope".parse::<YearMonth>().is_err());
    }

    #[test]
    fn manual_clock_never_goes_back() {
        let c = ManualClock::new(Timestamp(100));
        c.set(Timestamp(50));
        assert_eq!(c.now(), Timestamp(100));
        assert_eq!(c.advance(10), Timestamp(110));
    }

    #[test]
    fn unknown_timezone_rejected() {
        assert!(matches!(
            Calendar::new("Mars/Olympus"),
            Err(EngineError::ConfigInvalid { .. })
        ));
    }
}
