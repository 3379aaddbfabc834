use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Mission clock reading at 10 ms resolution, counted from midnight.
///
/// Rendered as `HH:MM:SS.cc`, e.g. `14:49:47.16`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_centis(centis: i64) -> Self {
        Timestamp(centis)
    }

    pub const fn centis(self) -> i64 {
        self.0
    }

    pub fn from_hms(hours: i64, minutes: i64, seconds: i64, centis: i64) -> Self {
        Timestamp(((hours * 60 + minutes) * 60 + seconds) * 100 + centis)
    }

    /// Offset by a duration in seconds, rounded to the nearest 10 ms.
    pub fn add_seconds(self, seconds: f64) -> Self {
        Timestamp(self.0 + (seconds * 100.0).round() as i64)
    }

    pub fn add_centis(self, centis: i64) -> Self {
        Timestamp(self.0 + centis)
    }

    pub fn seconds_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 / 100.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let total = self.0.unsigned_abs();
        let centis = total % 100;
        let secs = total / 100;
        write!(
            f,
            "{sign}{:02}:{:02}:{:02}.{:02}",
            secs / 3600,
            (secs / 60) % 60,
            secs % 60,
            centis
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid timestamp `{0}`, expected HH:MM:SS.cc")]
pub struct TimestampParseError(pub String);

impl FromStr for Timestamp {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || TimestampParseError(s.to_string());
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (clock, frac) = match body.split_once('.') {
            Some((clock, frac)) => (clock, Some(frac)),
            None => (body, None),
        };
        let parts: Vec<&str> = clock.split(':').collect();
        if parts.len() != 3 {
            return Err(err());
        }
        let field = |p: &str| -> Result<i64, TimestampParseError> {
            if p.is_empty() || p.len() > 6 || !p.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            p.parse::<i64>().map_err(|_| err())
        };
        let hours = field(parts[0])?;
        let minutes = field(parts[1])?;
        let seconds = field(parts[2])?;
        if minutes >= 60 || seconds >= 60 {
            return Err(err());
        }
        let centis = match frac {
            None => 0,
            Some(f) if f.len() == 1 => field(f)? * 10,
            Some(f) if f.len() == 2 => field(f)?,
            Some(_) => return Err(err()),
        };
        let t = Timestamp::from_hms(hours, minutes, seconds, centis);
        Ok(if negative { Timestamp(-t.0) } else { t })
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_like_mission_clock() {
        let t = Timestamp::from_hms(14, 49, 47, 16);
        assert_eq!(t.to_string(), "14:49:47.16");
        assert_eq!("14:49:47.16".parse::<Timestamp>().unwrap(), t);
    }

    #[test]
    fn parses_single_digit_fraction() {
        assert_eq!(
            "00:00:01.5".parse::<Timestamp>().unwrap(),
            Timestamp::from_centis(150)
        );
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "14:49", "14:60:00.00", "aa:bb:cc", "14:49:47.123", "1:2:3.x"] {
            assert!(bad.parse::<Timestamp>().is_err(), "{bad}");
        }
    }

    #[test]
    fn add_seconds_rounds_to_centis() {
        let t = Timestamp::from_hms(14, 49, 0, 0).add_seconds(47.164);
        assert_eq!(t.to_string(), "14:49:47.16");
    }
}
