use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use thiserror::Error;

pub const MICROS_PER_SEC: u64 = 1_000_000;

/// Simulated time in integer microseconds since the start of the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TimeParseError {
    #[error("empty time literal")]
    Empty,
    #[error("invalid time literal `{0}`")]
    Invalid(String),
    #[error("time literal `{0}` is finer than one microsecond")]
    TooPrecise(String),
    #[error("time literal `{0}` is out of range")]
    Overflow(String),
}

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * MICROS_PER_SEC)
    }

    /// Rounds to the nearest microsecond; negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if s.is_nan() || s <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime((s * MICROS_PER_SEC as f64).round() as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SEC as f64
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }

    pub fn checked_sub(self, other: SimTime) -> Option<SimTime> {
        self.0.checked_sub(other.0).map(SimTime)
    }

    /// Parses a non-negative decimal number of seconds ("90", "0.025", "1.5e0" is rejected)
    /// into an exact microsecond count.
    pub fn parse_decimal_secs(text: &str) -> Result<SimTime, TimeParseError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(TimeParseError::Empty);
        }
        let (int_part, frac_part) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty()) || !digits(int_part) || !digits(frac_part) {
            return Err(TimeParseError::Invalid(text.to_string()));
        }
        let significant = frac_part.trim_end_matches('0');
        if significant.len() > 6 {
            return Err(TimeParseError::TooPrecise(text.to_string()));
        }
        let whole: u64 = if int_part.is_empty() {
            0
        } else {
            int_part
                .parse()
                .map_err(|_| TimeParseError::Overflow(text.to_string()))?
        };
        let mut frac: u64 = 0;
        for (i, b) in significant.bytes().enumerate() {
            frac += u64::from(b - b'0') * 10u64.pow(5 - i as u32);
        }
        whole
            .checked_mul(MICROS_PER_SEC)
            .and_then(|w| w.checked_add(frac))
            .map(SimTime)
            .ok_or_else(|| TimeParseError::Overflow(text.to_string()))
    }

    /// Shortest exact decimal rendering in seconds: 25 ms -> "0.025", 90 s -> "90".
    pub fn to_decimal_secs(self) -> String {
        let whole = self.0 / MICROS_PER_SEC;
        let frac = self.0 % MICROS_PER_SEC;
        if frac == 0 {
            return whole.to_string();
        }
        let frac = format!("{frac:06}");
        format!("{whole}.{}", frac.trim_end_matches('0'))
    }
}

/// Fixed six-decimal seconds, the format used in every log line.
impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / MICROS_PER_SEC, self.0 % MICROS_PER_SEC)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        *self = *self + rhs;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        self.saturating_sub(rhs)
    }
}
