//! Wall clock that can be pinned for reproducible outputs.

use chrono::{DateTime, TimeZone, Utc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    System,
    Fixed(DateTime<Utc>),
}

impl Clock {
    /// `Fixed` at `SOURCE_DATE_EPOCH` when that variable holds a valid
    /// timestamp, `System` otherwise.
    pub fn from_env() -> Self {
        std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|v| v.trim().parse::<i64>().ok())
            .and_then(|s| Utc.timestamp_opt(s, 0).single())
            .map(Clock::Fixed)
            .unwrap_or(Clock::System)
    }

    pub fn epoch() -> Self {
        Clock::Fixed(DateTime::UNIX_EPOCH)
    }

    pub fn now(&self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Fixed(t) => *t,
        }
    }
}
