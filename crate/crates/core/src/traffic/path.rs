use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One arrival: a time in `(0, window]` and the work it brings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub mark: f64,
}

/// A realized source or aggregate on `[0, window]`.
///
/// `A(0,t)` is the total mark of events with time `<= t`; it is nondecreasing,
/// right-continuous and zero at the origin. Times of a single source are
/// strictly increasing. Superposed paths may contain ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedPath {
    window: f64,
    events: Vec<Event>,
}

impl MarkedPath {
    pub fn new(window: f64, events: Vec<Event>) -> Result<Self> {
        if !(window.is_finite() && window > 0.0) {
            return Err(Error::Usage(format!(
                "path window must be positive, got {window}"
            )));
        }
        let mut prev = 0.0;
        for e in &events {
            if !(e.time > 0.0 && e.time <= window) {
                return Err(Error::Usage(format!(
                    "event time {} outside (0, {window}]",
                    e.time
                )));
            }
            if e.time < prev {
                return Err(Error::Usage("event times must be ordered".into()));
            }
            if !(e.mark.is_finite() && e.mark > 0.0) {
                return Err(Error::Usage(format!(
                    "event mark {} must be positive",
                    e.mark
                )));
            }
            prev = e.time;
        }
        Ok(Self { window, events })
    }

    /// Internal constructor for sampler output, which is valid by construction.
    pub(crate) fn from_sorted(window: f64, events: Vec<Event>) -> Self {
        debug_assert!(events.windows(2).all(|w| w[0].time <= w[1].time));
        Self { window, events }
    }

    pub fn empty(window: f64) -> Result<Self> {
        Self::new(window, Vec::new())
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// True when event times are strictly increasing.
    pub fn is_simple(&self) -> bool {
        self.events.windows(2).all(|w| w[0].time < w[1].time)
    }

    pub fn total_mass(&self) -> f64 {
        self.events.iter().map(|e| e.mark).sum()
    }

    /// A(0, t).
    pub fn cumulative(&self, t: f64) -> f64 {
        let end = self.events.partition_point(|e| e.time <= t);
        self.events[..end].iter().map(|e| e.mark).sum()
    }

    /// A(s, t) = A(0, t) - A(0, s).
    pub fn increment(&self, s: f64, t: f64) -> f64 {
        let lo = self.events.partition_point(|e| e.time <= s);
        let hi = self.events.partition_point(|e| e.time <= t);
        if hi <= lo {
            return 0.0;
        }
        self.events[lo..hi].iter().map(|e| e.mark).sum()
    }

    /// Number of events with time `<= t`.
    pub fn count_until(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }
}
