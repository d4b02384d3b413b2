use chrono::{Datelike, Timelike};

use crate::data::{DateRange, HourlySeries};

use super::FeatureError;

/// Mean temperature per (month, hour) over the training range.
///
/// Forward-looking temperature features must not peek at observed weather,
/// so forecasts use these per-calendar-slot training averages instead. A
/// (month, hour) slot the training range never visited borrows the nearest
/// visited month at that hour (circular calendar distance, earlier month on
/// ties); lookup errors only when no month has data for that hour.
#[derive(Debug, Clone, PartialEq)]
pub struct Climatology {
    city: String,
    means: Vec<Option<f64>>,
}

impl Climatology {
    /// Average training-range observations grouped by (month, hour).
    pub fn fit(temps: &HourlySeries, train: DateRange) -> Self {
        let mut sums = vec![0.0f64; 12 * 24];
        let mut counts = vec![0usize; 12 * 24];
        for i in 0..temps.len() {
            let ts = temps.timestamp(i);
            let date = ts.date_naive();
            if !train.contains(date) {
                continue;
            }
            let slot = slot(date.month(), ts.hour());
            sums[slot] += temps.values()[i];
            counts[slot] += 1;
        }
        let means = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| if c > 0 { Some(s / c as f64) } else { None })
            .collect();
        Self { city: temps.label().to_string(), means }
    }

    pub fn city(&self) -> &str {
        &self.city
    }

    /// Training-range mean for (month 1-12, hour 0-23), borrowing the
    /// nearest visited month when the slot itself is empty.
    pub fn value(&self, month: u32, hour: u32) -> Result<f64, FeatureError> {
        if let Some(v) = self.means[slot(month, hour)] {
            return Ok(v);
        }
        for dist in 1..=6u32 {
            for candidate in [(month + 12 - dist - 1) % 12 + 1, (month + dist - 1) % 12 + 1] {
                if let Some(v) = self.means[slot(candidate, hour)] {
                    return Ok(v);
                }
            }
        }
        Err(FeatureError::NoObservations { month, hour })
    }
}

fn slot(month: u32, hour: u32) -> usize {
    debug_assert!((1..=12).contains(&month) && hour < 24);
    (month as usize - 1) * 24 + hour as usize
}
