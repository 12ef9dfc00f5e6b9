//! Equal-duration time bins over the corpus span.

use crate::error::{Error, Result};
use chrono::{Days, NaiveDate};

/// A partition of `[span_start, span_end]` into `bins` half-open intervals
/// `[edges[b], edges[b+1])`; the final bin also includes `span_end` itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeBinning {
    pub span_start: NaiveDate,
    pub span_end: NaiveDate,
    pub edges: Vec<NaiveDate>,
}

impl TimeBinning {
    /// Build `bins` bins of equal duration (within one day of rounding).
    pub fn equal(span_start: NaiveDate, span_end: NaiveDate, bins: u16) -> Result<Self> {
        if bins == 0 {
            return Err(Error::Config("bin count must be positive".into()));
        }
        let total_days = (span_end - span_start).num_days();
        if total_days < bins as i64 {
            return Err(Error::Config(format!(
                "span {span_start}..{span_end} too short for {bins} bins"
            )));
        }
        let t = bins as i64;
        let edges: Vec<NaiveDate> = (0..=t)
            .map(|i| {
                let offset = (i * total_days + t / 2) / t;
                span_start + Days::new(offset as u64)
            })
            .collect();
        Ok(TimeBinning {
            span_start,
            span_end,
            edges,
        })
    }

    pub fn bins(&self) -> u16 {
        (self.edges.len() - 1) as u16
    }

    /// Bin index for `date`, or an out-of-span error naming `id`.
    pub fn assign(&self, id: &str, date: NaiveDate) -> Result<u16> {
        if date < self.span_start || date > self.span_end {
            return Err(Error::OutOfSpan {
                id: id.to_string(),
                date,
                start: self.span_start,
                end: self.span_end,
            });
        }
        let t = self.bins() as i64;
        let total = (self.span_end - self.span_start).num_days();
        let mut b = ((date - self.span_start).num_days() * t / total).min(t - 1);
        // The proportional guess can be off by one around rounded edges.
        while b > 0 && date < self.edges[b as usize] {
            b -= 1;
        }
        while b + 1 < t && date >= self.edges[b as usize + 1] {
            b += 1;
        }
        Ok(b as u16)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn paper_span() -> TimeBinning {
        TimeBinning::equal(d(1827, 3, 1), d(1865, 12, 31), 10).unwrap()
    }

    #[test]
    fn left_edge_is_bin_zero() {
        assert_eq!(paper_span().assign("a", d(1827, 3, 1)).unwrap(), 0);
    }

    #[test]
    fn span_end_maps_to_last_bin() {
        assert_eq!(paper_span().assign("a", d(1865, 12, 31)).unwrap(), 9);
    }

    #[test]
    fn interior_date_matches_linear_scan_oracle() {
        let binning = paper_span();
        let date = d(1846, 7, 1);
        let fast = binning.assign("a", date).unwrap();
        // Independent route: scan the edges directly.
        let mut oracle = binning.bins() - 1;
        for b in 0..binning.bins() as usize {
            if date >= binning.edges[b] && date < binning.edges[b + 1] {
                oracle = b as u16;
                break;
            }
        }
        assert_eq!(fast, oracle);
    }

    #[test]
    fn every_in_span_day_gets_exactly_one_bin() {
        let binning = TimeBinning::equal(d(1830, 1, 1), d(1831, 1, 7), 7).unwrap();
        let mut day = binning.span_start;
        while day <= binning.span_end {
            let fast = binning.assign("x", day).unwrap();
            let mut hits = 0;
            for b in 0..binning.bins() as usize {
                let in_half_open = day >= binning.edges[b] && day < binning.edges[b + 1];
                let in_last_closed =
                    b + 1 == binning.bins() as usize && day == *binning.edges.last().unwrap();
                if in_half_open || in_last_closed {
                    hits += 1;
                    assert_eq!(fast, b as u16);
                }
            }
            assert_eq!(hits, 1, "day {day} not covered exactly once");
            day = day + Days::new(1);
        }
    }

    #[test]
    fn durations_equal_within_one_day() {
        let binning = paper_span();
        let durations: Vec<i64> = binning
            .edges
            .windows(2)
            .map(|w| (w[1] - w[0]).num_days())
            .collect();
        let min = durations.iter().min().unwrap();
        let max = durations.iter().max().unwrap();
        assert!(max - min <= 1, "durations {durations:?}");
    }

    #[test]
    fn out_of_span_is_fatal_with_id() {
        let err = paper_span().assign("doc-7", d(1900, 1, 1)).unwrap_err();
        match err {
            Error::OutOfSpan { id, .. } => assert_eq!(id, "doc-7"),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
