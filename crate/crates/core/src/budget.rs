//! Electric-sector carbon budgets from economy-wide emission trajectories.
//!
//! Emissions are linearly interpolated between anchor years, multiplied by an
//! (also interpolated) electric-sector share, and summed over whole years with
//! the left-point rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First year of the pledge window.
pub const PLEDGE_START: i32 = 2019;
/// Year splitting the pledge window into its two periods.
pub const PLEDGE_SPLIT: i32 = 2030;
/// End of the pledge window (exclusive).
pub const PLEDGE_END: i32 = 2050;

const T_PER_MT: f64 = 1e6;

/// Economy-wide emissions (MtCO2e) and the electric-sector share over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionsTrajectory {
    pub anchors: Vec<(i32, f64)>,
    pub sector_share: Vec<(i32, f64)>,
}

fn piecewise_linear(points: &[(i32, f64)], year: i32) -> Result<f64> {
    let (first, last) = match (points.first(), points.last()) {
        (Some(f), Some(l)) => (f.0, l.0),
        _ => return Err(Error::InvalidTrajectory("no anchors".into())),
    };
    if year < first || year > last {
        return Err(Error::YearOutOfSpan { year, first, last });
    }
    let seg = points
        .windows(2)
        .find(|w| year >= w[0].0 && year <= w[1].0);
    match seg {
        Some(w) => {
            let (y0, v0) = w[0];
            let (y1, v1) = w[1];
            if year == y1 {
                return Ok(v1);
            }
            let frac = f64::from(year - y0) / f64::from(y1 - y0);
            Ok(v0 + frac * (v1 - v0))
        }
        // single anchor
        None => Ok(points[0].1),
    }
}

impl EmissionsTrajectory {
    pub fn new(anchors: Vec<(i32, f64)>, sector_share: Vec<(i32, f64)>) -> Result<Self> {
        let traj = Self {
            anchors,
            sector_share,
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<()> {
        for (label, points) in [("anchors", &self.anchors), ("sector_share", &self.sector_share)] {
            if points.is_empty() {
                return Err(Error::InvalidTrajectory(format!("{label} is empty")));
            }
            if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::InvalidTrajectory(format!(
                    "{label} years must be strictly increasing"
                )));
            }
        }
        if self.anchors.iter().any(|&(_, e)| !(e >= 0.0)) {
            return Err(Error::InvalidTrajectory("emissions must be nonnegative".into()));
        }
        if self
            .sector_share
            .iter()
            .any(|&(_, s)| !(0.0..=1.0).contains(&s))
        {
            return Err(Error::InvalidTrajectory("shares must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Economy-wide emissions in `year`, MtCO2e.
    pub fn interpolate(&self, year: i32) -> Result<f64> {
        piecewise_linear(&self.anchors, year)
    }

    /// Electric-sector share in `year`.
    pub fn share(&self, year: i32) -> Result<f64> {
        piecewise_linear(&self.sector_share, year)
    }

    /// Sector emissions summed over years in `[start, end)`, MtCO2e.
    pub fn sector_budget(&self, start: i32, end: i32) -> Result<f64> {
        if start >= end {
            return Err(Error::EmptyWindow { start, end });
        }
        // both ends must be inside the span even though `end` itself is excluded
        self.interpolate(end)?;
        self.share(end)?;
        (start..end).try_fold(0.0, |acc, year| {
            Ok(acc + self.interpolate(year)? * self.share(year)?)
        })
    }

    /// Sector budget for the whole pledge window, in tCO2e.
    pub fn pledge_cap(&self) -> Result<f64> {
        let (first, second) = self.pledge_periods()?;
        Ok((first + second) * T_PER_MT)
    }

    /// The two pledge-period budgets, MtCO2e.
    pub fn pledge_periods(&self) -> Result<(f64, f64)> {
        Ok((
            self.sector_budget(PLEDGE_START, PLEDGE_SPLIT)?,
            self.sector_budget(PLEDGE_SPLIT, PLEDGE_END)?,
        ))
    }

    /// Trajectory bundled with the stylized dataset: a rise to the 2030 level
    /// of 131 MtCO2e, then a linear decline to 51.5 MtCO2e in 2050, with a
    /// sector share of 30% easing after 2030. The anchors are tuned so that
    /// the two periods sum to 398.15 and 532.95 MtCO2e.
    pub fn bundled() -> Self {
        Self {
            anchors: vec![(2019, 112.03), (2030, 131.0), (2050, 51.5)],
            sector_share: vec![(2019, 0.30), (2030, 0.30), (2050, 0.264_869)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flat(e: f64, share: f64) -> EmissionsTrajectory {
        EmissionsTrajectory::new(vec![(2000, e), (2100, e)], vec![(2000, share), (2100, share)])
            .unwrap()
    }

    #[test]
    fn constant_segment() {
        let t = EmissionsTrajectory::new(vec![(2020, 100.0), (2030, 100.0)], vec![(2020, 1.0), (2030, 1.0)])
            .unwrap();
        assert_eq!(t.interpolate(2025).unwrap(), 100.0);
    }

    #[test]
    fn midpoint_of_decline() {
        let t = EmissionsTrajectory::new(vec![(2030, 131.0), (2050, 51.5)], vec![(2030, 0.3), (2050, 0.3)])
            .unwrap();
        assert!((t.interpolate(2040).unwrap() - 91.25).abs() < 1e-12);
        assert_eq!(t.interpolate(2030).unwrap(), 131.0);
        assert_eq!(t.interpolate(2050).unwrap(), 51.5);
    }

    #[test]
    fn out_of_span() {
        let t = EmissionsTrajectory::bundled();
        assert!(matches!(t.interpolate(2018), Err(Error::YearOutOfSpan { .. })));
        assert!(matches!(t.sector_budget(2040, 2051), Err(Error::YearOutOfSpan { .. })));
        assert!(matches!(t.sector_budget(2030, 2030), Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn rectangle() {
        let t = flat(100.0, 0.3);
        assert!((t.sector_budget(2020, 2030).unwrap() - 300.0).abs() < 1e-9);
    }

    #[test]
    fn bundled_reproduces_period_budgets() {
        let t = EmissionsTrajectory::bundled();
        let (a, b) = t.pledge_periods().unwrap();
        assert!((a - 398.15).abs() / 398.15 < 0.01, "first period {a}");
        assert!((b - 532.95).abs() / 532.95 < 0.01, "second period {b}");
        let cap = t.pledge_cap().unwrap();
        assert!((cap - 931.1e6).abs() / 931.1e6 < 0.01);
    }

    #[test]
    fn zero_trajectory() {
        assert_eq!(flat(0.0, 0.3).pledge_cap().unwrap(), 0.0);
    }

    #[test]
    fn unit_share_is_economy_wide() {
        let t = EmissionsTrajectory::new(vec![(2019, 112.0), (2050, 50.0)], vec![(2019, 1.0), (2050, 1.0)])
            .unwrap();
        let direct: f64 = (2019..2050).map(|y| t.interpolate(y).unwrap()).sum();
        assert!((t.pledge_cap().unwrap() - direct * 1e6).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_anchors() {
        assert!(EmissionsTrajectory::new(vec![(2030, 1.0), (2020, 1.0)], vec![(2020, 0.3)]).is_err());
        assert!(EmissionsTrajectory::new(vec![(2020, 1.0)], vec![(2020, 1.3)]).is_err());
    }

    proptest! {
        #[test]
        fn additive(a in 2019i32..2030, gap1 in 1i32..10, gap2 in 1i32..10) {
            let t = EmissionsTrajectory::bundled();
            let b = a + gap1;
            let c = b + gap2;
            let whole = t.sector_budget(a, c).unwrap();
            let parts = t.sector_budget(a, b).unwrap() + t.sector_budget(b, c).unwrap();
            prop_assert!((whole - parts).abs() < 1e-9);
        }

        #[test]
        fn monotone_and_scaling(bump in 0.0f64..20.0, k in 0.0f64..1.0) {
            let base = EmissionsTrajectory::bundled();
            let mut bigger = base.clone();
            for a in &mut bigger.anchors { a.1 += bump; }
            prop_assert!(bigger.pledge_cap().unwrap() >= base.pledge_cap().unwrap());
            let mut scaled = base.clone();
            for s in &mut scaled.sector_share { s.1 *= k; }
            let expect = base.pledge_cap().unwrap() * k;
            prop_assert!((scaled.pledge_cap().unwrap() - expect).abs() <= 1e-6 * (1.0 + expect));
        }
    }
}
