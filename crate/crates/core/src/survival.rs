//! Survival, hazard and recruitment models.
//!
//! Time is measured in months throughout.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::error::{domain, Error, Result};

/// Piecewise-constant hazard on `[0, c_1), [c_1, c_2), ..., [c_m, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewise", into = "RawPiecewise")]
pub struct PiecewiseExponential {
    change_points: Vec<f64>,
    rates: Vec<f64>,
    /// Cumulative hazard at each change point.
    cum_at_change: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPiecewise {
    change_points: Vec<f64>,
    rates: Vec<f64>,
}

impl TryFrom<RawPiecewise> for PiecewiseExponential {
    type Error = Error;
    fn try_from(raw: RawPiecewise) -> Result<Self> {
        Self::new(raw.change_points, raw.rates)
    }
}

impl From<PiecewiseExponential> for RawPiecewise {
    fn from(p: PiecewiseExponential) -> Self {
        RawPiecewise {
            change_points: p.change_points,
            rates: p.rates,
        }
    }
}

impl PiecewiseExponential {
    pub fn new(change_points: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != change_points.len() + 1 {
            return Err(Error::InvalidModel(format!(
                "{} rates given for {} change points",
                rates.len(),
                change_points.len()
            )));
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::InvalidModel(format!("hazard rate {r} is not positive")));
        }
        let mut prev = 0.0;
        for &c in &change_points {
            if !(c.is_finite() && c > prev) {
                return Err(Error::InvalidModel(
                    "change points must be positive and strictly increasing".into(),
                ));
            }
            prev = c;
        }
        let mut cum_at_change = Vec::with_capacity(change_points.len());
        let mut acc = 0.0;
        let mut start = 0.0;
        for (c, r) in change_points.iter().zip(&rates) {
            acc += r * (c - start);
            cum_at_change.push(acc);
            start = *c;
        }
        Ok(Self {
            change_points,
            rates,
            cum_at_change,
        })
    }

    /// Single exponential with the given hazard rate.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![rate])
    }

    /// Single exponential with the given median.
    pub fn from_median(median: f64) -> Result<Self> {
        Self::exponential(LN_2 / median)
    }

    /// Segments specified by their exponential medians, `rate = ln 2 / median`.
    pub fn from_medians(change_points: Vec<f64>, medians: &[f64]) -> Result<Self> {
        if let Some(m) = medians.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidModel(format!("median {m} is not positive")));
        }
        Self::new(change_points, medians.iter().map(|m| LN_2 / m).collect())
    }

    pub fn change_points(&self) -> &[f64] {
        &self.change_points
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    #[inline]
    fn segment(&self, t: f64) -> usize {
        // right-continuous: a change point belongs to the following segment
        self.change_points.partition_point(|&c| c <= t)
    }

    /// Cumulative hazard for `t >= 0` (unchecked).
    #[inline]
    pub fn cumulative_hazard_at(&self, t: f64) -> f64 {
        let j = self.segment(t);
        let (base, start) = if j == 0 {
            (0.0, 0.0)
        } else {
            (self.cum_at_change[j - 1], self.change_points[j - 1])
        };
        base + self.rates[j] * (t - start)
    }

    /// Hazard for `t >= 0` (unchecked).
    #[inline]
    pub fn hazard_at(&self, t: f64) -> f64 {
        self.rates[self.segment(t)]
    }

    /// Survival for `t >= 0` (unchecked).
    #[inline]
    pub fn survival_at(&self, t: f64) -> f64 {
        (-self.cumulative_hazard_at(t)).exp()
    }

    pub fn survival(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.survival_at(t))
    }

    pub fn hazard(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.hazard_at(t))
    }

    /// Smallest `t` with `S(t) <= u`, for `u` in (0, 1].
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(domain(format!("survival probability {u} not in (0, 1]")));
        }
        Ok(self.quantile_unchecked(u))
    }

    /// Inverse of [`survival_at`](Self::survival_at) for `u` in (0, 1].
    #[inline]
    pub fn quantile_unchecked(&self, u: f64) -> f64 {
        let target = -u.ln();
        if target <= 0.0 {
            return 0.0;
        }
        // first change point whose cumulative hazard reaches the target
        let j = self.cum_at_change.partition_point(|&h| h < target);
        let (base, start) = if j == 0 {
            (0.0, 0.0)
        } else {
            (self.cum_at_change[j - 1], self.change_points[j - 1])
        };
        start + (target - base) / self.rates[j]
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        Err(domain(format!("time {t} is negative")))
    } else {
        Ok(())
    }
}

/// Recruitment with `P(R <= r) = (r / duration)^exponent` on `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRecruitment", into = "RawRecruitment")]
pub struct PowerRecruitment {
    duration: f64,
    exponent: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecruitment {
    duration: f64,
    #[serde(default = "one")]
    exponent: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawRecruitment> for PowerRecruitment {
    type Error = Error;
    fn try_from(raw: RawRecruitment) -> Result<Self> {
        Self::new(raw.duration, raw.exponent)
    }
}

impl From<PowerRecruitment> for RawRecruitment {
    fn from(p: PowerRecruitment) -> Self {
        RawRecruitment {
            duration: p.duration,
            exponent: p.exponent,
        }
    }
}

impl PowerRecruitment {
    pub fn new(duration: f64, exponent: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidModel(format!(
                "recruitment duration {duration} must be positive"
            )));
        }
        if !(exponent.is_finite() && exponent >= 1.0) {
            return Err(Error::InvalidModel(format!(
                "recruitment exponent {exponent} must be at least 1"
            )));
        }
        Ok(Self { duration, exponent })
    }

    pub fn uniform(duration: f64) -> Result<Self> {
        Self::new(duration, 1.0)
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Fraction of patients recruited by calendar time `r`.
    #[inline]
    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else if r >= self.duration {
            1.0
        } else if self.exponent == 1.0 {
            r / self.duration
        } else {
            (r / self.duration).powf(self.exponent)
        }
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(domain(format!("probability {u} not in [0, 1]")));
        }
        Ok(self.quantile_unchecked(u))
    }

    #[inline]
    pub fn quantile_unchecked(&self, u: f64) -> f64 {
        if self.exponent == 1.0 {
            self.duration * u
        } else {
            self.duration * u.powf(1.0 / self.exponent)
        }
    }
}

/// Treatment arm; the experimental arm is the one whose excess events form the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Control = 0,
    Experimental = 1,
}

impl Arm {
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(Arm::Control),
            1 => Ok(Arm::Experimental),
            _ => Err(Error::Input(format!("arm must be 0 or 1, got {i}"))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Arm::Control => Arm::Experimental,
            Arm::Experimental => Arm::Control,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub arm: Arm,
    pub dist: PiecewiseExponential,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn delayed() -> PiecewiseExponential {
        PiecewiseExponential::new(vec![4.0], vec![LN_2 / 8.0, LN_2 / 16.6]).unwrap()
    }

    #[test]
    fn exponential_median() {
        let m = PiecewiseExponential::from_median(8.0).unwrap();
        assert!((m.survival(8.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(m.survival(0.0).unwrap(), 1.0);
        assert!((m.quantile(0.5).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(m.quantile(1.0).unwrap(), 0.0);
    }

    #[test]
    fn two_piece_survival() {
        let expected = (-4.0 * LN_2 / 8.0 - 8.0 * LN_2 / 16.6).exp();
        let s = delayed().survival(12.0).unwrap();
        assert!((s - expected).abs() < 1e-15);
        assert!((s - 0.5063).abs() < 5e-5);
    }

    #[test]
    fn hazard_is_right_continuous() {
        let m = delayed();
        assert_eq!(m.hazard(3.9).unwrap(), LN_2 / 8.0);
        assert_eq!(m.hazard(4.0).unwrap(), LN_2 / 16.6);
        let single = PiecewiseExponential::exponential(0.3).unwrap();
        assert_eq!(single.hazard(5.0).unwrap(), 0.3);
    }

    #[test]
    fn two_piece_quantile_round_trip() {
        let m = delayed();
        let t = m.quantile(0.4).unwrap();
        assert!(t > 4.0);
        assert!((m.survival(t).unwrap() - 0.4).abs() < 1e-12);
        let closed = 4.0 + (0.5f64.sqrt() / 0.4).ln() * 16.6 / LN_2;
        assert!((t - closed).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        let m = delayed();
        assert!(matches!(m.survival(-1.0), Err(Error::Domain(_))));
        assert!(matches!(m.hazard(-0.1), Err(Error::Domain(_))));
        assert!(m.quantile(0.0).is_err());
        assert!(m.quantile(1.2).is_err());
        let r = PowerRecruitment::uniform(8.0).unwrap();
        assert!(r.quantile(-0.1).is_err());
        assert!(r.quantile(1.1).is_err());
    }

    #[test]
    fn invalid_models() {
        assert!(PiecewiseExponential::new(vec![4.0], vec![0.1]).is_err());
        assert!(PiecewiseExponential::new(vec![], vec![0.0]).is_err());
        assert!(PiecewiseExponential::new(vec![4.0, 4.0], vec![0.1, 0.2, 0.3]).is_err());
        assert!(PiecewiseExponential::new(vec![0.0], vec![0.1, 0.2]).is_err());
        assert!(PowerRecruitment::new(0.0, 1.0).is_err());
        assert!(PowerRecruitment::new(8.0, 0.5).is_err());
    }

    #[test]
    fn recruitment_quantiles() {
        let u = PowerRecruitment::uniform(8.0).unwrap();
        assert_eq!(u.quantile(0.5).unwrap(), 4.0);
        assert_eq!(u.quantile(1.0).unwrap(), 8.0);
        let p = PowerRecruitment::new(15.0, 2.0).unwrap();
        assert!((p.quantile(0.25).unwrap() - 7.5).abs() < 1e-12);
        assert_eq!(p.cdf(0.0), 0.0);
        assert_eq!(p.cdf(15.0), 1.0);
        assert_eq!(p.cdf(40.0), 1.0);
    }

    #[test]
    fn serde_validates() {
        let m: PiecewiseExponential =
            serde_json::from_str(r#"{"change_points":[4],"rates":[0.1,0.05]}"#).unwrap();
        assert_eq!(m.rates(), &[0.1, 0.05]);
        assert!(serde_json::from_str::<PiecewiseExponential>(
            r#"{"change_points":[4],"rates":[0.1]}"#
        )
        .is_err());
    }

    fn model() -> impl Strategy<Value = PiecewiseExponential> {
        (1usize..4)
            .prop_flat_map(|k| {
                (
                    prop::collection::vec(0.1f64..6.0, k - 1),
                    prop::collection::vec(0.01f64..1.0, k),
                )
            })
            .prop_map(|(gaps, rates)| {
                let mut acc = 0.0;
                let cps = gaps
                    .iter()
                    .map(|g| {
                        acc += g;
                        acc
                    })
                    .collect();
                PiecewiseExponential::new(cps, rates).unwrap()
            })
    }

    proptest! {
        #[test]
        fn quantile_inverts_survival(m in model(), u in 1e-9f64..=1.0) {
            let t = m.quantile(u).unwrap();
            prop_assert!((m.survival(t).unwrap() - u).abs() < 1e-12);
        }

        #[test]
        fn survival_non_increasing_and_continuous(m in model(), a in 0.0f64..30.0, b in 0.0f64..30.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(m.survival(hi).unwrap() <= m.survival(lo).unwrap());
            for &c in m.change_points() {
                let left = m.survival(c - 1e-13).unwrap();
                let right = m.survival(c).unwrap();
                prop_assert!((left - right).abs() < 1e-12);
            }
        }

        #[test]
        fn recruitment_cdf_monotone(d in 1.0f64..20.0, e in 1.0f64..4.0, a in 0.0f64..25.0, b in 0.0f64..25.0) {
            let r = PowerRecruitment::new(d, e).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(r.cdf(lo) <= r.cdf(hi));
            prop_assert_eq!(r.cdf(0.0), 0.0);
            prop_assert_eq!(r.cdf(d), 1.0);
        }
    }
}
