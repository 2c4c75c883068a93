//! Market primitives: parameters, end-user demand, consumer surplus and the
//! per-mechanism feasibility thresholds.
//!
//! End-user types `θ ~ U[0, 1]` value the application at `θ · E[r̃] · v` where
//! `r̃ ~ U[r, 1]`, so a user adopts at price `p` iff `θ ≥ 2p / ((1+r)v)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model primitives `(v, r, d)`.
///
/// `v` is the potential data value, `r` the lower end of the realization
/// multiplier `r̃ ~ U[r, 1]` and `d` the value of one end-user's feedback data
/// to the data provider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct MarketParams {
    v: f64,
    r: f64,
    d: f64,
}

#[derive(Deserialize)]
struct RawParams {
    v: f64,
    r: f64,
    d: f64,
}

impl TryFrom<RawParams> for MarketParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        MarketParams::new(raw.v, raw.r, raw.d)
    }
}

impl MarketParams {
    pub fn new(v: f64, r: f64, d: f64) -> Result<Self> {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidParams(format!("v must be positive and finite, got {v}")));
        }
        if !r.is_finite() || !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidParams(format!("r must lie in [0, 1], got {r}")));
        }
        if !d.is_finite() || d < 0.0 {
            return Err(Error::InvalidParams(format!("d must be nonnegative and finite, got {d}")));
        }
        Ok(Self { v, r, d })
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn with_v(&self, v: f64) -> Result<Self> {
        Self::new(v, self.r, self.d)
    }

    pub fn with_r(&self, r: f64) -> Result<Self> {
        Self::new(self.v, r, self.d)
    }

    pub fn with_d(&self, d: f64) -> Result<Self> {
        Self::new(self.v, self.r, d)
    }

    /// Multiplies the monetary primitives `v` and `d` by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.v * k, self.r, self.d * k)
    }

    /// `(1+r)·v`, twice the expected application value.
    pub fn value_scale(&self) -> f64 {
        (1.0 + self.r) * self.v
    }

    pub fn expected_application_value(&self) -> f64 {
        self.value_scale() / 2.0
    }

    /// Highest price at which anyone still adopts (exclusive).
    pub fn shutdown_price(&self) -> f64 {
        self.expected_application_value()
    }

    /// Type of the user who is exactly indifferent between adopting and not.
    pub fn indifferent_user(&self, p: f64) -> Result<f64> {
        if !(p >= 0.0) {
            return Err(Error::NegativePrice { price: p });
        }
        Ok(2.0 * p / self.value_scale())
    }

    /// Mass of adopting users at price `p`; only defined on `0 ≤ p < (1+r)v/2`.
    pub fn demand(&self, p: f64) -> Result<f64> {
        self.check_price(p)?;
        Ok(adoption_share(self.value_scale(), p))
    }

    /// Aggregate expected utility of adopters, `D²·(1+r)v/4`.
    pub fn consumer_surplus(&self, p: f64) -> Result<f64> {
        let demand = self.demand(p)?;
        Ok(demand * demand * self.value_scale() / 4.0)
    }

    fn check_price(&self, p: f64) -> Result<()> {
        if !(p >= 0.0) {
            return Err(Error::NegativePrice { price: p });
        }
        let cap = self.shutdown_price();
        if p >= cap {
            return Err(Error::MarketShutdown { price: p, cap });
        }
        Ok(())
    }

    /// Lower bound on `v` each mechanism needs for its interior equilibrium.
    pub fn threshold(&self, mechanism: Mechanism) -> f64 {
        let factor = match mechanism {
            Mechanism::Decentralized => 2.0 / 3.0,
            Mechanism::Centralized | Mechanism::RevenueSharing => 2.0,
            Mechanism::BargainRatio => 4.0,
            Mechanism::BargainBoth => 6.0,
        };
        factor * self.d / (1.0 + self.r)
    }

    pub fn is_feasible(&self, mechanism: Mechanism) -> bool {
        self.v > self.threshold(mechanism)
    }

    /// `Ok(())` when the mechanism is feasible, otherwise a typed error naming the condition.
    pub fn require(&self, mechanism: Mechanism) -> Result<()> {
        if self.is_feasible(mechanism) {
            Ok(())
        } else {
            Err(Error::Infeasible {
                mechanism,
                condition: mechanism.condition(),
                threshold: self.threshold(mechanism),
                v: self.v,
            })
        }
    }

    pub fn check_feasibility(&self) -> FeasibilityReport {
        let entries = Mechanism::ALL
            .iter()
            .map(|&mechanism| FeasibilityEntry {
                mechanism,
                condition: mechanism.condition().to_string(),
                threshold: self.threshold(mechanism),
                v: self.v,
                satisfied: self.is_feasible(mechanism),
            })
            .collect();
        FeasibilityReport { params: *self, entries }
    }
}

/// `1 − 2p/a` without domain checks; `a` is the value scale `(1+r)v`.
pub(crate) fn adoption_share(a: f64, p: f64) -> f64 {
    (a - 2.0 * p) / a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Decentralized,
    Centralized,
    BargainRatio,
    BargainBoth,
    RevenueSharing,
}

impl Mechanism {
    pub const ALL: [Mechanism; 5] = [
        Mechanism::Decentralized,
        Mechanism::Centralized,
        Mechanism::BargainRatio,
        Mechanism::BargainBoth,
        Mechanism::RevenueSharing,
    ];

    /// Short command-line identifier.
    pub fn id(self) -> &'static str {
        match self {
            Mechanism::Decentralized => "d",
            Mechanism::Centralized => "c",
            Mechanism::BargainRatio => "b1",
            Mechanism::BargainBoth => "b2",
            Mechanism::RevenueSharing => "rs",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Decentralized => "decentralized",
            Mechanism::Centralized => "centralized",
            Mechanism::BargainRatio => "bargain_ratio",
            Mechanism::BargainBoth => "bargain_both",
            Mechanism::RevenueSharing => "revenue_sharing",
        }
    }

    pub fn condition(self) -> &'static str {
        match self {
            Mechanism::Decentralized => "2d/(3(1+r))",
            Mechanism::Centralized | Mechanism::RevenueSharing => "2d/(1+r)",
            Mechanism::BargainRatio => "4d/(1+r)",
            Mechanism::BargainBoth => "6d/(1+r)",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let needle = s.trim().to_ascii_lowercase();
        Mechanism::ALL
            .into_iter()
            .find(|m| m.id() == needle || m.name() == needle)
            .ok_or_else(|| Error::Domain(format!("unknown mechanism '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityEntry {
    pub mechanism: Mechanism,
    pub condition: String,
    pub threshold: f64,
    pub v: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub params: MarketParams,
    pub entries: Vec<FeasibilityEntry>,
}

impl FeasibilityReport {
    pub fn entry(&self, mechanism: Mechanism) -> &FeasibilityEntry {
        self.entries
            .iter()
            .find(|e| e.mechanism == mechanism)
            .expect("report covers every mechanism")
    }

    pub fn all_satisfied(&self) -> bool {
        self.entries.iter().all(|e| e.satisfied)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> MarketParams {
        MarketParams::new(10.0, 0.5, 1.0).unwrap()
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(MarketParams::new(0.0, 0.5, 1.0).is_err());
        assert!(MarketParams::new(-1.0, 0.5, 1.0).is_err());
        assert!(MarketParams::new(1.0, -0.1, 1.0).is_err());
        assert!(MarketParams::new(1.0, 1.1, 1.0).is_err());
        assert!(MarketParams::new(1.0, 0.5, -1.0).is_err());
        assert!(MarketParams::new(f64::NAN, 0.5, 1.0).is_err());
        assert!(MarketParams::new(1.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn expected_value() {
        assert_eq!(base().expected_application_value(), 7.5);
        let certain = MarketParams::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(certain.expected_application_value(), 1.0);
    }

    #[test]
    fn indifferent_user_values() {
        let p = base();
        assert_eq!(p.indifferent_user(3.75).unwrap(), 0.5);
        assert_eq!(p.indifferent_user(0.0).unwrap(), 0.0);
        assert!((p.indifferent_user(5.375).unwrap() - 43.0 / 60.0).abs() < 1e-15);
        assert!(matches!(p.indifferent_user(-1.0), Err(Error::NegativePrice { .. })));
    }

    #[test]
    fn indifferent_user_matches_bisection() {
        // Root of U(θ) = θ·(1+r)v/2 − p by bisection.
        let params = base();
        let p = 5.375;
        let utility = |theta: f64| theta * params.expected_application_value() - p;
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if utility(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((params.indifferent_user(p).unwrap() - 0.5 * (lo + hi)).abs() < 1e-12);
    }

    #[test]
    fn demand_values_and_errors() {
        let p = base();
        assert_eq!(p.demand(3.75).unwrap(), 0.5);
        assert_eq!(p.demand(0.0).unwrap(), 1.0);
        assert!((p.demand(5.375).unwrap() - 17.0 / 60.0).abs() < 1e-15);
        assert!(matches!(p.demand(7.5), Err(Error::MarketShutdown { .. })));
        assert!(matches!(p.demand(9.0), Err(Error::MarketShutdown { .. })));
        assert!(matches!(p.demand(-0.1), Err(Error::NegativePrice { .. })));
    }

    #[test]
    fn consumer_surplus_values() {
        let p = base();
        assert!((p.consumer_surplus(3.75).unwrap() - 0.9375).abs() < 1e-15);
        assert!((p.consumer_surplus(5.375).unwrap() - 0.301_041_666_666_666_7).abs() < 1e-12);
        let near_cap = p.consumer_surplus(7.5 - 1e-9).unwrap();
        assert!(near_cap >= 0.0 && near_cap < 1e-15);
    }

    #[test]
    fn feasibility_thresholds() {
        let report = base().check_feasibility();
        assert!(report.all_satisfied());
        assert!((report.entry(Mechanism::Decentralized).threshold - 4.0 / 9.0).abs() < 1e-15);
        assert!((report.entry(Mechanism::Centralized).threshold - 4.0 / 3.0).abs() < 1e-15);
        assert!((report.entry(Mechanism::BargainRatio).threshold - 8.0 / 3.0).abs() < 1e-15);
        assert_eq!(report.entry(Mechanism::BargainBoth).threshold, 4.0);
        assert_eq!(
            report.entry(Mechanism::RevenueSharing).threshold,
            report.entry(Mechanism::Centralized).threshold
        );

        let tight = MarketParams::new(3.0, 0.5, 1.0).unwrap().check_feasibility();
        assert!(tight.entry(Mechanism::Decentralized).satisfied);
        assert!(tight.entry(Mechanism::Centralized).satisfied);
        assert!(tight.entry(Mechanism::BargainRatio).satisfied);
        assert!(!tight.entry(Mechanism::BargainBoth).satisfied);

        let free = MarketParams::new(0.3, 0.2, 0.0).unwrap().check_feasibility();
        assert!(free.all_satisfied());
        assert!(free.entries.iter().all(|e| e.threshold == 0.0));
    }

    #[test]
    fn infeasible_error_names_condition() {
        let err = MarketParams::new(3.0, 0.5, 1.0).unwrap().require(Mechanism::BargainBoth).unwrap_err();
        match err {
            Error::Infeasible { condition, threshold, .. } => {
                assert_eq!(condition, "6d/(1+r)");
                assert_eq!(threshold, 4.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mechanism_parsing() {
        assert_eq!("b2".parse::<Mechanism>().unwrap(), Mechanism::BargainBoth);
        assert_eq!("Revenue_Sharing".parse::<Mechanism>().unwrap(), Mechanism::RevenueSharing);
        assert!("x".parse::<Mechanism>().is_err());
    }

    #[test]
    fn params_deserialize_validates() {
        assert!(serde_json::from_str::<MarketParams>(r#"{"v":1.0,"r":0.5,"d":0.0}"#).is_ok());
        assert!(serde_json::from_str::<MarketParams>(r#"{"v":-1.0,"r":0.5,"d":0.0}"#).is_err());
    }
}
