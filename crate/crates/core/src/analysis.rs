//! Comparative results across mechanisms: sensitivity of the decentralized
//! profits, the double-marginalization loss, the value of hiding feedback
//! data in bargaining, pairwise mechanism preferences, and revenue-sharing
//! coordination.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{self, MechanismOutcome};
use crate::model::{MarketParams, Mechanism};
use crate::oracle::{self, StagePayoffs, Stencil, Transfer};

/// Step used for the finite-difference probes in [`comparative_statics`].
pub const STATICS_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stakeholder {
    DataProvider,
    AppProvider,
    EndUsers,
    Chain,
}

impl Stakeholder {
    pub const ALL: [Stakeholder; 4] =
        [Stakeholder::DataProvider, Stakeholder::AppProvider, Stakeholder::EndUsers, Stakeholder::Chain];

    /// The quantity this stakeholder cares about, if the outcome carries it.
    pub fn value(self, outcome: &MechanismOutcome) -> Option<f64> {
        match self {
            Stakeholder::DataProvider => outcome.profit_provider,
            Stakeholder::AppProvider => outcome.profit_app,
            Stakeholder::EndUsers => Some(outcome.consumer_surplus),
            Stakeholder::Chain => Some(outcome.profit_chain),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Stakeholder::DataProvider => "pi1",
            Stakeholder::AppProvider => "pi2",
            Stakeholder::EndUsers => "cs",
            Stakeholder::Chain => "pi_chain",
        }
    }
}

impl fmt::Display for Stakeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stakeholder::DataProvider => "data provider",
            Stakeholder::AppProvider => "application provider",
            Stakeholder::EndUsers => "end-users",
            Stakeholder::Chain => "supply chain",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn of(x: f64, zero_band: f64) -> Self {
        if x.abs() <= zero_band {
            Sign::Zero
        } else if x > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub analytic: f64,
    pub numeric: f64,
    pub sign: Sign,
}

impl Derivative {
    /// Relative disagreement, measured against `max(|analytic|, |numeric|, floor)`.
    pub fn relative_error(&self, floor: f64) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(floor);
        (self.analytic - self.numeric).abs() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitStatics {
    pub stakeholder: Stakeholder,
    pub value: f64,
    pub wrt_r: Derivative,
    pub wrt_d: Derivative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticsReport {
    pub params: MarketParams,
    pub step: f64,
    /// Provider, application provider and chain, in that order.
    pub entries: Vec<ProfitStatics>,
    /// `d > (1+r)v/2`: profits fall as value uncertainty shrinks.
    pub negative_r_regime: bool,
    /// `d < 3(1+r)v/2`: the decentralized equilibrium is interior.
    pub interior_regime: bool,
}

impl StaticsReport {
    /// Largest analytic-vs-numeric relative error over all six derivatives.
    ///
    /// Each error is floored at `1e-6` times the profit level so that a
    /// derivative sitting at zero is compared on an absolute scale.
    pub fn max_relative_error(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|e| {
                let floor = 1e-6 * e.value.abs();
                [e.wrt_r.relative_error(floor), e.wrt_d.relative_error(floor)]
            })
            .fold(0.0, f64::max)
    }
}

/// Analytic `∂/∂r` and `∂/∂d` of the decentralized profits next to finite
/// differences of the decentralized solver.
pub fn comparative_statics(params: &MarketParams) -> Result<StaticsReport> {
    comparative_statics_with_step(params, STATICS_STEP)
}

pub fn comparative_statics_with_step(params: &MarketParams, h: f64) -> Result<StaticsReport> {
    params.require(Mechanism::Decentralized)?;
    let (v, r, d) = (params.v(), params.r(), params.d());
    let a = params.value_scale();
    let outcome = mechanisms::solve_decentralized(params)?;

    let r_core = (a * a - 4.0 * d * d) / ((1.0 + r) * (1.0 + r) * v);
    let d_core = (2.0 * d + a) / a;
    // (stakeholder, ∂/∂r, ∂/∂d)
    let analytic = [
        (Stakeholder::DataProvider, r_core / 16.0, d_core / 4.0),
        (Stakeholder::AppProvider, r_core / 32.0, d_core / 8.0),
        (Stakeholder::Chain, 3.0 * r_core / 32.0, 3.0 * d_core / 8.0),
    ];

    let r_stencil = if r - h < 0.0 {
        Stencil::Forward
    } else if r + h > 1.0 {
        Stencil::Backward
    } else {
        Stencil::Central
    };
    let d_stencil = if d - h < 0.0 { Stencil::Forward } else { Stencil::Central };

    let mut entries = Vec::with_capacity(3);
    for (stakeholder, dr, dd) in analytic {
        let profit = |p: &MarketParams| -> Result<f64> {
            let out = mechanisms::solve_decentralized(p)?;
            Ok(stakeholder.value(&out).expect("decentralized carries both profits"))
        };
        let numeric_r = oracle::try_derivative(|x| profit(&params.with_r(x)?), r, h, r_stencil)?;
        let numeric_d = oracle::try_derivative(|x| profit(&params.with_d(x)?), d, h, d_stencil)?;
        let value = stakeholder.value(&outcome).expect("decentralized carries both profits");
        let zero_band = 1e-12 * value.abs().max(1.0);
        entries.push(ProfitStatics {
            stakeholder,
            value,
            wrt_r: Derivative { analytic: dr, numeric: numeric_r, sign: Sign::of(dr, zero_band) },
            wrt_d: Derivative { analytic: dd, numeric: numeric_d, sign: Sign::of(dd, zero_band) },
        });
    }

    Ok(StaticsReport {
        params: *params,
        step: h,
        entries,
        negative_r_regime: d > a / 2.0,
        interior_regime: d < 1.5 * a,
    })
}

/// Chain profit lost to sequential markups, `Π* − Π^D`, by direct subtraction.
pub fn double_marginalization_gap(params: &MarketParams) -> Result<f64> {
    let centralized = mechanisms::solve_centralized(params)?;
    let decentralized = mechanisms::solve_decentralized(params)?;
    Ok(centralized.profit_chain - decentralized.profit_chain)
}

/// `(2d + (1+r)v)² / (32(1+r)v)`.
pub fn double_marginalization_gap_closed_form(params: &MarketParams) -> f64 {
    let a = params.value_scale();
    (2.0 * params.d() + a).powi(2) / (32.0 * a)
}

/// Ratio bargaining when the provider conceals `d` versus when it reveals it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationHiding {
    pub alpha_hidden: f64,
    pub alpha_truthful: f64,
    /// Provider profit under concealment as the bargaining stage values it: `α·p·D` with `d` set to 0.
    pub pi1_hidden: f64,
    pub pi1_truthful: f64,
    pub hiding_profitable: bool,
    /// Alternative reading: the provider conceals `d` but still collects `d·D`.
    pub pi1_hidden_keeping_feedback: f64,
    pub hiding_profitable_keeping_feedback: bool,
}

pub fn information_hiding_analysis(params: &MarketParams) -> Result<InformationHiding> {
    let truthful = mechanisms::solve_bargain_ratio(params)?;
    let concealed = mechanisms::solve_bargain_ratio(&params.with_d(0.0)?)?;
    let alpha_hidden = concealed.sharing_ratio_alpha.expect("ratio bargaining sets alpha");
    let pi1_hidden = concealed.profit_provider.expect("ratio bargaining sets pi1");
    let pi1_truthful = truthful.profit_provider.expect("ratio bargaining sets pi1");
    let pi1_hidden_keeping_feedback = pi1_hidden + params.d() * concealed.demand;
    Ok(InformationHiding {
        alpha_hidden,
        alpha_truthful: truthful.sharing_ratio_alpha.expect("ratio bargaining sets alpha"),
        pi1_hidden,
        pi1_truthful,
        hiding_profitable: pi1_hidden > pi1_truthful,
        pi1_hidden_keeping_feedback,
        hiding_profitable_keeping_feedback: pi1_hidden_keeping_feedback > pi1_truthful,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismEntry {
    pub mechanism: Mechanism,
    pub outcome: Option<MechanismOutcome>,
    /// Why the outcome is missing.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDifference {
    pub stakeholder: Stakeholder,
    pub left: Mechanism,
    pub right: Mechanism,
    pub closed_form: f64,
    pub subtracted: f64,
    /// The two stakeholder values that were subtracted.
    pub operands: (f64, f64),
}

impl PairwiseDifference {
    /// Disagreement relative to the larger operand. Subtracting two nearly
    /// equal profits loses digits, so the difference itself is no yardstick.
    pub fn relative_error(&self) -> f64 {
        let scale = self.operands.0.abs().max(self.operands.1.abs()).max(self.closed_form.abs());
        if scale == 0.0 {
            return 0.0;
        }
        (self.closed_form - self.subtracted).abs() / scale
    }
}

/// Mechanisms from most to least preferred; each tier holds ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StakeholderRanking {
    pub stakeholder: Stakeholder,
    pub tiers: Vec<Vec<Mechanism>>,
}

impl fmt::Display for StakeholderRanking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tiers: Vec<String> = self
            .tiers
            .iter()
            .map(|tier| tier.iter().map(|m| m.id().to_uppercase()).collect::<Vec<_>>().join(" = "))
            .collect();
        write!(f, "{}: {}", self.stakeholder, tiers.join(" > "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub claim: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub params: MarketParams,
    pub entries: Vec<MechanismEntry>,
    pub differences: Vec<PairwiseDifference>,
    pub rankings: Vec<StakeholderRanking>,
    pub checks: Vec<OrderingCheck>,
    pub double_marginalization_gap: Option<f64>,
}

impl ComparisonReport {
    pub fn outcome(&self, mechanism: Mechanism) -> Option<&MechanismOutcome> {
        self.entries.iter().find(|e| e.mechanism == mechanism)?.outcome.as_ref()
    }

    pub fn all_checks_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

const RANKED: [Mechanism; 3] = [Mechanism::Decentralized, Mechanism::BargainRatio, Mechanism::BargainBoth];

/// Closed-form `left − right` differences between the decentralized and
/// bargaining mechanisms.
fn closed_form_difference(stakeholder: Stakeholder, left: Mechanism, right: Mechanism, a: f64, d: f64) -> f64 {
    use Mechanism::{BargainBoth as B2, BargainRatio as B1, Decentralized as D};
    use Stakeholder::*;
    let sq = (2.0 * d + a).powi(2);
    match (stakeholder, left, right) {
        (DataProvider, D, B1) => d * d / (4.0 * a),
        (DataProvider, D, B2) => 0.0,
        (DataProvider, B1, B2) => -d * d / (4.0 * a),
        (AppProvider, D, B1) => -(4.0 * d * a + a * a - 4.0 * d * d) / (32.0 * a),
        (AppProvider, D, B2) => -sq / (32.0 * a),
        (AppProvider, B1, B2) => -d * d / (4.0 * a),
        (EndUsers, D, B1) => (4.0 * d * d + 4.0 * d * a - 3.0 * a * a) / (64.0 * a),
        (EndUsers, D, B2) => -3.0 * sq / (64.0 * a),
        (EndUsers, B1, B2) => -d * (d + a) / (4.0 * a),
        (Chain, D, B1) => -(4.0 * d * a + a * a - 12.0 * d * d) / (32.0 * a),
        (Chain, D, B2) => -sq / (32.0 * a),
        (Chain, B1, B2) => -d * d / (2.0 * a),
        _ => unreachable!("only D/B1/B2 pairs are tabulated"),
    }
}

/// Solves every mechanism that is feasible for `params` and compares the
/// decentralized and bargaining outcomes pairwise and per stakeholder.
/// Revenue sharing is included when `rho` is given.
pub fn compare_mechanisms(params: &MarketParams, rho: Option<f64>) -> Result<ComparisonReport> {
    if let Some(rho) = rho {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Domain(format!("revenue share rho must lie in (0, 1), got {rho}")));
        }
    }
    let mut listed = vec![
        Mechanism::Decentralized,
        Mechanism::BargainRatio,
        Mechanism::BargainBoth,
        Mechanism::Centralized,
    ];
    if rho.is_some() {
        listed.push(Mechanism::RevenueSharing);
    }

    let mut entries = Vec::with_capacity(listed.len());
    for mechanism in listed {
        let entry = match mechanisms::solve(mechanism, params, rho) {
            Ok(outcome) => MechanismEntry { mechanism, outcome: Some(outcome), note: None },
            Err(Error::Infeasible { threshold, .. }) => MechanismEntry {
                mechanism,
                outcome: None,
                note: Some(format!("infeasible (v ≤ {})", crate::format::compact(threshold))),
            },
            Err(e) => return Err(e),
        };
        entries.push(entry);
    }
    let find = |m: Mechanism| entries.iter().find(|e| e.mechanism == m).and_then(|e| e.outcome.as_ref());

    let (a, d) = (params.value_scale(), params.d());
    let mut differences = Vec::new();
    for stakeholder in Stakeholder::ALL {
        for (i, &left) in RANKED.iter().enumerate() {
            for &right in &RANKED[i + 1..] {
                let (Some(l), Some(r)) = (find(left), find(right)) else { continue };
                let (Some(lv), Some(rv)) = (stakeholder.value(l), stakeholder.value(r)) else { continue };
                differences.push(PairwiseDifference {
                    stakeholder,
                    left,
                    right,
                    closed_form: closed_form_difference(stakeholder, left, right, a, d),
                    subtracted: lv - rv,
                    operands: (lv, rv),
                });
            }
        }
    }

    let rankings = Stakeholder::ALL
        .iter()
        .map(|&stakeholder| {
            let mut scored: Vec<(Mechanism, f64)> = RANKED
                .iter()
                .filter_map(|&m| Some((m, stakeholder.value(find(m)?)?)))
                .collect();
            scored.sort_by(|x, y| y.1.total_cmp(&x.1));
            let mut tiers: Vec<(f64, Vec<Mechanism>)> = Vec::new();
            for (m, value) in scored {
                match tiers.last_mut() {
                    Some((lead, tier)) if nearly_equal(*lead, value) => tier.push(m),
                    _ => tiers.push((value, vec![m])),
                }
            }
            StakeholderRanking { stakeholder, tiers: tiers.into_iter().map(|(_, t)| t).collect() }
        })
        .collect();

    let mut checks = Vec::new();
    if let (Some(dec), Some(b1), Some(b2)) =
        (find(Mechanism::Decentralized), find(Mechanism::BargainRatio), find(Mechanism::BargainBoth))
    {
        let strict = d > 0.0;
        let get = |s: Stakeholder, o: &MechanismOutcome| s.value(o).expect("D/B1/B2 carry all four values");
        let mut claim = |text: &str, holds: bool| checks.push(OrderingCheck { claim: text.to_string(), holds });
        let p1 = |o| get(Stakeholder::DataProvider, o);
        claim("pi1: D = B2", nearly_equal(p1(dec), p1(b2)));
        if strict {
            claim("pi1: D > B1", p1(dec) > p1(b1));
        } else {
            claim("pi1: D = B1", nearly_equal(p1(dec), p1(b1)));
        }
        for s in [Stakeholder::AppProvider, Stakeholder::EndUsers, Stakeholder::Chain] {
            let sym = s.symbol();
            if strict {
                claim(&format!("{sym}: B2 > B1"), get(s, b2) > get(s, b1));
            } else {
                claim(&format!("{sym}: B2 = B1"), nearly_equal(get(s, b2), get(s, b1)));
            }
            claim(&format!("{sym}: B1 > D"), get(s, b1) > get(s, dec));
        }
    }

    let double_marginalization_gap = match (find(Mechanism::Centralized), find(Mechanism::Decentralized)) {
        (Some(c), Some(dec)) => Some(c.profit_chain - dec.profit_chain),
        _ => None,
    };

    Ok(ComparisonReport { params: *params, entries, differences, rankings, checks, double_marginalization_gap })
}

fn nearly_equal(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinationCheck {
    pub rho: f64,
    pub upfront_w_prime: f64,
    /// Application provider's numerically optimal price under the contract.
    pub argmax: f64,
    pub centralized_price: f64,
    pub argmax_matches_centralized: bool,
    /// `π₁/Π` and `π₂/Π` at the application provider's optimum.
    pub provider_share: f64,
    pub app_share: f64,
    /// Largest deviation of `π₁/Π` from `ρ` (or `π₂/Π` from `1−ρ`) across the probe prices.
    pub max_share_deviation: f64,
    pub shares_proportional: bool,
}

impl CoordinationCheck {
    pub fn coordinated(&self) -> bool {
        self.argmax_matches_centralized && self.shares_proportional
    }
}

pub const COORDINATION_PRICE_TOL: f64 = 1e-5;
pub const COORDINATION_SHARE_TOL: f64 = 1e-10;

/// Checks that the coordinating fee `w′ = (ρ−1)d` makes the application
/// provider pick the integrated chain's price and splits profit `ρ : 1−ρ` at
/// every price, not only at the optimum.
///
/// A broken coordination shows up as `false` flags, not as an error.
pub fn verify_coordination(params: &MarketParams, rho: f64) -> Result<CoordinationCheck> {
    let contract = mechanisms::solve_revenue_sharing(params, rho)?;
    let upfront = contract.upfront_w_prime.expect("revenue sharing sets w'");
    let transfer = Transfer::RevenueShare { rho, upfront };
    let reply = oracle::downstream_best_response(params, transfer, oracle::DEFAULT_TOL)?;
    let argmax = reply.argmax.first();
    let a = params.value_scale();
    let centralized_price = mechanisms::solve_centralized(params)?.price_p;

    let payoffs = StagePayoffs::new(params);
    let shares = |p: f64| {
        let chain = payoffs.chain(p);
        (payoffs.provider(transfer, p) / chain, payoffs.app(transfer, p) / chain)
    };
    let max_share_deviation = (1..=5)
        .map(|k| a * k as f64 / 12.0)
        .map(|p| {
            let (s1, s2) = shares(p);
            (s1 - rho).abs().max((s2 - (1.0 - rho)).abs())
        })
        .fold(0.0, f64::max);
    let (provider_share, app_share) = shares(argmax);

    Ok(CoordinationCheck {
        rho,
        upfront_w_prime: upfront,
        argmax,
        centralized_price,
        argmax_matches_centralized: reply.converged
            && (argmax - centralized_price).abs() <= COORDINATION_PRICE_TOL * a,
        provider_share,
        app_share,
        max_share_deviation,
        shares_proportional: max_share_deviation <= COORDINATION_SHARE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> MarketParams {
        MarketParams::new(10.0, 0.5, 1.0).unwrap()
    }

    #[test]
    fn statics_negative_regime() {
        let params = MarketParams::new(10.0, 0.5, 8.0).unwrap();
        let report = comparative_statics(&params).unwrap();
        assert!(report.negative_r_regime && report.interior_regime);
        let provider = report.entries[0];
        assert!((provider.wrt_r.analytic + 31.0 / 360.0).abs() < 1e-14);
        assert!((provider.wrt_r.numeric + 31.0 / 360.0).abs() < 1e-8);
        assert_eq!(provider.wrt_r.sign, Sign::Negative);
        assert!(report.max_relative_error() < 1e-4);
    }

    #[test]
    fn statics_positive_regime() {
        let report = comparative_statics(&base()).unwrap();
        assert!(!report.negative_r_regime);
        let provider = report.entries[0];
        assert!((provider.wrt_r.analytic - 221.0 / 360.0).abs() < 1e-14);
        assert!((provider.wrt_r.numeric - 221.0 / 360.0).abs() < 1e-8);
        assert!((provider.wrt_d.analytic - 17.0 / 60.0).abs() < 1e-14);
        assert!((provider.wrt_d.numeric - 17.0 / 60.0).abs() < 1e-8);
        assert!(report.entries.iter().all(|e| e.wrt_d.sign == Sign::Positive));
    }

    #[test]
    fn statics_at_domain_edges_use_one_sided_stencils() {
        for (r, d) in [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0)] {
            let params = MarketParams::new(10.0, r, d).unwrap();
            let report = comparative_statics(&params).unwrap();
            assert!(report.max_relative_error() < 1e-4, "r={r} d={d}");
        }
    }

    #[test]
    fn statics_sign_flip() {
        let v = 10.0;
        let r = 0.5;
        let params = MarketParams::new(v, r, (1.0 + r) * v / 2.0).unwrap();
        let report = comparative_statics(&params).unwrap();
        for e in &report.entries {
            assert!(e.wrt_r.analytic.abs() <= 1e-12);
            assert_eq!(e.wrt_r.sign, Sign::Zero);
        }
    }

    #[test]
    fn gap_values() {
        let free = MarketParams::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(double_marginalization_gap(&free).unwrap(), 0.0625);
        let gap = double_marginalization_gap(&base()).unwrap();
        assert!((gap - 289.0 / 480.0).abs() < 1e-14);
        assert!((double_marginalization_gap_closed_form(&base()) - gap).abs() < 1e-14);
        assert!(double_marginalization_gap(&MarketParams::new(1.0, 0.5, 1.0).unwrap()).is_err());
    }

    #[test]
    fn hiding_feedback_value() {
        let h = information_hiding_analysis(&base()).unwrap();
        assert_eq!(h.alpha_hidden, 0.5);
        assert!((h.alpha_truthful - 11.0 / 30.0).abs() < 1e-14);
        assert_eq!(h.pi1_truthful, 1.1875);
        assert_eq!(h.pi1_hidden, 15.0 / 16.0);
        assert!(!h.hiding_profitable);
        // (A + 8d)/16 > (A + 4d)/16
        assert_eq!(h.pi1_hidden_keeping_feedback, 23.0 / 16.0);
        assert!(h.hiding_profitable_keeping_feedback);

        let free = information_hiding_analysis(&MarketParams::new(10.0, 0.5, 0.0).unwrap()).unwrap();
        assert_eq!(free.alpha_hidden, free.alpha_truthful);
        assert_eq!(free.pi1_hidden, free.pi1_truthful);
        assert!(!free.hiding_profitable && !free.hiding_profitable_keeping_feedback);
    }

    #[test]
    fn comparison_worked_instance() {
        let report = compare_mechanisms(&base(), None).unwrap();
        assert!(report.all_checks_hold());
        assert_eq!(report.differences.len(), 12);
        let diff = |s, l, r| {
            report.differences.iter().find(|x| x.stakeholder == s && x.left == l && x.right == r).unwrap()
        };
        let d1 = diff(Stakeholder::DataProvider, Mechanism::Decentralized, Mechanism::BargainRatio);
        assert!((d1.closed_form - 1.0 / 60.0).abs() < 1e-15);
        assert!((d1.subtracted - 1.0 / 60.0).abs() < 1e-14);
        assert_eq!(diff(Stakeholder::DataProvider, Mechanism::Decentralized, Mechanism::BargainBoth).closed_form, 0.0);
        for d in &report.differences {
            assert!(d.relative_error() < 1e-10, "{d:?}");
        }
        let cs: Vec<f64> = RANKED.iter().map(|&m| report.outcome(m).unwrap().consumer_surplus).collect();
        assert!(cs[0] < cs[1] && cs[1] < cs[2]);

        let provider = &report.rankings[0];
        assert_eq!(provider.tiers.len(), 2);
        assert_eq!(provider.tiers[1], vec![Mechanism::BargainRatio]);
        assert_eq!(provider.tiers[0].len(), 2);
        assert_eq!(report.rankings[3].to_string(), "supply chain: B2 > B1 > D");
        assert!(report.double_marginalization_gap.unwrap() > 0.0);
    }

    #[test]
    fn comparison_without_feedback() {
        let report = compare_mechanisms(&MarketParams::new(10.0, 0.5, 0.0).unwrap(), None).unwrap();
        assert!(report.all_checks_hold());
        let b1 = report.outcome(Mechanism::BargainRatio).unwrap();
        let b2 = report.outcome(Mechanism::BargainBoth).unwrap();
        assert_eq!(b1.price_p, b2.price_p);
        assert_eq!(b1.profit_provider, b2.profit_provider);
        assert_eq!(b1.consumer_surplus, b2.consumer_surplus);
        assert_eq!(b1.sharing_ratio_alpha, b2.sharing_ratio_alpha);
    }

    #[test]
    fn comparison_partial_feasibility() {
        let report = compare_mechanisms(&MarketParams::new(3.0, 0.5, 1.0).unwrap(), Some(0.5)).unwrap();
        let b2 = report.entries.iter().find(|e| e.mechanism == Mechanism::BargainBoth).unwrap();
        assert!(b2.outcome.is_none());
        assert!(b2.note.as_deref().unwrap().contains("v ≤ 4"));
        assert!(report.outcome(Mechanism::RevenueSharing).is_some());
        assert!(report.checks.is_empty());
        assert_eq!(report.differences.len(), 4);
    }

    #[test]
    fn coordination_worked_instance() {
        let check = verify_coordination(&base(), 0.6).unwrap();
        assert!(check.coordinated());
        assert!((check.argmax - 3.25).abs() < 1e-6);
        assert!((check.provider_share - 0.6).abs() < 1e-10);
        assert!((check.app_share - 0.4).abs() < 1e-10);
    }

    #[test]
    fn coordination_even_split_matches_bargaining() {
        let params = MarketParams::new(20.0, 0.3, 2.0).unwrap();
        let check = verify_coordination(&params, 0.5).unwrap();
        assert!(check.coordinated());
        let b2 = mechanisms::solve_bargain_both(&params).unwrap();
        let rs = mechanisms::solve_revenue_sharing(&params, 0.5).unwrap();
        assert_eq!(rs.price_p, b2.price_p);
        assert!((rs.profit_provider.unwrap() - b2.profit_provider.unwrap()).abs() < 1e-14);
        assert!((rs.profit_app.unwrap() - b2.profit_app.unwrap()).abs() < 1e-14);
    }

    #[test]
    fn coordination_without_feedback() {
        let check = verify_coordination(&MarketParams::new(4.0, 0.1, 0.0).unwrap(), 0.25).unwrap();
        assert_eq!(check.upfront_w_prime, 0.0);
        assert!(check.coordinated());
    }

    #[test]
    fn coordination_errors() {
        assert!(verify_coordination(&base(), 1.0).is_err());
        assert!(verify_coordination(&MarketParams::new(1.0, 0.5, 1.0).unwrap(), 0.5).is_err());
    }
}
