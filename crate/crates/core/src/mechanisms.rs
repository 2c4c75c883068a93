//! Closed-form equilibria of the five pricing mechanisms.
//!
//! Every solver checks its feasibility condition first and then evaluates the
//! equilibrium expressions directly. Throughout, `a = (1+r)v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MarketParams, Mechanism};

/// Equilibrium record shared by all mechanisms.
///
/// Transfer terms that a mechanism does not use are `None`. The centralized
/// chain is a single decision maker, so it carries no per-firm profits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismOutcome {
    pub mechanism: Mechanism,
    pub params: MarketParams,
    pub wholesale_w: Option<f64>,
    pub price_p: f64,
    pub sharing_ratio_alpha: Option<f64>,
    pub rho: Option<f64>,
    pub upfront_w_prime: Option<f64>,
    pub demand: f64,
    pub profit_provider: Option<f64>,
    pub profit_app: Option<f64>,
    pub profit_chain: f64,
    pub consumer_surplus: f64,
}

impl MechanismOutcome {
    fn split(
        mechanism: Mechanism,
        params: &MarketParams,
        price_p: f64,
        provider: f64,
        app: f64,
        consumer_surplus: f64,
    ) -> Result<Self> {
        Ok(Self {
            mechanism,
            params: *params,
            wholesale_w: None,
            price_p,
            sharing_ratio_alpha: None,
            rho: None,
            upfront_w_prime: None,
            demand: params.demand(price_p)?,
            profit_provider: Some(provider),
            profit_app: Some(app),
            profit_chain: provider + app,
            consumer_surplus,
        })
    }

    /// True when the decentralized wholesale price came out negative, which
    /// the feasibility condition alone does not rule out.
    pub fn has_negative_wholesale(&self) -> bool {
        self.wholesale_w.is_some_and(|w| w < 0.0)
    }
}

pub fn solve_decentralized(params: &MarketParams) -> Result<MechanismOutcome> {
    params.require(Mechanism::Decentralized)?;
    let (a, d) = (params.value_scale(), params.d());
    let w = (a - 2.0 * d) / 4.0;
    let p = (3.0 * a - 2.0 * d) / 8.0;
    let provider = (2.0 * d + a).powi(2) / (16.0 * a);
    let app = (2.0 * d + a).powi(2) / (32.0 * a);
    let cs = (2.0 * d + a).powi(2) / (64.0 * a);
    let mut out = MechanismOutcome::split(Mechanism::Decentralized, params, p, provider, app, cs)?;
    out.wholesale_w = Some(w);
    Ok(out)
}

pub fn solve_centralized(params: &MarketParams) -> Result<MechanismOutcome> {
    params.require(Mechanism::Centralized)?;
    let (a, d) = (params.value_scale(), params.d());
    let p = (a - 2.0 * d) / 4.0;
    Ok(MechanismOutcome {
        mechanism: Mechanism::Centralized,
        params: *params,
        wholesale_w: None,
        price_p: p,
        sharing_ratio_alpha: None,
        rho: None,
        upfront_w_prime: None,
        demand: params.demand(p)?,
        profit_provider: None,
        profit_app: None,
        profit_chain: (a + 2.0 * d).powi(2) / (8.0 * a),
        consumer_surplus: (2.0 * d + a).powi(2) / (16.0 * a),
    })
}

/// Nash bargaining over the revenue share `α` only; the application provider
/// then prices on its own.
pub fn solve_bargain_ratio(params: &MarketParams) -> Result<MechanismOutcome> {
    params.require(Mechanism::BargainRatio)?;
    let (a, d) = (params.value_scale(), params.d());
    let p = a / 4.0;
    let alpha = (a - 4.0 * d) / (2.0 * a);
    let each = (4.0 * d + a) / 16.0;
    let mut out = MechanismOutcome::split(Mechanism::BargainRatio, params, p, each, each, a / 16.0)?;
    out.sharing_ratio_alpha = Some(alpha);
    Ok(out)
}

/// Nash bargaining over both `α` and the retail price.
pub fn solve_bargain_both(params: &MarketParams) -> Result<MechanismOutcome> {
    params.require(Mechanism::BargainBoth)?;
    let (a, d) = (params.value_scale(), params.d());
    let alpha = (6.0 * d - a) / (4.0 * d - 2.0 * a);
    let p = (a - 2.0 * d) / 4.0;
    let each = (2.0 * d + a).powi(2) / (16.0 * a);
    let cs = (2.0 * d + a).powi(2) / (16.0 * a);
    let mut out = MechanismOutcome::split(Mechanism::BargainBoth, params, p, each, each, cs)?;
    out.sharing_ratio_alpha = Some(alpha);
    Ok(out)
}

/// Revenue sharing with the coordinating upfront fee `w′ = (ρ−1)d`.
pub fn solve_revenue_sharing(params: &MarketParams, rho: f64) -> Result<MechanismOutcome> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("revenue share rho must lie in (0, 1), got {rho}")));
    }
    params.require(Mechanism::RevenueSharing)?;
    let centralized = solve_centralized(params)?;
    let chain = centralized.profit_chain;
    let mut out = MechanismOutcome::split(
        Mechanism::RevenueSharing,
        params,
        centralized.price_p,
        rho * chain,
        (1.0 - rho) * chain,
        centralized.consumer_surplus,
    )?;
    out.rho = Some(rho);
    out.upfront_w_prime = Some((rho - 1.0) * params.d());
    Ok(out)
}

/// Dispatches on `mechanism`; `rho` is required for revenue sharing and ignored otherwise.
pub fn solve(mechanism: Mechanism, params: &MarketParams, rho: Option<f64>) -> Result<MechanismOutcome> {
    match mechanism {
        Mechanism::Decentralized => solve_decentralized(params),
        Mechanism::Centralized => solve_centralized(params),
        Mechanism::BargainRatio => solve_bargain_ratio(params),
        Mechanism::BargainBoth => solve_bargain_both(params),
        Mechanism::RevenueSharing => {
            let rho = rho.ok_or_else(|| Error::Domain("revenue sharing needs rho".into()))?;
            solve_revenue_sharing(params, rho)
        }
    }
}
