//! Randomized cross-checks of the closed forms against the numerical oracles,
//! plus the comparative properties, run as one seeded suite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{Error, Result};
use crate::mechanisms;
use crate::model::{MarketParams, Mechanism};
use crate::oracle::{self, StagePayoffs, Transfer};
use crate::sampling::ParamSampler;

/// Relative tolerances for closed-form vs oracle agreement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// For quantities found by nested one-dimensional searches.
    pub line_search: f64,
    /// For quantities found by the joint grid search.
    pub grid: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { line_search: 1e-5, grid: 1e-4 }
    }
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Self { line_search: tol, grid: tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    pub tol: f64,
    pub grid_n: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { tol: oracle::DEFAULT_TOL, grid_n: oracle::DEFAULT_GRID_N }
    }
}

/// Monetary quantities are compared relative to `max(|x|, |y|, 1e-2·(1+r)v)`
/// and ratios relative to `max(|x|, |y|, 1e-2)`, so that values crossing zero
/// (a wholesale price near 0, say) are judged on the model's own scale.
pub const SCALE_FLOOR: f64 = 1e-2;

pub fn relative_error(x: f64, y: f64, floor: f64) -> f64 {
    let scale = x.abs().max(y.abs()).max(floor);
    if scale == 0.0 {
        0.0
    } else {
        (x - y).abs() / scale
    }
}

/// Distance between two floats in units in the last place.
pub fn ulps_apart(x: f64, y: f64) -> u64 {
    if x == y {
        return 0;
    }
    if x.is_sign_negative() != y.is_sign_negative() {
        return u64::MAX;
    }
    x.to_bits().abs_diff(y.to_bits())
}

pub const MAX_ULPS: u64 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quantity: &'static str,
    pub closed_form: f64,
    pub oracle: f64,
    pub relative_error: f64,
    pub tolerance: f64,
}

impl Comparison {
    fn new(quantity: &'static str, closed_form: f64, oracle: f64, floor: f64, tolerance: f64) -> Self {
        Self { quantity, closed_form, oracle, relative_error: relative_error(closed_form, oracle, floor), tolerance }
    }

    pub fn passed(&self) -> bool {
        self.relative_error <= self.tolerance
    }
}

/// Oracle-side equilibrium: an argmax from the numerical solvers with the
/// payoffs, demand and surplus evaluated from stage payoffs only.
#[derive(Debug, Clone, Copy, PartialEq)]
struct NumericEquilibrium {
    w: Option<f64>,
    alpha: Option<f64>,
    p: f64,
    provider: Option<f64>,
    app: Option<f64>,
    chain: f64,
    cs: f64,
    converged: bool,
}

fn numeric_equilibrium(
    params: &MarketParams,
    mechanism: Mechanism,
    rho: Option<f64>,
    settings: &OracleSettings,
) -> Result<NumericEquilibrium> {
    let payoffs = StagePayoffs::new(params);
    let split = |transfer: Transfer, p: f64, converged: bool| {
        let provider = payoffs.provider(transfer, p);
        let app = payoffs.app(transfer, p);
        NumericEquilibrium {
            w: None,
            alpha: None,
            p,
            provider: Some(provider),
            app: Some(app),
            chain: provider + app,
            cs: payoffs.consumer_surplus(p),
            converged,
        }
    };
    Ok(match mechanism {
        Mechanism::Decentralized => {
            let res = oracle::stackelberg_solve(params, settings.tol)?;
            let (w, p) = (res.argmax.first(), res.argmax.second().expect("pair"));
            NumericEquilibrium { w: Some(w), ..split(Transfer::Wholesale(w), p, res.converged) }
        }
        Mechanism::Centralized => {
            let res = oracle::centralized_price(params, settings.tol)?;
            let p = res.argmax.first();
            NumericEquilibrium {
                w: None,
                alpha: None,
                p,
                provider: None,
                app: None,
                chain: payoffs.chain(p),
                cs: payoffs.consumer_surplus(p),
                converged: res.converged,
            }
        }
        Mechanism::BargainRatio | Mechanism::BargainBoth => {
            let res = if mechanism == Mechanism::BargainRatio {
                oracle::nash_product_ratio(params, settings.tol)?
            } else {
                oracle::nash_product_joint(params, settings.grid_n, settings.tol)?
            };
            let (alpha, p) = (res.argmax.first(), res.argmax.second().expect("pair"));
            NumericEquilibrium {
                alpha: Some(alpha),
                ..split(Transfer::Share(alpha), p, res.converged && !res.boundary_hit)
            }
        }
        Mechanism::RevenueSharing => {
            let rho = rho.ok_or_else(|| Error::Domain("revenue sharing needs rho".into()))?;
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::Domain(format!("revenue share rho must lie in (0, 1), got {rho}")));
            }
            params.require(Mechanism::RevenueSharing)?;
            let transfer = Transfer::RevenueShare { rho, upfront: (rho - 1.0) * params.d() };
            let res = oracle::downstream_best_response(params, transfer, settings.tol)?;
            split(transfer, res.argmax.first(), res.converged)
        }
    })
}

/// Compares every equilibrium quantity of `mechanism` with its numerical oracle.
pub fn oracle_agreement(
    params: &MarketParams,
    mechanism: Mechanism,
    rho: Option<f64>,
    settings: &OracleSettings,
    tolerances: &Tolerances,
) -> Result<Vec<Comparison>> {
    let closed = mechanisms::solve(mechanism, params, rho)?;
    let numeric = numeric_equilibrium(params, mechanism, rho, settings)?;
    let tol = if mechanism == Mechanism::BargainBoth { tolerances.grid } else { tolerances.line_search };
    let money = SCALE_FLOOR * params.value_scale();
    let mut out = Vec::with_capacity(8);
    let mut push = |q, c: Option<f64>, n: Option<f64>, floor| {
        if let (Some(c), Some(n)) = (c, n) {
            out.push(Comparison::new(q, c, n, floor, tol));
        }
    };
    push("w", closed.wholesale_w, numeric.w, money);
    push("alpha", closed.sharing_ratio_alpha, numeric.alpha, SCALE_FLOOR);
    push("p", Some(closed.price_p), Some(numeric.p), money);
    push("pi1", closed.profit_provider, numeric.provider, money);
    push("pi2", closed.profit_app, numeric.app, money);
    push("pi_chain", Some(closed.profit_chain), Some(numeric.chain), money);
    push("cs", Some(closed.consumer_surplus), Some(numeric.cs), money);
    // A search that stopped early is reported as a failed comparison.
    push("converged", Some(1.0), Some(if numeric.converged { 1.0 } else { 0.0 }), 1.0);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Oracle,
    Property,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub kind: CheckKind,
    pub sample: usize,
    pub name: String,
    pub params: MarketParams,
    pub passed: bool,
    /// Offending quantities and their deltas; empty on success.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub samples: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub oracle: OracleSettings,
    pub monte_carlo_samples: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            seed: 7,
            tolerances: Tolerances::default(),
            oracle: OracleSettings::default(),
            monte_carlo_samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub samples: usize,
    pub checks: Vec<CheckOutcome>,
}

impl SuiteReport {
    /// `(passed, total)` over checks of one kind.
    pub fn tally(&self, kind: CheckKind) -> (usize, usize) {
        let of_kind = self.checks.iter().filter(|c| c.kind == kind);
        let total = of_kind.clone().count();
        (of_kind.filter(|c| c.passed).count(), total)
    }

    /// Samples whose every oracle comparison passed.
    pub fn oracle_matches(&self) -> usize {
        (0..self.samples)
            .filter(|&i| self.checks.iter().filter(|c| c.sample == i && c.kind == CheckKind::Oracle).all(|c| c.passed))
            .count()
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    if config.samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    if config.monte_carlo_samples < oracle::MIN_MONTE_CARLO_SAMPLES {
        return Err(Error::Domain(format!(
            "need at least {} Monte Carlo samples",
            oracle::MIN_MONTE_CARLO_SAMPLES
        )));
    }
    let per_sample: Vec<Vec<CheckOutcome>> = (0..config.samples)
        .into_par_iter()
        .map(|i| run_sample(config, i))
        .collect::<Result<_>>()?;
    Ok(SuiteReport { samples: config.samples, checks: per_sample.into_iter().flatten().collect() })
}

fn run_sample(config: &SuiteConfig, index: usize) -> Result<Vec<CheckOutcome>> {
    let mut sampler = ParamSampler::with_stream(config.seed, index as u64);
    let mut checks = Vec::new();

    for mechanism in Mechanism::ALL {
        let params = sampler.feasible(mechanism);
        let rho = (mechanism == Mechanism::RevenueSharing).then(|| sampler.rho());
        let comparisons = oracle_agreement(&params, mechanism, rho, &config.oracle, &config.tolerances)?;
        let detail = comparisons
            .iter()
            .filter(|c| !c.passed())
            .map(|c| {
                format!(
                    "{}: closed {} vs oracle {} (rel {:.3e} > {:.1e})",
                    c.quantity, c.closed_form, c.oracle, c.relative_error, c.tolerance
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        checks.push(CheckOutcome {
            kind: CheckKind::Oracle,
            sample: index,
            name: format!("oracle {}", mechanism.id()),
            params,
            passed: detail.is_empty(),
            detail,
        });
    }

    let joint = sampler.feasible(Mechanism::BargainBoth);
    let rho = sampler.rho();
    for (name, result) in property_checks(&joint, rho)? {
        checks.push(CheckOutcome {
            kind: CheckKind::Property,
            sample: index,
            name: name.to_string(),
            params: joint,
            passed: result.is_ok(),
            detail: result.err().unwrap_or_default(),
        });
    }

    let market = sampler.feasible(Mechanism::Decentralized);
    let price = sampler.uniform(0.0, 0.98) * market.shutdown_price();
    let seed = config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64);
    let (name, result) = monte_carlo_check(&market, price, config.monte_carlo_samples, seed)?;
    checks.push(CheckOutcome {
        kind: CheckKind::MonteCarlo,
        sample: index,
        name: name.to_string(),
        params: market,
        passed: result.is_ok(),
        detail: result.err().unwrap_or_default(),
    });
    Ok(checks)
}

type PropertyResult = std::result::Result<(), String>;

fn expect(ok: bool, detail: impl FnOnce() -> String) -> PropertyResult {
    if ok {
        Ok(())
    } else {
        Err(detail())
    }
}

/// Bargaining over ratio and price reaches the integrated chain's outcome
/// and splits it evenly, to machine precision.
pub fn check_first_best(params: &MarketParams) -> Result<PropertyResult> {
    let central = mechanisms::solve_centralized(params)?;
    let both = mechanisms::solve_bargain_both(params)?;
    let pairs = [
        ("p", both.price_p, central.price_p),
        ("pi_chain", both.profit_chain, central.profit_chain),
        ("cs", both.consumer_surplus, central.consumer_surplus),
        ("pi1 vs pi2", both.profit_provider.unwrap_or(f64::NAN), both.profit_app.unwrap_or(f64::NAN)),
    ];
    let bad: Vec<String> = pairs
        .iter()
        .filter(|(_, x, y)| ulps_apart(*x, *y) > MAX_ULPS)
        .map(|(q, x, y)| format!("{q}: {x} vs {y} ({} ulps)", ulps_apart(*x, *y)))
        .collect();
    Ok(expect(bad.is_empty(), || bad.join("; ")))
}

/// Preference orderings across D/B1/B2 plus the tabulated differences.
pub fn check_orderings(params: &MarketParams) -> Result<PropertyResult> {
    let report = analysis::compare_mechanisms(params, None)?;
    let mut bad: Vec<String> =
        report.checks.iter().filter(|c| !c.holds).map(|c| format!("ordering {} fails", c.claim)).collect();
    if report.checks.is_empty() {
        bad.push("bargaining mechanisms infeasible".into());
    }
    for d in &report.differences {
        let err = d.relative_error();
        if err > 1e-10 {
            bad.push(format!(
                "{} {}-{}: closed {} vs subtracted {} (rel {err:.3e})",
                d.stakeholder.symbol(),
                d.left.id(),
                d.right.id(),
                d.closed_form,
                d.subtracted
            ));
        }
    }
    Ok(expect(bad.is_empty(), || bad.join("; ")))
}

pub fn check_gap(params: &MarketParams) -> Result<PropertyResult> {
    let gap = analysis::double_marginalization_gap(params)?;
    let closed = analysis::double_marginalization_gap_closed_form(params);
    let err = relative_error(gap, closed, 0.0);
    Ok(expect(gap > 0.0 && err <= 1e-10, || format!("gap {gap} vs closed form {closed} (rel {err:.3e})")))
}

pub fn check_hiding(params: &MarketParams) -> Result<PropertyResult> {
    let h = analysis::information_hiding_analysis(params)?;
    let ok = h.alpha_hidden == 0.5
        && !h.hiding_profitable
        && (params.d() == 0.0 || (h.pi1_truthful > h.pi1_hidden && h.alpha_hidden > h.alpha_truthful));
    Ok(expect(ok, || format!("{h:?}")))
}

pub fn check_statics(params: &MarketParams) -> Result<PropertyResult> {
    let report = analysis::comparative_statics(params)?;
    let err = report.max_relative_error();
    let d_positive = report.entries.iter().all(|e| e.wrt_d.analytic > 0.0 && e.wrt_d.numeric > 0.0);
    let sign_consistent = report
        .entries
        .iter()
        .all(|e| report.negative_r_regime == (e.wrt_r.sign == analysis::Sign::Negative));
    Ok(expect(err <= 1e-4 && d_positive && sign_consistent, || {
        format!("derivative rel error {err:.3e}, d-slopes positive {d_positive}, r-sign regime consistent {sign_consistent}")
    }))
}

pub fn check_coordination(params: &MarketParams, rho: f64) -> Result<PropertyResult> {
    let c = analysis::verify_coordination(params, rho)?;
    Ok(expect(c.coordinated(), || {
        format!(
            "argmax {} vs p* {}, max share deviation {:.3e}",
            c.argmax, c.centralized_price, c.max_share_deviation
        )
    }))
}

/// Every comparative property on one jointly feasible parameter triple.
pub fn property_checks(params: &MarketParams, rho: f64) -> Result<Vec<(&'static str, PropertyResult)>> {
    Ok(vec![
        ("first-best bargaining", check_first_best(params)?),
        ("mechanism orderings", check_orderings(params)?),
        ("double marginalization", check_gap(params)?),
        ("information hiding", check_hiding(params)?),
        ("comparative statics", check_statics(params)?),
        ("revenue-sharing coordination", check_coordination(params, rho)?),
    ])
}

/// Number of standard errors a Monte Carlo estimate may stray from the closed form.
pub const MONTE_CARLO_SIGMAS: f64 = 4.0;

pub fn monte_carlo_check(params: &MarketParams, p: f64, n: usize, seed: u64) -> Result<(&'static str, PropertyResult)> {
    let est = oracle::monte_carlo_market(params, p, n, seed)?;
    let demand = params.demand(p)?;
    let cs = params.consumer_surplus(p)?;
    let within = |x: f64, y: f64, se: f64| (x - y).abs() <= MONTE_CARLO_SIGMAS * se || x == y;
    let ok = within(est.demand, demand, est.demand_stderr)
        && within(est.consumer_surplus, cs, est.consumer_surplus_stderr)
        && within(est.mean_value, params.expected_application_value(), est.mean_value_stderr);
    Ok((
        "monte carlo market",
        expect(ok, || {
            format!(
                "p={p}: demand {} vs {demand} (se {:.2e}), cs {} vs {cs} (se {:.2e}), value {} (se {:.2e})",
                est.demand, est.demand_stderr, est.consumer_surplus, est.consumer_surplus_stderr,
                est.mean_value, est.mean_value_stderr
            )
        }),
    ))
}
