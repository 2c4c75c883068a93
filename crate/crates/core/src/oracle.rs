//! Numerical game solvers used to cross-check the closed-form equilibria.
//!
//! Nothing here evaluates an equilibrium formula. The solvers only know the
//! stage payoffs (margin times demand) and search for their maximizers:
//! bracketing searches for the one-dimensional stage problems, backward
//! induction for the two-stage games, and a zooming grid for the joint Nash
//! product.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{adoption_share, MarketParams, Mechanism};

/// Iteration cap for [`maximize_1d`].
pub const MAX_ITERATIONS: usize = 200;
/// Default absolute bracket width for one-dimensional searches.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default grid resolution per axis for [`nash_product_joint`].
pub const DEFAULT_GRID_N: usize = 200;
/// Minimum number of zoom rounds after the coarse grid.
pub const MIN_REFINEMENT_ROUNDS: usize = 3;
const MAX_REFINEMENT_ROUNDS: usize = 20;
/// Relative margin that turns the open price/ratio intervals into closed ones.
const EDGE_MARGIN: f64 = 1e-9;
/// Golden-section phase stops once the bracket is this fraction of the start width.
const LOCALIZE_FRACTION: f64 = 1e-3;
const INV_PHI: f64 = 0.618_033_988_749_894_8;
/// Inner stage searches run this much tighter than the outer one: the
/// outer objective inherits the inner argmax error to first order.
const INNER_TOL_FACTOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Argmax {
    Scalar(f64),
    Pair(f64, f64),
}

impl Argmax {
    /// First coordinate.
    pub fn first(&self) -> f64 {
        match *self {
            Argmax::Scalar(x) | Argmax::Pair(x, _) => x,
        }
    }

    pub fn second(&self) -> Option<f64> {
        match *self {
            Argmax::Scalar(_) => None,
            Argmax::Pair(_, y) => Some(y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub argmax: Argmax,
    pub objective_value: f64,
    pub iterations: usize,
    /// Final bracket width (1-D) or normalized grid step (2-D).
    pub resolution: f64,
    pub converged: bool,
    /// The maximizer sits on the edge of the search domain.
    pub boundary_hit: bool,
}

/// Maximizes a unimodal `objective` on `[lo, hi]` to bracket width `tol`.
///
/// A golden-section phase localizes the peak using function values only. It
/// hands over to bisection on the sign of a central-difference slope once the
/// bracket is small, because near the peak function values stop resolving
/// the maximizer long before the bracket reaches `tol`.
pub fn maximize_1d<F>(objective: F, lo: f64, hi: f64, tol: f64) -> Result<OracleResult>
where
    F: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!("search bracket [{lo}, {hi}] is empty")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    Ok(bracket_search(&objective, lo, hi, tol))
}

fn bracket_search<F>(f: &F, lo: f64, hi: f64, tol: f64) -> OracleResult
where
    F: Fn(f64) -> f64,
{
    let mut iterations = 0;
    let (mut a, mut b) = (lo, hi);
    let localize = (LOCALIZE_FRACTION * (hi - lo)).max(tol);

    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > localize && iterations < MAX_ITERATIONS {
        iterations += 1;
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }

    let h = (b - a) / 8.0;
    while b - a > tol && iterations < MAX_ITERATIONS {
        iterations += 1;
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let slope = if m - h < lo {
            (f(m + h) - f(m)) / h
        } else if m + h > hi {
            (f(m) - f(m - h)) / h
        } else {
            (f(m + h) - f(m - h)) / (2.0 * h)
        };
        if slope > 0.0 {
            a = m;
        } else if slope < 0.0 {
            b = m;
        } else {
            let quarter = 0.25 * (b - a);
            a = m - quarter;
            b = m + quarter;
        }
    }

    let x = 0.5 * (a + b);
    let width = b - a;
    OracleResult {
        argmax: Argmax::Scalar(x),
        objective_value: f(x),
        iterations,
        resolution: width,
        converged: width <= tol,
        boundary_hit: x - lo <= tol.max(width) || hi - x <= tol.max(width),
    }
}

/// What the data provider charges the application provider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Transfer {
    /// Per-user wholesale price `w`.
    Wholesale(f64),
    /// Provider keeps fraction `α` of the retail price.
    Share(f64),
    /// Provider keeps `ρ` of revenue plus a per-user fee `w′`.
    RevenueShare { rho: f64, upfront: f64 },
}

impl Transfer {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Transfer::Wholesale(w) => w.is_finite(),
            Transfer::Share(alpha) => alpha > 0.0 && alpha < 1.0,
            Transfer::RevenueShare { rho, upfront } => rho > 0.0 && rho < 1.0 && upfront.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("transfer {self:?} out of domain")))
        }
    }

    /// Application provider's margin per adopting user at retail price `p`.
    fn app_margin(&self, p: f64) -> f64 {
        match *self {
            Transfer::Wholesale(w) => p - w,
            Transfer::Share(alpha) => (1.0 - alpha) * p,
            Transfer::RevenueShare { rho, upfront } => (1.0 - rho) * p - upfront,
        }
    }

    /// Data provider's transfer income per adopting user, before feedback value.
    fn provider_margin(&self, p: f64) -> f64 {
        match *self {
            Transfer::Wholesale(w) => w,
            Transfer::Share(alpha) => alpha * p,
            Transfer::RevenueShare { rho, upfront } => rho * p + upfront,
        }
    }
}

/// Stage payoffs evaluated by every solver in this module.
#[derive(Debug, Clone, Copy)]
pub struct StagePayoffs {
    scale: f64,
    feedback: f64,
}

impl StagePayoffs {
    pub fn new(params: &MarketParams) -> Self {
        Self { scale: params.value_scale(), feedback: params.d() }
    }

    pub fn demand(&self, p: f64) -> f64 {
        adoption_share(self.scale, p)
    }

    pub fn app(&self, transfer: Transfer, p: f64) -> f64 {
        transfer.app_margin(p) * self.demand(p)
    }

    pub fn provider(&self, transfer: Transfer, p: f64) -> f64 {
        (transfer.provider_margin(p) + self.feedback) * self.demand(p)
    }

    pub fn chain(&self, p: f64) -> f64 {
        (p + self.feedback) * self.demand(p)
    }

    /// Nash product of the two firms' profits under a revenue share `α`.
    pub fn nash_product(&self, alpha: f64, p: f64) -> f64 {
        let t = Transfer::Share(alpha);
        self.provider(t, p) * self.app(t, p)
    }

    /// Consumer surplus by Simpson quadrature of adopters' expected utility.
    pub fn consumer_surplus(&self, p: f64) -> f64 {
        let mean_value = self.scale / 2.0;
        let marginal = (2.0 * p / self.scale).clamp(0.0, 1.0);
        simpson(|theta| theta * mean_value - p, marginal, 1.0, 10_000)
    }

    /// Bracket width for monetary search variables: `tol`, shrunk for
    /// markets whose value scale is below one.
    fn price_tol(&self, tol: f64) -> f64 {
        tol * self.scale.min(1.0)
    }

    fn inner_tol(&self, tol: f64) -> f64 {
        tol * INNER_TOL_FACTOR * self.scale
    }

    fn price_domain(&self) -> (f64, f64) {
        let eps = EDGE_MARGIN * self.scale;
        (eps, self.scale / 2.0 - eps)
    }
}

fn best_price(payoffs: &StagePayoffs, transfer: Transfer, tol: f64) -> OracleResult {
    let (lo, hi) = payoffs.price_domain();
    bracket_search(&|p| payoffs.app(transfer, p), lo, hi, tol)
}

/// Application provider's profit-maximizing retail price given the transfer
/// terms. Like every price search here, `tol` is an absolute bracket width
/// when `(1+r)v ≥ 1` and is scaled by `(1+r)v` below that.
pub fn downstream_best_response(params: &MarketParams, transfer: Transfer, tol: f64) -> Result<OracleResult> {
    transfer.validate()?;
    validate_tol(tol)?;
    let payoffs = StagePayoffs::new(params);
    Ok(best_price(&payoffs, transfer, payoffs.price_tol(tol)))
}

/// Integrated chain's profit-maximizing price.
pub fn centralized_price(params: &MarketParams, tol: f64) -> Result<OracleResult> {
    validate_tol(tol)?;
    let payoffs = StagePayoffs::new(params);
    let (lo, hi) = payoffs.price_domain();
    maximize_1d(|p| payoffs.chain(p), lo, hi, payoffs.price_tol(tol))
}

/// Backward induction for the wholesale-price game. Returns `(w, p)`.
pub fn stackelberg_solve(params: &MarketParams, tol: f64) -> Result<OracleResult> {
    params.require(Mechanism::Decentralized)?;
    validate_tol(tol)?;
    let payoffs = StagePayoffs::new(params);
    let inner_tol = payoffs.inner_tol(tol);
    let inner = InnerStats::default();
    let provider_value = |w: f64| {
        let t = Transfer::Wholesale(w);
        let reply = inner.record(best_price(&payoffs, t, inner_tol));
        payoffs.provider(t, reply.argmax.first())
    };
    let lo = -params.d() + EDGE_MARGIN * payoffs.scale;
    let outer = bracket_search(&provider_value, lo, payoffs.scale / 2.0, payoffs.price_tol(tol));
    let w = outer.argmax.first();
    let reply = inner.record(best_price(&payoffs, Transfer::Wholesale(w), inner_tol));
    Ok(inner.finish(outer, reply))
}

/// Nash bargaining over `α` with the retail price set by the application
/// provider's best response. Returns `(α, p)`.
pub fn nash_product_ratio(params: &MarketParams, tol: f64) -> Result<OracleResult> {
    params.require(Mechanism::BargainRatio)?;
    validate_tol(tol)?;
    let payoffs = StagePayoffs::new(params);
    let inner_tol = payoffs.inner_tol(tol);
    let inner = InnerStats::default();
    let product = |alpha: f64| {
        let reply = inner.record(best_price(&payoffs, Transfer::Share(alpha), inner_tol));
        payoffs.nash_product(alpha, reply.argmax.first())
    };
    let outer = bracket_search(&product, EDGE_MARGIN, 1.0 - EDGE_MARGIN, tol);
    let alpha = outer.argmax.first();
    let reply = inner.record(best_price(&payoffs, Transfer::Share(alpha), inner_tol));
    Ok(inner.finish(outer, reply))
}

#[derive(Default)]
struct InnerStats {
    iterations: Cell<usize>,
    all_converged: Cell<bool>,
    touched: Cell<bool>,
}

impl InnerStats {
    fn record(&self, r: OracleResult) -> OracleResult {
        if !self.touched.replace(true) {
            self.all_converged.set(true);
        }
        self.iterations.set(self.iterations.get() + r.iterations);
        self.all_converged.set(self.all_converged.get() && r.converged);
        r
    }

    fn finish(&self, outer: OracleResult, reply: OracleResult) -> OracleResult {
        OracleResult {
            argmax: Argmax::Pair(outer.argmax.first(), reply.argmax.first()),
            objective_value: outer.objective_value,
            iterations: outer.iterations + self.iterations.get(),
            resolution: outer.resolution.max(reply.resolution),
            converged: outer.converged && self.all_converged.get(),
            boundary_hit: outer.boundary_hit || reply.boundary_hit,
        }
    }
}

/// Joint Nash bargaining over `(α, p)`. Returns `(α, p)`.
///
/// A `grid_n × grid_n` grid over the whole domain picks the starting cell; each
/// refinement round re-grids a window of two cells on either side of the
/// incumbent. Rounds continue until the grid step, normalized by the domain
/// width on each axis, is at most `tol`.
pub fn nash_product_joint(params: &MarketParams, grid_n: usize, tol: f64) -> Result<OracleResult> {
    params.require(Mechanism::BargainBoth)?;
    validate_tol(tol)?;
    if grid_n < 100 {
        return Err(Error::Domain(format!("grid_n must be at least 100, got {grid_n}")));
    }
    let payoffs = StagePayoffs::new(params);
    let alpha_dom = (EDGE_MARGIN, 1.0 - EDGE_MARGIN);
    let price_dom = payoffs.price_domain();
    let alpha_width = alpha_dom.1 - alpha_dom.0;
    let price_width = price_dom.1 - price_dom.0;
    let objective = |alpha: f64, p: f64| payoffs.nash_product(alpha, p);

    let (mut alpha_win, mut price_win) = (alpha_dom, price_dom);
    let mut best = grid_argmax(&objective, alpha_win, price_win, grid_n);
    let mut rounds = 0;
    let mut resolution = (best.alpha_step / alpha_width).max(best.price_step / price_width);
    while rounds < MAX_REFINEMENT_ROUNDS && (rounds < MIN_REFINEMENT_ROUNDS || resolution > tol) {
        rounds += 1;
        alpha_win = (
            (best.alpha - 2.0 * best.alpha_step).max(alpha_dom.0),
            (best.alpha + 2.0 * best.alpha_step).min(alpha_dom.1),
        );
        price_win = (
            (best.price - 2.0 * best.price_step).max(price_dom.0),
            (best.price + 2.0 * best.price_step).min(price_dom.1),
        );
        best = grid_argmax(&objective, alpha_win, price_win, grid_n);
        resolution = (best.alpha_step / alpha_width).max(best.price_step / price_width);
    }

    let at_domain_edge = best.alpha <= alpha_dom.0 + best.alpha_step
        || best.alpha >= alpha_dom.1 - best.alpha_step
        || best.price <= price_dom.0 + best.price_step
        || best.price >= price_dom.1 - best.price_step;
    Ok(OracleResult {
        argmax: Argmax::Pair(best.alpha, best.price),
        objective_value: best.value,
        iterations: (rounds + 1) * grid_n * grid_n,
        resolution,
        converged: resolution <= tol,
        boundary_hit: at_domain_edge,
    })
}

#[derive(Debug, Clone, Copy)]
struct GridBest {
    alpha: f64,
    price: f64,
    value: f64,
    alpha_step: f64,
    price_step: f64,
}

/// Exhaustive grid maximum; ties go to the lowest `(i, j)` so the answer does
/// not depend on how rows are split across threads.
fn grid_argmax<F>(f: &F, alpha: (f64, f64), price: (f64, f64), n: usize) -> GridBest
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let alpha_step = (alpha.1 - alpha.0) / (n - 1) as f64;
    let price_step = (price.1 - price.0) / (n - 1) as f64;
    let at = |k: usize, lo: f64, step: f64, hi: f64| if k == n - 1 { hi } else { lo + k as f64 * step };
    let (i, j, value) = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = at(i, alpha.0, alpha_step, alpha.1);
            let mut row_best = (i, 0, f64::NEG_INFINITY);
            for j in 0..n {
                let value = f(a, at(j, price.0, price_step, price.1));
                if value > row_best.2 {
                    row_best = (i, j, value);
                }
            }
            row_best
        })
        .reduce(
            || (usize::MAX, usize::MAX, f64::NEG_INFINITY),
            |x, y| {
                if y.2 > x.2 || (y.2 == x.2 && (y.0, y.1) < (x.0, x.1)) {
                    y
                } else {
                    x
                }
            },
        );
    GridBest {
        alpha: at(i, alpha.0, alpha_step, alpha.1),
        price: at(j, price.0, price_step, price.1),
        value,
        alpha_step,
        price_step,
    }
}

fn validate_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("tolerance must be positive, got {tol}")))
    }
}

/// Difference stencil for [`try_derivative`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    Central,
    /// Second-order one-sided stencil using `x, x+h, x+2h`.
    Forward,
    /// Second-order one-sided stencil using `x, x−h, x−2h`.
    Backward,
}

/// Central difference `(f(x+h) − f(x−h)) / 2h`.
pub fn finite_difference<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    try_derivative(|t| Ok(f(t)), x, h, Stencil::Central)
}

pub fn try_derivative<F>(f: F, x: f64, h: f64, stencil: Stencil) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let value = match stencil {
        Stencil::Central => (f(x + h)? - f(x - h)?) / (2.0 * h),
        Stencil::Forward => (-3.0 * f(x)? + 4.0 * f(x + h)? - f(x + 2.0 * h)?) / (2.0 * h),
        Stencil::Backward => (3.0 * f(x)? - 4.0 * f(x - h)? + f(x - 2.0 * h)?) / (2.0 * h),
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain(format!("derivative at {x} is not finite")))
    }
}

/// Finite-difference Hessian `[[f_xx, f_xy], [f_xy, f_yy]]`.
pub fn hessian_2d<F>(f: F, x: f64, y: f64, hx: f64, hy: f64) -> [[f64; 2]; 2]
where
    F: Fn(f64, f64) -> f64,
{
    let centre = f(x, y);
    let fxx = (f(x + hx, y) - 2.0 * centre + f(x - hx, y)) / (hx * hx);
    let fyy = (f(x, y + hy) - 2.0 * centre + f(x, y - hy)) / (hy * hy);
    let fxy = (f(x + hx, y + hy) - f(x + hx, y - hy) - f(x - hx, y + hy) + f(x - hx, y - hy)) / (4.0 * hx * hy);
    [[fxx, fxy], [fxy, fyy]]
}

/// Composite Simpson rule; `panels` is rounded up to an even count.
pub fn simpson<F>(f: F, a: f64, b: f64, panels: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    let n = (panels.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub samples: usize,
    pub demand: f64,
    pub demand_stderr: f64,
    pub consumer_surplus: f64,
    pub consumer_surplus_stderr: f64,
    /// Sample mean of the realized application value `r̃·v`.
    pub mean_value: f64,
    pub mean_value_stderr: f64,
}

pub const MIN_MONTE_CARLO_SAMPLES: usize = 10_000;

/// Simulates `n` end-users with `θ ~ U[0,1]` facing price `p`.
///
/// A user adopts iff `θ·(1+r)v/2 − p ≥ 0`. Realized values `r̃·v` are drawn
/// from a second pass over the same seeded stream.
pub fn monte_carlo_market(params: &MarketParams, p: f64, n: usize, seed: u64) -> Result<MonteCarloEstimate> {
    params.demand(p)?;
    if n < MIN_MONTE_CARLO_SAMPLES {
        return Err(Error::Domain(format!(
            "need at least {MIN_MONTE_CARLO_SAMPLES} Monte Carlo samples, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean_value = params.expected_application_value();
    let mut adopters = 0usize;
    let (mut surplus, mut surplus_sq) = (0.0, 0.0);
    for _ in 0..n {
        let theta: f64 = rng.gen();
        let utility = theta * mean_value - p;
        if utility >= 0.0 {
            adopters += 1;
            surplus += utility;
            surplus_sq += utility * utility;
        }
    }
    let nf = n as f64;
    let demand = adopters as f64 / nf;
    let cs = surplus / nf;
    let cs_var = (surplus_sq / nf - cs * cs).max(0.0);

    let (lo, v) = (params.r(), params.v());
    let (mut value_sum, mut value_sq) = (0.0, 0.0);
    for _ in 0..n {
        let u: f64 = rng.gen();
        let realized = (lo + (1.0 - lo) * u) * v;
        value_sum += realized;
        value_sq += realized * realized;
    }
    let value_mean = value_sum / nf;
    let value_var = (value_sq / nf - value_mean * value_mean).max(0.0);

    Ok(MonteCarloEstimate {
        samples: n,
        demand,
        demand_stderr: (demand * (1.0 - demand) / nf).sqrt(),
        consumer_surplus: cs,
        consumer_surplus_stderr: (cs_var / nf).sqrt(),
        mean_value: value_mean,
        mean_value_stderr: (value_var / nf).sqrt(),
    })
}
