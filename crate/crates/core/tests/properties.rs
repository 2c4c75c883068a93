use proptest::prelude::*;

use data_pricing::mechanisms::{self, solve};
use data_pricing::model::{MarketParams, Mechanism};
use data_pricing::oracle::simpson;
use data_pricing::verify::relative_error;

fn market() -> impl Strategy<Value = MarketParams> {
    (-2.0f64..2.0, 0.0f64..0.999, 0.0f64..1.0)
        .prop_map(|(log_v, r, d_frac)| {
            let v = 10f64.powf(log_v);
            // d as a fraction of the widest feasible range (decentralized)
            let d = d_frac * 1.5 * (1.0 + r) * v * 0.999;
            MarketParams::new(v, r, d).unwrap()
        })
}

fn feasible_for(mechanism: Mechanism) -> impl Strategy<Value = MarketParams> {
    market().prop_filter("feasible", move |p| p.is_feasible(mechanism))
}

proptest! {
    #[test]
    fn demand_and_indifferent_user_add_to_one(params in market(), frac in 0.0f64..1.0) {
        let p = frac * params.shutdown_price();
        let total = params.demand(p).unwrap() + params.indifferent_user(p).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn surplus_matches_quadrature(params in market(), frac in 0.0f64..0.999) {
        let p = frac * params.shutdown_price();
        let a = params.value_scale();
        // CS = integral over adopting types theta >= 2p/A of (expected value - price)
        let quad = simpson(|theta| theta * a / 2.0 - p, 2.0 * p / a, 1.0, 1_000);
        let closed = params.consumer_surplus(p).unwrap();
        prop_assert!(relative_error(quad, closed, 1e-9 * a) < 1e-6, "{quad} vs {closed}");
    }

    #[test]
    fn prices_and_profits_scale_with_the_market(params in market(), k in 0.1f64..10.0) {
        let scaled = params.scaled(k).unwrap();
        for m in Mechanism::ALL {
            if !params.is_feasible(m) || !scaled.is_feasible(m) {
                continue;
            }
            let base = solve(m, &params, Some(0.4)).unwrap();
            let big = solve(m, &scaled, Some(0.4)).unwrap();
            prop_assert!(relative_error(big.price_p, k * base.price_p, 1e-12 * k) < 1e-9);
            prop_assert!(relative_error(big.profit_chain, k * base.profit_chain, 1e-12 * k) < 1e-9);
            prop_assert!(relative_error(big.demand, base.demand, 1e-12) < 1e-9);
        }
    }

    #[test]
    fn sharing_ratios_are_proper_fractions(params in feasible_for(Mechanism::BargainBoth)) {
        let b1 = mechanisms::solve_bargain_ratio(&params).unwrap();
        let b2 = mechanisms::solve_bargain_both(&params).unwrap();
        for o in [&b1, &b2] {
            let alpha = o.sharing_ratio_alpha.unwrap();
            prop_assert!(alpha > 0.0 && alpha <= 0.5, "{alpha}");
            prop_assert!(relative_error(o.profit_provider.unwrap(), o.profit_app.unwrap(), 0.0) < 1e-12);
        }
        prop_assert!(b2.sharing_ratio_alpha.unwrap() <= b1.sharing_ratio_alpha.unwrap());
    }

    #[test]
    fn chain_profit_never_beats_integration(params in feasible_for(Mechanism::Decentralized), rho in 0.01f64..0.99) {
        let best = mechanisms::solve_centralized(&params).map(|c| c.profit_chain);
        for m in Mechanism::ALL {
            if let (Ok(best), Ok(o)) = (best.clone(), solve(m, &params, Some(rho))) {
                prop_assert!(o.profit_chain <= best * (1.0 + 1e-12), "{m}: {} > {best}", o.profit_chain);
            }
        }
    }

    #[test]
    fn revenue_sharing_splits_first_best(params in feasible_for(Mechanism::RevenueSharing), rho in 0.01f64..0.99) {
        let rs = mechanisms::solve_revenue_sharing(&params, rho).unwrap();
        let c = mechanisms::solve_centralized(&params).unwrap();
        prop_assert!(relative_error(rs.profit_provider.unwrap(), rho * c.profit_chain, 0.0) < 1e-12);
        prop_assert!(relative_error(rs.profit_app.unwrap(), (1.0 - rho) * c.profit_chain, 0.0) < 1e-12);
        prop_assert_eq!(rs.price_p, c.price_p);
    }
}
