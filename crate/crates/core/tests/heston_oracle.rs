//! Heston prices against brute-force composite Simpson oracles.

use std::f64::consts::PI;

use num_complex::Complex64;
use quadprice::model::{integrand, MarketQuote};
use quadprice::precision::PrecisionMode;
use quadprice::pricing::{price_call_reduced, price_from_integral, ModelKind};
use quadprice::quadrature::QuadSpec;
use quadprice::switch::EvalStrategy;

const CHI: [f64; 5] = [0.05, 2.0, 0.04, 0.5, -0.7];

fn quote() -> MarketQuote {
    MarketQuote::new(0.75, 110.0, 0.02, 100.0)
}

/// Composite Simpson with step `h` on `[a, b]`, stopping once `|f|` stays below `floor` for a whole block.
fn simpson(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, h: f64, floor: f64) -> f64 {
    let n = ((b - a) / h).round() as usize;
    let n = n + n % 2;
    let mut sum = f(a);
    let mut block_max = 0.0f64;
    let mut last = n;
    for i in 1..n {
        let v = f(a + i as f64 * h);
        sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        block_max = block_max.max(v.abs());
        if i % 2000 == 0 {
            if block_max < floor {
                last = i;
                break;
            }
            block_max = 0.0;
        }
    }
    if last == n {
        sum += f(b);
    } else {
        // Undo the last interior weight: treat it as the endpoint.
        let v = f(a + last as f64 * h);
        sum -= v;
    }
    sum * h / 3.0
}

#[test]
fn matches_64_digit_simpson() {
    let q = quote();
    let p = ModelKind::Heston.params(&CHI, 1e-6).unwrap();
    let mode = PrecisionMode::Extended(64);
    let oracle = simpson(|x| integrand(&p, &q, x, mode).unwrap().re, 0.0, 500.0, 1e-3, 1e-30);
    let oracle_price = price_from_integral(&q, oracle);
    for st in [EvalStrategy::WorkingOnly, EvalStrategy::ExtendedFull(32)] {
        let r = price_call_reduced(ModelKind::Heston, &CHI, 1e-6, &q, &QuadSpec::default(), st).unwrap();
        assert!((r.price - oracle_price).abs() < 1e-6, "{st}: {} vs {oracle_price}", r.price);
    }
}

/// Gil-Pelaez probabilities in the rotation-count-free form.
fn little_trap_price(chi: &[f64; 5], q: &MarketQuote) -> f64 {
    let [v0, kappa, theta, sigma, rho] = *chi;
    let (s, k, r, tau) = (q.spot, q.strike, q.rate, q.tau);
    let i = Complex64::i();
    let prob = |u: f64, b: f64| {
        let g = |phi: f64| {
            let beta = b - rho * sigma * i * phi;
            let d = (beta * beta - sigma * sigma * (2.0 * u * i * phi - phi * phi)).sqrt();
            let g = (beta - d) / (beta + d);
            let e = (-d * tau).exp();
            let c = r * i * phi * tau
                + kappa * theta / (sigma * sigma) * ((beta - d) * tau - 2.0 * ((1.0 - g * e) / (1.0 - g)).ln());
            let dd = (beta - d) / (sigma * sigma) * (1.0 - e) / (1.0 - g * e);
            let f = (c + dd * v0 + i * phi * (s / k).ln()).exp();
            (f / (i * phi)).re
        };
        0.5 + simpson(g, 1e-9, 500.0, 1e-3, 1e-18) / PI
    };
    s * prob(0.5, kappa - rho * sigma) - k * (-r * tau).exp() * prob(-0.5, kappa)
}

#[test]
fn matches_independent_heston_formula() {
    for strike in [80.0, 100.0, 110.0, 130.0] {
        let q = MarketQuote::new(0.75, strike, 0.02, 100.0);
        let oracle = little_trap_price(&CHI, &q);
        let r = price_call_reduced(ModelKind::Heston, &CHI, 1e-6, &q, &QuadSpec::default(), EvalStrategy::WorkingOnly)
            .unwrap();
        assert!((r.price - oracle).abs() < 1e-6, "K = {strike}: {} vs {oracle}", r.price);
    }
}
