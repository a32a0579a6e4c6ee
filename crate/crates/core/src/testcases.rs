//! Named scenarios used throughout the tests, the book and the CLI.

use crate::model::{JumpSpec, MarketQuote, ModelParams};

/// A parameter set together with the market quote it is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub params: ModelParams,
    pub quote: MarketQuote,
}

/// Volatilities of volatility swept in the switching study of test case 1.
pub const TEST_CASE_1_SIGMAS: [f64; 10] = [0.1, 0.05, 0.01, 0.005, 0.001, 0.0005, 1e-4, 5e-5, 1e-5, 1e-6];

/// Volatilities of volatility swept in test case 2.
pub const TEST_CASE_2_SIGMAS: [f64; 4] = [1e-4, 5e-5, 1e-5, 1e-6];

/// Strongly persistent (`H = 0.96`) parameters with a large negative jump mean.
pub fn test_case_1(sigma: f64) -> Scenario {
    Scenario {
        name: "test-case-1",
        params: ModelParams {
            v0: 0.97,
            kappa: 17.6,
            theta: 0.95,
            sigma,
            rho: -0.86,
            lambda: 11.7,
            jump: JumpSpec::LogNormal { mu: -6.66, sigma: 1.007 },
            hurst: 0.96,
            epsilon: 1e-3,
        },
        quote: MarketQuote::new(0.120548, 6250.0, 0.009, 6721.8),
    }
}

/// Moderate roughness (`H = 0.6`) with frequent jumps; same quote as test case 1.
pub fn test_case_2(sigma: f64) -> Scenario {
    Scenario {
        name: "test-case-2",
        params: ModelParams {
            v0: 0.3,
            kappa: 5.0,
            theta: 0.1,
            sigma,
            rho: -0.5,
            lambda: 60.0,
            jump: JumpSpec::LogNormal { mu: -9.0, sigma: 1.1 },
            hurst: 0.6,
            epsilon: 1e-3,
        },
        quote: MarketQuote::new(0.120548, 6250.0, 0.009, 6721.8),
    }
}

/// An in-the-money call whose binary64 price is off by more than a hundred dollars.
pub fn hundred_dollar() -> Scenario {
    Scenario {
        name: "hundred-dollar",
        params: ModelParams::from_vector(&[0.98, 8.0, 0.8, 1e-6, -0.75, 0.75, 1.4, 0.2, 0.9], 1e-3),
        quote: MarketQuote::new(0.34, 12500.0, 0.017, 10000.0),
    }
}

/// Looks a scenario up by name; `sigma` is ignored for fixed scenarios.
pub fn by_name(name: &str, sigma: f64) -> Option<Scenario> {
    match name {
        "test-case-1" | "tc1" => Some(test_case_1(sigma)),
        "test-case-2" | "tc2" => Some(test_case_2(sigma)),
        "hundred-dollar" => Some(hundred_dollar()),
        _ => None,
    }
}
