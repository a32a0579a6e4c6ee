//! The AFSVJD pricing integrand and its sub-terms.
//!
//! The integrand of the semi-closed call price is
//! `f(k) = e^{−ikX} F̂(k, v₀, τ) / (k² − ik) · φ(−k)` on the contour `k = x + i/2`,
//! with the fundamental transform `F̂ = exp(C + D v₀)` and the compound
//! Poisson characteristic function `φ`. Everything is generic over the
//! [`Arith`] context so the same code runs in binary64 and in extended
//! precision. `H = 1/2` gives the Bates model and additionally `λ = 0` Heston.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::precision::{Arith, Complex, Extended, PrecisionError, PrecisionMode, Real, Working};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("invalid market quote: {0}")]
    InvalidQuote(String),
    #[error("sigma = 0 makes the 2/B^2 prefactor undefined")]
    ZeroVolOfVol,
    #[error("degenerate transform at k = {re} + {im}i: {what}")]
    Degenerate { re: f64, im: f64, what: &'static str },
    #[error(transparent)]
    Precision(#[from] PrecisionError),
}

/// Distribution of the log jump size `ln(1 + Y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum JumpSpec {
    LogNormal { mu: f64, sigma: f64 },
    LogUniform { a: f64, b: f64 },
    None,
}

/// Lower and upper bounds of the 9-vector `(v0, κ, θ, σ, ρ, λ, μ_J, σ_J, H)`.
pub const PARAM_LOWER: [f64; 9] = [0.0, 0.0, 0.0, 0.0, -1.0, 0.0, -10.0, 0.0, 0.5];
pub const PARAM_UPPER: [f64; 9] = [1.0, 150.0, 1.0, 4.0, 1.0, 100.0, 5.0, 4.0, 1.0];
pub const PARAM_NAMES: [&str; 9] = ["v0", "kappa", "theta", "sigma", "rho", "lambda", "mu_j", "sigma_j", "hurst"];

/// Model parameters of the approximative fractional SVJD model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub v0: f64,
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub lambda: f64,
    pub jump: JumpSpec,
    pub hurst: f64,
    pub epsilon: f64,
}

impl ModelParams {
    /// Log-normal jump parameters from the calibration 9-vector.
    pub fn from_vector(chi: &[f64; 9], epsilon: f64) -> Self {
        ModelParams {
            v0: chi[0],
            kappa: chi[1],
            theta: chi[2],
            sigma: chi[3],
            rho: chi[4],
            lambda: chi[5],
            jump: JumpSpec::LogNormal { mu: chi[6], sigma: chi[7] },
            hurst: chi[8],
            epsilon,
        }
    }

    /// The 9-vector; jump components other than log-normal map to `(0, 0)`.
    pub fn to_vector(&self) -> [f64; 9] {
        let (mu, sj) = match self.jump {
            JumpSpec::LogNormal { mu, sigma } => (mu, sigma),
            _ => (0.0, 0.0),
        };
        [self.v0, self.kappa, self.theta, self.sigma, self.rho, self.lambda, mu, sj, self.hurst]
    }

    /// Checks the box bounds, `ε > 0` and the jump specification.
    pub fn validate(&self) -> Result<(), ModelError> {
        let v = self.to_vector();
        for i in 0..9 {
            if !v[i].is_finite() || v[i] < PARAM_LOWER[i] || v[i] > PARAM_UPPER[i] {
                return Err(ModelError::InvalidParams(format!(
                    "{} = {} outside [{}, {}]",
                    PARAM_NAMES[i], v[i], PARAM_LOWER[i], PARAM_UPPER[i]
                )));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(ModelError::InvalidParams(format!("epsilon = {} must be > 0", self.epsilon)));
        }
        if let JumpSpec::LogUniform { a, b } = self.jump {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(ModelError::InvalidParams(format!("log-uniform jumps need a < b, got [{a}, {b}]")));
            }
        }
        Ok(())
    }

    /// Volatility scale `B = ε^(H − 1/2) σ`.
    pub fn vol_scale(&self) -> f64 {
        self.epsilon.powf(self.hurst - 0.5) * self.sigma
    }
}

/// Market data `ψ = (τ, K, r, S)` with optional quotes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketQuote {
    pub tau: f64,
    pub strike: f64,
    pub rate: f64,
    pub spot: f64,
    #[serde(default)]
    pub bid: Option<f64>,
    #[serde(default)]
    pub ask: Option<f64>,
}

impl MarketQuote {
    pub fn new(tau: f64, strike: f64, rate: f64, spot: f64) -> Self {
        MarketQuote { tau, strike, rate, spot, bid: None, ask: None }
    }

    pub fn with_spread(mut self, bid: f64, ask: f64) -> Self {
        self.bid = Some(bid);
        self.ask = Some(ask);
        self
    }

    /// Hard requirements: finite, `τ ≥ 0`, `K > 0`, `S > 0`, `ask ≥ bid > 0`.
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidQuote(m));
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return bad(format!("tau = {} must be finite and >= 0", self.tau));
        }
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return bad(format!("strike = {} must be > 0", self.strike));
        }
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return bad(format!("spot = {} must be > 0", self.spot));
        }
        if !self.rate.is_finite() {
            return bad(format!("rate = {} must be finite", self.rate));
        }
        match (self.bid, self.ask) {
            (Some(b), Some(a)) if !(b > 0.0 && a >= b) => bad(format!("need ask >= bid > 0, got bid {b}, ask {a}")),
            (Some(_), None) | (None, Some(_)) => bad("bid and ask must be given together".into()),
            _ => Ok(()),
        }
    }

    /// Soft checks against the usual market ranges; never an error.
    pub fn range_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !(self.tau > 0.0 && self.tau <= 5.0) {
            w.push(format!("tau = {} outside (0, 5]", self.tau));
        }
        if !(self.spot > 0.0 && self.spot <= 30_000.0) {
            w.push(format!("spot = {} outside (0, 30000]", self.spot));
        }
        if !(self.strike > 0.0 && self.strike <= 90_000.0) {
            w.push(format!("strike = {} outside (0, 90000]", self.strike));
        }
        if !(self.rate > 0.0 && self.rate <= 0.05) {
            w.push(format!("rate = {} outside (0, 0.05]", self.rate));
        }
        w
    }

    /// Log-moneyness shifted by the rate: `X = ln(S/K) + rτ`.
    pub fn log_forward_moneyness(&self) -> f64 {
        (self.spot / self.strike).ln() + self.rate * self.tau
    }
}

/// Sub-terms of the fundamental transform at one `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformTerms<R> {
    /// `B = ε^(H−1/2) σ`
    pub vol_scale: R,
    /// `b = κ + ikρB`
    pub kappa_shift: Complex<R>,
    /// `d = sqrt(b² + B²(k² − ik))`, principal branch
    pub root: Complex<R>,
    /// `g = (b − d)/(b + d)`
    pub ratio: Complex<R>,
    /// `Y = −(k² − ik)/(b + d)`
    pub y: Complex<R>,
    /// `C₁ = 2/B²`
    pub log_prefactor: Complex<R>,
    /// `C₂ = ln((1 − g e^{−dτ})/(1 − g))`
    pub log_term: Complex<R>,
    /// `C = κθ(Yτ − C₁C₂)`
    pub c_term: Complex<R>,
    /// `D = Y(1 − e^{−dτ})/(1 − g e^{−dτ})`
    pub d_term: Complex<R>,
}

impl<R: Real> TransformTerms<R> {
    pub fn lower(&self) -> TransformTerms<f64> {
        TransformTerms {
            vol_scale: self.vol_scale.to_f64(),
            kappa_shift: self.kappa_shift.lower(),
            root: self.root.lower(),
            ratio: self.ratio.lower(),
            y: self.y.lower(),
            log_prefactor: self.log_prefactor.lower(),
            log_term: self.log_term.lower(),
            c_term: self.c_term.lower(),
            d_term: self.d_term.lower(),
        }
    }
}

/// Model and quote constants lifted once into a precision context.
#[derive(Debug, Clone)]
pub struct Prepared<A: Arith> {
    ctx: A,
    kappa: A::R,
    kappa_theta: A::R,
    v0: A::R,
    rho: A::R,
    vol_scale: A::R,
    sigma_is_zero: bool,
    lambda: A::R,
    lambda_is_zero: bool,
    jump: JumpSpec,
    beta: A::R,
    tau: A::R,
    tau_is_zero: bool,
    log_moneyness: A::R,
}

impl<A: Arith> Prepared<A> {
    pub fn new(ctx: A, params: &ModelParams, quote: &MarketQuote) -> Self {
        let l = |x: f64| ctx.lift(x);
        let half = l(0.5);
        let vol_scale = l(params.epsilon).powr(&(l(params.hurst) - half)) * l(params.sigma);
        let spot_over_strike = l(quote.spot) / l(quote.strike);
        let log_moneyness = spot_over_strike.ln() + l(quote.rate) * l(quote.tau);
        Prepared {
            ctx,
            kappa: l(params.kappa),
            kappa_theta: l(params.kappa) * l(params.theta),
            v0: l(params.v0),
            rho: l(params.rho),
            vol_scale,
            sigma_is_zero: params.sigma == 0.0,
            lambda: l(params.lambda),
            lambda_is_zero: params.lambda == 0.0,
            jump: params.jump,
            beta: beta_in(ctx, &params.jump),
            tau: l(quote.tau),
            tau_is_zero: quote.tau == 0.0,
            log_moneyness,
        }
    }

    pub fn ctx(&self) -> A {
        self.ctx
    }

    /// Contour point `x + i/2` in this context.
    pub fn contour(&self, x: f64) -> Complex<A::R> {
        Complex::new(self.ctx.lift(x), self.ctx.lift(0.5))
    }

    pub fn terms(&self, k: &Complex<A::R>) -> Result<TransformTerms<A::R>, ModelError> {
        if self.sigma_is_zero {
            return Err(ModelError::ZeroVolOfVol);
        }
        let degenerate = |what| {
            let z = k.lower();
            ModelError::Degenerate { re: z.re, im: z.im, what }
        };
        let c = |x: f64| Complex::from_real(self.ctx.lift(x));
        let b2 = self.vol_scale.clone() * self.vol_scale.clone();
        let ik = k.mul_i();
        let kk = k.square() - ik.clone();
        let kappa_shift = Complex::from_real(self.kappa.clone()) + ik.scale(&self.rho).scale(&self.vol_scale);
        let root = (kappa_shift.square() + kk.scale(&b2)).sqrt();
        let sum = kappa_shift.clone() + root.clone();
        if sum.is_zero() {
            return Err(degenerate("b + d = 0"));
        }
        let ratio = (kappa_shift.clone() - root.clone()) / sum.clone();
        let y = -(kk / sum);
        let log_prefactor = Complex::from_real(self.ctx.lift(2.0) / b2);
        let one_minus_g = c(1.0) - ratio.clone();
        if one_minus_g.is_zero() {
            return Err(degenerate("1 - g = 0"));
        }
        let decay = (-root.clone()).scale(&self.tau).exp();
        let num = c(1.0) - ratio.clone() * decay.clone();
        let log_term = (num.clone() / one_minus_g).ln();
        let c_term = (y.scale(&self.tau) - log_term.scale(&log_prefactor.re)).scale(&self.kappa_theta);
        let d_term = y.clone() * (c(1.0) - decay) / num;
        Ok(TransformTerms {
            vol_scale: self.vol_scale.clone(),
            kappa_shift,
            root,
            ratio,
            y,
            log_prefactor,
            log_term,
            c_term,
            d_term,
        })
    }

    /// `φ(k)` of the compound Poisson jump part.
    pub fn char_fn(&self, k: &Complex<A::R>) -> Complex<A::R> {
        if self.lambda_is_zero || self.tau_is_zero {
            return Complex::from_real(self.ctx.lift(1.0));
        }
        char_fn_in(self.ctx, &self.jump, &self.lambda, &self.beta, &self.tau, k)
    }

    /// Integrand `f(k)`; `c_override` substitutes an externally computed `C(k, τ)`.
    pub fn integrand(
        &self,
        k: &Complex<A::R>,
        c_override: Option<Complex<A::R>>,
    ) -> Result<Complex<A::R>, ModelError> {
        let terms = self.terms(k)?;
        Ok(self.assemble(k, c_override.unwrap_or(terms.c_term), &terms.d_term))
    }

    /// Integrand together with the transform terms it was built from.
    pub fn integrand_with_terms(
        &self,
        k: &Complex<A::R>,
    ) -> Result<(Complex<A::R>, TransformTerms<A::R>), ModelError> {
        let terms = self.terms(k)?;
        let f = self.assemble(k, terms.c_term.clone(), &terms.d_term);
        Ok((f, terms))
    }

    fn assemble(&self, k: &Complex<A::R>, c_term: Complex<A::R>, d_term: &Complex<A::R>) -> Complex<A::R> {
        let transform = (c_term + d_term.scale(&self.v0)).exp();
        let kk = k.square() - k.mul_i();
        let phase = (-k.mul_i().scale(&self.log_moneyness)).exp();
        let jumps = self.char_fn(&-k.clone());
        phase * transform / kk * jumps
    }
}

fn beta_in<A: Arith>(ctx: A, jump: &JumpSpec) -> A::R {
    match jump {
        JumpSpec::None => ctx.lift(0.0),
        _ => {
            let minus_i = Complex::new(ctx.lift(0.0), ctx.lift(-1.0));
            jump_fourier_in(ctx, jump, &minus_i).re - ctx.lift(1.0)
        }
    }
}

fn jump_fourier_in<A: Arith>(ctx: A, jump: &JumpSpec, k: &Complex<A::R>) -> Complex<A::R> {
    match *jump {
        JumpSpec::None => Complex::from_real(ctx.lift(1.0)),
        JumpSpec::LogNormal { mu, sigma } => {
            let s2 = ctx.lift(sigma) * ctx.lift(sigma) / ctx.lift(2.0);
            (k.mul_i().scale(&ctx.lift(mu)) - k.square().scale(&s2)).exp()
        }
        JumpSpec::LogUniform { a, b } => {
            if k.is_zero() {
                return Complex::from_real(ctx.lift(1.0));
            }
            let ik = k.mul_i();
            let num = ik.scale(&ctx.lift(b)).exp() - ik.scale(&ctx.lift(a)).exp();
            num / ik.scale(&(ctx.lift(b) - ctx.lift(a)))
        }
    }
}

fn char_fn_in<A: Arith>(
    ctx: A,
    jump: &JumpSpec,
    lambda: &A::R,
    beta: &A::R,
    tau: &A::R,
    k: &Complex<A::R>,
) -> Complex<A::R> {
    let lt = lambda.clone() * tau.clone();
    let drift = -k.mul_i().scale(&(lt.clone() * beta.clone()));
    let jumps = (jump_fourier_in(ctx, jump, k) - Complex::from_real(ctx.lift(1.0))).scale(&lt);
    (drift + jumps).exp()
}

fn with_mode<T>(
    mode: PrecisionMode,
    working: impl FnOnce(Working) -> T,
    extended: impl FnOnce(Extended) -> T,
) -> Result<T, ModelError> {
    Ok(match mode.validate()? {
        PrecisionMode::Working => working(Working),
        PrecisionMode::Extended(d) => extended(Extended::new(d)?),
    })
}

/// `φ̂(k)`, the Fourier transform of the log jump size, lowered to binary64.
pub fn jump_fourier(jump: &JumpSpec, k: Complex<f64>, mode: PrecisionMode) -> Result<Complex<f64>, ModelError> {
    with_mode(
        mode,
        |w| jump_fourier_in(w, jump, &k),
        |e| jump_fourier_in(e, jump, &e.lift_complex(k)).lower(),
    )
}

/// Mean relative jump `β = φ̂(−i) − 1`.
pub fn beta(jump: &JumpSpec) -> f64 {
    beta_in(Working, jump)
}

/// `φ(k) = exp(−iλβkτ + λτ(φ̂(k) − 1))`.
pub fn char_fn(
    jump: &JumpSpec,
    lambda: f64,
    tau: f64,
    k: Complex<f64>,
    mode: PrecisionMode,
) -> Result<Complex<f64>, ModelError> {
    if lambda == 0.0 || tau == 0.0 {
        return Ok(Complex::new(1.0, 0.0));
    }
    with_mode(
        mode,
        |w| char_fn_in(w, jump, &lambda, &beta_in(w, jump), &tau, &k),
        |e| {
            let (l, b, t) = (e.lift(lambda), beta_in(e, jump), e.lift(tau));
            char_fn_in(e, jump, &l, &b, &t, &e.lift_complex(k)).lower()
        },
    )
}

fn dummy_quote(tau: f64) -> MarketQuote {
    MarketQuote::new(tau, 1.0, 0.0, 1.0)
}

/// All transform sub-terms at `k`, computed at `mode` and lowered to binary64.
pub fn transform_terms(
    params: &ModelParams,
    tau: f64,
    k: Complex<f64>,
    mode: PrecisionMode,
) -> Result<TransformTerms<f64>, ModelError> {
    if !(params.epsilon.is_finite() && params.epsilon > 0.0) {
        return Err(ModelError::InvalidParams(format!("epsilon = {} must be > 0", params.epsilon)));
    }
    let q = dummy_quote(tau);
    with_mode(
        mode,
        |w| Prepared::new(w, params, &q).terms(&k),
        |e| Prepared::new(e, params, &q).terms(&e.lift_complex(k)).map(|t| t.lower()),
    )?
}

/// Integrand `f(x + i/2)` at `mode`, lowered to binary64.
pub fn integrand(
    params: &ModelParams,
    quote: &MarketQuote,
    x: f64,
    mode: PrecisionMode,
) -> Result<Complex<f64>, ModelError> {
    with_mode(
        mode,
        |w| {
            let p = Prepared::new(w, params, quote);
            p.integrand(&p.contour(x), None)
        },
        |e| {
            let p = Prepared::new(e, params, quote);
            p.integrand(&p.contour(x), None).map(|z| z.lower())
        },
    )?
}

/// `f₀ = |Re f(0 + i/2)|`.
pub fn f_zero(params: &ModelParams, quote: &MarketQuote, mode: PrecisionMode) -> Result<f64, ModelError> {
    Ok(integrand(params, quote, 0.0, mode)?.re.abs())
}
