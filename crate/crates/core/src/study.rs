//! Random-sampling studies of the switching decision.
//!
//! Draw `i` uses a ChaCha stream keyed by `(seed, i)`, so results do not
//! depend on how draws are scheduled across threads.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{JumpSpec, MarketQuote, ModelParams, PARAM_LOWER, PARAM_UPPER};
use crate::pricing::price_call;
use crate::quadrature::QuadSpec;
use crate::switch::{decide, EvalStrategy, SwitchDecision};
use crate::testcases::test_case_1;

/// Integral error above which a working-precision integral is problematic.
pub const PROBLEM_ERROR: f64 = 1e-8;
/// Evaluation count above which a working-precision integral is problematic.
pub const PROBLEM_FEVALS: u64 = 10_000;

/// Where census quotes come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QuoteSource {
    Fixed(MarketQuote),
    /// Uniform in `τ ∈ (0, 5]`, `S ∈ (0, 30000]`, `K ∈ (0, 90000]`, `r ∈ (0, 0.05]`.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub n: u64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    /// Sample `σ` log-uniformly instead of uniformly.
    pub log_uniform: bool,
    pub epsilon: f64,
    pub quotes: QuoteSource,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(n: u64, sigma_lo: f64, sigma_hi: f64, epsilon: f64, seed: u64) -> Self {
        SamplingPlan { n, sigma_lo, sigma_hi, log_uniform: false, epsilon, quotes: QuoteSource::Sampled, seed }
    }

    /// The test-case quote `(0.120548, 6250, 0.009, 6721.8)`.
    pub fn with_fixed_quote(mut self) -> Self {
        self.quotes = QuoteSource::Fixed(test_case_1(0.1).quote);
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.sigma_lo > 0.0 && self.sigma_lo < self.sigma_hi && self.sigma_hi <= PARAM_UPPER[3]) {
            return Err(format!("need 0 < sigma_lo < sigma_hi <= 4, got [{}, {}]", self.sigma_lo, self.sigma_hi));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(format!("epsilon = {} must be > 0", self.epsilon));
        }
        Ok(())
    }

    /// The `i`-th draw of parameters and quote.
    pub fn draw(&self, i: u64) -> (ModelParams, MarketQuote) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i);
        let mut chi = [0.0; 9];
        for k in 0..9 {
            chi[k] = rng.random_range(PARAM_LOWER[k]..=PARAM_UPPER[k]);
        }
        let u: f64 = rng.random();
        chi[3] = if self.log_uniform {
            (self.sigma_lo.ln() + u * (self.sigma_hi / self.sigma_lo).ln()).exp()
        } else {
            self.sigma_lo + u * (self.sigma_hi - self.sigma_lo)
        };
        let params = ModelParams::from_vector(&chi, self.epsilon);
        let quote = match self.quotes {
            QuoteSource::Fixed(q) => q,
            QuoteSource::Sampled => {
                // 1 − U lies in (0, 1].
                let mut open = |hi: f64| hi * (1.0 - rng.random::<f64>());
                MarketQuote::new(open(5.0), open(90_000.0), open(0.05), open(30_000.0))
            }
        };
        (params, quote)
    }
}

/// Histogram of the order difference `o` with unit bins `[k, k+1)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderHistogram {
    pub bins: BTreeMap<i64, u64>,
    pub neg_inf: u64,
    pub pos_inf: u64,
    /// Draws where `o` is NaN or the model could not be evaluated.
    pub undefined: u64,
}

impl OrderHistogram {
    pub fn add(&mut self, o: Option<f64>) {
        match o {
            Some(o) if o == f64::INFINITY => self.pos_inf += 1,
            Some(o) if o == f64::NEG_INFINITY => self.neg_inf += 1,
            Some(o) if o.is_finite() => *self.bins.entry(o.floor() as i64).or_insert(0) += 1,
            _ => self.undefined += 1,
        }
    }

    pub fn merge(mut self, other: OrderHistogram) -> Self {
        for (k, v) in other.bins {
            *self.bins.entry(k).or_insert(0) += v;
        }
        self.neg_inf += other.neg_inf;
        self.pos_inf += other.pos_inf;
        self.undefined += other.undefined;
        self
    }

    pub fn total(&self) -> u64 {
        self.bins.values().sum::<u64>() + self.neg_inf + self.pos_inf + self.undefined
    }

    /// `bin,count` rows; `bin` is the lower edge or `-inf`, `inf`, `nan`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,count\n");
        if self.neg_inf > 0 {
            out.push_str(&format!("-inf,{}\n", self.neg_inf));
        }
        for (k, v) in &self.bins {
            out.push_str(&format!("{k},{v}\n"));
        }
        if self.pos_inf > 0 {
            out.push_str(&format!("inf,{}\n", self.pos_inf));
        }
        if self.undefined > 0 {
            out.push_str(&format!("nan,{}\n", self.undefined));
        }
        out
    }
}

/// Dual-integration classification counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemCounts {
    pub err_gt_1e8: u64,
    pub fevals_gt_1e4: u64,
    pub problematic: u64,
    pub problematic_switched: u64,
    pub switched_not_problematic: u64,
    /// Draws that could not be integrated at all.
    pub failed: u64,
    /// Indices of problematic draws the decision did not switch.
    pub missed_draws: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub plan: SamplingPlan,
    pub total: u64,
    pub switch_on: u64,
    pub f0_gate_failed: u64,
    pub histogram: OrderHistogram,
    pub problems: Option<ProblemCounts>,
}

impl StudyReport {
    pub fn switch_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.switch_on as f64 / self.total as f64
        }
    }
}

#[derive(Default)]
struct Tally {
    switch_on: u64,
    f0_gate_failed: u64,
    histogram: OrderHistogram,
}

impl Tally {
    fn add(&mut self, d: Option<&SwitchDecision>) {
        self.histogram.add(d.map(|d| d.o));
        if let Some(d) = d {
            self.switch_on += d.par as u64;
            self.f0_gate_failed += (d.f0 <= crate::switch::F0_GATE) as u64;
        }
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.switch_on += o.switch_on;
        self.f0_gate_failed += o.f0_gate_failed;
        self.histogram = self.histogram.merge(o.histogram);
        self
    }
}

/// Runs only the switching decision on `plan.n` draws.
pub fn run_switch_census(plan: &SamplingPlan) -> Result<StudyReport, String> {
    plan.validate()?;
    let t = (0..plan.n)
        .into_par_iter()
        .fold(Tally::default, |mut t, i| {
            let (p, q) = plan.draw(i);
            t.add(decide(&p, &q).ok().as_ref());
            t
        })
        .reduce(Tally::default, Tally::merge);
    Ok(StudyReport {
        plan: *plan,
        total: plan.n,
        switch_on: t.switch_on,
        f0_gate_failed: t.f0_gate_failed,
        histogram: t.histogram,
        problems: None,
    })
}

enum Outcome {
    Failed,
    Judged { err_big: bool, fevals_big: bool, par: bool },
}

/// Integrates every draw in binary64 and at `digits` and classifies it.
///
/// A draw is problematic when the binary64 integral differs from the
/// extended one by more than `10⁻⁸` or needs more than `10⁴` evaluations.
pub fn run_problematic_census(plan: &SamplingPlan, spec: &QuadSpec, digits: u32) -> Result<StudyReport, String> {
    plan.validate()?;
    let outcomes: Vec<(Option<SwitchDecision>, Outcome)> = (0..plan.n)
        .into_par_iter()
        .map(|i| {
            let (p, q) = plan.draw(i);
            let w = price_call(&p, &q, spec, EvalStrategy::WorkingOnly);
            let e = price_call(&p, &q, spec, EvalStrategy::ExtendedFull(digits));
            match (w, e) {
                (Ok(w), Ok(e)) if e.quad.converged => {
                    let err_big = (w.integral - e.integral).abs() > PROBLEM_ERROR;
                    let fevals_big = w.quad.fevals > PROBLEM_FEVALS || !w.quad.converged;
                    (Some(w.decision), Outcome::Judged { err_big, fevals_big, par: w.decision.par })
                }
                (w, _) => (w.ok().map(|w| w.decision), Outcome::Failed),
            }
        })
        .collect();
    let mut tally = Tally::default();
    let mut pc = ProblemCounts::default();
    for (i, (d, outcome)) in outcomes.iter().enumerate() {
        tally.add(d.as_ref());
        match *outcome {
            Outcome::Failed => pc.failed += 1,
            Outcome::Judged { err_big, fevals_big, par } => {
                pc.err_gt_1e8 += err_big as u64;
                pc.fevals_gt_1e4 += fevals_big as u64;
                let problematic = err_big || fevals_big;
                pc.problematic += problematic as u64;
                pc.problematic_switched += (problematic && par) as u64;
                pc.switched_not_problematic += (!problematic && par) as u64;
                if problematic && !par {
                    log::warn!("draw {i} is problematic but was not switched");
                    pc.missed_draws.push(i as u64);
                }
            }
        }
    }
    Ok(StudyReport {
        plan: *plan,
        total: plan.n,
        switch_on: tally.switch_on,
        f0_gate_failed: tally.f0_gate_failed,
        histogram: tally.histogram,
        problems: Some(pc),
    })
}

/// Parameters drawn with log-normal jumps; used by tests to confirm draws are in bounds.
pub fn draw_in_bounds(p: &ModelParams) -> bool {
    let v = p.to_vector();
    matches!(p.jump, JumpSpec::LogNormal { .. }) && (0..9).all(|k| v[k] >= PARAM_LOWER[k] && v[k] <= PARAM_UPPER[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_census() {
        let r = run_switch_census(&SamplingPlan::new(0, 1e-6, 1e-5, 1e-6, 1)).unwrap();
        assert_eq!((r.total, r.switch_on, r.histogram.total()), (0, 0, 0));
        assert_eq!(r.switch_fraction(), 0.0);
    }

    #[test]
    fn draws_are_reproducible_and_bounded() {
        let plan = SamplingPlan::new(10, 1e-6, 1e-5, 1e-6, 7);
        for i in 0..10 {
            let (p, q) = plan.draw(i);
            assert_eq!(plan.draw(i), (p, q));
            assert!(draw_in_bounds(&p));
            assert!(p.sigma >= 1e-6 && p.sigma <= 1e-5);
            assert!(q.validate().is_ok() && q.range_warnings().is_empty());
        }
        assert_ne!(plan.draw(0), plan.draw(1));
    }

    #[test]
    fn histogram_conserves_draws() {
        let r = run_switch_census(&SamplingPlan::new(500, 1e-6, 1e-5, 1e-6, 3)).unwrap();
        assert_eq!(r.histogram.total(), 500);
        assert!(r.histogram.to_csv().starts_with("bin,count\n"));
        let again = run_switch_census(&SamplingPlan::new(500, 1e-6, 1e-5, 1e-6, 3)).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn histogram_bins() {
        let mut h = OrderHistogram::default();
        for o in [Some(21.5), Some(22.0), Some(f64::INFINITY), Some(f64::NEG_INFINITY), Some(f64::NAN), None] {
            h.add(o);
        }
        assert_eq!(h.bins.get(&21), Some(&1));
        assert_eq!(h.bins.get(&22), Some(&1));
        assert_eq!((h.pos_inf, h.neg_inf, h.undefined), (1, 1, 2));
        assert_eq!(h.to_csv(), "bin,count\n-inf,1\n21,1\n22,1\ninf,1\nnan,2\n");
    }

    #[test]
    fn plan_validation() {
        assert!(SamplingPlan::new(1, 1e-5, 1e-6, 1e-6, 0).validate().is_err());
        assert!(SamplingPlan::new(1, 1e-6, 1e-5, 0.0, 0).validate().is_err());
    }
}
