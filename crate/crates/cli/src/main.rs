mod chain;

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use quadprice::calibration::{self, CalibrationSettings, SwitchMode};
use quadprice::failure::blowup_profile;
use quadprice::model::{MarketQuote, ModelError};
use quadprice::precision::DEFAULT_DIGITS;
use quadprice::pricing::{price_call, ModelKind, PriceResult, PricingError};
use quadprice::quadrature::{Method, QuadError, QuadSpec};
use quadprice::study::{run_problematic_census, run_switch_census, SamplingPlan, StudyReport};
use quadprice::switch::EvalStrategy;
use quadprice::testcases;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "quadprice", version, about = "Precision-aware option pricing and quadrature experiments")]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Price a European call.
    Price(PriceArgs),
    /// Integrate only and print full diagnostics.
    Integrate(PriceArgs),
    /// Every quadrature in every precision on a named case, as CSV.
    Compare(CompareArgs),
    /// Switching decision over random draws.
    SwitchCensus(CensusArgs),
    /// Binary64 vs extended integration over random draws.
    ProblemCensus(CensusArgs),
    /// Adaptive Gauss-Kronrod on abscissa-aligned step functions.
    FailureDemo(FailureArgs),
    /// Calibrate a model to an option chain CSV.
    Calibrate(CalibrateArgs),
    /// Write a chain CSV priced by the model itself.
    SynthChain(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    /// Decide per integral; switch only `C` when needed.
    Auto,
    /// Always evaluate the whole integrand in extended precision.
    On,
    /// Binary64 only.
    Off,
    /// Always evaluate `C` in extended precision.
    Opt,
}

#[derive(Args)]
struct QuadArgs {
    #[arg(long, default_value = "gk15")]
    quad: Method,
    #[arg(long, default_value_t = 1e-10)]
    abstol: f64,
    #[arg(long, default_value_t = 1e-6)]
    reltol: f64,
    #[arg(long, default_value_t = 10_000_000)]
    max_fevals: u64,
    /// Extended precision digits (default: $QUADPRICE_DIGITS or 32).
    #[arg(long)]
    digits: Option<u32>,
}

impl QuadArgs {
    fn spec(&self) -> QuadSpec {
        QuadSpec { method: self.quad, abs_tol: self.abstol, rel_tol: self.reltol, max_fevals: self.max_fevals, ..QuadSpec::default() }
    }
}

#[derive(Args)]
struct PriceArgs {
    #[arg(long, default_value = "afsvjd")]
    model: ModelKind,
    /// Comma-separated parameters in the order v0,kappa,theta,sigma,rho[,lambda,mu_j,sigma_j[,hurst]].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    params: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long)]
    tau: f64,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    rate: f64,
    #[arg(long)]
    spot: f64,
    #[arg(long, value_enum, default_value = "auto")]
    switch: Switch,
    #[command(flatten)]
    quad: QuadArgs,
    /// Also write the result as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// `tc1-sigma=0.0001`, `tc2-sigma=1e-5` or `hundred-dollar`.
    case: String,
    #[arg(long, default_value_t = 1e-10)]
    abstol: f64,
    #[arg(long, default_value_t = 1e-6)]
    reltol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_fevals: u64,
    #[arg(long)]
    digits: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CensusArgs {
    #[arg(long, default_value_t = 10_000)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    sigma_lo: f64,
    #[arg(long, default_value_t = 1e-5)]
    sigma_hi: f64,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Sample sigma log-uniformly.
    #[arg(long)]
    log_uniform: bool,
    /// Use the test-case quote for every draw instead of sampling quotes.
    #[arg(long)]
    fixed_quote: bool,
    #[arg(long)]
    digits: Option<u32>,
    /// Histogram CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary JSON destination.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct FailureArgs {
    #[arg(long, default_value_t = 7)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    level: u32,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long, default_value = "afsvjd")]
    model: ModelKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "opt")]
    switch: SwitchMode,
    #[arg(long, default_value_t = calibration::SIGMA_LOWER_BOUND)]
    sigma_lb: f64,
    #[arg(long, default_value_t = calibration::CALIBRATION_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 200)]
    population: usize,
    #[arg(long, default_value_t = 20)]
    generations: usize,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
    #[arg(long)]
    digits: Option<u32>,
    /// Report destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "heston")]
    model: ModelKind,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    params: Vec<f64>,
    #[arg(long, default_value_t = calibration::CALIBRATION_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 6721.8)]
    spot: f64,
    #[arg(long, default_value_t = 0.009)]
    rate: f64,
    /// Bid-ask spread as a fraction of the mid price.
    #[arg(long, default_value_t = 0.02)]
    spread: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Input(String),
    NotConverged(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::NotConverged(m) | Failure::Io(m) => m,
        }
    }
}

impl From<PricingError> for Failure {
    fn from(e: PricingError) -> Self {
        match e {
            PricingError::Model(ModelError::Degenerate { .. })
            | PricingError::Quadrature(QuadError::NonFinite { .. }) => Failure::NotConverged(e.to_string()),
            e => Failure::Input(e.to_string()),
        }
    }
}

fn io_err(e: impl std::fmt::Display) -> Failure {
    Failure::Io(e.to_string())
}

/// A report with its format version.
#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<(), Failure> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(io_err)?;
    writeln!(w).map_err(io_err)
}

fn digits(flag: Option<u32>) -> Result<u32, Failure> {
    if let Some(d) = flag {
        return Ok(d);
    }
    match std::env::var("QUADPRICE_DIGITS") {
        Ok(v) => v.trim().parse().map_err(|_| Failure::Input(format!("QUADPRICE_DIGITS: cannot parse '{v}'"))),
        Err(_) => Ok(DEFAULT_DIGITS),
    }
}

fn run_price(a: &PriceArgs, diagnostics: bool) -> Result<(), Failure> {
    let d = digits(a.quad.digits)?;
    let strategy = match a.switch {
        Switch::Auto => EvalStrategy::Auto(d),
        Switch::On => EvalStrategy::ExtendedFull(d),
        Switch::Off => EvalStrategy::WorkingOnly,
        Switch::Opt => EvalStrategy::Optimized(d),
    };
    let params = a.model.params(&a.params, a.epsilon).map_err(|e| Failure::Input(e.to_string()))?;
    params.validate().map_err(|e| Failure::Input(e.to_string()))?;
    let quote = MarketQuote::new(a.tau, a.strike, a.rate, a.spot);
    for w in quote.range_warnings() {
        eprintln!("warning: {w}");
    }
    let spec = a.quad.spec();
    spec.validate().map_err(|e| Failure::Input(e.to_string()))?;
    let t = Instant::now();
    let r: PriceResult = price_call(&params, &quote, &spec, strategy)?;
    let elapsed = t.elapsed().as_secs_f64();
    let mut out = io::stdout().lock();
    let d = &r.decision;
    if diagnostics {
        let q = &r.quad;
        let _ = writeln!(out, "integral        {:.12}", r.integral);
        let _ = writeln!(out, "error_estimate  {:e}", q.error_estimate);
        let _ = writeln!(out, "fevals          {}", q.fevals);
        let _ = writeln!(out, "subintervals    {}", q.subintervals);
        let _ = writeln!(out, "forced_panels   {}", q.forced_panels);
        let _ = writeln!(out, "upper_limit     {}", q.truncation_upper);
        let _ = writeln!(out, "converged       {}", q.converged);
        let _ = writeln!(out, "o1 o2 o         {:.4} {:.4} {:.4}", d.o1, d.o2, d.o);
        let _ = writeln!(out, "f0              {:.10}", d.f0);
        let _ = writeln!(out, "omega1 omega2   {:.4} {:.4}", d.omega1, d.omega2);
        let _ = writeln!(out, "par             {}", d.par);
        let _ = writeln!(out, "strategy        {} -> {}", r.strategy_requested, r.strategy_used);
        let _ = writeln!(out, "time_s          {elapsed:.4}");
    } else {
        let _ = writeln!(out, "price     {:.6}", r.price);
        let _ = writeln!(out, "integral  {:.10}", r.integral);
        let _ = writeln!(
            out,
            "strategy  {} -> {} (par = {}, o = {:.3})",
            r.strategy_requested, r.strategy_used, d.par, d.o
        );
        let _ = writeln!(out, "fevals    {}  converged {}  time_s {elapsed:.4}", r.quad.fevals, r.quad.converged);
    }
    if a.json.is_some() {
        write_json(&a.json, &Versioned { schema_version: SCHEMA_VERSION, body: &r })?;
    }
    if !r.quad.converged {
        return Err(Failure::NotConverged("quadrature did not converge within the evaluation budget".into()));
    }
    Ok(())
}

fn parse_case(case: &str) -> Result<testcases::Scenario, Failure> {
    let (name, sigma) = match case.split_once("-sigma=") {
        Some((n, s)) => (n, s.parse::<f64>().map_err(|_| Failure::Input(format!("case '{case}': bad sigma '{s}'")))?),
        None => (case, 0.001),
    };
    testcases::by_name(name, sigma).ok_or_else(|| {
        Failure::Input(format!("unknown case '{case}' (expected tc1-sigma=<s>, tc2-sigma=<s> or hundred-dollar)"))
    })
}

fn table_name(m: &Method) -> String {
    match m {
        Method::Trapezoid { h } => format!("trapz({h})"),
        Method::GaussLegendre { n } => format!("legendre({n})"),
        Method::AdaptiveSimpson => "quad".into(),
        Method::AdaptiveLobatto => "quadl".into(),
        Method::GaussKronrod715 => "integral".into(),
    }
}

fn run_compare(a: &CompareArgs) -> Result<(), Failure> {
    let s = parse_case(&a.case)?;
    let d = digits(a.digits)?;
    let base = QuadSpec { abs_tol: a.abstol, rel_tol: a.reltol, max_fevals: a.max_fevals, ..QuadSpec::default() };
    base.validate().map_err(|e| Failure::Input(e.to_string()))?;
    let mut rows = Vec::new();
    let mut reference = None;
    let mut methods = Method::all().to_vec();
    // The reference row first.
    methods.rotate_right(1);
    for m in methods {
        let spec = QuadSpec { method: m, ..base };
        for strategy in [EvalStrategy::ExtendedFull(d), EvalStrategy::WorkingOnly, EvalStrategy::Optimized(d)] {
            let t = Instant::now();
            let r = price_call(&s.params, &s.quote, &spec, strategy);
            let secs = t.elapsed().as_secs_f64();
            let label = format!("{}-{}", table_name(&m), strategy.label());
            match r {
                Ok(r) => {
                    let reference = *reference.get_or_insert(r.integral);
                    rows.push((label, r.integral, (r.integral - reference).abs(), secs, r.quad.fevals, r.quad.converged));
                }
                Err(e) => {
                    eprintln!("{label}: {e}");
                    rows.push((label, f64::NAN, f64::NAN, secs, 0, false));
                }
            }
        }
    }
    let mut w = csv::Writer::from_writer(output(&a.out)?);
    w.write_record(["quadrature", "value", "error", "time_s", "fevals", "converged"]).map_err(io_err)?;
    for (label, v, e, t, f, c) in rows {
        w.write_record([label, format!("{v:.10}"), format!("{e:.2e}"), format!("{t:.3}"), f.to_string(), c.to_string()])
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn run_census(a: &CensusArgs, full: bool) -> Result<(), Failure> {
    let mut plan = SamplingPlan::new(a.n, a.sigma_lo, a.sigma_hi, a.epsilon, a.seed);
    plan.log_uniform = a.log_uniform;
    if a.fixed_quote {
        plan = plan.with_fixed_quote();
    }
    let t = Instant::now();
    let r: StudyReport = if full {
        run_problematic_census(&plan, &QuadSpec::default(), digits(a.digits)?)
    } else {
        run_switch_census(&plan)
    }
    .map_err(Failure::Input)?;
    let mut w = output(&a.out)?;
    w.write_all(r.histogram.to_csv().as_bytes()).map_err(io_err)?;
    eprintln!(
        "draws {}  switch_on {} ({:.4})  f0_gate_failed {}  time_s {:.2}",
        r.total,
        r.switch_on,
        r.switch_fraction(),
        r.f0_gate_failed,
        t.elapsed().as_secs_f64()
    );
    if let Some(p) = &r.problems {
        eprintln!(
            "problematic {} (err>1e-8 {}, fevals>1e4 {})  switched {}  missed {:?}  failed {}",
            p.problematic, p.err_gt_1e8, p.fevals_gt_1e4, p.problematic_switched, p.missed_draws, p.failed
        );
    }
    if a.json.is_some() {
        write_json(&a.json, &Versioned { schema_version: SCHEMA_VERSION, body: &r })?;
    }
    Ok(())
}

fn run_failure(a: &FailureArgs) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(output(&a.out)?);
    w.write_record([
        "level", "eps", "leaves", "fevals", "value", "exact", "true_error", "error_estimate", "converged", "deceived",
    ])
    .map_err(io_err)?;
    for l in 0..=a.level {
        let r = blowup_profile(a.n, l, a.eps, &QuadSpec::default()).map_err(|e| Failure::Input(e.to_string()))?;
        w.write_record([
            r.level.to_string(),
            r.eps.to_string(),
            r.leaves.to_string(),
            r.fevals.to_string(),
            format!("{:.16e}", r.value),
            format!("{:.16e}", r.exact),
            format!("{:e}", r.true_error),
            format!("{:e}", r.error_estimate),
            r.converged.to_string(),
            r.deceived().to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn run_calibrate(a: &CalibrateArgs) -> Result<(), Failure> {
    let file = File::open(&a.chain).map_err(|e| Failure::Input(format!("{}: {e}", a.chain.display())))?;
    let chain = chain::read_chain(file).map_err(|e| Failure::Input(format!("{}: {e}", a.chain.display())))?;
    let mut s = CalibrationSettings::new(a.model).with_sigma_lower_bound(a.sigma_lb);
    s.seed = a.seed;
    s.switch_mode = a.switch;
    s.epsilon = a.epsilon;
    s.ga.population = a.population;
    s.ga.generations = a.generations;
    s.lsq.max_iterations = a.max_iterations;
    s.digits = digits(a.digits)?;
    let t = Instant::now();
    let r = calibration::calibrate(&chain, &s).map_err(|e| Failure::Input(e.to_string()))?;
    eprintln!(
        "G {:e}  AARE {:e}  MARE {:e}  switches {}/{}  time_s {:.1}",
        r.objective,
        r.aare,
        r.mare,
        r.switch_stats.switched_to_extended,
        r.switch_stats.decisions_total,
        t.elapsed().as_secs_f64()
    );
    write_json(&a.out, &r)?;
    if !r.lsq_converged {
        return Err(Failure::NotConverged(format!("local stage stopped after {} iterations", r.lsq_iterations)));
    }
    Ok(())
}

fn run_synth(a: &SynthArgs) -> Result<(), Failure> {
    let quotes = calibration::synthetic_quotes(a.spot, a.rate);
    let chain = calibration::synthetic_chain(a.model, &a.params, a.epsilon, &quotes, a.spread, DEFAULT_DIGITS)
        .map_err(|e| Failure::Input(e.to_string()))?;
    chain::write_chain(&chain, output(&a.out)?).map_err(Failure::Io)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.cmd {
        Cmd::Price(a) => run_price(a, false),
        Cmd::Integrate(a) => run_price(a, true),
        Cmd::Compare(a) => run_compare(a),
        Cmd::SwitchCensus(a) => run_census(a, false),
        Cmd::ProblemCensus(a) => run_census(a, true),
        Cmd::FailureDemo(a) => run_failure(a),
        Cmd::Calibrate(a) => run_calibrate(a),
        Cmd::SynthChain(a) => run_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
