//! `certify`: command-line front end for `certify-core`.
//!
//! Every report goes to stdout as JSON (CSV for tables on request). Errors go
//! to stderr as a single JSON line `{"reason": ..., "message": ...}`; the exit
//! status is 2 for usage errors and 1 for cap or precondition failures.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use certify_core::adversary::{
    dual_value, optimize_dual, primal_value, query_lower_bound, AdversaryMatrix, Construction, DualBudget,
    DualWitness, FunctionTable, LabeledInputs, PrimalReport,
};
use certify_core::cert_sim::{
    closed_form_bound, non_halting_probe, random_input_with_value, recurrence_expected_cost, simulate_batch,
    wrapper_cutoff, CostModel, InputSource, LogBase,
};
use certify_core::classical_eval::{exact_expected_queries, lambda, monte_carlo, worst_case_expected};
use certify_core::direct_sum::verify_direct_sum;
use certify_core::formula::{brute_force_minimal_certificates, closed_form_cert_size, evaluate};
use certify_core::linalg::SymMatrix;
use certify_core::stats::trial_rng;
use certify_core::{Caps, CertifyError, Exec, FormulaShape, InputAssignment};

use output::{number, Format};

#[derive(Debug, Parser)]
#[command(name = "certify", version, about = "Certificates and query bounds for balanced NAND formulas")]
struct Cli {
    /// Run data-parallel loops on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a formula and list every minimal certificate of its value.
    Oracle(OracleArgs),
    /// Exact and sampled cost of randomized short-circuit evaluation.
    Classical(ClassicalArgs),
    /// Adversary bound values for a construction or a table.
    Adv(AdvArgs),
    /// Primal and dual values of t-fold products.
    DirectSum(DirectSumArgs),
    /// Monte Carlo runs of the zero-error certificate finder.
    Sim(SimArgs),
    /// Closed-form certificate sizes and query bounds over a (d, k) grid.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: u32,
    /// Leaf values, leaf 1 first, e.g. `0110`.
    #[arg(long)]
    input: String,
}

#[derive(Debug, Args)]
struct ClassicalArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: u32,
    /// Leaf values; defaults to an input with the largest expected cost.
    #[arg(long)]
    input: Option<String>,
    /// Monte Carlo trials (requires --seed).
    #[arg(long, requires = "seed")]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct AdvArgs {
    #[arg(long, value_parser = parse_construction, requires = "d", conflicts_with = "table")]
    construction: Option<Construction>,
    #[arg(long)]
    d: Option<usize>,
    /// Function table JSON `{n, rows: [{x, label}]}`.
    #[arg(long, required_unless_present = "construction")]
    table: Option<PathBuf>,
    /// Dual witness JSON `{p: [[...], ...]}` for --table.
    #[arg(long, requires = "table")]
    dual: Option<PathBuf>,
    /// Adversary matrix JSON (array of rows) for --table.
    #[arg(long, requires = "table")]
    gamma: Option<PathBuf>,
    /// Also search for a dual witness closing the gap to the primal value.
    #[arg(long)]
    optimize_dual: bool,
    /// Report the implied lower bound on queries at this error rate.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Debug, Args)]
struct DirectSumArgs {
    #[arg(long, value_parser = parse_construction)]
    construction: Construction,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    t_max: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: u32,
    /// Requested certificate value.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    b: u8,
    /// Fixed leaf values; must evaluate to b unless --probe-cap is given.
    #[arg(long, conflicts_with = "random_input")]
    input: Option<String>,
    /// Draw one input of value b from this seed.
    #[arg(long)]
    random_input: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    /// CostModel JSON; unspecified fields keep their defaults.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Run the non-halting probe up to this cost instead (input must have
    /// the complementary value).
    #[arg(long, requires = "input")]
    probe_cap: Option<f64>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 4])]
    d: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 3, 4])]
    k: Vec<u32>,
    /// Use base-2 logarithms in the recurrence bound.
    #[arg(long)]
    log2: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn parse_construction(s: &str) -> Result<Construction, String> {
    s.parse().map_err(|e: CertifyError| e.to_string())
}

struct Failure {
    code: u8,
    reason: String,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            reason: "usage".into(),
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: 1,
            reason: "io".into(),
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<CertifyError> for Failure {
    fn from(e: CertifyError) -> Self {
        Self {
            code: 1,
            reason: e.reason().into(),
            message: e.to_string(),
        }
    }
}

type Outcome = Result<String, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn parse_input(bits: &str, shape: &FormulaShape) -> Result<InputAssignment, Failure> {
    let x: InputAssignment = bits.parse()?;
    x.check_shape(shape)?;
    Ok(x)
}

fn oracle(args: &OracleArgs, caps: &Caps) -> Outcome {
    let shape = FormulaShape::new(args.d, args.k)?;
    let x = parse_input(&args.input, &shape)?;
    let value = evaluate(&shape, &x)?;
    let certificates = brute_force_minimal_certificates(&shape, &x, caps)?;
    Ok(output::json(&json!({
        "d": shape.d(),
        "k": shape.k(),
        "n": shape.n(),
        "input": x.to_string(),
        "value": u8::from(value),
        "closed_form_size": closed_form_cert_size(shape.d(), shape.k(), value)?,
        "certificates": certificates,
    })))
}

fn classical(args: &ClassicalArgs, caps: &Caps, exec: Exec) -> Outcome {
    let shape = FormulaShape::new(args.d, args.k)?;
    let (x, source) = match &args.input {
        Some(bits) => (parse_input(bits, &shape)?, "given"),
        None => (worst_case_expected(&shape, caps)?.0, "worst_case"),
    };
    let exact = exact_expected_queries(&shape, &x, caps)?;
    let l = lambda(shape.d())?;
    let mc = match (args.trials, args.seed) {
        (Some(trials), Some(seed)) => {
            let r = monte_carlo(&shape, &x, trials, seed, exec)?;
            json!({
                "trials": trials,
                "seed": seed,
                "mean": r.estimate.mean,
                "stderr": r.estimate.stderr,
                "wrong_values": r.wrong_values,
            })
        }
        _ => Value::Null,
    };
    Ok(output::json(&json!({
        "d": shape.d(),
        "k": shape.k(),
        "n": shape.n(),
        "input": x.to_string(),
        "input_source": source,
        "value": u8::from(evaluate(&shape, &x)?),
        "exact_expected": exact.to_f64(),
        "exact_expected_fraction": exact.is_exact().then(|| exact.to_string()),
        "lambda": l,
        "exponent": l.log(shape.d() as f64),
        "monte_carlo": mc,
    })))
}

fn primal_json(r: &PrimalReport) -> Value {
    json!({
        "gamma_norm": r.gamma_norm,
        "max_masked_norm": r.max_masked_norm,
        "primal_value": r.primal_value,
        "masked_norms": r.masked_norms,
    })
}

fn adv(args: &AdvArgs, caps: &Caps, exec: Exec) -> Outcome {
    let (table, gamma, mut report) = match (args.construction, &args.table) {
        (Some(c), _) => {
            let d = args.d.ok_or_else(|| Failure::usage("--construction needs --d"))?;
            let (table, gamma) = c.build(d, caps)?;
            let report = json!({ "construction": c, "d": d });
            (table, Some(gamma), report)
        }
        (None, Some(path)) => {
            let table = FunctionTable::from_json(&read(path)?)?;
            let gamma = match &args.gamma {
                Some(g) => {
                    let rows: Vec<Vec<f64>> = serde_json::from_str(&read(g)?)
                        .map_err(|e| CertifyError::InvalidGamma(e.to_string()))?;
                    Some(AdversaryMatrix::new(&table, SymMatrix::from_rows(&rows)?)?)
                }
                None => None,
            };
            let report = json!({ "table": path.display().to_string() });
            (table, gamma, report)
        }
        (None, None) => return Err(Failure::usage("give --construction or --table")),
    };
    if gamma.is_none() && args.dual.is_none() && !args.optimize_dual {
        return Err(Failure::usage("--table needs --gamma, --dual or --optimize-dual"));
    }
    let fields = report.as_object_mut().expect("object");
    fields.insert("rows".into(), json!(table.len()));
    fields.insert("n".into(), json!(table.n()));
    let mut primal = None;
    if let Some(g) = &gamma {
        let r = primal_value(&table, g, caps, exec)?;
        for (k, v) in primal_json(&r).as_object().expect("object") {
            fields.insert(k.clone(), v.clone());
        }
        primal = Some(r.primal_value);
    }
    if let Some(path) = &args.dual {
        let witness: DualWitness =
            serde_json::from_str(&read(path)?).map_err(|e| CertifyError::InvalidWitness(e.to_string()))?;
        fields.insert("dual_value".into(), number(dual_value(&table, &witness, exec)?));
    }
    if args.optimize_dual {
        let opt = optimize_dual(&table, primal, DualBudget::default(), caps)?;
        fields.insert(
            "optimized_dual".into(),
            json!({
                "dual_value": number(opt.dual_value),
                "reached_target": opt.reached_target,
                "iterations": opt.iterations,
                "witness": opt.witness,
            }),
        );
    }
    if let Some(eps) = args.epsilon {
        let adv = primal.ok_or_else(|| Failure::usage("--epsilon needs an adversary matrix"))?;
        fields.insert(
            "query_lower_bound".into(),
            json!({ "epsilon": eps, "value": query_lower_bound(adv, eps)? }),
        );
    }
    Ok(output::json(&report))
}

#[derive(Serialize)]
struct DirectSumCsvRow {
    t: usize,
    primal: f64,
    dual: f64,
    primal_ratio: f64,
    dual_ratio: f64,
}

fn direct_sum(args: &DirectSumArgs, caps: &Caps, exec: Exec) -> Outcome {
    let (table, gamma) = args.construction.build(args.d, caps)?;
    let base_primal = primal_value(&table, &gamma, caps, exec)?.primal_value;
    let p1 = optimize_dual(&table, Some(base_primal), DualBudget::default(), caps)?;
    let report = verify_direct_sum(&table, &gamma, &p1.witness, args.t_max, caps, exec)?;
    let rows: Vec<DirectSumCsvRow> = report
        .rows
        .iter()
        .map(|r| DirectSumCsvRow {
            t: r.t,
            primal: r.primal,
            dual: r.dual,
            primal_ratio: r.primal_ratio,
            dual_ratio: r.dual_ratio,
        })
        .collect();
    let full = json!({
        "construction": args.construction,
        "d": args.d,
        "t_max": args.t_max,
        "consistent": report.consistent(),
        "stopped": report.stopped,
        "rows": report.rows.iter().map(|r| json!({
            "t": r.t,
            "primal": r.primal,
            "dual": number(r.dual),
            "primal_ratio": r.primal_ratio,
            "dual_ratio": number(r.dual_ratio),
            "primal_consistent": r.primal_consistent,
            "dual_consistent": r.dual_consistent,
            "gamma_norm": r.gamma_norm,
            "max_masked_norm": r.max_masked_norm,
        })).collect::<Vec<_>>(),
    });
    output::table(args.format, &full, &rows).map_err(|e| Failure {
        code: 1,
        reason: "output".into(),
        message: e,
    })
}

fn sim(args: &SimArgs, caps: &Caps, exec: Exec) -> Outcome {
    let shape = FormulaShape::new(args.d, args.k)?;
    let b = args.b == 1;
    let model = match &args.model {
        Some(path) => CostModel::from_json(&read(path)?)?,
        None => CostModel::default(),
    };
    model.validate()?;
    if let Some(cap) = args.probe_cap {
        let bits = args.input.as_deref().ok_or_else(|| Failure::usage("--probe-cap needs --input"))?;
        let x = parse_input(bits, &shape)?;
        let r = non_halting_probe(&shape, &x, b, &model, cap, &mut trial_rng(args.seed, 0))?;
        return Ok(output::json(&json!({
            "d": shape.d(),
            "k": shape.k(),
            "input": x.to_string(),
            "requested": r.requested,
            "formula_value": r.formula_value,
            "step_cap": r.step_cap,
            "spent": r.spent,
            "halted": r.halted(),
            "certificate": r.emitted,
            "counts": r.counts,
        })));
    }
    let input = match (&args.input, args.random_input) {
        (Some(bits), _) => InputSource::Fixed(parse_input(bits, &shape)?),
        (None, Some(seed)) => InputSource::Fixed(random_input_with_value(&shape, b, &mut trial_rng(seed, u64::MAX))),
        (None, None) => InputSource::RandomPerTrial,
    };
    let summary = simulate_batch(&shape, &input, b, &model, args.trials, args.seed, caps, exec)?;
    Ok(output::json(&json!({
        "d": shape.d(),
        "k": shape.k(),
        "n": shape.n(),
        "b": args.b,
        "input": match &input {
            InputSource::Fixed(x) => Value::from(x.to_string()),
            InputSource::RandomPerTrial => Value::from("random_per_trial"),
        },
        "trials": summary.trials,
        "seed": args.seed,
        "mean_cost": summary.mean_cost,
        "stderr": summary.stderr,
        "restarts_mean": summary.restarts_mean,
        "bound": summary.bound,
        "ratio": summary.ratio,
        "cutoff": wrapper_cutoff(&shape, b, &model)?,
        "recurrence_expected_cost": recurrence_expected_cost(shape.d(), shape.k(), b, &model)?,
        "verify_reps": model.verify_reps_for(shape.n()),
        "incorrect_certificates": summary.incorrect_certificates,
        "verification_failure_rate": summary.verification_failure_rate,
        "attempts": summary.attempts,
    })))
}

#[derive(Serialize)]
struct BoundsRow {
    d: usize,
    k: u32,
    n: usize,
    certificate_size_0: u64,
    certificate_size_1: u64,
    /// `k^2 d^((k+1)/2)` and `d^((k+1)/2)`.
    upper_0: f64,
    lower_0: f64,
    /// `k^2 d^(k/2)` and `d^(k/2)`.
    upper_1: f64,
    lower_1: f64,
    recurrence_bound_0: f64,
    recurrence_bound_1: f64,
}

fn bounds(args: &BoundsArgs) -> Outcome {
    let base = if args.log2 { LogBase::Two } else { LogBase::Natural };
    let mut rows = Vec::new();
    for &d in &args.d {
        for &k in &args.k {
            let shape = FormulaShape::new(d, k)?;
            let df = d as f64;
            let kf = f64::from(k);
            let lower_0 = df.powf((kf + 1.0) / 2.0);
            let lower_1 = df.powf(kf / 2.0);
            rows.push(BoundsRow {
                d,
                k,
                n: shape.n(),
                certificate_size_0: closed_form_cert_size(d, k, false)?,
                certificate_size_1: closed_form_cert_size(d, k, true)?,
                upper_0: kf * kf * lower_0,
                lower_0,
                upper_1: kf * kf * lower_1,
                lower_1,
                recurrence_bound_0: closed_form_bound(d, k, false, base)?,
                recurrence_bound_1: closed_form_bound(d, k, true, base)?,
            });
        }
    }
    output::table(args.format, &json!({ "log_base": base, "rows": rows }), &rows).map_err(|e| Failure {
        code: 1,
        reason: "output".into(),
        message: e,
    })
}

fn run(cli: &Cli) -> Outcome {
    let caps = Caps::from_env().map_err(|e| Failure {
        code: 2,
        reason: e.reason().into(),
        message: format!("CERTIFY_CAPS: {e}"),
    })?;
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match &cli.command {
        Command::Oracle(a) => oracle(a, &caps),
        Command::Classical(a) => classical(a, &caps, exec),
        Command::Adv(a) => adv(a, &caps, exec),
        Command::DirectSum(a) => direct_sum(a, &caps, exec),
        Command::Sim(a) => sim(a, &caps, exec),
        Command::Bounds(a) => bounds(a),
    }
}

fn fail(f: &Failure) -> ExitCode {
    let line = json!({ "reason": f.reason, "message": f.message });
    eprintln!("{line}");
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let message: Vec<&str> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .map(|l| l.trim_start_matches("error: "))
                .collect();
            return fail(&Failure::usage(message.join(" ")));
        }
    };
    match run(&cli) {
        Ok(text) => {
            output::emit(&text);
            ExitCode::SUCCESS
        }
        Err(f) => fail(&f),
    }
}
