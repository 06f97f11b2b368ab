//! Certificate finding in a query-cost model.
//!
//! The quantum subroutines are stochastic oracles with a cost and an error
//! rate; ground truth always comes from the formula itself. `A_0(k)` finds a
//! 0-certificate of a formula that evaluates to 0, `A_1(k)` a 1-certificate of
//! one that evaluates to 1. Given the wrong value they spin forever, which
//! the simulator reports as running out of budget.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{CertifyError, Result};
use crate::exec::Exec;
use crate::formula::{evaluate, Certificate, FormulaShape, InputAssignment};
use crate::stats::{trial_rng, MeanEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    /// Cost of one Grover attempt over `m` items is `grover_unit * sqrt(m)`.
    pub grover_unit: f64,
    /// One evaluation call on a subtree of `s` leaves costs `eval_unit * sqrt(s)`.
    pub eval_unit: f64,
    /// Error probability of each evaluation call and of robust search.
    pub eval_error: f64,
    /// Robust search over the children of a node with `s` leaves costs
    /// `robust_unit * sqrt(s)`.
    pub robust_unit: f64,
    /// Majority-vote repetitions per verification; `None` picks the smallest
    /// odd count with error at most `1/n^2`.
    pub verify_reps: Option<u32>,
    /// Replaces the majority vote by a single flip with this probability.
    pub verify_error_override: Option<f64>,
    /// The `c` in the restart cutoff `c * closed_form_bound`.
    pub wrapper_constant: f64,
    /// Per-attempt success probability of Grover search when a 0-leaf exists.
    pub grover_success: f64,
    /// Cost after which a single run of `simulate_certify` is declared
    /// non-halting.
    pub certify_budget: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            grover_unit: 1.0,
            eval_unit: 1.0,
            eval_error: 0.1,
            robust_unit: 1.0,
            verify_reps: None,
            verify_error_override: None,
            wrapper_constant: 10.0,
            grover_success: 1.0,
            certify_budget: 1e9,
        }
    }
}

impl CostModel {
    /// Default model with error-free subroutines.
    pub fn exact() -> Self {
        Self {
            eval_error: 0.0,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| CertifyError::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grover_unit", self.grover_unit),
            ("eval_unit", self.eval_unit),
            ("robust_unit", self.robust_unit),
            ("wrapper_constant", self.wrapper_constant),
            ("certify_budget", self.certify_budget),
        ];
        for (name, v) in positive {
            if v <= 0.0 || v.is_nan() {
                return Err(CertifyError::InvalidModel(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..0.5).contains(&self.eval_error) {
            return Err(CertifyError::InvalidModel(format!(
                "eval_error must be in [0, 1/2), got {}",
                self.eval_error
            )));
        }
        if !(self.grover_success > 0.0 && self.grover_success <= 1.0) {
            return Err(CertifyError::InvalidModel(format!(
                "grover_success must be in (0, 1], got {}",
                self.grover_success
            )));
        }
        if self.verify_reps == Some(0) {
            return Err(CertifyError::InvalidModel("verify_reps must be at least 1".into()));
        }
        if let Some(q) = self.verify_error_override {
            if !(0.0..0.5).contains(&q) {
                return Err(CertifyError::InvalidModel(format!(
                    "verify_error_override must be in [0, 1/2), got {q}"
                )));
            }
        }
        Ok(())
    }

    /// Repetitions per verification for an input of `n` leaves.
    ///
    /// A majority of `r` independent calls with error `ε` is wrong with
    /// probability at most `(2 sqrt(ε(1-ε)))^r`, so
    /// `r = ceil(2 ln n / ln(1 / (2 sqrt(ε(1-ε)))))` gives error `<= 1/n^2`.
    /// Rounded up to odd so the vote cannot tie.
    pub fn verify_reps_for(&self, n: usize) -> u32 {
        if let Some(r) = self.verify_reps {
            return r;
        }
        let eps = self.eval_error;
        if eps == 0.0 || n <= 1 {
            return 1;
        }
        let base = 2.0 * (eps * (1.0 - eps)).sqrt();
        let r = (2.0 * (n as f64).ln() / (1.0 / base).ln()).ceil().max(1.0) as u32;
        r | 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

/// `k (1 + k log d / sqrt d) d^((k+1)/2)` for `b = 0`, with `d^(k/2)` in
/// place of the last factor for `b = 1`.
pub fn closed_form_bound(d: usize, k: u32, b: bool, base: LogBase) -> Result<f64> {
    FormulaShape::new(d, k)?;
    let df = d as f64;
    let kf = f64::from(k);
    let log = match base {
        LogBase::Natural => df.ln(),
        LogBase::Two => df.log2(),
    };
    let exponent = if b { kf / 2.0 } else { (kf + 1.0) / 2.0 };
    Ok(kf * (1.0 + kf * log / df.sqrt()) * df.powf(exponent))
}

/// `(E[A_0(j)], E[A_1(j)])` for `j = 1..=k`, with every verification assumed
/// correct and `n = d^k` fixing the repetition count.
///
/// `E[A_0(1)] = d`, `E[A_1(1)] = grover_unit sqrt(d) / grover_success`,
/// `E[A_1(j)] = (search + verify) / (1 - ε) + E[A_0(j-1)]`,
/// `E[A_0(j)] = d E[A_1(j-1)]`. A search returns a true 0-subtree with
/// probability `1 - ε`, and a wrong one is always rejected.
pub fn recurrence_table(d: usize, k: u32, model: &CostModel) -> Result<Vec<(f64, f64)>> {
    model.validate()?;
    let shape = FormulaShape::new(d, k)?;
    let df = d as f64;
    let reps = f64::from(model.verify_reps_for(shape.n()));
    let mut out = Vec::with_capacity(k as usize);
    out.push((df, model.grover_unit * df.sqrt() / model.grover_success));
    for j in 2..=k {
        let (a0_prev, a1_prev) = out[(j - 2) as usize];
        let search = model.robust_unit * df.powf(f64::from(j) / 2.0);
        let verify = reps * model.eval_unit * df.powf(f64::from(j - 1) / 2.0);
        let a1 = (search + verify) / (1.0 - model.eval_error) + a0_prev;
        out.push((df * a1_prev, a1));
    }
    Ok(out)
}

pub fn recurrence_expected_cost(d: usize, k: u32, b: bool, model: &CostModel) -> Result<f64> {
    let table = recurrence_table(d, k, model)?;
    let (a0, a1) = table[k as usize - 1];
    Ok(if b { a1 } else { a0 })
}

/// Integer counts of oracle invocations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OracleCounts {
    pub leaf_queries: u64,
    pub grover_attempts: u64,
    pub robust_searches: u64,
    pub eval_calls: u64,
    pub verifications: u64,
}

impl OracleCounts {
    fn absorb(&mut self, other: &OracleCounts) {
        self.leaf_queries += other.leaf_queries;
        self.grover_attempts += other.grover_attempts;
        self.robust_searches += other.robust_searches;
        self.eval_calls += other.eval_calls;
        self.verifications += other.verifications;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub certificate: Certificate,
    pub queries: f64,
    pub restarts: u64,
    /// Verifications whose majority vote disagreed with the truth.
    pub verification_failures: u64,
    /// Attempts (restarted or final) with at least one failed verification.
    pub failed_trials: u64,
    pub counts: OracleCounts,
}

/// Node values of every level, leaves first: `levels[h][j]` is the value of
/// the `j`-th node of height `h`.
struct Tree {
    d: usize,
    levels: Vec<Vec<bool>>,
}

impl Tree {
    fn new(shape: &FormulaShape, x: &InputAssignment) -> Result<Self> {
        x.check_shape(shape)?;
        let d = shape.d();
        let mut levels = vec![x.bits().to_vec()];
        for _ in 0..shape.k() {
            let next = levels.last().expect("nonempty").chunks(d).map(|c| !c.iter().all(|&v| v)).collect();
            levels.push(next);
        }
        Ok(Self { d, levels })
    }

    fn value(&self, height: u32, node: usize) -> bool {
        self.levels[height as usize][node]
    }

    fn n(&self) -> usize {
        self.levels[0].len()
    }
}

/// Outcome of one budgeted attempt.
struct Attempt {
    certificate: Option<Vec<usize>>,
    spent: f64,
    verification_failures: u64,
    counts: OracleCounts,
}

struct OutOfBudget;

struct Sim<'a, R: Rng> {
    tree: &'a Tree,
    model: &'a CostModel,
    rng: &'a mut R,
    reps: u32,
    budget: f64,
    spent: f64,
    verification_failures: u64,
    counts: OracleCounts,
}

impl<R: Rng> Sim<'_, R> {
    fn charge(&mut self, cost: f64) -> std::result::Result<(), OutOfBudget> {
        self.spent += cost;
        if self.spent > self.budget {
            self.spent = self.budget;
            return Err(OutOfBudget);
        }
        Ok(())
    }

    fn spin(&mut self) -> OutOfBudget {
        self.spent = self.budget;
        OutOfBudget
    }

    fn a0(&mut self, height: u32, node: usize, out: &mut Vec<usize>) -> std::result::Result<(), OutOfBudget> {
        let d = self.tree.d;
        if height == 1 {
            self.counts.leaf_queries += d as u64;
            self.charge(d as f64)?;
            let leaves = node * d..(node + 1) * d;
            if self.tree.levels[0][leaves.clone()].iter().all(|&v| v) {
                out.extend(leaves.map(|i| i + 1));
                return Ok(());
            }
            return Err(self.spin());
        }
        for child in node * d..(node + 1) * d {
            self.a1(height - 1, child, out)?;
        }
        Ok(())
    }

    fn a1(&mut self, height: u32, node: usize, out: &mut Vec<usize>) -> std::result::Result<(), OutOfBudget> {
        let d = self.tree.d;
        let children = node * d..(node + 1) * d;
        let zeros: Vec<usize> = children.clone().filter(|&c| !self.tree.value(height - 1, c)).collect();
        if height == 1 {
            if zeros.is_empty() {
                // Grover exhausts every round and never reports a leaf
                return Err(self.spin());
            }
            loop {
                self.counts.grover_attempts += 1;
                self.charge(self.model.grover_unit * (d as f64).sqrt())?;
                if self.model.grover_success >= 1.0 || self.rng.random_bool(self.model.grover_success) {
                    let leaf = *zeros.choose(self.rng).expect("nonempty");
                    out.push(leaf + 1);
                    return Ok(());
                }
            }
        }
        let subtree_leaves = d.pow(height - 1) as f64;
        let search_cost = self.model.robust_unit * (subtree_leaves * d as f64).sqrt();
        let call_cost = self.model.eval_unit * subtree_leaves.sqrt();
        loop {
            self.counts.robust_searches += 1;
            self.charge(search_cost)?;
            let eps = self.model.eval_error;
            let candidate = if zeros.is_empty() {
                self.rng.random_range(children.clone())
            } else if eps == 0.0 || !self.rng.random_bool(eps) {
                *zeros.choose(self.rng).expect("nonempty")
            } else {
                let wrong: Vec<usize> = children.clone().filter(|c| !zeros.contains(c)).collect();
                *wrong.choose(self.rng).unwrap_or(&children.start)
            };
            let truth_zero = !self.tree.value(height - 1, candidate);
            let says_zero = self.verify(truth_zero, call_cost)?;
            if says_zero != truth_zero {
                self.verification_failures += 1;
            }
            if says_zero {
                return self.a0(height - 1, candidate, out);
            }
        }
    }

    /// Majority vote of `reps` noisy evaluations; returns whether the
    /// candidate is judged to evaluate to 0.
    fn verify(&mut self, truth_zero: bool, call_cost: f64) -> std::result::Result<bool, OutOfBudget> {
        self.counts.verifications += 1;
        self.counts.eval_calls += u64::from(self.reps);
        self.charge(f64::from(self.reps) * call_cost)?;
        if let Some(q) = self.model.verify_error_override {
            let flip = q > 0.0 && self.rng.random_bool(q);
            return Ok(truth_zero ^ flip);
        }
        let eps = self.model.eval_error;
        if eps == 0.0 {
            return Ok(truth_zero);
        }
        let wrong = (0..self.reps).filter(|_| self.rng.random_bool(eps)).count() as u32;
        let majority_wrong = 2 * wrong >= self.reps;
        Ok(truth_zero ^ majority_wrong)
    }
}

fn attempt<R: Rng>(tree: &Tree, b: bool, model: &CostModel, budget: f64, rng: &mut R) -> Attempt {
    let k = (tree.levels.len() - 1) as u32;
    let mut sim = Sim {
        tree,
        model,
        rng,
        reps: model.verify_reps_for(tree.n()),
        budget,
        spent: 0.0,
        verification_failures: 0,
        counts: OracleCounts::default(),
    };
    let mut out = Vec::new();
    let done = if b { sim.a1(k, 0, &mut out) } else { sim.a0(k, 0, &mut out) };
    Attempt {
        certificate: done.ok().map(|()| out),
        spent: sim.spent,
        verification_failures: sim.verification_failures,
        counts: sim.counts,
    }
}

fn check_request(shape: &FormulaShape, x: &InputAssignment, b: bool, model: &CostModel) -> Result<Tree> {
    model.validate()?;
    let tree = Tree::new(shape, x)?;
    let actual = evaluate(shape, x)?;
    if actual != b {
        return Err(CertifyError::ValueMismatch {
            requested: u8::from(b),
            actual: u8::from(actual),
        });
    }
    Ok(tree)
}

/// One run of `A_b(k)` with budget `model.certify_budget`.
pub fn simulate_certify<R: Rng>(
    shape: &FormulaShape,
    x: &InputAssignment,
    b: bool,
    model: &CostModel,
    rng: &mut R,
) -> Result<RunRecord> {
    let tree = check_request(shape, x, b, model)?;
    let a = attempt(&tree, b, model, model.certify_budget, rng);
    match a.certificate {
        Some(indices) => Ok(RunRecord {
            certificate: Certificate::new(indices, b),
            queries: a.spent,
            restarts: 0,
            verification_failures: a.verification_failures,
            failed_trials: u64::from(a.verification_failures > 0),
            counts: a.counts,
        }),
        None => Err(CertifyError::DidNotHalt {
            budget: model.certify_budget,
        }),
    }
}

/// Cutoff used by the zero-error wrapper.
pub fn wrapper_cutoff(shape: &FormulaShape, b: bool, model: &CostModel) -> Result<f64> {
    Ok(model.wrapper_constant * closed_form_bound(shape.d(), shape.k(), b, LogBase::Natural)?)
}

/// Restarts `A_b(k)` with fresh randomness whenever it exceeds the cutoff.
pub fn simulate_zero_error_wrapper<R: Rng>(
    shape: &FormulaShape,
    x: &InputAssignment,
    b: bool,
    model: &CostModel,
    caps: &Caps,
    rng: &mut R,
) -> Result<RunRecord> {
    let tree = check_request(shape, x, b, model)?;
    let cutoff = wrapper_cutoff(shape, b, model)?;
    let mut queries = 0.0;
    let mut verification_failures = 0;
    let mut failed_trials = 0;
    let mut counts = OracleCounts::default();
    for restarts in 0..=caps.restarts as u64 {
        let a = attempt(&tree, b, model, cutoff, rng);
        queries += a.spent;
        verification_failures += a.verification_failures;
        failed_trials += u64::from(a.verification_failures > 0);
        counts.absorb(&a.counts);
        if let Some(indices) = a.certificate {
            return Ok(RunRecord {
                certificate: Certificate::new(indices, b),
                queries,
                restarts,
                verification_failures,
                failed_trials,
                counts,
            });
        }
    }
    Err(CertifyError::RestartCapExceeded { cap: caps.restarts })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonHaltingReport {
    pub requested: u8,
    pub formula_value: u8,
    pub step_cap: f64,
    pub spent: f64,
    pub emitted: Option<Certificate>,
    pub counts: OracleCounts,
}

impl NonHaltingReport {
    pub fn halted(&self) -> bool {
        self.emitted.is_some()
    }
}

/// Runs `A_b̄(k)` on an input whose value is `b` for up to `step_cap` cost.
pub fn non_halting_probe<R: Rng>(
    shape: &FormulaShape,
    x: &InputAssignment,
    requested: bool,
    model: &CostModel,
    step_cap: f64,
    rng: &mut R,
) -> Result<NonHaltingReport> {
    model.validate()?;
    if step_cap <= 0.0 || step_cap.is_nan() {
        return Err(CertifyError::InvalidArgument(format!("step cap must be positive, got {step_cap}")));
    }
    let tree = Tree::new(shape, x)?;
    let actual = evaluate(shape, x)?;
    if actual == requested {
        return Err(CertifyError::InvalidArgument(
            "the probe needs an input whose value is the complement of the request".into(),
        ));
    }
    let a = attempt(&tree, requested, model, step_cap, rng);
    Ok(NonHaltingReport {
        requested: u8::from(requested),
        formula_value: u8::from(actual),
        step_cap,
        spent: a.spent,
        emitted: a.certificate.map(|c| Certificate::new(c, requested)),
        counts: a.counts,
    })
}

/// A uniformly structured random input with value `b`: a 0-node has all
/// children 1; a 1-node marks each child 0 with probability 1/2, resampling
/// until at least one is 0.
pub fn random_input_with_value<R: Rng>(shape: &FormulaShape, b: bool, rng: &mut R) -> InputAssignment {
    let d = shape.d();
    let mut level = vec![b];
    for _ in 0..shape.k() {
        let mut next = Vec::with_capacity(level.len() * d);
        for &v in &level {
            if !v {
                next.extend(std::iter::repeat_n(true, d));
                continue;
            }
            loop {
                let children: Vec<bool> = (0..d).map(|_| !rng.random_bool(0.5)).collect();
                if children.iter().any(|&c| !c) {
                    next.extend(children);
                    break;
                }
            }
        }
        level = next;
    }
    InputAssignment::new(level)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputSource {
    Fixed(InputAssignment),
    /// A fresh random input of the requested value per trial.
    RandomPerTrial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub trials: usize,
    pub mean_cost: f64,
    pub stderr: f64,
    pub restarts_mean: f64,
    pub bound: f64,
    pub ratio: f64,
    pub incorrect_certificates: usize,
    /// Failed attempts over all attempts, restarts included.
    pub verification_failure_rate: f64,
    pub attempts: u64,
}

/// Runs `trials` seeded wrapper runs; trial `t` uses stream `t` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_batch(
    shape: &FormulaShape,
    input: &InputSource,
    b: bool,
    model: &CostModel,
    trials: usize,
    seed: u64,
    caps: &Caps,
    exec: Exec,
) -> Result<SimSummary> {
    if trials == 0 {
        return Err(CertifyError::InvalidArgument("trials must be at least 1".into()));
    }
    if let InputSource::Fixed(x) = input {
        check_request(shape, x, b, model)?;
    }
    let records = exec.map_range(trials, |t| {
        let mut rng = trial_rng(seed, t as u64);
        let x = match input {
            InputSource::Fixed(x) => x.clone(),
            InputSource::RandomPerTrial => random_input_with_value(shape, b, &mut rng),
        };
        let run = simulate_zero_error_wrapper(shape, &x, b, model, caps, &mut rng)?;
        let correct = crate::formula::is_certificate(shape, &run.certificate.indices, &x)?;
        Ok::<_, CertifyError>((run, correct))
    });
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    let costs: Vec<f64> = records.iter().map(|(r, _)| r.queries).collect();
    let estimate = MeanEstimate::from_samples(&costs);
    let restarts: u64 = records.iter().map(|(r, _)| r.restarts).sum();
    let failed: u64 = records.iter().map(|(r, _)| r.failed_trials).sum();
    let attempts = restarts + trials as u64;
    let bound = closed_form_bound(shape.d(), shape.k(), b, LogBase::Natural)?;
    Ok(SimSummary {
        trials,
        mean_cost: estimate.mean,
        stderr: estimate.stderr,
        restarts_mean: restarts as f64 / trials as f64,
        bound,
        ratio: estimate.mean / bound,
        incorrect_certificates: records.iter().filter(|(_, ok)| !ok).count(),
        verification_failure_rate: failed as f64 / attempts as f64,
        attempts,
    })
}
