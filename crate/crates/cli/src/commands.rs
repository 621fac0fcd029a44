use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use pmentropy::cone::{dag_system, fm_eliminate_with, CausalDag, FmOptions};
use pmentropy::entropic::{evaluate_entropic_witness, InputJoint};
use pmentropy::entropy_lp::{
    conjectured_min_entropy, curve_csv, linear_grid, min_entropy_curve, min_entropy_exact, min_entropy_witness,
};
use pmentropy::quantum::{quantum_curve_csv, quantum_entropy_curve, QuantumOptions, StateMode};
use pmentropy::rational::{format_rational, parse_rational};
use pmentropy::strategies::{
    enumerate_strategies, strategies_to_json_lines, zero_entropy_closed_form, zero_entropy_example,
    DeterministicStrategy, EnumerationOptions, DEFAULT_STRATEGY_CAP,
};
use pmentropy::witness::builtin;
use pmentropy::{validate_behavior, Behavior, LinearWitness, Rational, Scenario};

use crate::error::{CliError, Result};

pub struct Ctx {
    pub out: Option<PathBuf>,
    pub dry_run: bool,
}

impl Ctx {
    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text).map_err(|source| CliError::Write { path: path.clone(), source }),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn emit_json(&self, v: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(v).expect("json value serializes");
        text.push('\n');
        self.emit(&text)
    }

    /// Prints the plan on stdout and reports whether to stop.
    fn plan(&self, command: &str, mut details: Value) -> bool {
        if !self.dry_run {
            return false;
        }
        details["command"] = json!(command);
        details["out"] = json!(self.out.as_ref().map(|p| p.display().to_string()));
        println!("{}", serde_json::to_string_pretty(&details).expect("json value serializes"));
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FacetFormat {
    Text,
    Json,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

/// A built-in name such as `I3` or `R4`, or a path to witness JSON.
fn load_witness(arg: &str) -> Result<LinearWitness> {
    let path = Path::new(arg);
    if path.is_file() || arg.ends_with(".json") {
        return Ok(LinearWitness::from_json_str(&read(path)?)?);
    }
    Ok(builtin(arg)?)
}

fn load_behavior(path: &Path) -> Result<Behavior> {
    Ok(Behavior::from_json_str(&read(path)?)?)
}

fn load_dag(arg: &str) -> Result<CausalDag> {
    let path = Path::new(arg);
    if path.is_file() || arg.ends_with(".json") {
        return Ok(CausalDag::from_json_str(&read(path)?)?);
    }
    Ok(CausalDag::template(arg)?)
}

fn split_grid(arg: &str) -> Result<(&str, &str, usize)> {
    let parts: Vec<&str> = arg.split(':').collect();
    let [lo, hi, count] = parts[..] else {
        return Err(CliError::Usage(format!("grid {arg:?} must look like min:max:points")));
    };
    let count: usize =
        count.trim().parse().map_err(|_| CliError::Usage(format!("grid point count {count:?} is not an integer")))?;
    if count == 0 {
        return Err(CliError::Usage("grid needs at least one point".into()));
    }
    Ok((lo, hi, count))
}

fn rational_grid(arg: &str) -> Result<Vec<Rational>> {
    let (lo, hi, count) = split_grid(arg)?;
    let (lo, hi) = (parse_rational(lo)?, parse_rational(hi)?);
    if lo > hi {
        return Err(CliError::Usage(format!("grid {arg:?} has min > max")));
    }
    Ok(linear_grid(&lo, &hi, count)?)
}

fn float_grid(arg: &str) -> Result<Vec<f64>> {
    let (lo, hi, count) = split_grid(arg)?;
    let parse = |s: &str| -> Result<f64> {
        let s = s.trim();
        if let Some(arg) = s.strip_prefix("log2(").and_then(|r| r.strip_suffix(')')) {
            return Ok(parse_f64(arg)?.log2());
        }
        parse_f64(s)
    };
    let (lo, hi) = (parse(lo)?, parse(hi)?);
    if lo > hi {
        return Err(CliError::Usage(format!("grid {arg:?} has min > max")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| CliError::Usage(format!("not a number: {s:?}")))
}

fn rationals(v: &[Rational]) -> Value {
    json!(v.iter().map(format_rational).collect::<Vec<_>>())
}

#[derive(Debug, Args)]
pub struct MinEntropyArgs {
    /// Built-in witness (I3, I4, R4, ...) or witness JSON.
    #[arg(long, conflicts_with = "behavior", requires = "value")]
    witness: Option<String>,
    /// Witness value, e.g. `4`, `7/2` or `3.5`.
    #[arg(long)]
    value: Option<String>,
    /// Largest message size considered (default: the witness's largest bound).
    #[arg(long)]
    dmax: Option<usize>,
    /// Behavior JSON to decompose exactly.
    #[arg(long, required_unless_present = "witness")]
    behavior: Option<PathBuf>,
    /// Message size for `--behavior` (default: number of preparations).
    #[arg(long, short)]
    d: Option<usize>,
}

pub fn min_entropy(ctx: &Ctx, a: MinEntropyArgs) -> Result<()> {
    if let Some(path) = &a.behavior {
        let b = load_behavior(path)?;
        let d = a.d.unwrap_or(b.scenario().n());
        if ctx.plan("min-entropy", json!({ "behavior": path.display().to_string(), "d": d })) {
            return Ok(());
        }
        let r = min_entropy_exact(&b, d)?;
        let strategies: Vec<Value> = r
            .mixture
            .strategies()
            .iter()
            .zip(r.mixture.weights())
            .map(|(s, w)| json!({ "weight": format_rational(w), "d": s.d, "g": s.g, "f": s.f }))
            .collect();
        return ctx.emit_json(&json!({
            "d": d,
            "h_min_bits": r.h_min,
            "marginal": rationals(&r.marginal),
            "mixture": strategies,
        }));
    }
    let arg = a.witness.as_deref().expect("clap enforces witness or behavior");
    let w = load_witness(arg)?;
    let value = parse_rational(a.value.as_deref().expect("clap enforces value"))?;
    let dmax = a.dmax.unwrap_or(w.max_dimension());
    if ctx.plan(
        "min-entropy",
        json!({ "witness": w.name(), "value": format_rational(&value), "dmax": dmax }),
    ) {
        return Ok(());
    }
    let r = min_entropy_witness(&w, &value, dmax)?;
    let closed = conjectured_min_entropy(&w, &value).ok().map(|p| p.entropy);
    let per_dimension: Vec<Value> =
        r.per_dimension.iter().map(|p| json!({ "d": p.d, "h_min_bits": p.h_min })).collect();
    ctx.emit_json(&json!({
        "witness": w.name(),
        "value": format_rational(&r.value),
        "h_min_bits": r.h_min,
        "h_closed_form_bits": closed,
        "argmin": rationals(&r.argmin),
        "d_argmin": r.d_argmin,
        "per_dimension": per_dimension,
    }))
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    witness: String,
    /// `min:max:points` over witness values (default: L_1 to the top bound, 41 points).
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    dmax: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: TableFormat,
}

pub fn curve(ctx: &Ctx, a: CurveArgs) -> Result<()> {
    let w = load_witness(&a.witness)?;
    let dmax = a.dmax.unwrap_or(w.max_dimension());
    let grid = match &a.grid {
        Some(arg) => rational_grid(arg)?,
        None => {
            let lo = w.bound(1).cloned().unwrap_or_else(|| w.bounds().values().next().cloned().unwrap_or_default());
            let hi = w.bounds().values().last().cloned().unwrap_or_default();
            linear_grid(&lo, &hi, 41)?
        }
    };
    if ctx.plan(
        "curve",
        json!({
            "witness": w.name(),
            "dmax": dmax,
            "grid": { "min": format_rational(&grid[0]), "max": format_rational(grid.last().expect("grid is nonempty")), "points": grid.len() },
            "format": format!("{:?}", a.format).to_lowercase(),
        }),
    ) {
        return Ok(());
    }
    let rows = min_entropy_curve(&w, &grid, dmax)?;
    match a.format {
        TableFormat::Csv => ctx.emit(&curve_csv(&rows)),
        TableFormat::Json => ctx.emit_json(&json!(rows
            .iter()
            .map(|r| json!({
                "value": format_rational(&r.value),
                "h_min_bits": r.h_min,
                "h_closed_form_bits": r.h_closed_form,
                "d_active": r.d_active,
            }))
            .collect::<Vec<_>>())),
    }
}

#[derive(Debug, Args)]
pub struct FacetsArgs {
    /// Template (fig1b, fig1c, fig1c-split) or DAG JSON.
    #[arg(long)]
    dag: String,
    #[arg(long, value_enum, default_value = "text")]
    format: FacetFormat,
    /// Abort once an elimination step would hold more rows than this.
    #[arg(long)]
    row_cap: Option<usize>,
}

pub fn facets(ctx: &Ctx, a: FacetsArgs) -> Result<()> {
    let dag = load_dag(&a.dag)?;
    let system = dag_system(&dag)?;
    let keep = dag.marginal_keep()?;
    let mut opts = FmOptions::default();
    if let Some(cap) = a.row_cap {
        opts.row_cap = cap;
    }
    if ctx.plan(
        "facets",
        json!({
            "dag": a.dag,
            "variables": dag.nodes,
            "constraints": system.len(),
            "kept_coordinates": keep.len(),
            "row_cap": opts.row_cap,
        }),
    ) {
        return Ok(());
    }
    let p = fm_eliminate_with(&system, &keep, &opts)?;
    match a.format {
        FacetFormat::Text => {
            let mut text = String::new();
            for line in p.nontrivial_text() {
                text.push_str(&line);
                text.push('\n');
            }
            ctx.emit(&text)
        }
        FacetFormat::Json => {
            let all: Vec<String> = p.system.constraints().iter().map(|c| p.system.format_constraint(c)).collect();
            let trivial: Vec<&String> =
                all.iter().enumerate().filter(|(i, _)| !p.nontrivial.contains(i)).map(|(_, s)| s).collect();
            ctx.emit_json(&json!({
                "variables": p.system.variables(),
                "nontrivial": p.nontrivial_text(),
                "trivial": trivial,
                "stats": {
                    "substituted": p.stats.substituted,
                    "eliminated": p.stats.eliminated,
                    "peak_rows": p.stats.peak_rows,
                    "redundant_removed": p.stats.redundant_removed,
                },
            }))
        }
    }
}

#[derive(Debug, Args)]
pub struct EntropicBoundArgs {
    /// Behavior JSON.
    #[arg(long, required_unless_present = "max_in", conflicts_with = "max_in")]
    behavior: Option<PathBuf>,
    /// Use the deterministic behavior reaching the top value of I_n.
    #[arg(long)]
    max_in: Option<usize>,
    /// `one-hot`, `plain`, or JSON `{"tuples": [[..]], "weights": [..]}`
    /// (default: one-hot when l = n − 1, plain otherwise).
    #[arg(long)]
    joint: Option<String>,
}

fn max_in_behavior(n: usize) -> Result<Behavior> {
    let w = pmentropy::make_in(n)?;
    let g: Vec<usize> = (0..n).collect();
    let (f, _) = w.best_response(&g, n);
    Ok(DeterministicStrategy::new(n, g, f)?.behavior(w.scenario())?)
}

fn resolve_joint(arg: Option<&str>, s: &Scenario) -> Result<InputJoint> {
    let weights: Vec<f64> = s.input_weights().iter().map(pmentropy::rational::to_f64).collect();
    match arg {
        Some("plain") => Ok(InputJoint::plain(weights)?),
        Some("one-hot") => Ok(InputJoint::one_hot(s.n())?),
        Some(path) => {
            let raw: InputJoint = serde_json::from_str(&read(Path::new(path))?).map_err(pmentropy::Error::from)?;
            Ok(InputJoint::new(raw.tuples().to_vec(), raw.weights().to_vec())?)
        }
        None if s.l() >= 2 && s.l() == s.n() - 1 => Ok(InputJoint::one_hot(s.n())?),
        None => Ok(InputJoint::plain(weights)?),
    }
}

pub fn entropic_bound(ctx: &Ctx, a: EntropicBoundArgs) -> Result<()> {
    let (source, b) = match (&a.behavior, a.max_in) {
        (Some(path), _) => (path.display().to_string(), load_behavior(path)?),
        (None, Some(n)) => (format!("max-I{n}"), max_in_behavior(n)?),
        (None, None) => return Err(CliError::Usage("give --behavior or --max-in".into())),
    };
    let joint = resolve_joint(a.joint.as_deref(), b.scenario())?;
    if ctx.plan(
        "entropic-bound",
        json!({ "behavior": source, "joint_tuples": joint.tuples(), "joint_weights": joint.weights() }),
    ) {
        return Ok(());
    }
    let r = evaluate_entropic_witness(&b, &joint)?;
    ctx.emit_json(&json!({
        "behavior": source,
        "lhs_bits": r.lhs,
        "terms": r.terms.iter().map(|(k, v)| json!({ "term": k, "bits": v })).collect::<Vec<_>>(),
        "statement": r.statement,
    }))
}

#[derive(Debug, Args)]
pub struct QuantumCurveArgs {
    #[arg(long)]
    witness: String,
    /// Hilbert space dimension (2 to 4).
    #[arg(long, short, default_value_t = 2)]
    d: usize,
    /// `min:max:points` over entropy caps in bits; bounds may be `log2(k)`
    /// (default: 0 to log2(d), 21 points).
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict states to real amplitudes.
    #[arg(long)]
    real_only: bool,
    /// Optimize over mixed states instead of pure ones.
    #[arg(long)]
    mixed: bool,
    /// Objective evaluations per local search stage.
    #[arg(long)]
    max_evals: Option<usize>,
    /// Skip starts taken from embedded classical strategies.
    #[arg(long)]
    no_classical_seeds: bool,
    /// Also write the optimal ensemble of every cap as JSON.
    #[arg(long)]
    ensembles: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: TableFormat,
}

pub fn quantum_curve(ctx: &Ctx, a: QuantumCurveArgs) -> Result<()> {
    let w = load_witness(&a.witness)?;
    let grid = match &a.grid {
        Some(arg) => float_grid(arg)?,
        None => float_grid(&format!("0:log2({}):21", a.d))?,
    };
    let mut opts = QuantumOptions {
        restarts: a.restarts,
        seed: a.seed,
        real_only: a.real_only,
        mode: if a.mixed { StateMode::Mixed } else { StateMode::Pure },
        classical_seeds: !a.no_classical_seeds,
        ..QuantumOptions::default()
    };
    if let Some(m) = a.max_evals {
        opts.max_evals = m;
    }
    if ctx.plan(
        "quantum-curve",
        json!({
            "witness": w.name(),
            "d": a.d,
            "grid": grid,
            "restarts": opts.restarts,
            "seed": opts.seed,
            "real_only": opts.real_only,
            "mode": if a.mixed { "mixed" } else { "pure" },
            "max_evals": opts.max_evals,
            "classical_seeds": opts.classical_seeds,
        }),
    ) {
        return Ok(());
    }
    let points = quantum_entropy_curve(&w, a.d, &grid, &opts)?;
    if let Some(path) = &a.ensembles {
        let dump: Vec<Value> =
            points.iter().map(|p| json!({ "s_bits": p.s_bits, "ensemble": p.ensemble.to_json() })).collect();
        let mut text = serde_json::to_string_pretty(&dump).expect("json value serializes");
        text.push('\n');
        fs::write(path, text).map_err(|source| CliError::Write { path: path.clone(), source })?;
    }
    match a.format {
        TableFormat::Csv => ctx.emit(&quantum_curve_csv(&points)),
        TableFormat::Json => ctx.emit_json(&json!(points)),
    }
}

#[derive(Debug, Args)]
pub struct StrategiesArgs {
    #[arg(long, short)]
    n: usize,
    #[arg(long, short)]
    l: usize,
    #[arg(long, short, default_value_t = 2)]
    k: usize,
    #[arg(long, short)]
    d: usize,
    /// Keep one strategy per (behavior, message marginal) pair.
    #[arg(long)]
    dedup: bool,
    /// Largest strategy count enumerated before deduplication.
    #[arg(long, default_value_t = DEFAULT_STRATEGY_CAP)]
    cap: u128,
}

pub fn strategies(ctx: &Ctx, a: StrategiesArgs) -> Result<()> {
    let s = Scenario::new(a.n, a.l, a.k)?;
    let count = pmentropy::strategies::strategy_count(&s, a.d);
    if ctx.plan(
        "strategies",
        json!({ "n": a.n, "l": a.l, "k": a.k, "d": a.d, "dedup": a.dedup, "cap": a.cap.to_string(), "count": count.map(|c| c.to_string()) }),
    ) {
        return Ok(());
    }
    let list = enumerate_strategies(&s, a.d, &EnumerationOptions { cap: a.cap, dedup: a.dedup })?;
    ctx.emit(&strategies_to_json_lines(&list))
}

#[derive(Debug, Args)]
pub struct ZeroEntropyArgs {
    /// Classical dimension to beat; uses d² preparations.
    #[arg(long, short)]
    d: usize,
}

pub fn example_zero_entropy(ctx: &Ctx, a: ZeroEntropyArgs) -> Result<()> {
    if ctx.plan("example-zero-entropy", json!({ "d": a.d, "n": a.d * a.d })) {
        return Ok(());
    }
    let e = zero_entropy_example(a.d)?;
    let marginal = e.marginal.exact_weights().map(rationals).unwrap_or(Value::Null);
    ctx.emit_json(&json!({
        "d": e.d,
        "witness": e.witness.name(),
        "strategy": { "d": e.strategy.d, "g": e.strategy.g, "f": e.strategy.f },
        "witness_value": format_rational(&e.witness_value),
        "bound": format_rational(&e.bound),
        "exceeds_bound": e.witness_value > e.bound,
        "marginal": marginal,
        "entropy_bits": e.entropy,
        "closed_form_bits": zero_entropy_closed_form(e.d),
    }))
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ValidateArgs {
    #[arg(long)]
    behavior: Option<PathBuf>,
    #[arg(long)]
    witness: Option<String>,
    #[arg(long)]
    dag: Option<String>,
}

pub fn validate(ctx: &Ctx, a: ValidateArgs) -> Result<()> {
    if let Some(path) = &a.behavior {
        let text = read(path)?;
        if ctx.plan("validate", json!({ "behavior": path.display().to_string() })) {
            return Ok(());
        }
        let raw: Value = serde_json::from_str(&text).map_err(pmentropy::Error::from)?;
        let json = pmentropy::scenario::BehaviorJson::from_value(&raw)?;
        let table = Behavior::from_json_unchecked(&json)?;
        let violations: Vec<String> = validate_behavior(&table).iter().map(|v| v.to_string()).collect();
        let s = table.scenario();
        ctx.emit_json(&json!({
            "kind": "behavior",
            "n": s.n(), "l": s.l(), "k": s.k(),
            "valid": violations.is_empty(),
            "violations": violations,
        }))?;
        if !violations.is_empty() {
            return Err(CliError::Core(pmentropy::Error::InvalidBehavior(format!(
                "{} violation(s), first: {}",
                violations.len(),
                violations[0]
            ))));
        }
        return Ok(());
    }
    if let Some(arg) = &a.witness {
        if ctx.plan("validate", json!({ "witness": arg })) {
            return Ok(());
        }
        let w = load_witness(arg)?;
        let bounds: serde_json::Map<String, Value> =
            w.bounds().iter().map(|(d, b)| (d.to_string(), json!(format_rational(b)))).collect();
        return ctx.emit_json(&json!({
            "kind": "witness", "name": w.name(), "n": w.n(), "l": w.l(), "valid": true, "bounds": bounds,
        }));
    }
    let arg = a.dag.as_deref().expect("clap requires one input");
    if ctx.plan("validate", json!({ "dag": arg })) {
        return Ok(());
    }
    let dag = load_dag(arg)?;
    let order: Vec<&String> = dag.topological_order()?.into_iter().map(|i| &dag.nodes[i]).collect();
    ctx.emit_json(&json!({ "kind": "dag", "valid": true, "nodes": dag.nodes, "topological_order": order }))
}
