//! `seqclear`: load and emit networks, run update orderings, search over
//! them, build gadgets and serve interactive sessions.

mod render;

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use seqclear_core::engine::{default_max_steps, DEFAULT_STEP_CEILING};
use seqclear_core::gadgets::{build, build_best_time_instance, CnfFormula, Params, GADGET_KINDS};
use seqclear_core::io::{parse_rates, rates_to_json, trace_records, NetworkFile};
use seqclear_core::{
    best_default_time, explore, greatest_clearing_vector, max_defaults, maxsat_opt, min_defaults,
    run, DebtOnlySystem, Error, ExploreConfig, NamedModel, OutcomeKind, Rates, Rational, RunConfig,
    Scalar, State, Strategy, System,
};
use seqclear_service::{serve_blocking, ServiceConfig};

use render::{num, Table};

const STEP_BOUND_ENV: &str = "SEQCLEAR_STEP_BOUND";

#[derive(Parser)]
#[command(
    name = "seqclear",
    version,
    about = "Sequential clearing of debt and CDS networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assets, liabilities, payments and equity at a recovery vector.
    Eval {
        file: PathBuf,
        /// JSON object of bank id to rate; unlisted banks are at 1.
        #[arg(long)]
        rates: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Whether a recovery vector is an equilibrium, with per-bank residuals.
    EquilibriumCheck {
        file: PathBuf,
        #[arg(long)]
        rates: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Greatest clearing vector of a debt-only network.
    Clearing {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Runs the sequential process under one strategy.
    Run {
        file: PathBuf,
        #[arg(long, default_value = "reversible")]
        model: NamedModel,
        /// `lex`, `seq:a,b,c` or `random:SEED`.
        #[arg(long, default_value = "lex")]
        strategy: String,
        /// Defaults to 4^n capped at one million.
        #[arg(long, env = STEP_BOUND_ENV)]
        max_steps: Option<u64>,
        /// Writes the trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Writes a gadget as a network file with roles.
    Gadget {
        #[arg(required_unless_present = "list")]
        kind: Option<String>,
        /// `name=value`; repeatable.
        #[arg(long = "param", value_name = "K=V")]
        params: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Prints the known gadget kinds.
        #[arg(long)]
        list: bool,
    },
    /// Explores every update ordering.
    Search {
        mode: SearchMode,
        file: PathBuf,
        #[arg(long, default_value = "reversible")]
        model: NamedModel,
        #[arg(long, env = STEP_BOUND_ENV)]
        step_bound: Option<usize>,
        #[arg(long)]
        state_cap: Option<usize>,
    },
    /// Best moment for the chooser of a MAXSAT counter instance to default.
    BestDefaultTime {
        /// DIMACS CNF file.
        #[arg(long)]
        formula: PathBuf,
        #[arg(long, env = STEP_BOUND_ENV)]
        step_bound: Option<usize>,
    },
    /// Serves the session API and the web UI.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Directory with the built web UI.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        idle_minutes: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SearchMode {
    MinDefaults,
    MaxDefaults,
    Outcomes,
}

enum CliError {
    Core(Error),
    Io(PathBuf, std::io::Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn to_json(&self) -> Value {
        let (code, message) = match self {
            CliError::Core(e) => (e.code(), e.to_string()),
            CliError::Io(path, e) => ("io_error", format!("{}: {e}", path.display())),
            CliError::Usage(m) => ("usage", m.clone()),
        };
        json!({ "error": { "code": code, "message": message } })
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn load(path: &Path) -> CliResult<System> {
    Ok(NetworkFile::from_json(&read(path)?)?.to_system()?)
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}

fn explore_config(step_bound: Option<usize>, state_cap: Option<usize>) -> ExploreConfig {
    let d = ExploreConfig::default();
    ExploreConfig {
        step_bound: step_bound.unwrap_or(d.step_bound),
        state_cap: state_cap.unwrap_or(d.state_cap),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> CliResult<String> {
    match command {
        Command::Eval { file, rates, json } => eval(&file, rates.as_deref(), json),
        Command::EquilibriumCheck { file, rates, json } => equilibrium_check(&file, &rates, json),
        Command::Clearing { file, json } => clearing(&file, json),
        Command::Run {
            file,
            model,
            strategy,
            max_steps,
            trace,
            json,
        } => run_command(&file, model, &strategy, max_steps, trace.as_deref(), json),
        Command::Gadget {
            kind,
            params,
            output,
            list,
        } => gadget(kind.as_deref(), &params, output.as_deref(), list),
        Command::Search {
            mode,
            file,
            model,
            step_bound,
            state_cap,
        } => search(mode, &file, model, explore_config(step_bound, state_cap)),
        Command::BestDefaultTime {
            formula,
            step_bound,
        } => best_time(&formula, explore_config(step_bound, None)),
        Command::Serve {
            port,
            host,
            static_dir,
            idle_minutes,
        } => {
            let config = ServiceConfig {
                static_dir,
                idle_ttl: Duration::from_secs(idle_minutes * 60),
            };
            serve_blocking(SocketAddr::new(host, port), config)
                .map_err(|e| CliError::Io(PathBuf::from(format!("{host}:{port}")), e))?;
            Ok(String::new())
        }
    }
}

fn load_rates(system: &System, path: Option<&Path>) -> CliResult<Rates> {
    match path {
        Some(p) => Ok(parse_rates(system, &read(p)?)?),
        None => Ok(Rates::ones(system.len())),
    }
}

fn eval(file: &Path, rates: Option<&Path>, as_json: bool) -> CliResult<String> {
    let system = load(file)?;
    let rates = load_rates(&system, rates)?;
    let e = system.evaluate(&rates)?;
    if as_json {
        let banks: Vec<Value> = (0..system.len())
            .map(|v| {
                json!({
                    "id": system.id(v),
                    "rate": rates.get(v).render(),
                    "assets": e.assets[v].render(),
                    "liabilities": e.total_liability[v].render(),
                    "equity": e.equity[v].render(),
                })
            })
            .collect();
        let pairs: Vec<Value> = e
            .pairwise_liabilities
            .iter()
            .map(|(&(u, v), l)| {
                json!({
                    "debtor": system.id(u),
                    "creditor": system.id(v),
                    "liability": l.render(),
                    "payment": e.payment(u, v).render(),
                })
            })
            .collect();
        return Ok(pretty(&json!({ "banks": banks, "pairs": pairs })));
    }
    let mut banks = Table::new(&["bank", "rate", "assets", "liabilities", "equity"]);
    for v in 0..system.len() {
        banks.row(vec![
            system.id(v).to_string(),
            num(rates.get(v)),
            num(&e.assets[v]),
            num(&e.total_liability[v]),
            num(&e.equity[v]),
        ]);
    }
    let mut pairs = Table::new(&["debtor", "creditor", "liability", "payment"]);
    for (&(u, v), l) in &e.pairwise_liabilities {
        pairs.row(vec![
            system.id(u).to_string(),
            system.id(v).to_string(),
            num(l),
            num(&e.payment(u, v)),
        ]);
    }
    Ok(format!(
        "{}\n{}{}",
        banks.render(),
        pairs.render(),
        render::FOOTNOTE
    ))
}

fn equilibrium_check(file: &Path, rates: &Path, as_json: bool) -> CliResult<String> {
    let system = load(file)?;
    let rates = load_rates(&system, Some(rates))?;
    let check = system.is_equilibrium(&rates)?;
    if as_json {
        let residuals: BTreeMap<&str, String> = check
            .residuals
            .iter()
            .enumerate()
            .map(|(v, r)| (system.id(v), r.render()))
            .collect();
        return Ok(pretty(
            &json!({ "equilibrium": check.holds, "residuals": residuals }),
        ));
    }
    let mut t = Table::new(&["bank", "rate", "residual"]);
    for (v, r) in check.residuals.iter().enumerate() {
        t.row(vec![system.id(v).to_string(), num(rates.get(v)), num(r)]);
    }
    Ok(format!(
        "equilibrium: {}\n{}{}",
        check.holds,
        t.render(),
        render::FOOTNOTE
    ))
}

fn clearing(file: &Path, as_json: bool) -> CliResult<String> {
    let system = load(file)?;
    let rates = greatest_clearing_vector(&DebtOnlySystem::new(system.clone())?);
    if as_json {
        return Ok(pretty(&json!({ "rates": rates_to_json(&system, &rates) })));
    }
    Ok(format!(
        "{}{}",
        rates_table(&system, &rates).render(),
        render::FOOTNOTE
    ))
}

fn rates_table(system: &System, rates: &Rates) -> Table {
    let mut t = Table::new(&["bank", "rate"]);
    for (v, r) in rates.iter().enumerate() {
        t.row(vec![system.id(v).to_string(), num(r)]);
    }
    t
}

fn parse_strategy(text: &str) -> CliResult<Strategy<'static, Rational>> {
    if text == "lex" {
        return Ok(Strategy::Lexicographic);
    }
    if let Some(list) = text.strip_prefix("seq:") {
        let ids = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        return Ok(Strategy::ExplicitSequence(ids));
    }
    if let Some(seed) = text.strip_prefix("random:") {
        let seed = seed
            .parse()
            .map_err(|_| CliError::Usage(format!("bad seed in `{text}`")))?;
        return Ok(Strategy::SeededRandom(seed));
    }
    Err(CliError::Usage(format!(
        "unknown strategy `{text}`; use lex, seq:a,b,... or random:SEED"
    )))
}

fn outcome_line(kind: &OutcomeKind) -> String {
    match kind {
        OutcomeKind::Stabilized { at } => format!("stabilized after {at} steps"),
        OutcomeKind::CycleDetected {
            first_visit,
            period,
        } => {
            format!("cycle detected: state of step {first_visit} recurs with period {period}")
        }
        OutcomeKind::StepBoundExceeded { steps } => {
            format!("step bound exceeded after {steps} steps")
        }
        OutcomeKind::SequenceExhausted { at } => {
            format!("sequence exhausted after {at} steps with banks still updatable")
        }
    }
}

fn run_command(
    file: &Path,
    model: NamedModel,
    strategy: &str,
    max_steps: Option<u64>,
    trace_path: Option<&Path>,
    as_json: bool,
) -> CliResult<String> {
    let system = load(file)?;
    let strategy = parse_strategy(strategy)?;
    let bound = max_steps.unwrap_or_else(|| default_max_steps(system.len(), DEFAULT_STEP_CEILING));
    let out = run(
        State::initial(system.clone(), model.policy()),
        strategy,
        RunConfig::steps(bound),
    )?;
    let trace = trace_records(&system, out.state.trace());
    if let Some(path) = trace_path {
        write(
            path,
            &pretty(&serde_json::to_value(&trace).expect("records serialize")),
        )?;
    }
    let rates = out.state.rates();
    if as_json {
        return Ok(pretty(&json!({
            "model": model.name(),
            "outcome": out.kind,
            "first_recurrence": out.first_recurrence,
            "defaults": out.state.defaults(),
            "defaulting_steps": out.state.defaulting_steps(),
            "rates": rates_to_json(&system, rates),
            "trace": trace,
        })));
    }
    Ok(format!(
        "{}\ndefaults: {}, defaulting steps: {}\n{}{}",
        outcome_line(&out.kind),
        out.state.defaults(),
        out.state.defaulting_steps(),
        rates_table(&system, rates).render(),
        render::FOOTNOTE
    ))
}

fn gadget(
    kind: Option<&str>,
    params: &[String],
    output: Option<&Path>,
    list: bool,
) -> CliResult<String> {
    if list {
        return Ok(GADGET_KINDS.iter().map(|k| format!("{k}\n")).collect());
    }
    let kind = kind.ok_or_else(|| CliError::Usage("missing gadget kind".into()))?;
    let mut map = Params::new();
    for p in params {
        let (k, v) = p.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("parameter `{p}` is not of the form name=value"))
        })?;
        map.insert(k.trim().to_string(), v.to_string());
    }
    let bp = build::<Rational>(kind, &map)?;
    let text = NetworkFile::from_blueprint(&bp).to_json();
    match output {
        Some(path) => {
            write(path, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn replay(system: &System, model: NamedModel, witness: &[String]) -> CliResult<Value> {
    let mut state = State::initial(system.clone(), model.policy());
    for id in witness {
        state.step(id)?;
    }
    Ok(serde_json::to_value(trace_records(system, state.trace())).expect("records serialize"))
}

fn search(
    mode: SearchMode,
    file: &Path,
    model: NamedModel,
    config: ExploreConfig,
) -> CliResult<String> {
    let system = load(file)?;
    let policy = model.policy();
    let report = match mode {
        SearchMode::MinDefaults | SearchMode::MaxDefaults => {
            let (name, best) = match mode {
                SearchMode::MinDefaults => ("min-defaults", min_defaults(&system, policy, config)?),
                _ => ("max-defaults", max_defaults(&system, policy, config)?),
            };
            json!({
                "mode": name,
                "model": model.name(),
                "truncated": false,
                "defaults": best.defaults,
                "witness": best.witness,
                "trace": replay(&system, model, &best.witness)?,
            })
        }
        SearchMode::Outcomes => {
            let result = explore(&system, policy, config);
            let terminals: Vec<Value> = result
                .terminals
                .iter()
                .map(|t| {
                    let frozen: BTreeMap<usize, String> = t
                        .state
                        .frozen
                        .iter()
                        .map(|(i, w)| (*i, w.render()))
                        .collect();
                    json!({
                        "rates": rates_to_json(&system, &t.state.rates),
                        "frozen": frozen,
                        "defaults": t.defaults,
                        "witness": t.witness,
                    })
                })
                .collect();
            json!({
                "mode": "outcomes",
                "model": model.name(),
                "truncated": result.truncated,
                "states_visited": result.states_visited,
                "cycles_found": result.cycles_found,
                "terminal_count": terminals.len(),
                "terminals": terminals,
            })
        }
    };
    Ok(pretty(&report))
}

fn best_time(path: &Path, config: ExploreConfig) -> CliResult<String> {
    let formula = CnfFormula::parse_dimacs(&read(path)?)?;
    let bp = build_best_time_instance::<Rational>(&formula)?;
    let report = best_default_time(&bp, config)?;
    let opportunities: Vec<Value> = report
        .opportunities
        .iter()
        .map(|o| {
            json!({
                "index": o.index,
                "step": o.step,
                "payoff": o.payoff.render(),
                "assignment": o.assignment,
            })
        })
        .collect();
    Ok(pretty(&json!({
        "variables": formula.variables(),
        "clauses": formula.clauses().len(),
        "maxsat_opt": maxsat_opt(&formula),
        "best": report.best,
        "best_payoff": report.best().payoff.render(),
        "opportunities": opportunities,
    })))
}
