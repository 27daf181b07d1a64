mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use config::{
    parse_entry, parse_f64, parse_grid, parse_query, parse_rates, parse_string, parse_technique, parse_usize,
    ConfigFile, ParseError,
};
use statpriv::{amplify, figures, fmt_num, iid, tradeoff, verify, DatabaseModel, Pmf, Query, Technique};

/// Exact statistical-privacy curves, subsampling amplification bounds and
/// trade-off functions as CSV.
#[derive(Parser, Debug)]
#[command(name = "statpriv", version)]
struct Cli {
    /// key=value file supplying defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// Entry distribution: bern:p, point:v, uniform:k or pmf:v=w;v=w
    #[arg(long)]
    entry: Option<String>,
    /// Database size.
    #[arg(long)]
    n: Option<String>,
    /// count, sum or mean.
    #[arg(long)]
    query: Option<String>,
    /// ε grid: start:end:step, a comma list or one value (lnX allowed).
    #[arg(long)]
    eps: Option<String>,
    /// Output file (directory for `figures`); stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Enumeration budget in states.
    #[arg(long)]
    budget: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Privacy curve Φ(ε) of the unsampled query: `epsilon,delta`.
    Curve(ModelArgs),
    /// Amplified (ε′, δ′) for a sampling technique: `epsilon,eps_prime,delta_prime`.
    Amplify {
        #[command(flatten)]
        model: ModelArgs,
        /// wor:n,m | poisson:n,lambda | wr:n,m
        #[arg(long)]
        technique: Option<String>,
    },
    /// Trade-off function `alpha,t_of_alpha`, from a privacy curve or from two pmfs.
    Tradeoff {
        #[command(flatten)]
        model: ModelArgs,
        /// Apply the subsampling operator for a sample of this size.
        #[arg(long)]
        sample: Option<String>,
        /// Alternative distribution (pmf grammar as for --entry).
        #[arg(long)]
        mu: Option<String>,
        /// Null distribution.
        #[arg(long)]
        nu: Option<String>,
    },
    /// Figure data for counting queries.
    Figures {
        which: Figure,
        /// Bernoulli parameter of the entries.
        #[arg(long)]
        p: Option<String>,
        /// Database size (figures 2 and 3).
        #[arg(long)]
        n: Option<String>,
        /// ε values, comma list.
        #[arg(long)]
        eps: Option<String>,
        /// Sampling rates, comma list (figures 2 and 3).
        #[arg(long)]
        rates: Option<String>,
        /// Directory for one CSV per ε; without it a long-format CSV goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pipeline-versus-oracle agreement and bound dominance table.
    Verify {
        /// Largest database size in the matrix.
        #[arg(long = "max-n")]
        max_n: Option<String>,
        /// Output file; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Both Poisson bounds side by side for i.i.d. entries.
    ComparePoisson {
        #[command(flatten)]
        model: ModelArgs,
        /// Sampling rate.
        #[arg(long)]
        lambda: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Figure {
    Fig1,
    Fig2,
    Fig3,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Core(#[from] statpriv::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0} verification row(s) failed")]
    Verification(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(statpriv::Error::BudgetExceeded { .. }) => 2,
            CliError::Verification(_) => 3,
            _ => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn required<T>(v: Option<T>, key: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing --{key} (flag or config key `{key}`)")))
}

struct Model {
    entry: Pmf,
    n: usize,
    query: Query,
    grid: Vec<f64>,
    budget: Option<u64>,
}

fn resolve_model(cfg: &ConfigFile, m: &ModelArgs, need_n: bool) -> CliResult<Model> {
    let entry = required(cfg.resolve("entry", m.entry.as_deref(), parse_entry)?, "entry")?;
    let n = cfg.resolve("n", m.n.as_deref(), parse_usize)?;
    if n == Some(0) {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let n = if need_n { required(n, "n")? } else { n.unwrap_or(0) };
    let query = cfg
        .resolve("query", m.query.as_deref(), parse_query)?
        .unwrap_or_else(Query::count);
    let grid = cfg
        .resolve("eps", m.eps.as_deref(), parse_grid)?
        .unwrap_or_else(statpriv::divergence::default_grid);
    let budget = cfg
        .resolve("budget", m.budget.as_deref(), parse_usize)?
        .map(|b| b as u64);
    Ok(Model {
        entry,
        n,
        query,
        grid,
        budget,
    })
}

fn out_path(cfg: &ConfigFile, flag: &Option<PathBuf>) -> CliResult<Option<PathBuf>> {
    let p = cfg.resolve("out", flag.as_ref().and_then(|p| p.to_str()), parse_string)?;
    Ok(p.map(PathBuf::from))
}

fn emit(out: Option<&Path>, csv: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, csv).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|source| CliError::Io {
                path: "stdout".into(),
                source,
            }),
    }
}

fn cmd_curve(cfg: &ConfigFile, args: &ModelArgs) -> CliResult<()> {
    let m = resolve_model(cfg, args, true)?;
    let curve = match m.query.kind() {
        statpriv::QueryKind::Custom => {
            let mut db = DatabaseModel::iid(m.entry, m.n)?;
            if let Some(b) = m.budget {
                db = db.with_budget(b);
            }
            statpriv::sp_curve(&db, &m.query, &m.grid)?
        }
        _ => iid::phi_curve(&m.entry, &m.query, m.n, &m.grid)?,
    };
    emit(out_path(cfg, &args.out)?.as_deref(), &curve.to_csv())
}

fn cmd_amplify(cfg: &ConfigFile, args: &ModelArgs, technique: Option<&str>) -> CliResult<()> {
    let technique = cfg
        .resolve("technique", technique, parse_technique)?
        .flatten()
        .ok_or_else(|| CliError::Usage("amplify needs --technique wor:n,m | poisson:n,lambda | wr:n,m".into()))?;
    let m = resolve_model(cfg, args, false)?;
    let n = technique.n();
    if m.n != 0 && m.n != n {
        return Err(CliError::Usage(format!(
            "--n {} disagrees with the technique's n={n}",
            m.n
        )));
    }
    let curve = match technique {
        Technique::WithoutReplacement { m: size, .. } => amplify::wor_bound_iid(&m.entry, &m.query, n, size, &m.grid)?,
        Technique::Poisson { rate, .. } => {
            let star = amplify::poisson_bound_iid(&m.entry, &m.query, n, rate, &m.grid)?;
            let mut csv = String::from("epsilon,eps_prime,delta_prime\n");
            for (e, d) in star.iter() {
                csv.push_str(&format!("{},{},{}\n", fmt_num(e), fmt_num(e), fmt_num(d)));
            }
            return emit(out_path(cfg, &args.out)?.as_deref(), &csv);
        }
        Technique::WithReplacement { m: size, .. } => {
            let mut db = DatabaseModel::iid(m.entry, n)?;
            if let Some(b) = m.budget {
                db = db.with_budget(b);
            }
            amplify::wr_bound(&db, &m.query, n, size, &m.grid)?
        }
    };
    emit(out_path(cfg, &args.out)?.as_deref(), &curve.to_csv())
}

fn cmd_tradeoff(
    cfg: &ConfigFile,
    args: &ModelArgs,
    sample: Option<&str>,
    mu: Option<&str>,
    nu: Option<&str>,
) -> CliResult<()> {
    let mu = cfg.resolve("mu", mu, parse_entry)?;
    let nu = cfg.resolve("nu", nu, parse_entry)?;
    let out = out_path(cfg, &args.out)?;
    let t = match (mu, nu) {
        (Some(mu), Some(nu)) => tradeoff::tradeoff_from_pmfs(&mu, &nu),
        (None, None) => {
            let m = resolve_model(cfg, args, true)?;
            let phi = iid::phi_curve(&m.entry, &m.query, m.n, &m.grid)?;
            let t = tradeoff::sp_to_tradeoff(&phi);
            match cfg.resolve("sample", sample, parse_usize)? {
                Some(size) => tradeoff::subsampled_tradeoff(&t, m.n, size)?,
                None => t,
            }
        }
        _ => return Err(CliError::Usage("--mu and --nu must be given together".into())),
    };
    emit(out.as_deref(), &t.to_csv())
}

#[allow(clippy::too_many_arguments)]
fn cmd_figures(
    cfg: &ConfigFile,
    which: Figure,
    p: Option<&str>,
    n: Option<&str>,
    eps: Option<&str>,
    rates: Option<&str>,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let p = cfg.resolve("p", p, parse_f64)?.unwrap_or(0.5);
    let default_eps: &[f64] = match which {
        Figure::Fig1 => &figures::FIG1_EPSILONS,
        _ => &figures::RATIO_EPSILONS,
    };
    let epsilons = match cfg.resolve("eps", eps, parse_comma_list)? {
        Some(e) => e,
        None => default_eps.to_vec(),
    };
    let rates = cfg
        .resolve("rates", rates, parse_rates)?
        .unwrap_or_else(figures::default_rates);
    let n = cfg.resolve("n", n, parse_usize)?;
    let (name, series) = match which {
        Figure::Fig1 => {
            let sizes = match n {
                Some(max) => (1..=max / 10).map(|i| 10 * i).collect(),
                None => figures::fig1_sizes(),
            };
            if sizes.is_empty() {
                return Err(CliError::Usage("fig1 needs --n of at least 10".into()));
            }
            ("fig1", figures::fig1(p, &sizes, &epsilons)?)
        }
        Figure::Fig2 => (
            "fig2",
            figures::fig2(p, n.unwrap_or(figures::FIG2_N), &rates, &epsilons)?,
        ),
        Figure::Fig3 => (
            "fig3",
            figures::fig3(p, n.unwrap_or(figures::FIG3_N), &rates, &epsilons)?,
        ),
    };
    match out_path(cfg, out)? {
        Some(dir) => {
            fs::create_dir_all(&dir).map_err(|source| CliError::Io {
                path: dir.display().to_string(),
                source,
            })?;
            for s in &series {
                let path = dir.join(format!("{name}_eps{}.csv", fmt_num(s.epsilon)));
                emit(Some(&path), &s.to_csv())?;
            }
            Ok(())
        }
        None => {
            let first = &series[0];
            let mut csv = format!("epsilon,{},{}\n", first.x_name, first.y_name);
            for s in &series {
                for (x, y) in &s.points {
                    csv.push_str(&format!("{},{},{}\n", fmt_num(s.epsilon), fmt_num(*x), fmt_num(*y)));
                }
            }
            emit(None, &csv)
        }
    }
}

/// ε list for figures: any order, no duplicates required.
fn parse_comma_list(source: &str, s: &str) -> Result<Vec<f64>, ParseError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for part in s.split(',') {
        let x = parse_f64(source, part).map_err(|mut e| {
            e.column += offset;
            e
        })?;
        if x <= 0.0 {
            return Err(ParseError {
                source: source.to_string(),
                line: None,
                column: offset + 1,
                message: format!("figure ε must be positive, got {x}"),
            });
        }
        out.push(x);
        offset += part.len() + 1;
    }
    Ok(out)
}

fn cmd_verify(cfg: &ConfigFile, max_n: Option<&str>, out: &Option<PathBuf>, inject_fault: bool) -> CliResult<()> {
    let max_n = cfg.resolve("max-n", max_n, parse_usize)?.unwrap_or(4);
    if max_n == 0 {
        return Err(CliError::Usage("--max-n must be at least 1".into()));
    }
    let report = verify::run(verify::VerifyOptions { max_n, inject_fault })?;
    emit(out_path(cfg, out)?.as_deref(), &report.to_csv())?;
    for r in &report.refusals {
        eprintln!(
            "note: with-replacement bound refused for {}: {} (formula without the precondition still dominates: {})",
            r.case, r.reason, r.unchecked_dominates
        );
    }
    let failed = report.failures().count();
    if failed > 0 {
        return Err(CliError::Verification(failed));
    }
    Ok(())
}

fn cmd_compare_poisson(cfg: &ConfigFile, args: &ModelArgs, lambda: Option<&str>) -> CliResult<()> {
    let m = resolve_model(cfg, args, true)?;
    let lambda = required(cfg.resolve("lambda", lambda, parse_f64)?, "lambda")?;
    let rows = amplify::compare_poisson(&m.entry, &m.query, m.n, lambda, &m.grid)?;
    let mut csv = String::from("epsilon,delta_star,delta_dp_curve,eps_classic,delta_classic\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_num(r.epsilon),
            fmt_num(r.delta_star),
            fmt_num(r.delta_dp_curve),
            fmt_num(r.eps_classic),
            fmt_num(r.delta_classic)
        ));
    }
    emit(out_path(cfg, &args.out)?.as_deref(), &csv)
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            ConfigFile::parse(&path.display().to_string(), &text)?
        }
        None => ConfigFile::default(),
    };
    match &cli.command {
        Command::Curve(args) => cmd_curve(&cfg, args),
        Command::Amplify { model, technique } => cmd_amplify(&cfg, model, technique.as_deref()),
        Command::Tradeoff { model, sample, mu, nu } => {
            cmd_tradeoff(&cfg, model, sample.as_deref(), mu.as_deref(), nu.as_deref())
        }
        Command::Figures {
            which,
            p,
            n,
            eps,
            rates,
            out,
        } => cmd_figures(
            &cfg,
            *which,
            p.as_deref(),
            n.as_deref(),
            eps.as_deref(),
            rates.as_deref(),
            out,
        ),
        Command::Verify {
            max_n,
            out,
            inject_fault,
        } => cmd_verify(&cfg, max_n.as_deref(), out, *inject_fault),
        Command::ComparePoisson { model, lambda } => cmd_compare_poisson(&cfg, model, lambda.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
