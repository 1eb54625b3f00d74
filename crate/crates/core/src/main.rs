use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ensemble_minimax::estimator::apply;
use ensemble_minimax::experiments::{
    bayes_risk, cell_seed, cells_table, check_table, format_sig, ordinary_risk, parse_config, parse_count, parse_seed,
    run_check_suite, run_table1, run_table2, EngineChoice, EstimatorKind, ExperimentConfig, OutputFormat, Table,
    TableCell,
};
use ensemble_minimax::model::theta_on_diagonal;
use ensemble_minimax::{PhiSpec, Result};

#[derive(Parser)]
#[command(name = "ensemble-minimax", version, about = "Heteroscedastic shrinkage estimators: risks, conditions and tables")]
struct Cli {
    /// Experiment config (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, decimal or 0x-hex.
    #[arg(long, global = true, value_parser = parse_seed)]
    seed: Option<u64>,
    /// csv or md.
    #[arg(long, global = true)]
    output: Option<OutputFormat>,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    a_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<EstimatorKind>>,
    #[arg(long, value_delimiter = ',')]
    m_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    tau_grid: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_count)]
    n_mc: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    n_sure: Option<u64>,
    #[arg(long)]
    engine: Option<EngineChoice>,
}

#[derive(Subcommand)]
enum Command {
    /// Ordinary risk difference 1 − R(θₘ)/trΣ.
    Table1(Overrides),
    /// Bayes risk difference 1 − R̄(τ)/trΣ.
    Table2(Overrides),
    /// Ordinary and ensemble minimaxity conditions.
    Check(Overrides),
    /// One ordinary-risk cell.
    Risk {
        #[arg(long)]
        estimator: EstimatorKind,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        m: f64,
        #[arg(long, value_parser = parse_count)]
        n: Option<u64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// One Bayes-risk cell.
    BayesRisk {
        #[arg(long)]
        estimator: EstimatorKind,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long, value_parser = parse_count)]
        n: Option<u64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate a profile φ and its derivative.
    PhiEval {
        /// gb, js, mle or stein (with --c1/--c2).
        #[arg(long, default_value = "gb")]
        profile: String,
        #[arg(long, default_value_t = 10)]
        p: usize,
        #[arg(long)]
        c1: Option<f64>,
        #[arg(long)]
        c2: Option<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        z: Vec<f64>,
    },
    /// Apply a rule to one observation.
    Estimate {
        #[arg(long)]
        estimator: EstimatorKind,
        #[arg(long)]
        a: f64,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        x: Vec<f64>,
    },
}

impl Overrides {
    fn apply_to(self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.p {
            cfg.p = v;
        }
        if let Some(v) = self.a_list {
            cfg.a_list = v;
        }
        if let Some(v) = self.estimators {
            cfg.estimators = v;
        }
        if let Some(v) = self.m_grid {
            cfg.m_grid = v;
        }
        if let Some(v) = self.tau_grid {
            cfg.tau_grid = v;
        }
        if let Some(v) = self.n_mc {
            cfg.n_mc = v;
        }
        if let Some(v) = self.n_sure {
            cfg.n_sure = v;
        }
        if let Some(v) = self.engine {
            cfg.engine = v;
        }
    }
}

fn phi_from_args(profile: &str, p: usize, c1: Option<f64>, c2: Option<f64>) -> Result<PhiSpec> {
    match profile.to_ascii_lowercase().as_str() {
        "gb" => PhiSpec::generalized_bayes(p),
        "mle" => Ok(PhiSpec::Mle),
        "js" => match (c1, c2) {
            (None, None) => PhiSpec::james_stein_variant(p),
            _ => PhiSpec::stein_form(c1.unwrap_or((p - 2) as f64), c2.unwrap_or((p - 2) as f64)),
        },
        "stein" => PhiSpec::stein_form(c1.unwrap_or((p - 2) as f64), c2.unwrap_or(0.0)),
        other => Err(ensemble_minimax::Error::UnknownEstimator(other.to_string())),
    }
}

fn run(cli: Cli) -> Result<String> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(fmt) = cli.output {
        cfg.output_format = fmt;
    }
    let table: Table = match cli.command {
        Command::Table1(o) => {
            o.apply_to(&mut cfg);
            cells_table(&run_table1(&cfg)?)
        }
        Command::Table2(o) => {
            o.apply_to(&mut cfg);
            cells_table(&run_table2(&cfg)?)
        }
        Command::Check(o) => {
            o.apply_to(&mut cfg);
            check_table(&run_check_suite(&cfg)?)
        }
        Command::Risk {
            estimator,
            a,
            m,
            n,
            overrides,
        } => {
            overrides.apply_to(&mut cfg);
            let sigma = cfg.spectrum(a)?;
            let trace = sigma.trace();
            let theta = theta_on_diagonal(m, &sigma)?;
            let rule = estimator.rule(sigma)?;
            let risk = ordinary_risk(&rule, &theta, cfg.engine, n.unwrap_or(cfg.n_mc), cell_seed(cfg.seed, 1, a, m))?;
            cells_table(&[TableCell::from_risk(estimator.name(), a, m, trace, &risk)])
        }
        Command::BayesRisk {
            estimator,
            a,
            tau,
            n,
            overrides,
        } => {
            overrides.apply_to(&mut cfg);
            let sigma = cfg.spectrum(a)?;
            let trace = sigma.trace();
            let rule = estimator.rule(sigma)?;
            let risk = bayes_risk(&rule, tau, cfg.engine, n.unwrap_or(cfg.n_mc), cell_seed(cfg.seed, 2, a, tau))?;
            cells_table(&[TableCell::from_risk(estimator.name(), a, tau, trace, &risk)])
        }
        Command::PhiEval { profile, p, c1, c2, z } => {
            let phi = phi_from_args(&profile, p, c1, c2)?;
            let mut rows = Vec::with_capacity(z.len());
            for zi in z {
                let v = phi.value(zi)?;
                rows.push(vec![format_sig(zi), format_sig(v.value), format_sig(v.derivative)]);
            }
            Table {
                headers: vec!["z".into(), "phi".into(), "phi_prime".into()],
                rows,
            }
        }
        Command::Estimate { estimator, a, x } => {
            cfg.p = x.len();
            let rule = estimator.rule(cfg.spectrum(a)?)?;
            let est = apply(&rule, &x)?;
            let z = format_sig(est.z);
            Table {
                headers: vec!["i".into(), "x".into(), "factor".into(), "delta".into(), "z".into()],
                rows: (0..x.len())
                    .map(|i| {
                        vec![
                            (i + 1).to_string(),
                            format_sig(x[i]),
                            format_sig(est.factors[i]),
                            format_sig(est.delta[i]),
                            z.clone(),
                        ]
                    })
                    .collect(),
            }
        }
    };
    Ok(table.render(cfg.output_format))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    let text = match run(cli) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let written = match out {
        Some(path) => std::fs::write(&path, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
