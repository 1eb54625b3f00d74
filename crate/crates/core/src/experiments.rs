//! Table runs, configuration files and output formatting.
//!
//! Both tables use p-dimensional spectra Σ = diag(a^{p−1}, …, a, 1) and
//! Casella's G. Table 1 reports 1 − R(θₘ, δ)/trΣ at θₘ = m·(trΣ/p)^{1/2}·1ₚ,
//! Table 2 reports 1 − R̄(δ, τ)/trΣ under θ ~ N(0, τI).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::conditions::{
    ensemble_condition_casella, ensemble_condition_general, ordinary_minimax_check, standard_tau_grid,
    stein_form_ensemble_analytic, ConditionReport,
};
use crate::error::{Error, Result};
use crate::estimator::ShrinkageRule;
use crate::model::{casella_g, make_geometric_covariance, theta_on_diagonal, CovarianceSpec, MeanVector, ShrinkageMatrix};
use crate::phi::PhiSpec;
use crate::risk::{
    bayes_risk_direct, bayes_risk_dirichlet_oracle, bayes_risk_rb, mc_ordinary_risk, mc_ordinary_risk_sure, Engine,
    RiskEstimate,
};

pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// Table 1 cells with m below this use `n_mc` draws, the rest `n_sure`.
pub const SMALL_CELL_M: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    /// Generalized Bayes δ* with Casella G.
    Gb,
    /// Stein form c₁ = c₂ = p − 2 with Casella G.
    Js,
    /// δ = x.
    Mle,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Gb => "GB",
            EstimatorKind::Js => "JS",
            EstimatorKind::Mle => "MLE",
        }
    }

    pub fn phi(&self, p: usize) -> Result<PhiSpec> {
        match self {
            EstimatorKind::Gb => PhiSpec::generalized_bayes(p),
            EstimatorKind::Js => PhiSpec::james_stein_variant(p),
            EstimatorKind::Mle => Ok(PhiSpec::Mle),
        }
    }

    pub fn shrinkage(&self, sigma: &CovarianceSpec) -> ShrinkageMatrix {
        match self {
            EstimatorKind::Mle => ShrinkageMatrix::identity(sigma.dim()),
            _ => casella_g(sigma),
        }
    }

    pub fn rule(&self, sigma: CovarianceSpec) -> Result<ShrinkageRule> {
        let phi = self.phi(sigma.dim())?;
        let g = self.shrinkage(&sigma);
        ShrinkageRule::new(sigma, g, phi)
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "GB" => Ok(EstimatorKind::Gb),
            "JS" => Ok(EstimatorKind::Js),
            "MLE" => Ok(EstimatorKind::Mle),
            _ => Err(Error::UnknownEstimator(s.trim().to_string())),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineChoice {
    /// SURE for Table 1, RB for Table 2.
    Auto,
    Mc,
    Sure,
    Rb,
    Direct,
    Dirichlet,
}

impl EngineChoice {
    pub fn tag(&self) -> &'static str {
        match self {
            EngineChoice::Auto => "auto",
            EngineChoice::Mc => "mc",
            EngineChoice::Sure => "sure",
            EngineChoice::Rb => "rb",
            EngineChoice::Direct => "direct",
            EngineChoice::Dirichlet => "dirichlet",
        }
    }
}

impl FromStr for EngineChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(EngineChoice::Auto),
            "mc" => Ok(EngineChoice::Mc),
            "sure" => Ok(EngineChoice::Sure),
            "rb" => Ok(EngineChoice::Rb),
            "direct" => Ok(EngineChoice::Direct),
            "dirichlet" => Ok(EngineChoice::Dirichlet),
            other => Err(format!("unknown engine `{other}` (auto, mc, sure, rb, direct, dirichlet)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "md" | "markdown" => Ok(OutputFormat::Markdown),
            other => Err(format!("unknown output format `{other}` (csv, md)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub p: usize,
    pub a_list: Vec<f64>,
    pub estimators: Vec<EstimatorKind>,
    pub m_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub n_mc: u64,
    pub n_sure: u64,
    pub seed: u64,
    pub engine: EngineChoice,
    pub output_format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 10,
            a_list: vec![1.01, 1.05, 1.25, 1.5],
            estimators: vec![EstimatorKind::Gb, EstimatorKind::Js],
            m_grid: vec![0.0, 2.0, 20.0, 40.0, 60.0, 80.0, 100.0],
            tau_grid: vec![1.0, 5.0, 20.0, 40.0, 60.0, 80.0, 100.0],
            n_mc: 1_000_000,
            n_sure: 10_000_000,
            seed: DEFAULT_SEED,
            engine: EngineChoice::Auto,
            output_format: OutputFormat::Csv,
        }
    }
}

fn config_error(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(config_error(0, m));
        if self.p < 3 {
            return Err(Error::DimensionTooSmall(self.p));
        }
        if self.a_list.is_empty() || self.estimators.is_empty() || self.m_grid.is_empty() || self.tau_grid.is_empty() {
            return bad("a_list, estimators, m_grid and tau_grid must be non-empty");
        }
        if self.a_list.iter().any(|a| !(a.is_finite() && *a >= 1.0)) {
            return bad("a_list entries must be >= 1");
        }
        if self.m_grid.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return bad("m_grid entries must be >= 0");
        }
        if self.tau_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad("tau_grid entries must be > 0");
        }
        if self.n_mc < 2 || self.n_sure < 2 {
            return bad("n_mc and n_sure must be >= 2");
        }
        Ok(())
    }

    pub fn spectrum(&self, a: f64) -> Result<CovarianceSpec> {
        make_geometric_covariance(self.p, a)
    }
}

fn parse_list<T>(value: &str, item: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    if value.trim().is_empty() {
        return Err("list must be non-empty".into());
    }
    value.split(',').map(|v| item(v.trim())).collect()
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("`{s}` is not a finite number"))
}

/// Non-negative integer, also accepting exact float spellings such as `1e6`.
pub fn parse_count(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim().replace('_', "");
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 => Ok(v as u64),
        _ => Err(format!("`{s}` is not a non-negative integer")),
    }
}

/// Decimal or `0x`-prefixed hexadecimal.
pub fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim().replace('_', "");
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse::<u64>(),
    };
    parsed.map_err(|_| format!("`{s}` is not a 64-bit seed"))
}

/// Parses `key = value` lines; `#` starts a comment. Unknown or repeated keys
/// are errors. Omitted keys keep their defaults.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_error(line, format!("expected `key = value`, found `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let err = |m: String| config_error(line, format!("{key}: {m}"));
        let canonical = match key {
            "p" => {
                cfg.p = parse_count(value).map_err(err)? as usize;
                "p"
            }
            "a_list" => {
                cfg.a_list = parse_list(value, parse_real).map_err(err)?;
                "a_list"
            }
            "estimators" => {
                cfg.estimators = parse_list(value, |v| v.parse::<EstimatorKind>().map_err(|e| e.to_string())).map_err(err)?;
                "estimators"
            }
            "m_grid" => {
                cfg.m_grid = parse_list(value, parse_real).map_err(err)?;
                "m_grid"
            }
            "tau_grid" => {
                cfg.tau_grid = parse_list(value, parse_real).map_err(err)?;
                "tau_grid"
            }
            "n_mc" => {
                cfg.n_mc = parse_count(value).map_err(err)?;
                "n_mc"
            }
            "n_sure" => {
                cfg.n_sure = parse_count(value).map_err(err)?;
                "n_sure"
            }
            "seed" => {
                cfg.seed = parse_seed(value).map_err(err)?;
                "seed"
            }
            "engine" => {
                cfg.engine = value.parse().map_err(err)?;
                "engine"
            }
            "output_format" => {
                cfg.output_format = value.parse().map_err(err)?;
                "output_format"
            }
            other => return Err(config_error(line, format!("unknown key `{other}`"))),
        };
        if seen.contains(&canonical) {
            return Err(config_error(line, format!("duplicate key `{canonical}`")));
        }
        seen.push(canonical);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for one table cell. The estimator is deliberately not mixed in, so
/// estimators in the same cell share draws.
pub fn cell_seed(seed: u64, table: u64, a: f64, index: f64) -> u64 {
    [table, a.to_bits(), index.to_bits()]
        .into_iter()
        .fold(splitmix64(seed), |h, v| splitmix64(h ^ v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableCell {
    pub estimator: String,
    pub a: f64,
    /// m for Table 1, τ for Table 2.
    pub index: f64,
    /// 1 − risk/trΣ.
    pub value: f64,
    pub stderr: f64,
    pub engine: Engine,
    pub n: u64,
}

impl TableCell {
    pub fn from_risk(estimator: &str, a: f64, index: f64, trace: f64, risk: &RiskEstimate) -> Self {
        Self {
            estimator: estimator.to_string(),
            a,
            index,
            value: 1.0 - risk.mean / trace,
            stderr: risk.stderr / trace,
            engine: risk.engine,
            n: risk.n,
        }
    }
}

/// Ordinary risk through the chosen engine (`Auto` means SURE).
pub fn ordinary_risk(rule: &ShrinkageRule, theta: &MeanVector, engine: EngineChoice, n: u64, seed: u64) -> Result<RiskEstimate> {
    match engine {
        EngineChoice::Auto | EngineChoice::Sure => mc_ordinary_risk_sure(rule, theta, n, seed),
        EngineChoice::Mc => mc_ordinary_risk(rule, theta, n, seed),
        _ => Err(Error::EngineMismatch {
            engine: engine.tag(),
            quantity: "ordinary risk",
        }),
    }
}

/// Bayes risk under θ ~ N(0, τI) through the chosen engine (`Auto` means RB).
pub fn bayes_risk(rule: &ShrinkageRule, tau: f64, engine: EngineChoice, n: u64, seed: u64) -> Result<RiskEstimate> {
    match engine {
        EngineChoice::Auto | EngineChoice::Rb => bayes_risk_rb(rule, tau, n, seed),
        EngineChoice::Direct | EngineChoice::Mc => bayes_risk_direct(rule, tau, n, seed),
        EngineChoice::Dirichlet => bayes_risk_dirichlet_oracle(rule, tau, n, seed),
        EngineChoice::Sure => Err(Error::EngineMismatch {
            engine: engine.tag(),
            quantity: "Bayes risk",
        }),
    }
}

fn jobs(cfg: &ExperimentConfig, index: &[f64]) -> Vec<(EstimatorKind, f64, f64)> {
    let mut out = Vec::new();
    for &est in &cfg.estimators {
        for &a in &cfg.a_list {
            for &i in index {
                out.push((est, a, i));
            }
        }
    }
    out
}

/// Ordinary risk difference over estimators × a_list × m_grid.
pub fn run_table1(cfg: &ExperimentConfig) -> Result<Vec<TableCell>> {
    cfg.validate()?;
    jobs(cfg, &cfg.m_grid)
        .into_par_iter()
        .map(|(est, a, m)| {
            let sigma = cfg.spectrum(a)?;
            let trace = sigma.trace();
            let theta = theta_on_diagonal(m, &sigma)?;
            let rule = est.rule(sigma)?;
            let n = if m < SMALL_CELL_M { cfg.n_mc } else { cfg.n_sure };
            let risk = ordinary_risk(&rule, &theta, cfg.engine, n, cell_seed(cfg.seed, 1, a, m))?;
            Ok(TableCell::from_risk(est.name(), a, m, trace, &risk))
        })
        .collect()
}

/// Bayes risk difference over estimators × a_list × tau_grid.
pub fn run_table2(cfg: &ExperimentConfig) -> Result<Vec<TableCell>> {
    cfg.validate()?;
    jobs(cfg, &cfg.tau_grid)
        .into_par_iter()
        .map(|(est, a, tau)| {
            let sigma = cfg.spectrum(a)?;
            let trace = sigma.trace();
            let rule = est.rule(sigma)?;
            let risk = bayes_risk(&rule, tau, cfg.engine, cfg.n_mc, cell_seed(cfg.seed, 2, a, tau))?;
            Ok(TableCell::from_risk(est.name(), a, tau, trace, &risk))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub estimator: String,
    pub a: f64,
    pub report: ConditionReport,
}

/// Ordinary and ensemble condition reports for every (estimator, a).
pub fn run_check_suite(cfg: &ExperimentConfig) -> Result<Vec<CheckRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &est in &cfg.estimators {
        for &a in &cfg.a_list {
            let sigma = cfg.spectrum(a)?;
            let phi = est.phi(cfg.p)?;
            let g = est.shrinkage(&sigma);
            let ordinary = ordinary_minimax_check(&phi, &sigma, &g)?;
            let ensemble = match (est, phi) {
                (EstimatorKind::Js, PhiSpec::SteinForm { c1, c2 }) => stein_form_ensemble_analytic(c1, c2, &sigma, cfg.p)?,
                (EstimatorKind::Gb, _) => ensemble_condition_casella(&phi, &sigma, &standard_tau_grid(&sigma))?,
                _ => ensemble_condition_general(&phi, &sigma, &g, &standard_tau_grid(&sigma))?,
            };
            for report in [ordinary, ensemble] {
                rows.push(CheckRow {
                    estimator: est.name().to_string(),
                    a,
                    report,
                });
            }
        }
    }
    Ok(rows)
}

/// Six significant digits; scientific notation outside [1e-3, 1e6).
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-3..6).contains(&mag) {
        format!("{:.*}", (5 - mag) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn to_markdown(&self) -> String {
        let cell = |s: &str| s.replace('|', "\\|");
        let mut out = format!("| {} |\n", self.headers.iter().map(|h| cell(h)).collect::<Vec<_>>().join(" | "));
        out.push_str(&format!("|{}\n", "---|".repeat(self.headers.len())));
        for row in &self.rows {
            out.push_str(&format!("| {} |\n", row.iter().map(|c| cell(c)).collect::<Vec<_>>().join(" | ")));
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Markdown => self.to_markdown(),
        }
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn cells_table(cells: &[TableCell]) -> Table {
    Table {
        headers: strings(&["estimator", "a", "index", "value", "stderr", "engine", "n"]),
        rows: cells
            .iter()
            .map(|c| {
                vec![
                    c.estimator.clone(),
                    format!("{}", c.a),
                    format!("{}", c.index),
                    format_sig(c.value),
                    format_sig(c.stderr),
                    c.engine.tag().to_string(),
                    c.n.to_string(),
                ]
            })
            .collect(),
    }
}

pub fn check_table(rows: &[CheckRow]) -> Table {
    Table {
        headers: strings(&["estimator", "a", "condition", "method", "holds", "margin", "witness", "note"]),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.estimator.clone(),
                    format!("{}", r.a),
                    r.report.condition.tag().to_string(),
                    r.report.method.tag().to_string(),
                    r.report.holds.to_string(),
                    format_sig(r.report.margin),
                    r.report.witness.map(format_sig).unwrap_or_default(),
                    r.report.note.clone().unwrap_or_default(),
                ]
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = parse_config_str("# nothing set\n\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.seed, 0xC0FFEE);
    }

    #[test]
    fn parses_every_key() {
        let text = "p = 6\na_list = 1.1, 2\nestimators = gb, MLE\nm_grid = 0,1\ntau_grid = 3\n\
                    n_mc = 1e4\nn_sure = 2_000\nseed = 0x10 # hex\nengine = mc\noutput_format = md\n";
        let cfg = parse_config_str(text).unwrap();
        assert_eq!(cfg.p, 6);
        assert_eq!(cfg.a_list, vec![1.1, 2.0]);
        assert_eq!(cfg.estimators, vec![EstimatorKind::Gb, EstimatorKind::Mle]);
        assert_eq!(cfg.n_mc, 10_000);
        assert_eq!(cfg.n_sure, 2000);
        assert_eq!(cfg.seed, 16);
        assert_eq!(cfg.engine, EngineChoice::Mc);
        assert_eq!(cfg.output_format, OutputFormat::Markdown);
    }

    #[test]
    fn rejects_bad_input_with_line_numbers() {
        let line_of = |text: &str| match parse_config_str(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line_of("p = 10\nbogus = 1\n"), 2);
        assert_eq!(line_of("seed = 1\n\nseed = 2\n"), 3);
        assert_eq!(line_of("m_grid =\n"), 1);
        assert_eq!(line_of("no equals sign"), 1);
        assert_eq!(line_of("n_mc = 1"), 0);
        assert!(matches!(parse_config_str("estimators = GB, XX"), Err(Error::Config { line: 1, .. })));
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.428761234), "0.428761");
        assert_eq!(format_sig(-5.4e-4), "-5.40000e-4");
        assert_eq!(format_sig(12.5), "12.5000");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn csv_quotes_per_rfc4180() {
        let t = Table {
            headers: strings(&["a", "b"]),
            rows: vec![strings(&["x,y", "say \"hi\""])],
        };
        assert_eq!(t.to_csv(), "a,b\r\n\"x,y\",\"say \"\"hi\"\"\"\r\n");
        assert!(t.to_markdown().starts_with("| a | b |\n|---|---|\n"));
    }

    #[test]
    fn cell_seeds_differ() {
        let a = cell_seed(1, 1, 1.5, 2.0);
        assert_ne!(a, cell_seed(1, 1, 1.5, 20.0));
        assert_ne!(a, cell_seed(1, 2, 1.5, 2.0));
        assert_ne!(a, cell_seed(2, 1, 1.5, 2.0));
        assert_eq!(a, cell_seed(1, 1, 1.5, 2.0));
    }

    #[test]
    fn engine_mismatch() {
        let rule = EstimatorKind::Js.rule(make_geometric_covariance(4, 1.2).unwrap()).unwrap();
        assert!(ordinary_risk(&rule, &MeanVector::zeros(4), EngineChoice::Rb, 10, 1).is_err());
        assert!(bayes_risk(&rule, 1.0, EngineChoice::Sure, 10, 1).is_err());
    }
}
