//! Command-line front end: CSV ingestion, weight-spec parsing, test
//! execution, and the simulation / figure / benchmark drivers.
//!
//! The binary in `main.rs` is a thin shell around [`run`]; everything here
//! returns [`Result`] so exit codes can be derived uniformly from the error
//! kind (0 success, 2 usage or data error, 3 numeric failure).

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::exact::{
    exact_null_distribution, permutation_pvalue, subset_two_sample_t, DEFAULT_SUBSET_BUDGET,
};
use crate::models::{adaptive_weight, pooled_mle, Family};
use crate::rank_map::{assign_ranks, build_grid, runtime_profile, RankGrid, SampleSet};
use crate::simulate::{
    calibrate_null, effect_for_power, efficiency_report, joint_vs_bonferroni,
    mc_standard_error, power_curve, GroupSpec, Marginal, SimConfig,
    WeightSpec as SimWeightSpec,
};
use crate::teststat::{
    asymptotic_pvalue, k_sample_t, null_covariance, quadratic_stat, two_sample_t, Method,
    QuadraticForm, TestOutcome,
};
use crate::weights::{builtin, center_on_grid, project_nuisance, stack, CenteredWeights};

/// One atom of a weight specification: a builtin name or a model-adaptive
/// request. A bare `model` defers the family choice to the `--family` flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightTerm {
    Builtin(String),
    Model(Option<Family>),
}

impl WeightTerm {
    fn parse(s: &str) -> Result<WeightTerm> {
        if s == "model" {
            return Ok(WeightTerm::Model(None));
        }
        if let Some(fam) = s.strip_prefix("model:") {
            return Ok(WeightTerm::Model(Some(Family::parse(fam)?)));
        }
        // Validate the builtin name eagerly; dimension 1 is as good as any.
        builtin(s, 1)?;
        Ok(WeightTerm::Builtin(s.to_string()))
    }

    fn family(&self, default: Family) -> Option<Family> {
        match self {
            WeightTerm::Builtin(_) => None,
            WeightTerm::Model(f) => Some(f.unwrap_or(default)),
        }
    }
}

/// A parsed `--weights` specification.
///
/// Grammar: a builtin (`mann_whitney | van_der_waerden | siegel_tukey |
/// mood | klotz`), `model[:<family>]`, `stack:<a>+<b>`, or
/// `proj:<signal>/<nuisance>`, where stack and projection parts are
/// themselves builtin or model terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightExpr {
    Single(WeightTerm),
    Stack(WeightTerm, WeightTerm),
    Proj {
        signal: WeightTerm,
        nuisance: WeightTerm,
    },
}

/// Parse a `--weights` string into its structured form.
pub fn parse_weight_spec(spec: &str) -> Result<WeightExpr> {
    if let Some(rest) = spec.strip_prefix("stack:") {
        let (a, b) = rest.split_once('+').ok_or_else(|| {
            Error::InvalidArgument(format!("stack spec '{spec}' needs the form stack:<a>+<b>"))
        })?;
        return Ok(WeightExpr::Stack(WeightTerm::parse(a)?, WeightTerm::parse(b)?));
    }
    if let Some(rest) = spec.strip_prefix("proj:") {
        let (s, n) = rest.split_once('/').ok_or_else(|| {
            Error::InvalidArgument(format!(
                "projection spec '{spec}' needs the form proj:<signal>/<nuisance>"
            ))
        })?;
        return Ok(WeightExpr::Proj {
            signal: WeightTerm::parse(s)?,
            nuisance: WeightTerm::parse(n)?,
        });
    }
    Ok(WeightExpr::Single(WeightTerm::parse(spec)?))
}

impl WeightExpr {
    /// Canonical spec string with any deferred model family filled in; this
    /// is what test output reports under `weights`.
    pub fn canonical(&self, default_family: Family) -> String {
        let term = |t: &WeightTerm| match t {
            WeightTerm::Builtin(name) => name.clone(),
            WeightTerm::Model(f) => format!("model:{}", f.unwrap_or(default_family).name()),
        };
        match self {
            WeightExpr::Single(t) => term(t),
            WeightExpr::Stack(a, b) => format!("stack:{}+{}", term(a), term(b)),
            WeightExpr::Proj { signal, nuisance } => {
                format!("proj:{}/{}", term(signal), term(nuisance))
            }
        }
    }

    /// Translate into the simulation module's weight description. Model
    /// terms are only supported standalone there: the simulation pipeline
    /// evaluates adaptive weights at reference parameters, which is defined
    /// per family, not per stacked or projected component.
    pub fn to_sim_spec(&self, default_family: Family) -> Result<SimWeightSpec> {
        let name = |t: &WeightTerm| -> Result<String> {
            match t {
                WeightTerm::Builtin(n) => Ok(n.clone()),
                WeightTerm::Model(_) => Err(Error::InvalidArgument(
                    "model weights can be simulated standalone, not inside stack/proj".into(),
                )),
            }
        };
        match self {
            WeightExpr::Single(WeightTerm::Model(f)) => {
                Ok(SimWeightSpec::Adaptive(f.unwrap_or(default_family)))
            }
            WeightExpr::Single(WeightTerm::Builtin(n)) => Ok(SimWeightSpec::Builtin(n.clone())),
            WeightExpr::Stack(a, b) => Ok(SimWeightSpec::Stacked(vec![name(a)?, name(b)?])),
            WeightExpr::Proj { signal, nuisance } => Ok(SimWeightSpec::Projected {
                signal: name(signal)?,
                nuisance: name(nuisance)?,
            }),
        }
    }

    /// Build the centered weight matrix on a grid, fitting pooled maximum
    /// likelihood estimates from the sample for model terms.
    pub fn center(
        &self,
        sample: &SampleSet,
        grid: &RankGrid,
        default_family: Family,
    ) -> Result<CenteredWeights> {
        let resolve = |t: &WeightTerm| match t {
            WeightTerm::Builtin(name) => builtin(name, sample.dim()),
            WeightTerm::Model(_) => {
                let fam = t.family(default_family).expect("model term");
                let params = pooled_mle(fam, sample)?;
                adaptive_weight(fam, &params)
            }
        };
        match self {
            WeightExpr::Single(t) => center_on_grid(&resolve(t)?, grid),
            WeightExpr::Stack(a, b) => {
                center_on_grid(&stack(&[resolve(a)?, resolve(b)?])?, grid)
            }
            WeightExpr::Proj { signal, nuisance } => {
                let cs = center_on_grid(&resolve(signal)?, grid)?;
                let cn = center_on_grid(&resolve(nuisance)?, grid)?;
                project_nuisance(&cs, &cn)
            }
        }
    }
}

impl fmt::Display for WeightExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical(Family::GaussianLocation))
    }
}

/// One parsed CSV file: header names, numeric rows, and (if a group column
/// was requested) the raw group label per row.
#[derive(Debug)]
struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<String>,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!("is_io_error"),
        }
    } else {
        let line = e.position().map_or(0, |p| p.line()) as usize;
        Error::Parse {
            line,
            detail: format!("{}: {e}", path.display()),
        }
    }
}

/// Read a numeric CSV with a header row. Every cell outside the group
/// column must parse as a finite number; anything else is a hard error that
/// names the offending line.
fn read_table(path: &Path, group_col: Option<&str>) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let group_idx = match group_col {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "group column '{name}' not found in {} (columns: {})",
                path.display(),
                headers.join(", ")
            ))
        })?),
        None => None,
    };
    let columns: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != group_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if columns.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} has no numeric columns",
            path.display()
        )));
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line()) as usize;
        let mut row = Vec::with_capacity(columns.len());
        for (i, cell) in record.iter().enumerate() {
            if Some(i) == group_idx {
                labels.push(cell.to_string());
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                detail: format!(
                    "{}: column '{}': cannot parse '{}' as a number",
                    path.display(),
                    headers[i],
                    cell
                ),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line,
                    detail: format!(
                        "{}: column '{}': non-finite value '{}'",
                        path.display(),
                        headers[i],
                        cell
                    ),
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    Ok(Table {
        columns,
        rows,
        labels,
    })
}

/// Load observations from either input style: a single file whose group
/// column labels the rows, or one file per group. Group ids follow sorted
/// label order in the first style and file order in the second.
pub fn load_sample(paths: &[PathBuf], group_col: Option<&str>) -> Result<SampleSet> {
    match group_col {
        Some(name) => {
            if paths.len() != 1 {
                return Err(Error::InvalidArgument(
                    "choose one input style: a single file with --group-col, or one file per group"
                        .into(),
                ));
            }
            let table = read_table(&paths[0], Some(name))?;
            let mut uniq: Vec<&String> = table.labels.iter().collect();
            uniq.sort();
            uniq.dedup();
            let ids: Vec<usize> = table
                .labels
                .iter()
                .map(|l| uniq.binary_search(&l).expect("label present"))
                .collect();
            SampleSet::new(&table.rows, ids)
        }
        None => {
            if paths.len() < 2 {
                return Err(Error::InvalidArgument(
                    "a single input file needs --group-col; otherwise pass one file per group"
                        .into(),
                ));
            }
            let mut groups = Vec::with_capacity(paths.len());
            let mut columns: Option<Vec<String>> = None;
            for path in paths {
                let table = read_table(path, None)?;
                match &columns {
                    None => columns = Some(table.columns.clone()),
                    Some(cols) if *cols != table.columns => {
                        return Err(Error::InvalidArgument(format!(
                            "input files must share one header: expected [{}], {} has [{}]",
                            cols.join(", "),
                            path.display(),
                            table.columns.join(", ")
                        )));
                    }
                    Some(_) => {}
                }
                groups.push(table.rows);
            }
            SampleSet::from_groups(&groups)
        }
    }
}

/// Inference mode as exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Asymptotic,
    Exact,
    Permutation,
}

impl From<ModeArg> for Method {
    fn from(m: ModeArg) -> Method {
        match m {
            ModeArg::Asymptotic => Method::Asymptotic,
            ModeArg::Exact => Method::Exact,
            ModeArg::Permutation => Method::Permutation,
        }
    }
}

/// Everything a test run needs, assembled from flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub group_col: Option<String>,
    pub weights: WeightExpr,
    pub family: Family,
    pub mode: Method,
    pub draws: usize,
    pub budget: u64,
    pub seed: u64,
    pub k_sample: bool,
}

/// Execute a configured test and return the outcome (not yet serialized).
///
/// Exact-mode runs whose subset count exceeds the budget fall back to
/// permutation sampling automatically; the outcome's `warning` field and
/// `method` record that this happened.
pub fn run_test(cfg: &RunConfig) -> Result<TestOutcome> {
    let sample = load_sample(&cfg.inputs, cfg.group_col.as_deref())?;
    let k = sample.k_groups();
    if !cfg.k_sample && k != 2 {
        return Err(Error::InvalidArgument(format!(
            "test compares exactly two groups, found {k}; use the ksample subcommand"
        )));
    }
    if cfg.k_sample && cfg.mode != Method::Asymptotic {
        return Err(Error::InvalidArgument(
            "ksample inference is asymptotic; exact and permutation modes are two-sample only"
                .into(),
        ));
    }

    let grid = build_grid(sample.n(), sample.dim())?;
    let assign = assign_ranks(&sample, &grid, cfg.seed)?;
    let cw = cfg.weights.center(&sample, &grid, cfg.family)?;
    let label = cfg.weights.canonical(cfg.family);

    let mut warning = None;
    let (statistic, q, df, p_value, method) = if cfg.k_sample {
        let (t, sigma) = k_sample_t(&assign, &cw, sample.groups())?;
        let (q, df) = quadratic_stat(&t, &sigma)?;
        let p = asymptotic_pvalue(q, df)?;
        (t, q, df, p, Method::Asymptotic)
    } else {
        let t = two_sample_t(&assign, &cw, sample.groups())?;
        let counts = sample.counts();
        let sigma = null_covariance(&cw, counts[0], counts[1])?;
        let form = QuadraticForm::new(&sigma)?;
        let q = form.apply(&t);
        let df = form.df();
        let n1 = sample.counts()[1];
        let stat = |sub: &[usize]| form.apply(&subset_two_sample_t(&cw, sub));
        let (p, method) = match cfg.mode {
            Method::Asymptotic => (asymptotic_pvalue(q, df)?, Method::Asymptotic),
            Method::Permutation => (
                permutation_pvalue(stat, q, sample.n(), n1, cfg.draws, cfg.seed)?,
                Method::Permutation,
            ),
            Method::Exact => match exact_null_distribution(stat, sample.n(), n1, cfg.budget) {
                Ok(table) => (table.p_value_geq(q), Method::Exact),
                Err(Error::BudgetExceeded { required, budget }) => {
                    let count = if required == u128::MAX {
                        "more than 2^128 subsets".to_string()
                    } else {
                        format!("{required} subsets")
                    };
                    warning = Some(format!(
                        "exact enumeration needs {count} (budget {budget}); \
                         fell back to permutation with B = {}",
                        cfg.draws
                    ));
                    (
                        permutation_pvalue(stat, q, sample.n(), n1, cfg.draws, cfg.seed)?,
                        Method::Permutation,
                    )
                }
                Err(e) => return Err(e),
            },
        };
        (t, q, df, p, method)
    };

    Ok(TestOutcome {
        statistic,
        q,
        df,
        p_value,
        method,
        weights: label,
        n: sample.n(),
        group_sizes: sample.counts().to_vec(),
        seed: cfg.seed,
        warning,
    })
}

fn write_output(out: Option<&Path>, content: &[u8]) -> Result<()> {
    match out {
        Some(path) => Ok(fs::write(path, content)?),
        None => {
            std::io::stdout().write_all(content)?;
            Ok(())
        }
    }
}

fn outcome_json(outcome: &TestOutcome) -> Result<String> {
    let mut text = serde_json::to_string_pretty(outcome)
        .map_err(|e| Error::Numeric(format!("serializing outcome failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Top-level command line.
#[derive(Debug, Parser)]
#[command(
    name = "multirank",
    version,
    about = "Distribution-free multivariate rank tests",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-sample rank test on CSV data.
    Test(TestCmd),
    /// K-sample rank test (asymptotic chi-square inference).
    Ksample(TestCmd),
    /// Monte Carlo null size of a configured test.
    Calibrate(CalibrateCmd),
    /// Monte Carlo power curve over local-alternative effects.
    Power(PowerCmd),
    /// Adaptive rank test vs likelihood-ratio baselines at matched power.
    Efficiency(EfficiencyCmd),
    /// Joint vs Bonferroni location-scale power curves (three CSV files).
    Figure(FigureCmd),
    /// Rank-assignment timing profile over a range of sample sizes.
    Bench(BenchCmd),
}

/// Flags shared by `test` and `ksample`.
#[derive(Debug, Args)]
pub struct TestCmd {
    /// Input CSV files: one file with --group-col, or one file per group.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Column holding group labels (single-file input style).
    #[arg(long)]
    pub group_col: Option<String>,
    /// Weight spec: a builtin name, model[:<family>], stack:<a>+<b>, or
    /// proj:<signal>/<nuisance>.
    #[arg(long, default_value = "mann_whitney")]
    pub weights: String,
    /// Model family used by bare `model` weight terms.
    #[arg(long, default_value = "gaussian_location")]
    pub family: String,
    /// Inference mode.
    #[arg(long, value_enum, default_value_t = ModeArg::Asymptotic)]
    pub mode: ModeArg,
    /// Permutation draws.
    #[arg(long = "B", default_value_t = 10_000)]
    pub b: usize,
    /// Exact-mode subset budget before falling back to permutation.
    #[arg(long, default_value_t = DEFAULT_SUBSET_BUDGET)]
    pub budget: u64,
    /// Tie-breaking and resampling seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl TestCmd {
    fn to_config(&self, k_sample: bool) -> Result<RunConfig> {
        Ok(RunConfig {
            inputs: self.inputs.clone(),
            group_col: self.group_col.clone(),
            weights: parse_weight_spec(&self.weights)?,
            family: Family::parse(&self.family)?,
            mode: self.mode.into(),
            draws: self.b,
            budget: self.budget,
            seed: self.seed,
            k_sample,
        })
    }
}

/// Flags shared by the simulation subcommands.
#[derive(Debug, Args)]
pub struct SimCmd {
    /// Data-generating marginal: gaussian | exponential | t3.
    #[arg(long, default_value = "gaussian")]
    pub marginal: String,
    /// Data dimension per observation.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Number of groups K.
    #[arg(long, default_value_t = 2)]
    pub groups: usize,
    /// Observations per group.
    #[arg(long, default_value_t = 100)]
    pub per_group: usize,
    /// Weight spec (same vocabulary as the test subcommand).
    #[arg(long, default_value = "mann_whitney")]
    pub weights: String,
    /// Model family for bare `model` weight terms and likelihood baselines.
    #[arg(long, default_value = "gaussian_location")]
    pub family: String,
    /// Monte Carlo replications.
    #[arg(long, visible_alias = "R", default_value_t = 1000)]
    pub replications: usize,
    /// Nominal size.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Base seed; replication r uses stream r + 1.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the CSV report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SimCmd {
    fn family(&self) -> Result<Family> {
        Family::parse(&self.family)
    }

    fn config(&self, mode: ModeArg) -> Result<SimConfig> {
        let marginal = Marginal::parse(&self.marginal)?;
        let weight = parse_weight_spec(&self.weights)?.to_sim_spec(self.family()?)?;
        let groups = vec![GroupSpec::null(self.per_group, self.dim); self.groups];
        Ok(SimConfig::new(
            marginal,
            groups,
            self.dim,
            weight,
            self.replications,
            self.alpha,
            self.seed,
        )?
        .with_method(mode.into()))
    }
}

#[derive(Debug, Args)]
pub struct CalibrateCmd {
    #[command(flatten)]
    pub sim: SimCmd,
    /// Inference mode used inside each replication.
    #[arg(long, value_enum, default_value_t = ModeArg::Asymptotic)]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct PowerCmd {
    #[command(flatten)]
    pub sim: SimCmd,
    /// Local-alternative effect sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, 2.0, 3.0, 4.0])]
    pub effects: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct EfficiencyCmd {
    #[command(flatten)]
    pub sim: SimCmd,
    /// Tune the effect so the efficient test has this analytic power.
    #[arg(long, default_value_t = 0.6)]
    pub target_power: f64,
    /// Explicit effect size (overrides --target-power).
    #[arg(long)]
    pub effect: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FigureCmd {
    /// Directory for the three curve files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Points in the alpha grid over [0.001, 0.2].
    #[arg(long, default_value_t = 400)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct BenchCmd {
    /// Data dimension.
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Sample sizes to time.
    #[arg(long, value_delimiter = ',', default_values_t = [65_536usize, 131_072, 262_144, 524_288, 1_048_576])]
    pub sizes: Vec<usize>,
    /// Write the timing CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run_test_cmd(cmd: &TestCmd, k_sample: bool) -> Result<()> {
    let cfg = cmd.to_config(k_sample)?;
    let outcome = run_test(&cfg)?;
    write_output(cmd.out.as_deref(), outcome_json(&outcome)?.as_bytes())
}

fn run_calibrate(cmd: &CalibrateCmd) -> Result<()> {
    let cfg = cmd.sim.config(cmd.mode)?;
    let rate = calibrate_null(&cfg)?;
    let se = mc_standard_error(rate, cfg.replications);
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "marginal",
            "dim",
            "groups",
            "per_group",
            "weights",
            "replications",
            "alpha",
            "rate",
            "se",
        ])
        .and_then(|()| {
            w.write_record([
                cfg.marginal.name().to_string(),
                cfg.dim.to_string(),
                cfg.groups.len().to_string(),
                cmd.sim.per_group.to_string(),
                cmd.sim.weights.clone(),
                cfg.replications.to_string(),
                cfg.alpha.to_string(),
                rate.to_string(),
                se.to_string(),
            ])
        })
        .map_err(|e| Error::Numeric(format!("csv write failed: {e}")))?;
        w.flush()?;
    }
    write_output(cmd.sim.out.as_deref(), &buf)
}

fn run_power(cmd: &PowerCmd) -> Result<()> {
    let cfg = cmd.sim.config(ModeArg::Asymptotic)?;
    let report = power_curve(&cfg, &cmd.effects)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    write_output(cmd.sim.out.as_deref(), &buf)
}

fn run_efficiency(cmd: &EfficiencyCmd) -> Result<()> {
    let family = cmd.sim.family()?;
    let mut cfg = cmd.sim.config(ModeArg::Asymptotic)?;
    if cmd.sim.weights == "mann_whitney" {
        // Default to the family's own adaptive weight unless the user chose
        // something explicitly; comparing the efficient weight against the
        // likelihood baselines is the point of this report.
        cfg.weight = SimWeightSpec::Adaptive(family);
    }
    let effect = match cmd.effect {
        Some(e) => e,
        None => effect_for_power(cmd.target_power, cfg.dim, cfg.groups.len(), cfg.alpha)?,
    };
    let report = efficiency_report(&cfg, family, effect)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    write_output(cmd.sim.out.as_deref(), &buf)
}

/// The location-scale noncentrality pairs plotted in the power-comparison
/// figure: (mu_tilde_sq, sigma_tilde_sq).
pub const FIGURE_PAIRS: [(f64, f64); 3] = [(0.5, 0.5), (0.5, 0.75), (0.75, 0.5)];

fn run_figure(cmd: &FigureCmd) -> Result<()> {
    if cmd.points < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 alpha grid points".into(),
        ));
    }
    fs::create_dir_all(&cmd.out)?;
    let (lo, hi) = (0.001, 0.2);
    let alphas: Vec<f64> = (0..cmd.points)
        .map(|i| lo + (hi - lo) * i as f64 / (cmd.points - 1) as f64)
        .collect();
    for (mu, sigma) in FIGURE_PAIRS {
        let curve = joint_vs_bonferroni(mu, sigma, &alphas)?;
        let name = format!("joint_vs_bonferroni_mu{mu}_sigma{sigma}.csv");
        let mut buf = Vec::new();
        curve.write_csv(&mut buf)?;
        fs::write(cmd.out.join(name), &buf)?;
    }
    Ok(())
}

fn run_bench(cmd: &BenchCmd) -> Result<()> {
    let rows = runtime_profile(&cmd.sizes, cmd.dim)?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for row in &rows {
            w.serialize(row)
                .map_err(|e| Error::Numeric(format!("csv write failed: {e}")))?;
        }
        w.flush()?;
    }
    write_output(cmd.out.as_deref(), &buf)
}

/// Dispatch a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Test(cmd) => run_test_cmd(cmd, false),
        Command::Ksample(cmd) => run_test_cmd(cmd, true),
        Command::Calibrate(cmd) => run_calibrate(cmd),
        Command::Power(cmd) => run_power(cmd),
        Command::Efficiency(cmd) => run_efficiency(cmd),
        Command::Figure(cmd) => run_figure(cmd),
        Command::Bench(cmd) => run_bench(cmd),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn write_csv(dir: &Path, name: &str, header: &str, rows: &[Vec<f64>]) -> PathBuf {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        writeln!(f, "{header}").unwrap();
        for r in rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", cells.join(",")).unwrap();
        }
        path
    }

    fn gaussian_rows(n: usize, p: usize, seed: u64, shift: f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                (0..p)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        z + shift
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn weight_spec_round_trips() {
        let cases = [
            "mann_whitney",
            "van_der_waerden",
            "siegel_tukey",
            "mood",
            "klotz",
            "model:gaussian_location",
            "model:logistic_location",
            "stack:mann_whitney+mood",
            "proj:mann_whitney/mood",
            "proj:model:gaussian_location/siegel_tukey",
        ];
        for spec in cases {
            let parsed = parse_weight_spec(spec).unwrap();
            assert_eq!(parsed.canonical(Family::GaussianLocation), spec, "{spec}");
        }
    }

    #[test]
    fn bare_model_takes_family_from_flag() {
        let parsed = parse_weight_spec("model").unwrap();
        assert_eq!(
            parsed.canonical(Family::LogisticLocation),
            "model:logistic_location"
        );
    }

    #[test]
    fn weight_spec_rejects_malformed_input() {
        for bad in [
            "wilcoxon",
            "stack:mann_whitney",
            "proj:mann_whitney",
            "model:poisson",
            "stack:mann_whitney+unknown",
            "",
        ] {
            assert!(parse_weight_spec(bad).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn sim_spec_rejects_model_inside_stack() {
        let parsed = parse_weight_spec("stack:model:gaussian_location+mood").unwrap();
        assert!(parsed.to_sim_spec(Family::GaussianLocation).is_err());
    }

    #[test]
    fn read_table_reports_line_of_bad_cell() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "x,y\n1.0,2.0\n3.0,oops\n").unwrap();
        let err = read_table(&path, None).unwrap_err();
        match err {
            Error::Parse { line, detail } => {
                assert_eq!(line, 3);
                assert!(detail.contains("'oops'"), "{detail}");
                assert!(detail.contains("column 'y'"), "{detail}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn read_table_rejects_non_finite_and_ragged_rows() {
        let dir = tempfile::tempdir().unwrap();
        let nan = dir.path().join("nan.csv");
        fs::write(&nan, "x\n1.0\nNaN\n").unwrap();
        assert!(matches!(
            read_table(&nan, None),
            Err(Error::Parse { line: 3, .. })
        ));
        let ragged = dir.path().join("ragged.csv");
        fs::write(&ragged, "x,y\n1.0,2.0\n3.0\n").unwrap();
        assert!(matches!(read_table(&ragged, None), Err(Error::Parse { .. })));
    }

    #[test]
    fn load_sample_enforces_one_input_style() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_csv(dir.path(), "a.csv", "x", &[vec![1.0], vec![2.0]]);
        let b = write_csv(dir.path(), "b.csv", "x", &[vec![3.0]]);
        let both = [a.clone(), b.clone()];
        assert!(load_sample(&both, Some("g")).is_err());
        assert!(load_sample(std::slice::from_ref(&a), None).is_err());
        let ok = load_sample(&both, None).unwrap();
        assert_eq!(ok.counts(), &[2, 1]);
    }

    #[test]
    fn load_sample_group_column_sorted_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        fs::write(
            &path,
            "g,x,y\ntreat,1.0,2.0\ncontrol,3.0,4.0\ntreat,5.0,6.0\n",
        )
        .unwrap();
        let sample = load_sample(&[path], Some("g")).unwrap();
        // "control" sorts before "treat", so it becomes group 0.
        assert_eq!(sample.counts(), &[1, 2]);
        assert_eq!(sample.groups(), &[1, 0, 1]);
        assert_eq!(sample.dim(), 2);
        assert_eq!(sample.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn load_sample_rejects_header_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_csv(dir.path(), "a.csv", "x,y", &[vec![1.0, 2.0]]);
        let b = write_csv(dir.path(), "b.csv", "x,z", &[vec![1.0, 2.0]]);
        let err = load_sample(&[a, b], None).unwrap_err();
        assert!(err.to_string().contains("share one header"), "{err}");
    }

    fn two_group_config(dir: &Path, n: usize, p: usize, weights: &str) -> RunConfig {
        let a = write_csv(
            dir,
            "g0.csv",
            &header(p),
            &gaussian_rows(n, p, 11, 0.0),
        );
        let b = write_csv(
            dir,
            "g1.csv",
            &header(p),
            &gaussian_rows(n, p, 12, 0.0),
        );
        RunConfig {
            inputs: vec![a, b],
            group_col: None,
            weights: parse_weight_spec(weights).unwrap(),
            family: Family::GaussianLocation,
            mode: Method::Asymptotic,
            draws: 200,
            budget: DEFAULT_SUBSET_BUDGET,
            seed: 5,
            k_sample: false,
        }
    }

    fn header(p: usize) -> String {
        (0..p)
            .map(|j| format!("x{j}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    #[test]
    fn run_test_two_files_df_is_p() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = two_group_config(dir.path(), 40, 3, "van_der_waerden");
        let out = run_test(&cfg).unwrap();
        assert_eq!(out.df, 3);
        assert_eq!(out.statistic.len(), 3);
        assert_eq!(out.n, 80);
        assert_eq!(out.group_sizes, vec![40, 40]);
        assert_eq!(out.weights, "van_der_waerden");
        assert_eq!(out.method, Method::Asymptotic);
        assert!(out.p_value > 0.0 && out.p_value <= 1.0);
        assert!(out.warning.is_none());
    }

    #[test]
    fn run_test_json_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = two_group_config(dir.path(), 30, 2, "stack:mann_whitney+mood");
        let first = outcome_json(&run_test(&cfg).unwrap()).unwrap();
        let second = outcome_json(&run_test(&cfg).unwrap()).unwrap();
        assert_eq!(first, second);
        let parsed: TestOutcome = serde_json::from_str(&first).unwrap();
        assert_eq!(parsed.q, run_test(&cfg).unwrap().q);
        // Field order of the serialized object is part of the contract.
        let q_pos = first.find("\"Q\"").unwrap();
        assert!(first.find("\"statistic\"").unwrap() < q_pos);
        assert!(q_pos < first.find("\"df\"").unwrap());
        assert!(first.find("\"df\"").unwrap() < first.find("\"p_value\"").unwrap());
    }

    #[test]
    fn run_test_model_weight_fits_from_data() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = two_group_config(dir.path(), 25, 2, "model");
        cfg.family = Family::LogisticLocation;
        let out = run_test(&cfg).unwrap();
        assert_eq!(out.weights, "model:logistic_location");
        assert_eq!(out.df, 2);
    }

    #[test]
    fn run_test_exact_mode_small_sample() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = two_group_config(dir.path(), 5, 1, "mann_whitney");
        cfg.mode = Method::Exact;
        let out = run_test(&cfg).unwrap();
        assert_eq!(out.method, Method::Exact);
        assert!(out.warning.is_none());
        // C(10,5) = 252 equally likely subsets: p is a multiple of 1/252.
        let steps = out.p_value * 252.0;
        assert!((steps - steps.round()).abs() < 1e-9, "p = {}", out.p_value);
    }

    #[test]
    fn run_test_exact_over_budget_falls_back_to_permutation() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = two_group_config(dir.path(), 15, 1, "mann_whitney");
        cfg.mode = Method::Exact;
        cfg.budget = 100; // C(30,15) = 155117520 >> 100
        cfg.draws = 400;
        let out = run_test(&cfg).unwrap();
        assert_eq!(out.method, Method::Permutation);
        let warning = out.warning.expect("fallback warning");
        assert!(warning.contains("155117520"), "{warning}");
        assert!(warning.contains("B = 400"), "{warning}");
        // Permutation p-values live on the (1 + hits)/(B + 1) lattice.
        let steps = out.p_value * 401.0;
        assert!((steps - steps.round()).abs() < 1e-9);
    }

    #[test]
    fn run_test_requires_two_groups_without_ksample() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("three.csv");
        let mut text = String::from("g,x\n");
        for (i, row) in gaussian_rows(9, 1, 3, 0.0).iter().enumerate() {
            text.push_str(&format!("g{},{}\n", i % 3, row[0]));
        }
        fs::write(&path, text).unwrap();
        let cfg = RunConfig {
            inputs: vec![path],
            group_col: Some("g".into()),
            weights: parse_weight_spec("mann_whitney").unwrap(),
            family: Family::GaussianLocation,
            mode: Method::Asymptotic,
            draws: 100,
            budget: DEFAULT_SUBSET_BUDGET,
            seed: 1,
            k_sample: false,
        };
        let err = run_test(&cfg).unwrap_err();
        assert!(err.to_string().contains("ksample"), "{err}");
        let cfg = RunConfig {
            k_sample: true,
            ..cfg
        };
        let out = run_test(&cfg).unwrap();
        // K = 3 groups in dimension 1: df = (K - 1) p = 2.
        assert_eq!(out.df, 2);
        assert_eq!(out.group_sizes, vec![3, 3, 3]);
    }

    #[test]
    fn ksample_rejects_exact_and_permutation() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = two_group_config(dir.path(), 10, 1, "mann_whitney");
        cfg.k_sample = true;
        cfg.mode = Method::Exact;
        assert!(run_test(&cfg).is_err());
        cfg.mode = Method::Permutation;
        assert!(run_test(&cfg).is_err());
        cfg.mode = Method::Asymptotic;
        assert!(run_test(&cfg).is_ok());
    }

    #[test]
    fn figure_writes_three_curve_files() {
        let dir = tempfile::tempdir().unwrap();
        let cmd = FigureCmd {
            out: dir.path().join("fig"),
            points: 10,
        };
        run_figure(&cmd).unwrap();
        let mut names: Vec<String> = fs::read_dir(dir.path().join("fig"))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(
            names,
            vec![
                "joint_vs_bonferroni_mu0.5_sigma0.5.csv",
                "joint_vs_bonferroni_mu0.5_sigma0.75.csv",
                "joint_vs_bonferroni_mu0.75_sigma0.5.csv",
            ]
        );
        let text =
            fs::read_to_string(dir.path().join("fig/joint_vs_bonferroni_mu0.5_sigma0.5.csv"))
                .unwrap();
        assert!(text.starts_with("alpha,joint_power,bonferroni_power"));
        assert_eq!(text.lines().count(), 11);
    }

    #[test]
    fn bench_writes_one_row_per_size() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("bench.csv");
        let cmd = BenchCmd {
            dim: 2,
            sizes: vec![64, 128],
            out: Some(out.clone()),
        };
        run_bench(&cmd).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,seconds");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("64,"));
        assert!(lines[2].starts_with("128,"));
    }

    #[test]
    fn calibrate_single_replication_yields_single_row() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("size.csv");
        let cmd = CalibrateCmd {
            sim: SimCmd {
                marginal: "gaussian".into(),
                dim: 1,
                groups: 2,
                per_group: 10,
                weights: "mann_whitney".into(),
                family: "gaussian_location".into(),
                replications: 1,
                alpha: 0.05,
                seed: 4,
                out: Some(out.clone()),
            },
            mode: ModeArg::Asymptotic,
        };
        run_calibrate(&cmd).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("marginal,dim,groups"));
        assert!(lines[1].starts_with("gaussian,1,2,10,mann_whitney,1,0.05,"));
    }

    #[test]
    fn cli_parses_spec_flag_names() {
        let cli = Cli::try_parse_from([
            "multirank",
            "test",
            "--weights",
            "van_der_waerden",
            "--mode",
            "permutation",
            "--B",
            "500",
            "--seed",
            "9",
            "--out",
            "result.json",
            "a.csv",
            "b.csv",
        ])
        .unwrap();
        match cli.command {
            Command::Test(cmd) => {
                assert_eq!(cmd.b, 500);
                assert_eq!(cmd.seed, 9);
                assert_eq!(cmd.weights, "van_der_waerden");
                assert_eq!(cmd.mode, ModeArg::Permutation);
                assert_eq!(cmd.inputs.len(), 2);
            }
            other => panic!("parsed into {other:?}"),
        }
        let cli = Cli::try_parse_from([
            "multirank",
            "calibrate",
            "--alpha",
            "0.1",
            "--group... no",
        ]);
        assert!(cli.is_err());
        let cli = Cli::try_parse_from([
            "multirank",
            "ksample",
            "--group-col",
            "arm",
            "--family",
            "logistic_location",
            "data.csv",
        ])
        .unwrap();
        match cli.command {
            Command::Ksample(cmd) => {
                assert_eq!(cmd.group_col.as_deref(), Some("arm"));
                assert_eq!(cmd.family, "logistic_location");
            }
            other => panic!("parsed into {other:?}"),
        }
    }
}
