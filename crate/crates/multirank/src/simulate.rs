//! Monte Carlo harness: size calibration, power curves against analytic
//! noncentral chi-square predictions, efficiency comparisons against
//! likelihood-ratio baselines, nuisance-projection robustness, consistency
//! in N, joint location-scale power formulas, and quadrature for scale-test
//! noncentrality coefficients.
//!
//! Every routine is reproducible bit for bit from (config, seed): each
//! replication draws from an RNG stream indexed by the replication number,
//! so aggregation is independent of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal, StudentT};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::exact::{exact_null_distribution, subset_two_sample_t, DistributionTable, DEFAULT_SUBSET_BUDGET};
use crate::models::{adaptive_weight, glr_df, glr_statistic, Family, GlrVariant, ModelParams};
use crate::rank_map::{assign_ranks, build_grid, RankGrid, SampleSet};
use crate::teststat::{
    asymptotic_pvalue, k_sample_t, null_covariance, quadratic_stat, two_sample_t, Method,
    QuadraticForm,
};
use crate::weights::{
    builtin, center_on_grid, gaussian_cdf, gaussian_quantile, project_nuisance, stack,
    CenteredWeights, WeightFn,
};

/// Data-generating marginal, applied independently per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marginal {
    Gaussian,
    /// Unit-rate exponential, centered at its mean.
    Exponential,
    /// Student t with 3 degrees of freedom (heavy-tailed, finite variance).
    StudentT3,
}

impl Marginal {
    pub fn parse(name: &str) -> Result<Marginal> {
        match name {
            "gaussian" | "normal" => Ok(Marginal::Gaussian),
            "exponential" => Ok(Marginal::Exponential),
            "t3" | "student_t3" => Ok(Marginal::StudentT3),
            other => Err(Error::InvalidArgument(format!(
                "unknown marginal '{other}' (expected gaussian | exponential | t3)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Marginal::Gaussian => "gaussian",
            Marginal::Exponential => "exponential",
            Marginal::StudentT3 => "t3",
        }
    }

    fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Marginal::Gaussian => rng.sample(StandardNormal),
            Marginal::Exponential => {
                let e: f64 = rng.sample(Exp1);
                e - 1.0
            }
            Marginal::StudentT3 => rng.sample(StudentT::new(3.0).expect("valid df")),
        }
    }
}

/// One group's size and its affine distortion of the base marginal:
/// observation = scale * draw + shift, per axis.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    pub size: usize,
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl GroupSpec {
    /// Null group: no shift, unit scale.
    pub fn null(size: usize, p: usize) -> GroupSpec {
        GroupSpec {
            size,
            shift: vec![0.0; p],
            scale: vec![1.0; p],
        }
    }

    pub fn shifted(size: usize, shift: Vec<f64>) -> GroupSpec {
        let p = shift.len();
        GroupSpec {
            size,
            shift,
            scale: vec![1.0; p],
        }
    }

    pub fn scaled(size: usize, scale: Vec<f64>) -> GroupSpec {
        let p = scale.len();
        GroupSpec {
            size,
            shift: vec![0.0; p],
            scale,
        }
    }
}

/// Weight used by the simulated rank test.
#[derive(Debug, Clone)]
pub enum WeightSpec {
    /// A named builtin, applied componentwise.
    Builtin(String),
    /// Several builtins stacked into one higher-dimensional weight.
    Stacked(Vec<String>),
    /// Model-adaptive effective score. For the built-in families this
    /// weight does not depend on the fitted parameters (verified in the
    /// model tests), so simulations evaluate it at reference parameters
    /// instead of refitting every replication.
    Adaptive(Family),
    /// Signal weight Gram-projected against a nuisance weight.
    Projected { signal: String, nuisance: String },
}

/// Full description of one simulation: generator, groups, weight, mode.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub marginal: Marginal,
    pub groups: Vec<GroupSpec>,
    pub dim: usize,
    pub weight: WeightSpec,
    pub method: Method,
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(
        marginal: Marginal,
        groups: Vec<GroupSpec>,
        dim: usize,
        weight: WeightSpec,
        replications: usize,
        alpha: f64,
        seed: u64,
    ) -> Result<SimConfig> {
        let cfg = SimConfig {
            marginal,
            groups,
            dim,
            weight,
            method: Method::Asymptotic,
            replications,
            alpha,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_method(mut self, method: Method) -> SimConfig {
        self.method = method;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::InvalidArgument("need at least 1 replication".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "nominal size must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if self.dim < 1 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if self.groups.len() < 2 {
            return Err(Error::InvalidArgument("need at least 2 groups".into()));
        }
        for (i, g) in self.groups.iter().enumerate() {
            if g.size < 1 {
                return Err(Error::InvalidArgument(format!("group {i} is empty")));
            }
            if g.shift.len() != self.dim || g.scale.len() != self.dim {
                return Err(Error::InvalidArgument(format!(
                    "group {i} shift/scale must have dimension {}",
                    self.dim
                )));
            }
            if g.scale.iter().any(|&s| s.is_nan() || s <= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "group {i} scale must be positive"
                )));
            }
        }
        Ok(())
    }

    fn n_total(&self) -> usize {
        self.groups.iter().map(|g| g.size).sum()
    }

    fn labels(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.n_total());
        for (g, spec) in self.groups.iter().enumerate() {
            v.extend(std::iter::repeat_n(g, spec.size));
        }
        v
    }
}

/// Reference parameters at which the adaptive weight is evaluated; the
/// built-in families' effective scores are parameter-free, so the choice
/// does not matter.
fn reference_params(family: Family, p: usize) -> Result<ModelParams> {
    let theta = match family {
        Family::GaussianLocation | Family::LogisticLocation => vec![0.0; p],
        Family::GaussianLocationScale => {
            let mut t = vec![0.0; p];
            t.extend(std::iter::repeat_n(1.0, p));
            t
        }
    };
    ModelParams::new(family, p, theta)
}

fn weight_fn(spec: &WeightSpec, p: usize) -> Result<WeightFn> {
    match spec {
        WeightSpec::Builtin(name) => builtin(name, p),
        WeightSpec::Stacked(names) => {
            let ws: Vec<WeightFn> = names
                .iter()
                .map(|n| builtin(n, p))
                .collect::<Result<_>>()?;
            stack(&ws)
        }
        WeightSpec::Adaptive(family) => adaptive_weight(*family, &reference_params(*family, p)?),
        WeightSpec::Projected { signal, .. } => builtin(signal, p),
    }
}

fn centered_weights(spec: &WeightSpec, p: usize, grid: &RankGrid) -> Result<CenteredWeights> {
    match spec {
        WeightSpec::Projected { signal, nuisance } => {
            let s = center_on_grid(&builtin(signal, p)?, grid)?;
            let nu = center_on_grid(&builtin(nuisance, p)?, grid)?;
            project_nuisance(&s, &nu)
        }
        other => center_on_grid(&weight_fn(other, p)?, grid),
    }
}

/// Everything that is identical across replications of one config: the
/// grid, the centered weight table, and (two-sample) the prepared
/// quadratic form, plus the enumerated null table in exact mode.
struct Prepared {
    grid: RankGrid,
    cw: CenteredWeights,
    two_sample: Option<QuadraticForm>,
    exact_table: Option<DistributionTable>,
}

fn prepare(cfg: &SimConfig) -> Result<Prepared> {
    cfg.validate()?;
    let n = cfg.n_total();
    let grid = build_grid(n, cfg.dim)?;
    let cw = centered_weights(&cfg.weight, cfg.dim, &grid)?;
    let k_groups = cfg.groups.len();
    let two_sample = if k_groups == 2 {
        let sigma = null_covariance(&cw, cfg.groups[0].size, cfg.groups[1].size)?;
        Some(QuadraticForm::new(&sigma)?)
    } else {
        None
    };
    let exact_table = match cfg.method {
        Method::Asymptotic => None,
        Method::Exact => {
            let form = two_sample.as_ref().ok_or_else(|| {
                Error::InvalidArgument("exact mode needs exactly two groups".into())
            })?;
            let table = exact_null_distribution(
                |sub| form.apply(&subset_two_sample_t(&cw, sub)),
                n,
                cfg.groups[1].size,
                DEFAULT_SUBSET_BUDGET,
            )?;
            Some(table)
        }
        Method::Permutation => {
            return Err(Error::InvalidArgument(
                "permutation mode is per-dataset; simulations use asymptotic or exact".into(),
            ))
        }
    };
    Ok(Prepared {
        grid,
        cw,
        two_sample,
        exact_table,
    })
}

/// Draw the pooled sample for one replication.
fn draw_sample(cfg: &SimConfig, labels: &[usize], rng: &mut ChaCha8Rng) -> Result<SampleSet> {
    let mut rows = Vec::with_capacity(labels.len());
    for &g in labels {
        let spec = &cfg.groups[g];
        let row: Vec<f64> = (0..cfg.dim)
            .map(|j| spec.scale[j] * cfg.marginal.draw(rng) + spec.shift[j])
            .collect();
        rows.push(row);
    }
    SampleSet::new(&rows, labels.to_vec())
}

/// P-value of the rank test for one replication.
fn replication_pvalue(cfg: &SimConfig, prep: &Prepared, labels: &[usize], rep: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep + 1);
    let tie_seed: u64 = rng.random();
    let sample = draw_sample(cfg, labels, &mut rng)?;
    let assign = assign_ranks(&sample, &prep.grid, tie_seed)?;
    match (&prep.two_sample, &prep.exact_table) {
        (Some(form), None) => {
            let t = two_sample_t(&assign, &prep.cw, labels)?;
            asymptotic_pvalue(form.apply(&t), form.df())
        }
        (Some(form), Some(table)) => {
            let t = two_sample_t(&assign, &prep.cw, labels)?;
            Ok(table.p_value_geq(form.apply(&t)))
        }
        _ => {
            let (t, sigma) = k_sample_t(&assign, &prep.cw, labels)?;
            let (q, df) = quadratic_stat(&t, &sigma)?;
            asymptotic_pvalue(q, df)
        }
    }
}

fn rejection_rate(cfg: &SimConfig, prep: &Prepared) -> Result<f64> {
    let labels = cfg.labels();
    let hits = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|rep| replication_pvalue(cfg, prep, &labels, rep).map(|p| u64::from(p <= cfg.alpha)))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(hits as f64 / cfg.replications as f64)
}

/// Binomial Monte Carlo standard error of a rate.
pub fn mc_standard_error(rate: f64, replications: usize) -> f64 {
    (rate * (1.0 - rate) / replications as f64).sqrt()
}

/// Empirical size of the test under the null.
///
/// All groups must draw from the same distribution; the fraction of
/// replications with p-value <= alpha is returned.
pub fn calibrate_null(cfg: &SimConfig) -> Result<f64> {
    let first = &cfg.groups[0];
    for (i, g) in cfg.groups.iter().enumerate().skip(1) {
        if g.shift != first.shift || g.scale != first.scale {
            return Err(Error::InvalidArgument(format!(
                "null calibration needs identical groups, group {i} differs"
            )));
        }
    }
    let prep = prepare(cfg)?;
    rejection_rate(cfg, &prep)
}

/// One point of a power curve.
#[derive(Debug, Clone)]
pub struct PowerPoint {
    pub effect: f64,
    pub rate: f64,
    pub se: f64,
    pub analytic: f64,
}

/// Rejection rates over a grid of local-alternative effect sizes, with the
/// analytic noncentral chi-square prediction for the efficient weight.
#[derive(Debug, Clone)]
pub struct PowerReport {
    pub points: Vec<PowerPoint>,
    pub df: usize,
    pub replications: usize,
}

impl PowerReport {
    /// CSV rows `effect,rate,se,analytic`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["effect", "rate", "se", "analytic"])
            .map_err(|e| Error::Numeric(format!("csv write failed: {e}")))?;
        for pt in &self.points {
            w.write_record([
                format!("{}", pt.effect),
                format!("{}", pt.rate),
                format!("{}", pt.se),
                format!("{}", pt.analytic),
            ])
            .map_err(|e| Error::Numeric(format!("csv write failed: {e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Apply a local location alternative: the last group is shifted by
/// effect/sqrt(N) along the equal-components unit direction.
fn with_local_shift(cfg: &SimConfig, effect: f64) -> SimConfig {
    let mut out = cfg.clone();
    let n = cfg.n_total() as f64;
    let p = cfg.dim as f64;
    let per_axis = effect / n.sqrt() / p.sqrt();
    let last = out.groups.last_mut().expect("validated");
    for s in last.shift.iter_mut() {
        *s += per_axis;
    }
    out
}

/// Noncentrality of the efficient (identity-Gram) rank statistic when the
/// last of K equal groups is shifted by theta/sqrt(N) with |theta| = effect:
/// lambda = effect^2 (K-1)/K^2.
pub fn local_shift_noncentrality(effect: f64, k_groups: usize) -> f64 {
    let k = k_groups as f64;
    effect * effect * (k - 1.0) / (k * k)
}

/// Survival function of the noncentral chi-square law, via the Poisson
/// mixture of central laws; absolute truncation error below 1e-12.
pub fn noncentral_chisq_sf(x: f64, df: usize, lambda: f64) -> Result<f64> {
    if df < 1 {
        return Err(Error::InvalidArgument("df must be >= 1".into()));
    }
    if x.is_nan() || x < 0.0 || lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidArgument(
            "noncentral chi-square needs x >= 0 and lambda >= 0".into(),
        ));
    }
    let half = lambda / 2.0;
    let mut log_weight = -half;
    let mut cdf = 0.0;
    let mut cumulative = 0.0;
    for j in 0..10_000 {
        let weight = log_weight.exp();
        if weight > 0.0 {
            let shape = df as f64 / 2.0 + j as f64;
            cdf += weight * gamma_lr(shape, x / 2.0);
            cumulative += weight;
        }
        if cumulative > 1.0 - 1e-12 && j as f64 > half {
            break;
        }
        log_weight += half.ln() - ((j + 1) as f64).ln();
        if half == 0.0 {
            break;
        }
    }
    Ok((1.0 - cdf).clamp(0.0, 1.0))
}

/// Upper quantile of the central chi-square law.
pub fn chi_square_quantile(prob: f64, df: usize) -> Result<f64> {
    if df < 1 || !(0.0..1.0).contains(&prob) {
        return Err(Error::InvalidArgument(format!(
            "chi-square quantile needs df >= 1 and prob in [0,1), got df={df}, prob={prob}"
        )));
    }
    let dist = ChiSquared::new(df as f64)
        .map_err(|e| Error::Numeric(format!("chi-square setup failed: {e}")))?;
    Ok(dist.inverse_cdf(prob))
}

/// Analytic power of the efficient rank test (or the known-variance GLR,
/// which shares its noncentral limit) at a local shift of the last group.
pub fn analytic_local_power(
    effect: f64,
    dim: usize,
    k_groups: usize,
    alpha: f64,
) -> Result<f64> {
    let df = (k_groups - 1) * dim;
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let q = chi_square_quantile(1.0 - alpha, df)?;
    noncentral_chisq_sf(q, df, local_shift_noncentrality(effect, k_groups))
}

/// Effect size at which the analytic local power equals `target`.
pub fn effect_for_power(target: f64, dim: usize, k_groups: usize, alpha: f64) -> Result<f64> {
    if !(alpha..1.0).contains(&target) || alpha <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "target power must lie in [alpha, 1), got {target} at alpha {alpha}"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while analytic_local_power(hi, dim, k_groups, alpha)? < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numeric("power target unreachable".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if analytic_local_power(mid, dim, k_groups, alpha)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Monte Carlo power across a grid of local effect sizes.
///
/// Each effect shifts the last group by effect/sqrt(N) along the
/// equal-components direction; the analytic column is the noncentral
/// chi-square prediction for the efficient weight.
pub fn power_curve(cfg: &SimConfig, effects: &[f64]) -> Result<PowerReport> {
    if effects.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidArgument("effect grid must be finite".into()));
    }
    let k_groups = cfg.groups.len();
    let mut points = Vec::with_capacity(effects.len());
    for &effect in effects {
        let shifted = with_local_shift(cfg, effect);
        let prep = prepare(&shifted)?;
        let rate = rejection_rate(&shifted, &prep)?;
        points.push(PowerPoint {
            effect,
            rate,
            se: mc_standard_error(rate, cfg.replications),
            analytic: analytic_local_power(effect, cfg.dim, k_groups, cfg.alpha)?,
        });
    }
    Ok(PowerReport {
        points,
        df: (k_groups - 1) * cfg.dim,
        replications: cfg.replications,
    })
}

/// Power of one method with its Monte Carlo standard error.
#[derive(Debug, Clone)]
pub struct MethodPower {
    pub method: String,
    pub power: f64,
    pub se: f64,
}

/// Side-by-side power of the adaptive rank test, the family's likelihood
/// ratio, and the known-identity mean-difference test at one local
/// alternative.
#[derive(Debug, Clone)]
pub struct EfficiencyReport {
    pub effect: f64,
    pub analytic_power: f64,
    pub methods: Vec<MethodPower>,
    pub replications: usize,
}

impl EfficiencyReport {
    pub fn power_of(&self, method: &str) -> Option<f64> {
        self.methods
            .iter()
            .find(|m| m.method == method)
            .map(|m| m.power)
    }

    /// CSV rows `method,power,se`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "power", "se"])
            .map_err(|e| Error::Numeric(format!("csv write failed: {e}")))?;
        for m in &self.methods {
            w.write_record([m.method.clone(), format!("{}", m.power), format!("{}", m.se)])
                .map_err(|e| Error::Numeric(format!("csv write failed: {e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Compare the adaptive rank test with likelihood-ratio baselines at a
/// local shift of the last group.
///
/// Baselines: the family's generalized likelihood ratio with a Wilks
/// chi-square threshold (for the Gaussian location family, the
/// estimated-diagonal-variance variant), and the known-identity
/// mean-difference chi-square test. The rank test refits nothing: its
/// weight comes from `cfg.weight`.
pub fn efficiency_report(cfg: &SimConfig, family: Family, effect: f64) -> Result<EfficiencyReport> {
    let shifted = with_local_shift(cfg, effect);
    let prep = prepare(&shifted)?;
    let labels = shifted.labels();
    let k_groups = shifted.groups.len();
    let df = glr_df(family, shifted.dim, k_groups);
    let threshold = chi_square_quantile(1.0 - shifted.alpha, df)?;
    let glr_variant = if family == Family::GaussianLocation {
        GlrVariant::UnknownDiagonal
    } else {
        GlrVariant::KnownIdentity
    };

    let sums = (0..shifted.replications as u64)
        .into_par_iter()
        .map(|rep| -> Result<[u64; 3]> {
            let mut rng = ChaCha8Rng::seed_from_u64(shifted.seed);
            rng.set_stream(rep + 1);
            let tie_seed: u64 = rng.random();
            let sample = draw_sample(&shifted, &labels, &mut rng)?;

            let assign = assign_ranks(&sample, &prep.grid, tie_seed)?;
            let rank_reject = match &prep.two_sample {
                Some(form) => {
                    let t = two_sample_t(&assign, &prep.cw, &labels)?;
                    asymptotic_pvalue(form.apply(&t), form.df())? <= shifted.alpha
                }
                None => {
                    let (t, sigma) = k_sample_t(&assign, &prep.cw, &labels)?;
                    let (q, qdf) = quadratic_stat(&t, &sigma)?;
                    asymptotic_pvalue(q, qdf)? <= shifted.alpha
                }
            };
            let glr = glr_statistic(family, &sample, glr_variant)?;
            let mean_diff =
                glr_statistic(Family::GaussianLocation, &sample, GlrVariant::KnownIdentity)?;
            Ok([
                u64::from(rank_reject),
                u64::from(glr > threshold),
                u64::from(mean_diff > threshold),
            ])
        })
        .try_reduce(
            || [0u64; 3],
            |a, b| Ok([a[0] + b[0], a[1] + b[1], a[2] + b[2]]),
        )?;

    let r = shifted.replications;
    let rate = |hits: u64| hits as f64 / r as f64;
    let methods = vec![
        MethodPower {
            method: "adaptive_rank".into(),
            power: rate(sums[0]),
            se: mc_standard_error(rate(sums[0]), r),
        },
        MethodPower {
            method: "glr".into(),
            power: rate(sums[1]),
            se: mc_standard_error(rate(sums[1]), r),
        },
        MethodPower {
            method: "mean_difference".into(),
            power: rate(sums[2]),
            se: mc_standard_error(rate(sums[2]), r),
        },
    ];
    Ok(EfficiencyReport {
        effect,
        analytic_power: analytic_local_power(effect, cfg.dim, k_groups, cfg.alpha)?,
        methods,
        replications: r,
    })
}

/// Rejection rates of a nuisance-projected test under nuisance-only,
/// signal-only, and null configurations.
#[derive(Debug, Clone)]
pub struct NuisanceReport {
    /// Projected weight, scale-only local alternative: should sit at the
    /// nominal size.
    pub scale_alternative_size: f64,
    /// Projected weight, location-only local alternative.
    pub location_alternative_power: f64,
    /// Unprojected signal-only weight under the same location alternative.
    pub pure_location_power: f64,
    /// Projected weight under the null.
    pub null_size: f64,
    pub replications: usize,
}

/// Robustness of a location-signal / scale-nuisance projected test.
///
/// `cfg.weight` must be `Projected`; the scale alternative multiplies the
/// last group's scales by 1 + scale_effect/sqrt(N) and the location
/// alternative shifts it by loc_effect/sqrt(N), both along every axis
/// equally.
pub fn nuisance_robustness(
    cfg: &SimConfig,
    loc_effect: f64,
    scale_effect: f64,
) -> Result<NuisanceReport> {
    let WeightSpec::Projected { signal, .. } = &cfg.weight else {
        return Err(Error::InvalidArgument(
            "nuisance_robustness needs a projected weight spec".into(),
        ));
    };
    let n = cfg.n_total() as f64;

    let mut scale_cfg = cfg.clone();
    {
        let last = scale_cfg.groups.last_mut().expect("validated");
        let factor = 1.0 + scale_effect / n.sqrt();
        if factor <= 0.0 {
            return Err(Error::InvalidArgument("scale effect too negative".into()));
        }
        for s in last.scale.iter_mut() {
            *s *= factor;
        }
    }
    let loc_cfg = with_local_shift(cfg, loc_effect);
    let mut pure_cfg = loc_cfg.clone();
    pure_cfg.weight = WeightSpec::Builtin(signal.clone());

    let run = |c: &SimConfig| -> Result<f64> {
        let prep = prepare(c)?;
        rejection_rate(c, &prep)
    };
    Ok(NuisanceReport {
        scale_alternative_size: run(&scale_cfg)?,
        location_alternative_power: run(&loc_cfg)?,
        pure_location_power: run(&pure_cfg)?,
        null_size: run(cfg)?,
        replications: cfg.replications,
    })
}

/// Power against a fixed (non-local) alternative as the sample grows.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub rows: Vec<PowerPoint>,
}

/// Rejection rate at each total sample size for the fixed two-group
/// alternative described by `cfg.groups` (sizes in the config are ignored;
/// each total is split evenly).
pub fn consistency_check(cfg: &SimConfig, totals: &[usize]) -> Result<ConsistencyReport> {
    if cfg.groups.len() != 2 {
        return Err(Error::InvalidArgument(
            "consistency check is two-sample".into(),
        ));
    }
    let mut rows = Vec::with_capacity(totals.len());
    for &total in totals {
        if total < 4 || total % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "total sample size must be even and >= 4, got {total}"
            )));
        }
        let mut c = cfg.clone();
        c.groups[0].size = total / 2;
        c.groups[1].size = total / 2;
        let prep = prepare(&c)?;
        let rate = rejection_rate(&c, &prep)?;
        rows.push(PowerPoint {
            effect: total as f64,
            rate,
            se: mc_standard_error(rate, cfg.replications),
            analytic: f64::NAN,
        });
    }
    Ok(ConsistencyReport { rows })
}

/// Closed-form power curves for simultaneous location-scale testing.
#[derive(Debug, Clone)]
pub struct JointCurve {
    pub mu_tilde_sq: f64,
    pub sigma_tilde_sq: f64,
    pub rows: Vec<(f64, f64, f64)>,
}

impl JointCurve {
    /// CSV rows `alpha,joint_power,bonferroni_power`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "joint_power", "bonferroni_power"])
            .map_err(|e| Error::Numeric(format!("csv write failed: {e}")))?;
        for &(a, j, b) in &self.rows {
            w.write_record([format!("{a}"), format!("{j}"), format!("{b}")])
                .map_err(|e| Error::Numeric(format!("csv write failed: {e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Large-p power of the joint location-scale test:
/// 1 - Phi(z_{1-alpha} - mu_tilde_sq - 2 sigma_tilde_sq).
pub fn joint_power(mu_tilde_sq: f64, sigma_tilde_sq: f64, alpha: f64) -> Result<f64> {
    if mu_tilde_sq < 0.0 || sigma_tilde_sq < 0.0 {
        return Err(Error::InvalidArgument(
            "noncentrality inputs must be >= 0".into(),
        ));
    }
    let z = gaussian_quantile(1.0 - alpha)?;
    Ok(1.0 - gaussian_cdf(z - mu_tilde_sq - 2.0 * sigma_tilde_sq))
}

/// Large-p power of the Bonferroni split into separate location and scale
/// tests at level alpha/2 each:
/// 1 - Phi(z_{1-alpha/2} - sqrt2 mu_tilde_sq) Phi(z_{1-alpha/2} - 2 sqrt2 sigma_tilde_sq).
pub fn bonferroni_power(mu_tilde_sq: f64, sigma_tilde_sq: f64, alpha: f64) -> Result<f64> {
    if mu_tilde_sq < 0.0 || sigma_tilde_sq < 0.0 {
        return Err(Error::InvalidArgument(
            "noncentrality inputs must be >= 0".into(),
        ));
    }
    let z = gaussian_quantile(1.0 - alpha / 2.0)?;
    let sqrt2 = std::f64::consts::SQRT_2;
    Ok(1.0
        - gaussian_cdf(z - sqrt2 * mu_tilde_sq)
            * gaussian_cdf(z - 2.0 * sqrt2 * sigma_tilde_sq))
}

/// Evaluate both closed forms over a grid of alpha values.
pub fn joint_vs_bonferroni(
    mu_tilde_sq: f64,
    sigma_tilde_sq: f64,
    alphas: &[f64],
) -> Result<JointCurve> {
    let mut rows = Vec::with_capacity(alphas.len());
    for &a in alphas {
        if !(0.0..1.0).contains(&a) || a == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "alpha grid entries must lie in (0,1), got {a}"
            )));
        }
        rows.push((
            a,
            joint_power(mu_tilde_sq, sigma_tilde_sq, a)?,
            bonferroni_power(mu_tilde_sq, sigma_tilde_sq, a)?,
        ));
    }
    Ok(JointCurve {
        mu_tilde_sq,
        sigma_tilde_sq,
        rows,
    })
}

/// Monte Carlo check of the joint and Bonferroni formulas at finite p.
#[derive(Debug, Clone)]
pub struct JointMcCheck {
    pub joint_rate: f64,
    pub bonferroni_rate: f64,
    pub joint_formula: f64,
    pub bonferroni_formula: f64,
    pub se: f64,
}

/// Draw the limiting Gaussian experiment of the stacked location/scale
/// statistic in dimension 2p and compare rejection rates with the closed
/// forms.
///
/// The noncentral means are calibrated so that the chi-square mean shifts
/// in standard-deviation units equal mu_tilde_sq and 2 sigma_tilde_sq:
/// |shift_loc|^2 = 2 sqrt(p) mu_tilde_sq, |shift_scale|^2 = 4 sqrt(p) sigma_tilde_sq.
pub fn joint_mc_check(
    mu_tilde_sq: f64,
    sigma_tilde_sq: f64,
    p: usize,
    alpha: f64,
    replications: usize,
    seed: u64,
) -> Result<JointMcCheck> {
    if p < 1 || replications < 1 {
        return Err(Error::InvalidArgument(
            "need p >= 1 and replications >= 1".into(),
        ));
    }
    let sqrt_p = (p as f64).sqrt();
    let shift_loc = (2.0 * sqrt_p * mu_tilde_sq).sqrt();
    let shift_scale = (4.0 * sqrt_p * sigma_tilde_sq).sqrt();
    let q_joint = chi_square_quantile(1.0 - alpha, 2 * p)?;
    let q_half = chi_square_quantile(1.0 - alpha / 2.0, p)?;

    let hits = (0..replications as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep + 1);
            let mut loc_ss = 0.0;
            let mut scale_ss = 0.0;
            for j in 0..2 * p {
                let mut z: f64 = rng.sample(StandardNormal);
                if j == 0 {
                    z += shift_loc;
                } else if j == p {
                    z += shift_scale;
                }
                if j < p {
                    loc_ss += z * z;
                } else {
                    scale_ss += z * z;
                }
            }
            let joint = u64::from(loc_ss + scale_ss > q_joint);
            let bonf = u64::from(loc_ss > q_half || scale_ss > q_half);
            [joint, bonf]
        })
        .reduce(|| [0u64; 2], |a, b| [a[0] + b[0], a[1] + b[1]]);

    let joint_rate = hits[0] as f64 / replications as f64;
    let bonferroni_rate = hits[1] as f64 / replications as f64;
    Ok(JointMcCheck {
        joint_rate,
        bonferroni_rate,
        joint_formula: joint_power(mu_tilde_sq, sigma_tilde_sq, alpha)?,
        bonferroni_formula: bonferroni_power(mu_tilde_sq, sigma_tilde_sq, alpha)?,
        se: mc_standard_error(joint_rate, replications),
    })
}

/// Noncentrality slope estimate for a scale weight.
#[derive(Debug, Clone)]
pub struct BetaEstimate {
    pub beta: f64,
    pub se: f64,
    pub points: usize,
}

/// Mean and variance of each scale builtin on the unit interval, used to
/// standardize the summed weight.
fn scale_weight_moments(name: &str) -> Result<(f64, f64)> {
    match name {
        "siegel_tukey" => Ok((0.25, 1.0 / 48.0)),
        "mood" => Ok((1.0 / 12.0, 1.0 / 180.0)),
        "klotz" => Ok((1.0, 2.0)),
        other => Err(Error::InvalidArgument(format!(
            "scale noncentrality is defined for siegel_tukey | mood | klotz, got '{other}'"
        ))),
    }
}

/// Monte Carlo quadrature of the scale-test noncentrality coefficient
/// beta = E[ wbar(U) zbar(U) ] under the product-Gaussian reference, where
/// wbar is the standardized summed weight (sum_j w(U_j) - p c_w)/sqrt(p v_w)
/// and zbar = (|Phi^{-1}(U)|^2 - p)/sqrt(p) is the summed scale score.
///
/// For independent components beta does not depend on p, which is the
/// reduction the estimates are checked against.
pub fn scale_shift_noncentrality(
    weight_name: &str,
    p: usize,
    family: Family,
    points: usize,
    seed: u64,
) -> Result<BetaEstimate> {
    if family == Family::LogisticLocation {
        return Err(Error::InvalidArgument(
            "scale noncentrality quadrature needs a Gaussian-transport family".into(),
        ));
    }
    if p < 1 {
        return Err(Error::InvalidArgument("p must be >= 1".into()));
    }
    if points < 1_000_000 {
        return Err(Error::InvalidArgument(format!(
            "quadrature needs at least 1e6 points, got {points}"
        )));
    }
    let (c_w, v_w) = scale_weight_moments(weight_name)?;
    let w = builtin(weight_name, 1)?;
    let pf = p as f64;
    let w_norm = (pf * v_w).sqrt();
    let chunk = 1 << 14;
    let chunks = points.div_ceil(chunk);

    let (sum, sum_sq, used) = (0..chunks as u64)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ci + 1);
            let lo = ci as usize * chunk;
            let hi = ((ci as usize + 1) * chunk).min(points);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in lo..hi {
                let mut wsum = 0.0;
                let mut zsum = 0.0;
                for _ in 0..p {
                    let y: f64 = rng.sample(StandardNormal);
                    let u = gaussian_cdf(y);
                    wsum += w.eval(&[u])[0];
                    zsum += y * y - 1.0;
                }
                let prod = (wsum - pf * c_w) / w_norm * (zsum / pf.sqrt());
                s += prod;
                s2 += prod * prod;
            }
            (s, s2, hi - lo)
        })
        .reduce(|| (0.0, 0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));

    let nf = used as f64;
    let beta = sum / nf;
    let var = (sum_sq / nf - beta * beta).max(0.0);
    Ok(BetaEstimate {
        beta,
        se: (var / nf).sqrt(),
        points: used,
    })
}
