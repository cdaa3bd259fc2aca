//! Parametric families with independent components: scores, transport maps
//! to the unit cube, pooled maximum likelihood, model-adaptive weights, and
//! the likelihood-ratio baseline statistic.
//!
//! Every family factors over axes, so the map to (0,1)^p is the vector of
//! marginal CDFs and its inverse is closed-form. The adaptive weight is the
//! score composed with the inverse transport at the fitted parameter; for
//! the families here that composition does not depend on the fit (location
//! shifts cancel, scale factors are normalized away), which is what makes
//! the resulting rank tests distribution-free within the family.

use crate::error::{Error, Result};
use crate::rank_map::SampleSet;
use crate::weights::{gaussian_cdf, norm_quantile, WeightFn};

/// Model family identifier. Parameters and scores lay out location
/// components for all axes first, then (for the location-scale family)
/// per-axis standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Gaussian with unknown mean, identity covariance.
    GaussianLocation,
    /// Gaussian with unknown mean and unknown per-axis standard deviation.
    GaussianLocationScale,
    /// Logistic with unknown location, unit scale, independent axes.
    LogisticLocation,
}

impl Family {
    pub fn parse(name: &str) -> Result<Family> {
        match name {
            "gaussian_location" => Ok(Family::GaussianLocation),
            "gaussian_location_scale" => Ok(Family::GaussianLocationScale),
            "logistic_location" => Ok(Family::LogisticLocation),
            _ => Err(Error::InvalidArgument(format!(
                "unknown model family '{name}'"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::GaussianLocation => "gaussian_location",
            Family::GaussianLocationScale => "gaussian_location_scale",
            Family::LogisticLocation => "logistic_location",
        }
    }

    /// Parameter dimension m for data dimension p (equals the score
    /// dimension).
    pub fn param_dim(&self, p: usize) -> usize {
        match self {
            Family::GaussianLocationScale => 2 * p,
            _ => p,
        }
    }
}

/// A parameter point for one family at a fixed data dimension.
///
/// Layout: `theta[0..p]` are per-axis locations; for the location-scale
/// family `theta[p..2p]` are per-axis standard deviations (strictly
/// positive).
#[derive(Debug, Clone)]
pub struct ModelParams {
    family: Family,
    p: usize,
    theta: Vec<f64>,
}

impl ModelParams {
    pub fn new(family: Family, p: usize, theta: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if theta.len() != family.param_dim(p) {
            return Err(Error::InvalidArgument(format!(
                "{} with p={p} needs {} parameters, got {}",
                family.name(),
                family.param_dim(p),
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "model parameters must be finite".into(),
            ));
        }
        if family == Family::GaussianLocationScale && theta[p..].iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidArgument(
                "scale parameters must be strictly positive".into(),
            ));
        }
        Ok(ModelParams { family, p, theta })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn location(&self, axis: usize) -> f64 {
        self.theta[axis]
    }

    /// Per-axis standard deviation (1 for pure location families).
    pub fn scale(&self, axis: usize) -> f64 {
        match self.family {
            Family::GaussianLocationScale => self.theta[self.p + axis],
            _ => 1.0,
        }
    }
}

fn check_point(params: &ModelParams, x: &[f64]) -> Result<()> {
    if x.len() != params.p {
        return Err(Error::InvalidArgument(format!(
            "point has dimension {}, model has p={}",
            x.len(),
            params.p
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("point must be finite".into()));
    }
    Ok(())
}

/// Gradient of the log density in the parameters, evaluated at x.
pub fn score(params: &ModelParams, x: &[f64]) -> Result<Vec<f64>> {
    check_point(params, x)?;
    let p = params.p;
    let mut out = Vec::with_capacity(params.family.param_dim(p));
    match params.family {
        Family::GaussianLocation => {
            for (j, &xj) in x.iter().enumerate() {
                out.push(xj - params.location(j));
            }
        }
        Family::GaussianLocationScale => {
            for (j, &xj) in x.iter().enumerate() {
                let s = params.scale(j);
                out.push((xj - params.location(j)) / (s * s));
            }
            for (j, &xj) in x.iter().enumerate() {
                let s = params.scale(j);
                let d = xj - params.location(j);
                out.push((d * d - s * s) / (s * s * s));
            }
        }
        Family::LogisticLocation => {
            for (j, &xj) in x.iter().enumerate() {
                out.push(((xj - params.location(j)) / 2.0).tanh());
            }
        }
    }
    Ok(out)
}

/// Component-wise marginal CDFs: R^p -> (0,1)^p.
pub fn transport_forward(params: &ModelParams, x: &[f64]) -> Result<Vec<f64>> {
    check_point(params, x)?;
    let mut out = Vec::with_capacity(params.p);
    for (j, &xj) in x.iter().enumerate() {
        let z = (xj - params.location(j)) / params.scale(j);
        let u = match params.family {
            Family::LogisticLocation => 1.0 / (1.0 + (-z).exp()),
            _ => gaussian_cdf(z),
        };
        out.push(u);
    }
    Ok(out)
}

/// Component-wise marginal quantiles: (0,1)^p -> R^p.
pub fn transport_inverse(params: &ModelParams, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != params.p {
        return Err(Error::InvalidArgument(format!(
            "point has dimension {}, model has p={}",
            u.len(),
            params.p
        )));
    }
    if u.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::Domain(
            "transport_inverse needs coordinates strictly inside (0,1)".into(),
        ));
    }
    let mut out = Vec::with_capacity(params.p);
    for (j, &uj) in u.iter().enumerate() {
        let z = match params.family {
            Family::LogisticLocation => (uj / (1.0 - uj)).ln(),
            _ => norm_quantile(uj),
        };
        out.push(params.location(j) + params.scale(j) * z);
    }
    Ok(out)
}

/// Exit threshold for the logistic location Newton iteration.
const MLE_GRADIENT_TOL: f64 = 1e-9;

/// Maximum-likelihood fit on the pooled sample (group labels ignored).
pub fn pooled_mle(family: Family, sample: &SampleSet) -> Result<ModelParams> {
    let p = sample.dim();
    let n = sample.n();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 observations to fit {}, got {n}",
            family.name()
        )));
    }
    let mut means = vec![0.0f64; p];
    for i in 0..n {
        for (j, m) in means.iter_mut().enumerate() {
            *m += sample.row(i)[j];
        }
    }
    for m in means.iter_mut() {
        *m /= n as f64;
    }
    match family {
        Family::GaussianLocation => ModelParams::new(family, p, means),
        Family::GaussianLocationScale => {
            let mut theta = means.clone();
            for (j, &mean_j) in means.iter().enumerate() {
                let ss: f64 = (0..n)
                    .map(|i| {
                        let d = sample.row(i)[j] - mean_j;
                        d * d
                    })
                    .sum();
                let sd = (ss / n as f64).sqrt();
                if sd <= 0.0 {
                    return Err(Error::DegenerateSample(format!(
                        "axis {j} has zero variance; scale is not identifiable"
                    )));
                }
                theta.push(sd);
            }
            ModelParams::new(family, p, theta)
        }
        Family::LogisticLocation => {
            let mut theta = Vec::with_capacity(p);
            for (j, &mean_j) in means.iter().enumerate() {
                let xs: Vec<f64> = (0..n).map(|i| sample.row(i)[j]).collect();
                theta.push(logistic_location_mle(&xs, mean_j)?);
            }
            ModelParams::new(family, p, theta)
        }
    }
}

/// One-dimensional logistic location MLE by damped Newton on the concave
/// log-likelihood; the gradient norm at exit is below `MLE_GRADIENT_TOL`.
fn logistic_location_mle(xs: &[f64], init: f64) -> Result<f64> {
    let grad = |mu: f64| -> f64 { xs.iter().map(|&x| ((x - mu) / 2.0).tanh()).sum() };
    let hess = |mu: f64| -> f64 {
        xs.iter()
            .map(|&x| {
                let c = ((x - mu) / 2.0).cosh();
                -0.5 / (c * c)
            })
            .sum()
    };
    let mut mu = init;
    let mut g = grad(mu);
    for _ in 0..200 {
        if g.abs() <= MLE_GRADIENT_TOL {
            return Ok(mu);
        }
        let h = hess(mu);
        let mut step = if h < 0.0 { -g / h } else { g.signum() };
        // Backtrack until the gradient magnitude shrinks; concavity
        // guarantees acceptance for a small enough step.
        for _ in 0..60 {
            let cand = grad(mu + step);
            if cand.abs() < g.abs() {
                mu += step;
                g = cand;
                break;
            }
            step *= 0.5;
        }
    }
    if g.abs() <= MLE_GRADIENT_TOL {
        Ok(mu)
    } else {
        Err(Error::Numeric(format!(
            "logistic location fit stalled with gradient {g:.3e}"
        )))
    }
}

/// Score composed with the inverse transport at the fitted parameter,
/// normalized per axis so the result does not depend on the fit.
///
/// Concretely: `gaussian_location` gives the normal quantile per axis;
/// `gaussian_location_scale` gives the pair (quantile, quantile^2 - 1) per
/// axis (location block first, then the scale block); `logistic_location`
/// gives 2u - 1 per axis. The per-axis normalization multiplies by the
/// fitted standard deviation, an invertible diagonal map that leaves the
/// quadratic test statistic unchanged.
pub fn adaptive_weight(family: Family, params: &ModelParams) -> Result<WeightFn> {
    if params.family() != family {
        return Err(Error::InvalidArgument(format!(
            "parameters are for {}, requested {}",
            params.family().name(),
            family.name()
        )));
    }
    let p = params.dim();
    let label = format!("model:{}", family.name());
    let w = match family {
        Family::GaussianLocation => WeightFn::componentwise(label, p, norm_quantile),
        Family::LogisticLocation => WeightFn::componentwise(label, p, |u| 2.0 * u - 1.0),
        Family::GaussianLocationScale => WeightFn::new(label, p, 2 * p, move |u, out| {
            for j in 0..p {
                let q = norm_quantile(u[j]);
                out[j] = q;
                out[p + j] = q * q - 1.0;
            }
        }),
    };
    Ok(w)
}

/// Which covariance model the Gaussian-location likelihood ratio uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GlrVariant {
    /// Identity covariance, unknown means.
    #[default]
    KnownIdentity,
    /// Unknown diagonal covariance shared across groups under the null.
    UnknownDiagonal,
}

/// Likelihood-ratio statistic -2 log lambda for equality of all group
/// parameters, from per-group versus pooled maximum likelihood.
pub fn glr_statistic(family: Family, sample: &SampleSet, variant: GlrVariant) -> Result<f64> {
    if variant == GlrVariant::UnknownDiagonal && family != Family::GaussianLocation {
        return Err(Error::InvalidArgument(
            "the diagonal-covariance variant applies to gaussian_location only".into(),
        ));
    }
    let p = sample.dim();
    let n = sample.n();
    let k = sample.k_groups();
    let counts = sample.counts().to_vec();

    let mut group_means = vec![vec![0.0f64; p]; k];
    for i in 0..n {
        let g = sample.groups()[i];
        for (m, &v) in group_means[g].iter_mut().zip(sample.row(i)) {
            *m += v;
        }
    }
    for (g, mean) in group_means.iter_mut().enumerate() {
        for m in mean.iter_mut() {
            *m /= counts[g] as f64;
        }
    }
    let mut pooled_mean = vec![0.0f64; p];
    for j in 0..p {
        for g in 0..k {
            pooled_mean[j] += counts[g] as f64 * group_means[g][j];
        }
        pooled_mean[j] /= n as f64;
    }

    match family {
        Family::GaussianLocation => match variant {
            GlrVariant::KnownIdentity => {
                let mut stat = 0.0;
                for g in 0..k {
                    let d2: f64 = (0..p)
                        .map(|j| {
                            let d = group_means[g][j] - pooled_mean[j];
                            d * d
                        })
                        .sum();
                    stat += counts[g] as f64 * d2;
                }
                Ok(stat)
            }
            GlrVariant::UnknownDiagonal => {
                let mut stat = 0.0;
                for j in 0..p {
                    let mut total = 0.0;
                    let mut within = 0.0;
                    for i in 0..n {
                        let g = sample.groups()[i];
                        let x = sample.row(i)[j];
                        let dt = x - pooled_mean[j];
                        let dw = x - group_means[g][j];
                        total += dt * dt;
                        within += dw * dw;
                    }
                    if within <= 0.0 {
                        return Err(Error::DegenerateSample(format!(
                            "axis {j} has zero within-group variance"
                        )));
                    }
                    stat += n as f64 * (total / within).ln();
                }
                Ok(stat)
            }
        },
        Family::GaussianLocationScale => {
            let mut stat = 0.0;
            for j in 0..p {
                let mut pooled_ss = 0.0;
                let mut group_ss = vec![0.0f64; k];
                for i in 0..n {
                    let g = sample.groups()[i];
                    let x = sample.row(i)[j];
                    let dt = x - pooled_mean[j];
                    let dg = x - group_means[g][j];
                    pooled_ss += dt * dt;
                    group_ss[g] += dg * dg;
                }
                stat += n as f64 * (pooled_ss / n as f64).ln();
                for g in 0..k {
                    let v = group_ss[g] / counts[g] as f64;
                    if v <= 0.0 {
                        return Err(Error::DegenerateSample(format!(
                            "group {g} axis {j} has zero variance"
                        )));
                    }
                    stat -= counts[g] as f64 * v.ln();
                }
            }
            Ok(stat)
        }
        Family::LogisticLocation => {
            let loglik = |xs: &[f64], mu: f64| -> f64 {
                xs.iter()
                    .map(|&x| {
                        let z = x - mu;
                        -z - 2.0 * (1.0 + (-z).exp()).ln()
                    })
                    .sum()
            };
            let mut stat = 0.0;
            for j in 0..p {
                let pooled: Vec<f64> = (0..n).map(|i| sample.row(i)[j]).collect();
                let mu0 = logistic_location_mle(&pooled, pooled_mean[j])?;
                stat -= 2.0 * loglik(&pooled, mu0);
                for (g, means) in group_means.iter().enumerate() {
                    let xs: Vec<f64> = (0..n)
                        .filter(|&i| sample.groups()[i] == g)
                        .map(|i| sample.row(i)[j])
                        .collect();
                    let mug = logistic_location_mle(&xs, means[j])?;
                    stat += 2.0 * loglik(&xs, mug);
                }
            }
            Ok(stat.max(0.0))
        }
    }
}

/// Degrees of freedom of the large-sample chi-square reference for the
/// likelihood-ratio statistic with K groups.
pub fn glr_df(family: Family, p: usize, k_groups: usize) -> usize {
    (k_groups - 1) * family.param_dim(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(family: Family, p: usize, theta: &[f64]) -> ModelParams {
        ModelParams::new(family, p, theta.to_vec()).unwrap()
    }

    #[test]
    fn score_frozen_examples() {
        let gl = params(Family::GaussianLocation, 2, &[0.0, 0.0]);
        assert_eq!(score(&gl, &[1.5, -2.0]).unwrap(), vec![1.5, -2.0]);

        let lo = params(Family::LogisticLocation, 1, &[0.0]);
        assert_eq!(score(&lo, &[0.0]).unwrap(), vec![0.0]);

        let ls = params(Family::GaussianLocationScale, 1, &[0.0, 1.0]);
        assert_eq!(score(&ls, &[2.0]).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn score_shifts_with_location() {
        let gl = params(Family::GaussianLocation, 1, &[2.0]);
        assert_eq!(score(&gl, &[2.0]).unwrap(), vec![0.0]);
        let lo = params(Family::LogisticLocation, 1, &[1.0]);
        assert_relative_eq!(score(&lo, &[3.0]).unwrap()[0], 1.0f64.tanh());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ModelParams::new(Family::GaussianLocationScale, 1, vec![0.0, 0.0]).is_err());
        assert!(ModelParams::new(Family::GaussianLocationScale, 1, vec![0.0, -1.0]).is_err());
        assert!(ModelParams::new(Family::GaussianLocation, 2, vec![0.0]).is_err());
        assert!(ModelParams::new(Family::GaussianLocation, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn forward_transport_frozen_values() {
        let gl = params(Family::GaussianLocation, 1, &[0.0]);
        assert_relative_eq!(transport_forward(&gl, &[0.0]).unwrap()[0], 0.5);
        let back = transport_inverse(&gl, &[0.5]).unwrap();
        assert_relative_eq!(back[0], 0.0, epsilon = 1e-12);

        let shifted = params(Family::GaussianLocation, 1, &[3.0]);
        assert_relative_eq!(
            transport_inverse(&shifted, &[0.975]).unwrap()[0],
            3.0 + 1.959963984540054,
            max_relative = 1e-9
        );
    }

    #[test]
    fn boundary_u_is_a_domain_error() {
        let gl = params(Family::GaussianLocation, 1, &[0.0]);
        assert!(matches!(
            transport_inverse(&gl, &[0.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            transport_inverse(&gl, &[1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn transports_round_trip_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fams: [(Family, Vec<f64>); 3] = [
            (Family::GaussianLocation, vec![0.7, -0.2]),
            (Family::GaussianLocationScale, vec![0.7, -0.2, 0.5, 2.0]),
            (Family::LogisticLocation, vec![0.1, 1.3]),
        ];
        for (fam, theta) in fams {
            let pr = params(fam, 2, &theta);
            for _ in 0..100 {
                let x = [
                    4.0 * rng.random::<f64>() - 2.0,
                    4.0 * rng.random::<f64>() - 2.0,
                ];
                let u = transport_forward(&pr, &x).unwrap();
                let back = transport_inverse(&pr, &u).unwrap();
                for j in 0..2 {
                    assert!(
                        (back[j] - x[j]).abs() <= 1e-8,
                        "{}: {} vs {}",
                        fam.name(),
                        back[j],
                        x[j]
                    );
                }
            }
        }
    }

    fn sample_from(rows: Vec<Vec<f64>>) -> SampleSet {
        let n = rows.len();
        SampleSet::new(&rows, vec![0; n]).unwrap()
    }

    #[test]
    fn mle_frozen_examples() {
        let s = sample_from(vec![vec![0.0, 0.0], vec![2.0, 2.0]]);
        let fit = pooled_mle(Family::GaussianLocation, &s).unwrap();
        assert_eq!(fit.theta(), &[1.0, 1.0]);

        let s = sample_from(vec![vec![-1.0], vec![1.0], vec![0.5], vec![-0.5]]);
        let fit = pooled_mle(Family::GaussianLocationScale, &s).unwrap();
        assert_relative_eq!(fit.theta()[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(fit.theta()[1], (2.5f64 / 4.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn scale_mle_on_two_points() {
        let s = sample_from(vec![vec![-1.0], vec![1.0]]);
        let fit = pooled_mle(Family::GaussianLocationScale, &s).unwrap();
        assert_eq!(fit.theta(), &[0.0, 1.0]);
    }

    #[test]
    fn logistic_mle_finds_center_of_symmetric_sample() {
        let c = 1.75;
        let rows: Vec<Vec<f64>> = [-2.0, -0.6, -0.1, 0.1, 0.6, 2.0]
            .iter()
            .map(|d| vec![c + d])
            .collect();
        let s = sample_from(rows);
        let fit = pooled_mle(Family::LogisticLocation, &s).unwrap();
        assert!((fit.theta()[0] - c).abs() <= 1e-8);
    }

    #[test]
    fn logistic_mle_gradient_vanishes_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![3.0 * rng.random::<f64>(), 5.0 * rng.random::<f64>() - 4.0])
            .collect();
        let s = sample_from(rows.clone());
        let fit = pooled_mle(Family::LogisticLocation, &s).unwrap();
        for j in 0..2 {
            let g: f64 = rows
                .iter()
                .map(|r| ((r[j] - fit.theta()[j]) / 2.0).tanh())
                .sum();
            assert!(g.abs() <= 1e-9, "axis {j} gradient {g}");
        }
    }

    #[test]
    fn degenerate_axis_rejected_for_scale_family() {
        let rows = vec![vec![1.0, 2.5], vec![2.0, 2.5], vec![3.0, 2.5]];
        let s = sample_from(rows);
        match pooled_mle(Family::GaussianLocationScale, &s) {
            Err(Error::DegenerateSample(msg)) => assert!(msg.contains("axis 1")),
            other => panic!("expected degenerate-sample error, got {other:?}"),
        }
    }

    #[test]
    fn score_mean_vanishes_under_own_model_mc() {
        // E score(theta, X) = 0 when X ~ model(theta); check at 3 MC sigma.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let reps = 20000usize;
        let cases: [(Family, Vec<f64>); 3] = [
            (Family::GaussianLocation, vec![0.4]),
            (Family::GaussianLocationScale, vec![0.4, 1.7]),
            (Family::LogisticLocation, vec![-0.3]),
        ];
        for (fam, theta) in cases {
            let pr = params(fam, 1, &theta);
            let m = fam.param_dim(1);
            let mut sums = vec![0.0f64; m];
            let mut sq = vec![0.0f64; m];
            for _ in 0..reps {
                let u = [rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12)];
                let x = transport_inverse(&pr, &u).unwrap();
                let sc = score(&pr, &x).unwrap();
                for (j, &v) in sc.iter().enumerate() {
                    sums[j] += v;
                    sq[j] += v * v;
                }
            }
            for j in 0..m {
                let mean = sums[j] / reps as f64;
                let var = sq[j] / reps as f64 - mean * mean;
                let sigma = (var / reps as f64).sqrt();
                assert!(
                    mean.abs() <= 3.0 * sigma,
                    "{} component {j}: mean {mean:.4e} vs sigma {sigma:.4e}",
                    fam.name()
                );
            }
        }
    }

    /// Asymptotic Kolmogorov-Smirnov p-value.
    fn ks_pvalue(sorted_u: &[f64]) -> f64 {
        let n = sorted_u.len() as f64;
        let mut d = 0.0f64;
        for (i, &u) in sorted_u.iter().enumerate() {
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            d = d.max((u - lo).abs()).max((hi - u).abs());
        }
        let t = n.sqrt() * d;
        let mut p = 0.0;
        for j in 1..100 {
            let jf = j as f64;
            p += 2.0 * (-1.0f64).powi(j + 1) * (-2.0 * jf * jf * t * t).exp();
        }
        p.clamp(0.0, 1.0)
    }

    #[test]
    fn forward_transport_of_model_draws_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let pr = params(Family::GaussianLocationScale, 2, &[1.0, -1.0, 0.5, 3.0]);
        let nsim = 10000;
        for axis in 0..2 {
            let mut us: Vec<f64> = (0..nsim)
                .map(|_| {
                    let u = [
                        rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12),
                        rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12),
                    ];
                    let x = transport_inverse(&pr, &u).unwrap();
                    transport_forward(&pr, &x).unwrap()[axis]
                })
                .collect();
            us.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let p = ks_pvalue(&us);
            assert!(p > 0.001, "axis {axis}: KS p-value {p}");
        }
    }

    #[test]
    fn adaptive_weight_frozen_forms() {
        let gl = params(Family::GaussianLocation, 1, &[4.2]);
        let w = adaptive_weight(Family::GaussianLocation, &gl).unwrap();
        assert_relative_eq!(w.eval(&[0.975])[0], 1.959963984540054, max_relative = 1e-9);

        let lo = params(Family::LogisticLocation, 1, &[0.0]);
        let w = adaptive_weight(Family::LogisticLocation, &lo).unwrap();
        assert_relative_eq!(w.eval(&[0.25])[0], -0.5, epsilon = 1e-12);

        let ls = params(Family::GaussianLocationScale, 1, &[0.0, 1.0]);
        let w = adaptive_weight(Family::GaussianLocationScale, &ls).unwrap();
        let out = w.eval(&[0.841344746068543]);
        assert_relative_eq!(out[0], 1.0, max_relative = 1e-6);
        assert_relative_eq!(out[1], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn adaptive_weight_is_parameter_free() {
        let grid: Vec<f64> = (1..40).map(|i| i as f64 / 40.0).collect();
        let cases: [(Family, Vec<f64>, Vec<f64>); 3] = [
            (Family::GaussianLocation, vec![0.0], vec![-7.3]),
            (
                Family::GaussianLocationScale,
                vec![0.0, 1.0],
                vec![2.5, 0.04],
            ),
            (Family::LogisticLocation, vec![0.0], vec![11.0]),
        ];
        for (fam, th_a, th_b) in cases {
            let wa = adaptive_weight(fam, &params(fam, 1, &th_a)).unwrap();
            let wb = adaptive_weight(fam, &params(fam, 1, &th_b)).unwrap();
            for &u in &grid {
                let a = wa.eval(&[u]);
                let b = wb.eval(&[u]);
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() <= 1e-8, "{}: {x} vs {y}", fam.name());
                }
            }
        }
    }

    fn two_group_sample(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> SampleSet {
        SampleSet::from_groups(&[a, b]).unwrap()
    }

    #[test]
    fn glr_zero_for_identical_groups() {
        let g = vec![vec![0.1], vec![0.9], vec![-0.4]];
        let s = two_group_sample(g.clone(), g);
        for fam in [
            Family::GaussianLocation,
            Family::GaussianLocationScale,
            Family::LogisticLocation,
        ] {
            let v = glr_statistic(fam, &s, GlrVariant::KnownIdentity).unwrap();
            assert!(v.abs() < 1e-9, "{}: {v}", fam.name());
        }
    }

    #[test]
    fn gaussian_location_glr_matches_closed_form() {
        let a = vec![vec![0.0], vec![1.0], vec![2.0]];
        let b = vec![vec![4.0], vec![6.0]];
        let s = two_group_sample(a, b);
        let v = glr_statistic(Family::GaussianLocation, &s, GlrVariant::KnownIdentity).unwrap();
        // Group means 1 and 5, sizes 3 and 2: (3*2/5) * (1-5)^2 = 19.2.
        assert_relative_eq!(v, 19.2, max_relative = 1e-12);
    }

    #[test]
    fn diagonal_variant_only_for_gaussian_location() {
        let a = vec![vec![0.0], vec![1.0]];
        let b = vec![vec![2.0], vec![3.0]];
        let s = two_group_sample(a, b);
        assert!(glr_statistic(
            Family::GaussianLocationScale,
            &s,
            GlrVariant::UnknownDiagonal
        )
        .is_err());
        let v = glr_statistic(Family::GaussianLocation, &s, GlrVariant::UnknownDiagonal).unwrap();
        assert!(v > 0.0);
    }

    #[test]
    fn glr_df_counts_parameters() {
        assert_eq!(glr_df(Family::GaussianLocation, 2, 2), 2);
        assert_eq!(glr_df(Family::GaussianLocationScale, 2, 2), 4);
        assert_eq!(glr_df(Family::LogisticLocation, 3, 4), 9);
    }

    #[test]
    fn gaussian_location_glr_wilks_percentile() {
        // Null distribution check: p=2, K=2, N=400, the 95th percentile of
        // the statistic should match the chi-square(2) quantile 5.991.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let reps = 10000;
        let mut stats = Vec::with_capacity(reps);
        let half = 200usize;
        for _ in 0..reps {
            let mut rows = Vec::with_capacity(2 * half);
            for _ in 0..2 * half {
                let (a, b) = gauss_pair(&mut rng);
                rows.push(vec![a, b]);
            }
            let groups: Vec<usize> = (0..2 * half).map(|i| usize::from(i >= half)).collect();
            let s = SampleSet::new(&rows, groups).unwrap();
            stats
                .push(glr_statistic(Family::GaussianLocation, &s, GlrVariant::KnownIdentity).unwrap());
        }
        stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q95 = stats[(0.95 * reps as f64) as usize];
        assert!(
            (q95 - 5.991464547107979).abs() <= 0.15,
            "95th percentile {q95}"
        );
    }

    fn gauss_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
        let u1: f64 = rng.random::<f64>().max(1e-300);
        let u2: f64 = rng.random();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        (r * t.cos(), r * t.sin())
    }

    proptest! {
        #[test]
        fn round_trip_property(mu in -3.0f64..3.0, sigma in 0.2f64..4.0, z in -5.0f64..5.0) {
            // Standardized range |z| <= 5: beyond that, u = Phi(z) sits too
            // close to 1 for any double-precision inverse to recover z.
            let x = mu + sigma * z;
            let pr = params(Family::GaussianLocationScale, 1, &[mu, sigma]);
            let u = transport_forward(&pr, &[x]).unwrap();
            if u[0] > 0.0 && u[0] < 1.0 {
                let back = transport_inverse(&pr, &u).unwrap();
                prop_assert!((back[0] - x).abs() <= 1e-8 * (1.0 + x.abs()));
            }
        }
    }
}
