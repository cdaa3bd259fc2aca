//! Vector-valued weight functions on [0,1]^p: builtins, centering on a grid,
//! Gram matrices, stacking, and nuisance projection.
//!
//! A weight function maps grid coordinates to R^m. Test statistics only ever
//! see weights through their centered values on a reference grid, so all
//! integrals here are empirical grid sums; that makes the asymptotic null
//! covariance agree exactly with the finite permutation distribution.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rank_map::RankGrid;

/// Inverse standard normal CDF.
///
/// Rational initial approximation followed by one Halley refinement against
/// the erfc-based CDF; the result satisfies
/// |err| <= 1e-9 * (1 + |Phi^{-1}(u)|) with a wide margin.
pub fn gaussian_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!(
            "gaussian_quantile needs u in (0,1), got {u}"
        )));
    }
    Ok(norm_quantile(u))
}

/// Standard normal CDF via erfc; absolute error ~1e-15.
pub fn gaussian_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn gaussian_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub(crate) fn norm_quantile(u: f64) -> f64 {
    // Rational approximation in three regions (relative error ~1e-9).
    const A: [f64; 6] = [
        -39.696_830_286_653_76,
        220.946_098_424_520_9,
        -275.928_510_446_968_9,
        138.357_751_867_269_1,
        -30.664_798_066_147_16,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -54.476_098_798_224_06,
        161.585_836_858_040_9,
        -155.698_979_859_886_6,
        66.801_311_887_719_72,
        -13.280_681_552_885_72,
    ];
    const C: [f64; 6] = [
        -0.007_784_894_002_430_293,
        -0.322_396_458_041_136_4,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        0.007_784_695_709_041_462,
        0.322_467_129_070_039_8,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const LOW: f64 = 0.02425;

    let x = if u < LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - u).ln()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    };

    // One Halley step: f(x) = Phi(x) - u, f' = phi(x), f''/f' = -x.
    let e = gaussian_cdf(x) - u;
    let w = e / gaussian_pdf(x);
    x - w / (1.0 + 0.5 * x * w)
}

/// Evaluation kernel: fills the m output slots for one point of [0,1]^p.
type EvalFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Weight function [0,1]^p -> R^m with a CLI-vocabulary label.
#[derive(Clone)]
pub struct WeightFn {
    label: String,
    p: usize,
    m: usize,
    eval: Arc<EvalFn>,
}

impl std::fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeightFn")
            .field("label", &self.label)
            .field("p", &self.p)
            .field("m", &self.m)
            .finish()
    }
}

impl WeightFn {
    /// Wrap a raw evaluation closure writing m outputs for a p-vector input.
    pub fn new(
        label: impl Into<String>,
        p: usize,
        m: usize,
        eval: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        WeightFn {
            label: label.into(),
            p,
            m,
            eval: Arc::new(eval),
        }
    }

    /// Componentwise scalar weight: m = p, one scalar map per axis.
    pub fn componentwise(
        label: impl Into<String>,
        p: usize,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(label, p, p, move |u, out| {
            for (o, &x) in out.iter_mut().zip(u) {
                *o = f(x);
            }
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn input_dim(&self) -> usize {
        self.p
    }

    pub fn output_dim(&self) -> usize {
        self.m
    }

    pub fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.p);
        debug_assert_eq!(out.len(), self.m);
        (self.eval)(u, out);
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        self.eval_into(u, &mut out);
        out
    }
}

/// Named builtin weights, applied componentwise (m = p).
///
/// Names are the CLI vocabulary: `mann_whitney` (identity), `van_der_waerden`
/// (normal quantile), `siegel_tukey` (|x - 1/2|), `mood` ((x - 1/2)^2),
/// `klotz` (squared normal quantile).
pub fn builtin(name: &str, p: usize) -> Result<WeightFn> {
    if p < 1 {
        return Err(Error::InvalidArgument("p must be >= 1".into()));
    }
    let w = match name {
        "mann_whitney" => WeightFn::componentwise(name, p, |x| x),
        "van_der_waerden" => WeightFn::componentwise(name, p, norm_quantile),
        "siegel_tukey" => WeightFn::componentwise(name, p, |x| (x - 0.5).abs()),
        "mood" => WeightFn::componentwise(name, p, |x| (x - 0.5) * (x - 0.5)),
        "klotz" => WeightFn::componentwise(name, p, |x| {
            let q = norm_quantile(x);
            q * q
        }),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unknown weight name '{name}'"
            )))
        }
    };
    Ok(w)
}

/// A weight evaluated at every grid point and column-centered to sum to zero.
#[derive(Debug, Clone)]
pub struct CenteredWeights {
    values: DMatrix<f64>, // N x m
    label: String,
    grid_fingerprint: u64,
}

impl CenteredWeights {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn grid_fingerprint(&self) -> u64 {
        self.grid_fingerprint
    }

    /// Row of centered weight values for grid point i.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }
}

/// Evaluate a weight at every grid point and subtract column means.
///
/// Errors if any evaluation is non-finite, naming the offending grid point.
pub fn center_on_grid(w: &WeightFn, grid: &RankGrid) -> Result<CenteredWeights> {
    if w.input_dim() != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "weight expects p={}, grid has p={}",
            w.input_dim(),
            grid.dim()
        )));
    }
    let n = grid.n();
    let m = w.output_dim();
    let mut buf = vec![0.0f64; n * m];
    if n * m >= 1 << 16 {
        buf.par_chunks_mut(m)
            .enumerate()
            .for_each(|(i, out)| w.eval_into(grid.point(i), out));
    } else {
        for (i, out) in buf.chunks_mut(m).enumerate() {
            w.eval_into(grid.point(i), out);
        }
    }
    if let Some(bad) = buf.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            point: grid.point(bad / m).to_vec(),
            component: bad % m,
        });
    }
    let mut values = DMatrix::from_row_slice(n, m, &buf);
    for mut col in values.column_iter_mut() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
    }
    Ok(CenteredWeights {
        values,
        label: w.label().to_string(),
        grid_fingerprint: grid.fingerprint(),
    })
}

/// Empirical Gram matrix H = (1/N) V1^T V2 between two centered weights.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    h: DMatrix<f64>,
}

impl GramMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn from_matrix(h: DMatrix<f64>) -> Self {
        GramMatrix { h }
    }

    /// Scale by a scalar (used for covariance assembly).
    pub fn scaled(&self, c: f64) -> GramMatrix {
        GramMatrix { h: &self.h * c }
    }
}

/// Empirical Gram matrix of two centered weight sets on the same grid.
pub fn gram(a: &CenteredWeights, b: &CenteredWeights) -> Result<GramMatrix> {
    if a.grid_fingerprint() != b.grid_fingerprint() {
        return Err(Error::InvalidArgument(
            "centered weights come from different grids".into(),
        ));
    }
    let n = a.n() as f64;
    Ok(GramMatrix {
        h: a.values.tr_mul(&b.values) / n,
    })
}

/// Concatenate several weights into one (outputs stacked in order).
pub fn stack(ws: &[WeightFn]) -> Result<WeightFn> {
    if ws.is_empty() {
        return Err(Error::InvalidArgument("cannot stack zero weights".into()));
    }
    let p = ws[0].input_dim();
    if ws.iter().any(|w| w.input_dim() != p) {
        return Err(Error::InvalidArgument(
            "stacked weights must share the input dimension".into(),
        ));
    }
    let label = ws
        .iter()
        .map(|w| w.label().to_string())
        .collect::<Vec<_>>()
        .join("+");
    let m: usize = ws.iter().map(|w| w.output_dim()).sum();
    let parts: Vec<WeightFn> = ws.to_vec();
    Ok(WeightFn::new(format!("stack:{label}"), p, m, move |u, out| {
        let mut off = 0;
        for w in &parts {
            let d = w.output_dim();
            w.eval_into(u, &mut out[off..off + d]);
            off += d;
        }
    }))
}

/// Condition-number ceiling for the nuisance Gram inversion.
pub const PROJECTION_CONDITION_LIMIT: f64 = 1e12;

/// Relative eigenvalue cutoff defining numerical rank.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Project the signal weight orthogonally (in the empirical Gram inner
/// product) against the nuisance weight: output = signal - nuisance * X with
/// X solving H_nn X = H_ns.
///
/// The output's Gram against the nuisance block is zero to working
/// precision, so nuisance-direction alternatives produce no asymptotic shift.
pub fn project_nuisance(
    signal: &CenteredWeights,
    nuisance: &CenteredWeights,
) -> Result<CenteredWeights> {
    if signal.grid_fingerprint() != nuisance.grid_fingerprint() {
        return Err(Error::InvalidArgument(
            "signal and nuisance weights come from different grids".into(),
        ));
    }
    let h_nn = gram(nuisance, nuisance)?;
    let h_ns = nuisance.values.tr_mul(&signal.values) / nuisance.n() as f64;

    let dim = h_nn.h.nrows();
    let eig = nalgebra::SymmetricEigen::new(h_nn.h.clone());
    let lam_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let lam_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let rank = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > RANK_CUTOFF * lam_max)
        .count();
    let cond = if lam_min > 0.0 {
        lam_max / lam_min
    } else {
        f64::INFINITY
    };
    if rank < dim || cond > PROJECTION_CONDITION_LIMIT {
        return Err(Error::RankDeficient {
            rank,
            dim,
            cond,
            limit: PROJECTION_CONDITION_LIMIT,
        });
    }

    // X = H_nn^{-1} H_ns through the eigendecomposition.
    let vt_h = eig.eigenvectors.tr_mul(&h_ns);
    let mut scaled = vt_h;
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row /= eig.eigenvalues[i];
    }
    let x = &eig.eigenvectors * scaled;

    let values = &signal.values - &nuisance.values * x;
    Ok(CenteredWeights {
        values,
        label: format!("proj:{}/{}", signal.label, nuisance.label),
        grid_fingerprint: signal.grid_fingerprint,
    })
}

/// Build centered weight values directly (rows must already be aligned with
/// grid point order). Columns are re-centered defensively.
pub fn centered_from_matrix(
    values: DMatrix<f64>,
    label: impl Into<String>,
    grid: &RankGrid,
) -> Result<CenteredWeights> {
    if values.nrows() != grid.n() {
        return Err(Error::InvalidArgument(format!(
            "matrix has {} rows, grid has {} points",
            values.nrows(),
            grid.n()
        )));
    }
    let n = values.nrows() as f64;
    let mut values = values;
    for mut col in values.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    Ok(CenteredWeights {
        values,
        label: label.into(),
        grid_fingerprint: grid.fingerprint(),
    })
}

/// Column means helper used by tests: centered columns must sum to ~0.
pub fn max_column_sum(cw: &CenteredWeights) -> f64 {
    cw.values
        .column_iter()
        .map(|c| c.sum().abs())
        .fold(0.0, f64::max)
}

#[allow(dead_code)]
pub(crate) fn column_vector(cw: &CenteredWeights, j: usize) -> DVector<f64> {
    cw.values.column(j).into_owned()
}
