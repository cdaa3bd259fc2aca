//! Linear rank statistics, their exact permutation covariance, the
//! chi-square quadratic form, the K-sample block transform, and asymptotic
//! p-values.
//!
//! All covariances carry the finite-population factor N/(N-1), so the
//! asymptotic quadratic form matches the exact label-permutation covariance
//! at every sample size, not just in the limit.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rank_map::RankAssignment;
use crate::weights::{CenteredWeights, GramMatrix};

/// How a p-value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Asymptotic,
    Exact,
    Permutation,
}

/// A completed test: statistic vector, quadratic form, and p-value, plus the
/// run configuration needed to reproduce it. Serializes in this field order.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TestOutcome {
    pub statistic: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: f64,
    pub df: usize,
    pub p_value: f64,
    pub method: Method,
    pub weights: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub group_sizes: Vec<usize>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl TestOutcome {
    /// Group-size fractions alpha_k = n_k / N.
    pub fn alpha_vector(&self) -> Vec<f64> {
        self.group_sizes
            .iter()
            .map(|&c| c as f64 / self.n as f64)
            .collect()
    }
}

fn check_alignment(
    assign: &RankAssignment,
    cw: &CenteredWeights,
    groups: &[usize],
) -> Result<usize> {
    let n = groups.len();
    if assign.perm().len() != n {
        return Err(Error::InvalidArgument(format!(
            "assignment covers {} points, groups cover {n}",
            assign.perm().len()
        )));
    }
    if cw.n() != n {
        return Err(Error::InvalidArgument(format!(
            "weights evaluated on {} grid points, sample has {n}",
            cw.n()
        )));
    }
    if assign.grid_fingerprint() != cw.grid_fingerprint() {
        return Err(Error::InvalidArgument(
            "rank assignment and centered weights use different grids".into(),
        ));
    }
    Ok(n)
}

/// Two-sample statistic T = (1/sqrt(N)) * sum over the second group (label 1)
/// of the centered weight rows at each point's assigned grid cell.
///
/// Computed in the antisymmetrized form (S1 - S0)/2 with each group's cells
/// summed in sorted order. That equals the group-1 sum exactly in real
/// arithmetic (centering makes S0 = -S1) and makes two finite-precision
/// guarantees hold bit for bit: swapping the labels negates T, and T depends
/// only on which grid cells each group occupies, never on the data order
/// that produced the assignment.
pub fn two_sample_t(
    assign: &RankAssignment,
    cw: &CenteredWeights,
    groups: &[usize],
) -> Result<Vec<f64>> {
    let n = check_alignment(assign, cw, groups)?;
    if groups.iter().any(|&g| g > 1) {
        return Err(Error::InvalidArgument(
            "two_sample_t needs exactly two groups labeled 0 and 1".into(),
        ));
    }
    let n1 = groups.iter().filter(|&&g| g == 1).count();
    if n1 == 0 || n1 == n {
        return Err(Error::InvalidArgument("both groups must be nonempty".into()));
    }
    let m = cw.output_dim();
    let mut cells0 = Vec::with_capacity(n - n1);
    let mut cells1 = Vec::with_capacity(n1);
    for (i, &g) in groups.iter().enumerate() {
        if g == 1 {
            cells1.push(assign.grid_index(i));
        } else {
            cells0.push(assign.grid_index(i));
        }
    }
    cells0.sort_unstable();
    cells1.sort_unstable();
    let scale = 0.5 / (n as f64).sqrt();
    let mut t = vec![0.0f64; m];
    for (j, tj) in t.iter_mut().enumerate() {
        let mut s1 = 0.0;
        for &c in &cells1 {
            s1 += cw.values()[(c, j)];
        }
        let mut s0 = 0.0;
        for &c in &cells0 {
            s0 += cw.values()[(c, j)];
        }
        *tj = (s1 - s0) * scale;
    }
    Ok(t)
}

/// Exact covariance of the two-sample statistic under random labeling:
/// alpha(1-alpha) * (N/(N-1)) * H, with alpha = k/N and H the empirical
/// Gram matrix of the centered weights.
pub fn null_covariance(cw: &CenteredWeights, k: usize, n: usize) -> Result<GramMatrix> {
    let total = k + n;
    if total != cw.n() {
        return Err(Error::InvalidArgument(format!(
            "group sizes {k}+{n} do not add up to the grid size {}",
            cw.n()
        )));
    }
    if total < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    let alpha = k as f64 / total as f64;
    let correction = total as f64 / (total as f64 - 1.0);
    let h = crate::weights::gram(cw, cw)?;
    Ok(h.scaled(alpha * (1.0 - alpha) * correction))
}

/// Relative eigenvalue cutoff defining the numerical rank of a covariance.
pub const COVARIANCE_RANK_CUTOFF: f64 = 1e-10;

/// A covariance prepared for repeated quadratic-form evaluation: the
/// eigendecomposition is taken once, directions below the rank cutoff are
/// dropped, and `apply` computes T' Sigma^+ T deterministically.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    dim: usize,
    df: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl QuadraticForm {
    pub fn new(sigma: &GramMatrix) -> Result<QuadraticForm> {
        let d = sigma.matrix().nrows();
        if d == 0 || sigma.matrix().ncols() != d {
            return Err(Error::InvalidArgument(format!(
                "covariance must be square and nonempty, got {}x{}",
                d,
                sigma.matrix().ncols()
            )));
        }
        let eig = nalgebra::SymmetricEigen::new(sigma.matrix().clone());
        let lam_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let mut eigenvalues = Vec::new();
        let mut cols = Vec::new();
        if lam_max > 0.0 {
            for (i, &lam) in eig.eigenvalues.iter().enumerate() {
                if lam > COVARIANCE_RANK_CUTOFF * lam_max {
                    eigenvalues.push(lam);
                    cols.push(eig.eigenvectors.column(i).into_owned());
                }
            }
        }
        let df = eigenvalues.len();
        let eigenvectors = if df == 0 {
            DMatrix::zeros(d, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        Ok(QuadraticForm {
            dim: d,
            df,
            eigenvalues,
            eigenvectors,
        })
    }

    /// Numerical rank of the covariance: degrees of freedom of the form.
    pub fn df(&self) -> usize {
        self.df
    }

    /// Q = T' Sigma^+ T restricted to the retained eigendirections.
    pub fn apply(&self, t: &[f64]) -> f64 {
        debug_assert_eq!(t.len(), self.dim);
        let mut q = 0.0;
        for (i, &lam) in self.eigenvalues.iter().enumerate() {
            let mut y = 0.0;
            for (r, &tr) in t.iter().enumerate() {
                y += self.eigenvectors[(r, i)] * tr;
            }
            q += y * y / lam;
        }
        q.max(0.0)
    }
}

/// Quadratic form Q = T' Sigma^+ T through the eigen-pseudoinverse, with
/// df = numerical rank of Sigma.
pub fn quadratic_stat(t: &[f64], sigma: &GramMatrix) -> Result<(f64, usize)> {
    let d = t.len();
    if sigma.matrix().nrows() != d || sigma.matrix().ncols() != d {
        return Err(Error::InvalidArgument(format!(
            "statistic has dimension {d}, covariance is {}x{}",
            sigma.matrix().nrows(),
            sigma.matrix().ncols()
        )));
    }
    let form = QuadraticForm::new(sigma)?;
    Ok((form.apply(t), form.df()))
}

/// Orthonormal basis of the hyperplane orthogonal to the all-ones vector in
/// R^k (Helmert construction), as a k x (k-1) matrix.
pub fn helmert_basis(k: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(k, k - 1);
    for j in 1..k {
        let norm = 1.0 / ((j * (j + 1)) as f64).sqrt();
        for i in 0..j {
            b[(i, j - 1)] = norm;
        }
        b[(j, j - 1)] = -(j as f64) * norm;
    }
    b
}

/// K-sample statistic and covariance.
///
/// Per-group blocks are (1/sqrt(n_k)) times the group's centered-weight sum;
/// those scaled blocks are exactly orthogonal to the sqrt(alpha) direction,
/// and contracting with the Helmert basis gives T in R^{(K-1)m} with
/// covariance (B'(I - sqrt(alpha) sqrt(alpha)') B  (x)  H) * N/(N-1).
pub fn k_sample_t(
    assign: &RankAssignment,
    cw: &CenteredWeights,
    groups: &[usize],
) -> Result<(Vec<f64>, GramMatrix)> {
    let n = check_alignment(assign, cw, groups)?;
    let k = groups.iter().copied().max().map_or(0, |g| g + 1);
    if k < 2 {
        return Err(Error::InvalidArgument("need at least two groups".into()));
    }
    let mut counts = vec![0usize; k];
    for &g in groups {
        counts[g] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::InvalidArgument("every group must be nonempty".into()));
    }
    let blocks = scaled_blocks(assign, cw, groups, k, &counts);
    let m = cw.output_dim();

    let b = helmert_basis(k);
    let contracted = b.tr_mul(&blocks); // (k-1) x m
    // Block r (basis direction) occupies t[r*m .. (r+1)*m].
    let mut t = Vec::with_capacity((k - 1) * m);
    for r in 0..k - 1 {
        for j in 0..m {
            t.push(contracted[(r, j)]);
        }
    }

    let sqrt_alpha =
        nalgebra::DVector::from_iterator(k, counts.iter().map(|&c| (c as f64 / n as f64).sqrt()));
    let proj = DMatrix::identity(k, k) - &sqrt_alpha * sqrt_alpha.transpose();
    let outer = b.tr_mul(&(proj * &b)); // (k-1) x (k-1)
    let h = crate::weights::gram(cw, cw)?;
    let correction = n as f64 / (n as f64 - 1.0);

    let dim = (k - 1) * m;
    let mut sigma = DMatrix::zeros(dim, dim);
    for r in 0..k - 1 {
        for s in 0..k - 1 {
            for a in 0..m {
                for bcol in 0..m {
                    sigma[(r * m + a, s * m + bcol)] =
                        outer[(r, s)] * h.matrix()[(a, bcol)] * correction;
                }
            }
        }
    }
    Ok((t, GramMatrix::from_matrix(sigma)))
}

/// Per-group scaled sums with each group's cells visited in sorted order,
/// making the result a function of the occupied-cell partition alone.
fn scaled_blocks(
    assign: &RankAssignment,
    cw: &CenteredWeights,
    groups: &[usize],
    k: usize,
    counts: &[usize],
) -> DMatrix<f64> {
    let m = cw.output_dim();
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &g) in groups.iter().enumerate() {
        cells[g].push(assign.grid_index(i));
    }
    let mut blocks = DMatrix::<f64>::zeros(k, m);
    for g in 0..k {
        cells[g].sort_unstable();
        let s = 1.0 / (counts[g] as f64).sqrt();
        for j in 0..m {
            let mut sum = 0.0;
            for &c in &cells[g] {
                sum += cw.values()[(c, j)];
            }
            blocks[(g, j)] = sum * s;
        }
    }
    blocks
}

/// Raw scaled per-group block sums (1/sqrt(n_k) times the group weight sum),
/// exposed for diagnostics and the block-orthogonality identity.
pub fn group_blocks(
    assign: &RankAssignment,
    cw: &CenteredWeights,
    groups: &[usize],
) -> Result<DMatrix<f64>> {
    check_alignment(assign, cw, groups)?;
    let k = groups.iter().copied().max().map_or(0, |g| g + 1);
    let mut counts = vec![0usize; k];
    for &g in groups {
        counts[g] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::InvalidArgument("every group must be nonempty".into()));
    }
    Ok(scaled_blocks(assign, cw, groups, k, &counts))
}

/// Upper tail of the chi-square law with `df` degrees of freedom, through
/// the regularized incomplete gamma function.
pub fn asymptotic_pvalue(q: f64, df: usize) -> Result<f64> {
    if df < 1 {
        return Err(Error::InvalidArgument(
            "chi-square needs at least 1 degree of freedom".into(),
        ));
    }
    if q.is_nan() || q < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "quadratic statistic must be nonnegative, got {q}"
        )));
    }
    if q == 0.0 {
        return Ok(1.0);
    }
    Ok(statrs::function::gamma::gamma_ur(df as f64 / 2.0, q / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank_map::{assign_ranks, build_grid, SampleSet};
    use crate::weights::{builtin, center_on_grid, WeightFn};
    use approx::assert_relative_eq;

    fn ladder_sample(groups: Vec<usize>) -> (SampleSet, crate::rank_map::RankGrid) {
        // Strictly increasing univariate data: point i lands in cell i.
        let n = groups.len();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i + 1) as f64 / 10.0]).collect();
        let s = SampleSet::new(&rows, groups).unwrap();
        let grid = build_grid(n, 1).unwrap();
        (s, grid)
    }

    #[test]
    fn two_sample_frozen_value() {
        let (s, grid) = ladder_sample(vec![0, 0, 1, 1]);
        let a = assign_ranks(&s, &grid, 1).unwrap();
        let cw = center_on_grid(&builtin("mann_whitney", 1).unwrap(), &grid).unwrap();
        let t = two_sample_t(&a, &cw, s.groups()).unwrap();
        assert_relative_eq!(t[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn constant_weight_gives_zero_statistic() {
        let (s, grid) = ladder_sample(vec![0, 1, 0, 1, 0]);
        let a = assign_ranks(&s, &grid, 1).unwrap();
        let c = WeightFn::componentwise("const", 1, |_| 9.0);
        let cw = center_on_grid(&c, &grid).unwrap();
        let t = two_sample_t(&a, &cw, s.groups()).unwrap();
        assert_eq!(t[0], 0.0);
    }

    #[test]
    fn swapping_labels_negates_t() {
        let (s, grid) = ladder_sample(vec![0, 1, 1, 0, 1, 0]);
        let a = assign_ranks(&s, &grid, 3).unwrap();
        let cw = center_on_grid(&builtin("van_der_waerden", 1).unwrap(), &grid).unwrap();
        let t = two_sample_t(&a, &cw, s.groups()).unwrap();
        let flipped: Vec<usize> = s.groups().iter().map(|&g| 1 - g).collect();
        let t2 = two_sample_t(&a, &cw, &flipped).unwrap();
        assert_eq!(t[0], -t2[0]);
    }

    #[test]
    fn monotone_transform_leaves_t_unchanged() {
        let rows: Vec<Vec<f64>> = [0.3, -1.2, 0.8, 2.4, -0.6, 1.1]
            .iter()
            .map(|&v| vec![v])
            .collect();
        let groups = vec![0, 1, 0, 1, 1, 0];
        let s1 = SampleSet::new(&rows, groups.clone()).unwrap();
        let warped: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0].exp()]).collect();
        let s2 = SampleSet::new(&warped, groups.clone()).unwrap();
        let grid = build_grid(6, 1).unwrap();
        let cw = center_on_grid(&builtin("mann_whitney", 1).unwrap(), &grid).unwrap();
        let a1 = assign_ranks(&s1, &grid, 7).unwrap();
        let a2 = assign_ranks(&s2, &grid, 7).unwrap();
        let t1 = two_sample_t(&a1, &cw, &groups).unwrap();
        let t2 = two_sample_t(&a2, &cw, &groups).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn covariance_frozen_value() {
        let grid = build_grid(4, 1).unwrap();
        let cw = center_on_grid(&builtin("mann_whitney", 1).unwrap(), &grid).unwrap();
        let sigma = null_covariance(&cw, 2, 2).unwrap();
        assert_relative_eq!(sigma.matrix()[(0, 0)], 5.0 / 192.0, epsilon = 1e-15);
    }

    #[test]
    fn covariance_vanishes_at_degenerate_split() {
        let grid = build_grid(5, 1).unwrap();
        let cw = center_on_grid(&builtin("mann_whitney", 1).unwrap(), &grid).unwrap();
        let s0 = null_covariance(&cw, 0, 5).unwrap();
        let s1 = null_covariance(&cw, 5, 0).unwrap();
        assert_eq!(s0.matrix()[(0, 0)], 0.0);
        assert_eq!(s1.matrix()[(0, 0)], 0.0);
    }

    #[test]
    fn covariance_matches_subset_enumeration() {
        // Population variance of T over all 6 equal-split labelings of N=4.
        let grid = build_grid(4, 1).unwrap();
        let cw = center_on_grid(&builtin("mann_whitney", 1).unwrap(), &grid).unwrap();
        let vals: Vec<f64> = (0..4).map(|i| cw.values()[(i, 0)]).collect();
        let mut ts = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                ts.push((vals[i] + vals[j]) / 2.0);
            }
        }
        let mean: f64 = ts.iter().sum::<f64>() / ts.len() as f64;
        let var: f64 = ts.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / ts.len() as f64;
        let sigma = null_covariance(&cw, 2, 2).unwrap();
        assert_relative_eq!(var, sigma.matrix()[(0, 0)], epsilon = 1e-15);
    }

    #[test]
    fn quadratic_frozen_value() {
        let grid = build_grid(4, 1).unwrap();
        let cw = center_on_grid(&builtin("mann_whitney", 1).unwrap(), &grid).unwrap();
        let sigma = null_covariance(&cw, 2, 2).unwrap();
        let (q, df) = quadratic_stat(&[0.25], &sigma).unwrap();
        assert_relative_eq!(q, 2.4, epsilon = 1e-12);
        assert_eq!(df, 1);
    }

    #[test]
    fn zero_statistic_gives_zero_q() {
        let sigma = GramMatrix::from_matrix(DMatrix::from_element(2, 2, 0.0) + DMatrix::identity(2, 2));
        let (q, df) = quadratic_stat(&[0.0, 0.0], &sigma).unwrap();
        assert_eq!(q, 0.0);
        assert_eq!(df, 2);
    }

    #[test]
    fn quadratic_is_affine_invariant() {
        let grid = build_grid(12, 1).unwrap();
        let w = builtin("van_der_waerden", 1).unwrap();
        let scaled = WeightFn::componentwise("scaled", 1, |x| {
            3.7 * crate::weights::gaussian_quantile(x).unwrap()
        });
        let (s, _) = ladder_sample(vec![0, 1, 0, 0, 1, 1, 0, 1, 1, 0, 0, 1]);
        let a = assign_ranks(&s, &grid, 2).unwrap();
        let cw1 = center_on_grid(&w, &grid).unwrap();
        let cw2 = center_on_grid(&scaled, &grid).unwrap();
        let t1 = two_sample_t(&a, &cw1, s.groups()).unwrap();
        let t2 = two_sample_t(&a, &cw2, s.groups()).unwrap();
        let (q1, d1) = quadratic_stat(&t1, &null_covariance(&cw1, 6, 6).unwrap()).unwrap();
        let (q2, d2) = quadratic_stat(&t2, &null_covariance(&cw2, 6, 6).unwrap()).unwrap();
        assert_eq!(d1, d2);
        assert_relative_eq!(q1, q2, max_relative = 1e-10);
    }

    #[test]
    fn rank_deficient_covariance_reports_reduced_df() {
        // Duplicated weight component: covariance has rank 1 in dimension 2.
        let grid = build_grid(10, 1).unwrap();
        let w = builtin("mann_whitney", 1).unwrap();
        let dup = crate::weights::stack(&[w.clone(), w]).unwrap();
        let cw = center_on_grid(&dup, &grid).unwrap();
        let sigma = null_covariance(&cw, 5, 5).unwrap();
        let (_, df) = quadratic_stat(&[0.1, 0.1], &sigma).unwrap();
        assert_eq!(df, 1);
    }

    #[test]
    fn helmert_basis_is_orthonormal_and_centered() {
        for k in 2..7 {
            let b = helmert_basis(k);
            let btb = b.tr_mul(&b);
            for i in 0..k - 1 {
                for j in 0..k - 1 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_relative_eq!(btb[(i, j)], want, epsilon = 1e-14);
                }
            }
            for j in 0..k - 1 {
                let colsum: f64 = (0..k).map(|i| b[(i, j)]).sum();
                assert!(colsum.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn k_sample_frozen_three_group_example() {
        let (s, grid) = ladder_sample(vec![0, 1, 2, 0, 1, 2, 0, 1, 2]);
        let a = assign_ranks(&s, &grid, 1).unwrap();
        let cw = center_on_grid(&builtin("mann_whitney", 1).unwrap(), &grid).unwrap();
        let (t, sigma) = k_sample_t(&a, &cw, s.groups()).unwrap();
        // Group sums of (cell-4)/9 are -1/3, 0, 1/3; scaled by 1/sqrt(3) and
        // contracted with the Helmert basis.
        let e1 = -1.0 / (3.0 * 6.0f64.sqrt());
        let e2 = -1.0 / (3.0 * 2.0f64.sqrt());
        assert_relative_eq!(t[0], e1, epsilon = 1e-14);
        assert_relative_eq!(t[1], e2, epsilon = 1e-14);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 5.0 / 54.0 } else { 0.0 };
                assert_relative_eq!(sigma.matrix()[(i, j)], want, epsilon = 1e-14);
            }
        }
        let (q, df) = quadratic_stat(&t, &sigma).unwrap();
        assert_relative_eq!(q, 0.8, epsilon = 1e-12);
        assert_eq!(df, 2);
    }

    #[test]
    fn k_sample_reduces_to_two_sample() {
        let (s, grid) = ladder_sample(vec![0, 1, 1, 0, 1, 0, 0, 1]);
        let a = assign_ranks(&s, &grid, 9).unwrap();
        let cw = center_on_grid(&builtin("van_der_waerden", 1).unwrap(), &grid).unwrap();
        let t2 = two_sample_t(&a, &cw, s.groups()).unwrap();
        let sigma2 = null_covariance(&cw, 4, 4).unwrap();
        let (q2, d2) = quadratic_stat(&t2, &sigma2).unwrap();
        let (tk, sigmak) = k_sample_t(&a, &cw, s.groups()).unwrap();
        let (qk, dk) = quadratic_stat(&tk, &sigmak).unwrap();
        assert_eq!(d2, dk);
        assert_relative_eq!(q2, qk, max_relative = 1e-10);
    }

    #[test]
    fn scaled_blocks_are_orthogonal_to_sqrt_alpha() {
        let (s, grid) = ladder_sample(vec![0, 1, 2, 2, 1, 0, 1, 2, 0, 1]);
        let a = assign_ranks(&s, &grid, 4).unwrap();
        let cw = center_on_grid(&builtin("mood", 1).unwrap(), &grid).unwrap();
        let blocks = group_blocks(&a, &cw, s.groups()).unwrap();
        let n = s.n() as f64;
        for j in 0..cw.output_dim() {
            let mut dot = 0.0;
            for g in 0..s.k_groups() {
                let alpha = s.counts()[g] as f64 / n;
                dot += alpha.sqrt() * blocks[(g, j)];
            }
            assert!(dot.abs() < 1e-14, "component {j}: {dot}");
        }
    }

    #[test]
    fn enumerated_null_q_is_distribution_free() {
        // Same labels, two very different data laws: the multisets of Q over
        // every equal-split labeling must agree bit for bit.
        let gauss = [0.31, -1.2, 0.84, 2.43, -0.66, 1.17, -0.2, 0.4];
        let expo = [0.11, 2.2, 0.84, 0.05, 3.1, 0.9, 1.4, 0.27];
        let qs = |data: &[f64]| -> Vec<u64> {
            let rows: Vec<Vec<f64>> = data.iter().map(|&v| vec![v]).collect();
            let s = SampleSet::new(&rows, vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
            let grid = build_grid(8, 1).unwrap();
            let a = assign_ranks(&s, &grid, 5).unwrap();
            let cw = center_on_grid(&builtin("van_der_waerden", 1).unwrap(), &grid).unwrap();
            let sigma = null_covariance(&cw, 4, 4).unwrap();
            let mut out = Vec::new();
            for mask in 0u32..256 {
                if mask.count_ones() != 4 {
                    continue;
                }
                let groups: Vec<usize> = (0..8).map(|i| ((mask >> i) & 1) as usize).collect();
                let t = two_sample_t(&a, &cw, &groups).unwrap();
                let (q, _) = quadratic_stat(&t, &sigma).unwrap();
                out.push(q.to_bits());
            }
            out.sort_unstable();
            out
        };
        assert_eq!(qs(&gauss), qs(&expo));
    }

    #[test]
    fn pvalue_frozen_quantiles() {
        assert_eq!(asymptotic_pvalue(0.0, 1).unwrap(), 1.0);
        assert!((asymptotic_pvalue(3.841459, 1).unwrap() - 0.05).abs() < 1e-6);
        assert!((asymptotic_pvalue(5.991465, 2).unwrap() - 0.05).abs() < 1e-6);
        assert!(asymptotic_pvalue(1.0, 0).is_err());
        assert!(asymptotic_pvalue(-0.5, 1).is_err());
        assert!(asymptotic_pvalue(f64::NAN, 1).is_err());
    }

    #[test]
    fn outcome_serializes_in_contract_order() {
        let out = TestOutcome {
            statistic: vec![0.25],
            q: 2.4,
            df: 1,
            p_value: 0.121,
            method: Method::Asymptotic,
            weights: "mann_whitney".into(),
            n: 4,
            group_sizes: vec![2, 2],
            seed: 7,
            warning: None,
        };
        let json = serde_json::to_string(&out).unwrap();
        let order = [
            "\"statistic\"",
            "\"Q\"",
            "\"df\"",
            "\"p_value\"",
            "\"method\"",
            "\"weights\"",
            "\"N\"",
            "\"group_sizes\"",
            "\"seed\"",
        ];
        let mut last = 0;
        for key in order {
            let pos = json.find(key).unwrap_or_else(|| panic!("missing {key}"));
            assert!(pos >= last, "{key} out of order in {json}");
            last = pos;
        }
        assert!(!json.contains("warning"));
        assert!(json.contains("\"method\":\"asymptotic\""));
        assert_eq!(out.alpha_vector(), vec![0.5, 0.5]);
    }
}
