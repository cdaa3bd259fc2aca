//! Finite-sample inference: the snake space-filling curve, rank-spacing
//! statistics along it, their moment generating function in closed form,
//! exhaustive enumeration over group assignments, and permutation sampling.
//!
//! Under the null, the group-1 cells are a uniformly random n-subset of the
//! N occupied grid cells, so every statistic defined on subsets has an exact,
//! data-law-independent null distribution. Enumeration realizes it when
//! C(N,n) is affordable; permutation sampling approximates it otherwise; the
//! closed-form transform of the spacing statistic validates both.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::rank_map::{RankAssignment, RankGrid};
use crate::weights::{CenteredWeights, WeightFn};

/// Boustrophedon traversal of the a^p cell lattice: axis 0 is the slowest
/// coordinate, and each slab runs the lower-dimensional traversal forward
/// or reversed, alternating with the slab index, so consecutive cells
/// always share a face.
///
/// Positions are computed in closed form; the full cell list is never
/// materialized.
#[derive(Debug, Clone)]
pub struct SnakeCurve {
    p: usize,
    a: usize,
    len: u64,
}

/// Build the snake traversal of the p-dimensional lattice with a levels per
/// axis.
pub fn snake_curve(p: usize, a: usize) -> Result<SnakeCurve> {
    if p < 1 || a < 1 {
        return Err(Error::InvalidArgument(
            "snake curve needs p >= 1 and a >= 1".into(),
        ));
    }
    if a > u32::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "level count {a} exceeds the grid coordinate range"
        )));
    }
    let mut len: u64 = 1;
    for _ in 0..p {
        len = len
            .checked_mul(a as u64)
            .ok_or_else(|| Error::InvalidArgument(format!("cell count a^p overflows: a={a}, p={p}")))?;
    }
    Ok(SnakeCurve { p, a, len })
}

impl SnakeCurve {
    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn levels(&self) -> usize {
        self.a
    }

    /// Total number of cells a^p.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of a cell along the traversal, in 0..a^p.
    ///
    /// Inverts the digit recursion of `cell_at` from the innermost axis
    /// outward: an odd coordinate at axis j means the block below it was
    /// traversed reversed.
    pub fn position(&self, cell: &[u32]) -> u64 {
        debug_assert_eq!(cell.len(), self.p);
        let a = self.a as u64;
        let mut pos: u64 = 0;
        let mut block: u64 = 1;
        for &c in cell.iter().rev() {
            let d = c as u64;
            debug_assert!(d < a);
            let inner = if d % 2 == 1 { block - 1 - pos } else { pos };
            pos = d * block + inner;
            block *= a;
        }
        pos
    }

    /// Cell at a given traversal position (inverse of `position`).
    ///
    /// The coordinate at each axis is the leading base-a digit of the local
    /// index; when that digit is odd, the remaining sub-block is traversed
    /// in reverse, so the local index is reflected before descending.
    pub fn cell_at(&self, pos: u64) -> Vec<u32> {
        debug_assert!(pos < self.len);
        let a = self.a as u64;
        let mut block = self.len;
        let mut rem = pos;
        let mut cell = Vec::with_capacity(self.p);
        for _ in 0..self.p {
            block /= a;
            let d = rem / block;
            rem %= block;
            cell.push(d as u32);
            if d % 2 == 1 {
                rem = block - 1 - rem;
            }
        }
        cell
    }

    /// Center of the cell at a traversal position, in (0,1)^p.
    pub fn center(&self, pos: u64) -> Vec<f64> {
        self.cell_at(pos)
            .iter()
            .map(|&c| (c as f64 + 0.5) / self.a as f64)
            .collect()
    }

    /// Continuous parametrization c: [0,1] -> [0,1]^p through the cell
    /// centers: center i sits at parameter (i + 1/2)/a^p, segments between
    /// consecutive centers are linear, and the first and last segments
    /// extend half a cell beyond the end centers so the domain is all of
    /// [0,1]. For p = 1 this reduces to the identity map.
    pub fn point_at(&self, s: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!(
                "curve parameter must lie in [0,1], got {s}"
            )));
        }
        let m = self.len;
        if m == 1 {
            return Ok(self.center(0));
        }
        let x = s * m as f64 - 0.5;
        let i0 = (x.floor() as i64).clamp(0, m as i64 - 2) as u64;
        let frac = x - i0 as f64;
        let c0 = self.center(i0);
        let c1 = self.center(i0 + 1);
        Ok(c0
            .iter()
            .zip(&c1)
            .map(|(&u, &v)| u + frac * (v - u))
            .collect())
    }
}

/// Weight rows along the curve: w(c(j/n)) for j = 0..n. If an end
/// evaluation is non-finite (quantile-type weights diverge at the cube
/// boundary), that end's parameter is pulled inward to 1/(2n) from 0 or to
/// 1 - 1/(2n) from 1; each end is handled independently.
pub fn curve_weight_rows(w: &WeightFn, curve: &SnakeCurve, n: usize) -> Result<Vec<Vec<f64>>> {
    if n < 1 {
        return Err(Error::InvalidArgument("need n >= 1 spacing points".into()));
    }
    if w.input_dim() != curve.dim() {
        return Err(Error::InvalidArgument(format!(
            "weight expects p={}, curve has p={}",
            w.input_dim(),
            curve.dim()
        )));
    }
    let mut rows = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let u = j as f64 / n as f64;
        let point = curve.point_at(u)?;
        let mut row = w.eval(&point);
        if row.iter().any(|v| !v.is_finite()) {
            let inset = match j {
                0 => Some(1.0 / (2.0 * n as f64)),
                _ if j == n => Some(1.0 - 1.0 / (2.0 * n as f64)),
                _ => None,
            };
            if let Some(u2) = inset {
                let point2 = curve.point_at(u2)?;
                row = w.eval(&point2);
            }
        }
        if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                point: curve.point_at(u)?,
                component: bad,
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Spacing sum S = (1/n) sum_{j=0..n} rows[j] * (r_{j+1} - r_j) with the
/// boundary convention r_0 = 0, r_{n+1} = N + 1.
fn spacing_sum(rows: &[Vec<f64>], n_total: usize, ranks: &[u64]) -> Vec<f64> {
    let n = ranks.len();
    let m = rows[0].len();
    let mut s = vec![0.0f64; m];
    let mut prev = 0u64;
    for (j, row) in rows.iter().enumerate() {
        let next = if j < n { ranks[j] } else { n_total as u64 + 1 };
        let gap = (next - prev) as f64;
        for (sv, &rv) in s.iter_mut().zip(row) {
            *sv += rv * gap;
        }
        prev = next;
    }
    for sv in s.iter_mut() {
        *sv /= n as f64;
    }
    s
}

/// A rank-spacing statistic: the weighted spacing sum and the group-1 curve
/// positions as fractions of the curve length.
#[derive(Debug, Clone)]
pub struct SpacingStatistic {
    statistic: Vec<f64>,
    rho: Vec<f64>,
    weights: String,
}

impl SpacingStatistic {
    pub fn statistic(&self) -> &[f64] {
        &self.statistic
    }

    /// Normalized group-1 positions rho_j = r_j / N, strictly increasing in
    /// (0, 1].
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn weights(&self) -> &str {
        &self.weights
    }
}

/// Spacing statistic of the two-group sample along the snake curve.
///
/// Group-1 points are located by the traversal positions of their assigned
/// grid cells among the N occupied cells, giving integer ranks
/// r_1 < ... < r_n in 1..N; the statistic weights each spacing
/// r_{j+1} - r_j by the raw (uncentered) weight at curve parameter j/n.
pub fn spacing_stat(
    assign: &RankAssignment,
    w: &WeightFn,
    grid: &RankGrid,
    curve: &SnakeCurve,
    groups: &[usize],
) -> Result<SpacingStatistic> {
    if curve.dim() != grid.dim() || curve.levels() != grid.levels() {
        return Err(Error::InvalidArgument(format!(
            "curve lattice ({}, {}) does not match grid ({}, {})",
            curve.dim(),
            curve.levels(),
            grid.dim(),
            grid.levels()
        )));
    }
    if assign.grid_fingerprint() != grid.fingerprint() {
        return Err(Error::InvalidArgument(
            "rank assignment was computed on a different grid".into(),
        ));
    }
    let n_total = grid.n();
    if groups.len() != n_total {
        return Err(Error::InvalidArgument(format!(
            "groups cover {} points, grid has {n_total}",
            groups.len()
        )));
    }
    if groups.iter().any(|&g| g > 1) {
        return Err(Error::InvalidArgument(
            "spacing statistic needs exactly two groups labeled 0 and 1".into(),
        ));
    }
    let n1 = groups.iter().filter(|&&g| g == 1).count();
    if n1 == 0 || n1 == n_total {
        return Err(Error::InvalidArgument("both groups must be nonempty".into()));
    }

    // Rank every occupied cell by its traversal position.
    let mut positions: Vec<u64> = (0..n_total).map(|i| curve.position(grid.cell(i))).collect();
    let group1_positions: Vec<u64> = (0..n_total)
        .filter(|&i| groups[i] == 1)
        .map(|i| positions[assign.grid_index(i)])
        .collect();
    positions.sort_unstable();
    let mut ranks: Vec<u64> = group1_positions
        .iter()
        .map(|pos| (positions.partition_point(|&q| q < *pos) + 1) as u64)
        .collect();
    ranks.sort_unstable();

    let rows = curve_weight_rows(w, curve, n1)?;
    let statistic = spacing_sum(&rows, n_total, &ranks);
    let rho = ranks.iter().map(|&r| r as f64 / n_total as f64).collect();
    Ok(SpacingStatistic {
        statistic,
        rho,
        weights: w.label().to_string(),
    })
}

/// Sample sizes beyond which the closed-form transform loses accuracy to
/// cancellation faster than the extended-precision accumulation recovers it.
pub const TRANSFORM_VALIDATED_N: usize = 15;

/// Inputs of the closed-form spacing-statistic transform: group sizes and
/// the weight rows at the n+1 curve parameters j/n.
#[derive(Debug, Clone)]
pub struct LaplaceParams {
    k: usize,
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl LaplaceParams {
    pub fn new(k: usize, n: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if k < 1 || n < 1 {
            return Err(Error::InvalidArgument(
                "both group sizes must be at least 1".into(),
            ));
        }
        if rows.len() != n + 1 {
            return Err(Error::InvalidArgument(format!(
                "need {} weight rows (one per curve parameter j/n), got {}",
                n + 1,
                rows.len()
            )));
        }
        let m = rows[0].len();
        if m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidArgument(
                "weight rows must be nonempty and of equal length".into(),
            ));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("weight rows must be finite".into()));
        }
        Ok(LaplaceParams { k, n, rows })
    }

    /// Evaluate a weight along the curve and package the transform inputs.
    pub fn for_weight(w: &WeightFn, curve: &SnakeCurve, k: usize, n: usize) -> Result<Self> {
        let rows = curve_weight_rows(w, curve, n)?;
        LaplaceParams::new(k, n, rows)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn output_dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Advisory for sample sizes outside the validated precision range.
    pub fn precision_warning(&self) -> Option<String> {
        (self.n > TRANSFORM_VALIDATED_N).then(|| {
            format!(
                "spacing transform validated for n <= {TRANSFORM_VALIDATED_N}; n = {} may lose precision",
                self.n
            )
        })
    }

    /// Spacing statistic for one subset (0-based positions among the N
    /// occupied cells, sorted ascending).
    pub fn spacing_for_subset(&self, subset: &[usize]) -> Vec<f64> {
        debug_assert_eq!(subset.len(), self.n);
        let ranks: Vec<u64> = subset.iter().map(|&r| r as u64 + 1).collect();
        spacing_sum(&self.rows, self.k + self.n, &ranks)
    }
}

/// Moment generating function E exp(<s, S>) of the spacing statistic under
/// the uniform-subset null, in closed form.
///
/// With x_j = exp(t <s, w_j> / n), the expectation equals
/// (prod_j x_j) / C(N, n) * sum_j x_j^N / prod_{m != j} (x_j - x_m),
/// the partial-fraction form of the complete homogeneous symmetric
/// polynomial h_k(x_0..x_n). The alternating sum cancels catastrophically,
/// so it is accumulated in double-double precision. The scalarization `t`
/// multiplies s; matching the brute-force oracle fixes t = 1.
pub fn laplace_transform(params: &LaplaceParams, s: &[f64], t: f64) -> Result<f64> {
    let m = params.output_dim();
    if s.len() != m {
        return Err(Error::InvalidArgument(format!(
            "s has dimension {}, weight rows have {m}",
            s.len()
        )));
    }
    if !t.is_finite() || s.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "transform arguments must be finite".into(),
        ));
    }
    let n = params.n;
    let big_n = params.k + params.n;
    let v: Vec<f64> = params
        .rows
        .iter()
        .map(|row| t * row.iter().zip(s).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        return Ok(1.0);
    }
    let vmax = v.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    if vmax * big_n as f64 > 600.0 {
        return Err(Error::Numeric(format!(
            "transform exponent {:.1} overflows double precision",
            vmax * big_n as f64
        )));
    }
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            let scale = v[i].abs().max(v[j].abs());
            if (v[i] - v[j]).abs() <= 1e-12 * scale.max(1.0) {
                return Err(Error::DegenerateSpectrum(format!(
                    "weight projections {i} and {j} coincide ({:.6e} vs {:.6e})",
                    v[i], v[j]
                )));
            }
        }
    }

    let x: Vec<Dd> = v.iter().map(|&vi| Dd::from_f64(vi).exp()).collect();
    let mut product = Dd::ONE;
    for &xi in &x {
        product = product * xi;
    }
    let mut sum = Dd::ZERO;
    for j in 0..x.len() {
        let mut denom = Dd::ONE;
        for (mm, &xm) in x.iter().enumerate() {
            if mm != j {
                denom = denom * (x[j] - xm);
            }
        }
        sum = sum + x[j].powi(big_n as u64) / denom;
    }
    let c = binomial(big_n, n)? as f64;
    Ok((product * sum).to_f64() / c)
}

/// Binomial coefficient with overflow checking.
pub fn binomial(n: usize, k: usize) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or_else(|| Error::Numeric(format!("binomial({n}, {k}) overflows")))?;
        acc /= (i + 1) as u128;
    }
    Ok(acc)
}

/// Default ceiling on the number of subsets the enumeration will visit.
pub const DEFAULT_SUBSET_BUDGET: u64 = 2_000_000;

/// Absolute tolerance for tie detection when comparing statistic values.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// The exact null distribution of a scalar subset statistic: sorted values
/// with multiplicities out of C(N, n) equally likely subsets.
#[derive(Debug, Clone)]
pub struct DistributionTable {
    entries: Vec<(f64, u64)>,
    total: u64,
}

impl DistributionTable {
    fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let total = values.len() as u64;
        let mut entries: Vec<(f64, u64)> = Vec::new();
        for v in values {
            match entries.last_mut() {
                Some((last, count)) if *last == v => *count += 1,
                _ => entries.push((v, 1)),
            }
        }
        DistributionTable { entries, total }
    }

    /// Distinct values with multiplicities, ascending.
    pub fn entries(&self) -> &[(f64, u64)] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn min_value(&self) -> f64 {
        self.entries.first().map_or(f64::NAN, |e| e.0)
    }

    pub fn max_value(&self) -> f64 {
        self.entries.last().map_or(f64::NAN, |e| e.0)
    }

    /// Exact p-value: fraction of subsets with value >= observed, ties in.
    pub fn p_value_geq(&self, observed: f64) -> f64 {
        let cutoff = observed - TIE_TOLERANCE;
        let hits: u64 = self
            .entries
            .iter()
            .filter(|(v, _)| *v >= cutoff)
            .map(|(_, c)| c)
            .sum();
        hits as f64 / self.total as f64
    }

    /// Probability mass within tie tolerance of a value.
    pub fn probability_of(&self, value: f64) -> f64 {
        let hits: u64 = self
            .entries
            .iter()
            .filter(|(v, _)| (*v - value).abs() <= TIE_TOLERANCE)
            .map(|(_, c)| c)
            .sum();
        hits as f64 / self.total as f64
    }

    /// Expectation of f under the table.
    pub fn mean_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.entries
            .iter()
            .map(|&(v, c)| f(v) * c as f64)
            .sum::<f64>()
            / self.total as f64
    }

    /// Write the table as CSV with a `value,count` header.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["value", "count"]).map_err(csv_io)?;
        for &(v, c) in &self.entries {
            w.write_record([format!("{v}"), format!("{c}")])
                .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Numeric(format!("csv write failed: {e}"))
}

/// Visit every n-subset of 0..n_total in lexicographic order.
fn for_each_subset(n_total: usize, n: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        visit(&idx);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n_total - n + i {
                break;
            }
        }
        if idx[i] >= n_total - n + i {
            return;
        }
        idx[i] += 1;
        for j in i + 1..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact null distribution of a subset statistic: the statistic is applied
/// to every n-subset of the N occupied-cell positions (passed as sorted
/// 0-based indices), each carrying probability 1/C(N, n).
pub fn exact_null_distribution(
    stat: impl Fn(&[usize]) -> f64,
    n_total: usize,
    n: usize,
    budget: u64,
) -> Result<DistributionTable> {
    if n == 0 || n >= n_total {
        return Err(Error::InvalidArgument(format!(
            "need 0 < n < N for subset enumeration, got n={n}, N={n_total}"
        )));
    }
    // A count past u128 is past any u64 budget a fortiori; saturate so the
    // caller sees the budget violation, not an internal overflow.
    let required = binomial(n_total, n).unwrap_or(u128::MAX);
    if required > budget as u128 {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let mut values = Vec::with_capacity(required as usize);
    for_each_subset(n_total, n, |subset| values.push(stat(subset)));
    Ok(DistributionTable::from_values(values))
}

/// Monte Carlo p-value over B uniformly drawn n-subsets:
/// (1 + #{draws with stat >= observed}) / (B + 1).
///
/// Each draw uses an RNG stream indexed by the draw number, so the result
/// is reproducible for a given seed regardless of thread scheduling.
pub fn permutation_pvalue(
    stat: impl Fn(&[usize]) -> f64 + Sync,
    observed: f64,
    n_total: usize,
    n: usize,
    b: usize,
    seed: u64,
) -> Result<f64> {
    if n == 0 || n >= n_total {
        return Err(Error::InvalidArgument(format!(
            "need 0 < n < N for permutation sampling, got n={n}, N={n_total}"
        )));
    }
    if b < 1 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let cutoff = observed - TIE_TOLERANCE;
    let hits: u64 = (0..b as u64)
        .into_par_iter()
        .map(|draw| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(draw + 1);
            let mut pool: Vec<usize> = (0..n_total).collect();
            for i in 0..n {
                let j = rng.random_range(i..n_total);
                pool.swap(i, j);
            }
            let mut subset: Vec<usize> = pool[..n].to_vec();
            subset.sort_unstable();
            u64::from(stat(&subset) >= cutoff)
        })
        .sum();
    Ok((1 + hits) as f64 / (b + 1) as f64)
}

/// Two-sample statistic for a hypothetical group-1 occupying the given
/// sorted cell subset, with the identical summation order as
/// `teststat::two_sample_t`, so enumerated values and the observed value
/// are bit-compatible.
pub fn subset_two_sample_t(cw: &CenteredWeights, subset: &[usize]) -> Vec<f64> {
    let n_total = cw.n();
    let m = cw.output_dim();
    let mut in_subset = vec![false; n_total];
    for &c in subset {
        in_subset[c] = true;
    }
    let scale = 0.5 / (n_total as f64).sqrt();
    let mut t = vec![0.0f64; m];
    for (j, tv) in t.iter_mut().enumerate() {
        let mut s1 = 0.0;
        for &c in subset {
            s1 += cw.values()[(c, j)];
        }
        let mut s0 = 0.0;
        for (c, &inside) in in_subset.iter().enumerate() {
            if !inside {
                s0 += cw.values()[(c, j)];
            }
        }
        *tv = (s1 - s0) * scale;
    }
    t
}
