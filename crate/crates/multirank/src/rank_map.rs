//! Hierarchical conditional rank map.
//!
//! Pooled observations in R^p are sent bijectively onto a reference grid in
//! (0,1)^p by sorting along one axis at a time: layer 1 sorts all N points by
//! coordinate 1 and splits them into near-equal buckets, layer 2 sorts each
//! bucket by coordinate 2 and splits again, and so on. After p layers every
//! observation sits alone in a nested bucket, which fixes its grid point. The
//! whole map costs O(pN log N).
//!
//! Empty buckets are never materialized, so the map stays cheap even when the
//! full product lattice a^p is astronomically larger than N.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

use crate::error::{Error, Result};

/// Pooled multivariate observations with group labels.
///
/// Holds the union of all groups' data: N rows in R^p, a group id in 0..K for
/// each row, and the per-group counts.
#[derive(Debug, Clone)]
pub struct SampleSet {
    data: Vec<f64>, // row-major N x p
    n: usize,
    p: usize,
    groups: Vec<usize>,
    counts: Vec<usize>,
}

impl SampleSet {
    /// Build from one row per observation plus per-observation group ids.
    ///
    /// Group ids must cover 0..K with every group nonempty; all entries must
    /// be finite.
    pub fn new(rows: &[Vec<f64>], groups: Vec<usize>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("empty sample".into()));
        }
        let p = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} coordinates, expected {p}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(data, p, groups)
    }

    /// Build from per-group row collections; groups are labeled in order.
    pub fn from_groups(groups: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (g, block) in groups.iter().enumerate() {
            for r in block {
                rows.push(r.clone());
                labels.push(g);
            }
        }
        Self::new(&rows, labels)
    }

    /// Build from a row-major flat buffer (fast path for simulation loops).
    pub fn from_flat(data: Vec<f64>, p: usize, groups: Vec<usize>) -> Result<Self> {
        if p < 1 {
            return Err(Error::InvalidArgument("dimension p must be >= 1".into()));
        }
        if data.len() != groups.len() * p {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match {} observations x {} dims",
                data.len(),
                groups.len(),
                p
            )));
        }
        let n = groups.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty sample".into()));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at row {}, column {}",
                bad / p,
                bad % p
            )));
        }
        let k = groups.iter().max().unwrap() + 1;
        let mut counts = vec![0usize; k];
        for &g in &groups {
            counts[g] += 1;
        }
        if counts.contains(&0) {
            return Err(Error::InvalidArgument(
                "group ids must cover 0..K with every group nonempty".into(),
            ));
        }
        Ok(SampleSet {
            data,
            n,
            p,
            groups,
            counts,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn k_groups(&self) -> usize {
        self.counts.len()
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }
}

/// Reference grid: N points of the lattice {(b + 1/2)/a}^p, kept in nested
/// bucket order, together with the per-layer split schedule.
#[derive(Debug, Clone)]
pub struct RankGrid {
    p: usize,
    n: usize,
    levels: usize,
    points: Vec<f64>, // row-major N x p
    cells: Vec<u32>,  // row-major N x p, integer level per axis
    /// layer_plan[j] lists child-bucket sizes at layer j+1: `levels` entries
    /// per occupied parent, zeros included, parents in nested order.
    layer_plan: Vec<Vec<usize>>,
}

impl RankGrid {
    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Per-axis level count a = ceil(N^{1/p}).
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.p..(i + 1) * self.p]
    }

    /// Integer lattice cell of grid point i (coordinates in 0..a).
    pub fn cell(&self, i: usize) -> &[u32] {
        &self.cells[i * self.p..(i + 1) * self.p]
    }

    pub fn layer_plan(&self) -> &[Vec<usize>] {
        &self.layer_plan
    }

    /// Stable fingerprint used to ensure weight matrices and assignments were
    /// built against the same grid.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.n.hash(&mut h);
        self.p.hash(&mut h);
        self.levels.hash(&mut h);
        for c in &self.cells {
            c.hash(&mut h);
        }
        h.finish()
    }
}

/// Smallest a with a^p >= n, computed without overflow.
fn min_levels(n: usize, p: usize) -> usize {
    let covers = |a: usize| -> bool {
        let mut acc: u128 = 1;
        for _ in 0..p {
            acc = acc.saturating_mul(a as u128);
            if acc >= n as u128 {
                return true;
            }
        }
        acc >= n as u128
    };
    let mut a = (n as f64).powf(1.0 / p as f64).ceil() as usize;
    a = a.max(1);
    while !covers(a) {
        a += 1;
    }
    while a > 1 && covers(a - 1) {
        a -= 1;
    }
    a
}

/// Split a bucket of g points into a child buckets as evenly as possible,
/// larger children first.
fn balanced_split(g: usize, a: usize) -> impl Iterator<Item = usize> {
    let q = g / a;
    let r = g % a;
    (0..a).map(move |i| if i < r { q + 1 } else { q })
}

/// Build the reference grid for N points in dimension p.
///
/// The level count is a = ceil(N^{1/p}); each layer splits every occupied
/// bucket into a children of sizes floor(g/a) or ceil(g/a), the larger ones
/// at the lowest child indices. Grid coordinates are (b + 1/2)/a per axis, so
/// every point lies strictly inside (0,1)^p and boundary-singular weights
/// stay finite.
pub fn build_grid(n: usize, p: usize) -> Result<RankGrid> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("N must be >= 2, got {n}")));
    }
    if p < 1 {
        return Err(Error::InvalidArgument("p must be >= 1".into()));
    }
    let a = min_levels(n, p);

    // Occupied buckets only: counts plus the partial cell path of each.
    let mut counts: Vec<usize> = vec![n];
    let mut paths: Vec<u32> = vec![]; // row-major: counts.len() rows of layer-index width
    let mut layer_plan = Vec::with_capacity(p);

    for layer in 0..p {
        let mut plan = Vec::with_capacity(counts.len() * a);
        let mut next_counts = Vec::with_capacity(counts.len() * a.min(n));
        let mut next_paths: Vec<u32> = Vec::with_capacity((counts.len() * a.min(n)) * (layer + 1));
        for (parent, &g) in counts.iter().enumerate() {
            let parent_path = &paths[parent * layer..(parent + 1) * layer];
            for (b, size) in balanced_split(g, a).enumerate() {
                plan.push(size);
                if size > 0 {
                    next_counts.push(size);
                    next_paths.extend_from_slice(parent_path);
                    next_paths.push(b as u32);
                }
            }
        }
        layer_plan.push(plan);
        counts = next_counts;
        paths = next_paths;
    }

    debug_assert_eq!(counts.len(), n);
    debug_assert!(counts.iter().all(|&c| c == 1));

    let cells = paths;
    let points = cells
        .iter()
        .map(|&b| (b as f64 + 0.5) / a as f64)
        .collect();

    Ok(RankGrid {
        p,
        n,
        levels: a,
        points,
        cells,
        layer_plan,
    })
}

/// Bijection observation index -> grid point index, plus the tie-break seed
/// that reproduces it.
#[derive(Debug, Clone)]
pub struct RankAssignment {
    perm: Vec<usize>,
    tie_seed: u64,
    grid_fingerprint: u64,
}

impl RankAssignment {
    /// Grid point index assigned to observation i.
    pub fn grid_index(&self, i: usize) -> usize {
        self.perm[i]
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn tie_seed(&self) -> u64 {
        self.tie_seed
    }

    pub fn grid_fingerprint(&self) -> u64 {
        self.grid_fingerprint
    }
}

const PAR_SORT_MIN: usize = 1 << 13;
const DECORATE_MIN: usize = 64;

/// Assign every observation to a grid point by the layered conditional sort.
///
/// Layer j sorts each current bucket by coordinate j and splits it according
/// to the grid's layer plan. Ties are broken uniformly at random by per-
/// observation keys drawn from `tie_seed`, so repeated runs with the same
/// seed are identical and the assignment of tied points is exchangeable.
pub fn assign_ranks(
    sample: &SampleSet,
    grid: &RankGrid,
    tie_seed: u64,
) -> Result<RankAssignment> {
    if sample.n() != grid.n() || sample.dim() != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "sample is {}x{} but grid is {}x{}",
            sample.n(),
            sample.dim(),
            grid.n(),
            grid.dim()
        )));
    }
    let n = sample.n();
    let p = sample.dim();

    let mut rng = ChaCha8Rng::seed_from_u64(tie_seed);
    let keys: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();

    let mut order: Vec<u32> = (0..n as u32).collect();
    for (layer, plan) in grid.layer_plan().iter().enumerate() {
        // Bucket extents for this layer: nonzero child sizes of the previous
        // layer, i.e. the nonzero entries of plan are the NEXT extents; the
        // current extents are the parents, recovered by summing plan chunks.
        let a = grid.levels();
        let parent_sizes: Vec<usize> = plan.chunks(a).map(|c| c.iter().sum()).collect();

        let mut slices = Vec::with_capacity(parent_sizes.len());
        let mut rest: &mut [u32] = &mut order;
        for &sz in &parent_sizes {
            let (head, tail) = rest.split_at_mut(sz);
            slices.push(head);
            rest = tail;
        }
        debug_assert!(rest.is_empty());

        let data = &sample.data;
        let keys = &keys;
        let sort_bucket = |bucket: &mut &mut [u32]| {
            let cmp = |x: &u32, y: &u32| {
                let vx = data[*x as usize * p + layer];
                let vy = data[*y as usize * p + layer];
                vx.partial_cmp(&vy)
                    .unwrap()
                    .then_with(|| keys[*x as usize].cmp(&keys[*y as usize]))
                    .then_with(|| x.cmp(y))
            };
            if bucket.len() < DECORATE_MIN {
                bucket.sort_unstable_by(cmp);
                return;
            }
            // Decorate-sort-undecorate: gather this layer's coordinate once
            // and sort compact (coordinate, index) pairs. The comparator
            // defines the same total order as above, but the sort touches
            // contiguous memory instead of gathering from the full sample
            // on every comparison, which keeps the time near-linear once
            // the data outgrows the cache.
            let mut pairs: Vec<(f64, u32)> = bucket
                .iter()
                .map(|&x| (data[x as usize * p + layer], x))
                .collect();
            let pair_cmp = |a: &(f64, u32), b: &(f64, u32)| {
                a.0.partial_cmp(&b.0)
                    .unwrap()
                    .then_with(|| keys[a.1 as usize].cmp(&keys[b.1 as usize]))
                    .then_with(|| a.1.cmp(&b.1))
            };
            if pairs.len() >= PAR_SORT_MIN {
                pairs.par_sort_unstable_by(pair_cmp);
            } else {
                pairs.sort_unstable_by(pair_cmp);
            }
            for (slot, (_, x)) in bucket.iter_mut().zip(pairs) {
                *slot = x;
            }
        };
        if slices.len() > 1 && n >= PAR_SORT_MIN {
            slices.par_iter_mut().for_each(sort_bucket);
        } else {
            slices.iter_mut().for_each(sort_bucket);
        }
    }

    let mut perm = vec![0usize; n];
    for (leaf, &obs) in order.iter().enumerate() {
        perm[obs as usize] = leaf;
    }

    Ok(RankAssignment {
        perm,
        tie_seed,
        grid_fingerprint: grid.fingerprint(),
    })
}

/// One benchmark row: sample size and wall-clock seconds for `assign_ranks`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProfileRow {
    pub n: usize,
    pub seconds: f64,
}

/// Time `assign_ranks` on deterministic pseudo-random data for each N.
///
/// Grid construction is excluded from the timing; the interesting scaling is
/// the layered sort itself.
pub fn runtime_profile(n_list: &[usize], p: usize) -> Result<Vec<ProfileRow>> {
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b97f4a7c15 ^ n as u64);
        let data: Vec<f64> = (0..n * p).map(|_| rng.random::<f64>()).collect();
        let groups: Vec<usize> = (0..n).map(|i| if i < n / 2 { 0 } else { 1 }).collect();
        let sample = SampleSet::from_flat(data, p, groups)?;
        let grid = build_grid(n, p)?;
        let start = Instant::now();
        let assignment = assign_ranks(&sample, &grid, 7)?;
        let seconds = start.elapsed().as_secs_f64();
        std::hint::black_box(assignment.grid_index(0));
        rows.push(ProfileRow { n, seconds });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted_points(grid: &RankGrid) -> Vec<Vec<f64>> {
        let mut pts: Vec<Vec<f64>> = (0..grid.n()).map(|i| grid.point(i).to_vec()).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts
    }

    #[test]
    fn grid_4_points_2d_is_quarter_lattice() {
        let grid = build_grid(4, 2).unwrap();
        assert_eq!(grid.levels(), 2);
        let expect = vec![
            vec![0.25, 0.25],
            vec![0.25, 0.75],
            vec![0.75, 0.25],
            vec![0.75, 0.75],
        ];
        assert_eq!(sorted_points(&grid), expect);
    }

    #[test]
    fn grid_univariate_is_offset_lattice() {
        let grid = build_grid(5, 1).unwrap();
        assert_eq!(grid.levels(), 5);
        let got: Vec<f64> = (0..5).map(|i| grid.point(i)[0]).collect();
        assert_eq!(got, vec![0.1, 0.3, 0.5, 0.7, 0.9]);
    }

    #[test]
    fn grid_6_points_2d_split_schedule() {
        let grid = build_grid(6, 2).unwrap();
        assert_eq!(grid.levels(), 3);
        assert_eq!(grid.layer_plan()[0], vec![2, 2, 2]);
        assert_eq!(grid.layer_plan()[1], vec![1, 1, 0, 1, 1, 0, 1, 1, 0]);
        let expect = vec![
            vec![1.0 / 6.0, 1.0 / 6.0],
            vec![1.0 / 6.0, 0.5],
            vec![0.5, 1.0 / 6.0],
            vec![0.5, 0.5],
            vec![5.0 / 6.0, 1.0 / 6.0],
            vec![5.0 / 6.0, 0.5],
        ];
        assert_eq!(sorted_points(&grid), expect);
    }

    #[test]
    fn grid_rejects_degenerate_arguments() {
        assert!(build_grid(1, 2).is_err());
        assert!(build_grid(10, 0).is_err());
    }

    #[test]
    fn assignment_matches_hand_example() {
        let rows = vec![
            vec![0.1, 0.9],
            vec![0.2, 0.1],
            vec![0.8, 0.5],
            vec![0.9, 0.3],
        ];
        let sample = SampleSet::new(&rows, vec![0, 0, 1, 1]).unwrap();
        let grid = build_grid(4, 2).unwrap();
        let assign = assign_ranks(&sample, &grid, 0).unwrap();
        let expect = [[0.25, 0.75], [0.25, 0.25], [0.75, 0.75], [0.75, 0.25]];
        for (i, e) in expect.iter().enumerate() {
            assert_eq!(grid.point(assign.grid_index(i)), e.as_slice());
        }
    }

    #[test]
    fn univariate_assignment_is_classical_ranking() {
        let rows = vec![vec![3.0], vec![-1.0], vec![10.0], vec![0.5], vec![2.0]];
        let sample = SampleSet::new(&rows, vec![0, 0, 0, 1, 1]).unwrap();
        let grid = build_grid(5, 1).unwrap();
        let assign = assign_ranks(&sample, &grid, 42).unwrap();
        // ranks of 3.0, -1.0, 10.0, 0.5, 2.0 are 4, 1, 5, 2, 3
        let expect = [4usize, 1, 5, 2, 3];
        for (i, r) in expect.iter().enumerate() {
            let coord = grid.point(assign.grid_index(i))[0];
            assert!((coord - (*r as f64 - 0.5) / 5.0).abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_balance_follows_plan() {
        let grid = build_grid(23, 3).unwrap();
        // Axis-0 cell counts must equal the layer-0 plan.
        let mut counts = vec![0usize; grid.levels()];
        for i in 0..grid.n() {
            counts[grid.cell(i)[0] as usize] += 1;
        }
        assert_eq!(counts, grid.layer_plan()[0]);
    }

    #[test]
    fn subset_distribution_is_uniform_over_seeds() {
        // Exchangeability: with iid data the grid cells captured by group 1
        // form a uniform 2-subset of the 6 grid points. Chi-square over all
        // 15 subsets, 6000 replications.
        let grid = build_grid(6, 1).unwrap();
        let reps = 6000usize;
        let mut freq = std::collections::HashMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for rep in 0..reps {
            let data: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
            let sample = SampleSet::from_flat(data, 1, vec![1, 1, 0, 0, 0, 0]).unwrap();
            let assign = assign_ranks(&sample, &grid, rep as u64).unwrap();
            let mut sub: Vec<usize> = (0..2).map(|i| assign.grid_index(i)).collect();
            sub.sort_unstable();
            *freq.entry(sub).or_insert(0usize) += 1;
        }
        assert_eq!(freq.len(), 15);
        let expected = reps as f64 / 15.0;
        let chi2: f64 = freq
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 99.9% quantile of chi-square with 14 df is 36.12
        assert!(chi2 < 36.12, "chi2 = {chi2}");
    }

    #[test]
    fn tied_data_stays_exchangeable_over_tie_seeds() {
        // All-identical rows: the assignment is pure tie-breaking, and the
        // group-1 subset must still be uniform across tie seeds.
        let grid = build_grid(6, 1).unwrap();
        let sample = SampleSet::from_flat(vec![1.0; 6], 1, vec![1, 1, 0, 0, 0, 0]).unwrap();
        let reps = 6000usize;
        let mut freq = std::collections::HashMap::new();
        for seed in 0..reps {
            let assign = assign_ranks(&sample, &grid, seed as u64).unwrap();
            let mut sub: Vec<usize> = (0..2).map(|i| assign.grid_index(i)).collect();
            sub.sort_unstable();
            *freq.entry(sub).or_insert(0usize) += 1;
        }
        assert_eq!(freq.len(), 15);
        let expected = reps as f64 / 15.0;
        let chi2: f64 = freq
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 36.12, "chi2 = {chi2}");
    }

    #[test]
    fn same_tie_seed_reproduces_assignment() {
        let sample = SampleSet::from_flat(vec![2.0; 8], 2, vec![0, 0, 1, 1]).unwrap();
        let grid = build_grid(4, 2).unwrap();
        let a = assign_ranks(&sample, &grid, 5).unwrap();
        let b = assign_ranks(&sample, &grid, 5).unwrap();
        assert_eq!(a.perm(), b.perm());
    }

    proptest! {
        #[test]
        fn assignment_is_always_a_bijection(
            n in 2usize..40,
            p in 1usize..4,
            seed in 0u64..1000,
            tie in prop::bool::ANY,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..n * p)
                .map(|_| {
                    let v: f64 = rng.random();
                    // With ties: quantize to force collisions.
                    if tie { (v * 4.0).floor() } else { v }
                })
                .collect();
            let groups: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
            let sample = SampleSet::from_flat(data, p, groups).unwrap();
            let grid = build_grid(n, p).unwrap();
            let assign = assign_ranks(&sample, &grid, seed).unwrap();
            let mut seen = vec![false; n];
            for i in 0..n {
                let g = assign.grid_index(i);
                prop_assert!(!seen[g]);
                seen[g] = true;
            }
        }

        #[test]
        fn grid_has_n_interior_points(n in 2usize..200, p in 1usize..6) {
            let grid = build_grid(n, p).unwrap();
            prop_assert_eq!(grid.n(), n);
            for i in 0..n {
                for &c in grid.point(i) {
                    prop_assert!(c > 0.0 && c < 1.0);
                }
            }
        }
    }
}
