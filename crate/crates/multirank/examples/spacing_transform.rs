//! Rank spacings along the snake curve and their moment generating
//! function in closed form: the route to exact inference that never
//! enumerates subsets.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use multirank::exact::{
    exact_null_distribution, laplace_transform, snake_curve, spacing_stat, LaplaceParams,
};
use multirank::rank_map::{assign_ranks, build_grid, SampleSet};
use multirank::weights::builtin;

fn main() -> multirank::Result<()> {
    let (k, n, p) = (8, 6, 2);
    let n_total = k + n;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut draw = |m: usize, shift: f64| -> Vec<Vec<f64>> {
        (0..m)
            .map(|_| {
                (0..p)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        z + shift
                    })
                    .collect()
            })
            .collect()
    };
    let sample = SampleSet::from_groups(&[draw(k, 0.0), draw(n, 0.8)])?;
    let grid = build_grid(n_total, p)?;
    let assign = assign_ranks(&sample, &grid, 11)?;
    let curve = snake_curve(p, grid.levels())?;
    let w = builtin("mann_whitney", p)?;

    let s = spacing_stat(&assign, &w, &grid, &curve, sample.groups())?;
    println!("group-1 curve positions rho = {:?}", s.rho());
    println!("spacing statistic S = {:?}", s.statistic());

    // The transform at argument s equals E exp(<s, S>) under the
    // uniform-subset null; enumerating all C(14,6) subsets must agree.
    let params = LaplaceParams::for_weight(&w, &curve, k, n)?;
    println!("{:>14} {:>16} {:>16}", "s", "closed form", "enumeration");
    for arg in [-1.0, -0.25, 0.5, 1.5] {
        let s_vec = [arg, 0.5 * arg];
        let closed = laplace_transform(&params, &s_vec, 1.0)?;
        let table = exact_null_distribution(
            |sub| {
                let sp = params.spacing_for_subset(sub);
                s_vec[0] * sp[0] + s_vec[1] * sp[1]
            },
            n_total,
            n,
            1_000_000,
        )?;
        let brute = table.mean_of(f64::exp);
        println!("{:>14} {closed:>16.10} {brute:>16.10}", format!("({arg}, {})", 0.5 * arg));
    }
    if let Some(note) = params.precision_warning() {
        println!("{note}");
    }
    Ok(())
}
