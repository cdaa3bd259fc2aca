//! Where a weight's power comes from, and where it goes blind: against a
//! fixed shift the Mann-Whitney test is consistent (power -> 1 as N
//! grows), but a symmetric pure-scale alternative with P(X < Y) = 1/2
//! leaves it powerless at any N. A scale weight sees what it misses.

use multirank::simulate::{consistency_check, GroupSpec, Marginal, SimConfig, WeightSpec};

fn main() -> multirank::Result<()> {
    let totals = [40, 100, 240, 500];

    let shift_cfg = SimConfig::new(
        Marginal::Gaussian,
        vec![
            GroupSpec::null(20, 1),
            GroupSpec::shifted(20, vec![0.8]),
        ],
        1,
        WeightSpec::Builtin("mann_whitney".into()),
        600,
        0.05,
        2,
    )?;
    println!("fixed shift 0.8, mann_whitney:");
    for row in consistency_check(&shift_cfg, &totals)?.rows {
        println!("  N = {:>4}: power = {:.3}", row.effect as usize, row.rate);
    }

    for weight in ["mann_whitney", "mood"] {
        let scale_cfg = SimConfig::new(
            Marginal::Gaussian,
            vec![
                GroupSpec::null(20, 1),
                GroupSpec::scaled(20, vec![2.0]),
            ],
            1,
            WeightSpec::Builtin(weight.into()),
            600,
            0.05,
            3,
        )?;
        println!("N(0,1) vs N(0,4), {weight}:");
        for row in consistency_check(&scale_cfg, &totals)?.rows {
            println!("  N = {:>4}: power = {:.3}", row.effect as usize, row.rate);
        }
    }
    Ok(())
}
