//! Testing location and scale jointly versus Bonferroni-splitting two
//! separate tests: in the many-dimensions limit both powers have closed
//! forms, and the joint test dominates at every size.

use multirank::simulate::{bonferroni_power, joint_mc_check, joint_vs_bonferroni};

fn main() -> multirank::Result<()> {
    let alphas: Vec<f64> = (1..=20).map(|i| 0.01 * i as f64).collect();
    for (mu, sigma) in [(0.5, 0.5), (0.5, 0.75), (0.75, 0.5)] {
        let curve = joint_vs_bonferroni(mu, sigma, &alphas)?;
        let worst_gap = curve
            .rows
            .iter()
            .map(|&(_, joint, bonf)| joint - bonf)
            .fold(f64::INFINITY, f64::min);
        println!(
            "mu~2 = {mu}, sigma~2 = {sigma}: min(joint - bonferroni) over alpha = {worst_gap:.4}"
        );
    }

    let (mu, sigma, alpha) = (0.5, 0.5, 0.05);
    let curve = joint_vs_bonferroni(mu, sigma, &[alpha])?;
    let (_, joint, bonf) = curve.rows[0];
    println!("\nat alpha = {alpha}: joint = {joint:.6}, bonferroni = {bonf:.6}");
    println!("bonferroni closed form directly: {:.6}", bonferroni_power(mu, sigma, alpha)?);

    // Finite-dimensional check: simulate the limiting Gaussian experiment
    // at p = 150 and compare the rejection rates with the formulas.
    let check = joint_mc_check(mu, sigma, 150, alpha, 20_000, 8)?;
    println!("\np = 150 Monte Carlo vs limit formula (se ~ {:.4}):", check.se);
    println!("  joint      {:.4} vs {:.4}", check.joint_rate, check.joint_formula);
    println!("  bonferroni {:.4} vs {:.4}", check.bonferroni_rate, check.bonferroni_formula);
    Ok(())
}
