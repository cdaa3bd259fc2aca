//! Noncentrality slopes of the classical scale weights against a Gaussian
//! scale alternative. Each slope beta is a one-dimensional integral that
//! does not depend on the data dimension; Klotz (squared normal scores)
//! attains the parametric bound.

use multirank::models::Family;
use multirank::simulate::scale_shift_noncentrality;

fn main() -> multirank::Result<()> {
    // Closed forms for the slope at p = 1: 2 sqrt(3)/pi, sqrt(15)/pi, sqrt(2).
    let targets = [
        ("siegel_tukey", 2.0 * 3.0f64.sqrt() / std::f64::consts::PI),
        ("mood", 15.0f64.sqrt() / std::f64::consts::PI),
        ("klotz", 2.0f64.sqrt()),
    ];
    println!(
        "{:>14} {:>4} {:>10} {:>10} {:>12}",
        "weight", "p", "beta", "target", "efficiency"
    );
    for (name, target) in targets {
        for p in [1, 4] {
            let est = scale_shift_noncentrality(
                name,
                p,
                Family::GaussianLocation,
                2_000_000,
                17,
            )?;
            // The Gaussian scale score has information 2, so the Pitman
            // efficiency of the rank test is beta^2 / 2.
            println!(
                "{:>14} {:>4} {:>10.5} {:>10.5} {:>12.4}",
                name,
                p,
                est.beta,
                target,
                est.beta * est.beta / 2.0
            );
        }
    }
    Ok(())
}
