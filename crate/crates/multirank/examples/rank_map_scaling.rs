//! Timing the hierarchical rank assignment: the layered sort is
//! O(N log N) with small constants, so doubling N should roughly double
//! the wall-clock time even in higher dimensions.

use multirank::rank_map::runtime_profile;

fn main() -> multirank::Result<()> {
    let sizes = [1 << 14, 1 << 15, 1 << 16, 1 << 17, 1 << 18];
    for p in [2, 4] {
        println!("p = {p}");
        let rows = runtime_profile(&sizes, p)?;
        for pair in rows.windows(2) {
            println!(
                "  N {:>7} -> {:>7}: {:>8.2} ms -> {:>8.2} ms (ratio {:.2})",
                pair[0].n,
                pair[1].n,
                1e3 * pair[0].seconds,
                1e3 * pair[1].seconds,
                pair[1].seconds / pair[0].seconds
            );
        }
    }
    Ok(())
}
