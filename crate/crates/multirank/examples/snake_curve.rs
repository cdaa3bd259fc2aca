//! The boustrophedon curve through the rank lattice: consecutive traversal
//! positions always differ by one step along one axis, which is what makes
//! curve-order spacings meaningful in any dimension.

use multirank::exact::snake_curve;

fn main() -> multirank::Result<()> {
    let curve = snake_curve(2, 4)?;
    println!("p = 2, a = 4, {} cells:", curve.len());
    for pos in 0..curve.len() {
        let cell = curve.cell_at(pos);
        let center = curve.center(pos);
        if pos % 4 == 0 {
            println!();
        }
        print!("  {pos:>2} -> {cell:?} at ({:.3}, {:.3})", center[0], center[1]);
    }
    println!("\n");

    // Round trip and adjacency in dimension 3.
    let cube = snake_curve(3, 3)?;
    let mut max_step = 0u32;
    for pos in 0..cube.len() {
        assert_eq!(cube.position(&cube.cell_at(pos)), pos);
        if pos > 0 {
            let a = cube.cell_at(pos - 1);
            let b = cube.cell_at(pos);
            let step: u32 = a
                .iter()
                .zip(&b)
                .map(|(x, y)| x.abs_diff(*y))
                .sum();
            max_step = max_step.max(step);
        }
    }
    println!("3x3x3 traversal: max L1 step between neighbors = {max_step}");

    // point_at interpolates between cell centers along the curve.
    for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
        println!("point_at({s:.2}) = {:?}", cube.point_at(s)?);
    }
    Ok(())
}
