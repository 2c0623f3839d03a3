//! Characteristic roots of Volterra kernels.

use dshadow::linalg::{CMat, C64};
use dshadow::volterra::{find_roots, RootOptions, VolterraKernel};

fn main() -> dshadow::Result<()> {
    let kernels = [
        ("finite", VolterraKernel::scalar(0.5, &[0.3, 0.2, 0.1])?),
        ("neutral", VolterraKernel::scalar(0.5, &[0.5, 0.5])?),
        (
            "geometric",
            VolterraKernel::geometric(0.5, CMat::from_element(1, 1, C64::new(0.5, 0.0)), C64::new(0.25, 0.0))?,
        ),
    ];
    for (name, k) in &kernels {
        let spec = find_roots(k, &RootOptions::default())?;
        println!("{name}: hyperbolic {} (distance {:.3e})", spec.hyperbolic, spec.min_distance_to_unit_circle);
        for r in &spec.roots {
            println!(
                "  {:+.6} {:+.6}i  |.| {:.6}  mult {}  residual {:.1e}",
                r.value.re, r.value.im, r.modulus, r.multiplicity, r.residual
            );
        }
    }
    Ok(())
}
