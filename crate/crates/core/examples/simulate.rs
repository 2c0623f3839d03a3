//! Iterates a scalar delay equation and prints the orbit.

use dshadow::finite_delay::{simulate, FiniteDelaySystem};
use dshadow::linalg::{CVec, C64};
use dshadow::phase_space::Segment;

fn main() -> dshadow::Result<()> {
    // x(n+1) = x(n) + x(n-1)
    let sys = FiniteDelaySystem::scalar(&[1.0, 1.0])?;
    let one = |v: f64| CVec::from_element(1, C64::new(v, 0.0));
    let phi0 = Segment::new(vec![one(0.0), one(1.0)])?;
    let orbit = simulate(&sys, &phi0, 12)?;
    for n in -1..=12isize {
        println!("x({n:>2}) = {}", orbit.at(n)[0].re);
    }
    println!("sup norm {}", orbit.sup_norm());
    Ok(())
}
