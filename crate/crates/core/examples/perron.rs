use dshadow::dichotomy::{detect, DetectOptions};
use dshadow::finite_delay::{FiniteDelaySystem, ForcingSequence};
use dshadow::linalg::{CVec, C64};
use dshadow::shadowing::perron_solve;

fn main() -> dshadow::Result<()> {
    // x(n+1) = 2 x(n) + z(n) has a single bounded solution for bounded z
    let sys = FiniteDelaySystem::scalar(&[2.0])?;
    let (_, data) = detect(&sys, &DetectOptions::default())?;
    let data = data.expect("hyperbolic");
    let z = ForcingSequence::constant(CVec::from_element(1, C64::new(1.0, 0.0)), 20)?;
    let sol = perron_solve(&sys, &data, &z, 20, 20)?;
    for n in 0..=20isize {
        println!("x({n:>2}) = {:+.6}", sol.orbit.at(n)[0].re);
    }
    println!("sup {:.4}  control ratio {:.4}  residual {:.1e}", sol.sup_norm, sol.control_ratio, sol.step_residual);
    Ok(())
}
