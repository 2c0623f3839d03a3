//! Shadows random pseudo-orbits of the Fibonacci recursion and compares the
//! error with the dichotomy bound.

use dshadow::dichotomy::{detect, DetectOptions};
use dshadow::finite_delay::FiniteDelaySystem;
use dshadow::shadowing::{random_pseudo_orbit, shadow, shadowing_modulus, trial_rng};

fn main() -> dshadow::Result<()> {
    let sys = FiniteDelaySystem::scalar(&[1.0, 1.0])?;
    let (_, data) = detect(&sys, &DetectOptions::default())?;
    let data = data.expect("hyperbolic");

    let y = random_pseudo_orbit(&sys, &data, 1e-3, 40, &mut trial_rng(7, 0))?;
    let res = shadow(&sys, &data, &y, 40)?;
    println!(
        "single orbit: delta {:.3e} error {:.3e} bound {:.3e} residual {:.1e}",
        res.delta, res.sup_error, res.theoretical_bound, res.step_residual
    );

    for delta in [1e-2, 1e-4, 1e-6] {
        let s = shadowing_modulus(&sys, &data, 50, delta, 60, 42)?;
        println!(
            "delta {delta:.0e}: eps max {:.3e}  eps/delta {:.4}  K_D {:.4}  violations {}",
            s.eps_max, s.ratio, s.k_d, s.bound_violations
        );
    }
    Ok(())
}
