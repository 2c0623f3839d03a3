use dshadow::dichotomy::{detect, verify_dichotomy, DetectOptions};
use dshadow::finite_delay::FiniteDelaySystem;

fn main() -> dshadow::Result<()> {
    let systems = [
        ("fibonacci", FiniteDelaySystem::scalar(&[1.0, 1.0])?),
        ("period 2", FiniteDelaySystem::scalar_periodic(&[3.0, 1.0 / 6.0])?),
        ("neutral", FiniteDelaySystem::scalar(&[0.5, 0.5])?),
    ];
    let opts = DetectOptions::default();
    for (name, sys) in &systems {
        let (report, data) = detect(sys, &opts)?;
        print!("{name:<10} gap {:.4}", report.min_distance_to_unit_circle);
        match data {
            Some(d) => {
                let v = verify_dichotomy(sys, &d, opts.horizon, false)?;
                println!(
                    "  stable {} unstable {}  D {:.4}  lambda {:.4}  K_D {:.4}  idempotence {:.1e}",
                    d.stable_dim(),
                    d.unstable_dim(),
                    d.d_const,
                    d.lambda,
                    d.shadowing_constant(),
                    v.idempotence_residual
                );
            }
            None => println!("  not hyperbolic"),
        }
    }
    Ok(())
}
