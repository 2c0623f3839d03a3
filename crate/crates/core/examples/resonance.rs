use dshadow::finite_delay::FiniteDelaySystem;
use dshadow::shadowing::resonance_probe;
use dshadow::volterra::{
    find_roots, resonant_forcing, spectral_decomposition, DecompositionOptions, RootOptions, VolterraKernel,
};

fn main() -> dshadow::Result<()> {
    let k = VolterraKernel::scalar(0.5, &[0.5, 0.5])?;
    let spec = find_roots(&k, &RootOptions::default())?;
    let root = spec.on_circle().next().expect("a root on the unit circle");
    let dec = spectral_decomposition(&k, &spec, &DecompositionOptions::default())?;
    let g = resonant_forcing(&dec, root.value, 2000, 1e-9)?;
    println!(
        "kernel: lambda {:.3} slope {:.6} (predicted {:.6}) deviation {:.1e}",
        g.lambda, g.slope, g.c, g.max_relative_deviation
    );

    let sys = FiniteDelaySystem::scalar(&[-1.0])?;
    let p = resonance_probe(&sys, 2000, 1e-9)?;
    println!("delay system: lambda {:.3} slope {:.6} (predicted {:.6})", p.eigenvalue, p.slope, p.c_pred);
    Ok(())
}
