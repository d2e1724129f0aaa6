//! One-edge inverse problems: a symmetric potential from its Dirichlet
//! spectrum, and from samples of its Weyl function.

use lattice_dn::edge_ode::{dirichlet_eigenvalues, weyl, SymmetricPotential};
use lattice_dn::isp1d::{recover_from_spectrum, recover_from_weyl, SpectrumTarget, WeylTarget};

fn main() -> lattice_dn::Result<()> {
    let q = SymmetricPotential::new(1.0, vec![0.5, -0.3]);
    let eigs = dirichlet_eigenvalues(&q, 8)?;
    let fit = recover_from_spectrum(&SpectrumTarget::new(eigs)?, 2)?;
    println!(
        "from 8 eigenvalues: {:.8?} (residual {:.1e}, {} iterations)",
        fit.potential.coefficients(),
        fit.residual,
        fit.iterations
    );

    let samples: Vec<(f64, f64)> = (0..12)
        .map(|i| -3.0 + 6.5 * i as f64)
        .filter_map(|l| weyl(&q, l).ok().map(|m| (l, m)))
        .collect();
    let fit = recover_from_weyl(&WeylTarget::new(samples)?, 2)?;
    println!(
        "from 12 Weyl samples: {:.8?} (residual {:.1e})",
        fit.potential.coefficients(),
        fit.residual
    );
    println!("L2 error {:.1e}", fit.potential.l2_distance(&q));
    Ok(())
}
