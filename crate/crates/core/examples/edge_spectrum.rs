//! Dirichlet eigenvalues and Weyl function of a single edge.

use lattice_dn::edge_ode::{dirichlet_eigenvalues, shoot, weyl, SymmetricPotential};

fn main() -> lattice_dn::Result<()> {
    let q = SymmetricPotential::new(1.0, vec![0.5, -0.3]);
    println!("q(z) = 1 + 0.5 cos 2pi z - 0.3 cos 4pi z");
    for (j, l) in dirichlet_eigenvalues(&q, 6)?.iter().enumerate() {
        let free = ((j + 1) as f64 * std::f64::consts::PI).powi(2);
        println!("lambda_{} = {l:.10}  (free {free:.4}, shift {:+.6})", j + 1, l - free);
    }
    for lambda in [-2.0, 3.0, 20.0, 60.0] {
        let d = shoot(&q, lambda)?;
        println!(
            "lambda = {lambda:6.1}: psi(1) = {:+.6}, weyl = {:+.6}, wronskian residual {:.1e}",
            d.s1,
            weyl(&q, lambda)?,
            d.wronskian_residual()
        );
    }
    Ok(())
}
