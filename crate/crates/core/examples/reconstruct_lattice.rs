//! Plants constant potentials on a 4x4 lattice, computes the edge D-N map by
//! the continuous solver and recovers every interior edge from it.

use std::time::Instant;

use lattice_dn::dn_maps::ForwardOracle;
use lattice_dn::edge_ode::SymmetricPotential;
use lattice_dn::lattice::Region;
use lattice_dn::potentials::EdgePotentials;
use lattice_dn::reconstruct::{reconstruct_all, ReconOptions};

fn main() -> lattice_dn::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let region = Region::new(n);
    let values = [1.0, -0.5, 2.0, 0.7, -1.2, 0.3, 1.5, -0.8, 0.9, -0.2, 1.1, 0.4];
    let mut planted = EdgePotentials::new();
    for (i, &e) in region.interior_edges().iter().enumerate() {
        planted.insert(e, SymmetricPotential::constant(values[i % values.len()]));
    }
    let oracle = ForwardOracle::new(region.clone(), planted.clone())?;

    let start = Instant::now();
    let out = reconstruct_all(&region, &oracle, &ReconOptions::default())?;
    println!("recovered {} edges in {:.1?}", out.potentials.len(), start.elapsed());

    let mut worst = 0.0f64;
    for (e, q) in planted.iter() {
        let got = out.potentials.get(e);
        let rel = got.l2_distance(q) / q.l2_norm();
        worst = worst.max(rel);
        println!("{e}: planted {:+.4}  recovered {:+.8}  rel err {rel:.2e}", q.c0, got.c0);
    }
    println!("worst relative L2 error {worst:.2e}");
    for s in &out.report.steps {
        println!(
            "{} k={} retained={} consistency={:.1e} vertex residual={:.1e}",
            s.sweep, s.k, s.retained, s.consistency, s.vertex_residual
        );
    }
    Ok(())
}
