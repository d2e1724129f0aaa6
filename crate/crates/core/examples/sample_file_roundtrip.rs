//! Writes sampled edge D-N data to a file, reads it back and reconstructs
//! from the stored samples only.

use lattice_dn::dn_file::{uniform_grid, DnFile, Payload};
use lattice_dn::edge_ode::SymmetricPotential;
use lattice_dn::lattice::Region;
use lattice_dn::potentials::EdgePotentials;
use lattice_dn::reconstruct::{reconstruct_all, ReconOptions};

fn main() -> lattice_dn::Result<()> {
    let region = Region::new(2);
    let mut planted = EdgePotentials::new();
    for (i, &e) in region.interior_edges().iter().enumerate() {
        planted.insert(e, SymmetricPotential::constant(0.3 + 0.2 * i as f64));
    }
    let opts = ReconOptions::default();
    let (lo, hi) = opts.window();
    let file = DnFile::from_forward(&region, &planted, &uniform_grid(lo, hi, 4.0))?;
    println!("{} samples, {} dropped", file.samples.len(), file.dropped.len());

    let path = std::env::temp_dir().join("lattice_dn_example.csv");
    file.write(&path, Payload::Csv)?;
    let back = DnFile::read(&path)?;
    assert_eq!(back, file);
    println!("wrote and re-read {}", path.display());

    let out = reconstruct_all(&region, &back.into_oracle()?, &opts)?;
    let worst = planted
        .iter()
        .map(|(e, q)| out.potentials.get(e).l2_distance(q) / q.l2_norm())
        .fold(0.0, f64::max);
    println!("file mode: worst relative error {worst:.2e}");
    std::fs::remove_file(path)?;
    Ok(())
}
