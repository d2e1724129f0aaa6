//! Solutions of the vertex equation that vanish below a diagonal line,
//! built from the vertex D-N map alone plus the coefficients above the line.

use lattice_dn::dn_maps::assemble_lambda_v;
use lattice_dn::lattice::Region;
use lattice_dn::potentials::EdgePotentials;
use lattice_dn::vertex_system::{special_solution_above, VertexCoeffs};
use rand::SeedableRng;

fn main() -> lattice_dn::Result<()> {
    let region = Region::new(3);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let pots = EdgePotentials::random(&region, 1, 0.8, &mut rng);
    let lambda = 7.1;
    let coeffs = VertexCoeffs::assemble(&region, &pots, lambda)?;
    let lv = assemble_lambda_v(&region, &pots, lambda)?;

    for k in (4..=6).rev() {
        let s = special_solution_above(&region, &coeffs, &lv, k)?;
        println!("k = {k} (consistency with the map {:.1e})", s.consistency);
        for y in (0..=3).rev() {
            let row: Vec<String> = (0..=3)
                .map(|x| {
                    let v = lattice_dn::lattice::VertexId::new(x, y);
                    if v.level() >= k as i64 {
                        format!("{:+10.4}", s.field.get(v))
                    } else {
                        format!("{:>10}", ".")
                    }
                })
                .collect();
            println!("  {}", row.join(" "));
        }
    }
    Ok(())
}
