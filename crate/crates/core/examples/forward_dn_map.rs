//! Edge and vertex D-N maps of a small lattice, and the identity tying them
//! together: `Lambda_V = -cos(sqrt l) I + sin(sqrt l)/sqrt(l) Lambda_E`.

use lattice_dn::dn_maps::{assemble_lambda_v, continuous_oracle_lambda_e, ExceptionalSet};
use lattice_dn::numerics::{cos_sqrt, sinc_sqrt};
use lattice_dn::lattice::Region;
use lattice_dn::potentials::EdgePotentials;
use nalgebra::DMatrix;
use rand::SeedableRng;

fn main() -> lattice_dn::Result<()> {
    let region = Region::new(1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let pots = EdgePotentials::random(&region, 2, 0.5, &mut rng);

    let lambda = 5.3;
    let exc = ExceptionalSet::new(&region, &pots, 50.0)?;
    println!("lambda = {lambda}, distance to the exceptional set {:.3}", exc.distance(lambda));

    let v = assemble_lambda_v(&region, &pots, lambda)?;
    let e = continuous_oracle_lambda_e(&region, &pots, lambda)?;
    let m = v.size();
    let predicted = DMatrix::identity(m, m) * -cos_sqrt(lambda) + &e.entries * sinc_sqrt(lambda);
    println!("vertex map, {m} x {m}, symmetry residual {:.1e}", v.symmetry_residual());
    let row: Vec<String> = v.entries.row(0).iter().map(|x| format!("{x:+.5}")).collect();
    println!("first row: {}", row.join(" "));
    println!("identity residual {:.2e}", (&v.entries - predicted).abs().max());
    Ok(())
}
