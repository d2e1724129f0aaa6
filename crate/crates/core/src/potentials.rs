//! Assignment of potentials to lattice edges.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::edge_ode::SymmetricPotential;
use crate::error::{Error, Result};
use crate::lattice::{EdgeId, Region};

/// Potentials on the edges of a region; unlisted edges carry `q = 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<EdgeEntry>", into = "Vec<EdgeEntry>")]
pub struct EdgePotentials {
    map: BTreeMap<EdgeId, SymmetricPotential>,
    zero: SymmetricPotential,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EdgeEntry {
    edge: EdgeId,
    potential: SymmetricPotential,
}

impl From<Vec<EdgeEntry>> for EdgePotentials {
    fn from(v: Vec<EdgeEntry>) -> Self {
        v.into_iter().map(|e| (e.edge, e.potential)).collect()
    }
}

impl From<EdgePotentials> for Vec<EdgeEntry> {
    fn from(p: EdgePotentials) -> Self {
        p.map
            .into_iter()
            .map(|(edge, potential)| EdgeEntry { edge, potential })
            .collect()
    }
}

impl FromIterator<(EdgeId, SymmetricPotential)> for EdgePotentials {
    fn from_iter<T: IntoIterator<Item = (EdgeId, SymmetricPotential)>>(iter: T) -> Self {
        let mut p = Self::new();
        for (e, q) in iter {
            p.insert(e, q);
        }
        p
    }
}

impl EdgePotentials {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, e: EdgeId, q: SymmetricPotential) {
        self.map.insert(e, q);
    }

    pub fn get(&self, e: EdgeId) -> &SymmetricPotential {
        self.map.get(&e).unwrap_or(&self.zero)
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.map.contains_key(&e)
    }

    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, &SymmetricPotential)> {
        self.map.iter().map(|(&e, q)| (e, q))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Largest `sup |q|` bound over all listed edges.
    pub fn sup_bound(&self) -> f64 {
        self.map.values().fold(0.0, |m, q| m.max(q.sup_bound()))
    }

    /// Checks that every listed edge is an interior edge of `region`.
    pub fn validate(&self, region: &Region) -> Result<()> {
        match self.map.keys().find(|&&e| !region.is_interior_edge(e)) {
            Some(e) => Err(Error::Schema(format!(
                "edge {e} is not an interior edge of the region"
            ))),
            None => Ok(()),
        }
    }

    /// Random potentials on every interior edge: `c0` and the first
    /// `basis_dim` cosine coefficients drawn uniformly from `[-amp, amp]`.
    pub fn random<R: Rng>(region: &Region, basis_dim: usize, amp: f64, rng: &mut R) -> Self {
        region
            .interior_edges()
            .iter()
            .map(|&e| (e, random_potential(basis_dim, amp, rng)))
            .collect()
    }
}

pub fn random_potential<R: Rng>(basis_dim: usize, amp: f64, rng: &mut R) -> SymmetricPotential {
    let c0 = rng.random_range(-amp..=amp);
    let c = (0..basis_dim).map(|_| rng.random_range(-amp..=amp)).collect();
    SymmetricPotential::new(c0, c)
}
