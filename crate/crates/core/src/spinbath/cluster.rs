//! Exact propagation of small spin clusters.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{dipolar_coupling, KHZ_US};
use crate::error::{Error, Result};
use crate::qmatrix::C64;

/// Largest bath handled by dense propagation.
pub const MAX_EXACT_SPINS: usize = 10;

struct Propagator {
    vectors: DMatrix<f64>,
    energies: DVector<f64>,
    overlap: DVector<f64>,
}

impl Propagator {
    fn new(h: DMatrix<f64>, index: usize) -> Self {
        let eig = SymmetricEigen::new(h);
        let overlap = eig.eigenvectors.row(index).transpose();
        Self { vectors: eig.eigenvectors, energies: eig.eigenvalues, overlap }
    }

    /// `exp(-iHt) |index⟩`.
    fn evolve(&self, t: f64) -> DVector<C64> {
        let phased = DVector::from_iterator(
            self.energies.len(),
            self.energies.iter().zip(self.overlap.iter()).map(|(e, c)| C64::from_polar(*c, -e * t)),
        );
        self.vectors.map(|x| C64::new(x, 0.0)) * phased
    }
}

/// `⟨ψ| U₋†(t) U₊(t) |ψ⟩` for a cluster in basis state `state`.
pub fn cluster_coherence(spins: &[[f64; 3]], state: &[bool], times: &[f64], flip_flop: bool) -> Result<Vec<C64>> {
    let n = spins.len();
    if n > MAX_EXACT_SPINS {
        return Err(Error::InvalidInput(format!("{n} spins exceed the dense propagation limit {MAX_EXACT_SPINS}")));
    }
    if state.len() != n {
        return Err(Error::InvalidInput("bath state length does not match the cluster".into()));
    }
    if n == 0 {
        return Ok(vec![C64::new(1.0, 0.0); times.len()]);
    }
    let dim = 1usize << n;
    // bit k set means spin k is down
    let bit = |k: usize| 1usize << (n - 1 - k);
    let mut zeeman = DVector::zeros(dim);
    for (k, pos) in spins.iter().enumerate() {
        let w = PI * dipolar_coupling(*pos)?.a_zz * KHZ_US / 2.0;
        for s in 0..dim {
            zeeman[s] += if s & bit(k) == 0 { w } else { -w };
        }
    }
    let mut exchange = DMatrix::zeros(dim, dim);
    if flip_flop {
        for j in 0..n {
            for k in j + 1..n {
                let r = [spins[k][0] - spins[j][0], spins[k][1] - spins[j][1], spins[k][2] - spins[j][2]];
                let b = PI * dipolar_coupling(r)?.a_flipflop * KHZ_US;
                let mask = bit(j) | bit(k);
                for s in 0..dim {
                    // σ₊σ₋ + σ₋σ₊ swaps antiparallel pairs
                    if (s & bit(j) == 0) != (s & bit(k) == 0) {
                        exchange[(s ^ mask, s)] += b;
                    }
                }
            }
        }
    }
    let index = (0..n).filter(|&k| !state[k]).map(bit).sum();
    let plus = Propagator::new(&exchange + DMatrix::from_diagonal(&zeeman), index);
    let minus = Propagator::new(&exchange - DMatrix::from_diagonal(&zeeman), index);
    Ok(times.iter().map(|&t| minus.evolve(t).dotc(&plus.evolve(t))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_spin_phase() {
        let pos = [1.0, 1.0, 6.0];
        let w = PI * dipolar_coupling(pos).unwrap().a_zz * KHZ_US;
        for (up, sign) in [(true, 1.0), (false, -1.0)] {
            let out = cluster_coherence(&[pos], &[up], &[0.0, 3.0], true).unwrap();
            assert!((out[0] - C64::new(1.0, 0.0)).norm() < 1e-14);
            assert!((out[1] - C64::from_polar(1.0, -sign * w * 3.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn parallel_pair_does_not_flip() {
        // |↑↑⟩ is an eigenstate of the exchange term
        let spins = [[0.0, 0.0, 5.0], [1.5, 0.0, 5.0]];
        let with = cluster_coherence(&spins, &[true, true], &[2.0], true).unwrap();
        let without = cluster_coherence(&spins, &[true, true], &[2.0], false).unwrap();
        assert!((with[0] - without[0]).norm() < 1e-12);
    }

    #[test]
    fn too_large_cluster_is_rejected() {
        let spins = vec![[1.0, 0.0, 5.0]; MAX_EXACT_SPINS + 1];
        let state = vec![true; MAX_EXACT_SPINS + 1];
        assert!(cluster_coherence(&spins, &state, &[1.0], false).is_err());
    }
}
