//! Work-extraction functionals: ergotropy, the entropy-matched inverse
//! temperature `β(ρ)`, free energy, coherent ergotropy and the many-copy
//! ergotropy.

use serde::{Deserialize, Serialize};

use crate::channels;
use crate::error::{ensure_dim, Error, Result};
use crate::spectra::{
    self, energy, entropy, gibbs_populations, passive_rearrangement, population_entropy, Beta,
    DensityMatrix, GibbsState, Hamiltonian,
};

/// Default cap on `d^n` for [`ergotropy_ncopy`].
pub const NCOPY_CAP: u128 = 2_000_000;

const BISECTION_ITERS: usize = 200;
const ENTROPY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSolution {
    pub beta: Beta,
    pub achieved_entropy: f64,
    /// `|S(γ_β) − S(ρ)|`.
    pub residual: f64,
}

/// `ℰ(ρ) = E(ρ) − E(P_ρ)`, clipped at zero.
pub fn ergotropy(h: &Hamiltonian, rho: &DensityMatrix) -> Result<f64> {
    let e = energy(h, rho)?;
    let passive = passive_rearrangement(h, rho)?;
    let e_passive = spectra::dot(h.eigenvalues(), passive.populations());
    Ok((e - e_passive).max(0.0))
}

/// `ℰ(ρ) − ℰ(Δ(ρ))`.
pub fn coherent_ergotropy(h: &Hamiltonian, rho: &DensityMatrix) -> Result<f64> {
    let dephased = channels::apply(&channels::dephasing(h), rho)?;
    Ok((ergotropy(h, rho)? - ergotropy(h, &dephased)?).max(0.0))
}

/// Solves `S(γ_β) = S(ρ)` by bisection on `β ∈ [0, β_max]`.
pub fn beta_of_state(h: &Hamiltonian, rho: &DensityMatrix) -> Result<BetaSolution> {
    ensure_dim(h.dim(), rho.dim())?;
    Ok(beta_for_entropy(h, entropy(rho)))
}

pub(crate) fn beta_for_entropy(h: &Hamiltonian, target: f64) -> BetaSolution {
    let eps = h.eigenvalues();
    let entropy_at = |b: f64| population_entropy(&gibbs_populations(eps, Beta::Finite(b)));
    if h.is_fully_degenerate() {
        let s = (h.dim() as f64).ln();
        return BetaSolution {
            beta: Beta::Finite(0.0),
            achieved_entropy: s,
            residual: (s - target).abs(),
        };
    }
    let ground = (h.ground_degeneracy() as f64).ln();
    if target <= ground + ENTROPY_TOL {
        return BetaSolution {
            beta: Beta::Infinite,
            achieved_entropy: ground,
            residual: (ground - target).abs(),
        };
    }
    let s0 = entropy_at(0.0);
    if target >= s0 {
        return BetaSolution {
            beta: Beta::Finite(0.0),
            achieved_entropy: s0,
            residual: (s0 - target).abs(),
        };
    }
    // S(γ_β) decreases strictly in β.
    let (mut lo, mut hi) = (0.0, h.beta_max());
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if entropy_at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (s_lo, s_hi) = (entropy_at(lo), entropy_at(hi));
    let (beta, s) = if (s_lo - target).abs() <= (s_hi - target).abs() {
        (lo, s_lo)
    } else {
        (hi, s_hi)
    };
    BetaSolution {
        beta: Beta::Finite(beta),
        achieved_entropy: s,
        residual: (s - target).abs(),
    }
}

/// `γ_ρ`: the Gibbs state with the same entropy as `ρ`.
pub fn entropy_matched_gibbs(h: &Hamiltonian, rho: &DensityMatrix) -> Result<GibbsState> {
    spectra::gibbs(h, beta_of_state(h, rho)?.beta)
}

/// `F(ρ) = E(ρ) − E(γ_ρ)`, clipped at zero. Zero on fully degenerate spectra.
pub fn free_energy(h: &Hamiltonian, rho: &DensityMatrix) -> Result<f64> {
    ensure_dim(h.dim(), rho.dim())?;
    if h.is_fully_degenerate() {
        return Ok(0.0);
    }
    let gamma = entropy_matched_gibbs(h, rho)?;
    let e_gibbs = spectra::dot(h.eigenvalues(), gamma.populations());
    Ok((energy(h, rho)? - e_gibbs).max(0.0))
}

/// Free energy of a state diagonal in the energy basis, from its populations.
pub(crate) fn free_energy_of_populations(h: &Hamiltonian, populations: &[f64]) -> f64 {
    if h.is_fully_degenerate() {
        return 0.0;
    }
    let sol = beta_for_entropy(h, population_entropy(populations));
    let gamma = gibbs_populations(h.eigenvalues(), sol.beta);
    (spectra::dot(h.eigenvalues(), populations) - spectra::dot(h.eigenvalues(), &gamma)).max(0.0)
}

/// `ℰ(ρ) − F(ρ) + F(P_ρ)`; vanishes identically.
pub fn ergo_free_identity_gap(h: &Hamiltonian, rho: &DensityMatrix) -> Result<f64> {
    let passive = passive_rearrangement(h, rho)?;
    Ok(ergotropy(h, rho)? - free_energy(h, rho)? + free_energy_of_populations(h, passive.populations()))
}

/// Ergotropy of `ρ^{⊗n}` for `H_total = Σ_i H_i`, without building the
/// `d^n × d^n` matrix.
///
/// The spectrum of `ρ^{⊗n}` is the multiset of `n`-fold products of the
/// `r_k` and the total energies are the `n`-fold sums of the `ε_k`; the
/// passive energy pairs the two in opposite order. Products are ranked by
/// their log-sums, with zero eigenvalues ranked last.
pub fn ergotropy_ncopy(h: &Hamiltonian, rho: &DensityMatrix, n: u32) -> Result<f64> {
    ergotropy_ncopy_capped(h, rho, n, NCOPY_CAP)
}

pub fn ergotropy_ncopy_capped(h: &Hamiltonian, rho: &DensityMatrix, n: u32, cap: u128) -> Result<f64> {
    ensure_dim(h.dim(), rho.dim())?;
    if n == 0 {
        return Err(Error::Validation("copy number must be >= 1".into()));
    }
    let d = h.dim();
    let size = (d as u128).checked_pow(n).unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    let r = passive_rearrangement(h, rho)?;
    let logs: Vec<f64> = r
        .populations()
        .iter()
        .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
        .collect();
    let mut log_products = n_fold(&logs, n);
    let mut energies = n_fold(h.eigenvalues(), n);
    log_products.sort_by(|a, b| b.total_cmp(a));
    energies.sort_by(|a, b| a.total_cmp(b));
    let passive_energy: f64 = log_products
        .iter()
        .zip(&energies)
        .filter(|(l, _)| l.is_finite())
        .map(|(l, e)| l.exp() * e)
        .sum();
    let total_energy = n as f64 * energy(h, rho)?;
    Ok((total_energy - passive_energy).max(0.0))
}

/// All `n`-fold sums `x_{k1} + ... + x_{kn}` in lexicographic index order.
fn n_fold(values: &[f64], n: u32) -> Vec<f64> {
    let mut acc = vec![0.0];
    for _ in 0..n {
        let mut next = Vec::with_capacity(acc.len() * values.len());
        for &a in &acc {
            for &v in values {
                next.push(a + v);
            }
        }
        acc = next;
    }
    acc
}
