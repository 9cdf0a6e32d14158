//! Divergences, nonequilibrium temperatures, the distance to the free sets,
//! and the monotones built on them.
//!
//! Passive states and Gibbs states are diagonal in the energy basis, so most
//! quantities here reduce to sums over energy-basis populations of `ρ`, of
//! `ρ^α`, and of the candidate free state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::spectra::{
    self, entropy, gibbs_populations, passive_rearrangement, Beta, DensityMatrix, GibbsState,
    Hamiltonian, PassiveState,
};
use crate::workfn;

/// Eigenvalues below this floor count as outside the support.
pub const SUPPORT_FLOOR: f64 = 1e-14;
const SUPPORT_WEIGHT: f64 = 1e-12;
const ALPHA_ONE_TOL: f64 = 1e-6;
const NOT_PASSIVE_TOL: f64 = 1e-12;
const DENOMINATOR_TOL: f64 = 1e-12;

const BETA_GRID_POINTS: usize = 400;
const MULTISTART_RANDOM: usize = 20;
const DESCENT_ITERS: usize = 500;
const MULTISTART_SEED: u64 = 0x5eed_0001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    /// The value as a float, `+∞` for the infinite tag.
    pub fn value(self) -> f64 {
        match self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Divergence::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Divergence::Finite(v) => Some(v),
            Divergence::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Pav,
    #[serde(rename = "grid+local")]
    GridLocal,
    Multistart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Minimizer {
    Gibbs { beta: Beta, populations: Vec<f64> },
    Passive { populations: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneResult {
    pub value: f64,
    pub minimizer: Minimizer,
    pub method: Method,
}

/// A free state of either theory.
#[derive(Debug, Clone)]
pub enum FreeState {
    Gibbs(GibbsState),
    Passive(PassiveState),
}

/// Overlaps `|⟨r_i|s_j⟩|²` together with both spectra.
struct SpectralPair {
    r: Vec<f64>,
    s: Vec<f64>,
    overlap: Vec<Vec<f64>>,
}

impl SpectralPair {
    fn new(rho: &DensityMatrix, sigma: &DensityMatrix) -> Self {
        let (r, rv) = linalg::hermitian_eigen(rho.matrix());
        let (s, sv) = linalg::hermitian_eigen(sigma.matrix());
        let m = rv.adjoint() * sv;
        let overlap = (0..r.len())
            .map(|i| (0..s.len()).map(|j| m[(i, j)].norm_sqr()).collect())
            .collect();
        Self {
            r: r.into_iter().map(|x| x.max(0.0)).collect(),
            s: s.into_iter().map(|x| x.max(0.0)).collect(),
            overlap,
        }
    }

    /// Whether `ρ` puts weight above `1e-12` on the kernel of `σ`.
    fn support_violated(&self) -> bool {
        self.s.iter().enumerate().any(|(j, &sj)| {
            sj < SUPPORT_FLOOR
                && self
                    .r
                    .iter()
                    .enumerate()
                    .map(|(i, &ri)| ri * self.overlap[i][j])
                    .sum::<f64>()
                    > SUPPORT_WEIGHT
        })
    }
}

/// `S(ρ‖σ) = Tr{ρ(ln ρ − ln σ)}`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<Divergence> {
    ensure_dim(rho.dim(), sigma.dim())?;
    let pair = SpectralPair::new(rho, sigma);
    if pair.support_violated() {
        return Ok(Divergence::Infinite);
    }
    let mut cross = 0.0;
    for (i, &ri) in pair.r.iter().enumerate() {
        for (j, &sj) in pair.s.iter().enumerate() {
            if sj >= SUPPORT_FLOOR {
                cross += ri * pair.overlap[i][j] * sj.ln();
            }
        }
    }
    let neg_entropy: f64 = pair.r.iter().map(|&x| linalg::xlnx(x)).sum();
    Ok(Divergence::Finite((neg_entropy - cross).max(0.0)))
}

/// `S_α(ρ‖σ) = (Tr{ρ^α σ^{1−α}} − 1)/(α − 1)`; dispatches to the relative
/// entropy when `|α − 1| < 1e-6`.
pub fn tsallis_divergence(rho: &DensityMatrix, sigma: &DensityMatrix, alpha: f64) -> Result<Divergence> {
    check_alpha(alpha)?;
    if (alpha - 1.0).abs() < ALPHA_ONE_TOL {
        return relative_entropy(rho, sigma);
    }
    ensure_dim(rho.dim(), sigma.dim())?;
    let pair = SpectralPair::new(rho, sigma);
    if alpha > 1.0 && pair.support_violated() {
        return Ok(Divergence::Infinite);
    }
    let mut trace = 0.0;
    for (i, &ri) in pair.r.iter().enumerate() {
        if ri <= 0.0 {
            continue;
        }
        for (j, &sj) in pair.s.iter().enumerate() {
            if sj < SUPPORT_FLOOR {
                continue;
            }
            trace += ri.powf(alpha) * sj.powf(1.0 - alpha) * pair.overlap[i][j];
        }
    }
    Ok(Divergence::Finite(((trace - 1.0) / (alpha - 1.0)).max(0.0)))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("alpha must be > 0, got {alpha}")))
    }
}

/// Energy-basis data of `ρ` reused across temperature and divergence evaluations.
struct StateData {
    /// `⟨ε_k|ρ|ε_k⟩`.
    diag: Vec<f64>,
    /// Spectrum of `ρ`, nonincreasing.
    spectrum: Vec<f64>,
    neg_entropy: f64,
    /// `⟨ε_k|ρ^α|ε_k⟩`, filled for `α ≠ 1`.
    diag_pow: Vec<f64>,
    alpha: f64,
}

impl StateData {
    fn new(h: &Hamiltonian, rho: &DensityMatrix, alpha: f64) -> Result<Self> {
        ensure_dim(h.dim(), rho.dim())?;
        let diag = spectra::energy_populations(h, rho)?;
        let spectrum = passive_rearrangement(h, rho)?.populations().to_vec();
        let neg_entropy = -entropy(rho);
        let diag_pow = if is_alpha_one(alpha) {
            Vec::new()
        } else {
            let powered = linalg::hermitian_function(rho.matrix(), |x| x.max(0.0).powf(alpha));
            let m = h.to_energy_basis(&powered);
            (0..h.dim()).map(|k| m[(k, k)].re).collect()
        };
        Ok(Self {
            diag,
            spectrum,
            neg_entropy,
            diag_pow,
            alpha,
        })
    }

    /// Divergence of `ρ` from the energy-diagonal state `p`, `+∞` on support violation.
    fn divergence_to(&self, p: &[f64]) -> f64 {
        if is_alpha_one(self.alpha) {
            let mut cross = 0.0;
            for (&a, &pk) in self.diag.iter().zip(p) {
                if a <= SUPPORT_WEIGHT && pk < SUPPORT_FLOOR {
                    continue;
                }
                if pk < SUPPORT_FLOOR {
                    return f64::INFINITY;
                }
                cross += a * pk.ln();
            }
            (self.neg_entropy - cross).max(0.0)
        } else {
            let alpha = self.alpha;
            let mut trace = 0.0;
            for (&a, &pk) in self.diag_pow.iter().zip(p) {
                if pk < SUPPORT_FLOOR {
                    if alpha > 1.0 && a > SUPPORT_WEIGHT {
                        return f64::INFINITY;
                    }
                    continue;
                }
                trace += a * pk.powf(1.0 - alpha);
            }
            ((trace - 1.0) / (alpha - 1.0)).max(0.0)
        }
    }

    /// `Tr{(X_ρ − ρ) ln P}` at `α = 1`, `Tr{(X_ρ^α − ρ^α) P^{1−α}}` otherwise,
    /// where `X_ρ` is the energy-diagonal state with populations `reference`.
    fn temperature_denominator(&self, reference: &[f64], p: &[f64]) -> f64 {
        if is_alpha_one(self.alpha) {
            reference
                .iter()
                .zip(&self.diag)
                .zip(p)
                .map(|((&r, &a), &pk)| (r - a) * pk.ln())
                .sum()
        } else {
            let alpha = self.alpha;
            reference
                .iter()
                .zip(&self.diag_pow)
                .zip(p)
                .map(|((&r, &a), &pk)| {
                    let r_pow = if r > 0.0 { r.powf(alpha) } else { 0.0 };
                    (r_pow - a) * pk.powf(1.0 - alpha)
                })
                .sum()
        }
    }

    /// Generalised temperature `(1−α)·resource / denominator` (`resource / denominator` at `α = 1`).
    fn temperature(&self, resource: f64, reference: &[f64], p: &[f64]) -> Option<f64> {
        let denom = self.temperature_denominator(reference, p);
        let numer = if is_alpha_one(self.alpha) {
            resource
        } else {
            (1.0 - self.alpha) * resource
        };
        if denom.abs() < DENOMINATOR_TOL * numer.abs().max(1e-300) || denom == 0.0 {
            return None;
        }
        Some(numer / denom)
    }
}

fn is_alpha_one(alpha: f64) -> bool {
    (alpha - 1.0).abs() < ALPHA_ONE_TOL
}

fn require_full_rank(p: &[f64], what: &str) -> Result<()> {
    if p.iter().all(|&x| x >= SUPPORT_FLOOR) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} is not full rank")))
    }
}

fn require_nonpassive(h: &Hamiltonian, rho: &DensityMatrix) -> Result<f64> {
    let ergo = workfn::ergotropy(h, rho)?;
    if ergo > NOT_PASSIVE_TOL {
        Ok(ergo)
    } else {
        Err(Error::Domain("state is passive (zero ergotropy)".into()))
    }
}

/// `T(P|ρ) = ℰ(ρ) / Tr{(P_ρ − ρ) ln P}`. Signed; `1/β` when `P = γ_β`.
pub fn noneq_temperature(h: &Hamiltonian, p: &PassiveState, rho: &DensityMatrix) -> Result<f64> {
    tsallis_temperature_p(h, p, rho, 1.0)
}

/// `T_α(P|ρ) = (1−α) ℰ(ρ) / Tr{(P_ρ^α − ρ^α) P^{1−α}}`.
pub fn tsallis_temperature_p(h: &Hamiltonian, p: &PassiveState, rho: &DensityMatrix, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    ensure_dim(h.dim(), p.dim())?;
    let ergo = require_nonpassive(h, rho)?;
    require_full_rank(p.populations(), "passive state")?;
    let data = StateData::new(h, rho, alpha)?;
    data.temperature(ergo, &data.spectrum, p.populations())
        .ok_or_else(|| Error::Domain("temperature denominator vanishes".into()))
}

/// `T_{cp,α}(γ|ρ) = (1−α) F(ρ) / Tr{(γ_ρ^α − ρ^α) γ^{1−α}}`.
pub fn tsallis_temperature_cp(h: &Hamiltonian, gamma: &GibbsState, rho: &DensityMatrix, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let free = workfn::free_energy(h, rho)?;
    if free <= NOT_PASSIVE_TOL {
        return Err(Error::Domain("state is Gibbs (zero free energy)".into()));
    }
    if gamma.beta().is_infinite() {
        return Err(Error::Domain("reference Gibbs state must have finite beta".into()));
    }
    require_full_rank(gamma.populations(), "Gibbs state")?;
    let data = StateData::new(h, rho, alpha)?;
    let matched = workfn::entropy_matched_gibbs(h, rho)?;
    data.temperature(free, matched.populations(), gamma.populations())
        .ok_or_else(|| Error::Domain("temperature denominator vanishes".into()))
}

/// `D(ρ,γ) = T(γ) S(ρ‖γ)` or `D(ρ,P) = T(P|ρ) S(ρ‖P)`.
pub fn distance_to_free(h: &Hamiltonian, rho: &DensityMatrix, free: &FreeState) -> Result<f64> {
    match free {
        FreeState::Gibbs(g) => {
            let beta = match g.beta() {
                Beta::Finite(b) if b > 0.0 => b,
                _ => {
                    return Err(Error::Domain(
                        "distance to a Gibbs state needs finite beta > 0".into(),
                    ))
                }
            };
            let s = relative_entropy(rho, &g.to_density(h)?)?;
            match s {
                Divergence::Finite(v) => Ok(v / beta),
                Divergence::Infinite => Err(Error::Domain("relative entropy is infinite".into())),
            }
        }
        FreeState::Passive(p) => {
            let t = noneq_temperature(h, p, rho)?;
            let data = StateData::new(h, rho, 1.0)?;
            let s = data.divergence_to(p.populations());
            Ok(t * s)
        }
    }
}

/// Nonequilibrium Helmholtz gap `ΔF_β(ρ) = F_β(ρ) − F_β(γ_β)` with
/// `F_β(ρ) = E(ρ) − S(ρ)/β`.
pub fn helmholtz_gap(h: &Hamiltonian, rho: &DensityMatrix, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain("helmholtz gap needs beta > 0".into()));
    }
    let g = spectra::gibbs(h, Beta::Finite(beta))?;
    let e_gibbs = spectra::dot(h.eigenvalues(), g.populations());
    let s_gibbs = spectra::population_entropy(g.populations());
    Ok(spectra::energy(h, rho)? - e_gibbs - (entropy(rho) - s_gibbs) / beta)
}

/// `S(ρ‖γ_β) = −S(ρ) + β(E(ρ) − ε_1) + ln Σ_k e^{−β(ε_k−ε_1)}`.
fn gibbs_divergence(h: &Hamiltonian, neg_entropy: f64, shifted_energy: f64, beta: f64) -> f64 {
    let e0 = h.ground_energy();
    let z: f64 = h.eigenvalues().iter().map(|e| (-beta * (e - e0)).exp()).sum();
    neg_entropy + beta * shifted_energy + z.ln()
}

/// The coarse β grid `{0} ∪ logspace(1e-4, 1e4, 400)/(ε_d − ε_1)`.
pub fn beta_search_grid(h: &Hamiltonian) -> Vec<f64> {
    let mut grid = vec![0.0];
    if !h.is_fully_degenerate() {
        let gap = h.gap();
        grid.extend(linalg::logspace(1e-4, 1e4, BETA_GRID_POINTS).into_iter().map(|b| b / gap));
    }
    grid
}

/// `M_cp(ρ) = min_{β ≥ 0} S(ρ‖γ_β)`.
pub fn monotone_mcp(h: &Hamiltonian, rho: &DensityMatrix) -> Result<MonotoneResult> {
    ensure_dim(h.dim(), rho.dim())?;
    let neg_entropy = -entropy(rho);
    let shifted = spectra::energy(h, rho)? - h.ground_energy();
    let f = |b: f64| gibbs_divergence(h, neg_entropy, shifted, b);
    let grid = beta_search_grid(h);
    let (beta, value) = minimize_on_grid(&grid, &f);
    let beta = if beta > 0.0 && !h.is_fully_degenerate() {
        polish_energy_match(h, shifted + h.ground_energy(), beta, &grid)
    } else {
        beta
    };
    let value = f(beta).min(value).max(0.0);
    Ok(MonotoneResult {
        value,
        minimizer: Minimizer::Gibbs {
            beta: Beta::Finite(beta),
            populations: gibbs_populations(h.eigenvalues(), Beta::Finite(beta)),
        },
        method: Method::GridLocal,
    })
}

/// Grid scan followed by golden-section refinement between the neighbours of
/// the best grid point. Non-finite values are skipped.
fn minimize_on_grid(grid: &[f64], f: &impl Fn(f64) -> f64) -> (f64, f64) {
    let values: Vec<f64> = grid.iter().map(|&b| f(b)).collect();
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i);
    let Some(best) = best else {
        return (f64::NAN, f64::INFINITY);
    };
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let guarded = |b: f64| {
        let v = f(b);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let (b, v) = if hi > lo {
        linalg::golden_section(lo, hi, 200, guarded)
    } else {
        (grid[best], values[best])
    };
    if v <= values[best] {
        (b, v)
    } else {
        (grid[best], values[best])
    }
}

/// Newton steps on `E(γ_β) = E(ρ)`, the stationarity condition of `S(ρ‖γ_β)`.
fn polish_energy_match(h: &Hamiltonian, target_energy: f64, start: f64, grid: &[f64]) -> f64 {
    let eps = h.eigenvalues();
    let upper = *grid.last().unwrap();
    let mut beta = start;
    for _ in 0..50 {
        let p = gibbs_populations(eps, Beta::Finite(beta));
        let mean = spectra::dot(eps, &p);
        let var: f64 = eps.iter().zip(&p).map(|(e, q)| q * (e - mean).powi(2)).sum();
        if var <= 0.0 {
            break;
        }
        // d/dβ [E(ρ) − E(γ_β)] = Var_β(H)
        let step = (target_energy - mean) / var;
        let next = (beta - step).clamp(0.0, upper);
        if (next - beta).abs() <= 1e-15 * beta.max(1.0) {
            beta = next;
            break;
        }
        beta = next;
    }
    beta
}

/// Nonincreasing least-squares fit (pool adjacent violators, unit weights).
pub fn pav_nonincreasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let n = blocks.len();
            let (last_mean, last_w) = blocks[n - 1];
            let (prev_mean, prev_w) = blocks[n - 2];
            if prev_mean >= last_mean {
                break;
            }
            let w = prev_w + last_w;
            blocks[n - 2] = ((prev_mean * prev_w as f64 + last_mean * last_w as f64) / w as f64, w);
            blocks.pop();
        }
    }
    blocks
        .into_iter()
        .flat_map(|(mean, w)| std::iter::repeat_n(mean, w))
        .collect()
}

/// `M_p(ρ) = min_{P ∈ Π} S(ρ‖P)`, attained at the nonincreasing fit of the
/// energy-basis populations of `ρ`.
pub fn monotone_mp(h: &Hamiltonian, rho: &DensityMatrix) -> Result<MonotoneResult> {
    let data = StateData::new(h, rho, 1.0)?;
    let fitted = pav_nonincreasing(&data.diag);
    let p = PassiveState::from_weights(fitted).populations().to_vec();
    let value = data.divergence_to(&p);
    Ok(MonotoneResult {
        value,
        minimizer: Minimizer::Passive { populations: p },
        method: Method::Pav,
    })
}

fn check_nu(nu: f64) -> Result<()> {
    if (0.0..=1.0).contains(&nu) {
        Ok(())
    } else {
        Err(Error::Validation(format!("nu must lie in [0, 1], got {nu}")))
    }
}

/// `M_{p,αν}(ρ) = min_{P ∈ Π} T_α(P|ρ)^ν S_α(ρ‖P)` by multistart descent.
pub fn family_mp(h: &Hamiltonian, rho: &DensityMatrix, alpha: f64, nu: f64) -> Result<MonotoneResult> {
    check_alpha(alpha)?;
    check_nu(nu)?;
    let ergo = if nu > 0.0 {
        require_nonpassive(h, rho)?
    } else {
        workfn::ergotropy(h, rho)?
    };
    let data = StateData::new(h, rho, alpha)?;
    let objective = |p: &[f64]| passive_objective(&data, ergo, nu, p);

    let d = h.dim();
    let mut starts: Vec<Vec<f64>> = vec![
        data.spectrum.clone(),
        match monotone_mp(h, rho)?.minimizer {
            Minimizer::Passive { populations } => populations,
            Minimizer::Gibbs { populations, .. } => populations,
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(MULTISTART_SEED);
    for _ in 0..MULTISTART_RANDOM {
        starts.push(spectra::sample_passive(d, &mut rng).populations().to_vec());
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in &starts {
        let (v, p) = descend_ordered_simplex(start, &objective);
        if v.is_finite() && best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, p));
        }
    }
    let (value, p) = best.ok_or_else(|| {
        Error::Domain("no passive state with positive temperature was found".into())
    })?;
    Ok(MonotoneResult {
        value,
        minimizer: Minimizer::Passive { populations: p },
        method: Method::Multistart,
    })
}

fn passive_objective(data: &StateData, ergo: f64, nu: f64, p: &[f64]) -> f64 {
    if p.iter().any(|&x| x < SUPPORT_FLOOR) {
        return f64::INFINITY;
    }
    let s = data.divergence_to(p);
    if !s.is_finite() {
        return f64::INFINITY;
    }
    if nu == 0.0 {
        return s;
    }
    match data.temperature(ergo, &data.spectrum, p) {
        Some(t) if t > 0.0 => t.powf(nu) * s,
        _ => f64::INFINITY,
    }
}

/// Ordered-simplex coordinates: `p = Σ_j w_j u_j` with `u_j` uniform on the
/// first `j+1` levels and `w = softmax(z)`.
fn populations_from_logits(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|x| (x - m).exp()).collect();
    let total: f64 = e.iter().sum();
    let d = z.len();
    let mut p = vec![0.0; d];
    let mut tail = 0.0;
    for j in (0..d).rev() {
        tail += e[j] / total / (j + 1) as f64;
        p[j] = tail;
    }
    p
}

fn logits_from_populations(p: &[f64]) -> Vec<f64> {
    let d = p.len();
    // Keep every start strictly inside the simplex.
    let eps = 1e-10;
    let q: Vec<f64> = p.iter().map(|&x| (1.0 - eps) * x + eps / d as f64).collect();
    (0..d)
        .map(|j| {
            let next = if j + 1 < d { q[j + 1] } else { 0.0 };
            ((j + 1) as f64 * (q[j] - next)).max(1e-300).ln()
        })
        .collect()
}

/// Gradient descent with backtracking in logit coordinates.
fn descend_ordered_simplex(start: &[f64], objective: &impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let start_value = objective(start);
    let mut z = logits_from_populations(start);
    let mut p = populations_from_logits(&z);
    let mut value = objective(&p);
    if !value.is_finite() {
        return if start_value.is_finite() {
            (start_value, start.to_vec())
        } else {
            (f64::INFINITY, p)
        };
    }
    let d = z.len();
    let mut step = 1.0;
    let h = 1e-6;
    for _ in 0..DESCENT_ITERS {
        let mut grad = vec![0.0; d];
        for k in 0..d {
            let mut zp = z.clone();
            zp[k] += h;
            let mut zm = z.clone();
            zm[k] -= h;
            let (fp, fm) = (objective(&populations_from_logits(&zp)), objective(&populations_from_logits(&zm)));
            grad[k] = if fp.is_finite() && fm.is_finite() {
                (fp - fm) / (2.0 * h)
            } else if fp.is_finite() {
                (fp - value) / h
            } else if fm.is_finite() {
                (value - fm) / h
            } else {
                0.0
            };
        }
        let norm2: f64 = grad.iter().map(|g| g * g).sum();
        if norm2 < 1e-30 {
            break;
        }
        let mut accepted = false;
        while step > 1e-12 {
            let cand: Vec<f64> = z.iter().zip(&grad).map(|(zi, gi)| zi - step * gi).collect();
            let pc = populations_from_logits(&cand);
            let vc = objective(&pc);
            if vc.is_finite() && vc <= value - 1e-4 * step * norm2 {
                z = cand;
                p = pc;
                let improvement = value - vc;
                value = vc;
                accepted = true;
                step *= 2.0;
                if improvement <= 1e-16 * value.abs().max(1e-300) {
                    accepted = false;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if start_value.is_finite() && start_value <= value {
        (start_value, start.to_vec())
    } else {
        (value, p)
    }
}

/// `M_{cp,αν}(ρ) = min_{β ≥ 0} T_{cp,α}(γ_β|ρ)^ν S_α(ρ‖γ_β)` on a β grid with local refinement.
pub fn family_mcp(h: &Hamiltonian, rho: &DensityMatrix, alpha: f64, nu: f64) -> Result<MonotoneResult> {
    check_alpha(alpha)?;
    check_nu(nu)?;
    ensure_dim(h.dim(), rho.dim())?;
    let free = workfn::free_energy(h, rho)?;
    if nu > 0.0 && free <= NOT_PASSIVE_TOL {
        return Err(Error::Domain("state is Gibbs (zero free energy)".into()));
    }
    let data = StateData::new(h, rho, alpha)?;
    let matched_beta = workfn::beta_of_state(h, rho)?.beta;
    let matched = gibbs_populations(h.eigenvalues(), matched_beta);
    let objective = |beta: f64| {
        if !(beta >= 0.0) {
            return f64::INFINITY;
        }
        let g = gibbs_populations(h.eigenvalues(), Beta::Finite(beta));
        let s = data.divergence_to(&g);
        if !s.is_finite() {
            return f64::INFINITY;
        }
        if nu == 0.0 {
            return s;
        }
        if g.iter().any(|&x| x < SUPPORT_FLOOR) {
            return f64::INFINITY;
        }
        match data.temperature(free, &matched, &g) {
            Some(t) if t > 0.0 => t.powf(nu) * s,
            _ => f64::INFINITY,
        }
    };
    let mut grid = beta_search_grid(h);
    if nu > 0.0 {
        grid.retain(|&b| b > 0.0);
    }
    if grid.is_empty() {
        // Fully degenerate spectrum: only β = 0 exists.
        let v = objective(0.0);
        return Ok(MonotoneResult {
            value: v,
            minimizer: Minimizer::Gibbs {
                beta: Beta::Finite(0.0),
                populations: gibbs_populations(h.eigenvalues(), Beta::Finite(0.0)),
            },
            method: Method::GridLocal,
        });
    }
    let (mut beta, mut value) = minimize_on_grid(&grid, &objective);
    if let Beta::Finite(b) = matched_beta {
        let v = objective(b);
        if v.is_finite() && v <= value {
            beta = b;
            value = v;
        }
    }
    if !value.is_finite() {
        return Err(Error::Domain("no Gibbs state with positive temperature was found".into()));
    }
    Ok(MonotoneResult {
        value,
        minimizer: Minimizer::Gibbs {
            beta: Beta::Finite(beta),
            populations: gibbs_populations(h.eigenvalues(), Beta::Finite(beta)),
        },
        method: Method::GridLocal,
    })
}

/// Operator `ρ^α` (clipped spectrum), exposed for callers that need it directly.
pub fn state_power(rho: &DensityMatrix, alpha: f64) -> CMatrix {
    linalg::hermitian_function(rho.matrix(), |x| x.max(0.0).powf(alpha))
}
