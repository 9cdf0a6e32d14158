//! States, Hamiltonians and spectral constructions.
//!
//! Every matrix handed to this module lives in the computational basis. A
//! [`Hamiltonian`] carries the unitary whose columns are its eigenvectors, so
//! "energy basis" quantities are obtained by conjugating with that unitary.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, re, CMatrix, CVector};

/// Tolerance used to decide whether two energy levels are degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

const ROUNDOFF: f64 = 1e-14;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;

/// Inverse temperature. The zero-temperature limit is a distinct variant and
/// never a large float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub fn finite(self) -> Option<f64> {
        match self {
            Beta::Finite(b) => Some(b),
            Beta::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Beta::Infinite)
    }

    /// `1/β`, with `T = ∞` at `β = 0` and `T = 0` at infinite `β`.
    pub fn temperature(self) -> f64 {
        match self {
            Beta::Finite(b) => 1.0 / b,
            Beta::Infinite => 0.0,
        }
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    eigenvalues: Vec<f64>,
    basis: Option<CMatrix>,
}

impl Hamiltonian {
    /// Hamiltonian diagonal in the computational basis.
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        Self::build(eigenvalues, None)
    }

    pub fn with_basis(eigenvalues: Vec<f64>, basis: CMatrix) -> Result<Self> {
        Self::build(eigenvalues, Some(basis))
    }

    fn build(eigenvalues: Vec<f64>, basis: Option<CMatrix>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Validation("hamiltonian must have dimension >= 1".into()));
        }
        if eigenvalues.iter().any(|e| !e.is_finite()) {
            return Err(Error::Validation("hamiltonian eigenvalues must be finite".into()));
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Validation(
                "hamiltonian eigenvalues must be nondecreasing".into(),
            ));
        }
        if let Some(u) = &basis {
            ensure_dim(eigenvalues.len(), u.nrows())?;
            if !linalg::is_unitary(u, UNITARY_TOL) {
                return Err(Error::Validation("hamiltonian basis is not unitary".into()));
            }
        }
        Ok(Self { eigenvalues, basis })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> Option<&CMatrix> {
        self.basis.as_ref()
    }

    pub fn basis_matrix(&self) -> CMatrix {
        self.basis
            .clone()
            .unwrap_or_else(|| CMatrix::identity(self.dim(), self.dim()))
    }

    /// `|ε_k⟩` in the computational basis.
    pub fn level_vector(&self, k: usize) -> CVector {
        match &self.basis {
            Some(u) => u.column(k).into_owned(),
            None => {
                let mut v = CVector::zeros(self.dim());
                v[k] = re(1.0);
                v
            }
        }
    }

    pub fn matrix(&self) -> CMatrix {
        self.from_energy_basis(&linalg::diag_real(&self.eigenvalues))
    }

    /// `U† M U`: coordinates of `M` in the energy eigenbasis.
    pub fn to_energy_basis(&self, m: &CMatrix) -> CMatrix {
        match &self.basis {
            Some(u) => u.adjoint() * m * u,
            None => m.clone(),
        }
    }

    /// `U M U†`: maps energy-basis coordinates back to the computational basis.
    pub fn from_energy_basis(&self, m: &CMatrix) -> CMatrix {
        match &self.basis {
            Some(u) => u * m * u.adjoint(),
            None => m.clone(),
        }
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `ε_d − ε_1`.
    pub fn gap(&self) -> f64 {
        self.eigenvalues[self.dim() - 1] - self.eigenvalues[0]
    }

    pub fn is_fully_degenerate(&self) -> bool {
        self.gap() <= DEGENERACY_TOL
    }

    pub fn ground_degeneracy(&self) -> usize {
        self.levels()[0].len()
    }

    /// Index ranges of the distinct energy levels, in increasing energy.
    pub fn levels(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.dim() {
            if k == self.dim() || self.eigenvalues[k] - self.eigenvalues[k - 1] > DEGENERACY_TOL {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    /// Largest `β` explored by the solvers: `1e4 / (ε_d − ε_1)`.
    pub fn beta_max(&self) -> f64 {
        if self.is_fully_degenerate() {
            0.0
        } else {
            1e4 / self.gap()
        }
    }

    /// Density matrix diagonal in the energy basis with the given populations.
    pub fn embed_populations(&self, populations: &[f64]) -> Result<DensityMatrix> {
        ensure_dim(self.dim(), populations.len())?;
        DensityMatrix::new(self.from_energy_basis(&linalg::diag_real(populations)))
    }
}

/// Validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity. Eigenvalues in
    /// `[-1e-10, 0)` are clipped and the state renormalised.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::validate(matrix, HERMITIAN_TOL, TRACE_TOL, PSD_TOL)
    }

    /// Looser validation for outputs of numerical maps whose round-off can
    /// exceed the strict input tolerances.
    pub(crate) fn from_numerical(matrix: CMatrix) -> Result<Self> {
        Self::validate(matrix, 1e-8, 1e-8, 1e-8)
    }

    fn validate(matrix: CMatrix, herm_tol: f64, trace_tol: f64, psd_tol: f64) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::Validation("density matrix must be square and nonempty".into()));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("density matrix has non-finite entries".into()));
        }
        let asym = linalg::max_abs(&(&matrix - matrix.adjoint()));
        if asym > herm_tol {
            return Err(Error::Validation(format!(
                "density matrix is not Hermitian (max asymmetry {asym:e})"
            )));
        }
        let trace = linalg::real_trace(&matrix);
        if (trace - 1.0).abs() > trace_tol {
            return Err(Error::Validation(format!("density matrix trace is {trace}, expected 1")));
        }
        let m = linalg::hermitize(&matrix);
        let (values, vectors) = linalg::hermitian_eigen(&m);
        let min = values[0];
        if min < -psd_tol {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {min:e}"
            )));
        }
        // Round-off defects are left alone so that parsing an emitted state
        // reproduces it bit for bit.
        if min < -ROUNDOFF || (trace - 1.0).abs() > ROUNDOFF {
            let clipped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            let scaled: Vec<f64> = clipped.iter().map(|v| v / total).collect();
            let rebuilt = if min < -ROUNDOFF {
                &vectors * linalg::diag_real(&scaled) * vectors.adjoint()
            } else {
                m.unscale(trace)
            };
            return Ok(Self { matrix: linalg::hermitize(&rebuilt) });
        }
        Ok(Self { matrix: m })
    }

    pub fn from_diagonal(populations: &[f64]) -> Result<Self> {
        Self::new(linalg::diag_real(populations))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalised) vector.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Validation("pure state vector must be nonzero".into()));
        }
        let v = psi.unscale(norm);
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim).unscale(dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    pub fn conjugate(&self, u: &CMatrix) -> Result<Self> {
        ensure_dim(self.dim(), u.nrows())?;
        Self::from_numerical(u * &self.matrix * u.adjoint())
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self {
            matrix: linalg::kron(&self.matrix, &other.matrix),
        }
    }

    /// Convex combination `Σ w_i ρ_i`.
    pub fn mixture(states: &[DensityMatrix], weights: &[f64]) -> Result<Self> {
        if states.is_empty() || states.len() != weights.len() {
            return Err(Error::Validation("mixture needs one weight per state".into()));
        }
        let d = states[0].dim();
        let mut m = CMatrix::zeros(d, d);
        for (s, &w) in states.iter().zip(weights) {
            ensure_dim(d, s.dim())?;
            if w < 0.0 {
                return Err(Error::Validation("mixture weights must be nonnegative".into()));
            }
            m += s.matrix.scale(w);
        }
        Self::from_numerical(m)
    }

    /// Distance `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        0.5 * linalg::trace_norm(&(&self.matrix - &other.matrix))
    }
}

/// Eigen-decomposition of a state with populations sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub populations: Vec<f64>,
    /// Column `k` is `|r_k⟩`.
    pub vectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> CMatrix {
        &self.vectors * linalg::diag_real(&self.populations) * self.vectors.adjoint()
    }
}

/// Nonincreasing populations in the energy basis of some Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassiveState {
    populations: Vec<f64>,
}

impl PassiveState {
    pub fn new(populations: Vec<f64>) -> Result<Self> {
        if populations.is_empty() {
            return Err(Error::Validation("passive state must be nonempty".into()));
        }
        if populations.iter().any(|p| !p.is_finite() || *p < -1e-12) {
            return Err(Error::Validation("passive populations must be nonnegative".into()));
        }
        if populations.windows(2).any(|w| w[0] < w[1] - 1e-12) {
            return Err(Error::Validation("passive populations must be nonincreasing".into()));
        }
        let total: f64 = populations.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!("passive populations sum to {total}")));
        }
        Ok(Self { populations })
    }

    /// Sorts, clips and renormalises arbitrary nonnegative weights.
    pub(crate) fn from_weights(mut weights: Vec<f64>) -> Self {
        for w in weights.iter_mut() {
            *w = w.max(0.0);
        }
        weights.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        Self { populations: weights }
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn dim(&self) -> usize {
        self.populations.len()
    }

    pub fn is_full_rank(&self, floor: f64) -> bool {
        self.populations.iter().all(|&p| p >= floor)
    }

    pub fn to_density(&self, h: &Hamiltonian) -> Result<DensityMatrix> {
        h.embed_populations(&self.populations)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsState {
    beta: Beta,
    populations: Vec<f64>,
}

impl GibbsState {
    pub fn beta(&self) -> Beta {
        self.beta
    }

    pub fn temperature(&self) -> f64 {
        self.beta.temperature()
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn as_passive(&self) -> PassiveState {
        PassiveState {
            populations: self.populations.clone(),
        }
    }

    pub fn to_density(&self, h: &Hamiltonian) -> Result<DensityMatrix> {
        h.embed_populations(&self.populations)
    }
}

/// `e^{−β ε_k} / Z`, evaluated with energies shifted to the ground level.
pub(crate) fn gibbs_populations(eigenvalues: &[f64], beta: Beta) -> Vec<f64> {
    let e0 = eigenvalues[0];
    let weights: Vec<f64> = match beta {
        Beta::Finite(b) => eigenvalues.iter().map(|e| (-b * (e - e0)).exp()).collect(),
        Beta::Infinite => eigenvalues
            .iter()
            .map(|e| if e - e0 <= DEGENERACY_TOL { 1.0 } else { 0.0 })
            .collect(),
    };
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

pub(crate) fn population_entropy(p: &[f64]) -> f64 {
    -p.iter().map(|&x| linalg::xlnx(x)).sum::<f64>()
}

pub fn gibbs(h: &Hamiltonian, beta: Beta) -> Result<GibbsState> {
    if let Beta::Finite(b) = beta {
        if !(b >= 0.0) || !b.is_finite() {
            return Err(Error::Validation(format!(
                "inverse temperature must be finite and >= 0, got {b}"
            )));
        }
    }
    Ok(GibbsState {
        beta,
        populations: gibbs_populations(h.eigenvalues(), beta),
    })
}

pub fn spectral(rho: &DensityMatrix) -> SpectralDecomposition {
    let (values, vectors) = linalg::hermitian_eigen(rho.matrix());
    let d = values.len();
    let mut cols: Vec<(f64, CVector)> = (0..d)
        .rev()
        .map(|k| {
            let mut v = vectors.column(k).into_owned();
            linalg::fix_phase(&mut v);
            (values[k].max(0.0), v)
        })
        .collect();
    // Degenerate blocks are ordered lexicographically by eigenvector entries.
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (cols[end - 1].0 - cols[end].0).abs() <= 1e-12 {
            end += 1;
        }
        cols[start..end].sort_by(|a, b| lex_cmp(&a.1, &b.1));
        start = end;
    }
    let mut populations: Vec<f64> = cols.iter().map(|c| c.0).collect();
    let total: f64 = populations.iter().sum();
    for p in populations.iter_mut() {
        *p /= total;
    }
    let mut out = CMatrix::zeros(d, d);
    for (k, (_, v)) in cols.iter().enumerate() {
        out.set_column(k, v);
    }
    SpectralDecomposition {
        populations,
        vectors: out,
    }
}

fn lex_cmp(a: &CVector, b: &CVector) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Diagonal of `ρ` in the energy basis, `a_k = ⟨ε_k|ρ|ε_k⟩`.
pub fn energy_populations(h: &Hamiltonian, rho: &DensityMatrix) -> Result<Vec<f64>> {
    ensure_dim(h.dim(), rho.dim())?;
    let m = h.to_energy_basis(rho.matrix());
    Ok((0..h.dim()).map(|k| m[(k, k)].re).collect())
}

/// `Tr{Hρ}`.
pub fn energy(h: &Hamiltonian, rho: &DensityMatrix) -> Result<f64> {
    let a = energy_populations(h, rho)?;
    Ok(dot(h.eigenvalues(), &a))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Von Neumann entropy in nats.
pub fn entropy(rho: &DensityMatrix) -> f64 {
    let s = population_entropy(&rho.eigenvalues());
    s.clamp(0.0, (rho.dim() as f64).ln())
}

/// `P_ρ = Σ r_k |ε_k⟩⟨ε_k|`.
pub fn passive_rearrangement(h: &Hamiltonian, rho: &DensityMatrix) -> Result<PassiveState> {
    ensure_dim(h.dim(), rho.dim())?;
    Ok(PassiveState::from_weights(rho.eigenvalues()))
}

/// How far `ρ` is from the passive set: the larger of `‖[H, ρ]‖_max` and the
/// worst population inversion between distinct energy levels.
pub fn passivity_violation(h: &Hamiltonian, rho: &DensityMatrix) -> Result<f64> {
    ensure_dim(h.dim(), rho.dim())?;
    let m = h.to_energy_basis(rho.matrix());
    let eps = h.eigenvalues();
    let d = h.dim();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            worst = worst.max(((eps[i] - eps[j]) * m[(i, j)]).norm());
        }
    }
    // Population ordering across levels; inside a level only the block spectrum matters.
    let spectra: Vec<Vec<f64>> = h
        .levels()
        .into_iter()
        .map(|r| {
            let block = m.view((r.start, r.start), (r.len(), r.len())).into_owned();
            linalg::hermitian_eigenvalues(&block)
        })
        .collect();
    for lo in 0..spectra.len() {
        let min_lo = spectra[lo][0];
        for hi in spectra.iter().skip(lo + 1) {
            let max_hi = hi[hi.len() - 1];
            worst = worst.max(max_hi - min_lo);
        }
    }
    Ok(worst)
}

pub fn is_passive(h: &Hamiltonian, rho: &DensityMatrix, tol: f64) -> Result<bool> {
    Ok(passivity_violation(h, rho)? <= tol)
}

/// `U_ρ = Σ_k |ε_k⟩⟨r_k|` with all phases set to zero.
pub fn extraction_unitary(h: &Hamiltonian, rho: &DensityMatrix) -> Result<CMatrix> {
    ensure_dim(h.dim(), rho.dim())?;
    let sd = spectral(rho);
    Ok(h.basis_matrix() * sd.vectors.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateMeasure {
    HilbertSchmidt,
    HaarPure,
}

impl FromStr for StateMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hilbert-schmidt" => Ok(Self::HilbertSchmidt),
            "haar-pure" => Ok(Self::HaarPure),
            other => Err(Error::Validation(format!("unknown state measure `{other}`"))),
        }
    }
}

pub fn random_state(d: usize, measure: StateMeasure, seed: u64) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::Validation("random states need d >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_state(d, measure, &mut rng))
}

pub(crate) fn sample_state<R: Rng + ?Sized>(d: usize, measure: StateMeasure, rng: &mut R) -> DensityMatrix {
    match measure {
        StateMeasure::HilbertSchmidt => {
            let g = linalg::ginibre(d, d, rng);
            let w = &g * g.adjoint();
            let t = linalg::real_trace(&w);
            DensityMatrix {
                matrix: linalg::hermitize(&w.unscale(t)),
            }
        }
        StateMeasure::HaarPure => {
            let g = linalg::ginibre(d, 1, rng);
            let v: CVector = g.column(0).into_owned();
            let v = v.unscale(v.norm());
            DensityMatrix {
                matrix: linalg::hermitize(&(&v * v.adjoint())),
            }
        }
    }
}

pub fn random_unitary(d: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    linalg::haar_unitary(d, &mut rng)
}

/// Flat-Dirichlet sample sorted nonincreasing.
pub fn random_passive(h: &Hamiltonian, seed: u64) -> PassiveState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_passive(h.dim(), &mut rng)
}

pub(crate) fn sample_passive<R: Rng + ?Sized>(d: usize, rng: &mut R) -> PassiveState {
    let w: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    PassiveState::from_weights(w)
}
