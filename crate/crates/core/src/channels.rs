//! Kraus-represented CPTP maps and the state-dependent channel families.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, c, re, CMatrix, CVector};
use crate::spectra::{self, Beta, DensityMatrix, Hamiltonian};
use crate::workfn;

const COMPLETENESS_TOL: f64 = 1e-9;
const UNITARY_TOL: f64 = 1e-10;
const THERMAL_DIM_CAP: usize = 64;
const ENERGY_BUCKET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    dim: usize,
    kraus: Vec<CMatrix>,
    label: String,
}

impl KrausChannel {
    /// Validates shapes and the completeness identity `Σ K†K = I`.
    pub fn new(kraus: Vec<CMatrix>, label: impl Into<String>) -> Result<Self> {
        let Some(first) = kraus.first() else {
            return Err(Error::Validation("channel needs at least one Kraus operator".into()));
        };
        let dim = first.nrows();
        if dim == 0 {
            return Err(Error::Validation("Kraus operators must be nonempty".into()));
        }
        for k in &kraus {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::Validation("Kraus operators must all be d x d".into()));
            }
        }
        let ch = Self {
            dim,
            kraus,
            label: label.into(),
        };
        let err = ch.completeness_error();
        if err > COMPLETENESS_TOL {
            return Err(Error::Validation(format!(
                "Kraus operators violate completeness by {err:e}"
            )));
        }
        Ok(ch)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `‖Σ K†K − I‖_max`.
    pub fn completeness_error(&self) -> f64 {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            acc += k.adjoint() * k;
        }
        linalg::max_abs(&(acc - CMatrix::identity(self.dim, self.dim)))
    }

    /// `Σ K X K†` for an arbitrary operator `X`.
    pub fn apply_operator(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        out
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ Λ(|i⟩⟨j|)`, built from the channel action.
    pub fn choi_matrix(&self) -> CMatrix {
        let d = self.dim;
        let mut choi = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let block = self.apply_operator(&linalg::matrix_unit(d, i, j));
                choi.view_mut((i * d, j * d), (d, d)).copy_from(&block);
            }
        }
        choi
    }
}

/// One branch `(q_i, σ_i)` of a Kraus-resolved measurement.
#[derive(Debug, Clone)]
pub struct SelectiveOutcome {
    pub probability: f64,
    pub post_state: DensityMatrix,
}

pub fn apply(ch: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    ensure_dim(ch.dim, rho.dim())?;
    DensityMatrix::from_numerical(ch.apply_operator(rho.matrix()))
}

pub fn identity(d: usize) -> KrausChannel {
    KrausChannel {
        dim: d,
        kraus: vec![CMatrix::identity(d, d)],
        label: "identity".into(),
    }
}

/// `Δ(ρ) = Σ_k |ε_k⟩⟨ε_k|ρ|ε_k⟩⟨ε_k|` with the rank-one projectors as Kraus set.
pub fn dephasing(h: &Hamiltonian) -> KrausChannel {
    let kraus = (0..h.dim())
        .map(|k| {
            let v = h.level_vector(k);
            &v * v.adjoint()
        })
        .collect();
    KrausChannel {
        dim: h.dim(),
        kraus,
        label: "dephasing".into(),
    }
}

/// The same dephasing map realised by the scaled clock unitaries
/// `Z^m/√d`, `Z = Σ_k ω^k |ε_k⟩⟨ε_k|`.
///
/// Every branch is a unitary conjugation that fixes the Gibbs states, which
/// is the Kraus set for which the selective (strong) monotonicity holds.
pub fn dephasing_clock(h: &Hamiltonian) -> KrausChannel {
    let d = h.dim();
    let scale = 1.0 / (d as f64).sqrt();
    let kraus = (0..d)
        .map(|m| {
            let phases: Vec<_> = (0..d)
                .map(|k| {
                    let theta = 2.0 * std::f64::consts::PI * (m * k) as f64 / d as f64;
                    c(theta.cos(), theta.sin()) * scale
                })
                .collect();
            h.from_energy_basis(&CMatrix::from_diagonal(&CVector::from_vec(phases)))
        })
        .collect();
    KrausChannel {
        dim: d,
        kraus,
        label: "dephasing-clock".into(),
    }
}

/// Schur multiplier `ρ_kl ↦ α_kl ρ_kl` in the energy basis. The coefficient
/// matrix must be Hermitian, unit-diagonal and positive semidefinite.
pub fn partial_dephasing(h: &Hamiltonian, coeffs: &CMatrix) -> Result<KrausChannel> {
    let d = h.dim();
    if coeffs.nrows() != d || coeffs.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: coeffs.nrows(),
        });
    }
    if linalg::max_abs(&(coeffs - coeffs.adjoint())) > 1e-10 {
        return Err(Error::Validation("dephasing coefficients must be Hermitian".into()));
    }
    if (0..d).any(|k| (coeffs[(k, k)] - re(1.0)).norm() > 1e-10) {
        return Err(Error::Validation("dephasing coefficients need unit diagonal".into()));
    }
    let (values, vectors) = linalg::hermitian_eigen(coeffs);
    if values[0] < -1e-10 {
        return Err(Error::Validation(format!(
            "dephasing coefficients are not positive semidefinite (eigenvalue {:e})",
            values[0]
        )));
    }
    let kraus = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 1e-14)
        .map(|(m, &v)| {
            let col = vectors.column(m).scale(v.sqrt());
            h.from_energy_basis(&CMatrix::from_diagonal(&col))
        })
        .collect();
    // Clipped eigenvalues can shift completeness by ~1e-10; renormalise columnwise.
    let ch = KrausChannel {
        dim: d,
        kraus,
        label: "partial-dephasing".into(),
    };
    renormalize_diagonal_kraus(ch, h)
}

fn renormalize_diagonal_kraus(mut ch: KrausChannel, h: &Hamiltonian) -> Result<KrausChannel> {
    let d = ch.dim;
    let mut norms = vec![0.0; d];
    for k in &ch.kraus {
        let e = h.to_energy_basis(k);
        for (i, n) in norms.iter_mut().enumerate() {
            *n += e[(i, i)].norm_sqr();
        }
    }
    let fix: Vec<f64> = norms.iter().map(|n| 1.0 / n.sqrt()).collect();
    let fix = h.from_energy_basis(&linalg::diag_real(&fix));
    for k in ch.kraus.iter_mut() {
        *k = &*k * &fix;
    }
    KrausChannel::new(ch.kraus, ch.label)
}

/// Measure-and-prepare map
/// `Λ_β(ρ) = Tr{(I − |ψ_d⟩⟨ψ_d|)ρ} σ + ⟨ψ_d|ρ|ψ_d⟩ σ′` with
/// `σ = d/(d−1) (γ_β − σ′/d)` and `|ψ_d⟩ = Σ_k |ε_k⟩/√d`.
pub fn lambda_beta_map(h: &Hamiltonian, beta: Beta, sigma_prime: &DensityMatrix) -> Result<KrausChannel> {
    let d = h.dim();
    ensure_dim(d, sigma_prime.dim())?;
    if d < 2 {
        return Err(Error::Validation("lambda_beta needs d >= 2".into()));
    }
    let gamma = spectra::gibbs(h, beta)?.to_density(h)?;
    let df = d as f64;
    let sigma = (gamma.matrix() - sigma_prime.matrix().unscale(df)).scale(df / (df - 1.0));
    let sigma = DensityMatrix::new(sigma).map_err(|e| {
        Error::Validation(format!("sigma = d/(d-1)(gamma - sigma'/d) is not a state: {e}"))
    })?;
    let psi = uniform_superposition(h);
    let p1 = &psi * psi.adjoint();
    let p0 = CMatrix::identity(d, d) - &p1;
    let mut kraus = measure_and_prepare(&p0, &sigma);
    kraus.extend(measure_and_prepare(&p1, sigma_prime));
    KrausChannel::new(kraus, format!("lambda-beta({beta})"))
}

fn uniform_superposition(h: &Hamiltonian) -> CVector {
    let d = h.dim();
    let mut psi = CVector::zeros(d);
    for k in 0..d {
        psi += h.level_vector(k);
    }
    psi.unscale((d as f64).sqrt())
}

/// Kraus operators `√s_b |s_b⟩⟨e_a|` for a projective effect and a prepared state.
fn measure_and_prepare(effect: &CMatrix, prepared: &DensityMatrix) -> Vec<CMatrix> {
    let (e_vals, e_vecs) = linalg::hermitian_eigen(effect);
    let (s_vals, s_vecs) = linalg::hermitian_eigen(prepared.matrix());
    let mut out = Vec::new();
    for (a, &ev) in e_vals.iter().enumerate() {
        if ev < 0.5 {
            continue;
        }
        let bra = e_vecs.column(a).adjoint();
        for (b, &sv) in s_vals.iter().enumerate() {
            if sv <= 1e-15 {
                continue;
            }
            let ket = s_vecs.column(b).scale(sv.sqrt());
            out.push(&ket * &bra);
        }
    }
    out
}

/// Constant map `ρ ↦ γ_β`, realised as `Λ_β` with `σ′ = γ_β`.
pub fn thermalizing(h: &Hamiltonian, beta: Beta) -> Result<KrausChannel> {
    let gamma = spectra::gibbs(h, beta)?.to_density(h)?;
    Ok(lambda_beta_map(h, beta, &gamma)?.with_label(format!("thermalizing({beta})")))
}

pub fn unitary_channel(u: &CMatrix) -> Result<KrausChannel> {
    if !linalg::is_unitary(u, UNITARY_TOL) {
        return Err(Error::Validation("matrix is not unitary".into()));
    }
    KrausChannel::new(vec![u.clone()], "unitary")
}

/// Permutation unitary exchanging the ground and top energy levels.
pub fn ground_top_swap(h: &Hamiltonian) -> KrausChannel {
    let d = h.dim();
    let mut perm: Vec<usize> = (0..d).collect();
    perm.swap(0, d - 1);
    let mut p = CMatrix::zeros(d, d);
    for (src, &dst) in perm.iter().enumerate() {
        p[(dst, src)] = re(1.0);
    }
    KrausChannel {
        dim: d,
        kraus: vec![h.from_energy_basis(&p)],
        label: "ground-top-swap".into(),
    }
}

/// `Σ_i p_i Λ_i`, with Kraus set the union of the `√p_i`-scaled sets.
pub fn mixture(channels: &[KrausChannel], weights: &[f64]) -> Result<KrausChannel> {
    if channels.is_empty() || channels.len() != weights.len() {
        return Err(Error::Validation("mixture needs one weight per channel".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Validation("mixture weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("mixture weights sum to {total}")));
    }
    let d = channels[0].dim;
    let mut kraus = Vec::new();
    let mut labels = Vec::new();
    for (ch, &w) in channels.iter().zip(weights) {
        ensure_dim(d, ch.dim)?;
        if w == 0.0 {
            continue;
        }
        kraus.extend(ch.kraus.iter().map(|k| k.scale(w.sqrt())));
        labels.push(format!("{w}*{}", ch.label));
    }
    KrausChannel::new(kraus, labels.join("+"))
}

/// A thermal operation together with its Stinespring data.
#[derive(Debug, Clone)]
pub struct ThermalDilation {
    pub channel: KrausChannel,
    /// Energy-conserving unitary on system ⊗ environment.
    pub unitary: CMatrix,
    pub environment_state: DensityMatrix,
    pub total_hamiltonian: CMatrix,
}

/// `Λ(ρ) = Tr_E{U (ρ ⊗ γ_β^E) U†}` with `U` Haar-random inside each
/// total-energy eigenspace of `H ⊗ I + I ⊗ H_E`.
pub fn thermal_operation(h: &Hamiltonian, h_env: &Hamiltonian, beta: Beta, seed: u64) -> Result<KrausChannel> {
    Ok(thermal_dilation(h, h_env, beta, seed)?.channel)
}

pub fn thermal_dilation(h: &Hamiltonian, h_env: &Hamiltonian, beta: Beta, seed: u64) -> Result<ThermalDilation> {
    let (d, de) = (h.dim(), h_env.dim());
    if d * de > THERMAL_DIM_CAP {
        return Err(Error::CapExceeded {
            size: (d * de) as u128,
            cap: THERMAL_DIM_CAP as u128,
        });
    }
    let n = d * de;
    let totals: Vec<f64> = (0..n)
        .map(|idx| h.eigenvalues()[idx / de] + h_env.eigenvalues()[idx % de])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u_energy = block_haar(&totals, &mut rng);
    let frame = linalg::kron(&h.basis_matrix(), &h_env.basis_matrix());
    let unitary = &frame * u_energy * frame.adjoint();

    let env_gibbs = spectra::gibbs(h_env, beta)?;
    let env_pops = env_gibbs.populations().to_vec();
    let mut kraus = Vec::new();
    for (j, &g) in env_pops.iter().enumerate() {
        if g <= 0.0 {
            continue;
        }
        let ket_j = h_env.level_vector(j);
        for i in 0..de {
            let bra_i = h_env.level_vector(i).adjoint();
            let k = partial_contract(&unitary, &bra_i, &ket_j, d, de).scale(g.sqrt());
            kraus.push(k);
        }
    }
    let total_hamiltonian = linalg::kron(&h.matrix(), &CMatrix::identity(de, de))
        + linalg::kron(&CMatrix::identity(d, d), &h_env.matrix());
    Ok(ThermalDilation {
        channel: KrausChannel::new(kraus, format!("thermal-operation({beta})"))?,
        unitary,
        environment_state: env_gibbs.to_density(h_env)?,
        total_hamiltonian,
    })
}

/// Haar-random unitary on each block of equal energy, zero elsewhere.
fn block_haar(energies: &[f64], rng: &mut ChaCha8Rng) -> CMatrix {
    let n = energies.len();
    let mut out = CMatrix::zeros(n, n);
    for block in energy_blocks(energies) {
        let u = linalg::haar_unitary(block.len(), rng);
        for (bi, &i) in block.iter().enumerate() {
            for (bj, &j) in block.iter().enumerate() {
                out[(i, j)] = u[(bi, bj)];
            }
        }
    }
    out
}

/// Random unitary commuting with `H`: Haar within each energy level, so a
/// random phase on nondegenerate levels.
pub fn energy_preserving_unitary(h: &Hamiltonian, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    h.from_energy_basis(&block_haar(h.eigenvalues(), &mut rng))
}

/// `(I ⊗ ⟨i|) U (I ⊗ |j⟩)`.
fn partial_contract(u: &CMatrix, bra: &nalgebra::RowDVector<linalg::C64>, ket: &CVector, d: usize, de: usize) -> CMatrix {
    let mut out = CMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let mut acc = re(0.0);
            for x in 0..de {
                for y in 0..de {
                    acc += bra[x] * u[(a * de + x, b * de + y)] * ket[y];
                }
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// Stinespring construction from a Haar-random isometry `C^d → C^{d·r}`.
pub fn random_channel(d: usize, kraus_rank: usize, seed: u64) -> Result<KrausChannel> {
    if d == 0 || kraus_rank == 0 {
        return Err(Error::Validation("random channel needs d >= 1 and rank >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = linalg::haar_unitary(d * kraus_rank, &mut rng);
    let kraus = (0..kraus_rank)
        .map(|i| u.view((i * d, 0), (d, d)).into_owned())
        .collect();
    KrausChannel::new(kraus, format!("random(rank={kraus_rank},seed={seed})"))
}

/// Equal-weight mixture of `count` Haar-random unitaries: a random unital channel.
pub fn random_unital_channel(d: usize, count: usize, seed: u64) -> Result<KrausChannel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 1.0 / count as f64;
    let kraus = (0..count)
        .map(|_| linalg::haar_unitary(d, &mut rng).scale(w.sqrt()))
        .collect();
    KrausChannel::new(kraus, format!("random-unital({count},seed={seed})"))
}

/// Branches with `q_i > 1e-12`.
pub fn selective_outcomes(ch: &KrausChannel, rho: &DensityMatrix) -> Result<Vec<SelectiveOutcome>> {
    ensure_dim(ch.dim, rho.dim())?;
    let mut out = Vec::new();
    for k in &ch.kraus {
        let m = k * rho.matrix() * k.adjoint();
        let q = linalg::real_trace(&m);
        if q > 1e-12 {
            out.push(SelectiveOutcome {
                probability: q,
                post_state: DensityMatrix::from_numerical(m.unscale(q))?,
            });
        }
    }
    Ok(out)
}

/// `‖Σ K K† − I‖_max ≤ 1e-9`.
pub fn is_unital(ch: &KrausChannel) -> bool {
    let mut acc = CMatrix::zeros(ch.dim, ch.dim);
    for k in &ch.kraus {
        acc += k * k.adjoint();
    }
    linalg::max_abs(&(acc - CMatrix::identity(ch.dim, ch.dim))) <= COMPLETENESS_TOL
}

/// A channel that may depend on the state it acts on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ChannelFamily {
    /// A fixed Kraus channel.
    #[serde(skip)]
    Fixed(KrausChannel),
    /// `ρ ↦ U_ρ ρ U_ρ†`.
    ExtractionUnitary,
    /// `ρ ↦ γ_{β(ρ)+offset}`: the thermalising member of `Λ_{β̃(ρ)}` with
    /// `β̃(ρ) = β(ρ) + offset`.
    LambdaBetaTilde { offset: f64 },
}

impl From<KrausChannel> for ChannelFamily {
    fn from(ch: KrausChannel) -> Self {
        Self::Fixed(ch)
    }
}

impl ChannelFamily {
    pub fn label(&self) -> String {
        match self {
            Self::Fixed(ch) => ch.label.clone(),
            Self::ExtractionUnitary => "extraction-unitary".into(),
            Self::LambdaBetaTilde { offset } => format!("lambda-beta-tilde(offset={offset})"),
        }
    }

    pub fn is_state_dependent(&self) -> bool {
        !matches!(self, Self::Fixed(_))
    }

    /// The channel applied to `rho`.
    pub fn channel_for(&self, h: &Hamiltonian, rho: &DensityMatrix) -> Result<KrausChannel> {
        ensure_dim(h.dim(), rho.dim())?;
        match self {
            Self::Fixed(ch) => {
                ensure_dim(ch.dim, h.dim())?;
                Ok(ch.clone())
            }
            Self::ExtractionUnitary => {
                let u = spectra::extraction_unitary(h, rho)?;
                Ok(unitary_channel(&u)?.with_label("extraction-unitary"))
            }
            Self::LambdaBetaTilde { offset } => {
                if !(*offset >= 0.0) {
                    return Err(Error::Validation("beta offset must be >= 0".into()));
                }
                let beta = match workfn::beta_of_state(h, rho)?.beta {
                    Beta::Finite(b) => Beta::Finite(b + offset),
                    Beta::Infinite => Beta::Infinite,
                };
                thermalizing(h, beta)
            }
        }
    }

    pub fn apply(&self, h: &Hamiltonian, rho: &DensityMatrix) -> Result<DensityMatrix> {
        apply(&self.channel_for(h, rho)?, rho)
    }
}

/// Groups of equal total energy used when building thermal operations.
pub fn energy_blocks(totals: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..totals.len()).collect();
    order.sort_by(|&a, &b| totals[a].total_cmp(&totals[b]).then(a.cmp(&b)));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match out.last_mut() {
            Some(block) if totals[idx] - totals[*block.last().unwrap()] <= ENERGY_BUCKET_TOL => block.push(idx),
            _ => out.push(vec![idx]),
        }
    }
    out
}
