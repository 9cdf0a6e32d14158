//! Statistical classification of channels against the free-operation
//! conditions of the completely-passive (cp) and passive (p) theories.
//!
//! A pass means no counterexample was found among the sampled states and
//! optimizer starts; the report carries the seed and counts needed to replay
//! it. A sample counts as a violation only when its margin exceeds
//! `FAIL_FACTOR · tol`, so every attached counterexample is unambiguous.
//! Samples with margin in `(tol, FAIL_FACTOR · tol]` are counted as near
//! misses in the verdict note.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{self, ChannelFamily, KrausChannel};
use crate::error::{ensure_dim, Error, Result};
use crate::geometry;
use crate::io::{self, ChannelDoc, HamiltonianDoc, MatrixDoc};
use crate::linalg::{self, c, CMatrix};
use crate::spectra::{
    self, entropy, gibbs, passive_rearrangement, Beta, DensityMatrix, Hamiltonian, PassiveState,
    StateMeasure,
};
use crate::workfn;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const FAIL_FACTOR: f64 = 10.0;
/// States with `S(ρ‖γ)` below this are excluded from the contraction-factor ascent.
pub const EXCLUSION_RADIUS: f64 = 1e-6;
const BOUNDARY_DIVERGENCES: [f64; 3] = [1e-6, 1e-5, 1e-4];
/// Relative allowance on temperature comparisons, which inherit optimizer noise.
const TEMPERATURE_REL_TOL: f64 = 1e-7;
const NEAR_GIBBS_SIGMA: f64 = 0.05;
const ASCENT_ITERS: usize = 40;
const GIBBS_FIT_TOL: f64 = 1e-8;
/// Separates passive-state samples from the general sampler.
const PASSIVE_SEED_SALT: u64 = 0x9a55_1e5e_0000_0000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub log_spaced: bool,
}

impl Default for BetaGrid {
    fn default() -> Self {
        Self {
            min: 0.1,
            max: 10.0,
            points: 7,
            log_spaced: true,
        }
    }
}

impl BetaGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.min >= 0.0 && self.max >= self.min && self.max.is_finite()) {
            return Err(Error::Validation(format!(
                "beta grid needs 0 <= min <= max < inf, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.points == 0 {
            return Err(Error::Validation("beta grid needs at least one point".into()));
        }
        if self.log_spaced && self.min == 0.0 && self.points > 1 {
            return Err(Error::Validation("log-spaced beta grid needs min > 0".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        if self.log_spaced {
            linalg::logspace(self.min, self.max, self.points)
        } else {
            (0..self.points)
                .map(|k| self.min + (self.max - self.min) * k as f64 / (self.points - 1) as f64)
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub seed: u64,
    pub trials: usize,
    pub tol: f64,
    pub beta_grid: BetaGrid,
    /// Optimizer starts per grid point for the contraction factor.
    pub starts: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 1000,
            tol: DEFAULT_TOL,
            beta_grid: BetaGrid::default(),
            starts: 8,
        }
    }
}

impl CertifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Validation("trials must be >= 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Validation("tolerance must be > 0".into()));
        }
        if self.starts == 0 {
            return Err(Error::Validation("starts must be >= 1".into()));
        }
        self.beta_grid.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "F.i")]
    Fi,
    #[serde(rename = "F.ii")]
    Fii,
    #[serde(rename = "F.iii")]
    Fiii,
    #[serde(rename = "E.i")]
    Ei,
    #[serde(rename = "E.ii")]
    Eii,
    #[serde(rename = "E.iii")]
    Eiii,
    #[serde(rename = "strongF")]
    StrongF,
    #[serde(rename = "strongE")]
    StrongE,
    #[serde(rename = "Ocp-necessary-for-Op")]
    OcpNecessaryForOp,
    #[serde(rename = "convexity")]
    Convexity,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Fi => "F.i",
            Condition::Fii => "F.ii",
            Condition::Fiii => "F.iii",
            Condition::Ei => "E.i",
            Condition::Eii => "E.ii",
            Condition::Eiii => "E.iii",
            Condition::StrongF => "strongF",
            Condition::StrongE => "strongE",
            Condition::OcpNecessaryForOp => "Ocp-necessary-for-Op",
            Condition::Convexity => "convexity",
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theory {
    Cp,
    P,
    Both,
}

impl std::str::FromStr for Theory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cp" => Ok(Theory::Cp),
            "p" => Ok(Theory::P),
            "both" => Ok(Theory::Both),
            other => Err(Error::Validation(format!("unknown theory {other:?}"))),
        }
    }
}

/// The second object a condition compares against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    Gibbs { beta: Beta },
    Passive { populations: Vec<f64> },
    /// `ρ` mixed with `partner` at weight `weight` on `ρ`.
    Mixture { partner: MatrixDoc, weight: f64 },
}

/// Everything needed to recompute a violation from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub trial: Option<usize>,
    pub hamiltonian: HamiltonianDoc,
    pub state: MatrixDoc,
    pub channel: Option<ChannelDoc>,
    pub reference: Option<Reference>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub condition: Condition,
    pub status: Status,
    pub trials: usize,
    pub counterexample: Option<Counterexample>,
    pub note: String,
}

impl ConditionVerdict {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// Recomputes `(lhs, rhs)` of the attached counterexample from the record alone.
    pub fn reverify(&self) -> Result<Option<Evaluation>> {
        let Some(ce) = &self.counterexample else {
            return Ok(None);
        };
        let h = ce.hamiltonian.to_hamiltonian()?;
        let rho = DensityMatrix::new(io::doc_to_matrix(&ce.state)?)?;
        let ch = ce.channel.as_ref().map(ChannelDoc::to_channel).transpose()?;
        evaluate(self.condition, &h, &rho, ch.as_ref(), ce.reference.as_ref()).map(Some)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub lhs: f64,
    pub rhs: f64,
}

impl Evaluation {
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

fn need_channel(ch: Option<&KrausChannel>) -> Result<&KrausChannel> {
    ch.ok_or_else(|| Error::Validation("condition needs a channel".into()))
}

fn need_beta(reference: Option<&Reference>) -> Result<f64> {
    match reference {
        Some(Reference::Gibbs { beta: Beta::Finite(b) }) if *b > 0.0 => Ok(*b),
        _ => Err(Error::Validation("condition needs a Gibbs reference with finite beta > 0".into())),
    }
}

/// `S(ρ‖γ_β) = −S(ρ) + β(E(ρ) − ε_1) + ln Σ_k e^{−β(ε_k − ε_1)}`.
fn gibbs_divergence(h: &Hamiltonian, rho: &DensityMatrix, beta: f64) -> Result<f64> {
    let e0 = h.ground_energy();
    let z: f64 = h.eigenvalues().iter().map(|e| (-beta * (e - e0)).exp()).sum();
    Ok((-entropy(rho) + beta * (spectra::energy(h, rho)? - e0) + z.ln()).max(0.0))
}

fn passive_free_energy(h: &Hamiltonian, rho: &DensityMatrix) -> Result<f64> {
    workfn::free_energy(h, &passive_rearrangement(h, rho)?.to_density(h)?)
}

/// The left and right sides of `condition` for one input. A violation is
/// `lhs − rhs > 0`.
pub fn evaluate(
    condition: Condition,
    h: &Hamiltonian,
    rho: &DensityMatrix,
    ch: Option<&KrausChannel>,
    reference: Option<&Reference>,
) -> Result<Evaluation> {
    ensure_dim(h.dim(), rho.dim())?;
    let out = || channels::apply(need_channel(ch)?, rho);
    let (lhs, rhs) = match condition {
        Condition::Fi => (gibbs_fit(h, &out()?)?.residual, 0.0),
        Condition::Fii => (workfn::free_energy(h, &out()?)?, workfn::free_energy(h, rho)?),
        Condition::Fiii => {
            let beta = need_beta(reference)?;
            let s = gibbs_divergence(h, rho, beta)?;
            (workfn::free_energy(h, &out()?)? / s, 1.0 / beta)
        }
        Condition::OcpNecessaryForOp => {
            let beta = need_beta(reference)?;
            let s = gibbs_divergence(h, rho, beta)?;
            let image = out()?;
            let delta = (passive_free_energy(h, rho)? - passive_free_energy(h, &image)?) / s;
            (workfn::free_energy(h, &image)? / s + delta, 1.0 / beta)
        }
        Condition::Ei => (spectra::passivity_violation(h, &out()?)?, 0.0),
        Condition::Eii => (workfn::ergotropy(h, &out()?)?, workfn::ergotropy(h, rho)?),
        Condition::Eiii => {
            let Some(Reference::Passive { populations }) = reference else {
                return Err(Error::Validation("E.iii needs a passive reference".into()));
            };
            let p = PassiveState::new(populations.clone())?;
            let s = geometry::relative_entropy(rho, &p.to_density(h)?)?
                .finite()
                .ok_or_else(|| Error::Domain("S(rho||P) is infinite".into()))?;
            if s <= 0.0 {
                return Err(Error::Domain("rho equals P".into()));
            }
            (workfn::ergotropy(h, &out()?)? / s, geometry::noneq_temperature(h, &p, rho)?)
        }
        Condition::StrongF | Condition::StrongE => {
            let monotone = |x: &DensityMatrix| {
                if condition == Condition::StrongF {
                    workfn::free_energy(h, x)
                } else {
                    workfn::ergotropy(h, x)
                }
            };
            let mut lhs = 0.0;
            for o in channels::selective_outcomes(need_channel(ch)?, rho)? {
                lhs += o.probability * monotone(&o.post_state)?;
            }
            (lhs, monotone(rho)?)
        }
        Condition::Convexity => {
            let Some(Reference::Mixture { partner, weight }) = reference else {
                return Err(Error::Validation("convexity needs a mixture reference".into()));
            };
            let other = DensityMatrix::new(io::doc_to_matrix(partner)?)?;
            let mix = DensityMatrix::mixture(&[rho.clone(), other.clone()], &[*weight, 1.0 - weight])?;
            if spectra::is_passive(h, rho, 1e-12)? && spectra::is_passive(h, &other, 1e-12)? {
                // Closure of the passive set under mixing.
                (spectra::passivity_violation(h, &mix)?, 0.0)
            } else {
                let chord = weight * workfn::ergotropy(h, rho)? + (1.0 - weight) * workfn::ergotropy(h, &other)?;
                (workfn::ergotropy(h, &mix)?, chord)
            }
        }
    };
    Ok(Evaluation { lhs, rhs })
}

/// Nearest Gibbs state in trace distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsFit {
    pub beta: Beta,
    pub residual: f64,
}

impl GibbsFit {
    pub fn temperature(&self) -> f64 {
        self.beta.temperature()
    }
}

/// Minimizes `½‖ρ − γ_β‖₁` over `β ∈ [0, β_max] ∪ {∞}`: log grid, golden
/// section between the neighbours of the best grid point, and the
/// entropy-matched β as an extra candidate.
pub fn gibbs_fit(h: &Hamiltonian, rho: &DensityMatrix) -> Result<GibbsFit> {
    ensure_dim(h.dim(), rho.dim())?;
    let dist = |beta: Beta| -> f64 {
        gibbs(h, beta)
            .and_then(|g| g.to_density(h))
            .map(|g| g.trace_distance(rho))
            .unwrap_or(f64::INFINITY)
    };
    let grid = geometry::beta_search_grid(h);
    let values: Vec<f64> = grid.iter().map(|&b| dist(Beta::Finite(b))).collect();
    let best = (0..grid.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    let mut fit = GibbsFit {
        beta: Beta::Finite(grid[best]),
        residual: values[best],
    };
    let mut consider = |beta: Beta, residual: f64| {
        if residual < fit.residual {
            fit = GibbsFit { beta, residual };
        }
    };
    if grid.len() > 1 {
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(grid.len() - 1)];
        let (b, v) = linalg::golden_section(lo, hi, 200, |b| dist(Beta::Finite(b)));
        consider(Beta::Finite(b), v);
    }
    let matched = workfn::beta_of_state(h, rho)?.beta;
    consider(matched, dist(matched));
    consider(Beta::Infinite, dist(Beta::Infinite));
    Ok(fit)
}

/// Per-trial generator: the base seed with the trial index as stream.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleKind {
    HilbertSchmidt,
    HaarPure,
    NearGibbs,
}

/// Half Hilbert-Schmidt, a quarter Haar-pure, a quarter perturbed Gibbs.
pub fn sample_kind(index: usize) -> SampleKind {
    match index % 4 {
        0 | 1 => SampleKind::HilbertSchmidt,
        2 => SampleKind::HaarPure,
        _ => SampleKind::NearGibbs,
    }
}

fn beta_scale(h: &Hamiltonian) -> f64 {
    if h.is_fully_degenerate() {
        1.0
    } else {
        h.gap()
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

/// Clips negative eigenvalues and renormalizes.
fn project_to_state(m: &CMatrix) -> Result<DensityMatrix> {
    let clipped = linalg::hermitian_function(&linalg::hermitize(m), |x| x.max(0.0));
    let t = linalg::real_trace(&clipped);
    if !(t > 0.0) {
        return Err(Error::Domain("perturbed state has no positive part".into()));
    }
    DensityMatrix::from_numerical(linalg::hermitize(&clipped.unscale(t)))
}

pub fn sample_near_gibbs<R: Rng + ?Sized>(h: &Hamiltonian, rng: &mut R) -> Result<DensityMatrix> {
    let beta = log_uniform(rng, 0.1, 10.0) / beta_scale(h);
    let g = gibbs(h, Beta::Finite(beta))?.to_density(h)?;
    let noise = linalg::hermitize(&linalg::ginibre(h.dim(), h.dim(), rng)).scale(NEAR_GIBBS_SIGMA);
    project_to_state(&(g.matrix() + noise))
}

/// The falsification sample for trial `index`.
pub fn sample_trial_state(h: &Hamiltonian, seed: u64, index: usize) -> Result<DensityMatrix> {
    let mut rng = trial_rng(seed, index as u64);
    let d = h.dim();
    match sample_kind(index) {
        SampleKind::HilbertSchmidt => Ok(spectra::sample_state(d, StateMeasure::HilbertSchmidt, &mut rng)),
        SampleKind::HaarPure => Ok(spectra::sample_state(d, StateMeasure::HaarPure, &mut rng)),
        SampleKind::NearGibbs => sample_near_gibbs(h, &mut rng),
    }
}

/// Random passive state or Gibbs state for trial `index`.
fn sample_free_passive(h: &Hamiltonian, seed: u64, index: usize) -> Result<DensityMatrix> {
    let mut rng = trial_rng(seed ^ PASSIVE_SEED_SALT, index as u64);
    if index.is_multiple_of(2) {
        spectra::sample_passive(h.dim(), &mut rng).to_density(h)
    } else {
        let beta = log_uniform(&mut rng, 0.01, 100.0) / beta_scale(h);
        gibbs(h, Beta::Finite(beta))?.to_density(h)
    }
}


struct TrialData {
    state: DensityMatrix,
    channel: Option<KrausChannel>,
    reference: Option<Reference>,
    eval: Evaluation,
    allowance: f64,
}

/// Runs `count` independent trials and reports the lowest-index violation.
fn run_trials<F>(condition: Condition, h: &Hamiltonian, count: usize, trial: F) -> ConditionVerdict
where
    F: Fn(usize) -> Result<Option<TrialData>> + Sync,
{
    let outcomes: Vec<Option<(f64, f64)>> = (0..count)
        .into_par_iter()
        .map(|i| match trial(i) {
            Ok(Some(t)) => Some((t.eval.margin(), t.allowance)),
            _ => None,
        })
        .collect();
    let mut skipped = 0;
    let mut near = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut first = None;
    for (i, o) in outcomes.iter().enumerate() {
        match o {
            None => skipped += 1,
            Some((m, allowance)) => {
                worst = worst.max(*m);
                if *m > *allowance {
                    first.get_or_insert(i);
                } else if *m > allowance / FAIL_FACTOR {
                    near += 1;
                }
            }
        }
    }
    let counterexample = first.and_then(|i| {
        trial(i).ok().flatten().map(|t| Counterexample {
            trial: Some(i),
            hamiltonian: HamiltonianDoc::from_hamiltonian(h),
            state: io::matrix_to_doc(t.state.matrix()),
            channel: t.channel.as_ref().map(ChannelDoc::from_channel),
            reference: t.reference,
            lhs: t.eval.lhs,
            rhs: t.eval.rhs,
            margin: t.eval.margin(),
        })
    });
    let violations = outcomes
        .iter()
        .filter(|o| matches!(o, Some((m, a)) if m > a))
        .count();
    let evaluated = count - skipped;
    let mut note = format!("{evaluated} evaluated, {skipped} skipped, {violations} violations, {near} near misses");
    if evaluated > 0 {
        note.push_str(&format!(", max margin {worst:.3e}"));
    }
    ConditionVerdict {
        condition,
        status: if counterexample.is_some() { Status::Fail } else { Status::Pass },
        trials: count,
        counterexample,
        note,
    }
}

fn tol_allowance(tol: f64) -> f64 {
    FAIL_FACTOR * tol
}

fn temperature_allowance(tol: f64, temperature: f64) -> f64 {
    FAIL_FACTOR * tol.max(TEMPERATURE_REL_TOL * temperature.abs())
}

fn sampled_check(
    condition: Condition,
    family: &ChannelFamily,
    h: &Hamiltonian,
    trials: usize,
    seed: u64,
    tol: f64,
    sample: impl Fn(usize) -> Result<DensityMatrix> + Sync,
) -> ConditionVerdict {
    run_trials(condition, h, trials, |i| {
        let rho = sample(i)?;
        let ch = family.channel_for(h, &rho)?;
        let eval = evaluate(condition, h, &rho, Some(&ch), None)?;
        Ok(Some(TrialData {
            state: rho,
            channel: Some(ch),
            reference: None,
            eval,
            allowance: tol_allowance(tol),
        }))
    })
    .with_seed_note(seed)
}

trait SeedNote {
    fn with_seed_note(self, seed: u64) -> Self;
}

impl SeedNote for ConditionVerdict {
    fn with_seed_note(mut self, seed: u64) -> Self {
        self.note.push_str(&format!(", seed {seed}"));
        self
    }
}

/// (F,i): `Λ(γ_β)` stays Gibbs for every `β` of the grid.
pub fn check_fi(family: &ChannelFamily, h: &Hamiltonian, grid: &BetaGrid, tol: f64) -> Result<ConditionVerdict> {
    grid.validate()?;
    let betas = grid.values();
    Ok(run_trials(Condition::Fi, h, betas.len(), |i| {
        let g = gibbs(h, Beta::Finite(betas[i]))?.to_density(h)?;
        let ch = family.channel_for(h, &g)?;
        let eval = evaluate(Condition::Fi, h, &g, Some(&ch), None)?;
        Ok(Some(TrialData {
            state: g,
            channel: Some(ch),
            reference: None,
            eval,
            allowance: tol_allowance(tol),
        }))
    }))
}

/// (F,ii): `F(Λ(ρ)) ≤ F(ρ)` on sampled states.
pub fn check_fii(family: &ChannelFamily, h: &Hamiltonian, trials: usize, seed: u64, tol: f64) -> ConditionVerdict {
    sampled_check(Condition::Fii, family, h, trials, seed, tol, |i| sample_trial_state(h, seed, i))
}

/// (E,i): `Λ(Π) ⊆ Π` on sampled passive and Gibbs states.
pub fn check_ei(family: &ChannelFamily, h: &Hamiltonian, trials: usize, seed: u64, tol: f64) -> ConditionVerdict {
    sampled_check(Condition::Ei, family, h, trials, seed, tol, |i| sample_free_passive(h, seed, i))
}

/// (E,ii): `ℰ(Λ(ρ)) ≤ ℰ(ρ)` on sampled states.
pub fn check_eii(family: &ChannelFamily, h: &Hamiltonian, trials: usize, seed: u64, tol: f64) -> ConditionVerdict {
    sampled_check(Condition::Eii, family, h, trials, seed, tol, |i| sample_trial_state(h, seed, i))
}

/// (E,iii) at sampled pairs: `ℰ(Λ(ρ))/S(ρ‖P) ≤ T(P|ρ)`. Pairs outside the
/// temperature domain are skipped.
pub fn check_eiii(family: &ChannelFamily, h: &Hamiltonian, trials: usize, seed: u64, tol: f64) -> ConditionVerdict {
    run_trials(Condition::Eiii, h, trials, |i| {
        let rho = sample_trial_state(h, seed, i)?;
        let p = sample_free_passive(h, seed, 2 * i);
        let populations = spectra::energy_populations(h, &p?)?;
        let reference = Reference::Passive {
            populations: PassiveState::new(populations)?.populations().to_vec(),
        };
        let ch = family.channel_for(h, &rho)?;
        let eval = match evaluate(Condition::Eiii, h, &rho, Some(&ch), Some(&reference)) {
            Ok(e) => e,
            Err(Error::Domain(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        Ok(Some(TrialData {
            state: rho,
            channel: Some(ch),
            reference: Some(reference),
            eval,
            allowance: temperature_allowance(tol, eval.rhs),
        }))
    })
    .with_seed_note(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub divergence: f64,
    pub ratio: f64,
}

/// Lower-bound estimate of the cp contraction factor at one Gibbs state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaEstimate {
    pub gamma_beta: f64,
    /// Best `F(Λ(ρ))/(T(Λ(γ)) S(ρ‖γ))` found.
    pub eta: f64,
    /// Best `F(Λ(ρ))/S(ρ‖γ)`, which equals `η · T(Λ(γ))`.
    pub ratio: f64,
    pub argmax_state: MatrixDoc,
    pub output_beta: Beta,
    pub output_temperature: f64,
    pub fit_residual: f64,
    pub starts: usize,
    pub boundary: Vec<BoundaryPoint>,
    pub note: String,
}

impl EtaEstimate {
    pub fn argmax_density(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(io::doc_to_matrix(&self.argmax_state)?)
    }
}

/// `F(Λ(ρ))/S(ρ‖γ_β)`, `None` inside the exclusion ball.
pub fn eta_ratio(family: &ChannelFamily, h: &Hamiltonian, beta: f64, rho: &DensityMatrix) -> Result<Option<f64>> {
    let s = gibbs_divergence(h, rho, beta)?;
    if s < EXCLUSION_RADIUS {
        return Ok(None);
    }
    Ok(Some(workfn::free_energy(h, &family.apply(h, rho)?)? / s))
}

fn eta_from_ratio(ratio: f64, output_temperature: f64) -> f64 {
    if output_temperature.is_infinite() {
        0.0
    } else if output_temperature == 0.0 {
        if ratio > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        ratio / output_temperature
    }
}

fn params_from_state(rho: &DensityMatrix) -> Vec<f64> {
    let root = linalg::hermitian_function(rho.matrix(), |x| x.max(0.0).sqrt());
    let d = rho.dim();
    let mut x = vec![0.0; 2 * d * d];
    for i in 0..d {
        for j in 0..d {
            x[i * d + j] = root[(i, j)].re;
            x[d * d + i * d + j] = root[(i, j)].im;
        }
    }
    x
}

fn state_from_params(x: &[f64], d: usize) -> Option<DensityMatrix> {
    let a = CMatrix::from_fn(d, d, |i, j| c(x[i * d + j], x[d * d + i * d + j]));
    let m = &a * a.adjoint();
    let t = linalg::real_trace(&m);
    if !(t > 1e-300) || !t.is_finite() {
        return None;
    }
    DensityMatrix::from_numerical(linalg::hermitize(&m.unscale(t))).ok()
}

/// Finite-difference gradient ascent over states `ρ = AA†/Tr(AA†)`.
fn ascend(
    start: &DensityMatrix,
    f: &impl Fn(&DensityMatrix) -> Option<f64>,
    iters: usize,
) -> Option<(f64, DensityMatrix)> {
    let d = start.dim();
    let eval = |x: &[f64]| state_from_params(x, d).and_then(|r| f(&r).map(|v| (v, r)));
    let mut x = params_from_state(start);
    let (mut value, mut state) = eval(&x)?;
    let h = 1e-6;
    let mut step = 0.1;
    for _ in 0..iters {
        let mut grad = vec![0.0; x.len()];
        for k in 0..x.len() {
            let mut xp = x.clone();
            xp[k] += h;
            let mut xm = x.clone();
            xm[k] -= h;
            grad[k] = match (eval(&xp), eval(&xm)) {
                (Some((fp, _)), Some((fm, _))) => (fp - fm) / (2.0 * h),
                (Some((fp, _)), None) => (fp - value) / h,
                (None, Some((fm, _))) => (value - fm) / h,
                (None, None) => 0.0,
            };
        }
        let norm2: f64 = grad.iter().map(|g| g * g).sum();
        if !(norm2 > 1e-24) {
            break;
        }
        let mut moved = false;
        while step > 1e-10 {
            let cand: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi + step * gi).collect();
            if let Some((v, r)) = eval(&cand) {
                if v >= value + 1e-4 * step * norm2 {
                    x = cand;
                    value = v;
                    state = r;
                    moved = true;
                    step *= 2.0;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Some((value, state))
}

/// Smallest `t` with `S((1−t)γ + tσ ‖ γ) ≥ target`, by bisection.
fn segment_at_divergence(
    h: &Hamiltonian,
    gamma: &DensityMatrix,
    sigma: &DensityMatrix,
    beta: f64,
    target: f64,
) -> Result<Option<DensityMatrix>> {
    let point = |t: f64| DensityMatrix::mixture(&[gamma.clone(), sigma.clone()], &[1.0 - t, t]);
    if gibbs_divergence(h, sigma, beta)? < target {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if gibbs_divergence(h, &point(mid)?, beta)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    point(hi).map(Some)
}

fn permutations(d: usize, cap: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>, cap: usize) {
        if out.len() >= cap {
            return;
        }
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in (0..used.len()).rev() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out, cap);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; d], &mut out, cap);
    out
}

/// Multistart ascent of `F(Λ(ρ))/S(ρ‖γ_β)` outside the exclusion ball.
///
/// Starts are permutations and random unitary conjugations of `γ_β` (states
/// of equal entropy, where `F = T·S` for the identity), Hilbert-Schmidt
/// states and pure states. The boundary of the exclusion ball is probed along
/// the segment from `γ_β` to the best witness.
pub fn estimate_eta_cp(
    family: &ChannelFamily,
    h: &Hamiltonian,
    beta: f64,
    starts: usize,
    seed: u64,
) -> Result<EtaEstimate> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("contraction factor needs finite beta > 0, got {beta}")));
    }
    let d = h.dim();
    let g = gibbs(h, Beta::Finite(beta))?;
    let gamma = g.to_density(h)?;
    let fit = gibbs_fit(h, &family.apply(h, &gamma)?)?;
    let t_out = fit.temperature();
    let ratio = |rho: &DensityMatrix| eta_ratio(family, h, beta, rho).ok().flatten();

    let mut rng = trial_rng(seed, beta.to_bits());
    let mut candidates: Vec<DensityMatrix> = Vec::new();
    for perm in permutations(d, 24) {
        let pops: Vec<f64> = perm.iter().map(|&k| g.populations()[k]).collect();
        candidates.push(h.embed_populations(&pops)?);
    }
    let mut ascent_starts = Vec::with_capacity(starts);
    for k in 0..starts {
        let rho = match k % 4 {
            0 | 1 => gamma.conjugate(&linalg::haar_unitary(d, &mut rng))?,
            2 => spectra::sample_state(d, StateMeasure::HilbertSchmidt, &mut rng),
            _ => spectra::sample_state(d, StateMeasure::HaarPure, &mut rng),
        };
        ascent_starts.push(rho);
    }

    let mut best: Option<(f64, DensityMatrix)> = None;
    let offer = |v: f64, rho: DensityMatrix, best: &mut Option<(f64, DensityMatrix)>| {
        if v.is_finite() && best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            *best = Some((v, rho));
        }
    };
    for rho in candidates {
        if let Some(v) = ratio(&rho) {
            offer(v, rho, &mut best);
        }
    }
    let ascended: Vec<Option<(f64, DensityMatrix)>> = ascent_starts
        .par_iter()
        .map(|s| ascend(s, &ratio, ASCENT_ITERS))
        .collect();
    for (v, rho) in ascended.into_iter().flatten() {
        offer(v, rho, &mut best);
    }
    let (mut best_ratio, mut best_state) = best.ok_or_else(|| {
        Error::Domain("no state outside the exclusion ball could be evaluated".into())
    })?;

    let mut boundary = Vec::new();
    let direction = best_state.clone();
    for target in BOUNDARY_DIVERGENCES {
        if let Some(rho) = segment_at_divergence(h, &gamma, &direction, beta, target)? {
            if let Some(v) = ratio(&rho) {
                boundary.push(BoundaryPoint {
                    divergence: gibbs_divergence(h, &rho, beta)?,
                    ratio: v,
                });
                if v > best_ratio {
                    best_ratio = v;
                    best_state = rho;
                }
            }
        }
    }

    let mut note = String::from("lower bound from multistart ascent");
    if fit.residual > GIBBS_FIT_TOL {
        note.push_str(&format!("; output of the Gibbs state is not Gibbs (residual {:.3e})", fit.residual));
    }
    if !(t_out > 0.0 && t_out.is_finite()) {
        note.push_str(&format!("; fitted output temperature is {t_out}"));
    }
    Ok(EtaEstimate {
        gamma_beta: beta,
        eta: eta_from_ratio(best_ratio, t_out),
        ratio: best_ratio,
        argmax_state: io::matrix_to_doc(best_state.matrix()),
        output_beta: fit.beta,
        output_temperature: t_out,
        fit_residual: fit.residual,
        starts: starts + permutations(d, 24).len(),
        boundary,
        note,
    })
}

/// Contraction factors over the positive grid points.
pub fn eta_scan(family: &ChannelFamily, h: &Hamiltonian, config: &CertifyConfig) -> Result<Vec<EtaEstimate>> {
    config.validate()?;
    config
        .beta_grid
        .values()
        .into_iter()
        .filter(|&b| b > 0.0)
        .map(|b| estimate_eta_cp(family, h, b, config.starts, config.seed))
        .collect()
}

fn estimates_verdict(
    condition: Condition,
    family: &ChannelFamily,
    h: &Hamiltonian,
    estimates: &[EtaEstimate],
    tol: f64,
    starts: usize,
) -> ConditionVerdict {
    let mut verdict = run_trials(condition, h, estimates.len(), |i| {
        let est = &estimates[i];
        let rho = est.argmax_density()?;
        let ch = family.channel_for(h, &rho)?;
        let reference = Reference::Gibbs {
            beta: Beta::Finite(est.gamma_beta),
        };
        let eval = evaluate(condition, h, &rho, Some(&ch), Some(&reference))?;
        Ok(Some(TrialData {
            state: rho,
            channel: Some(ch),
            reference: Some(reference),
            eval,
            allowance: temperature_allowance(tol, eval.rhs),
        }))
    });
    verdict.trials = estimates.iter().map(|e| e.starts).sum::<usize>().max(starts);
    verdict
}

/// (F,iii): `η_Λ(γ)·T(Λ(γ)) ≤ T(γ)` on the grid. Requires (F,i).
pub fn check_fiii(
    family: &ChannelFamily,
    h: &Hamiltonian,
    config: &CertifyConfig,
) -> Result<(ConditionVerdict, Vec<EtaEstimate>)> {
    let fi = check_fi(family, h, &config.beta_grid, config.tol)?;
    if !fi.passed() {
        return Err(Error::Precondition("F.iii needs F.i to pass".into()));
    }
    let estimates = eta_scan(family, h, config)?;
    let verdict = estimates_verdict(Condition::Fiii, family, h, &estimates, config.tol, config.starts);
    Ok((verdict, estimates))
}

/// Necessary condition for `Λ ∈ O_p` given `Λ ∈ O_cp`:
/// `η_Λ(γ)T(Λ(γ)) + δ_Λ(γ) ≤ T(γ)` at the contraction witness `ρ_γ`.
/// Requires (F,i) and (F,ii).
pub fn ocp_to_op_necessary(
    family: &ChannelFamily,
    h: &Hamiltonian,
    config: &CertifyConfig,
) -> Result<ConditionVerdict> {
    let fi = check_fi(family, h, &config.beta_grid, config.tol)?;
    let fii = check_fii(family, h, config.trials, config.seed, config.tol);
    if !(fi.passed() && fii.passed()) {
        return Err(Error::Precondition("needs F.i and F.ii to pass".into()));
    }
    let estimates = eta_scan(family, h, config)?;
    Ok(ocp_from_estimates(family, h, &estimates, config))
}

fn ocp_from_estimates(
    family: &ChannelFamily,
    h: &Hamiltonian,
    estimates: &[EtaEstimate],
    config: &CertifyConfig,
) -> ConditionVerdict {
    let mut v = estimates_verdict(
        Condition::OcpNecessaryForOp,
        family,
        h,
        estimates,
        config.tol,
        config.starts,
    );
    v.note.push_str("; a violation predicts the channel is not in O_p");
    v
}

/// Pointwise passive contraction data at `(P, ρ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaPRecord {
    /// `ℰ(Λ(ρ))/(T(Λ(P)|Λ(ρ)) S(ρ‖P))`.
    pub eta: Option<f64>,
    /// `η·T(Λ(P)|Λ(ρ)) = ℰ(Λ(ρ))/S(ρ‖P)`.
    pub lhs: Option<f64>,
    /// `T(P|ρ)`.
    pub rhs: Option<f64>,
    pub e3_holds: Option<bool>,
    /// `S(Λ(ρ)‖Λ(P))/S(ρ‖P)`.
    pub divergence_ratio: Option<f64>,
    /// `η ≤ S(Λ(ρ)‖Λ(P))/S(ρ‖P) ≤ 1`.
    pub e2_bound_ok: Option<bool>,
    pub skipped: Option<String>,
}

fn domain_to_skip<T>(r: Result<T>) -> Result<std::result::Result<T, String>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(Error::Domain(msg)) => Ok(Err(msg)),
        Err(e) => Err(e),
    }
}

pub fn eta_p_pointwise(
    family: &ChannelFamily,
    h: &Hamiltonian,
    p: &PassiveState,
    rho: &DensityMatrix,
    tol: f64,
) -> Result<EtaPRecord> {
    ensure_dim(h.dim(), p.dim())?;
    let mut rec = EtaPRecord {
        eta: None,
        lhs: None,
        rhs: None,
        e3_holds: None,
        divergence_ratio: None,
        e2_bound_ok: None,
        skipped: None,
    };
    let ch = family.channel_for(h, rho)?;
    let p_state = p.to_density(h)?;
    let out = channels::apply(&ch, rho)?;
    let out_p = channels::apply(&ch, &p_state)?;
    let s = match geometry::relative_entropy(rho, &p_state)?.finite() {
        Some(s) if s > 0.0 => s,
        _ => {
            rec.skipped = Some("S(rho||P) is zero or infinite".into());
            return Ok(rec);
        }
    };
    let t_in = match domain_to_skip(geometry::noneq_temperature(h, p, rho))? {
        Ok(t) => t,
        Err(msg) => {
            rec.skipped = Some(msg);
            return Ok(rec);
        }
    };
    let ergo_out = workfn::ergotropy(h, &out)?;
    let lhs = ergo_out / s;
    rec.lhs = Some(lhs);
    rec.rhs = Some(t_in);
    rec.e3_holds = Some(lhs <= t_in + tol);
    let ratio = geometry::relative_entropy(&out, &out_p)?.value() / s;
    rec.divergence_ratio = Some(ratio);
    if !spectra::is_passive(h, &out_p, 1e-9)? {
        rec.skipped = Some("image of P is not passive".into());
        return Ok(rec);
    }
    let p_out = passive_rearrangement(h, &out_p)?;
    match domain_to_skip(geometry::noneq_temperature(h, &p_out, &out))? {
        Ok(t_out) => {
            let eta = ergo_out / (t_out * s);
            rec.eta = Some(eta);
            rec.e2_bound_ok = Some(eta <= ratio + tol && ratio <= 1.0 + tol);
        }
        Err(msg) => rec.skipped = Some(msg),
    }
    Ok(rec)
}

/// Strong monotonicity `Σ q_i M(σ_i) ≤ M(ρ)` for the declared Kraus set, with
/// `M = F` (cp) or `M = ℰ` (p). The note reports the sufficient condition:
/// every branch of the input's matched free state stays free without heating
/// (cp), or stays passive (p).
pub fn strong_mono_check(
    ch: &KrausChannel,
    h: &Hamiltonian,
    rho: &DensityMatrix,
    theory: Theory,
    tol: f64,
) -> Result<ConditionVerdict> {
    let condition = match theory {
        Theory::Cp => Condition::StrongF,
        Theory::P => Condition::StrongE,
        Theory::Both => return Err(Error::Validation("strong monotonicity needs theory cp or p".into())),
    };
    let mut verdict = run_trials(condition, h, 1, |_| {
        let eval = evaluate(condition, h, rho, Some(ch), None)?;
        Ok(Some(TrialData {
            state: rho.clone(),
            channel: Some(ch.clone()),
            reference: None,
            eval,
            allowance: tol_allowance(tol),
        }))
    });
    verdict.note = match theory {
        Theory::Cp => {
            let g = workfn::entropy_matched_gibbs(h, rho)?;
            let t = g.temperature();
            let mut applies = true;
            let mut holds = true;
            for o in channels::selective_outcomes(ch, &g.to_density(h)?)? {
                let fit = gibbs_fit(h, &o.post_state)?;
                applies &= fit.residual <= GIBBS_FIT_TOL;
                holds &= fit.temperature() <= t * (1.0 + 1e-9) + tol;
            }
            format!(
                "{}; sufficient condition (branches of gamma_rho are Gibbs with T_i <= T): {}",
                verdict.note,
                if applies && holds { "applies" } else { "does not apply" }
            )
        }
        _ => {
            let p = passive_rearrangement(h, rho)?.to_density(h)?;
            let mut applies = true;
            for o in channels::selective_outcomes(ch, &p)? {
                applies &= spectra::is_passive(h, &o.post_state, 1e-9)?;
            }
            format!(
                "{}; sufficient condition (branches of P_rho are passive): {}",
                verdict.note,
                if applies { "applies" } else { "does not apply" }
            )
        }
    };
    Ok(verdict)
}

/// `|F(ρ) − ℰ(ρ) − F(P_ρ)| ≤ tol`.
pub fn distance_decomposition_check(h: &Hamiltonian, rho: &DensityMatrix, tol: f64) -> Result<bool> {
    let f = workfn::free_energy(h, rho)?;
    let e = workfn::ergotropy(h, rho)?;
    let fp = passive_free_energy(h, rho)?;
    Ok((f - e - fp).abs() <= tol)
}

/// Residual of the nearest Gibbs state to `w γ_{b1} + (1−w) γ_{b2}`.
pub fn gibbs_mixture_residual(h: &Hamiltonian, b1: f64, b2: f64, weight: f64) -> Result<f64> {
    let g1 = gibbs(h, Beta::Finite(b1))?.to_density(h)?;
    let g2 = gibbs(h, Beta::Finite(b2))?.to_density(h)?;
    Ok(gibbs_fit(h, &DensityMatrix::mixture(&[g1, g2], &[weight, 1.0 - weight])?)?.residual)
}

/// Convexity of ℰ on sampled mixtures (even trials) and closure of Π under
/// mixing (odd trials). The note adds the nearest-Gibbs residual of
/// `½γ_{0.5} + ½γ_{2.0}`, which is positive whenever the spectrum has three
/// distinct levels.
pub fn convexity_suite(h: &Hamiltonian, trials: usize, seed: u64) -> Result<ConditionVerdict> {
    if trials == 0 {
        return Err(Error::Validation("trials must be >= 1".into()));
    }
    let tol = 1e-10;
    let mut verdict = run_trials(Condition::Convexity, h, trials, |i| {
        let mut rng = trial_rng(seed, i as u64);
        let weight: f64 = rng.random();
        let (a, b) = if i % 2 == 0 {
            let a = spectra::sample_state(h.dim(), StateMeasure::HilbertSchmidt, &mut rng);
            let b = spectra::sample_state(h.dim(), StateMeasure::HilbertSchmidt, &mut rng);
            (a, b)
        } else {
            let a = spectra::sample_passive(h.dim(), &mut rng).to_density(h)?;
            let b = spectra::sample_passive(h.dim(), &mut rng).to_density(h)?;
            (a, b)
        };
        let reference = Reference::Mixture {
            partner: io::matrix_to_doc(b.matrix()),
            weight,
        };
        let eval = evaluate(Condition::Convexity, h, &a, None, Some(&reference))?;
        Ok(Some(TrialData {
            state: a,
            channel: None,
            reference: Some(reference),
            eval,
            allowance: tol_allowance(tol),
        }))
    });
    let residual = gibbs_mixture_residual(h, 0.5, 2.0, 0.5)?;
    verdict.note = format!(
        "{}; nearest-Gibbs residual of the Gibbs mixture {residual:.6e} ({} C)",
        verdict.note,
        if residual > 1e-6 { "outside" } else { "inside" }
    );
    Ok(verdict.with_seed_note(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub hamiltonian: HamiltonianDoc,
    pub tol: f64,
    pub fail_factor: f64,
    pub beta_grid: BetaGrid,
    pub starts: usize,
    pub sampler: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub channel: String,
    pub theory: Theory,
    pub verdicts: Vec<ConditionVerdict>,
    pub eta: Vec<EtaEstimate>,
    pub seed: u64,
    pub trials: usize,
    pub notes: Vec<String>,
    pub provenance: Provenance,
}

impl ClassificationReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(ConditionVerdict::passed)
    }

    pub fn verdict(&self, condition: Condition) -> Option<&ConditionVerdict> {
        self.verdicts.iter().find(|v| v.condition == condition)
    }
}

/// Runs every condition of the requested theory.
pub fn classify(
    family: &ChannelFamily,
    h: &Hamiltonian,
    theory: Theory,
    config: &CertifyConfig,
) -> Result<ClassificationReport> {
    config.validate()?;
    let mut verdicts = Vec::new();
    let mut eta = Vec::new();
    let mut notes = Vec::new();
    let (seed, trials, tol) = (config.seed, config.trials, config.tol);
    let cp = matches!(theory, Theory::Cp | Theory::Both);
    let p = matches!(theory, Theory::P | Theory::Both);
    let mut free_cp = false;
    if cp {
        let fi = check_fi(family, h, &config.beta_grid, tol)?;
        let fii = check_fii(family, h, trials, seed, tol);
        free_cp = fi.passed() && fii.passed();
        if fi.passed() {
            eta = eta_scan(family, h, config)?;
            verdicts.push(fi);
            verdicts.push(fii);
            verdicts.push(estimates_verdict(Condition::Fiii, family, h, &eta, tol, config.starts));
        } else {
            verdicts.push(fi);
            verdicts.push(fii);
            notes.push("F.iii skipped: F.i failed".into());
        }
        if eta.iter().any(|e| e.eta.abs() <= 1e-6) {
            notes.push("eta = 0 at some grid points: the output temperature may rise freely".into());
        }
    }
    if p {
        verdicts.push(check_ei(family, h, trials, seed, tol));
        verdicts.push(check_eii(family, h, trials, seed, tol));
        verdicts.push(check_eiii(family, h, trials, seed, tol));
    }
    if theory == Theory::Both {
        if free_cp {
            let v = ocp_from_estimates(family, h, &eta, config);
            let eii = verdicts.iter().find(|v| v.condition == Condition::Eii).map(ConditionVerdict::passed);
            if !v.passed() && eii == Some(true) {
                notes.push("Ocp-necessary-for-Op violated while E.ii passed on the sample".into());
            }
            verdicts.push(v);
        } else {
            notes.push("Ocp-necessary-for-Op skipped: F.i or F.ii failed".into());
        }
    }
    Ok(ClassificationReport {
        channel: family.label(),
        theory,
        verdicts,
        eta,
        seed,
        trials,
        notes,
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").into(),
            hamiltonian: HamiltonianDoc::from_hamiltonian(h),
            tol,
            fail_factor: FAIL_FACTOR,
            beta_grid: config.beta_grid.clone(),
            starts: config.starts,
            sampler: format!(
                "hilbert-schmidt 1/2, haar-pure 1/4, near-gibbs 1/4 (sigma {NEAR_GIBBS_SIGMA}); ChaCha8 stream per trial"
            ),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{re, CVector};
    use crate::spectra::random_state;

    fn h3() -> Hamiltonian {
        Hamiltonian::new(vec![0.0, 1.0, 2.0]).unwrap()
    }

    fn fixed(ch: KrausChannel) -> ChannelFamily {
        ChannelFamily::Fixed(ch)
    }

    fn thermal_mixture(h: &Hamiltonian) -> ChannelFamily {
        let t1 = channels::thermalizing(h, Beta::Finite(0.5)).unwrap();
        let t2 = channels::thermalizing(h, Beta::Finite(2.0)).unwrap();
        fixed(channels::mixture(&[t1, t2], &[0.5, 0.5]).unwrap())
    }

    fn small() -> CertifyConfig {
        CertifyConfig {
            trials: 200,
            beta_grid: BetaGrid {
                points: 3,
                ..BetaGrid::default()
            },
            starts: 4,
            ..CertifyConfig::default()
        }
    }

    #[test]
    fn beta_grid_values() {
        let g = BetaGrid::default().values();
        assert_eq!(g.len(), 7);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[6] - 10.0).abs() < 1e-12);
        let lin = BetaGrid {
            min: 0.0,
            max: 2.0,
            points: 3,
            log_spaced: false,
        };
        assert_eq!(lin.values(), vec![0.0, 1.0, 2.0]);
        assert!(BetaGrid { log_spaced: true, ..lin }.validate().is_err());
    }

    #[test]
    fn gibbs_fit_recovers_beta() {
        let h = h3();
        for b in [0.0, 0.3, 1.7, 20.0] {
            let g = gibbs(&h, Beta::Finite(b)).unwrap().to_density(&h).unwrap();
            let fit = gibbs_fit(&h, &g).unwrap();
            assert!(fit.residual < 1e-10, "beta {b}: {}", fit.residual);
        }
        assert!(gibbs_mixture_residual(&h, 0.5, 2.0, 0.5).unwrap() > 1e-6);
        let q = Hamiltonian::new(vec![0.0, 1.0]).unwrap();
        assert!(gibbs_mixture_residual(&q, 0.5, 2.0, 0.5).unwrap() < 1e-10);
    }

    #[test]
    fn fi_examples() {
        let h = h3();
        let grid = BetaGrid::default();
        assert!(check_fi(&fixed(channels::dephasing(&h)), &h, &grid, DEFAULT_TOL).unwrap().passed());
        let sigma = DensityMatrix::from_diagonal(&[0.4, 0.3, 0.3]).unwrap();
        let lb = channels::lambda_beta_map(&h, Beta::Finite(0.2), &sigma).unwrap();
        assert!(check_fi(&fixed(lb), &h, &grid, DEFAULT_TOL).unwrap().passed());
        let v = check_fi(&thermal_mixture(&h), &h, &grid, DEFAULT_TOL).unwrap();
        assert!(!v.passed());
        let ce = v.counterexample.as_ref().unwrap();
        assert!(ce.margin > FAIL_FACTOR * DEFAULT_TOL);
        let again = v.reverify().unwrap().unwrap();
        assert!((again.margin() - ce.margin).abs() < 1e-9);
    }

    #[test]
    fn fii_examples() {
        let h = h3();
        let cfg = small();
        let therm = fixed(channels::thermalizing(&h, Beta::Finite(1.0)).unwrap());
        assert!(check_fii(&therm, &h, cfg.trials, cfg.seed, cfg.tol).passed());
        assert!(check_fii(&fixed(channels::dephasing(&h)), &h, cfg.trials, cfg.seed, cfg.tol).passed());
        let swap = fixed(channels::ground_top_swap(&h));
        let v = check_fii(&swap, &h, cfg.trials, cfg.seed, cfg.tol);
        assert!(!v.passed());
        let ce = v.counterexample.clone().unwrap();
        let again = v.reverify().unwrap().unwrap();
        assert!((again.margin() - ce.margin).abs() < 1e-9);
        let text = io::to_json_string(&v).unwrap();
        let back: ConditionVerdict = serde_json::from_str(&text).unwrap();
        let replay = back.reverify().unwrap().unwrap();
        assert!((replay.margin() - ce.margin).abs() < 1e-9);
    }

    #[test]
    fn verdicts_are_deterministic() {
        let h = h3();
        let swap = fixed(channels::ground_top_swap(&h));
        let a = check_eii(&swap, &h, 100, 7, DEFAULT_TOL);
        let b = check_eii(&swap, &h, 100, 7, DEFAULT_TOL);
        assert_eq!(a, b);
        assert_eq!(a.counterexample.as_ref().unwrap().trial, Some(0));
    }

    #[test]
    fn eta_examples() {
        let h = Hamiltonian::new(vec![0.0, 1.0]).unwrap();
        let id = fixed(channels::identity(2));
        for b in [0.5, 2.0] {
            let est = estimate_eta_cp(&id, &h, b, 4, 1).unwrap();
            assert!((est.eta - 1.0).abs() < 2e-2, "eta {}", est.eta);
            assert!(est.eta <= 1.0 + 1e-6);
            let again = eta_ratio(&id, &h, b, &est.argmax_density().unwrap()).unwrap().unwrap();
            assert!((again / est.output_temperature - est.eta).abs() < 1e-8);
        }
        let therm = fixed(channels::thermalizing(&h, Beta::Finite(1.0)).unwrap());
        let est = estimate_eta_cp(&therm, &h, 0.7, 4, 1).unwrap();
        assert!(est.eta.abs() < 1e-6);
        let deph = fixed(channels::dephasing(&h3()));
        let est = estimate_eta_cp(&deph, &h3(), 1.0, 4, 1).unwrap();
        assert!(est.eta <= 1.0 + 1e-6);
        assert!((est.output_temperature - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fiii_agrees_with_fii() {
        let h = h3();
        let cfg = small();
        let named = [
            fixed(channels::dephasing(&h)),
            fixed(channels::thermalizing(&h, Beta::Finite(1.0)).unwrap()),
            fixed(channels::identity(3)),
        ];
        for ch in &named {
            let (fiii, _) = check_fiii(ch, &h, &cfg).unwrap();
            let fii = check_fii(ch, &h, cfg.trials, cfg.seed, cfg.tol);
            assert_eq!(fiii.passed(), fii.passed(), "{}", ch.label());
        }
        let swap = fixed(channels::ground_top_swap(&h));
        assert!(matches!(check_fiii(&swap, &h, &cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn ei_eii_examples() {
        let h = h3();
        let deph = fixed(channels::dephasing(&h));
        assert!(check_ei(&deph, &h, 200, 3, DEFAULT_TOL).passed());
        assert!(check_eii(&deph, &h, 200, 3, DEFAULT_TOL).passed());
        let ext = ChannelFamily::ExtractionUnitary;
        assert!(check_ei(&ext, &h, 200, 3, DEFAULT_TOL).passed());
        assert!(check_eii(&ext, &h, 200, 3, DEFAULT_TOL).passed());
        let swap = fixed(channels::ground_top_swap(&h));
        assert!(!check_ei(&swap, &h, 200, 3, DEFAULT_TOL).passed());
        let q = Hamiltonian::new(vec![0.0, 1.0]).unwrap();
        let swap = channels::ground_top_swap(&q);
        let rho = DensityMatrix::from_diagonal(&[0.8, 0.2]).unwrap();
        let e = evaluate(Condition::Eii, &q, &rho, Some(&swap), None).unwrap();
        assert!((e.lhs - 0.6).abs() < 1e-12 && e.rhs.abs() < 1e-12);
    }

    #[test]
    fn eta_p_examples() {
        let h = Hamiltonian::new(vec![0.0, 0.0, 1.0]).unwrap();
        let psi = CVector::from_vec(vec![re(0.0), re(1.0), re(1.0)]);
        let rho = DensityMatrix::pure(&psi).unwrap();
        let p = PassiveState::new(vec![0.6, 0.2, 0.2]).unwrap();
        let r = eta_p_pointwise(&fixed(channels::dephasing(&h)), &h, &p, &rho, 1e-12).unwrap();
        let (l3, l5) = (3f64.ln(), 5f64.ln());
        assert!((r.eta.unwrap() - 0.5 * l3 / l5).abs() < 1e-10);
        assert!((r.divergence_ratio.unwrap() - 2.5f64.ln() / l5).abs() < 1e-10);
        assert_eq!(r.e2_bound_ok, Some(true));
        assert_eq!(r.e3_holds, Some(true));

        let id = fixed(channels::identity(3));
        let r = eta_p_pointwise(&id, &h, &p, &rho, 1e-12).unwrap();
        assert!((r.lhs.unwrap() - 0.5 / l5).abs() < 1e-12);
        assert!((r.rhs.unwrap() - 0.5 / l3).abs() < 1e-12);

        let therm = fixed(channels::thermalizing(&h, Beta::Finite(1.0)).unwrap());
        let r = eta_p_pointwise(&therm, &h, &p, &rho, 1e-12).unwrap();
        assert!(r.skipped.is_some() && r.eta.is_none());
    }

    #[test]
    fn strong_monotonicity_examples() {
        let h = h3();
        for seed in 0..10 {
            let rho = random_state(3, StateMeasure::HilbertSchmidt, seed).unwrap();
            let u = channels::unitary_channel(&channels::energy_preserving_unitary(&h, seed)).unwrap();
            for theory in [Theory::Cp, Theory::P] {
                assert!(strong_mono_check(&u, &h, &rho, theory, DEFAULT_TOL).unwrap().passed());
                let clock = channels::dephasing_clock(&h);
                let v = strong_mono_check(&clock, &h, &rho, theory, DEFAULT_TOL).unwrap();
                assert!(v.passed(), "{}", v.note);
            }
            // Projector branches are energy eigenstates with zero entropy.
            let v = strong_mono_check(&channels::dephasing(&h), &h, &rho, Theory::Cp, DEFAULT_TOL).unwrap();
            assert!(!v.passed());
        }
        // Measure-and-prepare branches are pure energy eigenstates, so the
        // branch average is E(γ) − ε_1 for every input.
        let therm = channels::thermalizing(&h, Beta::Finite(1.0)).unwrap();
        let g = gibbs(&h, Beta::Finite(1.0)).unwrap();
        let excess = spectra::dot(h.eigenvalues(), g.populations()) - h.ground_energy();
        for theory in [Theory::Cp, Theory::P] {
            let v = strong_mono_check(&therm, &h, &g.to_density(&h).unwrap(), theory, DEFAULT_TOL).unwrap();
            let ce = v.counterexample.unwrap();
            assert!((ce.lhs - excess).abs() < 1e-9 && ce.rhs.abs() < 1e-9);
        }
        assert!(strong_mono_check(&channels::identity(3), &h, &random_state(3, StateMeasure::HilbertSchmidt, 1).unwrap(), Theory::Both, 1e-8).is_err());
    }

    #[test]
    fn decomposition_and_convexity() {
        let h = Hamiltonian::new(vec![0.0, 0.0, 1.0]).unwrap();
        let psi = CVector::from_vec(vec![re(0.0), re(1.0), re(1.0)]);
        let rho = DensityMatrix::pure(&psi).unwrap();
        assert!(distance_decomposition_check(&h, &rho, 1e-10).unwrap());
        assert!((workfn::free_energy(&h, &rho).unwrap() - 0.5).abs() < 1e-12);
        let v = convexity_suite(&h3(), 400, 5).unwrap();
        assert!(v.passed(), "{}", v.note);
        assert!(v.note.contains("outside C"));
    }

    #[test]
    fn classify_named_channels() {
        let h = h3();
        let cfg = small();
        let r = classify(&fixed(channels::dephasing(&h)), &h, Theory::Both, &cfg).unwrap();
        assert!(r.passed(), "{:#?}", r.verdicts);
        assert_eq!(r.verdicts.len(), 7);
        let r = classify(&thermal_mixture(&h), &h, Theory::Both, &cfg).unwrap();
        assert!(!r.verdict(Condition::Fi).unwrap().passed());
        assert!(r.verdict(Condition::Eii).unwrap().passed());
        let r = classify(&fixed(channels::thermalizing(&h, Beta::Finite(1.0)).unwrap()), &h, Theory::Cp, &cfg).unwrap();
        assert!(r.passed());
        assert!(r.eta.iter().all(|e| e.eta.abs() < 1e-6));
        let a = io::to_json_string(&r).unwrap();
        let b = io::to_json_string(&classify(&fixed(channels::thermalizing(&h, Beta::Finite(1.0)).unwrap()), &h, Theory::Cp, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
