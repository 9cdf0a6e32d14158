//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line on stdout
//! (written past the harness capture) and then asserts.
//!
//! Reference values come from the small oracles below, which work directly on
//! nalgebra matrices and share no code with the library.

use std::io::Write;

use ergokit::certify::{self, BetaGrid, CertifyConfig, Condition, Theory};
use ergokit::channels::{self, ChannelFamily};
use ergokit::geometry::{self, FreeState};
use ergokit::linalg::CMatrix;
use ergokit::repro;
use ergokit::spectra::{self, Beta, DensityMatrix, Hamiltonian, StateMeasure};
use ergokit::workfn;
use nalgebra::{Complex, DMatrix, SymmetricEigen};

mod oracle {
    use super::*;

    pub type M = DMatrix<Complex<f64>>;

    pub fn eig(m: &M) -> (Vec<f64>, M) {
        let e = SymmetricEigen::new(m.clone());
        (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
    }

    pub fn spectrum(m: &M) -> Vec<f64> {
        eig(m).0
    }

    /// `Σ ε_k ρ_kk` for `H` diagonal in the computational basis.
    pub fn energy(e: &[f64], rho: &M) -> f64 {
        e.iter().enumerate().map(|(k, ek)| ek * rho[(k, k)].re).sum()
    }

    /// Energy of the passive rearrangement: largest weight on the lowest level.
    pub fn passive_energy(e: &[f64], spectrum: &[f64]) -> f64 {
        let mut l = spectrum.to_vec();
        l.sort_by(|a, b| b.total_cmp(a));
        let mut es = e.to_vec();
        es.sort_by(f64::total_cmp);
        l.iter().zip(&es).map(|(a, b)| a * b).sum()
    }

    pub fn ergotropy(e: &[f64], rho: &M) -> f64 {
        energy(e, rho) - passive_energy(e, &spectrum(rho))
    }

    pub fn shannon(p: &[f64]) -> f64 {
        -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
    }

    pub fn gibbs(e: &[f64], beta: f64) -> Vec<f64> {
        let w: Vec<f64> = e.iter().map(|x| (-beta * (x - e[0])).exp()).collect();
        let z: f64 = w.iter().sum();
        w.iter().map(|x| x / z).collect()
    }

    /// β with `S(γ_β) = s`, by plain bisection. Assumes a nondegenerate ground level.
    pub fn beta_for_entropy(e: &[f64], s: f64) -> f64 {
        let mut hi = 1.0;
        while shannon(&gibbs(e, hi)) > s {
            hi *= 2.0;
            if hi > 1e6 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if shannon(&gibbs(e, mid)) > s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn free_energy(e: &[f64], rho: &M) -> f64 {
        let s = shannon(&spectrum(rho).iter().map(|x| x.max(0.0)).collect::<Vec<_>>());
        let beta = beta_for_entropy(e, s);
        let ground = if beta.is_finite() { gibbs(e, beta) } else { (0..e.len()).map(|k| f64::from(k == 0)).collect() };
        energy(e, rho) - ground.iter().zip(e).map(|(p, x)| p * x).sum::<f64>()
    }

    pub fn log_m(m: &M) -> M {
        let (vals, vecs) = eig(m);
        let d = DMatrix::from_fn(vals.len(), vals.len(), |i, j| {
            Complex::new(if i == j { vals[i].max(1e-300).ln() } else { 0.0 }, 0.0)
        });
        &vecs * d * vecs.adjoint()
    }

    /// `Tr ρ ln ρ − Tr ρ ln σ` for full-rank `σ`.
    pub fn relative_entropy(rho: &M, sigma: &M) -> f64 {
        let neg_s: f64 = spectrum(rho).iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum();
        neg_s - (rho * log_m(sigma)).trace().re
    }

    pub fn kron(a: &M, b: &M) -> M {
        a.kronecker(b)
    }
}

fn report(id: u32, title: &str, failures: &[String]) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let detail = match failures.first() {
        Some(first) => format!(" [{} failure(s); first: {first}]", failures.len()),
        None => String::new(),
    };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "acceptance criterion {id}: {status} - {title}{detail}");
    let _ = out.flush();
    assert!(failures.is_empty(), "criterion {id} failed: {failures:#?}");
}

fn check(failures: &mut Vec<String>, ok: bool, msg: impl FnOnce() -> String) {
    if !ok && failures.len() < 20 {
        failures.push(msg());
    }
}

const LEVELS: [f64; 5] = [0.0, 0.7, 1.3, 2.6, 3.1];

fn hamiltonian(d: usize) -> Hamiltonian {
    Hamiltonian::new(LEVELS[..d].to_vec()).unwrap()
}

fn hs(d: usize, seed: u64) -> DensityMatrix {
    spectra::random_state(d, StateMeasure::HilbertSchmidt, seed).unwrap()
}

/// `H₁ ⊗ I + I ⊗ H₂` with sorted levels; the basis is a permutation of the product basis.
fn product_hamiltonian(e1: &[f64], e2: &[f64]) -> Hamiltonian {
    let d2 = e2.len();
    let mut levels: Vec<(f64, usize)> = e1
        .iter()
        .enumerate()
        .flat_map(|(a, x)| e2.iter().enumerate().map(move |(b, y)| (x + y, a * d2 + b)))
        .collect();
    levels.sort_by(|p, q| p.0.total_cmp(&q.0));
    let n = levels.len();
    let mut u = CMatrix::zeros(n, n);
    for (k, &(_, idx)) in levels.iter().enumerate() {
        u[(idx, k)] = Complex::new(1.0, 0.0);
    }
    Hamiltonian::with_basis(levels.iter().map(|l| l.0).collect(), u).unwrap()
}

#[test]
fn criterion_1_ergotropy_free_energy_identity() {
    let mut failures = Vec::new();
    for i in 0..1000u64 {
        let d = 2 + (i % 4) as usize;
        let h = hamiltonian(d);
        let rho = hs(d, 10_000 + i);
        let e = workfn::ergotropy(&h, &rho).unwrap();
        let f = workfn::free_energy(&h, &rho).unwrap();
        let p = spectra::passive_rearrangement(&h, &rho).unwrap().to_density(&h).unwrap();
        let fp = workfn::free_energy(&h, &p).unwrap();
        let gap = (e - f + fp).abs();
        check(&mut failures, gap <= 1e-8, || format!("trial {i}: |E - F + F(P)| = {gap:e}"));
        let (oe, of) = (oracle::ergotropy(&LEVELS[..d], rho.matrix()), oracle::free_energy(&LEVELS[..d], rho.matrix()));
        check(&mut failures, (e - oe).abs() <= 1e-8 && (f - of).abs() <= 1e-8, || {
            format!("trial {i}: library (E, F) = ({e}, {f}), oracle ({oe}, {of})")
        });
    }
    report(1, "E(rho) - F(rho) + F(P_rho) = 0 within 1e-8 over 1000 states, d = 2..5", &failures);
}

#[test]
fn criterion_2_qubit_equality() {
    let mut failures = Vec::new();
    let h = Hamiltonian::new(vec![0.0, 1.0]).unwrap();
    for i in 0..1000u64 {
        let rho = hs(2, 20_000 + i);
        let e = workfn::ergotropy(&h, &rho).unwrap();
        let f = workfn::free_energy(&h, &rho).unwrap();
        check(&mut failures, (e - f).abs() <= 1e-8, || format!("trial {i}: E = {e}, F = {f}"));
        let oe = oracle::ergotropy(&[0.0, 1.0], rho.matrix());
        check(&mut failures, (e - oe).abs() <= 1e-8, || format!("trial {i}: E = {e}, oracle {oe}"));
    }
    report(2, "qubit E(rho) = F(rho) within 1e-8 over 1000 states", &failures);
}

#[test]
fn criterion_3_minimizer_is_passive_rearrangement() {
    let mut failures = Vec::new();
    let (mut states, mut seed, mut sampled) = (0, 30_000u64, 0usize);
    while states < 200 {
        seed += 1;
        let d = 3 + (seed % 2) as usize;
        let e = &LEVELS[..d];
        let h = hamiltonian(d);
        let rho = hs(d, seed);
        let ergo = oracle::ergotropy(e, rho.matrix());
        if ergo < 1e-6 {
            continue;
        }
        states += 1;
        let min = geometry::family_mp(&h, &rho, 1.0, 1.0).unwrap();
        check(&mut failures, (min.value - ergo).abs() <= 1e-6, || {
            format!("seed {seed}: multistart minimum {} vs E {ergo}", min.value)
        });
        // D(ρ, P) = E · (Tr P_ρ ln P_ρ − Tr ρ ln P) / (Tr P_ρ ln P − Tr ρ ln P).
        let mut lam = oracle::spectrum(rho.matrix());
        lam.sort_by(|a, b| b.total_cmp(a));
        let pops: Vec<f64> = (0..d).map(|k| rho.matrix()[(k, k)].re).collect();
        for j in 0..50u64 {
            let p = spectra::random_passive(&h, seed * 100 + j);
            let lnp: Vec<f64> = p.populations().iter().map(|x| x.ln()).collect();
            let dot = |w: &[f64]| w.iter().zip(&lnp).map(|(a, b)| a * b).sum::<f64>();
            let den = dot(&lam) - dot(&pops);
            if den <= 1e-9 {
                continue;
            }
            sampled += 1;
            let num = lam.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>() - dot(&pops);
            let oracle_d = ergo * num / den;
            let lib_d = geometry::distance_to_free(&h, &rho, &FreeState::Passive(p.clone())).unwrap();
            check(&mut failures, lib_d >= ergo - 1e-9, || format!("seed {seed}/{j}: D = {lib_d} < E = {ergo}"));
            check(&mut failures, (lib_d - oracle_d).abs() <= 1e-8 * oracle_d.max(1.0), || {
                format!("seed {seed}/{j}: D = {lib_d}, oracle {oracle_d}")
            });
        }
    }
    check(&mut failures, sampled > 1000, || format!("only {sampled} passive samples in the domain"));
    report(
        3,
        &format!("min over passive P of T(P|rho)S(rho||P) = E(rho) on 200 states; {sampled} sampled P above E"),
        &failures,
    );
}

#[test]
fn criterion_4_three_level_witnesses() {
    let mut failures = Vec::new();
    let ln3 = 3f64.ln();
    let w = repro::d3_witness([0.0, 0.0, 1.0], [0.6, 0.2, 0.2]).unwrap();
    let expected = [
        ("T(P|rho)", w.temperature, 0.5 / ln3),
        ("T(D(P)|D(rho))", w.temperature_dephased, 1.0 / ln3),
        ("D(rho,P)", w.distance, 0.5 * 5f64.ln() / ln3),
        ("D(D(rho),D(P))", w.distance_dephased, 2.5f64.ln() / ln3),
    ];
    for (name, got, want) in expected {
        check(&mut failures, (got - want).abs() <= 1e-10, || format!("{name} = {got}, closed form {want}"));
    }
    check(&mut failures, w.temperature_dephased > w.temperature, || "(a) dephasing does not raise T".into());
    check(&mut failures, w.distance_dephased > w.distance, || "(b) dephasing does not raise D".into());

    let n = 50;
    let (mut disagreements, mut ties) = (0, 0);
    for i in 0..n {
        for j in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let v = (j as f64 + 0.5) / n as f64;
            let p3 = u / 3.0;
            let p2 = p3 + v * ((1.0 - p3) / 2.0 - p3);
            let p1 = 1.0 - p2 - p3;
            let claim = (p1 / p3).ln() * (p2 * p3).ln() > (p1 * p1 / (p2 * p3)).ln() * (4.0 * p2 * p3).ln();
            let w = repro::d3_witness([0.0, 0.0, 1.0], [p1, p2, p3]).unwrap();
            let margin = w.distance_dephased - w.distance;
            if margin.abs() <= 1e-9 {
                ties += 1;
            } else if claim != (margin > 0.0) {
                disagreements += 1;
                check(&mut failures, false, || format!("(c) disagreement at p = ({p1}, {p2}, {p3})"));
            }
        }
    }
    report(
        4,
        &format!("three-level dephasing witnesses; 50x50 sweep with {disagreements} disagreements, {ties} ties"),
        &failures,
    );
}

#[test]
fn criterion_5_many_copy_convergence() {
    let mut failures = Vec::new();
    let e = [0.0, 1.0, 2.0];
    let h = Hamiltonian::new(e.to_vec()).unwrap();
    let pops = [0.1, 0.6, 0.3];
    let rho = DensityMatrix::from_diagonal(&pops).unwrap();
    let f = workfn::free_energy(&h, &rho).unwrap();
    let of = oracle::free_energy(&e, rho.matrix());
    check(&mut failures, (f - of).abs() <= 1e-10, || format!("F = {f}, oracle {of}"));
    let per_copy: Vec<f64> = (1..=8).map(|n| workfn::ergotropy_ncopy(&h, &rho, n).unwrap() / n as f64).collect();
    for (k, w) in per_copy.windows(2).enumerate() {
        check(&mut failures, w[1] >= w[0] - 1e-12, || format!("E_n/n decreases at n = {}: {} -> {}", k + 1, w[0], w[1]));
    }
    for (k, v) in per_copy.iter().enumerate() {
        check(&mut failures, *v <= f + 1e-9, || format!("E_n/n = {v} exceeds F = {f} at n = {}", k + 1));
    }
    let (gap1, gap8) = (f - per_copy[0], f - per_copy[7]);
    check(&mut failures, gap8 < gap1, || format!("gap(8) = {gap8} not below gap(1) = {gap1}"));

    // Dense brute force at n = 1, 2, 3.
    let one = DMatrix::from_fn(3, 3, |i, j| Complex::new(if i == j { pops[i] } else { 0.0 }, 0.0));
    let mut state = one.clone();
    let mut levels = e.to_vec();
    for n in 1..=3usize {
        if n > 1 {
            state = oracle::kron(&state, &one);
            levels = levels.iter().flat_map(|a| e.iter().map(move |b| a + b)).collect();
        }
        let brute = (oracle::energy(&levels, &state) - oracle::passive_energy(&levels, &oracle::spectrum(&state))) / n as f64;
        check(&mut failures, (brute - per_copy[n - 1]).abs() <= 1e-10, || {
            format!("n = {n}: combinatorial {}, brute force {brute}", per_copy[n - 1])
        });
    }
    report(
        5,
        &format!("E(rho^n)/n nondecreasing to F, gap(1) = {gap1:.6e}, gap(8) = {gap8:.6e}"),
        &failures,
    );
}

#[test]
fn criterion_6_tsallis_family() {
    let mut failures = Vec::new();
    for i in 0..100u64 {
        let d = 2 + (i % 2) as usize;
        let e = &LEVELS[..d];
        let h = hamiltonian(d);
        let rho = hs(d, 60_000 + i);
        let (oe, of) = (oracle::ergotropy(e, rho.matrix()), oracle::free_energy(e, rho.matrix()));
        for alpha in [0.5, 1.5, 2.0] {
            let mp = geometry::family_mp(&h, &rho, alpha, 1.0).unwrap().value;
            let mcp = geometry::family_mcp(&h, &rho, alpha, 1.0).unwrap().value;
            check(&mut failures, (mp - oe).abs() <= 1e-6, || format!("state {i}, alpha {alpha}: M_p = {mp}, E = {oe}"));
            check(&mut failures, (mcp - of).abs() <= 1e-6, || format!("state {i}, alpha {alpha}: M_cp = {mcp}, F = {of}"));
        }
        let sigma = spectra::gibbs(&h, Beta::Finite(1.0)).unwrap().to_density(&h).unwrap();
        let s = oracle::relative_entropy(rho.matrix(), sigma.matrix());
        let lib = geometry::relative_entropy(&rho, &sigma).unwrap().value();
        check(&mut failures, (lib - s).abs() <= 1e-9, || format!("state {i}: S = {lib}, oracle {s}"));
        for alpha in [1.0 - 1e-4, 1.0 + 1e-4] {
            let sa = geometry::tsallis_divergence(&rho, &sigma, alpha).unwrap().value();
            check(&mut failures, (sa - s).abs() <= 1e-3, || format!("state {i}: S_{alpha} = {sa}, S = {s}"));
        }
    }
    report(6, "M_p,alpha = E and M_cp,alpha = F for alpha in {0.5, 1.5, 2}; S_alpha -> S", &failures);
}

#[test]
fn criterion_7_named_channel_anchors() {
    let mut failures = Vec::new();
    let h = Hamiltonian::new(vec![0.0, 1.0, 2.0]).unwrap();
    let trials = 10_000;
    let seed = 7;
    let tol = certify::DEFAULT_TOL;
    let config = CertifyConfig {
        seed,
        trials,
        ..CertifyConfig::default()
    };

    let deph = ChannelFamily::Fixed(channels::dephasing(&h));
    let report_d = certify::classify(&deph, &h, Theory::Both, &config).unwrap();
    for cond in [Condition::Fi, Condition::Fii, Condition::Fiii, Condition::Ei, Condition::Eii] {
        let ok = report_d.verdict(cond).is_some_and(|v| v.passed());
        check(&mut failures, ok, || format!("dephasing fails {cond}"));
    }

    let therm = ChannelFamily::Fixed(channels::thermalizing(&h, Beta::Finite(1.0)).unwrap());
    let fii = certify::check_fii(&therm, &h, trials, seed, tol);
    check(&mut failures, fii.passed(), || "thermalizing fails F.ii".into());
    for est in certify::eta_scan(&therm, &h, &config).unwrap() {
        check(&mut failures, est.eta.abs() <= 1e-6, || {
            format!("thermalizing eta = {} at beta = {}", est.eta, est.gamma_beta)
        });
    }

    let mix = channels::mixture(
        &[
            channels::thermalizing(&h, Beta::Finite(0.5)).unwrap(),
            channels::thermalizing(&h, Beta::Finite(2.0)).unwrap(),
        ],
        &[0.5, 0.5],
    )
    .unwrap();
    let mix = ChannelFamily::Fixed(mix);
    let fi = certify::check_fi(&mix, &h, &BetaGrid::default(), tol).unwrap();
    check(&mut failures, !fi.passed(), || "thermal mixture passes F.i".into());
    check(&mut failures, certify::check_eii(&mix, &h, trials, seed, tol).passed(), || {
        "thermal mixture fails E.ii".into()
    });

    let swap = ChannelFamily::Fixed(channels::ground_top_swap(&h));
    let first = certify::check_eii(&swap, &h, trials, seed, tol);
    let second = certify::check_eii(&swap, &h, trials, seed, tol);
    check(&mut failures, !first.passed(), || "swap passes E.ii".into());
    check(&mut failures, first == second, || "swap certificate differs between identical runs".into());
    match (first.counterexample.as_ref(), first.reverify().unwrap()) {
        (Some(ce), Some(eval)) => {
            check(&mut failures, ce.margin > certify::FAIL_FACTOR * tol, || format!("swap margin {}", ce.margin));
            check(&mut failures, (eval.margin() - ce.margin).abs() <= 1e-12, || {
                format!("swap certificate recomputes to {} vs {}", eval.margin(), ce.margin)
            });
        }
        _ => check(&mut failures, false, || "swap verdict carries no certificate".into()),
    }
    report(7, "named channels: dephasing, thermalizing, thermal mixture, ground-top swap (10^4 trials)", &failures);
}

#[test]
fn criterion_8_structural_sweeps() {
    let mut failures = Vec::new();
    let trials = 1000u64;

    // Convexity of E: library suite and oracle.
    for d in [2, 3, 4] {
        let v = certify::convexity_suite(&hamiltonian(d), trials as usize, 80 + d as u64).unwrap();
        check(&mut failures, v.passed(), || format!("convexity suite fails at d = {d}: {}", v.note));
    }
    for i in 0..trials {
        let d = 2 + (i % 3) as usize;
        let e = &LEVELS[..d];
        let (a, b) = (hs(d, 81_000 + 2 * i), hs(d, 81_001 + 2 * i));
        let w = (i as f64 + 0.5) / trials as f64;
        let mix = DensityMatrix::mixture(&[a.clone(), b.clone()], &[w, 1.0 - w]).unwrap();
        let lhs = oracle::ergotropy(e, mix.matrix());
        let rhs = w * oracle::ergotropy(e, a.matrix()) + (1.0 - w) * oracle::ergotropy(e, b.matrix());
        check(&mut failures, lhs <= rhs + 1e-10, || format!("convexity trial {i}: {lhs} > {rhs}"));
    }

    // Superadditivity of E and F, additivity of F at matched beta.
    for i in 0..trials {
        let (d1, d2) = (2 + (i % 2) as usize, 2 + (i / 2 % 2) as usize);
        let e2: Vec<f64> = LEVELS[..d2].iter().map(|x| 0.9 * x).collect();
        let (h1, h2) = (hamiltonian(d1), Hamiltonian::new(e2.clone()).unwrap());
        let h12 = product_hamiltonian(&LEVELS[..d1], &e2);
        let (r1, r2) = (hs(d1, 82_000 + 2 * i), hs(d2, 82_001 + 2 * i));
        let r12 = r1.tensor(&r2);
        let e_sum = workfn::ergotropy(&h1, &r1).unwrap() + workfn::ergotropy(&h2, &r2).unwrap();
        let e12 = workfn::ergotropy(&h12, &r12).unwrap();
        check(&mut failures, e12 >= e_sum - 1e-9, || format!("E superadditivity trial {i}: {e12} < {e_sum}"));
        let f_sum = workfn::free_energy(&h1, &r1).unwrap() + workfn::free_energy(&h2, &r2).unwrap();
        let f12 = workfn::free_energy(&h12, &r12).unwrap();
        check(&mut failures, f12 >= f_sum - 1e-8, || format!("F superadditivity trial {i}: {f12} < {f_sum}"));

        let beta = Beta::Finite(0.2 + 3.0 * (i as f64 / trials as f64));
        let g1 = spectra::gibbs(&h1, beta).unwrap().to_density(&h1).unwrap();
        let g2 = spectra::gibbs(&h2, beta).unwrap().to_density(&h2).unwrap();
        let m1 = g1.conjugate(&spectra::random_unitary(d1, 83_000 + 2 * i)).unwrap();
        let m2 = g2.conjugate(&spectra::random_unitary(d2, 83_001 + 2 * i)).unwrap();
        let sum = workfn::free_energy(&h1, &m1).unwrap() + workfn::free_energy(&h2, &m2).unwrap();
        let joint = workfn::free_energy(&h12, &m1.tensor(&m2)).unwrap();
        check(&mut failures, (joint - sum).abs() <= 1e-8, || format!("F additivity trial {i}: {joint} vs {sum}"));
    }

    // Unital lemma and relative-entropy contractivity.
    for i in 0..trials {
        let d = 2 + (i % 4) as usize;
        let e = &LEVELS[..d];
        let rho = hs(d, 84_000 + i);
        let unital = channels::random_unital_channel(d, 1 + (i % 3) as usize, 85_000 + i).unwrap();
        let out = channels::apply(&unital, &rho).unwrap();
        let (before, after) = (
            oracle::passive_energy(e, &oracle::spectrum(rho.matrix())),
            oracle::passive_energy(e, &oracle::spectrum(out.matrix())),
        );
        check(&mut failures, after >= before - 1e-9, || format!("unital lemma trial {i}: {after} < {before}"));

        let sigma = hs(d, 86_000 + i);
        let ch = channels::random_channel(d, 1 + (i % 3) as usize, 87_000 + i).unwrap();
        let (lr, ls) = (channels::apply(&ch, &rho).unwrap(), channels::apply(&ch, &sigma).unwrap());
        let s_in = geometry::relative_entropy(&rho, &sigma).unwrap().value();
        let s_out = geometry::relative_entropy(&lr, &ls).unwrap().value();
        check(&mut failures, s_out <= s_in + 1e-9, || format!("contractivity trial {i}: {s_out} > {s_in}"));
        let o_in = oracle::relative_entropy(rho.matrix(), sigma.matrix());
        check(&mut failures, (s_in - o_in).abs() <= 1e-8 * o_in.max(1.0), || {
            format!("relative entropy trial {i}: {s_in}, oracle {o_in}")
        });
    }

    // Strong monotonicity: dephasing (unitary Kraus set) and energy-preserving unitaries.
    for i in 0..trials {
        let d = 2 + (i % 3) as usize;
        let h = hamiltonian(d);
        let rho = hs(d, 88_000 + i);
        let ch = if i % 2 == 0 {
            channels::dephasing_clock(&h)
        } else {
            channels::unitary_channel(&channels::energy_preserving_unitary(&h, 89_000 + i)).unwrap()
        };
        for theory in [Theory::Cp, Theory::P] {
            let v = certify::strong_mono_check(&ch, &h, &rho, theory, 1e-8).unwrap();
            check(&mut failures, v.passed(), || format!("strong monotonicity trial {i} ({theory:?}): {}", v.note));
        }
    }

    // Distance decomposition.
    for i in 0..trials {
        let d = 2 + (i % 4) as usize;
        let ok = certify::distance_decomposition_check(&hamiltonian(d), &hs(d, 90_000 + i), 1e-8).unwrap();
        check(&mut failures, ok, || format!("decomposition trial {i}"));
    }
    report(
        8,
        "convexity, super/additivity, unital lemma, contractivity, strong monotonicity, decomposition",
        &failures,
    );
}

#[test]
fn criterion_9_beta_solver() {
    let mut failures = Vec::new();
    let h = Hamiltonian::new(vec![0.0, 1.0]).unwrap();
    let rho = DensityMatrix::from_diagonal(&[0.2, 0.8]).unwrap();
    let sol = workfn::beta_of_state(&h, &rho).unwrap();
    match sol.beta {
        Beta::Finite(b) => check(&mut failures, (b - 4f64.ln()).abs() <= 1e-9, || format!("beta = {b}, ln 4 = {}", 4f64.ln())),
        Beta::Infinite => check(&mut failures, false, || "qubit beta reported infinite".into()),
    }
    for i in 0..1000u64 {
        let d = 2 + (i % 4) as usize;
        let h = hamiltonian(d);
        let rho = hs(d, 91_000 + i);
        let sol = workfn::beta_of_state(&h, &rho).unwrap();
        check(&mut failures, sol.residual <= 1e-10, || format!("trial {i}: residual {}", sol.residual));
        let s = oracle::shannon(&oracle::spectrum(rho.matrix()).iter().map(|x| x.max(0.0)).collect::<Vec<_>>());
        let sg = match sol.beta {
            Beta::Finite(b) => oracle::shannon(&oracle::gibbs(&LEVELS[..d], b)),
            Beta::Infinite => 0.0,
        };
        check(&mut failures, (sg - s).abs() <= 1e-10, || format!("trial {i}: S(gamma) = {sg}, S(rho) = {s}"));
    }
    for i in 0..100u64 {
        let d = 2 + (i % 4) as usize;
        let pure = spectra::random_state(d, StateMeasure::HaarPure, 92_000 + i).unwrap();
        let sol = workfn::beta_of_state(&hamiltonian(d), &pure).unwrap();
        check(&mut failures, sol.beta.is_infinite(), || format!("pure state {i}: beta = {:?}", sol.beta));
    }
    report(9, "beta solver: ln 4 qubit anchor, entropy residual <= 1e-10, pure states infinite", &failures);
}
