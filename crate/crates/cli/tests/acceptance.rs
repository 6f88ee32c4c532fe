//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Tolerances are fixed here and never loosened to make a line pass. The
//! process exits 0 after printing every line; set `ACCEPTANCE_STRICT=1` to
//! exit 1 when any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use chargelab::chaos::{
    f1_decomposition_check, fit_low_energy_exponent, form_factor, frame_potential, k_invariance, otoc, pauli_law_literal,
    r2_decomposition_check, r4_decomposition_check, u1_haar_two_point, ConjugationScope, FormFactorKind, Scope, Spacing,
    TimeGrid, UnitarySamples,
};
use chargelab::decoupling::{
    decoupling_margin, g_function, hp_cmi2, hp_cmi2_from_purities, hp_monte_carlo, hp_purities, kl_statistics, page_purity_analytic, page_purity_mc,
    product_state, small_charge_profile, Cmi2, HpConfig, KlSetup, PurityOrder, Scrambler,
};
use chargelab::ensembles::{
    build_syk_dense, build_syk_hamiltonian, sample_haar_unitary, sample_syk_couplings, sample_u1_haar, spectral_ensemble,
    EnsembleKind, EnsembleSpec, HamiltonianEnsemble,
};
use chargelab::hilbert::{CMatrix, ChargeBasis, PauliString};
use chargelab::rng::{complex_normal, substream, Purpose};
use chargelab::weingarten::{haar_moment, lis_count, WiringFactor, WiringSpec};
use chargelab_cli::{resolve, run, RawConfig, EXPERIMENTS};
use num_complex::Complex64;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

// ---------- 1. Haar moments ----------

/// Restricted growth strings: every equality pattern of `n` labels using at
/// most `max_labels` distinct values.
fn patterns(n: usize, max_labels: usize) -> Vec<Vec<u64>> {
    let mut out = vec![vec![0u64]];
    for _ in 1..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                let top = *p.iter().max().unwrap() as usize;
                (0..=(top + 1).min(max_labels - 1)).map(move |v| {
                    let mut q = p.clone();
                    q.push(v as u64);
                    q
                })
            })
            .collect();
    }
    out
}

fn criterion_1() -> Verdict {
    let samples = 100_000u64;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for d in [2usize, 3, 4] {
        // wirings: U[i_k, j_k] and U^dag[i'_k, j'_k]; U rows pair with U^dag
        // columns and vice versa, so patterns are drawn over those groups
        let mut wirings = Vec::new();
        for p in 1..=2usize {
            for g1 in patterns(2 * p, d) {
                for g2 in patterns(2 * p, d) {
                    let u: Vec<(u64, u64)> = (0..p).map(|k| (g1[k], g2[k])).collect();
                    let ud: Vec<(u64, u64)> = (0..p).map(|k| (g2[p + k], g1[p + k])).collect();
                    wirings.push((u, ud));
                }
            }
        }
        let exact: Vec<f64> = wirings
            .iter()
            .map(|(u, ud)| {
                let w = WiringSpec::new(
                    u.iter().map(|&(r, c)| WiringFactor::fixed(r, c)).collect(),
                    ud.iter().map(|&(r, c)| WiringFactor::fixed(r, c)).collect(),
                );
                haar_moment(&w).unwrap().eval_f64(d as f64).unwrap()
            })
            .collect();
        let mut sum = vec![Complex64::new(0.0, 0.0); wirings.len()];
        let mut sq = vec![(0.0f64, 0.0f64); wirings.len()];
        for s in 0..samples {
            let u = sample_haar_unitary(d, &mut substream(11, Purpose::Haar, s, d as u64));
            for (i, (fu, fud)) in wirings.iter().enumerate() {
                let mut v = Complex64::new(1.0, 0.0);
                for &(r, c) in fu {
                    v *= u[(r as usize, c as usize)];
                }
                for &(r, c) in fud {
                    v *= u[(c as usize, r as usize)].conj();
                }
                sum[i] += v;
                sq[i].0 += v.re * v.re;
                sq[i].1 += v.im * v.im;
            }
        }
        let n = samples as f64;
        for i in 0..wirings.len() {
            let m = sum[i] / n;
            let se_re = ((sq[i].0 / n - m.re * m.re).max(0.0) / (n - 1.0)).sqrt();
            let se_im = ((sq[i].1 / n - m.im * m.im).max(0.0) / (n - 1.0)).sqrt();
            let z_re = (m.re - exact[i]).abs() / se_re.max(1e-300);
            let z_im = m.im.abs() / se_im.max(1e-300);
            let ok = (m.re - exact[i]).abs() <= 5.0 * se_re + 1e-12 && m.im.abs() <= 5.0 * se_im + 1e-12;
            if se_re > 0.0 {
                worst = worst.max(z_re);
            }
            if se_im > 0.0 {
                worst = worst.max(z_im);
            }
            if !ok {
                failures.push(format!("d={d} {:?}", wirings[i]));
            }
            checked += 1;
        }
    }
    verdict(failures.is_empty(), format!("{checked} wirings at d=2,3,4, worst deviation {worst:.2} se; failures {failures:?}"))
}

// ---------- 2. form factors ----------

fn criterion_2() -> Verdict {
    let n = 100_000;
    let u1 = spectral_ensemble(&EnsembleSpec::new(EnsembleKind::U1Haar, 4, 21, n)).unwrap();
    let r2 = form_factor(&u1, FormFactorKind::R2, 1.0, Scope::Whole).unwrap();
    let haar = spectral_ensemble(&EnsembleSpec::new(EnsembleKind::Haar, 3, 22, n)).unwrap();
    let h2 = form_factor(&haar, FormFactorKind::R2, 1.0, Scope::Whole).unwrap();
    let h4 = form_factor(&haar, FormFactorKind::R4, 1.0, Scope::Whole).unwrap();
    let ok = within(r2.value, 5.0, 5.0 * r2.std_error) && within(h2.value, 1.0, 5.0 * h2.std_error) && within(h4.value, 2.0, 5.0 * h4.std_error);
    verdict(
        ok,
        format!(
            "U(1) D=4 R2 = {:.4} ± {:.4} (5); Haar d=8 R2 = {:.4} ± {:.4} (1), R4 = {:.4} ± {:.4} (2)",
            r2.value, r2.std_error, h2.value, h2.std_error, h4.value, h4.std_error
        ),
    )
}

// ---------- 3. LIS ----------

fn lis_len(p: &[usize]) -> usize {
    let mut best = vec![1usize; p.len()];
    for i in 0..p.len() {
        for j in 0..i {
            if p[j] < p[i] {
                best[i] = best[i].max(best[j] + 1);
            }
        }
    }
    best.into_iter().max().unwrap_or(0)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn criterion_3() -> Verdict {
    let mut bad = Vec::new();
    let fact = |k: usize| (1..=k as u64).product::<u64>();
    for l in 1..=6 {
        for k in 1..=l {
            if lis_count(k, l).unwrap() != fact(k) {
                bad.push((k, l));
            }
        }
    }
    for k in 2..=7 {
        let perms = permutations(k);
        for l in 1..k {
            let brute = perms.iter().filter(|p| lis_len(p) <= l).count() as u64;
            if lis_count(k, l).unwrap() != brute {
                bad.push((k, l));
            }
        }
    }
    let catalan = [1u64, 2, 5, 14, 42, 132, 429];
    for (i, &c) in catalan.iter().enumerate() {
        if lis_count(i + 1, 2).unwrap() != c {
            bad.push((i + 1, 2));
        }
    }
    verdict(bad.is_empty(), format!("k <= L <= 6 equal k!, k > L brute-forced for k <= 7, Catalan at L=2; mismatches {bad:?}"))
}

// ---------- 4. SYK structure ----------

fn criterion_4() -> Verdict {
    let mut bad = Vec::new();
    for n in [4usize, 6, 8] {
        for r in 0..5u64 {
            let c = sample_syk_couplings(n, 1.0, &mut substream(4, Purpose::Syk, r, 0)).unwrap();
            let dense = build_syk_dense(&c);
            for i in 0..dense.nrows() {
                for j in 0..dense.ncols() {
                    // (HQ - QH)_{ij} = H_ij (q_j - q_i)
                    if (i.count_ones() != j.count_ones()) && dense[(i, j)] != Complex64::new(0.0, 0.0) {
                        bad.push(format!("N={n} r={r}: [H,Q] at ({i},{j})"));
                    }
                }
            }
            let h = build_syk_hamiltonian(&c).unwrap();
            for q in 0..=1 {
                let ev = h.block(q).clone().symmetric_eigenvalues();
                if ev.iter().any(|&e| e != 0.0) {
                    bad.push(format!("N={n} r={r}: sector {q} eigenvalues {ev:?}"));
                }
            }
        }
    }
    verdict(bad.is_empty(), format!("N=4,6,8 x 5 realizations: sectors 0,1 exactly zero, [H,Q] = 0 exactly; problems {bad:?}"))
}

// ---------- 5. DOS exponents ----------

fn criterion_5() -> Verdict {
    let se = spectral_ensemble(&EnsembleSpec::new(EnsembleKind::Csyk, 10, 1, 500)).unwrap();
    let whole = fit_low_energy_exponent(&se, Scope::Whole, 0.1).unwrap();
    let sectors: Vec<(usize, f64)> =
        (2..=8).map(|q| (q, fit_low_energy_exponent(&se, Scope::Sector(q), 0.1).unwrap().alpha)).collect();
    let sector_ok = sectors.iter().all(|&(_, a)| within(a, 0.5, 0.15));
    let whole_ok = within(whole.alpha, 1.0, 0.2);
    let list: Vec<String> = sectors.iter().map(|(q, a)| format!("q{q}={a:.3}")).collect();
    verdict(
        sector_ok && whole_ok,
        format!("sector exponents {} (target 0.5 ± 0.15); whole {:.3} (target 1.0 ± 0.2)", list.join(" "), whole.alpha),
    )
}

// ---------- 6 and 7. decomposition identities ----------

fn syk8() -> (EnsembleSpec, Vec<f64>) {
    let spec = EnsembleSpec::new(EnsembleKind::Csyk, 8, 1, 200);
    let times = TimeGrid::new(0.1, 100.0, 64, Spacing::Log).unwrap().values();
    (spec, times)
}

fn criterion_6() -> Verdict {
    let (spec, times) = syk8();
    let se = spectral_ensemble(&spec).unwrap();
    let r2 = r2_decomposition_check(&se, &times).unwrap();
    let ens = HamiltonianEnsemble::sample(&spec).unwrap();
    let f1 = f1_decomposition_check(&ens, &times).unwrap();
    let argmax = |s: &chargelab::chaos::ObservableSeries| {
        let i = (0..s.len()).filter(|&i| s.values[i].is_finite()).max_by(|&a, &b| s.values[a].total_cmp(&s.values[b])).unwrap();
        (s.times[i], s.values[i], s.std_errors[i])
    };
    let (t2, m2, e2) = argmax(&r2);
    let (t1, m1, e1) = argmax(&f1.relative_error);
    verdict(
        m2 < 0.2 && m1 < 0.1,
        format!("R2 max relative error {m2:.4} ± {e2:.4} at t={t2:.3} (< 0.2); F1 max {m1:.4} ± {e1:.4} at t={t1:.3} (< 0.1)"),
    )
}

fn criterion_7() -> Verdict {
    let (spec, times) = syk8();
    let se = spectral_ensemble(&spec).unwrap();
    let c = r4_decomposition_check(&se, &times).unwrap();
    let max = c.representation_gap.values.iter().cloned().fold(0.0f64, f64::max);
    let all_finite = c.representation_gap.values.iter().all(|v| v.is_finite());
    verdict(all_finite && max < 1e-8, format!("csyk N=8, 64 times: max relative gap {max:.3e} (< 1e-8)"))
}

// ---------- 8. frame potentials ----------

fn hamiltonian_samples(kind: EnsembleKind, size: usize, n: usize, t: f64) -> UnitarySamples {
    let ens = HamiltonianEnsemble::sample(&EnsembleSpec::new(kind, size, 8, n)).unwrap();
    UnitarySamples::from_blocks(ChargeBasis::shared(size).unwrap(), ens.unitaries_at(t)).unwrap()
}

fn criterion_8() -> Verdict {
    let haar = UnitarySamples::from_dense((0..400).map(|r| sample_haar_unitary(8, &mut substream(8, Purpose::Haar, r, 0))).collect()).unwrap();
    let f1 = frame_potential(&haar, 1).unwrap();
    let f1_ok = within(f1.value, 1.0, 5.0 * f1.std_error);

    let gue = hamiltonian_samples(EnsembleKind::GuePerSector, 4, 1000, 1.0);
    let inv = k_invariance(&gue, 1, 1, 8, ConjugationScope::PerSector).unwrap();
    let inv_ok = inv.value.abs() <= 3.0 * inv.std_error;

    let basis = ChargeBasis::shared(4).unwrap();
    let u1 = UnitarySamples::from_blocks(basis.clone(), (0..300).map(|r| sample_u1_haar(&basis, 8, r).into_blocks()).collect()).unwrap();
    let mut sets: Vec<(String, UnitarySamples)> = vec![("haar d=8".into(), haar), ("u1_haar D=4".into(), u1)];
    for t in [0.5, 5.0] {
        sets.push((format!("gue D=4 t={t}"), hamiltonian_samples(EnsembleKind::GuePerSector, 4, 200, t)));
        sets.push((format!("csyk N=6 t={t}"), hamiltonian_samples(EnsembleKind::Csyk, 6, 200, t)));
    }
    let mut bound_ok = true;
    let mut worst = f64::INFINITY;
    for (name, s) in &sets {
        for k in 1..=2u32 {
            let f = frame_potential(s, k).unwrap();
            let kf = if k == 1 { 1.0 } else { 2.0 };
            let z = (f.value - kf) / f.std_error.max(1e-300);
            worst = worst.min(z);
            if f.value < kf - 3.0 * f.std_error {
                bound_ok = false;
                eprintln!("  bound violated: {name} k={k}: {} ± {}", f.value, f.std_error);
            }
        }
    }
    verdict(
        f1_ok && inv_ok && bound_ok,
        format!(
            "Haar F1 = {:.4} ± {:.4}; GUE I1 = {:.3e} ± {:.3e}; {} F^(k) estimates, min (F - k!)/se = {worst:.2}",
            f1.value,
            f1.std_error,
            inv.value,
            inv.std_error,
            2 * sets.len()
        ),
    )
}

// ---------- 9. OTOCs ----------

fn block_diagonal_operator(n: usize, seed: u64) -> CMatrix {
    let mut rng = substream(seed, Purpose::Operator, 0, 0);
    let l = 1 << n;
    CMatrix::from_fn(l, l, |i, j| if i.count_ones() == j.count_ones() { complex_normal(&mut rng, 1.0) } else { Complex64::new(0.0, 0.0) })
}

fn criterion_9() -> Verdict {
    let mut residual: f64 = 0.0;
    let ens = HamiltonianEnsemble::sample(&EnsembleSpec::new(EnsembleKind::Csyk, 6, 9, 20)).unwrap();
    let basis = ChargeBasis::shared(6).unwrap();
    let ops: Vec<CMatrix> = (0..4).map(|i| block_diagonal_operator(6, 90 + i)).collect();
    for t in [0.3, 3.0, 30.0] {
        let s = UnitarySamples::from_blocks(basis.clone(), ens.unitaries_at(t)).unwrap();
        for o in [otoc(&s, &ops[..2], Scope::Whole).unwrap(), otoc(&s, &ops, Scope::Whole).unwrap()] {
            residual = residual.max(o.max_residual.unwrap());
        }
    }
    let residual_ok = residual < 1e-10;

    let b3 = ChargeBasis::shared(3).unwrap();
    let s = UnitarySamples::from_blocks(b3.clone(), (0..20_000).map(|r| sample_u1_haar(&b3, 19, r).into_blocks()).collect()).unwrap();
    let pairs = [("ZZZ", "ZZZ"), ("ZIX", "ZZI"), ("ZII", "IZI"), ("III", "III"), ("XII", "XII"), ("ZII", "ZII"), ("XZI", "XZI")];
    let mut law_ok = true;
    let mut rows = Vec::new();
    for (a, b) in pairs {
        let (pa, pb): (PauliString, PauliString) = (a.parse().unwrap(), b.parse().unwrap());
        let o = otoc(&s, &[pa.to_dense(), pb.to_dense()], Scope::Whole).unwrap();
        let law = pauli_law_literal(&pa, &pb).unwrap();
        let exact = u1_haar_two_point(&b3, &pa.to_dense(), &pb.to_dense()).unwrap().re;
        let ok = (o.value - law).abs() <= 5.0 * o.std_error + 1e-12;
        law_ok &= ok;
        rows.push(format!("{a}/{b}: mc {:.4} ± {:.4}, law {law:.4}, exact {exact:.4}", o.value, o.std_error));
    }
    verdict(residual_ok && law_ok, format!("sector residual {residual:.2e} (< 1e-10); Pauli law [{}]", rows.join("; ")))
}

// ---------- 10. Page and HP ----------

fn criterion_10() -> Verdict {
    let mut ok = true;
    let mut rows = Vec::new();
    for (n_a, n_b, q, reps) in [(1usize, 3usize, 2usize, 1000usize), (2, 4, 3, 1000), (3, 5, 4, 300)] {
        let st = product_state(n_a + n_b, (1 << q) - 1).unwrap();
        let mc = page_purity_mc(n_a, n_b, &st, Scrambler::U1Haar, reps, 10).unwrap();
        let exact = page_purity_analytic(n_a, n_b, q).unwrap();
        let d_q = chargelab::hilbert::binomial(n_a + n_b, q).unwrap() as f64;
        let tol = (3.0 * mc.std_error).max(2.0 / d_q);
        let pass = within(mc.purity, exact, tol);
        ok &= pass;
        rows.push(format!("page {n_a}+{n_b} q={q}: {:.4} vs {exact:.4}{}", mc.purity, if pass { "" } else { " FAIL" }));
    }
    for (n_a, n_b, n_c, n_d, m_a, m_b) in [(2, 2, 2, 2, 1, 1), (2, 4, 2, 4, 1, 2), (1, 5, 3, 3, 1, 2), (2, 6, 3, 5, 1, 3)] {
        let cfg = HpConfig::new(n_a, n_b, n_c, n_d, m_a, m_b).unwrap();
        let mc = hp_monte_carlo(&cfg, 400, 10).unwrap();
        let p = hp_purities(&cfg, PurityOrder::Leading).unwrap();
        let d_q = chargelab::hilbert::binomial(cfg.total_qubits(), cfg.m()).unwrap() as f64;
        let two = 2.0 / d_q;
        let ac = within(mc.purity_ac, p.purity_ac, (3.0 * mc.purity_ac_se).max(two));
        let c = within(mc.purity_c, p.purity_c, (3.0 * mc.purity_c_se).max(two));
        let (cmi_ok, cmi_text) = match hp_cmi2(&cfg).unwrap() {
            Cmi2::Bits(b) => (within(mc.cmi2, b, (3.0 * mc.cmi2_se).max(two)), format!("{b:.4}")),
            Cmi2::Saturated { margin } => (false, format!("saturated (r={margin:.3})")),
        };
        ok &= ac && c && cmi_ok;
        // purity-based I2 with exact Haar weights, for diagnosing closed-form misses
        let exact = hp_cmi2_from_purities(&cfg, PurityOrder::Exact).unwrap();
        rows.push(format!(
            "hp {n_a},{n_b},{n_c},{n_d},{m_a},{m_b} (d_q={d_q}): P_AC {:.4}/{:.4}{} P_C {:.4}/{:.4}{} I2 {:.4} ± {:.4}/{cmi_text} (exact {exact:.4}){}",
            mc.purity_ac,
            p.purity_ac,
            if ac { "" } else { " FAIL" },
            mc.purity_c,
            p.purity_c,
            if c { "" } else { " FAIL" },
            mc.cmi2,
            mc.cmi2_se,
            if cmi_ok { "" } else { " FAIL" }
        ));
    }
    verdict(ok, rows.join("; "))
}

// ---------- 11. Knill-Laflamme ----------

fn criterion_11() -> Verdict {
    let mut ok = true;
    let mut rows = Vec::new();
    let l = 16.0;
    // O = P_mu^dag P_nu: mu = nu gives the identity, mu != nu a non-identity Pauli
    let ident = PauliString::identity(4).to_dense();
    let pauli: PauliString = "XZIY".parse().unwrap();
    for (name, op, same_pauli) in [("mu=nu", &ident, true), ("mu!=nu", &pauli.to_dense(), false)] {
        for (a, b) in [(3usize, 3usize), (3, 12)] {
            let s = kl_statistics(KlSetup::Haar { qubits: 4 }, op, a, b, 10_000, 11).unwrap();
            let dab = if a == b { 1.0 } else { 0.0 };
            let dmn = if same_pauli { 1.0 } else { 0.0 };
            let mean_target = dab * dmn;
            let var_target = (1.0 - dab * dmn) / (l + 1.0);
            let mean_ok = (s.mean - Complex64::new(mean_target, 0.0)).norm() <= 5.0 * s.mean_se * std::f64::consts::SQRT_2 + 1e-12;
            let var_ok = within(s.variance, var_target, 5.0 * s.variance_se + 1e-12);
            ok &= mean_ok && var_ok;
            rows.push(format!(
                "haar {name} a{}b: mean {:.4}{} var {:.5} ± {:.5} vs {:.5} (exact {:.5}){}",
                if a == b { "=" } else { "!=" },
                s.mean.re,
                if mean_ok { "" } else { " FAIL" },
                s.variance,
                s.variance_se,
                var_target,
                s.exact_variance,
                if var_ok { "" } else { " FAIL" }
            ));
        }
    }
    // U(1) encoding at D=5, m=2 with a random Hermitian operator
    let mut rng = substream(12, Purpose::Operator, 0, 0);
    let g = CMatrix::from_fn(32, 32, |_, _| complex_normal(&mut rng, 1.0));
    let herm = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    for (a, b) in [(0b00011usize, 0b00011usize), (0b00011, 0b10100)] {
        let s = kl_statistics(KlSetup::U1Haar { qubits: 5, charge: 2 }, &herm, a, b, 10_000, 13).unwrap();
        let mean_ok = (s.mean - s.predicted_mean).norm() <= 5.0 * s.mean_se * std::f64::consts::SQRT_2;
        let var_ok = within(s.variance, s.predicted_variance, 5.0 * s.variance_se);
        ok &= mean_ok && var_ok;
        rows.push(format!(
            "u1 a{}b: mean {:.4}/{:.4}{} var {:.4} ± {:.4} vs {:.4} (exact {:.4}){}",
            if a == b { "=" } else { "!=" },
            s.mean.re,
            s.predicted_mean.re,
            if mean_ok { "" } else { " FAIL" },
            s.variance,
            s.variance_se,
            s.predicted_variance,
            s.exact_variance,
            if var_ok { "" } else { " FAIL" }
        ));
    }
    // 1/(L+1) scaling of the mu != nu, a = b variance
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for q in 3..=6usize {
        let p: PauliString = std::iter::once('X').chain(std::iter::repeat_n('I', q - 1)).collect::<String>().parse().unwrap();
        let s = kl_statistics(KlSetup::Haar { qubits: q }, &p.to_dense(), 1, 1, 10_000, 14).unwrap();
        xs.push(((1usize << q) as f64).ln());
        ys.push(s.variance.ln());
    }
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let slope_ok = within(slope, -1.0, 0.1);
    ok &= slope_ok;
    rows.push(format!("slope over L=8..64 {slope:.3}{}", if slope_ok { "" } else { " FAIL" }));
    verdict(ok, rows.join("; "))
}

// ---------- 12. decoupling regimes ----------

fn criterion_12() -> Verdict {
    let large = HpConfig::new(1, 16, 9, 8, 1, 7).unwrap();
    let small = HpConfig::new(1, 25, 20, 6, 1, 1).unwrap();
    let r_large = decoupling_margin(&large).unwrap();
    let r_small = decoupling_margin(&small).unwrap();
    let mut mismatches = 0;
    let mut count = 0;
    for n_a in 1..=3usize {
        for n_c in 4..=20usize {
            for n_d in 4..=20usize {
                let n_b = n_c + n_d - n_a;
                let p = small_charge_profile(n_a, n_b, n_c, n_d).unwrap();
                let lhs = g_function(n_c, n_d, 2).unwrap() as f64 / n_a as f64;
                let rhs = g_function(n_d, n_c, 2).unwrap() as f64 / n_b as f64;
                count += 1;
                if (p.exact_lhs - lhs).abs() > 1e-12 * lhs || (p.exact_rhs - rhs).abs() > 1e-12 * rhs {
                    mismatches += 1;
                }
            }
        }
    }
    verdict(
        r_large < 0.05 && r_small >= 1.0 && mismatches == 0,
        format!("large-charge margin {r_large:.4} (< 0.05); small-charge margin {r_small:.3} (>= 1); profile mismatches {mismatches}/{count}"),
    )
}

// ---------- 13. determinism ----------

fn small_run(experiment: &str) -> Vec<(&'static str, String)> {
    let mut v = vec![("experiment", experiment.to_string()), ("ensemble.n", "6".into()), ("ensemble.realizations", "16".into())];
    v.push(("time_grid.points", "5".into()));
    match experiment {
        "fp" | "kinv" => v.push(("ensemble.kind", "u1_haar".into())),
        "otoc" => v.push(("ensemble.kind", "gue_per_sector".into())),
        "page" => v.push(("page.qubits", "4".into())),
        "hp" => v.push(("hp.realizations", "10".into())),
        "kl" => v[2].1 = "200".into(),
        _ => {}
    }
    v
}

fn criterion_13() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let mut bad = Vec::new();
    let mut files = 0;
    for e in EXPERIMENTS {
        let first = root.path().join(format!("{e}-1"));
        let mut raw = RawConfig::new();
        for (k, v) in small_run(e) {
            raw.set(k, v);
        }
        raw.set("threads", "1");
        raw.set("output", first.display().to_string());
        let a = run(&resolve(&raw).unwrap()).unwrap();
        for threads in ["2", "4"] {
            let again = root.path().join(format!("{e}-{threads}"));
            let mut raw = RawConfig::new();
            raw.merge_file(&first.join("manifest.json")).unwrap();
            raw.set("threads", threads);
            raw.set("output", again.display().to_string());
            let b = run(&resolve(&raw).unwrap()).unwrap();
            for name in a.files.keys() {
                files += 1;
                if std::fs::read(first.join(name)).unwrap() != std::fs::read(again.join(name)).unwrap() {
                    bad.push(format!("{e}/{name} threads={threads}"));
                }
            }
            if a.files != b.files {
                bad.push(format!("{e} manifest hashes threads={threads}"));
            }
        }
    }
    verdict(bad.is_empty(), format!("{} experiments re-run from manifest at 2 and 4 threads, {files} CSV comparisons; differences {bad:?}", EXPERIMENTS.len()))
}

fn main() {
    let criteria: Vec<(u32, &str, Option<Duration>, fn() -> Verdict)> = vec![
        (1, "Haar moment oracle", Some(Duration::from_secs(60)), criterion_1),
        (2, "Form factor exactness", Some(Duration::from_secs(120)), criterion_2),
        (3, "LIS theorem", Some(Duration::from_secs(10)), criterion_3),
        (4, "SYK structure", Some(Duration::from_secs(30)), criterion_4),
        (5, "DOS edges", None, criterion_5),
        (6, "Decomposition identities", None, criterion_6),
        (7, "R4 dual representation", Some(Duration::from_secs(60)), criterion_7),
        (8, "Frame potential / k-invariance", Some(Duration::from_secs(300)), criterion_8),
        (9, "OTOC identities", Some(Duration::from_secs(120)), criterion_9),
        (10, "Page/HP closed forms", Some(Duration::from_secs(300)), criterion_10),
        (11, "KL statistics", Some(Duration::from_secs(300)), criterion_11),
        (12, "Decoupling regimes", Some(Duration::from_secs(10)), criterion_12),
        (13, "Determinism", None, criterion_13),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut summary = BTreeMap::new();
    for (id, name, limit, f) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let v = f();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = v.pass && in_time;
        let budget = limit.map_or(String::new(), |l| format!(" / limit {}s", l.as_secs()));
        println!(
            "{} [{id:2}] {name}: {}{} ({:.1}s{budget})",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            if in_time { "" } else { " [over time limit]" },
            elapsed.as_secs_f64()
        );
        summary.insert(id, pass);
    }
    let passed = summary.values().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria pass", summary.len());
    if passed < summary.len() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
