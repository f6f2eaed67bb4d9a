//! The λ / QSD pipeline against dense linear algebra and brute-force path
//! enumeration.

mod common;

use common::{dense_kernel, dense_oracle, enumerate_paths, g2, random_model, small_fixtures};
use qsdlab_core::htransform::{hitting_prob, moment_bound};
use qsdlab_core::qsd::{assemble_qsd, invariant_measure, moment_mh, solve_qsd_direct};
use qsdlab_core::spectral::{classify, decay_parameter, embedded_chain, ClassifyOptions, DecayMethod, DecayOptions, Recurrence};
use qsdlab_core::taboo::{exit_kernel, perron_left, taboo_direct, taboo_power, taboo_series, ExitKernelOptions, SeriesOptions, TabooSet};
use qsdlab_core::GeneratorModel;
use rand::{Rng, SeedableRng};

fn lambda_of(m: &GeneratorModel, method: DecayMethod) -> f64 {
    decay_parameter(m, &DecayOptions { method, ..DecayOptions::default() }).unwrap().lambda
}

#[test]
fn random_models_match_dense_oracle() {
    for seed in 0..25 {
        let m = random_model(seed, 5, 200);
        let (lam_oracle, u_oracle) = dense_oracle(&m);
        let lam = lambda_of(&m, DecayMethod::BisectionOnR);
        let lam_eig = lambda_of(&m, DecayMethod::FiniteEigen);
        assert!((lam - lam_oracle).abs() <= 1e-8, "seed {seed}: {lam} vs {lam_oracle}");
        assert!((lam - lam_eig).abs() <= 1e-9, "seed {seed}: paths disagree {lam} vs {lam_eig}");

        let v = classify(&m, lam, m.default_anchor(), &ClassifyOptions::default()).unwrap();
        assert_eq!(v.recurrence, Recurrence::LambdaPositiveRecurrent);
        assert!((v.f_kk_at_lambda - 1.0).abs() <= 1e-6, "seed {seed}: F = {}", v.f_kk_at_lambda);

        let t = embedded_chain(&m, lam).unwrap();
        let ex = exit_kernel(&t, &m.exit_set().members, ExitKernelOptions::for_chain(&t)).unwrap();
        assert!((ex.weighted_mass() - 1.0).abs() <= 1e-8, "seed {seed}: mass {}", ex.weighted_mass());
        let a = assemble_qsd(&m, lam, &ex).unwrap();
        let d = solve_qsd_direct(&m, lam, 1e-14).unwrap();
        let maxq = m.max_total_rate();
        for (name, u) in [("assembled", &a.u), ("direct", &d.u)] {
            let gap = u.iter().zip(&u_oracle).fold(0.0f64, |acc, (p, q)| acc.max((p - q).abs()));
            assert!(gap <= 1e-7, "seed {seed} {name}: |du| = {gap:e}");
        }
        assert!(a.residuals.eigen_residual <= 1e-8 * maxq, "seed {seed}: {:?}", a.residuals);
        assert!(d.residuals.eigen_residual <= 1e-8 * maxq, "seed {seed}: {:?}", d.residuals);
        assert!(a.residuals.sum_defect <= 1e-10 && a.residuals.min_u > 0.0);

        // λ Σ x = M_H, with x the exit-set measure behind u.
        let x = a.x.as_ref().unwrap();
        let m_h = moment_mh(&m, lam, &ex);
        assert!((lam * x.iter().sum::<f64>() - m_h).abs() <= 1e-8 * m_h.max(1.0), "seed {seed}");
    }
}

#[test]
fn series_and_direct_taboo_sums_agree() {
    for seed in 0..10 {
        let m = random_model(seed + 50, 5, 120);
        let lam = lambda_of(&m, DecayMethod::FiniteEigen);
        let t = embedded_chain(&m, lam).unwrap();
        let h = TabooSet::from_exit(m.n(), m.exit_set());
        for &j in h.members() {
            let s = taboo_series(&t, &h, j, SeriesOptions::for_chain(&t));
            let d = taboo_direct(&t, &h, j).unwrap();
            assert!(s.converged);
            for (a, b) in s.partial.iter().zip(&d) {
                assert!((a - b).abs() <= 1e-9 * b.max(1.0), "seed {seed}");
            }
        }
    }
}

#[test]
fn taboo_powers_match_path_enumeration() {
    for (name, m) in small_fixtures() {
        let lam = lambda_of(&m, DecayMethod::FiniteEigen);
        let x = if lam < m.min_total_rate() { lam } else { 0.5 * m.min_total_rate() };
        let t = embedded_chain(&m, x).unwrap();
        let kernel = dense_kernel(&t);
        let n = m.n();
        let sets = [m.exit_set().members.clone(), vec![0]];
        for members in sets.iter().filter(|s| !s.is_empty()) {
            let h = TabooSet::new(n, members);
            let mask: Vec<bool> = (0..n).map(|i| h.contains(i)).collect();
            for i in 0..n {
                for steps in 0..=6 {
                    let (_, avoid) = enumerate_paths(&kernel, &mask, i, steps);
                    let lib = taboo_power(&t, &h, i, steps);
                    for j in 0..n {
                        assert!((lib[j] - avoid[j]).abs() <= 1e-12 * avoid[j].max(1.0), "{name} i={i} n={steps} j={j}");
                    }
                }
            }
        }
    }
}

#[test]
fn last_entry_decomposition() {
    // T^(n)_ij = {}_H T^(n)_ij + Σ_{m=1}^{n-1} Σ_{h∈H} T^(m)_ih {}_H T^(n-m)_hj,
    // splitting each path at its last intermediate visit to H.
    for (name, m) in small_fixtures() {
        let lam = lambda_of(&m, DecayMethod::FiniteEigen);
        let t = embedded_chain(&m, lam.min(0.999 * m.min_total_rate())).unwrap();
        let kernel = dense_kernel(&t);
        let n = m.n();
        let h = TabooSet::from_exit(n, m.exit_set());
        if h.is_empty() {
            continue;
        }
        let mask: Vec<bool> = (0..n).map(|i| h.contains(i)).collect();
        for i in 0..n {
            let full: Vec<Vec<f64>> = (0..=6).map(|s| enumerate_paths(&kernel, &mask, i, s).0).collect();
            for steps in 1..=6 {
                let direct = taboo_power(&t, &h, i, steps);
                let mut rebuilt = direct.clone();
                for (mid, first) in full.iter().enumerate().take(steps).skip(1) {
                    for &hm in h.members() {
                        let tail = taboo_power(&t, &h, hm, steps - mid);
                        for (r, t) in rebuilt.iter_mut().zip(&tail) {
                            *r += first[hm] * t;
                        }
                    }
                }
                for j in 0..n {
                    assert!((rebuilt[j] - full[steps][j]).abs() <= 1e-12 * full[steps][j].max(1.0), "{name} i={i} n={steps} j={j}");
                }
            }
        }
    }
}

#[test]
fn exit_kernel_mass_identity_on_fixtures() {
    for (name, m) in small_fixtures() {
        let lam = lambda_of(&m, DecayMethod::FiniteEigen);
        let t = embedded_chain(&m, lam).unwrap();
        let ex = exit_kernel(&t, &m.exit_set().members, ExitKernelOptions::for_chain(&t)).unwrap();
        let col_sums: Vec<f64> =
            (0..ex.members.len()).map(|j| ex.mu.iter().zip(&ex.kernel).map(|(mu, row)| mu * row[j]).sum()).collect();
        for (j, s) in col_sums.iter().enumerate() {
            assert!((s - ex.mu[j]).abs() <= 1e-10, "{name}: μT^H != μ");
        }
        assert!((ex.weighted_mass() - 1.0).abs() <= 1e-8, "{name}");
        let tv: Vec<f64> = ex.kernel.iter().map(|row| row.iter().zip(&ex.v).map(|(a, b)| a * b).sum()).collect();
        let vmax = ex.v.iter().copied().fold(0.0, f64::max);
        for (a, b) in tv.iter().zip(&ex.v) {
            assert!((a - b).abs() <= 1e-10 * vmax, "{name}: T^H v != v");
        }
    }
}

#[test]
fn perron_vector_is_restart_invariant() {
    let m = random_model(7, 30, 60);
    let lam = lambda_of(&m, DecayMethod::FiniteEigen);
    let t = embedded_chain(&m, lam).unwrap();
    let ex = exit_kernel(&t, &m.exit_set().members, ExitKernelOptions::for_chain(&t)).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let start: Vec<f64> = (0..ex.members.len()).map(|_| rng.random_range(0.01..1.0)).collect();
        let (mu, _) = perron_left(&ex.kernel, &start, 1e-15, 1_000_000).unwrap();
        for (a, b) in mu.iter().zip(&ex.mu) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
}

#[test]
fn g2_scale_covariance() {
    let base = lambda_of(&g2(), DecayMethod::BisectionOnR);
    let u = solve_qsd_direct(&g2(), base, 1e-14).unwrap().u;
    for c in [0.5, 3.0] {
        let m = g2().scaled(c).unwrap();
        let lam = lambda_of(&m, DecayMethod::BisectionOnR);
        assert!((lam - c * base).abs() <= 1e-9);
        let uc = solve_qsd_direct(&m, lam, 1e-14).unwrap().u;
        for (a, b) in u.iter().zip(&uc) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn moment_bound_dominates_attained_value() {
    for seed in 0..10 {
        let m = random_model(seed + 200, 5, 60);
        let lam = lambda_of(&m, DecayMethod::FiniteEigen);
        let k = m.default_anchor();
        let x = invariant_measure(&m, lam, k, None, None).unwrap();
        let attained = lam * x.total();
        let h = hitting_prob(&m, k, 1e-14, 1_000_000).unwrap();
        let b = moment_bound(&m, k, lam, &h, Some(attained)).unwrap();
        assert!(b.bound_value >= attained - 1e-9, "seed {seed}: {} < {attained}", b.bound_value);
    }
}

#[test]
fn g2_golden_values() {
    let lam_exact = (3.0 - 5f64.sqrt()) / 2.0;
    let m = g2();
    let lam = lambda_of(&m, DecayMethod::BisectionOnR);
    assert!((lam - lam_exact).abs() <= 1e-9);
    let t = embedded_chain(&m, lam).unwrap();
    let ex = exit_kernel(&t, &[0], ExitKernelOptions::for_chain(&t)).unwrap();
    let q = assemble_qsd(&m, lam, &ex).unwrap();
    assert!((q.u[0] - 0.3819660).abs() <= 1e-7 && (q.u[1] - 0.6180340).abs() <= 1e-7);
    assert!((q.u[0] - lam_exact).abs() <= 1e-9 && (q.u[1] - (1.0 - lam_exact)).abs() <= 1e-9);
    let golden = 1.0 / (2.0 - lam_exact);
    assert!((q.m_h.unwrap() - golden).abs() <= 1e-9);
    let x = invariant_measure(&m, lam, 0, None, None).unwrap();
    let h = hitting_prob(&m, 0, 1e-15, 1000).unwrap();
    let b = moment_bound(&m, 0, lam, &h, Some(lam * x.total())).unwrap();
    assert!((b.bound_value - golden).abs() <= 1e-9);
    assert!((b.attained_estimate.unwrap() - golden).abs() <= 1e-9);
}
