//! Shared test fixtures and independent oracles: a random irreducible model
//! generator, a dense eigen-decomposition oracle, and brute-force path
//! enumeration of taboo powers.
#![allow(dead_code)]

use nalgebra::DMatrix;
use qsdlab_core::model::{build_model, make_family, ModelFamily, ModelFamilySpec};
use qsdlab_core::spectral::EmbeddedChain;
use qsdlab_core::GeneratorModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn g2() -> GeneratorModel {
    build_model(&[(1, 2, 1.0), (1, 0, 1.0), (2, 1, 1.0)]).unwrap()
}

pub fn m3() -> GeneratorModel {
    build_model(&[(1, 2, 1.0), (2, 1, 1.0), (1, 0, 1.0), (2, 0, 1.0)]).unwrap()
}

pub fn family(f: ModelFamily, n: usize) -> GeneratorModel {
    make_family(&ModelFamilySpec::new(f, n)).unwrap()
}

/// Irreducible model with `n` states in `[min_n, max_n]`: a random Hamiltonian
/// cycle plus random extra edges, rates in `[0.1, 2)`, and killing at a random
/// nonempty subset.
pub fn random_model(seed: u64, min_n: usize, max_n: usize) -> GeneratorModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(min_n..=max_n);
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut edges = std::collections::BTreeMap::new();
    for w in 0..n {
        edges.insert((order[w], order[(w + 1) % n]), rng.random_range(0.1..2.0));
    }
    let density = rng.random_range(0.0..(6.0 / n as f64).min(0.5));
    for i in 1..=n {
        for j in 1..=n {
            if i != j && rng.random::<f64>() < density {
                edges.insert((i, j), rng.random_range(0.1..2.0));
            }
        }
    }
    let mut entries: Vec<(usize, usize, f64)> = edges.into_iter().map(|((i, j), r)| (i, j, r)).collect();
    let forced = rng.random_range(1..=n);
    for i in 1..=n {
        if i == forced || rng.random::<f64>() < 0.2 {
            entries.push((i, 0, rng.random_range(0.05..1.0)));
        }
    }
    build_model(&entries).unwrap()
}

pub fn dense_generator(model: &GeneratorModel) -> DMatrix<f64> {
    let n = model.n();
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        q[(i, i)] = -model.total(i);
        for &(j, r) in model.row(i) {
            q[(i, j)] = r;
        }
    }
    q
}

/// `λ = -max Re spec(Q_E)` and the normalized left null vector of
/// `Q_E + λ I`, from a dense Schur decomposition and an SVD.
pub fn dense_oracle(model: &GeneratorModel) -> (f64, Vec<f64>) {
    let q = dense_generator(model);
    let n = q.nrows();
    let top = q.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let lambda = -top;
    let a = (q + DMatrix::identity(n, n) * lambda).transpose();
    let svd = a.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let idx = svd.singular_values.argmin().0;
    let mut u: Vec<f64> = v_t.row(idx).iter().copied().collect();
    let s: f64 = u.iter().sum();
    u.iter_mut().for_each(|x| *x /= s);
    (lambda, u)
}

pub fn dense_kernel(t: &EmbeddedChain) -> Vec<Vec<f64>> {
    let n = t.n();
    let mut k = vec![vec![0.0; n]; n];
    for (i, row) in k.iter_mut().enumerate() {
        for &(j, v) in t.row(i) {
            row[j] = v;
        }
    }
    k
}

/// Sums path weights over all `n`-step paths from `i`: returns, per end
/// state, the unrestricted weight and the weight of paths whose
/// intermediate states avoid `taboo`.
pub fn enumerate_paths(kernel: &[Vec<f64>], taboo: &[bool], i: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let size = kernel.len();
    let mut full = vec![0.0; size];
    let mut avoid = vec![0.0; size];
    if n == 0 {
        full[i] = 1.0;
        if !taboo[i] {
            avoid[i] = 1.0;
        }
        return (full, avoid);
    }
    // `at` has been reached after at least one step; it is intermediate
    // exactly when steps remain.
    #[allow(clippy::too_many_arguments)]
    fn walk(kernel: &[Vec<f64>], taboo: &[bool], at: usize, left: usize, weight: f64, clean: bool, full: &mut [f64], avoid: &mut [f64]) {
        if left == 0 {
            full[at] += weight;
            if clean {
                avoid[at] += weight;
            }
            return;
        }
        let clean = clean && !taboo[at];
        for (next, &w) in kernel[at].iter().enumerate() {
            if w > 0.0 {
                walk(kernel, taboo, next, left - 1, weight * w, clean, full, avoid);
            }
        }
    }
    for (next, &w) in kernel[i].iter().enumerate() {
        if w > 0.0 {
            walk(kernel, taboo, next, n - 1, w, true, &mut full, &mut avoid);
        }
    }
    (full, avoid)
}

/// Fixtures with at most 10 states.
pub fn small_fixtures() -> Vec<(String, GeneratorModel)> {
    let mut out = vec![
        ("G2".to_string(), g2()),
        ("M3".to_string(), m3()),
        ("feedback-10".to_string(), family(ModelFamily::FeedbackChain { p: 0.3, r: 0.2, w: 0.5 }, 10)),
        ("halfline-10".to_string(), family(ModelFamily::BdHalfline { p: 0.25, c: 1.0 }, 10)),
        ("line-4".to_string(), family(ModelFamily::BdLine { p: 0.4, c: 2.0 }, 4)),
    ];
    for seed in 0..5 {
        out.push((format!("random-{seed}"), random_model(1000 + seed, 3, 10)));
    }
    out
}
