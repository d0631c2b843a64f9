//! Matrix-balancing tests: block families, the exponential-weight machinery,
//! and the partial and full walks.

use discrepancy::instances::{generate, Family, Generated, GeneratorSpec, Prng};
use discrepancy::linalg::{self, SymmetricMatrix};
use discrepancy::matrix::{
    self, BlockMatrixFamily, MatrixWalkState,
};
use discrepancy::setcol::{self, Coloring, SetSystem};

fn random_family(n: usize, m: usize, q: usize, seed: u64) -> BlockMatrixFamily<f64> {
    let spec = GeneratorSpec {
        family: Family::RandomBlockFamily,
        n,
        m,
        k: None,
        q: Some(q),
        t: None,
        seed,
    };
    match generate::<f64>(&spec).unwrap() {
        Generated::Blocks(fam) => fam,
        _ => unreachable!(),
    }
}

#[test]
fn family_rejects_operator_norm_above_one() {
    let blocks = vec![vec![vec![2.0f64]]];
    assert!(BlockMatrixFamily::new(1, 1, 1, blocks).is_err());
}

#[test]
fn family_rejects_block_size_not_dividing_dimension() {
    let blocks = vec![vec![vec![0.0f64; 4]]];
    assert!(BlockMatrixFamily::new(1, 3, 2, blocks).is_err());
}

#[test]
fn family_symmetrizes_blocks_by_averaging() {
    // Off-diagonal entries 0.6 and 0.2 average to 0.4.
    let blocks = vec![vec![vec![0.0f64, 0.6, 0.2, 0.0]]];
    let fam = BlockMatrixFamily::new(1, 2, 2, blocks).unwrap();
    let b = fam.block(0, 0);
    assert_eq!(b[1], 0.4);
    assert_eq!(b[2], 0.4);
}

#[test]
fn sym_exp_of_zero_is_identity() {
    let b = SymmetricMatrix::new(3, vec![0.0f64; 9]).unwrap();
    let e = matrix::sym_exp(&b).unwrap();
    for r in 0..3 {
        for c in 0..3 {
            let target = if r == c { 1.0 } else { 0.0 };
            assert!((e.entries()[r * 3 + c] - target).abs() <= 1e-12);
        }
    }
}

#[test]
fn sym_exp_of_diagonal() {
    let b = SymmetricMatrix::new(2, vec![2.0f64.ln(), 0.0, 0.0, 0.0]).unwrap();
    let e = matrix::sym_exp(&b).unwrap();
    assert!((e.entries()[0] - 2.0).abs() <= 1e-12);
    assert!((e.entries()[3] - 1.0).abs() <= 1e-12);
    assert!(e.entries()[1].abs() <= 1e-12);
}

#[test]
fn sym_exp_inverse_pairs_multiply_to_identity() {
    let mut rng = Prng::new(31);
    let dim = 4;
    let mut entries = vec![0.0f64; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let v = rng.symmetric();
            entries[i * dim + j] = v;
            entries[j * dim + i] = v;
        }
    }
    let b = SymmetricMatrix::new(dim, entries.clone()).unwrap();
    let nb = SymmetricMatrix::new(dim, entries.iter().map(|v| -v).collect()).unwrap();
    let e = matrix::sym_exp(&b).unwrap();
    let f = matrix::sym_exp(&nb).unwrap();
    for r in 0..dim {
        for c in 0..dim {
            let mut s = 0.0;
            for k in 0..dim {
                s += e.entries()[r * dim + k] * f.entries()[k * dim + c];
            }
            let target = if r == c { 1.0 } else { 0.0 };
            assert!((s - target).abs() <= 1e-7, "entry ({r},{c}) = {s}");
        }
    }
}

fn state_at<T: Copy>(x: Vec<T>, x0: Vec<T>, epsilon: T, delta: T) -> MatrixWalkState<T> {
    MatrixWalkState { t: 0, x, x0, epsilon, delta }
}

#[test]
fn weight_matrix_at_start_is_identity_with_potential_m() {
    let fam = random_family(8, 8, 2, 3);
    let state = state_at(vec![0.25; 8], vec![0.25; 8], 0.3, 0.1);
    let w = matrix::weight_matrix(&state, &fam).unwrap();
    assert!((w.trace() - 8.0).abs() <= 1e-12);
    for k in 0..w.block_count() {
        let b = w.block(k);
        for r in 0..2 {
            for c in 0..2 {
                let target = if r == c { 1.0 } else { 0.0 };
                assert!((b[r * 2 + c] - target).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn weight_matrix_single_block_matches_sym_exp() {
    let fam = random_family(4, 3, 3, 9);
    let eps = 0.2;
    let x = vec![0.5, -0.25, 0.75, -1.0];
    let state = state_at(x.clone(), vec![0.0; 4], eps, 0.1);
    let w = matrix::weight_matrix(&state, &fam).unwrap();
    // Assemble eps sum_i x_i A_i directly and exponentiate.
    let mut entries = vec![0.0f64; 9];
    for (i, &c) in x.iter().enumerate() {
        let b = fam.block(i, 0);
        for e in 0..9 {
            entries[e] += eps * c * b[e];
        }
    }
    let expected = matrix::sym_exp(&SymmetricMatrix::new(3, entries).unwrap()).unwrap();
    for e in 0..9 {
        assert!((w.block(0)[e] - expected.entries()[e]).abs() <= 1e-10);
    }
    // The square root squares back to the block.
    let s = w.sqrt_block(0);
    for r in 0..3 {
        for c in 0..3 {
            let mut v = 0.0;
            for k in 0..3 {
                v += s[r * 3 + k] * s[k * 3 + c];
            }
            assert!((v - w.block(0)[r * 3 + c]).abs() <= 1e-9);
        }
    }
}

#[test]
fn dot_combination_matches_direct_frobenius_product() {
    let fam = random_family(6, 8, 4, 17);
    let state = state_at(vec![0.3; 6], vec![0.0; 6], 0.25, 0.1);
    let w = matrix::weight_matrix(&state, &fam).unwrap();
    let coeffs = vec![1.0, -0.5, 0.0, 2.0, 0.25, -1.0];
    let got = w.dot_combination(&fam, &coeffs);
    let mut expected = 0.0;
    for k in 0..fam.block_count() {
        let wb = w.block(k);
        for e in 0..16 {
            let mut combo = 0.0;
            for (i, &c) in coeffs.iter().enumerate() {
                combo += c * fam.block(i, k)[e];
            }
            expected += wb[e] * combo;
        }
    }
    assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0));
}

#[test]
fn quadratic_error_subspace_empty_for_orthogonal_diagonals() {
    // A_i = e_i e_i^T as 1x1 blocks of an identity-like family: with W = I,
    // M = I and every eigenvalue 1 < k Tr[W], so no constraint rows appear.
    let m = 4;
    let blocks: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|i| (0..m).map(|k| vec![if i == k { 1.0 } else { 0.0 }]).collect())
        .collect();
    let fam = BlockMatrixFamily::new(m, m, 1, blocks).unwrap();
    let state = state_at(vec![0.0; m], vec![0.0; m], 0.3, 0.1);
    let w = matrix::weight_matrix(&state, &fam).unwrap();
    let rows = matrix::quadratic_error_subspace(&w, &fam, 2.0).unwrap();
    assert!(rows.is_empty());
}

#[test]
fn quadratic_error_subspace_empty_for_single_matrix() {
    let fam = random_family(1, 2, 2, 5);
    let state = state_at(vec![0.0], vec![0.0], 0.3, 0.1);
    let w = matrix::weight_matrix(&state, &fam).unwrap();
    let rows = matrix::quadratic_error_subspace(&w, &fam, 2.0).unwrap();
    assert!(rows.is_empty());
}

#[test]
fn quadratic_error_subspace_rejects_small_k() {
    let fam = random_family(2, 2, 2, 5);
    let state = state_at(vec![0.0; 2], vec![0.0; 2], 0.3, 0.1);
    let w = matrix::weight_matrix(&state, &fam).unwrap();
    assert!(matrix::quadratic_error_subspace(&w, &fam, 1.5).is_err());
}

#[test]
fn operator_norm_examples() {
    let fam = random_family(4, 4, 2, 21);
    assert_eq!(matrix::operator_norm(&fam, &[0.0; 4]), 0.0);
    // q = 1: the norm is the largest |sum_i c_i a_i^(k)| over diagonal slots.
    let blocks = vec![
        vec![vec![0.5f64], vec![-0.25]],
        vec![vec![0.25], vec![1.0]],
    ];
    let f1 = BlockMatrixFamily::new(2, 2, 1, blocks).unwrap();
    let norm = matrix::operator_norm(&f1, &[1.0, -1.0]);
    // Slot sums: 0.5 - 0.25 = 0.25 and -0.25 - 1.0 = -1.25.
    assert!((norm - 1.25).abs() <= 1e-12);
}

#[test]
fn operator_norm_matches_dense_eigendecomposition() {
    let fam = random_family(6, 8, 4, 77);
    let coeffs = vec![0.7, -0.3, 0.1, 0.9, -1.0, 0.5];
    let got = matrix::operator_norm(&fam, &coeffs);
    // Assemble the full 8x8 block-diagonal combination and take its largest
    // absolute eigenvalue.
    let m = 8;
    let q = 4;
    let mut dense = vec![0.0f64; m * m];
    for k in 0..fam.block_count() {
        for r in 0..q {
            for c in 0..q {
                let mut v = 0.0;
                for (i, &ci) in coeffs.iter().enumerate() {
                    v += ci * fam.block(i, k)[r * q + c];
                }
                dense[(k * q + r) * m + (k * q + c)] = v;
            }
        }
    }
    let dec = linalg::eigh(&SymmetricMatrix::new(m, dense).unwrap()).unwrap();
    let top = dec
        .eigenvalues()
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    assert!((got - top).abs() <= 1e-9 * top.max(1.0));
}

#[test]
fn run_partial_on_zero_family_reaches_norm_zero() {
    let n = 8;
    let blocks: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; 4]; 2]; n];
    let fam = BlockMatrixFamily::new(n, 4, 2, blocks).unwrap();
    let (x, _) = matrix::run_partial(&fam, &vec![0.0; n]).unwrap();
    assert!(x.iter().all(|c| c.abs() <= 1.0));
    assert!(x.iter().filter(|c| c.abs() == 1.0).count() * 2 >= n);
    assert_eq!(matrix::operator_norm(&fam, &x), 0.0);
}

#[test]
fn run_partial_satisfies_postconditions() {
    let n = 32;
    let fam = random_family(n, n, 2, 123);
    let (x, report) = matrix::run_partial(&fam, &vec![0.0; n]).unwrap();
    assert!(x.iter().all(|c| c.abs() <= 1.0 + 1e-12));
    let frozen = x.iter().filter(|c| c.abs() == 1.0).count();
    assert!(2 * frozen >= n, "only {frozen} frozen of {n}");
    assert_eq!(report.active_before, n);
    let eps = report.epsilon;
    let delta = 1.0 / (n as f64).sqrt();
    let growth_cap = (1.0 + 16.0 * eps * eps * delta * delta) * (1.0 + 1e-8);
    let recs = &report.trace.records;
    for w in recs.windows(2) {
        if w[1].phi.is_finite() && w[0].phi.is_finite() {
            assert!(
                w[1].phi <= growth_cap * w[0].phi,
                "potential grew {} -> {}",
                w[0].phi,
                w[1].phi
            );
        }
    }
    // Final potential bound gives the operator-norm guarantee.
    let bound = 2.0 * (2 * fam.m()) as f64 * (32.0 * eps * eps * n as f64).exp();
    let last = recs.last().unwrap();
    assert!(last.phi <= bound * (1.0 + 1e-6));
}

#[test]
fn run_partial_subspace_dimension_quarter() {
    let n = 32;
    let fam = random_family(n, n, 2, 321);
    let (_, report) = matrix::run_partial(&fam, &vec![0.0; n]).unwrap();
    let recs = &report.trace.records;
    for r in &recs[..recs.len() - 1] {
        assert!(r.dim_u * 4 >= n, "dim U = {} below {n}/4", r.dim_u);
    }
}

#[test]
fn run_full_single_matrix() {
    let fam = random_family(1, 2, 2, 8);
    let (chi, _) = matrix::run_full(&fam).unwrap();
    assert_eq!(chi.len(), 1);
    assert!(chi[0] == 1 || chi[0] == -1);
    let norm = matrix::operator_norm(&fam, &[chi[0] as f64]);
    let single = matrix::operator_norm(&fam, &[1.0]);
    assert!((norm - single).abs() <= 1e-12);
}

#[test]
fn run_full_identical_pair_stays_within_bound() {
    let mut rng = Prng::new(40);
    let mut block = vec![0.0f64; 4];
    for i in 0..2 {
        for j in i..2 {
            let v = 0.4 * rng.symmetric();
            block[i * 2 + j] = v;
            block[j * 2 + i] = v;
        }
    }
    let blocks = vec![vec![block.clone()], vec![block]];
    let fam = BlockMatrixFamily::new(2, 2, 2, blocks).unwrap();
    let (chi, _) = matrix::run_full(&fam).unwrap();
    let coeffs: Vec<f64> = chi.iter().map(|&c| c as f64).collect();
    let norm = matrix::operator_norm(&fam, &coeffs);
    let n = 2.0f64;
    let bound = 30.0 * (n * (2.0 * 1.0 * 4.0 / n).ln().max(1.0)).sqrt();
    assert!(norm <= bound);
}

#[test]
fn run_full_meets_norm_bound() {
    for q in [1usize, 2] {
        let n = 32;
        let fam = random_family(n, n, q, 1000 + q as u64);
        let (chi, phases) = matrix::run_full(&fam).unwrap();
        assert!(chi.iter().all(|&c| c == 1 || c == -1));
        let coeffs: Vec<f64> = chi.iter().map(|&c| c as f64).collect();
        let norm = matrix::operator_norm(&fam, &coeffs);
        let nn = n as f64;
        let bound =
            30.0 * (nn * (2.0 * q as f64 * n as f64 / nn).ln().max(1.0)).sqrt();
        assert!(norm <= bound, "q = {q}: norm {norm} over {bound}");
        assert!(!phases.is_empty());
    }
}

#[test]
fn diagonal_encoding_matches_set_discrepancy() {
    let mut rng = Prng::new(61);
    let n = 10;
    let sets: Vec<Vec<usize>> = (0..8)
        .map(|_| {
            let mut s: Vec<usize> = (1..=n).filter(|_| rng.next_u64() & 1 == 1).collect();
            if s.is_empty() {
                s.push(1);
            }
            s
        })
        .collect();
    let sys = SetSystem::new(n, sets).unwrap();
    let fam = matrix::diagonal_encoding::<f64>(&sys).unwrap();
    assert_eq!(fam.q(), 1);
    assert_eq!(fam.n(), n);
    for _ in 0..5 {
        let chi: Vec<i8> =
            (0..n).map(|_| if rng.next_u64() & 1 == 1 { 1 } else { -1 }).collect();
        let coeffs: Vec<f64> = chi.iter().map(|&c| c as f64).collect();
        let norm = matrix::operator_norm(&fam, &coeffs);
        let d = setcol::discrepancy(&sys, &Coloring::new(chi).unwrap()).unwrap();
        assert_eq!(norm.round() as u64, d);
        assert!((norm - d as f64).abs() <= 1e-9);
    }
}

#[test]
fn epsilon_for_closed_form() {
    let eps: f64 = matrix::epsilon_for(64, 128, 2);
    let expected = ((2.0 * 2.0 * 128.0 / 64.0f64).ln().max(1.0) / 64.0).sqrt();
    assert!((eps - expected).abs() <= 1e-15);
}

#[test]
fn run_full_is_deterministic() {
    let fam = random_family(24, 24, 2, 55);
    let (c1, _) = matrix::run_full(&fam).unwrap();
    let (c2, _) = matrix::run_full(&fam).unwrap();
    assert_eq!(c1, c2);
}
