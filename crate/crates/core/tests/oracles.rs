//! Numerical results checked against independent oracles: dense linear
//! algebra (nalgebra), a separately written Jacobi eigensolver, closed forms,
//! an accelerated proximal-gradient solver and scikit-learn's LIBSVM reader.

mod common;

use std::fs;
use std::io::BufReader;
use std::sync::Arc;

use cola::baselines::RidgeSplit;
use cola::data::{self, compute_sigma_k, Partition, SparseColMatrix};
use cola::local_solver::{solve_to_tolerance, SubproblemView};
use cola::problem::{self, Formulation, SeparablePart, SmoothPart};
use cola::topology::{build_graph, metropolis_weights, GraphKind};
use common::*;
use nalgebra::{DMatrix, DVector};

// ---------------------------------------------------------------- data

#[test]
fn sigma_k_matches_dense_eigensolver() {
    for seed in 0..6 {
        let s = synthetic(5, 12, 0.8, seed);
        for block in [vec![0, 1, 2], vec![3, 7, 9, 11], vec![4, 5, 6, 8, 10]] {
            let got = compute_sigma_k(&s.matrix, &block, 1e-12);
            let sub = dense(&s.matrix.select_columns(&block));
            let gram = sub.transpose() * &sub;
            let top = gram.symmetric_eigen().eigenvalues.max();
            assert!(rel(got, top) <= 1e-8, "seed {seed}: {got} vs {top}");
        }
    }
}

#[test]
fn sigma_k_rank_one_and_orthonormal() {
    let a = SparseColMatrix::from_dense_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]);
    assert_eq!(compute_sigma_k(&a, &[0], 1e-9), 4.0);
    let o = SparseColMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]);
    assert!((compute_sigma_k(&o, &[0, 1], 1e-12) - 1.0).abs() < 1e-12);
}

#[test]
fn libsvm_excerpt_matches_reference_reader() {
    // Expected values produced by sklearn.datasets.load_svmlight_file on the
    // same file.
    let f = fs::File::open(fixture("rcv1_excerpt.svm")).unwrap();
    let d = data::parse_libsvm(BufReader::new(f)).unwrap();
    assert_eq!(d.n_samples(), 10);
    assert_eq!(d.n_features(), 47236);
    assert_eq!(d.samples.nnz(), 395);
    assert_eq!(d.labels, vec![1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0, 1.0, -1.0, -1.0]);
    let row_sums = [
        7.508411529999999,
        8.54943201,
        1.984903417,
        6.739352310000001,
        2.0574273,
        7.842610789999999,
        6.55042257,
        2.87580212,
        6.01828235,
        6.669786440000001,
    ];
    let got = d.samples.mul_vec(&vec![1.0; d.n_features()]);
    for (g, e) in got.iter().zip(row_sums) {
        assert!((g - e).abs() < 1e-12, "{g} vs {e}");
    }
    let last = d.samples.col(47235);
    assert_eq!(last.indices, &[6]);
    assert_eq!(last.values, &[0.135689]);
}

#[test]
fn lasso_recovers_planted_support_without_noise() {
    let s = data::synthesize_regression(&data::SyntheticSpec {
        rows: 60,
        cols: 30,
        density: 1.0,
        noise: 0.0,
        support: 0.2,
        seed: 11,
    })
    .unwrap();
    let p = problem::make_lasso(Arc::new(s.matrix), s.target, 1e-3, Some(100.0)).unwrap();
    let r = cola::harness::reference::compute_reference(&p, 10_000_000);
    let found: Vec<usize> = (0..30).filter(|&i| r.x_star[i].abs() > 1e-2).collect();
    let planted: Vec<usize> = (0..30).filter(|&i| s.planted[i] != 0.0).collect();
    assert_eq!(found, planted);
}

// ---------------------------------------------------------------- problem

#[test]
fn scalar_lasso_closed_form() {
    let a = Arc::new(SparseColMatrix::from_dense_rows(&[vec![2.0]]));
    let p = problem::make_lasso(a, vec![4.0], 1.0, None).unwrap();
    let r = cola::harness::reference::compute_reference(&p, 10_000);
    // soft-threshold(A^T b, λ) / ‖A‖² = (8 - 1) / 4
    assert!((r.x_star[0] - 1.75).abs() < 1e-12);
}

#[test]
fn fenchel_young_equality_smooth() {
    let b = vec![0.3, -1.2, 2.5, 0.0];
    let parts = [SmoothPart::least_squares(b.clone()), SmoothPart::scaled_quadratic(0.7, b.clone())];
    for f in &parts {
        for v in [vec![1.0, 2.0, -3.0, 0.5], vec![0.0; 4], vec![-7.0, 0.1, 0.2, 9.0]] {
            let w = f.grad(&v).unwrap();
            let lhs = f.value(&v).unwrap() + f.conj(&w).unwrap();
            let rhs: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
        }
    }
}

/// Whether `s` lies in the subdifferential of the bounded L1 term at `u`.
fn in_l1_subdifferential(u: f64, s: f64, lambda: f64, radius: f64, tol: f64) -> bool {
    if u.abs() >= radius - 1e-15 {
        s * u.signum() >= lambda - tol
    } else if u == 0.0 {
        s.abs() <= lambda + tol
    } else {
        (s - lambda * u.signum()).abs() <= tol
    }
}

fn separable_parts() -> Vec<SeparablePart> {
    vec![
        SeparablePart::L1Bounded { lambda: 0.7, radius: 2.0 },
        SeparablePart::Quadratic { linear: vec![0.4, -1.1, 0.0, 3.0, -0.2, 0.9] },
    ]
}

#[test]
fn prox_satisfies_subgradient_conditions() {
    let zs = [-9.0, -2.5, -2.0, -0.71, -0.3, 0.0, 0.2, 0.69, 1.0, 2.6, 2.7, 50.0];
    for part in separable_parts() {
        for (i, &z) in zs.iter().enumerate() {
            let i = i % 6;
            for step in [0.1, 1.0, 3.0] {
                let y = part.prox(i, z, step);
                let s = (z - y) / step;
                match &part {
                    SeparablePart::L1Bounded { lambda, radius } => {
                        assert!(in_l1_subdifferential(y, s, *lambda, *radius, 1e-10), "z {z} step {step} y {y}");
                    }
                    SeparablePart::Quadratic { linear } => {
                        assert!((s - (y - linear[i])).abs() <= 1e-10, "z {z} y {y}");
                    }
                }
            }
        }
    }
}

#[test]
fn fenchel_young_equality_separable() {
    // y = prox(z) gives the subgradient pair (y, (z - y)/step).
    for part in separable_parts() {
        for i in 0..6 {
            for z in [-5.0, -1.0, -0.2, 0.0, 0.5, 1.2, 2.3, 8.0] {
                let y = part.prox(i, z, 0.5);
                let s = (z - y) / 0.5;
                let lhs = part.eval(i, y) + part.conj(i, s);
                assert!((lhs - y * s).abs() <= 1e-9, "{part:?} i {i} z {z}: {lhs} vs {}", y * s);
            }
        }
    }
}

// ---------------------------------------------------------------- topology

#[test]
fn beta_matches_jacobi_oracle() {
    for kind in [
        GraphKind::Ring,
        GraphKind::Cycle2,
        GraphKind::Cycle3,
        GraphKind::Grid2d,
        GraphKind::Grid2dOpen,
        GraphKind::Complete,
        GraphKind::Star,
    ] {
        for k in [4, 6, 9, 12, 16] {
            let Ok(g) = build_graph(kind, k) else { continue };
            let w = metropolis_weights(&g).unwrap();
            let oracle = oracle_beta(w.weights(), k);
            assert!((w.beta() - oracle).abs() <= 1e-10, "{kind:?} k={k}: {} vs {oracle}", w.beta());
        }
    }
}

#[test]
fn ring_beta_closed_form() {
    // Metropolis ring: W = (I + S + S^T)/3 with eigenvalues (1 + 2 cos(2πj/K))/3.
    for k in [5, 8, 16, 31] {
        let w = metropolis_weights(&build_graph(GraphKind::Ring, k).unwrap()).unwrap();
        let expected = (1..k)
            .map(|j| ((1.0 + 2.0 * (2.0 * std::f64::consts::PI * j as f64 / k as f64).cos()) / 3.0).abs())
            .fold(0.0, f64::max);
        assert!((w.beta() - expected).abs() <= 1e-10, "k={k}");
    }
}

#[test]
fn beta_matches_nalgebra() {
    let w = metropolis_weights(&build_graph(GraphKind::Cycle2, 16).unwrap()).unwrap();
    let m = DMatrix::from_row_slice(16, 16, w.weights());
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let expected = ev[1].abs().max(ev[15].abs());
    assert!((w.beta() - expected).abs() <= 1e-10);
}

// ---------------------------------------------------------------- local solver

struct Block {
    matrix: SparseColMatrix,
    block: Vec<usize>,
    x: Vec<f64>,
    anchor: Vec<f64>,
    coef: f64,
}

fn block_instance(seed: u64) -> Block {
    let s = synthetic(8, 5, 1.0, seed);
    let x: Vec<f64> = (0..5).map(|i| 0.3 * (i as f64 - 2.0) + 0.05 * seed as f64).collect();
    let anchor: Vec<f64> = (0..8).map(|r| ((r * 7 + seed as usize) % 5) as f64 * 0.4 - 0.8).collect();
    Block { matrix: s.matrix, block: (0..5).collect(), x, anchor, coef: 2.5 }
}

fn solve_block(b: &Block, part: &SeparablePart) -> Vec<f64> {
    let mut view = SubproblemView::new(&b.matrix, &b.block, part, &b.x, b.anchor.clone(), b.coef);
    solve_to_tolerance(&mut view, 100_000, 1e-15);
    view.delta().to_vec()
}

#[test]
fn quadratic_block_matches_dense_qp() {
    // G(Δ) = <a, AΔ> + c/2 ‖AΔ‖² + Σ ½(x+Δ)² - l(x+Δ); stationarity gives
    // (c AᵀA + I) Δ = l - x - Aᵀa.
    for seed in 0..8 {
        let b = block_instance(seed);
        let linear = vec![0.5, -1.0, 0.25, 2.0, -0.75];
        let part = SeparablePart::Quadratic { linear: linear.clone() };
        let got = solve_block(&b, &part);
        let a = dense(&b.matrix);
        let lhs = a.transpose() * &a * b.coef + DMatrix::identity(5, 5);
        let rhs = DVector::from_vec(linear) - DVector::from_vec(b.x.clone()) - a.transpose() * DVector::from_vec(b.anchor.clone());
        let exact = lhs.cholesky().unwrap().solve(&rhs);
        for j in 0..5 {
            assert!((got[j] - exact[j]).abs() <= 1e-8, "seed {seed} j {j}: {} vs {}", got[j], exact[j]);
        }
    }
}

/// FISTA on the same block objective with its own prox implementation.
fn fista_l1(b: &Block, lambda: f64, radius: f64) -> Vec<f64> {
    let a = dense(&b.matrix);
    let gram = a.transpose() * &a * b.coef;
    let lin = a.transpose() * DVector::from_vec(b.anchor.clone());
    let lip = gram.clone().symmetric_eigen().eigenvalues.max();
    let x0 = DVector::from_vec(b.x.clone());
    // Optimize over u = x + Δ.
    let grad = |u: &DVector<f64>| &lin + &gram * (u - &x0);
    let prox = |z: f64| (z.abs() - lambda / lip).max(0.0).copysign(z).clamp(-radius, radius);
    let mut u = x0.clone();
    let mut y = u.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let g = grad(&y);
        let next = (&y - g / lip).map(prox);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = &next + (&next - &u) * ((t - 1.0) / t_next);
        u = next;
        t = t_next;
    }
    (u - x0).iter().copied().collect()
}

#[test]
fn l1_block_matches_proximal_gradient_oracle() {
    for seed in 0..8 {
        let b = block_instance(seed);
        for (lambda, radius) in [(0.3, 10.0), (1.5, 10.0), (0.05, 0.4)] {
            let part = SeparablePart::L1Bounded { lambda, radius };
            let got = solve_block(&b, &part);
            let exact = fista_l1(&b, lambda, radius);
            for j in 0..5 {
                assert!(
                    (got[j] - exact[j]).abs() <= 1e-8,
                    "seed {seed} λ {lambda} L {radius} j {j}: {} vs {}",
                    got[j],
                    exact[j]
                );
            }
        }
    }
}

#[test]
fn single_coordinate_update_is_exact_line_minimum() {
    let b = block_instance(3);
    let part = SeparablePart::L1Bounded { lambda: 0.4, radius: 3.0 };
    let mut view = SubproblemView::new(&b.matrix, &b.block, &part, &b.x, b.anchor.clone(), b.coef);
    for j in [0, 2, 4, 1] {
        view.coordinate_update(j);
        let best = view.objective();
        let delta = view.delta().to_vec();
        // Scan along coordinate j: nothing on a fine grid does better.
        for step in (-400..=400).map(|s| s as f64 * 0.01) {
            let mut d = delta.clone();
            d[j] += step;
            if (b.x[j] + d[j]).abs() <= 3.0 {
                assert!(view.objective_at(&d) >= best - 1e-12);
            }
        }
    }
}

// ---------------------------------------------------------------- ridge

#[test]
fn ridge_split_matches_normal_equations() {
    let s = synthetic(40, 10, 1.0, 4);
    let a = Arc::new(s.matrix.transpose());
    let part = Partition::contiguous(40, 4).unwrap();
    let split = RidgeSplit::new(a, s.target.clone(), 0.5, &part).unwrap();
    let w = split.solve_exact().unwrap();
    let x = dense(&s.matrix);
    let lhs = x.transpose() * &x + DMatrix::identity(10, 10) * 0.5;
    let rhs = x.transpose() * DVector::from_vec(s.target);
    let exact = lhs.lu().solve(&rhs).unwrap();
    for j in 0..10 {
        assert!((w[j] - exact[j]).abs() <= 1e-10);
    }
}

#[test]
fn ridge_formulations_share_the_model() {
    // Primal min ‖Xw-b‖²/(2λ) + ½‖w‖² and the dual over samples both give
    // w = (XᵀX + λI)⁻¹ Xᵀ b.
    let s = synthetic(30, 8, 1.0, 9);
    let lambda = 0.8;
    let x = dense(&s.matrix);
    let lhs = x.transpose() * &x + DMatrix::identity(8, 8) * lambda;
    let exact = lhs.lu().solve(&(x.transpose() * DVector::from_vec(s.target.clone()))).unwrap();
    for form in [Formulation::Primal, Formulation::Dual] {
        let p = problem::make_ridge(&s.matrix, s.target.clone(), lambda, form).unwrap();
        let r = cola::harness::reference::compute_reference(&p, 50_000_000);
        let w = p.model(&r.x_star);
        for j in 0..8 {
            assert!((w[j] - exact[j]).abs() <= 1e-7, "{form:?} j {j}: {} vs {}", w[j], exact[j]);
        }
    }
}
