//! Acceptance suite: every release-gating guarantee of the library, one
//! test per criterion, each printing a PASS/FAIL line (run with
//! `cargo test --test acceptance -- --nocapture` to see them).
//!
//! Criterion 6 exercises collection matrices over the network; without
//! network access it reports SKIP and the remaining criteria constitute
//! acceptance.

use indefsolve::bench::{fetch_matrix, ExperimentSpec, MatrixSource, RhsSpec, SolverSpec};
use indefsolve::eig::{jacobi_eigen, negative_eigenpairs, EigConfig};
use indefsolve::krylov::{
    bicgstab, gmres_restarted, minres, pcg_observed, FailureKind, SolveConfig, SolveReport,
};
use indefsolve::precond::{
    build_preconditioner, DeflatedOperator, DenseInverse, IdentityPrecond, PrecondSpec,
    PreconditionerAction, SmwInverse,
};
use indefsolve::shiftreal::{
    assemble_qep, companion_pencil, solve_shifted, synthetic_qep, Gamma, InnerSolverCache,
    ShiftParams, ShiftSolveConfig,
};
use indefsolve::sparse::{norm2, SparseSymMatrix};
use indefsolve::synth::random_indefinite;

use nalgebra::{Complex, DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn report_line(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {}: {} — {}",
        criterion,
        if pass { "PASS" } else { "FAIL" },
        detail
    );
}

fn instance_60(trial: u64) -> (SparseSymMatrix, usize) {
    let k = 1 + (trial as usize) % 8;
    let (a, _, _) = random_indefinite(60, k, 0xACC0 + trial);
    (a, k)
}

fn exact_mmr_inverse(a: &SparseSymMatrix) -> (DMatrix<f64>, DenseInverse) {
    let basis = negative_eigenpairs(a, &EigConfig::default()).expect("basis");
    let op = DeflatedOperator::new(a, &basis).expect("dims");
    let dense = op.to_dense();
    let inv = DenseInverse::new(dense.clone(), "exact-mmr");
    (dense, inv)
}

// Two-iteration exactness: MINRES preconditioned by the exact deflated
// operator reaches 1e-12 within two iterations on every planted instance.
#[test]
fn criterion_1_two_iteration_exactness() {
    let mut worst_iters = 0.0_f64;
    let mut worst_res = 0.0_f64;
    let mut pass = true;
    for trial in 0..20 {
        let (a, _) = instance_60(trial);
        let (_, precond) = exact_mmr_inverse(&a);
        let mut rng = ChaCha8Rng::seed_from_u64(900 + trial);
        let b: Vec<f64> = (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cfg = SolveConfig { rel_tol: 1e-12, max_iters: 10, ..Default::default() };
        let (x, rep) = minres(&a, &precond, &b, &cfg);
        let mut buf = vec![0.0; 60];
        a.matvec_into(&x, &mut buf);
        let res = b
            .iter()
            .zip(&buf)
            .map(|(bi, ai)| (bi - ai) * (bi - ai))
            .sum::<f64>()
            .sqrt()
            / norm2(&b);
        worst_iters = worst_iters.max(rep.outer_iters);
        worst_res = worst_res.max(res);
        pass &= rep.converged && rep.outer_iters <= 2.0 && res <= 1e-12;
    }
    report_line(
        "1 (two-iteration exactness)",
        pass,
        &format!("20 trials, worst iterations {}, worst residual {:.2e}", worst_iters, worst_res),
    );
    assert!(pass, "worst iterations {}, worst residual {}", worst_iters, worst_res);
}

// The exactly preconditioned operator has spectrum {-1, +1} to 1e-10,
// computed through the SPD-congruent symmetrization (dense oracle).
#[test]
fn criterion_2_preconditioned_spectrum() {
    let mut worst = 0.0_f64;
    for trial in 0..20 {
        let (a, _) = instance_60(trial);
        let (m, _) = exact_mmr_inverse(&a);
        let (m_eigs, m_vecs) = jacobi_eigen(&m);
        assert!(m_eigs[0] > 0.0, "deflated operator must be SPD");
        let inv_sqrt: DMatrix<f64> = DMatrix::from_fn(60, 60, |i, j| {
            (0..60).map(|l| m_vecs[(i, l)] * m_vecs[(j, l)] / m_eigs[l].sqrt()).sum::<f64>()
        });
        let sym: DMatrix<f64> = &inv_sqrt * a.to_dense() * &inv_sqrt;
        let sym: DMatrix<f64> = 0.5 * (&sym + sym.transpose());
        let (eigs, _) = jacobi_eigen(&sym);
        for l in eigs {
            worst = worst.max((l.abs() - 1.0).abs());
        }
    }
    let pass = worst <= 1e-10;
    report_line(
        "2 (spectrum of preconditioned operator)",
        pass,
        &format!("max |(|lambda| - 1)| = {:.2e} over 20 trials", worst),
    );
    assert!(pass, "spectrum deviation {}", worst);
}

// Dense Sherman-Morrison-Woodbury identity:
// (A + 2V|L|V^T)(A^{-1} - 2V L^{-1} V^T) = I.
#[test]
fn criterion_3_smw_identity() {
    let mut worst = 0.0_f64;
    for trial in 0..20 {
        let (a, _) = instance_60(trial);
        let basis = negative_eigenpairs(&a, &EigConfig::default()).expect("basis");
        let op = DeflatedOperator::new(&a, &basis).expect("dims");
        let m = op.to_dense();
        let ainv = a.to_dense().try_inverse().expect("full rank");
        let mut minv = ainv;
        for i in 0..basis.k() {
            let col = basis.v().col(i);
            let w = 2.0 / basis.lambda()[i];
            for r in 0..60 {
                for c in 0..60 {
                    minv[(r, c)] -= w * col[r] * col[c];
                }
            }
        }
        let err = (&m * &minv - DMatrix::<f64>::identity(60, 60)).norm();
        worst = worst.max(err);
    }
    let pass = worst <= 1e-10;
    report_line(
        "3 (SMW identity)",
        pass,
        &format!("max Frobenius deviation from I: {:.2e} over 20 trials", worst),
    );
    assert!(pass, "SMW identity deviation {}", worst);
}

// Indefinitely preconditioned CG must not break down on SPD operators and
// its energy-norm error must be monotone.
#[test]
fn criterion_4_indefinite_cg_no_breakdown_and_optimality() {
    let mut pass = true;
    let mut worst_growth = 0.0_f64;
    for trial in 0..50u64 {
        let n = 80;
        let mut rng = ChaCha8Rng::seed_from_u64(0xC60 ^ trial);
        let eigs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
        let (w, _) = indefsolve::synth::planted_symmetric(&eigs, 5000 + trial);
        let k = 1 + (trial as usize) % 10;
        let (m, _, _) = random_indefinite(n, k, 6000 + trial);
        let minv = DenseInverse::new(m.to_dense(), "indefinite");
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let wd = w.to_dense();
        let xstar = wd.clone().lu().solve(&DVector::from_row_slice(&b)).expect("oracle");
        let energy = |x: &[f64]| -> f64 {
            let e = DVector::from_row_slice(x) - &xstar;
            (e.transpose() * &wd * &e)[(0, 0)].max(0.0).sqrt()
        };

        let mut errors = vec![energy(&vec![0.0; n])];
        let cfg = SolveConfig { rel_tol: 1e-10, max_iters: 400, ..Default::default() };
        let (_, rep) = pcg_observed(&w, &minv, &b, &cfg, |x| errors.push(energy(x)));
        pass &= rep.failure_kind != FailureKind::ScalarBreakdown;
        pass &= rep.converged;
        for pair in errors.windows(2) {
            let slack = 1e-10 * pair[0].max(1.0);
            if pair[1] > pair[0] + slack {
                worst_growth = worst_growth.max(pair[1] - pair[0]);
                pass = false;
            }
        }
    }
    report_line(
        "4 (indefinite-preconditioner CG)",
        pass,
        &format!("50 trials, no breakdown, worst energy-norm growth {:.2e}", worst_growth),
    );
    assert!(pass);
}

// Clustering trend: tighter inner CG tolerances pull more eigenvalues of
// the composed preconditioned map into the 0.1 windows around -1 and +1.
//
// The instance is a sparse grid Laplacian shifted to 10 negative
// eigenvalues (n = 15 * 20 = 300) so that ILU(0) is genuinely incomplete
// and the tolerance actually matters. The composed map (inner CG applied
// to the columns of A) is similar to a symmetric matrix up to the CG
// inexactness, so its spectrum is read off the symmetrized similarity
// transform with the exact deflated operator.
#[test]
fn criterion_5_clustering_trend() {
    let n = 300;
    let (a, _, k) = indefsolve::synth::shifted_rect_laplacian(15, 20, 10);
    assert_eq!(k, 10, "instance must have exactly 10 negative eigenvalues");
    let basis = negative_eigenpairs(&a, &EigConfig::default()).expect("basis");
    assert_eq!(basis.k(), 10);
    let op = DeflatedOperator::new(&a, &basis).expect("dims");
    let ilu = indefsolve::precond::ilu0(&a).expect("ilu0");

    // M^{1/2} and M^{-1/2} of the exactly assembled deflated operator
    let m = op.to_dense();
    let (m_eigs, m_vecs) = jacobi_eigen(&m);
    assert!(m_eigs[0] > 0.0);
    let half = DMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|l| m_vecs[(i, l)] * m_vecs[(j, l)] * m_eigs[l].sqrt()).sum::<f64>()
    });
    let inv_half = DMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|l| m_vecs[(i, l)] * m_vecs[(j, l)] / m_eigs[l].sqrt()).sum::<f64>()
    });

    let fraction_near = |tol: f64| -> (f64, f64) {
        let cfg = SolveConfig { rel_tol: tol, max_iters: 2000, ..Default::default() };
        let mut composed = DMatrix::zeros(n, n);
        let mut col_in = vec![0.0; n];
        for j in 0..n {
            col_in.iter_mut().for_each(|v| *v = 0.0);
            col_in[j] = 1.0;
            let mut ae = vec![0.0; n];
            a.matvec_into(&col_in, &mut ae);
            let (z, _) = indefsolve::krylov::pcg(&op, &ilu, &ae, &cfg);
            for i in 0..n {
                composed[(i, j)] = z[i];
            }
        }
        let f: DMatrix<f64> = &half * &composed * &inv_half;
        let sym: DMatrix<f64> = 0.5 * (&f + f.transpose());
        let skew = (&f - f.transpose()).norm() * 0.5;
        let (eigs, _) = jacobi_eigen(&sym);
        let near = eigs.iter().filter(|l| (l.abs() - 1.0).abs() <= 0.1).count();
        (near as f64 / n as f64, skew)
    };

    let (f2, s2) = fraction_near(1e-2);
    let (f3, _) = fraction_near(1e-3);
    let (f4, _) = fraction_near(1e-4);
    let pass = f2 <= f3 + 1e-12 && f3 <= f4 + 1e-12;
    report_line(
        "5 (clustering trend)",
        pass,
        &format!(
            "fractions near ±1: {:.3} (1e-2) ≤ {:.3} (1e-3) ≤ {:.3} (1e-4); skew defect {:.1e}",
            f2, f3, f4, s2
        ),
    );
    assert!(pass, "fractions {} {} {}", f2, f3, f4);
}

// Collection reproduction at trend level. Needs the network (or a warm
// cache); skipped otherwise per the acceptance contract.
#[test]
fn criterion_6_collection_trend() {
    let cache = std::env::temp_dir().join("indefsolve-acceptance-cache");
    let probe = fetch_matrix("bcsstm10", &cache, false);
    let fetched = match probe {
        Ok(_) => true,
        Err(indefsolve::bench::BenchError::Download { .. }) => false,
        Err(other) => {
            report_line("6 (collection trend)", false, &format!("unexpected error: {}", other));
            panic!("unexpected fetch error: {}", other);
        }
    };
    if !fetched {
        report_line(
            "6 (collection trend)",
            true,
            "SKIP: network unavailable; criteria 1-5 and 7-9 constitute acceptance",
        );
        return;
    }

    // (id, shift, published negative eigenvalue count)
    let cases: Vec<(&str, Option<f64>, usize)> = vec![
        ("bcsstm10", None, 54),
        ("nasa1824", None, 20),
        ("benzene", None, 2),
        ("si5h12", None, 6),
        ("sio", None, 8),
        ("sio", Some(0.25), 16),
        ("sio", Some(0.5), 26),
        ("sio", Some(0.75), 41),
    ];
    // cases the reference results mark as failing for GMRES(20)
    let gmres_should_fail = ["bcsstm10", "nasa1824", "sio(sigma=0.25)", "sio(sigma=0.75)"];

    let mut all_minres_cg_ok = true;
    let mut worst_outer = 0.0_f64;
    let mut gmres_failures = 0usize;
    let mut k_ok = true;
    for (id, shift, expected_k) in &cases {
        let precond = if *id == "meg4" {
            PrecondSpec::Milu { tol: 1e-2 }
        } else {
            PrecondSpec::Ilu0
        };
        let spec = ExperimentSpec {
            matrix: MatrixSource::Collection {
                id: id.to_string(),
                cache_dir: cache.clone(),
                offline: false,
            },
            shift: *shift,
            rhs: RhsSpec::Random,
            solvers: vec![SolverSpec::MinresCg, SolverSpec::Gmres { m: 20 }],
            preconds: vec![precond],
            rel_tol: 1e-5,
            inner_tol: 1e-3,
            max_iters: 20_000,
            seed: 0x5EED,
            eig: EigConfig::default(),
            basis_cache_dir: Some(cache.join("bases")),
        };
        let outcome = indefsolve::bench::run_experiment(&spec).expect("experiment");
        for row in &outcome.rows {
            if row.solver == "minres-cg" {
                all_minres_cg_ok &= row.status == "ok" && row.outer <= 8.0;
                worst_outer = worst_outer.max(row.outer);
                k_ok &= row.k == Some(*expected_k);
            }
            if row.solver == "gmres:20"
                && row.status != "ok"
                && gmres_should_fail.contains(&row.matrix.as_str())
            {
                gmres_failures += 1;
            }
        }
    }
    let pass = all_minres_cg_ok && gmres_failures >= 3 && k_ok;
    report_line(
        "6 (collection trend)",
        pass,
        &format!(
            "minres-cg ok on all (worst outer {}), published k counts matched: {}, \
             gmres(20) failures on paper-failing cases: {}",
            worst_outer, k_ok, gmres_failures
        ),
    );
    assert!(pass);
}

// Real-block solve recombines to the dense complex oracle solution.
#[test]
fn criterion_7_complex_equivalence() {
    let mut worst = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0x7777);
    for trial in 0..20u64 {
        let n = 8;
        let parts = synthetic_qep(n, 7000 + trial);
        let gamma = Gamma::new(rng.gen_range(-3.0..3.0), {
            let im: f64 = rng.gen_range(0.5..3.0);
            if rng.gen_bool(0.5) {
                im
            } else {
                -im
            }
        });
        let params = ShiftParams::new(rng.gen_range(5.0..25.0), 5.0, gamma).expect("params");
        let n2 = 2 * n;
        let f: Vec<f64> = (0..n2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..n2).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut cfg = ShiftSolveConfig::default();
        cfg.inner =
            SolveConfig { rel_tol: 1e-13, inner_tol: 1e-13, max_iters: 50_000, ..Default::default() };
        cfg.schur =
            SolveConfig { rel_tol: 1e-13, max_iters: 2_000, restart: 60, ..Default::default() };
        cfg.outer =
            SolveConfig { rel_tol: 1e-11, max_iters: 500, restart: 64, ..Default::default() };
        let cache = InnerSolverCache::new();
        let (x, y, rep) = solve_shifted(&parts, &params, &f, &g, &cfg, &cache).expect("pipeline");
        assert!(rep.converged, "outer solve failed at trial {}", trial);

        let (d_omega, k_omega) = assemble_qep(&parts, &params);
        let pencil = companion_pencil(&parts.m_mass, &d_omega, &k_omega).expect("pencil");
        let a = pencil.a_dense();
        let b = pencil.b_dense();
        let gc = Complex::new(gamma.re, gamma.im);
        let c = DMatrix::from_fn(n2, n2, |i, j| gc * b[(i, j)] - a[(i, j)]);
        let rhs = DVector::from_fn(n2, |i, _| Complex::new(f[i], g[i]));
        let sol = c.lu().solve(&rhs).expect("oracle");
        let mut err = 0.0;
        let mut nrm = 0.0;
        for i in 0..n2 {
            err += (Complex::new(x[i], y[i]) - sol[i]).norm_sqr();
            nrm += sol[i].norm_sqr();
        }
        worst = worst.max((err / nrm).sqrt());
    }
    let pass = worst <= 1e-8;
    report_line(
        "7 (complex equivalence)",
        pass,
        &format!("20 instances, worst relative recombination error {:.2e}", worst),
    );
    assert!(pass, "worst error {}", worst);
}

// Schur factorization identity S1 S2 = Bt + At Bt^{-1} At on random SPD
// pairs, dense oracle.
#[test]
fn criterion_8_schur_identity() {
    let mut worst = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0x8888);
    for trial in 0..20u64 {
        let n = 12;
        let ke_eigs: Vec<f64> = (0..n).map(|_| rng.gen_range(10.0..100.0)).collect();
        let m_eigs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let (k_e, _) = indefsolve::synth::planted_symmetric(&ke_eigs, 8000 + trial);
        let (m_mass, _) = indefsolve::synth::planted_symmetric(&m_eigs, 8100 + trial);
        let gamma = Gamma::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.5..3.0));

        let kd = k_e.to_dense();
        let md = m_mass.to_dense();
        let (gr, gi) = (gamma.re, gamma.im);
        let mut bt = DMatrix::zeros(2 * n, 2 * n);
        let mut at = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            bt[(i, i)] = gi;
            at[(i, i)] = gr;
            at[(i, n + i)] = -1.0;
            for j in 0..n {
                bt[(n + i, n + j)] = gi * md[(i, j)];
                at[(n + i, j)] = kd[(i, j)];
                at[(n + i, n + j)] = gr * md[(i, j)];
            }
        }
        let s = &bt + &at * bt.clone().try_inverse().expect("Bt invertible") * &at;

        // formula blocks of the split
        let c = gi + gr * gr / gi;
        let t = &md * c - &kd / gi;
        let coupling = 2.0 * gr / gi;
        let minv = md.clone().try_inverse().expect("mass invertible");
        let mut s1 = DMatrix::zeros(2 * n, 2 * n);
        let mut s2 = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                s1[(i, j)] = minv[(i, j)];
                s2[(i, j)] = t[(i, j)];
                s2[(i, n + j)] = -coupling * md[(i, j)];
                s2[(n + i, j)] = coupling * kd[(i, j)];
                s2[(n + i, n + j)] = t[(i, j)];
            }
            s1[(n + i, n + i)] = 1.0;
        }
        let err = (&s1 * &s2 - &s).norm() / s.norm();
        worst = worst.max(err);
    }
    let pass = worst <= 1e-10;
    report_line(
        "8 (Schur factorization identity)",
        pass,
        &format!("20 SPD pairs, worst relative Frobenius error {:.2e}", worst),
    );
    assert!(pass, "worst error {}", worst);
}

// Counting conventions: fractional BiCGStab counts, GMRES o(i) flattening,
// and the storage accounting table.
#[test]
fn criterion_9_counting_conventions() {
    // BiCGStab on the identity converges at the half step
    let a = SparseSymMatrix::identity(6);
    let (_, rep) = bicgstab(&a, &IdentityPrecond::new(6), &[1.0; 6], &SolveConfig::default());
    let half_ok = rep.converged && rep.outer_iters == 0.5;

    // GMRES flattening on a 3-eigenvalue case at m = 2
    let a3 = SparseSymMatrix::diagonal(&[1.0, 2.0, 3.0]);
    let cfg = SolveConfig { restart: 2, rel_tol: 1e-10, ..Default::default() };
    let (_, grep) = gmres_restarted(&a3, &IdentityPrecond::new(3), &[1.0, 1.0, 1.0], &cfg);
    let (o, i) = grep.gmres_cycles.expect("cycles recorded");
    let flatten_ok =
        grep.converged && grep.gmres_flattened(2) == Some((o - 1) * 2 + i) && i >= 1 && i <= 2;

    // storage accounting for m = 120, k = 54
    let storage_ok = SolverSpec::Minres.storage_vectors(54) == Some(7)
        && SolverSpec::MinresCg.storage_vectors(54) == Some(11 + 54)
        && SolverSpec::Gmres { m: 120 }.storage_vectors(54) == Some(122)
        && SolverSpec::Fgmres { m1: 120, m2: 120 }.storage_vectors(54) == Some(364)
        && SolverSpec::Bicgstab.storage_vectors(54) == Some(6);

    let pass = half_ok && flatten_ok && storage_ok;
    report_line(
        "9 (counting conventions)",
        pass,
        &format!(
            "bicgstab half-count {}, gmres {}({}) -> {}, storage table {}",
            rep.outer_iters,
            o,
            i,
            grep.gmres_flattened(2).unwrap(),
            if storage_ok { "ok" } else { "mismatch" }
        ),
    );
    assert!(pass, "half {} flatten {} storage {}", half_ok, flatten_ok, storage_ok);
}

// The acceptance suite leans on these two compositions elsewhere; keep them
// honest here as well.
#[test]
fn smw_action_is_deflated_inverse_with_exact_inner() {
    let (a, _, _) = random_indefinite(40, 4, 0xABCD);
    let basis = negative_eigenpairs(&a, &EigConfig::default()).expect("basis");
    let exact = DenseInverse::new(a.to_dense(), "exact");
    let smw = SmwInverse::new(Box::new(&exact), &basis).expect("dims");
    let op = DeflatedOperator::new(&a, &basis).expect("dims");
    let dense = op.to_dense();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let v: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mv = &dense * DVector::from_row_slice(&v);
    let back = smw.apply(mv.as_slice());
    let err: f64 =
        back.iter().zip(&v).map(|(b, x)| (b - x) * (b - x)).sum::<f64>().sqrt() / norm2(&v);
    assert!(err < 1e-10, "round trip error {}", err);
}

#[test]
fn preconditioner_specs_build_on_real_instances() {
    let (a, _, _) = random_indefinite(30, 3, 0xBEEF);
    let basis = negative_eigenpairs(&a, &EigConfig::default()).expect("basis");
    for spec in ["ilu0", "milu:1e-2", "ildlt:1:1e-2", "ildlt-mod:1:1e-2", "smw:ilu0"] {
        let parsed = PrecondSpec::parse(spec).expect("parse");
        let action = build_preconditioner(&a, &parsed, Some(&basis)).expect("build");
        let out = action.apply(&vec![1.0; 30]);
        assert!(out.iter().all(|v| v.is_finite()), "{} produced junk", spec);
    }
}

#[allow(dead_code)]
fn debug_report(rep: &SolveReport) -> String {
    format!(
        "converged={} outer={} inner_total={} status={}",
        rep.converged,
        rep.outer_iters,
        rep.inner_iters_total,
        rep.status_marker()
    )
}
