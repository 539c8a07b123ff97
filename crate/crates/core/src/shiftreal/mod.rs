//! Complex-shift real-equivalent pipeline for parametric quadratic
//! eigenvalue problems.
//!
//! Assembles the velocity-dependent QEP coefficients, forms the companion
//! linearization `(A, B)`, maps the complex shifted system
//! `(gamma B - A)(x + iy) = f + ig` to an equivalent double-size real block
//! system, and applies a nested block preconditioner whose innermost kernel
//! is the symmetric indefinite matrix `K_E - |gamma|^2 M` solved by
//! MINRES-CG. That inner matrix depends on the shift only through
//! `|gamma|`, so its factorization and deflation basis are cached and reused
//! across shifts of equal modulus.

mod blockprec;
mod sweep;
mod synth;

pub use blockprec::{
    block_precond_apply, schur_solve, solve_shifted, BlockPreconditioner, InnerSolverCache,
    ShiftSolveConfig,
};
pub use sweep::{run_sweep, write_sweep_csv, SweepOutcome, SweepSource, SweepSpec};
pub use synth::synthetic_qep;

use thiserror::Error;

use crate::sparse::{CsrMatrix, SparseError, SparseSymMatrix};

#[derive(Debug, Error)]
pub enum ShiftRealError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("gamma must have a nonzero imaginary part")]
    RealShift,
    #[error("angular velocities must be positive: omega {omega}, omega_ref {omega_ref}")]
    NonPositiveOmega { omega: f64, omega_ref: f64 },
    #[error("{name} violates its symmetry class: defect {defect:e}")]
    SymmetryViolation { name: String, defect: f64 },
    #[error("inner matrix is numerically singular; perturb the shift: {0}")]
    SingularInner(String),
    #[error("{stage} solve failed: {detail}")]
    StageFailure { stage: String, detail: String },
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Eig(#[from] crate::eig::EigError),
    #[error(transparent)]
    Precond(#[from] crate::precond::PrecondError),
    #[error("sweep config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Complex shift `gamma = re + i im`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma {
    pub re: f64,
    pub im: f64,
}

impl Gamma {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn modulus2(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// Angular-velocity parameters and the complex shift of one solve.
#[derive(Debug, Clone, Copy)]
pub struct ShiftParams {
    pub omega: f64,
    pub omega_ref: f64,
    pub gamma: Gamma,
}

impl ShiftParams {
    pub fn new(omega: f64, omega_ref: f64, gamma: Gamma) -> Result<Self, ShiftRealError> {
        if omega <= 0.0 || omega_ref <= 0.0 {
            return Err(ShiftRealError::NonPositiveOmega { omega, omega_ref });
        }
        if gamma.im == 0.0 {
            return Err(ShiftRealError::RealShift);
        }
        Ok(Self { omega, omega_ref, gamma })
    }
}

/// The seven coefficient matrices of the parametric QEP: symmetric positive
/// definite mass and elastic stiffness, symmetric damping/geometry parts, a
/// skew-symmetric gyroscopic part and a general circulatory part.
#[derive(Debug, Clone)]
pub struct QepParts {
    pub m_mass: SparseSymMatrix,
    pub k_e: SparseSymMatrix,
    pub d_m: SparseSymMatrix,
    pub d_r: SparseSymMatrix,
    pub k_g: SparseSymMatrix,
    pub d_g: CsrMatrix,
    pub k_r: CsrMatrix,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl QepParts {
    pub fn new(
        m_mass: SparseSymMatrix,
        k_e: SparseSymMatrix,
        d_m: SparseSymMatrix,
        d_r: SparseSymMatrix,
        k_g: SparseSymMatrix,
        d_g: CsrMatrix,
        k_r: CsrMatrix,
    ) -> Result<Self, ShiftRealError> {
        let n = m_mass.n();
        for (_name, dim) in [
            ("K_E", k_e.n()),
            ("D_M", d_m.n()),
            ("D_R", d_r.n()),
            ("K_g", k_g.n()),
            ("D_G", d_g.rows()),
            ("K_R", k_r.rows()),
        ] {
            if dim != n {
                return Err(ShiftRealError::DimensionMismatch { expected: n, got: dim });
            }
        }
        if d_g.cols() != n || k_r.cols() != n {
            return Err(ShiftRealError::DimensionMismatch { expected: n, got: d_g.cols() });
        }
        let skew = d_g.skew_defect();
        if skew > SYMMETRY_TOL {
            return Err(ShiftRealError::SymmetryViolation { name: "D_G".into(), defect: skew });
        }
        Ok(Self { m_mass, k_e, d_m, d_r, k_g, d_g, k_r })
    }

    pub fn n(&self) -> usize {
        self.m_mass.n()
    }

    /// Ingest the seven coordinate Matrix Market files. `D_G` must carry an
    /// exactly skew value set (a `skew-symmetric` declaration guarantees
    /// that); `K_R` may be general.
    #[allow(clippy::too_many_arguments)]
    pub fn load_from_files(
        mass: &std::path::Path,
        k_e: &std::path::Path,
        d_m: &std::path::Path,
        d_r: &std::path::Path,
        k_g: &std::path::Path,
        d_g: &std::path::Path,
        k_r: &std::path::Path,
    ) -> Result<Self, ShiftRealError> {
        use crate::sparse::{load_matrix_market, load_matrix_market_general};
        let (d_g, _) = load_matrix_market_general(d_g)?;
        let (k_r, _) = load_matrix_market_general(k_r)?;
        QepParts::new(
            load_matrix_market(mass)?,
            load_matrix_market(k_e)?,
            load_matrix_market(d_m)?,
            load_matrix_market(d_r)?,
            load_matrix_market(k_g)?,
            d_g,
            k_r,
        )
    }
}

/// Velocity-dependent damping and stiffness:
/// `D = D_M + (omega_ref/omega - 1) D_R + (omega/omega_ref) D_G` and
/// `K = K_E + K_R + ((omega/omega_ref)^2 - 1) K_g`.
pub fn assemble_qep(parts: &QepParts, p: &ShiftParams) -> (CsrMatrix, CsrMatrix) {
    let ratio = p.omega / p.omega_ref;
    let d_omega = CsrMatrix::from_sym(&parts.d_m)
        .linear_combination(1.0, &CsrMatrix::from_sym(&parts.d_r), 1.0 / ratio - 1.0)
        .linear_combination(1.0, &parts.d_g, ratio);
    let k_omega = CsrMatrix::from_sym(&parts.k_e)
        .linear_combination(1.0, &parts.k_r, 1.0)
        .linear_combination(1.0, &CsrMatrix::from_sym(&parts.k_g), ratio * ratio - 1.0);
    (d_omega, k_omega)
}

/// Companion linearization of the QEP: the 2n-by-2n pencil
/// `A = [[0, I], [-K, -D]]`, `B = [[I, 0], [0, M]]`, held block-wise.
#[derive(Debug, Clone)]
pub struct CompanionPencil {
    n: usize,
    m_mass: SparseSymMatrix,
    d_omega: CsrMatrix,
    k_omega: CsrMatrix,
}

pub fn companion_pencil(
    m_mass: &SparseSymMatrix,
    d_omega: &CsrMatrix,
    k_omega: &CsrMatrix,
) -> Result<CompanionPencil, ShiftRealError> {
    let n = m_mass.n();
    if d_omega.rows() != n || d_omega.cols() != n || k_omega.rows() != n || k_omega.cols() != n {
        return Err(ShiftRealError::DimensionMismatch { expected: n, got: d_omega.rows() });
    }
    Ok(CompanionPencil {
        n,
        m_mass: m_mass.clone(),
        d_omega: d_omega.clone(),
        k_omega: k_omega.clone(),
    })
}

impl CompanionPencil {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mass(&self) -> &SparseSymMatrix {
        &self.m_mass
    }

    /// y = A x on length-2n vectors.
    pub fn apply_a(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), 2 * n);
        let (top, bottom) = x.split_at(n);
        y[..n].copy_from_slice(bottom);
        let mut tmp = vec![0.0; n];
        self.k_omega.matvec_into(top, &mut tmp);
        for i in 0..n {
            y[n + i] = -tmp[i];
        }
        self.d_omega.matvec_into(bottom, &mut tmp);
        for i in 0..n {
            y[n + i] -= tmp[i];
        }
    }

    /// y = B x on length-2n vectors.
    pub fn apply_b(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), 2 * n);
        y[..n].copy_from_slice(&x[..n]);
        let mut tmp = vec![0.0; n];
        self.m_mass.matvec_into(&x[n..], &mut tmp);
        y[n..].copy_from_slice(&tmp);
    }

    pub fn a_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n;
        let mut a = nalgebra::DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            a[(i, n + i)] = 1.0;
        }
        let kd = self.k_omega.to_dense();
        let dd = self.d_omega.to_dense();
        for i in 0..n {
            for j in 0..n {
                a[(n + i, j)] = -kd[(i, j)];
                a[(n + i, n + j)] = -dd[(i, j)];
            }
        }
        a
    }

    pub fn b_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n;
        let mut b = nalgebra::DMatrix::identity(2 * n, 2 * n);
        let md = self.m_mass.to_dense();
        for i in 0..n {
            for j in 0..n {
                b[(n + i, n + j)] = md[(i, j)];
            }
        }
        b
    }
}

/// The equivalent double-size real system for `(gamma B - A)(x+iy) = f+ig`:
///
/// ```text
/// [ Bh  -Ah ] [  x ]   [ g ]
/// [ Ah   Bh ] [ -y ] = [ f ]
/// ```
///
/// with `Ah = gamma_r B - A` and `Bh = gamma_i B`, all blocks applied
/// matrix-free; the 4n operator is never assembled.
#[derive(Debug, Clone)]
pub struct RealBlockSystem {
    pencil: CompanionPencil,
    gamma: Gamma,
}

pub fn real_block_system(
    pencil: &CompanionPencil,
    gamma: Gamma,
) -> Result<RealBlockSystem, ShiftRealError> {
    if gamma.im == 0.0 {
        return Err(ShiftRealError::RealShift);
    }
    Ok(RealBlockSystem { pencil: pencil.clone(), gamma })
}

impl RealBlockSystem {
    /// QEP dimension n; the real system is 4n.
    pub fn n(&self) -> usize {
        self.pencil.n
    }

    pub fn gamma(&self) -> Gamma {
        self.gamma
    }

    pub fn pencil(&self) -> &CompanionPencil {
        &self.pencil
    }

    /// y = Ah x = (gamma_r B - A) x on length-2n vectors.
    pub fn apply_a_hat(&self, x: &[f64], y: &mut [f64]) {
        let m = 2 * self.pencil.n;
        debug_assert_eq!(x.len(), m);
        let mut bx = vec![0.0; m];
        self.pencil.apply_b(x, &mut bx);
        self.pencil.apply_a(x, y);
        for i in 0..m {
            y[i] = self.gamma.re * bx[i] - y[i];
        }
    }

    /// y = Bh x = gamma_i B x on length-2n vectors.
    pub fn apply_b_hat(&self, x: &[f64], y: &mut [f64]) {
        self.pencil.apply_b(x, y);
        for v in y.iter_mut() {
            *v *= self.gamma.im;
        }
    }

    /// The 4n real operator `[[Bh, -Ah], [Ah, Bh]]`.
    pub fn apply_full(&self, x: &[f64], y: &mut [f64]) {
        let m = 2 * self.pencil.n;
        debug_assert_eq!(x.len(), 4 * self.pencil.n);
        let (x1, x2) = x.split_at(m);
        let mut t1 = vec![0.0; m];
        let mut t2 = vec![0.0; m];
        self.apply_b_hat(x1, &mut t1);
        self.apply_a_hat(x2, &mut t2);
        for i in 0..m {
            y[i] = t1[i] - t2[i];
        }
        self.apply_a_hat(x1, &mut t1);
        self.apply_b_hat(x2, &mut t2);
        for i in 0..m {
            y[m + i] = t1[i] + t2[i];
        }
    }

    /// Right-hand side layout `[g; f]`.
    pub fn rhs_from_complex(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let m = 2 * self.pencil.n;
        debug_assert_eq!(f.len(), m);
        debug_assert_eq!(g.len(), m);
        let mut rhs = Vec::with_capacity(4 * self.pencil.n);
        rhs.extend_from_slice(g);
        rhs.extend_from_slice(f);
        rhs
    }

    /// Unknown layout `[x; -y]`: recover the complex solution `x + iy`.
    pub fn solution_to_complex(&self, s: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = 2 * self.pencil.n;
        debug_assert_eq!(s.len(), 2 * m);
        let x = s[..m].to_vec();
        let y = s[m..].iter().map(|v| -v).collect();
        (x, y)
    }

    pub fn a_hat_dense(&self) -> nalgebra::DMatrix<f64> {
        self.pencil.b_dense() * self.gamma.re - self.pencil.a_dense()
    }

    pub fn b_hat_dense(&self) -> nalgebra::DMatrix<f64> {
        self.pencil.b_dense() * self.gamma.im
    }

    pub fn full_dense(&self) -> nalgebra::DMatrix<f64> {
        let m = 2 * self.pencil.n;
        let ah = self.a_hat_dense();
        let bh = self.b_hat_dense();
        let mut full = nalgebra::DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                full[(i, j)] = bh[(i, j)];
                full[(i, m + j)] = -ah[(i, j)];
                full[(m + i, j)] = ah[(i, j)];
                full[(m + i, m + j)] = bh[(i, j)];
            }
        }
        full
    }
}

impl crate::krylov::LinearOperator for RealBlockSystem {
    fn dim(&self) -> usize {
        4 * self.pencil.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.apply_full(x, y)
    }
}

/// The shift-independent inner matrix `K_E - |gamma|^2 M`. Bit-identical
/// for any two shifts of equal modulus, which is what makes caching by
/// `|gamma|^2` sound.
pub fn inner_matrix(
    k_e: &SparseSymMatrix,
    m_mass: &SparseSymMatrix,
    gamma: Gamma,
) -> SparseSymMatrix {
    k_e.linear_combination(1.0, m_mass, -gamma.modulus2())
}
