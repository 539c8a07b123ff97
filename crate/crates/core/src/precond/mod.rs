//! Preconditioner constructions and applications.
//!
//! Everything a solve composes on the preconditioning side lives here: the
//! incomplete LU variants (ILU(0), thresholded/modified ILU), the block
//! LDL^T factorization with Bunch-Kaufman pivoting, the positive definite
//! modification of its block diagonal, the deflated operator
//! `M = A + 2 V |L| V^T`, and the Sherman-Morrison-Woodbury form of its
//! inverse `A^{-1} - 2 V L^{-1} V^T`.

mod deflate;
mod ildlt;
mod ilu;
mod ordering;
mod spec;

pub use deflate::{deflated_apply, smw_apply, DeflatedOperator, SmwInverse};
pub use ildlt::{
    ildlt, ildlt_complete, ildlt_with_options, modify_block_diagonal, BlockLDLFactors, DiagBlock,
    IldltOptions,
};
pub use ilu::{ilu0, ilut, IluFactors};
pub use ordering::min_degree_order;
pub use spec::{build_preconditioner, PrecondSpec};

use thiserror::Error;

/// Errors from preconditioner construction.
#[derive(Debug, Error)]
pub enum PrecondError {
    #[error("zero pivot at row {row}")]
    ZeroPivot { row: usize },
    #[error("factorization breakdown at step {step}: both pivot candidates below {threshold:e}")]
    Breakdown { step: usize, threshold: f64 },
    #[error("cannot positivize singular block {block}")]
    SingularBlock { block: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must be symmetric: {0}")]
    NotSymmetric(String),
    #[error("invalid preconditioner spec `{0}`: {1}")]
    BadSpec(String, String),
}

/// Apply-to-vector contract for preconditioner actions `w = M^{-1} v`.
///
/// Applications are infallible; a degenerate action surfaces as non-finite
/// values which the Krylov drivers report as scalar breakdown.
pub trait PreconditionerAction: Sync {
    fn dim(&self) -> usize;

    fn apply_into(&self, v: &[f64], out: &mut [f64]);

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(v, &mut out);
        out
    }

    /// Short name used in reports.
    fn label(&self) -> String;
}

impl<T: PreconditionerAction + ?Sized> PreconditionerAction for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        (**self).apply_into(v, out)
    }

    fn label(&self) -> String {
        (**self).label()
    }
}

impl<T: PreconditionerAction + ?Sized> PreconditionerAction for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        (**self).apply_into(v, out)
    }

    fn label(&self) -> String {
        (**self).label()
    }
}

/// Identity action, the "no preconditioner" case.
pub struct IdentityPrecond {
    n: usize,
}

impl IdentityPrecond {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl PreconditionerAction for IdentityPrecond {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(v);
    }

    fn label(&self) -> String {
        "none".into()
    }
}

/// Preconditioner action backed by a dense LU solve; test oracle and
/// exact-inverse path for small problems.
pub struct DenseInverse {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
    label: String,
}

impl DenseInverse {
    pub fn new(m: nalgebra::DMatrix<f64>, label: &str) -> Self {
        let n = m.nrows();
        Self { lu: m.lu(), n, label: label.to_string() }
    }
}

impl PreconditionerAction for DenseInverse {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let rhs = nalgebra::DVector::from_row_slice(v);
        let sol = self.lu.solve(&rhs).expect("dense inverse oracle: singular matrix");
        out.copy_from_slice(sol.as_slice());
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    // Preconditioner actions must be linear maps: apply(ax + by) agrees with
    // a*apply(x) + b*apply(y).
    #[test]
    fn actions_are_linear() {
        let (a, _, _) = crate::synth::random_indefinite(24, 3, 11);
        let actions: Vec<Box<dyn PreconditionerAction>> = vec![
            Box::new(IdentityPrecond::new(24)),
            Box::new(ilu0(&a).unwrap()),
            Box::new(ildlt_complete(&a).unwrap()),
            Box::new(DenseInverse::new(a.to_dense(), "dense")),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for action in &actions {
            let x: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (alpha, beta) = (0.7, -1.3);
            let combo: Vec<f64> =
                x.iter().zip(&y).map(|(xi, yi)| alpha * xi + beta * yi).collect();
            let lhs = action.apply(&combo);
            let mx = action.apply(&x);
            let my = action.apply(&y);
            for i in 0..24 {
                let rhs = alpha * mx[i] + beta * my[i];
                assert!(
                    (lhs[i] - rhs).abs() < 1e-10 * (1.0 + rhs.abs()),
                    "{} not linear at {}: {} vs {}",
                    action.label(),
                    i,
                    lhs[i],
                    rhs
                );
            }
        }
    }
}
