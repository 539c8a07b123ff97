use super::{
    ildlt, ilu0, ilut, modify_block_diagonal, IdentityPrecond, PrecondError,
    PreconditionerAction, SmwInverse,
};
use crate::eig::DeflationBasis;
use crate::sparse::SparseSymMatrix;

/// Parsed preconditioner spec string.
///
/// Grammar: `none`, `ilu0`, `milu:<tol>`, `ildlt:<level>:<tol>`,
/// `ildlt-mod:<level>:<tol>` (the positive definite modification), and
/// `smw:<inner-spec>` which wraps any of the others in the
/// Sherman-Morrison-Woodbury correction.
#[derive(Debug, Clone, PartialEq)]
pub enum PrecondSpec {
    None,
    Ilu0,
    Milu { tol: f64 },
    Ildlt { level: usize, tol: f64 },
    IldltMod { level: usize, tol: f64 },
    Smw { inner: Box<PrecondSpec> },
}

impl PrecondSpec {
    pub fn parse(s: &str) -> Result<Self, PrecondError> {
        let bad = |msg: &str| PrecondError::BadSpec(s.to_string(), msg.to_string());
        let trimmed = s.trim();
        if let Some(rest) = trimmed.strip_prefix("smw:") {
            let inner = PrecondSpec::parse(rest)?;
            if matches!(inner, PrecondSpec::Smw { .. }) {
                return Err(bad("smw cannot wrap itself"));
            }
            return Ok(PrecondSpec::Smw { inner: Box::new(inner) });
        }
        let parts: Vec<&str> = trimmed.split(':').collect();
        match parts.as_slice() {
            ["none"] | ["identity"] => Ok(PrecondSpec::None),
            ["ilu0"] => Ok(PrecondSpec::Ilu0),
            ["milu", tol] => {
                let tol: f64 = tol.parse().map_err(|_| bad("bad milu tolerance"))?;
                Ok(PrecondSpec::Milu { tol })
            }
            ["ildlt", level, tol] | ["ildlt-mod", level, tol] => {
                let level: usize = level.parse().map_err(|_| bad("bad fill level"))?;
                let tol: f64 = tol.parse().map_err(|_| bad("bad drop tolerance"))?;
                if parts[0] == "ildlt" {
                    Ok(PrecondSpec::Ildlt { level, tol })
                } else {
                    Ok(PrecondSpec::IldltMod { level, tol })
                }
            }
            _ => Err(bad("unknown preconditioner")),
        }
    }

    /// Whether construction needs a deflation basis.
    pub fn needs_basis(&self) -> bool {
        matches!(self, PrecondSpec::Smw { .. })
    }
}

impl std::fmt::Display for PrecondSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PrecondSpec::None => write!(f, "none"),
            PrecondSpec::Ilu0 => write!(f, "ilu0"),
            PrecondSpec::Milu { tol } => write!(f, "milu:{}", tol),
            PrecondSpec::Ildlt { level, tol } => write!(f, "ildlt:{}:{}", level, tol),
            PrecondSpec::IldltMod { level, tol } => write!(f, "ildlt-mod:{}:{}", level, tol),
            PrecondSpec::Smw { inner } => write!(f, "smw:{}", inner),
        }
    }
}

/// Build the preconditioner action a spec describes for the given matrix.
/// The `smw:` wrapper needs the deflation basis of that same matrix.
pub fn build_preconditioner<'a>(
    a: &SparseSymMatrix,
    spec: &PrecondSpec,
    basis: Option<&'a DeflationBasis>,
) -> Result<Box<dyn PreconditionerAction + 'a>, PrecondError> {
    match spec {
        PrecondSpec::None => Ok(Box::new(IdentityPrecond::new(a.n()))),
        PrecondSpec::Ilu0 => Ok(Box::new(ilu0(a)?)),
        PrecondSpec::Milu { tol } => Ok(Box::new(ilut(a, *tol, true)?)),
        PrecondSpec::Ildlt { level, tol } => Ok(Box::new(ildlt(a, *level, *tol)?)),
        PrecondSpec::IldltMod { level, tol } => {
            let f = ildlt(a, *level, *tol)?;
            Ok(Box::new(modify_block_diagonal(&f)?))
        }
        PrecondSpec::Smw { inner } => {
            let basis = basis.ok_or_else(|| {
                PrecondError::BadSpec(spec.to_string(), "smw requires a deflation basis".into())
            })?;
            let inner_action = build_preconditioner(a, inner, Some(basis))?;
            Ok(Box::new(SmwInverse::new(inner_action, basis)?))
        }
    }
}
