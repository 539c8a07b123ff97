use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::QepParts;
use crate::sparse::{CsrMatrix, SparseSymMatrix};

/// Seeded synthetic QEP instance in the regime of the target application:
/// diagonally dominant mass-like `M`, Laplacian-based stiffness `K_E` scaled
/// so that `||M||_F` is far below `||K_E||_F`, small random symmetric
/// damping/geometry parts, a small skew gyroscopic part and a small general
/// circulatory part.
pub fn synthetic_qep(n: usize, seed: u64) -> QepParts {
    assert!(n >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E3779B9).wrapping_add(17));

    // mass: tridiagonal, strictly diagonally dominant, SPD
    let mut mass_t = Vec::new();
    for i in 0..n {
        mass_t.push((i, i, 2.0 + rng.gen_range(0.0..1.0)));
        if i > 0 {
            mass_t.push((i, i - 1, rng.gen_range(0.0..0.3)));
        }
    }
    let m_mass = SparseSymMatrix::from_lower_triplets(n, &mass_t).expect("mass pattern");

    // stiffness: Laplacian pattern (2D when n is a perfect square, a chain
    // otherwise), scaled well above the mass norm
    let scale = 500.0;
    let p = (n as f64).sqrt().round() as usize;
    let k_e = if p * p == n {
        crate::synth::laplacian_2d(p).scaled(scale)
    } else {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 * scale));
            if i > 0 {
                t.push((i, i - 1, -scale));
            }
        }
        SparseSymMatrix::from_lower_triplets(n, &t).expect("chain pattern")
    };

    let small_sym = |rng: &mut ChaCha8Rng| -> SparseSymMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            if rng.gen_bool(0.7) {
                t.push((i, i, rng.gen_range(-0.5..0.5)));
            }
            if i > 0 && rng.gen_bool(0.4) {
                t.push((i, i - 1, rng.gen_range(-0.5..0.5)));
            }
        }
        SparseSymMatrix::from_lower_triplets(n, &t).expect("random symmetric part")
    };
    let d_m = small_sym(&mut rng);
    let d_r = small_sym(&mut rng);
    let k_g = small_sym(&mut rng);

    // skew gyroscopic part
    let mut skew_t = Vec::new();
    for i in 1..n {
        if rng.gen_bool(0.5) {
            let v = rng.gen_range(-0.5..0.5);
            skew_t.push((i, i - 1, v));
            skew_t.push((i - 1, i, -v));
        }
    }
    let d_g = CsrMatrix::from_triplets(n, n, &skew_t).expect("skew part");

    // general circulatory part
    let mut gen_t = Vec::new();
    for i in 0..n {
        let j = rng.gen_range(0..n);
        if !gen_t.iter().any(|&(a, b, _)| (a, b) == (i, j)) {
            gen_t.push((i, j, rng.gen_range(-0.3..0.3)));
        }
    }
    let k_r = CsrMatrix::from_triplets(n, n, &gen_t).expect("general part");

    QepParts::new(m_mass, k_e, d_m, d_r, k_g, d_g, k_r).expect("synthetic parts are consistent")
}
