#![allow(dead_code)]

use measure_scale::linalg::{CMatrix, CVector, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> CVector {
    CVector::new((0..dim).map(|_| random_complex(rng)).collect())
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    let data = (0..rows * cols).map(|_| random_complex(rng)).collect();
    CMatrix::new(rows, cols, data).unwrap()
}

/// Unitary from Gram-Schmidt on random columns.
pub fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> CMatrix {
    let mut cols: Vec<CVector> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v = random_vector(rng, dim);
        for _ in 0..2 {
            for q in &cols {
                v = v.axpy(-q.inner(&v), q);
            }
        }
        if let Some(q) = v.normalized() {
            if v.norm() > 1e-3 {
                cols.push(q);
            }
        }
    }
    CMatrix::from_columns(&cols)
}

pub struct Planted {
    pub f: CMatrix,
    pub a: C64,
    pub w: CVector,
    /// Largest `|λ/a|` over the rest of the spectrum.
    pub gap: f64,
}

/// `F = Q [[a, 0], [η, G]] Q*` with `G` upper triangular and its diagonal
/// inside the disc of radius `gap·|a|`, so `w = Q e_0` is a left
/// eigenvector for `conj(a)`.
pub fn planted_triple(rng: &mut ChaCha8Rng, dim: usize) -> Planted {
    let modulus = rng.random_range(0.5..2.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let a = C64::from_polar(modulus, phase);
    let gap = rng.random_range(0.6..0.9);
    let mut b = CMatrix::zeros(dim, dim);
    b[(0, 0)] = a;
    let mut largest: f64 = 0.0;
    for i in 1..dim {
        b[(i, 0)] = random_complex(rng);
        let r = if i == 1 {
            gap * modulus
        } else {
            rng.random_range(0.0..gap) * modulus
        };
        largest = largest.max(r);
        b[(i, i)] = C64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU));
        for j in i + 1..dim {
            b[(i, j)] = random_complex(rng).scale(0.5 * modulus);
        }
    }
    let q = random_unitary(rng, dim);
    let f = &(&q * &b) * &q.adjoint();
    Planted {
        f,
        a,
        w: q.column(0),
        gap: largest / modulus,
    }
}
