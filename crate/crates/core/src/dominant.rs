//! Dominant eigenpairs without positivity.
//!
//! Given `F`, a simple eigenvalue `a` that strictly dominates the rest of the
//! spectrum in modulus, and a unit `w` with `F* w = conj(a) w`, there is a
//! unique `ξ` with `<w|ξ> = 1` and `F ξ = a ξ`, and `a^{-n} F^n x` tends to
//! `<w|x> ξ`. In the splitting `ℂ^d = ℂw ⊕ w^⊥` the matrix is block lower
//! triangular,
//!
//! ```text
//!     F = [ a  0 ]
//!         [ η  G ]
//! ```
//!
//! and `ξ = w + (a − G)^{-1} η`. The error `‖a^{-n}F^n x − <w|x>ξ‖` decays
//! like `n^{d−1} ρ^n` where `ρ` is the largest ratio `|s/a|` over the rest
//! of the spectrum; the polynomial factor is only needed for defective `G`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::FilterBank;
use crate::linalg::{CMatrix, CVector, C64};

/// Minimum relative modulus gap between `a` and the rest of the spectrum.
pub const GAP_TOL: f64 = 1e-9;

/// Tolerance on `‖F* w − conj(a) w‖`, relative to `max(1, ‖F‖∞)`.
pub const LEFT_EIGEN_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct DominantTriple {
    f: CMatrix,
    a: C64,
    w: CVector,
    /// `max |s/a|` over the remaining eigenvalues (0 when there are none).
    gap: f64,
}

impl DominantTriple {
    pub fn new(f: CMatrix, a: C64, w: CVector) -> Result<Self> {
        if !f.is_square() || f.rows() != w.dim() {
            return Err(Error::Dimension(format!(
                "matrix {}x{} with vector of length {}",
                f.rows(),
                f.cols(),
                w.dim()
            )));
        }
        if (w.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("w must be a unit vector, norm {}", w.norm())));
        }
        if a.norm() == 0.0 {
            return Err(Error::Hypothesis("dominant eigenvalue must be nonzero".into()));
        }
        let left = &f.adjoint().mul_vec(&w) - &w.scale(a.conj());
        let scale = f.inf_norm().max(1.0);
        if left.norm() > LEFT_EIGEN_TOL * scale {
            return Err(Error::Hypothesis(format!(
                "F* w differs from conj(a) w by {:.3e}",
                left.norm()
            )));
        }
        let spectrum = f.eigenvalues()?;
        let (idx, dist) = spectrum
            .iter()
            .enumerate()
            .map(|(i, z)| (i, (z - a).norm()))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        if dist > 1e-8 * a.norm().max(1.0) {
            return Err(Error::Hypothesis(format!(
                "{a} is not an eigenvalue (nearest at distance {dist:.3e})"
            )));
        }
        let second = spectrum
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != idx)
            .map(|(_, z)| z.norm())
            .fold(0.0, f64::max);
        if second >= a.norm() * (1.0 - GAP_TOL) {
            return Err(Error::Hypothesis(format!(
                "|a| = {} does not strictly dominate the next modulus {second}",
                a.norm()
            )));
        }
        Ok(DominantTriple {
            gap: second / a.norm(),
            f,
            a,
            w,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.f
    }

    pub fn eigenvalue(&self) -> C64 {
        self.a
    }

    pub fn left_vector(&self) -> &CVector {
        &self.w
    }

    pub fn spectral_gap(&self) -> f64 {
        self.gap
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }
}

/// Orthonormal basis of the complement of the unit vector `w`.
fn orthonormal_complement(w: &CVector) -> Vec<CVector> {
    let d = w.dim();
    let mut basis = vec![w.clone()];
    for i in 0..d {
        if basis.len() == d {
            break;
        }
        let mut v = CVector::basis(d, i);
        // two Gram-Schmidt passes
        for _ in 0..2 {
            for b in &basis {
                v = v.axpy(-b.inner(&v), b);
            }
        }
        if v.norm() > 1e-6 {
            basis.push(v.normalized().expect("nonzero"));
        }
    }
    basis.remove(0);
    basis
}

/// `ξ = w + (a − G)^{-1} η` from the block form of `F` in `ℂw ⊕ w^⊥`.
pub fn principal_right_vector(t: &DominantTriple) -> Result<CVector> {
    let comp = orthonormal_complement(&t.w);
    let m = comp.len();
    let fw = t.f.mul_vec(&t.w);
    let eta = CVector::new(comp.iter().map(|q| q.inner(&fw)).collect());
    let mut shifted = CMatrix::zeros(m, m);
    for (i, qi) in comp.iter().enumerate() {
        for (j, qj) in comp.iter().enumerate() {
            let g = qi.inner(&t.f.mul_vec(qj));
            shifted[(i, j)] = if i == j { t.a - g } else { -g };
        }
    }
    let y = if m == 0 {
        CVector::zeros(0)
    } else {
        shifted.solve(&eta).map_err(|e| match e {
            Error::Singular { pivot, .. } => Error::DegenerateSpectrum(format!(
                "a is (numerically) an eigenvalue of the compressed block, pivot {pivot:.3e}"
            )),
            other => other,
        })?
    };
    let mut xi = t.w.clone();
    for (q, c) in comp.iter().zip(&y.0) {
        xi = xi.axpy(*c, q);
    }
    let residual = (&t.f.mul_vec(&xi) - &xi.scale(t.a)).norm();
    if residual > 1e-9 * t.a.norm() * xi.norm() {
        return Err(Error::DegenerateSpectrum(format!(
            "principal vector residual {residual:.3e} too large"
        )));
    }
    Ok(xi)
}

/// Threshold on `|det(a_0 I − G)|` below which `a_0` is treated as repeated.
pub const MULTIPLICITY_TOL: f64 = 1e-12;

/// `v = e_0 + (a_0 I − G)^{-1} (a_2, a_4, …, a_{2D−2}, 0, …)ᵀ`, where `G` is
/// the low-pass slanted matrix with its first row and column removed.
pub fn filter_principal_vector(fb: &FilterBank) -> Result<CVector> {
    let f0 = fb.lowpass_matrix();
    let d = f0.rows();
    let a0 = fb.first();
    let g = f0.trailing_block(1);
    let mut shifted = g.scale(C64::new(-1.0, 0.0));
    for i in 0..d - 1 {
        shifted[(i, i)] += a0;
    }
    if d > 1 {
        let p = shifted.determinant()?;
        if p.norm() < MULTIPLICITY_TOL {
            return Err(Error::Multiplicity(p.norm()));
        }
    }
    // first column of F0 below the corner: a2, a4, ..., then zeros
    let rhs = CVector::new((1..d).map(|i| f0[(i, 0)]).collect());
    let y = if d > 1 {
        shifted.solve(&rhs)?
    } else {
        CVector::zeros(0)
    };
    let mut v = CVector::zeros(d);
    v[0] = C64::new(1.0, 0.0);
    for i in 1..d {
        v[i] = y[i - 1];
    }
    Ok(v)
}

/// `y_n = a^{-n} F^n x` for `n = 0..=n_max`, computed by repeated division
/// with overflow rescaling.
fn normalized_powers(t: &DominantTriple, x: &CVector, n_max: usize) -> Vec<CVector> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut y = x.clone();
    let mut log_scale = 0.0f64;
    let inv_a = C64::new(1.0, 0.0) / t.a;
    out.push(y.clone());
    for _ in 0..n_max {
        y = t.f.mul_vec(&y).scale(inv_a);
        let n = y.norm();
        if n > 1e200 {
            y = y.scale_real(1.0 / n);
            log_scale += n.ln();
        }
        out.push(if log_scale == 0.0 {
            y.clone()
        } else {
            y.scale_real(log_scale.exp())
        });
    }
    out
}

fn check_x(t: &DominantTriple, x: &CVector) -> Result<()> {
    if x.dim() != t.dim() {
        return Err(Error::Dimension(format!(
            "vector of length {} for a {}-dimensional matrix",
            x.dim(),
            t.dim()
        )));
    }
    Ok(())
}

/// `‖a^{-n} F^n x − <w|x> ξ‖`
pub fn power_limit_error(t: &DominantTriple, x: &CVector, n: usize) -> Result<f64> {
    Ok(*power_limit_errors(t, x, n)?.last().expect("n + 1 entries"))
}

/// [`power_limit_error`] for every `n` in `0..=n_max`.
pub fn power_limit_errors(t: &DominantTriple, x: &CVector, n_max: usize) -> Result<Vec<f64>> {
    check_x(t, x)?;
    let xi = principal_right_vector(t)?;
    let limit = xi.scale(t.w.inner(x));
    Ok(normalized_powers(t, x, n_max)
        .iter()
        .map(|y| (y - &limit).norm())
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeCheck {
    pub passed: bool,
    /// Constant fitted at `n = 1`.
    pub fitted_c: f64,
    pub gap: f64,
    pub degree: usize,
    /// Largest `error(n) / envelope(n)` seen; at most 1.1 when passed.
    pub worst_ratio: f64,
    pub errors: Vec<f64>,
}

/// Relative slack allowed over the fitted envelope.
pub const ENVELOPE_SLACK: f64 = 0.10;

/// Checks `error(n) ≤ C n^{d−1} ρ^n` for `n ∈ [1, n_max]` with `C` fitted at
/// `n = 1`.
pub fn rate_envelope_check(t: &DominantTriple, x: &CVector, n_max: usize) -> Result<EnvelopeCheck> {
    rate_envelope_check_with_degree(t, x, n_max, t.dim().saturating_sub(1))
}

/// As [`rate_envelope_check`] with an explicit polynomial degree.
pub fn rate_envelope_check_with_degree(
    t: &DominantTriple,
    x: &CVector,
    n_max: usize,
    degree: usize,
) -> Result<EnvelopeCheck> {
    let errors = power_limit_errors(t, x, n_max.max(1))?;
    let xi = principal_right_vector(t)?;
    // roundoff floor of the computed error
    let floor = 64.0 * f64::EPSILON * (x.norm() + t.w.inner(x).norm() * xi.norm());
    let gap = t.gap;
    let fitted_c = if gap > 0.0 { errors[1] / gap } else { 0.0 };
    let mut worst: f64 = 0.0;
    let mut passed = true;
    for (n, &e) in errors.iter().enumerate().skip(1) {
        let envelope = fitted_c * (n as f64).powi(degree as i32) * gap.powi(n as i32);
        let bound = (1.0 + ENVELOPE_SLACK) * envelope + floor;
        if e > bound {
            passed = false;
        }
        if envelope > 0.0 {
            worst = worst.max(e / envelope);
        } else if e > floor {
            worst = f64::INFINITY;
        }
    }
    Ok(EnvelopeCheck {
        passed,
        fitted_c,
        gap,
        degree,
        worst_ratio: worst,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::taps_from_beta;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn diagonal_triple() {
        let f = CMatrix::from_diagonal(&[re(2.0), re(0.5)]);
        let t = DominantTriple::new(f, re(2.0), CVector::basis(2, 0)).unwrap();
        let xi = principal_right_vector(&t).unwrap();
        assert!((&xi - &CVector::basis(2, 0)).norm() < 1e-15);
        assert!((t.spectral_gap() - 0.25).abs() < 1e-15);

        let x = CVector::from_real(&[3.0, 4.0]);
        for n in [0, 1, 5, 20] {
            let e = power_limit_error(&t, &x, n).unwrap();
            let want = 4.0 * 0.25f64.powi(n as i32);
            assert!((e - want).abs() <= 1e-15 * want.max(1e-300) + 1e-300, "n={n}: {e} vs {want}");
        }
    }

    #[test]
    fn lower_triangular_triple() {
        let f = CMatrix::from_real_rows(&[&[1.0, 0.0], &[1.0, 0.5]]);
        let t = DominantTriple::new(f, re(1.0), CVector::basis(2, 0)).unwrap();
        let xi = principal_right_vector(&t).unwrap();
        assert!((&xi - &CVector::from_real(&[1.0, 2.0])).norm() < 1e-14);
    }

    #[test]
    fn rejects_bad_left_vector() {
        let f = CMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 0.5]]);
        assert!(matches!(
            DominantTriple::new(f, re(1.0), CVector::basis(2, 0)),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn rejects_missing_gap() {
        let f = CMatrix::from_diagonal(&[re(1.0), re(-1.0)]);
        assert!(matches!(
            DominantTriple::new(f, re(1.0), CVector::basis(2, 0)),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn filter_vector_beta_point_three() {
        let fb = taps_from_beta(0.3);
        let v = filter_principal_vector(&fb).unwrap();
        assert!((v[0] - re(1.0)).norm() < 1e-15);
        assert!((v[1].re + 0.822776).abs() < 5e-5);
        assert!((v[2].re + 0.177238).abs() < 5e-5);

        let t = DominantTriple::new(fb.lowpass_matrix(), fb.first(), CVector::basis(3, 0)).unwrap();
        let xi = principal_right_vector(&t).unwrap();
        assert!((&xi - &v).norm() < 1e-10);
    }

    #[test]
    fn filter_vector_with_zero_inhomogeneity() {
        // a2 = 0: the corner column below a0 vanishes
        let fb = taps_from_beta(std::f64::consts::FRAC_PI_4 * 0.999);
        let mut taps: Vec<C64> = fb.taps().to_vec();
        taps[2] = re(0.0);
        let fb = FilterBank::new(taps).unwrap();
        let v = filter_principal_vector(&fb).unwrap();
        assert!((&v - &CVector::basis(3, 0)).norm() < 1e-15);
    }

    #[test]
    fn repeated_root_is_rejected() {
        // Haar: a0 = 1/sqrt2 is also an eigenvalue of G
        let fb = taps_from_beta(std::f64::consts::FRAC_PI_4);
        assert!(matches!(
            filter_principal_vector(&fb),
            Err(Error::Multiplicity(_))
        ));
    }

    #[test]
    fn jordan_witness_needs_polynomial_factor() {
        let f = CMatrix::from_real_rows(&[&[0.5, 1.0, 0.0], &[0.0, 0.5, 0.0], &[0.0, 0.0, 2.0]]);
        let t = DominantTriple::new(f, re(2.0), CVector::basis(3, 2)).unwrap();
        let x = CVector::from_real(&[0.0, 1.0, 1.0]);
        let full = rate_envelope_check(&t, &x, 40).unwrap();
        assert!(full.passed, "worst ratio {}", full.worst_ratio);
        let pure = rate_envelope_check_with_degree(&t, &x, 40, 0).unwrap();
        assert!(!pure.passed);
    }

    #[test]
    fn subdominant_eigenvector_error() {
        // x orthogonal to w and an eigenvector for s: error = |s/a|^n ‖x‖
        let f = CMatrix::from_real_rows(&[&[2.0, 0.0], &[1.0, 0.5]]);
        let t = DominantTriple::new(f.clone(), re(2.0), CVector::basis(2, 0)).unwrap();
        let x = CVector::from_real(&[0.0, 3.0]);
        assert!((&f.mul_vec(&x) - &x.scale_real(0.5)).norm() < 1e-15);
        for n in [1, 7, 30] {
            let e = power_limit_error(&t, &x, n).unwrap();
            let want = 3.0 * 0.25f64.powi(n as i32);
            assert!((e - want).abs() < 1e-14 * want + 1e-300);
        }
    }
}
