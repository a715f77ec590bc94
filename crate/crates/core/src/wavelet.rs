//! Scaling functions, wavelets and wavelet packets sampled on dyadic grids.
//!
//! The scaling function solves `φ(x) = √2 Σ a_k φ(2x − k)` with `∫φ = 1`
//! and lives on `[0, 2D−1]`. On the grid `x_m = m·2^{-J}` the right-hand
//! side only needs `φ` at `x_{2m − k·2^J}`, so the cascade iteration stays
//! on one grid. Starting from the indicator of `[0, 1)` it is run until the
//! sup change falls below a tolerance, at which point the samples are the
//! exact values of `φ` at the dyadic points (up to rounding).
//!
//! Integrals use the cell rule `h Σ_{m < M} f(x_m)` over the half-open cells
//! `[x_m, x_{m+1})`. For continuous `f` vanishing at the ends this equals the
//! trapezoid rule; for the Haar indicator it is exact.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::{classify_region, Region};
use crate::filter::FilterBank;
use crate::fmt_f64;
use crate::par;

pub const MAX_DEPTH: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CascadeWarning {
    /// The sup distance between successive iterates did not decrease over
    /// the last four iterations.
    Divergent { recent_changes: Vec<f64> },
    /// Still shrinking when the iteration cap was hit.
    Unconverged { last_change: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicFunction {
    depth: usize,
    /// Right end `2D − 1` of the support.
    support: usize,
    samples: Vec<f64>,
    taps: FilterBank,
    iterations: usize,
    warning: Option<CascadeWarning>,
    excluded_parameter: bool,
}

fn grid_len(support: usize, depth: usize) -> usize {
    (support << depth) + 1
}

impl DyadicFunction {
    /// Wraps raw samples on the grid of `fb` at the given depth.
    pub fn from_samples(fb: &FilterBank, depth: usize, samples: Vec<f64>) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::Domain(format!("depth {depth} exceeds {MAX_DEPTH}")));
        }
        let support = fb.len() - 1;
        if samples.len() != grid_len(support, depth) {
            return Err(Error::GridMismatch(format!(
                "{} samples for support [0, {support}] at depth {depth}",
                samples.len()
            )));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("samples must be finite".into()));
        }
        Ok(DyadicFunction {
            depth,
            support,
            samples,
            taps: fb.clone(),
            iterations: 0,
            warning: None,
            excluded_parameter: excluded(fb),
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn taps(&self) -> &FilterBank {
        &self.taps
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn warning(&self) -> Option<&CascadeWarning> {
        self.warning.as_ref()
    }

    /// Whether the filter's angle is one of `±π/4`, `±3π/4`, where the
    /// integer translates of `φ` are not orthonormal.
    pub fn excluded_parameter(&self) -> bool {
        self.excluded_parameter
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (1u64 << self.depth) as f64
    }

    pub fn x(&self, m: usize) -> f64 {
        m as f64 * self.spacing()
    }

    /// Number of cells `[x_m, x_{m+1})` covering the support.
    fn cells(&self) -> usize {
        self.samples.len() - 1
    }

    /// Sample at index `m`, zero outside the grid.
    fn at(&self, m: i64) -> f64 {
        if m < 0 {
            0.0
        } else {
            self.samples.get(m as usize).copied().unwrap_or(0.0)
        }
    }

    pub fn integral(&self) -> f64 {
        self.spacing() * self.samples[..self.cells()].iter().sum::<f64>()
    }

    /// `∫ f(x) g(x − k) dx` by the cell rule.
    pub fn shifted_inner(&self, other: &DyadicFunction, k: i64) -> Result<f64> {
        self.check_grid(other)?;
        let step = k * (1i64 << self.depth);
        let sum: f64 = (0..self.cells())
            .map(|m| self.samples[m] * other.at(m as i64 - step))
            .sum();
        Ok(self.spacing() * sum)
    }

    fn check_grid(&self, other: &DyadicFunction) -> Result<()> {
        if self.depth != other.depth || self.support != other.support {
            return Err(Error::GridMismatch(format!(
                "depth {} support {} against depth {} support {}",
                self.depth, self.support, other.depth, other.support
            )));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &DyadicFunction) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Samples of `self` at the points of a grid `levels` steps coarser.
    pub fn coarsen(&self, levels: usize) -> Result<DyadicFunction> {
        if levels > self.depth {
            return Err(Error::GridMismatch(format!(
                "cannot coarsen depth {} by {levels}",
                self.depth
            )));
        }
        let mut out = self.clone();
        out.depth -= levels;
        out.samples = self.samples.iter().step_by(1 << levels).copied().collect();
        Ok(out)
    }
}

fn excluded(fb: &FilterBank) -> bool {
    fb.beta().is_some_and(|b| classify_region(b) == Region::Boundary)
}

#[derive(Clone, Debug)]
pub struct CascadeOptions {
    /// Stop once the sup change between iterates is at or below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        CascadeOptions {
            tolerance: 1e-12,
            max_iterations: 200,
        }
    }
}

/// Refinement coefficients `√2 c_k`, computed as `2 c_k / Σ a_j` so that the
/// low-pass ones sum to exactly 2.
fn refinement_coefficients(fb: &FilterBank, taps: &[crate::linalg::C64]) -> Result<Vec<f64>> {
    if !fb.is_real() {
        return Err(Error::Domain("the cascade needs real taps".into()));
    }
    let r = fb.residuals();
    if !r.is_valid(1e-10) {
        return Err(Error::Validation {
            residual: r.qmf_residual.max(r.sum_residual),
            tolerance: 1e-10,
        });
    }
    let sum: f64 = fb.taps().iter().map(|z| z.re).sum();
    Ok(taps.iter().map(|z| 2.0 * z.re / sum).collect())
}

/// `(T f)(x_m) = Σ_k c_k f(x_{2m − k·2^J})`
fn refine(f: &DyadicFunction, coeffs: &[f64]) -> Vec<f64> {
    let step = 1i64 << f.depth;
    par::map_range(0..f.samples.len(), |m| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * f.at(2 * m as i64 - k as i64 * step))
            .sum()
    })
}

fn sup_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Scaling function by the cascade algorithm with default options.
pub fn cascade_phi(fb: &FilterBank, depth: usize) -> Result<DyadicFunction> {
    cascade_phi_with(fb, depth, &CascadeOptions::default())
}

/// Runs at least `depth` cascade steps and then continues until the sup
/// change drops to `opts.tolerance`, the change stops decreasing for four
/// steps, or the iteration cap is hit. The result is normalized to unit
/// integral.
pub fn cascade_phi_with(fb: &FilterBank, depth: usize, opts: &CascadeOptions) -> Result<DyadicFunction> {
    let coeffs = refinement_coefficients(fb, fb.taps())?;
    let len = grid_len(fb.len() - 1, depth.min(MAX_DEPTH));
    let one = 1usize << depth.min(MAX_DEPTH);
    let init: Vec<f64> = (0..len).map(|m| if m < one { 1.0 } else { 0.0 }).collect();
    let mut f = DyadicFunction::from_samples(fb, depth, init)?;
    let mut changes: Vec<f64> = Vec::new();
    let cap = opts.max_iterations.max(depth);
    let mut warning = None;
    let mut converged = false;
    for it in 1..=cap {
        let next = refine(&f, &coeffs);
        let change = sup_change(&next, &f.samples);
        f.samples = next;
        f.iterations = it;
        changes.push(change);
        if it < depth {
            continue;
        }
        if change <= opts.tolerance {
            converged = true;
            break;
        }
        let n = changes.len();
        if n >= 5 && changes[n - 5..].windows(2).all(|w| w[1] >= w[0]) {
            warning = Some(CascadeWarning::Divergent {
                recent_changes: changes[n - 4..].to_vec(),
            });
            break;
        }
    }
    if !converged && warning.is_none() {
        warning = Some(CascadeWarning::Unconverged {
            last_change: *changes.last().unwrap_or(&f64::NAN),
        });
    }
    let integral = f.integral();
    if !integral.is_finite() || integral.abs() <= 1e-300 {
        return Err(Error::Domain(format!("cascade integral degenerated to {integral}")));
    }
    for x in &mut f.samples {
        *x /= integral;
    }
    f.warning = warning;
    Ok(f)
}

fn check_origin(fb: &FilterBank, f: &DyadicFunction) -> Result<()> {
    if f.taps != *fb || f.support != fb.len() - 1 {
        return Err(Error::GridMismatch(
            "function was built from a different filter".into(),
        ));
    }
    Ok(())
}

/// `ψ(x) = √2 Σ b_k φ(2x − k)` with the high-pass taps `b_k`.
pub fn wavelet_psi(fb: &FilterBank, phi: &DyadicFunction) -> Result<DyadicFunction> {
    check_origin(fb, phi)?;
    let coeffs = refinement_coefficients(fb, &fb.highpass().taps)?;
    let mut out = phi.clone();
    out.samples = refine(phi, &coeffs);
    Ok(out)
}

pub const MAX_PACKET: usize = 1 << 16;

/// Wavelet packet `φ_n`: `φ_0 = φ`, `φ_{2n} = √2 Σ a_k φ_n(2· − k)` and
/// `φ_{2n+1} = √2 Σ b_k φ_n(2· − k)`. All packets share the grid and the
/// support `[0, 2D−1]` of `φ`.
pub fn packet(fb: &FilterBank, n: usize, depth: usize) -> Result<DyadicFunction> {
    let phi = cascade_phi(fb, depth)?;
    packet_from(fb, &phi, n)
}

/// [`packet`] starting from an already computed scaling function.
pub fn packet_from(fb: &FilterBank, phi: &DyadicFunction, n: usize) -> Result<DyadicFunction> {
    if n >= MAX_PACKET {
        return Err(Error::Domain(format!("packet index {n} must be below {MAX_PACKET}")));
    }
    check_origin(fb, phi)?;
    let low = refinement_coefficients(fb, fb.taps())?;
    let high = refinement_coefficients(fb, &fb.highpass().taps)?;
    let mut f = phi.clone();
    if n == 0 {
        return Ok(f);
    }
    let bits = usize::BITS - n.leading_zeros();
    for b in (0..bits).rev() {
        let coeffs = if (n >> b) & 1 == 1 { &high } else { &low };
        f.samples = refine(&f, coeffs);
    }
    Ok(f)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OrthoReport {
    /// `max(|∫f² − 1|, max_{1≤|k|≤K} |∫ f(x) f(x−k) dx|)`
    pub shift_residual: f64,
    /// `∫ f`
    pub moment: f64,
}

/// Minimum grid depth for the quadrature checks.
pub const MIN_QUADRATURE_DEPTH: usize = 8;

pub fn orthonormality_and_moments(f: &DyadicFunction, max_shift: usize) -> Result<OrthoReport> {
    if f.depth < MIN_QUADRATURE_DEPTH {
        return Err(Error::Domain(format!(
            "depth {} below {MIN_QUADRATURE_DEPTH}",
            f.depth
        )));
    }
    let mut residual = (f.shifted_inner(f, 0)? - 1.0).abs();
    for k in 1..=max_shift as i64 {
        // ∫ f(x) f(x+k) equals ∫ f(x) f(x−k), so one sign suffices
        residual = residual.max(f.shifted_inner(f, k)?.abs());
    }
    Ok(OrthoReport {
        shift_residual: residual,
        moment: f.integral(),
    })
}

/// `max |Σ_j φ(x − j) − 1|` over grid points of `[0, 1)`.
pub fn partition_of_unity_defect(phi: &DyadicFunction) -> f64 {
    let one = 1usize << phi.depth;
    (0..one)
        .map(|m| {
            let s: f64 = (0..phi.support).map(|j| phi.samples[m + j * one]).sum();
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// `sup |φ(x_m) − √2 Σ a_k φ(x_{2m − k·2^J})|`
pub fn refinement_defect(fb: &FilterBank, phi: &DyadicFunction) -> Result<f64> {
    check_origin(fb, phi)?;
    let coeffs = refinement_coefficients(fb, fb.taps())?;
    Ok(sup_change(&refine(phi, &coeffs), &phi.samples))
}

/// Writes `x,phi,psi` rows.
pub fn write_csv<W: Write>(phi: &DyadicFunction, psi: &DyadicFunction, out: W) -> Result<()> {
    phi.check_grid(psi)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "phi", "psi"])?;
    for m in 0..phi.samples.len() {
        w.write_record([fmt_f64(phi.x(m)), fmt_f64(phi.samples[m]), fmt_f64(psi.samples[m])])?;
    }
    w.flush()?;
    Ok(())
}
