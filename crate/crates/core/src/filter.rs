//! Quadrature-mirror filter taps, the one-parameter family of four-tap
//! filters, slanted Toeplitz matrices, and the downsampled convolution
//! operators on finitely supported sequences.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Centre coordinate `1/(2√2)` of the circle carrying the tap pairs.
pub const CIRCLE_CENTER: f64 = 0.25 * SQRT_2;

/// Low-pass taps `a_0 … a_{2D-1}`, optionally generated from an angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FilterBankRepr", into = "FilterBankRepr")]
pub struct FilterBank {
    taps: Vec<C64>,
    beta: Option<f64>,
}

/// JSON form: either `{"beta": b}` or an array of `[re, im]` pairs.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FilterBankRepr {
    Beta { beta: f64 },
    Taps(Vec<[f64; 2]>),
}

impl TryFrom<FilterBankRepr> for FilterBank {
    type Error = Error;
    fn try_from(repr: FilterBankRepr) -> Result<Self> {
        match repr {
            FilterBankRepr::Beta { beta } => {
                if !beta.is_finite() {
                    return Err(Error::Domain("beta must be finite".into()));
                }
                Ok(taps_from_beta(beta))
            }
            FilterBankRepr::Taps(pairs) => {
                FilterBank::new(pairs.iter().map(|p| C64::new(p[0], p[1])).collect())
            }
        }
    }
}

impl From<FilterBank> for FilterBankRepr {
    fn from(fb: FilterBank) -> Self {
        match fb.beta {
            Some(beta) => FilterBankRepr::Beta { beta },
            None => FilterBankRepr::Taps(fb.taps.iter().map(|z| [z.re, z.im]).collect()),
        }
    }
}

/// Orthogonality and normalization residuals of a tap sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TapResiduals {
    /// `max_k |Σ_j conj(a_j) a_{j+2k} − δ_{0,k}|`
    pub qmf_residual: f64,
    /// `|Σ_j a_j − √2|`
    pub sum_residual: f64,
}

impl TapResiduals {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.qmf_residual <= tol && self.sum_residual <= tol
    }
}

impl FilterBank {
    pub fn new(taps: Vec<C64>) -> Result<Self> {
        if taps.len() < 2 || !taps.len().is_multiple_of(2) {
            return Err(Error::OddTapLength(taps.len()));
        }
        if taps.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Domain("taps must be finite".into()));
        }
        Ok(FilterBank { taps, beta: None })
    }

    pub fn from_real(taps: &[f64]) -> Result<Self> {
        Self::new(taps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Two-tap Haar filter `(1/√2, 1/√2)`.
    pub fn haar() -> Self {
        FilterBank {
            taps: vec![C64::new(FRAC_1_SQRT_2, 0.0); 2],
            beta: None,
        }
    }

    /// Daubechies four-tap filter, the member `β = 5π/12` of the family.
    pub fn daubechies4() -> Self {
        taps_from_beta(5.0 * PI / 12.0)
    }

    pub fn taps(&self) -> &[C64] {
        &self.taps
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    /// Number of taps, `2D`.
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// `D`, half the number of taps.
    pub fn half_len(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn first(&self) -> C64 {
        self.taps[0]
    }

    pub fn last(&self) -> C64 {
        self.taps[self.taps.len() - 1]
    }

    pub fn is_real(&self) -> bool {
        self.taps.iter().all(|z| z.im == 0.0)
    }

    /// Tap `a_i`, zero outside `0..2D`.
    pub fn tap(&self, i: i64) -> C64 {
        if i < 0 {
            ZERO
        } else {
            self.taps.get(i as usize).copied().unwrap_or(ZERO)
        }
    }

    pub fn residuals(&self) -> TapResiduals {
        tap_residuals(&self.taps)
    }

    pub fn highpass(&self) -> HighPassTaps {
        highpass_taps(self)
    }

    /// `F_0`, the slanted matrix of the low-pass taps.
    pub fn lowpass_matrix(&self) -> CMatrix {
        slanted_matrix(&self.taps)
    }

    /// `F_1`, the slanted matrix of the high-pass taps.
    pub fn highpass_matrix(&self) -> CMatrix {
        slanted_matrix(&self.highpass().taps)
    }
}

/// The four taps determined by the angle `beta`.
pub fn taps_from_beta(beta: f64) -> FilterBank {
    let (s, c) = beta.sin_cos();
    let k = 1.0 / (2.0 * SQRT_2);
    let taps = [
        k * (1.0 + SQRT_2 * c),
        k * (1.0 + SQRT_2 * s),
        k * (1.0 - SQRT_2 * c),
        k * (1.0 - SQRT_2 * s),
    ];
    FilterBank {
        taps: taps.iter().map(|&x| C64::new(x, 0.0)).collect(),
        beta: Some(beta),
    }
}

/// Residuals of the orthogonality condition and of the `√2` sum rule.
pub fn validate_taps(taps: &[C64]) -> Result<TapResiduals> {
    if taps.len() < 2 || !taps.len().is_multiple_of(2) {
        return Err(Error::OddTapLength(taps.len()));
    }
    Ok(tap_residuals(taps))
}

fn tap_residuals(taps: &[C64]) -> TapResiduals {
    let n = taps.len();
    let mut qmf: f64 = 0.0;
    for k in 0..n.div_ceil(2) {
        let shift = 2 * k;
        let s: C64 = (0..n.saturating_sub(shift))
            .map(|j| taps[j].conj() * taps[j + shift])
            .sum();
        let target = if k == 0 { 1.0 } else { 0.0 };
        qmf = qmf.max((s - target).norm());
    }
    let sum: C64 = taps.iter().sum();
    TapResiduals {
        qmf_residual: qmf,
        sum_residual: (sum - SQRT_2).norm(),
    }
}

/// High-pass taps `b_k = (−1)^k conj(a_{2D−1−k})`.
#[derive(Clone, Debug, PartialEq)]
pub struct HighPassTaps {
    pub taps: Vec<C64>,
}

pub fn highpass_taps(fb: &FilterBank) -> HighPassTaps {
    let n = fb.len();
    let taps = (0..n)
        .map(|k| {
            let z = fb.taps[n - 1 - k].conj();
            if k % 2 == 0 {
                z
            } else {
                -z
            }
        })
        .collect();
    HighPassTaps { taps }
}

/// The `(2D−1)×(2D−1)` slanted Toeplitz matrix with entry `(r, c)` equal to
/// `taps[2r − c]` (zero-based), zero when the index leaves the tap range.
pub fn slanted_matrix(taps: &[C64]) -> CMatrix {
    let dim = taps.len().saturating_sub(1);
    let mut m = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let idx = 2 * r as i64 - c as i64;
            if idx >= 0 && (idx as usize) < taps.len() {
                m[(r, c)] = taps[idx as usize];
            }
        }
    }
    m
}

/// Region of the angle parameter where `α = max(a_0², a_3²)` exceeds ½.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// `|β| < π/4`, where `α = a_0²`
    I,
    /// `−3π/4 < β < −π/4`, where `α = a_3²`
    II,
    Boundary,
    Neither,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::I => "i",
            Region::II => "ii",
            Region::Boundary => "boundary",
            Region::Neither => "neither",
        })
    }
}

const BOUNDARY_TOL: f64 = 1e-12;

/// Maps an angle into `(−π, π]`.
pub fn normalize_beta(beta: f64) -> f64 {
    let b = beta.rem_euclid(2.0 * PI);
    if b > PI {
        b - 2.0 * PI
    } else {
        b
    }
}

pub fn classify_region(beta: f64) -> Region {
    let b = normalize_beta(beta);
    let q = PI / 4.0;
    if [q, -q, 3.0 * q, -3.0 * q]
        .iter()
        .any(|&p| (b - p).abs() <= BOUNDARY_TOL)
    {
        return Region::Boundary;
    }
    if b.abs() < q {
        Region::I
    } else if b > -3.0 * q && b < -q {
        Region::II
    } else {
        Region::Neither
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BetaDiagnostics {
    pub beta: f64,
    pub taps: [f64; 4],
    pub alpha: f64,
    /// `log2(1/α)`
    pub s: f64,
    /// Residual of the `(a_0, a_3)` pair on the circle.
    pub circle_residual: f64,
    /// Residuals for the pairs `(a_0, a_1)`, `(a_0, a_3)`, `(a_1, a_2)`.
    pub circle_residuals: [f64; 3],
    pub region: Region,
    /// `{a_0, 1/√2, λ}` where `λ = (sin β − cos β)/2`.
    pub closed_form_spectrum: [f64; 3],
    pub lambda: f64,
    /// `a_0 > 1/√2 > |λ|`
    pub dominance_ok: bool,
}

fn circle_residual(x: f64, y: f64) -> f64 {
    ((x - CIRCLE_CENTER).powi(2) + (y - CIRCLE_CENTER).powi(2) - 0.25).abs()
}

pub fn beta_diagnostics(beta: f64) -> BetaDiagnostics {
    let fb = taps_from_beta(beta);
    let a: [f64; 4] = [fb.taps[0].re, fb.taps[1].re, fb.taps[2].re, fb.taps[3].re];
    let alpha = (a[0] * a[0]).max(a[3] * a[3]);
    let (s_b, c_b) = beta.sin_cos();
    let lambda = 0.5 * (s_b - c_b);
    let circle = [
        circle_residual(a[0], a[1]),
        circle_residual(a[0], a[3]),
        circle_residual(a[1], a[2]),
    ];
    BetaDiagnostics {
        beta,
        taps: a,
        alpha,
        s: -alpha.ln() / std::f64::consts::LN_2,
        circle_residual: circle[1],
        circle_residuals: circle,
        region: classify_region(beta),
        closed_form_spectrum: [a[0], FRAC_1_SQRT_2, lambda],
        lambda,
        dominance_ok: a[0] > FRAC_1_SQRT_2 && FRAC_1_SQRT_2 > lambda.abs(),
    }
}

/// A finitely supported sequence indexed by the integers.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSequence {
    start: i64,
    values: Vec<C64>,
}

impl FiniteSequence {
    pub fn new(start: i64, values: Vec<C64>) -> Self {
        FiniteSequence { start, values }
    }

    pub fn zero() -> Self {
        FiniteSequence {
            start: 0,
            values: Vec::new(),
        }
    }

    pub fn delta(at: i64) -> Self {
        FiniteSequence {
            start: at,
            values: vec![C64::new(1.0, 0.0)],
        }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Last index of the stored window (inclusive); `None` when empty.
    pub fn end(&self) -> Option<i64> {
        if self.values.is_empty() {
            None
        } else {
            Some(self.start + self.values.len() as i64 - 1)
        }
    }

    pub fn get(&self, j: i64) -> C64 {
        let off = j - self.start;
        if off < 0 {
            ZERO
        } else {
            self.values.get(off as usize).copied().unwrap_or(ZERO)
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `<self|other>` over the integers.
    pub fn inner(&self, other: &FiniteSequence) -> C64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, z)| z.conj() * other.get(self.start + i as i64))
            .sum()
    }

    /// `sup_j |self_j − other_j|`
    pub fn max_abs_diff(&self, other: &FiniteSequence) -> f64 {
        let lo = self.start.min(other.start);
        let hi = self.end().max(other.end()).unwrap_or(lo - 1);
        (lo..=hi)
            .map(|j| (self.get(j) - other.get(j)).norm())
            .fold(0.0, f64::max)
    }

    fn build(lo: i64, hi: i64, f: impl Fn(i64) -> C64) -> Self {
        if hi < lo {
            return Self::zero();
        }
        FiniteSequence {
            start: lo,
            values: (lo..=hi).map(f).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Low,
    High,
}

fn sign(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn ceil_half(x: i64) -> i64 {
    -((-x).div_euclid(2))
}

/// Low: `y_j = Σ_k a_{2j−k} x_k`. High: `y_j = Σ_k (−1)^k conj(a_{1−2j+k}) x_k`.
pub fn ell2_apply(channel: Channel, fb: &FilterBank, x: &FiniteSequence) -> FiniteSequence {
    let Some(e) = x.end() else {
        return FiniteSequence::zero();
    };
    let s = x.start;
    let l = fb.len() as i64 - 1;
    let input = s..=e;
    match channel {
        Channel::Low => FiniteSequence::build(ceil_half(s), (e + l).div_euclid(2), |j| {
            input.clone().map(|k| fb.tap(2 * j - k) * x.get(k)).sum()
        }),
        Channel::High => FiniteSequence::build(ceil_half(s + 1 - l), (e + 1).div_euclid(2), |j| {
            input
                .clone()
                .map(|k| fb.tap(1 - 2 * j + k).conj() * sign(k) * x.get(k))
                .sum()
        }),
    }
}

/// Adjoint of [`ell2_apply`] for the `ℓ²` inner product.
pub fn ell2_adjoint_apply(channel: Channel, fb: &FilterBank, y: &FiniteSequence) -> FiniteSequence {
    let Some(e) = y.end() else {
        return FiniteSequence::zero();
    };
    let s = y.start;
    let l = fb.len() as i64 - 1;
    let input = s..=e;
    match channel {
        Channel::Low => FiniteSequence::build(2 * s - l, 2 * e, |k| {
            input.clone().map(|j| fb.tap(2 * j - k).conj() * y.get(j)).sum()
        }),
        Channel::High => FiniteSequence::build(2 * s - 1, 2 * e - 1 + l, |k| {
            input
                .clone()
                .map(|j| fb.tap(1 - 2 * j + k) * sign(k) * y.get(j))
                .sum()
        }),
    }
}
