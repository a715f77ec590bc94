//! Finite measurement systems: `N` operators `F_i` on `ℂ^d` with
//! `Σ F_i* F_i = I`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterBank;
use crate::linalg::{CMatrix, CVector, C64};

/// Operator-norm tolerance on `Σ F_i* F_i − I` for a validated system.
pub const ISOMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    /// `F_0 = I/√2`, `F_1 = diag(1, −1)/√2` on `ℂ²`; induces Lebesgue measure.
    Lebesgue2,
    /// Three operators on `ℂ³` inducing the middle-third Cantor measure.
    Cantor3,
}

impl FromStr for Builtin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lebesgue2" => Ok(Builtin::Lebesgue2),
            "cantor3" => Ok(Builtin::Cantor3),
            other => Err(Error::UnknownSystem(other.to_string())),
        }
    }
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Lebesgue2 => "lebesgue2",
            Builtin::Cantor3 => "cantor3",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementSystem {
    operators: Vec<CMatrix>,
    dim: usize,
    label: String,
    validated: bool,
}

impl MeasurementSystem {
    /// Builds a system and checks the column-isometry residual against
    /// [`ISOMETRY_TOL`].
    pub fn new(label: impl Into<String>, operators: Vec<CMatrix>) -> Result<Self> {
        let mut sys = Self::new_unchecked(label, operators)?;
        let residual = sys.column_isometry_residual()?;
        if residual > ISOMETRY_TOL {
            return Err(Error::Validation {
                residual,
                tolerance: ISOMETRY_TOL,
            });
        }
        sys.validated = true;
        Ok(sys)
    }

    /// Builds a system checking shapes only.
    pub fn new_unchecked(label: impl Into<String>, operators: Vec<CMatrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::Shape("a system needs at least one operator".into()))?;
        let dim = first.rows();
        if dim == 0 {
            return Err(Error::Shape("operators must have dimension >= 1".into()));
        }
        for (i, op) in operators.iter().enumerate() {
            if op.rows() != dim || op.cols() != dim {
                return Err(Error::Shape(format!(
                    "operator {i} is {}x{}, expected {dim}x{dim}",
                    op.rows(),
                    op.cols()
                )));
            }
        }
        Ok(MeasurementSystem {
            operators,
            dim,
            label: label.into(),
            validated: false,
        })
    }

    pub fn builtin(which: Builtin) -> Self {
        let h = FRAC_1_SQRT_2;
        let ops = match which {
            Builtin::Lebesgue2 => vec![
                CMatrix::from_real_rows(&[&[h, 0.0], &[0.0, h]]),
                CMatrix::from_real_rows(&[&[h, 0.0], &[0.0, -h]]),
            ],
            Builtin::Cantor3 => vec![
                CMatrix::from_real_rows(&[&[h, 0.0, 0.0], &[0.0, h, 0.0], &[0.0, 0.0, 0.0]]),
                CMatrix::from_real_rows(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]),
                CMatrix::from_real_rows(&[&[h, 0.0, 0.0], &[0.0, -h, 0.0], &[0.0, 0.0, 0.0]]),
            ],
        };
        Self::new(which.name(), ops).expect("builtin systems are column isometries")
    }

    pub fn builtin_by_name(name: &str) -> Result<Self> {
        Ok(Self::builtin(name.parse()?))
    }

    /// The pair `(F_0, F_1)` of slanted matrices built from low- and
    /// high-pass taps.
    pub fn from_filter_bank(fb: &FilterBank) -> Result<Self> {
        let label = match fb.beta() {
            Some(b) => format!("beta={b}"),
            None => format!("taps[{}]", fb.len()),
        };
        Self::new(label, vec![fb.lowpass_matrix(), fb.highpass_matrix()])
    }

    /// Alphabet size `N`.
    pub fn n(&self) -> usize {
        self.operators.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn operator(&self, i: usize) -> &CMatrix {
        &self.operators[i]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    /// Operator norm of `Σ F_i* F_i − I`.
    pub fn column_isometry_residual(&self) -> Result<f64> {
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for f in &self.operators {
            sum = &sum + &(&f.adjoint() * f);
        }
        (&sum - &CMatrix::identity(self.dim)).operator_norm()
    }

    /// `max_{i,j} ‖F_i F_j* − δ_ij I‖`
    pub fn cuntz_residual(&self) -> Result<f64> {
        let id = CMatrix::identity(self.dim);
        let zero = CMatrix::zeros(self.dim, self.dim);
        let mut worst: f64 = 0.0;
        for (i, fi) in self.operators.iter().enumerate() {
            for (j, fj) in self.operators.iter().enumerate() {
                let target = if i == j { &id } else { &zero };
                let r = (&(fi * &fj.adjoint()) - target).operator_norm()?;
                worst = worst.max(r);
            }
        }
        Ok(worst)
    }

    /// Outcome distribution `‖F_i ψ‖²` for a single measurement.
    pub fn outcome_probabilities(&self, psi: &PureState) -> Result<Vec<f64>> {
        self.check_state(psi)?;
        Ok(self
            .operators
            .iter()
            .map(|f| f.mul_vec(psi.vector()).norm_sqr())
            .collect())
    }

    pub(crate) fn check_state(&self, psi: &PureState) -> Result<()> {
        if psi.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "state has dimension {}, system has {}",
                psi.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Parses the JSON system format and validates the isometry residual.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(text)?;
        let (label, ops) = file.into_operators()?;
        Self::new(label, ops)
    }

    /// Parses the JSON system format, checking shapes only.
    pub fn from_json_unchecked(text: &str) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(text)?;
        let (label, ops) = file.into_operators()?;
        Self::new_unchecked(label, ops)
    }

    pub fn to_json(&self) -> String {
        let file = SystemFile {
            n: self.n(),
            dim: self.dim,
            label: self.label.clone(),
            operators: self
                .operators
                .iter()
                .map(|m| m.entries().iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("system serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct SystemFile {
    #[serde(rename = "N")]
    n: usize,
    dim: usize,
    #[serde(default)]
    label: String,
    operators: Vec<Vec<[f64; 2]>>,
}

impl SystemFile {
    fn into_operators(self) -> Result<(String, Vec<CMatrix>)> {
        if self.operators.len() != self.n {
            return Err(Error::Shape(format!(
                "N = {} but {} operators given",
                self.n,
                self.operators.len()
            )));
        }
        let ops = self
            .operators
            .into_iter()
            .enumerate()
            .map(|(i, entries)| {
                if entries.len() != self.dim * self.dim {
                    return Err(Error::Shape(format!(
                        "operator {i} has {} entries, expected {}",
                        entries.len(),
                        self.dim * self.dim
                    )));
                }
                CMatrix::new(
                    self.dim,
                    self.dim,
                    entries.iter().map(|p| C64::new(p[0], p[1])).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((self.label, ops))
    }
}

/// Tolerance on `‖ψ‖ − 1` for a pure state.
pub const UNIT_TOL: f64 = 1e-12;

/// A unit vector in `ℂ^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState(CVector);

impl PureState {
    pub fn new(v: CVector) -> Result<Self> {
        if !v.is_finite() || (v.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::Domain(format!(
                "state must have unit norm, got {}",
                v.norm()
            )));
        }
        Ok(PureState(v))
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalize(v: &CVector) -> Result<Self> {
        v.normalized()
            .map(PureState)
            .ok_or_else(|| Error::Domain("cannot normalize the zero vector".into()))
    }

    /// `e_index`.
    pub fn basis(dim: usize, index: usize) -> Self {
        PureState(CVector::basis(dim, index))
    }

    pub fn vector(&self) -> &CVector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}
