//! Cylinder sets over `Z_N`, the operator-valued measure they carry, its
//! scalar restrictions to pure states, and N-adic intervals of `[0, 1)`.
//!
//! A word `i_1 … i_k` names the cylinder of infinite sequences starting with
//! those digits and, geometrically, the interval `[ξ, ξ + N^{-k})` with
//! `ξ = Σ i_j N^{-j}`. The operator assigned to it is
//! `F_{i_1}* ⋯ F_{i_k}* F_{i_k} ⋯ F_{i_1}`: the first digit is applied
//! first. The operators do not commute in general, so the order matters.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::par;
use crate::system::{Builtin, MeasurementSystem, PureState};

/// Largest number of words an exhaustive level sum may visit.
pub const MAX_LEVEL_WORDS: usize = 1 << 20;

/// A running norm below this is reported as measure zero by the log routines.
pub const LOG_NORM_FLOOR: f64 = 1e-300;

/// Total outcome probability below which the sampler declares the state dead.
pub const DEAD_STATE_TOL: f64 = 1e-28;

const DIGIT_CHARS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// A finite word `i_1 … i_k` over the alphabet `{0, …, N−1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word {
    base: usize,
    digits: Vec<usize>,
}

impl Word {
    pub fn new(base: usize, digits: Vec<usize>) -> Result<Self> {
        if base == 0 {
            return Err(Error::Shape("alphabet size must be >= 1".into()));
        }
        if let Some(&d) = digits.iter().find(|&&d| d >= base) {
            return Err(Error::Shape(format!("digit {d} out of range for base {base}")));
        }
        Ok(Word { base, digits })
    }

    /// The empty word, whose cylinder is the whole sequence space.
    pub fn empty(base: usize) -> Self {
        Word {
            base,
            digits: Vec::new(),
        }
    }

    /// Parses a digit string such as `"0212"`.
    pub fn parse(text: &str, base: usize) -> Result<Self> {
        let digits = text
            .chars()
            .map(|c| {
                c.to_digit(36)
                    .map(|d| d as usize)
                    .ok_or_else(|| Error::Shape(format!("invalid digit `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(base, digits)
    }

    /// The word of length `level` whose base-N value is `index`.
    pub fn from_index(base: usize, level: usize, mut index: u128) -> Self {
        let mut digits = vec![0; level];
        for slot in digits.iter_mut().rev() {
            *slot = (index % base as u128) as usize;
            index /= base as u128;
        }
        Word { base, digits }
    }

    /// `self` followed by `n` copies of `digit`.
    pub fn extended(&self, digit: usize, n: usize) -> Self {
        assert!(digit < self.base, "digit out of range");
        let mut digits = self.digits.clone();
        digits.extend(std::iter::repeat_n(digit, n));
        Word {
            base: self.base,
            digits,
        }
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// Number of occurrences of `digit`.
    pub fn count(&self, digit: usize) -> usize {
        self.digits.iter().filter(|&&d| d == digit).count()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &d in &self.digits {
            write!(f, "{}", DIGIT_CHARS[d] as char)?;
        }
        Ok(())
    }
}

/// The interval `[numerator / N^level, (numerator + 1) / N^level)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct NAdicInterval {
    pub numerator: u128,
    pub level: usize,
    pub base: usize,
}

impl NAdicInterval {
    pub fn from_word(w: &Word) -> Result<Self> {
        let mut num: u128 = 0;
        for &d in &w.digits {
            num = num
                .checked_mul(w.base as u128)
                .and_then(|x| x.checked_add(d as u128))
                .ok_or_else(|| Error::Domain("interval numerator overflows u128".into()))?;
        }
        Ok(NAdicInterval {
            numerator: num,
            level: w.len(),
            base: w.base,
        })
    }

    pub fn to_word(&self) -> Word {
        Word::from_index(self.base, self.level, self.numerator)
    }

    fn denominator(&self) -> f64 {
        (self.base as u128)
            .checked_pow(self.level as u32)
            .map(|d| d as f64)
            .unwrap_or_else(|| (self.base as f64).powi(self.level as i32))
    }

    pub fn length(&self) -> f64 {
        1.0 / self.denominator()
    }

    pub fn left(&self) -> f64 {
        self.numerator as f64 / self.denominator()
    }

    pub fn right(&self) -> f64 {
        (self.numerator + 1) as f64 / self.denominator()
    }
}

pub fn word_to_interval(w: &Word) -> Result<NAdicInterval> {
    NAdicInterval::from_word(w)
}

fn check_alphabet(sys: &MeasurementSystem, w: &Word) -> Result<()> {
    if w.base != sys.n() {
        return Err(Error::Shape(format!(
            "word over {} letters used with a system of {} operators",
            w.base,
            sys.n()
        )));
    }
    Ok(())
}

/// `F_{i_k} ⋯ F_{i_1}`.
pub fn word_operator(sys: &MeasurementSystem, w: &Word) -> Result<CMatrix> {
    check_alphabet(sys, w)?;
    let mut acc = CMatrix::identity(sys.dim());
    for &d in &w.digits {
        acc = sys.operator(d) * &acc;
    }
    Ok(acc)
}

/// Positive semidefinite value `P(C(w))` of the operator measure.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMeasureValue(pub CMatrix);

impl OperatorMeasureValue {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// Checks Hermitian, PSD and norm bounds at tolerance `tol`.
    pub fn satisfies_invariants(&self, tol: f64) -> Result<bool> {
        let r = self.0.psd_residual()?;
        Ok(r.hermitian_defect <= tol
            && r.min_eigenvalue >= -tol
            && self.0.operator_norm()? <= 1.0 + tol)
    }
}

pub fn operator_measure(sys: &MeasurementSystem, w: &Word) -> Result<OperatorMeasureValue> {
    let a = word_operator(sys, w)?;
    Ok(OperatorMeasureValue(&a.adjoint() * &a))
}

fn apply_word(sys: &MeasurementSystem, psi: &PureState, w: &Word) -> Result<CVector> {
    check_alphabet(sys, w)?;
    sys.check_state(psi)?;
    let mut v = psi.vector().clone();
    for &d in &w.digits {
        v = sys.operator(d).mul_vec(&v);
    }
    Ok(v)
}

/// `μ_ψ(C(w)) = ‖F_{i_k} ⋯ F_{i_1} ψ‖²`, unclamped.
pub fn scalar_measure(sys: &MeasurementSystem, psi: &PureState, w: &Word) -> Result<f64> {
    Ok(apply_word(sys, psi, w)?.norm_sqr())
}

/// Clamps a measure value into `[0, 1]` for display.
pub fn clamp_measure(m: f64) -> f64 {
    m.clamp(0.0, 1.0)
}

/// A normalized state together with the log of the mass it has carried so
/// far. Extending by one digit costs one matrix-vector product.
#[derive(Clone, Debug)]
pub struct LogState {
    state: CVector,
    log_mass: f64,
}

impl LogState {
    pub fn start(psi: &PureState) -> Self {
        LogState {
            state: psi.vector().clone(),
            log_mass: 0.0,
        }
    }

    /// Natural log of the measure accumulated so far (`−∞` for zero).
    pub fn log_mass(&self) -> f64 {
        self.log_mass
    }

    pub fn is_dead(&self) -> bool {
        self.log_mass == f64::NEG_INFINITY
    }

    pub fn step(&self, sys: &MeasurementSystem, digit: usize) -> LogState {
        if self.is_dead() {
            return self.clone();
        }
        let next = sys.operator(digit).mul_vec(&self.state);
        let norm = next.norm();
        let log_mass = self.log_mass + 2.0 * norm.ln();
        if norm == 0.0 || !norm.is_finite() || 0.5 * log_mass < LOG_NORM_FLOOR.ln() {
            return LogState {
                state: next,
                log_mass: f64::NEG_INFINITY,
            };
        }
        LogState {
            state: next.scale_real(1.0 / norm),
            log_mass,
        }
    }
}

/// Natural log of `μ_ψ(C(w))`, accumulated with renormalization after each
/// digit so that deep words do not underflow.
pub fn log_scalar_measure(sys: &MeasurementSystem, psi: &PureState, w: &Word) -> Result<f64> {
    check_alphabet(sys, w)?;
    sys.check_state(psi)?;
    let mut s = LogState::start(psi);
    for &d in &w.digits {
        s = s.step(sys, d);
        if s.is_dead() {
            break;
        }
    }
    Ok(s.log_mass)
}

/// `‖P(C(w)) − Σ_j P(C(w j))‖`
pub fn consistency_residual(sys: &MeasurementSystem, w: &Word) -> Result<f64> {
    let parent = operator_measure(sys, w)?;
    let a = word_operator(sys, w)?;
    let mut children = CMatrix::zeros(sys.dim(), sys.dim());
    for f in sys.operators() {
        let b = f * &a;
        children = &children + &(&b.adjoint() * &b);
    }
    (&parent.0 - &children).operator_norm()
}

fn check_level(base: usize, level: usize, limit: usize) -> Result<usize> {
    let words = (base as f64).powi(level as i32);
    if words > limit as f64 {
        return Err(Error::LevelTooDeep {
            level,
            words,
            limit,
        });
    }
    Ok(words as usize)
}

fn subtree_sum(sys: &MeasurementSystem, prefix: &CMatrix, remaining: usize) -> CMatrix {
    if remaining == 0 {
        return &prefix.adjoint() * prefix;
    }
    let mut sum = CMatrix::zeros(sys.dim(), sys.dim());
    for f in sys.operators() {
        sum = &sum + &subtree_sum(sys, &(f * prefix), remaining - 1);
    }
    sum
}

/// `‖Σ_{|w| = k} P(C(w)) − I‖`, summed exhaustively.
pub fn partition_identity_residual(sys: &MeasurementSystem, level: usize) -> Result<f64> {
    let n = sys.n();
    check_level(n, level, MAX_LEVEL_WORDS)?;
    // split the tree into independent prefix subtrees
    let mut split = 0;
    while split < level && n.pow(split as u32 + 1) <= 256 {
        split += 1;
    }
    let prefixes = n.pow(split as u32);
    let partials = par::map_range(0..prefixes, |idx| {
        let w = Word::from_index(n, split, idx as u128);
        let a = word_operator(sys, &w).expect("prefix uses the system alphabet");
        subtree_sum(sys, &a, level - split)
    });
    let mut total = CMatrix::zeros(sys.dim(), sys.dim());
    for p in &partials {
        total = &total + p;
    }
    (&total - &CMatrix::identity(sys.dim())).operator_norm()
}

/// One row of a level sweep.
#[derive(Clone, Debug, Serialize)]
pub struct LevelEntry {
    pub word: String,
    pub xi_num: u128,
    pub level: usize,
    pub measure: f64,
    pub log2_measure: f64,
}

/// `μ_ψ` of every word of length `level`, in lexicographic order.
pub fn level_sweep(sys: &MeasurementSystem, psi: &PureState, level: usize) -> Result<Vec<LevelEntry>> {
    sys.check_state(psi)?;
    let n = sys.n();
    let count = check_level(n, level, MAX_LEVEL_WORDS)?;
    par::map_range(0..count, |idx| {
        let w = Word::from_index(n, level, idx as u128);
        let measure = scalar_measure(sys, psi, &w)?;
        let log2 = log_scalar_measure(sys, psi, &w)? / std::f64::consts::LN_2;
        Ok(LevelEntry {
            word: w.to_string(),
            xi_num: idx as u128,
            level,
            measure,
            log2_measure: log2,
        })
    })
    .into_iter()
    .collect()
}

/// Writes a level sweep as CSV with columns
/// `word,xi_num,level,measure,log2_measure`.
pub fn write_level_csv<W: Write>(entries: &[LevelEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["word", "xi_num", "level", "measure", "log2_measure"])?;
    for e in entries {
        w.write_record([
            e.word.clone(),
            e.xi_num.to_string(),
            e.level.to_string(),
            crate::fmt_f64(e.measure),
            crate::fmt_f64(e.log2_measure),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Draws digit strings from `μ_ψ` by sequential measurement: outcome `i` is
/// chosen with probability `‖F_i ψ‖²` and the state collapses to
/// `F_i ψ / ‖F_i ψ‖`.
///
/// Randomness comes from ChaCha8 seeded with a `u64`; stream `0` by default.
#[derive(Clone, Debug)]
pub struct TrajectorySampler {
    rng: ChaCha8Rng,
}

impl TrajectorySampler {
    pub fn new(seed: u64) -> Self {
        TrajectorySampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent generator for trajectory `stream` under the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        TrajectorySampler { rng }
    }

    pub fn sample(&mut self, sys: &MeasurementSystem, psi: &PureState, length: usize) -> Result<Word> {
        sys.check_state(psi)?;
        let mut state = psi.vector().clone();
        let mut digits = Vec::with_capacity(length);
        for step in 0..length {
            let images: Vec<CVector> = sys.operators().iter().map(|f| f.mul_vec(&state)).collect();
            let probs: Vec<f64> = images.iter().map(|v| v.norm_sqr()).collect();
            let total: f64 = probs.iter().sum();
            if total < DEAD_STATE_TOL || !total.is_finite() {
                return Err(Error::DeadState { step, total });
            }
            let u = self.rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc && *p > 0.0 {
                    pick = i;
                    break;
                }
            }
            // guard the rounding tail: never land on a zero-probability outcome
            while probs[pick] == 0.0 && pick > 0 {
                pick -= 1;
            }
            digits.push(pick);
            state = images[pick].scale_real(1.0 / probs[pick].sqrt());
        }
        Ok(Word {
            base: sys.n(),
            digits,
        })
    }
}

pub fn sample_trajectory(
    sys: &MeasurementSystem,
    psi: &PureState,
    length: usize,
    seed: u64,
) -> Result<Word> {
    TrajectorySampler::new(seed).sample(sys, psi, length)
}

/// `count` independent trajectories; trajectory `i` uses stream `i` of the
/// seeded generator, so the output does not depend on thread scheduling.
pub fn sample_trajectories(
    sys: &MeasurementSystem,
    psi: &PureState,
    length: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Word>> {
    sys.check_state(psi)?;
    par::map_range(0..count, |i| {
        TrajectorySampler::with_stream(seed, i as u64).sample(sys, psi, length)
    })
    .into_iter()
    .collect()
}

/// Counts of each length-`level` cylinder, indexed by interval numerator.
pub fn cylinder_histogram(words: &[Word], base: usize, level: usize) -> Result<Vec<u64>> {
    let cells = check_level(base, level, MAX_LEVEL_WORDS)?;
    let mut counts = vec![0u64; cells];
    for w in words {
        if w.base != base || w.len() < level {
            return Err(Error::Shape("word too short or over a different alphabet".into()));
        }
        let prefix = Word {
            base,
            digits: w.digits[..level].to_vec(),
        };
        counts[NAdicInterval::from_word(&prefix)?.numerator as usize] += 1;
    }
    Ok(counts)
}

/// Measure of a triadic interval `J` against the two-map self-similarity
/// average `½(μ(3J ∩ [0,1)) + μ((3J − 2) ∩ [0,1)))`, for the Cantor system.
fn cantor_defect(sys: &MeasurementSystem, psi: &PureState, interval: &NAdicInterval) -> Result<f64> {
    let mu = |iv: &NAdicInterval| scalar_measure(sys, psi, &iv.to_word());
    let lhs = mu(interval)?;
    if interval.level == 0 {
        // 3·[0,1) and 3·[0,1) − 2 both cover [0,1)
        return Ok((lhs - 1.0).abs());
    }
    // 3J = [3ξ, 3ξ + 3^{1−k}); on the level k−1 grid its numerator is the same
    let coarse = 3u128.pow(interval.level as u32 - 1);
    let image = |offset: u128| -> Result<f64> {
        let num = interval.numerator.checked_sub(offset);
        match num {
            Some(n) if n < coarse => mu(&NAdicInterval {
                numerator: n,
                level: interval.level - 1,
                base: 3,
            }),
            _ => Ok(0.0),
        }
    };
    let rhs = 0.5 * (image(0)? + image(2 * coarse)?);
    Ok((lhs - rhs).abs())
}

/// Largest self-similarity defect over all triadic intervals of `level`.
pub fn cantor_self_similarity_residual(level: usize) -> Result<f64> {
    if level > 12 {
        return Err(Error::LevelTooDeep {
            level,
            words: 3f64.powi(level as i32),
            limit: 3usize.pow(12),
        });
    }
    let sys = MeasurementSystem::builtin(Builtin::Cantor3);
    let psi = PureState::basis(3, 0);
    let count = 3usize.pow(level as u32);
    let defects = par::map_range(0..count, |idx| {
        cantor_defect(
            &sys,
            &psi,
            &NAdicInterval {
                numerator: idx as u128,
                level,
                base: 3,
            },
        )
    });
    defects
        .into_iter()
        .try_fold(0.0f64, |acc, d| Ok(acc.max(d?)))
}

/// Defect for a single interval, exposed for spot checks.
pub fn cantor_self_similarity_at(interval: &NAdicInterval) -> Result<f64> {
    if interval.base != 3 {
        return Err(Error::Shape("triadic interval expected".into()));
    }
    let sys = MeasurementSystem::builtin(Builtin::Cantor3);
    cantor_defect(&sys, &PureState::basis(3, 0), interval)
}
