//! Local scaling exponents of cylinder measures.
//!
//! For an interval `J` of length `N^{-k}` carrying measure `μ(J) > 0` the
//! exponent is `ln μ(J) / ln |J|`. A measure has lower scale `s` when
//! `μ(J) / |J|^s` stays bounded below along shrinking intervals, and upper
//! scale `s` when it stays bounded above. Neither limit is computable, so
//! this module reports per-level min/max envelopes together with the ratios
//! along single branches, and compares them with the exponent predicted from
//! the end taps of a filter.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cylinder::{LogState, Word};
use crate::dominant::filter_principal_vector;
use crate::error::{Error, Result};
use crate::filter::FilterBank;
use crate::fmt_f64;
use crate::linalg::C64;
use crate::par;
use crate::system::{MeasurementSystem, PureState};

/// Similarity dimension `ln(replicas) / ln(magnification)`.
pub fn ifs_dimension(replicas: usize, magnification: f64) -> Result<f64> {
    if replicas == 0 {
        return Err(Error::Domain("at least one replica is required".into()));
    }
    if magnification.is_nan() || magnification <= 1.0 || magnification.is_infinite() {
        return Err(Error::Domain(format!(
            "magnification must exceed 1, got {magnification}"
        )));
    }
    Ok((replicas as f64).ln() / magnification.ln())
}

/// Below this `|a_0 · a_{2D−1}|` the end taps are treated as vanishing.
pub const END_TAP_TOL: f64 = 1e-12;

/// Relative tolerance used to separate eigenvalue moduli.
pub const SPECTRAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoreticalScale {
    /// `max(|a_0|², |a_{2D−1}|²)`
    pub alpha: f64,
    /// `−ln(alpha) / ln 2`
    pub s: f64,
    /// Whether `alpha` comes from `a_0` (all-zeros branch) or from the last
    /// tap (all-ones branch).
    pub first_tap_dominates: bool,
}

pub fn theoretical_scale(fb: &FilterBank) -> Result<TheoreticalScale> {
    let (first, last) = (fb.first(), fb.last());
    if (first * last).norm() < END_TAP_TOL {
        return Err(Error::Hypothesis(format!(
            "end taps vanish: |a_0 a_{}| = {:.3e}",
            fb.len() - 1,
            (first * last).norm()
        )));
    }
    let (p, q) = (first.norm_sqr(), last.norm_sqr());
    let alpha = p.max(q);
    Ok(TheoreticalScale {
        alpha,
        s: -alpha.ln() / std::f64::consts::LN_2,
        first_tap_dominates: p >= q,
    })
}

/// The three spectral conditions on the low-pass slanted matrix `F_0` under
/// which `|a_0|^{-2n} μ_0` converges along the all-zeros branch.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralHypotheses {
    /// `a_0 · a_{2D−1} ≠ 0`
    pub nonvanishing_ok: bool,
    /// `|a_0|` strictly exceeds every other eigenvalue modulus.
    pub dominance_ok: bool,
    /// `a_0` is a simple eigenvalue.
    pub multiplicity_ok: bool,
    /// Largest `|λ| / |a_0|` over the rest of the spectrum.
    pub spectral_gap: f64,
    pub spectrum: Vec<C64>,
}

impl SpectralHypotheses {
    pub fn all_ok(&self) -> bool {
        self.nonvanishing_ok && self.dominance_ok && self.multiplicity_ok
    }
}

pub fn check_spectral_hypotheses(fb: &FilterBank) -> Result<SpectralHypotheses> {
    let f0 = fb.lowpass_matrix();
    let spectrum = f0.eigenvalues()?;
    let a0 = fb.first();
    let size = a0.norm();
    let nonvanishing_ok = (a0 * fb.last()).norm() >= END_TAP_TOL;

    // a0 always sits on the spectrum: the first row of F0 is (a0, 0, ..., 0)
    let idx = spectrum
        .iter()
        .enumerate()
        .map(|(i, z)| (i, (z - a0).norm()))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
        .0;
    let others: Vec<C64> = spectrum
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != idx)
        .map(|(_, z)| *z)
        .collect();
    let second = others.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = SPECTRAL_TOL * size.max(f64::MIN_POSITIVE);
    let repeated = others.iter().any(|z| (z - a0).norm() <= tol.max(1e-7 * size));
    let g = f0.trailing_block(1);
    let mut shifted = g.scale(C64::new(-1.0, 0.0));
    for i in 0..shifted.rows() {
        shifted[(i, i)] += a0;
    }
    let char_at_a0 = if shifted.rows() == 0 {
        C64::new(1.0, 0.0)
    } else {
        shifted.determinant()?
    };
    let multiplicity_ok = !repeated && char_at_a0.norm() >= crate::dominant::MULTIPLICITY_TOL;
    let dominance_ok = size > 0.0 && second < size - tol;
    Ok(SpectralHypotheses {
        nonvanishing_ok,
        dominance_ok,
        multiplicity_ok,
        spectral_gap: if size > 0.0 { second / size } else { f64::INFINITY },
        spectrum,
    })
}

#[derive(Clone, Debug)]
pub struct ScaleOptions {
    /// Largest number of words visited exhaustively at one level.
    pub word_budget: usize,
    /// Number of uniformly sampled branches per level once the budget is
    /// exceeded; `None` turns the overflow into an error.
    pub sample_branches: Option<usize>,
    pub seed: u64,
    /// Words with natural-log measure below this count as measure zero.
    pub log_threshold: f64,
}

impl Default for ScaleOptions {
    fn default() -> Self {
        ScaleOptions {
            word_budget: 1 << 18,
            sample_branches: Some(1 << 14),
            seed: 0,
            log_threshold: -700.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelEnvelope {
    pub level: usize,
    /// `None` when no word at this level has positive measure.
    pub min_exponent: Option<f64>,
    pub max_exponent: Option<f64>,
    pub positive_words: u64,
    /// Whether the level was sampled rather than enumerated.
    pub sampled: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleReport {
    pub system: String,
    pub theoretical_s: Option<f64>,
    pub levels: Vec<LevelEnvelope>,
    pub notes: Vec<String>,
}

impl ScaleReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "min_exponent", "max_exponent", "positive_words"])?;
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        for l in &self.levels {
            w.write_record([
                l.level.to_string(),
                opt(l.min_exponent),
                opt(l.max_exponent),
                l.positive_words.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn envelope(level: usize, base: usize, logs: &[f64], threshold: f64, sampled: bool) -> LevelEnvelope {
    let denom = -(level as f64) * (base as f64).ln();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut count = 0u64;
    for &l in logs {
        if l > threshold {
            let e = l / denom;
            lo = lo.min(e);
            hi = hi.max(e);
            count += 1;
        }
    }
    LevelEnvelope {
        level,
        min_exponent: (count > 0).then_some(lo),
        max_exponent: (count > 0).then_some(hi),
        positive_words: count,
        sampled,
    }
}

/// Min/max exponent of `μ_ψ` over the intervals of each level `1..=max_level`.
pub fn empirical_scale_profile(
    sys: &MeasurementSystem,
    psi: &PureState,
    max_level: usize,
    opts: &ScaleOptions,
) -> Result<ScaleReport> {
    sys.check_state(psi)?;
    let n = sys.n();
    let mut levels = Vec::with_capacity(max_level);
    let mut notes = Vec::new();
    let mut frontier = vec![LogState::start(psi)];
    let mut exhaustive = true;
    for level in 1..=max_level {
        if exhaustive && frontier.len().saturating_mul(n) > opts.word_budget {
            let Some(branches) = opts.sample_branches else {
                return Err(Error::LevelTooDeep {
                    level,
                    words: frontier.len() as f64 * n as f64,
                    limit: opts.word_budget,
                });
            };
            exhaustive = false;
            frontier.clear();
            notes.push(format!(
                "levels {level}..{max_level} sampled with {branches} uniform branches each"
            ));
        }
        if exhaustive {
            let threshold = opts.log_threshold;
            frontier = par::flat_map_slice(&frontier, |s| {
                (0..n)
                    .map(|d| s.step(sys, d))
                    .filter(|c| c.log_mass() > threshold)
                    .collect()
            });
            let logs: Vec<f64> = frontier.iter().map(LogState::log_mass).collect();
            levels.push(envelope(level, n, &logs, threshold, false));
        } else {
            let branches = opts.sample_branches.expect("sampling enabled");
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(level as u64);
            let words: Vec<Vec<usize>> = (0..branches)
                .map(|_| (0..level).map(|_| rng.random_range(0..n)).collect())
                .collect();
            let logs = par::map_slice(&words, |digits| {
                let mut s = LogState::start(psi);
                for &d in digits {
                    s = s.step(sys, d);
                    if s.log_mass() <= opts.log_threshold {
                        break;
                    }
                }
                s.log_mass()
            });
            levels.push(envelope(level, n, &logs, opts.log_threshold, true));
        }
    }
    Ok(ScaleReport {
        system: sys.label().to_string(),
        theoretical_s: None,
        levels,
        notes,
    })
}

/// [`empirical_scale_profile`] for the system of a filter bank started at
/// `e_0`, with the predicted exponent attached.
pub fn filter_scale_profile(fb: &FilterBank, max_level: usize, opts: &ScaleOptions) -> Result<ScaleReport> {
    let sys = MeasurementSystem::from_filter_bank(fb)?;
    let psi = PureState::basis(sys.dim(), 0);
    let mut report = empirical_scale_profile(&sys, &psi, max_level, opts)?;
    match theoretical_scale(fb) {
        Ok(t) => {
            report.theoretical_s = Some(t.s);
            if t.alpha > 0.5 {
                report.notes.push(format!(
                    "alpha = {} > 1/2, so -log2(alpha) = {} is below 1",
                    t.alpha, t.s
                ));
            }
        }
        Err(e) => report.notes.push(format!("no predicted exponent: {e}")),
    }
    Ok(report)
}

/// Natural-log measures of `base · digitⁿ` for `n = 0..=n_max`.
pub fn branch_log_measures(
    sys: &MeasurementSystem,
    psi: &PureState,
    base: &Word,
    digit: usize,
    n_max: usize,
) -> Result<Vec<f64>> {
    sys.check_state(psi)?;
    if base.base() != sys.n() || digit >= sys.n() {
        return Err(Error::Shape(format!(
            "word over Z_{} or digit {digit} does not fit a system with N = {}",
            base.base(),
            sys.n()
        )));
    }
    let mut s = LogState::start(psi);
    for &d in base.digits() {
        s = s.step(sys, d);
    }
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(s.log_mass());
    for _ in 0..n_max {
        s = s.step(sys, digit);
        out.push(s.log_mass());
    }
    Ok(out)
}

/// Exponents `ln μ / ln |J|` along `base · digitⁿ`; entry `n` is for level
/// `|base| + n` (level 0 reported as `NaN`).
pub fn branch_exponents(
    sys: &MeasurementSystem,
    psi: &PureState,
    base: &Word,
    digit: usize,
    n_max: usize,
) -> Result<Vec<f64>> {
    let ln_n = (sys.n() as f64).ln();
    let k = base.len();
    Ok(branch_log_measures(sys, psi, base, digit, n_max)?
        .into_iter()
        .enumerate()
        .map(|(n, l)| {
            let level = (k + n) as f64;
            if level == 0.0 {
                f64::NAN
            } else {
                l / (-level * ln_n)
            }
        })
        .collect())
}

/// `r_n = μ(base · digitⁿ) / |J|^s` computed in log space.
pub fn branch_ratios(
    sys: &MeasurementSystem,
    psi: &PureState,
    base: &Word,
    digit: usize,
    s: f64,
    n_max: usize,
) -> Result<Vec<f64>> {
    let ln_n = (sys.n() as f64).ln();
    let k = base.len();
    Ok(branch_log_measures(sys, psi, base, digit, n_max)?
        .into_iter()
        .enumerate()
        .map(|(n, l)| (l + s * (k + n) as f64 * ln_n).exp())
        .collect())
}

fn filter_system(fb: &FilterBank, base: &Word) -> Result<(MeasurementSystem, PureState)> {
    if base.base() != 2 {
        return Err(Error::Shape("base word must be binary".into()));
    }
    let sys = MeasurementSystem::from_filter_bank(fb)?;
    let psi = PureState::basis(sys.dim(), 0);
    Ok((sys, psi))
}

/// Ratios `μ_0(J_n) / |J_n|^s` along the branch that realises the predicted
/// lower scale: `base · 0ⁿ` when `alpha = |a_0|²`, `base · 1ⁿ` otherwise.
pub fn end_tap_lower_bound_check(fb: &FilterBank, base: &Word, n_max: usize) -> Result<Vec<f64>> {
    let t = theoretical_scale(fb)?;
    let (sys, psi) = filter_system(fb, base)?;
    let digit = if t.first_tap_dominates { 0 } else { 1 };
    branch_ratios(&sys, &psi, base, digit, t.s, n_max)
}

#[derive(Clone, Debug, Serialize)]
pub struct SlowConvergence {
    pub spectral_gap: f64,
    /// `n^{d−1} gapⁿ` at the last index.
    pub envelope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitCheck {
    /// `r_n = |a_0|^{-2n} μ_0(base · 0ⁿ)` for `n = 0..=n_max`.
    pub ratios: Vec<f64>,
    /// `|a_0|^{2·#0} |a_{2D−1}|^{2·#1} ‖v‖²` from the digit counts of `base`.
    pub predicted_limit: f64,
    pub spectral_gap: f64,
    pub warning: Option<SlowConvergence>,
}

impl LimitCheck {
    pub fn relative_error(&self) -> f64 {
        self.ratios.last().expect("n + 1 ratios") / self.predicted_limit - 1.0
    }
}

/// Spectral gap at or above which a slow-convergence warning is attached.
pub const SLOW_GAP: f64 = 0.95;

/// Convergence of `|a_0|^{-2n} μ_0(base · 0ⁿ)` to its predicted limit.
pub fn dominant_limit_check(fb: &FilterBank, base: &Word, n_max: usize) -> Result<LimitCheck> {
    let h = check_spectral_hypotheses(fb)?;
    if !h.all_ok() {
        return Err(Error::Hypothesis(format!(
            "nonvanishing {}, dominance {}, multiplicity {}",
            h.nonvanishing_ok, h.dominance_ok, h.multiplicity_ok
        )));
    }
    let (sys, psi) = filter_system(fb, base)?;
    let v = filter_principal_vector(fb)?;
    let ln_a0 = fb.first().norm().ln();
    let ln_last = fb.last().norm().ln();
    let zeros = base.count(0) as f64;
    let ones = base.count(1) as f64;
    let predicted_limit = (2.0 * zeros * ln_a0 + 2.0 * ones * ln_last).exp() * v.norm_sqr();
    let ratios = branch_log_measures(&sys, &psi, base, 0, n_max)?
        .into_iter()
        .enumerate()
        .map(|(n, l)| (l - 2.0 * n as f64 * ln_a0).exp())
        .collect();
    let d = sys.dim();
    let warning = (h.spectral_gap >= SLOW_GAP).then(|| SlowConvergence {
        spectral_gap: h.spectral_gap,
        envelope: (n_max as f64).powi(d as i32 - 1) * h.spectral_gap.powi(n_max as i32),
    });
    Ok(LimitCheck {
        ratios,
        predicted_limit,
        spectral_gap: h.spectral_gap,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::taps_from_beta;
    use crate::system::Builtin;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn ifs_examples() {
        assert!((ifs_dimension(2, 3.0).unwrap() - 0.630930).abs() < 1e-6);
        assert_eq!(ifs_dimension(2, 2.0).unwrap(), 1.0);
        assert_eq!(ifs_dimension(1, 7.5).unwrap(), 0.0);
        assert!(matches!(ifs_dimension(2, 1.0), Err(Error::Domain(_))));
        assert!(matches!(ifs_dimension(2, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn theoretical_examples() {
        let t = theoretical_scale(&taps_from_beta(-FRAC_PI_4)).unwrap();
        assert!((t.alpha - 0.5).abs() < 1e-15 && (t.s - 1.0).abs() < 1e-14);

        let t = theoretical_scale(&taps_from_beta(0.3)).unwrap();
        assert!((t.alpha - 0.690929).abs() < 1e-6);
        // printed reference 0.533423 is about 3e-5 high
        assert!((t.s - 0.533423).abs() < 5e-5);
        assert!((t.s - 0.5333897789657162).abs() < 1e-12);
        assert!(t.first_tap_dominates);

        let fb = FilterBank::daubechies4();
        let t = theoretical_scale(&fb).unwrap();
        assert!(fb.first().norm_sqr() > fb.last().norm_sqr());
        assert!((t.alpha - 0.233253).abs() < 1e-6);
        assert!((t.s - 2.100).abs() < 1e-3);

        assert!(matches!(
            theoretical_scale(&taps_from_beta(FRAC_PI_4)),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn reversal_symmetry() {
        let fb = taps_from_beta(1.1);
        let rev: Vec<C64> = fb.taps().iter().rev().copied().collect();
        let a = theoretical_scale(&fb).unwrap();
        let b = theoretical_scale(&FilterBank::new(rev).unwrap()).unwrap();
        assert_eq!(a.alpha, b.alpha);
        assert_eq!(a.s, b.s);
    }

    #[test]
    fn hypotheses_examples() {
        let h = check_spectral_hypotheses(&taps_from_beta(0.3)).unwrap();
        assert!(h.all_ok());
        assert!((h.spectral_gap - std::f64::consts::FRAC_1_SQRT_2 / 0.831221).abs() < 1e-5);

        let h = check_spectral_hypotheses(&taps_from_beta(FRAC_PI_4)).unwrap();
        assert!(!h.dominance_ok);

        let h = check_spectral_hypotheses(&taps_from_beta(3.0 * PI / 4.0)).unwrap();
        assert!(!h.nonvanishing_ok);
    }

    #[test]
    fn profile_lebesgue_and_cantor() {
        let opts = ScaleOptions::default();
        let sys = MeasurementSystem::builtin(Builtin::Lebesgue2);
        let r = empirical_scale_profile(&sys, &PureState::basis(2, 0), 8, &opts).unwrap();
        for l in &r.levels {
            assert!((l.min_exponent.unwrap() - 1.0).abs() < 1e-12);
            assert!((l.max_exponent.unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(l.positive_words, 1 << l.level);
        }

        let sys = MeasurementSystem::builtin(Builtin::Cantor3);
        let r = empirical_scale_profile(&sys, &PureState::basis(3, 0), 8, &opts).unwrap();
        let s = ifs_dimension(2, 3.0).unwrap();
        for l in &r.levels {
            assert!((l.min_exponent.unwrap() - s).abs() < 1e-10);
            assert!((l.max_exponent.unwrap() - s).abs() < 1e-10);
            assert_eq!(l.positive_words, 1 << l.level);
        }
    }

    #[test]
    fn budget_overflow() {
        let sys = MeasurementSystem::builtin(Builtin::Lebesgue2);
        let psi = PureState::basis(2, 0);
        let opts = ScaleOptions {
            word_budget: 16,
            sample_branches: None,
            ..ScaleOptions::default()
        };
        assert!(matches!(
            empirical_scale_profile(&sys, &psi, 5, &opts),
            Err(Error::LevelTooDeep { level: 5, .. })
        ));
        let opts = ScaleOptions {
            word_budget: 16,
            sample_branches: Some(100),
            ..ScaleOptions::default()
        };
        let r = empirical_scale_profile(&sys, &psi, 6, &opts).unwrap();
        assert!(!r.levels[3].sampled && r.levels[4].sampled);
        assert_eq!(r.levels[5].positive_words, 100);
        assert!((r.levels[5].min_exponent.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.notes.len(), 1);
    }

    #[test]
    fn beta_profile_reaches_predicted_exponent() {
        let fb = taps_from_beta(0.3);
        let r = filter_scale_profile(&fb, 14, &ScaleOptions::default()).unwrap();
        let s = r.theoretical_s.unwrap();
        let last = r.levels.last().unwrap();
        assert!(last.min_exponent.unwrap() <= s + 0.05);
        assert!(r.notes.iter().any(|n| n.contains("alpha")));
        for l in &r.levels {
            assert!(l.min_exponent <= l.max_exponent);
        }
    }

    #[test]
    fn csv_and_json() {
        let sys = MeasurementSystem::builtin(Builtin::Cantor3);
        let r = empirical_scale_profile(&sys, &PureState::basis(3, 0), 2, &ScaleOptions::default()).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("level,min_exponent,max_exponent,positive_words\n1,"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["levels"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn lower_bound_ratios() {
        let r = end_tap_lower_bound_check(&taps_from_beta(0.3), &Word::empty(2), 40).unwrap();
        assert!(r.iter().all(|&x| (0.9..=2.0).contains(&x)));
        assert!((r[40] - r[39]).abs() < 1e-2);

        let base = Word::parse("0110", 2).unwrap();
        let r = end_tap_lower_bound_check(&taps_from_beta(-FRAC_PI_4), &base, 30).unwrap();
        assert!(r.iter().all(|&x| (x - 1.0).abs() < 1e-12));

        let sys = MeasurementSystem::builtin(Builtin::Cantor3);
        let s = ifs_dimension(2, 3.0).unwrap();
        let r = branch_ratios(&sys, &PureState::basis(3, 0), &Word::empty(3), 0, s, 30).unwrap();
        assert!(r.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn limit_check_examples() {
        let fb = taps_from_beta(0.3);
        let c = dominant_limit_check(&fb, &Word::empty(2), 80).unwrap();
        assert_eq!(c.ratios[0], 1.0);
        assert!((c.predicted_limit - 1.708373).abs() < 5e-5);
        assert!(c.warning.is_none());
        assert!(c.relative_error().abs() < 1e-5);

        let one = dominant_limit_check(&fb, &Word::parse("1", 2).unwrap(), 10).unwrap();
        let want = fb.last().norm_sqr() * c.predicted_limit;
        assert!((one.predicted_limit - want).abs() < 1e-14);

        assert!(matches!(
            dominant_limit_check(&taps_from_beta(FRAC_PI_4), &Word::empty(2), 5),
            Err(Error::Hypothesis(_))
        ));
    }
}
