//! The `measure-scale` command line.
//!
//! Exit codes: 0 on success, 1 on usage or runtime errors, 2 when a
//! verification finds a residual above its tolerance.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cylinder::{
    cylinder_histogram, log_scalar_measure, operator_measure, partition_identity_residual,
    sample_trajectories, scalar_measure, word_to_interval, Word,
};
use crate::dominant::{filter_principal_vector, rate_envelope_check, DominantTriple};
use crate::error::{Error, Result};
use crate::filter::{beta_diagnostics, taps_from_beta, FilterBank};
use crate::fmt_f64;
use crate::linalg::{CVector, C64};
use crate::scale::{
    check_spectral_hypotheses, empirical_scale_profile, filter_scale_profile, theoretical_scale,
    ScaleOptions,
};
use crate::system::{MeasurementSystem, PureState, ISOMETRY_TOL};
use crate::wavelet::{cascade_phi, wavelet_psi, write_csv as write_wavelet_csv};

/// Base directory for relative `--out` paths.
pub const OUT_DIR_ENV: &str = "MEASURE_SCALE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "measure-scale", version, about = "Cylinder measures, scaling exponents and wavelet filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Builtin system: lebesgue2 or cantor3
    #[arg(long)]
    builtin: Option<String>,
    /// JSON file with the operators of a system
    #[arg(long)]
    system: Option<PathBuf>,
    /// Angle of the four-tap filter family
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Comma-separated filter taps, each `re` or `re:im`
    #[arg(long, allow_hyphen_values = true)]
    taps: Option<String>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct FilterSource {
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    taps: Option<String>,
}

#[derive(Debug, Args)]
struct Output {
    /// Output file; relative paths are resolved against $MEASURE_SCALE_OUT_DIR
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the column isometry of a system
    Verify {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = ISOMETRY_TOL)]
        tol: f64,
    },
    /// Measure of one cylinder
    Measure {
        #[command(flatten)]
        source: Source,
        /// Digit string, one digit per symbol (0-9, then a-z)
        #[arg(long)]
        word: String,
        /// Comma-separated state entries, `re` or `re:im`; defaults to e_0
        #[arg(long, allow_hyphen_values = true)]
        state: Option<String>,
    },
    /// Residual of the partition identity at one level
    Partition {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        level: usize,
        #[arg(long, default_value_t = ISOMETRY_TOL)]
        tol: f64,
    },
    /// Per-level exponent envelopes
    Scale {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 12)]
        max_level: usize,
        #[arg(long, allow_hyphen_values = true)]
        state: Option<String>,
        #[arg(long, default_value_t = 1 << 18)]
        budget: usize,
        /// Sampled branches per level beyond the budget
        #[arg(long, default_value_t = 1 << 14)]
        samples: usize,
        /// Fail instead of sampling when the budget is exceeded
        #[arg(long)]
        no_sampling: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        output: Output,
    },
    /// Spectrum of the low-pass matrix (filters) or of each operator
    Spectrum {
        #[command(flatten)]
        source: Source,
    },
    /// Tap diagnostics over a range of angles
    BetaScan {
        #[arg(long, allow_hyphen_values = true, default_value_t = -std::f64::consts::PI)]
        from: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = std::f64::consts::PI)]
        to: f64,
        #[arg(long, default_value_t = 629)]
        steps: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Seeded measurement trajectories
    Sample {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, allow_hyphen_values = true)]
        state: Option<String>,
        /// Emit counts per cylinder instead of the words
        #[arg(long)]
        histogram: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Convergence of normalized powers of the low-pass matrix
    Power {
        #[command(flatten)]
        source: FilterSource,
        /// Index of the basis vector used as starting vector
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = 60)]
        n: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Scaling function and wavelet by the cascade algorithm
    Cascade {
        #[command(flatten)]
        source: FilterSource,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[command(flatten)]
        output: Output,
    },
}

/// Runs the tool on `argv` (including the program name) and returns the
/// process exit code.
pub fn execute(argv: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let ctx = Context { argv };
    match ctx.run(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::Validation { .. } => 2,
                _ => 1,
            }
        }
    }
}

struct Context<'a> {
    argv: &'a [String],
}

fn parse_complex_list(text: &str) -> Result<Vec<C64>> {
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let (re, im) = match tok.split_once(':') {
                Some((r, i)) => (r, i),
                None => (tok, "0"),
            };
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Domain(format!("cannot parse `{tok}` as a number")))
            };
            Ok(C64::new(parse(re)?, parse(im)?))
        })
        .collect()
}

enum Loaded {
    System(MeasurementSystem),
    Filter(FilterBank, MeasurementSystem),
}

impl Loaded {
    fn system(&self) -> &MeasurementSystem {
        match self {
            Loaded::System(s) | Loaded::Filter(_, s) => s,
        }
    }
}

fn filter_from(beta: Option<f64>, taps: Option<&str>) -> Result<FilterBank> {
    match (beta, taps) {
        (Some(b), _) => Ok(taps_from_beta(b)),
        (None, Some(t)) => FilterBank::new(parse_complex_list(t)?),
        _ => unreachable!("clap enforces one source"),
    }
}

fn load(source: &Source, checked: bool) -> Result<Loaded> {
    if let Some(name) = &source.builtin {
        return Ok(Loaded::System(MeasurementSystem::builtin_by_name(name)?));
    }
    if let Some(path) = &source.system {
        let text = fs::read_to_string(path)?;
        let sys = if checked {
            MeasurementSystem::from_json(&text)?
        } else {
            MeasurementSystem::from_json_unchecked(&text)?
        };
        return Ok(Loaded::System(sys));
    }
    let fb = filter_from(source.beta, source.taps.as_deref())?;
    let sys = if checked {
        MeasurementSystem::from_filter_bank(&fb)?
    } else {
        let f0 = fb.lowpass_matrix();
        let f1 = fb.highpass_matrix();
        MeasurementSystem::new_unchecked(format!("taps[{}]", fb.len()), vec![f0, f1])?
    };
    Ok(Loaded::Filter(fb, sys))
}

fn load_state(sys: &MeasurementSystem, state: Option<&str>) -> Result<PureState> {
    match state {
        None => Ok(PureState::basis(sys.dim(), 0)),
        Some(text) => PureState::normalize(&CVector::new(parse_complex_list(text)?)),
    }
}

fn resolve_out(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            return Path::new(&dir).join(path);
        }
    }
    path.to_path_buf()
}

fn fmt_c(z: C64) -> String {
    if z.im == 0.0 {
        fmt_f64(z.re)
    } else {
        format!("{}{}{}i", fmt_f64(z.re), if z.im < 0.0 { "-" } else { "+" }, fmt_f64(z.im.abs()))
    }
}

impl Context<'_> {
    fn header(&self) -> String {
        format!(
            "# measure-scale {} argv: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.argv.join(" ")
        )
    }

    /// Writes `body` to `--out` (with the provenance comment for CSV) or to
    /// stdout.
    fn emit(&self, out: &Output, body: &[u8], csv: bool, stdout: &mut dyn Write) -> Result<()> {
        let mut bytes = Vec::with_capacity(body.len() + 128);
        if csv {
            bytes.extend_from_slice(self.header().as_bytes());
        }
        bytes.extend_from_slice(body);
        match &out.out {
            Some(p) => {
                let p = resolve_out(p);
                if let Some(parent) = p.parent() {
                    if !parent.as_os_str().is_empty() {
                        fs::create_dir_all(parent)?;
                    }
                }
                fs::write(p, bytes)?;
            }
            None => stdout.write_all(&bytes)?,
        }
        Ok(())
    }

    fn run(&self, cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
        match cmd {
            Command::Verify { source, tol } => {
                let loaded = load(&source, false)?;
                let sys = loaded.system();
                let residual = sys.column_isometry_residual()?;
                writeln!(stdout, "system {}", sys.label())?;
                writeln!(stdout, "N {} dim {}", sys.n(), sys.dim())?;
                writeln!(stdout, "isometry_residual {}", fmt_f64(residual))?;
                writeln!(stdout, "cuntz_residual {}", fmt_f64(sys.cuntz_residual()?))?;
                if let Loaded::Filter(fb, _) = &loaded {
                    let r = fb.residuals();
                    writeln!(stdout, "qmf_residual {}", fmt_f64(r.qmf_residual))?;
                    writeln!(stdout, "sum_residual {}", fmt_f64(r.sum_residual))?;
                }
                if residual > tol {
                    writeln!(
                        stderr,
                        "isometry residual {} exceeds tolerance {}",
                        fmt_f64(residual),
                        fmt_f64(tol)
                    )?;
                    return Ok(2);
                }
                Ok(0)
            }
            Command::Measure { source, word, state } => {
                let loaded = load(&source, true)?;
                let sys = loaded.system();
                let psi = load_state(sys, state.as_deref())?;
                let w = Word::parse(&word, sys.n())?;
                let iv = word_to_interval(&w)?;
                writeln!(stdout, "word {w}")?;
                writeln!(stdout, "interval [{}, {})", fmt_f64(iv.left()), fmt_f64(iv.right()))?;
                writeln!(stdout, "measure {}", fmt_f64(scalar_measure(sys, &psi, &w)?))?;
                writeln!(stdout, "log_measure {}", fmt_f64(log_scalar_measure(sys, &psi, &w)?))?;
                writeln!(stdout, "operator")?;
                write!(stdout, "{}", operator_measure(sys, &w)?.matrix())?;
                Ok(0)
            }
            Command::Partition { source, level, tol } => {
                let loaded = load(&source, true)?;
                let residual = partition_identity_residual(loaded.system(), level)?;
                writeln!(stdout, "level {level}")?;
                writeln!(stdout, "partition_residual {}", fmt_f64(residual))?;
                if residual > tol {
                    writeln!(stderr, "partition residual exceeds tolerance {}", fmt_f64(tol))?;
                    return Ok(2);
                }
                Ok(0)
            }
            Command::Scale {
                source,
                max_level,
                state,
                budget,
                samples,
                no_sampling,
                seed,
                format,
                output,
            } => {
                let opts = ScaleOptions {
                    word_budget: budget,
                    sample_branches: (!no_sampling).then_some(samples),
                    seed,
                    ..ScaleOptions::default()
                };
                let loaded = load(&source, true)?;
                let report = match (&loaded, &state) {
                    (Loaded::Filter(fb, _), None) => filter_scale_profile(fb, max_level, &opts)?,
                    _ => {
                        let sys = loaded.system();
                        let psi = load_state(sys, state.as_deref())?;
                        empirical_scale_profile(sys, &psi, max_level, &opts)?
                    }
                };
                for n in &report.notes {
                    writeln!(stderr, "note: {n}")?;
                }
                match format {
                    Format::Csv => {
                        let mut buf = Vec::new();
                        report.write_csv(&mut buf)?;
                        self.emit(&output, &buf, true, stdout)?;
                    }
                    Format::Json => {
                        let mut text = report.to_json();
                        text.push('\n');
                        self.emit(&output, text.as_bytes(), false, stdout)?;
                    }
                }
                Ok(0)
            }
            Command::Spectrum { source } => {
                let loaded = load(&source, true)?;
                match &loaded {
                    Loaded::Filter(fb, _) => self.filter_spectrum(fb, stdout)?,
                    Loaded::System(sys) => {
                        for (i, f) in sys.operators().iter().enumerate() {
                            let ev: Vec<String> = f.eigenvalues()?.into_iter().map(fmt_c).collect();
                            writeln!(stdout, "F{i} eigenvalues {}", ev.join(" "))?;
                        }
                    }
                }
                Ok(0)
            }
            Command::BetaScan { from, to, steps, output } => {
                if steps < 2 {
                    return Err(Error::Domain("beta-scan needs at least 2 steps".into()));
                }
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record([
                    "beta",
                    "a0",
                    "a1",
                    "a2",
                    "a3",
                    "alpha",
                    "s",
                    "lambda",
                    "region",
                    "dominance_ok",
                    "circle_residual",
                ])?;
                for i in 0..steps {
                    let beta = from + (to - from) * i as f64 / (steps - 1) as f64;
                    let d = beta_diagnostics(beta);
                    let circle = d.circle_residuals.iter().copied().fold(0.0, f64::max);
                    w.write_record([
                        fmt_f64(beta),
                        fmt_f64(d.taps[0]),
                        fmt_f64(d.taps[1]),
                        fmt_f64(d.taps[2]),
                        fmt_f64(d.taps[3]),
                        fmt_f64(d.alpha),
                        fmt_f64(d.s),
                        fmt_f64(d.lambda),
                        d.region.to_string(),
                        d.dominance_ok.to_string(),
                        fmt_f64(circle),
                    ])?;
                }
                let buf = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
                self.emit(&output, &buf, true, stdout)?;
                Ok(0)
            }
            Command::Sample {
                source,
                length,
                count,
                seed,
                state,
                histogram,
                output,
            } => {
                let loaded = load(&source, true)?;
                let sys = loaded.system();
                let psi = load_state(sys, state.as_deref())?;
                let words = sample_trajectories(sys, &psi, length, count, seed)?;
                let mut w = csv::Writer::from_writer(Vec::new());
                if histogram {
                    w.write_record(["interval", "word", "count"])?;
                    let counts = cylinder_histogram(&words, sys.n(), length)?;
                    for (i, c) in counts.iter().enumerate() {
                        let word = Word::from_index(sys.n(), length, i as u128);
                        w.write_record([i.to_string(), word.to_string(), c.to_string()])?;
                    }
                } else {
                    w.write_record(["trajectory", "word"])?;
                    for (i, word) in words.iter().enumerate() {
                        w.write_record([i.to_string(), word.to_string()])?;
                    }
                }
                let buf = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
                self.emit(&output, &buf, true, stdout)?;
                Ok(0)
            }
            Command::Power { source, start, n, output } => {
                let fb = filter_from(source.beta, source.taps.as_deref())?;
                let f0 = fb.lowpass_matrix();
                let d = f0.rows();
                if start >= d {
                    return Err(Error::Domain(format!("start index {start} must be below {d}")));
                }
                let t = DominantTriple::new(f0, fb.first(), CVector::basis(d, 0))?;
                let x = CVector::basis(d, start);
                let check = rate_envelope_check(&t, &x, n)?;
                writeln!(stdout, "spectral_gap {}", fmt_f64(check.gap))?;
                writeln!(stdout, "fitted_c {}", fmt_f64(check.fitted_c))?;
                writeln!(stdout, "envelope_passed {}", check.passed)?;
                writeln!(stdout, "error_at_n {}", fmt_f64(*check.errors.last().expect("errors")))?;
                if output.out.is_some() {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["n", "error", "envelope"])?;
                    for (k, e) in check.errors.iter().enumerate() {
                        let env = check.fitted_c
                            * (k as f64).powi(check.degree as i32)
                            * check.gap.powi(k as i32);
                        w.write_record([k.to_string(), fmt_f64(*e), fmt_f64(env)])?;
                    }
                    let buf = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
                    self.emit(&output, &buf, true, stdout)?;
                }
                Ok(0)
            }
            Command::Cascade { source, depth, output } => {
                let fb = filter_from(source.beta, source.taps.as_deref())?;
                let phi = cascade_phi(&fb, depth)?;
                let psi = wavelet_psi(&fb, &phi)?;
                if let Some(w) = phi.warning() {
                    writeln!(stderr, "warning: cascade {w:?}")?;
                }
                if phi.excluded_parameter() {
                    writeln!(stderr, "warning: integer translates are not orthonormal at this angle")?;
                }
                let mut buf = Vec::new();
                write_wavelet_csv(&phi, &psi, &mut buf)?;
                self.emit(&output, &buf, true, stdout)?;
                Ok(0)
            }
        }
    }

    fn filter_spectrum(&self, fb: &FilterBank, stdout: &mut dyn Write) -> Result<()> {
        let h = check_spectral_hypotheses(fb)?;
        let ev: Vec<String> = h.spectrum.iter().map(|z| fmt_c(*z)).collect();
        writeln!(stdout, "eigenvalues {}", ev.join(" "))?;
        if let Some(b) = fb.beta() {
            let d = beta_diagnostics(b);
            let cf: Vec<String> = d.closed_form_spectrum.iter().map(|x| fmt_f64(*x)).collect();
            writeln!(stdout, "closed_form {}", cf.join(" "))?;
            writeln!(stdout, "region {}", d.region)?;
        }
        writeln!(stdout, "nonvanishing_ok {}", h.nonvanishing_ok)?;
        writeln!(stdout, "dominance_ok {}", h.dominance_ok)?;
        writeln!(stdout, "multiplicity_ok {}", h.multiplicity_ok)?;
        writeln!(stdout, "spectral_gap {}", fmt_f64(h.spectral_gap))?;
        match theoretical_scale(fb) {
            Ok(t) => {
                writeln!(stdout, "alpha {}", fmt_f64(t.alpha))?;
                writeln!(stdout, "s {}", fmt_f64(t.s))?;
            }
            Err(e) => writeln!(stdout, "s unavailable: {e}")?,
        }
        if h.all_ok() {
            let v = filter_principal_vector(fb)?;
            let entries: Vec<String> = v.entries().iter().map(|z| fmt_c(*z)).collect();
            writeln!(stdout, "principal_vector {}", entries.join(" "))?;
            writeln!(stdout, "principal_norm_sqr {}", fmt_f64(v.norm_sqr()))?;
        }
        Ok(())
    }
}
