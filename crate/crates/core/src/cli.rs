//! Command-line front end. Exit codes: 0 on success, 1 when an invariant check or experiment
//! fails, 2 on usage errors.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversary::{self, AdversarialConfig};
use crate::analysis::{
    atom_corpus, atomic_decompose, expand, sign_flip_supremum, sq_norm1, EquivalenceParams, EquivalenceReport,
    Synthesis,
};
use crate::error::{Error, Result};
use crate::io::{self, ExperimentReport, SystemDump};
use crate::knotseq::{regularity_parameter, KnotSequence, RegularityReport};
use crate::orthosys::{
    build_system, char_combinatorics, coefficient_norm, system_decay, CombinatoricsParams, OrthoSystem,
};

pub const THREADS_ENV: &str = "SPLINEORTHO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "splineortho", version, about = "Orthonormal spline systems and H^1 diagnostics")]
pub struct Cli {
    /// Worker threads; defaults to the SPLINEORTHO_THREADS environment variable.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or inspect knot sequences.
    #[command(subcommand)]
    Knots(KnotsCmd),
    /// Build or verify orthonormal spline systems.
    #[command(subcommand)]
    System(SystemCmd),
    /// Run experiments and emit reports.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Dyadic,
    Uniform,
    Random,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum KnotsCmd {
    Gen(GenArgs),
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Number of points (ignored for adversarial sequences).
    #[arg(long, default_value_t = 31)]
    pub n: usize,
    /// Probability of repeating an earlier point (random kind).
    #[arg(long, default_value_t = 0.0)]
    pub repeat: f64,
    #[command(flatten)]
    pub adv: AdvArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// json or text.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args, Clone)]
pub struct AdvArgs {
    #[arg(long, default_value_t = 4)]
    pub ell: usize,
    #[arg(long, default_value_t = 4.0)]
    pub gamma: f64,
    #[arg(long = "A", default_value_t = 2.0)]
    pub a: f64,
    /// Cluster length; defaults to a quarter of the largest feasible value.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Expected order; must match the file.
    #[arg(long)]
    pub k: Option<usize>,
    /// Single `ℓ` to check instead of `1..=k`.
    #[arg(long)]
    pub ell: Option<usize>,
    /// Last grid index; defaults to the whole sequence.
    #[arg(long = "N")]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SystemCmd {
    Build(BuildArgs),
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long = "N")]
    pub n_max: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// System dump written by `system build`.
    #[arg(long, visible_alias = "dump")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_orth: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCmd {
    Equivalence(EquivalenceArgs),
    Divergence(DivergenceArgs),
    Khinchin(KhinchinArgs),
}

#[derive(Debug, Args, Clone)]
pub struct SystemSource {
    /// Knot file; otherwise a sequence of the given kind is generated.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Kind::Dyadic)]
    pub kind: Kind,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long = "N", default_value_t = 256)]
    pub n_max: usize,
}

#[derive(Debug, Args)]
pub struct EquivalenceArgs {
    #[command(flatten)]
    pub source: SystemSource,
    #[arg(long, default_value_t = 50)]
    pub atoms: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.4)]
    pub c_threshold: f64,
    #[arg(long, default_value_t = 40)]
    pub levels: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_quad: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DivergenceArgs {
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    pub ladder: Vec<usize>,
    #[command(flatten)]
    pub adv: AdvArgs,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_quad: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KhinchinArgs {
    #[command(flatten)]
    pub source: SystemSource,
    #[arg(long, default_value_t = 10)]
    pub atoms: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,10,50,200")]
    pub trials: Vec<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_quad: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

enum Outcome {
    Ok,
    Failed(String),
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

fn generate_seq(kind: Kind, k: usize, count: usize, repeat: f64, seed: u64) -> Result<KnotSequence> {
    match kind {
        Kind::Dyadic => KnotSequence::dyadic(k, count),
        Kind::Uniform => KnotSequence::uniform(k, count),
        Kind::Random => KnotSequence::random(k, count, repeat, &mut ChaCha8Rng::seed_from_u64(seed)),
        Kind::Adversarial => Err(usage("adversarial sequences come with stages; use `knots gen`")),
    }
}

fn adv_config(k: usize, adv: &AdvArgs, ell: usize, seed: u64) -> AdversarialConfig {
    AdversarialConfig {
        k,
        gamma: adv.gamma,
        ell,
        a: adv.a,
        delta: adv.delta.unwrap_or_else(|| adversary::max_feasible_delta(ell, adv.a) / 4.0),
        seed,
    }
}

fn cmd_knots(cmd: &KnotsCmd) -> Result<Outcome> {
    match cmd {
        KnotsCmd::Gen(a) => {
            if a.kind == Kind::Adversarial {
                let adv = adversary::generate(&adv_config(a.k, &a.adv, a.adv.ell, a.seed))?;
                match &a.out {
                    Some(p) => io::write_adversarial(p, &adv)?,
                    None => io::write_json(None, &adv)?,
                }
                return Ok(Outcome::Ok);
            }
            let seq = generate_seq(a.kind, a.k, a.n, a.repeat, a.seed)?;
            match a.format {
                Format::Text => io::write_text(a.out.as_deref(), &io::knots_to_text(&seq))?,
                Format::Json => io::write_json(a.out.as_deref(), &seq)?,
                Format::Csv => return Err(usage("knot files are json or text")),
            }
            Ok(Outcome::Ok)
        }
        KnotsCmd::Check(a) => {
            let seq = io::read_knots(&a.input)?;
            let k = seq.order();
            if let Some(expected) = a.k {
                if expected != k {
                    return Err(usage(format!("file has order {k}, not {expected}")));
                }
            }
            let n_max = a.n_max.unwrap_or(seq.max_n());
            let ells: Vec<usize> = match a.ell {
                Some(l) => vec![l],
                None => (1..=k).collect(),
            };
            let reports = ells
                .iter()
                .map(|&l| regularity_parameter(&seq, l, n_max))
                .collect::<Result<Vec<RegularityReport>>>()?;
            io::write_json(a.out.as_deref(), &reports)?;
            Ok(Outcome::Ok)
        }
    }
}

#[derive(Debug, Serialize)]
struct CheckResult {
    name: &'static str,
    passed: bool,
    value: f64,
    tolerance: f64,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    checks: Vec<CheckResult>,
    decay_q: Option<f64>,
    decay_constant: f64,
    decay_log_slope: f64,
    combinatorics: crate::orthosys::CombinatoricsReport,
}

fn verify_system(dump: &SystemDump, sys: &OrthoSystem, tol_orth: f64, seed: u64) -> VerifyReport {
    let mut checks = Vec::new();
    checks.push(CheckResult {
        name: "orthonormality",
        value: sys.orthonormality_defect(),
        tolerance: tol_orth,
        passed: false,
    });
    let norm_defect = sys
        .functions()
        .iter()
        .map(|f| (coefficient_norm(f) - f.norm2).abs() / f.norm2)
        .fold(0.0, f64::max);
    checks.push(CheckResult { name: "norm", value: norm_defect, tolerance: 1e-9, passed: false });
    let mismatches = sys
        .functions()
        .iter()
        .zip(&dump.functions)
        .filter(|(f, d)| {
            let j = f.j_interval();
            f.i0 != d.i0 || f.j0() != d.j0 || j.lo != d.j[0] || j.hi != d.j[1]
        })
        .count();
    checks.push(CheckResult { name: "structure", value: mismatches as f64, tolerance: 0.0, passed: false });
    let poly_defect = sys
        .polynomials()
        .iter()
        .zip(&dump.polynomials)
        .flat_map(|(p, d)| {
            let c = p.monomial_coeffs();
            let len = c.len().max(d.len());
            (0..len).map(move |i| {
                (c.get(i).copied().unwrap_or(0.0) - d.get(i).copied().unwrap_or(0.0)).abs()
                    / (1.0 + c.get(i).copied().unwrap_or(0.0).abs())
            })
        })
        .fold(0.0, f64::max);
    checks.push(CheckResult { name: "polynomials", value: poly_defect, tolerance: 1e-12, passed: false });
    let decay = system_decay(sys);
    checks.push(CheckResult {
        name: "decay",
        value: decay.q.unwrap_or(f64::INFINITY),
        tolerance: 0.95,
        passed: false,
    });
    let wrong_sign = sys.functions().iter().filter(|f| f.w.get(f.j0()).is_none_or(|&w| w <= 0.0)).count();
    checks.push(CheckResult { name: "sign", value: wrong_sign as f64, tolerance: 0.0, passed: false });
    let combinatorics = char_combinatorics(sys, CombinatoricsParams { seed, ..Default::default() });
    let finite = [combinatorics.max_v_ratio, combinatorics.max_n_delta, combinatorics.max_m_delta]
        .iter()
        .all(|v| v.is_finite());
    checks.push(CheckResult {
        name: "combinatorics",
        value: if finite { combinatorics.max_n0 as f64 } else { f64::INFINITY },
        tolerance: f64::MAX,
        passed: false,
    });
    for c in &mut checks {
        c.passed = c.value <= c.tolerance;
    }
    VerifyReport {
        checks,
        decay_q: decay.q,
        decay_constant: decay.constant,
        decay_log_slope: decay.log_slope,
        combinatorics,
    }
}

fn cmd_system(cmd: &SystemCmd) -> Result<Outcome> {
    match cmd {
        SystemCmd::Build(a) => {
            let seq = io::read_knots(&a.input)?;
            let sys = build_system(&seq, a.n_max)?;
            io::write_json(a.out.as_deref(), &SystemDump::from_system(&sys))?;
            Ok(Outcome::Ok)
        }
        SystemCmd::Verify(a) => {
            let dump: SystemDump = serde_json::from_str(&std::fs::read_to_string(&a.input)?)?;
            if dump.polynomials.len() != dump.k {
                return Ok(Outcome::Failed(format!(
                    "polynomials: {} stored, {} expected",
                    dump.polynomials.len(),
                    dump.k
                )));
            }
            let sys = dump.to_system()?;
            let report = verify_system(&dump, &sys, a.tol_orth, a.seed);
            io::write_json(a.out.as_deref(), &report)?;
            let failed: Vec<String> = report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{} ({:e} > {:e})", c.name, c.value, c.tolerance))
                .collect();
            if failed.is_empty() {
                Ok(Outcome::Ok)
            } else {
                Ok(Outcome::Failed(format!("failed checks: {}", failed.join(", "))))
            }
        }
    }
}

fn source_system(s: &SystemSource, seed: u64) -> Result<OrthoSystem> {
    if s.n_max < 2 {
        return Err(Error::GridIndex { n: s.n_max, min: 2, max: usize::MAX });
    }
    let seq = match &s.input {
        Some(p) => io::read_knots(p)?,
        None => generate_seq(s.kind, s.k, s.n_max - 1, 0.0, seed)?,
    };
    build_system(&seq, s.n_max)
}

#[derive(Debug, Serialize)]
struct EquivalenceParamsOut {
    k: usize,
    n: usize,
    atoms: usize,
    seed: u64,
    #[serde(flatten)]
    params: EquivalenceParams,
    bands: BTreeMap<String, [f64; 2]>,
    max_reconstruction_error: f64,
    all_atoms_valid: bool,
}

fn band(v: &[f64]) -> [f64; 2] {
    v.iter().fold([f64::INFINITY, 0.0f64], |[lo, hi], &x| [lo.min(x), hi.max(x)])
}

fn emit<P: Serialize>(report: &ExperimentReport<P>, format: Format, out: Option<&std::path::Path>, key: &str) -> Result<()> {
    match format {
        Format::Json => io::write_json(out, report),
        Format::Csv => {
            let mut header: Vec<String> = vec![key.to_string()];
            header.extend(report.norms.keys().cloned());
            header.extend(report.ratios.keys().cloned());
            let rows_n = report.norms.values().next().map_or(0, Vec::len);
            let rows: Vec<Vec<String>> = (0..rows_n)
                .map(|i| {
                    let mut r = vec![i.to_string()];
                    r.extend(report.norms.values().map(|v| v[i].to_string()));
                    r.extend(report.ratios.values().map(|v| v[i].to_string()));
                    r
                })
                .collect();
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            io::write_text(out, &io::table_csv(&h, &rows)?)
        }
        Format::Text => Err(usage("reports are json or csv")),
    }
}

fn cmd_experiment(cmd: &ExperimentCmd) -> Result<Outcome> {
    match cmd {
        ExperimentCmd::Equivalence(a) => {
            let params = EquivalenceParams {
                trials: a.trials,
                seed: a.seed,
                tol_quad: a.tol_quad,
                levels: a.levels,
                c_threshold: a.c_threshold,
            };
            if !(a.c_threshold > 0.0 && a.c_threshold <= 0.5) || a.trials == 0 {
                return Err(usage("need 0 < c-threshold <= 1/2 and at least one trial"));
            }
            let sys = source_system(&a.source, a.seed)?;
            let synth = Synthesis::new(&sys)?;
            let mut norms: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            let mut ratios: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            let mut max_err: f64 = 0.0;
            let mut valid = true;
            for atom in atom_corpus(a.atoms, a.seed) {
                let e = expand(&atom.profile, &synth);
                let dec = atomic_decompose(&e, params.levels, params.c_threshold)?;
                max_err = max_err.max(dec.reconstruction_error);
                valid &= dec.all_atoms_valid() && !dec.truncated;
                let rep = EquivalenceReport {
                    atomic: dec.weight_sum(),
                    maximal: dec.s_norm1,
                    square: sq_norm1(&e, params.tol_quad),
                    sign_flip: sign_flip_supremum(&e, params.trials, params.seed),
                };
                for (k, v) in rep.norms() {
                    norms.entry(k.to_string()).or_default().push(v);
                }
                for (k, v) in rep.ratios() {
                    ratios.entry(k).or_default().push(v);
                }
            }
            let bands = ratios.iter().map(|(k, v)| (k.clone(), band(v))).collect();
            let report = ExperimentReport {
                norms,
                ratios,
                params: EquivalenceParamsOut {
                    k: sys.order(),
                    n: sys.n_max(),
                    atoms: a.atoms,
                    seed: a.seed,
                    params,
                    bands,
                    max_reconstruction_error: max_err,
                    all_atoms_valid: valid,
                },
            };
            emit(&report, a.format, a.out.as_deref(), "atom")?;
            if !valid || max_err >= 1e-6 {
                return Ok(Outcome::Failed(format!(
                    "atomic decomposition: valid={valid}, reconstruction error {max_err:e}"
                )));
            }
            Ok(Outcome::Ok)
        }
        ExperimentCmd::Divergence(a) => {
            let max_ell = a.ladder.iter().copied().max().ok_or_else(|| usage("empty ladder"))?;
            let base = adv_config(a.k, &a.adv, max_ell, a.seed);
            let rep = adversary::divergence_experiment(&a.ladder, &base, a.tol_quad)?;
            match a.format {
                Format::Csv => io::write_text(a.out.as_deref(), &io::growth_csv(&rep.rows)?)?,
                Format::Json => io::write_json(a.out.as_deref(), &rep)?,
                Format::Text => return Err(usage("reports are json or csv")),
            }
            if !(rep.slope > 0.0) {
                return Ok(Outcome::Failed(format!("stage sums do not grow (slope {})", rep.slope)));
            }
            Ok(Outcome::Ok)
        }
        ExperimentCmd::Khinchin(a) => {
            if a.trials.contains(&0) {
                return Err(usage("trial counts must be positive"));
            }
            let sys = source_system(&a.source, a.seed)?;
            let synth = Synthesis::new(&sys)?;
            let mut norms: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            let mut ratios: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for atom in atom_corpus(a.atoms, a.seed) {
                let e = expand(&atom.profile, &synth);
                let p = sq_norm1(&e, a.tol_quad);
                norms.entry("square".into()).or_default().push(p);
                for &t in &a.trials {
                    let s = sign_flip_supremum(&e, t, a.seed);
                    norms.entry(format!("sign_flip_{t:04}")).or_default().push(s);
                    ratios.entry(format!("square/sign_flip_{t:04}")).or_default().push(p / s);
                }
            }
            #[derive(Serialize)]
            struct P<'a> {
                k: usize,
                n: usize,
                atoms: usize,
                trials: &'a [usize],
                seed: u64,
                tol_quad: f64,
            }
            let report = ExperimentReport {
                norms,
                ratios,
                params: P { k: sys.order(), n: sys.n_max(), atoms: a.atoms, trials: &a.trials, seed: a.seed, tol_quad: a.tol_quad },
            };
            emit(&report, a.format, a.out.as_deref(), "atom")?;
            Ok(Outcome::Ok)
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| usage(format!("{THREADS_ENV}={v:?} is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    Ok(())
}

/// Runs with the given arguments (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads(cli.threads).and_then(|_| match &cli.command {
        Command::Knots(c) => cmd_knots(c),
        Command::System(c) => cmd_system(c),
        Command::Experiment(c) => cmd_experiment(c),
    });
    match result {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::Failed(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
