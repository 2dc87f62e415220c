//! Command-line front end.

use crate::brgroup::{enumerate_bmsub_with, enumerate_ralt, SectionChoice};
use crate::census::{count, redei_count, redei_report, report, rows_to_csv, CensusRequest, ReportRow, Sampling};
use crate::error::{Error, Result};
use crate::exec::{default_threads, Exec};
use crate::f2res::ResidueData;
use crate::family::{load_family, Mode, MonomialConicFamily};
use crate::localdens::{admissible, leading_constant, EulerOptions};
use crate::util::rational_string;
use crate::verify::{self, Suite};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "conic-brauer", version, about = "Brauer group data, leading constants and fibre censuses for monomial conic families")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print residue spaces, the Brauer tables and admissible local data.
    Analyze {
        #[arg(long)]
        family: String,
        #[arg(long)]
        json: bool,
    },
    /// Print the predicted leading constant as JSON.
    Constant {
        #[arg(long)]
        family: String,
        #[arg(long)]
        mode: Option<Mode>,
        #[command(flatten)]
        euler: EulerArgs,
        #[arg(long, value_enum, default_value_t = SectionArg::Canonical)]
        section: SectionArg,
        #[command(flatten)]
        threads: ThreadArgs,
    },
    /// Count everywhere locally soluble fibres in a box.
    Count {
        #[arg(long)]
        family: String,
        /// Coordinate bound T (projective height bound is T^n).
        #[arg(long, required_unless_present = "sweep")]
        bound: Option<u64>,
        /// Comma-separated bounds; prints one report row per bound.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<u64>>,
        /// affine, projective or squarefree; defaults to the family's own mode.
        #[arg(long)]
        mode: Option<Mode>,
        /// Break the count down by sign, unit class mod 8 and 2-adic valuation parity.
        #[arg(long)]
        stratify: bool,
        /// Test a random fraction of the box instead of all of it.
        #[arg(long)]
        sample: Option<f64>,
        #[arg(long, default_value_t = 0, requires = "sample")]
        seed: u64,
        /// Write the result (or the sweep CSV) to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        euler: EulerArgs,
        #[command(flatten)]
        threads: ThreadArgs,
        #[arg(long)]
        no_timing: bool,
    },
    /// Count the Rédei triple set and compare with its main term.
    Redei {
        #[arg(long, required_unless_present = "sweep")]
        bound: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        euler: EulerArgs,
        #[command(flatten)]
        threads: ThreadArgs,
        #[arg(long)]
        no_timing: bool,
    },
    /// Run an invariant suite.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
    },
}

#[derive(Debug, Args)]
pub struct EulerArgs {
    #[arg(long, default_value_t = 100_000)]
    pub primes_bound: u64,
    /// Pull out the L(1, χ_{-4}) = π/4 factor detected in the 1/p coefficient.
    #[arg(long)]
    pub extract_l: bool,
}

#[derive(Debug, Args)]
pub struct ThreadArgs {
    #[arg(long, env = "CENSUS_THREADS")]
    pub threads: Option<usize>,
}

impl ThreadArgs {
    fn exec(&self) -> Exec {
        Exec::from_threads(self.threads.unwrap_or_else(default_threads))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SectionArg {
    Canonical,
    Flipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Reciprocity,
    Lexpand,
    Blocking,
    LambdaSigma,
    Meanvalue,
    All,
}

impl clap::builder::ValueParserFactory for Mode {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<Mode>().map_err(|e| e.to_string()))
    }
}

/// Parses `argv` and runs the command. Returns the process exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))
}

fn emit(out: &mut dyn Write, path: Option<&PathBuf>, json: String, csv: Option<String>) -> Result<()> {
    match path {
        None => writeln!(out, "{json}").map_err(io),
        Some(p) => {
            let body = if p.extension().is_some_and(|e| e == "csv") {
                csv.ok_or_else(|| Error::Domain("CSV output is available for sweeps only".into()))?
            } else {
                json + "\n"
            };
            std::fs::write(p, body).map_err(io)
        }
    }
}

fn rows_output(rows: &[ReportRow]) -> Result<(String, Option<String>)> {
    Ok((to_json(&rows)?, Some(rows_to_csv(rows)?)))
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Analyze { family, json } => {
            let fam = load_family(&family)?;
            let text = if json { analyze_json(&fam)? } else { analyze_text(&fam)? };
            write!(out, "{text}").map_err(io)?;
            Ok(0)
        }
        Command::Constant { family, mode, euler, section, threads } => {
            let fam = load_family(&family)?;
            let mode = mode.unwrap_or(fam.mode());
            let opts = EulerOptions {
                primes_bound: euler.primes_bound,
                extract_l: euler.extract_l,
                section: match section {
                    SectionArg::Canonical => SectionChoice::Canonical,
                    SectionArg::Flipped => SectionChoice::Flipped,
                },
                exec: threads.exec(),
            };
            let pred = leading_constant(&fam, mode, &opts)?;
            for w in &pred.warnings {
                writeln!(err, "warning: {w}").map_err(io)?;
            }
            writeln!(out, "{}", to_json(&pred)?).map_err(io)?;
            Ok(0)
        }
        Command::Count { family, bound, sweep, mode, stratify, sample, seed, out: path, euler, threads, no_timing } => {
            let fam = load_family(&family)?;
            let mut req = CensusRequest::new(fam, bound.unwrap_or(1));
            if let Some(m) = mode {
                req.mode = m;
            }
            req.stratify = stratify;
            req.exec = threads.exec();
            req.sample = sample.map(|rate| Sampling { rate, seed });
            req.primes_bound = Some(euler.primes_bound);
            if let Some(sweep) = sweep {
                let (json, csv) = rows_output(&report(&req, &sweep)?)?;
                emit(out, path.as_ref(), json, csv)?;
            } else {
                let mut res = count(&req)?;
                if no_timing {
                    res.wall_time_ms = None;
                }
                emit(out, path.as_ref(), to_json(&res)?, None)?;
            }
            Ok(0)
        }
        Command::Redei { bound, sweep, out: path, euler, threads, no_timing } => {
            let exec = threads.exec();
            if let Some(sweep) = sweep {
                let (json, csv) = rows_output(&redei_report(&sweep, exec, euler.primes_bound)?)?;
                emit(out, path.as_ref(), json, csv)?;
            } else {
                let mut res = redei_count(bound.unwrap_or(1), exec, Some(euler.primes_bound))?;
                if no_timing {
                    res.wall_time_ms = None;
                }
                emit(out, path.as_ref(), to_json(&res)?, None)?;
            }
            Ok(0)
        }
        Command::Verify { suite } => {
            let suites: Vec<Suite> = match suite {
                SuiteArg::Reciprocity => vec![Suite::Reciprocity],
                SuiteArg::Lexpand => vec![Suite::Lexpand],
                SuiteArg::Blocking => vec![Suite::Blocking],
                SuiteArg::LambdaSigma => vec![Suite::LambdaSigma],
                SuiteArg::Meanvalue => vec![Suite::Meanvalue],
                SuiteArg::All => Suite::ALL.to_vec(),
            };
            let mut ok = true;
            for s in suites {
                let rep = verify::run(s)?;
                for row in &rep.rows {
                    writeln!(out, "{s}: {row}").map_err(io)?;
                }
                for f in &rep.failures {
                    writeln!(err, "{s}: FAIL {f}").map_err(io)?;
                }
                writeln!(out, "{s}: {} ({} checks)", if rep.passed { "pass" } else { "FAIL" }, rep.checks).map_err(io)?;
                ok &= rep.passed;
            }
            Ok(if ok { 0 } else { 1 })
        }
    }
}

/// Deterministic plain-text tables for a family.
pub fn analyze_text(fam: &MonomialConicFamily) -> Result<String> {
    let res = ResidueData::build(fam);
    let mut s = String::new();
    let _ = writeln!(s, "# family {}", fam.digest());
    s.push_str(&fam.serialize());
    let gamma = res.gamma();
    let delta = num_rational::Rational64::from(fam.n() as i64) - gamma;
    let _ = writeln!(s, "\ngamma = {}\ndelta = {}", rational_string(&gamma), rational_string(&delta));
    let _ = writeln!(s, "\n## residue spaces");
    let _ = writeln!(s, "S\tV_S\tW_S\tin_D\tc_S");
    for e in res.entries() {
        let fmt_space = |v: &crate::f2res::F2Space| {
            v.elements().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        let _ = writeln!(
            s,
            "{}\t{{{}}}\t{{{}}}\t{}\t{}",
            e.s.proj(),
            fmt_space(&e.v),
            fmt_space(&e.w),
            if e.in_d { "yes" } else { "no" },
            e.c()
        );
    }
    let ralt = enumerate_ralt(&res, SectionChoice::Canonical)?;
    let _ = writeln!(s, "\n## alternating representatives ({})", ralt.len());
    for (k, f) in ralt.iter().enumerate() {
        let vals: Vec<String> = f.singletons().iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "f{}\t{}", k + 1, vals.join("\t"));
    }
    let all = enumerate_bmsub_with(&res, SectionChoice::Canonical)?;
    let _ = writeln!(s, "\n## subordinate group ({}; projective {})", all.len(), all.iter().filter(|g| g.is_pbm).count());
    for g in &all {
        let _ = writeln!(s, "{}\t{}", g.label(), if g.is_pbm { "projective" } else { "-" });
    }
    let adm = admissible(fam)?;
    let _ = writeln!(s, "\n## admissible signs ({})", adm.signs.len());
    for v in &adm.signs {
        let signs: Vec<&str> = v.iter().map(|&x| if x > 0 { "+1" } else { "-1" }).collect();
        let _ = writeln!(s, "({})", signs.join(","));
    }
    let _ = writeln!(s, "\n## admissible 2-adic classes ({})", adm.two_adic.len());
    let _ = writeln!(s, "sum_lambda\tcount\tweighted");
    let mut total = num_rational::Rational64::from(0);
    for (k, c) in adm.two_adic_strata() {
        let w = num_rational::Rational64::new(c as i64, 1i64 << k);
        total += w;
        let _ = writeln!(s, "{k}\t{c}\t{}", rational_string(&w));
    }
    let _ = writeln!(s, "total\t\t{}", rational_string(&total));
    Ok(s)
}

pub fn analyze_json(fam: &MonomialConicFamily) -> Result<String> {
    let res = ResidueData::build(fam);
    let ralt = enumerate_ralt(&res, SectionChoice::Canonical)?;
    let all = enumerate_bmsub_with(&res, SectionChoice::Canonical)?;
    let adm = admissible(fam)?;
    let value = serde_json::json!({
        "family_digest": fam.digest(),
        "gamma": rational_string(&res.gamma()),
        "residues": res.entries().map(|e| serde_json::json!({
            "S": e.s.proj().to_string(),
            "V": e.v.elements().iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            "W": e.w.elements().iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            "in_d": e.in_d,
        })).collect::<Vec<_>>(),
        "ralt": ralt.iter().map(|f| f.singletons().iter().map(|x| x.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "bmsub": all.iter().map(|g| serde_json::json!({"label": g.label(), "projective": g.is_pbm})).collect::<Vec<_>>(),
        "signs": adm.signs,
        "two_adic_strata": adm.two_adic_strata(),
    });
    Ok(to_json(&value)? + "\n")
}
