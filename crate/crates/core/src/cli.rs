//! The `scrambled` command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 inconclusive or
//! budget exhausted, 3 invalid input.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand};

use crate::cantor::{canonical_s, edge_in_cylinder, g0_edge_level, g0_involution, Word};
use crate::certificate::Certificate;
use crate::dyadic::Dyadic;
use crate::fusion::mycielski::family_by_name;
use crate::fusion::{fuse, mycielski_fuse, DifferenceOracle, FuseOutcome};
use crate::scrambler::{default_delta, plan_for, scheme_for, scramble, ScrambleError, ScrambleParams};
use crate::systems::{orbit_cell, SystemHandle};
use crate::verify::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

/// Largest scheme depth accepted by `scramble` and `mycielski`.
pub const MAX_SCHEME_DEPTH: usize = 12;
/// Largest depth accepted by `fuse`.
pub const MAX_FUSE_DEPTH: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "scrambled", version, about = "Scrambled Cantor schemes and their certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a scrambled scheme and write its certificate.
    Scramble {
        /// `shift`, `tent` or `sft:PATH`.
        #[arg(long)]
        system: String,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        horizon: usize,
        /// Proximality threshold; stages run up to `log2(1/eps)`.
        #[arg(long, default_value = "1/2^8")]
        eps: Dyadic,
        /// Separation threshold (default: 1 on sequence spaces, the
        /// finest endpoint scale for the tent map).
        #[arg(long)]
        delta: Option<Dyadic>,
        /// Separation events required per pair.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value = "0/2^0")]
        slack: Dyadic,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a certificate from scratch.
    Verify { path: PathBuf },
    /// The canonical dense sequence and G0 edges.
    #[command(group(ArgGroup::new("query").required(true).args(["show", "edge_in"])))]
    G0 {
        /// Print `s_N`.
        #[arg(long, value_name = "N")]
        show: Option<usize>,
        /// Print a G0 edge inside the cylinder of WORD.
        #[arg(long, value_name = "WORD", requires = "depth")]
        edge_in: Option<Word>,
        #[arg(long, value_name = "D", requires = "edge_in")]
        depth: Option<usize>,
    },
    /// Mycielski fusion against a relation's dense open sets.
    Mycielski {
        /// `e0` or `eq`.
        #[arg(long)]
        relation: String,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the G0 fusion engine.
    Fuse {
        /// `shift-liyorke` or `e0c`.
        #[arg(long)]
        oracle: String,
        #[arg(long)]
        depth: usize,
        /// Candidate extensions tried per level.
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        /// Certificate path (standard output if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the orbit of a cell.
    Orbit {
        #[arg(long)]
        system: String,
        /// A pattern over `0`, `1`, `*`, or `[lo, hi]` for the tent map.
        #[arg(long)]
        cell: String,
        #[arg(long)]
        steps: usize,
    },
}

struct Failure(i32, String);

fn invalid(msg: impl ToString) -> Failure {
    Failure(EXIT_INVALID, msg.to_string())
}

fn check_depth(depth: usize, max: usize) -> Result<(), Failure> {
    if depth == 0 || depth > max {
        return Err(invalid(format!("depth must be in 1..={max}")));
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn emit(cert: &Certificate, path: &Path) -> Result<(), Failure> {
    cert.emit(path).map_err(invalid)
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let io = |e: std::io::Error| invalid(e);
    match cmd {
        Command::Scramble {
            system,
            depth,
            horizon,
            eps,
            delta,
            k,
            slack,
            out: path,
        } => {
            check_depth(depth, MAX_SCHEME_DEPTH)?;
            let sys = SystemHandle::from_reference(&system).map_err(invalid)?;
            let delta = match delta {
                Some(d) => d,
                None => {
                    let plan = plan_for(&sys, depth, horizon);
                    default_delta(&scheme_for(&sys, depth, &plan).map_err(invalid)?)
                }
            };
            let params = ScrambleParams {
                eps,
                delta,
                k,
                horizon,
                slack,
            };
            let s = match scramble(&sys, depth, &params) {
                Ok(s) => s,
                Err(e @ ScrambleError::Plan { .. }) => return Err(Failure(EXIT_REJECTED, e.to_string())),
                Err(e) => return Err(invalid(e)),
            };
            emit(&Certificate::from_scrambled(&s), &path)?;
            let shortfalls = s.shortfalls();
            writeln!(
                out,
                "{} scheme, depth {depth}, {} pairs, horizon {horizon}: {} written",
                sys.spec().name,
                s.pairs.len(),
                path.display()
            )
            .map_err(io)?;
            if let Some(first) = shortfalls.first() {
                writeln!(
                    err,
                    "{} pairs fall short of the thresholds, first ({}, {}): {}",
                    shortfalls.len(),
                    first.a,
                    first.b,
                    first.reason
                )
                .map_err(io)?;
                return Ok(EXIT_INCONCLUSIVE);
            }
            Ok(EXIT_OK)
        }
        Command::Verify { path } => {
            let cert = Certificate::load(&path).map_err(invalid)?;
            let report = verify(&cert);
            writeln!(out, "{report}").map_err(io)?;
            Ok(if report.passed() { EXIT_OK } else { EXIT_REJECTED })
        }
        Command::G0 { show, edge_in, depth } => {
            if let Some(n) = show {
                if n > 1 << 20 {
                    return Err(invalid("N must be at most 2^20"));
                }
                writeln!(out, "{}", canonical_s(n)).map_err(io)?;
                return Ok(EXIT_OK);
            }
            let s = edge_in.expect("clap group");
            let depth = depth.expect("clap requires");
            if depth > 1 << 20 {
                return Err(invalid("depth must be at most 2^20"));
            }
            let (u, v) = edge_in_cylinder(&s, depth).map_err(invalid)?;
            let level = g0_edge_level(&u, &v).ok_or_else(|| Failure(EXIT_REJECTED, "not a G0 edge".into()))?;
            if g0_involution(level, &u).map_err(invalid)? != v {
                return Err(Failure(EXIT_REJECTED, "involution does not exchange the endpoints".into()));
            }
            writeln!(out, "level\t{level}\n{u}\n{v}").map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Mycielski {
            relation,
            depth,
            out: path,
        } => {
            check_depth(depth, MAX_SCHEME_DEPTH)?;
            let family = family_by_name(&relation).map_err(invalid)?;
            let m = mycielski_fuse(family.as_ref(), depth).map_err(|e| Failure(EXIT_REJECTED, e.to_string()))?;
            emit(&Certificate::from_mycielski(&m), &path)?;
            writeln!(out, "mycielski {relation}, depth {depth}: {} written", path.display()).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Fuse {
            oracle,
            depth,
            budget,
            out: path,
        } => {
            check_depth(depth, MAX_FUSE_DEPTH)?;
            let o = DifferenceOracle::by_name(&oracle).map_err(invalid)?;
            match fuse(&o, depth, budget).map_err(|e| Failure(EXIT_REJECTED, e.to_string()))? {
                FuseOutcome::Exhausted { level, budget } => {
                    writeln!(err, "budget of {budget} candidates exhausted extending level {level}").map_err(io)?;
                    Ok(EXIT_INCONCLUSIVE)
                }
                FuseOutcome::Certified { certificate, .. } => {
                    let cert = Certificate::from_homomorphism(&certificate);
                    match path {
                        Some(p) => {
                            emit(&cert, &p)?;
                            writeln!(out, "fuse {oracle}, depth {depth}: {} written", p.display()).map_err(io)?;
                        }
                        None => cert.write_to(&mut *out).map_err(io)?,
                    }
                    Ok(EXIT_OK)
                }
            }
        }
        Command::Orbit { system, cell, steps } => {
            let sys = SystemHandle::from_reference(&system).map_err(invalid)?;
            let c = sys.parse_cell(&cell).map_err(invalid)?;
            for m in 0..=steps {
                let image = orbit_cell(&sys, &c, m).map_err(invalid)?;
                writeln!(out, "{m}\t{image}").map_err(io)?;
            }
            Ok(EXIT_OK)
        }
    }
}
