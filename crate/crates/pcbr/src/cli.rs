//! Command-line surface. Five subcommands: `bounds` (closed-form rate and
//! subpacketization), `plan` (emit a query table), `run` (one simulated
//! retrieval), `audit` (single-point auditors), `sweep` (grid run).
//! Every output format is deterministic for a fixed invocation.

use clap::{Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::audit::{
    audit_index_discipline, audit_rate_and_bounds, audit_shape_privacy, audit_statistical_privacy,
    sweep, AuditReport,
};
use crate::error::{Error, Result};
use crate::field::{is_prime, SUPPORTED_PRIMES};
use crate::params::{BoundsReport, Params};
use crate::protocol::run_round_trip;
use crate::ratio::format_ratio;
use crate::scheme::{build_canonical_plan, mask_plan, render_table, QueryPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "pcbr",
    version,
    about = "Private retrieval of contiguous message blocks: exact bounds, query plans, simulation, audits"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format (also settable via PCBR_FORMAT).
    #[arg(long, global = true, env = "PCBR_FORMAT", value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write output here instead of standard output.
    #[arg(short = 'o', long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact optimal rate and subpacketization bounds for (N, K, D).
    Bounds {
        #[arg(short = 'N', long = "N")]
        n: usize,
        #[arg(short = 'K', long = "K")]
        k: usize,
        #[arg(short = 'D', long = "D")]
        d: usize,
    },
    /// The query plan for one demand window, as a table, JSON, or CSV.
    Plan {
        #[arg(short = 'N', long = "N")]
        n: usize,
        #[arg(short = 'K', long = "K")]
        k: usize,
        #[arg(short = 'D', long = "D")]
        d: usize,
        /// Demand window index in [1:E].
        #[arg(short = 'j', long = "j")]
        j: usize,
        /// Mask the plan with per-message permutations drawn from this seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// One full retrieval round: build, mask, answer, decode, cross-check.
    Run {
        #[arg(short = 'N', long = "N")]
        n: usize,
        #[arg(short = 'K', long = "K")]
        k: usize,
        #[arg(short = 'D', long = "D")]
        d: usize,
        #[arg(short = 'j', long = "j")]
        j: usize,
        /// Field size (a prime; 2, 3, 5, 7, or 11).
        #[arg(short = 'q', long = "q", default_value_t = 2)]
        q: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// All audits for a single (N, K, D).
    Audit {
        #[arg(short = 'N', long = "N")]
        n: usize,
        #[arg(short = 'K', long = "K")]
        k: usize,
        #[arg(short = 'D', long = "D")]
        d: usize,
        /// Sample count for the statistical privacy check.
        #[arg(long, default_value_t = 10000)]
        samples: usize,
        /// Total-variation pass threshold for the statistical check.
        #[arg(long, default_value_t = 0.05)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Audits and round trips over a parameter grid.
    Sweep {
        /// Inclusive N range, e.g. "2..3" or "2".
        #[arg(long = "N", default_value = "2..3")]
        n: String,
        /// Inclusive K range, e.g. "3..8" or "5".
        #[arg(long = "K", default_value = "3..8")]
        k: String,
        /// Comma-separated field sizes, e.g. "2,3".
        #[arg(long = "q", default_value = "2,3")]
        q: String,
        /// Independent stores per (window, field) grid point.
        #[arg(long, default_value_t = 3)]
        seeds: usize,
    },
}

/// "a..b" (inclusive) or a single "a".
fn parse_range(text: &str, what: &str) -> Result<(usize, usize)> {
    let parse_one = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidParams(format!("{what} range: bad number {s:?}")))
    };
    match text.split_once("..") {
        Some((a, b)) => Ok((parse_one(a)?, parse_one(b)?)),
        None => {
            let v = parse_one(text)?;
            Ok((v, v))
        }
    }
}

fn parse_q_list(text: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let q: u64 = part
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParams(format!("bad field size {part:?}")))?;
        check_q(q)?;
        out.push(q);
    }
    if out.is_empty() {
        return Err(Error::EmptyRange("field list".into()));
    }
    Ok(out)
}

fn check_q(q: u64) -> Result<()> {
    if !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    if !SUPPORTED_PRIMES.contains(&q) {
        return Err(Error::InvalidParams(format!(
            "q = {q} unsupported; pick one of {SUPPORTED_PRIMES:?}"
        )));
    }
    Ok(())
}

fn plan_to_csv(plan: &QueryPlan) -> String {
    let mut out = String::from("server,k,support,entries,demand_entry,side_info\n");
    for (srv, list) in plan.servers.iter().enumerate() {
        for spec in list {
            let support = spec
                .support
                .indices()
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(";");
            let entries = spec
                .entries
                .iter()
                .map(|(m, i)| format!("{m}:{i}"))
                .collect::<Vec<_>>()
                .join(";");
            let demand = spec.demand_entry.map(|i| i.to_string()).unwrap_or_default();
            let side = spec
                .side_info
                .map(|s| format!("{}:{}", s.server, s.symbol))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{support},{entries},{demand},{side}",
                srv + 1,
                spec.k()
            );
        }
    }
    out
}

fn audit_to_csv(report: &AuditReport) -> String {
    let mut out = String::from("name,params,verdict,evidence\n");
    for c in &report.checks {
        let _ = writeln!(
            out,
            "{},\"{}\",{},\"{}\"",
            c.name,
            c.params,
            c.verdict.as_str(),
            c.evidence.replace('"', "\"\"")
        );
    }
    out
}

/// Rendered output plus the process exit code.
#[derive(Debug)]
struct Outcome {
    text: String,
    code: i32,
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let format = cli.format;
    match &cli.command {
        Command::Bounds { n, k, d } => {
            let report = BoundsReport::compute(*n, *k, *d)?;
            let text = match format {
                Format::Text => report.to_text() + "\n",
                Format::Json => serde_json::to_string_pretty(&report.to_json()).unwrap() + "\n",
                Format::Csv => {
                    let p = &report.params;
                    format!(
                        "N,K,D,f,g,M,E,rate,L_lower,L_upper,tight,symbols_per_server\n\
                         {},{},{},{},{},{},{},{},{},{},{},{}\n",
                        p.n,
                        p.k,
                        p.d,
                        p.f,
                        p.g,
                        p.m,
                        p.e,
                        format_ratio(&report.rate),
                        report.l_lower,
                        report.l_upper,
                        report.tight,
                        report.symbols_per_server
                    )
                }
            };
            Ok(Outcome { text, code: 0 })
        }
        Command::Plan { n, k, d, j, seed } => {
            let params = Params::derive(*n, *k, *d)?;
            let canonical = build_canonical_plan(&params, *j)?;
            let plan = match seed {
                None => canonical,
                Some(s) => mask_plan(&canonical, *s)?.0,
            };
            let text = match format {
                Format::Text => render_table(&plan),
                Format::Json => serde_json::to_string_pretty(&plan.to_json()).unwrap() + "\n",
                Format::Csv => plan_to_csv(&plan),
            };
            Ok(Outcome { text, code: 0 })
        }
        Command::Run {
            n,
            k,
            d,
            j,
            q,
            seed,
        } => {
            check_q(*q)?;
            let report = run_round_trip(*n, *k, *d, *j, *q, *seed)?;
            let text = match format {
                Format::Text => report.to_text() + "\n",
                Format::Json => serde_json::to_string_pretty(&report.to_json()).unwrap() + "\n",
                Format::Csv => format!(
                    "N,K,D,j,q,rate,decode,oracle\n{},{},{},{},{},{},{},{}\n",
                    n,
                    k,
                    d,
                    j,
                    q,
                    format_ratio(&report.rate),
                    report.decode_ok,
                    report.oracle
                ),
            };
            Ok(Outcome {
                text,
                code: i32::from(!report.ok),
            })
        }
        Command::Audit {
            n,
            k,
            d,
            samples,
            threshold,
            seed,
        } => {
            let params = Params::derive(*n, *k, *d)?;
            let mut report = audit_shape_privacy(*n, *k, *d)?;
            let mut discipline_ok = true;
            for j in 1..=params.e {
                let plan = build_canonical_plan(&params, j)?;
                let sub = audit_index_discipline(&plan);
                discipline_ok &= sub.passed();
                if j == 1 || !sub.passed() {
                    report.merge(sub);
                }
            }
            report.push(
                "index_discipline_all_windows",
                format!("{params}"),
                discipline_ok,
                format!("windows 1..={} checked", params.e),
            );
            report.merge(audit_rate_and_bounds(*n, *k, *d)?);
            if params.e >= 2 {
                report.merge(audit_statistical_privacy(
                    *n, *k, *d, 1, 2, 1, *samples, *threshold, *seed,
                )?);
            }
            render_report(&report, format)
        }
        Command::Sweep { n, k, q, seeds } => {
            let n_range = parse_range(n, "N")?;
            let k_range = parse_range(k, "K")?;
            let q_list = parse_q_list(q)?;
            let report = sweep(n_range, k_range, &q_list, *seeds)?;
            render_report(&report, format)
        }
    }
}

fn render_report(report: &AuditReport, format: Format) -> Result<Outcome> {
    let text = match format {
        Format::Text => report.to_text(),
        Format::Json => serde_json::to_string_pretty(&report.to_json()).unwrap() + "\n",
        Format::Csv => audit_to_csv(report),
    };
    Ok(Outcome {
        text,
        code: i32::from(!report.passed()),
    })
}

fn usage_error(err: &Error) -> bool {
    matches!(
        err,
        Error::InvalidParams(_)
            | Error::InvalidDemandIndex { .. }
            | Error::NotPrime(_)
            | Error::EmptyRange(_)
    )
}

/// Parses the process arguments, runs the command, writes the output, and
/// returns the exit code: 0 success, 1 failed audit/run, 2 usage error.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(outcome) => {
            let written = match &cli.output {
                None => {
                    print!("{}", outcome.text);
                    Ok(())
                }
                Some(path) => std::fs::write(path, &outcome.text),
            };
            if let Err(io) = written {
                eprintln!("error: cannot write output: {io}");
                return 2;
            }
            outcome.code
        }
        Err(err) => {
            eprintln!("error: {err}");
            if usage_error(&err) {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("2..3", "N").unwrap(), (2, 3));
        assert_eq!(parse_range("5", "K").unwrap(), (5, 5));
        assert_eq!(parse_range(" 3 .. 8 ", "K").unwrap(), (3, 8));
        assert!(parse_range("x..3", "N").is_err());
        // An inverted range parses here; the sweep itself rejects it.
        assert_eq!(parse_range("3..2", "K").unwrap(), (3, 2));
    }

    #[test]
    fn q_list_parsing() {
        assert_eq!(parse_q_list("2,3").unwrap(), vec![2, 3]);
        assert_eq!(parse_q_list("11").unwrap(), vec![11]);
        assert!(matches!(parse_q_list("4"), Err(Error::NotPrime(4))));
        assert!(parse_q_list("13").is_err(), "prime but unsupported");
        assert!(parse_q_list("2,x").is_err());
    }

    #[test]
    fn q_validation_messages() {
        let err = check_q(4).unwrap_err();
        assert_eq!(err.to_string(), "q must be prime (got 4)");
        assert!(check_q(13).unwrap_err().to_string().contains("unsupported"));
    }

    #[test]
    fn csv_plan_schema() {
        let params = Params::derive(2, 4, 2).unwrap();
        let plan = build_canonical_plan(&params, 1).unwrap();
        let csv = plan_to_csv(&plan);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "server,k,support,entries,demand_entry,side_info"
        );
        // 2 servers x 6 symbols.
        assert_eq!(csv.lines().count(), 13);
        assert!(csv.contains("1,2,1;3,"));
    }

    #[test]
    fn cli_parses_documented_invocations() {
        for argv in [
            vec!["pcbr", "bounds", "-N", "2", "-K", "5", "-D", "2"],
            vec![
                "pcbr", "plan", "-N", "2", "-K", "5", "-D", "2", "-j", "1", "--format", "text",
            ],
            vec![
                "pcbr", "run", "-N", "2", "-K", "5", "-D", "2", "-j", "3", "-q", "2", "--seed", "7",
            ],
            vec!["pcbr", "audit", "-N", "2", "-K", "5", "-D", "2"],
            vec![
                "pcbr", "sweep", "--N", "2..3", "--K", "3..8", "--q", "2,3", "--seeds", "5",
            ],
            vec![
                "pcbr", "plan", "--N", "2", "--K", "5", "--D", "3", "-j", "1",
            ],
        ] {
            Cli::try_parse_from(&argv).unwrap_or_else(|e| panic!("{argv:?}: {e}"));
        }
    }

    #[test]
    fn bounds_dispatch_text() {
        let cli = Cli::try_parse_from(["pcbr", "bounds", "-N", "2", "-K", "5", "-D", "2"]).unwrap();
        let out = dispatch(&cli).unwrap();
        assert_eq!(out.code, 0);
        assert!(out.text.contains("rate          = 8/13"));
        assert!(out.text.contains("symbols/server = 13"));
    }

    #[test]
    fn invalid_params_are_usage_errors() {
        let cli = Cli::try_parse_from(["pcbr", "bounds", "-N", "1", "-K", "5", "-D", "2"]).unwrap();
        let err = dispatch(&cli).unwrap_err();
        assert!(usage_error(&err));
        assert!(err.to_string().contains("N must be >= 2"));
    }

    #[test]
    fn run_rejects_composite_field() {
        let cli = Cli::try_parse_from([
            "pcbr", "run", "-N", "2", "-K", "5", "-D", "2", "-j", "1", "-q", "4",
        ])
        .unwrap();
        let err = dispatch(&cli).unwrap_err();
        assert!(usage_error(&err));
        assert_eq!(err.to_string(), "q must be prime (got 4)");
    }
}
