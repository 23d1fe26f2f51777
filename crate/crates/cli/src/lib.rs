//! `fbshare` command-line front end.
//!
//! [`run`] parses an argument vector, dispatches to the subcommand and maps
//! the outcome to an exit code: 0 on success, 1 when the library rejects the
//! input (the error name leads the message on stderr), 2 on usage errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fbshare::rng::{BankRng, DEFAULT_SEED};
use fbshare::{
    actual_cost, build_graph, direct_convolve, expected_cost_discrete, expected_cost_grouped,
    expected_nonempty_subsets, export_graph, interpolate_direct, interpolate_shared,
    monte_carlo_cost, optimize_g_discrete, partition_grouped, plan_grouping, polyphase_decompose,
    serialized_cost, shared_evaluate, write_graph, CostMode, FilterBank, OutputFrame, SignalFrame,
    Stage, DEFAULT_RHO, DEFAULT_SAMPLE_WIDTH,
};
use serde::Serialize;
use thiserror::Error;

pub mod files;

use files::{bank_to_json, bank_to_text, emit, read_bank, read_signal};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fbshare::Error),
    #[error("ReadFailure: cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("ParseError: {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("CheckFailed: {0}")]
    CheckFailed(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Number of groups: a count, or `auto` to take the discrete optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Groups {
    Auto,
    Count(f64),
}

impl FromStr for Groups {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Groups::Auto);
        }
        match s.parse::<f64>() {
            Ok(g) if g.is_finite() && g > 0.0 => Ok(Groups::Count(g)),
            _ => Err(format!("`{s}` is not a positive number or `auto`")),
        }
    }
}

impl Groups {
    fn resolve(self, filters: usize, taps: usize, mode: CostMode) -> Result<usize, CliError> {
        match self {
            Groups::Auto => {
                Ok(optimize_g_discrete(filters, taps, mode, DEFAULT_RHO)?.best_groups as usize)
            }
            Groups::Count(g) if g.fract() == 0.0 => Ok(g as usize),
            Groups::Count(g) => Err(CliError::Usage(format!(
                "error: invalid value '{g}' for '--groups': a whole number is required here"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BankFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMode {
    Direct,
    Shared,
}

#[derive(Debug, Parser)]
#[command(
    name = "fbshare",
    version,
    about = "Coefficient sharing for +/-1 FIR filter banks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Generator seed
    #[arg(long, env = "FBSHARE_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random bank
    Gen {
        #[arg(long)]
        filters: usize,
        #[arg(long)]
        taps: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, value_enum, default_value_t = BankFormat::Text)]
        format: BankFormat,
        /// Output file (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partition a bank into groups and subsets
    Partition {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long, default_value = "auto")]
        groups: Groups,
        #[arg(long, default_value_t = CostMode::Mac)]
        mode: CostMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter a signal through a bank
    Simulate {
        #[arg(long)]
        bank: PathBuf,
        /// One integer sample per line
        #[arg(long)]
        signal: PathBuf,
        #[arg(long, value_enum, default_value_t = SimMode::Shared)]
        mode: SimMode,
        #[arg(long, default_value = "auto")]
        groups: Groups,
        /// Bits per signed input sample
        #[arg(long, default_value_t = DEFAULT_SAMPLE_WIDTH)]
        sample_width: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expected operation counts
    Cost {
        #[arg(long)]
        filters: usize,
        #[arg(long)]
        taps: usize,
        /// Group count; may be fractional without --discrete
        #[arg(long, default_value = "auto")]
        groups: Groups,
        #[arg(long, default_value_t = CostMode::Mac)]
        mode: CostMode,
        /// Use integer group sizes
        #[arg(long)]
        discrete: bool,
        /// Serialization factor
        #[arg(long, requires = "discrete")]
        serialize: Option<u32>,
        #[arg(long, requires = "serialize", default_value_t = Stage::Both)]
        stage: Stage,
    },
    /// Sweep G and report the best grouping
    Optimize {
        #[arg(long)]
        filters: usize,
        #[arg(long)]
        taps: usize,
        #[arg(long, default_value_t = CostMode::Mac)]
        mode: CostMode,
        /// Minimum taps per subset, M / 2^J >= rho
        #[arg(long, default_value_t = DEFAULT_RHO)]
        rho: f64,
        /// CSV report (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Polyphase interpolation with a shared phase bank
    Polyphase {
        /// Single-filter bank file
        #[arg(long)]
        prototype: PathBuf,
        #[arg(long)]
        up: usize,
        #[arg(long, default_value = "auto")]
        groups: Groups,
        /// Input samples; a seeded 16-bit signal of length 4M if omitted
        #[arg(long)]
        signal: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
        /// Compare against upsample-then-filter and fail unless bit-equal
        #[arg(long)]
        check: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the dataflow graph
    Graph {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long, default_value = "auto")]
        groups: Groups,
        #[arg(long, default_value_t = CostMode::Mac)]
        mode: CostMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo cost over random banks
    Montecarlo {
        #[arg(long)]
        filters: usize,
        #[arg(long)]
        taps: usize,
        #[arg(long, default_value = "auto")]
        groups: Groups,
        #[arg(long, default_value_t = CostMode::Mac)]
        mode: CostMode,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
}

/// Parses `argv` (including the program name), runs it and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen {
            filters,
            taps,
            seed,
            format,
            out,
        } => {
            let bank = FilterBank::random(filters, taps, seed.seed)?;
            let text = match format {
                BankFormat::Text => bank_to_text(&bank),
                BankFormat::Json => bank_to_json(&bank),
            };
            emit(out.as_deref(), &text)
        }
        Command::Partition {
            bank,
            groups,
            mode,
            out,
        } => {
            let bank = read_bank(&bank)?;
            emit(out.as_deref(), &partition_report(&bank, groups, mode)?)
        }
        Command::Simulate {
            bank,
            signal,
            mode,
            groups,
            sample_width,
            out,
        } => {
            let bank = read_bank(&bank)?;
            let signal = read_signal(&signal, sample_width)?;
            let frame = match mode {
                SimMode::Direct => direct_convolve(&bank, &signal)?,
                SimMode::Shared => {
                    let g = groups.resolve(bank.filters(), bank.taps(), CostMode::Mac)?;
                    shared_evaluate(&bank, &plan_grouping(bank.filters(), g)?, &signal)?
                }
            };
            emit(out.as_deref(), &frame_to_text(&frame))
        }
        Command::Cost {
            filters,
            taps,
            groups,
            mode,
            discrete,
            serialize,
            stage,
        } => {
            let text = if discrete {
                let g = groups.resolve(filters, taps, mode)?;
                let mut report = expected_cost_discrete(filters, taps, g, mode)?;
                if let Some(factor) = serialize {
                    report = serialized_cost(&report, factor, stage)?;
                }
                to_json(&report)
            } else {
                let g = match groups {
                    Groups::Count(g) => g,
                    Groups::Auto => groups.resolve(filters, taps, mode)? as f64,
                };
                to_json(&expected_cost_grouped(filters, taps, g, mode)?)
            };
            emit(None, &text)
        }
        Command::Optimize {
            filters,
            taps,
            mode,
            rho,
            out,
        } => {
            let (summary, csv) = optimize_report(filters, taps, mode, rho)?;
            match out {
                Some(path) => {
                    emit(Some(&path), &csv)?;
                    emit(None, &summary)
                }
                None => emit(None, &(summary + &csv)),
            }
        }
        Command::Polyphase {
            prototype,
            up,
            groups,
            signal,
            seed,
            check,
            out,
        } => polyphase(
            &prototype,
            up,
            groups,
            signal.as_deref(),
            seed.seed,
            check,
            out.as_deref(),
        ),
        Command::Graph {
            bank,
            groups,
            mode,
            out,
        } => {
            let bank = read_bank(&bank)?;
            let g = groups.resolve(bank.filters(), bank.taps(), mode)?;
            let graph = build_graph(&bank, &plan_grouping(bank.filters(), g)?, mode)?;
            match out {
                Some(path) => Ok(write_graph(&graph, &path)?),
                None => emit(None, &export_graph(&graph)),
            }
        }
        Command::Montecarlo {
            filters,
            taps,
            groups,
            mode,
            trials,
            seed,
        } => {
            let g = groups.resolve(filters, taps, mode)?;
            let stats = monte_carlo_cost(filters, taps, g, mode, trials, seed.seed)?;
            let plan = plan_grouping(filters, g)?;
            let closed_form: f64 = plan
                .groups()
                .iter()
                .map(|grp| expected_nonempty_subsets(grp.len(), taps))
                .sum::<f64>()
                / g as f64;
            #[derive(Serialize)]
            struct Report<'a> {
                filters: usize,
                taps: usize,
                groups: usize,
                expected_nonempty_per_group: f64,
                #[serde(flatten)]
                stats: &'a fbshare::McStats,
            }
            emit(
                None,
                &to_json(&Report {
                    filters,
                    taps,
                    groups: g,
                    expected_nonempty_per_group: closed_form,
                    stats: &stats,
                }),
            )
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// One line per output sample, the `K` filter outputs comma separated.
pub fn frame_to_text(frame: &OutputFrame) -> String {
    let mut out = String::new();
    for n in 0..frame.len() {
        let row: Vec<String> = frame.at(n).iter().map(i64::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn partition_report(bank: &FilterBank, groups: Groups, mode: CostMode) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct Subset<'a> {
        pattern: String,
        value: u32,
        taps: &'a [usize],
    }
    #[derive(Serialize)]
    struct Group<'a> {
        filters: &'a [usize],
        subsets: Vec<Subset<'a>>,
    }
    #[derive(Serialize)]
    struct Report<'a> {
        filters: usize,
        taps: usize,
        groups: usize,
        mode: CostMode,
        partitions: Vec<Group<'a>>,
        cost: fbshare::CostReport,
    }

    let g = groups.resolve(bank.filters(), bank.taps(), mode)?;
    let plan = plan_grouping(bank.filters(), g)?;
    let parts = partition_grouped(bank, &plan)?;
    let cost = actual_cost(&parts, &plan, mode)?;
    let report = Report {
        filters: bank.filters(),
        taps: bank.taps(),
        groups: g,
        mode,
        partitions: parts
            .iter()
            .map(|p| Group {
                filters: p.filters(),
                subsets: p
                    .iter()
                    .map(|(pat, taps)| Subset {
                        pattern: pat.to_string(),
                        value: pat.value(),
                        taps,
                    })
                    .collect(),
            })
            .collect(),
        cost,
    };
    Ok(to_json(&report))
}

#[derive(Serialize)]
struct CsvRow {
    #[serde(rename = "G")]
    groups: u64,
    mode: CostMode,
    inner_macs: u64,
    outer_macs: u64,
    outer_adds: u64,
    total_macs: u64,
    total_ops: u64,
    feasible: u8,
    ratio: f64,
}

/// Returns the `best_G=... cost=...` line and the CSV sweep.
pub fn optimize_report(
    filters: usize,
    taps: usize,
    mode: CostMode,
    rho: f64,
) -> Result<(String, String), CliError> {
    let result = optimize_g_discrete(filters, taps, mode, rho)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    for p in &result.curve {
        let r = expected_cost_discrete(filters, taps, p.groups as usize, mode)?;
        writer
            .serialize(CsvRow {
                groups: p.groups,
                mode,
                inner_macs: r.inner_macs,
                outer_macs: r.outer_macs,
                outer_adds: r.outer_adds,
                total_macs: r.total_macs,
                total_ops: r.total_ops,
                feasible: u8::from(p.feasible),
                ratio: p.ratio,
            })
            .expect("in-memory csv write");
    }
    let csv =
        String::from_utf8(writer.into_inner().expect("in-memory csv flush")).expect("csv is utf-8");
    let mut summary = format!("best_G={} cost={}", result.best_groups, result.best_cost);
    if !result.feasible {
        summary.push_str(" infeasible=1");
    }
    summary.push('\n');
    Ok((summary, csv))
}

fn polyphase(
    prototype: &Path,
    up: usize,
    groups: Groups,
    signal: Option<&Path>,
    seed: u64,
    check: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let proto = read_bank(prototype)?;
    if proto.filters() != 1 {
        return Err(fbshare::Error::ShapeMismatch(format!(
            "prototype file holds {} filters, expected 1",
            proto.filters()
        ))
        .into());
    }
    let h = proto.row(0);
    let spec = polyphase_decompose(h, up)?;
    let signal = match signal {
        Some(path) => read_signal(path, DEFAULT_SAMPLE_WIDTH)?,
        None => SignalFrame::new(
            BankRng::new(seed).samples(4 * h.len(), DEFAULT_SAMPLE_WIDTH),
            DEFAULT_SAMPLE_WIDTH,
        )?,
    };
    let g = groups.resolve(up, spec.subfilters().taps(), CostMode::Mac)?;
    let shared = interpolate_shared(&spec, &plan_grouping(up, g)?, &signal)?;

    if check {
        let direct = interpolate_direct(h, up, &signal)?;
        if let Some(i) = (0..shared.len()).find(|&i| shared[i] != direct[i]) {
            return Err(CliError::CheckFailed(format!(
                "output {i}: shared {} != direct {}",
                shared[i], direct[i]
            )));
        }
        let mut line = String::new();
        let _ = writeln!(
            line,
            "bit_exact=1 up={up} taps={} groups={g} outputs={}",
            h.len(),
            shared.len()
        );
        return emit(None, &line);
    }
    let mut text = String::with_capacity(shared.len() * 8);
    for v in shared {
        let _ = writeln!(text, "{v}");
    }
    emit(out, &text)
}
