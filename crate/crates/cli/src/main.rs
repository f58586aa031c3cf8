use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use knowstate::harness::{self, ExperimentConfig, Format, Generator, Mode, PotentialChoice};
use knowstate::k2k3::{DfVariant, Family, RuleTable};
use knowstate::scalar::parse_rational;
use knowstate::simulate::RequestSequence;

#[derive(Parser)]
#[command(name = "knowstate", version, about = "Knowledge-state paging algorithms: certify, simulate, enumerate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a potential table against every action.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Check the printed potential table instead of the certified one.
        #[arg(long)]
        printed_potential: bool,
    },
    /// Find the smallest ratio with a valid potential (or a potential at --ratio).
    Synthesize(Common),
    /// Exact expected cost plus seeded Monte Carlo over the behavioral chain.
    Simulate(Common),
    /// Exact expected cost with a per-step log.
    Exact(Common),
    /// Worst E(cost) - C*opt over every sequence up to --length.
    Enumerate(Common),
    /// Optimal offline cost and final work function.
    Opt(Common),
    /// Print a generated request sequence, one page per line.
    Generate(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    K2,
    K3,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Uniform,
    Cyclic,
    Nemesis,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "k2")]
    algorithm: Algorithm,
    /// Page universe size (default: 3 for k2, 5 for k3).
    #[arg(long)]
    pages: Option<u32>,
    /// Sequence length (default: 12 for k2, 8 for k3).
    #[arg(long)]
    length: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Competitive ratio override, as p/q or a decimal.
    #[arg(long)]
    ratio: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    /// Request file: one page per line, '#' comments.
    #[arg(long)]
    sequence: Option<PathBuf>,
    /// Generator used when no --sequence is given.
    #[arg(long, value_enum, default_value = "uniform")]
    generator: Kind,
    /// Use the Df rule as printed (subsequents keep the old forced page).
    #[arg(long)]
    printed_df: bool,
}

impl Common {
    fn config(&self, mode: Mode) -> anyhow::Result<ExperimentConfig> {
        let family = match self.algorithm {
            Algorithm::K2 => Family::K2,
            Algorithm::K3 => Family::K3,
        };
        let mut cfg = ExperimentConfig::new(family, mode);
        if let Some(p) = self.pages {
            cfg.pages = p;
        }
        if let Some(l) = self.length {
            cfg.length = l;
        }
        cfg.trials = self.trials;
        cfg.seed = self.seed;
        if let Some(r) = &self.ratio {
            match parse_rational(r) {
                Some(q) => cfg.ratio = Some(q),
                None => bail!("--ratio: cannot parse {r:?}"),
            }
        }
        cfg.format = match self.format {
            OutputFormat::Json => Format::Json,
            OutputFormat::Csv => Format::Csv,
        };
        if let Some(path) = &self.sequence {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.sequence = Some(RequestSequence::parse_lines(&text).with_context(|| format!("parsing {}", path.display()))?);
        }
        cfg.generator = match self.generator {
            Kind::Uniform => Generator::Uniform,
            Kind::Cyclic => Generator::Cyclic,
            Kind::Nemesis => Generator::Nemesis,
        };
        if self.printed_df {
            cfg.df = DfVariant::ForcedPage;
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    let (common, mode, printed) = match &cli.command {
        Command::Verify { common, printed_potential } => (common, Mode::Verify, *printed_potential),
        Command::Synthesize(c) => (c, Mode::Synthesize, false),
        Command::Simulate(c) => (c, Mode::Simulate, false),
        Command::Exact(c) => (c, Mode::Exact, false),
        Command::Enumerate(c) => (c, Mode::Enumerate, false),
        Command::Opt(c) => (c, Mode::Opt, false),
        Command::Generate(c) => {
            let cfg = c.config(Mode::Exact)?;
            cfg.validate()?;
            let rules = match cfg.algorithm {
                Family::K2 => RuleTable::k2(),
                Family::K3 => RuleTable::k3_with(cfg.df),
            };
            let seq = harness::generate_sequence(cfg.generator, &rules, cfg.pages, cfg.length, cfg.seed);
            print!("{}", seq.to_lines());
            return Ok(true);
        }
    };
    let mut cfg = common.config(mode)?;
    if printed {
        cfg.potential = PotentialChoice::Printed;
    }
    let report = harness::run(&cfg)?;
    print!("{}", report.render(cfg.format));
    Ok(report.pass)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
