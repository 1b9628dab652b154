use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rdrn::perf::{aloha_csv, p1_csv, p23_csv, AlohaModel, PerfError, TimingConstants};
use rdrn::scenario::{compare_golden, load_config, run_batch, RunMetrics};

const EXIT_DIAGNOSED: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "rdrnsim", version, about = "Orderwire control-plane emulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write transitions.log, metrics.csv and summary.txt.
    Run {
        config: PathBuf,
        /// Overrides the config seed; batch runs use seed, seed+1, ...
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        runs: u32,
    },
    /// Evaluate a closed-form timing or capacity model.
    Model(ModelArgs),
    /// Compare a transition log against a golden one.
    Diff { log: PathBuf, golden: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    P1,
    P2,
    P3,
    Aloha,
}

#[derive(Args)]
struct ModelArgs {
    which: Which,
    /// First value of the swept size (ESs for p1, RNs otherwise).
    #[arg(long)]
    from: Option<u64>,
    #[arg(long)]
    to: Option<u64>,
    /// MYCALL timer T, seconds (p1).
    #[arg(long, default_value_t = 20.0)]
    t: f64,
    /// Frequency pairs L (p1).
    #[arg(long, default_value_t = 3)]
    fmax: u64,
    /// Seconds per labeling step (p1).
    #[arg(long, default_value_t = 1e-9)]
    k_top: f64,
    /// Orderwire packet size, bits (aloha).
    #[arg(long, default_value_t = 400)]
    bits: u64,
    /// Extra packets per update caused by handoffs (aloha).
    #[arg(long, default_value_t = 0.0)]
    handoff_fraction: f64,
    /// Emit CSV instead of an aligned table.
    #[arg(long)]
    csv: bool,
}

fn model(a: &ModelArgs) -> Result<String, PerfError> {
    let tc = TimingConstants::default().with_k_top(a.k_top);
    let (lo, hi) = match a.which {
        Which::P1 => (2, 6),
        Which::P2 | Which::P3 => (0, 10),
        Which::Aloha => (5, 30),
    };
    let range = a.from.unwrap_or(lo)..=a.to.unwrap_or(hi);
    match a.which {
        Which::P1 => p1_csv(range, a.t, a.fmax, &tc),
        Which::P2 | Which::P3 => p23_csv(range, &tc),
        Which::Aloha => aloha_csv(
            range,
            &AlohaModel {
                packet_bits: a.bits,
                ..AlohaModel::default()
            },
            a.handoff_fraction,
        ),
    }
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run {
            config,
            seed,
            out,
            runs,
        } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{}: {e}", config.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let first = seed.unwrap_or(cfg.seed);
            let seeds: Vec<u64> = (0..runs.max(1) as u64)
                .map(|k| first.wrapping_add(k))
                .collect();
            let results = match run_batch(&cfg, &seeds) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let written = if let [one] = results.as_slice() {
                one.write_to(&out)
            } else {
                results
                    .iter()
                    .try_for_each(|r| r.write_to(&out.join(format!("seed_{}", r.metrics.seed))))
                    .and_then(|_| {
                        let merged = RunMetrics::merge(results.iter().map(|r| &r.metrics));
                        std::fs::write(out.join("metrics.csv"), merged.to_csv())?;
                        std::fs::write(out.join("summary.txt"), merged.summary())
                    })
            };
            if let Err(e) = written {
                eprintln!("cannot write {}: {e}", out.display());
                return ExitCode::FAILURE;
            }
            let mut diagnosed = false;
            for r in &results {
                if let Some(d) = &r.diagnosis {
                    eprintln!("seed {}: {d}", r.metrics.seed);
                    diagnosed = true;
                }
            }
            if let [one] = results.as_slice() {
                print!("{}", one.summary());
            } else {
                print!(
                    "{}",
                    RunMetrics::merge(results.iter().map(|r| &r.metrics)).summary()
                );
            }
            if diagnosed {
                ExitCode::from(EXIT_DIAGNOSED)
            } else {
                ExitCode::SUCCESS
            }
        }
        Cmd::Model(a) => match model(&a) {
            Ok(csv) => {
                if a.csv {
                    print!("{csv}");
                } else {
                    for line in csv.lines() {
                        let cells: Vec<String> =
                            line.split(',').map(|c| format!("{c:>30}")).collect();
                        println!("{}", cells.join(""));
                    }
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Cmd::Diff { log, golden } => {
            let read = |p: &PathBuf| {
                std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))
            };
            let (a, g) = match (read(&log), read(&golden)) {
                (Ok(a), Ok(g)) => (a, g),
                (Err(e), _) | (_, Err(e)) => {
                    eprintln!("{e}");
                    return ExitCode::FAILURE;
                }
            };
            let report = compare_golden(&a, &g);
            print!("{report}");
            if report.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
