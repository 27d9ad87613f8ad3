use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use pimflow::workloads::{run_bench, BenchReport, Workload, WorkloadSpec};
use pimflow::{SimConfig, XferMode};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Strategy {
    Serial,
    Parallel,
    Both,
}

impl Strategy {
    fn modes(self) -> Vec<XferMode> {
        match self {
            Strategy::Serial => vec![XferMode::Serial],
            Strategy::Parallel => vec![XferMode::Parallel],
            Strategy::Both => vec![XferMode::Serial, XferMode::Parallel],
        }
    }
}

/// Runs one workload on the simulated device and checks it against the host.
#[derive(Debug, Parser)]
#[command(name = "bench", version)]
struct Cli {
    /// VA, SEL, UNI, RED, GEMV or HST-S.
    #[arg(long)]
    workload: Workload,
    /// Overrides the device configuration.
    #[arg(long)]
    dpus: Option<usize>,
    #[arg(long)]
    elems_per_dpu: Option<usize>,
    /// Overrides the device configuration.
    #[arg(long)]
    tasklets: Option<usize>,
    /// JSON file with `device` and `cost` sections.
    #[arg(long)]
    device_config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    gemv_rows: Option<usize>,
    #[arg(long)]
    gemv_cols: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    /// Simulate DPUs one after another.
    #[arg(long)]
    sequential: bool,
    /// Where to write the JSON report. Printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

const EXIT_MISMATCH: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn summary(r: &BenchReport) -> String {
    let mut s = format!(
        "{} on {} DPUs x {} tasklets, {} elements: {}\n",
        r.workload, r.config.n_dpus, r.config.tasklets, r.config.total_elements, r.verdict
    );
    for (name, t) in &r.timings {
        s += &format!(
            "  {name:<8} total {:>12.0} ns  up {:>11.0}  kernel {:>11.0}  down {:>11.0}  post {:>9.0}  rounds {}\n",
            t.total_ns, t.cpu_to_dpu_ns, t.kernel_ns, t.dpu_to_cpu_ns, t.host_post_ns, t.rounds
        );
    }
    s
}

fn run(cli: Cli) -> Result<bool, (u8, String)> {
    let config_err = |e: String| (EXIT_CONFIG, e);
    let mut sim = match &cli.device_config {
        Some(p) => SimConfig::load(p).map_err(|e| config_err(e.to_string()))?,
        None => SimConfig::default(),
    };
    if let Some(n) = cli.dpus {
        sim.device.n_dpus = n;
    }
    if let Some(t) = cli.tasklets {
        sim.device.tasklets = t;
    }
    let mut spec = WorkloadSpec::new(cli.workload).with_seed(cli.seed);
    spec.n_dpus = sim.device.n_dpus;
    if let Some(e) = cli.elems_per_dpu {
        spec.elems_per_dpu = e;
    }
    if let Some(r) = cli.gemv_rows {
        spec.gemv_rows_per_dpu = r;
    }
    if let Some(c) = cli.gemv_cols {
        spec.gemv_cols = c;
    }
    if let Some(b) = cli.bins {
        spec.bins = b;
    }

    let report = run_bench(&spec, &sim, &cli.strategy.modes(), !cli.sequential).map_err(|e| {
        let code = if e.is_config() { EXIT_CONFIG } else { EXIT_MISMATCH };
        (code, e.to_string())
    })?;
    let json = report.to_json();
    match &cli.report {
        Some(p) => {
            std::fs::write(p, json + "\n").map_err(|e| config_err(format!("{}: {e}", p.display())))?;
            print!("{}", summary(&report));
        }
        None => println!("{json}"),
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("bench: output differs from the host reference");
            ExitCode::from(EXIT_MISMATCH)
        }
        Err((code, msg)) => {
            eprintln!("bench: {msg}");
            ExitCode::from(code)
        }
    }
}
