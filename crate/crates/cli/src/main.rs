use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dapp_sense::capture::{read_capture, write_capture};
use dapp_sense::dapp::DetectorParams;
use dapp_sense::e3::{decode, DEFAULT_PORT};
use dapp_sense::harness::{detect_offline, export_metrics, load_scenario, run_with_capture, ExportFormat, Transport};
use dapp_sense::make_grid;

#[derive(Debug, Parser)]
#[command(name = "dapp-sense", version, about = "gNB / spectrum-sensing dApp closed-loop simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and export per-slot metrics.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "metrics.csv")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Overrides the scenario's transport.
        #[arg(long, value_enum)]
        transport: Option<TransportArg>,
        /// TCP port; only with `--transport tcp`.
        #[arg(long)]
        port: Option<u16>,
        /// Overrides the scenario's noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write every sensing symbol to an IQS1 capture file.
        #[arg(long, value_name = "PATH")]
        iq_capture: Option<PathBuf>,
    },
    /// Run the detector over an IQS1 capture; JSON lines on stdout.
    Detect {
        capture: PathBuf,
        #[arg(long)]
        n_prb: usize,
        #[arg(long)]
        mu: u8,
        #[arg(long, default_value_t = DetectorParams::default().margin_db)]
        margin_db: f64,
    },
    /// Decode a hex dump of E3 frames and print one line per message.
    ProtoDump { hexfile: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TransportArg {
    Inproc,
    Tcp,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run { scenario, out, format, transport, port, seed, iq_capture } => {
            cmd_run(&scenario, &out, format, transport, port, seed, iq_capture.as_deref())
        }
        Command::Detect { capture, n_prb, mu, margin_db } => cmd_detect(&capture, n_prb, mu, margin_db),
        Command::ProtoDump { hexfile } => cmd_proto_dump(&hexfile),
    }
}

fn cmd_run(
    path: &Path,
    out: &Path,
    format: Format,
    transport: Option<TransportArg>,
    port: Option<u16>,
    seed: Option<u64>,
    iq_capture: Option<&Path>,
) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut scenario = load_scenario(&text).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = seed {
        scenario = scenario.with_seed(seed);
    }
    let scenario_port = match scenario.transport {
        Transport::Tcp { port } => port,
        Transport::Inproc => DEFAULT_PORT,
    };
    match transport {
        Some(TransportArg::Inproc) => scenario.transport = Transport::Inproc,
        Some(TransportArg::Tcp) => scenario.transport = Transport::Tcp { port: port.unwrap_or(scenario_port) },
        None => {
            if let (Some(p), Transport::Tcp { .. }) = (port, scenario.transport) {
                scenario.transport = Transport::Tcp { port: p };
            }
        }
    }
    let format = match format {
        Format::Csv => ExportFormat::Csv,
        Format::Jsonl => ExportFormat::Jsonl,
    };

    let mut symbols = Vec::new();
    let outcome = run_with_capture(&scenario, iq_capture.map(|_| &mut symbols));
    let (log, failure) = match outcome {
        Ok(log) => (log, None),
        Err(e) => {
            let message = e.to_string();
            (e.partial, Some(message))
        }
    };
    fs::write(out, export_metrics(&log, format)).with_context(|| format!("writing {}", out.display()))?;
    if let Some(capture_path) = iq_capture {
        let file = File::create(capture_path).with_context(|| format!("creating {}", capture_path.display()))?;
        write_capture(BufWriter::new(file), scenario.grid.fft_size(), &symbols)?;
    }
    if let Some(message) = failure {
        bail!("{message} (partial metrics written to {})", out.display());
    }
    eprintln!("{} slots, {} reports -> {}", log.records.len(), log.report_times_ms.len(), out.display());
    Ok(())
}

fn cmd_detect(path: &Path, n_prb: usize, mu: u8, margin_db: f64) -> Result<()> {
    let grid = make_grid(mu, n_prb)?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let capture = read_capture(io::BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
    if capture.fft_size != grid.fft_size() {
        bail!(
            "capture fft_size {} does not match the grid (n_prb {n_prb}, mu {mu} needs {})",
            capture.fft_size,
            grid.fft_size()
        );
    }
    let params = DetectorParams { margin_db, ..DetectorParams::default() };
    let records = detect_offline(&capture, grid, params)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for r in &records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Hex digits with any whitespace; `#` starts a comment.
fn parse_hex(text: &str) -> Result<Vec<u8>> {
    let digits: String = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.chars().filter(|c| !c.is_whitespace()))
        .collect();
    hex::decode(&digits).context("invalid hex")
}

fn cmd_proto_dump(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let bytes = parse_hex(&text)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut offset = 0;
    while offset < bytes.len() {
        let (msg, used) = decode(&bytes[offset..]).with_context(|| format!("frame at byte {offset}"))?;
        writeln!(out, "{msg}")?;
        offset += used;
    }
    Ok(())
}
