use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use skg_core::config::ExperimentConfig;
use skg_core::experiments::{self, ExperimentOutput, RunScale};
use skg_core::Error;

#[derive(Parser)]
#[command(name = "skg", version, about = "Secret key generation experiments over simulated multipath channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// key = value configuration file; built-in 802.11a defaults otherwise
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Sessions (or trials) per point
    #[arg(long)]
    trials: Option<usize>,
    /// Larger trial and sample counts (400 trials, 4e6 samples)
    #[arg(long)]
    full: bool,
    /// Override a configuration key, e.g. --set snr_f_db=20
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// CSI key capacity against SNR for the simulated and ideal profiles
    CapacitySweep(Common),
    /// CSI vs RSSI capacity for L = 2, 5, 10 at M = 10
    RssiCompare(Common),
    /// Real/imaginary vs magnitude/phase mutual information
    Magphase(Common),
    /// Tone and delay-bin correlation matrices
    CorrMatrix(Common),
    /// Rate-vs-SNR thresholds for the LDPC variants
    LdpcWaterfall(Common),
    /// Run key agreement sessions and print the keys
    Keygen {
        #[command(flatten)]
        common: Common,
        /// Noise variance per complex dimension; 0 gives a noiseless link
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Joint phase-offset estimation over on- and off-grid offsets
    PhaseDemo(Common),
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::Infeasible(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    cfg.apply_overrides(&common.overrides)?;
    Ok(cfg)
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn write_outputs(name: &str, common: &Common, cfg: &ExperimentConfig, scale: &RunScale, out: &ExperimentOutput) -> Result<(), Failure> {
    let dir = &common.out;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let kv = cfg.to_kv();
    let hash = sha256_hex(&kv);
    let manifest = serde_json::json!({
        "subcommand": name,
        "seed": common.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "trials": scale.trials,
        "samples": scale.samples,
        "config": kv,
        "config_sha256": hash,
        "outputs": out.tables.iter().map(|t| format!("{}.csv", t.name)).collect::<Vec<_>>(),
        "checks": out.checks.iter().map(|c| serde_json::json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect::<Vec<_>>(),
    });
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Runtime(e.to_string()))? + "\n";
    fs::write(&path, body).map_err(|e| io_err(&path, e))?;
    for t in &out.tables {
        let path = dir.join(format!("{}.csv", t.name));
        fs::write(&path, t.to_csv(&hash)).map_err(|e| io_err(&path, e))?;
    }
    if !out.log.is_empty() {
        let path = dir.join(format!("{name}.log"));
        fs::write(&path, out.log.join("\n") + "\n").map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let (name, common, noise) = match &cli.command {
        Command::CapacitySweep(c) => ("capacity-sweep", c, None),
        Command::RssiCompare(c) => ("rssi-compare", c, None),
        Command::Magphase(c) => ("magphase", c, None),
        Command::CorrMatrix(c) => ("corr-matrix", c, None),
        Command::LdpcWaterfall(c) => ("ldpc-waterfall", c, None),
        Command::Keygen { common, noise } => ("keygen", common, *noise),
        Command::PhaseDemo(c) => ("phase-demo", c, None),
    };
    let mut cfg = load_config(common)?;
    if let Some(var) = noise {
        if !(var >= 0.0) {
            return Err(Failure::Config("--noise must be a nonnegative variance".into()));
        }
        cfg.snr_f_db = 10.0 * (cfg.channel.total_power / var).log10();
    }
    let mut scale = if common.full { RunScale::FULL } else { RunScale::DESK };
    if let Some(t) = common.trials {
        scale.trials = t;
    }
    let out = experiments::run(name, &cfg, common.seed, &scale)?;
    write_outputs(name, common, &cfg, &scale, &out)?;

    for line in &out.log {
        println!("{line}");
    }
    if let Some(keys) = out.table("keys") {
        for r in keys.rows().take(3) {
            println!("session {} key_a {}", r[0], r[3]);
            println!("session {} key_b {}", r[0], r[4]);
        }
    }
    for c in &out.checks {
        let status = if c.passed { "ok  " } else { "FAIL" };
        println!("{status} {}{}", c.name, if c.detail.is_empty() { String::new() } else { format!(": {}", c.detail) });
    }
    println!("wrote {}", common.out.display());
    Ok(out.all_passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
