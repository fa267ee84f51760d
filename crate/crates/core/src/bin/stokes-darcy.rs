use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use stokes_darcy::config::RunConfig;
use stokes_darcy::driver;
use stokes_darcy::output::Manifest;

#[derive(Parser)]
#[command(name = "stokes-darcy", version, about = "Diffuse-interface Stokes-Darcy solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solve or sweep described by a TOML config.
    Solve {
        config: PathBuf,
        /// Output directory (default: the config's `output`, else `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for concurrent sweep levels; 1 runs levels sequentially.
        #[arg(long)]
        threads: Option<usize>,
        /// Audit mesh and operators only, without time stepping.
        #[arg(long)]
        check: bool,
    },
}

/// Machine-readable failure record, printed to stderr and saved as `error.json`.
#[derive(Serialize)]
struct ErrorRecord {
    kind: String,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    level: Option<usize>,
}

fn fail(out: Option<&Path>, kind: &str, message: String, level: Option<usize>, code: u8) -> ExitCode {
    let record = ErrorRecord {
        kind: kind.to_string(),
        message,
        level,
    };
    let text = serde_json::to_string(&record).expect("error record serializes");
    eprintln!("{text}");
    if let Some(dir) = out {
        let _ = fs::create_dir_all(dir).and_then(|()| fs::write(dir.join("error.json"), text + "\n"));
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let Command::Solve {
        config,
        out,
        threads,
        check,
    } = Cli::parse().command;

    let cfg = match RunConfig::from_file(&config) {
        Ok(c) => c,
        Err(e) => return fail(out.as_deref(), e.kind(), e.to_string(), None, 1),
    };
    let out = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = driver::ensure_writable(&out) {
        return fail(None, "output", format!("{}: {e}", out.display()), None, 2);
    }
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(Some(&out), "threads", e.to_string(), None, 1);
        }
    }

    if check {
        let items = match driver::check(&cfg) {
            Ok(items) => items,
            Err(e) => return fail(Some(&out), e.kind(), e.to_string(), None, 1),
        };
        let written = fs::File::create(out.join("check.csv"))
            .map_err(Into::into)
            .and_then(|f| driver::write_check_csv(&items, BufWriter::new(f)))
            .and_then(|()| {
                let mut m = Manifest::new("check", cfg.echo());
                m.artifacts = vec!["check.csv".into(), "manifest.json".into()];
                m.write(&out)
            });
        if let Err(e) = written {
            return fail(Some(&out), e.kind(), e.to_string(), None, 1);
        }
        let failed: Vec<_> = items.iter().filter(|i| !i.passed()).map(|i| i.name.as_str()).collect();
        for i in &items {
            log::info!("{}: {:e} (tolerance {:e}) {}", i.name, i.value, i.tolerance, if i.passed() { "ok" } else { "FAILED" });
        }
        return if failed.is_empty() {
            ExitCode::SUCCESS
        } else {
            fail(Some(&out), "check", format!("failed checks: {}", failed.join(", ")), None, 1)
        };
    }

    match driver::execute(&cfg, &out, threads != Some(1)) {
        Ok(run) => {
            log::info!("wrote {} to {}", run.artifacts.join(", "), out.display());
            ExitCode::SUCCESS
        }
        Err(f) => fail(Some(&out), f.source.kind(), f.source.to_string(), Some(f.level), 1),
    }
}
