use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use super::config::{self, ExperimentConfig};
use super::{execute_run, execute_sweep, first_all_pass, reference, resolve_output_dir};
use crate::engine::Engine;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "cola", version, about = "Decentralized linear learning over gossip networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write its trace.
    Run(Common),
    /// Run every combination of the sweep axes.
    Sweep(Common),
    /// Run with local certificates and report the first round they all pass.
    Certify(Common),
    /// Compute (or load from cache) the centralized reference optimum.
    Reference(Common),
    /// Check a config and the preflight conditions without running.
    ValidateConfig(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf, PathBuf)> {
        let cfg = ExperimentConfig::load(&self.config)?;
        let base = self.config.parent().map(Path::to_path_buf).unwrap_or_default();
        let out = resolve_output_dir(self.output_dir.as_deref(), &cfg, &base);
        Ok((cfg, base, out))
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn main<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code.clamp(0, 255) as u8);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(c) => {
            let (cfg, base, out) = c.load()?;
            let outcome = execute_run(&cfg.run, &base, &out, cfg.reference_budget)?;
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep(c) => {
            let (cfg, base, out) = c.load()?;
            for o in execute_sweep(&cfg, &base, &out)? {
                let hit = o.summary.rounds_to_target.map_or("-".to_string(), |r| r.to_string());
                println!("{}: rounds to 1e-4 = {hit}", o.summary.name);
            }
        }
        Command::Certify(c) => {
            let (mut cfg, base, out) = c.load()?;
            let epsilon = cfg
                .run
                .cert_epsilon
                .ok_or_else(|| Error::config("certify needs `cert_epsilon` in the run config"))?;
            cfg.run.baseline = None;
            let outcome = execute_run(&cfg.run, &base, &out, cfg.reference_budget)?;
            let trace = outcome.trace.expect("engine runs produce a trace");
            if trace.certs.is_empty() {
                return Err(Error::config("certificates need a problem with bounded support (lasso)"));
            }
            let passes = first_all_pass(&trace, epsilon);
            if passes.is_empty() {
                println!("no certificate evaluation passed at epsilon {epsilon:e}");
            }
            for p in passes {
                println!(
                    "{}: all local certificates pass at round {} (gap {:e}, gap/epsilon {:.3})",
                    p.variant.name(),
                    p.round,
                    p.gap,
                    p.slack
                );
            }
        }
        Command::Reference(c) => {
            let (cfg, base, out) = c.load()?;
            let prepared = config::prepare(&cfg.run, &base)?;
            let r = reference::cached_reference(&out.join("reference_cache"), &prepared.problem, cfg.reference_budget)?;
            fs::create_dir_all(&out).map_err(|e| Error::file(&out, e))?;
            let path = out.join(format!("{}.reference.json", cfg.run.name));
            fs::write(&path, serde_json::to_string_pretty(&r)?).map_err(|e| Error::file(&path, e))?;
            println!("f_star = {:e} (gap {:e}, {} updates)", r.f_star, r.gap, r.updates);
            if let Some(w) = &r.warning {
                eprintln!("warning: {w}");
            }
        }
        Command::ValidateConfig(c) => {
            let (cfg, base, _) = c.load()?;
            cfg.sweep_points()?;
            let p = config::prepare(&cfg.run, &base)?;
            let beta = p.network.beta();
            let engine = Engine::new(p.problem, &p.partition, p.network, p.engine)?;
            println!(
                "ok: {} nodes, {} columns, beta = {beta:.6}, sigma' = {}",
                engine.n_nodes(),
                engine.problem().n_cols(),
                engine.sigma_prime()
            );
        }
    }
    Ok(())
}
