//! `indra`: command-line pipelines over relational representations.
//!
//! Exit codes: 0 success, 1 data error or failed verification, 2 usage error.

mod cli;
mod manifest;
mod run;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use cli::{Cli, Command};
use manifest::Run;

fn dispatch(cli: &Cli) -> Result<bool> {
    let mut record = Run::default();
    let passed = match &cli.command {
        Command::Synth(a) => run::synth(a, &mut record)?,
        Command::Build(a) => run::build(a, &mut record)?,
        Command::Ops(a) => run::ops(a, &mut record)?,
        Command::Verify(a) => run::verify_cmd(a, &mut record)?,
        Command::Match(a) => run::match_cmd(a, &mut record)?,
        Command::Probe(a) => run::probe(a, &mut record)?,
        Command::Sweep(a) => run::sweep(a, &mut record)?,
        Command::Info(a) => return run::info(a),
    };
    if let Some(dir) = run::out_of(&cli.command) {
        let config = serde_json::to_value(&cli.command)?;
        record.finish(&dir, config, rayon::current_num_threads())?;
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
