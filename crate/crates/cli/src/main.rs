mod args;
mod output;
mod run;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use neu_core::harness::RunManifest;

use args::Cli;
use run::{dispatch, load_overrides, RunContext};

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new().num_threads(usize::from(n)).build_global()?;
    }
    let ctx = RunContext {
        seed: cli.global.seed,
        format: cli.global.format,
        timings: cli.global.timings,
        overrides: load_overrides(cli.global.config.as_deref())?,
    };
    let run = dispatch(cli.command, &ctx)?;
    let mut manifest = RunManifest::new(&run.command, ctx.seed, &run.config)?;
    manifest.outputs = run.outputs.names();
    manifest.timings = run.timings;
    let mut outputs = run.outputs;
    outputs.json("manifest.json", &manifest)?;
    outputs.write_to(&cli.global.out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
