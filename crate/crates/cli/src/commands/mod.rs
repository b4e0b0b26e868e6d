mod corpus;
mod detect;
mod labels;
mod train;

use anyhow::Result;

use crate::args::{Cli, Command, GlobalOpts, LabelsCmd, ManifestCmd};
use crate::config::{usage, RunConfig, UsageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Some records or files were skipped under `--strict`.
    Partial,
}

impl Status {
    fn partial_if(strict: bool, skipped: usize) -> Self {
        if strict && skipped > 0 {
            Status::Partial
        } else {
            Status::Success
        }
    }
}

/// 0 success, 1 usage error, 2 partial failure, 3 anything else.
pub fn exit_code(res: &Result<Status>) -> i32 {
    match res {
        Ok(Status::Success) => 0,
        Ok(Status::Partial) => 2,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => 1,
        Err(_) => 3,
    }
}

pub(crate) struct Ctx {
    pub cfg: RunConfig,
    pub opts: GlobalOpts,
}

pub fn run(cli: Cli) -> Result<Status> {
    let mut cfg = RunConfig::load(cli.global.config.as_deref())?;
    cfg.apply_seed(cli.global.seed);
    if let Some(n) = cli.global.jobs {
        set_jobs(n)?;
    }
    let ctx = Ctx { cfg, opts: cli.global };
    match cli.command {
        Command::SynthCorpus(a) => corpus::synth(&ctx, a),
        Command::Manifest(ManifestCmd::Scan(a)) => corpus::scan(&ctx, a),
        Command::Folds(a) => corpus::folds(&ctx, a),
        Command::Labels(LabelsCmd::Extract(a)) => labels::extract(&ctx, a),
        Command::Labels(LabelsCmd::Compare(a)) => labels::compare(&ctx, a),
        Command::Detect(a) => detect::detect(&ctx, a),
        Command::Train(a) => train::train(&ctx, a),
        Command::Eval(a) => train::eval(&ctx, a),
    }
}

#[cfg(feature = "parallel")]
fn set_jobs(n: usize) -> Result<()> {
    if n == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::warn!("--jobs ignored: {e}");
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn set_jobs(n: usize) -> Result<()> {
    if n == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    log::warn!("--jobs ignored: built without the `parallel` feature");
    Ok(())
}

pub(crate) fn create_dir(dir: &std::path::Path) -> Result<()> {
    use anyhow::Context as _;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
