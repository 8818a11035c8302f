//! The `gm` command: synthetic session generation, replay to a workspace,
//! evaluation against ground truth, and the workspace service.

pub mod args;
pub mod commands;
pub mod failure;
pub mod settings;
pub mod vet;

pub use args::{Cli, Command};
pub use failure::Failure;

use std::io::{self, Write};

use settings::Settings;

/// Runs one parsed command against real stdin and stdout.
pub fn run(cli: Cli) -> Result<(), Failure> {
    let settings = Settings::load(cli.config.as_deref())?;
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let res = match cli.command {
        Command::Generate(a) => commands::generate::run(&a, &mut out),
        Command::Replay(a) => {
            commands::replay::run(&a, &settings, &mut input, &mut out).map(|_| ())
        }
        Command::Eval(a) => commands::eval::run(&a, &settings, &mut out).map(|_| ()),
        Command::Serve(a) => commands::serve::run(&a, &settings, &mut out),
    };
    let _ = out.flush();
    res
}
