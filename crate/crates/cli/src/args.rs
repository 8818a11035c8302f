use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "gm",
    version,
    about = "Sidewalk feature mapping from RGB-D capture sessions"
)]
pub struct Cli {
    /// Configuration file; `./gm.toml` is read when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic session with ground truth.
    Generate(GenerateArgs),
    /// Process a session, vet the detections and upload them to a workspace.
    Replay(ReplayArgs),
    /// Compare predictions with a session's ground truth.
    Eval(EvalArgs),
    /// Run the workspace service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// `default`, or a TOML scene file.
    #[arg(long, default_value = "default")]
    pub scene: String,
    #[arg(long, required_unless_present = "print_scene")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Horizontal RMS of the GPS error in meters.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gps_noise: f64,
    /// Std-dev of the depth error in meters.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub depth_noise: f64,
    /// Std-dev in degrees of a random rotation of each preceding frame.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rotation_jitter: f64,
    /// Print the resolved scene as TOML and exit.
    #[arg(long)]
    pub print_scene: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("vetting").args(["auto_vet", "vet_file", "interactive"])))]
pub struct ReplayArgs {
    #[arg(long)]
    pub session: PathBuf,
    /// Service base URL; defaults to `[replay].server`.
    #[arg(long)]
    pub server: Option<String>,
    #[arg(long)]
    pub workspace: Option<String>,
    /// Comma-separated classes, e.g. `pole,sidewalk`; defaults to the session's selection.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    /// Accept every detection (the default).
    #[arg(long)]
    pub auto_vet: bool,
    /// JSON array of vetting records; captures it omits are accepted as detected.
    #[arg(long)]
    pub vet_file: Option<PathBuf>,
    /// Vet each capture at the terminal.
    #[arg(long)]
    pub interactive: bool,
    /// Process and vet, but make no network calls.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long, env = "GM_USER")]
    pub user: Option<String>,
    #[arg(long, env = "GM_SECRET", hide_env_values = true)]
    pub secret: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub session: PathBuf,
    /// Workspace export to score; without it the session is processed directly.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Matching gate in meters.
    #[arg(long, default_value_t = gm_core::metrics::DEFAULT_MATCH_GATE_M)]
    pub gate: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Static review UI bundle served at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    /// Workspace log directory; overrides `GM_WORKSPACE_DIR`.
    #[arg(long)]
    pub workspace_dir: Option<PathBuf>,
}
