use std::io::Write;
use std::sync::Arc;

use gm_service::{router, serve_until, AppState};

use crate::args::ServeArgs;
use crate::failure::{Failure, ResultExt};
use crate::settings::Settings;

pub fn run(args: &ServeArgs, settings: &Settings, out: &mut dyn Write) -> Result<(), Failure> {
    if let Some(dir) = &args.ui_dir {
        if !dir.is_dir() {
            return Err(Failure::input(format!(
                "--ui-dir {} is not a directory",
                dir.display()
            )));
        }
    }
    let mut config = settings.service.clone().with_env();
    if let Some(dir) = &args.workspace_dir {
        config.workspace_dir = Some(dir.clone());
    }
    let state = AppState::new(&config).environment("cannot load workspaces")?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .environment("cannot start runtime")?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.listen)
            .await
            .environment(&format!("cannot listen on {}", args.listen))?;
        let addr = listener.local_addr().environment("listener address")?;
        writeln!(
            out,
            "listening on http://{addr} (workspaces: {})",
            state.workspace_ids().join(", ")
        )
        .environment("stdout")?;
        out.flush().environment("stdout")?;
        let app = router(Arc::new(state), args.ui_dir.as_deref());
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        serve_until(listener, app, shutdown)
            .await
            .environment("server failed")
    })
}
