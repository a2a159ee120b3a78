use std::sync::Arc;

use echogrid_server::ServerConfig;

use super::{hrir_set, Context};
use crate::error::{CliError, CliResult};
use crate::ServeArgs;

pub fn run(ctx: &Context, args: &ServeArgs) -> CliResult<()> {
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    let mut cfg = ServerConfig::new(ctx.out("logs"));
    cfg.session = ctx.config.session();
    cfg.tick_hz = cfg.session.navigation.tick_hz.max(cfg.session.localization.tick_hz);
    if args.pcm {
        cfg.hrir = Some(Arc::new(hrir_set()?));
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    rt.block_on(echogrid_server::serve(args.addr, cfg))
        .map_err(|e| CliError::Internal(format!("server on {}: {e}", args.addr)))
}
