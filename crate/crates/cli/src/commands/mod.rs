pub mod gen_scene;
pub mod render;
pub mod serve;
pub mod simulate;
pub mod stats;

use std::path::{Path, PathBuf};

use echogrid_core::audio::{bundled_hrir, load_hrir, HrirSet};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const HRIR_ENV: &str = "ECHOGRID_HRIR_DIR";

pub struct Context {
    pub config: RunConfig,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn out(&self, name: impl AsRef<Path>) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// The set named by `ECHOGRID_HRIR_DIR`, else the bundled one.
pub fn hrir_set() -> CliResult<HrirSet> {
    match std::env::var_os(HRIR_ENV) {
        Some(dir) if !dir.is_empty() => {
            let dir = PathBuf::from(dir);
            load_hrir(&dir).map_err(|e| CliError::Data(format!("{HRIR_ENV}={}: {e}", dir.display())))
        }
        _ => Ok(bundled_hrir()),
    }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
pub fn emit(text: std::fmt::Arguments) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_fmt(text);
}
