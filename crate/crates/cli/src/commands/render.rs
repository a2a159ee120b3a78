use echogrid_core::audio::{render_offline, RenderConfig};
use echogrid_core::scene::scene_from_config;
use echogrid_core::tasks::{gen_localization, gen_navigation, SessionLog, TaskKind};
use echogrid_core::Scene;

use super::{emit, hrir_set, Context};
use crate::error::{read_to_string, write_file, CliError, CliResult};
use crate::RenderArgs;

/// Regenerates the scene a log was recorded in.
pub fn scene_for_log(log: &SessionLog) -> CliResult<Scene> {
    let seed = log.header.seed;
    Ok(match log.header.task {
        TaskKind::Localization => gen_localization(seed).scene,
        TaskKind::Navigation => {
            gen_navigation(seed)
                .map_err(|e| CliError::Data(format!("log seed {seed}: {e}")))?
                .scene
        }
    })
}

pub fn run(ctx: &Context, args: &RenderArgs) -> CliResult<()> {
    let log = SessionLog::from_jsonl(&read_to_string(&args.log)?).map_err(|e| CliError::read(&args.log, e))?;
    let scene = match &args.scene {
        None => scene_for_log(&log)?,
        Some(path) => {
            let scene = scene_from_config(&read_to_string(path)?).map_err(|e| CliError::read(path, e))?;
            if scene.seed != Some(log.header.seed) {
                let found = scene.seed.map_or("none".to_string(), |s| s.to_string());
                return Err(CliError::Data(format!(
                    "seed mismatch: log {} was recorded with seed {}, scene {} has seed {found}",
                    args.log.display(),
                    log.header.seed,
                    path.display()
                )));
            }
            scene
        }
    };
    let engine = ctx.config.engine(log.header.task);
    let wav = render_offline(&log, &scene, &hrir_set()?, &RenderConfig::new(engine))
        .map_err(|e| CliError::read(&args.log, e))?;
    let out = match &args.out {
        Some(p) => p.clone(),
        None => {
            let stem = args.log.file_stem().map_or("render".into(), |s| s.to_string_lossy().into_owned());
            ctx.out(format!("{stem}.wav"))
        }
    };
    write_file(&out, wav)?;
    emit(format_args!("{}\n", out.display()));
    Ok(())
}
