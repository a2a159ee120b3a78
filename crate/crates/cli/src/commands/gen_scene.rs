use echogrid_core::scene::{corridor_template, scene_to_config};
use echogrid_core::tasks::{gen_localization, gen_navigation, TaskKind};

use super::{emit, Context};
use crate::error::{write_file, CliError, CliResult};
use crate::{scene_task, GenSceneArgs};

pub fn run(ctx: &Context, args: &GenSceneArgs) -> CliResult<()> {
    let (scene, default_name) = match scene_task(args.task) {
        None => (corridor_template(), "scene_corridor.json".to_string()),
        Some(kind) => {
            let seed = ctx
                .seed
                .ok_or_else(|| CliError::Usage(format!("gen-scene --task {kind} needs --seed")))?;
            let scene = match kind {
                TaskKind::Localization => gen_localization(seed).scene,
                TaskKind::Navigation => gen_navigation(seed).map_err(|e| CliError::Internal(e.to_string()))?.scene,
            };
            (scene, format!("scene_{kind}_{seed}.json"))
        }
    };
    let path = ctx.out(args.out.clone().unwrap_or(default_name.into()));
    write_file(&path, scene_to_config(&scene))?;
    emit(format_args!("{}\n", path.display()));
    Ok(())
}
