//! Scripted-agent batches, optionally arranged as the crossover protocol.

use echogrid_core::batch::map_seeds;
use echogrid_core::tasks::{
    gen_localization, gen_navigation, judge_localization, judge_obstacles, run_scripted, Agent, Group, SessionLog,
    TaskError, TaskKind, TaskSpec,
};
use echogrid_core::Mode;
use echogrid_server::Step;
use serde::Serialize;
use serde_json::json;

use super::{emit, Context};
use crate::error::{write_file, CliError, CliResult};
use crate::format::{opt9, parse_seeds, sig9, CsvTable};
use crate::SimulateArgs;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub time: f64,
    pub found: Option<usize>,
    pub mean_error: Option<f64>,
    pub missed: Option<usize>,
}

pub fn default_agent(kind: TaskKind) -> Agent {
    match kind {
        TaskKind::Localization => Agent::Sweep,
        TaskKind::Navigation => Agent::UpDownRanger,
    }
}

/// Generates the task for `task_seed`, runs the agent and judges the log.
pub fn run_one(
    ctx: &Context,
    kind: TaskKind,
    mode: Mode,
    agent: Agent,
    task_seed: u64,
    run_seed: u64,
) -> CliResult<(SessionLog, Outcome)> {
    if !agent.supports(kind) {
        return Err(CliError::Usage(TaskError::AgentMismatch { agent, task: kind }.to_string()));
    }
    let cfg = ctx.config.sim(kind, mode);
    let internal = |e: TaskError| CliError::Internal(format!("{kind} seed {task_seed}: {e}"));
    let (spec, outcome): (TaskSpec, Box<dyn Fn(&SessionLog) -> Result<Outcome, TaskError>>) = match kind {
        TaskKind::Localization => {
            let task = gen_localization(task_seed);
            let t = task.clone();
            (
                TaskSpec::Localization(task),
                Box::new(move |log| {
                    let r = judge_localization(log, &t)?;
                    Ok(Outcome {
                        time: r.total_time,
                        found: Some(r.found()),
                        mean_error: r.mean_error(),
                        missed: None,
                    })
                }),
            )
        }
        TaskKind::Navigation => {
            let task = gen_navigation(task_seed).map_err(internal)?;
            let t = task.clone();
            let judge = cfg.judge;
            (
                TaskSpec::Navigation(task),
                Box::new(move |log| {
                    let r = judge_obstacles(log, &t, &judge)?;
                    Ok(Outcome {
                        time: r.course_time,
                        found: None,
                        mean_error: None,
                        missed: Some(r.missed_count),
                    })
                }),
            )
        }
    };
    let log = run_scripted(agent, &spec, &cfg, run_seed).map_err(internal)?;
    let out = outcome(&log).map_err(internal)?;
    Ok((log, out))
}

fn seeds(ctx: &Context, args: &SimulateArgs) -> CliResult<Vec<u64>> {
    match (&args.seeds, ctx.seed) {
        (Some(list), _) => parse_seeds(list).map_err(|e| CliError::Usage(format!("--seeds: {e}"))),
        (None, Some(s)) => Ok(vec![s]),
        (None, None) => Err(CliError::Usage("simulate needs --seeds or --seed".into())),
    }
}

pub fn run(ctx: &Context, args: &SimulateArgs) -> CliResult<()> {
    let seeds = seeds(ctx, args)?;
    if args.crossover {
        return crossover(ctx, args, &seeds);
    }
    let (kind, mode) = (args.task.expect("clap requires --task"), args.mode.expect("clap requires --mode"));
    let agent = args.agent.unwrap_or(default_agent(kind));
    if !agent.supports(kind) {
        return Err(CliError::Usage(TaskError::AgentMismatch { agent, task: kind }.to_string()));
    }
    let runs = map_seeds(&seeds, |s| run_one(ctx, kind, mode, agent, s, s));
    let mut table = CsvTable::new(vec!["seed", "task", "mode", "agent", "time_s", "found", "mean_error_m", "missed"]);
    let mut rows = Vec::new();
    for (&seed, r) in seeds.iter().zip(runs) {
        let (log, o) = r?;
        if !args.no_logs {
            write_file(&ctx.out(format!("logs/{kind}_{mode}_{agent}_seed{seed}.jsonl")), log.to_jsonl())?;
        }
        table.rows.push(vec![
            seed.to_string(),
            kind.to_string(),
            mode.to_string(),
            agent.to_string(),
            sig9(o.time),
            o.found.map(|n| n.to_string()).unwrap_or_default(),
            opt9(o.mean_error),
            o.missed.map(|n| n.to_string()).unwrap_or_default(),
        ]);
        rows.push(json!({"seed": seed, "outcome": o}));
    }
    let csv = ctx.out("summary.csv");
    table.write(&csv)?;
    let report = json!({
        "task": kind,
        "mode": mode,
        "agent": agent,
        "runs": rows,
    });
    write_file(&ctx.out("summary.json"), serde_json::to_string_pretty(&report).expect("json") + "\n")?;
    emit(format_args!("{} runs -> {}\n", seeds.len(), csv.display()));
    Ok(())
}

/// One virtual participant's eight tasks. Both sessions reuse the same four
/// layouts so the mode is the only thing that changes between them.
fn participant(ctx: &Context, args: &SimulateArgs, index: usize, seed: u64) -> CliResult<Vec<(SessionLog, Outcome)>> {
    let group = if index % 2 == 0 {
        Group::TwoDThreeD
    } else {
        Group::ThreeDTwoD
    };
    (0..8)
        .map(|k| {
            let step = Step(k);
            let kind = step.task();
            let mode = group.mode_for_session(step.session_number());
            let agent = args.agent.unwrap_or(default_agent(kind));
            let task_seed = Step(k % 4).task_seed(seed);
            let run_seed = step.task_seed(seed);
            let (mut log, o) = run_one(ctx, kind, mode, agent, task_seed, run_seed)?;
            let h = &mut log.header;
            h.participant_id = format!("p{seed:03}");
            h.group = group;
            h.session_number = step.session_number();
            h.course = step.course();
            Ok((log, o))
        })
        .collect()
}

fn crossover(ctx: &Context, args: &SimulateArgs, seeds: &[u64]) -> CliResult<()> {
    if seeds.len() < 2 {
        return Err(CliError::Usage("--crossover needs at least 2 seeds (one per participant)".into()));
    }
    let indexed: Vec<u64> = (0..seeds.len() as u64).collect();
    let runs = map_seeds(&indexed, |i| participant(ctx, args, i as usize, seeds[i as usize]));
    let mut table = CsvTable::new(vec![
        "participant", "group", "session", "mode", "task", "course", "seed", "time_s", "found", "mean_error_m", "missed",
    ]);
    let mut rows = Vec::new();
    for r in runs {
        for (log, o) in r? {
            let h = &log.header;
            let course = h.course.map(|c| c.to_string()).unwrap_or_default();
            if !args.no_logs {
                let name = match h.course {
                    Some(c) => format!("logs/{}_s{}_{}_c{c}.jsonl", h.participant_id, h.session_number, h.task),
                    None => format!("logs/{}_s{}_{}.jsonl", h.participant_id, h.session_number, h.task),
                };
                write_file(&ctx.out(name), log.to_jsonl())?;
            }
            table.rows.push(vec![
                h.participant_id.clone(),
                h.group.to_string(),
                h.session_number.to_string(),
                h.mode.to_string(),
                h.task.to_string(),
                course,
                h.seed.to_string(),
                sig9(o.time),
                o.found.map(|n| n.to_string()).unwrap_or_default(),
                opt9(o.mean_error),
                o.missed.map(|n| n.to_string()).unwrap_or_default(),
            ]);
            rows.push(json!({
                "participant": h.participant_id,
                "group": h.group,
                "session": h.session_number,
                "mode": h.mode,
                "task": h.task,
                "course": h.course,
                "seed": h.seed,
                "outcome": o,
            }));
        }
    }
    let csv = ctx.out("crossover.csv");
    table.write(&csv)?;
    let report = json!({ "participants": seeds.len(), "rows": rows });
    write_file(&ctx.out("crossover.json"), serde_json::to_string_pretty(&report).expect("json") + "\n")?;
    emit(format_args!("{} participants x 8 tasks -> {}\n", seeds.len(), csv.display()));
    Ok(())
}
