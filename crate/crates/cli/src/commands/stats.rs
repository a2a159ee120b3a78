//! Reports over session logs or long-format CSV.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use echogrid_core::stats::{
    anova_between_one, anova_between_two, anova_rm_one, anova_rm_two, boxplot_summary, AnovaResult, BoxplotSummary,
    StatsError,
};
use echogrid_core::tasks::{
    gen_localization, gen_navigation, judge_localization, judge_obstacles, Group, JudgeConfig, SessionLog, TaskKind,
};
use echogrid_core::Mode;
use serde::Serialize;
use serde_json::{json, Value};

use super::{emit, Context};
use crate::error::{read_to_string, write_file, CliError, CliResult};
use crate::format::read_long_csv;
use crate::{Design, StatsArgs};

#[derive(Debug, Clone, Serialize)]
pub struct BoxplotRecord {
    pub metric: String,
    /// Grouping labels, e.g. session, mode and course.
    pub key: BTreeMap<String, Value>,
    pub summary: BoxplotSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnovaRecord {
    pub analysis: String,
    pub metric: String,
    pub subset: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub results: Vec<AnovaResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub source: String,
    pub boxplots: Vec<BoxplotRecord>,
    pub anova: Vec<AnovaRecord>,
}

impl Report {
    /// Records an analysis. Missing or mismatched cells abort the report;
    /// numerically degenerate analyses are kept with their error.
    fn push(
        &mut self,
        analysis: &str,
        metric: &str,
        subset: impl Into<String>,
        r: Result<Vec<AnovaResult>, StatsError>,
    ) -> CliResult<()> {
        let (results, error) = match r {
            Ok(v) => (v, None),
            Err(e @ (StatsError::Unbalanced(_) | StatsError::Incomplete(_) | StatsError::EmptyCell(_))) => {
                return Err(CliError::Data(e.to_string()))
            }
            Err(e) => (vec![], Some(e.to_string())),
        };
        self.anova.push(AnovaRecord {
            analysis: analysis.into(),
            metric: metric.into(),
            subset: subset.into(),
            results,
            error,
        });
        Ok(())
    }

    fn boxplot(&mut self, metric: &str, key: BTreeMap<String, Value>, values: &[f64]) -> CliResult<()> {
        let summary = boxplot_summary(values).map_err(|e| CliError::Data(format!("{metric} {key:?}: {e}")))?;
        self.boxplots.push(BoxplotRecord {
            metric: metric.into(),
            key,
            summary,
        });
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<14} {:<12} {:<16} {:<14} {:>10} {:>7} {:>7} {:>9}\n",
            "analysis", "metric", "subset", "effect", "F", "df1", "df2", "p"
        );
        for a in &self.anova {
            if let Some(e) = &a.error {
                s += &format!("{:<14} {:<12} {:<16} {e}\n", a.analysis, a.metric, a.subset);
            }
            for r in &a.results {
                s += &format!(
                    "{:<14} {:<12} {:<16} {:<14} {:>10.4} {:>7.3} {:>7.3} {:>9.4}\n",
                    a.analysis, a.metric, a.subset, r.effect, r.f, r.df1, r.df2, r.p
                );
            }
        }
        s
    }
}

pub fn run(ctx: &Context, args: &StatsArgs) -> CliResult<()> {
    let csv: Vec<&PathBuf> = args
        .inputs
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .collect();
    let report = match (csv.as_slice(), args.inputs.len()) {
        ([one], 1) => csv_report(one, args.design)?,
        ([], _) => log_report(&collect_logs(&args.inputs)?, &ctx.config.judge.unwrap_or_default())?,
        _ => return Err(CliError::Usage("give either one CSV file or session logs, not both".into())),
    };
    let path = ctx.out(&args.report);
    write_file(&path, serde_json::to_string_pretty(&report).expect("report serializes") + "\n")?;
    emit(format_args!("{}", report.table()));
    emit(format_args!("report -> {}\n", path.display()));
    Ok(())
}

/// Ordered distinct values, in order of first appearance.
fn levels<'a>(it: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for v in it {
        if !out.contains(v) {
            out.push(v.clone());
        }
    }
    out
}

pub fn csv_report(path: &Path, design: Design) -> CliResult<Report> {
    let rows = read_long_csv(path)?;
    let subjects = levels(rows.iter().map(|r| &r.0));
    let fa = levels(rows.iter().map(|r| &r.1));
    let fb = levels(rows.iter().map(|r| &r.2));
    let mut report = Report {
        source: format!("csv ({design:?})").to_lowercase(),
        ..Report::default()
    };
    for a in &fa {
        for b in &fb {
            let vals: Vec<f64> = rows.iter().filter(|r| &r.1 == a && &r.2 == b).map(|r| r.3).collect();
            if vals.is_empty() {
                return Err(CliError::Data(format!("unbalanced design: empty cell factor1={a}, factor2={b}")));
            }
            let key = BTreeMap::from([("factor1".to_string(), json!(a)), ("factor2".to_string(), json!(b))]);
            report.boxplot("value", key, &vals)?;
        }
    }
    match design {
        Design::Within => {
            let mut cell: BTreeMap<(&str, &str, &str), f64> = BTreeMap::new();
            for r in &rows {
                if cell.insert((&r.0, &r.1, &r.2), r.3).is_some() {
                    return Err(CliError::Data(format!(
                        "duplicate value for subject={}, factor1={}, factor2={}",
                        r.0, r.1, r.2
                    )));
                }
            }
            let get = |s: &String, a: &String, b: &String| {
                cell.get(&(s.as_str(), a.as_str(), b.as_str())).copied().ok_or_else(|| {
                    CliError::Data(format!("unbalanced design: missing cell subject={s}, factor1={a}, factor2={b}"))
                })
            };
            if fb.len() == 1 {
                let data = subjects
                    .iter()
                    .map(|s| fa.iter().map(|a| get(s, a, &fb[0])).collect::<CliResult<Vec<f64>>>())
                    .collect::<CliResult<Vec<_>>>()?;
                report.push("rm_one", "value", "all", anova_rm_one(&data).map(|r| vec![r]))?;
            } else {
                let data = subjects
                    .iter()
                    .map(|s| {
                        fa.iter()
                            .map(|a| fb.iter().map(|b| get(s, a, b)).collect::<CliResult<Vec<f64>>>())
                            .collect::<CliResult<Vec<_>>>()
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                report.push("rm_two", "value", "all", anova_rm_two(&data))?;
            }
        }
        Design::Between => {
            let cells: Vec<Vec<Vec<f64>>> = fa
                .iter()
                .map(|a| {
                    fb.iter()
                        .map(|b| rows.iter().filter(|r| &r.1 == a && &r.2 == b).map(|r| r.3).collect())
                        .collect()
                })
                .collect();
            let n0 = cells[0][0].len();
            for (i, row) in cells.iter().enumerate() {
                for (j, c) in row.iter().enumerate() {
                    if c.len() != n0 {
                        return Err(CliError::Data(format!(
                            "unbalanced design: cell factor1={}, factor2={} has {} values, cell factor1={}, factor2={} has {n0}",
                            fa[i], fb[j], c.len(), fa[0], fb[0]
                        )));
                    }
                }
            }
            if fb.len() == 1 {
                let groups: Vec<Vec<f64>> = cells.into_iter().map(|mut r| r.remove(0)).collect();
                report.push("between_one", "value", "all", anova_between_one(&groups).map(|r| vec![r]))?;
            } else {
                report.push("between_two", "value", "all", anova_between_two(&cells))?;
            }
        }
    }
    Ok(report)
}

pub fn collect_logs(inputs: &[PathBuf]) -> CliResult<Vec<(PathBuf, SessionLog)>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CliError::read(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|e| e == "jsonl"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::Data("no session logs found".into()));
    }
    files
        .into_iter()
        .map(|f| {
            let log = SessionLog::from_jsonl(&read_to_string(&f)?).map_err(|e| CliError::read(&f, e))?;
            Ok((f, log))
        })
        .collect()
}

/// Per-log measurements keyed by participant, session and course.
#[derive(Debug, Clone)]
struct Measure {
    participant: String,
    group: Group,
    session: u8,
    mode: Mode,
    task: TaskKind,
    course: Option<u8>,
    metrics: Vec<(&'static str, f64)>,
}

fn measure(path: &Path, log: &SessionLog, judge: &JudgeConfig) -> CliResult<Measure> {
    let h = &log.header;
    let bad = |e: &dyn std::fmt::Display| CliError::read(path, e);
    let metrics = match h.task {
        TaskKind::Localization => {
            let r = judge_localization(log, &gen_localization(h.seed)).map_err(|e| bad(&e))?;
            let err = r.mean_error().ok_or_else(|| bad(&"no object was pointed at"))?;
            vec![("loc_error_m", err), ("loc_time_s", r.total_time)]
        }
        TaskKind::Navigation => {
            let task = gen_navigation(h.seed).map_err(|e| bad(&e))?;
            let r = judge_obstacles(log, &task, judge).map_err(|e| bad(&e))?;
            vec![("nav_time_s", r.course_time), ("nav_missed", r.missed_count as f64)]
        }
    };
    Ok(Measure {
        participant: h.participant_id.clone(),
        group: h.group,
        session: h.session_number,
        mode: h.mode,
        task: h.task,
        course: h.course,
        metrics,
    })
}

pub fn log_report(logs: &[(PathBuf, SessionLog)], judge: &JudgeConfig) -> CliResult<Report> {
    let mut measures = Vec::new();
    let mut skipped = 0;
    for (path, log) in logs {
        if !log.header.complete {
            eprintln!("skipping incomplete log {}", path.display());
            skipped += 1;
            continue;
        }
        measures.push(measure(path, log, judge)?);
    }
    if measures.is_empty() {
        return Err(CliError::Data(format!("no complete session logs ({skipped} incomplete)")));
    }
    let mut report = Report {
        source: "session logs".into(),
        ..Report::default()
    };

    // Boxplots grouped by session, mode and course.
    let mut groups: BTreeMap<(&str, u8, &str, Option<u8>), Vec<f64>> = BTreeMap::new();
    for m in &measures {
        for &(name, v) in &m.metrics {
            groups.entry((name, m.session, m.mode.as_str(), m.course)).or_default().push(v);
        }
    }
    for ((metric, session, mode, course), vals) in &groups {
        let mut key = BTreeMap::from([("session".to_string(), json!(session)), ("mode".to_string(), json!(mode))]);
        if let Some(c) = course {
            key.insert("course".into(), json!(c));
        }
        report.boxplot(metric, key, vals)?;
    }

    // value[participant][(session, course)] per metric.
    type Cells = BTreeMap<String, BTreeMap<(u8, Option<u8>), f64>>;
    let mut by_metric: BTreeMap<&str, Cells> = BTreeMap::new();
    let mut group_of: BTreeMap<String, Group> = BTreeMap::new();
    for m in &measures {
        if let Some(g) = group_of.insert(m.participant.clone(), m.group) {
            if g != m.group {
                return Err(CliError::Data(format!("participant {} appears in both groups", m.participant)));
            }
        }
        for &(name, v) in &m.metrics {
            let slot = by_metric.entry(name).or_default().entry(m.participant.clone()).or_default();
            if slot.insert((m.session, m.course), v).is_some() {
                return Err(CliError::Data(format!(
                    "duplicate {} log for participant {}, session {}{}",
                    m.task,
                    m.participant,
                    m.session,
                    m.course.map(|c| format!(", course {c}")).unwrap_or_default()
                )));
            }
        }
    }
    let courses: Vec<u8> = {
        let mut c: Vec<u8> = measures.iter().filter_map(|m| m.course).collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    let missing = |p: &str, metric: &str, s: u8, c: Option<u8>| {
        CliError::Data(format!(
            "unbalanced design: participant {p} has no {metric} value for session {s}{}",
            c.map(|c| format!(", course {c}")).unwrap_or_default()
        ))
    };

    for (metric, cells) in &by_metric {
        let nav = metric.starts_with("nav");
        let course_keys: Vec<Option<u8>> = if nav { courses.iter().map(|&c| Some(c)).collect() } else { vec![None] };
        // Mean over courses, per participant and session.
        let session_value = |p: &str, s: u8| -> CliResult<f64> {
            let row = &cells[p];
            let mut sum = 0.0;
            for &c in &course_keys {
                sum += *row.get(&(s, c)).ok_or_else(|| missing(p, metric, s, c))?;
            }
            Ok(sum / course_keys.len() as f64)
        };
        let participants: Vec<&String> = cells.keys().collect();

        for group in [Group::TwoDThreeD, Group::ThreeDTwoD] {
            let members: Vec<&String> = participants.iter().copied().filter(|p| group_of[*p] == group).collect();
            if members.is_empty() {
                continue;
            }
            let subset = format!("group {group}");
            if nav {
                let data = members
                    .iter()
                    .map(|p| {
                        (1..=2u8)
                            .map(|s| {
                                course_keys
                                    .iter()
                                    .map(|&c| cells[*p].get(&(s, c)).copied().ok_or_else(|| missing(p, metric, s, c)))
                                    .collect::<CliResult<Vec<f64>>>()
                            })
                            .collect::<CliResult<Vec<_>>>()
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                let r = anova_rm_two(&data).map(|mut v| {
                    let names = ["mode", "course", "mode x course"];
                    for (r, n) in v.iter_mut().zip(names) {
                        r.effect = n.into();
                    }
                    v
                });
                report.push("rm_two", metric, subset, r)?;
            } else {
                let data = members
                    .iter()
                    .map(|p| (1..=2u8).map(|s| session_value(p, s)).collect::<CliResult<Vec<f64>>>())
                    .collect::<CliResult<Vec<_>>>()?;
                let r = anova_rm_one(&data).map(|mut r| {
                    r.effect = "mode".into();
                    vec![r]
                });
                report.push("rm_one", metric, subset, r)?;
            }
        }

        let both_groups = group_of.values().any(|g| *g == Group::TwoDThreeD) && group_of.values().any(|g| *g == Group::ThreeDTwoD);
        if both_groups {
            for s in 1..=2u8 {
                let groups = [Group::TwoDThreeD, Group::ThreeDTwoD]
                    .iter()
                    .map(|g| {
                        participants
                            .iter()
                            .filter(|p| group_of[**p] == *g)
                            .map(|p| session_value(p, s))
                            .collect::<CliResult<Vec<f64>>>()
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                let r = anova_between_one(&groups).map(|mut r| {
                    r.effect = "group".into();
                    vec![r]
                });
                report.push("between_one", metric, format!("session {s}"), r)?;
            }
        }

        // Mode across everyone: paired 2D vs 3D.
        let data = participants
            .iter()
            .map(|p| {
                let g = group_of[*p];
                let s2d = if g.mode_for_session(1) == Mode::TwoD { 1 } else { 2 };
                Ok(vec![session_value(p, s2d)?, session_value(p, 3 - s2d)?])
            })
            .collect::<CliResult<Vec<_>>>()?;
        let r = anova_rm_one(&data).map(|mut r| {
            r.effect = "mode".into();
            vec![r]
        });
        report.push("rm_one", metric, "all participants", r)?;
    }
    Ok(report)
}
