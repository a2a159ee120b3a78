//! Corridor navigation: eight tagged obstacles, reports, seen/missed verdicts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::log::{EventKind, SessionLog};
use super::path::{find_path, FloorGrid};
use super::TaskError;
use crate::scene::{Bounds, Collider, Marker, Scene, Vec3};

pub const CORRIDOR_WIDTH: f64 = 6.0;
pub const CORRIDOR_LENGTH: f64 = 15.0;
pub const START_Z: f64 = 0.5;
pub const FINISH_Z: f64 = 14.5;
pub const OBSTACLE_COUNT: usize = 8;
pub const NAV_MARKER_SIZE: f64 = 0.173;
/// Minimum spacing between obstacles and from obstacles to walls.
pub const OBSTACLE_SPACING: f64 = 1.0;
/// Obstacles stay clear of the start and finish lines by this much.
const LINE_MARGIN: f64 = 2.0;
/// Front and back markers sit this far from the obstacle center.
pub const MARKER_OFFSET: f64 = 0.2;
/// Footprint radius used for the occlusion collider.
pub const OBSTACLE_RADIUS: f64 = 0.25;
pub const PATH_CELL: f64 = 0.1;
pub const PATH_CLEARANCE: f64 = 0.5;
pub const WALL_CLEARANCE: f64 = 0.3;
const MAX_ATTEMPTS: usize = 1000;

/// Label and marker height of each obstacle kind; two of each.
pub const OBSTACLE_KINDS: [(&str, f64); 4] = [
    ("chair", 0.45),
    ("garbage_bin", 0.4),
    ("small_bag", 0.3),
    ("cardboard_box", 0.35),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub index: u32,
    pub label: String,
    /// Floor position (y = 0).
    pub position: Vec3,
    pub front_marker: u32,
    pub back_marker: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavigationTask {
    pub seed: u64,
    pub obstacles: Vec<Obstacle>,
    pub scene: Scene,
    /// Collision-free route found at generation time.
    pub path: Vec<(f64, f64)>,
}

pub fn corridor_bounds() -> Bounds {
    Bounds {
        min: Vec3::new(-CORRIDOR_WIDTH / 2.0, 0.0, 0.0),
        max: Vec3::new(CORRIDOR_WIDTH / 2.0, 3.0, CORRIDOR_LENGTH),
    }
}

pub fn floor_grid(obstacles: &[(f64, f64)], clearance: f64) -> FloorGrid {
    FloorGrid::new(
        (-CORRIDOR_WIDTH / 2.0, CORRIDOR_WIDTH / 2.0),
        (0.0, CORRIDOR_LENGTH),
        PATH_CELL,
        obstacles,
        clearance,
        WALL_CLEARANCE,
    )
}

fn build(seed: u64, centers: &[(f64, f64)]) -> (Vec<Obstacle>, Scene) {
    let mut obstacles = Vec::with_capacity(centers.len());
    let mut markers = Vec::with_capacity(2 * centers.len());
    let mut colliders = Vec::with_capacity(centers.len());
    for (i, &(x, z)) in centers.iter().enumerate() {
        let (label, h) = OBSTACLE_KINDS[i / 2];
        let (front, back) = (2 * i as u32, 2 * i as u32 + 1);
        for (id, dz, nz) in [(front, -MARKER_OFFSET, -1.0), (back, MARKER_OFFSET, 1.0)] {
            markers.push(Marker {
                id,
                center: Vec3::new(x, h, z + dz),
                normal: Vec3::new(0.0, 0.0, nz),
                size: NAV_MARKER_SIZE,
                object_label: label.into(),
            });
        }
        colliders.push(Collider {
            center: Vec3::new(x, h, z),
            radius: OBSTACLE_RADIUS,
        });
        obstacles.push(Obstacle {
            index: i as u32,
            label: label.into(),
            position: Vec3::new(x, 0.0, z),
            front_marker: front,
            back_marker: back,
        });
    }
    let scene = Scene::new(markers, corridor_bounds(), colliders)
        .expect("generated corridor is valid")
        .with_seed(seed);
    (obstacles, scene)
}

/// Random obstacle layout, rejection-sampled for spacing and re-drawn until
/// the path finder connects start and finish.
pub fn gen_navigation(seed: u64) -> Result<NavigationTask, TaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = CORRIDOR_WIDTH / 2.0 - OBSTACLE_SPACING;
    let z_range = (START_Z + LINE_MARGIN)..=(FINISH_Z - LINE_MARGIN);
    for _ in 0..MAX_ATTEMPTS {
        let mut centers: Vec<(f64, f64)> = Vec::with_capacity(OBSTACLE_COUNT);
        let mut draws = 0;
        while centers.len() < OBSTACLE_COUNT && draws < 10_000 {
            draws += 1;
            let p = (rng.random_range(-half..=half), rng.random_range(z_range.clone()));
            if centers
                .iter()
                .all(|q| (p.0 - q.0).hypot(p.1 - q.1) >= OBSTACLE_SPACING)
            {
                centers.push(p);
            }
        }
        if centers.len() < OBSTACLE_COUNT {
            continue;
        }
        let grid = floor_grid(&centers, PATH_CLEARANCE);
        if let Some(path) = find_path(&grid, (0.0, START_Z), FINISH_Z) {
            let (obstacles, scene) = build(seed, &centers);
            return Ok(NavigationTask {
                seed,
                obstacles,
                scene,
                path,
            });
        }
    }
    Err(TaskError::GenerationFailed { seed })
}

/// Layout from explicit obstacle centers (fixtures, configs).
pub fn navigation_from_centers(seed: u64, centers: &[(f64, f64)]) -> Result<NavigationTask, TaskError> {
    let grid = floor_grid(centers, PATH_CLEARANCE);
    let path = find_path(&grid, (0.0, START_Z), FINISH_Z).ok_or(TaskError::GenerationFailed { seed })?;
    let (obstacles, scene) = build(seed, centers);
    Ok(NavigationTask {
        seed,
        obstacles,
        scene,
        path,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Seen,
    Missed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub collision_radius: f64,
    pub report_tolerance: f64,
    /// A report only counts while the walker is at least this far away.
    pub min_report_distance: f64,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            collision_radius: 0.4,
            report_tolerance: 0.5,
            min_report_distance: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigationResult {
    pub course_time: f64,
    pub verdicts: Vec<Verdict>,
    pub missed_count: usize,
}

/// Earliest time the segment p0(t0) -> p1(t1) comes within `r` of `c`
/// (floor plane).
fn entry_time(p0: (f64, f64), t0: f64, p1: (f64, f64), t1: f64, c: (f64, f64), r: f64) -> Option<f64> {
    let d = (p1.0 - p0.0, p1.1 - p0.1);
    let f = (p0.0 - c.0, p0.1 - c.1);
    let c0 = f.0 * f.0 + f.1 * f.1 - r * r;
    if c0 <= 0.0 {
        return Some(t0);
    }
    let a = d.0 * d.0 + d.1 * d.1;
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * (f.0 * d.0 + f.1 * d.1);
    let disc = b * b - 4.0 * a * c0;
    if disc < 0.0 {
        return None;
    }
    let s = (-b - disc.sqrt()) / (2.0 * a);
    (0.0..=1.0).contains(&s).then(|| t0 + s * (t1 - t0))
}

/// Verdict per obstacle. Seen: an accurate report (within tolerance, made
/// from at least the minimum distance) before any approach. Missed: the
/// track enters the collision radius first, or a collision is logged first.
/// Obstacles neither reported nor approached were never a problem and count
/// as seen.
pub fn judge_obstacles(log: &SessionLog, task: &NavigationTask, cfg: &JudgeConfig) -> Result<NavigationResult, TaskError> {
    if !log.is_well_formed_complete() {
        return Err(TaskError::Incomplete("navigation log needs one task_start and one task_end".into()));
    }
    let start = log.task_start().unwrap();
    let end = log.task_end().unwrap();
    let n = task.obstacles.len();
    let centers: Vec<(f64, f64)> = task.obstacles.iter().map(|o| (o.position.x, o.position.z)).collect();
    let mut first_report = vec![f64::INFINITY; n];
    let mut first_miss = vec![f64::INFINITY; n];

    let mut prev: Option<(f64, (f64, f64))> = None;
    for e in &log.events {
        match &e.kind {
            EventKind::Pose { position, .. } => {
                let p = (position.x, position.z);
                let (t0, p0) = prev.unwrap_or((e.t, p));
                for (i, &c) in centers.iter().enumerate() {
                    if let Some(t) = entry_time(p0, t0, p, e.t, c, cfg.collision_radius) {
                        first_miss[i] = first_miss[i].min(t);
                    }
                }
                prev = Some((e.t, p));
            }
            EventKind::ObstacleReport { position } => {
                let Some((_, walker)) = prev else { continue };
                for (i, &c) in centers.iter().enumerate() {
                    let err = (position.x - c.0).hypot(position.z - c.1);
                    let away = (walker.0 - c.0).hypot(walker.1 - c.1);
                    if err <= cfg.report_tolerance && away >= cfg.min_report_distance {
                        first_report[i] = first_report[i].min(e.t);
                    }
                }
            }
            EventKind::Collision { obstacle } => {
                let idx = match obstacle {
                    Some(i) if (*i as usize) < n => Some(*i as usize),
                    Some(i) => return Err(TaskError::UnknownObject(*i)),
                    None => prev.and_then(|(_, w)| {
                        centers
                            .iter()
                            .enumerate()
                            .map(|(i, c)| (i, (w.0 - c.0).hypot(w.1 - c.1)))
                            .min_by(|a, b| a.1.total_cmp(&b.1))
                            .map(|(i, _)| i)
                    }),
                };
                if let Some(i) = idx {
                    first_miss[i] = first_miss[i].min(e.t);
                }
            }
            _ => {}
        }
    }
    let verdicts: Vec<Verdict> = (0..n)
        .map(|i| {
            if first_miss[i] < first_report[i] {
                Verdict::Missed
            } else {
                Verdict::Seen
            }
        })
        .collect();
    let missed_count = verdicts.iter().filter(|v| **v == Verdict::Missed).count();
    Ok(NavigationResult {
        course_time: end - start,
        verdicts,
        missed_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::Mode;
    use crate::tasks::log::{LogHeader, TaskKind};

    fn walk(log: &mut SessionLog, pts: &[(f64, f64, f64)]) {
        for &(t, x, z) in pts {
            log.push(
                t,
                EventKind::Pose {
                    position: Vec3::new(x, 1.2, z),
                    yaw: 0.0,
                    pitch: 0.0,
                },
            )
            .unwrap();
        }
    }

    fn task() -> NavigationTask {
        let centers = [
            (-2.0, 3.0),
            (2.0, 3.0),
            (-2.0, 5.0),
            (2.0, 5.0),
            (-2.0, 7.0),
            (2.0, 7.0),
            (-2.0, 9.0),
            (0.3, 11.0),
        ];
        navigation_from_centers(0, &centers).unwrap()
    }

    #[test]
    fn generation_invariants() {
        for seed in 0..50 {
            let t = gen_navigation(seed).unwrap();
            assert_eq!(t, gen_navigation(seed).unwrap());
            assert_eq!(t.obstacles.len(), OBSTACLE_COUNT);
            assert_eq!(t.scene.markers.len(), 2 * OBSTACLE_COUNT);
            assert!(t.scene.markers.iter().all(|m| m.size == NAV_MARKER_SIZE));
            for (i, a) in t.obstacles.iter().enumerate() {
                assert!(a.position.x.abs() <= CORRIDOR_WIDTH / 2.0 - 1.0);
                for b in &t.obstacles[i + 1..] {
                    assert!(a.position.planar_distance(b.position) >= 1.0);
                }
            }
        }
    }

    #[test]
    fn passing_close_to_unreported_obstacle_is_missed() {
        let t = task();
        let mut log = SessionLog::new(LogHeader::new("p", TaskKind::Navigation, Mode::TwoD, 0));
        log.push(0.0, EventKind::TaskStart).unwrap();
        walk(&mut log, &[(0.0, 0.0, 0.5), (10.0, 0.0, 14.5)]);
        log.push(10.0, EventKind::TaskEnd).unwrap();
        let r = judge_obstacles(&log, &t, &JudgeConfig::default()).unwrap();
        // The straight line passes 0.3 m from obstacle 7 at (0.3, 11).
        assert_eq!(r.verdicts[7], Verdict::Missed);
        assert_eq!(r.missed_count, 1);
        assert_eq!(r.course_time, 10.0);
    }

    #[test]
    fn inaccurate_report_does_not_protect() {
        let t = task();
        let mut log = SessionLog::new(LogHeader::new("p", TaskKind::Navigation, Mode::TwoD, 0));
        log.push(0.0, EventKind::TaskStart).unwrap();
        walk(&mut log, &[(0.0, 0.0, 0.5)]);
        log.push(
            1.0,
            EventKind::ObstacleReport {
                position: Vec3::new(1.5, 0.0, 11.0),
            },
        )
        .unwrap();
        walk(&mut log, &[(10.0, 0.0, 14.5)]);
        log.push(10.0, EventKind::TaskEnd).unwrap();
        let r = judge_obstacles(&log, &t, &JudgeConfig::default()).unwrap();
        assert_eq!(r.verdicts[7], Verdict::Missed);

        let mut good = SessionLog::new(LogHeader::new("p", TaskKind::Navigation, Mode::TwoD, 0));
        good.push(0.0, EventKind::TaskStart).unwrap();
        walk(&mut good, &[(0.0, 0.0, 0.5)]);
        good.push(
            1.0,
            EventKind::ObstacleReport {
                position: Vec3::new(0.5, 0.0, 11.2),
            },
        )
        .unwrap();
        walk(&mut good, &[(10.0, 0.0, 14.5)]);
        good.push(10.0, EventKind::TaskEnd).unwrap();
        let r = judge_obstacles(&good, &t, &JudgeConfig::default()).unwrap();
        assert_eq!(r.missed_count, 0);
    }

    #[test]
    fn incomplete_log_rejected() {
        let log = SessionLog::new(LogHeader::new("p", TaskKind::Navigation, Mode::TwoD, 0));
        assert!(matches!(
            judge_obstacles(&log, &task(), &JudgeConfig::default()),
            Err(TaskError::Incomplete(_))
        ));
    }
}
