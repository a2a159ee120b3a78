//! Table-top localization: three tagged objects, pointing, error distance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::log::{EventKind, SessionLog};
use super::TaskError;
use crate::scene::{Bounds, Marker, Scene, Vec3};

/// Table extent across the participant (x), meters.
pub const TABLE_WIDTH: f64 = 0.8;
/// Table extent away from the participant (z), meters.
pub const TABLE_DEPTH: f64 = 1.5;
pub const TABLE_HEIGHT: f64 = 0.75;
/// Placement band measured from the participant edge (z = 0).
pub const PLACE_MIN: f64 = 0.05;
pub const PLACE_MAX: f64 = 1.0;
pub const MIN_SEPARATION: f64 = 0.15;
/// Keep objects this far from the side edges.
const SIDE_MARGIN: f64 = 0.05;
pub const LOC_MARKER_SIZE: f64 = 0.043;

/// Object labels with the height of the marker above the table top.
pub const OBJECTS: [(&str, f64); 3] = [("mouse", 0.035), ("phone", 0.01), ("flashlight", 0.03)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableObject {
    pub id: u32,
    pub label: String,
    /// Position on the table plane.
    pub x: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationTask {
    pub seed: u64,
    pub objects: Vec<TableObject>,
    pub scene: Scene,
}

impl LocalizationTask {
    pub fn object(&self, id: u32) -> Option<&TableObject> {
        self.objects.iter().find(|o| o.id == id)
    }
}

pub fn table_bounds() -> Bounds {
    Bounds {
        min: Vec3::new(-TABLE_WIDTH / 2.0, 0.0, 0.0),
        max: Vec3::new(TABLE_WIDTH / 2.0, TABLE_HEIGHT + 0.5, TABLE_DEPTH),
    }
}

/// Random placement of the three objects by rejection sampling. The band is
/// 0.7 m x 0.95 m, so three points 0.15 m apart are accepted almost always.
pub fn gen_localization(seed: u64) -> LocalizationTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = TABLE_WIDTH / 2.0 - SIDE_MARGIN;
    let mut placed: Vec<(f64, f64)> = Vec::with_capacity(OBJECTS.len());
    while placed.len() < OBJECTS.len() {
        let p = (rng.random_range(-half..=half), rng.random_range(PLACE_MIN..=PLACE_MAX));
        if placed
            .iter()
            .all(|q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt() >= MIN_SEPARATION)
        {
            placed.push(p);
        }
    }
    let objects: Vec<TableObject> = OBJECTS
        .iter()
        .zip(&placed)
        .enumerate()
        .map(|(i, ((label, _), &(x, z)))| TableObject {
            id: i as u32,
            label: label.to_string(),
            x,
            z,
        })
        .collect();
    let markers = objects
        .iter()
        .zip(OBJECTS)
        .map(|(o, (_, h))| Marker {
            id: o.id,
            center: Vec3::new(o.x, TABLE_HEIGHT + h, o.z),
            normal: Vec3::new(0.0, 1.0, 0.0),
            size: LOC_MARKER_SIZE,
            object_label: o.label.clone(),
        })
        .collect();
    let scene = Scene::new(markers, table_bounds(), vec![])
        .expect("generated table scene is valid")
        .with_seed(seed);
    LocalizationTask { seed, objects, scene }
}

/// Simulated human pointing: the ray from `origin` toward the target is
/// deflected by a Gaussian angle in two perpendicular directions, then cut
/// with the table plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointingNoise {
    pub sigma_deg: f64,
}

impl Default for PointingNoise {
    fn default() -> Self {
        Self { sigma_deg: 3.0 }
    }
}

impl PointingNoise {
    /// Where a ray aimed from `origin` at `target` lands on the plane
    /// `y = target.y`.
    pub fn perturb<R: Rng + ?Sized>(&self, origin: Vec3, target: Vec3, rng: &mut R) -> (f64, f64) {
        let Some(dir) = (target - origin).normalized() else {
            return (target.x, target.z);
        };
        let helper = if dir.y.abs() < 0.9 {
            Vec3::new(0.0, 1.0, 0.0)
        } else {
            Vec3::new(1.0, 0.0, 0.0)
        };
        let e1 = dir.cross(helper).normalized().expect("helper not parallel");
        let e2 = dir.cross(e1);
        let normal = Normal::new(0.0, self.sigma_deg.to_radians()).expect("finite sigma");
        let (a, b): (f64, f64) = (normal.sample(rng), normal.sample(rng));
        let ray = dir + e1 * a.tan() + e2 * b.tan();
        let dy = target.y - origin.y;
        if ray.y * dy > 1e-12 {
            let s = dy / ray.y;
            let hit = origin + ray * s;
            (hit.x, hit.z)
        } else {
            // Ray misses the plane: take the point at the target's range.
            let hit = origin + ray.normalized().unwrap_or(dir) * target.distance(origin);
            (hit.x, hit.z)
        }
    }
}

/// Table-plane distance between a pointed position and the object center.
pub fn score_pointing(task: &LocalizationTask, object_id: u32, point: (f64, f64)) -> Result<f64, TaskError> {
    let o = task.object(object_id).ok_or(TaskError::UnknownObject(object_id))?;
    Ok(((point.0 - o.x).powi(2) + (point.1 - o.z).powi(2)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectResult {
    pub object_id: u32,
    pub label: String,
    /// Seconds since the previous submission (or task start).
    pub time_to_find: Option<f64>,
    pub error_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub objects: Vec<ObjectResult>,
    pub total_time: f64,
}

impl LocalizationResult {
    pub fn found(&self) -> usize {
        self.objects.iter().filter(|o| o.error_distance.is_some()).count()
    }

    /// Mean error over the objects that were pointed at.
    pub fn mean_error(&self) -> Option<f64> {
        let errs: Vec<f64> = self.objects.iter().filter_map(|o| o.error_distance).collect();
        (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
    }
}

/// Scores every point submission. Submissions without an object id go to
/// the nearest object not yet scored; extra submissions are ignored.
pub fn judge_localization(log: &SessionLog, task: &LocalizationTask) -> Result<LocalizationResult, TaskError> {
    let start = log.task_start().ok_or(TaskError::Incomplete("no task_start".into()))?;
    let end = log.task_end().ok_or(TaskError::Incomplete("no task_end".into()))?;
    let mut results: Vec<ObjectResult> = task
        .objects
        .iter()
        .map(|o| ObjectResult {
            object_id: o.id,
            label: o.label.clone(),
            time_to_find: None,
            error_distance: None,
        })
        .collect();
    let mut last = start;
    for e in &log.events {
        let EventKind::PointSubmit { x, z, object_id } = e.kind else {
            continue;
        };
        if e.t < start || e.t > end {
            continue;
        }
        let target = match object_id {
            Some(id) => {
                task.object(id).ok_or(TaskError::UnknownObject(id))?;
                results.iter().position(|r| r.object_id == id && r.error_distance.is_none())
            }
            None => results
                .iter()
                .enumerate()
                .filter(|(_, r)| r.error_distance.is_none())
                .map(|(i, r)| (i, score_pointing(task, r.object_id, (x, z)).expect("known id")))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i),
        };
        if let Some(i) = target {
            let err = score_pointing(task, results[i].object_id, (x, z))?;
            results[i].error_distance = Some(err);
            results[i].time_to_find = Some(e.t - last);
            last = e.t;
        }
    }
    Ok(LocalizationResult {
        objects: results,
        total_time: end - start,
    })
}
