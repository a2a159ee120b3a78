//! World geometry, the handheld pinhole camera and simulated fiducial detection.
//!
//! Detection is purely geometric: a marker is reported when its center
//! projects into the image, lies within the profile's range band and is
//! viewed at an angle no steeper than `max_view_angle`. No pixels are
//! synthesized and no tag bits are decoded.

use std::collections::BTreeSet;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCENE_SCHEMA: &str = "echogrid-scene/1";

/// Point or direction in the world frame (meters). x right, y up, z forward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Distance on the floor/table plane, ignoring height.
    pub fn planar_distance(self, o: Vec3) -> f64 {
        (self.x - o.x).hypot(self.z - o.z)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Wraps an angle in degrees into (-180, 180].
pub fn normalize_yaw(deg: f64) -> f64 {
    let mut y = deg % 360.0;
    if y <= -180.0 {
        y += 360.0;
    } else if y > 180.0 {
        y -= 360.0;
    }
    y
}

/// Pose of the handheld camera. Roll is always zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    /// Degrees about the world y axis; positive turns toward +x.
    pub yaw: f64,
    /// Degrees about the camera x axis; positive looks up.
    pub pitch: f64,
}

impl CameraPose {
    pub fn new(position: Vec3, yaw: f64, pitch: f64) -> Self {
        Self {
            position,
            yaw: normalize_yaw(yaw),
            pitch: pitch.clamp(-90.0, 90.0),
        }
    }

    pub fn forward(&self) -> Vec3 {
        let (sy, cy) = self.yaw.to_radians().sin_cos();
        let (sp, cp) = self.pitch.to_radians().sin_cos();
        Vec3::new(sy * cp, sp, cy * cp)
    }

    pub fn right(&self) -> Vec3 {
        let (sy, cy) = self.yaw.to_radians().sin_cos();
        Vec3::new(cy, 0.0, -sy)
    }

    pub fn up(&self) -> Vec3 {
        self.forward().cross(self.right())
    }

    /// Expresses a world point in camera coordinates (right, up, forward).
    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        let d = p - self.position;
        Vec3::new(d.dot(self.right()), d.dot(self.up()), d.dot(self.forward()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub h_fov: f64,
    pub v_fov: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            h_fov: 60.0,
            v_fov: 45.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(h_fov: f64, v_fov: f64) -> Result<Self, SceneError> {
        let ok = |f: f64| f > 0.0 && f < 180.0;
        if !ok(h_fov) || !ok(v_fov) {
            return Err(SceneError::Invalid(format!(
                "field of view must be in (0, 180) degrees, got {h_fov} x {v_fov}"
            )));
        }
        Ok(Self { h_fov, v_fov })
    }
}

/// Normalized image coordinates: u grows rightward, v grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
}

/// Projects `p` through a pinhole camera. `None` when the point is behind the
/// camera or outside either field-of-view half-angle.
pub fn project_point(pose: &CameraPose, intr: &CameraIntrinsics, p: Vec3) -> Option<ImagePoint> {
    let c = pose.to_camera(p);
    if !(c.z > 0.0) {
        return None;
    }
    let th = (intr.h_fov * 0.5).to_radians().tan();
    let tv = (intr.v_fov * 0.5).to_radians().tan();
    let u = 0.5 + 0.5 * (c.x / c.z) / th;
    let v = 0.5 - 0.5 * (c.y / c.z) / tv;
    ((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)).then_some(ImagePoint { u, v })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub id: u32,
    pub center: Vec3,
    /// Unit normal pointing out of the printed face.
    pub normal: Vec3,
    /// Side length of the square, meters.
    pub size: f64,
    pub object_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionProfile {
    pub min_range: f64,
    pub max_range: f64,
    pub marker_size: f64,
    pub max_view_angle: f64,
    /// Test camera-to-marker segments against the scene's sphere colliders.
    #[serde(default)]
    pub occlusion: bool,
}

impl DetectionProfile {
    /// Table-top profile: 4.3 cm markers, detectable from 4 cm to 2 m.
    pub const LOCALIZATION: DetectionProfile = DetectionProfile {
        min_range: 0.04,
        max_range: 2.0,
        marker_size: 0.043,
        max_view_angle: 70.0,
        occlusion: false,
    };

    /// Corridor profile: 17.3 cm markers, detectable from 14 cm to 9 m.
    pub const NAVIGATION: DetectionProfile = DetectionProfile {
        min_range: 0.14,
        max_range: 9.0,
        marker_size: 0.173,
        max_view_angle: 70.0,
        occlusion: false,
    };

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.min_range > 0.0 && self.min_range < self.max_range) {
            return Err(SceneError::Invalid(format!(
                "detection range must satisfy 0 < min < max, got [{}, {}]",
                self.min_range, self.max_range
            )));
        }
        Ok(())
    }

    pub fn clamp_distance(&self, d: f64) -> f64 {
        d.clamp(self.min_range, self.max_range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub marker_id: u32,
    pub image_point: ImagePoint,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec3,
    pub max: Vec3,
}

impl Bounds {
    pub fn contains(&self, p: Vec3) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collider {
    pub center: Vec3,
    #[serde(rename = "radius_m")]
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub markers: Vec<Marker>,
    pub bounds: Bounds,
    pub colliders: Vec<Collider>,
    /// Seed of the generator that produced this scene, if any.
    pub seed: Option<u64>,
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene document: {message} (line {line}, column {column})")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported scene schema {0:?}, expected \"{SCENE_SCHEMA}\"")]
    Schema(String),
    #[error("duplicate marker id {0}")]
    DuplicateId(u32),
    #[error("marker {0} lies outside the scene bounds")]
    OutOfBounds(u32),
    #[error("marker {id}: {reason}")]
    InvalidMarker { id: u32, reason: String },
    #[error("{0}")]
    Invalid(String),
}

impl Scene {
    /// Validates and builds a scene: unique ids, unit normals, positive
    /// sizes, all marker centers inside `bounds`.
    pub fn new(
        mut markers: Vec<Marker>,
        bounds: Bounds,
        colliders: Vec<Collider>,
    ) -> Result<Scene, SceneError> {
        let mut seen = BTreeSet::new();
        for m in &mut markers {
            if !seen.insert(m.id) {
                return Err(SceneError::DuplicateId(m.id));
            }
            if !m.center.is_finite() {
                return Err(SceneError::InvalidMarker {
                    id: m.id,
                    reason: "non-finite center".into(),
                });
            }
            if !(m.size > 0.0) {
                return Err(SceneError::InvalidMarker {
                    id: m.id,
                    reason: format!("size must be positive, got {}", m.size),
                });
            }
            m.normal = m.normal.normalized().ok_or_else(|| SceneError::InvalidMarker {
                id: m.id,
                reason: "normal must be a non-zero finite vector".into(),
            })?;
            if !bounds.contains(m.center) {
                return Err(SceneError::OutOfBounds(m.id));
            }
        }
        for c in &colliders {
            if !(c.radius > 0.0) || !c.center.is_finite() {
                return Err(SceneError::Invalid(format!(
                    "collider radius must be positive, got {}",
                    c.radius
                )));
            }
        }
        Ok(Scene {
            markers,
            bounds,
            colliders,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn marker(&self, id: u32) -> Option<&Marker> {
        self.markers.iter().find(|m| m.id == id)
    }
}

fn segment_hits_sphere(a: Vec3, b: Vec3, c: &Collider) -> bool {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 {
        ((c.center - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * t).distance(c.center) < c.radius
}

fn occluded(scene: &Scene, eye: Vec3, target: Vec3) -> bool {
    scene.colliders.iter().any(|c| {
        // A collider wrapping the marker's own object does not hide it.
        target.distance(c.center) >= c.radius
            && eye.distance(c.center) >= c.radius
            && segment_hits_sphere(eye, target, c)
    })
}

/// Reports every marker visible from `pose`, sorted by marker id.
pub fn detect_markers(
    scene: &Scene,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
    profile: &DetectionProfile,
) -> Vec<Detection> {
    let cos_limit = profile.max_view_angle.to_radians().cos();
    let mut out: Vec<Detection> = scene
        .markers
        .iter()
        .filter_map(|m| {
            let distance = pose.position.distance(m.center);
            if !(distance >= profile.min_range && distance <= profile.max_range) {
                return None;
            }
            let to_camera = (pose.position - m.center) * (1.0 / distance);
            if to_camera.dot(m.normal) < cos_limit {
                return None;
            }
            let image_point = project_point(pose, intr, m.center)?;
            if profile.occlusion && occluded(scene, pose.position, m.center) {
                return None;
            }
            Some(Detection {
                marker_id: m.id,
                image_point,
                distance,
            })
        })
        .collect();
    out.sort_by_key(|d| d.marker_id);
    out
}

// ---------------------------------------------------------------------------
// Config document

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    bounds: Bounds,
    markers: Vec<MarkerDoc>,
    #[serde(default)]
    colliders: Vec<Collider>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarkerDoc {
    id: u32,
    center: Vec3,
    normal: Vec3,
    size_m: f64,
    label: String,
}

/// Parses an `echogrid-scene/1` JSON document.
pub fn scene_from_config(text: &str) -> Result<Scene, SceneError> {
    let doc: SceneDoc = serde_json::from_str(text).map_err(|e| SceneError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.schema != SCENE_SCHEMA {
        return Err(SceneError::Schema(doc.schema));
    }
    let markers = doc
        .markers
        .into_iter()
        .map(|m| Marker {
            id: m.id,
            center: m.center,
            normal: m.normal,
            size: m.size_m,
            object_label: m.label,
        })
        .collect();
    let scene = Scene::new(markers, doc.bounds, doc.colliders)?;
    Ok(Scene {
        seed: doc.seed,
        ..scene
    })
}

/// Serializes a scene as a pretty-printed `echogrid-scene/1` document.
pub fn scene_to_config(scene: &Scene) -> String {
    let doc = SceneDoc {
        schema: SCENE_SCHEMA.to_string(),
        seed: scene.seed,
        bounds: scene.bounds,
        markers: scene
            .markers
            .iter()
            .map(|m| MarkerDoc {
                id: m.id,
                center: m.center,
                normal: m.normal,
                size_m: m.size,
                label: m.object_label.clone(),
            })
            .collect(),
        colliders: scene.colliders.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("scene document serializes");
    s.push('\n');
    s
}

/// The bundled corridor layout: eight obstacles in a 15 m x 6 m corridor.
pub const CORRIDOR_TEMPLATE: &str = include_str!("../assets/corridor.json");

pub fn corridor_template() -> Scene {
    scene_from_config(CORRIDOR_TEMPLATE).expect("bundled corridor template is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> CameraPose {
        CameraPose::new(Vec3::ZERO, 0.0, 0.0)
    }

    fn facing_marker(id: u32, center: Vec3) -> Marker {
        Marker {
            id,
            center,
            normal: Vec3::new(0.0, 0.0, -1.0),
            size: 0.043,
            object_label: "thing".into(),
        }
    }

    fn open_scene(markers: Vec<Marker>) -> Scene {
        let bounds = Bounds {
            min: Vec3::new(-20.0, -20.0, -20.0),
            max: Vec3::new(20.0, 20.0, 20.0),
        };
        Scene::new(markers, bounds, vec![]).unwrap()
    }

    #[test]
    fn on_axis_point_hits_principal_point() {
        let ip = project_point(&origin(), &CameraIntrinsics::default(), Vec3::new(0.0, 0.0, 1.0))
            .unwrap();
        assert_eq!((ip.u, ip.v), (0.5, 0.5));
    }

    #[test]
    fn point_behind_camera_is_culled() {
        let intr = CameraIntrinsics::default();
        assert!(project_point(&origin(), &intr, Vec3::new(0.0, 0.0, -1.0)).is_none());
        assert!(project_point(&origin(), &intr, Vec3::new(0.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn image_axes_follow_screen_convention() {
        let intr = CameraIntrinsics::default();
        let right = project_point(&origin(), &intr, Vec3::new(0.1, 0.0, 1.0)).unwrap();
        let up = project_point(&origin(), &intr, Vec3::new(0.0, 0.1, 1.0)).unwrap();
        assert!(right.u > 0.5);
        assert!(up.v < 0.5);
    }

    #[test]
    fn looking_straight_down_puts_forward_at_top() {
        let pose = CameraPose::new(Vec3::new(0.0, 1.0, 0.0), 0.0, -90.0);
        let intr = CameraIntrinsics::default();
        let ahead = project_point(&pose, &intr, Vec3::new(0.0, 0.0, 0.1)).unwrap();
        let right = project_point(&pose, &intr, Vec3::new(0.1, 0.0, 0.0)).unwrap();
        assert!(ahead.v < 0.5);
        assert!((ahead.u - 0.5).abs() < 1e-12);
        assert!(right.u > 0.5);
    }

    #[test]
    fn yaw_wraps_into_half_open_interval() {
        assert_eq!(normalize_yaw(180.0), 180.0);
        assert_eq!(normalize_yaw(-180.0), 180.0);
        assert_eq!(normalize_yaw(190.0), -170.0);
        assert_eq!(normalize_yaw(-540.0), 180.0);
    }

    #[test]
    fn too_close_marker_is_not_detected() {
        let scene = open_scene(vec![facing_marker(1, Vec3::new(0.0, 0.0, 0.03))]);
        let d = detect_markers(
            &scene,
            &origin(),
            &CameraIntrinsics::default(),
            &DetectionProfile::LOCALIZATION,
        );
        assert!(d.is_empty());
    }

    #[test]
    fn on_axis_marker_detected_at_center() {
        let scene = open_scene(vec![facing_marker(1, Vec3::new(0.0, 0.0, 0.5))]);
        let d = detect_markers(
            &scene,
            &origin(),
            &CameraIntrinsics::default(),
            &DetectionProfile::LOCALIZATION,
        );
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].marker_id, 1);
        assert_eq!((d[0].image_point.u, d[0].image_point.v), (0.5, 0.5));
        assert_eq!(d[0].distance, 0.5);
    }

    #[test]
    fn grazing_marker_is_rejected() {
        let mut m = facing_marker(1, Vec3::new(0.0, 0.0, 1.0));
        m.normal = Vec3::new(1.0, 0.0, -0.2);
        let scene = open_scene(vec![m]);
        let d = detect_markers(
            &scene,
            &origin(),
            &CameraIntrinsics::default(),
            &DetectionProfile::LOCALIZATION,
        );
        assert!(d.is_empty());
    }

    #[test]
    fn occlusion_only_when_enabled() {
        let mut scene = open_scene(vec![facing_marker(1, Vec3::new(0.0, 0.0, 3.0))]);
        scene.colliders.push(Collider {
            center: Vec3::new(0.0, 0.0, 1.5),
            radius: 0.3,
        });
        let intr = CameraIntrinsics::default();
        let mut profile = DetectionProfile::NAVIGATION;
        assert_eq!(detect_markers(&scene, &origin(), &intr, &profile).len(), 1);
        profile.occlusion = true;
        assert!(detect_markers(&scene, &origin(), &intr, &profile).is_empty());
    }

    #[test]
    fn detections_sorted_by_id() {
        let scene = open_scene(vec![
            facing_marker(9, Vec3::new(0.1, 0.0, 1.0)),
            facing_marker(2, Vec3::new(-0.1, 0.0, 1.0)),
            facing_marker(5, Vec3::new(0.0, 0.05, 1.0)),
        ]);
        let d = detect_markers(
            &scene,
            &origin(),
            &CameraIntrinsics::default(),
            &DetectionProfile::LOCALIZATION,
        );
        let ids: Vec<u32> = d.iter().map(|d| d.marker_id).collect();
        assert_eq!(ids, vec![2, 5, 9]);
    }

    #[test]
    fn minimal_config_parses() {
        let doc = r#"{
            "schema": "echogrid-scene/1",
            "bounds": {"min": [-1, 0, 0], "max": [1, 2, 2]},
            "markers": [{"id": 7, "center": [0, 1, 1], "normal": [0, 0, -1], "size_m": 0.043, "label": "mouse"}]
        }"#;
        let s = scene_from_config(doc).unwrap();
        assert_eq!(s.markers.len(), 1);
        assert_eq!(s.markers[0].object_label, "mouse");
        assert!(s.colliders.is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let doc = r#"{
            "schema": "echogrid-scene/1",
            "bounds": {"min": [-1, 0, 0], "max": [1, 2, 2]},
            "markers": [
                {"id": 5, "center": [0, 1, 1], "normal": [0, 0, -1], "size_m": 0.043, "label": "a"},
                {"id": 5, "center": [0.5, 1, 1], "normal": [0, 0, -1], "size_m": 0.043, "label": "b"}
            ]
        }"#;
        assert!(matches!(scene_from_config(doc), Err(SceneError::DuplicateId(5))));
    }

    #[test]
    fn out_of_bounds_marker_rejected() {
        let doc = r#"{
            "schema": "echogrid-scene/1",
            "bounds": {"min": [-1, 0, 0], "max": [1, 2, 2]},
            "markers": [{"id": 1, "center": [0, 1, 3], "normal": [0, 0, -1], "size_m": 0.043, "label": "a"}]
        }"#;
        assert!(matches!(scene_from_config(doc), Err(SceneError::OutOfBounds(1))));
    }

    #[test]
    fn parse_errors_carry_position() {
        let doc = "{\n  \"schema\": \"echogrid-scene/1\",\n  \"bounds\": 12\n}";
        match scene_from_config(doc) {
            Err(SceneError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let missing = r#"{"schema": "echogrid-scene/1", "markers": []}"#;
        let err = scene_from_config(missing).unwrap_err().to_string();
        assert!(err.contains("bounds"), "{err}");
    }

    #[test]
    fn wrong_schema_rejected() {
        let doc = r#"{"schema": "other/2", "bounds": {"min": [0,0,0], "max": [1,1,1]}, "markers": []}"#;
        assert!(matches!(scene_from_config(doc), Err(SceneError::Schema(_))));
    }

    #[test]
    fn corridor_template_has_eight_obstacles() {
        let s = corridor_template();
        assert_eq!(s.markers.len(), 8);
        let size = s.bounds.max - s.bounds.min;
        assert_eq!((size.x, size.z), (6.0, 15.0));
        let mut labels: Vec<&str> = s.markers.iter().map(|m| m.object_label.as_str()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels, vec!["cardboard_box", "chair", "garbage_bin", "small_bag"]);
    }

    #[test]
    fn config_round_trips() {
        let s = corridor_template();
        let again = scene_from_config(&scene_to_config(&s)).unwrap();
        assert_eq!(s, again);
    }
}
