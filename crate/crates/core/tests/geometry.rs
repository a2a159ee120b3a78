//! Camera, detection and encoding checked against independent geometry.

use echogrid_core::encoder::{
    azimuth_for_col, loop_period, map_to_cell, note_for_row, note_spec, update_activations, NoteName, FLAT_PERIOD,
};
use echogrid_core::scene::{corridor_template, detect_markers, project_point, Bounds, ImagePoint};
use echogrid_core::{
    ActiveCellSet, CameraIntrinsics, CameraPose, CellGrid, CellId, Detection, DetectionProfile, Marker, Mode, Scene,
    Vec3,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LOC: DetectionProfile = DetectionProfile::LOCALIZATION;
const NAV: DetectionProfile = DetectionProfile::NAVIGATION;

fn marker_at(id: u32, center: Vec3) -> Marker {
    Marker {
        id,
        center,
        normal: Vec3::new(0.0, 0.0, -1.0),
        size: 0.1,
        object_label: "m".into(),
    }
}

fn open_scene(markers: Vec<Marker>) -> Scene {
    let b = Bounds {
        min: Vec3::new(-50.0, -50.0, -50.0),
        max: Vec3::new(50.0, 50.0, 50.0),
    };
    Scene::new(markers, b, vec![]).unwrap()
}

// ---------------------------------------------------------------------------
// Projection

#[test]
fn edge_point_lands_just_inside_the_image() {
    let pose = CameraPose::new(Vec3::ZERO, 0.0, 0.0);
    let intr = CameraIntrinsics::default();
    let eps = 1e-6;
    let p = Vec3::new(30f64.to_radians().tan() - eps, 0.0, 1.0);
    let ip = project_point(&pose, &intr, p).unwrap();
    assert!(ip.u < 1.0 && ip.u > 1.0 - 1e-5, "{ip:?}");

    // Brute-force ray sampler: the image column whose ray points closest to p.
    let half = 30f64.to_radians().tan();
    let dir = p.normalized().unwrap();
    let best = (0..=200_000)
        .map(|i| i as f64 / 200_000.0)
        .min_by(|&a, &b| {
            let ang = |u: f64| {
                let r = Vec3::new((2.0 * u - 1.0) * half, 0.0, 1.0).normalized().unwrap();
                -r.dot(dir)
            };
            ang(a).total_cmp(&ang(b))
        })
        .unwrap();
    assert!((best - ip.u).abs() <= 1e-5, "sampler {best} vs {}", ip.u);
    assert!(project_point(&pose, &intr, Vec3::new(half + eps, 0.0, 1.0)).is_none());
}

#[test]
fn turning_right_moves_markers_left() {
    let pose_at = |yaw: f64| CameraPose::new(Vec3::ZERO, yaw, 0.0);
    let intr = CameraIntrinsics::default();
    let p = Vec3::new(0.0, 0.0, 3.0);
    let mut last = f64::INFINITY;
    let mut seen = 0;
    for i in 0..80 {
        let yaw = -40.0 + i as f64;
        match project_point(&pose_at(yaw), &intr, p) {
            Some(ip) => {
                assert!(ip.u < last, "yaw {yaw}");
                last = ip.u;
                seen += 1;
            }
            None => assert!(yaw.abs() > 29.9, "lost at yaw {yaw}"),
        }
    }
    assert!(seen >= 59);
}

proptest! {
    #[test]
    fn projection_is_scale_invariant_along_the_ray(
        pos in (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0),
        yaw in -180.0f64..180.0,
        pitch in -89.0f64..89.0,
        off in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        k in 0.01f64..100.0,
    ) {
        let pose = CameraPose::new(Vec3::new(pos.0, pos.1, pos.2), yaw, pitch);
        let intr = CameraIntrinsics::default();
        let p = pose.position + pose.forward() + Vec3::new(off.0, off.1, off.2) * 0.5;
        let q = pose.position + (p - pose.position) * k;
        match (project_point(&pose, &intr, p), project_point(&pose, &intr, q)) {
            (Some(a), Some(b)) => {
                prop_assert!((a.u - b.u).abs() < 1e-9 && (a.v - b.v).abs() < 1e-9);
            }
            (None, None) => {}
            (a, b) => {
                // Only points numerically on the frustum edge may disagree.
                let near_edge = |ip: Option<ImagePoint>| ip.is_some_and(|ip| {
                    [ip.u, 1.0 - ip.u, ip.v, 1.0 - ip.v].iter().any(|d| d.abs() < 1e-9)
                });
                prop_assert!(near_edge(a) || near_edge(b));
            }
        }
    }

    #[test]
    fn detections_are_in_range_and_deterministic(
        seed in any::<u64>(),
        yaw in -180.0f64..180.0,
        pitch in -60.0f64..60.0,
    ) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let markers: Vec<Marker> = (0..20)
            .map(|i| {
                let c = Vec3::new(r.random_range(-5.0..5.0), r.random_range(-2.0..2.0), r.random_range(-5.0..5.0));
                let n = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
                Marker { normal: n.normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0)), ..marker_at(i, c) }
            })
            .collect();
        let scene = open_scene(markers);
        let pose = CameraPose::new(Vec3::ZERO, yaw, pitch);
        let intr = CameraIntrinsics::default();
        for profile in [LOC, NAV] {
            let d = detect_markers(&scene, &pose, &intr, &profile);
            prop_assert_eq!(&d, &detect_markers(&scene, &pose, &intr, &profile));
            for det in &d {
                let m = scene.marker(det.marker_id).unwrap();
                prop_assert!(det.distance >= profile.min_range && det.distance <= profile.max_range);
                prop_assert_eq!(det.distance, m.center.distance(pose.position));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Detection

#[test]
fn range_gates_at_published_bounds() {
    let pose = CameraPose::new(Vec3::ZERO, 0.0, 0.0);
    let intr = CameraIntrinsics::default();
    let detected = |d: f64, profile: &DetectionProfile| {
        let scene = open_scene(vec![marker_at(1, Vec3::new(0.0, 0.0, d))]);
        !detect_markers(&scene, &pose, &intr, profile).is_empty()
    };
    for (d, want) in [(0.039, false), (0.041, true), (1.999, true), (2.001, false), (0.03, false)] {
        assert_eq!(detected(d, &LOC), want, "localization at {d} m");
    }
    for (d, want) in [(0.139, false), (0.141, true), (8.999, true), (9.001, false)] {
        assert_eq!(detected(d, &NAV), want, "navigation at {d} m");
    }
}

#[test]
fn corridor_entrance_view_matches_per_marker_check() {
    let scene = corridor_template();
    assert_eq!(scene.markers.len(), 8);
    assert_eq!(scene.bounds.max.z - scene.bounds.min.z, 15.0);
    assert_eq!(scene.bounds.max.x - scene.bounds.min.x, 6.0);
    let intr = CameraIntrinsics::default();
    for (eye, pitch) in [(Vec3::new(0.0, 1.2, 0.0), -10.0), (Vec3::new(0.0, 1.2, 0.5), -5.0), (Vec3::new(1.0, 1.0, 2.0), -20.0)] {
        let pose = CameraPose::new(eye, 0.0, pitch);
        let got: Vec<u32> = detect_markers(&scene, &pose, &intr, &NAV).iter().map(|d| d.marker_id).collect();

        // Independent check in angles: bearing and elevation relative to the
        // view direction, computed with atan2 in a pitched frame.
        let want: Vec<u32> = scene
            .markers
            .iter()
            .filter(|m| {
                let d = m.center - eye;
                let dist = d.norm();
                let (sp, cp) = pitch.to_radians().sin_cos();
                // Rotate about x so the camera looks along +z.
                let (y, z) = (d.y * cp - d.z * sp, d.y * sp + d.z * cp);
                let x = d.x;
                let h_ok = z > 0.0 && x.atan2(z).abs().to_degrees() <= 30.0 + 1e-9;
                let v_ok = z > 0.0 && y.atan2(z).abs().to_degrees() <= 22.5 + 1e-9;
                let facing = (-d.dot(m.normal) / dist).acos().to_degrees() <= 70.0;
                (0.14..=9.0).contains(&dist) && h_ok && v_ok && facing
            })
            .map(|m| m.id)
            .collect();
        assert!(!want.is_empty(), "eye {eye:?} sees nothing");
        assert_eq!(got, want, "eye {eye:?}");
    }
}

// ---------------------------------------------------------------------------
// Encoding

#[test]
fn periods_are_bit_exact() {
    let mut r = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10_000 {
        let three = r.random_bool(0.5);
        let profile = if r.random_bool(0.5) { LOC } else { NAV };
        let d: f64 = 10f64.powf(r.random_range(-3.0..1.5));
        let got = loop_period(if three { Mode::ThreeD } else { Mode::TwoD }, d, &profile).unwrap();
        let want = if three { d.max(profile.min_range).min(profile.max_range) } else { 2.0 };
        assert_eq!(got.to_bits(), want.to_bits(), "d {d}");
    }
    assert_eq!(loop_period(Mode::ThreeD, 0.3, &LOC).unwrap(), 0.3);
    assert_eq!(loop_period(Mode::TwoD, 7.0, &NAV).unwrap(), FLAT_PERIOD);
}

#[test]
fn fifteen_cell_table() {
    let grid = CellGrid::default();
    let et = |midi: i32| 440.0 * 2f64.powf((midi - 69) as f64 / 12.0);
    let table = [
        (0, 0, NoteName::G3, 55, -40.0),
        (0, 1, NoteName::G3, 55, -20.0),
        (0, 2, NoteName::G3, 55, 0.0),
        (0, 3, NoteName::G3, 55, 20.0),
        (0, 4, NoteName::G3, 55, 40.0),
        (1, 0, NoteName::E3, 52, -40.0),
        (1, 1, NoteName::E3, 52, -20.0),
        (1, 2, NoteName::E3, 52, 0.0),
        (1, 3, NoteName::E3, 52, 20.0),
        (1, 4, NoteName::E3, 52, 40.0),
        (2, 0, NoteName::C3, 48, -40.0),
        (2, 1, NoteName::C3, 48, -20.0),
        (2, 2, NoteName::C3, 48, 0.0),
        (2, 3, NoteName::C3, 48, 20.0),
        (2, 4, NoteName::C3, 48, 40.0),
    ];
    assert_eq!(CellId::all().count(), 15);
    for (row, col, name, midi, az) in table {
        let cell = CellId::new(row, col).unwrap();
        let spec = note_spec(cell, &grid);
        assert_eq!(spec.name, name);
        assert_eq!(note_for_row(row).unwrap(), name);
        assert!((spec.frequency - et(midi)).abs() < 1e-9);
        assert_eq!(spec.azimuth, az);
        assert_eq!(azimuth_for_col(col, &grid).unwrap(), -40.0 + 20.0 * col as f64);
        // The cell's own image center maps back to it.
        let center = ImagePoint {
            u: (col as f64 + 0.5) / 5.0,
            v: (row as f64 + 0.5) / 3.0,
        };
        assert_eq!(map_to_cell(center, &grid).unwrap(), cell);
    }
    assert!((NoteName::C3.frequency() - 130.8128).abs() < 5e-5);
    assert!((NoteName::E3.frequency() - 164.8138).abs() < 5e-5);
    assert!((NoteName::G3.frequency() - 195.9977).abs() < 5e-5);
}

fn det(id: u32, u: f64, v: f64, d: f64) -> Detection {
    Detection {
        marker_id: id,
        image_point: ImagePoint { u, v },
        distance: d,
    }
}

#[test]
fn boundary_example_by_millisecond_replay() {
    // Period 0.5 s, 0.4 s in; advance 0.2 s seeing the marker at 1.0 m.
    let grid = CellGrid::default();
    let d0 = [det(1, 0.5, 0.5, 0.5)];
    let s0 = update_activations(&ActiveCellSet::empty(Mode::ThreeD, 0.0), &d0, &grid, Mode::ThreeD, 0.0, &LOC).unwrap();
    let s1 = update_activations(&s0, &d0, &grid, Mode::ThreeD, 0.4, &LOC).unwrap();
    let s2 = update_activations(&s1, &[det(1, 0.5, 0.5, 1.0)], &grid, Mode::ThreeD, 0.6, &LOC).unwrap();
    let a = s2.activations[0];

    // Oracle: walk 1 ms at a time, switching period at each boundary.
    let (mut period, mut phase) = (500u32, 400u32);
    for _ in 0..200 {
        phase += 1;
        if phase == period {
            phase = 0;
            period = 1000;
        }
    }
    assert_eq!(period, 1000);
    assert!((a.period - period as f64 / 1000.0).abs() < 1e-9);
    assert!((a.loop_phase - phase as f64 / 1000.0).abs() < 1e-9);
    assert_eq!(a.loops_completed, 1);
}

proptest! {
    #[test]
    fn steps_compose(
        d in 0.05f64..1.9,
        mode in prop::bool::ANY,
        t1 in 0.0f64..3.0,
        t2 in 0.0f64..3.0,
        u in 0.0f64..1.0,
        v in 0.0f64..1.0,
    ) {
        let mode = if mode { Mode::ThreeD } else { Mode::TwoD };
        let grid = CellGrid::default();
        let dets = [det(3, u, v, d)];
        let s0 = update_activations(&ActiveCellSet::empty(mode, 0.0), &dets, &grid, mode, 0.0, &LOC).unwrap();
        let a = update_activations(&s0, &dets, &grid, mode, t1, &LOC).unwrap();
        let a = update_activations(&a, &dets, &grid, mode, t1 + t2, &LOC).unwrap();
        let b = update_activations(&s0, &dets, &grid, mode, t1 + t2, &LOC).unwrap();
        let (x, y) = (a.activations[0], b.activations[0]);
        prop_assert!((x.period - y.period).abs() < 1e-9);
        // Phases agree modulo the period (a phase at a boundary may wrap).
        let dp = (x.loop_phase - y.loop_phase).abs();
        prop_assert!(dp < 1e-9 || (dp - x.period).abs() < 1e-9, "{:?} vs {:?}", x, y);
        prop_assert!(x.loop_phase >= 0.0 && x.loop_phase < x.period);
    }

    #[test]
    fn three_d_period_is_monotone(a in 0.0001f64..20.0, b in 0.0001f64..20.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for p in [LOC, NAV] {
            prop_assert!(loop_period(Mode::ThreeD, lo, &p).unwrap() <= loop_period(Mode::ThreeD, hi, &p).unwrap());
            prop_assert_eq!(loop_period(Mode::TwoD, lo, &p).unwrap(), loop_period(Mode::TwoD, hi, &p).unwrap());
        }
    }

    #[test]
    fn vanished_markers_never_survive(
        ids in prop::collection::btree_set(0u32..10, 0..10),
        keep in prop::collection::btree_set(0u32..10, 0..10),
    ) {
        let grid = CellGrid::default();
        let dets: Vec<Detection> = ids.iter().map(|&i| det(i, 0.09 * i as f64, 0.5, 1.0)).collect();
        let s0 = update_activations(&ActiveCellSet::empty(Mode::ThreeD, 0.0), &dets, &grid, Mode::ThreeD, 0.0, &LOC).unwrap();
        let later: Vec<Detection> = dets.iter().filter(|d| keep.contains(&d.marker_id)).copied().collect();
        let s1 = update_activations(&s0, &later, &grid, Mode::ThreeD, 0.1, &LOC).unwrap();
        for a in &s1.activations {
            prop_assert!(keep.contains(&a.marker_id) && ids.contains(&a.marker_id));
        }
        prop_assert_eq!(s1.activations.len(), later.len());
    }
}
