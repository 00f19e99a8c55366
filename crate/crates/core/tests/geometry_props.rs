//! Property tests for the camera and voxel geometry.

use proptest::prelude::*;

use voxelprune::geometry::{
    decode_camera, unproject, voxelize, CameraCompact, CameraDecoded, VoxelKey,
};
use voxelprune::FrameGrid;

/// Independent forward projection: `x_cam = R x + T`, then the pinhole map.
/// Written as bare scalar arithmetic so it shares nothing with the library's
/// unprojection path.
fn project_oracle(cam: &CameraDecoded, world: [f64; 3]) -> (f64, f64, f64) {
    let r = &cam.rotation;
    let t = &cam.translation;
    let xc = r[0][0] * world[0] + r[0][1] * world[1] + r[0][2] * world[2] + t[0];
    let yc = r[1][0] * world[0] + r[1][1] * world[1] + r[1][2] * world[2] + t[1];
    let zc = r[2][0] * world[0] + r[2][1] * world[1] + r[2][2] * world[2] + t[2];
    let y = &cam.intrinsics;
    (
        y[0][0] * xc / zc + y[0][2],
        y[1][1] * yc / zc + y[1][2],
        zc,
    )
}

fn camera_strategy() -> impl Strategy<Value = CameraCompact> {
    (
        [-1.0f64..1.0, -1.0..1.0, -1.0..1.0, -1.0..1.0],
        [-5.0f64..5.0, -5.0..5.0, -5.0..5.0],
        [0.2f64..2.6, 0.2..2.6],
    )
        .prop_filter_map("quaternion too small", |(q, t, fov)| {
            let norm = (q.iter().map(|c| c * c).sum::<f64>()).sqrt();
            if norm < 1e-3 {
                return None;
            }
            Some(CameraCompact {
                rotation: [q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm],
                translation: t,
                fov,
            })
        })
}

proptest! {
    /// Forward projection of the unprojected point recovers (u, v, depth).
    #[test]
    fn unproject_roundtrip(
        cam in camera_strategy(),
        u in 0.0f64..384.0,
        v in 0.0f64..384.0,
        depth in 0.05f64..50.0,
    ) {
        let grid = FrameGrid::new(1, 8, 8, 48).unwrap();
        let decoded = decode_camera(&cam, &grid).unwrap();
        let world = unproject(u, v, depth, &decoded).unwrap().unwrap();
        let (u2, v2, d2) = project_oracle(&decoded, world);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        prop_assert!(rel(u2, u) < 1e-9, "u {u} -> {u2}");
        prop_assert!(rel(v2, v) < 1e-9, "v {v} -> {v2}");
        prop_assert!(rel(d2, depth) < 1e-9, "depth {depth} -> {d2}");
    }

    /// Shifting points by integer multiples of the voxel size shifts keys by
    /// exactly those integers. Offsets stay away from cell boundaries by a
    /// margin that float rounding cannot cross.
    #[test]
    fn translation_equivariance(
        delta in prop::sample::select(vec![0.5f64, 0.25, 0.125, 0.1]),
        cell in -100i64..100,
        frac in 0.05f64..0.95,
        shift in [-3i64..4, -3i64..4, -3i64..4],
    ) {
        let coord = (cell as f64 + frac) * delta;
        let point = [coord, coord, coord];
        let shifted = [
            coord + shift[0] as f64 * delta,
            coord + shift[1] as f64 * delta,
            coord + shift[2] as f64 * delta,
        ];
        let base = VoxelKey::from_point(&point, delta).unwrap();
        let moved = VoxelKey::from_point(&shifted, delta).unwrap();
        prop_assert_eq!(
            moved,
            VoxelKey::new(base.x + shift[0], base.y + shift[1], base.z + shift[2])
        );
    }

    /// Every token id lands in exactly one voxel list or the invalid list,
    /// and the map is independent of input order.
    #[test]
    fn voxelize_partitions_and_is_canonical(
        points in prop::collection::vec(
            prop_oneof![
                3 => ([-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0]).prop_map(Some),
                1 => Just(None),
            ],
            1..60,
        ),
        delta in 0.05f64..0.5,
    ) {
        let ids: Vec<(usize, Option<[f64; 3]>)> =
            points.iter().copied().enumerate().collect();
        let map = voxelize(&ids, delta).unwrap();
        let total: usize =
            map.entries().values().map(|t| t.len()).sum::<usize>() + map.invalid().len();
        prop_assert_eq!(total, ids.len());

        let mut reversed = ids.clone();
        reversed.reverse();
        let map2 = voxelize(&reversed, delta).unwrap();
        prop_assert_eq!(map, map2);
    }
}

#[test]
fn nan_points_are_invalid_not_fatal() {
    let points = vec![
        (0usize, Some([0.0, 0.0, 0.0])),
        (1usize, Some([f64::NAN, 1.0, 1.0])),
    ];
    let map = voxelize(&points, 0.1).unwrap();
    assert_eq!(map.invalid(), &[1]);
}
