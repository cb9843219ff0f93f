use nalgebra::{Matrix4, RowVector4, Vector3};

use super::{Algorithm, TriangulationResult};
use crate::consistency::Instance;
use crate::error::{Error, Result};
use crate::numerics::{smallest_right_singular, DenseMatrix};

/// Homogeneous coordinate below which the estimate is a point at infinity.
const MIN_HOMOGENEOUS_SCALE: f64 = 1e-12;
/// Ratio of the two smallest singular values below which the kernel is not unique.
const MIN_RANK_GAP: f64 = 1e-10;

/// Linear triangulation from the stacked `2M × 4` homogeneous system.
///
/// Each camera contributes rows `x[1]·p₃ᵀ - p₁ᵀ` and `x[2]·p₃ᵀ - p₂ᵀ`. Before
/// solving, image coordinates are mapped through `K⁻¹` (unit focal length,
/// principal point at the origin) and world coordinates are translated to
/// the centroid of the camera centres and scaled so the centres have RMS
/// distance `√3`. Both maps are undone on the result.
pub fn triangulate_linear(inst: &Instance) -> Result<TriangulationResult> {
    let obs = inst.observations();
    let m = obs.len() as f64;
    let centroid: Vector3<f64> = obs.iter().map(|o| o.camera.centre()).sum::<Vector3<f64>>() / m;
    let rms = (obs
        .iter()
        .map(|o| (o.camera.centre() - centroid).norm_squared())
        .sum::<f64>()
        / m)
        .sqrt();
    if rms <= 1e-12 * (1.0 + centroid.norm()) {
        return Err(Error::Degenerate("all camera centres coincide".into()));
    }
    let scale = rms / 3f64.sqrt();

    // X_h = H·X'_h for normalized world coordinates X'.
    let mut denormalize = Matrix4::identity() * scale;
    denormalize[(3, 3)] = 1.0;
    denormalize
        .fixed_view_mut::<3, 1>(0, 3)
        .copy_from(&centroid);

    let mut a = DenseMatrix::with_capacity(4, 2 * obs.len());
    for o in obs {
        let cam = &o.camera;
        let f = cam.focal_length();
        let [cx, cy] = cam.principal_point();
        let p3: RowVector4<f64> = cam.row(2) * denormalize;
        let p1: RowVector4<f64> = (cam.row(0) - cam.row(2) * cx) / f * denormalize;
        let p2: RowVector4<f64> = (cam.row(1) - cam.row(2) * cy) / f * denormalize;
        let u = (o.point.x - cx) / f;
        let v = (o.point.y - cy) / f;
        a.push_row((p3 * u - p1).as_slice())?;
        a.push_row((p3 * v - p2).as_slice())?;
    }

    let (v, sigmas) = smallest_right_singular(&a);
    if sigmas[1] <= MIN_RANK_GAP * sigmas[3] {
        return Err(Error::Degenerate(
            "linear system has a multi-dimensional null space".into(),
        ));
    }
    if v[3].abs() <= MIN_HOMOGENEOUS_SCALE {
        return Err(Error::AtInfinity { depth: v[3] });
    }
    let normalized = Vector3::new(v[0], v[1], v[2]) / v[3];
    let point = (normalized * scale + centroid).into();
    Ok(TriangulationResult::new(
        inst,
        Algorithm::Linear,
        point,
        0,
        None,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::{NoiseModel, NormKind};
    use crate::geometry::{Camera, WorldPoint};
    use crate::triangulators::fixtures::*;
    use nalgebra::{Matrix3, Rotation3, Vector2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact(cams: &[Camera], x: &WorldPoint) -> Instance {
        Instance::from_point(cams, x, None, NoiseModel::new(NormKind::Linf, 0.0).unwrap()).unwrap()
    }

    #[test]
    fn exact_stereo_pair() {
        let x = WorldPoint::new(0.0, 0.0, 5.0);
        let r = triangulate_linear(&exact(&stereo_pair(), &x)).unwrap();
        assert!((r.point - x).norm() < 1e-8);
    }

    #[test]
    fn exact_ring() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let cams = ring_cameras(10, &mut rng);
            let x = random_point(&mut rng);
            let r = triangulate_linear(&exact(&cams, &x)).unwrap();
            assert!((r.point - x).norm() < 1e-8, "{} vs {}", r.point, x);
        }
    }

    #[test]
    fn coincident_cameras_fail() {
        let cam = identity_camera();
        let x = WorldPoint::new(0.2, 0.1, 4.0);
        let inst = exact(&[cam.clone(), cam], &x);
        assert!(matches!(
            triangulate_linear(&inst),
            Err(Error::Degenerate(_)) | Err(Error::AtInfinity { .. })
        ));
    }

    #[test]
    fn equivariant_under_world_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..10 {
            let (inst, _) = noisy_instance(seed, 8, NormKind::Linf, 0.01);
            let base = triangulate_linear(&inst).unwrap().point;

            let q = Rotation3::from_euler_angles(
                rng.random_range(-3.0..3.0),
                rng.random_range(-1.5..1.5),
                rng.random_range(-3.0..3.0),
            )
            .into_inner();
            let s = rng.random_range(0.1..10.0);
            let t = Vector3::new(
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                3.0,
            );
            let moved: Vec<_> = inst
                .observations()
                .iter()
                .map(|o| {
                    let c = &o.camera;
                    let cam = Camera::new(
                        c.focal_length(),
                        c.principal_point(),
                        c.rotation() * q.transpose(),
                        q * c.centre() * s + t,
                    )
                    .unwrap();
                    crate::consistency::Observation {
                        point: o.point,
                        camera: cam,
                    }
                })
                .collect();
            let moved = Instance::new(moved, inst.noise()).unwrap();
            let got = triangulate_linear(&moved).unwrap().point;
            let expected = q * base.coords * s + t;
            assert!(
                (got.coords - expected).norm() < 1e-8 * (1.0 + expected.norm()),
                "{got} vs {expected}"
            );
        }
        let _ = Matrix3::<f64>::identity();
        let _ = Vector2::<f64>::zeros();
    }
}
