//! Pinhole cameras with zero skew and square pixels.
//!
//! A [`Camera`] caches its composed projection matrix `P = K R [I | -C]`, so
//! projection in the inner loops of the triangulators is a handful of dot
//! products.

use nalgebra::{Matrix3, Matrix3x4, Point2, Point3, RowVector4, Vector3};

use crate::error::{Error, Result};

pub type WorldPoint = Point3<f64>;
pub type ImagePoint = Point2<f64>;

/// Largest accepted deviation of `RᵀR` from the identity (and of `det R` from 1).
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Depth magnitude below which a point is treated as lying on the principal plane.
pub const MIN_DEPTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    intrinsics: Matrix3<f64>,
    rotation: Matrix3<f64>,
    centre: Vector3<f64>,
    matrix: Matrix3x4<f64>,
}

/// Max-abs entry of `RᵀR - I`, combined with `|det R - 1|`.
pub fn orthonormality_residual(r: &Matrix3<f64>) -> f64 {
    let gram = r.transpose() * r - Matrix3::identity();
    gram.amax().max((r.determinant() - 1.0).abs())
}

impl Camera {
    pub fn new(
        focal_length: f64,
        principal_point: [f64; 2],
        rotation: Matrix3<f64>,
        centre: Vector3<f64>,
    ) -> Result<Self> {
        if !(focal_length.is_finite() && focal_length > 0.0) {
            return Err(Error::InvalidCamera(format!(
                "focal length must be positive, got {focal_length}"
            )));
        }
        if !principal_point.iter().all(|v| v.is_finite())
            || !rotation.iter().all(|v| v.is_finite())
            || !centre.iter().all(|v| v.is_finite())
        {
            return Err(Error::InvalidCamera("non-finite parameter".into()));
        }
        let residual = orthonormality_residual(&rotation);
        if residual > ROTATION_TOLERANCE {
            return Err(Error::InvalidCamera(format!(
                "rotation is not orthonormal with det +1 (residual {residual:e})"
            )));
        }

        let [cx, cy] = principal_point;
        #[rustfmt::skip]
        let intrinsics = Matrix3::new(
            focal_length, 0.0, cx,
            0.0, focal_length, cy,
            0.0, 0.0, 1.0,
        );
        let mut extrinsic = Matrix3x4::zeros();
        extrinsic
            .fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&Matrix3::identity());
        extrinsic.set_column(3, &(-centre));
        let matrix = intrinsics * rotation * extrinsic;

        Ok(Self {
            intrinsics,
            rotation,
            centre,
            matrix,
        })
    }

    pub fn focal_length(&self) -> f64 {
        self.intrinsics[(0, 0)]
    }

    pub fn principal_point(&self) -> [f64; 2] {
        [self.intrinsics[(0, 2)], self.intrinsics[(1, 2)]]
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn centre(&self) -> &Vector3<f64> {
        &self.centre
    }

    /// The cached 3×4 projection matrix.
    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.matrix
    }

    /// Row `l` (0-based) of the projection matrix.
    pub fn row(&self, l: usize) -> RowVector4<f64> {
        self.matrix.row(l).into_owned()
    }

    /// `p̄₃ᵀX + p₃₄`, the depth of `x` along the optical axis.
    #[inline]
    pub fn depth(&self, x: &WorldPoint) -> f64 {
        let p = &self.matrix;
        p[(2, 0)] * x.x + p[(2, 1)] * x.y + p[(2, 2)] * x.z + p[(2, 3)]
    }

    /// Homogeneous image point `P·[X; 1]`.
    #[inline]
    pub fn project_homogeneous(&self, x: &WorldPoint) -> Vector3<f64> {
        let p = &self.matrix;
        Vector3::new(
            p[(0, 0)] * x.x + p[(0, 1)] * x.y + p[(0, 2)] * x.z + p[(0, 3)],
            p[(1, 0)] * x.x + p[(1, 1)] * x.y + p[(1, 2)] * x.z + p[(1, 3)],
            p[(2, 0)] * x.x + p[(2, 1)] * x.y + p[(2, 2)] * x.z + p[(2, 3)],
        )
    }

    pub fn project(&self, x: &WorldPoint) -> Result<ImagePoint> {
        let h = self.project_homogeneous(x);
        if h.z.abs() <= MIN_DEPTH {
            return Err(Error::AtInfinity { depth: h.z });
        }
        Ok(ImagePoint::new(h.x / h.z, h.y / h.z))
    }

    /// True iff `x` lies strictly in front of the camera.
    #[inline]
    pub fn cheirality(&self, x: &WorldPoint) -> bool {
        self.depth(x) > 0.0
    }
}

/// Rotation whose third row (the optical axis) points from `eye` to `target`,
/// with image y pointing along `-up`.
pub fn look_at(
    eye: &Vector3<f64>,
    target: &Vector3<f64>,
    up: &Vector3<f64>,
) -> Result<Matrix3<f64>> {
    let forward = target - eye;
    let norm = forward.norm();
    if norm <= MIN_DEPTH {
        return Err(Error::Degenerate(
            "look-at target coincides with eye".into(),
        ));
    }
    let z = forward / norm;
    let down = -up;
    let x = down.cross(&z);
    let xn = x.norm();
    if xn <= 1e-12 {
        return Err(Error::Degenerate(
            "up vector parallel to viewing direction".into(),
        ));
    }
    let x = x / xn;
    let y = z.cross(&x);
    Ok(Matrix3::from_rows(&[
        x.transpose(),
        y.transpose(),
        z.transpose(),
    ]))
}
