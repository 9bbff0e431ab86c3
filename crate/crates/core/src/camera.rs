//! Camera parameterization, view transforms and the pinhole convention.
//!
//! Convention: right-handed, the camera looks down `-z`, `y` is up and image
//! rows grow downward. Pixel coordinates are corner-aligned: column `0` maps
//! to the left edge of the frustum and column `width - 1` to the right edge,
//! so the top-center pixel of an odd-width image lies exactly on the ray
//! `y / -z = tan(fovy / 2)`.
//!
//! The view transform is `T(t) * R` with `R = R_yaw(y) * R_pitch(x) * R_roll(z)`
//! and maps scene points into the rendering camera frame.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PARAM_COUNT: usize = 9;
pub const PARAM_NAMES: [&str; PARAM_COUNT] =
    ["tx", "ty", "tz", "roll", "pitch", "yaw", "fovy_offset", "s_w", "s_h"];

pub const MIN_FOVY_DEG: f64 = 10.0;
pub const MAX_FOVY_DEG: f64 = 120.0;
pub const MIN_OUTPUT_SIDE: usize = 32;
/// Points with camera-frame `z >= -NEAR_PLANE` are culled.
pub const NEAR_PLANE: f64 = 1e-4;

/// Indices of the scale coefficients inside the parameter vector.
pub const SCALE_INDICES: [usize; 2] = [7, 8];

/// The nine optimized degrees of freedom. Angles in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub fovy_offset: f64,
    pub s_w: f64,
    pub s_h: f64,
}

impl CameraParams {
    /// The capture view: no motion, no FOV change, unit scales.
    pub fn identity() -> Self {
        Self {
            tx: 0.0,
            ty: 0.0,
            tz: 0.0,
            roll: 0.0,
            pitch: 0.0,
            yaw: 0.0,
            fovy_offset: 0.0,
            s_w: 1.0,
            s_h: 1.0,
        }
    }

    pub fn to_array(&self) -> [f64; PARAM_COUNT] {
        [
            self.tx,
            self.ty,
            self.tz,
            self.roll,
            self.pitch,
            self.yaw,
            self.fovy_offset,
            self.s_w,
            self.s_h,
        ]
    }

    pub fn from_array(a: [f64; PARAM_COUNT]) -> Self {
        Self {
            tx: a[0],
            ty: a[1],
            tz: a[2],
            roll: a[3],
            pitch: a[4],
            yaw: a[5],
            fovy_offset: a[6],
            s_w: a[7],
            s_h: a[8],
        }
    }
}

impl Default for CameraParams {
    fn default() -> Self {
        Self::identity()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("bound for {name} must satisfy lo < hi, got [{lo}, {hi}]")]
    Inverted { name: &'static str, lo: f64, hi: f64 },
    #[error("bound for {name} is not finite")]
    NonFinite { name: &'static str },
    #[error("scale bounds for {name} must lie within (0, inf), got [{lo}, {hi}]")]
    NonPositiveScale { name: &'static str, lo: f64, hi: f64 },
}

/// Per-parameter search box, in the order of [`PARAM_NAMES`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds {
    ranges: [(f64, f64); PARAM_COUNT],
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            ranges: [
                (-0.1, 0.1),
                (-0.1, 0.1),
                (-0.5, 0.5),
                (-10.0, 10.0),
                (-10.0, 10.0),
                (-10.0, 10.0),
                (-10.0, 10.0),
                (0.1, 2.0),
                (0.1, 2.0),
            ],
        }
    }
}

impl SearchBounds {
    pub fn new(ranges: [(f64, f64); PARAM_COUNT]) -> Result<Self, BoundsError> {
        for (i, &(lo, hi)) in ranges.iter().enumerate() {
            let name = PARAM_NAMES[i];
            if !lo.is_finite() || !hi.is_finite() {
                return Err(BoundsError::NonFinite { name });
            }
            if lo >= hi {
                return Err(BoundsError::Inverted { name, lo, hi });
            }
            if SCALE_INDICES.contains(&i) && lo <= 0.0 {
                return Err(BoundsError::NonPositiveScale { name, lo, hi });
            }
        }
        Ok(Self { ranges })
    }

    pub fn ranges(&self) -> &[(f64, f64); PARAM_COUNT] {
        &self.ranges
    }

    pub fn range(&self, index: usize) -> (f64, f64) {
        self.ranges[index]
    }

    pub fn contains(&self, params: &CameraParams) -> bool {
        params
            .to_array()
            .iter()
            .zip(&self.ranges)
            .all(|(v, &(lo, hi))| (lo..=hi).contains(v))
    }

    /// Affine map of each parameter onto `[0, 1]`.
    pub fn encode(&self, params: &CameraParams) -> [f64; PARAM_COUNT] {
        let a = params.to_array();
        std::array::from_fn(|i| {
            let (lo, hi) = self.ranges[i];
            (a[i] - lo) / (hi - lo)
        })
    }

    /// Inverse of [`encode`](Self::encode); components are clamped to `[0, 1]` first.
    pub fn decode(&self, x: &[f64; PARAM_COUNT]) -> CameraParams {
        CameraParams::from_array(std::array::from_fn(|i| {
            let (lo, hi) = self.ranges[i];
            lo + x[i].clamp(0.0, 1.0) * (hi - lo)
        }))
    }
}

/// The capture camera the scene was reconstructed with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseCamera {
    pub fovy_deg: f64,
    pub width: usize,
    pub height: usize,
}

/// Elementary rotations composed as `R_yaw(y) * R_pitch(x) * R_roll(z)`. Angles in degrees.
pub fn rotation_matrix(roll_deg: f64, pitch_deg: f64, yaw_deg: f64) -> Matrix3<f64> {
    let (sr, cr) = roll_deg.to_radians().sin_cos();
    let (sp, cp) = pitch_deg.to_radians().sin_cos();
    let (sy, cy) = yaw_deg.to_radians().sin_cos();
    #[rustfmt::skip]
    let yaw = Matrix3::new(
        cy, 0.0, sy,
        0.0, 1.0, 0.0,
        -sy, 0.0, cy,
    );
    #[rustfmt::skip]
    let pitch = Matrix3::new(
        1.0, 0.0, 0.0,
        0.0, cp, -sp,
        0.0, sp, cp,
    );
    #[rustfmt::skip]
    let roll = Matrix3::new(
        cr, -sr, 0.0,
        sr, cr, 0.0,
        0.0, 0.0, 1.0,
    );
    yaw * pitch * roll
}

/// A continuous pixel position plus camera-frame depth (positive in front).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Everything the renderer needs for one view.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderSpec {
    view: Matrix4<f64>,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    fovy_deg: f64,
    width: usize,
    height: usize,
    tan_half_y: f64,
    tan_half_x: f64,
}

impl RenderSpec {
    /// Builds a spec from a rigid view transform. Panics on non-positive output size.
    pub fn new(view: Matrix4<f64>, fovy_deg: f64, width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "render output must be non-empty");
        let rotation: Matrix3<f64> = view.fixed_view::<3, 3>(0, 0).into_owned();
        let translation: Vector3<f64> = view.fixed_view::<3, 1>(0, 3).into_owned();
        let tan_half_y = (fovy_deg.to_radians() / 2.0).tan();
        Self {
            view,
            rotation,
            translation,
            fovy_deg,
            width,
            height,
            tan_half_y,
            tan_half_x: tan_half_y * width as f64 / height as f64,
        }
    }

    /// The capture view of `base` at its native resolution.
    pub fn identity(base: &BaseCamera) -> Self {
        Self::new(Matrix4::identity(), base.fovy_deg, base.width, base.height)
    }

    pub fn view(&self) -> &Matrix4<f64> {
        &self.view
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn fovy_deg(&self) -> f64 {
        self.fovy_deg
    }

    /// `2 * atan(tan(fovy / 2) * width / height)`, in degrees.
    pub fn fovx_deg(&self) -> f64 {
        (2.0 * self.tan_half_x.atan()).to_degrees()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn tan_half_fovy(&self) -> f64 {
        self.tan_half_y
    }

    pub fn to_camera(&self, p: &[f64; 3]) -> [f64; 3] {
        let q = self.rotation * Vector3::new(p[0], p[1], p[2]) + self.translation;
        [q.x, q.y, q.z]
    }

    /// Projects a camera-frame point; `None` when it is not in front of the near plane.
    #[inline]
    pub fn project_camera(&self, q: &[f64; 3]) -> Option<Projection> {
        if q[2] >= -NEAR_PLANE {
            return None;
        }
        let depth = -q[2];
        let x_ndc = q[0] / depth / self.tan_half_x;
        let y_ndc = q[1] / depth / self.tan_half_y;
        Some(Projection {
            u: (x_ndc + 1.0) * 0.5 * (self.width - 1) as f64,
            v: (1.0 - y_ndc) * 0.5 * (self.height - 1) as f64,
            depth,
        })
    }

    pub fn project(&self, p: &[f64; 3]) -> Option<Projection> {
        self.project_camera(&self.to_camera(p))
    }

    /// Camera-frame point seen at pixel `(u, v)` with depth `depth` along `-z`.
    pub fn unproject_camera(&self, u: f64, v: f64, depth: f64) -> [f64; 3] {
        let x_ndc = corner_ndc(u, self.width);
        let y_ndc = -corner_ndc(v, self.height);
        [
            x_ndc * self.tan_half_x * depth,
            y_ndc * self.tan_half_y * depth,
            -depth,
        ]
    }

    /// Scene point seen at pixel `(u, v)` with depth `depth`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> [f64; 3] {
        let q = self.unproject_camera(u, v, depth);
        let p = self.rotation.transpose() * (Vector3::new(q[0], q[1], q[2]) - self.translation);
        [p.x, p.y, p.z]
    }

    pub fn transform_point(&self, p: &[f64; 3]) -> [f64; 3] {
        let q = self.view * Vector4::new(p[0], p[1], p[2], 1.0);
        [q.x, q.y, q.z]
    }
}

fn corner_ndc(coord: f64, len: usize) -> f64 {
    if len == 1 {
        0.0
    } else {
        2.0 * coord / (len - 1) as f64 - 1.0
    }
}

pub fn effective_fovy(base_fovy_deg: f64, fovy_offset_deg: f64) -> f64 {
    (base_fovy_deg + fovy_offset_deg).clamp(MIN_FOVY_DEG, MAX_FOVY_DEG)
}

pub fn output_dims(params: &CameraParams, base_width: usize, base_height: usize) -> (usize, usize) {
    let side = |s: f64, b: usize| ((s * b as f64).round() as usize).max(MIN_OUTPUT_SIDE);
    (side(params.s_w, base_width), side(params.s_h, base_height))
}

pub fn to_render_spec(params: &CameraParams, base: &BaseCamera) -> RenderSpec {
    let r = rotation_matrix(params.roll, params.pitch, params.yaw);
    let mut view = Matrix4::identity();
    view.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    view[(0, 3)] = params.tx;
    view[(1, 3)] = params.ty;
    view[(2, 3)] = params.tz;
    let (w, h) = output_dims(params, base.width, base.height);
    RenderSpec::new(view, effective_fovy(base.fovy_deg, params.fovy_offset), w, h)
}
