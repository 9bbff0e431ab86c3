//! Z-buffered point splatting.
//!
//! Each point that survives near-plane culling is rounded to its nearest
//! pixel and stamps a filled disc of integer radius `r` (all pixels with
//! `dx^2 + dy^2 <= r^2`). The nearest point wins each pixel; equal depths
//! keep the lower point index. Uncovered pixels are black with mask `false`.

use crate::camera::{BaseCamera, RenderSpec};
use crate::image::Image;
use crate::ingest::PointCloud;

pub const BACKGROUND: [f32; 3] = [0.0, 0.0, 0.0];

/// Binary coverage mask, `true` where at least one splat landed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    covered: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, covered: Vec<bool>) -> Self {
        assert_eq!(covered.len(), width * height, "mask length must equal width * height");
        Self {
            width,
            height,
            covered,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[bool] {
        &self.covered
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.covered[y * self.width + x]
    }

    pub fn covered_count(&self) -> usize {
        self.covered.iter().filter(|&&c| c).count()
    }
}

/// Fraction of covered pixels.
pub fn coverage_fraction(mask: &Mask) -> f64 {
    mask.covered_count() as f64 / mask.values().len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub color: Image,
    pub mask: Mask,
}

/// Pixel offsets of a filled disc, row-major.
pub fn disc_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = i64::from(radius);
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Splat radius that keeps a view hole-free when it magnifies the capture grid.
///
/// Zero for the exact capture view (so the source image is reproduced), otherwise
/// `ceil` of the pixel-density ratio between the view and the capture camera, at least 1.
pub fn auto_splat_radius(spec: &RenderSpec, base: &BaseCamera) -> u32 {
    let base_spec = RenderSpec::identity(base);
    let same_grid = spec.width() == base.width
        && spec.height() == base.height
        && spec.fovy_deg() == base.fovy_deg
        && spec.view() == base_spec.view();
    if same_grid {
        return 0;
    }
    let density = |s: &RenderSpec| s.height() as f64 / (2.0 * s.tan_half_fovy());
    let ratio = density(spec) / density(&base_spec);
    ((ratio - 1e-9).ceil() as u32).max(1)
}

pub fn render(cloud: &PointCloud, spec: &RenderSpec, splat_radius: u32) -> RenderOutput {
    let (w, h) = (spec.width(), spec.height());
    let offsets = disc_offsets(splat_radius);
    let r = i64::from(splat_radius);
    let mut depth = vec![f64::INFINITY; w * h];
    let mut owner = vec![usize::MAX; w * h];

    for (i, p) in cloud.positions().iter().enumerate() {
        let Some(pr) = spec.project(p) else { continue };
        if !(pr.u.is_finite() && pr.v.is_finite()) {
            continue;
        }
        let cu = pr.u.round();
        let cv = pr.v.round();
        if cu < -(r as f64) || cv < -(r as f64) || cu > (w as i64 - 1 + r) as f64 || cv > (h as i64 - 1 + r) as f64 {
            continue;
        }
        let (cu, cv) = (cu as i64, cv as i64);
        for &(dx, dy) in &offsets {
            let (x, y) = (cu + dx, cv + dy);
            if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                continue;
            }
            let k = y as usize * w + x as usize;
            if pr.depth < depth[k] {
                depth[k] = pr.depth;
                owner[k] = i;
            }
        }
    }

    let colors = cloud.colors();
    let mut pixels = Vec::with_capacity(w * h);
    let mut covered = Vec::with_capacity(w * h);
    for &o in &owner {
        if o == usize::MAX {
            pixels.push(BACKGROUND);
            covered.push(false);
        } else {
            pixels.push(colors[o]);
            covered.push(true);
        }
    }
    RenderOutput {
        color: Image::new(w, h, pixels).expect("cloud colors are normalized"),
        mask: Mask::new(w, h, covered),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{to_render_spec, CameraParams};
    use nalgebra::Matrix4;

    fn spec(w: usize, h: usize) -> RenderSpec {
        RenderSpec::new(Matrix4::identity(), 60.0, w, h)
    }

    #[test]
    fn nearer_point_wins_on_shared_ray() {
        let cloud = PointCloud::new(
            vec![[0.0, 0.0, -2.0], [0.0, 0.0, -1.0]],
            vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]],
        )
        .unwrap();
        let out = render(&cloud, &spec(33, 33), 0);
        assert_eq!(out.color.get(16, 16), [1.0, 0.0, 0.0]);
        assert_eq!(out.mask.covered_count(), 1);
    }

    #[test]
    fn equal_depth_keeps_lower_index() {
        let cloud = PointCloud::new(
            vec![[0.0, 0.0, -1.0], [0.0, 0.0, -1.0]],
            vec![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]],
        )
        .unwrap();
        assert_eq!(render(&cloud, &spec(33, 33), 1).color.get(16, 16), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn radius_two_disc_matches_membership_oracle() {
        let cloud = PointCloud::new(vec![[0.0, 0.0, -1.0]], vec![[1.0; 3]]).unwrap();
        let out = render(&cloud, &spec(101, 101), 2);
        assert_eq!(out.mask.covered_count(), 13);
        for y in 0..101usize {
            for x in 0..101usize {
                let dx = x as f64 - 50.0;
                let dy = y as f64 - 50.0;
                assert_eq!(out.mask.get(x, y), dx * dx + dy * dy <= 4.0, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn points_behind_near_plane_are_culled() {
        let cloud = PointCloud::new(
            vec![[0.0, 0.0, 1.0], [0.0, 0.0, -0.5e-4], [0.0, 0.0, 0.0]],
            vec![[1.0; 3]; 3],
        )
        .unwrap();
        let out = render(&cloud, &spec(40, 40), 3);
        assert_eq!(out.mask.covered_count(), 0);
        assert!(out.color.pixels().iter().all(|&p| p == BACKGROUND));
    }

    #[test]
    fn coverage_fraction_counts() {
        assert_eq!(coverage_fraction(&Mask::new(4, 4, vec![true; 16])), 1.0);
        assert_eq!(coverage_fraction(&Mask::new(4, 4, vec![false; 16])), 0.0);
        let m = Mask::new(4, 2, vec![true, true, false, true, true, false, true, true]);
        assert_eq!(coverage_fraction(&m), 0.75);
    }

    #[test]
    fn auto_radius_rules() {
        let base = BaseCamera {
            fovy_deg: 60.0,
            width: 64,
            height: 48,
        };
        let at = |p: CameraParams| auto_splat_radius(&to_render_spec(&p, &base), &base);
        assert_eq!(at(CameraParams::identity()), 0);
        assert_eq!(
            at(CameraParams {
                yaw: 3.0,
                ..CameraParams::identity()
            }),
            1
        );
        assert_eq!(
            at(CameraParams {
                s_h: 2.0,
                ..CameraParams::identity()
            }),
            2
        );
        assert_eq!(
            at(CameraParams {
                s_w: 1.5,
                ..CameraParams::identity()
            }),
            1
        );
    }
}
