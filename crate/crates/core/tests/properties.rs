use proptest::prelude::*;
use reframe::camera::{rotation_matrix, to_render_spec, BaseCamera, CameraParams, SearchBounds, PARAM_COUNT};
use reframe::image::quantize;
use reframe::ingest::{encode_ply, parse_ply, PlyEncoding, PointCloud};
use reframe::objective::mask_loss;
use reframe::render::render;
use reframe::Mask;

fn unit_vector() -> impl Strategy<Value = [f64; PARAM_COUNT]> {
    proptest::array::uniform9(0.0f64..=1.0)
}

fn in_bounds_params() -> impl Strategy<Value = CameraParams> {
    unit_vector().prop_map(|x| SearchBounds::default().decode(&x))
}

proptest! {
    #[test]
    fn encode_decode_round_trip(p in in_bounds_params()) {
        let b = SearchBounds::default();
        let back = b.decode(&b.encode(&p));
        for (a, c) in p.to_array().iter().zip(back.to_array()) {
            prop_assert!((a - c).abs() <= 1e-12);
        }
        let x = b.encode(&p);
        prop_assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn rotations_are_proper_orthonormal(roll in -180.0f64..180.0, pitch in -180.0f64..180.0, yaw in -180.0f64..180.0) {
        let r = rotation_matrix(roll, pitch, yaw);
        let e = r.transpose() * r - nalgebra::Matrix3::identity();
        prop_assert!(e.amax() <= 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn mask_loss_is_uncovered_fraction(w in 1usize..40, h in 1usize..40, seed in any::<u64>()) {
        let mut state = seed | 1;
        let covered: Vec<bool> = (0..w * h).map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state & 1 == 1
        }).collect();
        let uncovered = covered.iter().filter(|c| !**c).count();
        let loss = mask_loss(&Mask::new(w, h, covered));
        prop_assert!((loss - uncovered as f64 / (w * h) as f64).abs() <= 1e-12);
    }
}

fn cloud_strategy(max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(
        (prop::array::uniform3(-3.0f64..3.0), prop::array::uniform3(0.0f32..=1.0)),
        1..max,
    )
    .prop_map(|pts| {
        let (p, c): (Vec<_>, Vec<_>) = pts.into_iter().unzip();
        PointCloud::new(p, c).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ply_round_trip(cloud in cloud_strategy(1000), ascii in any::<bool>()) {
        let enc = if ascii { PlyEncoding::Ascii } else { PlyEncoding::BinaryLittleEndian };
        let back = parse_ply(&encode_ply(&cloud, enc)).unwrap();
        prop_assert_eq!(back.len(), cloud.len());
        for (a, b) in cloud.positions().iter().zip(back.positions()) {
            for k in 0..3 {
                prop_assert!((a[k] - b[k]).abs() <= 1e-6);
            }
        }
        for (a, b) in cloud.colors().iter().zip(back.colors()) {
            for k in 0..3 {
                prop_assert_eq!(quantize(a[k]), quantize(b[k]));
            }
        }
    }

    // Brute force per pixel: scan every point, keep the nearest whose disc covers the pixel.
    #[test]
    fn zbuffer_matches_per_pixel_scan(
        cloud in cloud_strategy(1000),
        p in in_bounds_params(),
        radius in 0u32..3,
    ) {
        let base = BaseCamera { fovy_deg: 60.0, width: 40, height: 30 };
        let spec = to_render_spec(&p, &base);
        let out = render(&cloud, &spec, radius);
        let (w, h) = (spec.width(), spec.height());
        let ty = (spec.fovy_deg().to_radians() / 2.0).tan();
        let tx = ty * w as f64 / h as f64;
        let centers: Vec<Option<(f64, f64, f64)>> = cloud.positions().iter().map(|pt| {
            let q = spec.to_camera(pt);
            if q[2] >= -1e-4 {
                return None;
            }
            let d = -q[2];
            let u = (q[0] / (d * tx) + 1.0) / 2.0 * (w - 1) as f64;
            let v = (1.0 - q[1] / (d * ty)) / 2.0 * (h - 1) as f64;
            Some((u.round(), v.round(), d))
        }).collect();
        let r2 = f64::from(radius * radius);
        for y in 0..h {
            for x in 0..w {
                let mut best: Option<(f64, usize)> = None;
                for (i, c) in centers.iter().enumerate() {
                    let Some((u, v, d)) = *c else { continue };
                    let (dx, dy) = (x as f64 - u, y as f64 - v);
                    if dx * dx + dy * dy <= r2 && best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, i));
                    }
                }
                match best {
                    Some((_, i)) => {
                        prop_assert!(out.mask.get(x, y));
                        prop_assert_eq!(out.color.get(x, y), cloud.colors()[i]);
                    }
                    None => prop_assert!(!out.mask.get(x, y)),
                }
            }
        }
    }
}
