//! Resize-and-pad preprocessing.
//!
//! The long side is brought to [`TARGET_LONG_SIDE`] pixels with bilinear
//! sampling, then [`PAD`] pixels are added on every side. The padded band is
//! filled by mirror reflection and smoothed with a 9x9 box filter; original
//! pixels are never touched by the filter. This fill is a deterministic
//! stand-in for generative outpainting: geometry is exact, content is not.

use thiserror::Error;

use super::depth::DepthMap;
use crate::image::Image;

pub const TARGET_LONG_SIDE: usize = 512;
pub const PAD: usize = 256;
const BLUR_RADIUS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("image is {width}x{height}; both sides must be at least 2 pixels to preprocess")]
    Degenerate { width: usize, height: usize },
}

/// Dimensions after uniform scaling so that the long side is exactly 512.
pub fn scaled_dims(width: usize, height: usize) -> (usize, usize) {
    let long = width.max(height);
    if long == TARGET_LONG_SIDE {
        return (width, height);
    }
    let s = TARGET_LONG_SIDE as f64 / long as f64;
    let side = |v: usize| {
        if v == long {
            TARGET_LONG_SIDE
        } else {
            ((v as f64 * s).round() as usize).max(1)
        }
    };
    (side(width), side(height))
}

pub fn preprocess_resize_pad(image: &Image) -> Result<Image, PreprocessError> {
    let (w, h) = (image.width(), image.height());
    check_dims(w, h)?;
    let (nw, nh) = scaled_dims(w, h);
    let scaled = if (nw, nh) == (w, h) {
        image.pixels().to_vec()
    } else {
        resize_plane(image.pixels(), w, h, nw, nh)
    };
    let padded = pad_plane(&scaled, nw, nh);
    Ok(Image::from_fn(nw + 2 * PAD, nh + 2 * PAD, |x, y| {
        padded[y * (nw + 2 * PAD) + x]
    }))
}

/// Same geometry as [`preprocess_resize_pad`], applied to a depth map.
pub fn preprocess_depth(depth: &DepthMap) -> Result<DepthMap, PreprocessError> {
    let (w, h) = (depth.width(), depth.height());
    check_dims(w, h)?;
    let (nw, nh) = scaled_dims(w, h);
    let plane: Vec<[f32; 1]> = depth.values().iter().map(|&d| [d]).collect();
    let scaled = if (nw, nh) == (w, h) {
        plane
    } else {
        resize_plane(&plane, w, h, nw, nh)
    };
    let padded = pad_plane(&scaled, nw, nh);
    Ok(DepthMap::new(nw + 2 * PAD, nh + 2 * PAD, padded.into_iter().map(|[d]| d).collect())
        .expect("interpolated positive depths stay positive"))
}

/// Bilinear resize with pixel-center alignment.
pub fn resize_bilinear(image: &Image, width: usize, height: usize) -> Image {
    let out = resize_plane(image.pixels(), image.width(), image.height(), width, height);
    Image::from_fn(width, height, |x, y| out[y * width + x])
}

fn check_dims(width: usize, height: usize) -> Result<(), PreprocessError> {
    if width < 2 || height < 2 {
        Err(PreprocessError::Degenerate { width, height })
    } else {
        Ok(())
    }
}

fn resize_plane<const N: usize>(
    src: &[[f32; N]],
    w: usize,
    h: usize,
    nw: usize,
    nh: usize,
) -> Vec<[f32; N]> {
    let sample_axis = |i: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let pos = ((i as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5)
            .clamp(0.0, (src_len - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, pos - i0 as f64)
    };
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        let (y0, y1, fy) = sample_axis(y, h, nh);
        for x in 0..nw {
            let (x0, x1, fx) = sample_axis(x, w, nw);
            let mut px = [0.0f32; N];
            for (c, v) in px.iter_mut().enumerate() {
                let top = f64::from(src[y0 * w + x0][c]) * (1.0 - fx) + f64::from(src[y0 * w + x1][c]) * fx;
                let bot = f64::from(src[y1 * w + x0][c]) * (1.0 - fx) + f64::from(src[y1 * w + x1][c]) * fx;
                *v = (top * (1.0 - fy) + bot * fy) as f32;
            }
            out.push(px);
        }
    }
    out
}

/// Mirror index without edge repetition (`-1 -> 1`), repeated for pads wider than the source.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

fn pad_plane<const N: usize>(src: &[[f32; N]], w: usize, h: usize) -> Vec<[f32; N]> {
    let (cw, ch) = (w + 2 * PAD, h + 2 * PAD);
    let mut canvas = Vec::with_capacity(cw * ch);
    for y in 0..ch {
        let sy = reflect(y as isize - PAD as isize, h);
        for x in 0..cw {
            let sx = reflect(x as isize - PAD as isize, w);
            canvas.push(src[sy * w + sx]);
        }
    }

    // Summed-area table per channel, (cw + 1) x (ch + 1).
    let stride = cw + 1;
    let mut sat = vec![[0.0f64; N]; stride * (ch + 1)];
    for y in 0..ch {
        for x in 0..cw {
            let px = canvas[y * cw + x];
            for c in 0..N {
                sat[(y + 1) * stride + x + 1][c] = f64::from(px[c]) + sat[y * stride + x + 1][c]
                    + sat[(y + 1) * stride + x][c]
                    - sat[y * stride + x][c];
            }
        }
    }

    let mut out = canvas.clone();
    for y in 0..ch {
        for x in 0..cw {
            let inside = (PAD..PAD + w).contains(&x) && (PAD..PAD + h).contains(&y);
            if inside {
                continue;
            }
            let x0 = x.saturating_sub(BLUR_RADIUS);
            let y0 = y.saturating_sub(BLUR_RADIUS);
            let x1 = (x + BLUR_RADIUS + 1).min(cw);
            let y1 = (y + BLUR_RADIUS + 1).min(ch);
            let count = ((x1 - x0) * (y1 - y0)) as f64;
            let mut px = [0.0f32; N];
            for (c, v) in px.iter_mut().enumerate() {
                let sum = sat[y1 * stride + x1][c] - sat[y0 * stride + x1][c] - sat[y1 * stride + x0][c]
                    + sat[y0 * stride + x0][c];
                *v = (sum / count) as f32;
            }
            out[y * cw + x] = px;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            [
                x as f32 / (w - 1) as f32,
                y as f32 / (h - 1) as f32,
                ((x * 7 + y * 13) % 17) as f32 / 16.0,
            ]
        })
    }

    #[test]
    fn landscape_input_scales_then_pads() {
        assert_eq!(scaled_dims(1024, 768), (512, 384));
        let out = preprocess_resize_pad(&gradient(1024, 768)).unwrap();
        assert_eq!((out.width(), out.height()), (1024, 896));
    }

    #[test]
    fn square_512_is_only_padded() {
        let img = gradient(512, 512);
        let out = preprocess_resize_pad(&img).unwrap();
        assert_eq!((out.width(), out.height()), (1024, 1024));
        for y in [0, 100, 511] {
            for x in [0, 255, 511] {
                assert_eq!(out.get(x + PAD, y + PAD), img.get(x, y));
            }
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert_eq!(
            preprocess_resize_pad(&Image::filled(1, 40, [0.0; 3])),
            Err(PreprocessError::Degenerate { width: 1, height: 40 })
        );
    }

    // Independent oracle: bounce the coordinate off the walls step by step, then
    // average the 9x9 window by brute force.
    fn oracle_reflect(mut i: isize, n: usize) -> usize {
        if n == 1 {
            return 0;
        }
        let n = n as isize;
        loop {
            if i < 0 {
                i = -i;
            } else if i >= n {
                i = 2 * (n - 1) - i;
            } else {
                return i as usize;
            }
        }
    }

    #[test]
    fn padded_band_matches_reflect_and_blur_oracle() {
        let img = gradient(100, 400);
        let out = preprocess_resize_pad(&img).unwrap();
        assert_eq!((out.width(), out.height()), (640, 1024));

        let scaled = resize_bilinear(&img, 128, 512);
        let (cw, ch) = (640usize, 1024usize);
        let refl = |x: usize, y: usize| {
            scaled.get(
                oracle_reflect(x as isize - 256, 128),
                oracle_reflect(y as isize - 256, 512),
            )
        };
        let probes = [
            (0, 0),
            (5, 700),
            (255, 255),
            (256, 255),
            (384, 800),
            (639, 1023),
            (300, 10),
            (600, 512),
            (100, 1000),
        ];
        for &(x, y) in &probes {
            let (x, y): (usize, usize) = (x, y);
            let mut acc = [0.0f64; 3];
            let mut n = 0.0;
            for yy in y.saturating_sub(4)..=(y + 4).min(ch - 1) {
                for xx in x.saturating_sub(4)..=(x + 4).min(cw - 1) {
                    let p = refl(xx, yy);
                    for c in 0..3 {
                        acc[c] += f64::from(p[c]);
                    }
                    n += 1.0;
                }
            }
            let got = out.get(x, y);
            for c in 0..3 {
                assert!(
                    (f64::from(got[c]) - acc[c] / n).abs() < 1e-5,
                    "pixel ({x},{y}) channel {c}: {} vs {}",
                    got[c],
                    acc[c] / n
                );
            }
        }
        // Original region is untouched by the blur.
        assert_eq!(out.get(256, 256), scaled.get(0, 0));
        assert_eq!(out.get(383, 767), scaled.get(127, 511));
    }

    #[test]
    fn output_is_never_rescaled_twice() {
        // Long side of a padded output exceeds 512, yet dims are exactly w'+512 x h'+512.
        let out = preprocess_resize_pad(&gradient(300, 200)).unwrap();
        let (sw, sh) = scaled_dims(300, 200);
        assert_eq!((out.width(), out.height()), (sw + 512, sh + 512));
    }

    #[test]
    fn depth_follows_image_geometry() {
        let d = DepthMap::from_fn(64, 32, |x, _| 1.0 + x as f32 * 0.01).unwrap();
        let out = preprocess_depth(&d).unwrap();
        assert_eq!((out.width(), out.height()), (1024, 768));
        assert!(out.values().iter().all(|&v| v > 0.0));
    }
}
