//! Image stylization: edge-preserving smoothing plus a dark contour along
//! detected edges.

use anyhow::Result;
use gsip::ImagePlane;

/// Sobel gradient magnitude, normalized so that values stay in `[0, 1]`
/// (the raw operator peaks at `4 sqrt(2)` on unit-range inputs).
pub fn sobel_magnitude(img: &ImagePlane) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let norm = 4.0 * std::f64::consts::SQRT_2;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let s = |dx: isize, dy: isize| {
                img.sample_clamped(x as isize + dx, y as isize + dy, 0)
            };
            let gx = (s(1, -1) + 2.0 * s(1, 0) + s(1, 1))
                - (s(-1, -1) + 2.0 * s(-1, 0) + s(-1, 1));
            let gy = (s(-1, 1) + 2.0 * s(0, 1) + s(1, 1))
                - (s(-1, -1) + 2.0 * s(0, -1) + s(1, -1));
            out[y * w + x] = (gx * gx + gy * gy).sqrt() / norm;
        }
    }
    out
}

pub enum Smoother {
    DomainTransform {
        params: gsip::domain_transform::WarpParams,
        passes: usize,
    },
    Bilateral {
        params: gsip::graph::GridWeightParams,
        window_radius: usize,
    },
}

/// Smooth, detect edges on the smoothed result, and darken edge pixels to 0.
/// An edge threshold of 1 disables the contour entirely.
pub fn stylize(img: &ImagePlane, smoother: &Smoother, edge_threshold: f64) -> Result<ImagePlane> {
    let smoothed = match smoother {
        Smoother::DomainTransform { params, passes } => {
            gsip::domain_transform::dt_smooth_image(img, params, *passes)?
        }
        Smoother::Bilateral {
            params,
            window_radius,
        } => gsip::filters::bilateral_apply(img, params, *window_radius)?,
    };
    let magnitude = sobel_magnitude(&smoothed);
    let samples = smoothed
        .samples()
        .iter()
        .zip(&magnitude)
        .map(|(&v, &m)| if m > edge_threshold { 0.0 } else { v })
        .collect();
    ImagePlane::gray(img.width(), img.height(), samples).map_err(Into::into)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gsip::domain_transform::WarpParams;

    fn dt_smoother() -> Smoother {
        Smoother::DomainTransform {
            params: WarpParams {
                alpha_g: 1.0,
                alpha_p: 50.0,
                sigma_s: 2.0,
            },
            passes: 1,
        }
    }

    #[test]
    fn constant_image_unchanged() {
        let img = ImagePlane::constant(8, 8, 1, 0.5).unwrap();
        let out = stylize(&img, &dt_smoother(), 0.2).unwrap();
        for v in out.samples() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn step_image_gets_contour() {
        let img = ImagePlane::gray(
            12,
            8,
            (0..96)
                .map(|i| if i % 12 < 6 { 0.1 } else { 0.9 })
                .collect(),
        )
        .unwrap();
        let out = stylize(&img, &dt_smoother(), 0.2).unwrap();
        // A dark contour along the step column.
        let mut dark_columns = std::collections::BTreeSet::new();
        for y in 0..8 {
            for x in 0..12 {
                if out.sample(x, y, 0) == 0.0 {
                    dark_columns.insert(x);
                }
            }
        }
        assert!(!dark_columns.is_empty(), "no contour produced");
        for x in dark_columns {
            assert!((5..=7).contains(&x), "contour at unexpected column {x}");
        }
    }

    #[test]
    fn threshold_one_equals_smoothed() {
        let img = ImagePlane::gray(
            10,
            6,
            (0..60).map(|i| (i % 10) as f64 / 9.0).collect(),
        )
        .unwrap();
        let smoother = dt_smoother();
        let out = stylize(&img, &smoother, 1.0).unwrap();
        let Smoother::DomainTransform { params, passes } = &smoother else {
            unreachable!()
        };
        let smoothed =
            gsip::domain_transform::dt_smooth_image(&img, params, *passes).unwrap();
        assert_eq!(out, smoothed);
    }

    #[test]
    fn sobel_bounded_by_one() {
        let img = ImagePlane::gray(
            9,
            9,
            (0..81).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect(),
        )
        .unwrap();
        for m in sobel_magnitude(&img) {
            assert!((0.0..=1.0).contains(&m));
        }
    }
}
