//! Pixel rendering of fundus-like samples and the style transform
//! chain. Everything runs on f32 planes in `[0, 1]`.

use rand::Rng;

use super::{sample_range, AnatomySpec, StyleSpec};
use crate::error::Result;
use crate::tensor::{Shape, Tensor4};

const BASE_COLOR: [f32; 3] = [0.62, 0.35, 0.18];
const VESSEL_COLOR: [f32; 3] = [0.42, 0.10, 0.07];
const DISC_COLOR: [f32; 3] = [0.90, 0.72, 0.40];

fn smoothstep(edge0: f32, edge1: f32, x: f32) -> f32 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Low-frequency value noise: a seeded coarse grid, bilinearly
/// interpolated up to the full resolution.
fn value_noise(size: usize, amplitude: f64, rng: &mut impl Rng) -> Vec<f32> {
    const GRID: usize = 6;
    let mut grid = [[0f32; GRID + 1]; GRID + 1];
    for row in grid.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.random_range(-amplitude..amplitude) as f32;
        }
    }
    let mut out = vec![0f32; size * size];
    let scale = GRID as f32 / size as f32;
    for y in 0..size {
        for x in 0..size {
            let fy = y as f32 * scale;
            let fx = x as f32 * scale;
            let (iy, ix) = (fy as usize, fx as usize);
            let (ty, tx) = (fy - iy as f32, fx - ix as f32);
            let v = grid[iy][ix] * (1.0 - ty) * (1.0 - tx)
                + grid[iy][ix + 1] * (1.0 - ty) * tx
                + grid[iy + 1][ix] * ty * (1.0 - tx)
                + grid[iy + 1][ix + 1] * ty * tx;
            out[y * size + x] = v;
        }
    }
    out
}

struct Ellipse {
    cy: f32,
    cx: f32,
    ry: f32,
    rx: f32,
}

impl Ellipse {
    /// Approximate signed distance (negative inside), in pixels.
    fn signed_distance(&self, y: f32, x: f32) -> f32 {
        let f = ((y - self.cy) / self.ry).powi(2) + ((x - self.cx) / self.rx).powi(2);
        (f.sqrt() - 1.0) * self.ry.min(self.rx)
    }

    fn contains(&self, y: f32, x: f32) -> bool {
        ((y - self.cy) / self.ry).powi(2) + ((x - self.cx) / self.rx).powi(2) <= 1.0
    }
}

fn blend(channels: &mut [Vec<f32>; 3], idx: usize, color: [f32; 3], alpha: f32) {
    for (c, plane) in channels.iter_mut().enumerate() {
        plane[idx] = plane[idx] * (1.0 - alpha) + color[c] * alpha;
    }
}

/// Draw the anatomy: textured background, vessels radiating from the
/// disc, bright elliptical disc, brighter concentric cup. Returns the
/// raw (pre-style) image `1x3xSxS` and the binary mask `1x2xSxS`
/// (channel 0 = disc, channel 1 = cup).
pub fn render_anatomy(
    anat: &AnatomySpec,
    size: usize,
    rng: &mut impl Rng,
) -> Result<(Tensor4<f32>, Tensor4<f32>)> {
    anat.validate()?;
    let s = size as f32;
    let half = s / 2.0;

    // Geometry draws come first and in a fixed order, so the mask is a
    // pure function of the anatomy stream.
    let r_disc = (sample_range(rng, anat.disc_radius) as f32 * s).max(3.0);
    let cdr = sample_range(rng, anat.cup_to_disc_ratio) as f32;
    let jitter_r = sample_range(rng, anat.center_jitter) as f32 * s;
    let jitter_angle = rng.random_range(0.0..std::f64::consts::TAU) as f32;
    let ecc = sample_range(rng, anat.eccentricity) as f32;
    let n_vessels = if anat.vessel_count.0 >= anat.vessel_count.1 {
        anat.vessel_count.0
    } else {
        rng.random_range(anat.vessel_count.0..=anat.vessel_count.1)
    };

    let mut cy = half + jitter_r * jitter_angle.sin();
    let mut cx = half + jitter_r * jitter_angle.cos();
    // Keep the disc fully inside the field of view.
    let r_max = r_disc * ecc.max(1.0 / ecc) + 2.0;
    cy = cy.clamp(r_max, s - r_max);
    cx = cx.clamp(r_max, s - r_max);
    let disc = Ellipse { cy, cx, ry: r_disc / ecc, rx: r_disc * ecc };
    let cup = Ellipse { cy, cx, ry: disc.ry * cdr, rx: disc.rx * cdr };

    // Per-sample palette variation: disc brightness, a subtle cup
    // increment, and a tinted background, all from the anatomy stream.
    let disc_gain = rng.random_range(0.88..1.08) as f32;
    let disc_color = [
        (DISC_COLOR[0] * disc_gain).min(1.0),
        (DISC_COLOR[1] * disc_gain).min(1.0),
        (DISC_COLOR[2] * disc_gain).min(1.0),
    ];
    let cup_delta = rng.random_range(0.05..0.12) as f32;
    let cup_color = [
        (disc_color[0] + cup_delta).min(1.0),
        (disc_color[1] + cup_delta * 1.3).min(1.0),
        (disc_color[2] + cup_delta * 1.1).min(1.0),
    ];
    let bg_jitter = [
        rng.random_range(-0.05..0.05) as f32,
        rng.random_range(-0.04..0.04) as f32,
        rng.random_range(-0.03..0.03) as f32,
    ];

    // Background with texture and a fixed mild radial falloff.
    let noise = value_noise(size, anat.texture_scale, rng);
    let mut channels: [Vec<f32>; 3] = [
        vec![0.0; size * size],
        vec![0.0; size * size],
        vec![0.0; size * size],
    ];
    let channel_noise_gain = [1.0f32, 0.8, 0.6];
    for y in 0..size {
        for x in 0..size {
            let idx = y * size + x;
            let dy = (y as f32 + 0.5 - half) / half;
            let dx = (x as f32 + 0.5 - half) / half;
            let falloff = 1.0 - 0.18 * (dy * dy + dx * dx);
            for (c, plane) in channels.iter_mut().enumerate() {
                plane[idx] =
                    (BASE_COLOR[c] + bg_jitter[c]) * falloff + noise[idx] * channel_noise_gain[c];
            }
        }
    }

    // Disc-like distractor blobs outside the disc break the
    // brightest-region shortcut: they match the disc's color and size
    // but carry no cup and no converging vessels, so only structural
    // cues separate them from the real disc. They belong to the anatomy
    // stream and are identical across domains.
    let n_blobs = rng.random_range(2..=4);
    for _ in 0..n_blobs {
        let r_blob = rng.random_range(0.55..1.05) as f32 * r_disc;
        let mut placed = None;
        for _ in 0..16 {
            let by = rng.random_range(0.10..0.90) as f32 * s;
            let bx = rng.random_range(0.10..0.90) as f32 * s;
            let dist = ((by - cy).powi(2) + (bx - cx).powi(2)).sqrt();
            if dist > r_disc * ecc.max(1.0 / ecc) + r_blob + 3.0 {
                placed = Some((by, bx));
                break;
            }
        }
        let Some((by, bx)) = placed else { continue };
        let blob_ecc = rng.random_range(0.75..1.3) as f32;
        let gain = rng.random_range(0.9..1.05) as f32;
        let alpha_max = rng.random_range(0.6..0.9) as f32;
        let blob = Ellipse { cy: by, cx: bx, ry: r_blob / blob_ecc, rx: r_blob * blob_ecc };
        let color = [
            (disc_color[0] * gain).min(1.0),
            (disc_color[1] * gain).min(1.0),
            (disc_color[2] * gain).min(1.0),
        ];
        let reach = r_blob * blob_ecc.max(1.0 / blob_ecc) + 2.0;
        let lo_y = (by - reach).max(0.0) as usize;
        let hi_y = ((by + reach) as usize + 1).min(size);
        let lo_x = (bx - reach).max(0.0) as usize;
        let hi_x = ((bx + reach) as usize + 1).min(size);
        for y in lo_y..hi_y {
            for x in lo_x..hi_x {
                let d = blob.signed_distance(y as f32 + 0.5, x as f32 + 0.5);
                if d < 1.0 {
                    let alpha = smoothstep(1.0, -1.0, d) * alpha_max;
                    blend(&mut channels, y * size + x, color, alpha);
                }
            }
        }
    }

    // Vessels: curved walks from near the disc center outward.
    for _ in 0..n_vessels {
        let width = (sample_range(rng, anat.vessel_width) as f32 * s).max(0.4);
        let mut angle = rng.random_range(0.0..std::f64::consts::TAU) as f32;
        let wobble_scale = rng.random_range(0.05..0.22) as f32;
        let mut py = cy + angle.sin() * r_disc * 0.4;
        let mut px = cx + angle.cos() * r_disc * 0.4;
        let steps = (s * 1.2) as usize;
        for _ in 0..steps {
            angle += rng.random_range(-1.0..1.0) as f32 * wobble_scale;
            py += angle.sin() * 0.8;
            px += angle.cos() * 0.8;
            if py < -2.0 || px < -2.0 || py > s + 2.0 || px > s + 2.0 {
                break;
            }
            let rad = width.ceil() as i32 + 1;
            let (iy, ix) = (py as i32, px as i32);
            for oy in -rad..=rad {
                for ox in -rad..=rad {
                    let (yy, xx) = (iy + oy, ix + ox);
                    if yy < 0 || xx < 0 || yy >= size as i32 || xx >= size as i32 {
                        continue;
                    }
                    let d = (((yy as f32 + 0.5) - py).powi(2) + ((xx as f32 + 0.5) - px).powi(2))
                        .sqrt();
                    let alpha = 0.75 * smoothstep(width + 0.7, width - 0.7, d);
                    if alpha > 0.0 {
                        blend(&mut channels, (yy as usize) * size + xx as usize, VESSEL_COLOR, alpha);
                    }
                }
            }
        }
    }

    // Disc then cup, soft-edged.
    for y in 0..size {
        for x in 0..size {
            let (fy, fx) = (y as f32 + 0.5, x as f32 + 0.5);
            let idx = y * size + x;
            let d_disc = disc.signed_distance(fy, fx);
            if d_disc < 1.0 {
                let alpha = smoothstep(1.0, -1.0, d_disc) * 0.92;
                blend(&mut channels, idx, disc_color, alpha);
            }
            let d_cup = cup.signed_distance(fy, fx);
            if d_cup < 1.0 {
                let alpha = smoothstep(1.0, -1.0, d_cup) * 0.9;
                blend(&mut channels, idx, cup_color, alpha);
            }
        }
    }

    let mut image = Tensor4::zeros(Shape::new(1, 3, size, size));
    for (c, plane) in channels.iter().enumerate() {
        for (dst, &v) in image.plane_mut(0, c).iter_mut().zip(plane) {
            *dst = v.clamp(0.0, 1.0);
        }
    }
    // Hard-edged masks from exact ellipse membership at pixel centers.
    let mut mask = Tensor4::zeros(Shape::new(1, 2, size, size));
    for y in 0..size {
        for x in 0..size {
            let (fy, fx) = (y as f32 + 0.5, x as f32 + 0.5);
            if disc.contains(fy, fx) {
                *mask.at_mut(0, 0, y, x) = 1.0;
            }
            if cup.contains(fy, fx) {
                *mask.at_mut(0, 1, y, x) = 1.0;
            }
        }
    }
    Ok((image, mask))
}

/// Concrete per-sample style values drawn from a [`StyleSpec`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StyleParams {
    pub brightness: f64,
    pub contrast: f64,
    pub tint: [f64; 3],
    pub gamma: f64,
    pub vignette: f64,
    pub noise_sigma: f64,
    pub blur_sigma: f64,
}

impl StyleParams {
    pub fn sample(spec: &StyleSpec, rng: &mut impl Rng) -> Self {
        StyleParams {
            brightness: sample_range(rng, spec.brightness_shift),
            contrast: sample_range(rng, spec.contrast_gain),
            tint: [
                sample_range(rng, spec.tint_r),
                sample_range(rng, spec.tint_g),
                sample_range(rng, spec.tint_b),
            ],
            gamma: sample_range(rng, spec.gamma),
            vignette: sample_range(rng, spec.vignette_strength),
            noise_sigma: sample_range(rng, spec.noise_sigma),
            blur_sigma: sample_range(rng, spec.blur_sigma),
        }
    }
}

fn gaussian_blur_plane(plane: &mut Vec<f32>, h: usize, w: usize, sigma: f32) {
    let radius = (3.0 * sigma).ceil() as i32;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-(i as f32).powi(2) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f32 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    let clamp = |v: i32, hi: usize| v.clamp(0, hi as i32 - 1) as usize;
    let mut tmp = vec![0f32; plane.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let xx = clamp(x as i32 + k as i32 - radius, w);
                acc += kv * plane[y * w + xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let yy = clamp(y as i32 + k as i32 - radius, h);
                acc += kv * tmp[yy * w + x];
            }
            plane[y * w + x] = acc;
        }
    }
}

/// Fixed-order style chain: tint, contrast, brightness, gamma,
/// vignette, blur, noise, clamp. Neutral parameters short-circuit so
/// the identity spec reproduces the input exactly. The noise stream
/// continues from the parameter draws.
pub fn apply_style_chain(
    image: &Tensor4<f32>,
    p: &StyleParams,
    rng: &mut impl Rng,
) -> Tensor4<f32> {
    let s = image.shape();
    let mut out = image.clone();
    for c in 0..3 {
        let gain = p.tint[c] as f32;
        if gain != 1.0 {
            for v in out.plane_mut(0, c) {
                *v *= gain;
            }
        }
    }
    if p.contrast != 1.0 {
        let g = p.contrast as f32;
        for v in out.as_mut_slice() {
            *v = (*v - 0.5) * g + 0.5;
        }
    }
    if p.brightness != 0.0 {
        let b = p.brightness as f32;
        for v in out.as_mut_slice() {
            *v += b;
        }
    }
    if p.gamma != 1.0 {
        let g = p.gamma as f32;
        for v in out.as_mut_slice() {
            *v = v.clamp(0.0, 1.0).powf(g);
        }
    }
    if p.vignette > 0.0 {
        let strength = p.vignette as f32;
        let half = s.h as f32 / 2.0;
        for c in 0..3 {
            let plane = out.plane_mut(0, c);
            for y in 0..s.h {
                for x in 0..s.w {
                    let dy = (y as f32 + 0.5 - half) / half;
                    let dx = (x as f32 + 0.5 - half) / half;
                    plane[y * s.w + x] *= 1.0 - strength * (dy * dy + dx * dx);
                }
            }
        }
    }
    if p.blur_sigma > 1e-6 {
        for c in 0..3 {
            let mut plane = out.plane(0, c).to_vec();
            gaussian_blur_plane(&mut plane, s.h, s.w, p.blur_sigma as f32);
            out.plane_mut(0, c).copy_from_slice(&plane);
        }
    }
    if p.noise_sigma > 0.0 {
        let sigma = p.noise_sigma;
        for v in out.as_mut_slice() {
            // Box-Muller on the style stream.
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            let n = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            *v += (sigma * n) as f32;
        }
    }
    for v in out.as_mut_slice() {
        *v = v.clamp(0.0, 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn neutral_chain_is_exact_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (img, _) = render_anatomy(&AnatomySpec::default(), 32, &mut rng).unwrap();
        let neutral = StyleParams {
            brightness: 0.0,
            contrast: 1.0,
            tint: [1.0; 3],
            gamma: 1.0,
            vignette: 0.0,
            noise_sigma: 0.0,
            blur_sigma: 0.0,
        };
        let styled = apply_style_chain(&img, &neutral, &mut rng);
        assert_eq!(styled, img);
    }

    #[test]
    fn blur_preserves_mass_roughly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (img, _) = render_anatomy(&AnatomySpec::default(), 32, &mut rng).unwrap();
        let p = StyleParams {
            brightness: 0.0,
            contrast: 1.0,
            tint: [1.0; 3],
            gamma: 1.0,
            vignette: 0.0,
            noise_sigma: 0.0,
            blur_sigma: 1.0,
        };
        let blurred = apply_style_chain(&img, &p, &mut rng);
        let mean = |t: &Tensor4<f32>| {
            t.as_slice().iter().map(|&v| v as f64).sum::<f64>() / t.numel() as f64
        };
        assert!((mean(&img) - mean(&blurred)).abs() < 0.02);
    }
}
