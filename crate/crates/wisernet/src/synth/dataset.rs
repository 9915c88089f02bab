//! On-disk dataset layout: `<domain>/{images,masks,manifest.txt}`.
//!
//! Images are 8-bit RGB PNG; masks are 8-bit single-channel PNG with
//! values {0, 128, 255} for {background, disc-only, cup}. The manifest
//! carries the full specs and per-sample seeds, so a dataset can be
//! regenerated byte-for-byte from the manifest alone.

use std::fs;
use std::path::Path;

use image::{GrayImage, RgbImage};
use sha2::{Digest, Sha256};

use super::{generate_sample, sample_seed, AnatomySpec, StyleSpec};
use crate::error::{Error, Result};
use crate::metrics::BinaryMask;
use crate::tensor::{Shape, Tensor4};
use crate::train::Sample;

pub const MANIFEST_NAME: &str = "manifest.txt";
const MANIFEST_HEADER: &str = "# dataset manifest v1";

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRecord {
    pub id: String,
    pub image_path: String,
    pub mask_path: String,
    pub seed: u64,
    pub spec_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainManifest {
    pub domain: String,
    pub base_seed: u64,
    pub size: usize,
    pub spec_hash: String,
    pub anat: AnatomySpec,
    pub style: StyleSpec,
    pub records: Vec<ManifestRecord>,
}

pub fn spec_hash(anat: &AnatomySpec, style: &StyleSpec) -> String {
    let mut hasher = Sha256::new();
    hasher.update(anat.to_kv().as_bytes());
    hasher.update(b"|");
    hasher.update(style.to_kv().as_bytes());
    hasher.finalize()[..6].iter().map(|b| format!("{b:02x}")).collect()
}

fn tensor_to_rgb(image: &Tensor4<f32>) -> RgbImage {
    let s = image.shape();
    let mut out = RgbImage::new(s.w as u32, s.h as u32);
    for y in 0..s.h {
        for x in 0..s.w {
            let px = [
                (image.at(0, 0, y, x).clamp(0.0, 1.0) * 255.0).round() as u8,
                (image.at(0, 1, y, x).clamp(0.0, 1.0) * 255.0).round() as u8,
                (image.at(0, 2, y, x).clamp(0.0, 1.0) * 255.0).round() as u8,
            ];
            out.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    out
}

fn tensor_to_mask_png(mask: &Tensor4<f32>) -> GrayImage {
    let s = mask.shape();
    let mut out = GrayImage::new(s.w as u32, s.h as u32);
    for y in 0..s.h {
        for x in 0..s.w {
            let od = mask.at(0, 0, y, x) > 0.5;
            let oc = mask.at(0, 1, y, x) > 0.5;
            let v = match (od, oc) {
                (false, false) => 0u8,
                (true, false) => 128,
                (true, true) => 255,
                (false, true) => 255, // unreachable by construction
            };
            out.put_pixel(x as u32, y as u32, image::Luma([v]));
        }
    }
    out
}

/// Render `n` samples into `out_dir` and write the manifest.
pub fn generate_domain(
    anat: &AnatomySpec,
    style: &StyleSpec,
    n: usize,
    base_seed: u64,
    size: usize,
    out_dir: &Path,
) -> Result<DomainManifest> {
    anat.validate()?;
    style.validate()?;
    let images_dir = out_dir.join("images");
    let masks_dir = out_dir.join("masks");
    fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
    fs::create_dir_all(&masks_dir).map_err(|e| Error::io(&masks_dir, e))?;

    let hash = spec_hash(anat, style);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let seed = sample_seed(base_seed, i);
        let (image, mask) = generate_sample(anat, style, seed, size)?;
        let id = format!("{}_{i:04}", style.name);
        let image_rel = format!("images/{id}.png");
        let mask_rel = format!("masks/{id}.png");
        let image_path = out_dir.join(&image_rel);
        let mask_path = out_dir.join(&mask_rel);
        tensor_to_rgb(&image).save(&image_path).map_err(|e| {
            Error::io(&image_path, std::io::Error::other(e))
        })?;
        tensor_to_mask_png(&mask).save(&mask_path).map_err(|e| {
            Error::io(&mask_path, std::io::Error::other(e))
        })?;
        records.push(ManifestRecord {
            id,
            image_path: image_rel,
            mask_path: mask_rel,
            seed,
            spec_hash: hash.clone(),
        });
    }
    let manifest = DomainManifest {
        domain: style.name.clone(),
        base_seed,
        size,
        spec_hash: hash,
        anat: anat.clone(),
        style: style.clone(),
        records,
    };
    write_manifest(&manifest, &out_dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}

fn write_manifest(m: &DomainManifest, path: &Path) -> Result<()> {
    let mut text = String::new();
    text.push_str(MANIFEST_HEADER);
    text.push('\n');
    text.push_str(&format!("domain={}\n", m.domain));
    text.push_str(&format!("base_seed={}\n", m.base_seed));
    text.push_str(&format!("size={}\n", m.size));
    text.push_str(&format!("spec_hash={}\n", m.spec_hash));
    text.push_str(&format!("anat: {}\n", m.anat.to_kv()));
    text.push_str(&format!("style: {}\n", m.style.to_kv()));
    text.push_str("records:\n");
    for r in &m.records {
        text.push_str(&format!(
            "{} {} {} {} {}\n",
            r.id, r.image_path, r.mask_path, r.seed, r.spec_hash
        ));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<DomainManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(MANIFEST_HEADER) {
        return Err(Error::Load(format!("{}: not a dataset manifest", path.display())));
    }
    let mut domain = None;
    let mut base_seed = None;
    let mut size = None;
    let mut spec_hash_v = None;
    let mut anat = None;
    let mut style = None;
    let mut records = Vec::new();
    let mut in_records = false;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        if in_records {
            let parts: Vec<&str> = line.split(' ').collect();
            if parts.len() != 5 {
                return Err(Error::Load(format!("{}: bad record '{line}'", path.display())));
            }
            records.push(ManifestRecord {
                id: parts[0].to_string(),
                image_path: parts[1].to_string(),
                mask_path: parts[2].to_string(),
                seed: parts[3]
                    .parse()
                    .map_err(|_| Error::Load(format!("{}: bad seed '{line}'", path.display())))?,
                spec_hash: parts[4].to_string(),
            });
        } else if line == "records:" {
            in_records = true;
        } else if let Some(v) = line.strip_prefix("anat: ") {
            anat = Some(parse_anat_kv(v)?);
        } else if let Some(v) = line.strip_prefix("style: ") {
            style = Some(parse_style_kv(v)?);
        } else if let Some((k, v)) = line.split_once('=') {
            match k {
                "domain" => domain = Some(v.to_string()),
                "base_seed" => {
                    base_seed = Some(v.parse().map_err(|_| {
                        Error::Load(format!("{}: bad base_seed", path.display()))
                    })?)
                }
                "size" => {
                    size = Some(
                        v.parse()
                            .map_err(|_| Error::Load(format!("{}: bad size", path.display())))?,
                    )
                }
                "spec_hash" => spec_hash_v = Some(v.to_string()),
                _ => {}
            }
        }
    }
    let missing = |what: &str| Error::Load(format!("{}: missing {what}", path.display()));
    Ok(DomainManifest {
        domain: domain.ok_or_else(|| missing("domain"))?,
        base_seed: base_seed.ok_or_else(|| missing("base_seed"))?,
        size: size.ok_or_else(|| missing("size"))?,
        spec_hash: spec_hash_v.ok_or_else(|| missing("spec_hash"))?,
        anat: anat.ok_or_else(|| missing("anat"))?,
        style: style.ok_or_else(|| missing("style"))?,
        records,
    })
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let inner = s
        .trim()
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| Error::Load(format!("bad pair '{s}'")))?;
    let (a, b) = inner.split_once(',').ok_or_else(|| Error::Load(format!("bad pair '{s}'")))?;
    Ok((
        a.trim().parse().map_err(|_| Error::Load(format!("bad pair '{s}'")))?,
        b.trim().parse().map_err(|_| Error::Load(format!("bad pair '{s}'")))?,
    ))
}

fn parse_usize_pair(s: &str) -> Result<(usize, usize)> {
    let p = parse_pair(s)?;
    Ok((p.0 as usize, p.1 as usize))
}

fn kv_map(s: &str) -> Vec<(&str, &str)> {
    s.split(';').filter_map(|part| part.split_once('=')).collect()
}

pub fn parse_anat_kv(s: &str) -> Result<AnatomySpec> {
    let mut spec = AnatomySpec::default();
    for (k, v) in kv_map(s) {
        match k {
            "disc_radius" => spec.disc_radius = parse_pair(v)?,
            "cup_to_disc_ratio" => spec.cup_to_disc_ratio = parse_pair(v)?,
            "center_jitter" => spec.center_jitter = parse_pair(v)?,
            "eccentricity" => spec.eccentricity = parse_pair(v)?,
            "vessel_count" => spec.vessel_count = parse_usize_pair(v)?,
            "vessel_width" => spec.vessel_width = parse_pair(v)?,
            "texture_scale" => {
                spec.texture_scale =
                    v.parse().map_err(|_| Error::Load(format!("bad texture_scale '{v}'")))?
            }
            other => return Err(Error::Load(format!("unknown anatomy field '{other}'"))),
        }
    }
    spec.validate()?;
    Ok(spec)
}

pub fn parse_style_kv(s: &str) -> Result<StyleSpec> {
    let mut spec = StyleSpec::identity("unnamed");
    for (k, v) in kv_map(s) {
        match k {
            "name" => spec.name = v.to_string(),
            "brightness_shift" => spec.brightness_shift = parse_pair(v)?,
            "contrast_gain" => spec.contrast_gain = parse_pair(v)?,
            "tint_r" => spec.tint_r = parse_pair(v)?,
            "tint_g" => spec.tint_g = parse_pair(v)?,
            "tint_b" => spec.tint_b = parse_pair(v)?,
            "gamma" => spec.gamma = parse_pair(v)?,
            "vignette_strength" => spec.vignette_strength = parse_pair(v)?,
            "noise_sigma" => spec.noise_sigma = parse_pair(v)?,
            "blur_sigma" => spec.blur_sigma = parse_pair(v)?,
            other => return Err(Error::Load(format!("unknown style field '{other}'"))),
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Re-render a domain from its manifest into `out_dir`; outputs are
/// byte-identical to the original generation.
pub fn regenerate_domain(manifest_path: &Path, out_dir: &Path) -> Result<DomainManifest> {
    let m = read_manifest(manifest_path)?;
    generate_domain(&m.anat, &m.style, m.records.len(), m.base_seed, m.size, out_dir)
}

// ---------------------------------------------------------------------------
// loading

fn bilinear_resize_plane(src: &[f32], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<f32> {
    let mut out = vec![0f32; dh * dw];
    for y in 0..dh {
        let fy = ((y as f32 + 0.5) * sh as f32 / dh as f32 - 0.5).max(0.0);
        let y0 = (fy as usize).min(sh - 1);
        let y1 = (y0 + 1).min(sh - 1);
        let ty = fy - y0 as f32;
        for x in 0..dw {
            let fx = ((x as f32 + 0.5) * sw as f32 / dw as f32 - 0.5).max(0.0);
            let x0 = (fx as usize).min(sw - 1);
            let x1 = (x0 + 1).min(sw - 1);
            let tx = fx - x0 as f32;
            out[y * dw + x] = src[y0 * sw + x0] * (1.0 - ty) * (1.0 - tx)
                + src[y0 * sw + x1] * (1.0 - ty) * tx
                + src[y1 * sw + x0] * ty * (1.0 - tx)
                + src[y1 * sw + x1] * ty * tx;
        }
    }
    out
}

fn nearest_resize_plane(src: &[f32], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<f32> {
    let mut out = vec![0f32; dh * dw];
    for y in 0..dh {
        let sy = (((y as f32 + 0.5) * sh as f32 / dh as f32) as usize).min(sh - 1);
        for x in 0..dw {
            let sx = (((x as f32 + 0.5) * sw as f32 / dw as f32) as usize).min(sw - 1);
            out[y * dw + x] = src[sy * sw + sx];
        }
    }
    out
}

/// Load a generated domain: images scaled to `[0, 1]` and resized to
/// `input_size` (bilinear for images, nearest for masks), in manifest
/// order.
pub fn load_dataset(dir: &Path, input_size: usize) -> Result<Vec<Sample>> {
    let manifest = read_manifest(&dir.join(MANIFEST_NAME))?;
    let mut samples = Vec::with_capacity(manifest.records.len());
    for rec in &manifest.records {
        let image_path = dir.join(&rec.image_path);
        let mask_path = dir.join(&rec.mask_path);
        let img = image::open(&image_path)
            .map_err(|e| Error::Load(format!("{}: {e}", image_path.display())))?
            .to_rgb8();
        let msk = image::open(&mask_path)
            .map_err(|e| Error::Load(format!("{}: {e}", mask_path.display())))?
            .to_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        if (msk.width() as usize, msk.height() as usize) != (w, h) {
            return Err(Error::Load(format!(
                "{}: mask size {}x{} does not match image {}x{}",
                rec.id,
                msk.width(),
                msk.height(),
                w,
                h
            )));
        }
        let mut image_planes = vec![vec![0f32; h * w]; 3];
        for y in 0..h {
            for x in 0..w {
                let px = img.get_pixel(x as u32, y as u32);
                for c in 0..3 {
                    image_planes[c][y * w + x] = px.0[c] as f32 / 255.0;
                }
            }
        }
        let mut mask_planes = vec![vec![0f32; h * w]; 2];
        for y in 0..h {
            for x in 0..w {
                let v = msk.get_pixel(x as u32, y as u32).0[0];
                let (od, oc) = match v {
                    0 => (0.0, 0.0),
                    128 => (1.0, 0.0),
                    255 => (1.0, 1.0),
                    other => {
                        return Err(Error::Load(format!(
                            "{}: invalid mask value {other} (expected 0/128/255)",
                            rec.id
                        )))
                    }
                };
                mask_planes[0][y * w + x] = od;
                mask_planes[1][y * w + x] = oc;
            }
        }
        let (dh, dw) = (input_size, input_size);
        let mut image = Tensor4::zeros(Shape::new(1, 3, dh, dw));
        for (c, plane) in image_planes.iter().enumerate() {
            let resized = if (h, w) == (dh, dw) {
                plane.clone()
            } else {
                bilinear_resize_plane(plane, h, w, dh, dw)
            };
            image.plane_mut(0, c).copy_from_slice(&resized);
        }
        let mut mask = Tensor4::zeros(Shape::new(1, 2, dh, dw));
        for (c, plane) in mask_planes.iter().enumerate() {
            let resized = if (h, w) == (dh, dw) {
                plane.clone()
            } else {
                nearest_resize_plane(plane, h, w, dh, dw)
            };
            mask.plane_mut(0, c).copy_from_slice(&resized);
        }
        samples.push(Sample { id: rec.id.clone(), image, mask });
    }
    Ok(samples)
}

/// Write the image with prediction contours: disc boundary in green,
/// cup boundary in blue.
pub fn save_overlay(
    image: &Tensor4<f32>,
    od: &BinaryMask,
    oc: &BinaryMask,
    path: &Path,
) -> Result<()> {
    let mut rgb = tensor_to_rgb(image);
    for (y, x) in od.boundary() {
        rgb.put_pixel(x as u32, y as u32, image::Rgb([0, 220, 0]));
    }
    for (y, x) in oc.boundary() {
        rgb.put_pixel(x as u32, y as u32, image::Rgb([40, 60, 255]));
    }
    rgb.save(path).map_err(|e| Error::io(path, std::io::Error::other(e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{style_presets, StylePreset};

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn count_contract_and_iteration_order() {
        let dir = tmp();
        let anat = AnatomySpec::default();
        let style = style_presets(StylePreset::Source);
        let m = generate_domain(&anat, &style, 10, 7, 32, dir.path()).unwrap();
        assert_eq!(m.records.len(), 10);
        assert_eq!(fs::read_dir(dir.path().join("images")).unwrap().count(), 10);
        assert_eq!(fs::read_dir(dir.path().join("masks")).unwrap().count(), 10);
        let samples = load_dataset(dir.path(), 32).unwrap();
        let ids: Vec<&str> = samples.iter().map(|s| s.id.as_str()).collect();
        let want: Vec<String> = m.records.iter().map(|r| r.id.clone()).collect();
        assert_eq!(ids, want.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    }

    #[test]
    fn round_trip_preserves_mask_bits_at_native_size() {
        let dir = tmp();
        let anat = AnatomySpec::default();
        let style = style_presets(StylePreset::ShiftMild);
        generate_domain(&anat, &style, 3, 11, 32, dir.path()).unwrap();
        let samples = load_dataset(dir.path(), 32).unwrap();
        for (i, s) in samples.iter().enumerate() {
            let seed = sample_seed(11, i);
            let (_, mask) = generate_sample(&anat, &style, seed, 32).unwrap();
            assert_eq!(s.mask, mask, "mask bits changed through PNG round trip");
        }
    }

    #[test]
    fn shared_anatomy_identical_masks_different_images() {
        let (da, db) = (tmp(), tmp());
        let anat = AnatomySpec::default();
        generate_domain(&anat, &style_presets(StylePreset::Source), 4, 3, 32, da.path()).unwrap();
        generate_domain(&anat, &style_presets(StylePreset::ShiftLowlight), 4, 3, 32, db.path())
            .unwrap();
        let a = load_dataset(da.path(), 32).unwrap();
        let b = load_dataset(db.path(), 32).unwrap();
        for (sa, sb) in a.iter().zip(&b) {
            assert_eq!(sa.mask, sb.mask);
            assert_ne!(sa.image, sb.image);
        }
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let (da, db) = (tmp(), tmp());
        let anat = AnatomySpec::default();
        let style = style_presets(StylePreset::ShiftColor);
        let m = generate_domain(&anat, &style, 4, 21, 32, da.path()).unwrap();
        regenerate_domain(&da.path().join(MANIFEST_NAME), db.path()).unwrap();
        for rec in &m.records {
            let a = fs::read(da.path().join(&rec.image_path)).unwrap();
            let b = fs::read(db.path().join(&rec.image_path)).unwrap();
            assert_eq!(a, b, "{} image differs", rec.id);
            let a = fs::read(da.path().join(&rec.mask_path)).unwrap();
            let b = fs::read(db.path().join(&rec.mask_path)).unwrap();
            assert_eq!(a, b, "{} mask differs", rec.id);
        }
        let ma = fs::read(da.path().join(MANIFEST_NAME)).unwrap();
        let mb = fs::read(db.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(ma, mb);
    }

    #[test]
    fn corrupt_mask_value_is_rejected_by_name() {
        let dir = tmp();
        let anat = AnatomySpec::default();
        let style = style_presets(StylePreset::Source);
        let m = generate_domain(&anat, &style, 2, 5, 32, dir.path()).unwrap();
        // Poison one mask pixel with a non-{0,128,255} value.
        let victim = dir.path().join(&m.records[1].mask_path);
        let mut msk = image::open(&victim).unwrap().to_luma8();
        msk.put_pixel(0, 0, image::Luma([127]));
        msk.save(&victim).unwrap();
        let err = load_dataset(dir.path(), 32).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(&m.records[1].id), "error must name the entry: {msg}");
        assert!(msg.contains("127"));
    }

    #[test]
    fn missing_file_is_a_load_error() {
        let dir = tmp();
        let anat = AnatomySpec::default();
        let style = style_presets(StylePreset::Source);
        let m = generate_domain(&anat, &style, 2, 5, 32, dir.path()).unwrap();
        fs::remove_file(dir.path().join(&m.records[0].image_path)).unwrap();
        assert!(matches!(load_dataset(dir.path(), 32), Err(Error::Load(_))));
    }

    #[test]
    fn resize_path_produces_requested_size() {
        let dir = tmp();
        let anat = AnatomySpec::default();
        let style = style_presets(StylePreset::Source);
        generate_domain(&anat, &style, 2, 9, 64, dir.path()).unwrap();
        let samples = load_dataset(dir.path(), 32).unwrap();
        assert_eq!(samples[0].image.shape(), Shape::new(1, 3, 32, 32));
        assert_eq!(samples[0].mask.shape(), Shape::new(1, 2, 32, 32));
        // Nearest-resized masks stay binary with cup inside disc.
        for s in &samples {
            for (od, oc) in s.mask.plane(0, 0).iter().zip(s.mask.plane(0, 1)) {
                assert!(*od == 0.0 || *od == 1.0);
                assert!(*oc <= *od);
            }
        }
    }
}
