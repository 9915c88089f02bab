//! Seeded generator of fundus-like images with concentric disc/cup
//! anatomy and controllable style domains, plus on-disk dataset IO.
//!
//! Anatomy and style are sampled from separate RNG streams of the same
//! per-sample seed, so two domains generated with the same seeds share
//! pixel-identical masks while differing in appearance. Style
//! transforms never touch the mask.

mod dataset;
mod render;

pub use dataset::{
    generate_domain, load_dataset, regenerate_domain, save_overlay, DomainManifest, ManifestRecord,
};
pub use render::{apply_style_chain, render_anatomy, StyleParams};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor4;
use crate::train::{seeded_rng, Sample};

/// Geometry ranges for one domain family. All lengths are fractions of
/// the image side, so datasets scale from desk size to full size.
#[derive(Clone, Debug, PartialEq)]
pub struct AnatomySpec {
    pub disc_radius: (f64, f64),
    pub cup_to_disc_ratio: (f64, f64),
    pub center_jitter: (f64, f64),
    pub eccentricity: (f64, f64),
    pub vessel_count: (usize, usize),
    pub vessel_width: (f64, f64),
    pub texture_scale: f64,
}

impl Default for AnatomySpec {
    fn default() -> Self {
        AnatomySpec {
            disc_radius: (0.13, 0.19),
            cup_to_disc_ratio: (0.35, 0.60),
            center_jitter: (0.0, 0.10),
            eccentricity: (0.85, 1.15),
            vessel_count: (4, 9),
            vessel_width: (0.009, 0.022),
            texture_scale: 0.06,
        }
    }
}

impl AnatomySpec {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("disc_radius", self.disc_radius),
            ("cup_to_disc_ratio", self.cup_to_disc_ratio),
            ("center_jitter", self.center_jitter),
            ("eccentricity", self.eccentricity),
            ("vessel_width", self.vessel_width),
        ];
        for (name, (lo, hi)) in ranges {
            if lo > hi || lo < 0.0 {
                return Err(Error::Config(format!("anatomy range {name} ({lo}, {hi}) ill-formed")));
            }
        }
        if self.cup_to_disc_ratio.1 >= 1.0 || self.cup_to_disc_ratio.0 <= 0.0 {
            return Err(Error::Config("cup_to_disc_ratio must stay inside (0, 1)".into()));
        }
        if self.vessel_count.0 > self.vessel_count.1 {
            return Err(Error::Config("vessel_count range ill-formed".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        format!(
            "disc_radius={:?};cup_to_disc_ratio={:?};center_jitter={:?};eccentricity={:?};vessel_count={:?};vessel_width={:?};texture_scale={}",
            self.disc_radius,
            self.cup_to_disc_ratio,
            self.center_jitter,
            self.eccentricity,
            self.vessel_count,
            self.vessel_width,
            self.texture_scale
        )
    }
}

/// Appearance ranges of one domain: every sample draws concrete values
/// from these.
#[derive(Clone, Debug, PartialEq)]
pub struct StyleSpec {
    pub name: String,
    pub brightness_shift: (f64, f64),
    pub contrast_gain: (f64, f64),
    pub tint_r: (f64, f64),
    pub tint_g: (f64, f64),
    pub tint_b: (f64, f64),
    pub gamma: (f64, f64),
    pub vignette_strength: (f64, f64),
    pub noise_sigma: (f64, f64),
    pub blur_sigma: (f64, f64),
}

impl StyleSpec {
    /// Exact identity chain; the styled image equals the raw render.
    pub fn identity(name: &str) -> Self {
        StyleSpec {
            name: name.to_string(),
            brightness_shift: (0.0, 0.0),
            contrast_gain: (1.0, 1.0),
            tint_r: (1.0, 1.0),
            tint_g: (1.0, 1.0),
            tint_b: (1.0, 1.0),
            gamma: (1.0, 1.0),
            vignette_strength: (0.0, 0.0),
            noise_sigma: (0.0, 0.0),
            blur_sigma: (0.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("brightness_shift", self.brightness_shift),
            ("contrast_gain", self.contrast_gain),
            ("tint_r", self.tint_r),
            ("tint_g", self.tint_g),
            ("tint_b", self.tint_b),
            ("gamma", self.gamma),
            ("vignette_strength", self.vignette_strength),
            ("noise_sigma", self.noise_sigma),
            ("blur_sigma", self.blur_sigma),
        ];
        for (name, (lo, hi)) in ranges {
            if lo > hi {
                return Err(Error::Config(format!("style range {name} ({lo}, {hi}) ill-formed")));
            }
        }
        for (name, (lo, _)) in
            [("contrast_gain", self.contrast_gain), ("tint_r", self.tint_r), ("tint_g", self.tint_g), ("tint_b", self.tint_b), ("gamma", self.gamma)]
        {
            if lo <= 0.0 {
                return Err(Error::Config(format!("style gain {name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        format!(
            "name={};brightness_shift={:?};contrast_gain={:?};tint_r={:?};tint_g={:?};tint_b={:?};gamma={:?};vignette_strength={:?};noise_sigma={:?};blur_sigma={:?}",
            self.name,
            self.brightness_shift,
            self.contrast_gain,
            self.tint_r,
            self.tint_g,
            self.tint_b,
            self.gamma,
            self.vignette_strength,
            self.noise_sigma,
            self.blur_sigma
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StylePreset {
    Source,
    ShiftMild,
    ShiftColor,
    ShiftLowlight,
}

impl StylePreset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "source" => Ok(StylePreset::Source),
            "shift_mild" => Ok(StylePreset::ShiftMild),
            "shift_color" => Ok(StylePreset::ShiftColor),
            "shift_lowlight" => Ok(StylePreset::ShiftLowlight),
            other => Err(Error::Usage(format!("unknown style preset '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StylePreset::Source => "source",
            StylePreset::ShiftMild => "shift_mild",
            StylePreset::ShiftColor => "shift_color",
            StylePreset::ShiftLowlight => "shift_lowlight",
        }
    }
}

/// Frozen preset constants. `source` is the training appearance; the
/// three shifts proxy increasingly hostile acquisition changes.
pub fn style_presets(preset: StylePreset) -> StyleSpec {
    match preset {
        StylePreset::Source => StyleSpec {
            name: "source".into(),
            brightness_shift: (-0.03, 0.03),
            contrast_gain: (0.92, 1.08),
            tint_r: (0.96, 1.04),
            tint_g: (0.96, 1.04),
            tint_b: (0.96, 1.04),
            gamma: (0.92, 1.08),
            vignette_strength: (0.0, 0.10),
            noise_sigma: (0.0, 0.012),
            blur_sigma: (0.0, 0.4),
        },
        StylePreset::ShiftMild => StyleSpec {
            name: "shift_mild".into(),
            brightness_shift: (-0.18, -0.08),
            contrast_gain: (0.68, 0.85),
            tint_r: (0.85, 0.98),
            tint_g: (0.80, 0.92),
            tint_b: (0.75, 0.92),
            gamma: (1.10, 1.30),
            vignette_strength: (0.10, 0.30),
            noise_sigma: (0.010, 0.025),
            blur_sigma: (0.3, 0.8),
        },
        StylePreset::ShiftColor => StyleSpec {
            name: "shift_color".into(),
            brightness_shift: (0.04, 0.14),
            contrast_gain: (1.10, 1.35),
            tint_r: (0.50, 0.68),
            tint_g: (1.10, 1.32),
            tint_b: (1.30, 1.70),
            gamma: (0.68, 0.85),
            vignette_strength: (0.0, 0.15),
            noise_sigma: (0.005, 0.020),
            blur_sigma: (0.0, 0.5),
        },
        StylePreset::ShiftLowlight => StyleSpec {
            name: "shift_lowlight".into(),
            brightness_shift: (-0.32, -0.20),
            contrast_gain: (0.50, 0.66),
            tint_r: (0.82, 0.95),
            tint_g: (0.78, 0.92),
            tint_b: (0.70, 0.88),
            gamma: (1.35, 1.65),
            vignette_strength: (0.20, 0.40),
            noise_sigma: (0.015, 0.035),
            blur_sigma: (0.3, 0.8),
        },
    }
}

pub(crate) fn sample_range(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo >= hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn anatomy_rng(seed: u64) -> ChaCha8Rng {
    seeded_rng(seed, crate::train::STREAM_DATA)
}

fn style_rng(seed: u64) -> ChaCha8Rng {
    seeded_rng(seed, crate::train::STREAM_INIT + 10)
}

/// Render one sample: anatomy (image base + masks) from the anatomy
/// stream, then the style chain on the image only.
pub fn generate_sample(
    anat: &AnatomySpec,
    style: &StyleSpec,
    seed: u64,
    size: usize,
) -> Result<(Tensor4<f32>, Tensor4<f32>)> {
    anat.validate()?;
    style.validate()?;
    let mut arng = anatomy_rng(seed);
    let (base, mask) = render_anatomy(anat, size, &mut arng)?;
    let mut srng = style_rng(seed);
    let params = StyleParams::sample(style, &mut srng);
    let image = apply_style_chain(&base, &params, &mut srng);
    Ok((image, mask))
}

/// In-memory dataset of one domain (ids follow manifest order).
pub fn generate_samples(
    anat: &AnatomySpec,
    style: &StyleSpec,
    n: usize,
    base_seed: u64,
    size: usize,
) -> Result<Vec<Sample>> {
    (0..n)
        .map(|i| {
            let seed = sample_seed(base_seed, i);
            let (image, mask) = generate_sample(anat, style, seed, size)?;
            Ok(Sample { id: format!("{}_{i:04}", style.name), image, mask })
        })
        .collect()
}

/// Per-sample seed derivation: shared across domains so anatomy lines
/// up while styles differ.
pub fn sample_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_mul(1_000_003).wrapping_add(index as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn oc_inside_od_and_both_nonempty() {
        let anat = AnatomySpec::default();
        let style = style_presets(StylePreset::Source);
        for seed in 0..20 {
            let (_, mask) = generate_sample(&anat, &style, seed, 64).unwrap();
            let mut od = 0;
            let mut oc = 0;
            for y in 0..64 {
                for x in 0..64 {
                    let od_bit = mask.at(0, 0, y, x) > 0.5;
                    let oc_bit = mask.at(0, 1, y, x) > 0.5;
                    od += od_bit as usize;
                    oc += oc_bit as usize;
                    assert!(!oc_bit || od_bit, "OC pixel outside OD at seed {seed}");
                }
            }
            assert!(od > 0 && oc > 0, "empty masks at seed {seed}");
            assert!(oc < od, "cup should be strictly smaller at seed {seed}");
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let anat = AnatomySpec::default();
        let style = style_presets(StylePreset::ShiftColor);
        let a = generate_sample(&anat, &style, 99, 64).unwrap();
        let b = generate_sample(&anat, &style, 99, 64).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn identity_style_equals_raw_render() {
        let anat = AnatomySpec::default();
        let mut arng = anatomy_rng(5);
        let (base, _) = render_anatomy(&anat, 64, &mut arng).unwrap();
        let (styled, _) = generate_sample(&anat, &StyleSpec::identity("id"), 5, 64).unwrap();
        assert_eq!(styled, base);
    }

    #[test]
    fn style_changes_image_but_not_mask() {
        let anat = AnatomySpec::default();
        let src = style_presets(StylePreset::Source);
        let low = style_presets(StylePreset::ShiftLowlight);
        let (img_a, mask_a) = generate_sample(&anat, &src, 123, 64).unwrap();
        let (img_b, mask_b) = generate_sample(&anat, &low, 123, 64).unwrap();
        assert_eq!(mask_a, mask_b, "masks must be style-invariant");
        assert_ne!(img_a, img_b, "styles must differ");
    }

    #[test]
    fn images_live_in_unit_range() {
        let anat = AnatomySpec::default();
        for preset in
            [StylePreset::Source, StylePreset::ShiftMild, StylePreset::ShiftColor, StylePreset::ShiftLowlight]
        {
            let style = style_presets(preset);
            let (img, mask) = generate_sample(&anat, &style, 7, 64).unwrap();
            assert_eq!(img.shape(), Shape::new(1, 3, 64, 64));
            assert_eq!(mask.shape(), Shape::new(1, 2, 64, 64));
            assert!(img.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn unknown_preset_is_usage_error() {
        assert!(matches!(StylePreset::parse("nope"), Err(Error::Usage(_))));
    }

    #[test]
    fn lowlight_brightness_strictly_below_source() {
        let src = style_presets(StylePreset::Source);
        let low = style_presets(StylePreset::ShiftLowlight);
        assert!(low.brightness_shift.1 < src.brightness_shift.0);
    }
}
