//! Clothing-color appearance model: HSV conversion, hue-only histograms,
//! templates and the similarity gate.
//!
//! Identification works on hue alone because hue is independent of the value
//! channel: scaling brightness up or down leaves the histogram bit-identical.
//! That is what makes the gate survive lighting changes. Saturation is used
//! only as a filter: near-achromatic pixels have numerically meaningless
//! hue and are dropped before binning.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of histogram bins; 10 degrees of hue per bin.
pub const HUE_BINS: usize = 36;

/// Default saturation floor below which a pixel contributes no hue.
pub const DEFAULT_MIN_SATURATION: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum AppearanceError {
    #[error("no appearance data: histogram has no contributing pixels")]
    NoAppearanceData,
}

/// An RGB pixel with channels in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgbPixel {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl RgbPixel {
    pub fn new(r: f64, g: f64, b: f64) -> Self {
        RgbPixel { r, g, b }
    }
}

/// An HSV pixel: hue in degrees [0, 360), saturation and value in [0, 1].
///
/// Hue is undefined for achromatic pixels (s == 0); `hue_defined` flags it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvPixel {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl HsvPixel {
    pub fn new(h: f64, s: f64, v: f64) -> Self {
        HsvPixel {
            h: wrap_hue(h),
            s,
            v,
        }
    }

    pub fn hue_defined(&self) -> bool {
        self.s > 0.0
    }
}

/// Wrap an angle in degrees into [0, 360).
pub fn wrap_hue(h: f64) -> f64 {
    let w = h.rem_euclid(360.0);
    if w == 360.0 {
        0.0
    } else {
        w
    }
}

/// Standard hexcone RGB -> HSV conversion.
///
/// v = max(r,g,b); s = (max-min)/max (0 when max is 0); h by the piecewise
/// sector formula. For achromatic inputs h is reported as 0 with s = 0, and
/// callers must treat the hue as undefined.
pub fn rgb_to_hsv(p: RgbPixel) -> HsvPixel {
    let max = p.r.max(p.g).max(p.b);
    let min = p.r.min(p.g).min(p.b);
    let delta = max - min;

    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else if max == p.r {
        60.0 * ((p.g - p.b) / delta)
    } else if max == p.g {
        60.0 * ((p.b - p.r) / delta + 2.0)
    } else {
        60.0 * ((p.r - p.g) / delta + 4.0)
    };
    HsvPixel::new(h, s, v)
}

/// A normalized distribution over hue, in 36 bins of 10 degrees.
///
/// `sample_count` is the number of pixels that contributed. A histogram with
/// `sample_count == 0` is the empty degenerate case: all bins zero, and it
/// cannot be compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HueHistogram {
    #[serde(with = "bins_serde")]
    pub bins: [f64; HUE_BINS],
    pub sample_count: u64,
}

// serde stops at [T; 32]; encode the 36 bins as a plain sequence.
mod bins_serde {
    use super::HUE_BINS;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(bins: &[f64; HUE_BINS], ser: S) -> Result<S::Ok, S::Error> {
        bins.as_slice().serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<[f64; HUE_BINS], D::Error> {
        let v = Vec::<f64>::deserialize(de)?;
        let n = v.len();
        v.try_into()
            .map_err(|_| serde::de::Error::invalid_length(n, &"exactly 36 bins"))
    }
}

impl HueHistogram {
    pub fn empty() -> Self {
        HueHistogram {
            bins: [0.0; HUE_BINS],
            sample_count: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.sample_count == 0
    }

    /// Circular bin index for a hue in degrees.
    pub fn bin_index(h: f64) -> usize {
        ((wrap_hue(h) / 10.0).floor() as usize) % HUE_BINS
    }

    /// Index of the heaviest bin.
    pub fn argmax(&self) -> usize {
        self.bins
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Bin the hues of `pixels` into a normalized 36-bin histogram.
///
/// Pixels with `s < min_saturation` or undefined hue are excluded. If nothing
/// survives the filter the result is the empty histogram (`sample_count` 0),
/// which is a valid degenerate output, not an error.
pub fn build_histogram<'a, I>(pixels: I, min_saturation: f64) -> HueHistogram
where
    I: IntoIterator<Item = &'a HsvPixel>,
{
    let mut bins = [0.0_f64; HUE_BINS];
    let mut count = 0u64;
    for p in pixels {
        if !p.hue_defined() || p.s < min_saturation {
            continue;
        }
        bins[HueHistogram::bin_index(p.h)] += 1.0;
        count += 1;
    }
    if count > 0 {
        let total = count as f64;
        for b in bins.iter_mut() {
            *b /= total;
        }
    }
    HueHistogram {
        bins,
        sample_count: count,
    }
}

/// Histogram intersection: sum of per-bin minima.
///
/// Symmetric, bounded to [0, 1] for normalized inputs; 1 iff identical,
/// 0 iff the supports are disjoint.
pub fn similarity(a: &HueHistogram, b: &HueHistogram) -> Result<f64, AppearanceError> {
    if a.is_empty() || b.is_empty() {
        return Err(AppearanceError::NoAppearanceData);
    }
    Ok(a.bins
        .iter()
        .zip(b.bins.iter())
        .map(|(x, y)| x.min(*y))
        .sum())
}

/// The gate: a detection is the target iff its score strictly exceeds the
/// threshold.
pub fn is_target(score: f64, threshold: f64) -> bool {
    score > threshold
}

/// The stored appearance identity of the tracked person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub label: String,
    #[serde(flatten)]
    pub histogram: HueHistogram,
    pub min_saturation: f64,
}

impl Template {
    pub fn new(label: impl Into<String>, histogram: HueHistogram, min_saturation: f64) -> Self {
        Template {
            label: label.into(),
            histogram,
            min_saturation,
        }
    }

    /// Serialize as the on-disk JSON document:
    /// `{label, bins[36], sample_count, min_saturation}`.
    ///
    /// f64 values round-trip bit-exactly through this encoding.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("template serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, TemplateParseError> {
        let t: Template = serde_json::from_str(text).map_err(TemplateParseError::Json)?;
        if t.histogram.is_empty() {
            return Err(TemplateParseError::EmptyHistogram);
        }
        let sum: f64 = t.histogram.bins.iter().sum();
        if !t.histogram.bins.iter().all(|b| b.is_finite() && *b >= 0.0) || (sum - 1.0).abs() > 1e-9
        {
            return Err(TemplateParseError::NotNormalized { sum });
        }
        if !(t.min_saturation.is_finite() && (0.0..=1.0).contains(&t.min_saturation)) {
            return Err(TemplateParseError::BadMinSaturation(t.min_saturation));
        }
        Ok(t)
    }
}

#[derive(Debug, Error)]
pub enum TemplateParseError {
    #[error("template JSON: {0}")]
    Json(#[source] serde_json::Error),
    #[error("template histogram is empty (sample_count = 0)")]
    EmptyHistogram,
    #[error("template bins are not a normalized distribution (sum = {sum})")]
    NotNormalized { sum: f64 },
    #[error("template min_saturation out of range: {0}")]
    BadMinSaturation(f64),
}
