//! Weather degradation simulators and their composition into recorded,
//! bit-exact replayable stacks.
//!
//! Every simulator is a pure function of `(image, params, seed)`: the same
//! triple always reproduces the same image, which is what makes an oracle
//! undo possible downstream. Outputs are clamped to [0, 1] on write.

use serde::{Deserialize, Serialize};

use crate::imaging::{clamp01, ImageGrid};
use crate::rng::SeedSpec;
use crate::{Error, Result};

/// Per-entry stream labels, so one entry seed yields independent draws for
/// each sub-effect.
const STREAM_FIELD: u64 = 1;
const STREAM_OVERLAY: u64 = 2;
const STREAM_DEPTH: u64 = 3;

pub const STACK_MAX_LEN: usize = 4;

/// Closed set of degradation kinds with stable codes 0-6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationKind {
    Night,
    Fog,
    Rain,
    Snow,
    Noise,
    Blur,
    JpegProxy,
}

impl DegradationKind {
    pub const ALL: [DegradationKind; 7] = [
        DegradationKind::Night,
        DegradationKind::Fog,
        DegradationKind::Rain,
        DegradationKind::Snow,
        DegradationKind::Noise,
        DegradationKind::Blur,
        DegradationKind::JpegProxy,
    ];

    pub fn code(self) -> u8 {
        match self {
            DegradationKind::Night => 0,
            DegradationKind::Fog => 1,
            DegradationKind::Rain => 2,
            DegradationKind::Snow => 3,
            DegradationKind::Noise => 4,
            DegradationKind::Blur => 5,
            DegradationKind::JpegProxy => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<DegradationKind> {
        DegradationKind::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            DegradationKind::Night => "night",
            DegradationKind::Fog => "fog",
            DegradationKind::Rain => "rain",
            DegradationKind::Snow => "snow",
            DegradationKind::Noise => "noise",
            DegradationKind::Blur => "blur",
            DegradationKind::JpegProxy => "jpeg_proxy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NightParams {
    /// Linear attenuation k in [0.02, 0.5].
    pub attenuation: f64,
    /// Shot-noise gain in [0, 0.1]; per-pixel std is gain * sqrt(signal).
    pub shot_noise_gain: f64,
    /// Read-noise std in [0, 0.05].
    pub read_noise_sigma: f64,
    /// Number of additive flare blobs, 0..=3.
    pub flare_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMode {
    Ramp,
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FogParams {
    /// Haze density beta in [0.3, 1.5] per unit depth.
    pub beta: f64,
    /// Airlight A in [0.7, 1.0].
    pub airlight: f64,
    /// Airlight perturbation in [-0.025, 0.025].
    pub airlight_delta: f64,
    /// Brightness adjustment exponent in [1.5, 3.0].
    pub gamma: f64,
    /// Std of the additive Gaussian field inside the fog model.
    pub noise_sigma: f64,
    /// Depth map synthesized at apply time from the entry seed.
    pub depth_mode: DepthMode,
    /// Optional trailing compression pass.
    pub jpeg: Option<JpegParams>,
}

impl FogParams {
    pub fn defaults(beta: f64, airlight: f64, gamma: f64) -> FogParams {
        FogParams {
            beta,
            airlight,
            airlight_delta: 0.0,
            gamma,
            noise_sigma: 0.01,
            depth_mode: DepthMode::Ramp,
            jpeg: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RainParams {
    /// Streak coverage in [0, 1]; streak count scales with density * area.
    pub streak_density: f64,
    /// Streak orientation from vertical, degrees in [-30, 30].
    pub streak_angle_deg: f64,
    /// Raindrop blobs, 0..=40.
    pub drop_count: u32,
    /// Max raindrop radius in pixels, 1..=6.
    pub drop_radius: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnowParams {
    /// Flake coverage in [0, 1].
    pub flake_density: f64,
    /// Max flake radius in pixels, 1..=4.
    pub flake_radius: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Additive Gaussian std in [0, 0.1].
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlurParams {
    /// Box kernel radius, 1..=4.
    pub kernel_radius: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JpegParams {
    /// Tile size, 4 or 8.
    pub block: u32,
    /// Uniform quantization step for DCT coefficients, [0.02, 0.25].
    pub quant_step: f64,
}

/// Kind plus parameters, serialized with an adjacent `kind` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum DegradationParams {
    Night(NightParams),
    Fog(FogParams),
    Rain(RainParams),
    Snow(SnowParams),
    Noise(NoiseParams),
    Blur(BlurParams),
    JpegProxy(JpegParams),
}

impl DegradationParams {
    pub fn kind(&self) -> DegradationKind {
        match self {
            DegradationParams::Night(_) => DegradationKind::Night,
            DegradationParams::Fog(_) => DegradationKind::Fog,
            DegradationParams::Rain(_) => DegradationKind::Rain,
            DegradationParams::Snow(_) => DegradationKind::Snow,
            DegradationParams::Noise(_) => DegradationKind::Noise,
            DegradationParams::Blur(_) => DegradationKind::Blur,
            DegradationParams::JpegProxy(_) => DegradationKind::JpegProxy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, what: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::validation(format!("degradation param out of range: {what}")))
            }
        }
        match self {
            DegradationParams::Night(p) => {
                check((0.02..=0.5).contains(&p.attenuation), "night.attenuation")?;
                check((0.0..=0.1).contains(&p.shot_noise_gain), "night.shot_noise_gain")?;
                check((0.0..=0.05).contains(&p.read_noise_sigma), "night.read_noise_sigma")?;
                check(p.flare_count <= 3, "night.flare_count")
            }
            DegradationParams::Fog(p) => {
                check((0.3..=1.5).contains(&p.beta), "fog.beta")?;
                check((0.7..=1.0).contains(&p.airlight), "fog.airlight")?;
                check((-0.025..=0.025).contains(&p.airlight_delta), "fog.airlight_delta")?;
                check((1.5..=3.0).contains(&p.gamma), "fog.gamma")?;
                check((0.0..=0.1).contains(&p.noise_sigma), "fog.noise_sigma")?;
                if let Some(j) = &p.jpeg {
                    validate_jpeg(j)?;
                }
                Ok(())
            }
            DegradationParams::Rain(p) => {
                check((0.0..=1.0).contains(&p.streak_density), "rain.streak_density")?;
                check((-30.0..=30.0).contains(&p.streak_angle_deg), "rain.streak_angle_deg")?;
                check(p.drop_count <= 40, "rain.drop_count")?;
                check((1..=6).contains(&p.drop_radius), "rain.drop_radius")
            }
            DegradationParams::Snow(p) => {
                check((0.0..=1.0).contains(&p.flake_density), "snow.flake_density")?;
                check((1..=4).contains(&p.flake_radius), "snow.flake_radius")
            }
            DegradationParams::Noise(p) => check((0.0..=0.1).contains(&p.sigma), "noise.sigma"),
            DegradationParams::Blur(p) => {
                check((1..=4).contains(&p.kernel_radius), "blur.kernel_radius")
            }
            DegradationParams::JpegProxy(p) => validate_jpeg(p),
        }
    }
}

fn validate_jpeg(p: &JpegParams) -> Result<()> {
    if p.block != 4 && p.block != 8 {
        return Err(Error::validation("jpeg.block must be 4 or 8"));
    }
    if !(0.02..=0.25).contains(&p.quant_step) {
        return Err(Error::validation("jpeg.quant_step out of range"));
    }
    Ok(())
}

/// One recorded degradation application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackEntry {
    #[serde(flatten)]
    pub params: DegradationParams,
    pub seed: SeedSpec,
}

impl StackEntry {
    pub fn new(params: DegradationParams, seed: SeedSpec) -> StackEntry {
        StackEntry { params, seed }
    }
    pub fn kind(&self) -> DegradationKind {
        self.params.kind()
    }
}

/// Ordered, seeded list of degradations; the recorded ground truth for one
/// synthetic sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationStack {
    pub entries: Vec<StackEntry>,
    pub source_id: String,
}

impl DegradationStack {
    pub fn new(entries: Vec<StackEntry>, source_id: impl Into<String>) -> Result<DegradationStack> {
        if entries.is_empty() || entries.len() > STACK_MAX_LEN {
            return Err(Error::validation(format!(
                "stack length {} outside 1..={STACK_MAX_LEN}",
                entries.len()
            )));
        }
        for e in &entries {
            e.params.validate()?;
        }
        Ok(DegradationStack {
            entries,
            source_id: source_id.into(),
        })
    }
}

/// Normalized scene depth in [0, 1], matching a target image's shape.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }
    pub fn matches(&self, img: &ImageGrid) -> bool {
        self.height == img.height() && self.width == img.width()
    }
}

/// Synthesize a depth map. `ramp` runs 0 -> 1 top to bottom; `radial` is the
/// normalized distance from a seeded center in the middle half of the image.
pub fn synth_depth(height: usize, width: usize, mode: DepthMode, seed: SeedSpec) -> DepthMap {
    match mode {
        DepthMode::Ramp => {
            let mut values = Vec::with_capacity(height * width);
            for y in 0..height {
                let d = if height > 1 {
                    y as f64 / (height - 1) as f64
                } else {
                    0.0
                };
                values.extend(std::iter::repeat(d).take(width));
            }
            DepthMap {
                height,
                width,
                values,
            }
        }
        DepthMode::Radial => {
            let mut rng = seed.rng();
            let cy = rng.range_f64(0.25, 0.75) * (height.saturating_sub(1)) as f64;
            let cx = rng.range_f64(0.25, 0.75) * (width.saturating_sub(1)) as f64;
            radial_depth(height, width, cy, cx)
        }
    }
}

/// Radial depth from an explicit center, normalized by the farthest corner.
pub fn radial_depth(height: usize, width: usize, cy: f64, cx: f64) -> DepthMap {
    let mut far: f64 = 0.0;
    for corner_y in [0.0, (height.saturating_sub(1)) as f64] {
        for corner_x in [0.0, (width.saturating_sub(1)) as f64] {
            far = far.max(((corner_y - cy).powi(2) + (corner_x - cx).powi(2)).sqrt());
        }
    }
    let mut values = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            let d = ((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)).sqrt();
            values.push(if far > 0.0 { (d / far).min(1.0) } else { 0.0 });
        }
    }
    DepthMap {
        height,
        width,
        values,
    }
}

// --- night ---------------------------------------------------------------

pub fn apply_night(img: &ImageGrid, p: &NightParams, seed: SeedSpec) -> Result<ImageGrid> {
    DegradationParams::Night(*p).validate()?;
    Ok(night_raw(img, p, seed))
}

/// Range-unchecked pipeline; identity configurations (k = 1) are reachable
/// only from tests through this path.
fn night_raw(img: &ImageGrid, p: &NightParams, seed: SeedSpec) -> ImageGrid {
    let inv_gamma = 1.0 / 2.2;
    let mut rng = seed.substream(STREAM_FIELD).rng();
    let noisy = img.map_indexed(|_, _, _, v| {
        // display-referred -> linear, attenuate, sensor noise, back to display
        let lin = v.powf(2.2);
        let a = p.attenuation * lin;
        let mut b = a;
        if p.shot_noise_gain > 0.0 {
            b += rng.next_gaussian() * p.shot_noise_gain * a.max(0.0).sqrt();
        }
        if p.read_noise_sigma > 0.0 {
            b += rng.next_gaussian() * p.read_noise_sigma;
        }
        b.max(0.0).powf(inv_gamma)
    });
    if p.flare_count == 0 {
        return noisy;
    }
    let mut flare_rng = seed.substream(STREAM_OVERLAY).rng();
    let mut centers = Vec::new();
    for _ in 0..p.flare_count {
        let cy = flare_rng.next_f64() * (img.height().saturating_sub(1)) as f64;
        let cx = flare_rng.next_f64() * (img.width().saturating_sub(1)) as f64;
        centers.push((cy, cx));
    }
    const FLARE_SIGMA: f64 = 5.0;
    const FLARE_PEAK: f64 = 0.6;
    noisy.map_indexed(|y, x, _, v| {
        let mut add = 0.0;
        for &(cy, cx) in &centers {
            let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
            add += FLARE_PEAK * (-d2 / (2.0 * FLARE_SIGMA * FLARE_SIGMA)).exp();
        }
        v + add
    })
}

// --- fog -----------------------------------------------------------------

pub fn apply_fog(
    img: &ImageGrid,
    depth: &DepthMap,
    p: &FogParams,
    seed: SeedSpec,
) -> Result<ImageGrid> {
    DegradationParams::Fog(*p).validate()?;
    if !depth.matches(img) {
        return Err(Error::validation("fog: depth map shape mismatch"));
    }
    Ok(fog_raw(img, depth, p, seed))
}

fn fog_raw(img: &ImageGrid, depth: &DepthMap, p: &FogParams, seed: SeedSpec) -> ImageGrid {
    let airlight = p.airlight + p.airlight_delta;
    let mut rng = seed.substream(STREAM_FIELD).rng();
    let hazed = img.map_indexed(|y, x, _, v| {
        let t = (-p.beta * depth.get(y, x)).exp();
        let n = if p.noise_sigma > 0.0 {
            rng.next_gaussian() * p.noise_sigma
        } else {
            0.0
        };
        (v.powf(p.gamma) + n) * t + airlight * (1.0 - t)
    });
    match &p.jpeg {
        Some(j) => jpeg_raw(&hazed, j),
        None => hazed,
    }
}

// --- rain / snow overlays ------------------------------------------------

/// Streak and flake counts scale with density * area at this rate.
const OVERLAY_AREA_DIVISOR: f64 = 64.0;

pub fn apply_rain(img: &ImageGrid, p: &RainParams, seed: SeedSpec) -> Result<ImageGrid> {
    DegradationParams::Rain(*p).validate()?;
    Ok(rain_raw(img, p, seed, true, true))
}

/// Rain with independently addressable components: streaks and raindrops
/// use separate seed substreams, so either can be replayed alone.
pub(crate) fn rain_raw(
    img: &ImageGrid,
    p: &RainParams,
    seed: SeedSpec,
    streaks: bool,
    drops: bool,
) -> ImageGrid {
    let mut out = img.clone();
    if streaks && p.streak_density > 0.0 {
        let area = (img.height() * img.width()) as f64;
        let count = (p.streak_density * area / OVERLAY_AREA_DIVISOR).round() as usize;
        let mut rng = seed.substream(STREAM_FIELD).rng();
        let mut add = vec![0.0f64; img.height() * img.width()];
        for _ in 0..count {
            let cy = rng.next_f64() * (img.height().saturating_sub(1)) as f64;
            let cx = rng.next_f64() * (img.width().saturating_sub(1)) as f64;
            let len = rng.range_f64(img.height() as f64 / 6.0, img.height() as f64 / 3.0).max(3.0);
            let angle = (p.streak_angle_deg + rng.range_f64(-3.0, 3.0)).to_radians();
            let brightness = rng.range_f64(0.15, 0.35);
            // angle measured from vertical: streaks fall mostly downward
            let dy = angle.cos();
            let dx = angle.sin();
            let steps = len.round() as i64;
            for s in -steps / 2..=steps / 2 {
                let y = (cy + s as f64 * dy).round();
                let x = (cx + s as f64 * dx).round();
                if y >= 0.0 && x >= 0.0 && (y as usize) < img.height() && (x as usize) < img.width()
                {
                    add[y as usize * img.width() + x as usize] = brightness;
                }
            }
        }
        out = out.map_indexed(|y, x, _, v| v + add[y * img.width() + x]);
    }
    if drops && p.drop_count > 0 {
        let mut rng = seed.substream(STREAM_OVERLAY).rng();
        let snapshot = out.clone();
        let mut data_out = out;
        for _ in 0..p.drop_count {
            let cy = rng.range_usize(img.height()) as isize;
            let cx = rng.range_usize(img.width()) as isize;
            let r = rng.range_u32(1, p.drop_radius) as isize;
            // local disk blur of the pre-drop snapshot, plus a slight glint
            data_out = data_out.map_indexed(|y, x, c, v| {
                let ddy = y as isize - cy;
                let ddx = x as isize - cx;
                if ddy * ddy + ddx * ddx > r * r {
                    return v;
                }
                let mut sum = 0.0;
                let mut n = 0u32;
                for wy in -r..=r {
                    for wx in -r..=r {
                        if wy * wy + wx * wx > r * r {
                            continue;
                        }
                        let yy = y as isize + wy;
                        let xx = x as isize + wx;
                        if yy >= 0
                            && xx >= 0
                            && (yy as usize) < img.height()
                            && (xx as usize) < img.width()
                        {
                            sum += snapshot.get(yy as usize, xx as usize, c);
                            n += 1;
                        }
                    }
                }
                sum / f64::from(n) + 0.05
            });
        }
        out = data_out;
    }
    out
}

pub fn apply_snow(img: &ImageGrid, p: &SnowParams, seed: SeedSpec) -> Result<ImageGrid> {
    DegradationParams::Snow(*p).validate()?;
    Ok(snow_raw(img, p, seed))
}

fn snow_raw(img: &ImageGrid, p: &SnowParams, seed: SeedSpec) -> ImageGrid {
    if p.flake_density <= 0.0 {
        return img.clone();
    }
    let area = (img.height() * img.width()) as f64;
    let count = (p.flake_density * area / OVERLAY_AREA_DIVISOR).round() as usize;
    let mut rng = seed.substream(STREAM_FIELD).rng();
    const FLAKE_ALPHA: f64 = 0.6;
    let mut alpha = vec![0.0f64; img.height() * img.width()];
    for _ in 0..count {
        let cy = rng.range_usize(img.height()) as isize;
        let cx = rng.range_usize(img.width()) as isize;
        let r = rng.range_u32(1, p.flake_radius) as isize;
        for wy in -r..=r {
            for wx in -r..=r {
                if wy * wy + wx * wx > r * r {
                    continue;
                }
                let y = cy + wy;
                let x = cx + wx;
                if y >= 0 && x >= 0 && (y as usize) < img.height() && (x as usize) < img.width() {
                    let a = &mut alpha[y as usize * img.width() + x as usize];
                    // repeated coverage compounds toward opaque white
                    *a = *a + FLAKE_ALPHA * (1.0 - *a);
                }
            }
        }
    }
    img.map_indexed(|y, x, _, v| {
        let a = alpha[y * img.width() + x];
        v + a * (1.0 - v)
    })
}

// --- noise / blur / jpeg proxy -------------------------------------------

pub fn apply_noise(img: &ImageGrid, p: &NoiseParams, seed: SeedSpec) -> Result<ImageGrid> {
    DegradationParams::Noise(*p).validate()?;
    Ok(noise_raw(img, p, seed))
}

fn noise_raw(img: &ImageGrid, p: &NoiseParams, seed: SeedSpec) -> ImageGrid {
    if p.sigma <= 0.0 {
        return img.clone();
    }
    let mut rng = seed.substream(STREAM_FIELD).rng();
    img.map_indexed(|_, _, _, v| v + rng.next_gaussian() * p.sigma)
}

pub fn apply_blur(img: &ImageGrid, p: &BlurParams, _seed: SeedSpec) -> Result<ImageGrid> {
    DegradationParams::Blur(*p).validate()?;
    Ok(img.box_blur(p.kernel_radius as usize))
}

pub fn apply_jpeg_proxy(img: &ImageGrid, p: &JpegParams, _seed: SeedSpec) -> Result<ImageGrid> {
    DegradationParams::JpegProxy(*p).validate()?;
    Ok(jpeg_raw(img, p))
}

/// Per-tile orthonormal DCT-II, uniform coefficient quantization, inverse.
/// Edge tiles shorter than the block size transform at their actual size.
fn jpeg_raw(img: &ImageGrid, p: &JpegParams) -> ImageGrid {
    let block = p.block as usize;
    let h = img.height();
    let w = img.width();
    let mut out = vec![0.0f64; h * w * img.channels()];
    let mut tile = vec![0.0f64; block * block];
    for c in 0..img.channels() {
        for ty in (0..h).step_by(block) {
            for tx in (0..w).step_by(block) {
                let ny = block.min(h - ty);
                let nx = block.min(w - tx);
                for y in 0..ny {
                    for x in 0..nx {
                        tile[y * nx + x] = img.get(ty + y, tx + x, c);
                    }
                }
                dct2_inplace(&mut tile, ny, nx);
                for v in tile.iter_mut().take(ny * nx) {
                    *v = (*v / p.quant_step).round() * p.quant_step;
                }
                idct2_inplace(&mut tile, ny, nx);
                for y in 0..ny {
                    for x in 0..nx {
                        out[((ty + y) * w + tx + x) * img.channels() + c] = tile[y * nx + x];
                    }
                }
            }
        }
    }
    ImageGrid::from_fn(h, w, img.channels(), |y, x, c| {
        clamp01(out[(y * w + x) * img.channels() + c])
    })
    .expect("shape preserved")
}

fn dct_1d(input: &[f64], output: &mut [f64]) {
    let n = input.len();
    let nf = n as f64;
    for (k, out) in output.iter_mut().enumerate().take(n) {
        let alpha = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        let mut sum = 0.0;
        for (i, &v) in input.iter().enumerate() {
            sum += v * (std::f64::consts::PI * (2.0 * i as f64 + 1.0) * k as f64 / (2.0 * nf)).cos();
        }
        *out = alpha * sum;
    }
}

fn idct_1d(input: &[f64], output: &mut [f64]) {
    let n = input.len();
    let nf = n as f64;
    for (i, out) in output.iter_mut().enumerate().take(n) {
        let mut sum = 0.0;
        for (k, &v) in input.iter().enumerate() {
            let alpha = if k == 0 {
                (1.0 / nf).sqrt()
            } else {
                (2.0 / nf).sqrt()
            };
            sum += alpha
                * v
                * (std::f64::consts::PI * (2.0 * i as f64 + 1.0) * k as f64 / (2.0 * nf)).cos();
        }
        *out = sum;
    }
}

fn dct2_inplace(tile: &mut [f64], ny: usize, nx: usize) {
    let mut buf = vec![0.0f64; ny.max(nx)];
    for y in 0..ny {
        dct_1d(&tile[y * nx..y * nx + nx].to_vec(), &mut buf[..nx]);
        tile[y * nx..y * nx + nx].copy_from_slice(&buf[..nx]);
    }
    let mut col = vec![0.0f64; ny];
    for x in 0..nx {
        for y in 0..ny {
            col[y] = tile[y * nx + x];
        }
        dct_1d(&col, &mut buf[..ny]);
        for y in 0..ny {
            tile[y * nx + x] = buf[y];
        }
    }
}

fn idct2_inplace(tile: &mut [f64], ny: usize, nx: usize) {
    let mut buf = vec![0.0f64; ny.max(nx)];
    let mut col = vec![0.0f64; ny];
    for x in 0..nx {
        for y in 0..ny {
            col[y] = tile[y * nx + x];
        }
        idct_1d(&col, &mut buf[..ny]);
        for y in 0..ny {
            tile[y * nx + x] = buf[y];
        }
    }
    for y in 0..ny {
        idct_1d(&tile[y * nx..y * nx + nx].to_vec(), &mut buf[..nx]);
        tile[y * nx..y * nx + nx].copy_from_slice(&buf[..nx]);
    }
}

// --- composition ----------------------------------------------------------

/// Apply one recorded entry. For rain, `streaks`/`drops` select which
/// components to render; other kinds ignore the flags.
pub(crate) fn apply_entry_masked(
    img: &ImageGrid,
    entry: &StackEntry,
    streaks: bool,
    drops: bool,
) -> ImageGrid {
    match &entry.params {
        DegradationParams::Night(p) => night_raw(img, p, entry.seed),
        DegradationParams::Fog(p) => {
            let depth = synth_depth(
                img.height(),
                img.width(),
                p.depth_mode,
                entry.seed.substream(STREAM_DEPTH),
            );
            fog_raw(img, &depth, p, entry.seed)
        }
        DegradationParams::Rain(p) => rain_raw(img, p, entry.seed, streaks, drops),
        DegradationParams::Snow(p) => snow_raw(img, p, entry.seed),
        DegradationParams::Noise(p) => noise_raw(img, p, entry.seed),
        DegradationParams::Blur(p) => img.box_blur(p.kernel_radius as usize),
        DegradationParams::JpegProxy(p) => jpeg_raw(img, p),
    }
}

/// Apply one validated entry in full.
pub fn apply_entry(img: &ImageGrid, entry: &StackEntry) -> Result<ImageGrid> {
    entry.params.validate()?;
    Ok(apply_entry_masked(img, entry, true, true))
}

/// Sequentially apply a stack in entry order. Bit-exact replayable.
pub fn compose(img: &ImageGrid, stack: &DegradationStack) -> Result<ImageGrid> {
    let mut out = img.clone();
    for entry in &stack.entries {
        out = apply_entry(&out, entry)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{residual_rmse, stats};

    fn seed(n: u64) -> SeedSpec {
        SeedSpec::new(1234, n)
    }

    fn test_image() -> ImageGrid {
        ImageGrid::from_fn(24, 24, 3, |y, x, c| {
            0.2 + 0.5 * (y as f64 / 23.0) + 0.1 * ((x + c) % 5) as f64 / 4.0
        })
        .unwrap()
    }

    #[test]
    fn night_identity_configuration() {
        let img = test_image();
        let p = NightParams {
            attenuation: 1.0, // out of range on purpose: raw path only
            shot_noise_gain: 0.0,
            read_noise_sigma: 0.0,
            flare_count: 0,
        };
        let out = night_raw(&img, &p, seed(0));
        assert!(residual_rmse(&img, &out).unwrap() < 1e-6);
    }

    #[test]
    fn night_full_attenuation_is_black() {
        let img = test_image();
        let p = NightParams {
            attenuation: 0.0,
            shot_noise_gain: 0.0,
            read_noise_sigma: 0.0,
            flare_count: 0,
        };
        let out = night_raw(&img, &p, seed(0));
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn night_deterministic() {
        let img = test_image();
        let p = NightParams {
            attenuation: 0.2,
            shot_noise_gain: 0.05,
            read_noise_sigma: 0.02,
            flare_count: 2,
        };
        let a = apply_night(&img, &p, seed(5)).unwrap();
        let b = apply_night(&img, &p, seed(5)).unwrap();
        assert_eq!(a, b);
        let c = apply_night(&img, &p, seed(6)).unwrap();
        assert!(residual_rmse(&a, &c).unwrap() > 0.0);
    }

    #[test]
    fn night_rejects_out_of_range() {
        let img = test_image();
        let p = NightParams {
            attenuation: 0.7,
            shot_noise_gain: 0.0,
            read_noise_sigma: 0.0,
            flare_count: 0,
        };
        assert!(apply_night(&img, &p, seed(0)).is_err());
    }

    #[test]
    fn fog_unit_transmission_is_identity() {
        let img = test_image();
        let depth = synth_depth(24, 24, DepthMode::Ramp, seed(1));
        let p = FogParams {
            beta: 0.0, // degenerate, raw path
            gamma: 1.0,
            noise_sigma: 0.0,
            ..FogParams::defaults(0.3, 0.85, 1.5)
        };
        let out = fog_raw(&img, &depth, &p, seed(2));
        assert!(residual_rmse(&img, &out).unwrap() < 1e-7);
    }

    #[test]
    fn fog_saturates_to_airlight() {
        let img = test_image();
        let deep = DepthMap {
            height: 24,
            width: 24,
            values: vec![1.0; 24 * 24],
        };
        let p = FogParams {
            beta: 20.0, // test-only
            gamma: 1.0,
            noise_sigma: 0.0,
            airlight_delta: 0.01,
            ..FogParams::defaults(0.3, 0.85, 1.5)
        };
        let out = fog_raw(&img, &deep, &p, seed(2));
        for v in out.data() {
            assert!((f64::from(*v) - 0.86).abs() < 1e-6, "value {v}");
        }
    }

    #[test]
    fn fog_dark_channel_monotone_in_beta() {
        let img = test_image();
        let depth = synth_depth(24, 24, DepthMode::Ramp, seed(1));
        let lo = apply_fog(&img, &depth, &FogParams::defaults(0.3, 0.9, 1.5), seed(3)).unwrap();
        let hi = apply_fog(&img, &depth, &FogParams::defaults(1.5, 0.9, 1.5), seed(3)).unwrap();
        assert!(
            stats::dark_channel_mean(&hi) > stats::dark_channel_mean(&lo),
            "{} vs {}",
            stats::dark_channel_mean(&hi),
            stats::dark_channel_mean(&lo)
        );
    }

    #[test]
    fn fog_shape_mismatch_rejected() {
        let img = test_image();
        let depth = synth_depth(10, 10, DepthMode::Ramp, seed(1));
        assert!(apply_fog(&img, &depth, &FogParams::defaults(0.5, 0.8, 1.5), seed(0)).is_err());
    }

    #[test]
    fn rain_zero_params_identity() {
        let img = test_image();
        let p = RainParams {
            streak_density: 0.0,
            streak_angle_deg: 0.0,
            drop_count: 0,
            drop_radius: 3,
        };
        let out = apply_rain(&img, &p, seed(4)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn rain_streaks_raise_streak_energy() {
        let img = ImageGrid::filled(32, 32, 3, 0.4).unwrap();
        let mk = |density| RainParams {
            streak_density: density,
            streak_angle_deg: 10.0,
            drop_count: 0,
            drop_radius: 3,
        };
        let none = stats::streak_energy(&apply_rain(&img, &mk(0.0), seed(7)).unwrap());
        let some = stats::streak_energy(&apply_rain(&img, &mk(0.5), seed(7)).unwrap());
        assert!(some > none, "{some} vs {none}");
    }

    #[test]
    fn rain_deterministic_and_components_split() {
        let img = test_image();
        let p = RainParams {
            streak_density: 0.5,
            streak_angle_deg: -12.0,
            drop_count: 10,
            drop_radius: 4,
        };
        let a = apply_rain(&img, &p, seed(9)).unwrap();
        let b = apply_rain(&img, &p, seed(9)).unwrap();
        assert_eq!(a, b);
        // streak-only then drops-only over it reproduces the full render
        let streaks_only = rain_raw(&img, &p, seed(9), true, false);
        let full = rain_raw(&streaks_only, &p, seed(9), false, true);
        assert_eq!(a, full);
    }

    #[test]
    fn snow_identity_and_monotone_luminance() {
        let img = ImageGrid::filled(32, 32, 3, 0.5).unwrap();
        let mk = |density| SnowParams {
            flake_density: density,
            flake_radius: 2,
        };
        let zero = apply_snow(&img, &mk(0.0), seed(11)).unwrap();
        assert_eq!(zero, img);
        let lo = stats::mean_luminance(&apply_snow(&img, &mk(0.2), seed(11)).unwrap());
        let hi = stats::mean_luminance(&apply_snow(&img, &mk(0.8), seed(11)).unwrap());
        assert!(hi > lo && lo > 0.5, "lo {lo} hi {hi}");
    }

    #[test]
    fn noise_zero_sigma_identity() {
        let img = test_image();
        let out = apply_noise(&img, &NoiseParams { sigma: 0.0 }, seed(13)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn jpeg_tiny_step_near_identity() {
        let img = test_image();
        let p = JpegParams {
            block: 8,
            quant_step: 1e-9, // degenerate, raw path
        };
        let out = jpeg_raw(&img, &p);
        assert!(residual_rmse(&img, &out).unwrap() < 1e-6);
    }

    #[test]
    fn jpeg_constant_image_error_bounded() {
        // Only the DC coefficient is nonzero; quantizing it moves each pixel
        // by at most quant_step / 2.
        let img = ImageGrid::filled(16, 16, 1, 0.437).unwrap();
        let p = JpegParams {
            block: 8,
            quant_step: 0.25,
        };
        let out = apply_jpeg_proxy(&img, &p, seed(0)).unwrap();
        for v in out.data() {
            assert!((f64::from(*v) - 0.437).abs() <= 0.125 + 1e-9);
        }
        // and the output is still constant per tile
        assert!(stats::luminance_std(&out) < 0.125);
    }

    #[test]
    fn jpeg_roundtrip_of_dct_is_exact_without_quantization() {
        let mut tile: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let orig = tile.clone();
        dct2_inplace(&mut tile, 8, 8);
        idct2_inplace(&mut tile, 8, 8);
        for (a, b) in tile.iter().zip(orig.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn compose_is_order_sensitive() {
        let img = test_image();
        let noise = StackEntry::new(
            DegradationParams::Noise(NoiseParams { sigma: 0.05 }),
            seed(21),
        );
        let fog = StackEntry::new(
            DegradationParams::Fog(FogParams::defaults(1.0, 0.9, 1.5)),
            seed(22),
        );
        let nf = compose(
            &img,
            &DegradationStack::new(vec![noise.clone(), fog.clone()], "a").unwrap(),
        )
        .unwrap();
        let fn_ = compose(&img, &DegradationStack::new(vec![fog, noise], "b").unwrap()).unwrap();
        let d = residual_rmse(&nf, &fn_).unwrap();
        assert!(d > 0.005, "orderings too close: {d}");
    }

    #[test]
    fn compose_replay_is_bit_exact() {
        let img = test_image();
        let stack = DegradationStack::new(
            vec![
                StackEntry::new(
                    DegradationParams::Night(NightParams {
                        attenuation: 0.25,
                        shot_noise_gain: 0.03,
                        read_noise_sigma: 0.01,
                        flare_count: 1,
                    }),
                    seed(31),
                ),
                StackEntry::new(DegradationParams::Noise(NoiseParams { sigma: 0.04 }), seed(32)),
                StackEntry::new(DegradationParams::Blur(BlurParams { kernel_radius: 1 }), seed(33)),
            ],
            "replay",
        )
        .unwrap();
        assert_eq!(compose(&img, &stack).unwrap(), compose(&img, &stack).unwrap());
    }

    #[test]
    fn stack_length_validated() {
        let e = StackEntry::new(DegradationParams::Noise(NoiseParams { sigma: 0.05 }), seed(0));
        assert!(DegradationStack::new(vec![], "x").is_err());
        assert!(DegradationStack::new(vec![e.clone(); 5], "x").is_err());
        assert!(DegradationStack::new(vec![e; 4], "x").is_ok());
    }

    #[test]
    fn depth_ramp_rows() {
        let d = synth_depth(3, 4, DepthMode::Ramp, seed(0));
        assert_eq!(d.get(0, 0), 0.0);
        assert_eq!(d.get(1, 2), 0.5);
        assert_eq!(d.get(2, 3), 1.0);
    }

    #[test]
    fn depth_radial_center_zero() {
        let d = radial_depth(9, 9, 4.0, 4.0);
        assert_eq!(d.get(4, 4), 0.0);
        assert!(d.get(0, 0) > 0.9);
    }

    #[test]
    fn depth_values_in_range() {
        for mode in [DepthMode::Ramp, DepthMode::Radial] {
            let d = synth_depth(15, 11, mode, seed(77));
            for y in 0..15 {
                for x in 0..11 {
                    assert!((0.0..=1.0).contains(&d.get(y, x)));
                }
            }
        }
    }

    #[test]
    fn entry_serialization_is_tagged_by_name() {
        let e = StackEntry::new(
            DegradationParams::Fog(FogParams::defaults(0.8, 0.9, 2.0)),
            seed(41),
        );
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.contains("\"kind\":\"fog\""), "{json}");
        let back: StackEntry = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn kind_codes_stable() {
        for (i, k) in DegradationKind::ALL.iter().enumerate() {
            assert_eq!(k.code() as usize, i);
            assert_eq!(DegradationKind::from_code(k.code()), Some(*k));
        }
    }
}
