//! Lumped simulator of the whisker array sliding over a textured specimen.
//!
//! Each whisker is a cantilever whose base strain is a contact preload plus a
//! term proportional to the surface slope under its tip (averaged over the
//! tip width). Light is emitted in proportion to the positive part of the
//! strain change, integrated over the camera exposure, then smeared by an
//! exponential afterglow. The array moves in a straight line, so whiskers at
//! the same position along the slide axis see identical strain histories.
//!
//! Frame layout of one slide: `lead_in_frames` dark frames, then the
//! `ceil(path / speed * fps)` frames during which the array moves, then
//! `lead_out_frames` frames while the afterglow decays.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::taxel::{render_frame, TactileFrame, TaxelGridConfig, TaxelMatrix};
use crate::{seed, Error, Result, GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    /// Flat.
    Fla,
    /// Absolute sinc lobes.
    Sin,
    /// Sawtooth.
    Saw,
    /// Triangle.
    Tri,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [Pattern::Fla, Pattern::Sin, Pattern::Saw, Pattern::Tri];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Fla => "fla",
            Pattern::Sin => "sin",
            Pattern::Saw => "saw",
            Pattern::Tri => "tri",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fla" | "flat" => Ok(Pattern::Fla),
            "sin" | "sinc" | "abs-sinc" => Ok(Pattern::Sin),
            "saw" | "sawtooth" => Ok(Pattern::Saw),
            "tri" | "triangle" => Ok(Pattern::Tri),
            _ => Err(Error::Config(format!("unknown pattern {s:?}"))),
        }
    }
}

pub const DEPTHS_MM: [u8; 4] = [0, 2, 3, 4];

/// Specimen surface: a pattern and a depth. Non-flat textures have a period
/// of twice their depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextureSpec {
    pub pattern: Pattern,
    pub depth_mm: u8,
}

impl TextureSpec {
    pub fn new(pattern: Pattern, depth_mm: u8) -> Result<Self> {
        let t = Self { pattern, depth_mm };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !DEPTHS_MM.contains(&self.depth_mm) {
            return Err(Error::Config(format!(
                "depth {} mm is not one of {DEPTHS_MM:?}",
                self.depth_mm
            )));
        }
        if (self.depth_mm == 0) != (self.pattern == Pattern::Fla) {
            return Err(Error::Config(format!(
                "pattern {} cannot have depth {} mm (flat is exactly the zero-depth specimen)",
                self.pattern, self.depth_mm
            )));
        }
        Ok(())
    }

    pub fn period_mm(&self) -> f64 {
        2.0 * self.depth_mm as f64
    }

    /// The ten specimens in id order: flat, then sin/saw/tri at 2, 3, 4 mm.
    pub fn specimens() -> [TextureSpec; 10] {
        let mut out = [TextureSpec {
            pattern: Pattern::Fla,
            depth_mm: 0,
        }; 10];
        let mut n = 1;
        for pattern in [Pattern::Sin, Pattern::Saw, Pattern::Tri] {
            for depth_mm in [2, 3, 4] {
                out[n] = TextureSpec { pattern, depth_mm };
                n += 1;
            }
        }
        out
    }

    /// 1-based specimen id.
    pub fn specimen_id(&self) -> u8 {
        match self.pattern {
            Pattern::Fla => 1,
            p => 2 + 3 * (p.index() as u8 - 1) + (self.depth_mm - 2),
        }
    }

    pub fn from_specimen_id(id: u8) -> Result<Self> {
        if !(1..=10).contains(&id) {
            return Err(Error::Config(format!(
                "specimen id {id} out of range 1..=10"
            )));
        }
        Ok(Self::specimens()[id as usize - 1])
    }

    /// Surface height at `x` mm (infallible for a validated texture).
    pub fn height(&self, x: f64) -> f64 {
        if self.pattern == Pattern::Fla {
            return 0.0;
        }
        let d = self.depth_mm as f64;
        let u = x / self.period_mm();
        let frac = u - u.floor();
        match self.pattern {
            Pattern::Fla => 0.0,
            Pattern::Sin => d * sinc(2.0 * frac).abs(),
            Pattern::Saw => d * frac,
            Pattern::Tri => d * (1.0 - (2.0 * frac - 1.0).abs()),
        }
    }
}

fn sinc(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        (PI * z).sin() / (PI * z)
    }
}

/// Height of `texture` at `x` mm.
///
/// Flat is zero everywhere; sawtooth rises linearly over each period;
/// triangle peaks at mid-period; abs-sinc is `depth * |sinc(2 * frac(x / period))|`
/// with the normalised sinc, so each period opens on the main-lobe peak and
/// carries one side lobe.
pub fn height_profile(texture: &TextureSpec, x: f64) -> Result<f64> {
    texture.validate()?;
    Ok(texture.height(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideConfig {
    pub speed_mm_s: f64,
    /// 0, 90, 180 or 270.
    pub direction_deg: u16,
    pub path_mm: f64,
    pub fps: f64,
    pub seed: u64,
    /// Upper bound of the uniform per-taxel additive noise.
    pub noise_amp: f64,
    pub lead_in_frames: usize,
    pub lead_out_frames: usize,
    /// Texture offset under the array at first contact. Drawn from the seed
    /// when absent.
    #[serde(default)]
    pub phase_mm: Option<f64>,
}

impl Default for SlideConfig {
    fn default() -> Self {
        Self {
            speed_mm_s: 150.0,
            direction_deg: 0,
            path_mm: 128.0,
            fps: 30.0,
            seed: 0,
            noise_amp: 0.001,
            lead_in_frames: 30,
            lead_out_frames: 70,
            phase_mm: None,
        }
    }
}

impl SlideConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_mm_s > 0.0 && self.speed_mm_s.is_finite()) {
            return Err(Error::Config("speed must be positive".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config("fps must be positive".into()));
        }
        if !(self.path_mm >= 0.0 && self.path_mm.is_finite()) {
            return Err(Error::Config("path must be nonnegative".into()));
        }
        if !matches!(self.direction_deg, 0 | 90 | 180 | 270) {
            return Err(Error::Config(format!(
                "direction {} is not one of 0, 90, 180, 270",
                self.direction_deg
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_amp) {
            return Err(Error::Config("noise amplitude must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Frames during which the array is moving.
    pub fn active_frames(&self) -> usize {
        // nudge down so exact ratios like 128/160*30 = 24 do not round up
        ((self.path_mm / self.speed_mm_s * self.fps) - 1e-9)
            .ceil()
            .max(0.0) as usize
    }

    pub fn total_frames(&self) -> usize {
        self.lead_in_frames + self.active_frames() + self.lead_out_frames
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiskerArraySpec {
    pub pitch_mm: f64,
    pub whisker_len_mm: f64,
    pub whisker_width_mm: f64,
    /// Intensity per unit of positive strain change.
    pub gain: f64,
    /// Base strain once the tip rests on the surface.
    pub contact_strain: f64,
    pub decay_tau_frames: f64,
    /// Strain samples per camera exposure.
    pub substeps: usize,
}

impl Default for WhiskerArraySpec {
    fn default() -> Self {
        Self {
            pitch_mm: 4.0,
            whisker_len_mm: 5.0,
            whisker_width_mm: 1.0,
            gain: 0.25,
            contact_strain: 3.2,
            decay_tau_frames: 2.0,
            substeps: 32,
        }
    }
}

impl WhiskerArraySpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pitch", self.pitch_mm),
            ("whisker length", self.whisker_len_mm),
            ("whisker width", self.whisker_width_mm),
            ("gain", self.gain),
            ("contact strain", self.contact_strain),
            ("afterglow time constant", self.decay_tau_frames),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be positive".into()));
        }
        Ok(())
    }

    /// Position of whisker (row, col) along the slide axis, leading whiskers
    /// positive. 0° sweeps columns in ascending order, 180° descending,
    /// 90° sweeps rows descending and 270° ascending.
    pub fn lane_offset(&self, direction_deg: u16, row: usize, col: usize) -> f64 {
        let mid = (GRID / 2) as f64;
        let lane = match direction_deg {
            0 => mid - col as f64,
            180 => col as f64 - mid,
            90 => row as f64 - mid,
            _ => mid - row as f64,
        };
        lane * self.pitch_mm
    }
}

struct Kinematics {
    /// Array reference position at the start of motion.
    start_mm: f64,
    /// Specimen extent along the slide axis.
    length_mm: f64,
    speed_mm_s: f64,
    fps: f64,
    phase_mm: f64,
}

impl Kinematics {
    fn strain(&self, texture: &TextureSpec, array: &WhiskerArraySpec, lane: f64, t_s: f64) -> f64 {
        let x = self.start_mm + self.speed_mm_s * t_s + lane;
        if !(0.0..=self.length_mm).contains(&x) {
            return 0.0;
        }
        let half = 0.5 * array.whisker_width_mm;
        let xt = x + self.phase_mm;
        let slope =
            (texture.height(xt + half) - texture.height(xt - half)) / array.whisker_width_mm;
        array.contact_strain + array.whisker_width_mm / array.whisker_len_mm * slope
    }
}

/// Simulate one slide and return one taxel matrix per frame.
pub fn simulate_slide(
    texture: &TextureSpec,
    slide: &SlideConfig,
    array: &WhiskerArraySpec,
) -> Result<Vec<TaxelMatrix>> {
    texture.validate()?;
    slide.validate()?;
    array.validate()?;

    let mut rng = seed::rng(slide.seed);
    let phase_mm = match slide.phase_mm {
        Some(p) => p,
        None if texture.pattern == Pattern::Fla => 0.0,
        None => rng.gen::<f64>() * texture.period_mm(),
    };

    let active = slide.active_frames();
    let total = slide.total_frames();
    let half_span = (GRID / 2) as f64 * array.pitch_mm;
    let frame_mm = slide.speed_mm_s / slide.fps;
    let travel = active as f64 * frame_mm;
    // leading whisker touches down half way through the first moving frame;
    // the trailing whisker lifts off at the end of the last one
    let start_mm = -half_span - 0.5 * frame_mm;
    let kin = Kinematics {
        start_mm,
        length_mm: (start_mm + travel - half_span).max(0.0),
        speed_mm_s: slide.speed_mm_s,
        fps: slide.fps,
        phase_mm,
    };

    // emission per lane (distinct offset along the slide axis) and frame
    let lanes: Vec<f64> = (0..GRID)
        .map(|n| (n as f64 - (GRID / 2) as f64) * array.pitch_mm)
        .collect();
    let decay = (-1.0 / array.decay_tau_frames).exp();
    let dt = 1.0 / (kin.fps * array.substeps as f64);
    let mut glow = vec![vec![0.0; total]; GRID];
    for (lane_idx, &lane) in lanes.iter().enumerate() {
        let mut level = 0.0;
        let mut prev = kin.strain(texture, array, lane, 0.0);
        for (f, out) in glow[lane_idx].iter_mut().enumerate() {
            let mut emitted = 0.0;
            if f >= slide.lead_in_frames && f < slide.lead_in_frames + active {
                let a = (f - slide.lead_in_frames) as f64 / kin.fps;
                for s in 1..=array.substeps {
                    let cur = kin.strain(texture, array, lane, a + s as f64 * dt);
                    emitted += (cur - prev).max(0.0);
                    prev = cur;
                }
            }
            level = level * decay + array.gain * emitted;
            *out = level;
        }
    }

    let mut out = Vec::with_capacity(total);
    for (f, _) in glow[0].iter().enumerate() {
        let mut o = TaxelMatrix::zeros(f);
        for i in 0..GRID {
            for j in 0..GRID {
                let lane = array.lane_offset(slide.direction_deg, i, j);
                let lane_idx =
                    ((lane / array.pitch_mm).round() as isize + (GRID / 2) as isize) as usize;
                let noise = rng.gen::<f64>() * slide.noise_amp;
                o.values[i][j] = (glow[lane_idx][f] + noise).clamp(0.0, 1.0);
            }
        }
        out.push(o);
    }
    Ok(out)
}

/// Simulate a slide and render every frame as a tactile image.
pub fn simulate_frames(
    texture: &TextureSpec,
    slide: &SlideConfig,
    array: &WhiskerArraySpec,
    grid: &TaxelGridConfig,
) -> Result<Vec<TactileFrame>> {
    simulate_slide(texture, slide, array)?
        .iter()
        .map(|o| render_frame(o, grid))
        .collect()
}
