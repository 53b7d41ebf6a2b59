//! Taxel extraction from tactile camera frames.
//!
//! A frame is a square RGB image. It is divided into a 5×5 grid of equal
//! cells and each taxel is the mean of one colour channel over a square ROI
//! centred in its cell, normalised by 255.
//!
//! Byte layouts accepted on ingest:
//!
//! * raw RGB24: `width * height * 3` bytes, row-major, top-left origin,
//!   channel order R, G, B, no header or padding;
//! * binary PPM (`P6`) with `maxval` 255 and the same pixel layout as RGB24
//!   after the header. `#` comments are allowed in the header.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Red,
    #[default]
    Green,
    Blue,
}

impl Channel {
    fn index(self) -> usize {
        match self {
            Channel::Red => 0,
            Channel::Green => 1,
            Channel::Blue => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TactileFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub pixels: Vec<[u8; 3]>,
}

impl TactileFrame {
    pub fn black(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![[0; 3]; width * height],
        }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8; 3] {
        &mut self.pixels[y * self.width + x]
    }

    pub fn from_rgb24(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::Parse(format!(
                "RGB24 buffer has {} bytes, expected {}",
                bytes.len(),
                width * height * 3
            )));
        }
        let pixels = bytes.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn to_rgb24(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }

    pub fn write_ppm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.to_rgb24())?;
        Ok(())
    }

    pub fn read_ppm<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let mut pos = 0usize;
        let magic = ppm_token(&buf, &mut pos)?;
        if magic != "P6" {
            return Err(Error::Parse(format!("expected P6 magic, found {magic:?}")));
        }
        let width = ppm_number(&buf, &mut pos)?;
        let height = ppm_number(&buf, &mut pos)?;
        let maxval = ppm_number(&buf, &mut pos)?;
        if maxval != 255 {
            return Err(Error::Parse(format!("unsupported PPM maxval {maxval}")));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let end = pos + width * height * 3;
        if buf.len() < end {
            return Err(Error::Parse("truncated PPM raster".into()));
        }
        Self::from_rgb24(width, height, &buf[pos..end])
    }
}

fn ppm_token(buf: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < buf.len() && buf[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < buf.len() && buf[*pos] == b'#' {
            while *pos < buf.len() && buf[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < buf.len() && !buf[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Parse("truncated PPM header".into()));
    }
    Ok(String::from_utf8_lossy(&buf[start..*pos]).into_owned())
}

fn ppm_number(buf: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = ppm_token(buf, pos)?;
    tok.parse()
        .map_err(|_| Error::Parse(format!("bad PPM header field {tok:?}")))
}

/// Fixed-grid taxel layout.
///
/// The grid is always 5×5; `image_side` is split into equal cells of
/// `image_side / 5` pixels and each ROI is `roi_side` pixels square, centred
/// in its cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxelGridConfig {
    pub image_side: usize,
    pub roi_side: usize,
    #[serde(default)]
    pub channel: Channel,
}

impl Default for TaxelGridConfig {
    fn default() -> Self {
        Self {
            image_side: 400,
            roi_side: 50,
            channel: Channel::Green,
        }
    }
}

impl TaxelGridConfig {
    pub fn cell(&self) -> usize {
        self.image_side / GRID
    }

    pub fn validate(&self) -> Result<()> {
        if self.roi_side == 0 {
            return Err(Error::Config("roi_side must be positive".into()));
        }
        if self.roi_side > self.cell() {
            return Err(Error::Config(format!(
                "roi_side {} exceeds cell size {}",
                self.roi_side,
                self.cell()
            )));
        }
        Ok(())
    }

    /// Top-left pixel of the ROI for taxel (row, col), zero-based.
    pub fn roi_origin(&self, row: usize, col: usize) -> (usize, usize) {
        let cell = self.cell();
        let inset = (cell - self.roi_side) / 2;
        (col * cell + inset, row * cell + inset)
    }
}

/// Normalised intensities `o[i][j]` for one frame, row `i`, column `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxelMatrix {
    pub values: [[f64; GRID]; GRID],
    pub frame_index: usize,
}

impl TaxelMatrix {
    pub fn zeros(frame_index: usize) -> Self {
        Self {
            values: [[0.0; GRID]; GRID],
            frame_index,
        }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().flatten().sum()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.frame_index);
        for i in 0..GRID {
            for j in 0..GRID {
                out.values[j][i] = self.values[i][j];
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.values
            .iter()
            .flatten()
            .all(|v| (0.0..=1.0).contains(v))
    }
}

pub fn extract_taxels(frame: &TactileFrame, cfg: &TaxelGridConfig) -> Result<TaxelMatrix> {
    extract_taxels_at(frame, cfg, 0)
}

/// As [`extract_taxels`], stamping the result with `frame_index`.
pub fn extract_taxels_at(
    frame: &TactileFrame,
    cfg: &TaxelGridConfig,
    frame_index: usize,
) -> Result<TaxelMatrix> {
    cfg.validate()?;
    if frame.width != cfg.image_side || frame.height != cfg.image_side {
        return Err(Error::FrameSize {
            got_w: frame.width,
            got_h: frame.height,
            want: cfg.image_side,
        });
    }
    let ch = cfg.channel.index();
    let denom = (cfg.roi_side * cfg.roi_side) as f64 * 255.0;
    let mut out = TaxelMatrix::zeros(frame_index);
    for i in 0..GRID {
        for j in 0..GRID {
            let (x0, y0) = cfg.roi_origin(i, j);
            let mut acc: u64 = 0;
            for y in y0..y0 + cfg.roi_side {
                let row = &frame.pixels[y * frame.width + x0..y * frame.width + x0 + cfg.roi_side];
                acc += row.iter().map(|p| p[ch] as u64).sum::<u64>();
            }
            out.values[i][j] = acc as f64 / denom;
        }
    }
    Ok(out)
}

/// Paint each ROI with `round(255 * o)` in the configured channel; everything
/// else stays black.
pub fn render_frame(taxels: &TaxelMatrix, cfg: &TaxelGridConfig) -> Result<TactileFrame> {
    cfg.validate()?;
    let ch = cfg.channel.index();
    let mut frame = TactileFrame::black(cfg.image_side, cfg.image_side);
    for i in 0..GRID {
        for j in 0..GRID {
            let level = (taxels.values[i][j].clamp(0.0, 1.0) * 255.0).round() as u8;
            if level == 0 {
                continue;
            }
            let (x0, y0) = cfg.roi_origin(i, j);
            for y in y0..y0 + cfg.roi_side {
                for x in x0..x0 + cfg.roi_side {
                    frame.pixel_mut(x, y)[ch] = level;
                }
            }
        }
    }
    Ok(frame)
}

/// CSV with header `frame_index,o11,o12,...,o55` (row then column, 1-based).
pub fn write_taxels_csv<W: Write>(w: W, stream: &[TaxelMatrix]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["frame_index".to_string()];
    for i in 1..=GRID {
        for j in 1..=GRID {
            header.push(format!("o{i}{j}"));
        }
    }
    wr.write_record(&header)?;
    for o in stream {
        let mut rec = vec![o.frame_index.to_string()];
        rec.extend(o.values.iter().flatten().map(|v| v.to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_taxels_csv<R: Read>(r: R) -> Result<Vec<TaxelMatrix>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != GRID * GRID + 1 {
            return Err(Error::Parse(format!(
                "taxel row has {} fields, expected {}",
                rec.len(),
                GRID * GRID + 1
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad taxel value {s:?}")))
        };
        let mut o = TaxelMatrix::zeros(
            rec[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad frame index {:?}", &rec[0])))?,
        );
        for i in 0..GRID {
            for j in 0..GRID {
                o.values[i][j] = parse(&rec[1 + i * GRID + j])?;
            }
        }
        if !o.is_valid() {
            return Err(Error::Parse(format!(
                "taxel values outside [0, 1] at frame {}",
                o.frame_index
            )));
        }
        out.push(o);
    }
    Ok(out)
}
