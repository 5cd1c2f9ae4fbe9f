//! Synthetic camera: binary frames of the string, dilation score fields and
//! tip localization.

use std::collections::VecDeque;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::string_model::StringState;

/// Integer pixel coordinate; `y` grows downwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub x: i64,
    pub y: i64,
}

impl Pixel {
    pub const fn new(x: i64, y: i64) -> Self {
        Pixel { x, y }
    }

    pub fn chessboard(self, o: Pixel) -> i64 {
        (self.x - o.x).abs().max((self.y - o.y).abs())
    }
}

/// 8-neighbourhood in the fixed order N, NE, E, SE, S, SW, W, NW.
pub const NEIGHBORS: [(i64, i64); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraModel {
    pub pixels_per_meter: f64,
    #[serde(rename = "image_width_px")]
    pub width: usize,
    #[serde(rename = "image_height_px")]
    pub height: usize,
    /// Pixel where world (0, 0) lands.
    #[serde(rename = "world_origin_px")]
    pub origin: [f64; 2],
    #[serde(rename = "stroke_thickness_px")]
    pub stroke_thickness: u32,
    #[serde(rename = "sampling_period_s")]
    pub sampling_period: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            pixels_per_meter: 300.0,
            width: 600,
            height: 600,
            origin: [300.0, 420.0],
            stroke_thickness: 3,
            sampling_period: 0.04,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.pixels_per_meter.is_finite() && self.pixels_per_meter > 0.0) {
            return Err(Error::config("camera scale must be positive"));
        }
        if self.width < 16 || self.height < 16 {
            return Err(Error::config("camera image must be at least 16x16 pixels"));
        }
        if self.stroke_thickness == 0 {
            return Err(Error::config("stroke thickness must be at least one pixel"));
        }
        if !(self.sampling_period.is_finite() && self.sampling_period > 0.0) {
            return Err(Error::config("frame sampling period must be positive"));
        }
        if !(self.origin[0].is_finite() && self.origin[1].is_finite()) {
            return Err(Error::config("camera origin must be finite"));
        }
        Ok(())
    }

    /// Continuous image coordinates of a world point.
    pub fn to_image(&self, p: Vec2) -> (f64, f64) {
        (
            self.origin[0] + p.x * self.pixels_per_meter,
            self.origin[1] - p.y * self.pixels_per_meter,
        )
    }

    pub fn project(&self, p: Vec2) -> Pixel {
        let (x, y) = self.to_image(p);
        // Saturating casts keep far-off points far off.
        Pixel::new(x.round() as i64, y.round() as i64)
    }

    /// World coordinates of a pixel centre.
    pub fn to_world(&self, px: Pixel) -> Vec2 {
        Vec2::new(
            (px.x as f64 - self.origin[0]) / self.pixels_per_meter,
            (self.origin[1] - px.y as f64) / self.pixels_per_meter,
        )
    }

    pub fn contains(&self, px: Pixel) -> bool {
        px.x >= 0 && px.y >= 0 && (px.x as usize) < self.width && (px.y as usize) < self.height
    }
}

/// Binary image of the string at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryFrame {
    pub timestamp: f64,
    pub width: usize,
    pub height: usize,
    pub bits: Vec<u8>,
    pub grasp_pixel: Pixel,
}

impl BinaryFrame {
    pub fn new(width: usize, height: usize, timestamp: f64, grasp_pixel: Pixel) -> Self {
        BinaryFrame {
            timestamp,
            width,
            height,
            bits: vec![0; width * height],
            grasp_pixel,
        }
    }

    pub fn in_bounds(&self, px: Pixel) -> bool {
        px.x >= 0 && px.y >= 0 && (px.x as usize) < self.width && (px.y as usize) < self.height
    }

    pub fn get(&self, px: Pixel) -> bool {
        self.in_bounds(px) && self.bits[px.y as usize * self.width + px.x as usize] != 0
    }

    pub fn set(&mut self, px: Pixel) {
        if self.in_bounds(px) {
            self.bits[px.y as usize * self.width + px.x as usize] = 1;
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }
}

/// Clips the segment `a`-`b` to the box `[lo, hi]^2` (Liang-Barsky).
fn clip_segment(a: (f64, f64), b: (f64, f64), lo: (f64, f64), hi: (f64, f64)) -> Option<((f64, f64), (f64, f64))> {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (p, q) in [(-dx, a.0 - lo.0), (dx, hi.0 - a.0), (-dy, a.1 - lo.1), (dy, hi.1 - a.1)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then_some(((a.0 + t0 * dx, a.1 + t0 * dy), (a.0 + t1 * dx, a.1 + t1 * dy)))
}

/// Integer line stepping between two pixels, endpoints included.
fn bresenham(a: Pixel, b: Pixel, mut plot: impl FnMut(Pixel)) {
    let dx = (b.x - a.x).abs();
    let dy = -(b.y - a.y).abs();
    let sx = if a.x < b.x { 1 } else { -1 };
    let sy = if a.y < b.y { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (a.x, a.y);
    loop {
        plot(Pixel::new(x, y));
        if x == b.x && y == b.y {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Pixel offsets of a filled disc of the given diameter.
fn brush(thickness: u32) -> Vec<(i64, i64)> {
    let r = thickness as f64 / 2.0;
    let reach = r.floor() as i64;
    let mut out = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if ((dx * dx + dy * dy) as f64) <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Draws the polyline through the mass points.
pub fn rasterize(points: &[Vec2], camera: &CameraModel, timestamp: f64) -> Result<BinaryFrame> {
    let first = points.first().ok_or(Error::Empty("string points"))?;
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidState("non-finite point in rasterization".into()));
    }
    let grasp = camera.project(*first);
    if !camera.contains(grasp) {
        return Err(Error::FrameOutOfView { x: grasp.x, y: grasp.y });
    }
    let mut frame = BinaryFrame::new(camera.width, camera.height, timestamp, grasp);
    let offsets = brush(camera.stroke_thickness);
    let pad = camera.stroke_thickness as f64 + 1.0;
    let lo = (-pad, -pad);
    let hi = (camera.width as f64 - 1.0 + pad, camera.height as f64 - 1.0 + pad);
    let mut stamp = |px: Pixel| {
        for (dx, dy) in &offsets {
            frame.set(Pixel::new(px.x + dx, px.y + dy));
        }
    };
    stamp(grasp);
    for pair in points.windows(2) {
        let a = camera.to_image(pair[0]);
        let b = camera.to_image(pair[1]);
        let Some((ca, cb)) = clip_segment(a, b, lo, hi) else {
            continue;
        };
        // Unclipped endpoints use the same rounding as `project`.
        let pa = if ca == a {
            camera.project(pair[0])
        } else {
            Pixel::new(ca.0.round() as i64, ca.1.round() as i64)
        };
        let pb = if cb == b {
            camera.project(pair[1])
        } else {
            Pixel::new(cb.0.round() as i64, cb.1.round() as i64)
        };
        bresenham(pa, pb, &mut stamp);
    }
    Ok(frame)
}

/// Ring-weighted dilation of a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreField {
    pub width: usize,
    pub height: usize,
    pub p_max: u32,
    pub scores: Vec<u8>,
}

impl ScoreField {
    pub fn get(&self, px: Pixel) -> u32 {
        if px.x < 0 || px.y < 0 || px.x as usize >= self.width || px.y as usize >= self.height {
            0
        } else {
            self.scores[px.y as usize * self.width + px.x as usize] as u32
        }
    }
}

/// Repeated 8-neighbourhood dilation: set pixels score `p_max`, pixels
/// first reached in dilation round `d` score `p_max - d`, the rest 0.
pub fn build_score_field(frame: &BinaryFrame, p_max: u32) -> ScoreField {
    assert!((1..=255).contains(&p_max), "p_max must be in 1..=255");
    let (w, h) = (frame.width, frame.height);
    let mut scores = vec![0u8; w * h];
    let mut frontier: Vec<usize> = Vec::new();
    for (i, &b) in frame.bits.iter().enumerate() {
        if b != 0 {
            scores[i] = p_max as u8;
            frontier.push(i);
        }
    }
    let mut next = Vec::new();
    for round in 1..p_max {
        let score = (p_max - round) as u8;
        for &i in &frontier {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in NEIGHBORS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if scores[j] == 0 {
                    scores[j] = score;
                    next.push(j);
                }
            }
        }
        std::mem::swap(&mut frontier, &mut next);
        next.clear();
        if frontier.is_empty() {
            break;
        }
    }
    ScoreField {
        width: w,
        height: h,
        p_max,
        scores,
    }
}

/// Far end of the string component containing the grasp pixel.
///
/// Explores the 8-connected component from the grasp pixel and returns the
/// pixel with the greatest hop distance from it; among equally distant
/// pixels the one reached last wins. Neighbours are visited in the fixed
/// order N, NE, E, SE, S, SW, W, NW.
pub fn locate_tip(frame: &BinaryFrame) -> Result<Pixel> {
    let start = frame.grasp_pixel;
    if !frame.get(start) {
        return Err(Error::TipNotFound { x: start.x, y: start.y });
    }
    let w = frame.width;
    let mut seen = vec![false; frame.bits.len()];
    seen[start.y as usize * w + start.x as usize] = true;
    let mut queue = VecDeque::from([(start, 0u32)]);
    let mut best = (start, 0u32);
    while let Some((px, depth)) = queue.pop_front() {
        if depth >= best.1 {
            best = (px, depth);
        }
        for (dx, dy) in NEIGHBORS {
            let n = Pixel::new(px.x + dx, px.y + dy);
            if frame.get(n) {
                let idx = n.y as usize * w + n.x as usize;
                if !seen[idx] {
                    seen[idx] = true;
                    queue.push_back((n, depth + 1));
                }
            }
        }
    }
    Ok(best.0)
}

/// Time-ordered frames on a uniform sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSeries {
    pub frames: Vec<BinaryFrame>,
    pub sampling_period: f64,
}

impl FrameSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Number of frames covering `[0, window]` at `period`.
pub fn frame_count(window: f64, period: f64) -> usize {
    (window / period + 1e-9).floor() as usize + 1
}

/// Index of the state nearest to `t`, if within `tolerance`.
pub fn nearest_state(states: &[StringState], t: f64, tolerance: f64) -> Option<usize> {
    if states.is_empty() {
        return None;
    }
    let idx = states.partition_point(|s| s.time < t);
    let mut best: Option<(usize, f64)> = None;
    for i in [idx.saturating_sub(1), idx.min(states.len() - 1)] {
        let d = (states[i].time - t).abs();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.filter(|&(_, d)| d <= tolerance).map(|(i, _)| i)
}

/// Rasterizes the states at every `sampling_period` from t = 0 to the last
/// state.
pub fn capture_series(states: &[StringState], camera: &CameraModel, sampling_period: f64) -> Result<FrameSeries> {
    let last = states.last().ok_or(Error::Empty("string states"))?;
    let spacing = match states {
        [a, b, ..] => b.time - a.time,
        _ => sampling_period,
    };
    let count = frame_count(last.time, sampling_period);
    let mut frames = Vec::with_capacity(count);
    for f in 0..count {
        let t = f as f64 * sampling_period;
        let i = nearest_state(states, t, spacing / 2.0 + 1e-9).ok_or(Error::Alignment {
            time: t,
            tolerance: spacing / 2.0,
        })?;
        frames.push(rasterize(&states[i].positions, camera, t)?);
    }
    Ok(FrameSeries {
        frames,
        sampling_period,
    })
}

/// Binary PGM (P5, maxval 255; 0 background, 255 string).
pub fn encode_pgm(frame: &BinaryFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend(frame.bits.iter().map(|&b| if b != 0 { 255u8 } else { 0 }));
    out
}

pub fn decode_pgm(bytes: &[u8], timestamp: f64, grasp_pixel: Pixel) -> Result<BinaryFrame> {
    let bad = |m: &str| Error::Parse {
        what: "PGM".into(),
        message: m.into(),
    };
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("not a binary graymap (P5)"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit graymaps are supported"));
    }
    pos += 1;
    let data = bytes
        .get(pos..pos + width * height)
        .ok_or_else(|| bad("truncated pixel data"))?;
    let mut frame = BinaryFrame::new(width, height, timestamp, grasp_pixel);
    for (dst, &src) in frame.bits.iter_mut().zip(data) {
        *dst = u8::from(src as usize * 2 > maxval);
    }
    Ok(frame)
}

/// Writes `frame_NNNN.pgm` files plus `frames.idx` into `dir`.
pub fn write_series(series: &FrameSeries, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut index = Vec::new();
    for (i, frame) in series.frames.iter().enumerate() {
        fs::write(dir.join(frame_file_name(i)), encode_pgm(frame))?;
        writeln!(
            index,
            "{} {} {} {}",
            i,
            fmt_time(frame.timestamp),
            frame.grasp_pixel.x,
            frame.grasp_pixel.y
        )?;
    }
    fs::write(dir.join("frames.idx"), index)?;
    Ok(())
}

pub fn frame_file_name(i: usize) -> String {
    format!("frame_{i:04}.pgm")
}

fn fmt_time(t: f64) -> String {
    // Grid times print without representation noise.
    let rounded = (t * 1e9).round() / 1e9;
    format!("{rounded}")
}

/// Reads a series written by [`write_series`].
pub fn read_series(dir: &Path) -> Result<FrameSeries> {
    let index = fs::read_to_string(dir.join("frames.idx"))?;
    let mut frames = Vec::new();
    for (lineno, line) in index.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| Error::Parse {
            what: "frames.idx".into(),
            message: format!("line {}: {m}", lineno + 1),
        };
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(bad("expected `<frame> <t> <gx> <gy>`"));
        }
        let number: usize = cols[0].parse().map_err(|_| bad("bad frame number"))?;
        let t: f64 = cols[1].parse().map_err(|_| bad("bad timestamp"))?;
        let gx: i64 = cols[2].parse().map_err(|_| bad("bad grasp x"))?;
        let gy: i64 = cols[3].parse().map_err(|_| bad("bad grasp y"))?;
        let bytes = fs::read(dir.join(frame_file_name(number)))?;
        frames.push(decode_pgm(&bytes, t, Pixel::new(gx, gy))?);
    }
    if frames.is_empty() {
        return Err(Error::Empty("frame series"));
    }
    let sampling_period = match frames.as_slice() {
        [a, b, ..] => b.timestamp - a.timestamp,
        _ => 0.0,
    };
    Ok(FrameSeries {
        frames,
        sampling_period,
    })
}
