//! On-disk formats and in-memory records for embeddings, landmarks, images and
//! trial pairs.
//!
//! All text formats are line oriented. Lines starting with `#` are comments and
//! are skipped on input (they carry provenance headers written by the CLI);
//! blank lines are ignored. Floating-point values are written with the
//! shortest representation that parses back to the identical `f64`.
//!
//! ```text
//! emb-v1 dim=<D>
//! <image_id> <subject_id> <v1> ... <vD>
//!
//! lmk-v1 n=<K>
//! <image_id> <x1> <y1> ... <xK> <yK>
//!
//! <reference_id>,<probe_id>,<mated|nonmated|doppelganger>
//! ```

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &str = "emb-v1";
pub const LANDMARK_MAGIC: &str = "lmk-v1";
pub const DEFAULT_EMBEDDING_DIM: usize = 512;
pub const DEFAULT_LANDMARK_COUNT: usize = 68;

/// One face image's deep representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub image_id: String,
    pub subject_id: String,
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn new(image_id: impl Into<String>, subject_id: impl Into<String>, values: Vec<f64>) -> Self {
        Embedding {
            image_id: image_id.into(),
            subject_id: subject_id.into(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Facial landmarks of one image. Index `i` in one set corresponds to index
/// `i` in every other set.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub image_id: String,
    pub points: Vec<Point>,
}

impl LandmarkSet {
    pub fn new(image_id: impl Into<String>, points: Vec<Point>) -> Self {
        LandmarkSet {
            image_id: image_id.into(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks that every coordinate lies inside a `width` x `height` image.
    pub fn check_bounds(&self, width: u32, height: u32) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            let inside = p.x.is_finite()
                && p.y.is_finite()
                && p.x >= 0.0
                && p.y >= 0.0
                && p.x <= width as f64
                && p.y <= height as f64;
            if !inside {
                return Err(Error::Geometry(format!(
                    "landmark {i} of `{}` at ({}, {}) lies outside the {width}x{height} image",
                    self.image_id, p.x, p.y
                )));
            }
        }
        Ok(())
    }
}

/// Row-major 8-bit RGB image.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    pub const CHANNELS: usize = 3;

    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image(format!("empty image {width}x{height}")));
        }
        let expected = width as usize * height as usize * Self::CHANNELS;
        if pixels.len() != expected {
            return Err(Error::Image(format!(
                "pixel buffer holds {} bytes, {width}x{height} RGB needs {expected}",
                pixels.len()
            )));
        }
        Ok(ImageBuffer { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * Self::CHANNELS);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * Self::CHANNELS
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.pixels[o..o + 3].copy_from_slice(&rgb);
    }

    /// Reads a PNG. Non-RGB8 PNGs (gray, alpha, 16-bit) are converted to RGB8.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Self::new(w, h, rgb.into_raw())
    }

    /// Writes an RGB8 PNG, creating missing parent directories.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        image::save_buffer_with_format(
            path,
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairLabel {
    Mated,
    Nonmated,
    Doppelganger,
}

impl PairLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PairLabel::Mated => "mated",
            PairLabel::Nonmated => "nonmated",
            PairLabel::Doppelganger => "doppelganger",
        }
    }
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mated" => Ok(PairLabel::Mated),
            "nonmated" => Ok(PairLabel::Nonmated),
            "doppelganger" => Ok(PairLabel::Doppelganger),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// A (reference, probe) comparison trial.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrialPair {
    pub reference_id: String,
    pub probe_id: String,
    pub label: PairLabel,
}

impl TrialPair {
    pub fn new(reference_id: impl Into<String>, probe_id: impl Into<String>, label: PairLabel) -> Self {
        TrialPair {
            reference_id: reference_id.into(),
            probe_id: probe_id.into(),
            label,
        }
    }
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v}")
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Iterator over (1-based line number, content) of data lines.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    })
}

fn parse_header(origin: &str, line_no: usize, line: &str, magic: &str, key: &str) -> Result<usize> {
    let mut toks = line.split_whitespace();
    match toks.next() {
        Some(m) if m == magic => {}
        Some(m) => {
            return Err(Error::format(
                origin,
                line_no,
                format!("expected `{magic}` header, found `{m}`"),
            ));
        }
        None => return Err(Error::format(origin, line_no, "missing header")),
    }
    let kv = toks
        .next()
        .ok_or_else(|| Error::format(origin, line_no, format!("header lacks `{key}=`")))?;
    let value = kv
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::format(origin, line_no, format!("header lacks `{key}=`")))?;
    let n: usize = value
        .parse()
        .map_err(|_| Error::format(origin, line_no, format!("invalid `{key}` value `{value}`")))?;
    if n == 0 {
        return Err(Error::format(origin, line_no, format!("`{key}` must be positive")));
    }
    if toks.next().is_some() {
        return Err(Error::format(origin, line_no, "trailing tokens in header"));
    }
    Ok(n)
}

fn parse_finite(origin: &str, line_no: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::format(origin, line_no, format!("non-numeric value `{tok}`")))?;
    if !v.is_finite() {
        return Err(Error::format(origin, line_no, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

/// Parses `emb-v1` text. When `expected_dim` is given the header must declare it.
pub fn parse_embeddings(text: &str, origin: &str, expected_dim: Option<usize>) -> Result<(usize, Vec<Embedding>)> {
    let mut lines = data_lines(text);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| Error::format(origin, 0, "empty embedding file"))?;
    let dim = parse_header(origin, hl, header, EMBEDDING_MAGIC, "dim")?;
    if let Some(expected) = expected_dim {
        if expected != dim {
            return Err(Error::format(
                origin,
                hl,
                format!("dimension mismatch: header declares {dim}, expected {expected}"),
            ));
        }
    }

    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::new();
    for (line_no, line) in lines {
        let mut toks = line.split_whitespace();
        let image_id = toks.next().expect("data line is non-empty");
        let subject_id = toks
            .next()
            .ok_or_else(|| Error::format(origin, line_no, "missing subject id"))?;
        let values = toks
            .map(|t| parse_finite(origin, line_no, t))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != dim {
            return Err(Error::format(
                origin,
                line_no,
                format!("dimension mismatch: {} values, expected {dim}", values.len()),
            ));
        }
        if let Some(prev) = seen.insert(image_id, line_no) {
            return Err(Error::format(
                origin,
                line_no,
                format!("duplicate image id `{image_id}` (first seen on line {prev})"),
            ));
        }
        out.push(Embedding::new(image_id, subject_id, values));
    }
    Ok((dim, out))
}

/// Loads an `emb-v1` file whose declared dimension must equal `expected_dim`.
pub fn load_embeddings(path: impl AsRef<Path>, expected_dim: usize) -> Result<Vec<Embedding>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_embeddings(&text, &path.display().to_string(), Some(expected_dim)).map(|(_, e)| e)
}

/// Loads an `emb-v1` file, taking the dimension from its header.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<(usize, Vec<Embedding>)> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_embeddings(&text, &path.display().to_string(), None)
}

pub fn write_embeddings<W: Write>(mut w: W, dim: usize, embeddings: &[Embedding]) -> std::io::Result<()> {
    writeln!(w, "{EMBEDDING_MAGIC} dim={dim}")?;
    let mut line = String::new();
    for e in embeddings {
        if e.values.len() != dim {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!(
                    "embedding `{}` has {} values, file dimension is {dim}",
                    e.image_id,
                    e.values.len()
                ),
            ));
        }
        line.clear();
        line.push_str(&e.image_id);
        line.push(' ');
        line.push_str(&e.subject_id);
        for v in &e.values {
            write!(line, " {v}").expect("writing to String");
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn parse_landmarks(text: &str, origin: &str, expected_count: Option<usize>) -> Result<(usize, Vec<LandmarkSet>)> {
    let mut lines = data_lines(text);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| Error::format(origin, 0, "empty landmark file"))?;
    let count = parse_header(origin, hl, header, LANDMARK_MAGIC, "n")?;
    if let Some(expected) = expected_count {
        if expected != count {
            return Err(Error::format(
                origin,
                hl,
                format!("count mismatch: header declares {count} points, expected {expected}"),
            ));
        }
    }
    let mut out = Vec::new();
    for (line_no, line) in lines {
        let mut toks = line.split_whitespace();
        let image_id = toks.next().expect("data line is non-empty");
        let coords = toks
            .map(|t| parse_finite(origin, line_no, t))
            .collect::<Result<Vec<_>>>()?;
        if coords.len() != 2 * count {
            return Err(Error::format(
                origin,
                line_no,
                format!(
                    "count mismatch: {} coordinates, expected {} ({count} points)",
                    coords.len(),
                    2 * count
                ),
            ));
        }
        let points = coords.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect();
        out.push(LandmarkSet::new(image_id, points));
    }
    Ok((count, out))
}

pub fn load_landmarks(path: impl AsRef<Path>, expected_count: usize) -> Result<Vec<LandmarkSet>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_landmarks(&text, &path.display().to_string(), Some(expected_count)).map(|(_, l)| l)
}

pub fn read_landmarks(path: impl AsRef<Path>) -> Result<(usize, Vec<LandmarkSet>)> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_landmarks(&text, &path.display().to_string(), None)
}

pub fn write_landmarks<W: Write>(mut w: W, sets: &[LandmarkSet]) -> std::io::Result<()> {
    let count = sets.first().map_or(DEFAULT_LANDMARK_COUNT, LandmarkSet::len);
    writeln!(w, "{LANDMARK_MAGIC} n={count}")?;
    let mut line = String::new();
    for s in sets {
        if s.len() != count {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!(
                    "landmark set `{}` has {} points, file count is {count}",
                    s.image_id,
                    s.len()
                ),
            ));
        }
        line.clear();
        line.push_str(&s.image_id);
        for p in &s.points {
            write!(line, " {} {}", p.x, p.y).expect("writing to String");
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<TrialPair>> {
    data_lines(text)
        .map(|(line_no, line)| {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::format(
                    origin,
                    line_no,
                    format!("expected `reference_id,probe_id,label`, found {} fields", fields.len()),
                ));
            }
            if fields[0].is_empty() || fields[1].is_empty() {
                return Err(Error::format(origin, line_no, "empty identifier"));
            }
            let label = fields[2]
                .parse::<PairLabel>()
                .map_err(|m| Error::format(origin, line_no, m))?;
            Ok(TrialPair::new(fields[0], fields[1], label))
        })
        .collect()
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<TrialPair>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_pairs(&text, &path.display().to_string())
}

pub fn write_pairs<W: Write>(mut w: W, pairs: &[TrialPair]) -> std::io::Result<()> {
    for p in pairs {
        writeln!(w, "{},{},{}", p.reference_id, p.probe_id, p.label)?;
    }
    Ok(())
}

/// Embeddings addressable by image id. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingIndex {
    dim: usize,
    embeddings: Vec<Embedding>,
    by_id: HashMap<String, usize>,
}

impl EmbeddingIndex {
    pub fn new(embeddings: Vec<Embedding>) -> Result<Self> {
        let dim = embeddings.first().map_or(0, Embedding::dim);
        let mut by_id = HashMap::with_capacity(embeddings.len());
        for (i, e) in embeddings.iter().enumerate() {
            if e.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: e.dim(),
                });
            }
            if by_id.insert(e.image_id.clone(), i).is_some() {
                return Err(Error::format(
                    "embeddings",
                    0,
                    format!("duplicate image id `{}`", e.image_id),
                ));
            }
        }
        Ok(EmbeddingIndex { dim, embeddings, by_id })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&Embedding> {
        self.by_id.get(image_id).map(|&i| &self.embeddings[i])
    }

    pub fn resolve(&self, image_id: &str) -> Result<&Embedding> {
        self.get(image_id).ok_or_else(|| Error::Unresolved(image_id.to_owned()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Embedding> {
        self.embeddings.iter()
    }

    pub fn as_slice(&self) -> &[Embedding] {
        &self.embeddings
    }
}

/// Rejects pairs referencing unknown ids and pairs whose label contradicts the
/// subject ids (mated pairs share a subject, the others do not).
pub fn check_pairs(pairs: &[TrialPair], index: &EmbeddingIndex) -> Result<()> {
    for p in pairs {
        let r = index.resolve(&p.reference_id)?;
        let q = index.resolve(&p.probe_id)?;
        let same = r.subject_id == q.subject_id;
        let consistent = match p.label {
            PairLabel::Mated => same,
            PairLabel::Nonmated | PairLabel::Doppelganger => !same,
        };
        if !consistent {
            return Err(Error::Referential {
                reference: p.reference_id.clone(),
                probe: p.probe_id.clone(),
                message: format!(
                    "label {} but subjects are `{}` and `{}`",
                    p.label, r.subject_id, q.subject_id
                ),
            });
        }
    }
    Ok(())
}

/// `key=value` file naming the inputs of a run. Relative paths are resolved
/// against the manifest's directory.
///
/// Recognised keys: `embeddings` and `pairs` (repeatable), `landmarks`
/// (repeatable), `dim`, `landmark_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub embeddings: Vec<PathBuf>,
    pub pairs: Vec<PathBuf>,
    pub landmarks: Vec<PathBuf>,
    pub dim: usize,
    pub landmark_count: usize,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        DatasetManifest {
            embeddings: Vec::new(),
            pairs: Vec::new(),
            landmarks: Vec::new(),
            dim: DEFAULT_EMBEDDING_DIM,
            landmark_count: DEFAULT_LANDMARK_COUNT,
        }
    }
}

impl DatasetManifest {
    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self> {
        let mut m = DatasetManifest::default();
        for (line_no, line) in data_lines(text) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(origin, line_no, "expected `key=value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let positive = |v: &str| -> Result<usize> {
                v.parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| Error::format(origin, line_no, format!("`{key}` must be a positive integer")))
            };
            match key {
                "embeddings" => m.embeddings.push(base_dir.join(value)),
                "pairs" => m.pairs.push(base_dir.join(value)),
                "landmarks" => m.landmarks.push(base_dir.join(value)),
                "dim" => m.dim = positive(value)?,
                "landmark_count" => m.landmark_count = positive(value)?,
                other => return Err(Error::format(origin, line_no, format!("unknown key `{other}`"))),
            }
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_text(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Ingests every referenced file and checks cross-file integrity.
    pub fn ingest(&self) -> Result<Dataset> {
        let mut all = Vec::new();
        for p in &self.embeddings {
            all.extend(load_embeddings(p, self.dim)?);
        }
        let index = EmbeddingIndex::new(all)?;
        let mut pairs = Vec::new();
        for p in &self.pairs {
            pairs.extend(load_pairs(p)?);
        }
        check_pairs(&pairs, &index)?;
        let mut landmarks = Vec::new();
        for p in &self.landmarks {
            landmarks.extend(load_landmarks(p, self.landmark_count)?);
        }
        Ok(Dataset {
            index,
            pairs,
            landmarks,
        })
    }
}

/// Everything a manifest references, validated.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub index: EmbeddingIndex,
    pub pairs: Vec<TrialPair>,
    pub landmarks: Vec<LandmarkSet>,
}
