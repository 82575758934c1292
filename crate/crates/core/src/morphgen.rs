//! Landmark-driven face morphing used to synthesise doppelganger training
//! pairs: the target face is warped part-way toward the source face shape,
//! blended with the equally warped source, and pasted back inside the inner
//! face region so the target's outer region is retained.

use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::dataio::{ImageBuffer, LandmarkSet, PairLabel, Point, TrialPair};
use crate::error::{Error, Result};

/// Feather radius at a reference face width of [`FEATHER_REFERENCE_WIDTH`] pixels.
pub const DEFAULT_FEATHER: f64 = 11.0;
pub const FEATHER_REFERENCE_WIDTH: f64 = 512.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorphParams {
    /// 0 keeps the target shape, 1 adopts the source shape.
    pub warp_weight: f64,
    /// 0 keeps the target texture, 1 adopts the source texture.
    pub blend_alpha: f64,
    /// `None` scales [`DEFAULT_FEATHER`] with the face width.
    pub feather_radius: Option<u32>,
}

impl Default for MorphParams {
    fn default() -> Self {
        MorphParams {
            warp_weight: 0.5,
            blend_alpha: 0.5,
            feather_radius: None,
        }
    }
}

impl MorphParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("warp weight", self.warp_weight), ("blend alpha", self.blend_alpha)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Where a morph came from; the feather radius is the one actually applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub target_id: String,
    pub source_id: String,
    pub warp_weight: f64,
    pub blend_alpha: f64,
    pub feather_radius: u32,
}

#[derive(Debug, Clone)]
pub struct MorphResult {
    pub image: ImageBuffer,
    pub landmarks: LandmarkSet,
    pub provenance: Provenance,
}

/// Triangles over a vertex list. Indices refer to the point list the mesh
/// was built from; for a face mesh that is the landmarks followed by the
/// [`frame_anchors`].
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
}

/// `target + w (source - target)`; `w = 0` and `w = 1` reproduce the
/// endpoints exactly.
pub fn interpolate_landmarks(target: &LandmarkSet, source: &LandmarkSet, w: f64) -> Result<LandmarkSet> {
    if target.len() != source.len() {
        return Err(Error::Geometry(format!(
            "landmark count mismatch: `{}` has {}, `{}` has {}",
            target.image_id,
            target.len(),
            source.image_id,
            source.len()
        )));
    }
    if !w.is_finite() {
        return Err(Error::InvalidParameter(format!("warp weight must be finite, got {w}")));
    }
    let lerp = |a: f64, b: f64| if w == 1.0 { b } else { a + w * (b - a) };
    let mut points = Vec::with_capacity(target.len());
    for (t, s) in target.points.iter().zip(&source.points) {
        if !(t.x.is_finite() && t.y.is_finite() && s.x.is_finite() && s.y.is_finite()) {
            return Err(Error::Geometry("non-finite landmark coordinate".into()));
        }
        points.push(Point::new(lerp(t.x, s.x), lerp(t.y, s.y)));
    }
    Ok(LandmarkSet::new(target.image_id.clone(), points))
}

/// Four corners followed by four edge midpoints of a `width` x `height`
/// frame, in pixel-centre coordinates.
pub fn frame_anchors(width: u32, height: u32) -> [Point; 8] {
    let (r, b) = ((width.max(1) - 1) as f64, (height.max(1) - 1) as f64);
    [
        Point::new(0.0, 0.0),
        Point::new(r, 0.0),
        Point::new(r, b),
        Point::new(0.0, b),
        Point::new(r / 2.0, 0.0),
        Point::new(r, b / 2.0),
        Point::new(r / 2.0, b),
        Point::new(0.0, b / 2.0),
    ]
}

/// Delaunay triangulation of `points`. Coincident points share the index of
/// their first occurrence.
pub fn triangulate(points: &[Point]) -> Result<TriangleMesh> {
    let mut dt: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    let mut first_index = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let handle = dt
            .insert(Point2::new(p.x, p.y))
            .map_err(|e| Error::Geometry(format!("cannot triangulate point {i} ({}, {}): {e:?}", p.x, p.y)))?;
        if handle.index() == first_index.len() {
            first_index.push(i);
        }
    }
    if dt.num_inner_faces() == 0 {
        return Err(Error::Geometry(format!(
            "{} points are collinear or coincident; no triangle exists",
            points.len()
        )));
    }
    let triangles = dt
        .inner_faces()
        .map(|f| f.vertices().map(|v| first_index[v.fix().index()]))
        .collect();
    Ok(TriangleMesh {
        vertices: points.to_vec(),
        triangles,
    })
}

fn clamp_to_frame(p: Point, width: u32, height: u32) -> Point {
    Point::new(
        p.x.clamp(0.0, (width.max(1) - 1) as f64),
        p.y.clamp(0.0, (height.max(1) - 1) as f64),
    )
}

fn mesh_points(landmarks: &LandmarkSet, width: u32, height: u32) -> Vec<Point> {
    landmarks
        .points
        .iter()
        .map(|&p| clamp_to_frame(p, width, height))
        .chain(frame_anchors(width, height))
        .collect()
}

/// Face mesh over the average of two landmark sets plus the frame anchors.
pub fn build_mesh(a: &LandmarkSet, b: &LandmarkSet, width: u32, height: u32) -> Result<TriangleMesh> {
    let avg = interpolate_landmarks(a, b, 0.5)?;
    triangulate(&mesh_points(&avg, width, height))
}

fn check_same_size(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.dimensions() != b.dimensions() {
        let ((aw, ah), (bw, bh)) = (a.dimensions(), b.dimensions());
        return Err(Error::Image(format!("image size mismatch: {aw}x{ah} vs {bw}x{bh}")));
    }
    Ok(())
}

fn sample_bilinear(img: &ImageBuffer, x: f64, y: f64) -> [u8; 3] {
    let (w, h) = img.dimensions();
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as u32, y.floor() as u32);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let (p00, p10, p01, p11) = (
        img.pixel(x0, y0),
        img.pixel(x1, y0),
        img.pixel(x0, y1),
        img.pixel(x1, y1),
    );
    let mut out = [0u8; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        out[c] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
    }
    out
}

struct WarpTriangle {
    dst: [Point; 3],
    src: [Point; 3],
    inv_area2: f64,
    x_range: (u32, u32),
    y_range: (u32, u32),
}

impl WarpTriangle {
    fn barycentric(&self, x: f64, y: f64) -> [f64; 3] {
        let [a, b, c] = self.dst;
        let l0 = ((b.x - x) * (c.y - y) - (c.x - x) * (b.y - y)) * self.inv_area2;
        let l1 = ((c.x - x) * (a.y - y) - (a.x - x) * (c.y - y)) * self.inv_area2;
        [l0, l1, 1.0 - l0 - l1]
    }
}

/// Piecewise-affine warp moving the image content at `from` to `to`. Each
/// output pixel inside a destination triangle is sampled bilinearly from
/// the corresponding source triangle; pixels covered by no triangle keep
/// their input value. Mesh indices past the landmark count address the
/// frame anchors of the image.
pub fn warp_image(img: &ImageBuffer, from: &LandmarkSet, to: &LandmarkSet, mesh: &TriangleMesh) -> Result<ImageBuffer> {
    if from.len() != to.len() {
        return Err(Error::Geometry(format!(
            "landmark count mismatch: {} vs {}",
            from.len(),
            to.len()
        )));
    }
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Ok(img.clone());
    }
    let src_pts = mesh_points(from, w, h);
    let dst_pts = mesh_points(to, w, h);

    let mut tris = Vec::with_capacity(mesh.triangles.len());
    for (t, idx) in mesh.triangles.iter().enumerate() {
        if let Some(&bad) = idx.iter().find(|&&i| i >= dst_pts.len()) {
            return Err(Error::Geometry(format!(
                "triangle {t} references vertex {bad}, only {} exist",
                dst_pts.len()
            )));
        }
        let dst = idx.map(|i| dst_pts[i]);
        let src = idx.map(|i| src_pts[i]);
        let area2 = (dst[1].x - dst[0].x) * (dst[2].y - dst[0].y) - (dst[2].x - dst[0].x) * (dst[1].y - dst[0].y);
        if area2.abs() < 1e-9 {
            warn!("skipping degenerate destination triangle {t}");
            continue;
        }
        let lo = |v: f64, max: u32| (v.ceil().max(0.0) as u32).min(max);
        let hi = |v: f64, max: u32| (v.floor().max(0.0) as u32).min(max);
        let (xs, ys) = (dst.map(|p| p.x), dst.map(|p| p.y));
        let (xmin, xmax) = (
            xs.iter().copied().fold(f64::INFINITY, f64::min),
            xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        let (ymin, ymax) = (
            ys.iter().copied().fold(f64::INFINITY, f64::min),
            ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        tris.push(WarpTriangle {
            dst,
            src,
            inv_area2: 1.0 / area2,
            x_range: (lo(xmin - 1e-9, w - 1), hi(xmax + 1e-9, w - 1)),
            y_range: (lo(ymin - 1e-9, h - 1), hi(ymax + 1e-9, h - 1)),
        });
    }

    const EDGE_EPS: f64 = 1e-9;
    let mut out = img.clone();
    let row_len = 3 * w as usize;
    out.pixels_mut()
        .par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(y, row)| {
            let y = y as u32;
            for tri in tris.iter().filter(|t| t.y_range.0 <= y && y <= t.y_range.1) {
                for x in tri.x_range.0..=tri.x_range.1 {
                    let l = tri.barycentric(x as f64, y as f64);
                    if l.iter().any(|&v| v < -EDGE_EPS) {
                        continue;
                    }
                    let sx = l[0] * tri.src[0].x + l[1] * tri.src[1].x + l[2] * tri.src[2].x;
                    let sy = l[0] * tri.src[0].y + l[1] * tri.src[1].y + l[2] * tri.src[2].y;
                    let px = sample_bilinear(img, sx, sy);
                    row[3 * x as usize..3 * x as usize + 3].copy_from_slice(&px);
                }
            }
        });
    Ok(out)
}

/// `round((1 - alpha) a + alpha b)` per channel.
pub fn blend(a: &ImageBuffer, b: &ImageBuffer, alpha: f64) -> Result<ImageBuffer> {
    check_same_size(a, b)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "blend alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let pixels = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&p, &q)| ((1.0 - alpha) * p as f64 + alpha * q as f64).round().clamp(0.0, 255.0) as u8)
        .collect();
    ImageBuffer::new(a.width(), a.height(), pixels)
}

/// Convex hull in counter-clockwise order (y up), without collinear points.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points
        .iter()
        .copied()
        .filter(|p| p.x.is_finite() && p.y.is_finite())
        .collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point, a: Point, b: Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Signed distance from `p` to the boundary of a convex CCW polygon;
/// positive inside.
fn inside_distance(hull: &[Point], p: Point) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..hull.len() {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let len = ex.hypot(ey);
        d = d.min((ex * (p.y - a.y) - ey * (p.x - a.x)) / len);
    }
    d
}

/// Pastes the morph over the target inside the convex hull of `landmarks`.
/// The weight of the morph ramps linearly from 0 on the hull boundary to 1
/// at `feather` pixels inside; with `feather = 0` the hull (boundary
/// included) is taken from the morph verbatim.
pub fn composite_inner_region(
    morph: &ImageBuffer,
    target: &ImageBuffer,
    landmarks: &LandmarkSet,
    feather: u32,
) -> Result<ImageBuffer> {
    check_same_size(morph, target)?;
    let hull = convex_hull(&landmarks.points);
    if hull.len() < 3 {
        return Ok(target.clone());
    }
    let (w, _) = target.dimensions();
    let row_len = 3 * w as usize;
    let mut out = target.clone();
    let f = feather as f64;
    out.pixels_mut()
        .par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let d = inside_distance(&hull, Point::new(x as f64, y as f64));
                if d < 0.0 {
                    continue;
                }
                let m = if feather == 0 { 1.0 } else { (d / f).min(1.0) };
                let mp = morph.pixel(x, y as u32);
                let px = &mut row[3 * x as usize..3 * x as usize + 3];
                for c in 0..3 {
                    px[c] = ((1.0 - m) * px[c] as f64 + m * mp[c] as f64).round().clamp(0.0, 255.0) as u8;
                }
            }
        });
    Ok(out)
}

/// Feather radius proportional to the horizontal extent of the landmarks.
pub fn auto_feather(landmarks: &LandmarkSet) -> u32 {
    let (lo, hi) = landmarks
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.x), hi.max(p.x))
        });
    if hi <= lo {
        return 0;
    }
    (DEFAULT_FEATHER * (hi - lo) / FEATHER_REFERENCE_WIDTH).round() as u32
}

/// Morphs `source` into `target`. The returned image paired with the target
/// forms a synthetic doppelganger pair.
pub fn generate_doppelganger_pair(
    target: &ImageBuffer,
    target_lmk: &LandmarkSet,
    source: &ImageBuffer,
    source_lmk: &LandmarkSet,
    params: &MorphParams,
) -> Result<MorphResult> {
    params.validate()?;
    check_same_size(target, source)?;
    let (w, h) = target.dimensions();
    let shape = interpolate_landmarks(target_lmk, source_lmk, params.warp_weight)?;
    let mesh = build_mesh(target_lmk, source_lmk, w, h)?;
    let warped_target = warp_image(target, target_lmk, &shape, &mesh)?;
    let warped_source = warp_image(source, source_lmk, &shape, &mesh)?;
    let mixed = blend(&warped_target, &warped_source, params.blend_alpha)?;
    let feather = params.feather_radius.unwrap_or_else(|| auto_feather(&shape));
    let image = composite_inner_region(&mixed, target, &shape, feather)?;
    Ok(MorphResult {
        image,
        landmarks: shape,
        provenance: Provenance {
            target_id: target_lmk.image_id.clone(),
            source_id: source_lmk.image_id.clone(),
            warp_weight: params.warp_weight,
            blend_alpha: params.blend_alpha,
            feather_radius: feather,
        },
    })
}

/// Doppelganger trial rows for a morph: `(target, morph)` and, if asked,
/// `(source, morph)`.
pub fn pair_rows(result: &MorphResult, morph_id: &str, include_source: bool) -> Vec<TrialPair> {
    let mut rows = vec![TrialPair::new(
        &result.provenance.target_id,
        morph_id,
        PairLabel::Doppelganger,
    )];
    if include_source {
        rows.push(TrialPair::new(
            &result.provenance.source_id,
            morph_id,
            PairLabel::Doppelganger,
        ));
    }
    rows
}

/// One row of a batch morph list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorphJob {
    pub target_png: PathBuf,
    pub target_lmk: PathBuf,
    pub source_png: PathBuf,
    pub source_lmk: PathBuf,
    pub output_png: PathBuf,
}

pub const BATCH_HEADER: &str = "target_png,target_lmk,source_png,source_lmk,output_png";

/// Reads `target_png,target_lmk,source_png,source_lmk,output_png` rows.
/// Relative paths are resolved against `base_dir`; a header row is allowed.
pub fn parse_batch(text: &str, origin: &str, base_dir: &Path) -> Result<Vec<MorphJob>> {
    let mut jobs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == BATCH_HEADER {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 || cols.iter().any(|c| c.is_empty()) {
            return Err(Error::format(
                origin,
                i + 1,
                format!("expected 5 columns ({BATCH_HEADER})"),
            ));
        }
        let p = |s: &str| base_dir.join(s);
        jobs.push(MorphJob {
            target_png: p(cols[0]),
            target_lmk: p(cols[1]),
            source_png: p(cols[2]),
            source_lmk: p(cols[3]),
            output_png: p(cols[4]),
        });
    }
    Ok(jobs)
}

pub fn load_batch(path: impl AsRef<Path>) -> Result<Vec<MorphJob>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_batch(&text, &path.display().to_string(), base)
}

/// File stem used as the image id of a PNG.
pub fn image_id(path: &Path) -> String {
    path.file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

/// Picks the landmark set for `png` from a landmark file: the only set in
/// the file, or the one whose id equals the PNG's file stem.
pub fn landmarks_for(png: &Path, lmk: &Path) -> Result<LandmarkSet> {
    let (_, sets) = crate::dataio::read_landmarks(lmk)?;
    let id = image_id(png);
    if sets.len() == 1 {
        let mut set = sets.into_iter().next().expect("one set");
        set.image_id = id;
        return Ok(set);
    }
    sets.into_iter()
        .find(|s| s.image_id == id)
        .ok_or_else(|| Error::Unresolved(format!("no landmarks for `{id}` in {}", lmk.display())))
}

/// Loads, morphs and writes one batch row. The morph's landmark set is
/// named after the output file.
pub fn run_job(job: &MorphJob, params: &MorphParams) -> Result<MorphResult> {
    let target = ImageBuffer::load_png(&job.target_png)?;
    let source = ImageBuffer::load_png(&job.source_png)?;
    let t_lmk = landmarks_for(&job.target_png, &job.target_lmk)?;
    let s_lmk = landmarks_for(&job.source_png, &job.source_lmk)?;
    t_lmk.check_bounds(target.width(), target.height())?;
    s_lmk.check_bounds(source.width(), source.height())?;
    let mut result = generate_doppelganger_pair(&target, &t_lmk, &source, &s_lmk, params)?;
    result.landmarks.image_id = image_id(&job.output_png);
    result.image.save_png(&job.output_png)?;
    Ok(result)
}

/// Runs every job in parallel; results are in job order.
pub fn run_batch(jobs: &[MorphJob], params: &MorphParams) -> Vec<Result<MorphResult>> {
    jobs.par_iter().map(|j| run_job(j, params)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lmk(points: &[(f64, f64)]) -> LandmarkSet {
        LandmarkSet::new("x", points.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    fn gradient(w: u32, h: u32) -> ImageBuffer {
        let mut img = ImageBuffer::filled(w, h, [0, 0, 0]).unwrap();
        for y in 0..h {
            for x in 0..w {
                img.set_pixel(
                    x,
                    y,
                    [(x * 7 % 256) as u8, (y * 5 % 256) as u8, ((x + y) * 3 % 256) as u8],
                );
            }
        }
        img
    }

    #[test]
    fn interpolation_examples() {
        let t = lmk(&[(0.0, 0.0), (0.1, 0.7)]);
        let s = lmk(&[(10.0, 20.0), (0.3, 1.9)]);
        assert_eq!(interpolate_landmarks(&t, &s, 0.0).unwrap().points, t.points);
        assert_eq!(interpolate_landmarks(&t, &s, 1.0).unwrap().points, s.points);
        assert_eq!(
            interpolate_landmarks(&t, &s, 0.5).unwrap().points[0],
            Point::new(5.0, 10.0)
        );
        assert!(interpolate_landmarks(&t, &lmk(&[(0.0, 0.0)]), 0.5).is_err());
    }

    #[test]
    fn frame_corners_give_two_triangles() {
        let m = triangulate(&frame_anchors(9, 9)[..4]).unwrap();
        assert_eq!(m.triangles.len(), 2);
    }

    #[test]
    fn square_with_centre() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)].map(|(x, y)| Point::new(x, y));
        let m = triangulate(&pts).unwrap();
        assert_eq!(m.triangles.len(), 4);
        assert!(m.triangles.iter().all(|t| t.contains(&4)));
    }

    #[test]
    fn collinear_points_fail() {
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
        assert!(matches!(triangulate(&pts), Err(Error::Geometry(_))));
    }

    #[test]
    fn duplicates_share_first_index() {
        let pts = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0), (4.0, 0.0)].map(|(x, y)| Point::new(x, y));
        let m = triangulate(&pts).unwrap();
        assert_eq!(m.triangles.len(), 1);
        assert!(!m.triangles[0].contains(&3));
    }

    #[test]
    fn identity_warp() {
        let img = gradient(31, 23);
        let l = lmk(&[(5.0, 5.0), (20.0, 6.5), (12.3, 17.9), (25.0, 15.0)]);
        let mesh = build_mesh(&l, &l, 31, 23).unwrap();
        assert_eq!(warp_image(&img, &l, &l, &mesh).unwrap(), img);
    }

    #[test]
    fn uniform_image_stays_uniform() {
        let img = ImageBuffer::filled(40, 30, [17, 200, 3]).unwrap();
        let a = lmk(&[(10.0, 10.0), (30.0, 8.0), (20.0, 25.0)]);
        let b = lmk(&[(14.0, 12.0), (25.0, 5.0), (18.0, 20.0)]);
        let mesh = build_mesh(&a, &b, 40, 30).unwrap();
        assert_eq!(warp_image(&img, &a, &b, &mesh).unwrap(), img);
    }

    #[test]
    fn rotation_matches_direct_oracle() {
        let n = 32u32;
        let img = gradient(n, n);
        let r = (n - 1) as f64;
        let corners = lmk(&[(0.0, 0.0), (r, 0.0), (r, r), (0.0, r)]);
        // Content at (x, y) moves to (r - y, x).
        let rotated = lmk(&[(r, 0.0), (r, r), (0.0, r), (0.0, 0.0)]);
        let mesh = TriangleMesh {
            vertices: rotated.points.clone(),
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        };
        let out = warp_image(&img, &corners, &rotated, &mesh).unwrap();
        let mut worst = 0i32;
        for y in 0..n {
            for x in 0..n {
                let src = img.pixel(y, n - 1 - x);
                let got = out.pixel(x, y);
                for c in 0..3 {
                    worst = worst.max((got[c] as i32 - src[c] as i32).abs());
                }
            }
        }
        assert_eq!(worst, 0);
    }

    #[test]
    fn blend_examples() {
        let a = ImageBuffer::filled(2, 2, [100, 0, 255]).unwrap();
        let b = ImageBuffer::filled(2, 2, [200, 255, 0]).unwrap();
        assert_eq!(blend(&a, &b, 0.0).unwrap(), a);
        assert_eq!(blend(&a, &b, 1.0).unwrap(), b);
        assert_eq!(blend(&a, &b, 0.5).unwrap().pixel(0, 0)[0], 150);
        assert!(blend(&a, &ImageBuffer::filled(3, 2, [0; 3]).unwrap(), 0.5).is_err());
    }

    #[test]
    fn composite_mask() {
        let morph = ImageBuffer::filled(20, 20, [255, 255, 255]).unwrap();
        let target = ImageBuffer::filled(20, 20, [0, 0, 0]).unwrap();
        let l = lmk(&[(5.0, 5.0), (15.0, 5.0), (15.0, 15.0), (5.0, 15.0)]);
        let out = composite_inner_region(&morph, &target, &l, 0).unwrap();
        assert_eq!(out.pixel(10, 10), [255; 3]);
        assert_eq!(out.pixel(2, 10), [0; 3]);
        assert_eq!(composite_inner_region(&target, &target, &l, 3).unwrap(), target);
        let soft = composite_inner_region(&morph, &target, &l, 4).unwrap();
        assert_eq!(soft.pixel(5, 10), [0; 3]);
        assert_eq!(soft.pixel(7, 10), [128; 3]);
        assert_eq!(soft.pixel(10, 10), [255; 3]);
        let line = lmk(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        assert_eq!(composite_inner_region(&morph, &target, &line, 0).unwrap(), target);
    }

    #[test]
    fn hull_drops_interior_and_collinear_points() {
        let pts =
            [(0.0, 0.0), (2.0, 0.0), (1.0, 0.0), (2.0, 2.0), (0.0, 2.0), (1.0, 1.0)].map(|(x, y)| Point::new(x, y));
        assert_eq!(convex_hull(&pts).len(), 4);
    }

    #[test]
    fn zero_params_reproduce_target() {
        let t = gradient(48, 40);
        let s = ImageBuffer::filled(48, 40, [9, 9, 9]).unwrap();
        let tl = lmk(&[(12.0, 10.0), (36.0, 11.0), (24.0, 30.0), (20.0, 20.0)]);
        let sl = lmk(&[(15.0, 9.0), (33.0, 14.0), (22.0, 33.0), (26.0, 18.0)]);
        let p = MorphParams {
            warp_weight: 0.0,
            blend_alpha: 0.0,
            feather_radius: Some(2),
        };
        assert_eq!(generate_doppelganger_pair(&t, &tl, &s, &sl, &p).unwrap().image, t);
        let half = generate_doppelganger_pair(&t, &tl, &s, &sl, &MorphParams::default()).unwrap();
        assert_ne!(half.image, t);
        assert_eq!(half.provenance.feather_radius, 0);
        assert_eq!(half.image.pixel(0, 0), t.pixel(0, 0));
    }

    #[test]
    fn self_morph_is_fixed_point() {
        let t = gradient(48, 40);
        let tl = lmk(&[(12.0, 10.0), (36.0, 11.0), (24.0, 30.0), (20.0, 20.0)]);
        for (w, a) in [(0.3, 0.7), (0.5, 0.5), (1.0, 1.0)] {
            let p = MorphParams {
                warp_weight: w,
                blend_alpha: a,
                feather_radius: Some(3),
            };
            assert_eq!(generate_doppelganger_pair(&t, &tl, &t, &tl, &p).unwrap().image, t);
        }
    }

    #[test]
    fn batch_rows() {
        let jobs = parse_batch(
            "target_png,target_lmk,source_png,source_lmk,output_png\n# c\na.png,a.lmk,b.png,b.lmk,out/m.png\n",
            "b.csv",
            Path::new("/d"),
        )
        .unwrap();
        assert_eq!(jobs.len(), 1);
        assert_eq!(jobs[0].output_png, Path::new("/d/out/m.png"));
        assert!(parse_batch("a,b,c\n", "b.csv", Path::new("")).is_err());
    }

    #[test]
    fn params_are_checked() {
        let p = MorphParams {
            warp_weight: 1.2,
            ..MorphParams::default()
        };
        assert!(matches!(p.validate(), Err(Error::InvalidParameter(_))));
    }
}
