//! Random images and landmark sets for morph property checks, plus a
//! gift-wrapping hull used to decide which pixels lie outside the face region.

#![allow(dead_code)]

use lookalike_core::{ImageBuffer, LandmarkSet, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Case {
    pub target: ImageBuffer,
    pub source: ImageBuffer,
    pub target_lmk: LandmarkSet,
    pub source_lmk: LandmarkSet,
}

fn random_image(rng: &mut ChaCha8Rng, w: u32, h: u32) -> ImageBuffer {
    let (fx, fy, phase) = (
        rng.random_range(0.01..0.3),
        rng.random_range(0.01..0.3),
        rng.random_range(0.0..6.0),
    );
    let noise = rng.random_range(0..40u8);
    let mut img = ImageBuffer::filled(w, h, [0; 3]).unwrap();
    for y in 0..h {
        for x in 0..w {
            let base = 127.5 + 100.0 * ((x as f64 * fx + y as f64 * fy + phase).sin());
            let mut px = [0u8; 3];
            for (c, v) in px.iter_mut().enumerate() {
                let jitter = if noise > 0 { rng.random_range(0..noise) } else { 0 };
                *v = (base + 20.0 * c as f64).clamp(0.0, 215.0) as u8 + jitter;
            }
            img.set_pixel(x, y, px);
        }
    }
    img
}

/// Landmarks on a small integer/dyadic grid inside the frame.
fn random_landmarks(rng: &mut ChaCha8Rng, id: &str, n: usize, w: u32, h: u32) -> LandmarkSet {
    let points = (0..n)
        .map(|_| {
            let x = rng.random_range(0..(w - 1) * 4) as f64 / 4.0;
            let y = rng.random_range(0..(h - 1) * 4) as f64 / 4.0;
            Point::new(x, y)
        })
        .collect();
    LandmarkSet::new(id, points)
}

pub fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let w = rng.random_range(8..=256);
    let h = rng.random_range(8..=256);
    let n = rng.random_range(3..=40);
    Case {
        target: random_image(rng, w, h),
        source: random_image(rng, w, h),
        target_lmk: random_landmarks(rng, "t", n, w, h),
        source_lmk: random_landmarks(rng, "s", n, w, h),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Jarvis march; counter-clockwise, collinear points dropped.
pub fn hull(points: &[Point]) -> Vec<Point> {
    let start = *points
        .iter()
        .min_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)))
        .unwrap();
    let mut out = vec![start];
    let mut cur = start;
    loop {
        let mut next = None::<Point>;
        for &p in points {
            if p == cur {
                continue;
            }
            next = match next {
                None => Some(p),
                Some(q) => {
                    let c = cross(cur, q, p);
                    let farther = (p.x - cur.x).hypot(p.y - cur.y) > (q.x - cur.x).hypot(q.y - cur.y);
                    if c < 0.0 || (c == 0.0 && farther) {
                        Some(p)
                    } else {
                        Some(q)
                    }
                }
            };
        }
        match next {
            Some(p) if p != start && out.len() <= points.len() => {
                out.push(p);
                cur = p;
            }
            _ => break,
        }
    }
    out
}

/// True when `p` is farther than `margin` outside the convex polygon, or
/// the polygon has no area.
pub fn clearly_outside(hull: &[Point], p: Point, margin: f64) -> bool {
    if hull.len() < 3 {
        return true;
    }
    (0..hull.len()).any(|i| {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        let len = (b.x - a.x).hypot(b.y - a.y);
        cross(a, b, p) / len < -margin
    })
}
