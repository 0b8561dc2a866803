#![allow(dead_code)]

use std::collections::VecDeque;

use sitblend_core::{RasterImage, Rgba};

/// splitmix64, enough to expand a proptest seed into an image.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u32) -> u32 {
        (self.next_u64() % n as u64) as u32
    }

    pub fn range(&mut self, lo: u32, hi: u32) -> u32 {
        lo + self.below(hi - lo + 1)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub fn gray_image(w: u32, h: u32, values: &[u8]) -> RasterImage {
    RasterImage::from_gray(w, h, values).unwrap()
}

/// Piecewise-constant rectangles over a noisy base, values in `[lo, hi]`.
pub fn random_scene(rng: &mut Rng, w: u32, h: u32, lo: u32, hi: u32) -> RasterImage {
    let mut v = vec![0u8; (w * h) as usize];
    let base = rng.range(lo, hi);
    for p in v.iter_mut() {
        *p = base as u8;
    }
    for _ in 0..rng.range(1, 6) {
        let (x0, y0) = (rng.below(w), rng.below(h));
        let (rw, rh) = (rng.range(1, w / 2), rng.range(1, h / 2));
        let val = rng.range(lo, hi) as u8;
        for y in y0..(y0 + rh).min(h) {
            for x in x0..(x0 + rw).min(w) {
                v[(y * w + x) as usize] = val;
            }
        }
    }
    for p in v.iter_mut() {
        let n = rng.range(0, 6) as i32 - 3;
        *p = (*p as i32 + n).clamp(lo as i32, hi as i32) as u8;
    }
    gray_image(w, h, &v)
}

/// Union of random discs and rectangles.
pub fn random_blobs(rng: &mut Rng, w: usize, h: usize) -> Vec<bool> {
    let mut m = vec![false; w * h];
    for _ in 0..rng.range(1, 5) {
        let cx = rng.below(w as u32) as f64;
        let cy = rng.below(h as u32) as f64;
        if rng.below(2) == 0 {
            let r = rng.range(1, (w.min(h) / 4).max(2) as u32) as f64;
            for y in 0..h {
                for x in 0..w {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    if dx * dx + dy * dy <= r * r {
                        m[y * w + x] = true;
                    }
                }
            }
        } else {
            let rw = rng.range(1, (w / 2) as u32) as usize;
            let rh = rng.range(1, (h / 2) as u32) as usize;
            for y in cy as usize..(cy as usize + rh).min(h) {
                for x in cx as usize..(cx as usize + rw).min(w) {
                    m[y * w + x] = true;
                }
            }
        }
    }
    m
}

pub fn mask_image(mask: &[bool], w: usize, h: usize) -> RasterImage {
    let v: Vec<u8> = mask.iter().map(|&f| if f { 0 } else { 255 }).collect();
    gray_image(w as u32, h as u32, &v)
}

/// Number of 8-connected components of `mask`.
pub fn components8(mask: &[bool], w: usize, h: usize) -> usize {
    let mut seen = vec![false; w * h];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    count
}

pub fn white(w: u32, h: u32) -> RasterImage {
    RasterImage::filled(w, h, Rgba::WHITE).unwrap()
}

/// Brute-force Sobel magnitude of the raw image, replicated borders.
pub fn sobel_oracle(img: &RasterImage) -> Vec<f64> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let l = img.luma();
    let px = |x: i64, y: i64| l[(y.clamp(0, h - 1) * w + x.clamp(0, w - 1)) as usize];
    let mut out = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..3 {
                for i in 0..3 {
                    let v = px(x + i - 1, y + j - 1);
                    gx += kx[j as usize][i as usize] * v;
                    gy += kx[i as usize][j as usize] * v;
                }
            }
            out[(y * w + x) as usize] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}
