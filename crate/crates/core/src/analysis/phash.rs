//! 64-bit DCT perceptual hash and near-duplicate clustering.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const SIZE: usize = 32;
const BLOCK: usize = 8;

/// Row-major grayscale pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

pub fn hamming(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}

/// Area-averaging resize: each output pixel is the mean of the source area
/// it covers, with fractional coverage at the edges.
pub fn resize_area(img: &GrayImage, w: usize, h: usize) -> Vec<f64> {
    let sx = img.width as f64 / w as f64;
    let sy = img.height as f64 / h as f64;
    let spans = |i: usize, scale: f64, limit: usize| -> Vec<(usize, f64)> {
        let (lo, hi) = (i as f64 * scale, (i + 1) as f64 * scale);
        let first = lo.floor() as usize;
        let last = (hi.ceil() as usize).min(limit);
        (first..last)
            .map(|p| (p, (hi.min(p as f64 + 1.0) - lo.max(p as f64)).max(0.0)))
            .filter(|&(_, c)| c > 0.0)
            .collect()
    };
    let mut out = vec![0.0; w * h];
    for oy in 0..h {
        let ys = spans(oy, sy, img.height);
        for ox in 0..w {
            let xs = spans(ox, sx, img.width);
            let (mut sum, mut area) = (0.0, 0.0);
            for &(y, cy) in &ys {
                for &(x, cx) in &xs {
                    sum += img.get(x, y) * cx * cy;
                    area += cx * cy;
                }
            }
            out[oy * w + ox] = sum / area;
        }
    }
    out
}

fn dct_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        let a = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for i in 0..n {
            m[k * n + i] = a * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    m
}

/// Orthonormal 2-D type-II DCT of an `n × n` block.
pub fn dct2(x: &[f64], n: usize) -> Vec<f64> {
    let c = dct_matrix(n);
    let mut tmp = vec![0.0; n * n];
    for k in 0..n {
        for j in 0..n {
            tmp[k * n + j] = (0..n).map(|i| c[k * n + i] * x[i * n + j]).sum();
        }
    }
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        for l in 0..n {
            out[k * n + l] = (0..n).map(|j| tmp[k * n + j] * c[l * n + j]).sum();
        }
    }
    out
}

/// Resize to 32×32, DCT, keep the 8×8 lowest frequencies after the DC row
/// and column, and set a bit (row-major, most significant first) for each
/// coefficient above their median.
pub fn phash(img: &GrayImage) -> Result<u64> {
    if img.width == 0 || img.height == 0 {
        return Err(Error::InvalidArgument("cannot hash an empty image".into()));
    }
    if img.pixels.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("image pixels"));
    }
    let mut small = resize_area(img, SIZE, SIZE);
    let mean = small.iter().sum::<f64>() / small.len() as f64;
    small.iter_mut().for_each(|p| *p -= mean);
    let coeffs = dct2(&small, SIZE);
    // Rounding residue is treated as zero so that flat and offset images
    // hash reproducibly.
    let scale = img.pixels.iter().fold(1.0f64, |m, p| m.max(p.abs()));
    let tol = 1e-9 * scale;
    let block: Vec<f64> = (1..=BLOCK)
        .flat_map(|r| (1..=BLOCK).map(move |c| (r, c)))
        .map(|(r, c)| coeffs[r * SIZE + c])
        .map(|v| if v.abs() < tol { 0.0 } else { v })
        .collect();
    let mut sorted = block.clone();
    sorted.sort_by(f64::total_cmp);
    let median = (sorted[31] + sorted[32]) / 2.0;
    Ok(block
        .iter()
        .fold(0u64, |h, &v| (h << 1) | u64::from(v > median)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    /// Cluster id per item; ids are numbered by first appearance.
    pub labels: Vec<usize>,
    pub n_clusters: usize,
}

impl Clustering {
    /// `1 − clusters / items`, 0 for no items.
    pub fn duplication_rate(&self) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            1.0 - self.n_clusters as f64 / self.labels.len() as f64
        }
    }

    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &c) in self.labels.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage clusters under Hamming distance `<= threshold`.
/// Thresholds above 64 behave like 64.
pub fn cluster_duplicates(hashes: &[u64], threshold: u32) -> Clustering {
    let n = hashes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if hamming(hashes[i], hashes[j]) <= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut next = 0;
    for i in 0..n {
        let r = find(&mut parent, i);
        if ids[r] == usize::MAX {
            ids[r] = next;
            next += 1;
        }
        labels.push(ids[r]);
    }
    Clustering {
        labels,
        n_clusters: next,
    }
}
