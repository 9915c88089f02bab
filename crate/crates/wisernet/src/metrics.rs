//! Segmentation quality (DSC, HD95) and domain-distance metrics (MMD,
//! JSD, Fréchet), plus feature-space embedding extraction and retrieval.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::segnet::Model;
use crate::tensor::{Graph, Scalar, Tensor4};

// ---------------------------------------------------------------------------
// masks

/// Flat bit mask over an `H x W` grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    pub h: usize,
    pub w: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(h: usize, w: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != h * w {
            return Err(Error::Shape(format!("mask bits {} != {h}x{w}", bits.len())));
        }
        Ok(BinaryMask { h, w, bits })
    }

    pub fn empty(h: usize, w: usize) -> Self {
        BinaryMask { h, w, bits: vec![false; h * w] }
    }

    /// Threshold one channel of a probability tensor at `threshold`.
    pub fn from_tensor_channel<T: Scalar>(
        t: &Tensor4<T>,
        b: usize,
        c: usize,
        threshold: f64,
    ) -> Self {
        let s = t.shape();
        let thr = T::from_f64(threshold);
        BinaryMask {
            h: s.h,
            w: s.w,
            bits: t.plane(b, c).iter().map(|&v| v >= thr).collect(),
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.w + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.bits[y * self.w + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Boundary as erosion difference under 4-connectivity; pixels on
    /// the image border count as boundary.
    pub fn boundary(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.h {
            for x in 0..self.w {
                if !self.get(y, x) {
                    continue;
                }
                let interior = y > 0
                    && y + 1 < self.h
                    && x > 0
                    && x + 1 < self.w
                    && self.get(y - 1, x)
                    && self.get(y + 1, x)
                    && self.get(y, x - 1)
                    && self.get(y, x + 1);
                if !interior {
                    out.push((y, x));
                }
            }
        }
        out
    }

    fn check_dims(&self, other: &Self) -> Result<()> {
        if self.h != other.h || self.w != other.w {
            return Err(Error::Usage(format!(
                "mask dims {}x{} vs {}x{}",
                self.h, self.w, other.h, other.w
            )));
        }
        Ok(())
    }
}

/// Dice similarity coefficient in percent; two empty masks count as a
/// perfect match.
pub fn dsc(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    pred.check_dims(gt)?;
    let p = pred.count();
    let g = gt.count();
    if p + g == 0 {
        return Ok(100.0);
    }
    let inter = pred
        .bits
        .iter()
        .zip(&gt.bits)
        .filter(|&(&a, &b)| a && b)
        .count();
    Ok(100.0 * 2.0 * inter as f64 / (p + g) as f64)
}

// ---------------------------------------------------------------------------
// HD95 via exact Euclidean distance transform

/// Felzenszwalb-Huttenlocher 1-D squared-distance transform.
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] {
                if k == 0 {
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        out[q] = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance to the nearest seed pixel.
fn edt_2d(h: usize, w: usize, seeds: &[(usize, usize)]) -> Vec<f64> {
    const FAR: f64 = 1e18;
    let mut grid = vec![FAR; h * w];
    for &(y, x) in seeds {
        grid[y * w + x] = 0.0;
    }
    // Columns, then rows.
    let mut col_in = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col_in[y] = grid[y * w + x];
        }
        edt_1d(&col_in, &mut col_out);
        for y in 0..h {
            grid[y * w + x] = col_out[y];
        }
    }
    let mut row_out = vec![0.0; w];
    for y in 0..h {
        edt_1d(&grid[y * w..(y + 1) * w].to_vec(), &mut row_out);
        grid[y * w..(y + 1) * w].copy_from_slice(&row_out);
    }
    grid
}

/// Linear-interpolation percentile of a sorted slice (numpy `linear`).
pub fn percentile_linear(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hd95 {
    pub value: f64,
    /// Set when a mask had no boundary and the image diagonal was used
    /// as a sentinel.
    pub degenerate: bool,
}

/// 95th-percentile symmetric Hausdorff distance between mask
/// boundaries, in pixels.
pub fn hd95(pred: &BinaryMask, gt: &BinaryMask) -> Result<Hd95> {
    pred.check_dims(gt)?;
    let pb = pred.boundary();
    let gb = gt.boundary();
    if pb.is_empty() || gb.is_empty() {
        let diag = ((pred.h * pred.h + pred.w * pred.w) as f64).sqrt();
        return Ok(Hd95 { value: diag, degenerate: true });
    }
    let directed = |from: &[(usize, usize)], to: &[(usize, usize)]| -> f64 {
        let field = edt_2d(pred.h, pred.w, to);
        let mut dists: Vec<f64> =
            from.iter().map(|&(y, x)| field[y * pred.w + x].sqrt()).collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        percentile_linear(&dists, 0.95)
    };
    let value = directed(&pb, &gb).max(directed(&gb, &pb));
    Ok(Hd95 { value, degenerate: false })
}

// ---------------------------------------------------------------------------
// distribution distances

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbedSpace {
    Content,
    Style,
    Bottleneck,
}

impl EmbedSpace {
    pub fn name(&self) -> &'static str {
        match self {
            EmbedSpace::Content => "content",
            EmbedSpace::Style => "style",
            EmbedSpace::Bottleneck => "bottleneck",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "content" => Ok(EmbedSpace::Content),
            "style" => Ok(EmbedSpace::Style),
            "bottleneck" => Ok(EmbedSpace::Bottleneck),
            other => Err(Error::Usage(format!("unknown embedding space '{other}'"))),
        }
    }
}

/// A population of feature vectors from one domain.
#[derive(Clone, Debug)]
pub struct EmbeddingSet {
    pub vectors: Vec<Vec<f64>>,
    pub space: EmbedSpace,
    pub domain: String,
}

impl EmbeddingSet {
    pub fn new(vectors: Vec<Vec<f64>>, space: EmbedSpace, domain: impl Into<String>) -> Result<Self> {
        let dim = vectors.first().map(|v| v.len()).unwrap_or(0);
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::Shape("embedding vectors have mixed dimensions".into()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical("non-finite embedding entry".into()));
            }
        }
        Ok(EmbeddingSet { vectors, space, domain: domain.into() })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map(|v| v.len()).unwrap_or(0)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Copy, Debug)]
pub struct Mmd {
    pub value: f64,
    pub bandwidth: f64,
    /// Set when the pooled sample was degenerate and the bandwidth fell
    /// back to an epsilon.
    pub degenerate: bool,
}

/// Unbiased squared-MMD estimate with a Gaussian RBF kernel; the
/// bandwidth is the median pairwise distance over the pooled sample
/// (clamped to zero from below).
pub fn mmd(x: &EmbeddingSet, y: &EmbeddingSet) -> Result<Mmd> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::Usage("mmd needs at least 2 vectors per set".into()));
    }
    if x.dim() != y.dim() {
        return Err(Error::Shape(format!("mmd dims {} vs {}", x.dim(), y.dim())));
    }
    let pooled: Vec<&Vec<f64>> = x.vectors.iter().chain(y.vectors.iter()).collect();
    let mut dists = Vec::with_capacity(pooled.len() * (pooled.len() - 1) / 2);
    for i in 0..pooled.len() {
        for j in (i + 1)..pooled.len() {
            dists.push(sq_dist(pooled[i], pooled[j]).sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = percentile_linear(&dists, 0.5);
    let degenerate = median <= 0.0;
    let bandwidth = if degenerate { 1e-12 } else { median };
    let k = |a: &[f64], b: &[f64]| (-sq_dist(a, b) / (2.0 * bandwidth * bandwidth)).exp();

    let (m, n) = (x.len() as f64, y.len() as f64);
    let mut kxx = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            if i != j {
                kxx += k(&x.vectors[i], &x.vectors[j]);
            }
        }
    }
    let mut kyy = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if i != j {
                kyy += k(&y.vectors[i], &y.vectors[j]);
            }
        }
    }
    let mut kxy = 0.0;
    for xi in &x.vectors {
        for yj in &y.vectors {
            kxy += k(xi, yj);
        }
    }
    let est = kxx / (m * (m - 1.0)) + kyy / (n * (n - 1.0)) - 2.0 * kxy / (m * n);
    Ok(Mmd { value: est.max(0.0), bandwidth, degenerate })
}

/// Jensen-Shannon divergence (natural log), averaged over embedding
/// dimensions; each dimension is histogrammed over the pooled min-max
/// range with additive epsilon smoothing. Bounded by `ln 2`.
pub fn jsd(x: &EmbeddingSet, y: &EmbeddingSet, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::Usage(format!("jsd needs bins >= 2, got {bins}")));
    }
    if x.dim() != y.dim() {
        return Err(Error::Shape(format!("jsd dims {} vs {}", x.dim(), y.dim())));
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::Usage("jsd needs non-empty sets".into()));
    }
    const EPS: f64 = 1e-10;
    let dim = x.dim();
    let mut total = 0.0;
    for d in 0..dim {
        let lo = x
            .vectors
            .iter()
            .chain(&y.vectors)
            .map(|v| v[d])
            .fold(f64::INFINITY, f64::min);
        let hi = x
            .vectors
            .iter()
            .chain(&y.vectors)
            .map(|v| v[d])
            .fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo).max(0.0);
        let hist = |set: &EmbeddingSet| -> Vec<f64> {
            let mut h = vec![EPS; bins];
            for v in &set.vectors {
                let t = if width > 0.0 { ((v[d] - lo) / width).clamp(0.0, 1.0) } else { 0.0 };
                let idx = ((t * bins as f64) as usize).min(bins - 1);
                h[idx] += 1.0;
            }
            let sum: f64 = h.iter().sum();
            h.iter().map(|c| c / sum).collect()
        };
        let p = hist(x);
        let q = hist(y);
        let mut div = 0.0;
        for (pi, qi) in p.iter().zip(&q) {
            let m = 0.5 * (pi + qi);
            div += 0.5 * pi * (pi / m).ln() + 0.5 * qi * (qi / m).ln();
        }
        total += div;
    }
    Ok(total / dim as f64)
}

fn mean_and_cov(set: &EmbeddingSet, reg: f64) -> (DVector<f64>, DMatrix<f64>) {
    let n = set.len();
    let d = set.dim();
    let mut mean = DVector::zeros(d);
    for v in &set.vectors {
        for (i, &x) in v.iter().enumerate() {
            mean[i] += x;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for v in &set.vectors {
        let c = DVector::from_iterator(d, v.iter().copied()) - &mean;
        cov += &c * c.transpose();
    }
    cov /= (n.max(2) - 1) as f64;
    for i in 0..d {
        cov[(i, i)] += reg;
    }
    (mean, cov)
}

/// Symmetric PSD square root via eigendecomposition; small negative
/// eigenvalues are clamped, large ones rejected.
fn psd_sqrt(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let tol = 1e-8 * max_eig.max(1.0);
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -tol {
            return Err(Error::Numerical(format!(
                "{context}: eigenvalue {v} below -{tol} after regularization"
            )));
        }
        *v = v.max(0.0).sqrt();
    }
    let q = eig.eigenvectors;
    Ok(&q * DMatrix::from_diagonal(&vals) * q.transpose())
}

/// Fréchet distance between Gaussian fits:
/// `|mu1-mu2|^2 + tr(S1 + S2 - 2 (S1^.5 S2 S1^.5)^.5)`.
pub fn frechet(x: &EmbeddingSet, y: &EmbeddingSet) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::Shape(format!("frechet dims {} vs {}", x.dim(), y.dim())));
    }
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::Usage("frechet needs at least 2 vectors per set".into()));
    }
    const REG: f64 = 1e-10;
    let (mu1, s1) = mean_and_cov(x, REG);
    let (mu2, s2) = mean_and_cov(y, REG);
    let a = psd_sqrt(&s1, "frechet: cov1")?;
    let inner = &a * &s2 * &a;
    let cross = psd_sqrt(&inner, "frechet: cross term")?;
    let dmu = &mu1 - &mu2;
    let d2 = dmu.dot(&dmu) + s1.trace() + s2.trace() - 2.0 * cross.trace();
    Ok(d2.max(0.0))
}

// ---------------------------------------------------------------------------
// embeddings and retrieval

fn gap_vector(t: &Tensor4<f32>, b: usize) -> Vec<f64> {
    let s = t.shape();
    (0..s.c)
        .map(|c| t.plane(b, c).iter().map(|&v| v as f64).sum::<f64>() / s.plane() as f64)
        .collect()
}

/// Pool one feature space into per-image vectors: content and style
/// come from the skip filter at `level`, bottleneck from the deepest
/// state.
pub fn embed(
    model: &Model<f32>,
    images: &[Tensor4<f32>],
    space: EmbedSpace,
    level: usize,
    domain: &str,
) -> Result<EmbeddingSet> {
    if matches!(space, EmbedSpace::Content | EmbedSpace::Style) && !model.cfg.wiser_enabled {
        return Err(Error::Usage(
            "content/style embeddings require the skip filter to be enabled".into(),
        ));
    }
    if matches!(space, EmbedSpace::Content | EmbedSpace::Style)
        && !(1..=model.cfg.depth).contains(&level)
    {
        return Err(Error::Usage(format!(
            "level {level} outside 1..={}",
            model.cfg.depth
        )));
    }
    let mut vectors = Vec::with_capacity(images.len());
    for img in images {
        let mut g = Graph::new();
        let x = g.leaf(img.clone(), false);
        let out = model.forward(&mut g, x, true)?;
        let retained = out.retained.as_ref().expect("retain requested");
        let node = match space {
            EmbedSpace::Content => retained.f_c[level - 1],
            EmbedSpace::Style => retained.f_s[level - 1],
            EmbedSpace::Bottleneck => retained.bottleneck,
        };
        vectors.push(gap_vector(g.value(node), 0));
    }
    EmbeddingSet::new(vectors, space, domain)
}

/// Indices of the `k` nearest corpus vectors by Euclidean distance,
/// ties broken by index.
pub fn nearest_neighbors(query: &[f64], corpus: &EmbeddingSet, k: usize) -> Result<Vec<usize>> {
    if k > corpus.len() {
        return Err(Error::Usage(format!("k={k} exceeds corpus size {}", corpus.len())));
    }
    if corpus.dim() != query.len() {
        return Err(Error::Shape(format!(
            "query dim {} vs corpus dim {}",
            query.len(),
            corpus.dim()
        )));
    }
    let mut order: Vec<(f64, usize)> = corpus
        .vectors
        .iter()
        .enumerate()
        .map(|(i, v)| (sq_dist(query, v), i))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(order.into_iter().take(k).map(|(_, i)| i).collect())
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: f64 = a.iter().map(|&x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| x * x).sum::<f64>().sqrt();
    dot / (na * nb + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square_mask(h: usize, w: usize, y0: usize, x0: usize, side: usize) -> BinaryMask {
        let mut m = BinaryMask::empty(h, w);
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                m.set(y, x, true);
            }
        }
        m
    }

    #[test]
    fn dsc_basic_cases() {
        let a = square_mask(8, 8, 1, 1, 3);
        assert_eq!(dsc(&a, &a).unwrap(), 100.0);
        let b = square_mask(8, 8, 5, 5, 2);
        assert_eq!(dsc(&a, &b).unwrap(), 0.0);
        assert_eq!(dsc(&BinaryMask::empty(4, 4), &BinaryMask::empty(4, 4)).unwrap(), 100.0);
        // |P| = 2 inside |G| = 4: 2*2/(2+4) = 66.67%.
        let g = square_mask(8, 8, 2, 2, 2);
        let mut p = BinaryMask::empty(8, 8);
        p.set(2, 2, true);
        p.set(2, 3, true);
        assert!((dsc(&p, &g).unwrap() - 200.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn dsc_is_symmetric() {
        let a = square_mask(8, 8, 1, 1, 4);
        let b = square_mask(8, 8, 3, 3, 4);
        assert_eq!(dsc(&a, &b).unwrap(), dsc(&b, &a).unwrap());
    }

    #[test]
    fn hd95_identity_and_translation() {
        let a = square_mask(16, 16, 2, 2, 3);
        assert_eq!(hd95(&a, &a).unwrap().value, 0.0);
        // 3x3 square translated by 4 px: every boundary point is 4 away.
        let b = square_mask(16, 16, 2, 6, 3);
        let r = hd95(&a, &b).unwrap();
        assert_eq!(r.value, 4.0);
        assert!(!r.degenerate);
    }

    #[test]
    fn hd95_empty_mask_is_flagged_sentinel() {
        let a = square_mask(8, 8, 1, 1, 2);
        let e = BinaryMask::empty(8, 8);
        let r = hd95(&a, &e).unwrap();
        assert!(r.degenerate);
        assert!((r.value - 128f64.sqrt()).abs() < 1e-12);
    }

    /// O(n^2) oracle: directed nearest-neighbor scans over boundary
    /// point lists, fully independent of the distance-transform path.
    fn hd95_bruteforce(pred: &BinaryMask, gt: &BinaryMask) -> f64 {
        let pb = pred.boundary();
        let gb = gt.boundary();
        let directed = |from: &[(usize, usize)], to: &[(usize, usize)]| {
            let mut d: Vec<f64> = from
                .iter()
                .map(|&(y, x)| {
                    to.iter()
                        .map(|&(gy, gx)| {
                            let dy = y as f64 - gy as f64;
                            let dx = x as f64 - gx as f64;
                            (dy * dy + dx * dx).sqrt()
                        })
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            percentile_linear(&d, 0.95)
        };
        directed(&pb, &gb).max(directed(&gb, &pb))
    }

    #[test]
    fn hd95_matches_bruteforce_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for case in 0..40 {
            let mut a = BinaryMask::empty(32, 32);
            let mut b = BinaryMask::empty(32, 32);
            for _ in 0..rng.random_range(3..40) {
                a.set(rng.random_range(0..32), rng.random_range(0..32), true);
            }
            for _ in 0..rng.random_range(3..40) {
                b.set(rng.random_range(0..32), rng.random_range(0..32), true);
            }
            let fast = hd95(&a, &b).unwrap().value;
            let slow = hd95_bruteforce(&a, &b);
            assert_eq!(fast, slow, "case {case}");
        }
    }

    fn gaussian_set(
        n: usize,
        d: usize,
        mean: f64,
        seed: u64,
        space: EmbedSpace,
    ) -> EmbeddingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = || {
            // Box-Muller.
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let vectors = (0..n).map(|_| (0..d).map(|_| mean + gauss()).collect()).collect();
        EmbeddingSet::new(vectors, space, "test").unwrap()
    }

    #[test]
    fn mmd_identical_sets_clamp_to_zero() {
        let x = gaussian_set(40, 4, 0.0, 1, EmbedSpace::Bottleneck);
        let m = mmd(&x, &x.clone()).unwrap();
        assert!(m.value <= 1e-6, "mmd {}", m.value);
    }

    #[test]
    fn mmd_same_distribution_is_small_and_shifted_is_larger() {
        let x = gaussian_set(500, 4, 0.0, 2, EmbedSpace::Bottleneck);
        let y = gaussian_set(500, 4, 0.0, 3, EmbedSpace::Bottleneck);
        let same = mmd(&x, &y).unwrap().value;
        assert!(same < 0.01, "same-distribution mmd {same}");
        let z = gaussian_set(500, 4, 2.0, 4, EmbedSpace::Bottleneck);
        let shifted = mmd(&x, &z).unwrap().value;
        assert!(shifted > 10.0 * same.max(1e-6), "shifted {shifted} vs same {same}");
    }

    #[test]
    fn mmd_degenerate_set_is_flagged() {
        let x = EmbeddingSet::new(vec![vec![1.0, 1.0]; 4], EmbedSpace::Bottleneck, "a").unwrap();
        let m = mmd(&x, &x.clone()).unwrap();
        assert!(m.degenerate);
    }

    #[test]
    fn jsd_identical_and_disjoint() {
        let x = gaussian_set(200, 3, 0.0, 5, EmbedSpace::Bottleneck);
        assert!(jsd(&x, &x.clone(), 32).unwrap() < 1e-12);
        let lo = EmbeddingSet::new(vec![vec![0.0]; 100], EmbedSpace::Bottleneck, "a").unwrap();
        let hi = EmbeddingSet::new(vec![vec![10.0]; 100], EmbedSpace::Bottleneck, "b").unwrap();
        let v = jsd(&lo, &hi, 32).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-4, "jsd {v}");
    }

    #[test]
    fn frechet_identity_and_unit_shift() {
        let x = gaussian_set(4000, 1, 0.0, 6, EmbedSpace::Bottleneck);
        assert!(frechet(&x, &x.clone()).unwrap() < 1e-6);
        // N(0,1) vs N(1,1): closed form distance 1.
        let y = gaussian_set(4000, 1, 1.0, 7, EmbedSpace::Bottleneck);
        let d = frechet(&x, &y).unwrap();
        assert!((d - 1.0).abs() < 0.1, "frechet {d}");
    }

    #[test]
    fn frechet_matches_diagonal_closed_form() {
        // Construct two explicit diagonal-covariance Gaussians and check
        // against sum((mu1-mu2)^2) + sum((sqrt(v1)-sqrt(v2))^2).
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 6000;
        let scale = [1.0, 0.5, 2.0];
        let shift = [0.0, 1.0, -0.5];
        let mut gauss = || {
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let xv: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| gauss()).collect()).collect();
        let yv: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|d| shift[d] + scale[d] * gauss()).collect())
            .collect();
        let x = EmbeddingSet::new(xv, EmbedSpace::Bottleneck, "a").unwrap();
        let y = EmbeddingSet::new(yv, EmbedSpace::Bottleneck, "b").unwrap();
        let want: f64 = (0..3)
            .map(|d| shift[d] * shift[d] + (1.0 - scale[d]) * (1.0 - scale[d]))
            .sum();
        let got = frechet(&x, &y).unwrap();
        assert!((got - want).abs() / want < 0.02, "frechet {got} vs {want}");
    }

    #[test]
    fn nearest_neighbor_contract() {
        let corpus = EmbeddingSet::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 3.0]],
            EmbedSpace::Bottleneck,
            "c",
        )
        .unwrap();
        // Self at rank 1.
        assert_eq!(nearest_neighbors(&[1.0, 0.0], &corpus, 1).unwrap(), vec![1]);
        // k = N is a permutation of all indices.
        let all = nearest_neighbors(&[0.0, 0.0], &corpus, 4).unwrap();
        let mut sorted = all.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        assert!(nearest_neighbors(&[0.0, 0.0], &corpus, 5).is_err());
    }

    #[test]
    fn nearest_neighbors_agree_with_exhaustive_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vectors: Vec<Vec<f64>> =
            (0..30).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let corpus = EmbeddingSet::new(vectors.clone(), EmbedSpace::Bottleneck, "c").unwrap();
        let query: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = nearest_neighbors(&query, &corpus, 7).unwrap();
        let mut oracle: Vec<(f64, usize)> = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (sq_dist(&query, v), i))
            .collect();
        oracle.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let want: Vec<usize> = oracle.into_iter().take(7).map(|(_, i)| i).collect();
        assert_eq!(got, want);
    }
}
