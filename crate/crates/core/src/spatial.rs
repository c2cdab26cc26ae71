//! Sites, kernels, bandwidth schedules and kernel-center placement.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LampError, Result};
use crate::index::{dist2, GridIndex};

/// A 1-D or 2-D observation coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct Site {
    xy: [f64; 2],
    dim: u8,
}

impl Site {
    pub fn new_1d(x: f64) -> Self {
        Site { xy: [x, 0.0], dim: 1 }
    }

    pub fn new_2d(x: f64, y: f64) -> Self {
        Site { xy: [x, y], dim: 2 }
    }

    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(LampError::InvalidInput(format!(
                "non-finite coordinate in {coords:?}"
            )));
        }
        match *coords {
            [x] => Ok(Site::new_1d(x)),
            [x, y] => Ok(Site::new_2d(x, y)),
            _ => Err(LampError::InvalidInput(format!(
                "sites must have 1 or 2 coordinates, got {}",
                coords.len()
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.xy[..self.dim as usize]
    }

    /// Coordinates padded to two entries (1-D sites have y = 0).
    pub fn xy(&self) -> [f64; 2] {
        self.xy
    }
}

impl From<Site> for Vec<f64> {
    fn from(s: Site) -> Self {
        s.coords().to_vec()
    }
}

impl TryFrom<Vec<f64>> for Site {
    type Error = LampError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Site::new(&v)
    }
}

/// Checks that all sites share one dimension and returns it.
pub fn common_dim(sites: &[Site]) -> Result<usize> {
    let first = sites
        .first()
        .ok_or_else(|| LampError::InvalidInput("no sites".into()))?;
    let dim = first.dim();
    for s in sites {
        if s.dim() != dim {
            return Err(LampError::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
    }
    Ok(dim)
}

pub fn distance(a: &Site, b: &Site) -> Result<f64> {
    if a.dim != b.dim {
        return Err(LampError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(dist2(&a.xy, &b.xy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Gaussian,
    Exponential,
}

impl std::str::FromStr for KernelKind {
    type Err = LampError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "gau" => Ok(KernelKind::Gaussian),
            "exponential" | "exp" => Ok(KernelKind::Exponential),
            other => Err(LampError::InvalidInput(format!("unknown kernel `{other}`"))),
        }
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Exponential => "exponential",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(LampError::InvalidInput(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(KernelSpec { kind, bandwidth })
    }

    #[inline]
    pub fn weight(&self, d: f64) -> f64 {
        kernel_weight(self, d)
    }

    /// Distance beyond which the weight drops to `w` or below.
    pub fn radius_for_weight(&self, w: f64) -> f64 {
        let t = -w.ln();
        match self.kind {
            KernelKind::Gaussian => self.bandwidth * t.max(0.0).sqrt(),
            KernelKind::Exponential => self.bandwidth * t.max(0.0),
        }
    }
}

/// `exp(-d²/h²)` for the Gaussian kernel, `exp(-d/h)` for the exponential one.
#[inline]
pub fn kernel_weight(k: &KernelSpec, d: f64) -> f64 {
    let u = d / k.bandwidth;
    match k.kind {
        KernelKind::Gaussian => (-u * u).exp(),
        KernelKind::Exponential => (-u).exp(),
    }
}

/// Geometric bandwidth decay `h_r = h1 * delta^(r-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSchedule {
    pub h1: f64,
    pub delta: f64,
}

impl BandwidthSchedule {
    pub fn new(h1: f64, delta: f64) -> Result<Self> {
        if !(h1 > 0.0 && h1.is_finite()) {
            return Err(LampError::InvalidInput(format!("h1 must be positive, got {h1}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(LampError::InvalidInput(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        Ok(BandwidthSchedule { h1, delta })
    }

    pub fn bandwidth_at(&self, r: usize) -> f64 {
        bandwidth_at(self, r)
    }
}

pub fn bandwidth_at(s: &BandwidthSchedule, r: usize) -> f64 {
    assert!(r >= 1, "resolutions start at 1");
    // Repeated multiplication, matching how the training loop decays h.
    let mut h = s.h1;
    for _ in 1..r {
        h *= s.delta;
    }
    h
}

/// Span of the sites: the coordinate range in 1-D, the diagonal of the
/// axis-aligned bounding square in 2-D.
pub fn bounding_diagonal(sites: &[Site]) -> Result<f64> {
    if sites.len() < 2 {
        return Err(LampError::DegenerateRegion);
    }
    let dim = common_dim(sites)?;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for s in sites {
        for k in 0..2 {
            lo[k] = lo[k].min(s.xy[k]);
            hi[k] = hi[k].max(s.xy[k]);
        }
    }
    let side = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    if side <= 0.0 {
        return Err(LampError::DegenerateRegion);
    }
    Ok(if dim == 1 { side } else { side * std::f64::consts::SQRT_2 })
}

/// Number of kernel centers covering a region of span `d` at bandwidth `h`:
/// `round(c_factor * D / h)` in 1-D, `round(c_factor * D² / h²)` in 2-D, at least 1.
pub fn center_count_with_factor(d: f64, h: f64, dim: usize, c_factor: f64) -> usize {
    let ratio = d / h;
    let raw = if dim == 1 {
        c_factor * ratio
    } else {
        c_factor * ratio * ratio
    };
    let rounded = raw.round();
    if rounded >= usize::MAX as f64 {
        usize::MAX
    } else {
        (rounded as usize).max(1)
    }
}

pub fn center_count(d: f64, h: f64, dim: usize) -> usize {
    center_count_with_factor(d, h, dim, 1.5)
}

/// Kernel centers of one resolution, each a sample site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSet {
    /// Index of each center in the site slice it was placed on.
    pub indices: Vec<usize>,
    pub sites: Vec<Site>,
}

impl CenterSet {
    pub fn count(&self) -> usize {
        self.sites.len()
    }
}

pub(crate) fn distinct_count(points: &[[f64; 2]]) -> usize {
    let mut keys: Vec<(u64, u64)> = points
        .iter()
        .map(|p| (p[0].to_bits(), p[1].to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

const KMEANS_MAX_ITER: usize = 50;
const KMEANS_TOL: f64 = 1e-6;
const BRUTE_FORCE_CENTERS: usize = 16;

/// Result of Lloyd's algorithm.
#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Vec<[f64; 2]>,
    pub assignment: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    pub iterations: usize,
}

fn nearest_brute(centroids: &[[f64; 2]], p: &[f64; 2]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = dist2(c, p);
        if d < bd {
            bd = d;
            best = j;
        }
    }
    best
}

fn assign(points: &[[f64; 2]], centroids: &[[f64; 2]], extent: f64) -> Vec<usize> {
    if centroids.len() <= BRUTE_FORCE_CENTERS {
        return crate::util::par_map(points.len(), |i| nearest_brute(centroids, &points[i]));
    }
    let spacing = extent / (centroids.len() as f64).sqrt();
    let grid = GridIndex::new(centroids.to_vec(), spacing.max(f64::MIN_POSITIVE));
    crate::util::par_map(points.len(), |i| {
        grid.nearest(points[i]).map(|(j, _)| j).unwrap_or(0)
    })
}

/// k-means with k-means++ seeding followed by Lloyd iterations
/// (at most 50, stopping once no centroid moves more than 1e-6 of the data extent).
pub fn kmeans<R: Rng + ?Sized>(points: &[[f64; 2]], k: usize, rng: &mut R) -> Result<KMeans> {
    let n = points.len();
    if k == 0 {
        return Err(LampError::InvalidInput("k must be positive".into()));
    }
    let available = distinct_count(points);
    if k > available {
        return Err(LampError::TooManyCenters {
            requested: k,
            available,
        });
    }

    let mut centroids: Vec<[f64; 2]> = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    centroids.push(points[first]);
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &points[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave the target just past the accumulated sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap_or(0))
        } else {
            break;
        };
        let c = points[next];
        centroids.push(c);
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, &c);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);

    let mut assignment = assign(points, &centroids, extent);
    let mut iterations = 0;
    for _ in 0..KMEANS_MAX_ITER {
        iterations += 1;
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            let c = [sums[j][0] / counts[j] as f64, sums[j][1] / counts[j] as f64];
            shift = shift.max(dist2(&c, &centroids[j]).sqrt());
            centroids[j] = c;
        }
        assignment = assign(points, &centroids, extent);
        if shift <= KMEANS_TOL * extent {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| dist2(p, &centroids[a]))
        .sum();
    Ok(KMeans {
        centroids,
        assignment,
        inertia,
        iterations,
    })
}

/// Places `count` kernel centers: k-means on the site coordinates, each
/// cluster center snapped to its nearest sample site. Snapped duplicates
/// are dropped, so the result may hold fewer than `count` centers.
pub fn place_centers<R: Rng + ?Sized>(
    sites: &[Site],
    count: usize,
    rng: &mut R,
) -> Result<CenterSet> {
    common_dim(sites)?;
    let points: Vec<[f64; 2]> = sites.iter().map(Site::xy).collect();
    let km = kmeans(&points, count, rng)?;
    let extent = (bounding_diagonal(sites).unwrap_or(1.0)).max(f64::MIN_POSITIVE);
    let spacing = extent / (points.len() as f64).sqrt();
    let grid = GridIndex::new(points, spacing);
    let mut seen = std::collections::HashSet::new();
    let mut indices = Vec::with_capacity(km.centroids.len());
    for c in &km.centroids {
        if let Some((i, _)) = grid.nearest(*c) {
            if seen.insert(i) {
                indices.push(i);
            }
        }
    }
    let centers = indices.iter().map(|&i| sites[i]).collect();
    Ok(CenterSet {
        indices,
        sites: centers,
    })
}
