//! User placement on the unit square, the square cluster grid, frequency
//! reuse colouring and in-cluster TX/RX pairing.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::caching::{CachePlacer, CacheSet};
use crate::error::{invalid, Result};
use crate::popularity::PopularityModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }
}

/// `n` independent uniform points on `[0,1]²` (binomial point process).
pub fn place_users<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Point> {
    (0..n)
        .map(|_| {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            Point::new(x, y)
        })
        .collect()
}

/// Integer grid resolution chosen for a requested cluster side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSide {
    pub k: usize,
    pub requested: f64,
    pub realized: f64,
}

/// `k = max(1, round(1/d))`; the realised side is `1/k`.
pub fn grid_from_target_side(d_target: f64) -> Result<GridSide> {
    if !(d_target > 0.0 && d_target <= 1.0) {
        return Err(invalid("d_target", format!("cluster side must lie in (0, 1], got {d_target}")));
    }
    let k = ((1.0 / d_target).round() as usize).max(1);
    Ok(GridSide {
        k,
        requested: d_target,
        realized: 1.0 / k as f64,
    })
}

/// `k × k` partition of the unit square with per-cell membership lists.
#[derive(Debug, Clone)]
pub struct ClusterGrid {
    k: usize,
    side: f64,
    cell_of: Vec<u32>,
    offsets: Vec<u32>,
    members: Vec<u32>,
}

impl ClusterGrid {
    pub fn cells_per_side(&self) -> usize {
        self.k
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn num_cells(&self) -> usize {
        self.k * self.k
    }

    pub fn cell_of(&self, user: usize) -> usize {
        self.cell_of[user] as usize
    }

    /// Users in `cell`, ascending.
    pub fn members(&self, cell: usize) -> &[u32] {
        &self.members[self.offsets[cell] as usize..self.offsets[cell + 1] as usize]
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell / self.k, cell % self.k)
    }

    pub fn cell_index(&self, cx: usize, cy: usize) -> usize {
        cx * self.k + cy
    }
}

#[inline]
fn axis_cell(v: f64, k: usize) -> usize {
    ((v * k as f64).floor().max(0.0) as usize).min(k - 1)
}

/// Cell of `(x, y)` is `(⌊x·k⌋, ⌊y·k⌋)`, clamped to `k - 1` on the far edges.
pub fn cell_coords(p: &Point, k: usize) -> (usize, usize) {
    (axis_cell(p.x, k), axis_cell(p.y, k))
}

pub fn build_grid(k: usize, positions: &[Point]) -> Result<ClusterGrid> {
    if k == 0 {
        return Err(invalid("k", "grid needs at least one cell per side"));
    }
    let cells = k * k;
    let cell_of: Vec<u32> = positions
        .iter()
        .map(|p| {
            let (cx, cy) = cell_coords(p, k);
            (cx * k + cy) as u32
        })
        .collect();
    let mut offsets = vec![0u32; cells + 1];
    for &c in &cell_of {
        offsets[c as usize + 1] += 1;
    }
    for i in 0..cells {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut members = vec![0u32; positions.len()];
    for (u, &c) in cell_of.iter().enumerate() {
        members[fill[c as usize] as usize] = u as u32;
        fill[c as usize] += 1;
    }
    Ok(ClusterGrid {
        k,
        side: 1.0 / k as f64,
        cell_of,
        offsets,
        members,
    })
}

/// Reuse period per axis, `2(K+1)`.
pub fn reuse_period(reuse_k: usize) -> usize {
    2 * (reuse_k + 1)
}

/// Number of colours (sub-channels), `(2(K+1))²`.
pub fn reuse_colors(reuse_k: usize) -> usize {
    let p = reuse_period(reuse_k);
    p * p
}

/// `(cx mod 2(K+1))·2(K+1) + (cy mod 2(K+1))`.
pub fn reuse_color(cx: usize, cy: usize, reuse_k: usize) -> u32 {
    let p = reuse_period(reuse_k);
    ((cx % p) * p + cy % p) as u32
}

/// Colour of every cell of `grid`, indexed by cell.
pub fn color_grid(grid: &ClusterGrid, reuse_k: usize) -> Vec<u32> {
    (0..grid.num_cells())
        .map(|c| {
            let (cx, cy) = grid.coords(c);
            reuse_color(cx, cy, reuse_k)
        })
        .collect()
}

/// Cache layout of a realization.
#[derive(Debug, Clone, Copy)]
pub enum CachePlacement<'a> {
    Single(&'a CachePlacer),
    Split(&'a CachePlacer, &'a CachePlacer),
}

/// Which part of each user's cache a delivery slot may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    Whole,
    Slot1,
    Slot2,
}

/// One network draw: positions, one request per user, and cache contents.
#[derive(Debug, Clone)]
pub struct NetworkRealization {
    pub positions: Vec<Point>,
    /// 1-based file index per user.
    pub requests: Vec<u32>,
    cache_files: Vec<u32>,
    stride: usize,
    split_at: Option<usize>,
    pub seed: u64,
}

impl NetworkRealization {
    /// Draws positions, then requests, then caches from one ChaCha stream.
    pub fn generate(n: usize, model: &PopularityModel, placement: CachePlacement<'_>, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("N", "need at least one user"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions = place_users(n, &mut rng);
        let requests = (0..n).map(|_| model.sample_request(&mut rng) as u32).collect();
        let (stride, split_at) = match placement {
            CachePlacement::Single(p) => (p.cache_size(), None),
            CachePlacement::Split(a, b) => (a.cache_size() + b.cache_size(), Some(a.cache_size())),
        };
        let mut cache_files = Vec::with_capacity(n * stride);
        for _ in 0..n {
            match placement {
                CachePlacement::Single(p) => p.place_into(&mut rng, &mut cache_files),
                CachePlacement::Split(a, b) => {
                    a.place_into(&mut rng, &mut cache_files);
                    b.place_into(&mut rng, &mut cache_files);
                }
            }
        }
        Ok(Self {
            positions,
            requests,
            cache_files,
            stride,
            split_at,
            seed,
        })
    }

    /// Assembles a realization from explicit parts (all caches the same size).
    pub fn from_parts(positions: Vec<Point>, requests: Vec<u32>, caches: Vec<CacheSet>, seed: u64) -> Result<Self> {
        let n = positions.len();
        if requests.len() != n || caches.len() != n {
            return Err(invalid("realization", "positions, requests and caches differ in length"));
        }
        if positions
            .iter()
            .any(|p| !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y))
        {
            return Err(invalid("positions", "coordinates must lie in [0, 1]"));
        }
        let stride = caches.first().map_or(0, |c| c.files().len());
        let split_at = caches.first().and_then(|c| c.is_split().then(|| c.subspace(1).len()));
        let mut cache_files = Vec::with_capacity(n * stride);
        for c in &caches {
            if c.files().len() != stride || c.is_split() != split_at.is_some() {
                return Err(invalid("caches", "all caches must share one layout"));
            }
            cache_files.extend_from_slice(c.files());
        }
        Ok(Self {
            positions,
            requests,
            cache_files,
            stride,
            split_at,
            seed,
        })
    }

    pub fn num_users(&self) -> usize {
        self.positions.len()
    }

    pub fn cache_size(&self) -> usize {
        self.stride
    }

    pub fn is_split(&self) -> bool {
        self.split_at.is_some()
    }

    pub fn cache(&self, u: usize) -> &[u32] {
        &self.cache_files[u * self.stride..(u + 1) * self.stride]
    }

    pub fn cache_set(&self, u: usize) -> CacheSet {
        let all = self.cache(u);
        match self.split_at {
            None => CacheSet::single(all.to_vec()),
            Some(k) => CacheSet::split(all[..k].to_vec(), all[k..].to_vec()),
        }
    }

    pub fn subspace(&self, u: usize, which: Subspace) -> &[u32] {
        let all = self.cache(u);
        match (self.split_at, which) {
            (None, _) | (Some(_), Subspace::Whole) => all,
            (Some(k), Subspace::Slot1) => &all[..k],
            (Some(k), Subspace::Slot2) => &all[k..],
        }
    }

    /// Line-oriented debug dump: `user x y request files…`.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# user x y request cached_files")?;
        for u in 0..self.num_users() {
            let p = self.positions[u];
            write!(w, "{u} {} {} {}", p.x, p.y, self.requests[u])?;
            for f in self.cache(u) {
                write!(w, " {f}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub tx: u32,
    pub rx: u32,
    pub distance: f64,
    pub file: u32,
    pub cell: u32,
}

#[derive(Debug, Clone)]
pub struct PairingOutcome {
    /// One link per served user, ordered by receiver.
    pub links: Vec<Link>,
    pub outage: Vec<bool>,
}

impl PairingOutcome {
    pub fn outage_count(&self) -> usize {
        self.outage.iter().filter(|&&o| o).count()
    }

    pub fn outage_fraction(&self) -> f64 {
        self.outage_count() as f64 / self.outage.len() as f64
    }
}

/// Serves each user from the nearest same-cell user holding its request in
/// the given cache subspace (itself included, at distance 0). Ties go to the
/// lowest user index. Users with no candidate are in outage.
#[allow(clippy::needless_range_loop)]
pub fn pair_within_clusters(real: &NetworkRealization, grid: &ClusterGrid, which: Subspace) -> PairingOutcome {
    let n = real.num_users();
    let mut entries: Vec<(u32, u32, u32)> = Vec::with_capacity(n * real.cache_size());
    for u in 0..n {
        let cell = grid.cell_of(u) as u32;
        for &f in real.subspace(u, which) {
            entries.push((cell, f, u as u32));
        }
    }
    entries.sort_unstable();

    let mut links = Vec::with_capacity(n);
    let mut outage = vec![false; n];
    for u in 0..n {
        let cell = grid.cell_of(u) as u32;
        let f = real.requests[u];
        let lo = entries.partition_point(|e| (e.0, e.1) < (cell, f));
        let hi = entries.partition_point(|e| (e.0, e.1) <= (cell, f));
        if lo == hi {
            outage[u] = true;
            continue;
        }
        let me = real.positions[u];
        let mut best = (f64::INFINITY, u32::MAX);
        for e in &entries[lo..hi] {
            let d2 = real.positions[e.2 as usize].dist2(&me);
            if d2 < best.0 {
                best = (d2, e.2);
            }
        }
        links.push(Link {
            tx: best.1,
            rx: u as u32,
            distance: best.0.sqrt(),
            file: f,
            cell,
        });
    }
    PairingOutcome { links, outage }
}
