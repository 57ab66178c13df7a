//! Square lattices in D dimensions with open or periodic boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Sites are numbered in row-major order over `extents`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    extents: Vec<usize>,
    boundary: Vec<Boundary>,
}

/// Sorted, deduplicated set of sites.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Region {
    sites: Vec<usize>,
}

impl Region {
    pub fn new(mut sites: Vec<usize>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        Region { sites }
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    /// Position of `site` inside the region (its qubit slot, 0 = most significant).
    pub fn position(&self, site: usize) -> Option<usize> {
        self.sites.binary_search(&site).ok()
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.sites.iter().all(|&s| other.contains(s))
    }
}

/// Distance to the outside of a region's lattice; `Unbounded` on a lattice
/// without open axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryDistance {
    Finite(usize),
    Unbounded,
}

impl Lattice {
    pub fn new(extents: Vec<usize>, boundary: Vec<Boundary>) -> Result<Self> {
        if extents.is_empty() {
            return Err(Error::InvalidLattice("dimension must be positive".into()));
        }
        if extents.iter().any(|&e| e == 0) {
            return Err(Error::InvalidLattice("extents must be positive".into()));
        }
        if boundary.len() != extents.len() {
            return Err(Error::InvalidLattice(format!(
                "{} boundary flags for {} axes",
                boundary.len(),
                extents.len()
            )));
        }
        let n: usize = extents.iter().product();
        // Pauli masks are 64-bit words.
        if n > 64 {
            return Err(Error::InvalidLattice(format!("{n} sites exceeds the 64-site limit")));
        }
        Ok(Lattice { extents, boundary })
    }

    pub fn chain(n: usize, boundary: Boundary) -> Result<Self> {
        Self::new(vec![n], vec![boundary])
    }

    pub fn square(lx: usize, ly: usize, boundary: Boundary) -> Result<Self> {
        Self::new(vec![lx, ly], vec![boundary; 2])
    }

    pub fn dimension(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn boundary(&self) -> &[Boundary] {
        &self.boundary
    }

    pub fn n_sites(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_fully_periodic(&self) -> bool {
        self.boundary.iter().all(|&b| b == Boundary::Periodic)
    }

    fn check(&self, site: usize) -> Result<()> {
        if site >= self.n_sites() {
            return Err(Error::SiteOutOfRange { site, n_sites: self.n_sites() });
        }
        Ok(())
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut c = vec![0; self.dimension()];
        let mut rem = site;
        for axis in (0..self.dimension()).rev() {
            c[axis] = rem % self.extents[axis];
            rem /= self.extents[axis];
        }
        c
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.extents).fold(0, |acc, (&c, &e)| acc * e + c)
    }

    fn axis_distance(&self, axis: usize, x: usize, y: usize) -> usize {
        let d = x.abs_diff(y);
        match self.boundary[axis] {
            Boundary::Open => d,
            Boundary::Periodic => d.min(self.extents[axis] - d),
        }
    }

    /// Manhattan distance with per-axis wraparound on periodic axes.
    pub fn graph_distance(&self, a: usize, b: usize) -> Result<usize> {
        self.check(a)?;
        self.check(b)?;
        let (ca, cb) = (self.coords(a), self.coords(b));
        Ok((0..self.dimension()).map(|ax| self.axis_distance(ax, ca[ax], cb[ax])).sum())
    }

    /// All sites within graph distance `r` of `a`.
    pub fn ball(&self, a: usize, r: usize) -> Result<Region> {
        self.check(a)?;
        let ca = self.coords(a);
        let sites = (0..self.n_sites())
            .filter(|&b| {
                let cb = self.coords(b);
                (0..self.dimension()).map(|ax| self.axis_distance(ax, ca[ax], cb[ax])).sum::<usize>() <= r
            })
            .collect();
        Ok(Region::new(sites))
    }

    /// Largest distance between any two sites.
    pub fn diameter(&self) -> usize {
        (0..self.dimension())
            .map(|ax| match self.boundary[ax] {
                Boundary::Open => self.extents[ax] - 1,
                Boundary::Periodic => self.extents[ax] / 2,
            })
            .sum()
    }

    /// Minimal distance from any site of `x` to a site outside the lattice
    /// across an open axis.
    pub fn boundary_distance(&self, x: &Region) -> Result<BoundaryDistance> {
        if x.is_empty() {
            return Err(Error::EmptyRegion);
        }
        for &s in x.sites() {
            self.check(s)?;
        }
        let mut best: Option<usize> = None;
        for &s in x.sites() {
            let c = self.coords(s);
            for ax in 0..self.dimension() {
                if self.boundary[ax] == Boundary::Open {
                    let d = (c[ax] + 1).min(self.extents[ax] - c[ax]);
                    best = Some(best.map_or(d, |b| b.min(d)));
                }
            }
        }
        Ok(best.map_or(BoundaryDistance::Unbounded, BoundaryDistance::Finite))
    }

    /// Unordered nearest-neighbour pairs `(a, b)` with `a < b`, each once.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n_sites() {
            let c = self.coords(a);
            for ax in 0..self.dimension() {
                let e = self.extents[ax];
                let next = match (c[ax] + 1 < e, self.boundary[ax]) {
                    (true, _) => Some(c[ax] + 1),
                    (false, Boundary::Periodic) if e > 1 => Some(0),
                    _ => None,
                };
                if let Some(x) = next {
                    let mut nc = c.clone();
                    nc[ax] = x;
                    let b = self.site(&nc);
                    let pair = (a.min(b), a.max(b));
                    if a != b && !out.contains(&pair) {
                        out.push(pair);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Lattice translations as site permutations (`perm[s]` is the image of
    /// `s`). Includes the identity. Only periodic axes translate; the result
    /// is indexed so that translation `g` maps site 0 to site `g` on a fully
    /// periodic lattice.
    pub fn translations(&self) -> Vec<Vec<usize>> {
        if !self.is_fully_periodic() {
            return vec![(0..self.n_sites()).collect()];
        }
        (0..self.n_sites())
            .map(|g| {
                let shift = self.coords(g);
                (0..self.n_sites())
                    .map(|s| {
                        let c = self.coords(s);
                        let moved: Vec<usize> =
                            c.iter().zip(&shift).zip(&self.extents).map(|((&x, &d), &e)| (x + d) % e).collect();
                        self.site(&moved)
                    })
                    .collect()
            })
            .collect()
    }
}
