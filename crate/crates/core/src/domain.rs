//! Finite-measure sets as unions of lattice cells.
//!
//! All grids share one global lattice per cell size `h`: cell `k` (an integer
//! multi-index) has center `h (k + 1/2)`. A shape is rasterized by keeping the
//! cells whose centers lie inside it. Cells are stored in lexicographic order
//! of their multi-indices, which makes matrices and spectra bit-reproducible.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, RieszError};
use crate::kernel::unit_ball_volume;

/// A tagged shape description. Coordinates are in length units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeSpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Axis-aligned box `[corner, corner + sides)`.
    #[serde(rename = "box")]
    Cuboid {
        corner: Vec<f64>,
        sides: Vec<f64>,
    },
    /// Axis-aligned ellipse (ellipsoid for `d ≠ 2`).
    Ellipse {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
    },
    Annulus {
        center: Vec<f64>,
        inner_radius: f64,
        outer_radius: f64,
    },
    /// Logical OR of the members; overlaps are allowed.
    Union {
        members: Vec<ShapeSpec>,
    },
    Translate {
        shape: Box<ShapeSpec>,
        offset: Vec<f64>,
    },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(RieszError::Domain(format!("{name} must be positive, got {v}")))
    }
}

fn finite_point(name: &str, p: &[f64]) -> Result<()> {
    if p.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(RieszError::Domain(format!("{name} has non-finite coordinates")))
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl ShapeSpec {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        ShapeSpec::Ball { center, radius }
    }

    /// Origin-centered ball of the given measure.
    pub fn ball_with_measure(dim: usize, measure: f64) -> Self {
        ShapeSpec::Ball {
            center: vec![0.0; dim],
            radius: (measure / unit_ball_volume(dim)).powf(1.0 / dim as f64),
        }
    }

    pub fn cuboid(corner: Vec<f64>, sides: Vec<f64>) -> Self {
        ShapeSpec::Cuboid { corner, sides }
    }

    /// Origin-centered box with the given side lengths.
    pub fn centered_box(sides: Vec<f64>) -> Self {
        let corner = sides.iter().map(|s| -s / 2.0).collect();
        ShapeSpec::Cuboid { corner, sides }
    }

    pub fn translate(self, offset: Vec<f64>) -> Self {
        ShapeSpec::Translate {
            shape: Box::new(self),
            offset,
        }
    }

    /// Ambient dimension, checking that all parts agree and all lengths are
    /// valid.
    pub fn dim(&self) -> Result<usize> {
        match self {
            ShapeSpec::Ball { center, radius } => {
                finite_point("ball center", center)?;
                positive("ball radius", *radius)?;
                Ok(center.len())
            }
            ShapeSpec::Cuboid { corner, sides } => {
                finite_point("box corner", corner)?;
                if corner.len() != sides.len() {
                    return Err(RieszError::DimensionMismatch {
                        expected: corner.len(),
                        found: sides.len(),
                    });
                }
                for s in sides {
                    positive("box side", *s)?;
                }
                Ok(corner.len())
            }
            ShapeSpec::Ellipse { center, semi_axes } => {
                finite_point("ellipse center", center)?;
                if center.len() != semi_axes.len() {
                    return Err(RieszError::DimensionMismatch {
                        expected: center.len(),
                        found: semi_axes.len(),
                    });
                }
                for s in semi_axes {
                    positive("ellipse semi-axis", *s)?;
                }
                Ok(center.len())
            }
            ShapeSpec::Annulus {
                center,
                inner_radius,
                outer_radius,
            } => {
                finite_point("annulus center", center)?;
                positive("annulus inner radius", *inner_radius)?;
                positive("annulus outer radius", *outer_radius)?;
                if inner_radius >= outer_radius {
                    return Err(RieszError::Domain(format!(
                        "annulus needs inner < outer, got {inner_radius} >= {outer_radius}"
                    )));
                }
                Ok(center.len())
            }
            ShapeSpec::Union { members } => {
                let first = members
                    .first()
                    .ok_or_else(|| RieszError::Domain("union needs at least one member".into()))?
                    .dim()?;
                for m in &members[1..] {
                    let d = m.dim()?;
                    if d != first {
                        return Err(RieszError::DimensionMismatch {
                            expected: first,
                            found: d,
                        });
                    }
                }
                Ok(first)
            }
            ShapeSpec::Translate { shape, offset } => {
                finite_point("translation offset", offset)?;
                let d = shape.dim()?;
                if d != offset.len() {
                    return Err(RieszError::DimensionMismatch {
                        expected: d,
                        found: offset.len(),
                    });
                }
                Ok(d)
            }
        }
    }

    /// Point membership. Boxes are half-open, balls and ellipses open.
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            ShapeSpec::Ball { center, radius } => dist2(p, center) < radius * radius,
            ShapeSpec::Cuboid { corner, sides } => p
                .iter()
                .zip(corner.iter().zip(sides))
                .all(|(x, (c, s))| *x >= *c && *x < c + s),
            ShapeSpec::Ellipse { center, semi_axes } => {
                p.iter()
                    .zip(center.iter().zip(semi_axes))
                    .map(|(x, (c, a))| ((x - c) / a).powi(2))
                    .sum::<f64>()
                    < 1.0
            }
            ShapeSpec::Annulus {
                center,
                inner_radius,
                outer_radius,
            } => {
                let r2 = dist2(p, center);
                r2 >= inner_radius * inner_radius && r2 < outer_radius * outer_radius
            }
            ShapeSpec::Union { members } => members.iter().any(|m| m.contains(p)),
            ShapeSpec::Translate { shape, offset } => {
                let q: Vec<f64> = p.iter().zip(offset).map(|(x, o)| x - o).collect();
                shape.contains(&q)
            }
        }
    }

    /// Tight axis-aligned bounding box as `(lower, upper)`.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ShapeSpec::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            ShapeSpec::Cuboid { corner, sides } => (
                corner.clone(),
                corner.iter().zip(sides).map(|(c, s)| c + s).collect(),
            ),
            ShapeSpec::Ellipse { center, semi_axes } => (
                center.iter().zip(semi_axes).map(|(c, a)| c - a).collect(),
                center.iter().zip(semi_axes).map(|(c, a)| c + a).collect(),
            ),
            ShapeSpec::Annulus {
                center,
                outer_radius,
                ..
            } => (
                center.iter().map(|c| c - outer_radius).collect(),
                center.iter().map(|c| c + outer_radius).collect(),
            ),
            ShapeSpec::Union { members } => {
                let (mut lo, mut hi) = members[0].bounds();
                for m in &members[1..] {
                    let (l, h) = m.bounds();
                    for k in 0..lo.len() {
                        lo[k] = lo[k].min(l[k]);
                        hi[k] = hi[k].max(h[k]);
                    }
                }
                (lo, hi)
            }
            ShapeSpec::Translate { shape, offset } => {
                let (lo, hi) = shape.bounds();
                (
                    lo.iter().zip(offset).map(|(x, o)| x + o).collect(),
                    hi.iter().zip(offset).map(|(x, o)| x + o).collect(),
                )
            }
        }
    }

    /// Exact Lebesgue measure when it is known analytically. Unions qualify
    /// only if their members' bounding boxes have disjoint interiors.
    pub fn nominal_measure(&self) -> Option<f64> {
        let dim = self.dim().ok()?;
        match self {
            ShapeSpec::Ball { radius, .. } => Some(unit_ball_volume(dim) * radius.powi(dim as i32)),
            ShapeSpec::Cuboid { sides, .. } => Some(sides.iter().product()),
            ShapeSpec::Ellipse { semi_axes, .. } => {
                Some(unit_ball_volume(dim) * semi_axes.iter().product::<f64>())
            }
            ShapeSpec::Annulus {
                inner_radius,
                outer_radius,
                ..
            } => Some(
                unit_ball_volume(dim)
                    * (outer_radius.powi(dim as i32) - inner_radius.powi(dim as i32)),
            ),
            ShapeSpec::Union { members } => {
                let boxes: Vec<_> = members.iter().map(|m| m.bounds()).collect();
                for i in 0..boxes.len() {
                    for j in i + 1..boxes.len() {
                        let overlap = (0..dim).all(|k| {
                            boxes[i].0[k] < boxes[j].1[k] && boxes[j].0[k] < boxes[i].1[k]
                        });
                        if overlap {
                            return None;
                        }
                    }
                }
                members.iter().map(|m| m.nominal_measure()).sum()
            }
            ShapeSpec::Translate { shape, .. } => shape.nominal_measure(),
        }
    }
}

/// Axis-aligned box `corner + [0, side_lengths]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub corner: Vec<f64>,
    pub side_lengths: Vec<f64>,
}

/// A rasterized set: the lattice cells `h (k + 1/2)` selected from a shape.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    dim: usize,
    h: f64,
    /// Flattened multi-indices, `dim` per cell, lexicographically sorted.
    indices: Vec<i64>,
    bounding_box: BoundingBox,
    components: usize,
}

/// Documented JSON form of a [`GridDomain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDomainJson {
    pub dim: usize,
    pub h: f64,
    pub bounding_box: BoundingBox,
    pub cell_indices: Vec<Vec<i64>>,
}

impl GridDomain {
    /// Build a domain from explicit multi-indices (any order, duplicates
    /// removed). The bounding box is the cells' hull padded by one cell.
    pub fn from_indices(dim: usize, h: f64, cells: Vec<Vec<i64>>) -> Result<Self> {
        if dim == 0 {
            return Err(RieszError::Domain("dimension must be at least 1".into()));
        }
        positive("cell size h", h)?;
        if cells.is_empty() {
            return Err(RieszError::EmptyDomain { h });
        }
        let mut cells = cells;
        for c in &cells {
            if c.len() != dim {
                return Err(RieszError::DimensionMismatch {
                    expected: dim,
                    found: c.len(),
                });
            }
        }
        cells.sort();
        cells.dedup();
        let mut lo = vec![i64::MAX; dim];
        let mut hi = vec![i64::MIN; dim];
        for c in &cells {
            for k in 0..dim {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k] + 1);
            }
        }
        let bounding_box = BoundingBox {
            corner: lo.iter().map(|&l| (l - 1) as f64 * h).collect(),
            side_lengths: lo.iter().zip(&hi).map(|(&l, &u)| (u - l + 2) as f64 * h).collect(),
        };
        Self::from_sorted(dim, h, cells.concat(), bounding_box)
    }

    fn from_sorted(dim: usize, h: f64, indices: Vec<i64>, bounding_box: BoundingBox) -> Result<Self> {
        if indices.is_empty() {
            return Err(RieszError::EmptyDomain { h });
        }
        let mut domain = Self {
            dim,
            h,
            indices,
            bounding_box,
            components: 0,
        };
        domain.components = domain.count_components();
        Ok(domain)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.indices.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn bounding_box(&self) -> &BoundingBox {
        &self.bounding_box
    }

    /// Multi-index of cell `i`.
    pub fn index(&self, i: usize) -> &[i64] {
        &self.indices[i * self.dim..(i + 1) * self.dim]
    }

    pub fn indices(&self) -> impl Iterator<Item = &[i64]> {
        self.indices.chunks_exact(self.dim)
    }

    /// Center of cell `i`.
    pub fn center(&self, i: usize) -> Vec<f64> {
        self.index(i)
            .iter()
            .map(|&k| self.h * (k as f64 + 0.5))
            .collect()
    }

    /// Squared center distance between cells `i` and `j` in units of `h²`.
    #[inline]
    pub fn index_dist2(&self, i: usize, j: usize) -> i64 {
        self.index(i)
            .iter()
            .zip(self.index(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// `count · h^d`.
    pub fn measure(&self) -> f64 {
        self.len() as f64 * self.cell_volume()
    }

    /// Number of face-connected components.
    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_connected(&self) -> bool {
        self.components == 1
    }

    /// Hex SHA-256 over dimension, `h` bits, and the sorted multi-indices.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim as u64).to_le_bytes());
        hasher.update(self.h.to_bits().to_le_bytes());
        for k in &self.indices {
            hasher.update(k.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// Dilation about the origin by `t > 0`: `h` and every center scale by
    /// `t`, the multi-indices are unchanged.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        positive("dilation factor", t)?;
        let mut out = self.clone();
        out.h = self.h * t;
        out.bounding_box = BoundingBox {
            corner: self.bounding_box.corner.iter().map(|c| c * t).collect(),
            side_lengths: self.bounding_box.side_lengths.iter().map(|s| s * t).collect(),
        };
        Ok(out)
    }

    /// Translation by `h · shift` for an integer vector `shift`.
    pub fn shifted(&self, shift: &[i64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(RieszError::DimensionMismatch {
                expected: self.dim,
                found: shift.len(),
            });
        }
        let mut out = self.clone();
        for (i, k) in out.indices.iter_mut().enumerate() {
            *k += shift[i % self.dim];
        }
        for (c, s) in out.bounding_box.corner.iter_mut().zip(shift) {
            *c += *s as f64 * self.h;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> GridDomainJson {
        GridDomainJson {
            dim: self.dim,
            h: self.h,
            bounding_box: self.bounding_box.clone(),
            cell_indices: self.indices().map(|k| k.to_vec()).collect(),
        }
    }

    pub fn from_json(json: GridDomainJson) -> Result<Self> {
        let mut d = Self::from_indices(json.dim, json.h, json.cell_indices)?;
        d.bounding_box = json.bounding_box;
        Ok(d)
    }

    fn count_components(&self) -> usize {
        let n = self.len();
        let lookup: HashMap<&[i64], usize> = (0..n).map(|i| (self.index(i), i)).collect();
        let mut label = vec![usize::MAX; n];
        let mut components = 0;
        let mut stack = Vec::new();
        let mut probe = vec![0i64; self.dim];
        for seed in 0..n {
            if label[seed] != usize::MAX {
                continue;
            }
            label[seed] = components;
            stack.push(seed);
            while let Some(i) = stack.pop() {
                for axis in 0..self.dim {
                    for step in [-1i64, 1] {
                        probe.copy_from_slice(self.index(i));
                        probe[axis] += step;
                        if let Some(&j) = lookup.get(probe.as_slice()) {
                            if label[j] == usize::MAX {
                                label[j] = components;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
            components += 1;
        }
        components
    }
}

/// Keep the lattice cells of size `h` whose centers lie inside `shape`.
pub fn rasterize(shape: &ShapeSpec, h: f64) -> Result<GridDomain> {
    positive("cell size h", h)?;
    let dim = shape.dim()?;
    let (lo, hi) = shape.bounds();
    let first: Vec<i64> = lo.iter().map(|&l| (l / h).floor() as i64 - 1).collect();
    let last: Vec<i64> = hi.iter().map(|&u| (u / h).ceil() as i64 + 1).collect();

    let mut indices = Vec::new();
    let mut k = first.clone();
    let mut center = vec![0.0; dim];
    // odometer over the index box, last axis fastest
    'outer: loop {
        for a in 0..dim {
            center[a] = h * (k[a] as f64 + 0.5);
        }
        if shape.contains(&center) {
            indices.extend_from_slice(&k);
        }
        let mut a = dim;
        loop {
            if a == 0 {
                break 'outer;
            }
            a -= 1;
            k[a] += 1;
            if k[a] <= last[a] {
                break;
            }
            k[a] = first[a];
        }
    }

    if indices.is_empty() {
        return Err(RieszError::EmptyDomain { h });
    }
    let bounding_box = BoundingBox {
        corner: lo.iter().map(|l| l - h).collect(),
        side_lengths: lo.iter().zip(&hi).map(|(l, u)| u - l + 2.0 * h).collect(),
    };
    GridDomain::from_sorted(dim, h, indices, bounding_box)
}

pub fn measure(domain: &GridDomain) -> f64 {
    domain.measure()
}

/// The origin-centered ball with the same measure as `domain`.
pub fn ball_rearrangement(domain: &GridDomain) -> ShapeSpec {
    ShapeSpec::ball_with_measure(domain.dim(), domain.measure())
}

/// Two equal balls of total measure `total_measure` on the first axis,
/// symmetric about the origin, with boundary gap `distance`.
pub fn two_balls(total_measure: f64, distance: f64, dim: usize) -> Result<ShapeSpec> {
    positive("total measure", total_measure)?;
    if !(distance >= 0.0 && distance.is_finite()) {
        return Err(RieszError::Domain(format!(
            "ball gap must be nonnegative, got {distance}"
        )));
    }
    if dim == 0 {
        return Err(RieszError::Domain("dimension must be at least 1".into()));
    }
    let radius = (total_measure / 2.0 / unit_ball_volume(dim)).powf(1.0 / dim as f64);
    let offset = radius + distance / 2.0;
    let at = |s: f64| {
        let mut c = vec![0.0; dim];
        c[0] = s * offset;
        ShapeSpec::Ball { center: c, radius }
    };
    Ok(ShapeSpec::Union {
        members: vec![at(-1.0), at(1.0)],
    })
}
