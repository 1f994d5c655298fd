//! Dense Nyström discretization of the Riesz potential on a grid domain.
//!
//! Off-diagonal entries are `ε(|x_i - x_j|) h^d`; the singular diagonal is
//! replaced by a self-term that integrates the kernel over the cell.

use std::io::{Read, Write};

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::GridDomain;
use crate::error::{Result, RieszError};
use crate::kernel::{unit_ball_volume, unit_sphere_area, RieszParams};

/// Default cap on the number of cells for a dense assembly.
pub const DEFAULT_MAX_CELLS: usize = 20_000;

/// Equal-volume-ball approximation of `∫_cell ε(|x_c - y|) dy`:
/// `c ω_{d-1} ρ^α / α` with `ρ = (h^d / v_d)^{1/d}`.
pub fn self_term(params: &RieszParams, h: f64) -> f64 {
    let d = params.dim();
    let alpha = params.alpha();
    let rho = (h.powi(d as i32) / unit_ball_volume(d)).powf(1.0 / d as f64);
    params.constant() * unit_sphere_area(d) * rho.powf(alpha) / alpha
}

/// How the diagonal entry is computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalRule {
    #[default]
    EqualVolumeBall,
    /// Split the cell into `4^d` sub-cells: the central `2^d` block uses the
    /// ball rule at `h/2`, the rest are collocated at their centers.
    Subdivided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub diagonal: DiagonalRule,
    pub max_cells: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            diagonal: DiagonalRule::EqualVolumeBall,
            max_cells: DEFAULT_MAX_CELLS,
        }
    }
}

fn subdivided_self_term(params: &RieszParams, h: f64) -> f64 {
    let d = params.dim();
    let q = h / 4.0;
    let mut total = self_term(params, h / 2.0);
    // sub-cell centers at q (k + 1/2) - h/2, k ∈ {0..3}^d; central block k ∈ {1,2}^d
    let mut k = vec![0usize; d];
    'outer: loop {
        if !k.iter().all(|&ki| ki == 1 || ki == 2) {
            let r2: f64 = k
                .iter()
                .map(|&ki| {
                    let x = q * (ki as f64 + 0.5) - h / 2.0;
                    x * x
                })
                .sum();
            total += params.eval_unchecked(r2.sqrt()) * q.powi(d as i32);
        }
        let mut a = d;
        loop {
            if a == 0 {
                break 'outer;
            }
            a -= 1;
            k[a] += 1;
            if k[a] < 4 {
                break;
            }
            k[a] = 0;
        }
    }
    total
}

/// Dense symmetric discretization of `R_{α,Ω}`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    entries: Mat<f64>,
    params: RieszParams,
    h: f64,
    domain_hash: String,
}

/// JSON header of the binary matrix dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub n: usize,
    pub h: f64,
    pub alpha: f64,
    pub dim: usize,
    pub domain_hash: String,
}

impl OperatorMatrix {
    /// Wrap an explicit symmetric matrix, e.g. a synthetic fixture.
    pub fn from_dense(params: RieszParams, h: f64, entries: Mat<f64>, label: &str) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(RieszError::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        Ok(Self {
            entries,
            params,
            h,
            domain_hash: label.to_string(),
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn params(&self) -> &RieszParams {
        &self.params
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn domain_hash(&self) -> &str {
        &self.domain_hash
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.entries[(i, i)]).sum()
    }

    /// `Σ_ij A_ij²`.
    pub fn frobenius_sq(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|j| (0..n).map(|i| self.entries[(i, j)].powi(2)).sum::<f64>())
            .sum()
    }

    /// `vᵀ A v`.
    pub fn quadratic(&self, v: &[f64]) -> f64 {
        let n = self.n();
        (0..n)
            .map(|j| v[j] * (0..n).map(|i| self.entries[(i, j)] * v[i]).sum::<f64>())
            .sum()
    }

    /// A JSON header line followed by the row-major entries as little-endian
    /// `f64`.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let header = DumpHeader {
            n: self.n(),
            h: self.h,
            alpha: self.params.alpha(),
            dim: self.params.dim(),
            domain_hash: self.domain_hash.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for i in 0..self.n() {
            for j in 0..self.n() {
                out.write_all(&self.entries[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<(DumpHeader, Mat<f64>)> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let split = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| RieszError::Data("matrix dump has no header line".into()))?;
        let header: DumpHeader = serde_json::from_slice(&bytes[..split])?;
        let body = &bytes[split + 1..];
        if body.len() != header.n * header.n * 8 {
            return Err(RieszError::Data(format!(
                "matrix dump body has {} bytes, expected {}",
                body.len(),
                header.n * header.n * 8
            )));
        }
        let n = header.n;
        let m = Mat::from_fn(n, n, |i, j| {
            let k = 8 * (i * n + j);
            f64::from_le_bytes(body[k..k + 8].try_into().unwrap())
        });
        Ok((header, m))
    }
}

/// Assemble with the default options.
pub fn assemble(params: &RieszParams, domain: &GridDomain) -> Result<OperatorMatrix> {
    assemble_with(params, domain, &AssemblyOptions::default())
}

pub fn assemble_with(
    params: &RieszParams,
    domain: &GridDomain,
    options: &AssemblyOptions,
) -> Result<OperatorMatrix> {
    if params.dim() != domain.dim() {
        return Err(RieszError::DimensionMismatch {
            expected: params.dim(),
            found: domain.dim(),
        });
    }
    let n = domain.len();
    if n > options.max_cells {
        return Err(RieszError::Capacity {
            n,
            limit: options.max_cells,
        });
    }
    let h = domain.h();
    let diagonal = match options.diagonal {
        DiagonalRule::EqualVolumeBall => self_term(params, h),
        DiagonalRule::Subdivided => subdivided_self_term(params, h),
    };
    // entry(i, j) = c h^α |k_i - k_j|^{α-d}, from the exact integer distance
    let scale = params.constant() * h.powf(params.alpha());
    let half_exp = params.exponent() / 2.0;
    let pair = |i: usize, j: usize| -> f64 {
        scale * (domain.index_dist2(i, j) as f64).powf(half_exp)
    };

    // each unordered pair is evaluated once, in the upper triangle
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| pair(i, j)).collect())
        .collect();
    let mut entries = Mat::<f64>::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        entries[(i, i)] = diagonal;
        for (offset, &v) in row.iter().enumerate() {
            let j = i + 1 + offset;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(OperatorMatrix {
        entries,
        params: *params,
        h,
        domain_hash: domain.fingerprint(),
    })
}
