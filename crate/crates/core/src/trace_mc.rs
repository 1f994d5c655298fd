//! Monte Carlo estimation of cyclic trace integrals
//! `Tr(R^s) = ∫_{Ω^s} Π_k ε(|x_k - x_{k+1}|) dx₁…dx_s` (indices mod `s`).
//!
//! Random numbers come from ChaCha8. A run with seed `S` on stream `t` seeds
//! its generator with `derive_seed(S, t)` and gives lane `l` the ChaCha
//! stream `l`, so lanes never overlap and a fixed `(seed, stream, lanes)`
//! reproduces bit-identical estimates on every platform.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{ball_rearrangement, rasterize, GridDomain};
use crate::error::{Result, RieszError};
use crate::kernel::RieszParams;
use crate::tolerances::SIGNIFICANCE_FACTOR;

pub const MIN_SAMPLES: u64 = 1000;
pub const DEFAULT_LANES: usize = 8;

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `stream` of a run seeded with `seed`:
/// `splitmix64(seed ⊕ splitmix64(stream))`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Generator for one lane of one stream.
pub fn lane_rng(seed: u64, stream: u64, lane: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream));
    rng.set_stream(lane as u64);
    rng
}

/// Uniform point in the union of cells: a uniform cell, then a uniform point
/// inside it. Writes into `out` (length `dim`).
pub fn sample_point_into<R: Rng + ?Sized>(domain: &GridDomain, rng: &mut R, out: &mut [f64]) {
    let i = rng.random_range(0..domain.len());
    let h = domain.h();
    for (x, &k) in out.iter_mut().zip(domain.index(i)) {
        *x = h * (k as f64 + rng.random::<f64>());
    }
}

pub fn sample_point<R: Rng + ?Sized>(domain: &GridDomain, rng: &mut R) -> Vec<f64> {
    let mut p = vec![0.0; domain.dim()];
    sample_point_into(domain, rng, &mut p);
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub lanes: usize,
    pub stream: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            lanes: DEFAULT_LANES,
            stream: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMCEstimate {
    pub s: u32,
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub stream: u64,
    pub lanes: usize,
    /// Cycles redrawn because two consecutive points coincided.
    pub rejections: u64,
    pub domain_hash: String,
}

/// Running mean and centered sum of squares.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Welford) -> Welford {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Welford {
            n,
            mean: self.mean + delta * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64,
        }
    }
}

fn check_inputs(params: &RieszParams, s: u32, n_samples: u64) -> Result<()> {
    if s < 2 {
        return Err(RieszError::Domain(format!("cycle length must satisfy s >= 2, got {s}")));
    }
    if (s as f64) <= params.p0() {
        return Err(RieszError::Divergent(format!(
            "trace integral needs s > p0 = d/alpha = {}, got s = {s}",
            params.p0()
        )));
    }
    if n_samples < MIN_SAMPLES {
        return Err(RieszError::Domain(format!(
            "need at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    Ok(())
}

/// Estimate of `Tr(R^s)` on `domain` with default lanes on stream 0.
pub fn trace_cycle_mc(
    params: &RieszParams,
    domain: &GridDomain,
    s: u32,
    n_samples: u64,
    seed: u64,
) -> Result<TraceMCEstimate> {
    trace_cycle_mc_with(params, domain, s, n_samples, seed, McOptions::default())
}

pub fn trace_cycle_mc_with(
    params: &RieszParams,
    domain: &GridDomain,
    s: u32,
    n_samples: u64,
    seed: u64,
    options: McOptions,
) -> Result<TraceMCEstimate> {
    check_inputs(params, s, n_samples)?;
    if params.dim() != domain.dim() {
        return Err(RieszError::DimensionMismatch {
            expected: params.dim(),
            found: domain.dim(),
        });
    }
    let lanes = options.lanes.max(1);
    let dim = domain.dim();
    let s = s as usize;
    let ln_c = params.constant().ln();
    let half_exp = params.exponent() / 2.0;

    let lane_results: Vec<(Welford, u64)> = (0..lanes)
        .into_par_iter()
        .map(|lane| {
            let count = n_samples / lanes as u64 + u64::from((lane as u64) < n_samples % lanes as u64);
            let mut rng = lane_rng(seed, options.stream, lane);
            let mut pts = vec![0.0; s * dim];
            let mut stats = Welford::default();
            let mut rejections = 0u64;
            for _ in 0..count {
                let log_product = loop {
                    for k in 0..s {
                        sample_point_into(domain, &mut rng, &mut pts[k * dim..(k + 1) * dim]);
                    }
                    let mut acc = 0.0;
                    let mut coincident = false;
                    for k in 0..s {
                        let a = &pts[k * dim..(k + 1) * dim];
                        let next = (k + 1) % s;
                        let b = &pts[next * dim..(next + 1) * dim];
                        let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                        if r2 == 0.0 {
                            coincident = true;
                            break;
                        }
                        acc += ln_c + half_exp * r2.ln();
                    }
                    if coincident {
                        rejections += 1;
                    } else {
                        break acc;
                    }
                };
                stats.push(log_product.exp());
            }
            (stats, rejections)
        })
        .collect();

    let (stats, rejections) = lane_results
        .into_iter()
        .fold((Welford::default(), 0), |(w, r), (lw, lr)| (w.merge(lw), r + lr));
    let volume = domain.measure().powi(s as i32);
    let variance = stats.m2 / (stats.n - 1) as f64;
    Ok(TraceMCEstimate {
        s: s as u32,
        estimate: volume * stats.mean,
        std_error: volume * (variance / stats.n as f64).sqrt(),
        n_samples,
        seed,
        stream: options.stream,
        lanes,
        rejections,
        domain_hash: domain.fingerprint(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BllReport {
    pub domain: TraceMCEstimate,
    pub ball: TraceMCEstimate,
    /// `estimate(Ω*) - estimate(Ω)`.
    pub difference: f64,
    pub combined_std_error: f64,
    /// `difference > -3σ`: no evidence against the inequality.
    pub consistent: bool,
    /// `difference > 3σ`: the ball is larger beyond noise.
    pub significant: bool,
}

/// Trace estimates on `domain` (stream 0) and on the rasterized equal-measure
/// ball at the same `h` (stream 1).
pub fn bll_compare(
    params: &RieszParams,
    domain: &GridDomain,
    s: u32,
    n_samples: u64,
    seed: u64,
) -> Result<BllReport> {
    bll_compare_with(params, domain, s, n_samples, seed, DEFAULT_LANES)
}

pub fn bll_compare_with(
    params: &RieszParams,
    domain: &GridDomain,
    s: u32,
    n_samples: u64,
    seed: u64,
    lanes: usize,
) -> Result<BllReport> {
    let ball = rasterize(&ball_rearrangement(domain), domain.h())?;
    let on_domain = trace_cycle_mc_with(params, domain, s, n_samples, seed, McOptions { lanes, stream: 0 })?;
    let on_ball = trace_cycle_mc_with(params, &ball, s, n_samples, seed, McOptions { lanes, stream: 1 })?;
    Ok(compare_estimates(on_domain, on_ball))
}

pub fn compare_estimates(domain: TraceMCEstimate, ball: TraceMCEstimate) -> BllReport {
    let difference = ball.estimate - domain.estimate;
    let sigma = domain.std_error.hypot(ball.std_error);
    BllReport {
        consistent: difference > -SIGNIFICANCE_FACTOR * sigma,
        significant: difference > SIGNIFICANCE_FACTOR * sigma,
        domain,
        ball,
        difference,
        combined_std_error: sigma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ShapeSpec;

    fn unit_interval(h: f64) -> GridDomain {
        rasterize(&ShapeSpec::cuboid(vec![0.0], vec![1.0]), h).unwrap()
    }

    #[test]
    fn derived_seeds_differ_by_stream() {
        assert_ne!(derive_seed(42, 0), derive_seed(42, 1));
        assert_ne!(derive_seed(0, 0), derive_seed(1, 0));
        assert_eq!(derive_seed(42, 3), derive_seed(42, 3));
    }

    #[test]
    fn single_cell_samples_stay_inside() {
        let d = GridDomain::from_indices(2, 0.5, vec![vec![3, -2]]).unwrap();
        let mut rng = lane_rng(9, 0, 0);
        for _ in 0..1000 {
            let p = sample_point(&d, &mut rng);
            assert!((1.5..2.0).contains(&p[0]) && (-1.0..-0.5).contains(&p[1]), "{p:?}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = rasterize(&ShapeSpec::ball(vec![0.0, 0.0], 0.5), 1.0 / 16.0).unwrap();
        let draw = || {
            let mut rng = lane_rng(42, 0, 0);
            (0..10).map(|_| sample_point(&d, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn two_balls_split_evenly() {
        let d = rasterize(&crate::domain::two_balls(1.0, 1.0, 2).unwrap(), 1.0 / 32.0).unwrap();
        let mut rng = lane_rng(5, 0, 0);
        let n = 100_000;
        let left = (0..n).filter(|_| sample_point(&d, &mut rng)[0] < 0.0).count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((left - n as f64 / 2.0).abs() < 3.0 * sigma, "{left}");
    }

    #[test]
    fn input_errors() {
        let d = unit_interval(1.0 / 16.0);
        let p = RieszParams::new(0.6, 1).unwrap();
        assert!(matches!(trace_cycle_mc(&p, &d, 1, 10_000, 0), Err(RieszError::Domain(_))));
        assert!(matches!(trace_cycle_mc(&p, &d, 2, 999, 0), Err(RieszError::Domain(_))));
        let q = RieszParams::new(0.5, 1).unwrap();
        let msg = trace_cycle_mc(&q, &d, 2, 10_000, 0).unwrap_err();
        assert!(matches!(msg, RieszError::Divergent(ref m) if m.contains("p0")), "{msg}");
    }

    #[test]
    fn reproducible_and_lane_sensitive() {
        let d = unit_interval(1.0 / 32.0);
        let p = RieszParams::new(0.8, 1).unwrap();
        let a = trace_cycle_mc(&p, &d, 2, 20_000, 17).unwrap();
        let b = trace_cycle_mc(&p, &d, 2, 20_000, 17).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        let c = trace_cycle_mc_with(&p, &d, 2, 20_000, 17, McOptions { lanes: 3, stream: 0 }).unwrap();
        assert_ne!(a.estimate, c.estimate);
        assert!(a.estimate > 0.0 && a.std_error > 0.0);
    }

    #[test]
    fn unbiased_over_seeds() {
        // ∫_0^1∫_0^1 c² |x - y|^{2α-2} = 2c² / ((2α - 1) 2α), finite variance for α > 3/4
        let alpha = 0.8;
        let p = RieszParams::new(alpha, 1).unwrap();
        let exact = 2.0 * p.constant().powi(2) / ((2.0 * alpha - 1.0) * 2.0 * alpha);
        let d = unit_interval(1.0 / 64.0);
        let runs: Vec<TraceMCEstimate> = (0..20)
            .map(|seed| trace_cycle_mc(&p, &d, 2, 50_000, seed).unwrap())
            .collect();
        let mean = runs.iter().map(|r| r.estimate).sum::<f64>() / 20.0;
        let pooled = (runs.iter().map(|r| r.std_error.powi(2)).sum::<f64>() / 20.0).sqrt();
        assert!((mean - exact).abs() < 3.0 * pooled / 20f64.sqrt(), "{mean} vs {exact}");
    }

    #[test]
    fn std_error_halves_with_four_times_samples() {
        let p = RieszParams::new(1.5, 2).unwrap();
        let d = rasterize(&ShapeSpec::ball(vec![0.0, 0.0], 0.5), 1.0 / 16.0).unwrap();
        for seed in 0..4 {
            let a = trace_cycle_mc(&p, &d, 3, 20_000, seed).unwrap();
            let b = trace_cycle_mc(&p, &d, 3, 80_000, seed + 100).unwrap();
            let ratio = a.std_error / b.std_error;
            assert!((ratio - 2.0).abs() < 0.5, "seed {seed}: ratio {ratio}");
        }
    }

    #[test]
    fn homogeneity_under_dilation() {
        let p = RieszParams::new(1.0, 2).unwrap();
        let d = rasterize(&ShapeSpec::ball(vec![0.0, 0.0], 0.5), 1.0 / 16.0).unwrap();
        let a = trace_cycle_mc(&p, &d, 3, 100_000, 1).unwrap();
        let b = trace_cycle_mc(&p, &d.scaled(2.0).unwrap(), 3, 100_000, 2).unwrap();
        let ratio = b.estimate / a.estimate;
        let sigma = 8.0 * ((a.std_error / a.estimate).powi(2) + (b.std_error / b.estimate).powi(2)).sqrt();
        assert!((ratio - 8.0).abs() < 3.0 * sigma, "{ratio} ± {sigma}");
    }

    #[test]
    fn estimate_json_fields() {
        let d = unit_interval(1.0 / 16.0);
        let p = RieszParams::new(0.8, 1).unwrap();
        let e = trace_cycle_mc(&p, &d, 2, 1000, 3).unwrap();
        let v: serde_json::Value = serde_json::to_value(&e).unwrap();
        for key in ["s", "estimate", "std_error", "n_samples", "seed", "lanes", "rejections", "domain_hash"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
