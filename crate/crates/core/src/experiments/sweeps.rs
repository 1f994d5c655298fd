//! Shape sweeps: first eigenvalue, Schatten norms, two-ball second
//! eigenvalue, and grid convergence.
//!
//! Rasterization perturbs the measure of curved shapes by `O(h)`. Every
//! spectral value reported here is rescaled to the shape's nominal measure
//! with the exact dilation law: a grid domain of measure `m` dilated by
//! `t = (m_nominal/m)^{1/d}` has measure `m_nominal` and eigenvalues
//! multiplied by `t^α`. The actual rasterized measure is reported alongside.

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::output::{ResultTable, Verdict};
use crate::assemble::{assemble_with, AssemblyOptions};
use crate::domain::{rasterize, two_balls, GridDomain, ShapeSpec};
use crate::error::{Result, RieszError};
use crate::kernel::RieszParams;
use crate::spectra::{eigen_sym, schatten_norm, SchattenExponent, Spectrum};
use crate::trace_mc::{trace_cycle_mc_with, McOptions};
use crate::tolerances::SIGNIFICANCE_FACTOR;

/// One assembled and decomposed (shape, h) job.
#[derive(Debug, Clone)]
pub struct ShapeRun {
    pub label: String,
    pub h: f64,
    pub domain: GridDomain,
    pub measure_nominal: f64,
    /// Raw spectrum of the rasterized domain.
    pub spectrum: Spectrum,
    /// `(m_nominal / m_actual)^{α/d}`.
    pub factor: f64,
}

impl ShapeRun {
    pub fn measure_actual(&self) -> f64 {
        self.domain.measure()
    }

    /// `j`-th eigenvalue (0-based) rescaled to the nominal measure.
    pub fn lambda(&self, j: usize) -> f64 {
        self.spectrum.eigenvalues()[j] * self.factor
    }

    pub fn normalized(&self) -> Spectrum {
        self.spectrum.scaled(self.factor)
    }
}

pub fn run_shape(
    params: &RieszParams,
    options: &AssemblyOptions,
    label: &str,
    shape: &ShapeSpec,
    h: f64,
    with_vectors: bool,
) -> Result<ShapeRun> {
    let measure_nominal = shape.nominal_measure().ok_or_else(|| {
        RieszError::Config(format!("shape {label:?} has no analytic measure"))
    })?;
    let domain = rasterize(shape, h)?;
    let matrix = assemble_with(params, &domain, options)?;
    let spectrum = eigen_sym(&matrix, with_vectors)?;
    let factor = (measure_nominal / domain.measure()).powf(params.theta());
    Ok(ShapeRun {
        label: label.to_string(),
        h,
        domain,
        measure_nominal,
        spectrum,
        factor,
    })
}

/// Run jobs concurrently; results come back in job order.
pub fn run_jobs(
    params: &RieszParams,
    options: &AssemblyOptions,
    jobs: &[(String, ShapeSpec, f64)],
    with_vectors: bool,
) -> Result<Vec<ShapeRun>> {
    jobs.par_iter()
        .map(|(label, shape, h)| run_shape(params, options, label, shape, *h, with_vectors))
        .collect()
}

/// `|v[k] - v[neighbour]|` with the next finer resolution as the neighbour
/// (the next coarser one for the finest).
pub fn two_resolution_error(values: &[f64], k: usize) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let other = if k + 1 < values.len() { k + 1 } else { k - 1 };
    Some((values[k] - values[other]).abs())
}

/// Whether a shape is a ball, possibly translated.
pub fn is_ball(shape: &ShapeSpec) -> bool {
    match shape {
        ShapeSpec::Ball { .. } => true,
        ShapeSpec::Translate { shape, .. } => is_ball(shape),
        _ => false,
    }
}

fn shape_jobs(config: &ExperimentConfig) -> Vec<(String, ShapeSpec, f64)> {
    config
        .shapes
        .iter()
        .flat_map(|s| config.resolutions.iter().map(move |&h| (s.label.clone(), s.shape.clone(), h)))
        .collect()
}

fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(RieszError::Config(msg.into()))
    }
}

fn reference_ball(config: &ExperimentConfig) -> Result<&str> {
    config
        .shapes
        .iter()
        .find(|s| is_ball(&s.shape))
        .map(|s| s.label.as_str())
        .ok_or_else(|| RieszError::Config("shape list must include the ball of the common measure".into()))
}

fn normalization_note() -> String {
    "spectral values rescaled to the nominal measure by the exact dilation law; \
     measure_actual rows give the rasterized measure"
        .to_string()
}

/// Emit per-resolution rows for one shape and return the series.
fn series_rows(
    table: &mut ResultTable,
    label: &str,
    hs: &[f64],
    quantity: &str,
    values: &[f64],
) {
    for (k, (&h, &v)) in hs.iter().zip(values).enumerate() {
        table.push(label, h, quantity, v, two_resolution_error(values, k));
    }
}

/// Verdicts for `gap = reference - value` per resolution, with two-resolution
/// errors on the gap series. No verdict without an error estimate.
fn gap_verdicts(table: &mut ResultTable, label: &str, hs: &[f64], quantity: &str, gaps: &[f64]) {
    for (k, &h) in hs.iter().enumerate() {
        let err = two_resolution_error(gaps, k);
        table.push(label, h, &format!("{quantity}_gap_vs_ball"), gaps[k], err);
        if let Some(err) = err {
            table.verdicts.push(Verdict::new(label, h, quantity, gaps[k], err));
        }
    }
}

/// First-eigenvalue comparison against the equal-measure ball.
pub fn rfk_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let params = config.params()?;
    let ball = reference_ball(config)?.to_string();
    require(!config.resolutions.is_empty(), "at least one resolution is required")?;
    let runs = run_jobs(&params, &config.assembly, &shape_jobs(config), false)?;
    let hs = &config.resolutions;
    let nh = hs.len();

    let mut table = ResultTable::new(ExperimentKind::Rfk);
    table.notes.push(normalization_note());
    let lambda1 = |label: &str| -> Vec<f64> {
        runs.iter().filter(|r| r.label == label).map(|r| r.lambda(0)).collect()
    };
    let ball_l1 = lambda1(&ball);
    for (si, s) in config.shapes.iter().enumerate() {
        let chunk = &runs[si * nh..(si + 1) * nh];
        for r in chunk {
            table.push(&s.label, r.h, "measure_actual", r.measure_actual(), None);
        }
        let l1 = lambda1(&s.label);
        series_rows(&mut table, &s.label, hs, "lambda1", &l1);
        if !is_ball(&s.shape) {
            let gaps: Vec<f64> = ball_l1.iter().zip(&l1).map(|(b, v)| b - v).collect();
            gap_verdicts(&mut table, &s.label, hs, "lambda1", &gaps);
        }
    }
    Ok(table)
}

fn schatten_quantity(p: SchattenExponent, exploratory: bool) -> String {
    if exploratory {
        format!("schatten_{p}_exploratory")
    } else {
        format!("schatten_{p}")
    }
}

/// Schatten norms for each shape, compared with the ball.
pub fn schatten_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let params = config.params()?;
    let p0 = params.p0();
    require(!config.p.is_empty(), "Schatten sweep needs a p list")?;
    let mut admissible = Vec::new();
    for &p in &config.p {
        let ok = p.is_integer() && p.value() > p0;
        if !ok && !config.exploratory {
            return Err(RieszError::Config(format!(
                "p = {p} is not an integer above p0 = d/alpha = {p0}; set exploratory = true to run it"
            )));
        }
        admissible.push(ok);
    }
    let ball = reference_ball(config)?.to_string();
    require(!config.resolutions.is_empty(), "at least one resolution is required")?;
    let runs = run_jobs(&params, &config.assembly, &shape_jobs(config), false)?;
    let hs = &config.resolutions;
    let nh = hs.len();

    let mut table = ResultTable::new(ExperimentKind::Schatten);
    table.notes.push(normalization_note());
    if config.exploratory {
        table.notes.push(format!(
            "EXPLORATORY: rows marked _exploratory use p that is non-integer or at most p0 = {p0}; \
             no verdicts are drawn from them"
        ));
    }
    let norms = |chunk: &[ShapeRun], p: SchattenExponent| -> Result<Vec<f64>> {
        chunk
            .iter()
            .map(|r| schatten_norm(&r.normalized(), p).map(|rep| rep.value))
            .collect()
    };
    let ball_index = config.shapes.iter().position(|s| s.label == ball).unwrap();
    let ball_chunk = &runs[ball_index * nh..(ball_index + 1) * nh];

    for (si, s) in config.shapes.iter().enumerate() {
        let chunk = &runs[si * nh..(si + 1) * nh];
        for r in chunk {
            table.push(&s.label, r.h, "measure_actual", r.measure_actual(), None);
        }
        for (&p, &ok) in config.p.iter().zip(&admissible) {
            let quantity = schatten_quantity(p, !ok);
            let values = norms(chunk, p)?;
            series_rows(&mut table, &s.label, hs, &quantity, &values);
            if ok && !is_ball(&s.shape) {
                let reference = norms(ball_chunk, p)?;
                let gaps: Vec<f64> = reference.iter().zip(&values).map(|(b, v)| b - v).collect();
                gap_verdicts(&mut table, &s.label, hs, &quantity, &gaps);
            }
        }
        if let Some(mc) = &config.mc {
            for (&p, &ok) in config.p.iter().zip(&admissible) {
                if !ok || p == SchattenExponent::Infinity {
                    continue;
                }
                let s_int = p.value() as u32;
                let sums: Vec<f64> = chunk.iter().map(|r| r.normalized().power_sum(s_int as i32)).collect();
                for (k, r) in chunk.iter().enumerate() {
                    let options = McOptions {
                        lanes: mc.lanes,
                        stream: (si * nh + k) as u64,
                    };
                    let est = trace_cycle_mc_with(&params, &r.domain, s_int, mc.n_samples, mc.seed, options)?;
                    let scale = r.factor.powi(s_int as i32);
                    let value = est.estimate * scale;
                    let sigma = est.std_error * scale;
                    let allowance = two_resolution_error(&sums, k).unwrap_or(0.0);
                    let tolerance = SIGNIFICANCE_FACTOR * sigma + allowance;
                    table.push_seeded(&s.label, r.h, &format!("trace_mc_s{s_int}"), value, sigma, mc.seed);
                    table.push(&s.label, r.h, &format!("eigensum_s{s_int}"), sums[k], Some(allowance));
                    let agrees = (value - sums[k]).abs() <= tolerance;
                    table.push(
                        &s.label,
                        r.h,
                        &format!("trace_mc_s{s_int}_agrees"),
                        f64::from(u8::from(agrees)),
                        Some(tolerance),
                    );
                }
            }
        }
    }
    Ok(table)
}

pub fn two_ball_label(distance: f64) -> String {
    format!("two_balls_l{distance}")
}

/// Second eigenvalue of two equal balls moving apart, against its limit and
/// against connected comparison shapes.
pub fn hks_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let params = config.params()?;
    let hks = config
        .hks
        .as_ref()
        .ok_or_else(|| RieszError::Config("hks sweep needs an [hks] section".into()))?;
    require(
        hks.distances.len() >= 3,
        format!("hks sweep needs at least 3 distances, got {}", hks.distances.len()),
    )?;
    require(
        hks.distances.windows(2).all(|w| w[0] < w[1]),
        "hks distances must be strictly ascending",
    )?;
    require(!config.resolutions.is_empty(), "at least one resolution is required")?;
    if let Some(m) = config.nominal_measure() {
        require(
            (m - hks.total_measure).abs() <= crate::tolerances::NOMINAL_MEASURE * m,
            format!("comparison shapes have measure {m}, expected {}", hks.total_measure),
        )?;
    }
    let dim = params.dim();
    let mut labels = vec![("ball".to_string(), ShapeSpec::ball_with_measure(dim, hks.total_measure))];
    for &l in &hks.distances {
        labels.push((two_ball_label(l), two_balls(hks.total_measure, l, dim)?));
    }
    for s in &config.shapes {
        labels.push((s.label.clone(), s.shape.clone()));
    }
    let jobs: Vec<(String, ShapeSpec, f64)> = labels
        .iter()
        .flat_map(|(l, s)| config.resolutions.iter().map(move |&h| (l.clone(), s.clone(), h)))
        .collect();
    let runs = run_jobs(&params, &config.assembly, &jobs, false)?;
    let hs = &config.resolutions;
    let nh = hs.len();
    let chunk = |i: usize| &runs[i * nh..(i + 1) * nh];
    let second = |r: &ShapeRun| if r.spectrum.len() > 1 { r.lambda(1) } else { 0.0 };

    let mut table = ResultTable::new(ExperimentKind::Hks);
    table.notes.push(normalization_note());
    table.notes.push(format!(
        "lambda2 limit = 2^(-alpha/d) lambda1(ball of total measure); the trend in l is observed, not asserted"
    ));

    let ball_l1: Vec<f64> = chunk(0).iter().map(|r| r.lambda(0)).collect();
    series_rows(&mut table, "ball", hs, "lambda1", &ball_l1);
    let limit: Vec<f64> = ball_l1.iter().map(|l| l * 2f64.powf(-params.theta())).collect();
    series_rows(&mut table, "two_balls_limit", hs, "lambda2", &limit);

    let nl = hks.distances.len();
    let mut sup = vec![f64::NEG_INFINITY; nh];
    let mut lambda2_by_l = Vec::with_capacity(nl);
    for (li, &l) in hks.distances.iter().enumerate() {
        let label = two_ball_label(l);
        let c = chunk(1 + li);
        for r in c {
            table.push(&label, r.h, "measure_actual", r.measure_actual(), None);
        }
        let l1: Vec<f64> = c.iter().map(|r| r.lambda(0)).collect();
        let l2: Vec<f64> = c.iter().map(second).collect();
        series_rows(&mut table, &label, hs, "lambda1", &l1);
        series_rows(&mut table, &label, hs, "lambda2", &l2);
        let dev: Vec<f64> = l2.iter().zip(&limit).map(|(v, lim)| (v - lim) / lim).collect();
        series_rows(&mut table, &label, hs, "lambda2_rel_deviation", &dev);
        if li + 1 == nl {
            let rel_gap: Vec<f64> = l1.iter().zip(&l2).map(|(a, b)| (a - b) / a).collect();
            series_rows(&mut table, &label, hs, "relative_gap", &rel_gap);
        }
        for k in 0..nh {
            sup[k] = sup[k].max(l2[k]);
        }
        lambda2_by_l.push(l2);
    }
    for k in 0..nh {
        let nondecreasing = lambda2_by_l.windows(2).all(|w| w[0][k] <= w[1][k]);
        table.push("two_balls", hs[k], "lambda2_nondecreasing_in_l", f64::from(u8::from(nondecreasing)), None);
    }
    series_rows(&mut table, "two_balls_sup", hs, "lambda2", &sup);

    for (si, s) in config.shapes.iter().enumerate() {
        let c = chunk(1 + nl + si);
        for r in c {
            table.push(&s.label, r.h, "measure_actual", r.measure_actual(), None);
        }
        let l2: Vec<f64> = c.iter().map(second).collect();
        series_rows(&mut table, &s.label, hs, "lambda2", &l2);
        let gaps: Vec<f64> = sup.iter().zip(&l2).map(|(a, b)| a - b).collect();
        for (k, &h) in hs.iter().enumerate() {
            let err = two_resolution_error(&gaps, k);
            table.push(&s.label, h, "lambda2_gap_vs_two_balls", gaps[k], err);
            if let Some(err) = err {
                table.verdicts.push(Verdict::new(&s.label, h, "lambda2", gaps[k], err));
            }
        }
    }
    Ok(table)
}

/// Richardson fit of `v(h) ≈ v∞ + C h^q` from the last three resolutions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RichardsonFit {
    /// Fitted order `q`; NaN when successive differences do not shrink
    /// monotonically.
    pub order: f64,
    pub limit: f64,
    /// `|v∞ - v(h_finest)|`, or the last difference when no order is fitted.
    pub error: f64,
}

pub fn richardson(hs: &[f64], values: &[f64]) -> Result<RichardsonFit> {
    let n = hs.len();
    if n < 3 || values.len() != n {
        return Err(RieszError::Config("Richardson fit needs three resolutions".into()));
    }
    let ratio = hs[n - 3] / hs[n - 2];
    let d1 = values[n - 2] - values[n - 3];
    let d2 = values[n - 1] - values[n - 2];
    let last = values[n - 1];
    if d1 * d2 > 0.0 && d2.abs() < d1.abs() {
        let order = (d1 / d2).ln() / ratio.ln();
        let limit = last + d2 / (ratio.powf(order) - 1.0);
        Ok(RichardsonFit {
            order,
            limit,
            error: (limit - last).abs(),
        })
    } else {
        Ok(RichardsonFit {
            order: f64::NAN,
            limit: last,
            error: d1.abs().max(d2.abs()),
        })
    }
}

pub fn check_geometric(hs: &[f64]) -> Result<()> {
    require(hs.len() >= 3, format!("convergence study needs at least 3 resolutions, got {}", hs.len()))?;
    let ratio = hs[0] / hs[1];
    require(
        hs.windows(2).all(|w| ((w[0] / w[1]) / ratio - 1.0).abs() < 1e-9),
        format!("resolutions {hs:?} are not a geometric progression"),
    )
}

/// Grid refinement study for one shape: `λ₁`, `λ₂` and any listed Schatten
/// norms at each `h`, fitted orders and extrapolated limits (rows at `h = 0`).
pub fn convergence_study(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let params = config.params()?;
    require(config.shapes.len() == 1, "convergence study takes exactly one shape")?;
    check_geometric(&config.resolutions)?;
    let s = &config.shapes[0];
    let runs = run_jobs(&params, &config.assembly, &shape_jobs(config), false)?;
    let hs = &config.resolutions;

    let mut table = ResultTable::new(ExperimentKind::Converge);
    table.notes.push(normalization_note());
    table.notes.push("rows at h = 0 are Richardson limits; per-h errors are distances to the limit".into());
    for r in &runs {
        table.push(&s.label, r.h, "measure_actual", r.measure_actual(), None);
    }

    let mut quantities: Vec<(String, Vec<f64>)> = vec![(
        "lambda1".into(),
        runs.iter().map(|r| r.lambda(0)).collect(),
    )];
    if runs.iter().all(|r| r.spectrum.len() > 1) {
        quantities.push(("lambda2".into(), runs.iter().map(|r| r.lambda(1)).collect()));
    }
    for &p in &config.p {
        let values = runs
            .iter()
            .map(|r| schatten_norm(&r.normalized(), p).map(|rep| rep.value))
            .collect::<Result<Vec<f64>>>()?;
        quantities.push((schatten_quantity(p, false), values));
    }

    for (name, values) in &quantities {
        let fit = richardson(hs, values)?;
        for (k, (&h, &v)) in hs.iter().zip(values).enumerate() {
            table.push(&s.label, h, name, v, Some((v - fit.limit).abs()));
            if k > 0 {
                table.push(&s.label, h, &format!("{name}_difference"), v - values[k - 1], None);
            }
        }
        table.push(&s.label, 0.0, &format!("{name}_limit"), fit.limit, Some(fit.error));
        table.push(&s.label, 0.0, &format!("{name}_order"), fit.order, None);
    }
    Ok(table)
}
