//! Experiment configuration, orchestration and result files for the `riesz`
//! command-line tool.
//!
//! [`execute`] computes everything in memory; [`run_to_dir`] writes the
//! result files plus a JSON manifest. Rows are always emitted in config
//! order, so identical configs give byte-identical CSV files.

pub mod config;
pub mod output;
pub mod sweeps;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub use config::{ExperimentConfig, ExperimentKind, LabeledShape, McConfig, ParamsConfig};
pub use output::{Manifest, ResultRow, ResultTable, Verdict, VerdictStatus};
pub use sweeps::{convergence_study, hks_sweep, rfk_sweep, richardson, schatten_sweep, RichardsonFit};

use crate::assemble::assemble_with;
use crate::domain::rasterize;
use crate::error::{Result, RieszError};
use crate::kernel::convolution_ratio_probe;
use crate::rearrange::{riesz_rearrangement_check, write_check_rows, GridFunction};
use crate::spectra::{decay_envelope, eigen_sym, jentsch_check, CheckStatus};
use crate::tolerances::NEGATIVE_TAIL;
use crate::trace_mc::{bll_compare_with, trace_cycle_mc_with, McOptions};

/// Largest problem for which the spectrum command also computes vectors.
const VECTOR_LIMIT: usize = 6000;

/// Result of one experiment, before anything is written.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub table: ResultTable,
    /// Additional files as `(file name, contents)`.
    pub files: Vec<(String, Vec<u8>)>,
    /// Extra pass/fail conditions beyond the table's verdicts.
    pub invariants_passed: bool,
}

impl Artifacts {
    fn from_table(table: ResultTable) -> Self {
        Self {
            table,
            files: Vec::new(),
            invariants_passed: true,
        }
    }

    pub fn passed(&self) -> bool {
        self.invariants_passed && self.table.all_passed()
    }
}

fn mc_config(config: &ExperimentConfig) -> Result<&McConfig> {
    config
        .mc
        .as_ref()
        .ok_or_else(|| RieszError::Config("this experiment needs an [mc] section".into()))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec_pretty(value)?)
}

/// Run an experiment of the given kind.
pub fn execute(kind: ExperimentKind, config: &ExperimentConfig) -> Result<Artifacts> {
    if let Some(k) = config.kind {
        if k != kind {
            return Err(RieszError::Config(format!(
                "config is for experiment {k}, but {kind} was requested"
            )));
        }
    }
    match kind {
        ExperimentKind::Rfk => rfk_sweep(config).map(Artifacts::from_table),
        ExperimentKind::Schatten => schatten_sweep(config).map(Artifacts::from_table),
        ExperimentKind::Hks => hks_sweep(config).map(Artifacts::from_table),
        ExperimentKind::Converge => convergence_study(config).map(Artifacts::from_table),
        ExperimentKind::Spectrum => spectrum_run(config),
        ExperimentKind::TraceMc => trace_mc_run(config),
        ExperimentKind::Bll => bll_run(config),
        ExperimentKind::RearrangeCheck => rearrange_run(config),
        ExperimentKind::ProbeConvolution => probe_run(config),
    }
}

fn require_shapes(config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    if config.shapes.is_empty() || config.resolutions.is_empty() {
        return Err(RieszError::Config("need at least one shape and one resolution".into()));
    }
    Ok(())
}

fn spectrum_run(config: &ExperimentConfig) -> Result<Artifacts> {
    require_shapes(config)?;
    let params = config.params()?;
    let mut table = ResultTable::new(ExperimentKind::Spectrum);
    table.notes.push("eigenvalues are raw (not rescaled to the nominal measure)".into());
    let mut files = Vec::new();
    let mut ok = true;
    for s in &config.shapes {
        for (k, &h) in config.resolutions.iter().enumerate() {
            let domain = rasterize(&s.shape, h)?;
            let matrix = assemble_with(&params, &domain, &config.assembly)?;
            let spectrum = eigen_sym(&matrix, domain.len() <= VECTOR_LIMIT)?;
            let envelope = decay_envelope(&spectrum, &params, domain.measure(), None)?;
            let jentsch = match spectrum.eigenvectors() {
                Some(_) => Some(jentsch_check(&spectrum, domain.is_connected())?),
                None => None,
            };
            let min_ratio = spectrum.min_ratio();
            ok &= min_ratio >= -NEGATIVE_TAIL;
            if let Some(j) = &jentsch {
                ok &= j.status != CheckStatus::Fail;
                table.push(&s.label, h, "jentsch_pass", f64::from(u8::from(j.status == CheckStatus::Pass)), None);
            }
            table.push(&s.label, h, "measure_actual", domain.measure(), None);
            table.push(&s.label, h, "cells", domain.len() as f64, None);
            table.push(&s.label, h, "lambda1", spectrum.eigenvalues()[0], None);
            if let Some(l2) = spectrum.lambda(1) {
                table.push(&s.label, h, "lambda2", l2, None);
            }
            table.push(&s.label, h, "min_eigenvalue_ratio", min_ratio, None);
            table.push(&s.label, h, "envelope", envelope.constant, None);

            let stem = format!("spectrum_{}_h{k}", s.label);
            let mut csv = Vec::new();
            spectrum.write_csv(&mut csv)?;
            files.push((format!("{stem}.csv"), csv));
            files.push((format!("{stem}.json"), json_bytes(&spectrum.to_json(Some(envelope), jentsch))?));
        }
    }
    Ok(Artifacts {
        table,
        files,
        invariants_passed: ok,
    })
}

fn trace_mc_run(config: &ExperimentConfig) -> Result<Artifacts> {
    require_shapes(config)?;
    let params = config.params()?;
    let mc = mc_config(config)?;
    let mut table = ResultTable::new(ExperimentKind::TraceMc);
    let mut estimates = Vec::new();
    let nh = config.resolutions.len();
    for (si, s) in config.shapes.iter().enumerate() {
        for (k, &h) in config.resolutions.iter().enumerate() {
            let domain = rasterize(&s.shape, h)?;
            let options = McOptions {
                lanes: mc.lanes,
                stream: (si * nh + k) as u64,
            };
            let est = trace_cycle_mc_with(&params, &domain, mc.s, mc.n_samples, mc.seed, options)?;
            table.push(&s.label, h, "measure_actual", domain.measure(), None);
            table.push_seeded(&s.label, h, "trace_mc", est.estimate, est.std_error, mc.seed);
            estimates.push(est);
        }
    }
    Ok(Artifacts {
        table,
        files: vec![("trace_mc.json".into(), json_bytes(&estimates)?)],
        invariants_passed: true,
    })
}

fn bll_run(config: &ExperimentConfig) -> Result<Artifacts> {
    require_shapes(config)?;
    let params = config.params()?;
    let mc = mc_config(config)?;
    let mut table = ResultTable::new(ExperimentKind::Bll);
    table.notes.push("domain uses stream 0, its equal-measure ball stream 1 of the derived seed".into());
    let mut reports = Vec::new();
    for s in &config.shapes {
        for &h in &config.resolutions {
            let domain = rasterize(&s.shape, h)?;
            let rep = bll_compare_with(&params, &domain, mc.s, mc.n_samples, mc.seed, mc.lanes)?;
            table.push_seeded(&s.label, h, "trace_mc", rep.domain.estimate, rep.domain.std_error, mc.seed);
            table.push_seeded("ball_rearrangement", h, "trace_mc", rep.ball.estimate, rep.ball.std_error, mc.seed);
            table.push(&s.label, h, "ball_minus_domain", rep.difference, Some(rep.combined_std_error));
            table
                .verdicts
                .push(Verdict::new(&s.label, h, "trace_mc", rep.difference, rep.combined_std_error));
            reports.push(rep);
        }
    }
    Ok(Artifacts {
        table,
        files: vec![("bll.json".into(), json_bytes(&reports)?)],
        invariants_passed: true,
    })
}

fn rearrange_run(config: &ExperimentConfig) -> Result<Artifacts> {
    require_shapes(config)?;
    let params = config.params()?;
    let settings = config
        .rearrange
        .as_ref()
        .ok_or_else(|| RieszError::Config("rearrange-check needs a [rearrange] section".into()))?;
    let mut table = ResultTable::new(ExperimentKind::RearrangeCheck);
    let mut files = Vec::new();
    let mut ok = true;
    for s in &config.shapes {
        for (k, &h) in config.resolutions.iter().enumerate() {
            let domain = rasterize(&s.shape, h)?;
            let mut rows = Vec::new();
            for seed in settings.first_seed..settings.first_seed + u64::from(settings.count) {
                let f = GridFunction::seeded(domain.clone(), seed);
                let check = riesz_rearrangement_check(&params, &f)?;
                ok &= check.pass;
                rows.push((seed, check));
            }
            let passed = rows.iter().filter(|(_, c)| c.pass).count();
            let min_gap = rows.iter().map(|(_, c)| c.gap / c.q_star).fold(f64::INFINITY, f64::min);
            table.push(&s.label, h, "checks_passed", passed as f64, None);
            table.push(&s.label, h, "min_relative_gap", min_gap, None);
            let mut csv = Vec::new();
            write_check_rows(&rows, &mut csv)?;
            files.push((format!("rearrange_{}_h{k}.csv", s.label), csv));
        }
    }
    Ok(Artifacts {
        table,
        files,
        invariants_passed: ok,
    })
}

fn probe_run(config: &ExperimentConfig) -> Result<Artifacts> {
    let p = config
        .probe
        .as_ref()
        .ok_or_else(|| RieszError::Config("probe-convolution needs a [probe] section".into()))?;
    let report = convolution_ratio_probe(p.alpha1, p.alpha2, p.dim, &p.r_values, p.truncation_radius, p.quad_points)?;
    let mut table = ResultTable::new(ExperimentKind::ProbeConvolution);
    table.notes.push(format!(
        "ratio = (eps_a1 * eps_a2)(r) / eps_(a1+a2)(r); spread {:e}, tolerance {:e}",
        report.spread, report.tolerance
    ));
    for pt in &report.points {
        table.push(&format!("r={}", pt.r), 0.0, "ratio", pt.ratio, Some(pt.error));
    }
    Ok(Artifacts {
        table,
        files: vec![("probe_convolution.json".into(), json_bytes(&report)?)],
        invariants_passed: report.spread <= report.tolerance.max(1e-3),
    })
}

/// Outcome of [`run_to_dir`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub artifacts: Artifacts,
    pub outputs: Vec<PathBuf>,
}

impl RunOutcome {
    /// 0 when every verdict and invariant passed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.artifacts.passed() {
            0
        } else {
            2
        }
    }
}

/// Execute and write `<kind>.csv`, any extra files, and
/// `<kind>_manifest.json` into `dir`.
pub fn run_to_dir(kind: ExperimentKind, config: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let artifacts = execute(kind, config)?;
    let elapsed = clock.elapsed().as_secs_f64();

    std::fs::create_dir_all(dir)?;
    let mut outputs = Vec::new();
    let csv_path = dir.join(format!("{kind}.csv"));
    artifacts.table.write_csv(std::fs::File::create(&csv_path)?)?;
    outputs.push(csv_path);
    for (name, bytes) in &artifacts.files {
        let path = dir.join(name);
        std::fs::write(&path, bytes)?;
        outputs.push(path);
    }
    let manifest = Manifest {
        kind,
        library_version: env!("CARGO_PKG_VERSION"),
        started_unix_seconds: started,
        wall_clock_seconds: elapsed,
        threads: rayon::current_num_threads(),
        significance_rule: crate::tolerances::SIGNIFICANCE_RULE,
        config,
        outputs: outputs.clone(),
        verdicts: artifacts.table.verdicts.clone(),
        all_passed: artifacts.passed(),
    };
    let manifest_path = dir.join(format!("{kind}_manifest.json"));
    output::write_json(&manifest_path, &manifest)?;
    outputs.push(manifest_path);
    Ok(RunOutcome { artifacts, outputs })
}
