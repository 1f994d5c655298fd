//! Eigendecomposition of assembled operators and the spectral functionals
//! built on it.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self_adjoint_evd, self_adjoint_evd_scratch, ComputeEigenvectors};
use faer::diag::Diag;
use faer::{Mat, MatRef, Par};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::assemble::OperatorMatrix;
use crate::error::{Result, RieszError};
use crate::kernel::RieszParams;
use crate::tolerances::SIMPLICITY;

/// Eigenvalues in descending order, with optional orthonormal eigenvectors
/// stored column-wise in the same order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: Option<Mat<f64>>,
    params: Option<RieszParams>,
    source: String,
}

impl Spectrum {
    /// Spectrum from explicit values (sorted here), e.g. a synthetic fixture.
    pub fn from_eigenvalues(mut values: Vec<f64>, params: Option<RieszParams>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self {
            eigenvalues: values,
            eigenvectors: None,
            params,
            source: "synthetic".into(),
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> Option<&Mat<f64>> {
        self.eigenvectors.as_ref()
    }

    pub fn params(&self) -> Option<&RieszParams> {
        self.params.as_ref()
    }

    /// Fingerprint of the domain the operator was assembled on.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn lambda(&self, j: usize) -> Option<f64> {
        self.eigenvalues.get(j).copied()
    }

    /// Smallest eigenvalue divided by the largest.
    pub fn min_ratio(&self) -> f64 {
        self.eigenvalues.last().unwrap() / self.eigenvalues[0]
    }

    /// `Σ_j λ_j^k` over the unclipped eigenvalues.
    pub fn power_sum(&self, k: i32) -> f64 {
        self.eigenvalues.iter().map(|l| l.powi(k)).sum()
    }

    /// Same spectrum with every eigenvalue multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.eigenvalues.iter_mut().for_each(|l| *l *= factor);
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "eigenvalue"])?;
        for (j, l) in self.eigenvalues.iter().enumerate() {
            w.write_record([(j + 1).to_string(), format!("{l:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full symmetric eigendecomposition of an assembled operator.
pub fn eigen_sym(matrix: &OperatorMatrix, with_vectors: bool) -> Result<Spectrum> {
    let mut spec = eigen_dense(matrix.entries().as_ref(), with_vectors)?;
    spec.params = Some(*matrix.params());
    spec.source = matrix.domain_hash().to_string();
    Ok(spec)
}

/// Full symmetric eigendecomposition of a dense matrix. Runs single-threaded
/// so that the output is bit-identical for identical input.
pub fn eigen_dense(a: MatRef<'_, f64>, with_vectors: bool) -> Result<Spectrum> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(RieszError::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if n == 0 {
        return Err(RieszError::Data("empty matrix".into()));
    }
    for j in 0..n {
        for i in 0..n {
            if !a[(i, j)].is_finite() {
                return Err(RieszError::Data(format!(
                    "non-finite matrix entry at ({i}, {j})"
                )));
            }
        }
    }

    let compute = if with_vectors {
        ComputeEigenvectors::Yes
    } else {
        ComputeEigenvectors::No
    };
    let par = Par::Seq;
    let mut s = Diag::<f64>::zeros(n);
    let mut u = with_vectors.then(|| Mat::<f64>::zeros(n, n));
    let mut buf = MemBuffer::new(self_adjoint_evd_scratch::<f64>(
        n,
        compute,
        par,
        Default::default(),
    ));
    self_adjoint_evd(
        a,
        s.as_mut(),
        u.as_mut().map(|u| u.as_mut()),
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|_| RieszError::NoConvergence)?;

    // faer returns ascending order
    let eigenvalues: Vec<f64> = (0..n).rev().map(|k| s[k]).collect();
    let eigenvectors = u.map(|u| Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]));
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        params: None,
        source: String::new(),
    })
}

/// Schatten exponent: a real `p ≥ 1` or `∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchattenExponent {
    Finite(f64),
    Infinity,
}

impl SchattenExponent {
    pub fn is_integer(&self) -> bool {
        match self {
            SchattenExponent::Finite(p) => p.fract() == 0.0,
            SchattenExponent::Infinity => true,
        }
    }

    /// `p` as a float, with `∞` mapped to `f64::INFINITY`.
    pub fn value(&self) -> f64 {
        match self {
            SchattenExponent::Finite(p) => *p,
            SchattenExponent::Infinity => f64::INFINITY,
        }
    }
}

impl fmt::Display for SchattenExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchattenExponent::Finite(p) => write!(f, "{p}"),
            SchattenExponent::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for SchattenExponent {
    type Err = RieszError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(SchattenExponent::Infinity),
            other => other
                .parse::<f64>()
                .map(|p| {
                    if p.is_infinite() {
                        SchattenExponent::Infinity
                    } else {
                        SchattenExponent::Finite(p)
                    }
                })
                .map_err(|_| RieszError::Config(format!("invalid Schatten exponent {other:?}"))),
        }
    }
}

impl Serialize for SchattenExponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SchattenExponent::Finite(p) => s.serialize_f64(*p),
            SchattenExponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for SchattenExponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(SchattenExponent::Finite(p)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchattenReport {
    pub p: SchattenExponent,
    pub value: f64,
    /// `d/α`, when the spectrum knows its parameters.
    pub p0: Option<f64>,
    /// `p ≤ p₀`: the discrete value is finite but does not converge under
    /// refinement.
    pub below_threshold: bool,
    /// `Σ |λ_j|^p` over the negative eigenvalues that were clipped to zero
    /// (`max |λ_j|` for `p = ∞`).
    pub clipped_mass: f64,
}

/// `(Σ_j max(λ_j, 0)^p)^{1/p}`, or `λ₁` for `p = ∞`.
pub fn schatten_norm(spec: &Spectrum, p: SchattenExponent) -> Result<SchattenReport> {
    if let SchattenExponent::Finite(pv) = p {
        if !(pv >= 1.0) {
            return Err(RieszError::Domain(format!(
                "Schatten exponent must satisfy p >= 1, got {pv}"
            )));
        }
    }
    let negatives = spec.eigenvalues.iter().filter(|&&l| l < 0.0);
    let top = spec.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let (value, clipped_mass) = match p {
        SchattenExponent::Infinity => (top, negatives.fold(0.0, |m: f64, l| m.max(-l))),
        SchattenExponent::Finite(pv) => {
            let clipped = negatives.map(|l| (-l).powf(pv)).sum();
            let value = if top == 0.0 {
                0.0
            } else {
                // scale by λ₁ so large p cannot overflow
                let sum: f64 = spec
                    .eigenvalues
                    .iter()
                    .map(|&l| (l.max(0.0) / top).powf(pv))
                    .sum();
                top * sum.powf(1.0 / pv)
            };
            (value, clipped)
        }
    };
    let p0 = spec.params.map(|q| q.p0());
    Ok(SchattenReport {
        p,
        value,
        p0,
        below_threshold: p0.is_some_and(|p0| p.value() <= p0),
        clipped_mass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    /// `max_j λ_j j^θ / |Ω|^θ`.
    pub constant: f64,
    /// 1-based index attaining the maximum.
    pub argmax: usize,
    pub terms: usize,
}

/// Empirical constant of the decay bound `λ_j ≤ C |Ω|^θ j^{-θ}`, over the
/// first `terms` eigenvalues (all of them when `None`).
pub fn decay_envelope(
    spec: &Spectrum,
    params: &RieszParams,
    measure: f64,
    terms: Option<usize>,
) -> Result<Envelope> {
    if !(measure > 0.0) {
        return Err(RieszError::Domain(format!("measure must be positive, got {measure}")));
    }
    if spec.is_empty() {
        return Err(RieszError::Data("empty spectrum".into()));
    }
    let theta = params.theta();
    let terms = terms.unwrap_or(spec.len()).min(spec.len());
    let scale = measure.powf(theta);
    let mut best = Envelope {
        constant: f64::NEG_INFINITY,
        argmax: 0,
        terms,
    };
    for (k, &l) in spec.eigenvalues[..terms].iter().enumerate() {
        let j = k + 1;
        let c = l * (j as f64).powf(theta) / scale;
        if c > best.constant {
            best.constant = c;
            best.argmax = j;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JentschReport {
    pub status: CheckStatus,
    pub connected: bool,
    pub lambda1: f64,
    pub lambda2: Option<f64>,
    /// `λ₁ - λ₂`.
    pub gap: Option<f64>,
    pub relative_gap: Option<f64>,
    pub simple: bool,
    pub u1_positive: bool,
    pub u2_sign_changing: Option<bool>,
}

/// Ground-state positivity and simplicity on connected domains: `λ₁ > λ₂`,
/// `u₁ > 0` entrywise after sign normalization, `u₂` changes sign.
pub fn jentsch_check(spec: &Spectrum, connected: bool) -> Result<JentschReport> {
    let v = spec
        .eigenvectors
        .as_ref()
        .ok_or_else(|| RieszError::Usage("positivity check needs eigenvectors".into()))?;
    let n = spec.len();
    let lambda1 = spec.eigenvalues[0];
    let lambda2 = spec.lambda(1);
    let gap = lambda2.map(|l2| lambda1 - l2);
    let relative_gap = gap.map(|g| g / lambda1);
    let simple = relative_gap.is_none_or(|r| r > SIMPLICITY);

    let normalized = |col: usize| -> Vec<f64> {
        let c: Vec<f64> = (0..n).map(|i| v[(i, col)]).collect();
        let big = c.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if big < 0.0 {
            c.iter().map(|x| -x).collect()
        } else {
            c
        }
    };
    let u1 = normalized(0);
    let u1_positive = u1.iter().all(|&x| x > 0.0);
    let u2_sign_changing = (n > 1).then(|| {
        let u2 = normalized(1);
        u2.iter().any(|&x| x > 0.0) && u2.iter().any(|&x| x < 0.0)
    });

    let status = if !connected {
        CheckStatus::Skipped
    } else if simple && u1_positive && u2_sign_changing.unwrap_or(true) {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(JentschReport {
        status,
        connected,
        lambda1,
        lambda2,
        gap,
        relative_gap,
        simple,
        u1_positive,
        u2_sign_changing,
    })
}

/// JSON form of a spectrum with its derived diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumJson<'a> {
    pub params: Option<RieszParams>,
    pub domain_hash: &'a str,
    pub eigenvalues: &'a [f64],
    pub envelope: Option<Envelope>,
    pub jentsch: Option<JentschReport>,
}

impl Spectrum {
    pub fn to_json(&self, envelope: Option<Envelope>, jentsch: Option<JentschReport>) -> SpectrumJson<'_> {
        SpectrumJson {
            params: self.params,
            domain_hash: &self.source,
            eigenvalues: &self.eigenvalues,
            envelope,
            jentsch,
        }
    }
}

/// Largest `‖A v - λ v‖₂` over the computed pairs and the largest entry of
/// `|VᵀV - I|`.
pub fn residuals(a: MatRef<'_, f64>, spec: &Spectrum) -> Option<(f64, f64)> {
    let v = spec.eigenvectors.as_ref()?;
    let av = a * v;
    let n = spec.len();
    let mut res = 0.0f64;
    for j in 0..n {
        let r: f64 = (0..n)
            .map(|i| (av[(i, j)] - spec.eigenvalues[j] * v[(i, j)]).powi(2))
            .sum();
        res = res.max(r.sqrt());
    }
    let gram = v.transpose() * v;
    let mut orth = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            orth = orth.max((gram[(i, j)] - target).abs());
        }
    }
    Some((res, orth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::{assemble, self_term};
    use crate::domain::{rasterize, ShapeSpec};
    use crate::tolerances::{EIGEN_RESIDUAL, LINEAR_ALGEBRA};

    fn synthetic(values: &[f64]) -> Spectrum {
        Spectrum::from_eigenvalues(values.to_vec(), None)
    }

    #[test]
    fn one_by_one() {
        let s = eigen_dense(Mat::from_fn(1, 1, |_, _| 2.5).as_ref(), true).unwrap();
        assert_eq!(s.eigenvalues(), &[2.5]);
        assert_eq!(s.eigenvectors().unwrap()[(0, 0)].abs(), 1.0);
    }

    #[test]
    fn two_by_two_closed_form() {
        let (a, b) = (3.0, -1.25);
        let m = Mat::from_fn(2, 2, |i, j| if i == j { a } else { b });
        let s = eigen_dense(m.as_ref(), true).unwrap();
        assert!((s.eigenvalues()[0] - (a - b)).abs() < 1e-14);
        assert!((s.eigenvalues()[1] - (a + b)).abs() < 1e-14);
        let (res, orth) = residuals(m.as_ref(), &s).unwrap();
        assert!(res < 1e-14 && orth < 1e-14);
    }

    #[test]
    fn rejects_non_finite() {
        let m = Mat::from_fn(2, 2, |i, j| if i == j { f64::NAN } else { 0.0 });
        assert!(matches!(eigen_dense(m.as_ref(), false), Err(RieszError::Data(_))));
    }

    #[test]
    fn schatten_examples() {
        let s = synthetic(&[3.0, 4.0]);
        let two = schatten_norm(&s, SchattenExponent::Finite(2.0)).unwrap();
        assert!((two.value - 5.0).abs() < 1e-15);
        assert_eq!(schatten_norm(&s, SchattenExponent::Infinity).unwrap().value, 4.0);
        let ones = synthetic(&[1.0; 4]);
        let four = schatten_norm(&ones, SchattenExponent::Finite(4.0)).unwrap();
        assert!((four.value - 2f64.sqrt()).abs() < 1e-15);
        assert!(schatten_norm(&s, SchattenExponent::Finite(0.5)).is_err());
    }

    #[test]
    fn schatten_clips_negatives() {
        let s = synthetic(&[4.0, 3.0, -1e-9]);
        let r = schatten_norm(&s, SchattenExponent::Finite(2.0)).unwrap();
        assert!((r.value - 5.0).abs() < 1e-15);
        assert!((r.clipped_mass - 1e-18).abs() < 1e-30);
    }

    #[test]
    fn threshold_flag() {
        let params = RieszParams::new(1.0, 2).unwrap();
        let s = Spectrum::from_eigenvalues(vec![1.0, 0.5], Some(params));
        assert!(schatten_norm(&s, SchattenExponent::Finite(2.0)).unwrap().below_threshold);
        assert!(!schatten_norm(&s, SchattenExponent::Finite(3.0)).unwrap().below_threshold);
        assert!(!schatten_norm(&s, SchattenExponent::Infinity).unwrap().below_threshold);
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<SchattenExponent>().unwrap(), SchattenExponent::Infinity);
        assert_eq!("3".parse::<SchattenExponent>().unwrap(), SchattenExponent::Finite(3.0));
        let v: Vec<SchattenExponent> = serde_json::from_str(r#"[3, 4.5, "inf"]"#).unwrap();
        assert_eq!(v[2], SchattenExponent::Infinity);
        assert!(!v[1].is_integer());
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[3.0,4.5,"inf"]"#);
    }

    #[test]
    fn envelope_examples() {
        let params = RieszParams::new(1.0, 2).unwrap();
        let theta = params.theta();
        let flat: Vec<f64> = (1..=20).map(|j| (j as f64).powf(-theta)).collect();
        let e = decay_envelope(&synthetic(&flat), &params, 1.0, None).unwrap();
        assert!((e.constant - 1.0).abs() < 1e-14);
        let fast: Vec<f64> = (1..=20).map(|j| 2.0 * (j as f64).powf(-2.0 * theta)).collect();
        let e = decay_envelope(&synthetic(&fast), &params, 1.0, None).unwrap();
        assert_eq!(e.argmax, 1);
        assert!((e.constant - 2.0).abs() < 1e-15);
    }

    #[test]
    fn jentsch_on_square_and_single_cell() {
        let params = RieszParams::new(1.0, 2).unwrap();
        let g = rasterize(&ShapeSpec::centered_box(vec![1.0, 1.0]), 1.0 / 16.0).unwrap();
        let s = eigen_sym(&assemble(&params, &g).unwrap(), true).unwrap();
        let r = jentsch_check(&s, g.is_connected()).unwrap();
        assert_eq!(r.status, CheckStatus::Pass, "{r:?}");

        let one = crate::domain::GridDomain::from_indices(2, 0.1, vec![vec![0, 0]]).unwrap();
        let s = eigen_sym(&assemble(&params, &one).unwrap(), true).unwrap();
        let r = jentsch_check(&s, true).unwrap();
        assert_eq!(r.status, CheckStatus::Pass);
        assert!(r.gap.is_none());

        assert!(matches!(
            jentsch_check(&synthetic(&[1.0]), true),
            Err(RieszError::Usage(_))
        ));
    }

    #[test]
    fn linear_algebra_identities_on_disk() {
        let params = RieszParams::new(0.5, 2).unwrap();
        let g = rasterize(&ShapeSpec::ball(vec![0.0, 0.0], 0.5), 1.0 / 16.0).unwrap();
        let a = assemble(&params, &g).unwrap();
        let s = eigen_sym(&a, true).unwrap();
        let n = a.n() as f64;
        let trace = s.power_sum(1);
        assert!((trace - n * self_term(&params, g.h())).abs() / trace < LINEAR_ALGEBRA);
        let frob = s.power_sum(2);
        assert!((frob - a.frobenius_sq()).abs() / frob < LINEAR_ALGEBRA);
        let (res, orth) = residuals(a.entries().as_ref(), &s).unwrap();
        assert!(res < EIGEN_RESIDUAL * s.eigenvalues()[0]);
        assert!(orth < EIGEN_RESIDUAL);
        assert!(s.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn csv_output() {
        let mut buf = Vec::new();
        synthetic(&[1.0, 2.0]).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "j,eigenvalue\n1,2e0\n2,1e0\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn schatten_non_increasing_in_p(values in prop::collection::vec(0.0f64..10.0, 1..40)) {
                let s = synthetic(&values);
                let mut last = f64::INFINITY;
                for p in [1.0, 2.0, 3.0, 4.0, 7.5] {
                    let v = schatten_norm(&s, SchattenExponent::Finite(p)).unwrap().value;
                    prop_assert!(v <= last * (1.0 + 1e-12));
                    last = v;
                }
                let inf = schatten_norm(&s, SchattenExponent::Infinity).unwrap().value;
                prop_assert!(inf <= last * (1.0 + 1e-12));
            }
        }
    }
}
