//! The control-deficit set and the resilient stabilizability / resilience
//! verdicts built on it.

use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::linalg::{
    column_space, controllability_rank, eigen_spectrum, ensure_finite, ensure_square,
    numerical_rank, Matrix, Spectrum,
};
use crate::zonotope::{inner_minkowski_difference, Difference, InnerDifferenceMethod, Zonotope};

/// `ẋ = Ax + B̄ū` with `ū ∈ [-1, 1]^{m+p}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    a: Matrix,
    b_bar: Matrix,
    actuator_labels: Vec<String>,
    state_labels: Vec<String>,
    state_units: Vec<String>,
}

impl LinearSystem {
    /// System with generic labels `x1…`, `u1…`.
    pub fn new(a: Matrix, b_bar: Matrix) -> Result<Self> {
        let n = a.nrows();
        let k = b_bar.ncols();
        LinearSystem::with_labels(
            a,
            b_bar,
            (1..=k).map(|i| format!("u{i}")).collect(),
            (1..=n).map(|i| format!("x{i}")).collect(),
            vec![String::new(); n],
        )
    }

    pub fn with_labels(
        a: Matrix,
        b_bar: Matrix,
        actuator_labels: Vec<String>,
        state_labels: Vec<String>,
        state_units: Vec<String>,
    ) -> Result<Self> {
        ensure_square(&a, "A")?;
        ensure_finite(&a, "A")?;
        ensure_finite(&b_bar, "B_bar")?;
        let n = a.nrows();
        if b_bar.nrows() != n {
            return Err(Error::Dimension(format!(
                "B_bar has {} rows, A is {n}x{n}",
                b_bar.nrows()
            )));
        }
        if b_bar.ncols() == 0 {
            return Err(Error::Dimension("B_bar needs at least one column".into()));
        }
        if actuator_labels.len() != b_bar.ncols() {
            return Err(Error::Dimension(format!(
                "{} actuator labels for {} columns",
                actuator_labels.len(),
                b_bar.ncols()
            )));
        }
        if state_labels.len() != n || state_units.len() != n {
            return Err(Error::Dimension(format!(
                "state labels/units must have length {n}"
            )));
        }
        Ok(LinearSystem {
            a,
            b_bar,
            actuator_labels,
            state_labels,
            state_units,
        })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b_bar(&self) -> &Matrix {
        &self.b_bar
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_actuators(&self) -> usize {
        self.b_bar.ncols()
    }

    pub fn actuator_labels(&self) -> &[String] {
        &self.actuator_labels
    }

    pub fn state_labels(&self) -> &[String] {
        &self.state_labels
    }

    pub fn state_units(&self) -> &[String] {
        &self.state_units
    }

    /// Resolves a state by label, or by 1-based index when the token is
    /// numeric.
    pub fn state_index(&self, token: &str) -> Result<usize> {
        let token = token.trim();
        if let Some(i) = self.state_labels.iter().position(|l| l == token) {
            return Ok(i);
        }
        match token.parse::<usize>() {
            Ok(i) if i >= 1 && i <= self.n() => Ok(i - 1),
            _ => Err(Error::Argument(format!(
                "unknown state `{token}` (labels: {}; or 1..={})",
                self.state_labels.join(", "),
                self.n()
            ))),
        }
    }

    /// Resolves an actuator by label, or by 1-based index when the token is
    /// numeric.
    pub fn actuator_index(&self, token: &str) -> Result<usize> {
        let token = token.trim();
        if let Some(i) = self.actuator_labels.iter().position(|l| l == token) {
            return Ok(i);
        }
        match token.parse::<usize>() {
            Ok(i) if i >= 1 && i <= self.num_actuators() => Ok(i - 1),
            _ => Err(Error::Argument(format!(
                "unknown actuator `{token}` (labels: {}; or 1..={})",
                self.actuator_labels.join(", "),
                self.num_actuators()
            ))),
        }
    }
}

/// Partition of the actuators into controlled (`B`) and lost (`C`) columns.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlSplit {
    /// 0-based indices of the lost actuators, ascending.
    pub uncontrolled: Vec<usize>,
    #[serde(skip)]
    pub b: Matrix,
    #[serde(skip)]
    pub c: Matrix,
}

pub fn split_system(sys: &LinearSystem, lost: &[usize]) -> Result<ControlSplit> {
    let k = sys.num_actuators();
    let mut idx: Vec<usize> = lost.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if idx.is_empty() {
        return Err(Error::Argument("lost actuator set is empty".into()));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= k) {
        return Err(Error::Argument(format!(
            "actuator index {bad} out of range (0..{k})"
        )));
    }
    if idx.len() == k {
        return Err(Error::Argument("cannot lose every actuator".into()));
    }
    let keep: Vec<usize> = (0..k).filter(|i| !idx.contains(i)).collect();
    Ok(ControlSplit {
        b: sys.b_bar.select_columns(&keep),
        c: sys.b_bar.select_columns(&idx),
        uncontrolled: idx,
    })
}

/// Dimension of a possibly empty set; the empty set has dimension −∞.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AffineDim {
    Empty,
    Finite(usize),
}

impl Serialize for AffineDim {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AffineDim::Empty => s.serialize_str("-inf"),
            AffineDim::Finite(d) => s.serialize_u64(*d as u64),
        }
    }
}

/// Inner approximation of `BU ⊖ (−CW)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZSet {
    pub inner: Option<Zonotope>,
    pub affine_dim: AffineDim,
    /// Orthonormal basis of the span, `n × r`.
    pub basis: Matrix,
    /// The approximation provably equals the true difference.
    pub exact: bool,
}

impl ZSet {
    pub fn is_empty(&self) -> bool {
        self.inner.is_none()
    }
}

pub fn compute_z_set(split: &ControlSplit, settings: &Settings) -> Result<ZSet> {
    compute_z_set_with(split, InnerDifferenceMethod::default(), settings)
}

pub fn compute_z_set_with(
    split: &ControlSplit,
    method: InnerDifferenceMethod,
    settings: &Settings,
) -> Result<ZSet> {
    let n = split.b.nrows();
    let bu = Zonotope::centered(split.b.clone())?;
    let cw = Zonotope::centered(split.c.clone())?;
    match inner_minkowski_difference(&bu, &cw, method, settings)? {
        Difference::Empty => Ok(ZSet {
            inner: None,
            affine_dim: AffineDim::Empty,
            basis: Matrix::zeros(n, 0),
            exact: true,
        }),
        Difference::Set { zonotope, exact } => {
            let basis = column_space(zonotope.generators(), settings.tol.rank);
            Ok(ZSet {
                affine_dim: AffineDim::Finite(basis.ncols()),
                inner: Some(zonotope),
                basis,
                exact,
            })
        }
    }
}

/// Placement of the spectrum relative to the imaginary axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumClass {
    /// Every real part below −tol.
    StrictlyNegative,
    /// Every real part at most tol, at least one within tol of zero.
    NonPositiveWithZero,
    /// Some real part above tol.
    Violated,
}

fn classify(spec: &Spectrum, tol: f64) -> SpectrumClass {
    if spec.max_real_part() > tol {
        SpectrumClass::Violated
    } else if spec.max_real_part() < -tol {
        SpectrumClass::StrictlyNegative
    } else {
        SpectrumClass::NonPositiveWithZero
    }
}

/// Evidence for one real eigenvalue of `Aᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenEvidence {
    pub eigenvalue: f64,
    pub eigenspace_dim: usize,
    /// Smallest singular value of `Uᵀ E`, where `U` spans the input set and
    /// `E` the eigenspace. Zero means some eigenvector is orthogonal to it.
    pub min_singular_value: f64,
    pub ok: bool,
}

/// True iff no real eigenvector of `Aᵀ` is orthogonal to the span with
/// orthonormal basis `basis`. For a symmetric set this is the same as no
/// eigenvector satisfying `vᵀz ≤ 0` on the whole set.
fn eigen_condition(spec: &Spectrum, basis: &Matrix, tol: f64) -> (bool, Vec<EigenEvidence>) {
    let mut ok = true;
    let mut evidence = Vec::new();
    for (lambda, e) in spec.real_eigenspaces() {
        let k = e.ncols();
        let (smin, good) = if basis.ncols() == 0 {
            (0.0, false)
        } else {
            let m = basis.transpose() * &e;
            let sv = m.singular_values();
            let smin = if sv.len() < k { 0.0 } else { sv.min() };
            (smin, smin > tol)
        };
        ok &= good;
        evidence.push(EigenEvidence {
            eigenvalue: lambda,
            eigenspace_dim: k,
            min_singular_value: smin,
            ok: good,
        });
    }
    (ok, evidence)
}

/// No real eigenvector `v` of `Aᵀ` with `vᵀz ≤ 0` for all `z ∈ Z`.
/// An empty set fails the condition.
pub fn eigenvector_condition(spec: &Spectrum, zset: &ZSet, settings: &Settings) -> bool {
    if zset.is_empty() {
        return false;
    }
    eigen_condition(spec, &zset.basis, settings.tol.rank.max(1e-9)).0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub max_real_part: f64,
    pub min_real_part: f64,
    pub spectrum_tolerance: f64,
    pub rank_tolerance: f64,
    pub eigenvalues: Vec<[f64; 2]>,
    pub eigen_evidence: Vec<EigenEvidence>,
    pub controllability_rank: Option<usize>,
    pub rank_b: usize,
    /// The set approximation provably equals the exact difference.
    pub z_exact: bool,
    /// A false verdict may stem from the inner approximation rather than the
    /// system.
    pub possibly_conservative: bool,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResilienceVerdict {
    pub z_empty: bool,
    pub z_dim: AffineDim,
    pub rank_condition: bool,
    pub spectrum_condition: SpectrumClass,
    pub eigenvector_condition: bool,
    pub resiliently_stabilizable: bool,
    pub resilient: bool,
    pub dim_equals_rank_b: bool,
    /// Nominal stabilizability, reported when `dim Z = rank B` makes it
    /// equivalent to resilient stabilizability.
    pub nominal_stabilizable: Option<bool>,
    /// Nominal controllability, reported under the same condition.
    pub nominal_controllable: Option<bool>,
    pub diagnostics: Diagnostics,
}

fn analyze(sys: &LinearSystem, split: &ControlSplit, settings: &Settings) -> Result<ResilienceVerdict> {
    if split.b.nrows() != sys.n() || split.c.nrows() != sys.n() {
        return Err(Error::Dimension("split does not match the system".into()));
    }
    let zset = compute_z_set(split, settings)?;
    verdict_from_zset(sys, split, &zset, settings)
}

pub fn verdict_from_zset(
    sys: &LinearSystem,
    split: &ControlSplit,
    zset: &ZSet,
    settings: &Settings,
) -> Result<ResilienceVerdict> {
    let tol = settings.tol;
    let n = sys.n();
    let spec = eigen_spectrum(sys.a(), tol.imag)?;
    let class = classify(&spec, tol.spectrum);
    let all_zero = spec.max_real_part().abs() <= tol.spectrum && spec.min_real_part().abs() <= tol.spectrum;
    let rank_b = numerical_rank(&split.b, tol.rank);
    let mut notes = Vec::new();

    let (rank, eig_ok, evidence) = match &zset.inner {
        None => {
            notes.push("Z is empty: CW is not contained in BU, so no control can counter every lost input".into());
            (None, false, Vec::new())
        }
        Some(_) => {
            let r = controllability_rank(sys.a(), &zset.basis, tol.rank)?;
            let (ok, ev) = eigen_condition(&spec, &zset.basis, tol.rank.max(1e-9));
            (Some(r), ok, ev)
        }
    };
    let rank_condition = rank == Some(n);
    let nonempty = !zset.is_empty();
    let stab = nonempty && rank_condition && class != SpectrumClass::Violated && eig_ok;
    let res = nonempty && rank_condition && all_zero && eig_ok;

    let dim_eq = matches!(zset.affine_dim, AffineDim::Finite(d) if d == rank_b);
    let (nom_s, nom_c) = if dim_eq {
        (
            Some(check_nominal(sys, NominalMode::Stabilizable, settings)?),
            Some(check_nominal(sys, NominalMode::Controllable, settings)?),
        )
    } else {
        (None, None)
    };
    if class == SpectrumClass::NonPositiveWithZero || all_zero {
        notes.push(format!(
            "real parts within {:e} of zero were classified as zero",
            tol.spectrum
        ));
    }
    let possibly_conservative = !zset.exact && nonempty && !(rank_condition && eig_ok);
    if possibly_conservative {
        notes.push("rank or eigenvector condition failed on an inner approximation of Z".into());
    }
    let eigenvalues = spec.eigenvalues.iter().map(|z| [z.re, z.im]).collect();
    Ok(ResilienceVerdict {
        z_empty: zset.is_empty(),
        z_dim: zset.affine_dim,
        rank_condition,
        spectrum_condition: class,
        eigenvector_condition: eig_ok,
        resiliently_stabilizable: stab,
        resilient: res,
        dim_equals_rank_b: dim_eq,
        nominal_stabilizable: nom_s,
        nominal_controllable: nom_c,
        diagnostics: Diagnostics {
            max_real_part: spec.max_real_part(),
            min_real_part: spec.min_real_part(),
            spectrum_tolerance: tol.spectrum,
            rank_tolerance: tol.rank,
            eigenvalues,
            eigen_evidence: evidence,
            controllability_rank: rank,
            rank_b,
            z_exact: zset.exact,
            possibly_conservative,
            notes,
        },
    })
}

/// Full verdict; `resiliently_stabilizable` is the headline field.
pub fn check_resilient_stabilizability(
    sys: &LinearSystem,
    split: &ControlSplit,
    settings: &Settings,
) -> Result<ResilienceVerdict> {
    analyze(sys, split, settings)
}

/// Full verdict; `resilient` is the headline field.
pub fn check_resilience(
    sys: &LinearSystem,
    split: &ControlSplit,
    settings: &Settings,
) -> Result<ResilienceVerdict> {
    analyze(sys, split, settings)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NominalMode {
    Stabilizable,
    Controllable,
}

/// Bounded-input stabilizability or controllability of the intact system.
pub fn check_nominal(sys: &LinearSystem, mode: NominalMode, settings: &Settings) -> Result<bool> {
    let tol = settings.tol;
    let spec = eigen_spectrum(sys.a(), tol.imag)?;
    let rank = controllability_rank(sys.a(), sys.b_bar(), tol.rank)?;
    let spectrum_ok = match mode {
        NominalMode::Stabilizable => spec.max_real_part() <= tol.spectrum,
        NominalMode::Controllable => {
            spec.max_real_part().abs() <= tol.spectrum && spec.min_real_part().abs() <= tol.spectrum
        }
    };
    let basis = column_space(sys.b_bar(), tol.rank);
    let (eig_ok, _) = eigen_condition(&spec, &basis, tol.rank.max(1e-9));
    Ok(rank == sys.n() && spectrum_ok && eig_ok)
}
