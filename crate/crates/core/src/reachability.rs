//! Inner approximations of reachable sets under piecewise-constant inputs,
//! and grid-based reach-time oracles.

use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::linalg::{ensure_square, matrix_exponential, Matrix, Vector};
use crate::lp::{Lp, LpOutcome, Relation, Sense};
use crate::resilience::{compute_z_set, ControlSplit, LinearSystem, ZSet};
use crate::zonotope::Zonotope;

/// `Ω₀ = {x0}`, `Ωᵢ₊₁ = e^{Aδt} Ωᵢ ⊕ V` on a uniform time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachTube {
    pub times: Vec<f64>,
    pub sets: Vec<Zonotope>,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub steps: usize,
    /// Input set the tube was driven by (before discretization).
    pub input: Zonotope,
}

/// `(e^{Aδt}, ∫₀^δt e^{As} ds)`, both from one exponential of the augmented
/// matrix `[[A, I], [0, 0]]`.
pub fn discretize(a: &Matrix, dt: f64) -> Result<(Matrix, Matrix)> {
    ensure_square(a, "A")?;
    let n = a.nrows();
    let mut aug = Matrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, n)).fill_with_identity();
    let e = matrix_exponential(&aug, dt)?;
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, n)).into_owned(),
    ))
}

/// Centered zonotope whose generators are `∫₀^δt e^{A(δt−s)} gᵢ ds`.
pub fn step_input_zonotope(a: &Matrix, dt: f64, gens: &Matrix) -> Result<Zonotope> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Argument(format!("time step must be positive, got {dt}")));
    }
    if gens.nrows() != a.nrows() {
        return Err(Error::Dimension(format!(
            "generators have {} rows, A is {}x{}",
            gens.nrows(),
            a.nrows(),
            a.ncols()
        )));
    }
    if gens.ncols() == 0 {
        return Err(Error::Argument("input set needs at least one generator".into()));
    }
    let (_, integral) = discretize(a, dt)?;
    Zonotope::centered(integral * gens)
}

fn check_grid(t: f64, n: usize) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Argument(format!("horizon must be positive, got {t}")));
    }
    if n == 0 {
        return Err(Error::Argument("step count must be ≥ 1".into()));
    }
    Ok(())
}

/// Tube driven by an arbitrary centered input zonotope.
pub fn reach_tube_from_input(
    a: &Matrix,
    input: &Zonotope,
    x0: &Vector,
    horizon: f64,
    steps: usize,
    settings: &Settings,
) -> Result<ReachTube> {
    check_grid(horizon, steps)?;
    let n = a.nrows();
    if x0.len() != n || input.dim() != n {
        return Err(Error::Dimension(format!(
            "state dimension is {n}, x0 has {}, input set has {}",
            x0.len(),
            input.dim()
        )));
    }
    let r = input.num_generators();
    if steps.saturating_mul(r) > settings.caps.tube_generators {
        return Err(Error::Capacity(format!(
            "{steps} steps × {r} generators exceeds the tube cap of {}",
            settings.caps.tube_generators
        )));
    }
    let dt = horizon / steps as f64;
    let (e, f) = discretize(a, dt)?;
    let v = f * input.generators();
    let mut sets = Vec::with_capacity(steps + 1);
    let mut current = Zonotope::point(x0.clone())?;
    sets.push(current.clone());
    for _ in 0..steps {
        let moved = current.linear_map(&e)?;
        current = moved.minkowski_sum(&Zonotope::centered(v.clone())?)?;
        sets.push(current.clone());
    }
    Ok(ReachTube {
        times: (0..=steps).map(|i| i as f64 * dt).collect(),
        sets,
        x0: x0.iter().copied().collect(),
        horizon,
        steps,
        input: input.clone(),
    })
}

/// Tube of the reduced system `ẋ = Ax + z`, `z ∈ Z`.
pub fn reach_tube(
    a: &Matrix,
    zset: &ZSet,
    x0: &Vector,
    horizon: f64,
    steps: usize,
    settings: &Settings,
) -> Result<ReachTube> {
    let inner = zset
        .inner
        .as_ref()
        .ok_or_else(|| Error::Precondition("Z is empty; CW is not contained in BU".into()))?;
    reach_tube_from_input(a, inner, x0, horizon, steps, settings)
}

impl ReachTube {
    fn set(&self, step: usize) -> Result<&Zonotope> {
        self.sets.get(step).ok_or_else(|| {
            Error::Argument(format!("step {step} out of range 0..={}", self.steps))
        })
    }

    /// Interval hull of step `step` along coordinate `dim`.
    pub fn extent(&self, step: usize, dim: usize) -> Result<(f64, f64)> {
        self.set(step)?.interval(dim)
    }

    /// Range of coordinate `dim` over the points of step `step` whose
    /// coordinate `fixed` equals `value`; `None` if that slice is empty.
    pub fn slice_extent(
        &self,
        step: usize,
        dim: usize,
        fixed: usize,
        value: f64,
    ) -> Result<Option<(f64, f64)>> {
        let z = self.set(step)?;
        let n = z.dim();
        if dim >= n || fixed >= n {
            return Err(Error::Argument(format!(
                "dimension index out of range for dimension {n}"
            )));
        }
        let g = z.generators();
        let q = g.ncols();
        let c = z.center();
        let mut bounds = [0.0; 2];
        for (slot, sense) in [(0, Sense::Minimize), (1, Sense::Maximize)] {
            let mut lp = Lp::new(sense);
            let alpha: Vec<usize> = (0..q).map(|i| lp.var(g[(dim, i)], -1.0, 1.0)).collect();
            let terms: Vec<(usize, f64)> = alpha.iter().enumerate().map(|(i, &a)| (a, g[(fixed, i)])).collect();
            lp.constraint(&terms, Relation::Eq, value - c[fixed]);
            match lp.solve()? {
                LpOutcome::Optimal { objective, .. } => bounds[slot] = c[dim] + objective,
                LpOutcome::Infeasible => return Ok(None),
                LpOutcome::Unbounded => return Err(Error::numerical("slice LP unbounded")),
            }
        }
        if q == 0 && (c[fixed] - value).abs() > 1e-12 {
            return Ok(None);
        }
        Ok(Some((bounds[0], bounds[1])))
    }

    /// Piecewise-constant input values, one per grid interval, that steer
    /// `x0` to the point of the final set with coefficient vector `alpha`.
    pub fn input_sequence(&self, alpha: &[f64]) -> Result<Vec<Vector>> {
        let r = self.input.num_generators();
        if alpha.len() != r * self.steps {
            return Err(Error::Dimension(format!(
                "expected {} coefficients, got {}",
                r * self.steps,
                alpha.len()
            )));
        }
        Ok(alpha
            .chunks(r)
            .map(|chunk| self.input.generators() * Vector::from_column_slice(chunk))
            .collect())
    }
}

/// Outcome of a grid search for the first time a target is reached.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReachTime {
    Reached { step: usize, time: f64, dt: f64 },
    Unreached { t_max: f64, dt: f64 },
}

impl ReachTime {
    pub fn time(&self) -> Option<f64> {
        match self {
            ReachTime::Reached { time, .. } => Some(*time),
            ReachTime::Unreached { .. } => None,
        }
    }
}

/// First grid time `i·dt ≤ t_max` at which `x_tg ∈ Ωᵢ` for the tube driven by
/// `input`. Since the tube is an inner approximation, the returned time is an
/// upper bound on the true minimal reach time (up to the grid).
pub fn min_time_with_input(
    a: &Matrix,
    input: &Zonotope,
    x0: &Vector,
    x_tg: &Vector,
    dt: f64,
    t_max: f64,
    settings: &Settings,
) -> Result<ReachTime> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Argument(format!("time step must be positive, got {dt}")));
    }
    if !(t_max >= dt) {
        return Err(Error::Argument(format!("t_max {t_max} is below the step {dt}")));
    }
    let n = a.nrows();
    if x0.len() != n || x_tg.len() != n || input.dim() != n {
        return Err(Error::Dimension(format!(
            "state dimension is {n}; x0, target and input set must match"
        )));
    }
    let tol = settings.tol.containment;
    if (x0 - x_tg).amax() <= tol {
        return Ok(ReachTime::Reached { step: 0, time: 0.0, dt });
    }
    let steps = (t_max / dt + 1e-9).floor() as usize;
    let r = input.num_generators();
    if steps.saturating_mul(r) > settings.caps.tube_generators {
        return Err(Error::Capacity(format!(
            "{steps} steps × {r} generators exceeds the tube cap of {}",
            settings.caps.tube_generators
        )));
    }
    let (e, f) = discretize(a, dt)?;
    let v = f * input.generators();
    let mut current = Zonotope::point(x0.clone())?;
    for i in 1..=steps {
        current = current
            .linear_map(&e)?
            .minkowski_sum(&Zonotope::centered(v.clone())?)?;
        if current.contains_point(x_tg, tol)? {
            return Ok(ReachTime::Reached {
                step: i,
                time: i as f64 * dt,
                dt,
            });
        }
    }
    Ok(ReachTime::Unreached { t_max, dt })
}

/// Grid reach time of the reduced system `ẋ = Ax + z`, `z ∈ Z`.
pub fn min_time_upper_bound(
    a: &Matrix,
    zset: &ZSet,
    x0: &Vector,
    x_tg: &Vector,
    dt: f64,
    t_max: f64,
    settings: &Settings,
) -> Result<ReachTime> {
    let inner = zset
        .inner
        .as_ref()
        .ok_or_else(|| Error::Precondition("Z is empty; CW is not contained in BU".into()))?;
    min_time_with_input(a, inner, x0, x_tg, dt, t_max, settings)
}

/// Grid reach time of the intact system, input set `B̄Ū`.
pub fn nominal_time_oracle(
    sys: &LinearSystem,
    x0: &Vector,
    x_tg: &Vector,
    dt: f64,
    t_max: f64,
    settings: &Settings,
) -> Result<ReachTime> {
    let input = Zonotope::centered(sys.b_bar().clone())?;
    min_time_with_input(sys.a(), &input, x0, x_tg, dt, t_max, settings)
}

/// Grid reach time of the malfunctioning system, computed on the reduced
/// system over `Z`.
pub fn malfunction_time_oracle(
    sys: &LinearSystem,
    split: &ControlSplit,
    x0: &Vector,
    x_tg: &Vector,
    dt: f64,
    t_max: f64,
    settings: &Settings,
) -> Result<ReachTime> {
    let zset = compute_z_set(split, settings)?;
    min_time_upper_bound(sys.a(), &zset, x0, x_tg, dt, t_max, settings)
}
