//! Lyapunov-pair bounds on nominal and malfunctioning reach times and on
//! quantitative resilience.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_factor, numerical_rank, quad_norm, solve_lyapunov, symmetric_extremes, Matrix, Vector,
};
use crate::resilience::LinearSystem;
use crate::zonotope::Zonotope;

/// Where a Lyapunov pair came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PairId {
    Sampled { index: usize },
    /// Maximum-volume ellipsoid inscribed in Z.
    EllipsoidZ,
    /// Maximum-volume ellipsoid inscribed in B̄Ū.
    EllipsoidInput,
    /// `P = I`, usable when `A + Aᵀ ≺ 0`.
    Identity,
    Given,
}

/// `(P, Q)` with `AᵀP + PA = −Q`, plus the P-norm extrema of the input sets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovPair {
    pub id: PairId,
    #[serde(skip)]
    pub p: Matrix,
    #[serde(skip)]
    pub q: Matrix,
    pub lam_min_p: f64,
    pub lam_max_p: f64,
    pub lam_min_q: f64,
    pub lam_max_q: f64,
    pub b_max: f64,
    /// Zero when B̄Ū is flat.
    pub b_min: f64,
    /// `None` when Z is empty.
    pub z_max: Option<f64>,
    /// Zero when Z is flat, `None` when it is empty.
    pub z_min: Option<f64>,
}

/// `max ‖B̄ū‖_P` over the unit box, attained at a vertex.
pub fn b_max(p: &Matrix, b_bar: &Matrix, settings: &Settings) -> Result<f64> {
    z_max(p, &Zonotope::centered(b_bar.clone())?, settings)
}

/// Radius of the largest P-ball inside the zonotope `B̄Ū`; zero if it is flat.
pub fn b_min(p: &Matrix, b_bar: &Matrix, settings: &Settings) -> Result<f64> {
    match z_min(p, &Zonotope::centered(b_bar.clone())?, settings) {
        Err(Error::Rank { .. }) => Ok(0.0),
        other => other,
    }
}

/// `min ‖B̄ū‖_P` over the boundary of the unit box, by projected coordinate
/// descent on each facet `uᵢ = 1` (the `−1` facets mirror them).
pub fn b_min_box_boundary(p: &Matrix, b_bar: &Matrix) -> Result<f64> {
    if p.nrows() != b_bar.nrows() {
        return Err(Error::Dimension("P and B_bar disagree on n".into()));
    }
    cholesky_factor(p)?;
    let h = b_bar.transpose() * p * b_bar;
    let k = h.nrows();
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut best = f64::INFINITY;
    for pinned in 0..k {
        let mut u = Vector::zeros(k);
        u[pinned] = 1.0;
        let mut f = u.dot(&(&h * &u));
        for _ in 0..100_000 {
            for j in 0..k {
                if j == pinned || h[(j, j)] <= 0.0 {
                    continue;
                }
                let off: f64 = (0..k).filter(|&l| l != j).map(|l| h[(j, l)] * u[l]).sum();
                u[j] = (-off / h[(j, j)]).clamp(-1.0, 1.0);
            }
            let next = u.dot(&(&h * &u));
            let done = f - next <= 1e-10 * scale;
            f = next;
            if done {
                break;
            }
        }
        best = best.min(f);
    }
    Ok(best.max(0.0).sqrt())
}

/// `max ‖z‖_P` over a zonotope, attained at a vertex.
pub fn z_max(p: &Matrix, z: &Zonotope, settings: &Settings) -> Result<f64> {
    if p.nrows() != z.dim() {
        return Err(Error::Dimension("P and the set disagree on n".into()));
    }
    cholesky_factor(p)?;
    z.max_over_vertices(settings, |x| quad_norm(p, x))
}

/// P-norm inradius of a centered zonotope: with `P = MᵀM`, the smallest
/// facet distance of `M·Z` from the origin.
pub fn z_min(p: &Matrix, z: &Zonotope, settings: &Settings) -> Result<f64> {
    if p.nrows() != z.dim() {
        return Err(Error::Dimension("P and the set disagree on n".into()));
    }
    let m = cholesky_factor(p)?;
    let mz = z.linear_map(&m)?;
    let h = mz.facets(settings)?;
    Ok(h.offsets.iter().copied().fold(f64::INFINITY, f64::min).max(0.0))
}

impl LyapunovPair {
    /// Validates the pair against `a` and evaluates all extrema.
    pub fn new(
        id: PairId,
        a: &Matrix,
        p: Matrix,
        q: Matrix,
        b_bar: &Matrix,
        z: Option<&Zonotope>,
        settings: &Settings,
    ) -> Result<Self> {
        let res = (a.transpose() * &p + &p * a + &q).norm();
        if res > 1e-8 * q.norm() {
            return Err(Error::Precondition(format!(
                "(P, Q) does not satisfy the Lyapunov equation (residual {res:e})"
            )));
        }
        let (lam_min_p, lam_max_p) = symmetric_extremes(&p);
        let (lam_min_q, lam_max_q) = symmetric_extremes(&q);
        if lam_min_p <= 0.0 || lam_min_q <= 0.0 {
            return Err(Error::Precondition("P and Q must be positive definite".into()));
        }
        let (z_max_v, z_min_v) = match z {
            None => (None, None),
            Some(z) => {
                let zmin = match z_min(&p, z, settings) {
                    Err(Error::Rank { .. }) => 0.0,
                    other => other?,
                };
                (Some(z_max(&p, z, settings)?), Some(zmin))
            }
        };
        Ok(LyapunovPair {
            id,
            lam_min_p,
            lam_max_p,
            lam_min_q,
            lam_max_q,
            b_max: b_max(&p, b_bar, settings)?,
            b_min: b_min(&p, b_bar, settings)?,
            z_max: z_max_v,
            z_min: z_min_v,
            p,
            q,
        })
    }
}

/// `[lower, upper]`; `upper = None` stands for +∞.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: Option<f64>,
}

impl Interval {
    fn unbounded() -> Self {
        Interval {
            lower: 0.0,
            upper: None,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && self.upper.is_none_or(|u| x <= u)
    }
}

/// Which hypotheses behind the bound formulas hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypotheses {
    /// Z is nonempty and the split system is resiliently stabilizable.
    pub resiliently_stabilizable: bool,
}

fn lower_formula(pair: &LyapunovPair, norm: f64, beta: f64) -> f64 {
    let (lp, lq) = (pair.lam_min_p, pair.lam_max_q);
    2.0 * lp / lq * (1.0 + lq * norm / (2.0 * lp * beta)).ln()
}

fn upper_formula(pair: &LyapunovPair, norm: f64, kappa: f64) -> Option<f64> {
    if kappa <= 0.0 {
        return None;
    }
    let (lp, lq) = (pair.lam_max_p, pair.lam_min_q);
    Some(2.0 * lp / lq * (1.0 + lq * norm / (2.0 * lp * kappa)).ln())
}

/// Nominal and malfunctioning reach-time intervals from one pair.
pub fn reach_time_bounds(
    pair: &LyapunovPair,
    x0: &Vector,
    hyp: &Hypotheses,
) -> Result<(Interval, Interval)> {
    if x0.len() != pair.p.nrows() {
        return Err(Error::Dimension("x0 length does not match P".into()));
    }
    let norm = quad_norm(&pair.p, x0);
    let t_n = Interval {
        lower: lower_formula(pair, norm, pair.b_max),
        upper: upper_formula(pair, norm, pair.b_min),
    };
    let t_m = match (pair.z_max, pair.z_min) {
        (Some(zmax), Some(zmin)) if zmax > 0.0 => Interval {
            lower: if hyp.resiliently_stabilizable {
                lower_formula(pair, norm, zmax)
            } else {
                0.0
            },
            upper: upper_formula(pair, norm, zmin),
        },
        _ => Interval::unbounded(),
    };
    // With x0 = 0 the target is already reached.
    if norm == 0.0 {
        return Ok((
            Interval { lower: 0.0, upper: Some(0.0) },
            Interval { lower: 0.0, upper: Some(0.0) },
        ));
    }
    Ok((t_n, t_m))
}

/// Bounds on `r_q = inf_{x0} T_N/T_M` from one pair, before clamping.
/// Each endpoint is the infimum over `‖x0‖_P > 0` of the corresponding ratio
/// of reach-time bounds.
pub fn rq_bounds(pair: &LyapunovPair, hyp: &Hypotheses) -> Interval {
    let a = pair.lam_min_p * pair.lam_min_q / (pair.lam_max_p * pair.lam_max_q);
    let lower = match pair.z_min {
        Some(zmin) if zmin > 0.0 => a.min(zmin / pair.b_max),
        _ => 0.0,
    };
    let upper = match pair.z_max {
        Some(zmax) if pair.b_min > 0.0 && hyp.resiliently_stabilizable => {
            Some((1.0 / a).min(zmax / pair.b_min))
        }
        _ => None,
    };
    Interval { lower, upper }
}

/// Seeded random pairs: `Q = GᵀG + 10⁻⁶·tr(GᵀG)·I` with Gaussian `G`, `P`
/// from the Lyapunov equation. Pair `i` depends only on `(seed, i)`.
pub fn sample_pairs(a: &Matrix, count: usize, seed: u64) -> Result<Vec<(Matrix, Matrix)>> {
    if count == 0 {
        return Err(Error::Argument("sample count must be ≥ 1".into()));
    }
    let n = a.nrows();
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let g = Matrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
            let gtg = g.transpose() * &g;
            let q = &gtg + Matrix::identity(n, n) * (1e-6 * gtg.trace());
            let q = (&q + q.transpose()) * 0.5;
            let p = solve_lyapunov(a, &q)?;
            Ok((p, q))
        })
        .collect()
}

/// `P` whose unit ball is the maximum-volume ellipsoid inscribed in a
/// centered, full-dimensional zonotope. Computed on the polar side: the
/// minimum-volume centered ellipsoid around the scaled facet normals
/// `±nᵢ/oᵢ` (Khachiyan's algorithm), whose shape matrix inverts to `P`.
pub fn ellipsoid_fit_p(z: &Zonotope, settings: &Settings) -> Result<Matrix> {
    let n = z.dim();
    if !z.is_centered(1e-12 * z.scale()) {
        return Err(Error::Precondition("ellipsoid fit needs a centered zonotope".into()));
    }
    let h = z.facets(settings)?;
    let pts: Vec<Vector> = h
        .normals
        .iter()
        .zip(&h.offsets)
        .map(|(nrm, o)| nrm / *o)
        .collect();
    let k = pts.len();
    let nf = n as f64;
    let mut u = vec![1.0 / k as f64; k];
    let shape = |u: &[f64]| -> Matrix {
        pts.iter()
            .zip(u)
            .fold(Matrix::zeros(n, n), |acc, (p, w)| acc + p * p.transpose() * *w)
    };
    let mut iterations = 0;
    loop {
        let x = shape(&u);
        let xi = x
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::numerical("ellipsoid fit: singular moment matrix"))?;
        let (j, kmax) = pts
            .iter()
            .map(|p| p.dot(&(&xi * p)))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
        if kmax <= nf * (1.0 + 1e-9) {
            break;
        }
        iterations += 1;
        if iterations > 200_000 {
            return Err(Error::Numerical {
                message: "ellipsoid fit did not converge".into(),
                iterations: Some(iterations),
            });
        }
        let step = (kmax - nf) / (nf * (kmax - 1.0));
        for w in &mut u {
            *w *= 1.0 - step;
        }
        u[j] += step;
    }
    let mut p = shape(&u) * nf;
    p = (&p + p.transpose()) * 0.5;
    // Shrink to make the ellipsoid exactly inscribed despite the stopping tolerance.
    let pinv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::numerical("ellipsoid fit: singular P"))?;
    let worst = h
        .normals
        .iter()
        .zip(&h.offsets)
        .map(|(nrm, o)| nrm.dot(&(&pinv * nrm)) / (o * o))
        .fold(0.0, f64::max);
    if worst > 1.0 {
        p *= worst;
    }
    Ok(p)
}

/// Best bounds of one pair source.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SourceBounds {
    pub source: String,
    pub pairs: usize,
    pub t_n: Interval,
    pub t_m: Interval,
    pub r_q: Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BestPairs {
    pub t_n_lower: Option<PairId>,
    pub t_n_upper: Option<PairId>,
    pub t_m_lower: Option<PairId>,
    pub t_m_upper: Option<PairId>,
    pub r_q_lower: Option<PairId>,
    pub r_q_upper: Option<PairId>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub x0: Vec<f64>,
    pub t_n: Interval,
    pub t_m: Interval,
    pub r_q: Interval,
    pub best_pair_ids: BestPairs,
    pub sources: Vec<SourceBounds>,
    /// The r_q upper bound exceeded 1 and was clamped.
    pub r_q_clamped: bool,
    pub notes: Vec<String>,
}

struct Tally {
    t_n: Interval,
    t_m: Interval,
    r_q: Interval,
    best: BestPairs,
}

fn tally(pairs: &[LyapunovPair], x0: &Vector, hyp: &Hypotheses) -> Result<Tally> {
    let mut out = Tally {
        t_n: Interval::unbounded(),
        t_m: Interval::unbounded(),
        r_q: Interval::unbounded(),
        best: BestPairs {
            t_n_lower: None,
            t_n_upper: None,
            t_m_lower: None,
            t_m_upper: None,
            r_q_lower: None,
            r_q_upper: None,
        },
    };
    let better_lower = |cur: &mut f64, id: &mut Option<PairId>, v: f64, pid: PairId| {
        if id.is_none() || v > *cur {
            *cur = v;
            *id = Some(pid);
        }
    };
    let better_upper = |cur: &mut Option<f64>, id: &mut Option<PairId>, v: Option<f64>, pid: PairId| {
        if let Some(v) = v {
            if cur.is_none_or(|c| v < c) {
                *cur = Some(v);
                *id = Some(pid);
            }
        }
    };
    for pair in pairs {
        let (tn, tm) = reach_time_bounds(pair, x0, hyp)?;
        let rq = rq_bounds(pair, hyp);
        better_lower(&mut out.t_n.lower, &mut out.best.t_n_lower, tn.lower, pair.id);
        better_upper(&mut out.t_n.upper, &mut out.best.t_n_upper, tn.upper, pair.id);
        better_lower(&mut out.t_m.lower, &mut out.best.t_m_lower, tm.lower, pair.id);
        better_upper(&mut out.t_m.upper, &mut out.best.t_m_upper, tm.upper, pair.id);
        better_lower(&mut out.r_q.lower, &mut out.best.r_q_lower, rq.lower, pair.id);
        better_upper(&mut out.r_q.upper, &mut out.best.r_q_upper, rq.upper, pair.id);
    }
    Ok(out)
}

/// Inputs to [`bounds_report`].
pub struct BoundsRequest<'a> {
    pub system: &'a LinearSystem,
    /// Inner approximation of Z, `None` if Z is empty.
    pub z: Option<&'a Zonotope>,
    pub hypotheses: Hypotheses,
    pub x0: &'a Vector,
    pub samples: usize,
    pub seed: u64,
    /// Also try the ellipsoid-fit pairs.
    pub ellipsoid_fit: bool,
    /// Also try `P = I` when it is a Lyapunov matrix for `A`.
    pub identity: bool,
}

/// Best intervals over sampled pairs and ellipsoid-fit pairs.
pub fn bounds_report(req: &BoundsRequest, settings: &Settings) -> Result<BoundsReport> {
    let a = req.system.a();
    let b_bar = req.system.b_bar();
    let mut notes = Vec::new();
    if numerical_rank(b_bar, settings.tol.rank) < a.nrows() {
        notes.push("B_bar is rank deficient: the T_N upper bound is void".into());
    }
    if !req.hypotheses.resiliently_stabilizable {
        notes.push("not resiliently stabilizable: T_M lower bound and r_q upper bound are left open".into());
    }

    let mut groups: Vec<(String, Vec<LyapunovPair>)> = Vec::new();
    if req.samples > 0 {
        let raw = sample_pairs(a, req.samples, req.seed)?;
        let pairs = raw
            .into_par_iter()
            .enumerate()
            .map(|(i, (p, q))| {
                LyapunovPair::new(PairId::Sampled { index: i }, a, p, q, b_bar, req.z, settings)
            })
            .collect::<Result<Vec<_>>>()?;
        groups.push(("sampled".into(), pairs));
    }
    if req.ellipsoid_fit {
        let mut fitted = Vec::new();
        let mut targets: Vec<(PairId, Zonotope)> = Vec::new();
        if let Some(z) = req.z {
            targets.push((PairId::EllipsoidZ, z.clone()));
        }
        targets.push((PairId::EllipsoidInput, Zonotope::centered(b_bar.clone())?));
        for (id, set) in targets {
            let p = match ellipsoid_fit_p(&set, settings) {
                Ok(p) => p,
                Err(Error::Rank { .. }) => {
                    notes.push(format!("{id:?}: set is flat, no ellipsoid fit"));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let q = -(a.transpose() * &p + &p * a);
            let q = (&q + q.transpose()) * 0.5;
            if symmetric_extremes(&q).0 <= 0.0 {
                notes.push(format!("{id:?}: fitted P gives an indefinite Q, skipped"));
                continue;
            }
            fitted.push(LyapunovPair::new(id, a, p, q, b_bar, req.z, settings)?);
        }
        if !fitted.is_empty() {
            groups.push(("ellipsoid_fit".into(), fitted));
        }
    }
    if req.identity {
        let n = a.nrows();
        let q = -(a + a.transpose());
        if symmetric_extremes(&q).0 > 0.0 {
            let pair = LyapunovPair::new(PairId::Identity, a, Matrix::identity(n, n), q, b_bar, req.z, settings)?;
            groups.push(("identity".into(), vec![pair]));
        } else {
            notes.push("A + Aᵀ is not negative definite: no identity pair".into());
        }
    }
    if groups.is_empty() {
        return Err(Error::Argument("no Lyapunov pairs requested".into()));
    }

    let mut sources = Vec::new();
    let mut all: Vec<LyapunovPair> = Vec::new();
    for (name, pairs) in groups {
        let t = tally(&pairs, req.x0, &req.hypotheses)?;
        sources.push(SourceBounds {
            source: name,
            pairs: pairs.len(),
            t_n: t.t_n,
            t_m: t.t_m,
            r_q: clamp_rq(t.r_q).0,
        });
        all.extend(pairs);
    }
    let t = tally(&all, req.x0, &req.hypotheses)?;
    let (r_q, clamped) = clamp_rq(t.r_q);
    if clamped {
        notes.push("r_q upper bound exceeded 1 and was clamped".into());
    }
    Ok(BoundsReport {
        x0: req.x0.iter().copied().collect(),
        t_n: t.t_n,
        t_m: t.t_m,
        r_q,
        best_pair_ids: t.best,
        sources,
        r_q_clamped: clamped,
        notes,
    })
}

fn clamp_rq(i: Interval) -> (Interval, bool) {
    match i.upper {
        Some(u) if u <= 1.0 => (i, false),
        _ => (
            Interval {
                lower: i.lower.min(1.0),
                upper: Some(1.0),
            },
            true,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn s() -> Settings {
        Settings::default()
    }

    fn m(r: usize, c: usize, d: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, d)
    }

    fn brute_max(p: &Matrix, b: &Matrix) -> f64 {
        let k = b.ncols();
        (0..1usize << k)
            .map(|mask| {
                let u = Vector::from_iterator(k, (0..k).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }));
                let x = b * u;
                x.dot(&(p * &x)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn b_max_examples() {
        let i2 = Matrix::identity(2, 2);
        assert_relative_eq!(b_max(&i2, &i2, &s()).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
        let p = m(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        assert_relative_eq!(b_max(&p, &i2, &s()).unwrap(), 5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn b_min_examples() {
        let i2 = Matrix::identity(2, 2);
        assert_relative_eq!(b_min(&i2, &i2, &s()).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(b_min_box_boundary(&i2, &i2).unwrap(), 1.0, epsilon = 1e-9);
        let b = m(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert_relative_eq!(b_min(&i2, &b, &s()).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(b_min_box_boundary(&i2, &b).unwrap(), 1.0, epsilon = 1e-9);
        // Flat input set.
        let flat = m(2, 1, &[1.0, 0.0]);
        assert_eq!(b_min(&i2, &flat, &s()).unwrap(), 0.0);
    }

    #[test]
    fn box_boundary_matches_grid_search() {
        let b = m(2, 3, &[1.0, 0.4, -0.3, 0.2, 1.1, 0.7]);
        let p = m(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let qp = b_min_box_boundary(&p, &b).unwrap();
        let steps = 2000;
        let mut best = f64::INFINITY;
        for pinned in 0..3 {
            for i in 0..=steps {
                for j in 0..=steps / 10 {
                    let x = -1.0 + 2.0 * i as f64 / steps as f64;
                    let y = -1.0 + 2.0 * j as f64 / (steps / 10) as f64;
                    let mut u = [0.0; 3];
                    u[pinned] = 1.0;
                    let free: Vec<usize> = (0..3).filter(|&k| k != pinned).collect();
                    u[free[0]] = x;
                    u[free[1]] = y;
                    let v = &b * Vector::from_column_slice(&u);
                    best = best.min(v.dot(&(&p * &v)).sqrt());
                }
            }
        }
        assert!(qp <= best + 1e-9, "{qp} vs grid {best}");
        assert!(best - qp <= 1e-2, "{qp} vs grid {best}");
    }

    #[test]
    fn z_examples() {
        let i2 = Matrix::identity(2, 2);
        let sq = Zonotope::centered(i2.clone()).unwrap();
        assert_relative_eq!(z_max(&i2, &sq, &s()).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(z_min(&i2, &sq, &s()).unwrap(), 1.0, epsilon = 1e-12);
        let rect = Zonotope::centered(m(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        assert_relative_eq!(z_min(&i2, &rect, &s()).unwrap(), 1.0, epsilon = 1e-12);
        let g = Vector::from_vec(vec![0.3, -0.4]);
        let seg = Zonotope::centered(Matrix::from_columns(&[g.clone()])).unwrap();
        let p = m(2, 2, &[3.0, 0.5, 0.5, 2.0]);
        assert_relative_eq!(z_max(&p, &seg, &s()).unwrap(), g.dot(&(&p * &g)).sqrt(), epsilon = 1e-14);
        assert!(matches!(z_min(&p, &seg, &s()), Err(Error::Rank { .. })));
    }

    #[test]
    fn z_min_matches_boundary_sampling() {
        let z = Zonotope::centered(m(2, 3, &[1.0, 0.3, -0.5, 0.2, 0.8, 0.6])).unwrap();
        let p = m(2, 2, &[1.5, -0.2, -0.2, 0.7]);
        let r = z_min(&p, &z, &s()).unwrap();
        let poly = z.polygon().unwrap();
        let k = poly.len();
        let mut best = f64::INFINITY;
        for i in 0..k {
            let (a, b) = (poly[i], poly[(i + 1) % k]);
            for t in 0..=10_000 {
                let t = t as f64 / 10_000.0;
                let x = Vector::from_vec(vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                best = best.min(x.dot(&(&p * &x)).sqrt());
            }
        }
        assert!(r <= best + 1e-12);
        assert!(best - r <= 1e-6);
    }

    fn scalar_pair(x_scale: f64) -> LyapunovPair {
        // ẋ = −x + u: Q = 1 gives P = ½.
        let a = m(1, 1, &[-1.0]);
        let p = m(1, 1, &[0.5 * x_scale]);
        let q = m(1, 1, &[x_scale]);
        LyapunovPair::new(PairId::Given, &a, p, q, &m(1, 1, &[1.0]), None, &s()).unwrap()
    }

    #[test]
    fn scalar_bounds_are_exact() {
        let pair = scalar_pair(1.0);
        let hyp = Hypotheses { resiliently_stabilizable: false };
        for x0 in [0.3, 1.0, 4.0] {
            let (tn, _) = reach_time_bounds(&pair, &Vector::from_vec(vec![x0]), &hyp).unwrap();
            let exact = (1.0f64 + x0).ln();
            assert_relative_eq!(tn.lower, exact, epsilon = 1e-12);
            assert_relative_eq!(tn.upper.unwrap(), exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_state_gives_zero_bounds() {
        let pair = scalar_pair(1.0);
        let hyp = Hypotheses { resiliently_stabilizable: true };
        let (tn, tm) = reach_time_bounds(&pair, &Vector::zeros(1), &hyp).unwrap();
        assert_eq!((tn.lower, tn.upper), (0.0, Some(0.0)));
        assert_eq!((tm.lower, tm.upper), (0.0, Some(0.0)));
    }

    #[test]
    fn equal_eigenvalues_leave_only_the_set_ratio() {
        let a = -Matrix::identity(2, 2);
        let p = Matrix::identity(2, 2);
        let q = Matrix::identity(2, 2) * 2.0;
        let z = Zonotope::centered(Matrix::identity(2, 2) * 0.5).unwrap();
        let pair = LyapunovPair::new(PairId::Given, &a, p, q, &Matrix::identity(2, 2), Some(&z), &s()).unwrap();
        let rq = rq_bounds(&pair, &Hypotheses { resiliently_stabilizable: true });
        let zmin = pair.z_min.unwrap();
        assert_relative_eq!(rq.lower, 1f64.min(zmin / pair.b_max), epsilon = 1e-15);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = m(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let first = sample_pairs(&a, 3, 42).unwrap();
        let second = sample_pairs(&a, 3, 42).unwrap();
        assert_eq!(first, second);
        let other = sample_pairs(&a, 3, 43).unwrap();
        assert_ne!(first, other);
        for (p, q) in &first {
            assert!((a.transpose() * p + p * &a + q).norm() <= 1e-8 * q.norm());
        }
        // Pair i is independent of how many are drawn.
        assert_eq!(sample_pairs(&a, 1, 42).unwrap()[0], first[0]);
    }

    #[test]
    fn ellipsoid_fit_boxes() {
        let sq = Zonotope::centered(Matrix::identity(2, 2)).unwrap();
        let p = ellipsoid_fit_p(&sq, &s()).unwrap();
        assert_relative_eq!(p, Matrix::identity(2, 2), epsilon = 1e-6);
        let rect = Zonotope::centered(m(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        let p = ellipsoid_fit_p(&rect, &s()).unwrap();
        assert_relative_eq!(p, m(2, 2, &[0.25, 0.0, 0.0, 1.0]), epsilon = 1e-6);
    }

    #[test]
    fn ellipsoid_fit_beats_rotated_search() {
        // Dense search over inscribed ellipses of a hexagon: axis angle and
        // aspect ratio, scaled to touch the boundary. The fit must be
        // inscribed and at least as large as the best found.
        let z = Zonotope::centered(m(2, 3, &[1.0, 0.0, 0.7, 0.0, 1.0, 0.4])).unwrap();
        let h = z.facets(&s()).unwrap();
        let area = |p: &Matrix| std::f64::consts::PI / p.determinant().sqrt();
        let inscribed_scale = |p: &Matrix| -> f64 {
            let pinv = p.clone().try_inverse().unwrap();
            h.normals
                .iter()
                .zip(&h.offsets)
                .map(|(n, o)| n.dot(&(&pinv * n)) / (o * o))
                .fold(0.0, f64::max)
        };
        let fit = ellipsoid_fit_p(&z, &s()).unwrap();
        assert!(inscribed_scale(&fit) <= 1.0 + 1e-9);
        let mut best = 0.0f64;
        for i in 0..180 {
            let th = i as f64 * std::f64::consts::PI / 180.0;
            let r = m(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
            for j in 1..200 {
                let ratio = j as f64 / 40.0;
                let d = m(2, 2, &[1.0, 0.0, 0.0, ratio * ratio]);
                let mut p = &r * d * r.transpose();
                p *= inscribed_scale(&p);
                best = best.max(area(&p));
            }
        }
        assert!(area(&fit) >= best * (1.0 - 1e-3), "{} vs {}", area(&fit), best);
    }

    #[test]
    fn bad_pair_rejected() {
        let a = -Matrix::identity(2, 2);
        let res = LyapunovPair::new(
            PairId::Given,
            &a,
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
            &Matrix::identity(2, 2),
            None,
            &s(),
        );
        assert!(matches!(res, Err(Error::Precondition(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn b_max_matches_brute_force(b in prop::collection::vec(-1.0..1.0f64, 12), d in prop::collection::vec(0.2..2.0f64, 3)) {
            let b = Matrix::from_vec(3, 4, b);
            let p = Matrix::from_diagonal(&Vector::from_vec(d));
            let got = b_max(&p, &b, &s()).unwrap();
            prop_assert!((got - brute_max(&p, &b)).abs() <= 1e-12 * (1.0 + got));
        }

        #[test]
        fn pair_scaling_leaves_bounds_unchanged(scale in 0.01..100.0f64, x0 in 0.1..5.0f64) {
            let a = m(2, 2, &[-1.0, 0.4, -0.2, -0.5]);
            let (p, q) = sample_pairs(&a, 1, 7).unwrap().remove(0);
            let b = m(2, 3, &[1.0, 0.2, 0.5, 0.0, 1.0, 0.5]);
            let z = Zonotope::centered(m(2, 2, &[0.5, 0.1, 0.0, 0.5])).unwrap();
            let hyp = Hypotheses { resiliently_stabilizable: true };
            let one = LyapunovPair::new(PairId::Given, &a, p.clone(), q.clone(), &b, Some(&z), &s()).unwrap();
            let many = LyapunovPair::new(PairId::Given, &a, p * scale, q * scale, &b, Some(&z), &s()).unwrap();
            let x = Vector::from_vec(vec![x0, -0.3]);
            let (n1, m1) = reach_time_bounds(&one, &x, &hyp).unwrap();
            let (n2, m2) = reach_time_bounds(&many, &x, &hyp).unwrap();
            let close = |u: f64, v: f64| (u - v).abs() <= 1e-12 * (1.0 + u.abs());
            prop_assert!(close(n1.lower, n2.lower) && close(n1.upper.unwrap(), n2.upper.unwrap()));
            prop_assert!(close(m1.lower, m2.lower) && close(m1.upper.unwrap(), m2.upper.unwrap()));
            let (r1, r2) = (rq_bounds(&one, &hyp), rq_bounds(&many, &hyp));
            prop_assert!(close(r1.lower, r2.lower) && close(r1.upper.unwrap(), r2.upper.unwrap()));
        }

        #[test]
        fn bounds_grow_with_distance(x0 in 0.1..5.0f64, k in 1.01..3.0f64) {
            let a = m(2, 2, &[-1.0, 0.4, -0.2, -0.5]);
            let (p, q) = sample_pairs(&a, 1, 3).unwrap().remove(0);
            let b = m(2, 3, &[1.0, 0.2, 0.5, 0.0, 1.0, 0.5]);
            let z = Zonotope::centered(m(2, 2, &[0.5, 0.1, 0.0, 0.5])).unwrap();
            let hyp = Hypotheses { resiliently_stabilizable: true };
            let pair = LyapunovPair::new(PairId::Given, &a, p, q, &b, Some(&z), &s()).unwrap();
            let near = Vector::from_vec(vec![x0, 0.2]);
            let far = &near * k;
            let (n1, m1) = reach_time_bounds(&pair, &near, &hyp).unwrap();
            let (n2, m2) = reach_time_bounds(&pair, &far, &hyp).unwrap();
            prop_assert!(n2.lower > n1.lower && n2.upper.unwrap() > n1.upper.unwrap());
            prop_assert!(m2.lower > m1.lower && m2.upper.unwrap() > m1.upper.unwrap());
            prop_assert!(pair.z_min.unwrap() <= pair.z_max.unwrap());
            prop_assert!(pair.z_max.unwrap() <= pair.b_max + 1e-12);
            prop_assert!(pair.b_min <= pair.b_max);
        }
    }
}
