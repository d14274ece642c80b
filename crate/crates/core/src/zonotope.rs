//! Zonotopes `{c + G α : α ∈ [-1, 1]^q}` and the set operations built on them.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::linalg::{column_space, numerical_rank, Matrix, Vector};
use crate::lp::{Lp, LpOutcome, Relation, Sense};

/// A zonotope with center `c` and generator matrix `G` (one generator per
/// column). Zero columns denote the singleton `{c}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ZonotopeRepr", into = "ZonotopeRepr")]
pub struct Zonotope {
    center: Vector,
    generators: Matrix,
}

#[derive(Serialize, Deserialize)]
struct ZonotopeRepr {
    center: Vec<f64>,
    generators: Vec<Vec<f64>>,
}

impl From<Zonotope> for ZonotopeRepr {
    fn from(z: Zonotope) -> Self {
        ZonotopeRepr {
            center: z.center.iter().copied().collect(),
            generators: z
                .generators
                .column_iter()
                .map(|g| g.iter().copied().collect())
                .collect(),
        }
    }
}

impl TryFrom<ZonotopeRepr> for Zonotope {
    type Error = Error;
    fn try_from(r: ZonotopeRepr) -> Result<Self> {
        let n = r.center.len();
        let cols: Vec<Vector> = r
            .generators
            .into_iter()
            .map(|g| {
                if g.len() == n {
                    Ok(Vector::from_vec(g))
                } else {
                    Err(Error::Dimension(format!(
                        "generator has length {}, center has {n}",
                        g.len()
                    )))
                }
            })
            .collect::<Result<_>>()?;
        let g = if cols.is_empty() {
            Matrix::zeros(n, 0)
        } else {
            Matrix::from_columns(&cols)
        };
        Zonotope::new(Vector::from_vec(r.center), g)
    }
}

/// H-representation `{x : nᵢᵀx ≤ oᵢ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HPolytope {
    pub normals: Vec<Vector>,
    pub offsets: Vec<f64>,
}

impl HPolytope {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.normals
            .iter()
            .zip(&self.offsets)
            .all(|(n, o)| n.dot(x) <= o + tol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainmentMode {
    /// Generator-containment LP: sound, possibly incomplete.
    Sufficient,
    /// Facet enumeration of the outer set: sound and complete.
    Exact,
    /// Exact up to the configured ambient dimension, sufficient above it.
    Auto,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerDifferenceMethod {
    /// Per-generator scale factors maximizing their sum under the facet
    /// constraints of the minuend.
    #[default]
    GeneratorLp,
    /// Common scale followed by greedy per-generator enlargement.
    ScaleAndRefine,
}

/// Result of an inner Minkowski difference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Difference {
    Empty,
    Set {
        zonotope: Zonotope,
        /// True when the returned set is provably equal to the difference.
        exact: bool,
    },
}

impl Difference {
    pub fn zonotope(&self) -> Option<&Zonotope> {
        match self {
            Difference::Empty => None,
            Difference::Set { zonotope, .. } => Some(zonotope),
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Calls `f` on every k-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 && idx[0] == n - k {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Vector orthogonal to the `r − 1` columns of `m` (an `r × (r−1)` matrix),
/// by cofactor expansion. Its norm is the volume of the spanned parallelotope.
fn generalized_cross(m: &Matrix) -> Vector {
    let r = m.nrows();
    if r == 1 {
        return Vector::from_element(1, 1.0);
    }
    Vector::from_iterator(
        r,
        (0..r).map(|k| {
            let minor = m.clone().remove_row(k);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * minor.determinant()
        }),
    )
}

impl Zonotope {
    pub fn new(center: Vector, generators: Matrix) -> Result<Self> {
        if generators.nrows() != center.len() {
            return Err(Error::Dimension(format!(
                "generators have {} rows, center has length {}",
                generators.nrows(),
                center.len()
            )));
        }
        if center.is_empty() {
            return Err(Error::Dimension("zonotope dimension must be ≥ 1".into()));
        }
        if !center.iter().chain(generators.iter()).all(|v| v.is_finite()) {
            return Err(Error::Argument("zonotope has non-finite entries".into()));
        }
        Ok(Zonotope { center, generators })
    }

    /// Singleton `{c}`.
    pub fn point(center: Vector) -> Result<Self> {
        let n = center.len();
        Zonotope::new(center, Matrix::zeros(n, 0))
    }

    /// Centered zonotope with the given generator columns.
    pub fn centered(generators: Matrix) -> Result<Self> {
        Zonotope::new(Vector::zeros(generators.nrows()), generators)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn generators(&self) -> &Matrix {
        &self.generators
    }

    pub fn is_centered(&self, tol: f64) -> bool {
        self.center.amax() <= tol
    }

    /// Dimension of the affine hull.
    pub fn affine_dim(&self, rank_tol: f64) -> usize {
        numerical_rank(&self.generators, rank_tol)
    }

    /// Largest generator column norm, or 1 if there are none.
    pub(crate) fn scale(&self) -> f64 {
        let s = self
            .generators
            .column_iter()
            .map(|g| g.norm())
            .fold(0.0, f64::max);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    pub fn linear_map(&self, m: &Matrix) -> Result<Zonotope> {
        if m.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "map has {} columns, zonotope dimension is {}",
                m.ncols(),
                self.dim()
            )));
        }
        Zonotope::new(m * &self.center, m * &self.generators)
    }

    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Zonotope> {
        if other.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "cannot add zonotopes of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let n = self.dim();
        let (q1, q2) = (self.num_generators(), other.num_generators());
        let mut g = Matrix::zeros(n, q1 + q2);
        g.columns_mut(0, q1).copy_from(&self.generators);
        g.columns_mut(q1, q2).copy_from(&other.generators);
        Zonotope::new(&self.center + &other.center, g)
    }

    pub fn translate(&self, offset: &Vector) -> Result<Zonotope> {
        if offset.len() != self.dim() {
            return Err(Error::Dimension("offset length mismatch".into()));
        }
        Zonotope::new(&self.center + offset, self.generators.clone())
    }

    /// `max {dᵀx : x ∈ Z}`.
    pub fn support(&self, d: &Vector) -> Result<f64> {
        if d.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "direction has length {}, zonotope dimension is {}",
                d.len(),
                self.dim()
            )));
        }
        if d.iter().all(|v| *v == 0.0) {
            return Err(Error::Argument("support direction must be nonzero".into()));
        }
        Ok(self.support_unchecked(d))
    }

    pub(crate) fn support_unchecked(&self, d: &Vector) -> f64 {
        let spread: f64 = (d.transpose() * &self.generators).iter().map(|v| v.abs()).sum();
        d.dot(&self.center) + spread
    }

    /// Interval hull along coordinate `k`.
    pub fn interval(&self, k: usize) -> Result<(f64, f64)> {
        if k >= self.dim() {
            return Err(Error::Argument(format!(
                "dimension index {k} out of range for dimension {}",
                self.dim()
            )));
        }
        let r: f64 = self.generators.row(k).iter().map(|v| v.abs()).sum();
        Ok((self.center[k] - r, self.center[k] + r))
    }

    pub fn project(&self, dims: &[usize]) -> Result<Zonotope> {
        let mut seen = HashSet::new();
        for &d in dims {
            if d >= self.dim() {
                return Err(Error::Argument(format!(
                    "projection index {d} out of range for dimension {}",
                    self.dim()
                )));
            }
            if !seen.insert(d) {
                return Err(Error::Argument(format!("projection index {d} repeated")));
            }
        }
        if dims.is_empty() {
            return Err(Error::Argument("projection needs at least one index".into()));
        }
        let c = Vector::from_iterator(dims.len(), dims.iter().map(|&d| self.center[d]));
        let g = self.generators.select_rows(dims);
        Zonotope::new(c, g)
    }

    /// Generators with zero columns dropped and parallel columns merged. The
    /// represented set is unchanged.
    pub(crate) fn merged_generators(&self) -> Matrix {
        let n = self.dim();
        let scale = self.scale();
        let mut dirs: Vec<Vector> = Vec::new();
        let mut sums: Vec<Vector> = Vec::new();
        for g in self.generators.column_iter() {
            let norm = g.norm();
            if norm <= 1e-14 * scale {
                continue;
            }
            let mut u: Vector = g / norm;
            let lead = u.iter().copied().find(|v| v.abs() > 1e-12).unwrap_or(1.0);
            if lead < 0.0 {
                u = -u;
            }
            match dirs.iter().position(|d| (d - &u).amax() <= 1e-12) {
                Some(k) => sums[k] += &u * norm,
                None => {
                    sums.push(&u * norm);
                    dirs.push(u);
                }
            }
        }
        if sums.is_empty() {
            Matrix::zeros(n, 0)
        } else {
            Matrix::from_columns(&sums)
        }
    }

    /// All sign-pattern points `c + Gσ`, deduplicated. A superset of the vertex
    /// set.
    pub fn vertices(&self, settings: &Settings) -> Result<Vec<Vector>> {
        let g = self.merged_generators();
        let q = g.ncols();
        if q > settings.caps.vertex_generators {
            return Err(Error::Capacity(format!(
                "vertex enumeration over {q} generators exceeds the cap of {}",
                settings.caps.vertex_generators
            )));
        }
        let mut pts: Vec<Vector> = (0..1usize << q)
            .map(|mask| {
                let mut p = self.center.clone();
                for i in 0..q {
                    let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                    p.axpy(s, &g.column(i), 1.0);
                }
                p
            })
            .collect();
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let tol = settings.tol.dedup;
        let mut kept: Vec<Vector> = Vec::new();
        for p in pts {
            let dup = kept
                .iter()
                .rev()
                .take_while(|k| p[0] - k[0] <= tol)
                .any(|k| (k - &p).amax() <= tol);
            if !dup {
                kept.push(p);
            }
        }
        Ok(kept)
    }

    /// Maximum of a function over the sign-pattern points, without storing
    /// them.
    pub(crate) fn max_over_vertices(
        &self,
        settings: &Settings,
        f: impl Fn(&Vector) -> f64,
    ) -> Result<f64> {
        let g = self.merged_generators();
        let q = g.ncols();
        if q > settings.caps.vertex_generators {
            return Err(Error::Capacity(format!(
                "vertex enumeration over {q} generators exceeds the cap of {}",
                settings.caps.vertex_generators
            )));
        }
        let mut best = f64::NEG_INFINITY;
        for mask in 0..1usize << q {
            let mut p = self.center.clone();
            for i in 0..q {
                let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                p.axpy(s, &g.column(i), 1.0);
            }
            best = best.max(f(&p));
        }
        Ok(best)
    }

    /// Facets of the zonotope, expressed in the coordinates of an orthonormal
    /// basis `U` of its generator span. Returns `(U, H)` where `H` lives in
    /// `ℝ^r`, `r = rank G`, and describes `Uᵀ(Z − c) + Uᵀc`.
    pub(crate) fn facets_in_span(&self, settings: &Settings) -> Result<(Matrix, HPolytope)> {
        let g = self.merged_generators();
        let u = column_space(&g, settings.tol.rank);
        let r = u.ncols();
        if r == 0 {
            return Ok((u, HPolytope { normals: vec![], offsets: vec![] }));
        }
        let gr = u.transpose() * &g;
        let cr = u.transpose() * &self.center;
        let q = gr.ncols();
        let subsets = binomial(q, r - 1);
        if subsets > settings.caps.facet_subsets as f64 {
            return Err(Error::Capacity(format!(
                "facet enumeration needs {subsets:.0} generator subsets, cap is {}; use sufficient containment instead",
                settings.caps.facet_subsets
            )));
        }
        let norms: Vec<f64> = gr.column_iter().map(|c| c.norm()).collect();
        let mut seen: HashSet<Vec<i64>> = HashSet::new();
        let mut normals = Vec::new();
        let mut offsets = Vec::new();
        for_each_subset(q, r - 1, |idx| {
            let sub = gr.select_columns(idx);
            let n = generalized_cross(&sub);
            let vol: f64 = idx.iter().map(|&i| norms[i]).product();
            let len = n.norm();
            if len <= 1e-10 * vol || len == 0.0 {
                return;
            }
            let n = n / len;
            for s in [1.0, -1.0] {
                let ns: Vector = &n * s;
                let key: Vec<i64> = ns.iter().map(|v| (v * 1e9).round() as i64).collect();
                if seen.insert(key) {
                    let spread: f64 = (ns.transpose() * &gr).iter().map(|v| v.abs()).sum();
                    offsets.push(ns.dot(&cr) + spread);
                    normals.push(ns);
                }
            }
        });
        Ok((u, HPolytope { normals, offsets }))
    }

    /// H-representation of a full-dimensional zonotope.
    pub fn facets(&self, settings: &Settings) -> Result<HPolytope> {
        let n = self.dim();
        let r = self.affine_dim(settings.tol.rank);
        if r < n {
            return Err(Error::Rank {
                affine_dim: r,
                ambient: n,
            });
        }
        let (u, h) = self.facets_in_span(settings)?;
        let normals = h.normals.iter().map(|v| &u * v).collect();
        Ok(HPolytope {
            normals,
            offsets: h.offsets,
        })
    }

    /// Vertices of a 2-D zonotope in counter-clockwise order.
    pub fn polygon(&self) -> Result<Vec<[f64; 2]>> {
        if self.dim() != 2 {
            return Err(Error::Dimension(format!(
                "polygon needs a 2-D zonotope, got dimension {}",
                self.dim()
            )));
        }
        let mut gens: Vec<(f64, f64)> = self
            .merged_generators()
            .column_iter()
            .map(|g| {
                let (x, y) = (g[0], g[1]);
                if y < 0.0 || (y == 0.0 && x < 0.0) {
                    (-x, -y)
                } else {
                    (x, y)
                }
            })
            .collect();
        gens.sort_by(|a, b| a.1.atan2(a.0).total_cmp(&b.1.atan2(b.0)));
        let (cx, cy) = (self.center[0], self.center[1]);
        if gens.is_empty() {
            return Ok(vec![[cx, cy]]);
        }
        let sx: f64 = gens.iter().map(|g| g.0).sum();
        let sy: f64 = gens.iter().map(|g| g.1).sum();
        let mut p = (cx - sx, cy - sy);
        let mut out = Vec::with_capacity(2 * gens.len());
        for g in gens.iter().chain(gens.iter()) {
            out.push([p.0, p.1]);
            let (dx, dy) = if out.len() <= gens.len() {
                (2.0 * g.0, 2.0 * g.1)
            } else {
                (-2.0 * g.0, -2.0 * g.1)
            };
            p = (p.0 + dx, p.1 + dy);
        }
        Ok(out)
    }

    /// Membership test by a feasibility LP with slack tolerance `tol`.
    pub fn contains_point(&self, x: &Vector, tol: f64) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point has length {}, zonotope dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        let d: Vector = x - &self.center;
        let q = self.num_generators();
        if q == 0 {
            return Ok(d.iter().map(|v| v.abs()).sum::<f64>() <= tol);
        }
        // Cheap rejections through support functions.
        for k in 0..self.dim() {
            let r: f64 = self.generators.row(k).iter().map(|v| v.abs()).sum();
            if d[k].abs() > r + tol {
                return Ok(false);
            }
        }
        let dd = d.dot(&d);
        if dd > 0.0 {
            let spread: f64 = (d.transpose() * &self.generators).iter().map(|v| v.abs()).sum();
            if dd > spread + tol * d.norm() {
                return Ok(false);
            }
        }
        let n = self.dim();
        let mut lp = Lp::new(Sense::Minimize);
        let alpha: Vec<usize> = (0..q).map(|_| lp.var(0.0, -1.0, 1.0)).collect();
        for k in 0..n {
            let sp = lp.var(1.0, 0.0, f64::INFINITY);
            let sm = lp.var(1.0, 0.0, f64::INFINITY);
            let mut terms: Vec<(usize, f64)> = alpha
                .iter()
                .enumerate()
                .map(|(i, &a)| (a, self.generators[(k, i)]))
                .collect();
            terms.push((sp, 1.0));
            terms.push((sm, -1.0));
            lp.constraint(&terms, Relation::Eq, d[k]);
        }
        match lp.solve()? {
            LpOutcome::Optimal { objective, .. } => Ok(objective <= tol),
            other => Err(Error::numerical(format!(
                "membership LP ended as {}",
                outcome_name(&other)
            ))),
        }
    }
}

fn outcome_name(o: &LpOutcome) -> &'static str {
    match o {
        LpOutcome::Optimal { .. } => "optimal",
        LpOutcome::Infeasible => "infeasible",
        LpOutcome::Unbounded => "unbounded",
    }
}

/// `[-1, 1]^n` as a zonotope.
pub fn box_zonotope(n: usize) -> Result<Zonotope> {
    if n == 0 {
        return Err(Error::Dimension("box dimension must be ≥ 1".into()));
    }
    Zonotope::centered(Matrix::identity(n, n))
}

/// Splits `inner − c_outer` into its component inside span(outer) and the
/// residual outside it. Returns `(U, inner generators, inner offset, residual
/// direction if any)` in span coordinates.
struct SpanView {
    u: Matrix,
    outer_g: Matrix,
    inner_g: Matrix,
    offset: Vector,
    escape: Option<Vector>,
}

fn span_view(outer: &Zonotope, inner: &Zonotope, settings: &Settings) -> SpanView {
    let u = column_space(&outer.merged_generators(), settings.tol.rank);
    let scale = outer.scale().max(inner.scale());
    let tol = settings.tol.containment.max(1e-9 * scale);
    let off_full: Vector = &inner.center - &outer.center;
    let mut escape = None;
    let project_out = |v: &Vector| -> Vector { v - &u * (u.transpose() * v) };
    let res_c = project_out(&off_full);
    if res_c.norm() > tol {
        escape = Some(res_c.normalize());
    }
    if escape.is_none() {
        for g in inner.generators.column_iter() {
            let res = project_out(&g.into_owned());
            if res.norm() > tol {
                escape = Some(res.normalize());
                break;
            }
        }
    }
    SpanView {
        outer_g: u.transpose() * &outer.generators,
        inner_g: u.transpose() * &inner.generators,
        offset: u.transpose() * off_full,
        u,
        escape,
    }
}

/// Optimal row budget of the generator-containment LP: the smallest ρ such
/// that `G_in = G_out Γ`, `c_in − c_out = G_out β` and every row of `[Γ β]` has
/// ℓ₁ norm at most ρ. `None` if no such representation exists.
fn sufficient_budget(view: &SpanView) -> Result<Option<f64>> {
    let r = view.u.ncols();
    let qo = view.outer_g.ncols();
    let qi = view.inner_g.ncols();
    if r == 0 {
        return Ok(Some(0.0));
    }
    let mut lp = Lp::new(Sense::Minimize);
    let rho = lp.var(1.0, 0.0, f64::INFINITY);
    // Column j of Γ for j < qi, then β; each entry split into ± parts.
    let cols = qi + 1;
    let mut plus = vec![vec![0usize; cols]; qo];
    let mut minus = vec![vec![0usize; cols]; qo];
    for i in 0..qo {
        for j in 0..cols {
            plus[i][j] = lp.var(0.0, 0.0, f64::INFINITY);
            minus[i][j] = lp.var(0.0, 0.0, f64::INFINITY);
        }
    }
    for j in 0..cols {
        let target: Vector = if j < qi {
            view.inner_g.column(j).into_owned()
        } else {
            view.offset.clone()
        };
        for k in 0..r {
            let mut terms = Vec::with_capacity(2 * qo);
            for i in 0..qo {
                let a = view.outer_g[(k, i)];
                terms.push((plus[i][j], a));
                terms.push((minus[i][j], -a));
            }
            lp.constraint(&terms, Relation::Eq, target[k]);
        }
    }
    for i in 0..qo {
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(2 * cols + 1);
        for j in 0..cols {
            terms.push((plus[i][j], 1.0));
            terms.push((minus[i][j], 1.0));
        }
        terms.push((rho, -1.0));
        lp.constraint(&terms, Relation::Le, 0.0);
    }
    match lp.solve()? {
        LpOutcome::Optimal { objective, .. } => Ok(Some(objective)),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::numerical("containment LP unbounded")),
    }
}

/// `inner ⊆ outer`.
pub fn contains_zonotope(
    outer: &Zonotope,
    inner: &Zonotope,
    mode: ContainmentMode,
    settings: &Settings,
) -> Result<bool> {
    if outer.dim() != inner.dim() {
        return Err(Error::Dimension(format!(
            "containment between dimensions {} and {}",
            outer.dim(),
            inner.dim()
        )));
    }
    let mode = match mode {
        ContainmentMode::Auto if outer.dim() <= settings.caps.exact_containment_dim => {
            ContainmentMode::Exact
        }
        ContainmentMode::Auto => ContainmentMode::Sufficient,
        m => m,
    };
    match mode {
        ContainmentMode::Exact => Ok(separating_direction(outer, inner, settings)?.is_none()),
        _ => {
            let view = span_view(outer, inner, settings);
            if view.escape.is_some() {
                return Ok(false);
            }
            Ok(match sufficient_budget(&view)? {
                Some(rho) => rho <= 1.0 + settings.tol.containment,
                None => false,
            })
        }
    }
}

/// A unit direction `d` with `h_inner(d) > h_outer(d)`, or `None` when
/// `inner ⊆ outer`. Complete: relies on facet enumeration of `outer` inside
/// its own span.
pub fn separating_direction(
    outer: &Zonotope,
    inner: &Zonotope,
    settings: &Settings,
) -> Result<Option<Vector>> {
    if outer.dim() != inner.dim() {
        return Err(Error::Dimension(format!(
            "containment between dimensions {} and {}",
            outer.dim(),
            inner.dim()
        )));
    }
    let view = span_view(outer, inner, settings);
    if let Some(d) = view.escape {
        // The component outside span(outer) already separates, possibly with sign flipped.
        let hi = inner.support_unchecked(&d);
        let ho = outer.support_unchecked(&d);
        return Ok(Some(if hi > ho { d } else { -d }));
    }
    let (u, h) = outer.facets_in_span(settings)?;
    let tol = settings.tol.containment * outer.scale().max(1.0);
    let cr = u.transpose() * &outer.center;
    let inner_c = &view.offset + &cr;
    for (n, o) in h.normals.iter().zip(&h.offsets) {
        let spread: f64 = (n.transpose() * &view.inner_g).iter().map(|v| v.abs()).sum();
        if n.dot(&inner_c) + spread > o + tol {
            return Ok(Some(&u * n));
        }
    }
    Ok(None)
}

/// Inner approximation `G` of `zm ⊖ zs` with `G ⊕ zs ⊆ zm`, built by scaling
/// the generators of `zm`. Both operands must be centered.
pub fn inner_minkowski_difference(
    zm: &Zonotope,
    zs: &Zonotope,
    method: InnerDifferenceMethod,
    settings: &Settings,
) -> Result<Difference> {
    if zm.dim() != zs.dim() {
        return Err(Error::Dimension(format!(
            "difference between dimensions {} and {}",
            zm.dim(),
            zs.dim()
        )));
    }
    let ctol = 1e-12 * zm.scale().max(zs.scale());
    if !zm.is_centered(ctol) || !zs.is_centered(ctol) {
        return Err(Error::Precondition(
            "inner Minkowski difference needs centered operands".into(),
        ));
    }
    let n = zm.dim();
    if zs.merged_generators().ncols() == 0 {
        return Ok(Difference::Set {
            zonotope: zm.clone(),
            exact: true,
        });
    }
    let view = span_view(zm, zs, settings);
    if view.escape.is_some() {
        return Ok(Difference::Empty);
    }
    let gm = zm.generators();
    let q = gm.ncols();
    let tol = settings.tol.containment * zm.scale().max(1.0);

    let facets = match zm.facets_in_span(settings) {
        Ok((u, h)) => Some((u, h)),
        Err(Error::Capacity(_)) => None,
        Err(e) => return Err(e),
    };

    let (beta, exact) = match facets {
        Some((u, h)) => {
            let gmr = u.transpose() * gm;
            let gsr = &view.inner_g;
            let mut a = Matrix::zeros(h.len(), q);
            let mut rhs = Vec::with_capacity(h.len());
            for (j, (nrm, off)) in h.normals.iter().zip(&h.offsets).enumerate() {
                let hs: f64 = (nrm.transpose() * gsr).iter().map(|v| v.abs()).sum();
                let slack = off - hs;
                if slack < -tol {
                    return Ok(Difference::Empty);
                }
                rhs.push(slack.max(0.0));
                for i in 0..q {
                    a[(j, i)] = nrm.dot(&gmr.column(i)).abs();
                }
            }
            let beta = match method {
                InnerDifferenceMethod::GeneratorLp => generator_lp(&a, &rhs)?,
                InnerDifferenceMethod::ScaleAndRefine => scale_and_refine(&a, &rhs),
            };
            let positive = beta.iter().all(|&b| b > 1e-12);
            let tight = (0..h.len()).all(|j| {
                let lhs: f64 = (0..q).map(|i| a[(j, i)] * beta[i]).sum();
                (lhs - rhs[j]).abs() <= tol
            });
            (beta, positive && tight)
        }
        None => {
            if !contains_zonotope(zm, zs, ContainmentMode::Sufficient, settings)? {
                // Facets are out of reach; sufficient mode cannot certify
                // emptiness, so fall back to the trivial inner set.
                (vec![0.0; q], false)
            } else {
                let beta = match method {
                    InnerDifferenceMethod::GeneratorLp => sufficient_generator_lp(&view, zm, settings)?,
                    InnerDifferenceMethod::ScaleAndRefine => bisect_scales(zm, zs, settings)?,
                };
                (beta, false)
            }
        }
    };

    let cols: Vec<Vector> = (0..q)
        .filter(|&i| beta[i] > 1e-12)
        .map(|i| gm.column(i) * beta[i])
        .collect();
    let g = if cols.is_empty() {
        Matrix::zeros(n, 0)
    } else {
        Matrix::from_columns(&cols)
    };
    Ok(Difference::Set {
        zonotope: Zonotope::centered(g)?,
        exact,
    })
}

/// `max Σβ` s.t. `Aβ ≤ rhs`, `0 ≤ β ≤ 1`.
fn generator_lp(a: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let q = a.ncols();
    let mut lp = Lp::new(Sense::Maximize);
    let vars: Vec<usize> = (0..q).map(|_| lp.var(1.0, 0.0, 1.0)).collect();
    for (j, r) in rhs.iter().enumerate() {
        let terms: Vec<(usize, f64)> = vars.iter().map(|&v| (v, a[(j, v)])).collect();
        lp.constraint(&terms, Relation::Le, *r);
    }
    match lp.solve()? {
        LpOutcome::Optimal { values, .. } => Ok(shrink_to_feasible(a, rhs, values)),
        other => Err(Error::numerical(format!(
            "generator scaling LP ended as {}",
            outcome_name(&other)
        ))),
    }
}

/// Scales `beta` down so that `Aβ ≤ rhs` holds exactly in floating point.
fn shrink_to_feasible(a: &Matrix, rhs: &[f64], beta: Vec<f64>) -> Vec<f64> {
    let mut beta: Vec<f64> = beta.into_iter().map(|b| b.clamp(0.0, 1.0)).collect();
    let mut factor: f64 = 1.0;
    for (j, r) in rhs.iter().enumerate() {
        let lhs: f64 = beta.iter().enumerate().map(|(i, b)| a[(j, i)] * b).sum();
        if lhs > *r && lhs > 0.0 {
            factor = factor.min(r / lhs);
        }
    }
    if factor < 1.0 {
        for b in &mut beta {
            *b *= factor * (1.0 - 1e-12);
        }
    }
    beta
}

fn scale_and_refine(a: &Matrix, rhs: &[f64]) -> Vec<f64> {
    let q = a.ncols();
    let mut s: f64 = 1.0;
    for (j, r) in rhs.iter().enumerate() {
        let row: f64 = a.row(j).sum();
        if row > 0.0 {
            s = s.min(r / row);
        }
    }
    let mut beta = vec![s.max(0.0); q];
    for i in 0..q {
        let mut step = f64::INFINITY;
        for (j, r) in rhs.iter().enumerate() {
            if a[(j, i)] > 1e-15 {
                let used: f64 = (0..q).map(|k| a[(j, k)] * beta[k]).sum();
                step = step.min((r - used).max(0.0) / a[(j, i)]);
            }
        }
        beta[i] = (beta[i] + step).min(1.0);
    }
    shrink_to_feasible(a, rhs, beta)
}

/// Generator LP certified through the sufficient containment test instead of
/// facets: maximize Σβ subject to `G_m diag(β) ⊕ Z_s` being representable
/// through the generators of `Z_m` with unit row budget.
fn sufficient_generator_lp(view: &SpanView, zm: &Zonotope, _settings: &Settings) -> Result<Vec<f64>> {
    let u = &view.u;
    let gmr = u.transpose() * zm.generators();
    let r = u.ncols();
    let q = gmr.ncols();
    let qs = view.inner_g.ncols();
    let cols = q + qs;
    let mut lp = Lp::new(Sense::Maximize);
    let beta: Vec<usize> = (0..q).map(|_| lp.var(1.0, 0.0, 1.0)).collect();
    let mut plus = vec![vec![0usize; cols]; q];
    let mut minus = vec![vec![0usize; cols]; q];
    for i in 0..q {
        for j in 0..cols {
            plus[i][j] = lp.var(0.0, 0.0, f64::INFINITY);
            minus[i][j] = lp.var(0.0, 0.0, f64::INFINITY);
        }
    }
    for j in 0..cols {
        for k in 0..r {
            let mut terms = Vec::with_capacity(2 * q + 1);
            for i in 0..q {
                let a = gmr[(k, i)];
                terms.push((plus[i][j], a));
                terms.push((minus[i][j], -a));
            }
            if j < q {
                terms.push((beta[j], -gmr[(k, j)]));
                lp.constraint(&terms, Relation::Eq, 0.0);
            } else {
                lp.constraint(&terms, Relation::Eq, view.inner_g[(k, j - q)]);
            }
        }
    }
    for i in 0..q {
        let mut terms = Vec::with_capacity(2 * cols);
        for j in 0..cols {
            terms.push((plus[i][j], 1.0));
            terms.push((minus[i][j], 1.0));
        }
        lp.constraint(&terms, Relation::Le, 1.0);
    }
    match lp.solve()? {
        LpOutcome::Optimal { values, .. } => Ok(beta
            .iter()
            .map(|&b| (values[b] * (1.0 - 1e-9)).clamp(0.0, 1.0))
            .collect()),
        other => Err(Error::numerical(format!(
            "generator scaling LP ended as {}",
            outcome_name(&other)
        ))),
    }
}

/// Common-scale bisection followed by per-generator bisection, each step
/// certified by sufficient containment.
fn bisect_scales(zm: &Zonotope, zs: &Zonotope, settings: &Settings) -> Result<Vec<f64>> {
    let gm = zm.generators();
    let q = gm.ncols();
    let fits = |beta: &[f64]| -> Result<bool> {
        let g = Matrix::from_fn(gm.nrows(), q, |k, i| gm[(k, i)] * beta[i]);
        let cand = Zonotope::centered(g)?.minkowski_sum(zs)?;
        let view = span_view(zm, &cand, settings);
        if view.escape.is_some() {
            return Ok(false);
        }
        // No slack here: the result must stay inside zm.
        Ok(matches!(sufficient_budget(&view)?, Some(rho) if rho <= 1.0 - 1e-12))
    };
    let bisect = |lo: f64, hi: f64, test: &dyn Fn(f64) -> Result<bool>| -> Result<f64> {
        let (mut lo, mut hi) = (lo, hi);
        if test(hi)? {
            return Ok(hi);
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if test(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    };
    let s = bisect(0.0, 1.0, &|s| fits(&vec![s; q]))?;
    let mut beta = vec![s; q];
    for i in 0..q {
        let base = beta.clone();
        let b = bisect(base[i], 1.0, &|t| {
            let mut trial = base.clone();
            trial[i] = t;
            fits(&trial)
        })?;
        beta[i] = b;
    }
    Ok(beta)
}
