//! Problem containers: objectives, feasible sets, projections.
//!
//! A [`BilevelInstance`] bundles the upper objective `F(x, y)`, the lower
//! objective `f(x, y)`, their gradients, and the leader/follower feasible
//! sets. Instances are immutable after construction and safe to share
//! across threads; evaluators must be pure functions of their arguments.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::{all_finite, dist, norm, sub};
use crate::{Error, Result};

pub type EvalFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One level's objective with optional analytic gradients. When a gradient
/// is absent the accessors fall back to central finite differences.
#[derive(Clone)]
pub struct Objective {
    pub eval: EvalFn,
    pub grad_x: Option<GradFn>,
    pub grad_y: Option<GradFn>,
}

impl Objective {
    pub fn new(eval: EvalFn, grad_x: GradFn, grad_y: GradFn) -> Self {
        Self {
            eval,
            grad_x: Some(grad_x),
            grad_y: Some(grad_y),
        }
    }

    pub fn without_gradients(eval: EvalFn) -> Self {
        Self {
            eval,
            grad_x: None,
            grad_y: None,
        }
    }
}

/// Leader feasible set: a box intersected with linear inequalities
/// `a^T x <= b`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LeaderSet {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub inequalities: Vec<LinearInequality>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LinearInequality {
    pub a: Vec<f64>,
    pub b: f64,
}

impl LeaderSet {
    /// Validates bounds and verifies nonemptiness by a feasibility solve.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, inequalities: Vec<LinearInequality>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Config("leader box dimensions mismatch".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h || !l.is_finite() || !h.is_finite()) {
            return Err(Error::Config("leader box requires finite lo <= hi".into()));
        }
        for row in &inequalities {
            if row.a.len() != lo.len() {
                return Err(Error::Config("inequality row dimension mismatch".into()));
            }
        }
        let set = Self { lo, hi, inequalities };
        // Phase-1 feasibility: project the box center onto the intersection
        // and require membership. Fails fast on malformed instances.
        let center: Vec<f64> = set.lo.iter().zip(&set.hi).map(|(l, h)| 0.5 * (l + h)).collect();
        let p = set.project(&center);
        if !set.contains(&p, 1e-8) {
            return Err(Error::Infeasible(
                "leader set is empty: box and inequalities have no common point".into(),
            ));
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
            && self
                .inequalities
                .iter()
                .all(|r| crate::linalg::dot(&r.a, x) <= r.b + tol)
    }

    pub fn in_box(&self, x: &[f64], tol: f64) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    fn clamp_box(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| v.max(*l).min(*h))
            .collect()
    }

    /// Euclidean projection. Pure clamping when there are no inequality
    /// rows; otherwise Dykstra's alternating projections over the box and
    /// each halfspace, which converges to the exact projection onto the
    /// intersection.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        if self.inequalities.is_empty() {
            return self.clamp_box(z);
        }
        let n = self.dim();
        let mut x = z.to_vec();
        let mut corr_box = vec![0.0; n];
        let mut corr: Vec<Vec<f64>> = vec![vec![0.0; n]; self.inequalities.len()];
        for _ in 0..20000 {
            // the iterate can sit still for many sweeps while correction
            // vectors keep evolving; stop only when both settle
            let prev = x.clone();
            let mut corr_change = 0.0;
            // box step
            let shifted: Vec<f64> = x.iter().zip(&corr_box).map(|(v, c)| v + c).collect();
            let proj = self.clamp_box(&shifted);
            let new_corr = sub(&shifted, &proj);
            corr_change += dist(&corr_box, &new_corr);
            corr_box = new_corr;
            x = proj;
            // halfspace steps
            for (k, row) in self.inequalities.iter().enumerate() {
                let shifted: Vec<f64> = x.iter().zip(&corr[k]).map(|(v, c)| v + c).collect();
                let viol = crate::linalg::dot(&row.a, &shifted) - row.b;
                let proj = if viol > 0.0 {
                    let s = viol / crate::linalg::dot(&row.a, &row.a);
                    shifted.iter().zip(&row.a).map(|(v, a)| v - s * a).collect()
                } else {
                    shifted.clone()
                };
                let new_corr = sub(&shifted, &proj);
                corr_change += dist(&corr[k], &new_corr);
                corr[k] = new_corr;
                x = proj;
            }
            if dist(&prev, &x) + corr_change < 1e-14 {
                break;
            }
        }
        x
    }
}

/// Follower feasible set: a box, or the scaled simplex
/// `{y >= 0 : sum y_i = total}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FollowerSet {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    UnitSimplexSum { dim: usize, total: f64 },
}

impl FollowerSet {
    /// Nonempty, closed, bounded: finite box bounds with `lo <= hi`, or a
    /// positive simplex total.
    pub fn validate(&self) -> Result<()> {
        match self {
            FollowerSet::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::Config("follower box dimensions mismatch".into()));
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h || !l.is_finite() || !h.is_finite()) {
                    return Err(Error::Config("follower box requires finite lo <= hi".into()));
                }
            }
            FollowerSet::UnitSimplexSum { dim, total } => {
                if *dim == 0 || !total.is_finite() || *total <= 0.0 {
                    return Err(Error::Config("simplex needs dim >= 1 and total > 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            FollowerSet::Box { lo, .. } => lo.len(),
            FollowerSet::UnitSimplexSum { dim, .. } => *dim,
        }
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        match self {
            FollowerSet::Box { lo, hi } => y
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            FollowerSet::UnitSimplexSum { total, .. } => {
                y.iter().all(|v| *v >= -tol) && (y.iter().sum::<f64>() - total).abs() <= tol
            }
        }
    }

    /// Euclidean projection: per-coordinate clamp for boxes, the sort-based
    /// exact algorithm for the simplex.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        match self {
            FollowerSet::Box { lo, hi } => z
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| v.max(*l).min(*h))
                .collect(),
            FollowerSet::UnitSimplexSum { total, .. } => project_simplex(z, *total),
        }
    }

    /// A representative interior-ish point used to seed solves.
    pub fn center(&self) -> Vec<f64> {
        match self {
            FollowerSet::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            FollowerSet::UnitSimplexSum { dim, total } => vec![total / *dim as f64; *dim],
        }
    }

    /// Bounding box used for space-filling starts; the simplex is boxed by
    /// `[0, total]` per coordinate.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            FollowerSet::Box { lo, hi } => (lo.clone(), hi.clone()),
            FollowerSet::UnitSimplexSum { dim, total } => {
                (vec![0.0; *dim], vec![*total; *dim])
            }
        }
    }
}

/// Sort-based projection onto `{y >= 0 : sum y = total}`.
fn project_simplex(z: &[f64], total: f64) -> Vec<f64> {
    let m = z.len();
    let mut u = z.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        css += uk;
        let t = (css - total) / (k + 1) as f64;
        if k + 1 == m || u[k + 1] <= t {
            theta = t;
            break;
        }
    }
    z.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// A parametric bilevel problem instance.
#[derive(Clone)]
pub struct BilevelInstance {
    pub n: usize,
    pub m: usize,
    pub upper: Objective,
    pub lower: Objective,
    pub leader_set: LeaderSet,
    pub follower_set: FollowerSet,
    /// Bound on the Lipschitz modulus of `F(x, .)` over the follower set.
    pub lipschitz_upper_bound: Option<ScalarFn>,
    /// Quadratic-growth constant of the lower objective around its optima.
    pub growth_modulus: Option<ScalarFn>,
    /// Finite-difference step used when analytic gradients are absent.
    pub fd_step: f64,
}

impl BilevelInstance {
    pub fn new(
        upper: Objective,
        lower: Objective,
        leader_set: LeaderSet,
        follower_set: FollowerSet,
    ) -> Self {
        Self {
            n: leader_set.dim(),
            m: follower_set.dim(),
            upper,
            lower,
            leader_set,
            follower_set,
            lipschitz_upper_bound: None,
            growth_modulus: None,
            fd_step: 1e-6,
        }
    }

    pub fn with_lipschitz_bound(mut self, f: ScalarFn) -> Self {
        self.lipschitz_upper_bound = Some(f);
        self
    }

    pub fn with_growth_modulus(mut self, f: ScalarFn) -> Self {
        self.growth_modulus = Some(f);
        self
    }

    pub fn eval_upper(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if !self.leader_set.in_box(x, 1e-9) || !all_finite(y) {
            return Err(Error::Infeasible(format!(
                "eval_upper precondition: x in leader box and y finite, got x={x:?} y={y:?}"
            )));
        }
        let v = (self.upper.eval)(x, y);
        if !v.is_finite() {
            return Err(Error::EvalFailure {
                context: format!("F(x={x:?}, y={y:?})"),
            });
        }
        Ok(v)
    }

    pub fn eval_lower(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let v = (self.lower.eval)(x, y);
        if !v.is_finite() {
            return Err(Error::EvalFailure {
                context: format!("f(x={x:?}, y={y:?})"),
            });
        }
        Ok(v)
    }

    // Raw evaluators for inner loops that already validated inputs.
    pub fn f(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.lower.eval)(x, y)
    }

    pub fn big_f(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.upper.eval)(x, y)
    }

    pub fn grad_x_upper(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match &self.upper.grad_x {
            Some(g) => g(x, y),
            None => fd_grad_x(&self.upper.eval, x, y, self.fd_step),
        }
    }

    pub fn grad_y_upper(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match &self.upper.grad_y {
            Some(g) => g(x, y),
            None => fd_grad_y(&self.upper.eval, x, y, self.fd_step),
        }
    }

    pub fn grad_x_lower(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match &self.lower.grad_x {
            Some(g) => g(x, y),
            None => fd_grad_x(&self.lower.eval, x, y, self.fd_step),
        }
    }

    pub fn grad_y_lower(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match &self.lower.grad_y {
            Some(g) => g(x, y),
            None => fd_grad_y(&self.lower.eval, x, y, self.fd_step),
        }
    }

    pub fn has_analytic_gradients(&self) -> bool {
        self.upper.grad_x.is_some()
            && self.upper.grad_y.is_some()
            && self.lower.grad_x.is_some()
            && self.lower.grad_y.is_some()
    }

    /// Natural residual of the leader set: `z - P_X(z - w)`.
    pub fn residual_leader(&self, z: &[f64], w: &[f64]) -> Vec<f64> {
        let stepped = sub(z, w);
        let p = self.leader_set.project(&stepped);
        sub(z, &p)
    }

    /// Natural residual of the follower set: `z - P_Y(z - w)`.
    pub fn residual_follower(&self, z: &[f64], w: &[f64]) -> Vec<f64> {
        let stepped = sub(z, w);
        let p = self.follower_set.project(&stepped);
        sub(z, &p)
    }
}

fn fd_grad_x(eval: &EvalFn, x: &[f64], y: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = eval(&xp, y);
        xp[i] = x[i] - h;
        let fm = eval(&xp, y);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

fn fd_grad_y(eval: &EvalFn, x: &[f64], y: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; y.len()];
    let mut yp = y.to_vec();
    for i in 0..y.len() {
        yp[i] = y[i] + h;
        let fp = eval(x, &yp);
        yp[i] = y[i] - h;
        let fm = eval(x, &yp);
        yp[i] = y[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Relative agreement check between analytic gradients and central
/// differences at one point. Returns the worst relative error observed.
pub fn gradient_check(inst: &BilevelInstance, x: &[f64], y: &[f64], h: f64) -> f64 {
    let pairs = [
        (inst.grad_x_upper(x, y), fd_grad_x(&inst.upper.eval, x, y, h)),
        (inst.grad_y_upper(x, y), fd_grad_y(&inst.upper.eval, x, y, h)),
        (inst.grad_x_lower(x, y), fd_grad_x(&inst.lower.eval, x, y, h)),
        (inst.grad_y_lower(x, y), fd_grad_y(&inst.lower.eval, x, y, h)),
    ];
    let mut worst: f64 = 0.0;
    for (ga, gn) in pairs {
        let denom = norm(&gn).max(1.0);
        worst = worst.max(dist(&ga, &gn) / denom);
    }
    worst
}

// ---------------------------------------------------------------------------
// Declarative instance authoring
// ---------------------------------------------------------------------------

/// Serialized description of an instance. `objective` picks one of the
/// built-in studies or a custom quadratic pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub objective: ObjectiveSpec,
    /// Required for custom objectives; ignored by the named studies,
    /// whose sets are part of their fixture definitions.
    pub leader: Option<LeaderSetSpec>,
    pub follower: Option<FollowerSet>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeaderSetSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub inequalities: Vec<LinearInequality>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    Case1,
    Case2,
    CustomQuadratic {
        upper: QuadraticForm,
        lower: QuadraticForm,
    },
}

/// `q(x, y) = 0.5 x'Pxx x + 0.5 y'Pyy y + x'Pxy y + px'x + py'y + c`
/// with matrices stored row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadraticForm {
    pub pxx: Vec<Vec<f64>>,
    pub pyy: Vec<Vec<f64>>,
    pub pxy: Vec<Vec<f64>>,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    pub c: f64,
}

impl QuadraticForm {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut v = self.c;
        for i in 0..x.len() {
            v += self.px[i] * x[i];
            for j in 0..x.len() {
                v += 0.5 * self.pxx[i][j] * x[i] * x[j];
            }
            for j in 0..y.len() {
                v += self.pxy[i][j] * x[i] * y[j];
            }
        }
        for j in 0..y.len() {
            v += self.py[j] * y[j];
            for k in 0..y.len() {
                v += 0.5 * self.pyy[j][k] * y[j] * y[k];
            }
        }
        v
    }

    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = self.px.clone();
        for i in 0..x.len() {
            for j in 0..x.len() {
                g[i] += 0.5 * (self.pxx[i][j] + self.pxx[j][i]) * x[j];
            }
            for j in 0..y.len() {
                g[i] += self.pxy[i][j] * y[j];
            }
        }
        g
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = self.py.clone();
        for j in 0..y.len() {
            for k in 0..y.len() {
                g[j] += 0.5 * (self.pyy[j][k] + self.pyy[k][j]) * y[k];
            }
            for i in 0..x.len() {
                g[j] += self.pxy[i][j] * x[i];
            }
        }
        g
    }

    pub fn objective(&self) -> Objective {
        let q = self.clone();
        let q1 = self.clone();
        let q2 = self.clone();
        Objective::new(
            Arc::new(move |x: &[f64], y: &[f64]| q.eval(x, y)),
            Arc::new(move |x: &[f64], y: &[f64]| q1.grad_x(x, y)),
            Arc::new(move |x: &[f64], y: &[f64]| q2.grad_y(x, y)),
        )
    }
}

impl InstanceSpec {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let parsed = if path.extension().and_then(|e| e.to_str()) == Some("json") {
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        };
        Ok(parsed)
    }

    pub fn build(&self) -> Result<BilevelInstance> {
        match &self.objective {
            ObjectiveSpec::Case1 => crate::cases::case1_instance(&crate::cases::case1_params()),
            ObjectiveSpec::Case2 => crate::cases::case2_instance(&crate::cases::case2_params()),
            ObjectiveSpec::CustomQuadratic { upper, lower } => {
                let spec = self
                    .leader
                    .as_ref()
                    .ok_or_else(|| Error::Config("custom objective needs a [leader] block".into()))?;
                let leader =
                    LeaderSet::new(spec.lo.clone(), spec.hi.clone(), spec.inequalities.clone())?;
                let follower = self
                    .follower
                    .as_ref()
                    .ok_or_else(|| Error::Config("custom objective needs a [follower] block".into()))?;
                follower.validate()?;
                Ok(BilevelInstance::new(
                    upper.objective(),
                    lower.objective(),
                    leader,
                    follower.clone(),
                ))
            }
        }
    }
}
