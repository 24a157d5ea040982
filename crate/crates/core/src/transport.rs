//! Exact 1-Wasserstein distance between empirical measures.
//!
//! The transportation LP with ℓ1 ground cost is solved as an integer min-cost
//! flow by successive shortest paths (Dijkstra on reduced costs). Costs are
//! scaled by [`COST_SCALE`] and rounded; masses are integral exactly when both
//! measures are uniform (`lcm(N, M)` units), otherwise scaled by
//! [`MASS_SCALE`]. The final node potentials give a dual certificate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::math;
use crate::measures::{check_dim, EmpiricalMeasure, PointCloud};

pub const COST_SCALE: f64 = 1e9;
pub const MASS_SCALE: f64 = 1e9;
/// Dense-cost limit for the LP path.
pub const MAX_SUPPORT: usize = 512;
/// Largest ground cost accepted; keeps scaled path lengths inside i64.
pub const MAX_COST: f64 = 1e6;
const ORACLE_MAX_LCM: usize = 12;
const PRODUCT_MAX_SUPPORT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GroundMetric {
    #[default]
    L1,
    /// Not used by any contraction bound.
    L2,
}

impl GroundMetric {
    pub fn distance(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            GroundMetric::L1 => linalg::l1_distance(x, y),
            GroundMetric::L2 => linalg::l2_distance(x, y),
        }
    }
}

/// A coupling `γ` (row-major `N × M`) together with dual potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub gamma: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub source: EmpiricalMeasure,
    pub target: EmpiricalMeasure,
    pub cost: f64,
    /// Dual potentials with `u_i + v_j ≤ c_ij`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    metric: GroundMetric,
}

/// Complementary-slackness summary of a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Certificate {
    /// `max(0, max_ij u_i + v_j - c_ij)`.
    pub max_dual_violation: f64,
    /// `max |u_i + v_j - c_ij|` over entries with `γ_ij > 0`.
    pub max_slackness_gap: f64,
    pub max_row_error: f64,
    pub max_col_error: f64,
    pub primal: f64,
    pub dual: f64,
}

impl TransportPlan {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * self.cols + j]
    }

    pub fn certificate(&self) -> Certificate {
        let mut viol = 0.0f64;
        let mut slack = 0.0f64;
        let mut row_err = 0.0f64;
        let mut col_sums = vec![0.0; self.cols];
        let mut primal = 0.0;
        for (i, x) in self.source.support().points().enumerate() {
            let mut row = 0.0;
            for (j, y) in self.target.support().points().enumerate() {
                let c = self.metric.distance(x, y);
                let g = self.get(i, j);
                let r = self.u[i] + self.v[j] - c;
                viol = viol.max(r);
                if g > 0.0 {
                    slack = slack.max(math::abs(r));
                }
                row += g;
                col_sums[j] += g;
                primal += g * c;
            }
            row_err = row_err.max(math::abs(row - self.source.weights()[i]));
        }
        let col_err = col_sums
            .iter()
            .zip(self.target.weights())
            .map(|(s, w)| math::abs(s - w))
            .fold(0.0, f64::max);
        let dual = dual_value(&self.u, &self.v, &self.source, &self.target);
        Certificate {
            max_dual_violation: viol,
            max_slackness_gap: slack,
            max_row_error: row_err,
            max_col_error: col_err,
            primal,
            dual,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct W1Result {
    pub value: f64,
    pub plan: TransportPlan,
    /// `|primal - dual|` for the reported plan and potentials.
    pub dual_gap: f64,
    /// Optimal objective in integer units (`Σ flow_ij · round(c_ij · COST_SCALE)`).
    pub scaled_objective: i128,
    /// Total integer mass shipped.
    pub mass_total: i64,
}

fn dual_value(u: &[f64], v: &[f64], a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> f64 {
    let su: f64 = u.iter().zip(a.weights()).map(|(x, w)| x * w).sum();
    let sv: f64 = v.iter().zip(b.weights()).map(|(x, w)| x * w).sum();
    su + sv
}

pub fn cost_matrix(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, metric: GroundMetric) -> Vec<f64> {
    let mut c = Vec::with_capacity(mu.len() * nu.len());
    for x in mu.support().points() {
        for y in nu.support().points() {
            c.push(metric.distance(x, y));
        }
    }
    c
}

/// Integer cost used by the flow solver.
pub fn scaled_cost(c: f64) -> i64 {
    math::round(c * COST_SCALE) as i64
}

fn nearly_uniform(mu: &EmpiricalMeasure) -> bool {
    let w = 1.0 / mu.len() as f64;
    mu.weights().iter().all(|&v| math::abs(v - w) <= 1e-14 * w)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Largest-remainder rounding of `weights · scale` to integers summing to `scale`.
fn integer_masses(weights: &[f64], scale: i64) -> Vec<i64> {
    let raw: Vec<f64> = weights.iter().map(|w| w * scale as f64).collect();
    let mut out: Vec<i64> = raw.iter().map(|r| math::floor(*r) as i64).collect();
    let mut missing = scale - out.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - math::floor(raw[a]);
        let fb = raw[b] - math::floor(raw[b]);
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut k = 0;
    while missing > 0 {
        out[order[k % order.len()]] += 1;
        missing -= 1;
        k += 1;
    }
    while missing < 0 {
        let i = order[order.len() - 1 - (k % order.len())];
        if out[i] > 0 {
            out[i] -= 1;
            missing += 1;
        }
        k += 1;
    }
    out
}

/// Exact W1 with ℓ1 ground cost.
pub fn w1(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<W1Result> {
    w1_with_metric(mu, nu, GroundMetric::L1)
}

pub fn w1_with_metric(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, metric: GroundMetric) -> Result<W1Result> {
    check_dim(mu.dim(), nu.dim())?;
    for m in [mu, nu] {
        if m.len() > MAX_SUPPORT {
            return Err(Error::SupportTooLarge {
                size: m.len(),
                limit: MAX_SUPPORT,
            });
        }
    }
    let (n, m) = (mu.len(), nu.len());
    let cost = cost_matrix(mu, nu, metric);
    if let Some(c) = cost.iter().find(|c| !c.is_finite() || **c > MAX_COST) {
        return if c.is_finite() {
            Err(Error::InvalidInput("ground cost exceeds the exact-solver range"))
        } else {
            Err(Error::NonFinite("cost matrix"))
        };
    }
    let icost: Vec<i64> = cost.iter().map(|&c| scaled_cost(c)).collect();

    let (supply, demand, total) = if nearly_uniform(mu) && nearly_uniform(nu) {
        let l = lcm(n, m);
        (vec![(l / n) as i64; n], vec![(l / m) as i64; m], l as i64)
    } else {
        let t = MASS_SCALE as i64;
        (integer_masses(mu.weights(), t), integer_masses(nu.weights(), t), t)
    };

    let flow = FlowSolver::new(n, m, &icost, supply, demand).solve();

    let mut gamma = vec![0.0; n * m];
    let mut value = 0.0;
    let mut scaled_objective: i128 = 0;
    for k in 0..n * m {
        if flow.flow[k] > 0 {
            gamma[k] = flow.flow[k] as f64 / total as f64;
            value += gamma[k] * cost[k];
            scaled_objective += flow.flow[k] as i128 * icost[k] as i128;
        }
    }

    // u_i = -p_i, v_j = p_j
    let u_int: Vec<i64> = flow.pot_src.iter().map(|p| -p).collect();
    let (u, v, dual) = float_dual(&u_int, &flow.pot_snk, &cost, mu, nu);
    let dual_gap = math::abs(value - dual);

    Ok(W1Result {
        value,
        plan: TransportPlan {
            gamma,
            rows: n,
            cols: m,
            source: mu.clone(),
            target: nu.clone(),
            cost: value,
            u,
            v,
            metric,
        },
        dual_gap,
        scaled_objective,
        mass_total: total,
    })
}

/// Rescales integer potentials with `u_i + v_j ≤ round(c_ij · COST_SCALE)`,
/// centres them, and shifts `v` down by the worst violation so the float
/// dual is feasible for the unrounded costs. Returns `(u, v, dual value)`.
fn float_dual(
    u_int: &[i64],
    v_int: &[i64],
    cost: &[f64],
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
) -> (Vec<f64>, Vec<f64>, f64) {
    let (n, m) = (u_int.len(), v_int.len());
    let mut u: Vec<f64> = u_int.iter().map(|p| *p as f64 / COST_SCALE).collect();
    let mut v: Vec<f64> = v_int.iter().map(|p| *p as f64 / COST_SCALE).collect();
    // (u + k, v - k) is the same dual
    let centre = u.iter().sum::<f64>() / n as f64;
    u.iter_mut().for_each(|x| *x -= centre);
    v.iter_mut().for_each(|x| *x += centre);
    let mut viol = 0.0f64;
    for i in 0..n {
        for j in 0..m {
            viol = viol.max(u[i] + v[j] - cost[i * m + j]);
        }
    }
    if viol > 0.0 {
        v.iter_mut().for_each(|x| *x -= viol);
    }
    let dual = dual_value(&u, &v, mu, nu);
    (u, v, dual)
}

struct FlowOutcome {
    flow: Vec<i64>,
    pot_src: Vec<i64>,
    pot_snk: Vec<i64>,
}

/// Successive shortest paths on the dense bipartite residual graph.
struct FlowSolver<'a> {
    n: usize,
    m: usize,
    cost: &'a [i64],
    excess: Vec<i64>,
    deficit: Vec<i64>,
    flow: Vec<i64>,
    pot_src: Vec<i64>,
    pot_snk: Vec<i64>,
}

const UNREACHED: i64 = i64::MAX;

impl<'a> FlowSolver<'a> {
    fn new(n: usize, m: usize, cost: &'a [i64], supply: Vec<i64>, demand: Vec<i64>) -> Self {
        // p_i = 0, p_j = min_i c_ij keeps every forward reduced cost ≥ 0
        let pot_snk = (0..m)
            .map(|j| (0..n).map(|i| cost[i * m + j]).min().unwrap_or(0))
            .collect();
        Self {
            n,
            m,
            cost,
            excess: supply,
            deficit: demand,
            flow: vec![0; n * m],
            pot_src: vec![0; n],
            pot_snk,
        }
    }

    fn solve(mut self) -> FlowOutcome {
        let (n, m) = (self.n, self.m);
        // node ids: sources 0..n, sinks n..n+m
        let mut dist = vec![UNREACHED; n + m];
        let mut done = vec![false; n + m];
        let mut parent = vec![usize::MAX; n + m];
        while self.excess.iter().any(|&e| e > 0) {
            dist.iter_mut().for_each(|d| *d = UNREACHED);
            done.iter_mut().for_each(|d| *d = false);
            parent.iter_mut().for_each(|p| *p = usize::MAX);
            for i in 0..n {
                if self.excess[i] > 0 {
                    dist[i] = 0;
                }
            }
            let mut target = usize::MAX;
            let mut bound = UNREACHED;
            loop {
                let mut best = usize::MAX;
                let mut best_d = UNREACHED;
                for (v, (&d, &f)) in dist.iter().zip(&done).enumerate() {
                    if !f && d < best_d {
                        best = v;
                        best_d = d;
                    }
                }
                if best == usize::MAX {
                    break;
                }
                done[best] = true;
                if best >= n && self.deficit[best - n] > 0 {
                    target = best;
                    bound = best_d;
                    break;
                }
                if best < n {
                    let i = best;
                    for j in 0..m {
                        let rc = self.cost[i * m + j] + self.pot_src[i] - self.pot_snk[j];
                        debug_assert!(rc >= 0);
                        let nd = best_d + rc;
                        if !done[n + j] && nd < dist[n + j] {
                            dist[n + j] = nd;
                            parent[n + j] = i;
                        }
                    }
                } else {
                    let j = best - n;
                    for i in 0..n {
                        if self.flow[i * m + j] > 0 {
                            let rc = -self.cost[i * m + j] + self.pot_snk[j] - self.pot_src[i];
                            debug_assert!(rc >= 0);
                            let nd = best_d + rc;
                            if !done[i] && nd < dist[i] {
                                dist[i] = nd;
                                parent[i] = best;
                            }
                        }
                    }
                }
            }
            assert!(target != usize::MAX, "balanced transportation problem is always feasible");

            for (k, d) in dist.iter().enumerate() {
                let step = (*d).min(bound);
                if k < n {
                    self.pot_src[k] += step;
                } else {
                    self.pot_snk[k - n] += step;
                }
            }

            // A sink's parent is the source of its forward arc; a source's
            // parent is the sink of the backward arc it was reached by, or
            // none for a path start.
            let mut push = self.deficit[target - n];
            let mut node = target;
            let source = loop {
                let i = parent[node];
                if parent[i] == usize::MAX {
                    push = push.min(self.excess[i]);
                    break i;
                }
                let j = parent[i];
                push = push.min(self.flow[i * m + (j - n)]);
                node = j;
            };
            self.excess[source] -= push;
            self.deficit[target - n] -= push;
            let mut node = target;
            loop {
                let i = parent[node];
                self.flow[i * m + (node - n)] += push;
                if i == source {
                    break;
                }
                let j = parent[i];
                self.flow[i * m + (j - n)] -= push;
                node = j;
            }
        }
        FlowOutcome {
            flow: self.flow,
            pot_src: self.pot_src,
            pot_snk: self.pot_snk,
        }
    }
}

/// Hungarian algorithm (shortest augmenting paths with potentials) on a
/// square integer cost matrix. Returns `(assignment, u, v)` with
/// `u_i + v_j ≤ c_ij`, tight on the assignment.
fn hungarian(cost: &[i64], n: usize) -> (Vec<usize>, Vec<i64>, Vec<i64>) {
    // 1-based internals, column 0 is a sentinel
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    (assignment, u[1..].to_vec(), v[1..].to_vec())
}

/// `W1(m(X), m(Y)) = min_σ (1/N) Σ ‖x_s - y_σ(s)‖₁` via the assignment problem.
pub fn w1_equal_size_assignment(x: &PointCloud, y: &PointCloud) -> Result<W1Result> {
    check_dim(x.dim(), y.dim())?;
    if x.len() != y.len() {
        return Err(Error::SizeMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    let mu = EmpiricalMeasure::uniform(x.clone());
    let nu = EmpiricalMeasure::uniform(y.clone());
    let cost = cost_matrix(&mu, &nu, GroundMetric::L1);
    if let Some(c) = cost.iter().find(|c| !c.is_finite() || **c > MAX_COST) {
        return if c.is_finite() {
            Err(Error::InvalidInput("ground cost exceeds the exact-solver range"))
        } else {
            Err(Error::NonFinite("cost matrix"))
        };
    }
    let icost: Vec<i64> = cost.iter().map(|&c| scaled_cost(c)).collect();
    let (assign, u_int, v_int) = hungarian(&icost, n);
    let nf = n as f64;
    let total: f64 = assign.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    let value = total / nf;
    let mut gamma = vec![0.0; n * n];
    let mut scaled_objective: i128 = 0;
    for (i, &j) in assign.iter().enumerate() {
        gamma[i * n + j] = 1.0 / nf;
        scaled_objective += icost[i * n + j] as i128;
    }
    let (u, v, dual) = float_dual(&u_int, &v_int, &cost, &mu, &nu);
    Ok(W1Result {
        value,
        plan: TransportPlan {
            gamma,
            rows: n,
            cols: n,
            source: mu,
            target: nu,
            cost: value,
            u,
            v,
            metric: GroundMetric::L1,
        },
        dual_gap: math::abs(value - dual),
        scaled_objective,
        mass_total: n as i64,
    })
}

/// Test oracle for uniform measures with `lcm(N, M) ≤ 12`: replicate each
/// support to `lcm(N, M)` points and solve the assignment problem.
pub fn w1_oracle_lcm(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_dim(mu.dim(), nu.dim())?;
    if !nearly_uniform(mu) || !nearly_uniform(nu) {
        return Err(Error::InvalidInput("lcm oracle needs uniform weights"));
    }
    let l = lcm(mu.len(), nu.len());
    if l > ORACLE_MAX_LCM {
        return Err(Error::OracleTooLarge { lcm: l });
    }
    let replicate = |m: &EmpiricalMeasure| -> Result<PointCloud> {
        let reps = l / m.len();
        let mut data = Vec::with_capacity(l * m.dim());
        for p in m.support().points() {
            for _ in 0..reps {
                data.extend_from_slice(p);
            }
        }
        PointCloud::new(m.dim(), data)
    };
    Ok(w1_equal_size_assignment(&replicate(mu)?, &replicate(nu)?)?.value)
}

/// `μ1 ⊗ μ2` on `R^{d1 + d2}`.
pub fn product_measure(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<EmpiricalMeasure> {
    let size = a.len() * b.len();
    if size > PRODUCT_MAX_SUPPORT {
        return Err(Error::SupportTooLarge {
            size,
            limit: PRODUCT_MAX_SUPPORT,
        });
    }
    let d = a.dim() + b.dim();
    let mut data = Vec::with_capacity(size * d);
    let mut weights = Vec::with_capacity(size);
    for (x, wx) in a.atoms() {
        for (y, wy) in b.atoms() {
            data.extend_from_slice(x);
            data.extend_from_slice(y);
            weights.push(wx * wy);
        }
    }
    EmpiricalMeasure::new(PointCloud::new(d, data)?, weights)
}

/// `(W1(μ1⊗μ2, ν1⊗ν2), W1(μ1, ν1), W1(μ2, ν2))`.
pub fn w1_product(
    mu1: &EmpiricalMeasure,
    nu1: &EmpiricalMeasure,
    mu2: &EmpiricalMeasure,
    nu2: &EmpiricalMeasure,
) -> Result<(f64, f64, f64)> {
    let joint = w1(&product_measure(mu1, mu2)?, &product_measure(nu1, nu2)?)?.value;
    Ok((joint, w1(mu1, nu1)?.value, w1(mu2, nu2)?.value))
}
