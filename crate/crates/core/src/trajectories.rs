//! Bohmian trajectories: initial sampling from ρ, RK4 integration through
//! stored velocity snapshots, and ensemble diagnostics.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QfdError, Result};
use crate::field::{ComplexField, RealField};
use crate::grid::{Boundary, Grid, Grid1D};
use crate::hydro;
use crate::ops;
use crate::propagator::{Observer, Sample};

/// Deterministic generator for a (seed, stream) pair.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    InverseCdf,
    UniformGrid,
    ExplicitList,
}

impl Sampling {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sampling::InverseCdf => "inverse_cdf",
            Sampling::UniformGrid => "uniform_grid",
            Sampling::ExplicitList => "explicit_list",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrajFlag {
    Ok,
    /// Left the domain through a Dirichlet wall at time `t`; frozen there.
    Exited { t: f64 },
    /// Could not step past a nodal region after the maximum step halving.
    NodeBreakdown { t: f64 },
}

impl TrajFlag {
    pub fn is_ok(&self) -> bool {
        matches!(self, TrajFlag::Ok)
    }

    fn label(&self) -> (&'static str, f64) {
        match self {
            TrajFlag::Ok => ("ok", f64::NAN),
            TrajFlag::Exited { t } => ("exited", *t),
            TrajFlag::NodeBreakdown { t } => ("node_breakdown", *t),
        }
    }
}

pub type Position = [f64; 2];

/// Ensemble of trajectories sharing time stamps. `positions[k][s]` is
/// trajectory `k` at `times[s]`. Periodic coordinates are stored unwrapped.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    pub dims: usize,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<Position>>,
    pub seed: u64,
    pub sampling: Sampling,
    pub flags: Vec<TrajFlag>,
}

impl TrajectorySet {
    pub fn new(dims: usize, t0: f64, initial: Vec<Position>, seed: u64, sampling: Sampling) -> Self {
        let n = initial.len();
        Self {
            dims,
            times: vec![t0],
            positions: initial.into_iter().map(|p| vec![p]).collect(),
            seed,
            sampling,
            flags: vec![TrajFlag::Ok; n],
        }
    }

    pub fn from_list_1d(t0: f64, xs: &[f64]) -> Self {
        Self::new(1, t0, xs.iter().map(|x| [*x, 0.0]).collect(), 0, Sampling::ExplicitList)
    }

    pub fn n_traj(&self) -> usize {
        self.positions.len()
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("at least one time stamp")
    }

    /// Positions of every trajectory at stored time index `s`.
    pub fn at(&self, s: usize) -> Vec<Position> {
        self.positions.iter().map(|p| p[s]).collect()
    }

    pub fn final_positions(&self) -> Vec<Position> {
        self.at(self.times.len() - 1)
    }

    /// Index of the stored time closest to `t`.
    pub fn time_index(&self, t: f64) -> usize {
        let mut best = 0;
        for (s, ts) in self.times.iter().enumerate() {
            if (ts - t).abs() < (self.times[best] - t).abs() {
                best = s;
            }
        }
        best
    }

    /// Long-format CSV: traj_id,t,x[,y].
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        if self.dims == 1 {
            writeln!(w, "traj_id,t,x")?;
        } else {
            writeln!(w, "traj_id,t,x,y")?;
        }
        for (k, path) in self.positions.iter().enumerate() {
            for (t, p) in self.times.iter().zip(path) {
                if self.dims == 1 {
                    writeln!(w, "{k},{t:e},{:e}", p[0])?;
                } else {
                    writeln!(w, "{k},{t:e},{:e},{:e}", p[0], p[1])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Manifest CSV: comment line with seed and sampling, then traj_id,flag,t_flag.
    pub fn write_manifest(&self, w: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(
            w,
            "# seed={} sampling={} n_traj={} dims={} n_times={}",
            self.seed,
            self.sampling.as_str(),
            self.n_traj(),
            self.dims,
            self.times.len()
        )?;
        writeln!(w, "traj_id,flag,t_flag")?;
        for (k, f) in self.flags.iter().enumerate() {
            let (label, t) = f.label();
            if t.is_nan() {
                writeln!(w, "{k},{label},")?;
            } else {
                writeln!(w, "{k},{label},{t:e}")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_files(&self, dir: impl AsRef<Path>, prefix: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join(format!("{prefix}_trajectories.csv")))?)?;
        self.write_manifest(std::fs::File::create(dir.join(format!("{prefix}_manifest.csv")))?)
    }
}

/// Piecewise-linear CDF of a density that is constant on each node's cell.
#[derive(Clone, Debug)]
pub struct CellCdf {
    /// Cell boundaries b₀ < b₁ < … < bₙ.
    edges: Vec<f64>,
    /// Cumulative probability at each boundary, from 0 to 1.
    cum: Vec<f64>,
}

impl CellCdf {
    /// From per-node values and the line grid; masses are value × weight.
    pub fn new(g: &Grid1D, values: &[f64]) -> Result<Self> {
        let n = g.n_points();
        let mut edges = Vec::with_capacity(n + 1);
        let mut cum = Vec::with_capacity(n + 1);
        edges.push(g.cell(0).0);
        cum.push(0.0);
        let mut acc = 0.0;
        for (i, v) in values.iter().enumerate() {
            if !(*v >= 0.0) {
                return Err(QfdError::param("rho", format!("negative or non-finite value at node {i}")));
            }
            acc += v * g.weight(i);
            edges.push(g.cell(i).1);
            cum.push(acc);
        }
        if !(acc > 0.0) {
            return Err(QfdError::param("rho", "zero total mass"));
        }
        for c in &mut cum {
            *c /= acc;
        }
        Ok(Self { edges, cum })
    }

    pub fn lower(&self) -> f64 {
        self.edges[0]
    }

    pub fn upper(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.edges[0] {
            return 0.0;
        }
        if x >= self.upper() {
            return 1.0;
        }
        let k = self.edges.partition_point(|e| *e <= x) - 1;
        let (a, b) = (self.edges[k], self.edges[k + 1]);
        self.cum[k] + (self.cum[k + 1] - self.cum[k]) * (x - a) / (b - a)
    }

    /// Inverse CDF; `u` in [0, 1].
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        // first cell whose upper cumulative value reaches u and that has mass
        let mut k = self.cum.partition_point(|c| *c < u).max(1) - 1;
        while k + 1 < self.cum.len() - 1 && self.cum[k + 1] <= self.cum[k] {
            k += 1;
        }
        let (c0, c1) = (self.cum[k], self.cum[k + 1]);
        let (a, b) = (self.edges[k], self.edges[k + 1]);
        if c1 <= c0 {
            return a;
        }
        a + (b - a) * ((u - c0) / (c1 - c0)).clamp(0.0, 1.0)
    }

    /// Index of the cell containing `u` in probability.
    fn cell_of(&self, u: f64) -> usize {
        let k = self.cum.partition_point(|c| *c < u).max(1) - 1;
        k.min(self.cum.len() - 2)
    }
}

fn check_normalized(rho: &RealField) -> Result<()> {
    let total = ops::integrate(rho);
    if (total - 1.0).abs() > 1e-6 {
        return Err(QfdError::NotNormalized { integral: total });
    }
    Ok(())
}

/// Draws `n` positions distributed as `rho0` by inverse-CDF sampling
/// (2D: marginal in x, then conditional in y).
pub fn sample_initial(rho0: &RealField, n: usize, seed: u64) -> Result<Vec<Position>> {
    check_normalized(rho0)?;
    let mut r = rng(seed, 0);
    match *rho0.grid() {
        Grid::One(g) => {
            let cdf = CellCdf::new(&g, rho0.values())?;
            Ok((0..n).map(|_| [cdf.quantile(r.random::<f64>()), 0.0]).collect())
        }
        Grid::Two(g) => {
            let (nx, ny) = (g.gx.n_points(), g.gy.n_points());
            let vals = rho0.values();
            let marginal: Vec<f64> = (0..nx)
                .map(|i| (0..ny).map(|j| vals[i * ny + j] * g.gy.weight(j)).sum())
                .collect();
            let mx = CellCdf::new(&g.gx, &marginal)?;
            let mut rows: Vec<Option<CellCdf>> = vec![None; nx];
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let u = r.random::<f64>();
                let i = mx.cell_of(u);
                let x = mx.quantile(u);
                let row = match &mut rows[i] {
                    Some(c) => c,
                    slot => slot.insert(CellCdf::new(&g.gy, &vals[i * ny..(i + 1) * ny])?),
                };
                let y = row.quantile(r.random::<f64>());
                out.push([x, y]);
            }
            Ok(out)
        }
    }
}

/// `n` evenly spaced positions across a 1D sampling domain (cell centres).
pub fn uniform_positions(g: &Grid1D, n: usize) -> Vec<Position> {
    let (lo, hi) = g.domain();
    (0..n).map(|k| [lo + (hi - lo) * (k as f64 + 0.5) / n as f64, 0.0]).collect()
}

/// Result of a velocity lookup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lookup {
    Velocity(Position),
    Masked,
    Outside,
}

/// Velocity field v(x, t) shared read-only by every trajectory.
pub trait VelocityProvider: Sync {
    fn dims(&self) -> usize;
    fn velocity(&self, t: f64, pos: Position) -> Lookup;
    fn time_range(&self) -> (f64, f64);
}

/// Velocity snapshots with linear-in-time and Catmull–Rom (bicubic in 2D)
/// spatial interpolation. Masked nodes hold NaN.
#[derive(Clone, Debug)]
pub struct SnapshotVelocity {
    grid: Grid,
    times: Vec<f64>,
    /// fields[s][axis][node]
    fields: Vec<Vec<Vec<f64>>>,
}

impl SnapshotVelocity {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            times: Vec::new(),
            fields: Vec::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Appends a snapshot; times must increase.
    pub fn push_fields(&mut self, t: f64, velocity: Vec<RealField>) -> Result<()> {
        if let Some(last) = self.times.last() {
            if !(t > *last) {
                return Err(QfdError::param("t", format!("snapshot time {t} does not increase past {last}")));
            }
        }
        if velocity.len() != self.grid.dims() {
            return Err(QfdError::GridMismatch("one velocity component per axis required".into()));
        }
        for v in &velocity {
            self.grid.ensure_same(v.grid())?;
        }
        self.times.push(t);
        self.fields.push(velocity.into_iter().map(|f| f.into_values()).collect());
        Ok(())
    }

    /// Velocity of ψ at time `t` with the standard node mask.
    pub fn push_psi(&mut self, t: f64, psi: &ComplexField, mass: f64) -> Result<()> {
        self.push_fields(t, velocity_of(psi, mass))
    }

    pub fn from_psis(times: &[f64], psis: &[ComplexField], mass: f64) -> Result<Self> {
        let grid = *psis.first().ok_or_else(|| QfdError::param("snapshots", "empty"))?.grid();
        let mut s = Self::new(grid);
        for (t, p) in times.iter().zip(psis) {
            s.push_psi(*t, p, mass)?;
        }
        Ok(s)
    }

    fn bracket(&self, t: f64) -> Option<(usize, f64)> {
        let n = self.times.len();
        if n == 0 {
            return None;
        }
        let tol = 1e-9 * (1.0 + t.abs());
        if t < self.times[0] - tol || t > self.times[n - 1] + tol {
            return None;
        }
        if n == 1 {
            return Some((0, 0.0));
        }
        let k = self.times.partition_point(|s| *s <= t).clamp(1, n - 1) - 1;
        let a = ((t - self.times[k]) / (self.times[k + 1] - self.times[k])).clamp(0.0, 1.0);
        Some((k, a))
    }

    fn spatial(&self, s: usize, pos: Position) -> Lookup {
        match self.grid {
            Grid::One(g) => {
                let Some(st) = stencil(&g, pos[0]) else { return Lookup::Outside };
                match interp_1d(&self.fields[s][0], &st) {
                    Some(v) => Lookup::Velocity([v, 0.0]),
                    None => Lookup::Masked,
                }
            }
            Grid::Two(g) => {
                let (Some(sx), Some(sy)) = (stencil(&g.gx, pos[0]), stencil(&g.gy, pos[1])) else {
                    return Lookup::Outside;
                };
                let ny = g.gy.n_points();
                let mut out = [0.0; 2];
                for (axis, o) in out.iter_mut().enumerate() {
                    let f = &self.fields[s][axis];
                    let mut acc = 0.0;
                    for (ix, wx) in sx.iter() {
                        for (iy, wy) in sy.iter() {
                            let v = f[ix * ny + iy];
                            if v.is_nan() {
                                return Lookup::Masked;
                            }
                            acc += wx * wy * v;
                        }
                    }
                    *o = acc;
                }
                Lookup::Velocity(out)
            }
        }
    }
}

impl VelocityProvider for SnapshotVelocity {
    fn dims(&self) -> usize {
        self.grid.dims()
    }

    fn velocity(&self, t: f64, pos: Position) -> Lookup {
        let Some((k, a)) = self.bracket(t) else { return Lookup::Outside };
        let lo = self.spatial(k, pos);
        if a == 0.0 {
            return lo;
        }
        let hi = self.spatial(k + 1, pos);
        match (lo, hi) {
            (Lookup::Velocity(u), Lookup::Velocity(v)) => {
                Lookup::Velocity([(1.0 - a) * u[0] + a * v[0], (1.0 - a) * u[1] + a * v[1]])
            }
            (Lookup::Outside, _) | (_, Lookup::Outside) => Lookup::Outside,
            _ => Lookup::Masked,
        }
    }

    fn time_range(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap_or(&self.times[0]))
    }
}

/// Velocity components with masked nodes set to NaN.
pub fn velocity_of(psi: &ComplexField, mass: f64) -> Vec<RealField> {
    let rho = psi.density();
    let mask = hydro::node_mask(&rho, hydro::EPS_NODE);
    hydro::current(psi, mass)
        .into_iter()
        .map(|j| {
            let mut v = j.zip_map(&rho, |j, r| j / r).expect("same grid");
            for (x, m) in v.values_mut().iter_mut().zip(&mask) {
                if *m {
                    *x = f64::NAN;
                }
            }
            v
        })
        .collect()
}

struct Stencil {
    nodes: [usize; 4],
    weights: [f64; 4],
    len: usize,
}

impl Stencil {
    fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes[..self.len].iter().copied().zip(self.weights[..self.len].iter().copied())
    }
}

/// Catmull–Rom weights around `x`; linear between the last two nodes at a
/// Dirichlet wall, `None` outside the domain.
fn stencil(g: &Grid1D, x: f64) -> Option<Stencil> {
    let n = g.n_points();
    let x = match g.boundary() {
        Boundary::Periodic => g.wrap(x),
        Boundary::Dirichlet => {
            if !g.contains(x) {
                return None;
            }
            x
        }
    };
    let s = (x - g.x_min()) / g.dx();
    let i = (s.floor() as usize).min(n - 1);
    let f = s - i as f64;
    let cubic = |nodes| Stencil {
        nodes,
        weights: catmull_rom(f),
        len: 4,
    };
    Some(match g.boundary() {
        Boundary::Periodic => cubic([(i + n - 1) % n, i, (i + 1) % n, (i + 2) % n]),
        Boundary::Dirichlet if i + 1 >= n => Stencil {
            nodes: [n - 1, 0, 0, 0],
            weights: [1.0, 0.0, 0.0, 0.0],
            len: 1,
        },
        Boundary::Dirichlet if i == 0 || i + 2 >= n => Stencil {
            nodes: [i, i + 1, 0, 0],
            weights: [1.0 - f, f, 0.0, 0.0],
            len: 2,
        },
        Boundary::Dirichlet => cubic([i - 1, i, i + 1, i + 2]),
    })
}

fn catmull_rom(f: f64) -> [f64; 4] {
    let f2 = f * f;
    let f3 = f2 * f;
    [
        0.5 * (-f3 + 2.0 * f2 - f),
        0.5 * (3.0 * f3 - 5.0 * f2 + 2.0),
        0.5 * (-3.0 * f3 + 4.0 * f2 + f),
        0.5 * (f3 - f2),
    ]
}

fn interp_1d(f: &[f64], st: &Stencil) -> Option<f64> {
    let mut acc = 0.0;
    for (i, w) in st.iter() {
        let v = f[i];
        if v.is_nan() {
            return None;
        }
        acc += w * v;
    }
    Some(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrateConfig {
    /// RK4 step.
    pub dt: f64,
    /// Positions are stored every `stride` steps (and at the end).
    pub stride: usize,
    /// Maximum number of successive step halvings near nodes.
    pub max_halvings: u32,
}

impl IntegrateConfig {
    pub fn new(dt: f64, stride: usize) -> Self {
        Self {
            dt,
            stride,
            max_halvings: 8,
        }
    }
}

enum StepError {
    Masked,
    Outside,
}

fn rk4(p: &dyn VelocityProvider, t: f64, x: Position, dt: f64) -> std::result::Result<Position, StepError> {
    let eval = |t: f64, x: Position| match p.velocity(t, x) {
        Lookup::Velocity(v) => Ok(v),
        Lookup::Masked => Err(StepError::Masked),
        Lookup::Outside => Err(StepError::Outside),
    };
    let add = |x: Position, v: Position, h: f64| [x[0] + h * v[0], x[1] + h * v[1]];
    let k1 = eval(t, x)?;
    let k2 = eval(t + 0.5 * dt, add(x, k1, 0.5 * dt))?;
    let k3 = eval(t + 0.5 * dt, add(x, k2, 0.5 * dt))?;
    let k4 = eval(t + dt, add(x, k3, dt))?;
    Ok([
        x[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ])
}

/// Advances by `dt`, halving into two sub-steps whenever a stage lands in a
/// masked region, down to `depth_left` more halvings.
fn advance(
    p: &dyn VelocityProvider,
    t: f64,
    x: Position,
    dt: f64,
    depth_left: u32,
) -> std::result::Result<Position, (StepError, f64)> {
    match rk4(p, t, x, dt) {
        Ok(y) => Ok(y),
        Err(StepError::Outside) => Err((StepError::Outside, t)),
        Err(StepError::Masked) if depth_left == 0 => Err((StepError::Masked, t)),
        Err(StepError::Masked) => {
            let h = 0.5 * dt;
            let mid = advance(p, t, x, h, depth_left - 1)?;
            advance(p, t + h, mid, h, depth_left - 1)
        }
    }
}

/// Integrates every unflagged trajectory from its last stored time to `t1`.
/// Flagged trajectories keep their last position.
pub fn integrate(ts: &TrajectorySet, provider: &dyn VelocityProvider, t1: f64, cfg: &IntegrateConfig) -> Result<TrajectorySet> {
    if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
        return Err(QfdError::param("trajectories.dt", "must be positive and finite"));
    }
    if cfg.stride == 0 {
        return Err(QfdError::param("trajectories.stride", "must be at least 1"));
    }
    if provider.dims() != ts.dims {
        return Err(QfdError::GridMismatch(format!(
            "{}D trajectories in a {}D velocity field",
            ts.dims,
            provider.dims()
        )));
    }
    let t0 = ts.last_time();
    let span = t1 - t0;
    if span < 0.0 {
        return Err(QfdError::param("t1", "must not precede the last stored time"));
    }
    let steps = (span / cfg.dt).ceil().max(0.0) as usize;
    let dt = if steps == 0 { 0.0 } else { span / steps as f64 };
    let mut new_times = Vec::new();
    for s in 1..=steps {
        if s % cfg.stride == 0 || s == steps {
            new_times.push(t0 + s as f64 * dt);
        }
    }

    let results: Vec<(Vec<Position>, TrajFlag)> = ts
        .positions
        .par_iter()
        .zip(ts.flags.par_iter())
        .map(|(path, flag)| {
            let mut x = *path.last().unwrap();
            let mut flag = *flag;
            let mut out = Vec::with_capacity(new_times.len());
            for s in 1..=steps {
                if flag.is_ok() {
                    let t = t0 + (s - 1) as f64 * dt;
                    match advance(provider, t, x, dt, cfg.max_halvings) {
                        Ok(y) => x = y,
                        Err((StepError::Outside, t)) => flag = TrajFlag::Exited { t },
                        Err((StepError::Masked, t)) => flag = TrajFlag::NodeBreakdown { t },
                    }
                }
                if s % cfg.stride == 0 || s == steps {
                    out.push(x);
                }
            }
            (out, flag)
        })
        .collect();

    let mut next = ts.clone();
    next.times.extend(new_times);
    for (k, (tail, flag)) in results.into_iter().enumerate() {
        next.positions[k].extend(tail);
        next.flags[k] = flag;
    }
    Ok(next)
}

/// Goodness-of-fit of trajectory positions against a density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub t: f64,
    pub n: usize,
    pub ks: f64,
    /// 99% critical value 1.63/√n.
    pub ks_bound: f64,
    pub chi2: f64,
    pub bins: usize,
    /// 99% critical value of χ² with bins − 1 degrees of freedom.
    pub chi2_bound: f64,
}

impl EquivarianceReport {
    pub fn ks_pass(&self) -> bool {
        self.ks <= self.ks_bound
    }

    /// KS test with the critical value multiplied by `factor`.
    pub fn ks_pass_scaled(&self, factor: f64) -> bool {
        self.ks <= factor * self.ks_bound
    }

    pub fn chi2_pass(&self) -> bool {
        self.chi2 <= self.chi2_bound
    }
}

pub const MIN_EQUIVARIANCE_TRAJ: usize = 1000;

/// Wilson–Hilferty approximation of the 99% χ² quantile.
fn chi2_quantile_99(dof: f64) -> f64 {
    let z = 2.326_347_874;
    let a = 2.0 / (9.0 * dof);
    dof * (1.0 - a + z * a.sqrt()).powi(3)
}

fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let f = cdf(*x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn chi2_equal_probability(sorted: &[f64], cdf: &CellCdf, bins: usize) -> f64 {
    let n = sorted.len() as f64;
    let mut counts = vec![0usize; bins];
    for x in sorted {
        let b = ((cdf.cdf(*x) * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    let e = n / bins as f64;
    counts.iter().map(|c| (*c as f64 - e).powi(2) / e).sum()
}

fn wrap_into_domain(g: &Grid1D, x: f64) -> f64 {
    match g.boundary() {
        Boundary::Periodic => {
            let (lo, hi) = g.domain();
            lo + (x - lo).rem_euclid(hi - lo)
        }
        Boundary::Dirichlet => x,
    }
}

/// KS and χ² (≥ 20 equal-probability bins) of the positions stored at the
/// time closest to `t` against `rho_t`. On 2D grids the KS statistic is the
/// larger of the two marginal statistics and χ² uses the x marginal.
/// Trajectories flagged as exited are excluded.
pub fn equivariance_check(ts: &TrajectorySet, rho_t: &RealField, t: f64, bins: usize) -> Result<EquivarianceReport> {
    let s = ts.time_index(t);
    let pos: Vec<Position> = ts
        .positions
        .iter()
        .zip(&ts.flags)
        .filter(|(_, f)| !matches!(f, TrajFlag::Exited { .. }))
        .map(|(p, _)| p[s])
        .collect();
    equivariance_of_positions(&pos, rho_t, ts.times[s], bins)
}

pub fn equivariance_of_positions(pos: &[Position], rho_t: &RealField, t: f64, bins: usize) -> Result<EquivarianceReport> {
    if pos.len() < MIN_EQUIVARIANCE_TRAJ {
        return Err(QfdError::TooFewTrajectories {
            got: pos.len(),
            need: MIN_EQUIVARIANCE_TRAJ,
        });
    }
    let bins = bins.max(20);
    let n = pos.len();
    let marginals: Vec<(Grid1D, Vec<f64>)> = match *rho_t.grid() {
        Grid::One(g) => vec![(g, rho_t.values().to_vec())],
        Grid::Two(g) => {
            let (nx, ny) = (g.gx.n_points(), g.gy.n_points());
            let v = rho_t.values();
            let mx = (0..nx).map(|i| (0..ny).map(|j| v[i * ny + j] * g.gy.weight(j)).sum()).collect();
            let my = (0..ny).map(|j| (0..nx).map(|i| v[i * ny + j] * g.gx.weight(i)).sum()).collect();
            vec![(g.gx, mx), (g.gy, my)]
        }
    };
    let mut ks = 0.0f64;
    let mut chi2 = 0.0;
    for (axis, (g, m)) in marginals.iter().enumerate() {
        let cdf = CellCdf::new(g, m)?;
        let mut xs: Vec<f64> = pos.iter().map(|p| wrap_into_domain(g, p[axis])).collect();
        xs.sort_by(|a, b| a.total_cmp(b));
        ks = ks.max(ks_statistic(&xs, |x| cdf.cdf(x)));
        if axis == 0 {
            chi2 = chi2_equal_probability(&xs, &cdf, bins);
        }
    }
    Ok(EquivarianceReport {
        t,
        n,
        ks,
        ks_bound: 1.63 / (n as f64).sqrt(),
        chi2,
        bins,
        chi2_bound: chi2_quantile_99((bins - 1) as f64),
    })
}

/// First order inversion between two trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub time_index: usize,
    pub t: f64,
    pub first: usize,
    pub second: usize,
}

/// Checks that the initial ordering of 1D trajectories is preserved at
/// every stored time. Returns the earliest inversion, if any.
pub fn non_crossing_check(ts: &TrajectorySet) -> Result<Option<Crossing>> {
    if ts.dims != 1 {
        return Err(QfdError::param("trajectories", "non-crossing check needs 1D trajectories"));
    }
    let mut order: Vec<usize> = (0..ts.n_traj()).collect();
    order.sort_by(|a, b| ts.positions[*a][0][0].total_cmp(&ts.positions[*b][0][0]));
    for s in 1..ts.times.len() {
        for w in order.windows(2) {
            let (a, b) = (w[0], w[1]);
            if ts.positions[a][s][0] > ts.positions[b][s][0] {
                return Ok(Some(Crossing {
                    time_index: s,
                    t: ts.times[s],
                    first: a,
                    second: b,
                }));
            }
        }
    }
    Ok(None)
}

/// Observer that stores the velocity field at every emitted sample.
pub struct VelocityRecorder {
    pub mass: f64,
    pub snapshots: Option<SnapshotVelocity>,
}

impl VelocityRecorder {
    pub fn new(mass: f64) -> Self {
        Self { mass, snapshots: None }
    }

    pub fn finish(self) -> Result<SnapshotVelocity> {
        self.snapshots.ok_or_else(|| QfdError::param("snapshots", "no samples recorded"))
    }
}

impl Observer for VelocityRecorder {
    fn observe(&mut self, sample: &Sample<'_>) -> Result<()> {
        let snaps = self.snapshots.get_or_insert_with(|| SnapshotVelocity::new(*sample.psi.grid()));
        snaps.push_psi(sample.t, sample.psi, self.mass)
    }
}
