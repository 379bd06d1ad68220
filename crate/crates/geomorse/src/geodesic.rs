//! Geodesic integration, causal classification and parallel transport.
//!
//! Geodesics are integrated with a fixed-step classical Runge-Kutta
//! scheme on the first-order system `x' = v`, `v' = -Gamma(x)(v, v)`.
//! Between samples, positions and velocities are reconstructed by cubic
//! Hermite interpolation from the stored values and derivatives, which
//! keeps the interpolation error at the same fourth order as the
//! integrator.
//!
//! Each geodesic owns samples of two coefficient operators on a half-step
//! grid, evaluated once at construction:
//!
//! * the connection drag `C(t) = [Gamma^i_{jk} v^j]`, the matrix turning
//!   coordinate derivatives into covariant ones along the curve,
//! * the tidal operator `T(t) v = R(gamma', v) gamma'`.
//!
//! Downstream linear ODE solvers (parallel transport, Jacobi propagation)
//! interpolate these caches instead of re-deriving curvature, which makes
//! repeated sweeps along the same geodesic cheap.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Manifold;

/// Relative drift allowed on `g(v, v)` along the samples.
const ENERGY_DRIFT_TOL: f64 = 1e-7;
/// Band around zero (relative to the Euclidean velocity norm squared)
/// classified as lightlike.
const LIGHTLIKE_BAND: f64 = 1e-9;
/// Relative tolerance below which a time lands exactly on a cached node.
const NODE_SNAP: f64 = 1e-9;
/// Minimum admissible step count.
const MIN_STEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalCharacter {
    /// `g(v, v) > 0`.
    Spacelike,
    /// `g(v, v) < 0`.
    Timelike,
    /// `g(v, v) = 0` within the classification band.
    Lightlike,
}

impl CausalCharacter {
    pub fn as_str(&self) -> &'static str {
        match self {
            CausalCharacter::Spacelike => "spacelike",
            CausalCharacter::Timelike => "timelike",
            CausalCharacter::Lightlike => "lightlike",
        }
    }
}

/// A numerically integrated geodesic with its coefficient caches.
pub struct Geodesic {
    manifold: Arc<Manifold>,
    t0: f64,
    t1: f64,
    steps: usize,
    xs: Vec<DVector<f64>>,
    vs: Vec<DVector<f64>>,
    accs: Vec<DVector<f64>>,
    metrics: Vec<DMatrix<f64>>,
    /// Connection drag and tidal operator on the half-step grid
    /// (`2 * steps + 1` entries).
    conn: Vec<DMatrix<f64>>,
    tidal: Vec<DMatrix<f64>>,
    energy: f64,
    energy_drift: f64,
    character: CausalCharacter,
}

fn acceleration(manifold: &Manifold, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let gamma = manifold.christoffel_at(x.as_slice())?;
    let m = manifold.dim();
    let mut a = DVector::zeros(m);
    for k in 0..m {
        a[k] = -(v.transpose() * &gamma[k] * v)[(0, 0)];
    }
    Ok(a)
}

/// Cubic Hermite basis applied to endpoint values and scaled derivatives.
fn hermite(
    y0: &DVector<f64>,
    d0: &DVector<f64>,
    y1: &DVector<f64>,
    d1: &DVector<f64>,
    h: f64,
    s: f64,
) -> DVector<f64> {
    let s2 = s * s;
    let s3 = s2 * s;
    y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
        + d0 * (h * (s3 - 2.0 * s2 + s))
        + y1 * (-2.0 * s3 + 3.0 * s2)
        + d1 * (h * (s3 - s2))
}

/// Integrate the geodesic with initial data `(p0, v0)` over `interval`
/// using `steps` uniform Runge-Kutta steps (`steps >= 64`).
pub fn integrate_geodesic(
    manifold: Arc<Manifold>,
    p0: &[f64],
    v0: &[f64],
    interval: (f64, f64),
    steps: usize,
) -> Result<Geodesic> {
    let m = manifold.dim();
    let (t0, t1) = interval;
    if p0.len() != m || v0.len() != m {
        return Err(Error::InvalidInput(format!(
            "initial data dimension does not match manifold dimension {m}"
        )));
    }
    if !(t1 > t0) {
        return Err(Error::InvalidInput("interval must satisfy a < b".into()));
    }
    if steps < MIN_STEPS {
        return Err(Error::InvalidInput(format!(
            "steps = {steps} below the minimum of {MIN_STEPS}"
        )));
    }
    let h = (t1 - t0) / steps as f64;
    let mut xs = Vec::with_capacity(steps + 1);
    let mut vs = Vec::with_capacity(steps + 1);
    let mut accs = Vec::with_capacity(steps + 1);
    let mut x = DVector::from_column_slice(p0);
    let mut v = DVector::from_column_slice(v0);
    let mut a = acceleration(&manifold, &x, &v)?;
    for _ in 0..steps {
        xs.push(x.clone());
        vs.push(v.clone());
        accs.push(a.clone());
        // Classical RK4 on (x, v); k1 reuses the stored acceleration.
        let k1x = v.clone();
        let k1v = a.clone();
        let x2 = &x + &k1x * (h / 2.0);
        let v2 = &v + &k1v * (h / 2.0);
        let k2v = acceleration(&manifold, &x2, &v2)?;
        let k2x = v2;
        let x3 = &x + &k2x * (h / 2.0);
        let v3 = &v + &k2v * (h / 2.0);
        let k3v = acceleration(&manifold, &x3, &v3)?;
        let k3x = v3;
        let x4 = &x + &k3x * h;
        let v4 = &v + &k3v * h;
        let k4v = acceleration(&manifold, &x4, &v4)?;
        let k4x = v4;
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        a = acceleration(&manifold, &x, &v)?;
    }
    xs.push(x);
    vs.push(v);
    accs.push(a);

    // Energy audit and causal classification.
    let mut metrics = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        metrics.push(manifold.metric_at(xs[k].as_slice())?);
    }
    let energy_of = |k: usize| -> f64 { (vs[k].transpose() * &metrics[k] * &vs[k])[(0, 0)] };
    let energy = energy_of(0);
    let scale = energy.abs().max(vs[0].norm_squared());
    let mut drift = 0.0_f64;
    for k in 0..=steps {
        drift = drift.max((energy_of(k) - energy).abs());
    }
    if drift > ENERGY_DRIFT_TOL * scale {
        return Err(Error::EnergyDriftError {
            drift,
            limit: ENERGY_DRIFT_TOL * scale,
        });
    }
    let classify = |e: f64, vnorm2: f64| -> CausalCharacter {
        if e.abs() < LIGHTLIKE_BAND * vnorm2 {
            CausalCharacter::Lightlike
        } else if e > 0.0 {
            CausalCharacter::Spacelike
        } else {
            CausalCharacter::Timelike
        }
    };
    let character = classify(energy, vs[0].norm_squared());
    for k in 0..=steps {
        let ck = classify(energy_of(k), vs[k].norm_squared());
        if ck != character {
            return Err(Error::InconsistentCharacter {
                detail: format!(
                    "sample {k} classifies as {} but the curve starts {}",
                    ck.as_str(),
                    character.as_str()
                ),
            });
        }
    }

    // Coefficient caches on the half-step grid. Midpoint states come from
    // Hermite interpolation of the stored samples.
    let mut conn = Vec::with_capacity(2 * steps + 1);
    let mut tidal = Vec::with_capacity(2 * steps + 1);
    for j in 0..=(2 * steps) {
        let (xj, vj) = if j % 2 == 0 {
            (xs[j / 2].clone(), vs[j / 2].clone())
        } else {
            let k = j / 2;
            (
                hermite(&xs[k], &vs[k], &xs[k + 1], &vs[k + 1], h, 0.5),
                hermite(&vs[k], &accs[k], &vs[k + 1], &accs[k + 1], h, 0.5),
            )
        };
        let gamma = manifold.christoffel_at(xj.as_slice())?;
        let mut c = DMatrix::zeros(m, m);
        for i in 0..m {
            for kk in 0..m {
                let mut acc = 0.0;
                for jj in 0..m {
                    acc += gamma[i][(jj, kk)] * vj[jj];
                }
                c[(i, kk)] = acc;
            }
        }
        conn.push(c);
        tidal.push(manifold.tidal_operator(xj.as_slice(), &vj)?);
    }

    Ok(Geodesic {
        manifold,
        t0,
        t1,
        steps,
        xs,
        vs,
        accs,
        metrics,
        conn,
        tidal,
        energy,
        energy_drift: drift,
        character,
    })
}

impl std::fmt::Debug for Geodesic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Geodesic")
            .field("interval", &(self.t0, self.t1))
            .field("steps", &self.steps)
            .field("energy", &self.energy)
            .field("character", &self.character)
            .finish()
    }
}

impl Geodesic {
    pub fn manifold(&self) -> &Arc<Manifold> {
        &self.manifold
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_size(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }

    pub fn time_of_node(&self, k: usize) -> f64 {
        self.t0 + self.step_size() * k as f64
    }

    pub fn position(&self, k: usize) -> &DVector<f64> {
        &self.xs[k]
    }

    pub fn velocity(&self, k: usize) -> &DVector<f64> {
        &self.vs[k]
    }

    pub fn metric_at_node(&self, k: usize) -> &DMatrix<f64> {
        &self.metrics[k]
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn energy_drift(&self) -> f64 {
        self.energy_drift
    }

    pub fn causal_character(&self) -> CausalCharacter {
        self.character
    }

    /// Index of the step interval containing `t`, clamped to the curve.
    fn interval_index(&self, t: f64) -> (usize, f64) {
        let h = self.step_size();
        let raw = (t - self.t0) / h;
        let k = (raw.floor() as isize).clamp(0, self.steps as isize - 1) as usize;
        (k, raw - k as f64)
    }

    pub fn position_at(&self, t: f64) -> DVector<f64> {
        let (k, s) = self.interval_index(t);
        if s.abs() < NODE_SNAP {
            return self.xs[k].clone();
        }
        let h = self.step_size();
        hermite(&self.xs[k], &self.vs[k], &self.xs[k + 1], &self.vs[k + 1], h, s)
    }

    pub fn velocity_at(&self, t: f64) -> DVector<f64> {
        let (k, s) = self.interval_index(t);
        if s.abs() < NODE_SNAP {
            return self.vs[k].clone();
        }
        let h = self.step_size();
        hermite(&self.vs[k], &self.accs[k], &self.vs[k + 1], &self.accs[k + 1], h, s)
    }

    /// Metric at the (interpolated) point `gamma(t)`.
    pub fn metric_at_time(&self, t: f64) -> Result<DMatrix<f64>> {
        let (k, s) = self.interval_index(t);
        if s.abs() < NODE_SNAP {
            return Ok(self.metrics[k].clone());
        }
        self.manifold.metric_at(self.position_at(t).as_slice())
    }

    /// Inner product `g(u, w)` at `gamma(t)`.
    pub fn inner_at(&self, t: f64, u: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        let g = self.metric_at_time(t)?;
        Ok((u.transpose() * g * w)[(0, 0)])
    }

    fn cached_operator(&self, cache: &[DMatrix<f64>], t: f64) -> DMatrix<f64> {
        let half = self.step_size() / 2.0;
        let raw = (t - self.t0) / half;
        let nearest = raw.round();
        if (raw - nearest).abs() < NODE_SNAP {
            let j = (nearest as isize).clamp(0, cache.len() as isize - 1) as usize;
            return cache[j].clone();
        }
        // Four-point (cubic) Lagrange interpolation on the half-step grid.
        let j1 = (raw.floor() as isize).clamp(0, cache.len() as isize - 2) as usize;
        let j0 = j1.saturating_sub(1);
        let j0 = j0.min(cache.len() - 4);
        let s = raw - j0 as f64;
        let mut out = DMatrix::zeros(cache[0].nrows(), cache[0].ncols());
        for (idx, node) in (0..4).enumerate() {
            let mut w = 1.0;
            for other in 0..4 {
                if other != node {
                    w *= (s - other as f64) / (node as f64 - other as f64);
                }
            }
            out += &cache[j0 + idx] * w;
        }
        out
    }

    /// Connection drag `C(t)` with `(C E)^i = Gamma^i_{jk} v^j E^k`.
    pub fn connection_drag_at(&self, t: f64) -> DMatrix<f64> {
        self.cached_operator(&self.conn, t)
    }

    /// Tidal operator `T(t)` with `T V = R(gamma', V) gamma'`.
    pub fn tidal_at(&self, t: f64) -> DMatrix<f64> {
        self.cached_operator(&self.tidal, t)
    }
}

/// A frame of vector fields parallel along a geodesic, sampled on its
/// grid. Values between samples are cubic interpolations of components.
pub struct ParallelFrame {
    t0: f64,
    t1: f64,
    steps: usize,
    /// One `m x count` matrix per sample node.
    samples: Vec<DMatrix<f64>>,
}

impl std::fmt::Debug for ParallelFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParallelFrame")
            .field("interval", &(self.t0, self.t1))
            .field("steps", &self.steps)
            .field("count", &self.count())
            .finish()
    }
}

impl ParallelFrame {
    pub fn count(&self) -> usize {
        self.samples[0].ncols()
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn at_node(&self, k: usize) -> &DMatrix<f64> {
        &self.samples[k]
    }

    /// Frame matrix at an arbitrary parameter value.
    pub fn at_time(&self, t: f64) -> DMatrix<f64> {
        let h = (self.t1 - self.t0) / self.steps as f64;
        let raw = (t - self.t0) / h;
        let nearest = raw.round();
        if (raw - nearest).abs() < NODE_SNAP {
            let k = (nearest as isize).clamp(0, self.steps as isize) as usize;
            return self.samples[k].clone();
        }
        let k1 = (raw.floor() as isize).clamp(0, self.steps as isize - 1) as usize;
        let window = if self.steps >= 3 {
            k1.saturating_sub(1).min(self.steps - 3)
        } else {
            0
        };
        let s = raw - window as f64;
        let n = (self.steps + 1).min(4);
        let mut out = DMatrix::zeros(self.samples[0].nrows(), self.samples[0].ncols());
        for node in 0..n {
            let mut w = 1.0;
            for other in 0..n {
                if other != node {
                    w *= (s - other as f64) / (node as f64 - other as f64);
                }
            }
            out += &self.samples[window + node] * w;
        }
        out
    }

    pub fn vector_at(&self, t: f64, i: usize) -> DVector<f64> {
        self.at_time(t).column(i).into_owned()
    }
}

/// Parallel-transport the seed vectors along the geodesic by integrating
/// `E' = -C(t) E` on the sample grid.
pub fn parallel_frame(geo: &Geodesic, seed: &[DVector<f64>]) -> Result<ParallelFrame> {
    let m = geo.dim();
    if seed.is_empty() || seed.iter().any(|s| s.len() != m) {
        return Err(Error::InvalidInput(
            "frame seed must be a nonempty set of vectors of the manifold dimension".into(),
        ));
    }
    let mut e = DMatrix::zeros(m, seed.len());
    for (i, s) in seed.iter().enumerate() {
        e.set_column(i, s);
    }
    let svd = e.clone().svd(false, false);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    if seed.len() > m || sigma_min <= 1e-10 * sigma_max {
        return Err(Error::DependentSeed { sigma_min });
    }

    let h = geo.step_size();
    let (t0, _) = geo.interval();
    let mut samples = Vec::with_capacity(geo.steps() + 1);
    samples.push(e.clone());
    for k in 0..geo.steps() {
        let t = t0 + h * k as f64;
        let rhs = |tt: f64, m_: &DMatrix<f64>| -> DMatrix<f64> { -geo.connection_drag_at(tt) * m_ };
        let k1 = rhs(t, &e);
        let k2 = rhs(t + h / 2.0, &(&e + &k1 * (h / 2.0)));
        let k3 = rhs(t + h / 2.0, &(&e + &k2 * (h / 2.0)));
        let k4 = rhs(t + h, &(&e + &k3 * h));
        e += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        samples.push(e.clone());
    }
    let (t0, t1) = geo.interval();
    Ok(ParallelFrame {
        t0,
        t1,
        steps: geo.steps(),
        samples,
    })
}

/// Metric pairings `g(v, columns)` at the initial point.
fn initial_pairings(geo: &Geodesic) -> (DMatrix<f64>, DVector<f64>) {
    let g = geo.metric_at_node(0).clone();
    let v = geo.velocity(0).clone();
    (g, v)
}

/// Deterministic basis of the subspace `{ w : g(v0, w) = 0 }` at the
/// initial point, as columns.
fn velocity_orthogonal_basis(geo: &Geodesic) -> Vec<DVector<f64>> {
    let m = geo.dim();
    let (g, v) = initial_pairings(geo);
    let covector = g.transpose() * &v;
    let p = covector.iamax();
    let mut basis = Vec::with_capacity(m - 1);
    for i in 0..m {
        if i == p {
            continue;
        }
        let mut w = DVector::zeros(m);
        w[i] = 1.0;
        w[p] = -covector[i] / covector[p];
        basis.push(w);
    }
    basis
}

/// Seed spanning the orthogonal complement of the initial velocity:
/// `m - 1` vectors, pseudo-orthonormalized. For lightlike geodesics the
/// complement contains the velocity itself; the seed then consists of
/// `m - 2` unit spacelike vectors followed by the velocity as its last
/// element.
pub fn orthonormal_complement_seed(geo: &Geodesic) -> Result<Vec<DVector<f64>>> {
    let (g, v0) = initial_pairings(geo);
    let pairing = |a: &DVector<f64>, b: &DVector<f64>| -> f64 { (a.transpose() * &g * b)[(0, 0)] };
    let raw = velocity_orthogonal_basis(geo);
    match geo.causal_character() {
        CausalCharacter::Lightlike => {
            // Exchange one raw vector for the velocity, then orthonormalize
            // the rest; the induced metric is positive semidefinite with
            // null direction exactly along the velocity.
            let m = geo.dim();
            let mut b = DMatrix::zeros(m, raw.len());
            for (i, w) in raw.iter().enumerate() {
                b.set_column(i, w);
            }
            let coef = b
                .clone()
                .svd(true, true)
                .solve(&v0, 1e-13)
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            let drop = coef.iamax();
            let mut spacelike = Vec::new();
            for (i, w) in raw.iter().enumerate() {
                if i != drop {
                    spacelike.push(w.clone());
                }
            }
            let mut seed: Vec<DVector<f64>> = Vec::new();
            for w in spacelike {
                let mut u = w;
                for prev in &seed {
                    u -= prev * pairing(&u, prev);
                }
                let norm2 = pairing(&u, &u);
                if norm2 <= 1e-12 * u.norm_squared() {
                    return Err(Error::DependentSeed { sigma_min: norm2 });
                }
                seed.push(u / norm2.sqrt());
            }
            seed.push(v0);
            Ok(seed)
        }
        _ => {
            // Definite induced metric: plain Gram-Schmidt with sign-aware
            // normalization (Lorentzian timelike complements are spacelike;
            // Lorentzian spacelike complements contain a timelike direction).
            let mut seed: Vec<DVector<f64>> = Vec::new();
            let mut pending = raw;
            while !pending.is_empty() {
                // Pivot on the largest remaining norm for stability.
                let (best, _) = pending
                    .iter()
                    .enumerate()
                    .map(|(i, w)| {
                        let mut u = w.clone();
                        for prev in &seed {
                            let sign = pairing(prev, prev).signum();
                            u -= prev * (sign * pairing(&u, prev));
                        }
                        (i, pairing(&u, &u).abs())
                    })
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                let mut u = pending.remove(best);
                for prev in &seed {
                    let sign = pairing(prev, prev).signum();
                    u -= prev * (sign * pairing(&u, prev));
                }
                let norm2 = pairing(&u, &u);
                if norm2.abs() <= 1e-12 * u.norm_squared() {
                    return Err(Error::DependentSeed { sigma_min: norm2.abs() });
                }
                seed.push(u / norm2.abs().sqrt());
            }
            Ok(seed)
        }
    }
}

/// Seed of `m` vectors with a nondegenerate, pseudo-orthonormal Gram
/// matrix at the initial point.
pub fn full_frame_seed(geo: &Geodesic) -> Result<Vec<DVector<f64>>> {
    let m = geo.dim();
    let (g, _) = initial_pairings(geo);
    let pairing = |a: &DVector<f64>, b: &DVector<f64>| -> f64 { (a.transpose() * &g * b)[(0, 0)] };
    let mut pending: Vec<DVector<f64>> = (0..m)
        .map(|i| {
            let mut e = DVector::zeros(m);
            e[i] = 1.0;
            e
        })
        .collect();
    let mut seed: Vec<DVector<f64>> = Vec::new();
    while !pending.is_empty() {
        let reduced: Vec<(usize, DVector<f64>, f64)> = pending
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let mut u = w.clone();
                for prev in &seed {
                    let sign = pairing(prev, prev).signum();
                    u -= prev * (sign * pairing(&u, prev));
                }
                let n2 = pairing(&u, &u);
                (i, u, n2)
            })
            .collect();
        let best = reduced
            .iter()
            .max_by(|a, b| a.2.abs().total_cmp(&b.2.abs()))
            .unwrap();
        if best.2.abs() <= 1e-12 {
            // All remaining candidates are null after reduction; combine two
            // of them, which cannot be null simultaneously with their sum
            // under a nondegenerate metric.
            if reduced.len() < 2 {
                return Err(Error::DependentSeed { sigma_min: best.2.abs() });
            }
            let combined = &reduced[0].1 + &reduced[1].1;
            let idx = reduced[0].0;
            pending[idx] = combined;
            continue;
        }
        let (idx, u, n2) = (best.0, best.1.clone(), best.2);
        pending.remove(idx);
        seed.push(u / n2.abs().sqrt());
    }
    Ok(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Signature;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn flat2() -> Arc<Manifold> {
        Arc::new(Manifold::euclidean(2))
    }

    fn minkowski2() -> Arc<Manifold> {
        Arc::new(Manifold::minkowski(2))
    }

    fn unit_sphere() -> Arc<Manifold> {
        Arc::new(Manifold::sphere(2, 1.0))
    }

    /// Great circle through the equator point `(pi/2, 0)` with initial
    /// chart velocity `(cos alpha, sin alpha)`, mapped back from the
    /// ambient description of the sphere.
    fn great_circle_chart(alpha: f64, t: f64) -> (f64, f64) {
        let (sa, ca) = (alpha.sin(), alpha.cos());
        let x = t.cos();
        let y = t.sin() * sa;
        let z = -t.sin() * ca;
        let theta = z.acos();
        let phi = y.atan2(x);
        (theta, phi)
    }

    #[test]
    fn straight_line_is_exact() {
        let geo = integrate_geodesic(flat2(), &[0.0, 0.0], &[1.0, 2.0], (0.0, 1.0), 64).unwrap();
        let end = geo.position(64);
        assert_eq!(end[0], 1.0);
        assert_eq!(end[1], 2.0);
        assert_eq!(geo.energy_drift(), 0.0);
    }

    #[test]
    fn sphere_reaches_antipode() {
        let alpha: f64 = 1.0;
        let steps = (2000.0 * PI).ceil() as usize;
        let geo = integrate_geodesic(
            unit_sphere(),
            &[FRAC_PI_2, 0.0],
            &[alpha.cos(), alpha.sin()],
            (0.0, PI),
            steps,
        )
        .unwrap();
        let end = geo.position(steps);
        let (theta, phi) = great_circle_chart(alpha, PI);
        assert!((end[0] - theta).abs() < 1e-6);
        assert!((end[1] - phi).abs() < 1e-6);
        assert!((end[0] - FRAC_PI_2).abs() < 1e-6);
        assert!((end[1] - PI).abs() < 1e-6);
        assert!(geo.energy_drift() < 1e-7);
    }

    #[test]
    fn runge_kutta_is_fourth_order() {
        let alpha: f64 = 1.0;
        let endpoint_error = |steps: usize| -> f64 {
            let geo = integrate_geodesic(
                unit_sphere(),
                &[FRAC_PI_2, 0.0],
                &[alpha.cos(), alpha.sin()],
                (0.0, PI),
                steps,
            )
            .unwrap();
            let end = geo.position(steps);
            let (theta, phi) = great_circle_chart(alpha, PI);
            ((end[0] - theta).powi(2) + (end[1] - phi).powi(2)).sqrt()
        };
        let e1 = endpoint_error(128);
        let e2 = endpoint_error(256);
        assert!(e1 > 1e-12, "coarse error too small to measure order");
        assert!(e1 / e2 > 15.0, "order ratio {} too low", e1 / e2);
    }

    #[test]
    fn reversal_returns_to_start() {
        let alpha: f64 = 0.7;
        let steps = 4000;
        let geo = integrate_geodesic(
            unit_sphere(),
            &[FRAC_PI_2, 0.0],
            &[alpha.cos(), alpha.sin()],
            (0.0, 2.0),
            steps,
        )
        .unwrap();
        let back = integrate_geodesic(
            unit_sphere(),
            geo.position(steps).as_slice(),
            (-geo.velocity(steps)).as_slice(),
            (0.0, 2.0),
            steps,
        )
        .unwrap();
        let end = back.position(steps);
        assert!((end[0] - FRAC_PI_2).abs() < 1e-6);
        assert!(end[1].abs() < 1e-6);
    }

    #[test]
    fn causal_characters() {
        let cases = [
            (vec![0.0, 1.0], CausalCharacter::Timelike),
            (vec![1.0, 1.0], CausalCharacter::Lightlike),
            (vec![1.0, 0.5], CausalCharacter::Spacelike),
        ];
        for (v0, expected) in cases {
            let geo =
                integrate_geodesic(minkowski2(), &[0.0, 0.0], &v0, (0.0, 1.0), 64).unwrap();
            assert_eq!(geo.causal_character(), expected);
        }
        let geo = integrate_geodesic(
            unit_sphere(),
            &[FRAC_PI_2, 0.0],
            &[0.0, 1.0],
            (0.0, 1.0),
            2000,
        )
        .unwrap();
        assert_eq!(geo.causal_character(), CausalCharacter::Spacelike);
    }

    #[test]
    fn interpolation_matches_closed_form() {
        let alpha: f64 = 1.0;
        let steps = 4000;
        let geo = integrate_geodesic(
            unit_sphere(),
            &[FRAC_PI_2, 0.0],
            &[alpha.cos(), alpha.sin()],
            (0.0, 2.0),
            steps,
        )
        .unwrap();
        for t in [0.137, 0.5, 1.0 / 3.0, 1.733] {
            let p = geo.position_at(t);
            let (theta, phi) = great_circle_chart(alpha, t);
            assert!((p[0] - theta).abs() < 1e-8);
            assert!((p[1] - phi).abs() < 1e-8);
        }
    }

    #[test]
    fn transported_equator_normal_stays_unit() {
        let steps = (2000.0 * PI).ceil() as usize;
        let geo = integrate_geodesic(
            unit_sphere(),
            &[FRAC_PI_2, 0.0],
            &[0.0, 1.0],
            (0.0, PI),
            steps,
        )
        .unwrap();
        let frame = parallel_frame(&geo, &[DVector::from_column_slice(&[1.0, 0.0])]).unwrap();
        for k in [0, steps / 3, steps] {
            let e = frame.at_node(k).column(0).into_owned();
            let g = geo.metric_at_node(k);
            let norm = (e.transpose() * g * &e)[(0, 0)];
            assert!((norm - 1.0).abs() < 1e-7);
            // Along the equator the theta direction is itself parallel.
            assert!((e[0] - 1.0).abs() < 1e-7);
            assert!(e[1].abs() < 1e-7);
        }
    }

    #[test]
    fn transport_preserves_inner_products() {
        let alpha: f64 = 0.9;
        let steps = 6000;
        let geo = integrate_geodesic(
            unit_sphere(),
            &[FRAC_PI_2, 0.0],
            &[alpha.cos(), alpha.sin()],
            (0.0, 3.0),
            steps,
        )
        .unwrap();
        let seed = vec![
            DVector::from_column_slice(&[1.0, 0.3]),
            DVector::from_column_slice(&[-0.2, 0.8]),
        ];
        let frame = parallel_frame(&geo, &seed).unwrap();
        let g0 = geo.metric_at_node(0);
        let e0 = frame.at_node(0);
        let gram0 = e0.transpose() * g0 * e0;
        for k in [steps / 2, steps] {
            let g = geo.metric_at_node(k);
            let e = frame.at_node(k);
            let gram = e.transpose() * g * e;
            assert!((&gram - &gram0).norm() < 1e-7);
        }
    }

    #[test]
    fn transport_derivative_vanishes() {
        // Re-differentiate the frame samples and check the covariant
        // derivative is numerically zero.
        let alpha: f64 = 0.9;
        let steps = 4000;
        let geo = integrate_geodesic(
            unit_sphere(),
            &[FRAC_PI_2, 0.0],
            &[alpha.cos(), alpha.sin()],
            (0.0, 2.0),
            steps,
        )
        .unwrap();
        let seed = vec![DVector::from_column_slice(&[0.6, 0.5])];
        let frame = parallel_frame(&geo, &seed).unwrap();
        let h = geo.step_size();
        for k in [100, 2000, 3900] {
            let t = geo.time_of_node(k);
            let prev = frame.at_node(k - 1).column(0).into_owned();
            let next = frame.at_node(k + 1).column(0).into_owned();
            let here = frame.at_node(k).column(0).into_owned();
            let dcoord = (next - prev) / (2.0 * h);
            let cov = dcoord + geo.connection_drag_at(t) * here;
            assert!(cov.norm() < 1e-6, "covariant derivative {}", cov.norm());
        }
    }

    #[test]
    fn dependent_seed_rejected() {
        let geo = integrate_geodesic(flat2(), &[0.0, 0.0], &[1.0, 0.0], (0.0, 1.0), 64).unwrap();
        let seed = vec![
            DVector::from_column_slice(&[1.0, 1.0]),
            DVector::from_column_slice(&[2.0, 2.0]),
        ];
        match parallel_frame(&geo, &seed) {
            Err(Error::DependentSeed { .. }) => {}
            other => panic!("expected DependentSeed, got {other:?}"),
        }
    }

    #[test]
    fn complement_seed_riemannian() {
        let geo = integrate_geodesic(flat2(), &[0.0, 0.0], &[1.0, 0.0], (0.0, 1.0), 64).unwrap();
        let seed = orthonormal_complement_seed(&geo).unwrap();
        assert_eq!(seed.len(), 1);
        assert!((seed[0].norm() - 1.0).abs() < 1e-12);
        assert!(seed[0][0].abs() < 1e-12);
    }

    #[test]
    fn complement_seed_lightlike_structure() {
        let mink3 = Arc::new(Manifold::minkowski(3));
        let v0 = [1.0, 0.0, 1.0];
        let geo = integrate_geodesic(mink3, &[0.0, 0.0, 0.0], &v0, (0.0, 1.0), 64).unwrap();
        assert_eq!(geo.causal_character(), CausalCharacter::Lightlike);
        let seed = orthonormal_complement_seed(&geo).unwrap();
        assert_eq!(seed.len(), 2);
        // Last element is the velocity itself.
        let last = &seed[1];
        assert_relative_eq!(last[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(last[2], 1.0, max_relative = 1e-12);
        // The other is unit spacelike and orthogonal to the velocity.
        let g = geo.metric_at_node(0);
        let n = (seed[0].transpose() * g * &seed[0])[(0, 0)];
        assert_relative_eq!(n, 1.0, max_relative = 1e-10);
        let cross = (seed[0].transpose() * g * last)[(0, 0)];
        assert!(cross.abs() < 1e-10);
    }

    #[test]
    fn full_frame_seed_pseudo_orthonormal() {
        for manifold in [minkowski2(), flat2()] {
            let geo =
                integrate_geodesic(manifold, &[0.0, 0.0], &[1.0, 1.0], (0.0, 1.0), 64).unwrap();
            let seed = full_frame_seed(&geo).unwrap();
            assert_eq!(seed.len(), 2);
            let g = geo.metric_at_node(0);
            for i in 0..2 {
                for j in 0..2 {
                    let p = (seed[i].transpose() * g * &seed[j])[(0, 0)];
                    if i == j {
                        assert!((p.abs() - 1.0).abs() < 1e-10);
                    } else {
                        assert!(p.abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn energy_drift_guard_fires_on_rough_charts() {
        // A deliberately stiff metric integrated with the minimum step
        // count accumulates measurable drift.
        let rough = Arc::new(Manifold::new(
            2,
            Signature::Riemannian,
            Box::new(|x: &[f64]| {
                DMatrix::from_diagonal(&DVector::from_column_slice(&[
                    1.0 + 0.5 * (4.0 * x[1]).sin(),
                    1.0 + 0.5 * (4.0 * x[0]).cos(),
                ]))
            }),
            None,
            None,
        ));
        let result = integrate_geodesic(rough, &[0.0, 0.0], &[1.0, 0.7], (0.0, 3.0), 64);
        match result {
            Err(Error::EnergyDriftError { .. }) => {}
            Ok(geo) => panic!("expected drift, measured {}", geo.energy_drift()),
            other => panic!("expected EnergyDriftError, got {other:?}"),
        }
    }

    #[test]
    fn step_floor_enforced() {
        match integrate_geodesic(flat2(), &[0.0, 0.0], &[1.0, 0.0], (0.0, 1.0), 32) {
            Err(Error::InvalidInput(_)) => {}
            other => panic!("expected InvalidInput, got {other:?}"),
        }
    }
}
