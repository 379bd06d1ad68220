//! Piecewise-smooth vector fields along a geodesic and the variational
//! index form, evaluated by per-segment composite Simpson quadrature.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geodesic::{Geodesic, ParallelFrame};
use crate::geometry::Submanifold;
use crate::jacobi::JacobiBasis;
use crate::numeric::least_squares;

/// Coefficient closure for one segment: returns frame coordinates of the
/// field and of its derivative at a parameter value.
pub type CoefFn = Box<dyn Fn(f64) -> (DVector<f64>, DVector<f64>) + Send + Sync>;

const CONTINUITY_TOL: f64 = 1e-10;
/// Tolerance for endpoint tangency to the target submanifold.
const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
struct Segment {
    ts: Vec<f64>,
    vs: Vec<DVector<f64>>,
    ds: Vec<DVector<f64>>,
}

impl Segment {
    /// Value and derivative at `t`, exact at stored samples and cubic
    /// Lagrange interpolation in between.
    fn eval(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let n = self.ts.len();
        let idx = self.ts.partition_point(|s| *s < t);
        if idx < n && (self.ts[idx] - t).abs() < 1e-13 * (1.0 + t.abs()) {
            return (self.vs[idx].clone(), self.ds[idx].clone());
        }
        if idx > 0 && (self.ts[idx - 1] - t).abs() < 1e-13 * (1.0 + t.abs()) {
            return (self.vs[idx - 1].clone(), self.ds[idx - 1].clone());
        }
        let width = 4.min(n);
        let lo = idx.saturating_sub(2).min(n - width);
        let mut v = DVector::zeros(self.vs[0].len());
        let mut d = DVector::zeros(self.vs[0].len());
        for i in lo..lo + width {
            let mut weight = 1.0;
            for j in lo..lo + width {
                if i != j {
                    weight *= (t - self.ts[j]) / (self.ts[i] - self.ts[j]);
                }
            }
            v += &self.vs[i] * weight;
            d += &self.ds[i] * weight;
        }
        (v, d)
    }
}

/// A piecewise-smooth vector field along a geodesic, continuous across its
/// breakpoints, with possibly jumping derivative.
#[derive(Clone, Debug)]
pub struct PiecewiseField {
    t0: f64,
    t1: f64,
    steps: usize,
    breakpoints: Vec<f64>,
    segments: Vec<Segment>,
}

impl PiecewiseField {
    /// Build a field `V(t) = sum_p c_p(t) E_p(t)` from per-segment frame
    /// coefficient closures. Continuity across breakpoints is enforced.
    pub fn from_frame_coefficients(
        geo: &Geodesic,
        frame: &ParallelFrame,
        breakpoints: &[f64],
        coefs: Vec<CoefFn>,
    ) -> Result<Self> {
        let (a, b) = geo.interval();
        let span = b - a;
        if breakpoints.len() < 2
            || (breakpoints[0] - a).abs() > 1e-9 * span
            || (breakpoints[breakpoints.len() - 1] - b).abs() > 1e-9 * span
        {
            return Err(Error::InvalidInput(
                "breakpoints must run from the start to the end of the geodesic".into(),
            ));
        }
        if coefs.len() != breakpoints.len() - 1 {
            return Err(Error::InvalidInput(format!(
                "{} segments require {} coefficient functions, got {}",
                breakpoints.len() - 1,
                breakpoints.len() - 1,
                coefs.len()
            )));
        }
        for w in breakpoints.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidInput(
                    "breakpoints must be strictly increasing".into(),
                ));
            }
        }
        let h = geo.step_size();
        let mut segments = Vec::with_capacity(coefs.len());
        for (i, coef) in coefs.iter().enumerate() {
            let (s, u) = (breakpoints[i], breakpoints[i + 1]);
            let mut ts = vec![s];
            let mut idx = ((s - a) / h).floor() as isize + 1;
            loop {
                let t = a + h * idx as f64;
                if t >= u - 1e-12 * span {
                    break;
                }
                if t > s + 1e-12 * span {
                    ts.push(t);
                }
                idx += 1;
            }
            ts.push(u);
            let mut vs = Vec::with_capacity(ts.len());
            let mut ds = Vec::with_capacity(ts.len());
            for &t in &ts {
                let (c, dc) = coef(t);
                if c.len() != frame.count() || dc.len() != frame.count() {
                    return Err(Error::InvalidInput(format!(
                        "coefficient functions must return {} frame coordinates",
                        frame.count()
                    )));
                }
                let e = frame.at_time(t);
                vs.push(&e * c);
                ds.push(&e * dc);
            }
            segments.push(Segment { ts, vs, ds });
        }
        let field = PiecewiseField {
            t0: a,
            t1: b,
            steps: geo.steps(),
            breakpoints: breakpoints.to_vec(),
            segments,
        };
        field.check_continuity()?;
        Ok(field)
    }

    /// A single-segment field given by a linear combination of Jacobi basis
    /// fields, sampled on the geodesic grid.
    pub fn from_jacobi_combination(
        geo: &Geodesic,
        basis: &JacobiBasis,
        c: &DVector<f64>,
    ) -> Result<Self> {
        if c.len() != basis.field_count() {
            return Err(Error::InvalidInput(format!(
                "combination needs {} coefficients, got {}",
                basis.field_count(),
                c.len()
            )));
        }
        let (a, b) = geo.interval();
        let steps = geo.steps();
        let h = geo.step_size();
        let ts: Vec<f64> = (0..=steps).map(|k| a + h * k as f64).collect();
        let vs: Vec<DVector<f64>> = (0..=steps).map(|k| basis.values_at_node(k) * c).collect();
        let ds: Vec<DVector<f64>> = (0..=steps).map(|k| basis.derivs_at_node(k) * c).collect();
        Ok(PiecewiseField {
            t0: a,
            t1: b,
            steps,
            breakpoints: vec![a, b],
            segments: vec![Segment { ts, vs, ds }],
        })
    }

    fn check_continuity(&self) -> Result<()> {
        for i in 1..self.segments.len() {
            let prev = self.segments[i - 1].vs.last().unwrap();
            let next = &self.segments[i].vs[0];
            let scale = prev.norm().max(1.0);
            if (prev - next).norm() > CONTINUITY_TOL * scale {
                return Err(Error::InvalidInput(format!(
                    "field jumps by {:.2e} at breakpoint {}",
                    (prev - next).norm(),
                    self.breakpoints[i]
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn check_grid(&self, geo: &Geodesic) -> Result<()> {
        let (a, b) = geo.interval();
        if (self.t0 - a).abs() > 1e-12 * (1.0 + a.abs())
            || (self.t1 - b).abs() > 1e-12 * (1.0 + b.abs())
            || self.steps != geo.steps()
        {
            return Err(Error::GridMismatch {
                detail: format!(
                    "field sampled on [{}, {}] x {} steps, geodesic has [{}, {}] x {}",
                    self.t0,
                    self.t1,
                    self.steps,
                    a,
                    b,
                    geo.steps()
                ),
            });
        }
        Ok(())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    fn segment_index(&self, t: f64) -> usize {
        let k = self.breakpoints.partition_point(|s| *s <= t);
        k.saturating_sub(1).min(self.segments.len() - 1)
    }

    pub fn value_at(&self, t: f64) -> DVector<f64> {
        self.segments[self.segment_index(t)].eval(t).0
    }

    /// Derivative at `t`, using the right-hand segment at breakpoints
    /// (left-hand at the final endpoint).
    pub fn deriv_at(&self, t: f64) -> DVector<f64> {
        self.segments[self.segment_index(t)].eval(t).1
    }

    /// Left-hand derivative limit at interior breakpoint `i`.
    pub fn deriv_before(&self, i: usize) -> &DVector<f64> {
        self.segments[i - 1].ds.last().unwrap()
    }

    /// Right-hand derivative limit at interior breakpoint `i`.
    pub fn deriv_after(&self, i: usize) -> &DVector<f64> {
        &self.segments[i].ds[0]
    }

    pub fn start_value(&self) -> &DVector<f64> {
        &self.segments[0].vs[0]
    }

    pub fn end_value(&self) -> &DVector<f64> {
        self.segments.last().unwrap().vs.last().unwrap()
    }
}

fn merged_breakpoints(v: &PiecewiseField, w: &PiecewiseField) -> Vec<f64> {
    let span = v.t1 - v.t0;
    let mut all: Vec<f64> = v
        .breakpoints
        .iter()
        .chain(w.breakpoints.iter())
        .copied()
        .collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    all.dedup_by(|x, y| (*x - *y).abs() < 1e-12 * span);
    all
}

/// Composite Simpson over `[s, u]` with resolution comparable to the
/// geodesic grid.
fn simpson<F: FnMut(f64) -> Result<f64>>(s: f64, u: f64, h_grid: f64, mut f: F) -> Result<f64> {
    let mut n = (((u - s) / h_grid).ceil() as usize).max(8);
    if n % 2 == 1 {
        n += 1;
    }
    let h = (u - s) / n as f64;
    let mut acc = f(s)? + f(u)?;
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(s + h * k as f64)?;
    }
    Ok(acc * h / 3.0)
}

/// The index form `I(V, W)`: the integral of
/// `g(V', W') + g(R(γ', V) γ', W)` minus the second-fundamental-form term
/// of the initial submanifold at the start point (absent for a point).
pub fn index_form_value(
    geo: &Geodesic,
    p: (&Submanifold, &[f64]),
    v: &PiecewiseField,
    w: &PiecewiseField,
) -> Result<f64> {
    v.check_grid(geo)?;
    w.check_grid(geo)?;
    let breaks = merged_breakpoints(v, w);
    let h_grid = geo.step_size();
    let mut integral = 0.0;
    for pair in breaks.windows(2) {
        integral += simpson(pair[0], pair[1], h_grid, |t| {
            let (vv, vd) = v.segments[v.segment_index(t)].eval(t);
            let (wv, wd) = w.segments[w.segment_index(t)].eval(t);
            let g = geo.metric_at_time(t)?;
            let tidal = geo.tidal_at(t);
            let derivs = (vd.transpose() * &g * wd)[(0, 0)];
            let curv = ((&tidal * vv).transpose() * &g * wv)[(0, 0)];
            Ok(derivs + curv)
        })?;
    }
    let (sub, u0) = p;
    let shape = if sub.dim() > 0 {
        sub.second_fundamental_form(
            geo.manifold(),
            u0,
            geo.velocity(0),
            v.start_value(),
            w.start_value(),
        )?
    } else {
        0.0
    };
    Ok(integral - shape)
}

/// Two-endpoint index form: `index_form_value` plus the second fundamental
/// form of the target submanifold at the end point. Endpoint values must be
/// tangent to the target (zero, for a point target).
pub fn index_form_two_endpoint_value(
    geo: &Geodesic,
    p: (&Submanifold, &[f64]),
    q: (&Submanifold, &[f64]),
    v: &PiecewiseField,
    w: &PiecewiseField,
) -> Result<f64> {
    let base = index_form_value(geo, p, v, w)?;
    let (sub_q, uq) = q;
    let vb = v.end_value();
    let wb = w.end_value();
    if sub_q.dim() == 0 {
        for x in [vb, wb] {
            if x.norm() > BOUNDARY_TOL {
                return Err(Error::BoundaryNotTangent { residual: x.norm() });
            }
        }
        return Ok(base);
    }
    let basis = sub_q.tangent_basis(uq);
    for x in [vb, wb] {
        let (_, residual) = least_squares(&basis, x)?;
        if residual > BOUNDARY_TOL * x.norm().max(1.0) {
            return Err(Error::BoundaryNotTangent { residual });
        }
    }
    let shape = sub_q.second_fundamental_form(
        geo.manifold(),
        uq,
        geo.velocity(geo.steps()),
        vb,
        wb,
    )?;
    Ok(base + shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{integrate_geodesic, orthonormal_complement_seed, parallel_frame};
    use crate::geometry::Manifold;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn line_with_frame(len: f64, steps: usize) -> (Geodesic, ParallelFrame) {
        let eucl = Arc::new(Manifold::euclidean(2));
        let geo =
            integrate_geodesic(eucl, &[0.0, 0.0], &[1.0, 0.0], (0.0, len), steps).unwrap();
        let frame = parallel_frame(&geo, &orthonormal_complement_seed(&geo).unwrap()).unwrap();
        (geo, frame)
    }

    fn scalar_profile(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> CoefFn {
        Box::new(move |t| {
            (
                DVector::from_column_slice(&[f(t)]),
                DVector::from_column_slice(&[df(t)]),
            )
        })
    }

    #[test]
    fn flat_quadratic_profile_integrates_to_one_third() {
        let (geo, frame) = line_with_frame(1.0, 256);
        let v = PiecewiseField::from_frame_coefficients(
            &geo,
            &frame,
            &[0.0, 1.0],
            vec![scalar_profile(|t| t * (1.0 - t), |t| 1.0 - 2.0 * t)],
        )
        .unwrap();
        let point = Submanifold::point(vec![0.0, 0.0]);
        let val = index_form_value(&geo, (&point, &[]), &v, &v).unwrap();
        assert_relative_eq!(val, 1.0 / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn sphere_sine_profile_matches_closed_form() {
        let sphere = Arc::new(Manifold::sphere(2, 1.0));
        for len in [2.0_f64, 4.0] {
            let geo = integrate_geodesic(
                sphere.clone(),
                &[PI / 2.0, 0.0],
                &[0.0, 1.0],
                (0.0, len),
                2000,
            )
            .unwrap();
            let frame =
                parallel_frame(&geo, &orthonormal_complement_seed(&geo).unwrap()).unwrap();
            let omega = PI / len;
            let v = PiecewiseField::from_frame_coefficients(
                &geo,
                &frame,
                &[0.0, len],
                vec![scalar_profile(
                    move |t| (omega * t).sin(),
                    move |t| omega * (omega * t).cos(),
                )],
            )
            .unwrap();
            let point = Submanifold::point(geo.position(0).as_slice().to_vec());
            let val = index_form_value(&geo, (&point, &[]), &v, &v).unwrap();
            let expect = (omega * omega - 1.0) * len / 2.0;
            assert_relative_eq!(val, expect, max_relative = 1e-6);
            assert_eq!(val > 0.0, len < PI);
        }
    }

    #[test]
    fn circle_start_contributes_shape_term() {
        let eucl = Arc::new(Manifold::euclidean(2));
        let len = 2.0;
        let geo =
            integrate_geodesic(eucl, &[1.0, 0.0], &[-1.0, 0.0], (0.0, len), 512).unwrap();
        let frame = parallel_frame(&geo, &orthonormal_complement_seed(&geo).unwrap()).unwrap();
        let v = PiecewiseField::from_frame_coefficients(
            &geo,
            &frame,
            &[0.0, len],
            vec![scalar_profile(move |t| 1.0 - t / len, move |_| -1.0 / len)],
        )
        .unwrap();
        let circle = Submanifold::circle([0.0, 0.0], 1.0);
        let val = index_form_value(&geo, (&circle, &[0.0]), &v, &v).unwrap();
        assert_relative_eq!(val, 1.0 / len - 1.0, max_relative = 1e-9);
    }

    #[test]
    fn form_is_symmetric() {
        let sphere = Arc::new(Manifold::sphere(2, 1.0));
        let geo = integrate_geodesic(
            sphere,
            &[PI / 2.0, 0.0],
            &[0.0, 1.0],
            (0.0, 2.0),
            1500,
        )
        .unwrap();
        let frame = parallel_frame(&geo, &orthonormal_complement_seed(&geo).unwrap()).unwrap();
        let v = PiecewiseField::from_frame_coefficients(
            &geo,
            &frame,
            &[0.0, 2.0],
            vec![scalar_profile(|t| t * t * (2.0 - t), |t| 4.0 * t - 3.0 * t * t)],
        )
        .unwrap();
        let w = PiecewiseField::from_frame_coefficients(
            &geo,
            &frame,
            &[0.0, 2.0],
            vec![scalar_profile(|t| (1.3 * t).sin(), |t| 1.3 * (1.3 * t).cos())],
        )
        .unwrap();
        let point = Submanifold::point(geo.position(0).as_slice().to_vec());
        let ab = index_form_value(&geo, (&point, &[]), &v, &w).unwrap();
        let ba = index_form_value(&geo, (&point, &[]), &w, &v).unwrap();
        assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn concentric_circles_jacobi_field_is_null_direction() {
        let eucl = Arc::new(Manifold::euclidean(2));
        let geo = integrate_geodesic(eucl, &[1.0, 0.0], &[1.0, 0.0], (0.0, 1.0), 512).unwrap();
        let frame = parallel_frame(&geo, &orthonormal_complement_seed(&geo).unwrap()).unwrap();
        let v = PiecewiseField::from_frame_coefficients(
            &geo,
            &frame,
            &[0.0, 1.0],
            vec![scalar_profile(|t| 1.0 + t, |_| 1.0)],
        )
        .unwrap();
        let inner = Submanifold::circle([0.0, 0.0], 1.0);
        let outer = Submanifold::circle([0.0, 0.0], 2.0);
        let val =
            index_form_two_endpoint_value(&geo, (&inner, &[0.0]), (&outer, &[0.0]), &v, &v)
                .unwrap();
        assert!(val.abs() < 1e-9, "got {val}");
    }

    #[test]
    fn point_target_requires_vanishing_end() {
        let (geo, frame) = line_with_frame(1.0, 256);
        let v = PiecewiseField::from_frame_coefficients(
            &geo,
            &frame,
            &[0.0, 1.0],
            vec![scalar_profile(|t| t, |_| 1.0)],
        )
        .unwrap();
        let point = Submanifold::point(vec![0.0, 0.0]);
        let end = Submanifold::point(vec![1.0, 0.0]);
        match index_form_two_endpoint_value(&geo, (&point, &[]), (&end, &[]), &v, &v) {
            Err(Error::BoundaryNotTangent { .. }) => {}
            other => panic!("expected boundary rejection, got {other:?}"),
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let (geo_a, frame) = line_with_frame(1.0, 256);
        let (geo_b, _) = line_with_frame(1.0, 128);
        let v = PiecewiseField::from_frame_coefficients(
            &geo_a,
            &frame,
            &[0.0, 1.0],
            vec![scalar_profile(|t| t * (1.0 - t), |t| 1.0 - 2.0 * t)],
        )
        .unwrap();
        let point = Submanifold::point(vec![0.0, 0.0]);
        match index_form_value(&geo_b, (&point, &[]), &v, &v) {
            Err(Error::GridMismatch { .. }) => {}
            other => panic!("expected grid mismatch, got {other:?}"),
        }
    }

    #[test]
    fn discontinuous_coefficients_are_rejected() {
        let (geo, frame) = line_with_frame(1.0, 256);
        let result = PiecewiseField::from_frame_coefficients(
            &geo,
            &frame,
            &[0.0, 0.5, 1.0],
            vec![
                scalar_profile(|t| t, |_| 1.0),
                scalar_profile(|t| 2.0 * t, |_| 2.0),
            ],
        );
        match result {
            Err(Error::InvalidInput(_)) => {}
            other => panic!("expected continuity rejection, got {other:?}"),
        }
    }

    #[test]
    fn hat_field_evaluates_continuously() {
        let (geo, frame) = line_with_frame(1.0, 256);
        let v = PiecewiseField::from_frame_coefficients(
            &geo,
            &frame,
            &[0.0, 0.5, 1.0],
            vec![
                scalar_profile(|t| 2.0 * t, |_| 2.0),
                scalar_profile(|t| 2.0 - 2.0 * t, |_| -2.0),
            ],
        )
        .unwrap();
        assert_relative_eq!(v.value_at(0.5)[1], 1.0, max_relative = 1e-12);
        assert_relative_eq!(v.value_at(0.25)[1], 0.5, max_relative = 1e-10);
        assert_relative_eq!(v.deriv_before(1)[1], 2.0, max_relative = 1e-12);
        assert_relative_eq!(v.deriv_after(1)[1], -2.0, max_relative = 1e-12);
        let point = Submanifold::point(vec![0.0, 0.0]);
        let val = index_form_value(&geo, (&point, &[]), &v, &v).unwrap();
        assert_relative_eq!(val, 4.0, max_relative = 1e-9);
    }
}
