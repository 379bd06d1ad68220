//! Chart-level semi-Riemannian geometry.
//!
//! A [`Manifold`] is a single coordinate chart carrying a metric `g` of
//! Riemannian or Lorentzian signature. All derived quantities follow the
//! conventions
//!
//! * `Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)`,
//! * `R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_{[X,Y]} Z`,
//!
//! so that on the unit sphere a unit vector field `V` orthogonal to a unit
//! speed geodesic satisfies `g(R(v,V)v, V) = -1`. Metric derivatives use
//! analytic formulas when the chart provides them and fourth-order central
//! differences with step `1e-5 * max(1, |x_k|)` otherwise.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::inertia::symmetric_inertia;

/// Relative step for fourth-order finite differences.
const FD_STEP: f64 = 1e-4;
/// Wider step for differencing Christoffel symbols: first-derivative
/// stencils bottom out near (machine epsilon / step), so a small step
/// would leave the curvature with a roundoff floor around 1e-11.
const CURV_FD_STEP: f64 = 1e-3;
/// Eigenvalue tolerance for metric signature classification.
const SIGNATURE_TOL: f64 = 1e-10;
/// Relative tolerance for normality / tangency residuals.
const TANGENCY_TOL: f64 = 1e-8;
/// Relative tolerance on the tangent Gram determinant.
const GRAM_TOL: f64 = 1e-12;

pub type MetricFn = Box<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type MetricDerivFn = Box<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;
/// Second derivatives of the metric, flat-indexed: entry `a*dim + b` is
/// `d_a d_b g` (symmetric in `a`, `b`).
pub type MetricSecondDerivFn = Box<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;
pub type EmbeddingFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacobianFn = Box<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signature {
    Riemannian,
    /// Exactly one negative metric eigenvalue.
    Lorentzian,
}

/// A coordinate chart with a metric of fixed signature.
pub struct Manifold {
    dim: usize,
    signature: Signature,
    metric: MetricFn,
    metric_derivs: Option<MetricDerivFn>,
    metric_second_derivs: Option<MetricSecondDerivFn>,
    /// Box bounds per coordinate; infinite entries mean unbounded.
    chart: Vec<(f64, f64)>,
}

impl Manifold {
    pub fn new(
        dim: usize,
        signature: Signature,
        metric: MetricFn,
        metric_derivs: Option<MetricDerivFn>,
        chart: Option<Vec<(f64, f64)>>,
    ) -> Self {
        let chart = chart.unwrap_or_else(|| vec![(f64::NEG_INFINITY, f64::INFINITY); dim]);
        assert_eq!(chart.len(), dim);
        Manifold {
            dim,
            signature,
            metric,
            metric_derivs,
            metric_second_derivs: None,
            chart,
        }
    }

    /// Attach analytic second derivatives of the metric, enabling an exact
    /// curvature evaluation instead of differenced Christoffel symbols.
    pub fn with_second_derivatives(mut self, second: MetricSecondDerivFn) -> Self {
        self.metric_second_derivs = Some(second);
        self
    }

    /// Flat Euclidean space of dimension `dim`.
    pub fn euclidean(dim: usize) -> Self {
        Self::new(
            dim,
            Signature::Riemannian,
            Box::new(move |_: &[f64]| DMatrix::identity(dim, dim)),
            Some(Box::new(move |_: &[f64]| {
                vec![DMatrix::zeros(dim, dim); dim]
            })),
            None,
        )
        .with_second_derivatives(Box::new(move |_: &[f64]| {
            vec![DMatrix::zeros(dim, dim); dim * dim]
        }))
    }

    /// Flat Minkowski space `diag(1, .., 1, -1)`; the last coordinate is
    /// the timelike one.
    pub fn minkowski(dim: usize) -> Self {
        Self::new(
            dim,
            Signature::Lorentzian,
            Box::new(move |_: &[f64]| {
                let mut g = DMatrix::identity(dim, dim);
                g[(dim - 1, dim - 1)] = -1.0;
                g
            }),
            Some(Box::new(move |_: &[f64]| {
                vec![DMatrix::zeros(dim, dim); dim]
            })),
            None,
        )
        .with_second_derivatives(Box::new(move |_: &[f64]| {
            vec![DMatrix::zeros(dim, dim); dim * dim]
        }))
    }

    /// Round sphere of the given dimension (2 or 3) and radius in
    /// hyperspherical coordinates: `g_ii = r^2 prod_{j<i} sin^2(x_j)`.
    /// Polar coordinates are restricted away from the chart singularities.
    pub fn sphere(dim: usize, radius: f64) -> Self {
        assert!((2..=3).contains(&dim), "sphere chart supports dim 2 or 3");
        assert!(radius > 0.0);
        let r2 = radius * radius;
        let metric = move |x: &[f64]| {
            let mut g = DMatrix::zeros(dim, dim);
            let mut factor = r2;
            for i in 0..dim {
                g[(i, i)] = factor;
                factor *= x[i].sin().powi(2);
            }
            g
        };
        let derivs = move |x: &[f64]| {
            let mut out = vec![DMatrix::zeros(dim, dim); dim];
            // d_k g_ii = 2 sin(x_k) cos(x_k) r^2 prod_{j<i, j!=k} sin^2(x_j), k < i
            for i in 0..dim {
                for k in 0..i {
                    let mut v = r2 * 2.0 * x[k].sin() * x[k].cos();
                    for j in 0..i {
                        if j != k {
                            v *= x[j].sin().powi(2);
                        }
                    }
                    out[k][(i, i)] = v;
                }
            }
            out
        };
        let second = move |x: &[f64]| {
            let mut out = vec![DMatrix::zeros(dim, dim); dim * dim];
            for i in 0..dim {
                // g_ii = r^2 prod_{j<i} sin^2(x_j); differentiate the product
                // by replacing the touched factors.
                for a in 0..i {
                    for b in 0..i {
                        let mut v = r2;
                        for j in 0..i {
                            if a == b && j == a {
                                v *= 2.0 * (2.0 * x[j].cos().powi(2) - 1.0);
                            } else if a != b && (j == a || j == b) {
                                v *= 2.0 * x[j].sin() * x[j].cos();
                            } else {
                                v *= x[j].sin().powi(2);
                            }
                        }
                        out[a * dim + b][(i, i)] = v;
                    }
                }
            }
            out
        };
        let margin = 1e-4;
        let mut chart = vec![(margin, std::f64::consts::PI - margin); dim - 1];
        chart.push((f64::NEG_INFINITY, f64::INFINITY));
        Self::new(
            dim,
            Signature::Riemannian,
            Box::new(metric),
            Some(Box::new(derivs)),
            Some(chart),
        )
        .with_second_derivatives(Box::new(second))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn chart_contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && x.iter()
                .zip(&self.chart)
                .all(|(v, (lo, hi))| v.is_finite() && *v >= *lo && *v <= *hi)
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, manifold has dimension {}",
                x.len(),
                self.dim
            )));
        }
        if !self.chart_contains(x) {
            return Err(Error::DomainError {
                point: x.to_vec(),
                detail: "coordinate outside chart bounds".into(),
            });
        }
        Ok(())
    }

    /// Metric matrix at `x`, validated for symmetry and signature.
    pub fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(x)?;
        let g = (self.metric)(x);
        let inertia = symmetric_inertia(&g, SIGNATURE_TOL);
        let expected_minus = match self.signature {
            Signature::Riemannian => 0,
            Signature::Lorentzian => 1,
        };
        if inertia.n_zero != 0 || inertia.n_minus != expected_minus {
            return Err(Error::SignatureMismatch {
                point: x.to_vec(),
                n_plus: inertia.n_plus,
                n_minus: inertia.n_minus,
                expected: match self.signature {
                    Signature::Riemannian => format!("({},0)", self.dim),
                    Signature::Lorentzian => format!("({},1)", self.dim - 1),
                },
            });
        }
        Ok(g)
    }

    /// Inner product `g(u, v)` at `x`.
    pub fn inner(&self, x: &[f64], u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        let g = self.metric_at(x)?;
        Ok((u.transpose() * g * v)[(0, 0)])
    }

    /// Partial derivatives of the metric: entry `k` is `d_k g`.
    pub fn metric_derivatives(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.check_domain(x)?;
        if let Some(derivs) = &self.metric_derivs {
            return Ok(derivs(x));
        }
        let mut out = Vec::with_capacity(self.dim);
        let mut stencil = x.to_vec();
        for k in 0..self.dim {
            let h = FD_STEP * x[k].abs().max(1.0);
            let mut eval = |offset: f64| -> DMatrix<f64> {
                stencil[k] = x[k] + offset;
                let g = (self.metric)(&stencil);
                stencil[k] = x[k];
                g
            };
            let m2 = eval(-2.0 * h);
            let m1 = eval(-h);
            let p1 = eval(h);
            let p2 = eval(2.0 * h);
            out.push((m2 - m1 * 8.0 + p1 * 8.0 - p2) / (12.0 * h));
        }
        Ok(out)
    }

    /// Christoffel symbols at `x`: entry `k` holds the matrix `Gamma^k_ij`.
    pub fn christoffel_at(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let g = self.metric_at(x)?;
        let dg = self.metric_derivatives(x)?;
        let g_inv = g.clone().try_inverse().ok_or(Error::SignatureMismatch {
            point: x.to_vec(),
            n_plus: 0,
            n_minus: 0,
            expected: "invertible metric".into(),
        })?;
        let m = self.dim;
        let mut gamma = vec![DMatrix::zeros(m, m); m];
        for i in 0..m {
            for j in i..m {
                // lower-index bracket [ij, l] = (d_i g_jl + d_j g_il - d_l g_ij) / 2
                for k in 0..m {
                    let mut v = 0.0;
                    for l in 0..m {
                        let bracket = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                        v += g_inv[(k, l)] * bracket;
                    }
                    gamma[k][(i, j)] = v;
                    gamma[k][(j, i)] = v;
                }
            }
        }
        Ok(gamma)
    }

    /// Coordinate components of the curvature tensor packed as
    /// `coef[((l*m + i)*m + j)*m + k] = (R(e_i, e_j) e_k)^l`.
    fn curvature_components(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim;
        let gamma = self.christoffel_at(x)?;
        let dgamma = if self.metric_derivs.is_some() && self.metric_second_derivs.is_some() {
            self.christoffel_derivatives_analytic(x)?
        } else {
            self.christoffel_derivatives_differenced(x)?
        };
        let mut coef = vec![0.0; m * m * m * m];
        for l in 0..m {
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let mut v = dgamma[i][l][(j, k)] - dgamma[j][l][(i, k)];
                        for p in 0..m {
                            v += gamma[p][(j, k)] * gamma[l][(i, p)]
                                - gamma[p][(i, k)] * gamma[l][(j, p)];
                        }
                        coef[((l * m + i) * m + j) * m + k] = v;
                    }
                }
            }
        }
        Ok(coef)
    }

    /// `d_i Gamma` via fourth-order differences; exact zeros for flat charts.
    fn christoffel_derivatives_differenced(&self, x: &[f64]) -> Result<Vec<Vec<DMatrix<f64>>>> {
        let m = self.dim;
        let mut dgamma = Vec::with_capacity(m);
        let mut stencil = x.to_vec();
        for i in 0..m {
            let h = CURV_FD_STEP * x[i].abs().max(1.0);
            let mut eval = |offset: f64| -> Result<Vec<DMatrix<f64>>> {
                stencil[i] = x[i] + offset;
                let res = self.christoffel_at(&stencil);
                stencil[i] = x[i];
                res
            };
            let m2 = eval(-2.0 * h)?;
            let m1 = eval(-h)?;
            let p1 = eval(h)?;
            let p2 = eval(2.0 * h)?;
            let mut d = Vec::with_capacity(m);
            for l in 0..m {
                d.push((&m2[l] - &m1[l] * 8.0 + &p1[l] * 8.0 - &p2[l]) / (12.0 * h));
            }
            dgamma.push(d);
        }
        Ok(dgamma)
    }

    /// `d_i Gamma` from analytic first and second metric derivatives:
    /// `Gamma^l_jk = g^{lp} B_pjk` with the lower bracket
    /// `B_pjk = (d_j g_kp + d_k g_jp - d_p g_jk) / 2`, so
    /// `d_i Gamma^l_jk = (d_i g^{-1})_{lp} B_pjk + g^{lp} d_i B_pjk` and
    /// `d_i g^{-1} = -g^{-1} (d_i g) g^{-1}`.
    fn christoffel_derivatives_analytic(&self, x: &[f64]) -> Result<Vec<Vec<DMatrix<f64>>>> {
        let m = self.dim;
        let g = self.metric_at(x)?;
        let g_inv = g.clone().try_inverse().ok_or(Error::SignatureMismatch {
            point: x.to_vec(),
            n_plus: 0,
            n_minus: 0,
            expected: "invertible metric".into(),
        })?;
        let dg = self.metric_derivs.as_ref().expect("checked by caller")(x);
        let ddg = self.metric_second_derivs.as_ref().expect("checked by caller")(x);
        let bracket = |p: usize, j: usize, k: usize| -> f64 {
            0.5 * (dg[j][(k, p)] + dg[k][(j, p)] - dg[p][(j, k)])
        };
        let dbracket = |i: usize, p: usize, j: usize, k: usize| -> f64 {
            0.5 * (ddg[j * m + i][(k, p)] + ddg[k * m + i][(j, p)] - ddg[p * m + i][(j, k)])
        };
        let mut dgamma = Vec::with_capacity(m);
        for i in 0..m {
            let dginv = -(&g_inv * &dg[i] * &g_inv);
            let mut d = vec![DMatrix::zeros(m, m); m];
            for l in 0..m {
                for j in 0..m {
                    for k in j..m {
                        let mut v = 0.0;
                        for p in 0..m {
                            v += dginv[(l, p)] * bracket(p, j, k)
                                + g_inv[(l, p)] * dbracket(i, p, j, k);
                        }
                        d[l][(j, k)] = v;
                        d[l][(k, j)] = v;
                    }
                }
            }
            dgamma.push(d);
        }
        Ok(dgamma)
    }

    /// Curvature applied to vectors: `R(X, Y) Z` at `x`.
    pub fn riemann_apply(
        &self,
        x: &[f64],
        xv: &DVector<f64>,
        yv: &DVector<f64>,
        zv: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let m = self.dim;
        let coef = self.curvature_components(x)?;
        let mut out = DVector::zeros(m);
        for l in 0..m {
            let mut acc = 0.0;
            for i in 0..m {
                if xv[i] == 0.0 {
                    continue;
                }
                for j in 0..m {
                    if yv[j] == 0.0 {
                        continue;
                    }
                    for k in 0..m {
                        acc += coef[((l * m + i) * m + j) * m + k] * xv[i] * yv[j] * zv[k];
                    }
                }
            }
            out[l] = acc;
        }
        Ok(out)
    }

    /// Tidal operator of the direction `u`: the matrix `T` with
    /// `T v = R(u, v) u`. This is the coefficient operator of the Jacobi
    /// equation along a geodesic with velocity `u`.
    pub fn tidal_operator(&self, x: &[f64], u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let m = self.dim;
        let coef = self.curvature_components(x)?;
        let mut t = DMatrix::zeros(m, m);
        for l in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for i in 0..m {
                    if u[i] == 0.0 {
                        continue;
                    }
                    for k in 0..m {
                        acc += coef[((l * m + i) * m + j) * m + k] * u[i] * u[k];
                    }
                }
                t[(l, j)] = acc;
            }
        }
        Ok(t)
    }
}

/// An embedded submanifold `f: R^k -> M`, `k >= 0`; `k = 0` encodes a
/// single point. Derivatives of the embedding are taken analytically when
/// provided and by fourth-order differences otherwise.
pub struct Submanifold {
    ambient_dim: usize,
    dim: usize,
    embedding: EmbeddingFn,
    jacobian: Option<JacobianFn>,
}

impl Submanifold {
    pub fn new(
        ambient_dim: usize,
        dim: usize,
        embedding: EmbeddingFn,
        jacobian: Option<JacobianFn>,
    ) -> Self {
        assert!(dim < ambient_dim, "submanifold must have positive codimension");
        Submanifold {
            ambient_dim,
            dim,
            embedding,
            jacobian,
        }
    }

    /// A single point as a zero-dimensional submanifold.
    pub fn point(coords: Vec<f64>) -> Self {
        let ambient = coords.len();
        Submanifold::new(ambient, 0, Box::new(move |_: &[f64]| coords.clone()), None)
    }

    /// Circle of the given center and radius in a two-dimensional chart,
    /// parametrized by angle.
    pub fn circle(center: [f64; 2], radius: f64) -> Self {
        Submanifold::new(
            2,
            1,
            Box::new(move |u: &[f64]| {
                vec![center[0] + radius * u[0].cos(), center[1] + radius * u[0].sin()]
            }),
            Some(Box::new(move |u: &[f64]| {
                DMatrix::from_column_slice(2, 1, &[-radius * u[0].sin(), radius * u[0].cos()])
            })),
        )
    }

    /// Straight line `base + u * direction` in any chart.
    pub fn line(base: Vec<f64>, direction: Vec<f64>) -> Self {
        assert_eq!(base.len(), direction.len());
        let ambient = base.len();
        let dir = direction.clone();
        Submanifold::new(
            ambient,
            1,
            Box::new(move |u: &[f64]| {
                base.iter().zip(&direction).map(|(b, d)| b + u[0] * d).collect()
            }),
            Some(Box::new(move |_: &[f64]| {
                DMatrix::from_column_slice(dir.len(), 1, &dir)
            })),
        )
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point_at(&self, u: &[f64]) -> Vec<f64> {
        (self.embedding)(u)
    }

    /// Columns span the tangent space at `f(u)`; shape `m x k`.
    pub fn tangent_basis(&self, u: &[f64]) -> DMatrix<f64> {
        if self.dim == 0 {
            return DMatrix::zeros(self.ambient_dim, 0);
        }
        if let Some(jac) = &self.jacobian {
            return jac(u);
        }
        let mut basis = DMatrix::zeros(self.ambient_dim, self.dim);
        let mut stencil = u.to_vec();
        for a in 0..self.dim {
            let h = FD_STEP * u[a].abs().max(1.0);
            let mut eval = |offset: f64| -> Vec<f64> {
                stencil[a] = u[a] + offset;
                let p = (self.embedding)(&stencil);
                stencil[a] = u[a];
                p
            };
            let m2 = eval(-2.0 * h);
            let m1 = eval(-h);
            let p1 = eval(h);
            let p2 = eval(2.0 * h);
            for i in 0..self.ambient_dim {
                basis[(i, a)] = (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h);
            }
        }
        basis
    }

    /// Second partial derivatives of the embedding, as the vector
    /// `d^2 f / du_a du_b`. With an analytic jacobian a single difference
    /// of its columns suffices; otherwise both levels difference the
    /// embedding with a wider step, since nesting two differences at the
    /// first-derivative step would amplify roundoff beyond tolerance.
    fn second_derivative(&self, u: &[f64], a: usize, b: usize) -> DVector<f64> {
        let mut stencil = u.to_vec();
        if self.jacobian.is_some() {
            let h = FD_STEP * u[b].abs().max(1.0);
            let mut eval = |offset: f64| -> DVector<f64> {
                stencil[b] = u[b] + offset;
                let col = self.tangent_basis(&stencil).column(a).into_owned();
                stencil[b] = u[b];
                col
            };
            let m2 = eval(-2.0 * h);
            let m1 = eval(-h);
            let p1 = eval(h);
            let p2 = eval(2.0 * h);
            return (m2 - m1 * 8.0 + p1 * 8.0 - p2) / (12.0 * h);
        }
        let h2 = 1e-3;
        let ha = h2 * u[a].abs().max(1.0);
        let hb = h2 * u[b].abs().max(1.0);
        let mut value = |da: f64, db: f64| -> DVector<f64> {
            stencil[a] = u[a] + da;
            stencil[b] += db;
            let p = DVector::from_vec((self.embedding)(&stencil));
            stencil[a] = u[a];
            stencil[b] = u[b];
            p
        };
        let mut first = |db: f64| -> DVector<f64> {
            (value(-2.0 * ha, db) - value(-ha, db) * 8.0 + value(ha, db) * 8.0
                - value(2.0 * ha, db))
                / (12.0 * ha)
        };
        (first(-2.0 * hb) - first(-hb) * 8.0 + first(hb) * 8.0 - first(2.0 * hb)) / (12.0 * hb)
    }

    /// Coefficients of `v` in the tangent basis at `u`, or `NotTangent`.
    fn tangent_coefficients(&self, u: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        let basis = self.tangent_basis(u);
        let scale = v.norm().max(1.0);
        if self.dim == 0 {
            if v.norm() > TANGENCY_TOL * scale {
                return Err(Error::NotTangent {
                    vector: v.as_slice().to_vec(),
                    residual: v.norm(),
                });
            }
            return Ok(DVector::zeros(0));
        }
        let svd = basis.clone().svd(true, true);
        let coef = svd
            .solve(v, 1e-13)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let residual = (&basis * &coef - v).norm();
        if residual > TANGENCY_TOL * scale {
            return Err(Error::NotTangent {
                vector: v.as_slice().to_vec(),
                residual,
            });
        }
        Ok(coef)
    }

    fn check_normal(
        &self,
        manifold: &Manifold,
        u: &[f64],
        n: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        let x = self.point_at(u);
        let g = manifold.metric_at(&x)?;
        let basis = self.tangent_basis(u);
        let scale = n.norm().max(1.0);
        for a in 0..self.dim {
            let col = basis.column(a);
            let pairing: f64 = (n.transpose() * &g * col)[(0, 0)];
            let col_scale = col.norm().max(1.0);
            if pairing.abs() > TANGENCY_TOL * scale * col_scale {
                return Err(Error::NotNormal {
                    vector: n.as_slice().to_vec(),
                    residual: pairing.abs(),
                });
            }
        }
        Ok(basis)
    }

    /// Second fundamental form `S_n(v1, v2) = g(n, nabla_{v1} V2)` with
    /// respect to the normal `n`, for tangent vectors `v1`, `v2` at `f(u)`.
    pub fn second_fundamental_form(
        &self,
        manifold: &Manifold,
        u: &[f64],
        n: &DVector<f64>,
        v1: &DVector<f64>,
        v2: &DVector<f64>,
    ) -> Result<f64> {
        let matrix = self.form_matrix(manifold, u, n)?;
        let alpha = self.tangent_coefficients(u, v1)?;
        let beta = self.tangent_coefficients(u, v2)?;
        Ok((alpha.transpose() * matrix * beta)[(0, 0)])
    }

    /// Matrix of the second fundamental form on the tangent basis at `u`.
    pub fn form_matrix(
        &self,
        manifold: &Manifold,
        u: &[f64],
        n: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        let basis = self.check_normal(manifold, u, n)?;
        let x = self.point_at(u);
        let g = manifold.metric_at(&x)?;
        let gamma = manifold.christoffel_at(&x)?;
        let m = self.ambient_dim;
        let k = self.dim;
        let gn = g.transpose() * n;
        let mut s = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                // nabla_{e_a} E_b = d^2 f/du_a du_b + Gamma(e_a, e_b)
                let hess = self.second_derivative(u, b, a);
                let mut cov = hess;
                for i in 0..m {
                    let mut acc = 0.0;
                    for p in 0..m {
                        for q in 0..m {
                            acc += gamma[i][(p, q)] * basis[(p, a)] * basis[(q, b)];
                        }
                    }
                    cov[i] += acc;
                }
                let val = gn.dot(&cov);
                s[(a, b)] = val;
                s[(b, a)] = val;
            }
        }
        Ok(s)
    }

    /// Shape operator with respect to `n` on the tangent basis:
    /// `A = G^{-1} S` where `G` is the tangent Gram matrix. Requires the
    /// induced metric to be nondegenerate.
    pub fn shape_operator(
        &self,
        manifold: &Manifold,
        u: &[f64],
        n: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        let s = self.form_matrix(manifold, u, n)?;
        let gram = self.tangent_gram(manifold, u)?;
        let k = self.dim;
        if k == 0 {
            return Ok(DMatrix::zeros(0, 0));
        }
        let det = gram.determinant();
        let scale = gram.norm().max(1.0).powi(k as i32);
        if det.abs() < GRAM_TOL * scale {
            return Err(Error::DegenerateTangentMetric { det });
        }
        let gram_inv = gram.try_inverse().ok_or(Error::DegenerateTangentMetric { det })?;
        Ok(gram_inv * s)
    }

    /// Gram matrix `g(e_a, e_b)` of the tangent basis at `u`.
    pub fn tangent_gram(&self, manifold: &Manifold, u: &[f64]) -> Result<DMatrix<f64>> {
        let x = self.point_at(u);
        let g = manifold.metric_at(&x)?;
        let basis = self.tangent_basis(u);
        Ok(basis.transpose() * g * basis)
    }

    /// Shape operator applied to a tangent vector, returned in ambient
    /// coordinates: the tangent vector `W` with `g(W, w) = S_n(v, w)` for
    /// all tangent `w`.
    pub fn weingarten_apply(
        &self,
        manifold: &Manifold,
        u: &[f64],
        n: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        if self.dim == 0 {
            return Ok(DVector::zeros(self.ambient_dim));
        }
        let a = self.shape_operator(manifold, u, n)?;
        let alpha = self.tangent_coefficients(u, v)?;
        let basis = self.tangent_basis(u);
        Ok(basis * (a * alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_column_slice(&[a, b])
    }

    #[test]
    fn sphere_metric_values() {
        let sphere = Manifold::sphere(2, 1.0);
        let g = sphere.metric_at(&[FRAC_PI_3, 0.0]).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.0, max_relative = 1e-12);
        assert_relative_eq!(g[(1, 1)], 0.75, max_relative = 1e-12);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn flat_charts_are_exactly_flat() {
        for manifold in [Manifold::euclidean(3), Manifold::minkowski(3)] {
            let x = [0.3, -1.2, 2.0];
            let gamma = manifold.christoffel_at(&x).unwrap();
            for k in 0..3 {
                assert_eq!(gamma[k].norm(), 0.0);
            }
            let r = manifold
                .riemann_apply(
                    &x,
                    &DVector::from_column_slice(&[1.0, 0.0, 0.0]),
                    &DVector::from_column_slice(&[0.0, 1.0, 0.0]),
                    &DVector::from_column_slice(&[0.0, 0.0, 1.0]),
                )
                .unwrap();
            assert_eq!(r.norm(), 0.0);
        }
    }

    #[test]
    fn flat_chart_without_analytic_derivatives() {
        let flat = Manifold::new(
            2,
            Signature::Riemannian,
            Box::new(|_: &[f64]| DMatrix::identity(2, 2)),
            None,
            None,
        );
        let gamma = flat.christoffel_at(&[0.7, -0.4]).unwrap();
        for k in 0..2 {
            assert!(gamma[k].norm() < 1e-9);
        }
        let r = flat
            .riemann_apply(&[0.7, -0.4], &vec2(1.0, 0.0), &vec2(0.0, 1.0), &vec2(1.0, 1.0))
            .unwrap();
        assert!(r.norm() < 1e-9);
    }

    #[test]
    fn sphere_christoffel_values() {
        let sphere = Manifold::sphere(2, 1.0);
        let gamma = sphere.christoffel_at(&[FRAC_PI_3, 0.0]).unwrap();
        // Gamma^theta_phiphi = -sin cos, Gamma^phi_thetaphi = cot
        assert_relative_eq!(gamma[0][(1, 1)], -3f64.sqrt() / 4.0, max_relative = 1e-10);
        assert_relative_eq!(gamma[1][(0, 1)], 1.0 / 3f64.sqrt(), max_relative = 1e-10);
        assert_relative_eq!(gamma[1][(1, 0)], 1.0 / 3f64.sqrt(), max_relative = 1e-10);
        assert_eq!(gamma[0][(0, 0)], 0.0);
    }

    #[test]
    fn sphere_curvature_component() {
        let sphere = Manifold::sphere(2, 1.0);
        let r = sphere
            .riemann_apply(
                &[FRAC_PI_4, 0.3],
                &vec2(1.0, 0.0),
                &vec2(0.0, 1.0),
                &vec2(0.0, 1.0),
            )
            .unwrap();
        // R(d_theta, d_phi) d_phi = sin^2(theta) d_theta
        assert_relative_eq!(r[0], 0.5, max_relative = 1e-8);
        assert!(r[1].abs() < 1e-9);
    }

    #[test]
    fn sphere_tidal_sign_matches_oscillator() {
        // Along the equator with unit velocity d_phi, a unit normal field
        // d_theta must satisfy g(R(v, V)v, V) = -1: the Jacobi equation
        // reduces to y'' + y = 0.
        let sphere = Manifold::sphere(2, 1.0);
        let x = [FRAC_PI_2, 1.1];
        let v = vec2(0.0, 1.0);
        let w = vec2(1.0, 0.0);
        let r = sphere.riemann_apply(&x, &v, &w, &v).unwrap();
        let g = sphere.metric_at(&x).unwrap();
        let pairing = (r.transpose() * &g * &w)[(0, 0)];
        assert_relative_eq!(pairing, -1.0, max_relative = 1e-8);

        let t = sphere.tidal_operator(&x, &v).unwrap();
        assert_relative_eq!(t[(0, 0)], -1.0, max_relative = 1e-8);
    }

    #[test]
    fn metric_signature_guard() {
        let wrong = Manifold::new(
            2,
            Signature::Riemannian,
            Box::new(|_: &[f64]| DMatrix::from_diagonal(&vec2(1.0, -1.0))),
            None,
            None,
        );
        match wrong.metric_at(&[0.0, 0.0]) {
            Err(Error::SignatureMismatch { .. }) => {}
            other => panic!("expected SignatureMismatch, got {other:?}"),
        }
    }

    #[test]
    fn chart_domain_guard() {
        let sphere = Manifold::sphere(2, 1.0);
        match sphere.metric_at(&[-0.2, 0.0]) {
            Err(Error::DomainError { .. }) => {}
            other => panic!("expected DomainError, got {other:?}"),
        }
    }

    #[test]
    fn circle_second_fundamental_form_signs() {
        let plane = Manifold::euclidean(2);
        let circle = Submanifold::circle([0.0, 0.0], 1.0);
        let u = [0.0];
        let tangent = vec2(0.0, 1.0);
        let inward = vec2(-1.0, 0.0);
        let outward = vec2(1.0, 0.0);
        let s_in = circle
            .second_fundamental_form(&plane, &u, &inward, &tangent, &tangent)
            .unwrap();
        assert_relative_eq!(s_in, 1.0, max_relative = 1e-8);
        let s_out = circle
            .second_fundamental_form(&plane, &u, &outward, &tangent, &tangent)
            .unwrap();
        assert_relative_eq!(s_out, -1.0, max_relative = 1e-8);
    }

    #[test]
    fn sphere_shell_form_is_radius_scaled_gram() {
        // For a radius-rho sphere in Euclidean 3-space with outward normal,
        // S(v1, v2) = -(1/rho) g(v1, v2).
        let space = Manifold::euclidean(3);
        let rho = 2.5;
        let shell = Submanifold::new(
            3,
            2,
            Box::new(move |u: &[f64]| {
                in_sphere(rho, u)
            }),
            None,
        );
        let u = [0.9, 0.4];
        let basis = shell.tangent_basis(&u);
        let x = shell.point_at(&u);
        let outward = DVector::from_column_slice(&x) / rho;
        let v1 = basis.column(0).into_owned();
        let v2 = (basis.column(0) * 0.3 + basis.column(1) * 0.8).into_owned();
        let s = shell
            .second_fundamental_form(&space, &u, &outward, &v1, &v2)
            .unwrap();
        let g = space.metric_at(&x).unwrap();
        let pairing = (v1.transpose() * &g * &v2)[(0, 0)];
        assert_relative_eq!(s, -pairing / rho, max_relative = 1e-6);
    }

    fn in_sphere(rho: f64, u: &[f64]) -> Vec<f64> {
        vec![
            rho * u[0].sin() * u[1].cos(),
            rho * u[0].sin() * u[1].sin(),
            rho * u[0].cos(),
        ]
    }

    #[test]
    fn shape_operator_circle() {
        let plane = Manifold::euclidean(2);
        for rho in [1.0, 2.0, 0.5] {
            let circle = Submanifold::circle([0.0, 0.0], rho);
            let inward = vec2(-1.0, 0.0);
            let a = circle.shape_operator(&plane, &[0.0], &inward).unwrap();
            assert_relative_eq!(a[(0, 0)], 1.0 / rho, max_relative = 1e-8);
        }
    }

    #[test]
    fn shape_operator_null_tangent_is_degenerate() {
        // The diagonal x = t in Minkowski 2-space has a null tangent; the
        // induced metric vanishes and the shape operator is undefined.
        let minkowski = Manifold::minkowski(2);
        let diagonal = Submanifold::line(vec![0.0, 0.0], vec![1.0, 1.0]);
        let normal = vec2(1.0, 1.0);
        match diagonal.shape_operator(&minkowski, &[0.0], &normal) {
            Err(Error::DegenerateTangentMetric { .. }) => {}
            other => panic!("expected DegenerateTangentMetric, got {other:?}"),
        }
    }

    #[test]
    fn normality_and_tangency_guards() {
        let plane = Manifold::euclidean(2);
        let circle = Submanifold::circle([0.0, 0.0], 1.0);
        let tangent = vec2(0.0, 1.0);
        match circle.second_fundamental_form(&plane, &[0.0], &tangent, &tangent, &tangent) {
            Err(Error::NotNormal { .. }) => {}
            other => panic!("expected NotNormal, got {other:?}"),
        }
        let normal = vec2(1.0, 0.0);
        match circle.second_fundamental_form(&plane, &[0.0], &normal, &normal, &normal) {
            Err(Error::NotTangent { .. }) => {}
            other => panic!("expected NotTangent, got {other:?}"),
        }
    }

    #[test]
    fn point_submanifold_is_rigid() {
        let point = Submanifold::point(vec![1.0, 2.0]);
        assert_eq!(point.dim(), 0);
        assert_eq!(point.point_at(&[]), vec![1.0, 2.0]);
        assert_eq!(point.tangent_basis(&[]).ncols(), 0);
        let plane = Manifold::euclidean(2);
        let w = point
            .weingarten_apply(&plane, &[], &vec2(1.0, 0.0), &vec2(0.0, 0.0))
            .unwrap();
        assert_eq!(w.norm(), 0.0);
    }

    #[test]
    fn curvature_is_antisymmetric_in_first_pair() {
        let sphere = Manifold::sphere(2, 1.0);
        let x = [1.0, 0.5];
        let a = vec2(0.4, -0.7);
        let b = vec2(1.1, 0.2);
        let z = vec2(-0.3, 0.9);
        let r1 = sphere.riemann_apply(&x, &a, &b, &z).unwrap();
        let r2 = sphere.riemann_apply(&x, &b, &a, &z).unwrap();
        assert!((r1 + r2).norm() < 1e-12);
    }

    #[test]
    fn sphere_three_dimensional_unit_curvature() {
        // S^3 has constant curvature: R(u, v)u = -v for orthonormal u, v.
        let s3 = Manifold::sphere(3, 1.0);
        let x = [FRAC_PI_2, FRAC_PI_2, 0.3];
        let u = DVector::from_column_slice(&[0.0, 0.0, 1.0]);
        for v in [
            DVector::from_column_slice(&[1.0, 0.0, 0.0]),
            DVector::from_column_slice(&[0.0, 1.0, 0.0]),
        ] {
            let t = s3.tidal_operator(&x, &u).unwrap();
            let tv = t * &v;
            assert_relative_eq!(tv.dot(&v), -1.0, max_relative = 1e-7);
        }
    }

    #[test]
    fn chart_margin_excludes_poles() {
        let sphere = Manifold::sphere(2, 1.0);
        assert!(sphere.chart_contains(&[PI / 2.0, 100.0]));
        assert!(!sphere.chart_contains(&[0.0, 0.0]));
        assert!(!sphere.chart_contains(&[PI, 0.0]));
    }
}
