//! Config file schema and construction of the library objects it describes.
//!
//! Validation is staged: JSON shape first, then expression parsing and
//! variable checks, then dimensional consistency, and only then the
//! geometric preconditions (chart membership, submanifold contact,
//! initial-velocity normality).  Shape and consistency problems are
//! reported as config errors; geometric violations carry the library
//! error codes so they map to the precondition exit code.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use geomorse::geometry::{EmbeddingFn, JacobianFn, MetricDerivFn, MetricFn, MetricSecondDerivFn};
use geomorse::{
    integrate_geodesic, Error, Geodesic, Manifold, Signature, Submanifold, INERTIA_TOL_DEFAULT,
    RANK_TOL_DEFAULT,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::expr::{self, Expr};
use crate::CliError;

/// Largest allowed distance between a declared contact point and the
/// geodesic endpoint, relative to the endpoint scale.
pub const CONTACT_TOL: f64 = 1e-8;
/// Largest allowed pairing between the geodesic velocity and a tangent
/// vector of the submanifold it starts on, relative to the vector scales.
pub const NORMAL_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub manifold: ManifoldSpec,
    pub start: SubmanifoldSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<SubmanifoldSpec>,
    pub geodesic: GeodesicSpec,
    #[serde(default, skip_serializing_if = "Tolerances::is_default")]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldSpec {
    Builtin(BuiltinSpec),
    Custom(CustomSpec),
}

impl ManifoldSpec {
    pub fn dim(&self) -> usize {
        match self {
            ManifoldSpec::Builtin(b) => b.dim,
            ManifoldSpec::Custom(c) => c.dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinSpec {
    pub name: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSpec {
    pub dim: usize,
    pub signature: SignatureSpec,
    /// Row-major square matrix of expressions over the coordinates
    /// `x0..x{dim-1}`.
    pub metric: Vec<Vec<String>>,
    /// Per-coordinate bounds; `null` leaves a side unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<Vec<[Option<f64>; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignatureSpec {
    Riemannian,
    Lorentzian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmanifoldSpec {
    Point(PointSpec),
    Embedding(EmbeddingSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub coordinates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSpec {
    /// One expression per ambient coordinate, over the parameters
    /// `u0..u{k-1}` where `k` is the number of ranges.
    pub expressions: Vec<String>,
    pub ranges: Vec<[f64; 2]>,
    /// Parameter values of the point the geodesic meets.
    pub at: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    pub p0: Vec<f64>,
    pub v0: Vec<f64>,
    pub interval: [f64; 2],
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
}

impl Tolerances {
    fn is_default(&self) -> bool {
        self.rank.is_none() && self.inertia.is_none()
    }
}

/// Command line values that take precedence over the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub steps: Option<usize>,
    pub tol_rank: Option<f64>,
    pub tol_inertia: Option<f64>,
}

/// Fully validated library objects ready for a command.
pub struct Setup {
    pub manifold: Arc<Manifold>,
    pub geodesic: Geodesic,
    pub start: Submanifold,
    pub start_at: Vec<f64>,
    pub target: Option<(Submanifold, Vec<f64>)>,
    pub tol_rank: f64,
    pub tol_inertia: f64,
}

impl Setup {
    pub fn start_ref(&self) -> (&Submanifold, &[f64]) {
        (&self.start, self.start_at.as_slice())
    }

    pub fn target_ref(&self) -> Option<(&Submanifold, &[f64])> {
        self.target.as_ref().map(|(s, u)| (s, u.as_slice()))
    }
}

/// Reads and deserializes a config file.
pub fn load(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

impl Config {
    pub fn build(&self, overrides: &Overrides) -> Result<Setup, CliError> {
        let m = self.manifold.dim();
        let g = &self.geodesic;
        check_vector("geodesic.p0", &g.p0, m)?;
        check_vector("geodesic.v0", &g.v0, m)?;
        if !g.interval.iter().all(|v| v.is_finite()) || g.interval[0] >= g.interval[1] {
            return Err(CliError::config(format!(
                "geodesic.interval [{}, {}] must be finite and increasing",
                g.interval[0], g.interval[1]
            )));
        }

        let manifold = Arc::new(build_manifold(&self.manifold, &g.p0)?);
        if !manifold.chart_contains(&g.p0) {
            return Err(CliError::config(
                "geodesic.p0 lies outside the chart of the manifold".to_string(),
            ));
        }

        let (start, start_at) = build_submanifold(&self.start, m, "start")?;
        check_contact(&start, &start_at, &g.p0, "start")?;
        check_normal(&manifold, &start, &start_at, &g.p0, &g.v0)?;

        let steps = overrides.steps.unwrap_or(g.steps);
        let geodesic = integrate_geodesic(
            manifold.clone(),
            &g.p0,
            &g.v0,
            (g.interval[0], g.interval[1]),
            steps,
        )?;

        let target = match &self.target {
            None => None,
            Some(spec) => {
                let (sub, at) = build_submanifold(spec, m, "target")?;
                let end = geodesic.position(geodesic.steps()).clone_owned();
                check_contact(&sub, &at, end.as_slice(), "target")?;
                let v_end = geodesic.velocity(geodesic.steps()).clone_owned();
                check_normal(&manifold, &sub, &at, end.as_slice(), v_end.as_slice())?;
                Some((sub, at))
            }
        };

        let tol_rank = overrides
            .tol_rank
            .or(self.tolerances.rank)
            .unwrap_or(RANK_TOL_DEFAULT);
        let tol_inertia = overrides
            .tol_inertia
            .or(self.tolerances.inertia)
            .unwrap_or(INERTIA_TOL_DEFAULT);
        for (name, value) in [("rank", tol_rank), ("inertia", tol_inertia)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(CliError::config(format!(
                    "{name} tolerance must be a positive finite number, got {value}"
                )));
            }
        }

        Ok(Setup {
            manifold,
            geodesic,
            start,
            start_at,
            target,
            tol_rank,
            tol_inertia,
        })
    }
}

fn check_vector(name: &str, values: &[f64], dim: usize) -> Result<(), CliError> {
    if values.len() != dim {
        return Err(CliError::config(format!(
            "{name} has {} entries, the manifold has dimension {dim}",
            values.len()
        )));
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(CliError::config(format!("{name} has a non-finite entry")));
    }
    Ok(())
}

fn build_manifold(spec: &ManifoldSpec, p0: &[f64]) -> Result<Manifold, CliError> {
    match spec {
        ManifoldSpec::Builtin(b) => build_builtin(b),
        ManifoldSpec::Custom(c) => build_custom(c, p0),
    }
}

fn build_builtin(spec: &BuiltinSpec) -> Result<Manifold, CliError> {
    let no_radius = |name: &str| -> Result<(), CliError> {
        if spec.radius.is_some() {
            Err(CliError::config(format!(
                "radius only applies to the sphere builtin, not `{name}`"
            )))
        } else {
            Ok(())
        }
    };
    match spec.name.as_str() {
        "euclidean" => {
            no_radius("euclidean")?;
            if spec.dim == 0 {
                return Err(CliError::config("euclidean dimension must be positive"));
            }
            Ok(Manifold::euclidean(spec.dim))
        }
        "minkowski" => {
            no_radius("minkowski")?;
            if spec.dim < 2 {
                return Err(CliError::config(
                    "minkowski needs at least one space and one time dimension",
                ));
            }
            Ok(Manifold::minkowski(spec.dim))
        }
        "sphere" => {
            if !(2..=3).contains(&spec.dim) {
                return Err(CliError::config(format!(
                    "the sphere chart supports dimension 2 or 3, got {}",
                    spec.dim
                )));
            }
            let radius = spec.radius.unwrap_or(1.0);
            if !(radius.is_finite() && radius > 0.0) {
                return Err(CliError::config(format!(
                    "sphere radius must be a positive finite number, got {radius}"
                )));
            }
            Ok(Manifold::sphere(spec.dim, radius))
        }
        other => Err(CliError::config(format!(
            "unknown builtin manifold `{other}` (expected euclidean, minkowski or sphere)"
        ))),
    }
}

fn coordinate_lookup<'a>(x: &'a [f64]) -> impl Fn(&str) -> f64 + 'a {
    // Variable names are validated to be `x<k>` or `u<k>` with `k` in range
    // before any closure built here runs.
    move |name: &str| x[name[1..].parse::<usize>().expect("validated variable name")]
}

fn eval_table(table: &[Vec<Expr>], m: usize, x: &[f64]) -> DMatrix<f64> {
    let lookup = coordinate_lookup(x);
    DMatrix::from_fn(m, m, |i, j| table[i][j].eval(&lookup))
}

fn parse_entry(text: &str, what: &str, names: &BTreeSet<String>) -> Result<Expr, CliError> {
    let ast = expr::parse(text).map_err(|e| CliError::config(format!("{what}: {e}")))?;
    let mut used = BTreeSet::new();
    ast.variables(&mut used);
    for v in used.difference(names) {
        let allowed: Vec<&str> = names.iter().map(String::as_str).collect();
        return Err(CliError::config(format!(
            "{what} uses unknown variable `{v}` (allowed: {})",
            allowed.join(", ")
        )));
    }
    Ok(ast)
}

fn build_custom(spec: &CustomSpec, p0: &[f64]) -> Result<Manifold, CliError> {
    let m = spec.dim;
    if m == 0 {
        return Err(CliError::config("custom manifold dimension must be positive"));
    }
    if spec.metric.len() != m || spec.metric.iter().any(|row| row.len() != m) {
        return Err(CliError::config(format!(
            "metric must be a {m}x{m} array of expressions"
        )));
    }
    let names: BTreeSet<String> = (0..m).map(|i| format!("x{i}")).collect();
    let mut entries: Vec<Vec<Expr>> = Vec::with_capacity(m);
    for (i, row) in spec.metric.iter().enumerate() {
        let mut parsed = Vec::with_capacity(m);
        for (j, text) in row.iter().enumerate() {
            parsed.push(parse_entry(text, &format!("metric[{i}][{j}]"), &names)?);
        }
        entries.push(parsed);
    }

    for i in 0..m {
        for j in 0..m {
            let gij = entries[i][j].eval(&coordinate_lookup(p0));
            if !gij.is_finite() {
                return Err(CliError::config(format!(
                    "metric[{i}][{j}] is not finite at geodesic.p0"
                )));
            }
            let gji = entries[j][i].eval(&coordinate_lookup(p0));
            if (gij - gji).abs() > SYMMETRY_TOL * gij.abs().max(1.0) {
                return Err(CliError::config(format!(
                    "metric is not symmetric at geodesic.p0: [{i}][{j}] = {gij} but [{j}][{i}] = {gji}"
                )));
            }
        }
    }

    let chart = match &spec.chart {
        None => None,
        Some(rows) => {
            if rows.len() != m {
                return Err(CliError::config(format!(
                    "chart must list bounds for all {m} coordinates"
                )));
            }
            let mut bounds = Vec::with_capacity(m);
            for (i, [lo, hi]) in rows.iter().enumerate() {
                let lo = lo.unwrap_or(f64::NEG_INFINITY);
                let hi = hi.unwrap_or(f64::INFINITY);
                if lo >= hi {
                    return Err(CliError::config(format!(
                        "chart[{i}] bounds [{lo}, {hi}] must be increasing"
                    )));
                }
                bounds.push((lo, hi));
            }
            Some(bounds)
        }
    };

    let first: Vec<Vec<Vec<Expr>>> = (0..m)
        .map(|k| {
            let var = format!("x{k}");
            entries
                .iter()
                .map(|row| row.iter().map(|e| e.derivative(&var)).collect())
                .collect()
        })
        .collect();
    let second: Vec<Vec<Vec<Expr>>> = (0..m * m)
        .map(|ab| {
            let var = format!("x{}", ab % m);
            first[ab / m]
                .iter()
                .map(|row: &Vec<Expr>| row.iter().map(|e| e.derivative(&var)).collect())
                .collect()
        })
        .collect();

    let metric_entries = entries;
    let metric: MetricFn = Box::new(move |x: &[f64]| eval_table(&metric_entries, m, x));
    let derivs: MetricDerivFn =
        Box::new(move |x: &[f64]| first.iter().map(|t| eval_table(t, m, x)).collect());
    let seconds: MetricSecondDerivFn =
        Box::new(move |x: &[f64]| second.iter().map(|t| eval_table(t, m, x)).collect());

    let signature = match spec.signature {
        SignatureSpec::Riemannian => Signature::Riemannian,
        SignatureSpec::Lorentzian => Signature::Lorentzian,
    };
    Ok(Manifold::new(m, signature, metric, Some(derivs), chart).with_second_derivatives(seconds))
}

fn build_submanifold(
    spec: &SubmanifoldSpec,
    ambient: usize,
    which: &str,
) -> Result<(Submanifold, Vec<f64>), CliError> {
    match spec {
        SubmanifoldSpec::Point(p) => {
            check_vector(&format!("{which}.coordinates"), &p.coordinates, ambient)?;
            Ok((Submanifold::point(p.coordinates.clone()), Vec::new()))
        }
        SubmanifoldSpec::Embedding(e) => {
            let k = e.ranges.len();
            if k == 0 {
                return Err(CliError::config(format!(
                    "{which}: an embedding needs at least one parameter range"
                )));
            }
            if k >= ambient {
                return Err(CliError::config(format!(
                    "{which}: {k} parameters do not leave positive codimension in dimension {ambient}"
                )));
            }
            if e.expressions.len() != ambient {
                return Err(CliError::config(format!(
                    "{which}: expected {ambient} embedding expressions, got {}",
                    e.expressions.len()
                )));
            }
            if e.at.len() != k {
                return Err(CliError::config(format!(
                    "{which}.at has {} entries, expected {k}",
                    e.at.len()
                )));
            }
            for (i, [lo, hi]) in e.ranges.iter().enumerate() {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(CliError::config(format!(
                        "{which}.ranges[{i}] = [{lo}, {hi}] must be finite and increasing"
                    )));
                }
                if !(e.at[i] >= *lo && e.at[i] <= *hi) {
                    return Err(CliError::config(format!(
                        "{which}.at[{i}] = {} falls outside [{lo}, {hi}]",
                        e.at[i]
                    )));
                }
            }

            let names: BTreeSet<String> = (0..k).map(|i| format!("u{i}")).collect();
            let mut exprs = Vec::with_capacity(ambient);
            for (i, text) in e.expressions.iter().enumerate() {
                exprs.push(parse_entry(
                    text,
                    &format!("{which}.expressions[{i}]"),
                    &names,
                )?);
            }
            let jac: Vec<Vec<Expr>> = exprs
                .iter()
                .map(|ex| (0..k).map(|j| ex.derivative(&format!("u{j}"))).collect())
                .collect();

            let emb_exprs = exprs;
            let embedding: EmbeddingFn = Box::new(move |u: &[f64]| {
                let lookup = coordinate_lookup(u);
                emb_exprs.iter().map(|ex| ex.eval(&lookup)).collect()
            });
            let jacobian: JacobianFn = Box::new(move |u: &[f64]| {
                let lookup = coordinate_lookup(u);
                DMatrix::from_fn(ambient, k, |i, j| jac[i][j].eval(&lookup))
            });
            Ok((
                Submanifold::new(ambient, k, embedding, Some(jacobian)),
                e.at.clone(),
            ))
        }
    }
}

fn check_contact(
    sub: &Submanifold,
    at: &[f64],
    point: &[f64],
    which: &str,
) -> Result<(), CliError> {
    let embedded = sub.point_at(at);
    if !embedded.iter().all(|v| v.is_finite()) {
        return Err(CliError::config(format!(
            "{which} embedding is not finite at the contact parameters"
        )));
    }
    let gap: f64 = embedded
        .iter()
        .zip(point)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale = point.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    if gap > CONTACT_TOL * scale {
        return Err(CliError::config(format!(
            "{which} submanifold misses the geodesic endpoint by {gap:.3e}"
        )));
    }
    Ok(())
}

/// The geodesic must meet the submanifold orthogonally; a violation is a
/// precondition failure, not a config shape problem.
fn check_normal(
    manifold: &Manifold,
    sub: &Submanifold,
    at: &[f64],
    point: &[f64],
    velocity: &[f64],
) -> Result<(), CliError> {
    if sub.dim() == 0 {
        return Ok(());
    }
    let g = manifold.metric_at(point)?;
    let tangent = sub.tangent_basis(at);
    let v = DVector::from_column_slice(velocity);
    let gv = &g * &v;
    for j in 0..sub.dim() {
        let tau = tangent.column(j);
        let pairing = tau.dot(&gv);
        let scale = (tau.norm() * gv.norm()).max(1.0);
        if pairing.abs() > NORMAL_TOL * scale {
            return Err(CliError::Lib(Error::NotNormal {
                vector: velocity.to_vec(),
                residual: pairing.abs(),
            }));
        }
    }
    Ok(())
}
