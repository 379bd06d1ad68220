//! Partitions of a geodesic into subintervals that are short enough for
//! the piecewise-Jacobi reduction: no conjugate pair inside any interior
//! subinterval and no focal point at or before the first cut.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geodesic::Geodesic;
use crate::jacobi::{jacobi_propagate, FocalPoint, COND_LIMIT};

const START_INTERVALS: usize = 16;
const MAX_INTERVALS: usize = 4096;
/// Probe points per subinterval when certifying nonsingular boundary maps.
const VERIFY_POINTS: usize = 8;

/// A certified partition `a = t_0 < t_1 < ... < t_N = b`.
#[derive(Clone, Debug)]
pub struct NormalPartition {
    points: Vec<f64>,
    certified: bool,
}

impl NormalPartition {
    /// Certify a caller-supplied partition. Fails with the reason if either
    /// condition is violated.
    pub fn verify(geo: &Geodesic, focal: &[FocalPoint], points: Vec<f64>) -> Result<Self> {
        let (a, b) = geo.interval();
        let span = b - a;
        if points.len() < 2
            || (points[0] - a).abs() > 1e-9 * span
            || (points[points.len() - 1] - b).abs() > 1e-9 * span
        {
            return Err(Error::InvalidInput(
                "partition must run from the start to the end of the geodesic".into(),
            ));
        }
        for w in points.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidInput(
                    "partition points must be strictly increasing".into(),
                ));
            }
        }
        match check_partition(geo, focal, &points)? {
            None => Ok(NormalPartition {
                points,
                certified: true,
            }),
            Some(reason) => Err(Error::InvalidInput(format!(
                "partition is not normal: {reason}"
            ))),
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Interior points `t_1 .. t_{N-1}`.
    pub fn interior(&self) -> &[f64] {
        &self.points[1..self.points.len() - 1]
    }

    pub fn interval_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_certified(&self) -> bool {
        self.certified
    }

    pub fn max_spacing(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

fn jk_block(phi: &DMatrix<f64>) -> DMatrix<f64> {
    let m = phi.nrows() / 2;
    phi.view((0, m), (m, m)).clone_owned()
}

/// Returns `None` when the partition satisfies both conditions, otherwise a
/// description of the first violation found.
fn check_partition(geo: &Geodesic, focal: &[FocalPoint], points: &[f64]) -> Result<Option<String>> {
    let (a, b) = geo.interval();
    let span = b - a;
    let t1 = points[1];
    for f in focal {
        if f.t <= t1 + 1e-9 * span {
            return Ok(Some(format!(
                "focal point at t = {:.6} does not precede the first cut t_1 = {:.6}",
                f.t, t1
            )));
        }
    }
    for i in 1..points.len() - 1 {
        let (s, u) = (points[i], points[i + 1]);
        let sub_span = u - s;
        let mut previous_sign = 0.0;
        for k in 1..=VERIFY_POINTS {
            let t = if k == VERIFY_POINTS {
                u
            } else {
                s + sub_span * k as f64 / VERIFY_POINTS as f64
            };
            let phi = jacobi_propagate(geo, s, t)?;
            let block = jk_block(&phi);
            let svd = block.clone().svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            let cond = smax / smin;
            if !cond.is_finite() || cond > COND_LIMIT {
                return Ok(Some(format!(
                    "boundary map on [{s:.6}, {t:.6}] is singular (cond {cond:.3e})"
                )));
            }
            let det = block.determinant();
            if previous_sign != 0.0 && det.signum() != previous_sign {
                return Ok(Some(format!(
                    "boundary map determinant changes sign inside [{s:.6}, {u:.6}]"
                )));
            }
            previous_sign = det.signum();
        }
    }
    Ok(None)
}

fn uniform_points(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / n as f64;
    let mut points: Vec<f64> = (0..n).map(|k| a + h * k as f64).collect();
    points.push(b);
    points
}

/// Find a certified partition by uniform refinement, starting from 16
/// subintervals and doubling until certification succeeds.
pub fn normal_partition(geo: &Geodesic, focal: &[FocalPoint]) -> Result<NormalPartition> {
    let (a, b) = geo.interval();
    let mut n = START_INTERVALS;
    let mut last_reason = String::new();
    while n <= MAX_INTERVALS {
        let points = uniform_points(a, b, n);
        match check_partition(geo, focal, &points)? {
            None => {
                return Ok(NormalPartition {
                    points,
                    certified: true,
                })
            }
            Some(reason) => last_reason = reason,
        }
        n *= 2;
    }
    Err(Error::PartitionFailure {
        max_intervals: MAX_INTERVALS,
        detail: last_reason,
    })
}
