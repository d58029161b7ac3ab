use serde::Serialize;

use crate::error::{MorError, Result};

/// Least concave majorant of a finite point set: the upper hull, linear
/// between knots and extended with the end slopes outside them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcaveMajorant {
    knots: Vec<(f64, f64)>,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

impl ConcaveMajorant {
    pub fn fit(points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(MorError::Parameter("concave majorant of no points".into()));
        }
        if points.iter().any(|(t, r)| !t.is_finite() || !r.is_finite()) {
            return Err(MorError::Parameter("non-finite regret sample".into()));
        }
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        pts.dedup_by(|b, a| a.0 == b.0);
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for p in pts {
            while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) >= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        Ok(ConcaveMajorant { knots: hull })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        if k.len() == 1 {
            return k[0].1;
        }
        let seg = if t <= k[0].0 {
            0
        } else if t >= k[k.len() - 1].0 {
            k.len() - 2
        } else {
            k.windows(2).position(|w| t <= w[1].0).expect("t is inside the knot range")
        };
        let (a, b) = (k[seg], k[seg + 1]);
        a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
    }
}
