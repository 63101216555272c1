use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsl::LagrangianSpec;
use crate::error::{Error, Result};
use crate::geometry::{BasePoint, PointGeometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub count: usize,
    pub seed: u64,
    /// Per-coordinate `[lo, hi]` box for `x`; a single pair is broadcast.
    pub x_box: Vec<[f64; 2]>,
    /// Shell `[r_min, r_max]` for `|y|`.
    pub y_shell: [f64; 2],
    /// Reject points whose metric is degenerate.
    pub reject_degenerate: bool,
    /// Draw budget as a multiple of `count`.
    pub max_attempts_factor: usize,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy {
            count: 50,
            seed: 0,
            x_box: vec![[-1.0, 1.0]],
            y_shell: [0.5, 2.0],
            reject_degenerate: true,
            max_attempts_factor: 20,
        }
    }
}

impl SamplingPolicy {
    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_x_box(mut self, x_box: Vec<[f64; 2]>) -> Self {
        self.x_box = x_box;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidInput("sample count must be at least 1".into()));
        }
        if self.x_box.len() != 1 && self.x_box.len() != n {
            return Err(Error::InvalidInput(format!(
                "x box has {} intervals for dimension {n}",
                self.x_box.len()
            )));
        }
        if self
            .x_box
            .iter()
            .any(|[lo, hi]| !(lo <= hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::InvalidInput(
                "x box intervals must be finite with lo ≤ hi".into(),
            ));
        }
        let [r0, r1] = self.y_shell;
        if !(r0 > 0.0 && r0 <= r1 && r1.is_finite()) {
            return Err(Error::InvalidInput("y shell needs 0 < r_min ≤ r_max".into()));
        }
        Ok(())
    }
}

/// Sample points of the slit tangent bundle accepted by a Lagrangian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub points: Vec<BasePoint>,
    pub policy: Option<SamplingPolicy>,
    /// Draws rejected by the guard or a degenerate metric.
    pub rejected: usize,
    pub attempts: usize,
}

impl SampleSet {
    /// Draws points until `policy.count` are accepted or the attempt budget
    /// runs out. Fewer points than requested is not an error; callers
    /// decide via [`SampleSet::rejection_rate`].
    pub fn generate(spec: &LagrangianSpec, policy: &SamplingPolicy) -> Result<Self> {
        let n = spec.n;
        policy.validate(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
        let budget = policy.count.saturating_mul(policy.max_attempts_factor.max(1));
        let mut points = Vec::with_capacity(policy.count);
        let mut rejected = 0;
        let mut attempts = 0;
        while points.len() < policy.count && attempts < budget {
            attempts += 1;
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    let [lo, hi] = policy.x_box[if policy.x_box.len() == 1 { 0 } else { i }];
                    if lo == hi {
                        lo
                    } else {
                        rng.random_range(lo..hi)
                    }
                })
                .collect();
            let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let [r0, r1] = policy.y_shell;
            let r = if r0 == r1 { r0 } else { rng.random_range(r0..r1) };
            if norm < 1e-12 {
                rejected += 1;
                continue;
            }
            let y = dir.iter().map(|v| v * r / norm).collect();
            let p = BasePoint::new(x, y)?;
            if accept(spec, &p, policy.reject_degenerate) {
                points.push(p);
            } else {
                rejected += 1;
            }
        }
        Ok(SampleSet {
            points,
            policy: Some(policy.clone()),
            rejected,
            attempts,
        })
    }

    /// Wraps explicit points, dropping those the Lagrangian rejects.
    pub fn from_points(spec: &LagrangianSpec, points: Vec<BasePoint>, reject_degenerate: bool) -> Self {
        let attempts = points.len();
        let kept: Vec<BasePoint> = points
            .into_iter()
            .filter(|p| p.n() == spec.n && accept(spec, p, reject_degenerate))
            .collect();
        SampleSet {
            rejected: attempts - kept.len(),
            points: kept,
            policy: None,
            attempts,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rejected draws over all draws.
    pub fn rejection_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.rejected as f64 / self.attempts as f64
        }
    }

    /// The first `k` points.
    pub fn truncated(&self, k: usize) -> SampleSet {
        SampleSet {
            points: self.points.iter().take(k).cloned().collect(),
            ..self.clone()
        }
    }
}

fn accept(spec: &LagrangianSpec, p: &BasePoint, reject_degenerate: bool) -> bool {
    if !spec.guard_holds(p) {
        return false;
    }
    match PointGeometry::new(spec, p, 2) {
        Ok(geo) => !(reject_degenerate && geo.is_degenerate()),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::BuiltinFamily;

    #[test]
    fn deterministic_and_in_shell() {
        let spec = BuiltinFamily::randers_rotational(2, 0.3).build().unwrap();
        let pol = SamplingPolicy::default().with_seed(7);
        let a = SampleSet::generate(&spec, &pol).unwrap();
        let b = SampleSet::generate(&spec, &pol).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        for p in &a.points {
            let r = p.y.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((0.5..=2.0).contains(&r));
            assert!(p.x.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn guard_rejections_are_counted() {
        let spec = LagrangianSpec::parse("0.5*(y1^2 + y2^2)", 2)
            .unwrap()
            .with_guard(crate::dsl::parse("x1", 2).unwrap());
        let pol = SamplingPolicy::default().with_seed(1).with_count(20);
        let s = SampleSet::generate(&spec, &pol).unwrap();
        assert_eq!(s.len(), 20);
        assert!(s.rejected > 0);
        assert!(s.points.iter().all(|p| p.x[0] > 0.0));
    }

    #[test]
    fn degenerate_metric_rejected() {
        let spec = LagrangianSpec::parse("0.5*y1^2", 2).unwrap();
        let pol = SamplingPolicy::default().with_count(5).with_seed(3);
        let s = SampleSet::generate(&spec, &pol).unwrap();
        assert!(s.is_empty());
        assert!(s.rejection_rate() > 0.99);
    }
}
