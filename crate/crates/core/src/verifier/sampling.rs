use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cone::{AmbientPoint, ConeParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleRegion {
    /// Strictly inside `Ω'_λ`, with vertical room `t - λρ ≥ 0.05ρ`.
    Interior,
    /// Interior points with `x₁ = 0`.
    AxisHyperplane,
    /// Points of `S'_λ`, `t = λ|x|`.
    Surface,
}

/// Reproducible sampling of `(log ρ, θ, x'/|x'|)`, uniform in each factor,
/// over `ρ ∈ [rho_min, rho_max]` and `r ≥ r_min_frac · ρ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplePlan {
    pub cone: ConeParams,
    pub region: SampleRegion,
    pub rho_min: f64,
    pub rho_max: f64,
    pub r_min_frac: f64,
    pub count: usize,
    pub seed: u64,
}

impl SamplePlan {
    pub fn new(cone: ConeParams, region: SampleRegion, count: usize, seed: u64) -> Self {
        Self {
            cone,
            region,
            rho_min: 0.1,
            rho_max: 10.0,
            r_min_frac: 1e-3,
            count,
            seed,
        }
    }

    pub fn radii(mut self, rho_min: f64, rho_max: f64) -> Self {
        self.rho_min = rho_min;
        self.rho_max = rho_max;
        self
    }

    pub fn axis_clearance(mut self, frac: f64) -> Self {
        self.r_min_frac = frac;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.rho_min > 0.0 && self.rho_min <= self.rho_max && self.rho_max.is_finite()) {
            return bad(format!("radial bounds [{}, {}]", self.rho_min, self.rho_max));
        }
        if !(self.r_min_frac > 0.0 && self.r_min_frac < 1.0) {
            return bad(format!("axis clearance fraction {}", self.r_min_frac));
        }
        if self.count == 0 {
            return bad("sample count must be at least 1".into());
        }
        Ok(())
    }

    pub fn points(&self) -> Result<Vec<AmbientPoint>> {
        self.validate()?;
        let n = self.cone.n();
        let lam = self.cone.lambda();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (la, lb) = (self.rho_min.ln(), self.rho_max.ln());
        let theta_max = self.r_min_frac.acos();
        let mut out = Vec::with_capacity(self.count);
        for _ in 0..self.count {
            let rho = if la < lb { rng.random_range(la..lb).exp() } else { self.rho_min };
            let theta = match self.region {
                SampleRegion::AxisHyperplane => 0.0,
                _ => rng.random_range(-theta_max..=theta_max),
            };
            let dir = unit_direction(&mut rng, n - 1);
            let mut x = Vec::with_capacity(n);
            x.push(rho * theta.sin());
            let r = rho * theta.cos();
            x.extend(dir.iter().map(|d| r * d));
            let rho_x = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let t = match self.region {
                SampleRegion::Surface => lam * rho_x,
                _ => rho_x * (lam + rng.random_range(0.05..=1.0)),
            };
            out.push(AmbientPoint::new(x, t));
        }
        Ok(out)
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let nrm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nrm > 1e-12 {
            return v.into_iter().map(|a| a / nrm).collect();
        }
    }
}
