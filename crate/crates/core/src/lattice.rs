//! Brute-force reference for `g(s)`: the exact shortest path on a lattice of
//! `(gamma, beta)` states with a bounded number of straight hops.
//!
//! Slow and coarse on purpose. It shares no code with the profile
//! optimizer beyond the model functions, so agreement between the two is a
//! meaningful check.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelSpec;

#[derive(Debug, Clone, Copy)]
pub struct LatticeSettings {
    pub x_steps: usize,
    pub gamma_levels: usize,
    pub beta_levels: usize,
}

impl Default for LatticeSettings {
    fn default() -> Self {
        LatticeSettings {
            x_steps: 64,
            gamma_levels: 64,
            beta_levels: 64,
        }
    }
}

/// Shortest path from `(0, 1)` to `(s, 1)` with at most `x_steps` hops
/// between lattice points, `gamma` non-decreasing. Each hop costs
/// `sqrt(A dgamma^2 + B dbeta^2)` with the metric at the hop midpoint.
pub fn lattice_g(model: &ModelSpec, s: f64, settings: &LatticeSettings) -> Result<f64> {
    let LatticeSettings {
        x_steps,
        gamma_levels: ng,
        beta_levels: nb,
    } = *settings;
    if ng < 2 || nb < 2 || x_steps == 0 {
        return Err(Error::Precondition("lattice needs at least two levels per axis".into()));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let phi1 = model.require_phi_prime0()?;
    let dgam = s / (ng - 1) as f64;
    let dbeta = 1.0 / (nb - 1) as f64;

    // metric at the 2 nb - 1 possible midpoints
    let mids: Vec<(f64, f64)> = (0..2 * nb - 1)
        .map(|m| {
            let beta = 0.5 * m as f64 * dbeta;
            let u = (1.0 - beta).max(crate::cohesive::BETA_CLAMP);
            let fh = model.fhat.eval(beta);
            let q = model.q.eval(u);
            let d = model.dpot.eval(u);
            let a = if q > 0.0 { phi1 * fh * d / q } else { f64::INFINITY };
            let b = model.dpot.eval((1.0 - beta).max(0.0)).max(0.0);
            (a, b)
        })
        .collect();
    // cost[(dj * nb + k) * nb + k2]
    let mut cost = vec![0.0; ng * nb * nb];
    for dj in 0..ng {
        let dg = dj as f64 * dgam;
        for k in 0..nb {
            for k2 in 0..nb {
                let (a, b) = mids[k + k2];
                let db = (k2 as f64 - k as f64) * dbeta;
                let ga = if dj == 0 { 0.0 } else { a * dg * dg };
                cost[(dj * nb + k) * nb + k2] = (ga + b * db * db).sqrt();
            }
        }
    }

    let mut dist = vec![f64::INFINITY; ng * nb];
    dist[nb - 1] = 0.0;
    for _ in 0..x_steps {
        let next: Vec<f64> = (0..ng * nb)
            .into_par_iter()
            .map(|target| {
                let (j2, k2) = (target / nb, target % nb);
                let mut best = f64::INFINITY;
                for j in 0..=j2 {
                    let row = &dist[j * nb..(j + 1) * nb];
                    let base = (j2 - j) * nb * nb;
                    for (k, &d0) in row.iter().enumerate() {
                        let c = d0 + cost[base + k * nb + k2];
                        if c < best {
                            best = c;
                        }
                    }
                }
                best
            })
            .collect();
        dist = next;
    }
    Ok(dist[(ng - 1) * nb + nb - 1])
}
