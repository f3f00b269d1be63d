use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{stieltjes_density, CompactResolvent};
use crate::error::{Error, Result};

/// Energies distributed like the trace measure: quantiles of its smoothing
/// at width `eta`, each then walked uphill on `Im calM(E + i eps)` while
/// `eps` halves down to `eps_min`. Returned in ascending order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureGrid {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
    pub eta: f64,
    pub step: f64,
    pub eps_min: f64,
}

/// Half-width of the local search window, in units of `eps / 2`.
const WINDOW: i32 = 6;
/// Upper bound on uphill moves at one `eps` before giving up on the peak.
const MAX_MOVES: usize = 200;

impl MeasureGrid {
    pub fn validate(&self) -> Result<()> {
        let ok = self.count > 0
            && self.lo.is_finite()
            && self.hi.is_finite()
            && self.lo < self.hi
            && self.eta > 0.0
            && self.step > 0.0
            && self.eps_min > 0.0
            && self.eps_min <= self.eta;
        if !ok {
            return Err(Error::InvalidParams(format!("invalid measure grid {self:?}")));
        }
        let cells = (self.hi - self.lo) / self.step;
        if cells > 1e7 {
            return Err(Error::InvalidParams(format!("measure grid needs {cells:.0} density cells, cap 1e7")));
        }
        Ok(())
    }

    pub fn build(&self, src: &dyn CompactResolvent) -> Result<Vec<f64>> {
        self.validate()?;
        let n = ((self.hi - self.lo) / self.step).floor() as usize;
        let fine: Vec<f64> = (0..=n).map(|i| self.lo + self.step * i as f64).collect();
        let density = stieltjes_density(src, &fine, self.eta)?;
        let total: f64 = density.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParams("no spectral mass in the measure grid window".into()));
        }
        let mut seeds = Vec::with_capacity(self.count);
        let mut cum = 0.0;
        for (i, d) in density.iter().enumerate() {
            cum += d;
            while seeds.len() < self.count && cum >= (seeds.len() as f64 + 0.5) / self.count as f64 * total {
                seeds.push(fine[i]);
            }
        }
        while seeds.len() < self.count {
            seeds.push(fine[n]);
        }
        let mut out = seeds.par_iter().map(|&e| self.climb(src, e)).collect::<Result<Vec<f64>>>()?;
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    fn climb(&self, src: &dyn CompactResolvent, start: f64) -> Result<f64> {
        let mut e = start;
        let mut eps = self.eta;
        let mut moves = 0;
        while eps >= self.eps_min * (1.0 - 1e-12) {
            let pts: Vec<f64> = (-WINDOW..=WINDOW).map(|k| e + 0.5 * eps * k as f64).collect();
            let d = stieltjes_density(src, &pts, eps)?;
            let best = (0..pts.len()).fold(WINDOW as usize, |b, i| if d[i] > d[b] { i } else { b });
            e = pts[best];
            let at_edge = best == 0 || best == pts.len() - 1;
            moves += 1;
            if at_edge && moves < MAX_MOVES {
                continue;
            }
            moves = 0;
            eps *= 0.5;
        }
        Ok(e)
    }
}
