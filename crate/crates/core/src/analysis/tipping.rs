use serde::{Deserialize, Serialize};

use super::pdp::CurveSet;
use super::uncertainty::UncertaintyProfile;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TippingKind {
    UncertaintyPeak,
    UncertaintyDrop,
    PdpInflection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TippingPoint {
    pub dim: String,
    pub index: usize,
    pub value: f64,
    pub kind: TippingKind,
    pub magnitude: f64,
}

fn tolerance(v: &[f64]) -> f64 {
    1e-9 * v.iter().fold(1.0f64, |m, x| m.max(x.abs()))
}

/// Interior local maxima of `sigma` with their height above the neighbour mean.
pub fn peaks(sigma: &[f64]) -> Vec<(usize, f64)> {
    let tol = tolerance(sigma);
    (1..sigma.len().saturating_sub(1))
        .filter(|&g| sigma[g] > sigma[g - 1] + tol && sigma[g] >= sigma[g + 1])
        .map(|g| (g, sigma[g] - 0.5 * (sigma[g - 1] + sigma[g + 1])))
        .filter(|&(_, m)| m > tol)
        .collect()
}

/// Steepest single-step decrease, reported at the step's upper end.
pub fn steepest_drop(sigma: &[f64]) -> Option<(usize, f64)> {
    let tol = tolerance(sigma);
    (0..sigma.len().saturating_sub(1))
        .map(|g| (g, sigma[g] - sigma[g + 1]))
        .filter(|&(_, d)| d > tol)
        .fold(None, |best: Option<(usize, f64)>, c| match best {
            Some(b) if b.1 >= c.1 => Some(b),
            _ => Some(c),
        })
}

/// Largest absolute second difference of the curve.
pub fn inflection(curve: &[f64]) -> Option<(usize, f64)> {
    let tol = tolerance(curve);
    (1..curve.len().saturating_sub(1))
        .map(|k| (k, (curve[k + 1] - 2.0 * curve[k] + curve[k - 1]).abs()))
        .filter(|&(_, m)| m > tol)
        .fold(None, |best: Option<(usize, f64)>, c| match best {
            Some(b) if b.1 >= c.1 => Some(b),
            _ => Some(c),
        })
}

/// Candidate phase-transition locations along one dimension, largest first.
pub fn detect_tipping_points(curve: &CurveSet, profile: &UncertaintyProfile) -> Result<Vec<TippingPoint>> {
    let aligned = curve.dim == profile.dim
        && curve.grid.len() == profile.grid.len()
        && curve.grid.iter().zip(&profile.grid).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    if !aligned {
        return Err(Error::Precondition(format!(
            "curve grid for {} does not match uncertainty grid for {}",
            curve.dim, profile.dim
        )));
    }
    let point = |index: usize, kind, magnitude| TippingPoint {
        dim: curve.dim.clone(),
        index,
        value: curve.grid[index],
        kind,
        magnitude,
    };
    let mut out: Vec<TippingPoint> = peaks(&profile.sigma_total)
        .into_iter()
        .map(|(g, m)| point(g, TippingKind::UncertaintyPeak, m))
        .collect();
    if let Some((g, m)) = steepest_drop(&profile.sigma_total) {
        out.push(point(g + 1, TippingKind::UncertaintyDrop, m));
    }
    if let Some((k, m)) = inflection(&curve.pdp) {
        out.push(point(k, TippingKind::PdpInflection, m));
    }
    out.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(a.index.cmp(&b.index)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::pdp::linspace;

    fn curve(pdp: Vec<f64>) -> CurveSet {
        let grid = linspace(0.0, 1.0, pdp.len());
        CurveSet {
            dim: "PH".into(),
            grid,
            ice: vec![pdp.clone()],
            pdp,
            instance_ids: vec![0],
            color_dim: None,
            color_key: None,
        }
    }

    fn profile(sigma: Vec<f64>) -> UncertaintyProfile {
        UncertaintyProfile {
            dim: "PH".into(),
            alpha: 0.1,
            grid: linspace(0.0, 1.0, sigma.len()),
            p_hat: vec![0.0; sigma.len()],
            sigma_aleatoric: sigma.clone(),
            sigma_epistemic: vec![0.0; sigma.len()],
            sigma_total: sigma,
        }
    }

    #[test]
    fn flat_and_linear_give_nothing() {
        let pdp: Vec<f64> = (0..20).map(|g| 0.1 + 0.03 * g as f64).collect();
        assert!(detect_tipping_points(&curve(pdp), &profile(vec![0.2; 20])).unwrap().is_empty());
    }

    #[test]
    fn single_spike_is_one_peak() {
        let mut sigma = vec![0.1; 15];
        sigma[6] = 0.4;
        let tps = detect_tipping_points(&curve(vec![0.5; 15]), &profile(sigma)).unwrap();
        let peaks: Vec<_> = tps.iter().filter(|t| t.kind == TippingKind::UncertaintyPeak).collect();
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].index, 6);
        let drop = tps.iter().find(|t| t.kind == TippingKind::UncertaintyDrop).unwrap();
        assert_eq!(drop.index, 7);
    }

    #[test]
    fn piecewise_bend_is_the_inflection() {
        for k in 1..19 {
            let pdp: Vec<f64> = (0..20).map(|g| if g <= k { 0.8 } else { 0.8 - 0.05 * (g - k) as f64 }).collect();
            let tps = detect_tipping_points(&curve(pdp), &profile(vec![0.2; 20])).unwrap();
            assert_eq!(tps.len(), 1);
            assert_eq!(tps[0].kind, TippingKind::PdpInflection);
            assert_eq!(tps[0].index, k);
        }
    }

    #[test]
    fn misaligned_grids_are_rejected() {
        assert!(detect_tipping_points(&curve(vec![0.0; 10]), &profile(vec![0.0; 11])).is_err());
    }
}
