//! Influence-curve and bootstrap inference.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::engine::{
    run_estimators, EstimateOptions, Estimand, EstimatorKind, PsiFit, ScmVariant, VarianceSpec,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;

const BOOTSTRAP_SALT: u64 = 0xB007;

/// Per-row influence values for one counterfactual-mean fit, split into the
/// centered plug-in, baseline-residual, and outcome-residual components.
#[derive(Clone, Debug)]
pub struct EicVector {
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub total: Vec<f64>,
}

impl EicVector {
    pub fn empty(n: usize) -> EicVector {
        EicVector {
            d0: vec![0.0; n],
            d1: vec![0.0; n],
            d2: vec![0.0; n],
            total: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }
}

/// Assemble the influence values implied by a fit.
///
/// For the substitution and estimating-equation estimators these are the
/// three components evaluated at the fit's predictions; the weighting
/// estimator gets the influence values of a weighted mean with the weights
/// treated as known.
pub fn compute_eic(fit: &PsiFit, data: &Dataset, _variant: ScmVariant) -> EicVector {
    let n = data.n();
    let y01: Vec<f64> = data
        .y
        .iter()
        .map(|&y| ((y - fit.y_offset) / fit.y_scale).clamp(0.0, 1.0))
        .collect();
    let mut eic = EicVector::empty(n);
    match fit.estimator {
        EstimatorKind::Tmle | EstimatorKind::Ee => {
            for i in 0..n {
                let ind = (data.a[i] == fit.target.a) as u8 as f64;
                eic.d0[i] = fit.final_preds[i] - fit.psi;
                eic.d1[i] = ind / fit.propensity[i] * (fit.mediator_marginal[i] - fit.final_preds[i]);
                eic.d2[i] = fit.weights[i] * (y01[i] - fit.outcome_preds[i]);
                eic.total[i] = eic.d0[i] + eic.d1[i] + eic.d2[i];
            }
        }
        EstimatorKind::Iptw => {
            for i in 0..n {
                eic.d0[i] = fit.weights[i] * y01[i] - fit.psi;
                eic.total[i] = eic.d0[i];
            }
        }
    }
    eic
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportedMethod {
    Ic,
    Bootstrap,
}

/// Standard error with its provenance.
#[derive(Clone, Debug, Serialize)]
pub struct VarianceReport {
    pub method: ReportedMethod,
    pub se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    pub failures: usize,
}

/// Influence-curve standard error for the difference of two fits:
/// sqrt(sample variance of (eic_a - eic_a2) / n).
pub fn ic_variance(eic_a: &[f64], eic_a2: &[f64]) -> Result<VarianceReport> {
    if eic_a.len() != eic_a2.len() {
        return Err(Error::DimensionMismatch(
            "influence vectors differ in length".into(),
        ));
    }
    let diff: Vec<f64> = eic_a.iter().zip(eic_a2).map(|(&a, &b)| a - b).collect();
    let se = ic_se(&diff, diff.len())?;
    Ok(VarianceReport {
        method: ReportedMethod::Ic,
        se,
        replicates: None,
        failures: 0,
    })
}

pub(crate) fn ic_se(eic: &[f64], n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidInput(
            "influence-curve variance needs at least two rows".into(),
        ));
    }
    Ok((sample_variance(eic) / n as f64).sqrt())
}

pub(crate) fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = q * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
    }
}

/// Bootstrap summary for every (estimator, estimand) pair of a run.
#[derive(Clone, Debug)]
pub struct BootstrapReport {
    pub replicates_used: usize,
    pub failures: usize,
    entries: Vec<BootstrapEntry>,
}

#[derive(Clone, Debug)]
struct BootstrapEntry {
    estimator: EstimatorKind,
    estimand: Estimand,
    se: f64,
    percentile_ci: Option<(f64, f64)>,
}

impl BootstrapReport {
    pub fn se(&self, estimator: EstimatorKind, estimand: Estimand) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.estimator == estimator && e.estimand == estimand)
            .map(|e| e.se)
    }

    pub fn percentile_ci(&self, estimator: EstimatorKind, estimand: Estimand) -> Option<(f64, f64)> {
        self.entries
            .iter()
            .find(|e| e.estimator == estimator && e.estimand == estimand)
            .and_then(|e| e.percentile_ci)
    }
}

/// Row-resampling bootstrap of the full pipeline (nuisances and draw
/// distributions re-estimated inside every resample). Replicates whose
/// strata collapse are dropped and counted; more than 10% failures is an
/// error. Replicate b draws from the stream (seed, b), so results do not
/// depend on thread count.
pub fn bootstrap_variance(
    data: &Dataset,
    variant: ScmVariant,
    opts: &EstimateOptions,
    reps: usize,
    seed: u64,
    want_percentile: bool,
) -> Result<BootstrapReport> {
    if reps < 2 {
        return Err(Error::InvalidInput("bootstrap needs at least 2 replicates".into()));
    }
    let n = data.n();
    let keys: Vec<(EstimatorKind, Estimand)> = opts
        .estimators
        .iter()
        .flat_map(|&est| {
            [
                Estimand::Psi { a: opts.a, policy_level: opts.a },
                Estimand::Psi { a: opts.a, policy_level: opts.a_star },
                Estimand::Psi { a: opts.a_star, policy_level: opts.a_star },
                Estimand::Sde,
                Estimand::Sie,
            ]
            .into_iter()
            .map(move |e| (est, e))
        })
        .collect();

    let draws: Vec<Option<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|b| {
            let mut stream = RngStream::new(seed, &[BOOTSTRAP_SALT, b as u64]);
            let idx: Vec<usize> = (0..n).map(|_| stream.index(n)).collect();
            let resampled = data.subset(&idx);
            let mut rep_opts = EstimateOptions {
                estimators: opts.estimators.clone(),
                variance: VarianceSpec::None,
                a: opts.a,
                a_star: opts.a_star,
                spec: opts.spec.clone(),
                external_policies: [None, None],
            };
            for level in 0..2 {
                if let Some(ext) = &opts.external_policies[level] {
                    let g: Vec<f64> = idx.iter().map(|&i| ext.g[i]).collect();
                    rep_opts.external_policies[level] = Some(crate::intervention::InterventionPolicy {
                        a_star: ext.a_star,
                        g,
                        provenance: ext.provenance,
                    });
                }
            }
            match run_estimators(&resampled, variant, &rep_opts) {
                Ok((runs, _)) => {
                    let mut points = Vec::with_capacity(keys.len());
                    for run in &runs {
                        points.push(run.psi_original_scale(0));
                        points.push(run.psi_original_scale(1));
                        points.push(run.psi_original_scale(2));
                        points.push(run.sde());
                        points.push(run.sie());
                    }
                    Some(points)
                }
                Err(_) => None,
            }
        })
        .collect();

    let failures = draws.iter().filter(|d| d.is_none()).count();
    if failures * 10 > reps {
        return Err(Error::BootstrapUnstable { failed: failures, total: reps });
    }
    let used = reps - failures;
    if used < 2 {
        return Err(Error::BootstrapUnstable { failed: failures, total: reps });
    }

    let mut entries = Vec::with_capacity(keys.len());
    for (k, &(estimator, estimand)) in keys.iter().enumerate() {
        let mut values: Vec<f64> = draws
            .iter()
            .flatten()
            .map(|points| points[k])
            .collect();
        let se = sample_variance(&values).sqrt();
        let percentile_ci = if want_percentile {
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Some((percentile(&values, 0.025), percentile(&values, 0.975)))
        } else {
            None
        };
        entries.push(BootstrapEntry {
            estimator,
            estimand,
            se,
            percentile_ci,
        });
    }

    Ok(BootstrapReport {
        replicates_used: used,
        failures,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PsiTarget;

    #[test]
    fn ic_variance_trivials() {
        let a = vec![0.3, -0.2, 0.1, 0.4];
        let report = ic_variance(&a, &a).unwrap();
        assert_eq!(report.se, 0.0);

        // Alternating +-1 differences over n = 4: sample variance 4/3.
        let plus = vec![1.0, -1.0, 1.0, -1.0];
        let zeros = vec![0.0; 4];
        let report = ic_variance(&plus, &zeros).unwrap();
        assert!((report.se - (4.0_f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
        assert!((report.se - 0.5773502691896257).abs() < 1e-9);

        assert!(ic_variance(&[1.0], &[0.5]).is_err());
    }

    #[test]
    fn ic_se_is_shift_invariant() {
        let diff = vec![0.4, -0.3, 0.2, 0.6, -0.1];
        let shifted: Vec<f64> = diff.iter().map(|v| v + 100.0).collect();
        let a = ic_se(&diff, diff.len()).unwrap();
        let b = ic_se(&shifted, shifted.len()).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn eic_centering_single_row() {
        // With one row the plug-in equals its own mean, so d0 = 0.
        let data = Dataset {
            a: vec![1],
            z: vec![0],
            m: vec![1],
            y: vec![1.0],
            w: vec![],
            w_names: vec![],
        };
        let fit = PsiFit {
            target: PsiTarget { a: 1, policy_level: 0 },
            estimator: EstimatorKind::Tmle,
            psi: 0.7,
            outcome_preds: vec![0.7],
            mediator_marginal: vec![0.7],
            final_preds: vec![0.7],
            epsilon: 0.0,
            epsilon2: None,
            weights: vec![1.0],
            propensity: vec![0.5],
            eic: EicVector::empty(1),
            y_offset: 0.0,
            y_scale: 1.0,
            fluctuation_converged: true,
        };
        let eic = compute_eic(&fit, &data, ScmVariant::Iv);
        assert_eq!(eic.d0[0], 0.0);
        assert!((eic.d1[0] - 0.0).abs() < 1e-12);
        assert!((eic.d2[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn eic_constant_fit_is_zero() {
        // Predictions equal to outcomes and to the plug-in: all components 0.
        let data = Dataset {
            a: vec![1, 1, 0],
            z: vec![0, 1, 0],
            m: vec![1, 0, 1],
            y: vec![0.6, 0.6, 0.6],
            w: vec![],
            w_names: vec![],
        };
        let n = 3;
        let fit = PsiFit {
            target: PsiTarget { a: 1, policy_level: 0 },
            estimator: EstimatorKind::Ee,
            psi: 0.6,
            outcome_preds: vec![0.6; n],
            mediator_marginal: vec![0.6; n],
            final_preds: vec![0.6; n],
            epsilon: 0.0,
            epsilon2: None,
            weights: vec![2.0, 2.0, 0.0],
            propensity: vec![0.5; n],
            eic: EicVector::empty(n),
            y_offset: 0.0,
            y_scale: 1.0,
            fluctuation_converged: true,
        };
        let eic = compute_eic(&fit, &data, ScmVariant::Iv);
        for i in 0..n {
            assert_eq!(eic.total[i], 0.0);
        }
    }
}
