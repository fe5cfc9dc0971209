//! Estimation of the counterfactual means under stochastic mediator draws,
//! and their contrasts (direct and indirect effects).
//!
//! Three estimators share one nuisance stack: a targeted substitution
//! estimator (sequential regressions with weighted fluctuation steps), a
//! one-step estimating-equation estimator on the untargeted fits, and an
//! inverse-probability-weighted comparator.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{self, EicVector};
use crate::intervention::{
    fit_intervention, truncate, FittedIntervention, InterventionPolicy, MediatorModel,
};
use crate::linmod::{fit_logistic, logit, predict_proba, sigmoid, GlmFit};
use crate::model::{build_design, default_terms, ModelSpec, Overrides, Regression, Term};

/// Structural-model variant determining which nuisances condition on A and
/// whether a second fluctuation step is required.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScmVariant {
    /// Randomized instrument; A enters neither the mediator nor the outcome
    /// model; marginal P(A=a).
    Iv,
    /// Treatment depends on baselines: conditional propensity P(A=a|W) and a
    /// second fluctuation of the baseline regression.
    NonrandomA,
    /// Direct treatment edges into mediator and outcome: A joins both
    /// regressions; marginal P(A=a).
    DirectAe,
}

impl ScmVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScmVariant::Iv => "iv",
            ScmVariant::NonrandomA => "nonrandom-a",
            ScmVariant::DirectAe => "direct-ae",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Tmle,
    Iptw,
    Ee,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Tmle => "tmle",
            EstimatorKind::Iptw => "iptw",
            EstimatorKind::Ee => "ee",
        }
    }

    pub fn all() -> Vec<EstimatorKind> {
        vec![EstimatorKind::Tmle, EstimatorKind::Iptw, EstimatorKind::Ee]
    }
}

/// P(A = 1 | ·): a scalar under randomization, a per-row vector otherwise.
#[derive(Clone, Debug)]
pub enum TreatmentMechanism {
    Marginal(f64),
    Conditional(Vec<f64>),
}

impl TreatmentMechanism {
    /// P(A = a | row i), already truncated.
    #[inline]
    pub fn prob(&self, a: u8, i: usize) -> f64 {
        let p1 = match self {
            TreatmentMechanism::Marginal(p) => *p,
            TreatmentMechanism::Conditional(v) => v[i],
        };
        if a == 1 {
            p1
        } else {
            1.0 - p1
        }
    }
}

/// One counterfactual mean to estimate: set A to `a`, draw the mediator from
/// the policy fitted at instrument level `policy_level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsiTarget {
    pub a: u8,
    pub policy_level: u8,
}

/// Which parameter an estimate refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimand {
    Psi { a: u8, policy_level: u8 },
    Sde,
    Sie,
}

impl Estimand {
    pub fn label(&self) -> String {
        match self {
            Estimand::Psi { a, policy_level } => format!("psi_a{a}_g{policy_level}"),
            Estimand::Sde => "sde".into(),
            Estimand::Sie => "sie".into(),
        }
    }
}

impl Serialize for Estimand {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

/// Fitted outcome regression E(Y | M, Z, (A,) W) on the bounded scale.
#[derive(Clone, Debug)]
pub struct OutcomeModel {
    pub fit: GlmFit,
    pub terms: Vec<Term>,
}

impl OutcomeModel {
    pub fn predict_at(&self, data: &Dataset, over: Overrides) -> Result<Vec<f64>> {
        let x = build_design(data, &self.terms, over)?;
        let zeros = vec![0.0; data.n()];
        predict_proba(&self.fit, &x, &zeros)
    }
}

/// Where a policy came from for this run.
#[derive(Clone, Debug)]
pub enum PolicySource {
    Fitted(FittedIntervention),
    External(InterventionPolicy),
}

impl PolicySource {
    pub fn policy(&self) -> &InterventionPolicy {
        match self {
            PolicySource::Fitted(f) => &f.policy,
            PolicySource::External(p) => p,
        }
    }

    pub fn fitted(&self) -> Option<&FittedIntervention> {
        match self {
            PolicySource::Fitted(f) => Some(f),
            PolicySource::External(_) => None,
        }
    }
}

/// Everything fitted once per dataset and shared by all targets and
/// estimators.
pub struct NuisanceFits {
    pub outcome: OutcomeModel,
    /// E(Y | observed row) on the bounded scale.
    pub outcome_preds: Vec<f64>,
    /// Outcome predictions with the mediator forced to 1 / 0 (observed A
    /// except under the direct-edge variant, where A is set per target).
    pub outcome_at_m1: Vec<f64>,
    pub outcome_at_m0: Vec<f64>,
    /// P(M = 1 | observed conditioning set), truncated.
    pub mediator_p1: Vec<f64>,
    /// Draw-distribution sources indexed by instrument level.
    pub policies: [PolicySource; 2],
    pub treatment: TreatmentMechanism,
    /// Outcome mapped to [0, 1]: y01 = (y - y_offset) / y_scale.
    pub y01: Vec<f64>,
    pub y_offset: f64,
    pub y_scale: f64,
}

/// One estimated counterfactual mean with its per-row machinery.
#[derive(Clone, Debug)]
pub struct PsiFit {
    pub target: PsiTarget,
    pub estimator: EstimatorKind,
    /// Point estimate on the bounded [0, 1] scale.
    pub psi: f64,
    /// Outcome predictions used by this estimator (targeted for the
    /// substitution estimator, initial otherwise).
    pub outcome_preds: Vec<f64>,
    /// Outcome predictions with the mediator integrated out under the
    /// policy.
    pub mediator_marginal: Vec<f64>,
    /// Predictions of the baseline regression (post second fluctuation
    /// where applicable); their mean is `psi`.
    pub final_preds: Vec<f64>,
    /// Fluctuation intercept of the outcome step (zero for non-targeted
    /// estimators).
    pub epsilon: f64,
    /// Fluctuation coefficient of the second step, when the variant has one.
    pub epsilon2: Option<f64>,
    /// Density-ratio weights for the outcome fluctuation.
    pub weights: Vec<f64>,
    /// P(A = a | row), a as in the target.
    pub propensity: Vec<f64>,
    /// Efficient-influence-curve components for this fit.
    pub eic: EicVector,
    /// Outcome bounding parameters carried for back-transformation.
    pub y_offset: f64,
    pub y_scale: f64,
    pub fluctuation_converged: bool,
}

/// Point estimate, standard error and confidence interval for one estimand.
#[derive(Clone, Debug, Serialize)]
pub struct EffectEstimate {
    pub estimator: EstimatorKind,
    pub estimand: Estimand,
    pub point: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_method: Option<String>,
}

/// Per-target diagnostics surfaced in reports.
#[derive(Clone, Debug, Serialize)]
pub struct TargetDiagnostics {
    pub estimator: EstimatorKind,
    pub estimand: Estimand,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon2: Option<f64>,
    /// Empirical means of the influence-curve components after fitting.
    pub score_d1: f64,
    pub score_d2: f64,
    pub weight_min: f64,
    pub weight_max: f64,
    pub fluctuation_converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMethod {
    Ic,
    Bootstrap,
}

/// Variance strategy for `estimate_effects`.
#[derive(Clone, Debug)]
pub enum VarianceSpec {
    /// Influence-curve variance from the fitted influence values.
    Ic,
    /// Row-resampling bootstrap rerunning the entire pipeline.
    Bootstrap {
        reps: usize,
        seed: u64,
        percentile: bool,
    },
    /// Points only (used inside the bootstrap itself).
    None,
}

#[derive(Clone, Debug)]
pub struct EstimateOptions {
    pub estimators: Vec<EstimatorKind>,
    pub variance: VarianceSpec,
    pub a: u8,
    pub a_star: u8,
    pub spec: ModelSpec,
    /// Externally supplied draw probabilities, indexed by instrument level.
    pub external_policies: [Option<InterventionPolicy>; 2],
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            estimators: EstimatorKind::all(),
            variance: VarianceSpec::Ic,
            a: 1,
            a_star: 0,
            spec: ModelSpec::main_effects(),
            external_policies: [None, None],
        }
    }
}

/// Full result of `estimate_effects`.
#[derive(Debug)]
pub struct EffectsReport {
    pub n: usize,
    pub variant: ScmVariant,
    pub a: u8,
    pub a_star: u8,
    pub estimates: Vec<EffectEstimate>,
    pub diagnostics: Vec<TargetDiagnostics>,
    /// Bootstrap bookkeeping when that variance method ran.
    pub bootstrap_replicates: Option<usize>,
    pub bootstrap_failures: usize,
    /// Fitted policy machinery by instrument level (absent for external
    /// policies), kept so callers can evaluate the draw probability on new
    /// covariate rows.
    pub policies: [Option<FittedIntervention>; 2],
}

impl EffectsReport {
    pub fn estimate(&self, estimator: EstimatorKind, estimand: Estimand) -> Option<&EffectEstimate> {
        self.estimates
            .iter()
            .find(|e| e.estimator == estimator && e.estimand == estimand)
    }

    pub fn point(&self, estimator: EstimatorKind, estimand: Estimand) -> Option<f64> {
        self.estimate(estimator, estimand).map(|e| e.point)
    }
}

/// Density-ratio weights for the outcome fluctuation: zero off the A = a
/// rows; otherwise the policy density of the observed M over the treatment
/// probability times the conditional mediator density.
pub fn targeting_weights(
    data: &Dataset,
    a: u8,
    policy: &InterventionPolicy,
    mediator: &MediatorModel,
    treatment: &TreatmentMechanism,
    tau: f64,
) -> Result<Vec<f64>> {
    let mediator_p1 = mediator.predict_at(data, None, None, tau)?;
    Ok(weights_from_parts(
        &data.a,
        &data.m,
        a,
        &policy.g,
        &mediator_p1,
        treatment,
    ))
}

pub(crate) fn weights_from_parts(
    a_col: &[u8],
    m_col: &[u8],
    a: u8,
    policy_g: &[f64],
    mediator_p1: &[f64],
    treatment: &TreatmentMechanism,
) -> Vec<f64> {
    (0..a_col.len())
        .map(|i| {
            if a_col[i] != a {
                return 0.0;
            }
            let num = density(m_col[i], policy_g[i]);
            let den = treatment.prob(a, i) * density(m_col[i], mediator_p1[i]);
            num / den
        })
        .collect()
}

#[inline]
fn density(m: u8, p1: f64) -> f64 {
    if m == 1 {
        p1
    } else {
        1.0 - p1
    }
}

/// Result of the weighted intercept fluctuation of the outcome regression.
pub struct TargetedOutcome {
    pub preds: Vec<f64>,
    pub epsilon: f64,
    pub converged: bool,
}

/// Fluctuate outcome predictions along the logit intercept submodel using
/// the given weights; the weighted residual sum is zero at the solution.
pub fn target_outcome(outcome_preds: &[f64], y01: &[f64], weights: &[f64]) -> Result<TargetedOutcome> {
    let n = outcome_preds.len();
    if y01.len() != n || weights.len() != n {
        return Err(Error::DimensionMismatch(
            "outcome/weights lengths differ".into(),
        ));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::EmptyTargetingStratum);
    }
    let x = crate::linmod::DesignMatrix::with_intercept(n, &[])?;
    let offset: Vec<f64> = outcome_preds.iter().map(|&p| logit(p)).collect();
    let fit = fit_logistic(&x, y01, weights, &offset)?;
    let epsilon = fit.coefficients[0];
    let preds = offset.iter().map(|&o| sigmoid(o + epsilon)).collect();
    Ok(TargetedOutcome {
        preds,
        epsilon,
        converged: fit.converged,
    })
}

/// Integrate the mediator out of the outcome predictions under the policy:
/// a per-row convex combination of the predictions at M = 1 and M = 0.
pub fn marginalize_mediator(at_m1: &[f64], at_m0: &[f64], policy: &InterventionPolicy) -> Vec<f64> {
    (0..at_m1.len())
        .map(|i| {
            let g = policy.g[i];
            at_m1[i] * g + at_m0[i] * (1.0 - g)
        })
        .collect()
}

/// Regression of the mediator-marginalized predictions on baselines within
/// the A = a stratum, evaluated on every row.
pub struct BaselineRegression {
    pub preds: Vec<f64>,
    pub fit: GlmFit,
}

pub fn regress_baseline(
    values: &[f64],
    data: &Dataset,
    a: u8,
    spec: &ModelSpec,
) -> Result<BaselineRegression> {
    let n = data.n();
    if values.len() != n {
        return Err(Error::DimensionMismatch("values length differs from data".into()));
    }
    if data.count_a(a) == 0 {
        return Err(Error::EmptyStratum(format!("no rows with A={a}")));
    }
    let terms = spec
        .baseline
        .clone()
        .unwrap_or_else(|| default_terms(Regression::Baseline, false, data.n_covariates()));
    let x = build_design(data, &terms, Overrides::none())?;
    let weights: Vec<f64> = data.a.iter().map(|&ai| (ai == a) as u8 as f64).collect();
    let zeros = vec![0.0; n];
    let clamped: Vec<f64> = values.iter().map(|&v| v.clamp(0.0, 1.0)).collect();
    let fit = fit_logistic(&x, &clamped, &weights, &zeros)?;
    let preds = predict_proba(&fit, &x, &zeros)?;
    Ok(BaselineRegression { preds, fit })
}

/// Second fluctuation for the conditional-treatment variant: an inverse
/// propensity weighted intercept update of the baseline regression. Identity
/// under the other variants.
pub fn target_baseline(
    preds: &[f64],
    values: &[f64],
    data: &Dataset,
    a: u8,
    treatment: &TreatmentMechanism,
    variant: ScmVariant,
) -> Result<(Vec<f64>, Option<f64>, bool)> {
    match variant {
        ScmVariant::Iv | ScmVariant::DirectAe => Ok((preds.to_vec(), None, true)),
        ScmVariant::NonrandomA => {
            let n = data.n();
            if data.count_a(a) == 0 {
                return Err(Error::EmptyStratum(format!("no rows with A={a}")));
            }
            let weights: Vec<f64> = (0..n)
                .map(|i| {
                    if data.a[i] == a {
                        1.0 / treatment.prob(a, i)
                    } else {
                        0.0
                    }
                })
                .collect();
            let x = crate::linmod::DesignMatrix::with_intercept(n, &[])?;
            let offset: Vec<f64> = preds.iter().map(|&p| logit(p)).collect();
            let clamped: Vec<f64> = values.iter().map(|&v| v.clamp(0.0, 1.0)).collect();
            let fit = fit_logistic(&x, &clamped, &weights, &offset)?;
            let eps = fit.coefficients[0];
            let updated = offset.iter().map(|&o| sigmoid(o + eps)).collect();
            Ok((updated, Some(eps), fit.converged))
        }
    }
}

fn bound_outcome(y: &[f64]) -> (Vec<f64>, f64, f64) {
    let binary = y.iter().all(|&v| v == 0.0 || v == 1.0);
    if binary {
        return (y.to_vec(), 0.0, 1.0);
    }
    let min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = max - min;
    if scale == 0.0 {
        return (vec![0.0; y.len()], min, 1.0);
    }
    (y.iter().map(|&v| (v - min) / scale).collect(), min, scale)
}

/// Fit every nuisance shared by the targets: outcome regression, mediator
/// density, both draw distributions, and the treatment mechanism.
pub fn fit_nuisances(
    data: &Dataset,
    variant: ScmVariant,
    opts: &EstimateOptions,
) -> Result<NuisanceFits> {
    data.validate()?;
    if opts.a == opts.a_star {
        return Err(Error::Config("a and a* must differ".into()));
    }
    for level in [opts.a, opts.a_star] {
        if data.count_a(level) == 0 {
            return Err(Error::NoSupport(level));
        }
    }
    let n = data.n();
    let tau = opts.spec.truncation();
    let n_w = data.n_covariates();
    let cond_a = variant == ScmVariant::DirectAe;

    let (y01, y_offset, y_scale) = bound_outcome(&data.y);

    let outcome_terms = opts
        .spec
        .outcome
        .clone()
        .unwrap_or_else(|| default_terms(Regression::Outcome, cond_a, n_w));
    let ones = vec![1.0; n];
    let zeros = vec![0.0; n];
    let x_outcome = build_design(data, &outcome_terms, Overrides::none())?;
    let outcome_fit = fit_logistic(&x_outcome, &y01, &ones, &zeros)?;
    let outcome = OutcomeModel {
        fit: outcome_fit,
        terms: outcome_terms,
    };
    let outcome_preds = predict_proba(&outcome.fit, &x_outcome, &zeros)?;
    let outcome_at_m1 = outcome.predict_at(data, Overrides::m(1))?;
    let outcome_at_m0 = outcome.predict_at(data, Overrides::m(0))?;

    let policy_for = |level: u8| -> Result<PolicySource> {
        if let Some(ext) = &opts.external_policies[level as usize] {
            if ext.g.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "external policy for level {level} has {} rows, data has {n}",
                    ext.g.len()
                )));
            }
            return Ok(PolicySource::External(ext.clone()));
        }
        Ok(PolicySource::Fitted(fit_intervention(
            data, level, variant, &opts.spec,
        )?))
    };
    let policies = [policy_for(0)?, policy_for(1)?];

    // Mediator density at the observed conditioning set; reuse the fitted
    // mediator model from either policy when available.
    let mediator_p1 = match policies.iter().find_map(|p| p.fitted()) {
        Some(f) => f.mediator.predict_at(data, None, None, tau)?,
        None => {
            // Both policies external: fit the mediator model directly.
            let med_terms = opts
                .spec
                .mediator
                .clone()
                .unwrap_or_else(|| default_terms(Regression::Mediator, cond_a, n_w));
            let m_outcome: Vec<f64> = data.m.iter().map(|&v| v as f64).collect();
            let x = build_design(data, &med_terms, Overrides::none())?;
            let fit = fit_logistic(&x, &m_outcome, &ones, &zeros)?;
            predict_proba(&fit, &x, &zeros)?
                .into_iter()
                .map(|p| truncate(p, tau))
                .collect()
        }
    };

    let treatment = match variant {
        ScmVariant::Iv | ScmVariant::DirectAe => {
            let p1 = data.a.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
            TreatmentMechanism::Marginal(truncate(p1, tau))
        }
        ScmVariant::NonrandomA => {
            let terms = opts
                .spec
                .treatment
                .clone()
                .unwrap_or_else(|| default_terms(Regression::Treatment, false, n_w));
            let a_outcome: Vec<f64> = data.a.iter().map(|&v| v as f64).collect();
            let x = build_design(data, &terms, Overrides::none())?;
            let fit = fit_logistic(&x, &a_outcome, &ones, &zeros)?;
            let preds = predict_proba(&fit, &x, &zeros)?
                .into_iter()
                .map(|p| truncate(p, tau))
                .collect();
            TreatmentMechanism::Conditional(preds)
        }
    };

    Ok(NuisanceFits {
        outcome,
        outcome_preds,
        outcome_at_m1,
        outcome_at_m0,
        mediator_p1,
        policies,
        treatment,
        y01,
        y_offset,
        y_scale,
    })
}

/// Estimate one counterfactual mean with the given estimator, reusing the
/// shared nuisance fits.
pub fn estimate_psi_with(
    nuis: &NuisanceFits,
    data: &Dataset,
    target: PsiTarget,
    variant: ScmVariant,
    estimator: EstimatorKind,
    spec: &ModelSpec,
) -> Result<PsiFit> {
    let n = data.n();
    let a = target.a;
    let policy_src = &nuis.policies[target.policy_level as usize];
    let policy = policy_src.policy();

    // Under the direct-edge variant the outcome model conditions on A; the
    // counterfactual predictions for the marginalization keep the observed A
    // (the regression below is restricted to A = a anyway).
    let weights = weights_from_parts(&data.a, &data.m, a, &policy.g, &nuis.mediator_p1, &nuis.treatment);
    let propensity: Vec<f64> = (0..n).map(|i| nuis.treatment.prob(a, i)).collect();

    let (outcome_preds, at_m1, at_m0, epsilon, fluct_ok) = match estimator {
        EstimatorKind::Tmle => {
            let targeted = target_outcome(&nuis.outcome_preds, &nuis.y01, &weights)?;
            let eps = targeted.epsilon;
            let at_m1 = nuis.outcome_at_m1.iter().map(|&p| sigmoid(logit(p) + eps)).collect();
            let at_m0 = nuis.outcome_at_m0.iter().map(|&p| sigmoid(logit(p) + eps)).collect();
            (targeted.preds, at_m1, at_m0, eps, targeted.converged)
        }
        EstimatorKind::Ee | EstimatorKind::Iptw => (
            nuis.outcome_preds.clone(),
            nuis.outcome_at_m1.clone(),
            nuis.outcome_at_m0.clone(),
            0.0,
            true,
        ),
    };

    let mediator_marginal = marginalize_mediator(&at_m1, &at_m0, policy);
    let regression = regress_baseline(&mediator_marginal, data, a, spec)?;

    let (final_preds, epsilon2, fluct2_ok, psi) = match estimator {
        EstimatorKind::Tmle => {
            let (preds, eps2, ok) = target_baseline(
                &regression.preds,
                &mediator_marginal,
                data,
                a,
                &nuis.treatment,
                variant,
            )?;
            let psi = mean(&preds);
            (preds, eps2, ok, psi)
        }
        EstimatorKind::Ee => {
            let preds = regression.preds.clone();
            let mut acc = 0.0;
            for i in 0..n {
                let ind = (data.a[i] == a) as u8 as f64;
                let d1 = ind / propensity[i] * (mediator_marginal[i] - preds[i]);
                let d2 = weights[i] * (nuis.y01[i] - outcome_preds[i]);
                acc += preds[i] + d1 + d2;
            }
            let psi = acc / n as f64;
            (preds, None, true, psi)
        }
        EstimatorKind::Iptw => {
            let psi = (0..n).map(|i| weights[i] * nuis.y01[i]).sum::<f64>() / n as f64;
            (regression.preds.clone(), None, true, psi)
        }
    };

    let mut fit = PsiFit {
        target,
        estimator,
        psi,
        outcome_preds,
        mediator_marginal,
        final_preds,
        epsilon,
        epsilon2,
        weights,
        propensity,
        eic: EicVector::empty(n),
        y_offset: nuis.y_offset,
        y_scale: nuis.y_scale,
        fluctuation_converged: fluct_ok && fluct2_ok,
    };
    fit.eic = inference::compute_eic(&fit, data, variant);
    Ok(fit)
}

/// Convenience wrapper fitting nuisances and estimating a single target.
pub fn estimate_psi(
    data: &Dataset,
    target: PsiTarget,
    variant: ScmVariant,
    estimator: EstimatorKind,
    opts: &EstimateOptions,
) -> Result<PsiFit> {
    let nuis = fit_nuisances(data, variant, opts)?;
    estimate_psi_with(&nuis, data, target, variant, estimator, &opts.spec)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// The three targets needed for both effect contrasts, in the order
/// [psi(a, g_a), psi(a, g_a*), psi(a*, g_a*)].
pub fn effect_targets(a: u8, a_star: u8) -> [PsiTarget; 3] {
    [
        PsiTarget { a, policy_level: a },
        PsiTarget { a, policy_level: a_star },
        PsiTarget { a: a_star, policy_level: a_star },
    ]
}

pub(crate) struct EstimatorRun {
    pub estimator: EstimatorKind,
    pub fits: [PsiFit; 3],
}

impl EstimatorRun {
    pub fn sde(&self) -> f64 {
        (self.fits[1].psi - self.fits[2].psi) * self.fits[1].y_scale
    }

    pub fn sie(&self) -> f64 {
        (self.fits[0].psi - self.fits[1].psi) * self.fits[0].y_scale
    }

    pub fn psi_original_scale(&self, k: usize) -> f64 {
        self.fits[k].y_offset + self.fits[k].y_scale * self.fits[k].psi
    }
}

pub(crate) fn run_estimators(
    data: &Dataset,
    variant: ScmVariant,
    opts: &EstimateOptions,
) -> Result<(Vec<EstimatorRun>, NuisanceFits)> {
    let nuis = fit_nuisances(data, variant, opts)?;
    let targets = effect_targets(opts.a, opts.a_star);
    let mut runs = Vec::with_capacity(opts.estimators.len());
    for &estimator in &opts.estimators {
        let fit0 = estimate_psi_with(&nuis, data, targets[0], variant, estimator, &opts.spec)?;
        let fit1 = estimate_psi_with(&nuis, data, targets[1], variant, estimator, &opts.spec)?;
        let fit2 = estimate_psi_with(&nuis, data, targets[2], variant, estimator, &opts.spec)?;
        runs.push(EstimatorRun {
            estimator,
            fits: [fit0, fit1, fit2],
        });
    }
    Ok((runs, nuis))
}

/// Estimate the three counterfactual means and both effect contrasts for
/// every requested estimator, with the requested inference.
pub fn estimate_effects(
    data: &Dataset,
    variant: ScmVariant,
    opts: &EstimateOptions,
) -> Result<EffectsReport> {
    let (runs, nuis) = run_estimators(data, variant, opts)?;
    let n = data.n();
    let scale = nuis.y_scale;

    let mut estimates = Vec::new();
    let mut diagnostics = Vec::new();
    let mut boot_replicates = None;
    let mut boot_failures = 0usize;

    // Bootstrap once for all estimators/estimands when requested.
    let boot = match &opts.variance {
        VarianceSpec::Bootstrap { reps, seed, percentile } => {
            let r = inference::bootstrap_variance(data, variant, opts, *reps, *seed, *percentile)?;
            boot_replicates = Some(r.replicates_used);
            boot_failures = r.failures;
            Some(r)
        }
        _ => None,
    };

    for run in &runs {
        let estimator = run.estimator;
        let labels = [
            Estimand::Psi { a: opts.a, policy_level: opts.a },
            Estimand::Psi { a: opts.a, policy_level: opts.a_star },
            Estimand::Psi { a: opts.a_star, policy_level: opts.a_star },
        ];
        for (k, fit) in run.fits.iter().enumerate() {
            diagnostics.push(TargetDiagnostics {
                estimator,
                estimand: labels[k],
                epsilon: fit.epsilon,
                epsilon2: fit.epsilon2,
                score_d1: mean(&fit.eic.d1),
                score_d2: mean(&fit.eic.d2),
                weight_min: fit.weights.iter().cloned().fold(f64::INFINITY, f64::min),
                weight_max: fit.weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                fluctuation_converged: fit.fluctuation_converged,
            });
        }

        enum EicSource {
            Single(Vec<f64>),
            Contrast(Vec<f64>, Vec<f64>),
        }
        let effect_rows: Vec<(Estimand, f64, EicSource)> = vec![
            (labels[0], run.psi_original_scale(0), EicSource::Single(scaled(&run.fits[0].eic.total, scale))),
            (labels[1], run.psi_original_scale(1), EicSource::Single(scaled(&run.fits[1].eic.total, scale))),
            (labels[2], run.psi_original_scale(2), EicSource::Single(scaled(&run.fits[2].eic.total, scale))),
            (
                Estimand::Sde,
                run.sde(),
                EicSource::Contrast(
                    scaled(&run.fits[1].eic.total, scale),
                    scaled(&run.fits[2].eic.total, scale),
                ),
            ),
            (
                Estimand::Sie,
                run.sie(),
                EicSource::Contrast(
                    scaled(&run.fits[0].eic.total, scale),
                    scaled(&run.fits[1].eic.total, scale),
                ),
            ),
        ];

        for (estimand, point, eic) in effect_rows {
            let (se, method) = match &opts.variance {
                VarianceSpec::Ic => {
                    let se = match (&eic, estimator) {
                        (EicSource::Single(e), _) => inference::ic_se(e, n)?,
                        (EicSource::Contrast(ea, eb), EstimatorKind::Iptw) => {
                            // The weighting comparator's influence values
                            // treat the weights as known; the per-component
                            // standard errors are combined without the
                            // covariance term, which is deliberately
                            // conservative for contrasts.
                            let sa = inference::ic_se(ea, n)?;
                            let sb = inference::ic_se(eb, n)?;
                            (sa * sa + sb * sb).sqrt()
                        }
                        (EicSource::Contrast(ea, eb), _) => {
                            let diff: Vec<f64> =
                                ea.iter().zip(eb).map(|(&x, &y)| x - y).collect();
                            inference::ic_se(&diff, n)?
                        }
                    };
                    (Some(se), Some(VarianceMethod::Ic))
                }
                VarianceSpec::Bootstrap { .. } => {
                    let se = boot
                        .as_ref()
                        .and_then(|b| b.se(estimator, estimand))
                        .ok_or_else(|| Error::InvalidInput("bootstrap produced no SE".into()))?;
                    (Some(se), Some(VarianceMethod::Bootstrap))
                }
                VarianceSpec::None => (None, None),
            };
            let mut interval = match se {
                Some(s) => (Some(point - 1.96 * s), Some(point + 1.96 * s)),
                None => (None, None),
            };
            if let VarianceSpec::Bootstrap { percentile: true, .. } = &opts.variance {
                if let Some((lo, hi)) = boot.as_ref().and_then(|b| b.percentile_ci(estimator, estimand)) {
                    interval = (Some(lo), Some(hi));
                }
            }
            let (lo, hi) = interval;
            estimates.push(EffectEstimate {
                estimator,
                estimand,
                point,
                se,
                ci_lower: lo,
                ci_upper: hi,
                variance_method: method.map(|m| match m {
                    VarianceMethod::Ic => "ic".to_string(),
                    VarianceMethod::Bootstrap => "bootstrap".to_string(),
                }),
            });
        }
    }

    let policies = {
        let [p0, p1] = nuis.policies;
        [
            match p0 {
                PolicySource::Fitted(f) => Some(f),
                PolicySource::External(_) => None,
            },
            match p1 {
                PolicySource::Fitted(f) => Some(f),
                PolicySource::External(_) => None,
            },
        ]
    };

    Ok(EffectsReport {
        n,
        variant,
        a: opts.a,
        a_star: opts.a_star,
        estimates,
        diagnostics,
        bootstrap_replicates: boot_replicates,
        bootstrap_failures: boot_failures,
        policies,
    })
}

fn scaled(v: &[f64], scale: f64) -> Vec<f64> {
    v.iter().map(|&x| x * scale).collect()
}
