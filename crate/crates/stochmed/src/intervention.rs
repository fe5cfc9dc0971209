//! Estimation of the stochastic mediator-draw distribution: the probability
//! that M = 1 conditional on baselines W, with the intermediate confounder Z
//! marginalized out at instrument level a*.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::ScmVariant;
use crate::error::{Error, Result};
use crate::linmod::{fit_logistic, predict_proba, GlmFit};
use crate::model::{build_design, default_terms, ModelSpec, Overrides, Regression, Term};

/// Default truncation for every estimated nuisance probability; bounds the
/// density-ratio weights under near-positivity violations.
pub const DEFAULT_TRUNCATION: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyProvenance {
    EstimatedFromData,
    ExternallySupplied,
}

/// Per-row mediator draw probabilities for one instrument level.
#[derive(Clone, Debug)]
pub struct InterventionPolicy {
    pub a_star: u8,
    /// P(M = 1 | W_i) under the stochastic draw, truncated into (0, 1).
    pub g: Vec<f64>,
    pub provenance: PolicyProvenance,
}

/// Fitted conditional mediator model P(M=1 | Z, (A,) W).
#[derive(Clone, Debug)]
pub struct MediatorModel {
    pub fit: GlmFit,
    pub terms: Vec<Term>,
    /// Whether A enters the regression (direct-edge variant).
    pub conditions_on_a: bool,
}

/// Fitted intermediate-confounder model P(Z=1 | A, W).
#[derive(Clone, Debug)]
pub struct ConfounderModel {
    pub fit: GlmFit,
    pub terms: Vec<Term>,
}

/// A policy together with the models that produced it, so the draw
/// probability can be evaluated on new covariate rows.
#[derive(Clone, Debug)]
pub struct FittedIntervention {
    pub policy: InterventionPolicy,
    pub mediator: MediatorModel,
    pub confounder: ConfounderModel,
    pub truncation: f64,
}

pub(crate) fn truncate(p: f64, tau: f64) -> f64 {
    p.clamp(tau, 1.0 - tau)
}

impl MediatorModel {
    /// P(M=1 | Z=z, (A=a,) W) over the dataset rows.
    pub fn predict_at(&self, data: &Dataset, z: Option<u8>, a: Option<u8>, tau: f64) -> Result<Vec<f64>> {
        let mut over = Overrides::none();
        if let Some(zv) = z {
            over.z = Some(zv as f64);
        }
        if let Some(av) = a {
            over.a = Some(av as f64);
        }
        let x = build_design(data, &self.terms, over)?;
        let zeros = vec![0.0; data.n()];
        Ok(predict_proba(&self.fit, &x, &zeros)?
            .into_iter()
            .map(|p| truncate(p, tau))
            .collect())
    }
}

impl ConfounderModel {
    /// P(Z=1 | A=a, W) over the dataset rows.
    pub fn predict_at(&self, data: &Dataset, a: u8, tau: f64) -> Result<Vec<f64>> {
        let x = build_design(data, &self.terms, Overrides::none().with_a(a))?;
        let zeros = vec![0.0; data.n()];
        Ok(predict_proba(&self.fit, &x, &zeros)?
            .into_iter()
            .map(|p| truncate(p, tau))
            .collect())
    }
}

/// Marginalize the mediator model over the confounder:
/// g(W) = P(M=1|Z=1,·) P(Z=1|a*,·) + P(M=1|Z=0,·) (1 - P(Z=1|a*,·)).
pub(crate) fn combine(g_m_z1: f64, g_m_z0: f64, g_z: f64) -> f64 {
    g_m_z1 * g_z + g_m_z0 * (1.0 - g_z)
}

impl FittedIntervention {
    /// Evaluate the fitted draw probability on arbitrary covariate rows.
    pub fn draw_probability(&self, data: &Dataset) -> Result<Vec<f64>> {
        let a_star = self.policy.a_star;
        let cond_a = self.mediator.conditions_on_a.then_some(a_star);
        let gm1 = self.mediator.predict_at(data, Some(1), cond_a, self.truncation)?;
        let gm0 = self.mediator.predict_at(data, Some(0), cond_a, self.truncation)?;
        let gz = self.confounder.predict_at(data, a_star, self.truncation)?;
        Ok((0..data.n())
            .map(|i| truncate(combine(gm1[i], gm0[i], gz[i]), self.truncation))
            .collect())
    }
}

/// Fit the draw distribution for instrument level `a_star`.
///
/// The confounder model is a logistic regression of Z on A and W; the
/// mediator model regresses M on Z and W (adding A under the direct-edge
/// variant). Both are evaluated at counterfactual values and combined by
/// the two-term sum over z.
pub fn fit_intervention(
    data: &Dataset,
    a_star: u8,
    variant: ScmVariant,
    spec: &ModelSpec,
) -> Result<FittedIntervention> {
    if a_star > 1 {
        return Err(Error::InvalidInput(format!("instrument level {a_star} not in {{0,1}}")));
    }
    if data.count_a(a_star) == 0 {
        return Err(Error::NoSupport(a_star));
    }
    let n = data.n();
    let tau = spec.truncation();
    let n_w = data.n_covariates();
    let cond_a = variant == ScmVariant::DirectAe;

    let conf_terms = spec
        .confounder
        .clone()
        .unwrap_or_else(|| default_terms(Regression::Confounder, false, n_w));
    let med_terms = spec
        .mediator
        .clone()
        .unwrap_or_else(|| default_terms(Regression::Mediator, cond_a, n_w));

    let ones = vec![1.0; n];
    let zeros = vec![0.0; n];
    let z_outcome: Vec<f64> = data.z.iter().map(|&v| v as f64).collect();
    let m_outcome: Vec<f64> = data.m.iter().map(|&v| v as f64).collect();

    let conf_x = build_design(data, &conf_terms, Overrides::none())?;
    let conf_fit = fit_logistic(&conf_x, &z_outcome, &ones, &zeros)?;
    let med_x = build_design(data, &med_terms, Overrides::none())?;
    let med_fit = fit_logistic(&med_x, &m_outcome, &ones, &zeros)?;

    let mediator = MediatorModel {
        fit: med_fit,
        terms: med_terms,
        conditions_on_a: cond_a,
    };
    let confounder = ConfounderModel {
        fit: conf_fit,
        terms: conf_terms,
    };

    let fitted = FittedIntervention {
        policy: InterventionPolicy {
            a_star,
            g: Vec::new(),
            provenance: PolicyProvenance::EstimatedFromData,
        },
        mediator,
        confounder,
        truncation: tau,
    };
    let g = fitted.draw_probability(data)?;
    Ok(FittedIntervention {
        policy: InterventionPolicy {
            a_star,
            g,
            provenance: PolicyProvenance::EstimatedFromData,
        },
        ..fitted
    })
}

/// Wrap externally supplied draw probabilities as a policy.
pub fn load_external_policy(values: &[f64], a_star: u8) -> Result<InterventionPolicy> {
    if a_star > 1 {
        return Err(Error::InvalidInput(format!("instrument level {a_star} not in {{0,1}}")));
    }
    for (i, &v) in values.iter().enumerate() {
        if !(v.is_finite() && v > 0.0 && v < 1.0) {
            return Err(Error::BadRow {
                row: i + 1,
                message: format!("policy value {v} not inside (0,1)"),
            });
        }
    }
    Ok(InterventionPolicy {
        a_star,
        g: values.to_vec(),
        provenance: PolicyProvenance::ExternallySupplied,
    })
}

/// Read a policy from a single-column CSV with header `g_star`.
pub fn read_policy_csv<P: AsRef<Path>>(path: P, a_star: u8) -> Result<InterventionPolicy> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == "g_star")
        .ok_or_else(|| Error::Config("policy file must have a 'g_star' column".into()))?;
    let mut values = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let field = record.get(col).ok_or(Error::BadRow {
            row: idx + 1,
            message: "short record".into(),
        })?;
        let v: f64 = field.trim().parse().map_err(|_| Error::BadRow {
            row: idx + 1,
            message: format!("non-numeric policy value '{field}'"),
        })?;
        values.push(v);
    }
    load_external_policy(&values, a_star)
}

/// Write a policy as a single-column CSV with header `g_star`.
pub fn write_policy_csv<P: AsRef<Path>>(policy: &InterventionPolicy, path: P) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["g_star"])?;
    for v in &policy.g {
        writer.write_record([format!("{v}")])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn combine_marginalization_collapses_when_z_irrelevant() {
        // Same mediator probability at both z levels: g_Z cannot matter.
        for gz in [0.0, 0.3, 0.9] {
            assert!((combine(0.4, 0.4, gz) - 0.4).abs() < 1e-15);
        }
        assert!((combine(0.8, 0.2, 0.5) - 0.5).abs() < 1e-15);
        assert!((combine(0.9, 0.1, 0.75) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn external_policy_contract() {
        let ok = load_external_policy(&[0.5, 0.5, 0.5], 0).unwrap();
        assert_eq!(ok.provenance, PolicyProvenance::ExternallySupplied);
        assert!(load_external_policy(&[0.5, 1.0], 0).is_err());
        assert!(load_external_policy(&[0.0], 1).is_err());
    }

    fn random_dataset(n: usize, seed: u64) -> Dataset {
        let mut s = RngStream::new(seed, &[0]);
        let w1: Vec<f64> = (0..n).map(|_| if s.bernoulli(0.5) { 1.0 } else { 0.0 }).collect();
        let a: Vec<u8> = (0..n).map(|_| s.bernoulli(0.5) as u8).collect();
        let z: Vec<u8> = (0..n)
            .map(|i| s.bernoulli(0.2 + 0.3 * a[i] as f64 + 0.2 * w1[i]) as u8)
            .collect();
        let m: Vec<u8> = (0..n)
            .map(|i| s.bernoulli(0.3 + 0.4 * z[i] as f64 + 0.1 * w1[i]) as u8)
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| s.bernoulli(0.2 + 0.2 * (z[i] + m[i]) as f64) as u8 as f64)
            .collect();
        Dataset {
            a,
            z,
            m,
            y,
            w: vec![w1],
            w_names: vec!["W1".into()],
        }
    }

    /// Empirical plug-in: sum over z of the stratum frequencies
    /// P(M=1 | Z=z, W=w) P(Z=z | A=a*, W=w), computed by direct counting.
    fn empirical_plugin(data: &Dataset, a_star: u8) -> Vec<f64> {
        let n = data.n();
        let freq = |pred: &dyn Fn(usize) -> bool, target: &dyn Fn(usize) -> bool| -> f64 {
            let mut num = 0usize;
            let mut den = 0usize;
            for i in 0..n {
                if pred(i) {
                    den += 1;
                    if target(i) {
                        num += 1;
                    }
                }
            }
            num as f64 / den as f64
        };
        (0..n)
            .map(|i| {
                let w = data.w[0][i];
                let mut total = 0.0;
                for z in [0u8, 1u8] {
                    let pm = freq(
                        &|j| data.z[j] == z && data.w[0][j] == w,
                        &|j| data.m[j] == 1,
                    );
                    let pz = freq(
                        &|j| data.a[j] == a_star && data.w[0][j] == w,
                        &|j| data.z[j] == z,
                    );
                    total += pm * pz;
                }
                total
            })
            .collect()
    }

    #[test]
    fn saturated_fit_matches_empirical_plugin() {
        let data = random_dataset(400, 11);
        let spec = ModelSpec {
            truncation: Some(1e-9),
            ..ModelSpec::saturated(1)
        };
        let fitted = fit_intervention(&data, 0, ScmVariant::Iv, &spec).unwrap();
        let plugin = empirical_plugin(&data, 0);
        for i in 0..data.n() {
            assert!(
                (fitted.policy.g[i] - plugin[i]).abs() < 1e-10,
                "row {i}: {} vs {}",
                fitted.policy.g[i],
                plugin[i]
            );
        }
    }

    #[test]
    fn policy_is_convex_combination_of_mediator_levels() {
        let data = random_dataset(300, 5);
        let spec = ModelSpec::main_effects();
        let fitted = fit_intervention(&data, 1, ScmVariant::Iv, &spec).unwrap();
        let gm1 = fitted.mediator.predict_at(&data, Some(1), None, 0.0).unwrap();
        let gm0 = fitted.mediator.predict_at(&data, Some(0), None, 0.0).unwrap();
        for i in 0..data.n() {
            let lo = gm1[i].min(gm0[i]) - 1e-12;
            let hi = gm1[i].max(gm0[i]) + 1e-12;
            assert!(fitted.policy.g[i] >= lo && fitted.policy.g[i] <= hi);
        }
    }

    #[test]
    fn policy_depends_on_level_only_through_confounder_model() {
        // Forcing P(Z=1|A=1,W) and P(Z=1|A=0,W) to coincide (zero A
        // coefficient) makes the draw distributions at the two levels
        // identical row-wise.
        let data = random_dataset(200, 7);
        let spec = ModelSpec::main_effects();
        let mut fitted = fit_intervention(&data, 0, ScmVariant::Iv, &spec).unwrap();
        // Default confounder terms are [A, W...]: the A coefficient sits
        // right after the intercept.
        fitted.confounder.fit.coefficients[1] = 0.0;
        let g_at = |a_star: u8| {
            let f = FittedIntervention {
                policy: InterventionPolicy {
                    a_star,
                    g: Vec::new(),
                    provenance: PolicyProvenance::EstimatedFromData,
                },
                mediator: fitted.mediator.clone(),
                confounder: fitted.confounder.clone(),
                truncation: fitted.truncation,
            };
            f.draw_probability(&data).unwrap()
        };
        assert_eq!(g_at(0), g_at(1));
    }

    #[test]
    fn missing_instrument_level_errors() {
        let mut data = random_dataset(50, 3);
        for ai in data.a.iter_mut() {
            *ai = 1;
        }
        let err = fit_intervention(&data, 0, ScmVariant::Iv, &ModelSpec::main_effects()).unwrap_err();
        assert_eq!(err.to_string(), "no support for instrument level 0");
    }

    #[test]
    fn policy_csv_round_trip() {
        let data = random_dataset(60, 4);
        let fitted = fit_intervention(&data, 0, ScmVariant::Iv, &ModelSpec::main_effects()).unwrap();
        let tmp = tempfile::NamedTempFile::new().unwrap();
        write_policy_csv(&fitted.policy, tmp.path()).unwrap();
        let back = read_policy_csv(tmp.path(), 0).unwrap();
        assert_eq!(back.g, fitted.policy.g);
        assert_eq!(back.provenance, PolicyProvenance::ExternallySupplied);
    }
}

