//! Model configuration: which terms enter each nuisance regression.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linmod::DesignMatrix;

/// A variable usable inside a regression term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    A,
    Z,
    M,
    /// Zero-based index into the dataset's covariate columns.
    W(usize),
}

/// A product of variables (main effect when length one). The intercept is
/// always included implicitly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term(pub Vec<Var>);

impl Term {
    pub fn main(v: Var) -> Term {
        Term(vec![v])
    }

    pub fn interaction(vs: &[Var]) -> Term {
        Term(vs.to_vec())
    }

    /// Parse "Z", "W2", or products like "Z:W2". W columns are addressed as
    /// W1..Wk in covariate order.
    pub fn parse(text: &str) -> Result<Term> {
        let factors = text
            .split(':')
            .map(|f| match f.trim() {
                "A" | "a" => Ok(Var::A),
                "Z" | "z" => Ok(Var::Z),
                "M" | "m" => Ok(Var::M),
                other => {
                    let rest = other
                        .strip_prefix('W')
                        .or_else(|| other.strip_prefix('w'))
                        .ok_or_else(|| Error::Config(format!("unknown term variable '{other}'")))?;
                    let idx: usize = rest
                        .parse()
                        .map_err(|_| Error::Config(format!("unknown term variable '{other}'")))?;
                    if idx == 0 {
                        return Err(Error::Config("covariates are numbered from W1".into()));
                    }
                    Ok(Var::W(idx - 1))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if factors.is_empty() {
            return Err(Error::Config("empty model term".into()));
        }
        Ok(Term(factors))
    }
}

/// Per-regression term lists; `None` selects the variant's default
/// main-effects specification.
#[derive(Clone, Debug, Default)]
pub struct ModelSpec {
    pub outcome: Option<Vec<Term>>,
    pub mediator: Option<Vec<Term>>,
    pub confounder: Option<Vec<Term>>,
    /// Propensity model terms (conditional-treatment variant only).
    pub treatment: Option<Vec<Term>>,
    /// Terms for the regression of the mediator-marginalized predictions on
    /// baselines; defaults to all W main effects.
    pub baseline: Option<Vec<Term>>,
    /// Truncation applied to every estimated nuisance probability.
    pub truncation: Option<f64>,
}

impl ModelSpec {
    pub fn truncation(&self) -> f64 {
        self.truncation.unwrap_or(crate::intervention::DEFAULT_TRUNCATION)
    }

    /// All-main-effects defaults for every model.
    pub fn main_effects() -> ModelSpec {
        ModelSpec::default()
    }

    /// Fully saturated models over binary A/Z/M and the given number of
    /// binary covariates: all interactions of the listed variables.
    pub fn saturated(n_w: usize) -> ModelSpec {
        let w_vars: Vec<Var> = (0..n_w).map(Var::W).collect();
        let all_with = |base: &[Var]| -> Vec<Term> {
            let mut vars = base.to_vec();
            vars.extend(w_vars.iter().copied());
            power_set_terms(&vars)
        };
        ModelSpec {
            outcome: Some(all_with(&[Var::M, Var::Z])),
            mediator: Some(all_with(&[Var::Z])),
            confounder: Some(all_with(&[Var::A])),
            treatment: Some(power_set_terms(&w_vars)),
            baseline: Some(power_set_terms(&w_vars)),
            truncation: None,
        }
    }

    /// Saturated models that also condition on A in the outcome and
    /// mediator regressions (for the variant with direct treatment edges).
    pub fn saturated_with_treatment_edges(n_w: usize) -> ModelSpec {
        let w_vars: Vec<Var> = (0..n_w).map(Var::W).collect();
        let all_with = |base: &[Var]| -> Vec<Term> {
            let mut vars = base.to_vec();
            vars.extend(w_vars.iter().copied());
            power_set_terms(&vars)
        };
        ModelSpec {
            outcome: Some(all_with(&[Var::M, Var::Z, Var::A])),
            mediator: Some(all_with(&[Var::Z, Var::A])),
            ..ModelSpec::saturated(n_w)
        }
    }
}

fn power_set_terms(vars: &[Var]) -> Vec<Term> {
    let mut terms = Vec::new();
    let k = vars.len();
    for mask in 1u32..(1 << k) {
        let subset: Vec<Var> = (0..k).filter(|&j| mask & (1 << j) != 0).map(|j| vars[j]).collect();
        terms.push(Term(subset));
    }
    terms
}

/// Default main-effect term lists.
pub fn default_terms(which: Regression, conditions_on_a: bool, n_w: usize) -> Vec<Term> {
    let mut terms: Vec<Term> = Vec::new();
    match which {
        Regression::Outcome => {
            terms.push(Term::main(Var::M));
            terms.push(Term::main(Var::Z));
            if conditions_on_a {
                terms.push(Term::main(Var::A));
            }
        }
        Regression::Mediator => {
            terms.push(Term::main(Var::Z));
            if conditions_on_a {
                terms.push(Term::main(Var::A));
            }
        }
        Regression::Confounder => terms.push(Term::main(Var::A)),
        Regression::Treatment | Regression::Baseline => {}
    }
    terms.extend((0..n_w).map(|j| Term::main(Var::W(j))));
    terms
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regression {
    Outcome,
    Mediator,
    Confounder,
    Treatment,
    Baseline,
}

/// Fixed values substituted for variables when building counterfactual
/// design matrices (e.g. M=1, or A=a*).
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub a: Option<f64>,
    pub z: Option<f64>,
    pub m: Option<f64>,
}

impl Overrides {
    pub fn none() -> Overrides {
        Overrides::default()
    }

    pub fn m(v: u8) -> Overrides {
        Overrides {
            m: Some(v as f64),
            ..Overrides::default()
        }
    }

    pub fn z(v: u8) -> Overrides {
        Overrides {
            z: Some(v as f64),
            ..Overrides::default()
        }
    }

    pub fn with_a(mut self, v: u8) -> Overrides {
        self.a = Some(v as f64);
        self
    }
}

/// Build the design matrix for `terms` over the dataset, with an implicit
/// intercept and optional variable overrides.
pub fn build_design(data: &Dataset, terms: &[Term], over: Overrides) -> Result<DesignMatrix> {
    let n = data.n();
    let value = |v: Var, i: usize| -> Result<f64> {
        Ok(match v {
            Var::A => over.a.unwrap_or(data.a[i] as f64),
            Var::Z => over.z.unwrap_or(data.z[i] as f64),
            Var::M => over.m.unwrap_or(data.m[i] as f64),
            Var::W(j) => {
                let col = data.w.get(j).ok_or_else(|| {
                    Error::Config(format!("term references W{} but data has {} covariates", j + 1, data.w.len()))
                })?;
                col[i]
            }
        })
    };
    let p = terms.len() + 1;
    let mut entries = Vec::with_capacity(n * p);
    for i in 0..n {
        entries.push(1.0);
        for t in terms {
            let mut prod = 1.0;
            for &v in &t.0 {
                prod *= value(v, i)?;
            }
            entries.push(prod);
        }
    }
    DesignMatrix::new(n, p, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset {
            a: vec![1, 0],
            z: vec![0, 1],
            m: vec![1, 1],
            y: vec![1.0, 0.0],
            w: vec![vec![0.5, -1.0]],
            w_names: vec!["W1".into()],
        }
    }

    #[test]
    fn parse_terms() {
        assert_eq!(Term::parse("Z").unwrap(), Term::main(Var::Z));
        assert_eq!(
            Term::parse("Z:W2").unwrap(),
            Term::interaction(&[Var::Z, Var::W(1)])
        );
        assert!(Term::parse("Q").is_err());
        assert!(Term::parse("W0").is_err());
    }

    #[test]
    fn design_with_overrides() {
        let data = toy();
        let terms = vec![Term::main(Var::Z), Term::interaction(&[Var::Z, Var::W(0)])];
        let x = build_design(&data, &terms, Overrides::z(1)).unwrap();
        assert_eq!(x.n_cols(), 3);
        assert_eq!(x.row(0), &[1.0, 1.0, 0.5]);
        assert_eq!(x.row(1), &[1.0, 1.0, -1.0]);
    }

    #[test]
    fn saturated_term_count() {
        // M, Z plus two covariates: 2^4 - 1 non-empty subsets.
        let spec = ModelSpec::saturated(2);
        assert_eq!(spec.outcome.unwrap().len(), 15);
        assert_eq!(spec.treatment.unwrap().len(), 3);
    }

    #[test]
    fn unknown_covariate_is_an_error() {
        let data = toy();
        let terms = vec![Term::main(Var::W(3))];
        assert!(build_design(&data, &terms, Overrides::none()).is_err());
    }
}
