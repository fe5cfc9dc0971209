use stochmed::engine::{EstimateOptions, Estimand, EstimatorKind, ScmVariant, VarianceSpec};
use stochmed::model::ModelSpec;
use stochmed::simlab::*;

fn check_variant(name: &str, coefs: DgmCoefficients, variant: ScmVariant, n: usize, spec: ModelSpec) {
    let t0 = std::time::Instant::now();
    let dgm = DgmSpec { coefficients: coefs, arm: SpecArm::Correct, sample_size: n, replicates: 1, seed: 31 };
    let data = generate_dgm(&dgm, 0);
    let truth = compute_truth(&dgm.coefficients);
    let opts = EstimateOptions { variance: VarianceSpec::None, spec, ..EstimateOptions::default() };
    let report = stochmed::engine::estimate_effects(&data, variant, &opts).unwrap();
    println!("[{name}] n_analysis={} took {:.1}s", report.n, t0.elapsed().as_secs_f64());
    for est in EstimatorKind::all() {
        let psi1 = report.point(est, Estimand::Psi { a: 1, policy_level: 1 }).unwrap();
        let psi2 = report.point(est, Estimand::Psi { a: 1, policy_level: 0 }).unwrap();
        let psi3 = report.point(est, Estimand::Psi { a: 0, policy_level: 0 }).unwrap();
        let sde = report.point(est, Estimand::Sde).unwrap();
        let sie = report.point(est, Estimand::Sie).unwrap();
        println!(
            "  {}: errs psi {:.2e} {:.2e} {:.2e} sde {:.2e} sie {:.2e}",
            est.as_str(),
            (psi1 - truth.psi_a1_g1).abs(),
            (psi2 - truth.psi_a1_g0).abs(),
            (psi3 - truth.psi_a0_g0).abs(),
            (sde - truth.sde).abs(),
            (sie - truth.sie).abs()
        );
    }
    let mut d1 = 0.0f64;
    let mut d2 = 0.0f64;
    for d in &report.diagnostics {
        if d.estimator == EstimatorKind::Tmle {
            d1 = d1.max(d.score_d1.abs());
            d2 = d2.max(d.score_d2.abs());
        }
    }
    println!("  tmle max |Pn d1| {:.2e} |Pn d2| {:.2e}", d1, d2);
}

fn main() {
    check_variant("iv saturated 1e6", DgmCoefficients::reference(), ScmVariant::Iv, 1_000_000, ModelSpec::saturated(2));
    check_variant("nonrandom-a 1e6", DgmCoefficients::reference_nonrandom_treatment(), ScmVariant::NonrandomA, 1_000_000, ModelSpec::saturated(2));
    check_variant("direct-ae 1e6", DgmCoefficients::reference_direct_effects(), ScmVariant::DirectAe, 1_000_000, ModelSpec::saturated_with_treatment_edges(2));
}
