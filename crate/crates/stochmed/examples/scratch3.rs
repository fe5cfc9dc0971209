use stochmed::data::Dataset;
use stochmed::engine::{EstimateOptions, Estimand, EstimatorKind, ScmVariant, VarianceSpec};
use stochmed::rng::RngStream;
use stochmed::simlab::*;

// Random small dataset with occasional positivity strain: one continuous
// covariate with a strong mediator effect.
fn small_random(seed: u64) -> Dataset {
    let mut s = RngStream::new(seed, &[1]);
    let n = 30;
    let w1: Vec<f64> = (0..n).map(|_| 2.5 * (s.next_f64() - 0.5)).collect();
    let a: Vec<u8> = (0..n).map(|_| s.bernoulli(0.5) as u8).collect();
    let z: Vec<u8> = (0..n)
        .map(|i| s.bernoulli(sig(0.4 + 1.0 * a[i] as f64 + 0.8 * w1[i])) as u8)
        .collect();
    let m: Vec<u8> = (0..n)
        .map(|i| s.bernoulli(sig(-0.5 + 1.2 * z[i] as f64 + 2.5 * w1[i])) as u8)
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|i| s.bernoulli(sig(0.2 + 0.8 * z[i] as f64 + 0.9 * m[i] as f64 - 0.5 * w1[i])) as u8 as f64)
        .collect();
    Dataset { a, z, m, y, w: vec![w1], w_names: vec!["W1".into()] }
}

fn sig(x: f64) -> f64 { 1.0 / (1.0 + (-x).exp()) }

fn main() {
    // epsilon distribution at N=5000 under correct models
    let mut within = 0;
    let reps = 400u64;
    let mut max_eps = 0.0f64;
    for r in 0..reps {
        let dgm = DgmSpec::reference(5000, 1, 555);
        let data = generate_dgm(&dgm, r);
        let opts = EstimateOptions {
            estimators: vec![EstimatorKind::Tmle],
            variance: VarianceSpec::None,
            spec: model_spec_for_arm(SpecArm::Correct, ScmVariant::Iv),
            ..EstimateOptions::default()
        };
        let rep = stochmed::engine::estimate_effects(&data, ScmVariant::Iv, &opts).unwrap();
        let ok = rep
            .diagnostics
            .iter()
            .filter(|d| d.estimator == EstimatorKind::Tmle)
            .all(|d| d.epsilon.abs() < 0.1);
        for d in &rep.diagnostics {
            max_eps = max_eps.max(d.epsilon.abs());
        }
        if ok { within += 1; }
    }
    println!("eps<0.1 in {}/{} replicates ({:.1}%), max |eps| {:.3}", within, reps, 100.0 * within as f64 / reps as f64, max_eps);

    // plug-in witness search over 1000 small datasets
    let mut tmle_ok = true;
    let mut witnesses = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..1000u64 {
        let data = small_random(seed);
        if data.a.iter().filter(|&&v| v == 1).count() == 0
            || data.a.iter().filter(|&&v| v == 0).count() == 0
        {
            continue;
        }
        let opts = EstimateOptions { variance: VarianceSpec::None, ..EstimateOptions::default() };
        match stochmed::engine::estimate_effects(&data, ScmVariant::Iv, &opts) {
            Ok(rep) => {
                for est in EstimatorKind::all() {
                    for (a, lvl) in [(1u8, 1u8), (1, 0), (0, 0)] {
                        let p = rep.point(est, Estimand::Psi { a, policy_level: lvl }).unwrap();
                        if est == EstimatorKind::Tmle {
                            if !(0.0..=1.0).contains(&p) { tmle_ok = false; }
                        } else if !(0.0..=1.0).contains(&p) {
                            witnesses += 1;
                            worst = worst.max((p - 0.5).abs());
                        }
                    }
                }
            }
            Err(_) => {}
        }
    }
    println!("tmle in [0,1]: {tmle_ok}; ee/iptw witnesses outside: {witnesses}; worst |psi-0.5| {worst:.2}");
}
