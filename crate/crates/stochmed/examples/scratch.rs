use stochmed::engine::{EstimatorKind, ScmVariant};
use stochmed::simlab::*;

fn main() {
    let which: String = std::env::args().nth(1).unwrap_or_else(|| "dd".into());
    match which.as_str() {
        "dd" => {
            // Criterion 1+2 shape: data-dependent, IC, N=5000
            let t0 = std::time::Instant::now();
            let study = StudyConfig {
                dgm: DgmSpec::reference(5000, 2000, 20260810),
                sample_sizes: vec![5000],
                estimators: EstimatorKind::all(),
                variant: ScmVariant::Iv,
                variance: StudyVariance::Ic,
                flavor: ParameterFlavor::DataDependent,
                pct_bias: PctBiasMode::MeanRatio,
            };
            let rep = run_study(&study).unwrap();
            println!("took {:.1}s; scores d1 {:.2e} d2 {:.2e}", t0.elapsed().as_secs_f64(), rep.max_abs_score_d1, rep.max_abs_score_d2);
            println!("{}", rep.to_csv());
        }
        "missy" => {
            let t0 = std::time::Instant::now();
            let study = StudyConfig {
                dgm: DgmSpec { arm: SpecArm::YOnZOnly, ..DgmSpec::reference(5000, 2000, 77) },
                sample_sizes: vec![5000],
                estimators: vec![EstimatorKind::Tmle, EstimatorKind::Ee],
                variant: ScmVariant::Iv,
                variance: StudyVariance::Ic,
                flavor: ParameterFlavor::DataDependent,
                pct_bias: PctBiasMode::MeanRatio,
            };
            let rep = run_study(&study).unwrap();
            println!("took {:.1}s; scores d1 {:.2e} d2 {:.2e}", t0.elapsed().as_secs_f64(), rep.max_abs_score_d1, rep.max_abs_score_d2);
            println!("{}", rep.to_csv());
        }
        "boot" => {
            // Criterion 4 shape: fixed flavor, bootstrap B=500, N=500
            let t0 = std::time::Instant::now();
            let study = StudyConfig {
                dgm: DgmSpec::reference(500, 250, 4242),
                sample_sizes: vec![500],
                estimators: vec![EstimatorKind::Tmle],
                variant: ScmVariant::Iv,
                variance: StudyVariance::Bootstrap { reps: 500 },
                flavor: ParameterFlavor::Fixed,
                pct_bias: PctBiasMode::MeanRatio,
            };
            let rep = run_study(&study).unwrap();
            println!("took {:.1}s; scores d1 {:.2e} d2 {:.2e}", t0.elapsed().as_secs_f64(), rep.max_abs_score_d1, rep.max_abs_score_d2);
            println!("{}", rep.to_csv());
        }
        other => panic!("unknown mode {other}"),
    }
}
