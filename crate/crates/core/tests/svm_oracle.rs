mod common;

use common::svm::{grid_oracle, instance, separable};
use dedvad::classifier::{class_weights, svm_objective, train_linear_svm, ClassWeighting, SvmSolver, SvmTrainConfig};

#[test]
fn hinge_objective_within_one_percent_of_grid_oracle() {
    let cfg = SvmTrainConfig {
        standardize: false,
        ..SvmTrainConfig::default()
    };
    for seed in 0..20 {
        let (x, y) = instance(seed);
        let sw = class_weights(&y, ClassWeighting::InverseFrequency);
        let (w, b) = train_linear_svm(x.view(), &y, &cfg).unwrap();
        let ours = svm_objective(x.view(), &y, &sw, &w, b, cfg.c);
        let oracle = grid_oracle(&x, &y, &sw, cfg.c);
        assert!(ours <= oracle * 1.01, "seed {seed}: {ours} vs oracle {oracle}");
    }
}

#[test]
fn separable_instances_are_fit_exactly() {
    for solver in [SvmSolver::Smo, SvmSolver::Subgradient] {
        let cfg = SvmTrainConfig {
            solver,
            ..SvmTrainConfig::default()
        };
        for seed in 0..10 {
            let (x, y) = separable(seed, 40, 2.5);
            let (w, b) = train_linear_svm(x.view(), &y, &cfg).unwrap();
            for (row, &label) in x.rows().into_iter().zip(&y) {
                let s = row.dot(&ndarray::ArrayView1::from(&w[..])) + b;
                assert_eq!(s > 0.0, label == 1, "{solver:?} seed {seed}");
            }
        }
    }
}

#[test]
fn subgradient_solver_approaches_the_optimum() {
    let smo = SvmTrainConfig {
        standardize: false,
        ..SvmTrainConfig::default()
    };
    let sub = SvmTrainConfig {
        solver: SvmSolver::Subgradient,
        epochs: 2000,
        ..smo.clone()
    };
    for seed in 0..5 {
        let (x, y) = instance(seed);
        let sw = class_weights(&y, ClassWeighting::InverseFrequency);
        let obj = |cfg: &SvmTrainConfig| {
            let (w, b) = train_linear_svm(x.view(), &y, cfg).unwrap();
            svm_objective(x.view(), &y, &sw, &w, b, cfg.c)
        };
        let (exact, approx) = (obj(&smo), obj(&sub));
        assert!(approx >= exact - 1e-9 && approx <= exact * 1.25, "seed {seed}: {approx} vs {exact}");
    }
}
