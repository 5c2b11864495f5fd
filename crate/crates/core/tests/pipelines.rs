use conformal::lab::{Generated, GeneratorModel, GeneratorSpec, Recipe};
use conformal::multihorizon::{
    cfrnn_calibrate, collect_horizon_scores, copula_calibrate, CopulaSearch, HorizonScores,
};
use conformal::online::{Aggregation, EnbpiConfig, EnbpiState};
use conformal::{split, ConfidenceLevel, Dataset, Predictor, ScoreFunction, SplitConformal};
use proptest::prelude::*;

fn level(a: f64) -> ConfidenceLevel {
    ConfidenceLevel::new(a).unwrap()
}

fn rows(model: GeneratorModel, seed: u64) -> Dataset {
    GeneratorSpec {
        model,
        noise: 1.0,
        seed,
    }
    .generate()
    .unwrap()
    .rows()
    .unwrap()
    .clone()
}

fn coverage<P: Predictor>(cp: &SplitConformal<P>, test: &Dataset) -> f64 {
    let hits = test
        .rows()
        .iter()
        .filter(|r| cp.predict(&r.x).unwrap().contains(&r.y))
        .count();
    hits as f64 / test.len() as f64
}

#[test]
fn every_score_function_reaches_nominal_coverage() {
    let model = GeneratorModel::Heteroscedastic {
        n: 3000,
        outlier_rate: 0.0,
    };
    let parts = split(&rows(model.clone(), 1), 0.5, 1).unwrap();
    let test = rows(
        GeneratorModel::Heteroscedastic {
            n: 4000,
            outlier_rate: 0.0,
        },
        2,
    );
    let setups = [
        (
            Recipe::LinearAr { order: 1 },
            ScoreFunction::AbsoluteResidual,
        ),
        (
            Recipe::Normalized {
                base: Box::new(Recipe::LinearAr { order: 1 }),
                neighbors: 50,
            },
            ScoreFunction::NormalizedResidual,
        ),
        (
            Recipe::LinearQuantile { lo: 0.05, hi: 0.95 },
            ScoreFunction::Cqr,
        ),
    ];
    for (recipe, score_fn) in setups {
        let cp = SplitConformal::fit(&recipe, &parts, score_fn, level(0.1)).unwrap();
        let c = coverage(&cp, &test);
        // one calibration draw: its conditional coverage has sd ~ 0.008 at n_cal = 1500
        assert!((c - 0.9).abs() < 0.03, "{score_fn:?}: {c}");
    }
}

#[test]
fn enbpi_is_reproducible_from_its_seed() {
    let data = rows(GeneratorModel::Ar1 { n: 200, rho: 0.5 }, 4);
    let run = |seed| {
        let config = EnbpiConfig {
            models: 8,
            aggregation: Aggregation::Median,
            window: 5,
            seed,
        };
        let mut s =
            EnbpiState::fit(&data.slice(0..120), &Recipe::LinearAr { order: 1 }, config).unwrap();
        s.stream(&data.slice(120..200), level(0.1)).unwrap()
    };
    let (a, b, c) = (run(1), run(1), run(2));
    assert_eq!(
        a.iter().map(|r| r.interval.clone()).collect::<Vec<_>>(),
        b.iter().map(|r| r.interval.clone()).collect::<Vec<_>>()
    );
    assert_ne!(
        a.iter().map(|r| r.interval.clone()).collect::<Vec<_>>(),
        c.iter().map(|r| r.interval.clone()).collect::<Vec<_>>()
    );
}

#[test]
fn multi_horizon_thresholds_order() {
    let spec = GeneratorSpec {
        model: GeneratorModel::MultiHorizon {
            n: 400,
            t: 10,
            k: 4,
            correlation: 0.9,
        },
        noise: 0.2,
        seed: 5,
    };
    let Generated::Trajectories { series, .. } = spec.generate().unwrap() else {
        unreachable!()
    };
    let model = conformal::lab::LinearDirect::fit(&series[..200], 2).unwrap();
    let hs =
        collect_horizon_scores(&series[200..], &model, ScoreFunction::AbsoluteResidual).unwrap();
    let bonf = cfrnn_calibrate(&hs, level(0.1)).unwrap();
    let cop = copula_calibrate(&hs, level(0.1), CopulaSearch::SharedLevel).unwrap();
    // with strongly dependent steps the copula never needs more than Bonferroni
    for (c, b) in cop.thresholds.iter().zip(&bonf) {
        assert!(c <= b, "{c} > {b}");
    }
    // noise grows with the step, and so do the thresholds
    assert!(bonf.windows(2).all(|w| w[0] < w[1]));
}

proptest! {
    #[test]
    fn copula_search_is_feasible_and_monotone_in_epsilon(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 3), 5..30),
        e1 in 0.05f64..0.5,
        de in 0.0f64..0.3,
    ) {
        let hs = HorizonScores::from_rows(rows).unwrap();
        let tight = copula_calibrate(&hs, level(e1), CopulaSearch::SharedLevel).unwrap();
        let loose = copula_calibrate(&hs, level((e1 + de).min(0.95)), CopulaSearch::SharedLevel).unwrap();
        prop_assert!(tight.copula_value >= 1.0 - e1 - 1e-12);
        prop_assert!(loose.shared_rank <= tight.shared_rank);
        for (l, t) in loose.thresholds.iter().zip(&tight.thresholds) {
            prop_assert!(l <= t);
        }
    }
}
