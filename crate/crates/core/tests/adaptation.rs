//! Translation recovery and invariances of surrogate-based domain adaptation.

use sas_ckt::adapt::{adapted_similarity, regularizer, sda_fit, SdaConfig};
use sas_ckt::rng::RngStream;
use sas_ckt::sampling::lhs_sample;
use sas_ckt::stats::rank_vector;
use sas_ckt::surrogate::{Prediction, RbfModel, Surrogate};
use sas_ckt::task::Database;

const TARGET_OPT: [f64; 2] = [0.5, 0.4];
const SHIFT: [f64; 2] = [0.3, -0.2];

fn target(x: &[f64]) -> f64 {
    (x[0] - TARGET_OPT[0]).powi(2) + (x[1] - TARGET_OPT[1]).powi(2)
}

/// Source whose solutions map onto the target by `x + SHIFT`.
fn source(x: &[f64]) -> f64 {
    target(&[x[0] + SHIFT[0], x[1] + SHIFT[1]])
}

fn setup(seed: u64) -> (RbfModel, Database) {
    let mut rng = RngStream::new(seed);
    let sx = lhs_sample(100, 2, &mut rng).unwrap();
    let sy: Vec<f64> = sx.iter().map(|p| source(p)).collect();
    let tx = lhs_sample(40, 2, &mut rng).unwrap();
    let ty: Vec<f64> = tx.iter().map(|p| target(p)).collect();
    (RbfModel::fit(&sx, &sy).unwrap(), Database::from_parts(tx, ty).unwrap())
}

#[test]
fn recovers_translation_up_to_regularizer_pull() {
    let cfg = SdaConfig { eval_budget: 2000, ..SdaConfig::default() };
    for seed in 0..10 {
        let (surrogate, db) = setup(seed);
        let map = sda_fit(&surrogate, &db, &cfg, &mut RngStream::new(100 + seed)).unwrap();
        let ranks = rank_vector(db.values()).unwrap();
        let (at_truth, _) = adapted_similarity(&surrogate, &db, &ranks, &SHIFT);
        let (at_zero, _) = adapted_similarity(&surrogate, &db, &ranks, &[0.0, 0.0]);

        // The search reaches at least the objective of the true shift, while
        // the regularizer drags the estimate a little toward the origin.
        assert!(map.s_adapted >= at_truth, "seed {seed}: {} < {at_truth}", map.s_adapted);
        assert!(map.s_adapted >= at_zero);
        assert!(map.s_adapted >= 0.9 * regularizer(&SHIFT));
        let err = map.theta.iter().zip(SHIFT).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 0.1, "seed {seed}: theta {:?}", map.theta);
        assert!(map.evaluations <= cfg.eval_budget);
    }
}

struct Transformed<'a>(&'a RbfModel);

impl Surrogate for Transformed<'_> {
    fn predict(&self, x: &[f64]) -> Prediction {
        let p = self.0.predict(x);
        Prediction { mean: (p.mean * 3.0).exp() + p.mean.powi(3), std: p.std }
    }
}

#[test]
fn similarity_unchanged_by_increasing_output_transform() {
    let (surrogate, db) = setup(3);
    let wrapped = Transformed(&surrogate);
    let ranks = rank_vector(db.values()).unwrap();
    for theta in [[0.0, 0.0], [0.3, -0.2], [0.1, 0.05]] {
        let a = adapted_similarity(&surrogate, &db, &ranks, &theta);
        let b = adapted_similarity(&wrapped, &db, &ranks, &theta);
        assert_eq!(a, b);
    }
    let cfg = SdaConfig::default();
    let ma = sda_fit(&surrogate, &db, &cfg, &mut RngStream::new(1)).unwrap();
    let mb = sda_fit(&wrapped, &db, &cfg, &mut RngStream::new(1)).unwrap();
    assert_eq!(ma, mb);
}
