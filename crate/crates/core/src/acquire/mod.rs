//! Candidate acquisition: search the surrogate under an infill criterion and
//! estimate the internal improvement of the result.

mod evo;
mod infill;

pub use evo::{evolve, EvoConfig, Operators, SearchResult};
pub use infill::{infill_value, InfillCriterion, InfillKind};

use crate::rng::RngStream;
use crate::surrogate::Surrogate;
use crate::task::Database;

/// The surrogate-acquired candidate and its internal improvement.
#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionResult {
    pub x_p: Vec<f64>,
    pub infill_at_xp: f64,
    /// Minimum infill value over the database.
    pub baseline: f64,
    /// `baseline - infill_at_xp`.
    pub delta_in: f64,
}

/// Infill values of every database point.
pub fn infill_over_db(
    model: &dyn Surrogate,
    db: &Database,
    criterion: &InfillCriterion,
    y_min: f64,
) -> Vec<f64> {
    db.points()
        .iter()
        .map(|x| infill_value(criterion, model.predict(x), y_min).unwrap_or(f64::INFINITY))
        .collect()
}

/// Searches `model` for the most promising point; no real evaluations happen.
pub fn acquire_candidate(
    model: &dyn Surrogate,
    db: &Database,
    criterion: &InfillCriterion,
    evo: &EvoConfig,
    rng: &mut RngStream,
) -> AcquisitionResult {
    let dim = db.dim().expect("acquire_candidate needs a non-empty database");
    let y_min = db.best_value().unwrap_or(f64::INFINITY);
    let on_db = infill_over_db(model, db, criterion, y_min);
    let baseline = on_db.iter().copied().fold(f64::INFINITY, f64::min);

    let mut order: Vec<usize> = (0..db.len()).collect();
    order.sort_by(|&a, &b| on_db[a].total_cmp(&on_db[b]));
    let elites: Vec<Vec<f64>> = order
        .iter()
        .take(evo.elite_slots())
        .map(|&i| db.points()[i].clone())
        .collect();

    let objective =
        |x: &[f64]| infill_value(criterion, model.predict(x), y_min).unwrap_or(f64::INFINITY);
    let found = evolve(objective, dim, &elites, evo, rng);
    AcquisitionResult {
        infill_at_xp: found.best_value,
        delta_in: baseline - found.best_value,
        baseline,
        x_p: found.best,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::Prediction;

    struct Quadratic;

    impl Surrogate for Quadratic {
        fn predict(&self, x: &[f64]) -> Prediction {
            Prediction {
                mean: 5.0 + (x[0] - 0.3).powi(2),
                std: 0.0,
            }
        }
    }

    struct Table(Vec<(f64, f64)>);

    impl Surrogate for Table {
        fn predict(&self, x: &[f64]) -> Prediction {
            let mean = self
                .0
                .iter()
                .find(|(p, _)| (p - x[0]).abs() < 1e-12)
                .map(|(_, v)| *v)
                .unwrap_or(4.2);
            Prediction { mean, std: 0.0 }
        }
    }

    fn db_1d(points: &[f64]) -> Database {
        Database::from_parts(
            points.iter().map(|p| vec![*p]).collect(),
            points.iter().map(|p| 5.0 + p).collect(),
        )
        .unwrap()
    }

    #[test]
    fn finds_quadratic_minimum() {
        // grid oracle: argmin over 10^4 points
        let oracle = (0..10_000)
            .map(|i| i as f64 / 9_999.0)
            .min_by(|a, b| Quadratic.predict(&[*a]).mean.total_cmp(&Quadratic.predict(&[*b]).mean))
            .unwrap();
        assert!((oracle - 0.3).abs() < 1e-4);
        let db = db_1d(&[0.05, 0.5, 0.9]);
        for evo in [EvoConfig::default(), EvoConfig::de()] {
            let hits = (0..10)
                .filter(|&seed| {
                    let r = acquire_candidate(
                        &Quadratic,
                        &db,
                        &InfillCriterion::pov(),
                        &evo,
                        &mut RngStream::new(seed),
                    );
                    (r.x_p[0] - oracle).abs() <= 0.01
                })
                .count();
            assert!(hits >= 9, "{hits}/10 for {:?}", evo.operators);
        }
    }

    #[test]
    fn delta_in_arithmetic() {
        // db infill minimum 5.0, any off-db point 4.2
        let table = Table(vec![(0.1, 5.0), (0.6, 7.0)]);
        let db = db_1d(&[0.1, 0.6]);
        let r = acquire_candidate(
            &table,
            &db,
            &InfillCriterion::pov(),
            &EvoConfig::default(),
            &mut RngStream::new(1),
        );
        assert_eq!(r.baseline, 5.0);
        assert_eq!(r.infill_at_xp, 4.2);
        assert!((r.delta_in - 0.8).abs() < 1e-12);
    }

    #[test]
    fn no_improvement_when_db_point_is_best() {
        struct Flat;
        impl Surrogate for Flat {
            fn predict(&self, x: &[f64]) -> Prediction {
                Prediction {
                    mean: (x[0] - 0.5).abs(),
                    std: 0.0,
                }
            }
        }
        let db = db_1d(&[0.5, 0.9]);
        let r = acquire_candidate(
            &Flat,
            &db,
            &InfillCriterion::pov(),
            &EvoConfig::default(),
            &mut RngStream::new(2),
        );
        assert_eq!(r.x_p, vec![0.5]);
        assert_eq!(r.delta_in, 0.0);
    }

    #[test]
    fn delta_in_identity_recomputed() {
        use crate::surrogate::{GprConfig, GprModel};
        let mut rng = RngStream::new(17);
        let pts = crate::sampling::lhs_sample(12, 2, &mut rng).unwrap();
        let ys: Vec<f64> = pts.iter().map(|p| (p[0] - 0.2).powi(2) + p[1]).collect();
        let db = Database::from_parts(pts.clone(), ys.clone()).unwrap();
        let model = GprModel::fit(&pts, &ys, &GprConfig::default()).unwrap();
        for crit in [InfillCriterion::pov(), InfillCriterion::ei(), InfillCriterion::lcb()] {
            let r = acquire_candidate(&model, &db, &crit, &EvoConfig::default(), &mut rng);
            let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
            let base = pts
                .iter()
                .map(|p| infill_value(&crit, model.predict(p), y_min).unwrap())
                .fold(f64::INFINITY, f64::min);
            let at_xp = infill_value(&crit, model.predict(&r.x_p), y_min).unwrap();
            assert_eq!(r.delta_in, base - at_xp);
            assert!(r.delta_in >= 0.0);
        }
    }
}
