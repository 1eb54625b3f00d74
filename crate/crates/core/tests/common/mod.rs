#![allow(dead_code)]

use ensemble_minimax::model::{berger_g, make_geometric_covariance, theta_on_diagonal};
use ensemble_minimax::{CovarianceSpec, MeanVector, PhiSpec, ShrinkageMatrix, ShrinkageRule};

pub struct OrdinaryCase {
    pub name: &'static str,
    pub rule: ShrinkageRule,
    pub theta: MeanVector,
}

pub struct EnsembleCase {
    pub name: &'static str,
    pub rule: ShrinkageRule,
    pub tau: f64,
}

fn geo(p: usize, a: f64) -> CovarianceSpec {
    make_geometric_covariance(p, a).unwrap()
}

fn stein(c1: f64, c2: f64) -> PhiSpec {
    PhiSpec::stein_form(c1, c2).unwrap()
}

fn diag(m: f64, s: &CovarianceSpec) -> MeanVector {
    theta_on_diagonal(m, s).unwrap()
}

fn theta(v: &[f64]) -> MeanVector {
    MeanVector::new(v.to_vec()).unwrap()
}

fn rules() -> Vec<(&'static str, ShrinkageRule)> {
    let s3 = CovarianceSpec::new(vec![10.0, 5.0, 1.0]).unwrap();
    let s5 = geo(5, 1.2);
    vec![
        ("js-variant p10 a1.01", ShrinkageRule::james_stein_variant(geo(10, 1.01)).unwrap()),
        ("gb p10 a1.5", ShrinkageRule::generalized_bayes(geo(10, 1.5)).unwrap()),
        ("gb p3 a2", ShrinkageRule::generalized_bayes(geo(3, 2.0)).unwrap()),
        (
            "classic js p10",
            ShrinkageRule::new(CovarianceSpec::identity(10).unwrap(), ShrinkageMatrix::identity(10), stein(8.0, 0.0)).unwrap(),
        ),
        ("stein berger p4", {
            let s = geo(4, 1.3);
            let g = berger_g(&s);
            ShrinkageRule::new(s, g, stein(2.0, 1.0)).unwrap()
        }),
        ("gb p6 a1.25", ShrinkageRule::generalized_bayes(geo(6, 1.25)).unwrap()),
        ("stein casella p3", ShrinkageRule::casella(s3, stein(1.0, 1.0)).unwrap()),
        ("mle p5", ShrinkageRule::mle(geo(5, 1.4)).unwrap()),
        ("gb p10 a1.05", ShrinkageRule::generalized_bayes(geo(10, 1.05)).unwrap()),
        ("stein general-g p5", {
            let g = ShrinkageMatrix::new(vec![1.0, 0.7, 0.4, 0.9, 0.2]).unwrap();
            ShrinkageRule::new(s5, g, stein(3.0, 0.5)).unwrap()
        }),
    ]
}

/// Fixed cross-validation cases for the ordinary-risk engines.
pub fn ordinary_battery() -> Vec<OrdinaryCase> {
    let thetas: Vec<Box<dyn Fn(&ShrinkageRule) -> MeanVector>> = vec![
        Box::new(|r| diag(0.0, r.sigma())),
        Box::new(|r| diag(2.0, r.sigma())),
        Box::new(|_| theta(&[1.0, 0.0, -1.0])),
        Box::new(|_| MeanVector::zeros(10)),
        Box::new(|_| theta(&[0.5, -0.5, 1.5, 0.0])),
        Box::new(|r| diag(0.5, r.sigma())),
        Box::new(|_| theta(&[2.0, 2.0, 2.0])),
        Box::new(|_| theta(&[1.0, 2.0, 3.0, 4.0, 5.0])),
        Box::new(|r| diag(20.0, r.sigma())),
        Box::new(|_| theta(&[0.3, -1.2, 0.0, 2.2, -0.7])),
    ];
    rules()
        .into_iter()
        .zip(thetas)
        .map(|((name, rule), th)| {
            let theta = th(&rule);
            OrdinaryCase { name, rule, theta }
        })
        .collect()
}

/// Fixed cross-validation cases for the Bayes-risk engines.
pub fn ensemble_battery() -> Vec<EnsembleCase> {
    let taus = [1.0, 5.0, 0.1, 2.0, 40.0, 100.0, 0.5, 3.0, 20.0, 10.0];
    rules()
        .into_iter()
        .zip(taus)
        .map(|((name, rule), tau)| EnsembleCase { name, rule, tau })
        .collect()
}
