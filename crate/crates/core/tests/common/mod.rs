#![allow(dead_code)]

use infogeo::ParametricModel;
use nalgebra::DMatrix;

/// Built-in models with an interior θ grid for each.
pub fn builtins() -> Vec<(ParametricModel, Vec<Vec<f64>>)> {
    let line: Vec<Vec<f64>> = (1..=9).map(|i| vec![0.1 * i as f64]).collect();
    let simplex = vec![
        vec![0.2, 0.3],
        vec![1.0 / 3.0, 1.0 / 3.0],
        vec![0.1, 0.6],
        vec![0.5, 0.25],
        vec![0.7, 0.1],
    ];
    let h = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.5, 1.0]);
    let logit = ParametricModel::logit_linear(h, vec![-3.0, -3.0], vec![3.0, 3.0]).unwrap();
    let logit_grid = vec![vec![0.0, 0.0], vec![0.5, -1.0], vec![-1.5, 0.7], vec![1.0, 1.0]];
    vec![
        (ParametricModel::bernoulli(), line.clone()),
        (ParametricModel::binomial(3).unwrap(), line),
        (ParametricModel::categorical(3).unwrap(), simplex),
        (logit, logit_grid),
    ]
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
