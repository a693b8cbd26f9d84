#![allow(dead_code)]

use std::io::Write;

use framekit::PointCloud;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> PointCloud {
    PointCloud::from_matrix(DMatrix::from_fn(d, n, |_, _| StandardNormal.sample(rng))).unwrap()
}

/// Column 1 copies column 0.
pub fn duplicated<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> PointCloud {
    let mut m = gaussian(d, n, rng).into_matrix();
    let c = m.column(0).clone_owned();
    m.set_column(1, &c);
    PointCloud::from_matrix(m).unwrap()
}

/// Columns spanning a random subspace of dimension `rank`.
pub fn low_rank<R: Rng + ?Sized>(d: usize, n: usize, rank: usize, rng: &mut R) -> PointCloud {
    let a = DMatrix::<f64>::from_fn(d, rank, |_, _| StandardNormal.sample(rng));
    let b = DMatrix::<f64>::from_fn(rank, n, |_, _| StandardNormal.sample(rng));
    PointCloud::from_matrix(a * b).unwrap()
}

/// A mix of generic, duplicated-column, rank-deficient and zero clouds.
pub fn mixed<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> PointCloud {
    match rng.random_range(0..10) {
        0 | 1 if n >= 2 => duplicated(d, n, rng),
        2 | 3 => low_rank(d, n, rng.random_range(1..d.max(2)), rng),
        4 => PointCloud::zeros(d, n),
        _ => gaussian(d, n, rng),
    }
}

/// Written to the raw stderr handle so the line survives test output capture.
pub fn report(criterion: usize, pass: bool, detail: &str) {
    let line = format!(
        "{} criterion {criterion}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}
