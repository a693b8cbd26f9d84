//! Synthetic planar point-cloud classes sampled along template strokes.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::algebra::PointCloud;
use crate::error::{FrameError, Result};

/// Number of distinct stroke templates.
pub const TEMPLATES: usize = 8;

/// Point at parameter `t ∈ [0, 1)` on the stroke of class `class`.
pub fn template_point(class: usize, t: f64) -> [f64; 2] {
    let seg =
        |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
    let polyline = |pts: &[[f64; 2]], t: f64| {
        let k = pts.len() - 1;
        let u = t * k as f64;
        let i = (u.floor() as usize).min(k - 1);
        seg(pts[i], pts[i + 1], u - i as f64)
    };
    match class % TEMPLATES {
        0 => [0.8 * (2.0 * PI * t).cos(), 0.8 * (2.0 * PI * t).sin()],
        1 => {
            if t < 0.5 {
                seg([-0.8, 0.0], [0.8, 0.0], 2.0 * t)
            } else {
                seg([0.0, -0.8], [0.0, 0.8], 2.0 * t - 1.0)
            }
        }
        2 => polyline(
            &[
                [-0.7, -0.7],
                [0.7, -0.7],
                [0.7, 0.7],
                [-0.7, 0.7],
                [-0.7, -0.7],
            ],
            t,
        ),
        3 => polyline(&[[-0.8, -0.6], [0.8, -0.6], [0.0, 0.8], [-0.8, -0.6]], t),
        4 => {
            let th = 3.0 * PI * t;
            let r = 0.15 + 0.65 * t;
            [r * th.cos(), r * th.sin()]
        }
        5 => polyline(&[[-0.6, 0.8], [-0.6, -0.8], [0.6, -0.8]], t),
        6 => [0.8 * (2.0 * PI * t).sin(), 0.8 * (4.0 * PI * t).sin() * 0.6],
        _ => polyline(&[[-0.8, 0.8], [0.8, -0.8], [-0.8, -0.8], [0.8, 0.8]], t),
    }
}

/// Labelled clouds with a train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub clouds: Vec<PointCloud>,
    pub labels: Vec<usize>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub classes: usize,
    pub n_points: usize,
}

/// Shape of a generated dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub classes: usize,
    pub n_points: usize,
    pub per_class: usize,
    /// Standard deviation of the Gaussian jitter.
    pub noise: f64,
    /// Pixels across `[-1, 1]`; points snap to pixel centres before the
    /// jitter. `0` keeps continuous coordinates.
    pub grid: usize,
}

/// `per_class` clouds of `n_points` points for each of `classes` strokes:
/// uniform stroke parameters, optional snapping to a pixel grid, Gaussian
/// jitter, then a random column order. Everything is put in the training
/// split; see [`Dataset::split`].
pub fn synth_dataset<R: Rng + ?Sized>(spec: DatasetSpec, rng: &mut R) -> Result<Dataset> {
    let DatasetSpec {
        classes,
        n_points,
        per_class,
        noise,
        grid,
    } = spec;
    if !(2..=TEMPLATES).contains(&classes) {
        return Err(FrameError::InvalidInput(format!(
            "classes must be in 2..={TEMPLATES}, got {classes}"
        )));
    }
    if n_points == 0 || !(noise >= 0.0 && noise.is_finite()) {
        return Err(FrameError::InvalidInput(format!(
            "bad dataset shape: n = {n_points}, noise = {noise}"
        )));
    }
    let jitter = (noise > 0.0).then(|| Normal::new(0.0, noise).expect("positive noise"));
    let mut clouds = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for class in 0..classes {
        for _ in 0..per_class {
            let mut cols: Vec<[f64; 2]> = (0..n_points)
                .map(|_| {
                    let p = snap(template_point(class, rng.random::<f64>()), grid);
                    match &jitter {
                        Some(j) => [p[0] + j.sample(rng), p[1] + j.sample(rng)],
                        None => p,
                    }
                })
                .collect();
            cols.shuffle(rng);
            clouds.push(PointCloud::from_columns(&cols)?);
            labels.push(class);
        }
    }
    let train = (0..clouds.len()).collect();
    Ok(Dataset {
        clouds,
        labels,
        train,
        test: Vec::new(),
        classes,
        n_points,
    })
}

fn snap(p: [f64; 2], grid: usize) -> [f64; 2] {
    if grid == 0 {
        return p;
    }
    let h = 2.0 / grid as f64;
    p.map(|v| (((v + 1.0) / h).floor().clamp(0.0, grid as f64 - 1.0) + 0.5) * h - 1.0)
}

impl Dataset {
    /// Moves the last `test_per_class` clouds of every class to the test
    /// split.
    pub fn split(mut self, test_per_class: usize) -> Result<Self> {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in 0..self.classes {
            let idx: Vec<usize> = (0..self.labels.len())
                .filter(|&i| self.labels[i] == class)
                .collect();
            if test_per_class > idx.len() {
                return Err(FrameError::InvalidInput(format!(
                    "class {class} has {} clouds, cannot hold out {test_per_class}",
                    idx.len()
                )));
            }
            let cut = idx.len() - test_per_class;
            train.extend_from_slice(&idx[..cut]);
            test.extend_from_slice(&idx[cut..]);
        }
        self.train = train;
        self.test = test;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.clouds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clouds.is_empty()
    }

    /// One row per cloud: the label, then `x_1, y_1, .., x_n, y_n`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (cloud, label) in self.clouds.iter().zip(&self.labels) {
            write!(w, "{label}")?;
            for v in cloud.flatten() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(classes: usize, n_points: usize, per_class: usize, noise: f64) -> DatasetSpec {
        DatasetSpec {
            classes,
            n_points,
            per_class,
            noise,
            grid: 0,
        }
    }

    #[test]
    fn noiseless_clouds_lie_on_templates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ds = synth_dataset(spec(2, 8, 1, 0.0), &mut rng).unwrap();
        assert_eq!(ds.len(), 2);
        for j in 0..8 {
            let (x, y) = (ds.clouds[0].get(0, j), ds.clouds[0].get(1, j));
            assert!((x.hypot(y) - 0.8).abs() < 1e-12);
            let (x, y) = (ds.clouds[1].get(0, j), ds.clouds[1].get(1, j));
            assert!(x == 0.0 || y == 0.0);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_dataset(spec(3, 5, 4, 0.05), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = synth_dataset(spec(3, 5, 4, 0.05), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stratified_split() {
        let ds = synth_dataset(spec(3, 4, 10, 0.01), &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap()
            .split(3)
            .unwrap();
        assert_eq!((ds.train.len(), ds.test.len()), (21, 9));
        for c in 0..3 {
            assert_eq!(ds.test.iter().filter(|&&i| ds.labels[i] == c).count(), 3);
        }
    }

    #[test]
    fn grid_snaps_to_pixel_centres() {
        let ds = synth_dataset(
            DatasetSpec {
                grid: 10,
                ..spec(2, 20, 2, 0.0)
            },
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        for v in ds.clouds.iter().flat_map(|c| c.flatten()) {
            let k = (v + 1.0) / 0.2 - 0.5;
            assert!((k - k.round()).abs() < 1e-9 && (0.0..10.0).contains(&k.round()));
        }
    }

    #[test]
    fn csv_rows() {
        let ds = synth_dataset(spec(2, 3, 1, 0.0), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].split(',').count(), 7);
        assert!(rows[1].starts_with("1,"));
    }
}
