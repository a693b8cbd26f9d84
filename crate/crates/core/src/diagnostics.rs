//! Empirical checks of continuity and (weak) equivariance.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algebra::{stabilizer, GroupElement, GroupTag, Permutation, PointCloud, Quadrature};
use crate::error::{FrameError, Result};
use crate::frames::{stable_argsort, FrameMap, WeightedFrame};
use crate::project::{average_over_stabilizer, DEFAULT_QUADRATURE};

/// Default final distance below which a probe converges.
pub const CONV_TOL: f64 = 1e-3;
/// Default normalized output gap that certifies a discontinuity.
pub const CERT_THRESHOLD: f64 = 0.1;
/// Steps ignored before monotonicity is required.
pub const BURN_IN: usize = 3;
/// Increases smaller than this count as round-off.
const MONOTONE_SLACK: f64 = 1e-12;

const PROBE_SEED: u64 = 0x9B_0BE5;
const PROBE_COUNT: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    /// `½ Σ |μ(g) − ν(g)|`, exact on finite groups.
    TotalVariation,
    /// Largest gap between integrals of a fixed family of test functions.
    ProbeFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureDistance {
    pub value: f64,
    pub method: DistanceMethod,
}

/// Total variation for permutation measures, the probe family otherwise.
pub fn measure_distance(mu: &WeightedFrame, nu: &WeightedFrame) -> Result<MeasureDistance> {
    let method = if matches!(mu.group(), GroupTag::Sn(_)) {
        DistanceMethod::TotalVariation
    } else {
        DistanceMethod::ProbeFamily
    };
    measure_distance_with(mu, nu, method)
}

pub fn measure_distance_with(
    mu: &WeightedFrame,
    nu: &WeightedFrame,
    method: DistanceMethod,
) -> Result<MeasureDistance> {
    if mu.group() != nu.group() {
        return Err(FrameError::GroupMismatch {
            expected: mu.group(),
            found: nu.group(),
        });
    }
    let value = match method {
        DistanceMethod::TotalVariation => total_variation(mu, nu)?,
        DistanceMethod::ProbeFamily => probe_gap(mu, nu)?,
    };
    Ok(MeasureDistance { value, method })
}

fn total_variation(mu: &WeightedFrame, nu: &WeightedFrame) -> Result<f64> {
    // Weights kept apart and summed in key order, so the result is exactly
    // symmetric and independent of hashing.
    let mut mass: BTreeMap<Permutation, [f64; 2]> = BTreeMap::new();
    for (side, frame) in [mu, nu].into_iter().enumerate() {
        for a in frame.atoms() {
            let p = a.element.as_perm().ok_or_else(|| {
                FrameError::InvalidInput(
                    "total variation is implemented for permutation measures".into(),
                )
            })?;
            mass.entry(p.clone()).or_default()[side] += a.weight;
        }
    }
    Ok((0.5 * mass.values().map(|w| (w[0] - w[1]).abs()).sum::<f64>()).min(1.0))
}

/// Seeded probe matrices `P_k` (unit Frobenius norm) for dimension `d`.
fn probes(d: usize) -> Vec<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED ^ d as u64);
    (0..PROBE_COUNT)
        .map(|_| {
            let p = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = p.norm();
            p / norm
        })
        .collect()
}

/// First and second moments `∫ g dμ`, `∫ g ⊗ g dμ` seen through the probes:
/// entries of `∫ g P dμ` and of `∫ g P Pᵀ gᵀ dμ`.
fn probe_integrals(mu: &WeightedFrame, probes: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(2 * probes.len());
    let d = probes[0].nrows();
    let mut lin = vec![DMatrix::zeros(d, d); probes.len()];
    let mut quad = vec![DMatrix::zeros(d, d); probes.len()];
    let sym: Vec<DMatrix<f64>> = probes.iter().map(|p| p * p.transpose()).collect();
    for a in mu.atoms() {
        let g = match &a.element {
            GroupElement::Translation(t) => DMatrix::from_diagonal(&t.0),
            other => other.matrix().cloned().ok_or_else(|| {
                FrameError::InvalidInput("probe family needs matrix elements".into())
            })?,
        };
        for k in 0..probes.len() {
            lin[k] += a.weight * &g * &probes[k];
            quad[k] += a.weight * &g * &sym[k] * g.transpose();
        }
    }
    out.extend(lin);
    out.extend(quad);
    Ok(out)
}

fn probe_gap(mu: &WeightedFrame, nu: &WeightedFrame) -> Result<f64> {
    let d = match mu.group() {
        GroupTag::SO(d) | GroupTag::O(d) | GroupTag::Trans(d) => d,
        GroupTag::Sn(_) => {
            return Err(FrameError::InvalidInput(
                "use total variation for permutation measures".into(),
            ))
        }
    };
    let ps = probes(d);
    let a = probe_integrals(mu, &ps)?;
    let b = probe_integrals(nu, &ps)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).amax())
        .fold(0.0, f64::max))
}

/// Straight-line approach `X_k = X + decay^k Δ`, `k = 1..steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSchedule {
    pub base: PointCloud,
    pub delta: PointCloud,
    pub steps: usize,
    pub decay: f64,
}

impl ProbeSchedule {
    pub fn new(base: PointCloud, delta: PointCloud) -> Result<Self> {
        Self::with_steps(base, delta, 20, 0.5)
    }

    pub fn with_steps(
        base: PointCloud,
        delta: PointCloud,
        steps: usize,
        decay: f64,
    ) -> Result<Self> {
        base.check_same_shape(&delta)?;
        if steps < 2 {
            return Err(FrameError::InvalidInput(format!(
                "a schedule needs at least 2 steps, got {steps}"
            )));
        }
        if !(decay > 0.0 && decay < 1.0) {
            return Err(FrameError::InvalidInput(format!(
                "decay must lie in (0, 1), got {decay}"
            )));
        }
        Ok(Self {
            base,
            delta,
            steps,
            decay,
        })
    }

    /// Schedule along a random Gaussian direction with Frobenius norm
    /// `scale`.
    pub fn random<R: Rng + ?Sized>(base: PointCloud, scale: f64, rng: &mut R) -> Result<Self> {
        let delta = random_direction(base.d(), base.n(), rng).scaled(scale);
        Self::new(base, delta)
    }

    pub fn point(&self, k: usize) -> PointCloud {
        self.base
            .perturbed(&self.delta, self.decay.powi(k as i32))
            .expect("finite schedule")
    }

    pub fn points(&self) -> impl Iterator<Item = PointCloud> + '_ {
        (1..=self.steps).map(|k| self.point(k))
    }
}

/// Gaussian cloud with unit Frobenius norm.
pub fn random_direction<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> PointCloud {
    let m = DMatrix::from_fn(d, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = m.norm();
    PointCloud::from_matrix(m / norm).expect("finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

/// Two nearby inputs with far-apart outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub a: PointCloud,
    pub b: PointCloud,
    /// `‖a − b‖_F`.
    pub input_distance: f64,
    /// `‖out(a) − out(b)‖ / ‖out(a)‖`.
    pub output_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub distances: Vec<f64>,
    pub verdict: Verdict,
    pub certificate: Option<Certificate>,
    pub conv_tol: f64,
    pub cert_threshold: f64,
    /// How the stabilizer was discretized, when averaging was needed.
    pub quadrature: Option<String>,
}

impl DiagnosticReport {
    pub fn from_distances(distances: Vec<f64>) -> Self {
        let verdict = verdict(&distances, CONV_TOL, CERT_THRESHOLD);
        Self {
            distances,
            verdict,
            certificate: None,
            conv_tol: CONV_TOL,
            cert_threshold: CERT_THRESHOLD,
            quadrature: None,
        }
    }

    pub fn converges(&self) -> bool {
        self.verdict == Verdict::Converges
    }
}

/// Converges when the last distance is below `conv_tol` and the sequence
/// does not increase after the burn-in; diverges when the last distance is
/// at least `cert_threshold`.
pub fn verdict(distances: &[f64], conv_tol: f64, cert_threshold: f64) -> Verdict {
    let Some(&last) = distances.last() else {
        return Verdict::Inconclusive;
    };
    if !last.is_finite() || last >= cert_threshold {
        return Verdict::Diverges;
    }
    let tail = &distances[BURN_IN.min(distances.len() - 1)..];
    let monotone = tail.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK);
    if last < conv_tol && monotone {
        Verdict::Converges
    } else {
        Verdict::Inconclusive
    }
}

fn describe(q: Quadrature) -> Option<String> {
    match q {
        Quadrature::Exact => None,
        Quadrature::Circle(k) => Some(format!("circle-{k}")),
        Quadrature::Haar(k) => Some(format!("haar-{k}")),
    }
}

/// `d_k = dist(⟨μ_{X_k}⟩_X, ⟨μ_X⟩_X)` along the schedule, averaging over the
/// stabilizer of the base point with `k`-point quadrature where needed.
pub fn probe_frame_continuity<M: FrameMap + ?Sized>(
    frames: &M,
    sched: &ProbeSchedule,
    quadrature: usize,
) -> Result<DiagnosticReport> {
    let x = &sched.base;
    let group = frames.group(x);
    let stab = stabilizer(x, group, 0.0)?;
    let (base, quad) = average_over_stabilizer(&frames.frame(x)?, &stab, quadrature)?;
    let mut distances = Vec::with_capacity(sched.steps);
    for xk in sched.points() {
        let (mk, _) = average_over_stabilizer(&frames.frame(&xk)?, &stab, quadrature)?;
        distances.push(measure_distance(&mk, &base)?.value);
    }
    let mut report = DiagnosticReport::from_distances(distances);
    report.quadrature = describe(quad);
    Ok(report)
}

/// `|op(X_k) − op(X)|` along the schedule (Euclidean norm of the flattened
/// outputs).
pub fn probe_operator_continuity<F>(op: F, sched: &ProbeSchedule) -> Result<DiagnosticReport>
where
    F: Fn(&PointCloud) -> Result<Vec<f64>>,
{
    let base = op(&sched.base)?;
    let mut distances = Vec::with_capacity(sched.steps);
    for xk in sched.points() {
        distances.push(euclid(&op(&xk)?, &base));
    }
    Ok(DiagnosticReport::from_distances(distances))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Samples `trials` pairs `X0 + ε Δ` with independent random directions and
/// `ε ≤ radius · ‖X0‖_F`, and returns the pair with the largest normalized
/// output gap if it reaches `cert_threshold`.
pub fn find_discontinuity<F, R>(
    op: F,
    x0: &PointCloud,
    radius: f64,
    trials: usize,
    cert_threshold: f64,
    rng: &mut R,
) -> Result<Option<Certificate>>
where
    F: Fn(&PointCloud) -> Result<Vec<f64>>,
    R: Rng + ?Sized,
{
    if trials < 2 {
        return Err(FrameError::InvalidInput(format!(
            "need at least 2 trials, got {trials}"
        )));
    }
    let scale = radius * x0.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut best: Option<Certificate> = None;
    for _ in 0..trials {
        let a = x0.perturbed(
            &random_direction(x0.d(), x0.n(), rng),
            scale * rng.random::<f64>(),
        )?;
        let b = x0.perturbed(
            &random_direction(x0.d(), x0.n(), rng),
            scale * rng.random::<f64>(),
        )?;
        let (oa, ob) = (op(&a)?, op(&b)?);
        let norm = oa.iter().map(|v| v * v).sum::<f64>().sqrt();
        let gap = euclid(&oa, &ob) / norm.max(f64::MIN_POSITIVE);
        if best.as_ref().is_none_or(|c| gap > c.output_gap) {
            best = Some(Certificate {
                input_distance: a.distance(&b),
                a,
                b,
                output_gap: gap,
            });
        }
    }
    Ok(best.filter(|c| c.output_gap >= cert_threshold))
}

/// `dist(⟨μ_{gX}⟩_{gX}, g_*⟨μ_X⟩_X)`.
pub fn check_weak_equivariance<M: FrameMap + ?Sized>(
    frames: &M,
    x: &PointCloud,
    g: &GroupElement,
    quadrature: usize,
) -> Result<MeasureDistance> {
    let group = frames.group(x);
    let gx = g.act(x)?;
    let (lhs, _) = average_over_stabilizer(
        &frames.frame(&gx)?,
        &stabilizer(&gx, group, 0.0)?,
        quadrature,
    )?;
    let (rhs, _) =
        average_over_stabilizer(&frames.frame(x)?, &stabilizer(x, group, 0.0)?, quadrature)?;
    measure_distance(&lhs, &rhs.pushforward(g)?)
}

/// Outcome of one candidate frame in the witness battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessOutcome {
    pub name: String,
    /// Largest weak-equivariance distance over the trials.
    pub equivariance_gap: f64,
    pub continuity: Verdict,
}

impl WitnessOutcome {
    /// True when the candidate was caught violating equivariance or
    /// continuity.
    pub fn failed(&self) -> bool {
        self.equivariance_gap > 1e-10 || self.continuity == Verdict::Diverges
    }
}

/// Small unweighted frames for `S_n` that are not the whole group: constant
/// proper subsets, and the single sort along the first axis. Each candidate
/// is checked for weak equivariance at random clouds and for continuity
/// along a path through a first-coordinate tie.
pub fn theorem_witness_battery<R: Rng + ?Sized>(
    n: usize,
    subsets: usize,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<WitnessOutcome>> {
    if !(2..=8).contains(&n) {
        return Err(FrameError::InvalidInput(format!(
            "battery needs 2 <= n <= 8, got {n}"
        )));
    }
    let group = GroupTag::Sn(n);
    let order: usize = (1..=n).product();
    type Candidate = (String, Box<dyn Fn(&PointCloud) -> Result<WeightedFrame>>);
    let mut candidates: Vec<Candidate> = Vec::new();
    for s in 0..subsets {
        let size = 1 + s % (order - 1);
        let mut elems: Vec<GroupElement> = Vec::with_capacity(size);
        while elems.len() < size {
            let p = GroupElement::Perm(random_permutation(n, rng));
            if !elems.contains(&p) {
                elems.push(p);
            }
        }
        let frame = WeightedFrame::uniform(group, elems)?;
        candidates.push((
            format!("constant subset of size {size}"),
            Box::new(move |_| Ok(frame.clone())),
        ));
    }
    candidates.push((
        "sort along first axis".into(),
        Box::new(|x: &PointCloud| {
            let row: Vec<f64> = (0..x.n()).map(|j| x.get(0, j)).collect();
            Ok(WeightedFrame::delta(GroupElement::Perm(stable_argsort(
                &row,
            ))))
        }),
    ));

    // path through a tie x_0[0] = x_1[0] that reverses the pair
    let mut cols: Vec<[f64; 2]> = (0..n).map(|j| [2.0 + j as f64, 0.5 * j as f64]).collect();
    cols[0] = [0.0, 0.0];
    cols[1] = [0.0, 1.0];
    let tie = PointCloud::from_columns(&cols)?;
    let mut push = vec![[0.0, 0.0]; n];
    push[0] = [0.5, 0.0];
    let sched = ProbeSchedule::new(tie, PointCloud::from_columns(&push)?)?;

    let mut out = Vec::with_capacity(candidates.len());
    for (name, map) in candidates {
        let frames = (group, |x: &PointCloud| map(x));
        let mut gap: f64 = 0.0;
        for _ in 0..trials {
            let x = random_direction(2, n, rng);
            let g = GroupElement::Perm(random_permutation(n, rng));
            gap = gap.max(check_weak_equivariance(&frames, &x, &g, DEFAULT_QUADRATURE)?.value);
        }
        let continuity = probe_frame_continuity(&frames, &sched, DEFAULT_QUADRATURE)?.verdict;
        out.push(WitnessOutcome {
            name,
            equivariance_gap: gap,
            continuity,
        });
    }
    Ok(out)
}

/// Uniform random permutation (Fisher-Yates).
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
    use rand::seq::SliceRandom;
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    Permutation::new(v).expect("shuffle is a bijection")
}
