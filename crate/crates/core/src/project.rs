//! Projection operators: averaging a function over a frame, a
//! canonicalization, a stabilizer or the whole group.

use nalgebra::{DMatrix, Vector3};
use rand::Rng;

use crate::algebra::{
    haar_orthogonal, haar_rotation, GroupElement, GroupTag, PointCloud, Quadrature,
    StabilizerDescriptor,
};
use crate::canon::CanonMethod;
use crate::error::{FrameError, Result};
use crate::frames::{reynolds_frame, Atom, FrameMap, WeightedFrame, MAX_REYNOLDS_N};

/// Default number of circle quadrature points.
pub const DEFAULT_QUADRATURE: usize = 256;

/// A function of a cloud with values in a cloud of the same shape.
pub type CloudField<'a> = Box<dyn Fn(&PointCloud) -> PointCloud + 'a>;
pub type ScalarField<'a> = Box<dyn Fn(&PointCloud) -> f64 + 'a>;

/// `∫ f(g⁻¹X) dμ(g)` for a given measure.
pub fn integrate_invariant<F>(frame: &WeightedFrame, f: F, x: &PointCloud) -> Result<f64>
where
    F: Fn(&PointCloud) -> f64,
{
    frame.group().check_acts_on(x)?;
    let mut acc = 0.0;
    for a in frame.atoms() {
        acc += a.weight * f(&a.element.act_inverse(x)?);
    }
    Ok(acc)
}

/// `∫ g f(g⁻¹X) dμ(g)` for a given measure.
pub fn integrate_equivariant<F>(frame: &WeightedFrame, f: F, x: &PointCloud) -> Result<PointCloud>
where
    F: Fn(&PointCloud) -> PointCloud,
{
    frame.group().check_acts_on(x)?;
    let mut acc = DMatrix::zeros(x.d(), x.n());
    for a in frame.atoms() {
        let y = f(&a.element.act_inverse(x)?);
        x.check_same_shape(&y)?;
        acc += a.weight * a.element.act(&y)?.into_matrix();
    }
    PointCloud::from_matrix(acc)
}

/// Invariant projection `I[f](X) = ∫ f(g⁻¹X) dμ_X(g)`.
pub fn project_invariant<M, F>(frames: &M, f: F, x: &PointCloud) -> Result<f64>
where
    M: FrameMap + ?Sized,
    F: Fn(&PointCloud) -> f64,
{
    integrate_invariant(&frames.frame(x)?, f, x)
}

/// Equivariant projection `E[f](X) = ∫ g f(g⁻¹X) dμ_X(g)`.
pub fn project_equivariant<M, F>(frames: &M, f: F, x: &PointCloud) -> Result<PointCloud>
where
    M: FrameMap + ?Sized,
    F: Fn(&PointCloud) -> PointCloud,
{
    integrate_equivariant(&frames.frame(x)?, f, x)
}

/// `f(c(X))`.
pub fn project_canonical<F>(c: CanonMethod, f: F, x: &PointCloud) -> Result<f64>
where
    F: Fn(&PointCloud) -> f64,
{
    Ok(f(&c.apply(x)?))
}

/// `⟨μ⟩_X`: the average of `s_*μ` over `s ∈ stab(X)`.
///
/// Finite stabilizers are averaged exactly. A full circle is replaced by its
/// `k`-point quadrature, which is what every measure averages to. Continuous
/// stabilizers without a quadrature rule are rejected.
pub fn average_over_stabilizer(
    mu: &WeightedFrame,
    stab: &StabilizerDescriptor,
    k: usize,
) -> Result<(WeightedFrame, Quadrature)> {
    if stab.is_trivial() {
        return Ok((mu.clone(), Quadrature::Exact));
    }
    let (elems, quad) = stab.elements(k)?;
    if let Some(s) = elems.first() {
        if s.group() != mu.group() {
            return Err(FrameError::GroupMismatch {
                expected: mu.group(),
                found: s.group(),
            });
        }
    }
    if let StabilizerDescriptor::FullGroup(tag) = stab {
        if !tag.is_finite() {
            return Ok((WeightedFrame::new_unmerged(*tag, uniform(elems))?, quad));
        }
    }
    let scale = 1.0 / elems.len() as f64;
    let mut atoms = Vec::with_capacity(elems.len() * mu.len());
    for s in &elems {
        for a in mu.atoms() {
            atoms.push(Atom {
                weight: scale * a.weight,
                element: s.compose(&a.element)?,
            });
        }
    }
    let out = if mu.group().is_finite() {
        WeightedFrame::new(mu.group(), atoms)?
    } else {
        WeightedFrame::new_unmerged(mu.group(), atoms)?
    };
    Ok((out, quad))
}

fn uniform(elems: Vec<GroupElement>) -> Vec<Atom> {
    elems
        .into_iter()
        .map(|element| Atom {
            weight: 1.0,
            element,
        })
        .collect()
}

/// `q̂(Z) = q(Z) − q(0)`, which vanishes at the only point with a
/// nontrivial `SO(2)` stabilizer.
pub fn stable_fn_so2<'a, Q>(q: Q) -> CloudField<'a>
where
    Q: Fn(&PointCloud) -> PointCloud + 'a,
{
    Box::new(move |z: &PointCloud| {
        let at_zero = q(&PointCloud::zeros(z.d(), z.n()));
        let here = q(z);
        PointCloud::from_matrix(here.matrix() - at_zero.matrix()).expect("finite")
    })
}

/// Output column `k` is `Σ_j c(X, k, j) x_j`: always in the span of `X`,
/// hence fixed by `stab(X)` in `O(d)`.
pub fn stable_fn_o3<'a, C>(coeff: C) -> CloudField<'a>
where
    C: Fn(&PointCloud, usize, usize) -> f64 + 'a,
{
    Box::new(move |x: &PointCloud| {
        let n = x.n();
        let c = DMatrix::from_fn(n, n, |j, k| coeff(x, k, j));
        PointCloud::from_matrix(x.matrix() * c).expect("finite")
    })
}

/// Output column `k` is `Σ_j c(X, k, j) x_j + Σ_{i<j} e(X, k, i, j) x_i × x_j`
/// for clouds in `R^3`.
pub fn stable_fn_so3<'a, C, E>(coeff: C, cross: E) -> CloudField<'a>
where
    C: Fn(&PointCloud, usize, usize) -> f64 + 'a,
    E: Fn(&PointCloud, usize, usize, usize) -> f64 + 'a,
{
    Box::new(move |x: &PointCloud| {
        assert_eq!(x.d(), 3, "cross products need d = 3");
        let n = x.n();
        let c = DMatrix::from_fn(n, n, |j, k| coeff(x, k, j));
        let mut out = x.matrix() * c;
        let cols: Vec<Vector3<f64>> = (0..n)
            .map(|j| Vector3::new(x.get(0, j), x.get(1, j), x.get(2, j)))
            .collect();
        for k in 0..n {
            let mut acc = Vector3::zeros();
            for i in 0..n {
                for j in (i + 1)..n {
                    acc += cross(x, k, i, j) * cols[i].cross(&cols[j]);
                }
            }
            for r in 0..3 {
                out[(r, k)] += acc[r];
            }
        }
        PointCloud::from_matrix(out).expect("finite")
    })
}

/// Group average `∫ f(g⁻¹X) dg`.
///
/// `S_n` is averaged exactly (`n ≤ 8`, `n!` evaluations within `budget`).
/// `SO(2)` uses `budget` equispaced angles, exact for trigonometric
/// polynomials of degree below `budget`. `SO(d)`/`O(d)` for `d ≥ 3` use
/// `budget` Haar samples, with error of order `budget^{-1/2}`.
pub fn reynolds_invariant<F, R>(
    f: F,
    x: &PointCloud,
    group: GroupTag,
    budget: usize,
    rng: &mut R,
) -> Result<f64>
where
    F: Fn(&PointCloud) -> f64,
    R: Rng + ?Sized,
{
    group.check_acts_on(x)?;
    if budget == 0 {
        return Err(FrameError::BudgetExceeded { needed: 1, budget });
    }
    match group {
        GroupTag::Sn(n) => {
            if n > MAX_REYNOLDS_N {
                return Err(FrameError::TooLarge {
                    n,
                    limit: MAX_REYNOLDS_N,
                });
            }
            let needed: u128 = (1..=n as u128).product();
            if needed > budget as u128 {
                return Err(FrameError::BudgetExceeded { needed, budget });
            }
            integrate_invariant(&reynolds_frame(n)?, f, x)
        }
        GroupTag::SO(2) | GroupTag::O(2) => {
            let stab = StabilizerDescriptor::FullGroup(group);
            let (elems, _) = stab.elements(budget)?;
            let w = 1.0 / elems.len() as f64;
            let mut acc = 0.0;
            for g in &elems {
                acc += w * f(&g.act_inverse(x)?);
            }
            Ok(acc)
        }
        GroupTag::SO(d) | GroupTag::O(d) => {
            let mut acc = 0.0;
            for _ in 0..budget {
                let g = if matches!(group, GroupTag::SO(_)) {
                    GroupElement::Rotation(haar_rotation(d, rng))
                } else {
                    GroupElement::Orthogonal(haar_orthogonal(d, rng))
                };
                acc += f(&g.act_inverse(x)?);
            }
            Ok(acc / budget as f64)
        }
        GroupTag::Trans(_) => Err(FrameError::InvalidInput(
            "translations are not compact".into(),
        )),
    }
}

/// Builtin test functions available by name.
pub fn builtin_scalar(name: &str) -> Result<ScalarField<'static>> {
    match name {
        "frobenius" => Ok(Box::new(|x: &PointCloud| x.frobenius_norm())),
        "first-coordinate" => Ok(Box::new(|x: &PointCloud| x.get(0, 0))),
        "poly" => Ok(Box::new(fixed_polynomial)),
        _ => {
            if let Some(rest) = name.strip_prefix("coord:") {
                let (i, j) = rest
                    .split_once(',')
                    .and_then(|(a, b)| {
                        Some((
                            a.trim().parse::<usize>().ok()?,
                            b.trim().parse::<usize>().ok()?,
                        ))
                    })
                    .ok_or_else(|| {
                        FrameError::InvalidInput(format!("bad coordinate pick {rest:?}"))
                    })?;
                return Ok(Box::new(move |x: &PointCloud| x.get(i, j)));
            }
            Err(FrameError::InvalidInput(format!(
                "unknown builtin {name:?}"
            )))
        }
    }
}

/// Builtin cloud-valued test functions available by name.
pub fn builtin_cloud(name: &str) -> Result<CloudField<'static>> {
    match name {
        "identity" => Ok(Box::new(|x: &PointCloud| x.clone())),
        "square" => Ok(Box::new(|x: &PointCloud| {
            PointCloud::from_matrix(x.matrix().map(|v| v * v)).expect("finite")
        })),
        "shift" => Ok(Box::new(|x: &PointCloud| {
            PointCloud::from_matrix(x.matrix().add_scalar(1.0)).expect("finite")
        })),
        "poly" => Ok(Box::new(|x: &PointCloud| {
            let p = fixed_polynomial(x);
            PointCloud::from_matrix(x.matrix() * p + x.matrix().map(|v| v * v * v)).expect("finite")
        })),
        _ => Err(FrameError::InvalidInput(format!(
            "unknown builtin {name:?}"
        ))),
    }
}

/// A fixed polynomial of degree 3 in the entries of `X` with coefficients
/// from a hash of the entry position.
pub fn fixed_polynomial(x: &PointCloud) -> f64 {
    let v = x.flatten();
    let coef = |k: usize| ((k as f64 * 0.618_033_988_75).fract() - 0.5) * 2.0;
    let lin: f64 = v.iter().enumerate().map(|(k, a)| coef(k) * a).sum();
    let quad: f64 = v
        .windows(2)
        .enumerate()
        .map(|(k, w)| coef(k + 7) * w[0] * w[1])
        .sum();
    let cubic: f64 = v
        .iter()
        .enumerate()
        .map(|(k, a)| coef(k + 13) * a * a * a)
        .sum();
    0.5 + lin + quad + 0.3 * cubic
}
