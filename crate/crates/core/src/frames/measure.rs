use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{GroupElement, GroupElementJson, GroupTag, Permutation};
use crate::error::{FrameError, Result};

/// Matrices closer than this (max entry) are the same atom.
pub const MERGE_TOL: f64 = 1e-10;

/// One point mass of a weighted frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub weight: f64,
    /// The element `g` whose inverse is applied to the input, i.e. the
    /// projection evaluates `f(g⁻¹X)`.
    pub element: GroupElement,
}

/// A finitely supported probability measure on a group.
///
/// Weights are positive and sum to one; atoms are pairwise distinct under
/// the group's equality (exact for permutations, [`MERGE_TOL`] for matrices).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFrame {
    group: GroupTag,
    atoms: Vec<Atom>,
}

impl WeightedFrame {
    /// Normalizes, drops zero weights and merges equal elements.
    pub fn new(group: GroupTag, atoms: Vec<Atom>) -> Result<Self> {
        let atoms = validate(group, atoms)?;
        let merged = merge(atoms);
        Ok(Self {
            group,
            atoms: normalize(merged)?,
        })
    }

    /// Like [`WeightedFrame::new`] but keeps coincident atoms separate. Used
    /// for stabilizer averages, whose supports are large and whose atoms are
    /// distinct by construction.
    pub fn new_unmerged(group: GroupTag, atoms: Vec<Atom>) -> Result<Self> {
        let atoms = validate(group, atoms)?;
        Ok(Self {
            group,
            atoms: normalize(atoms)?,
        })
    }

    pub fn delta(element: GroupElement) -> Self {
        Self {
            group: element.group(),
            atoms: vec![Atom {
                weight: 1.0,
                element,
            }],
        }
    }

    /// Equal weight on each of `elements` (an unweighted frame).
    pub fn uniform(group: GroupTag, elements: Vec<GroupElement>) -> Result<Self> {
        let atoms = elements
            .into_iter()
            .map(|element| Atom {
                weight: 1.0,
                element,
            })
            .collect();
        Self::new(group, atoms)
    }

    pub fn group(&self) -> GroupTag {
        self.group
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Size of the support.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Weight of `g` (zero if absent).
    pub fn weight_of(&self, g: &GroupElement) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.element.approx_eq(g, MERGE_TOL))
            .map(|a| a.weight)
            .sum()
    }

    /// `g_*μ`: every atom `h` moves to `g·h`.
    pub fn pushforward(&self, g: &GroupElement) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                Ok(Atom {
                    weight: a.weight,
                    element: g.compose(&a.element)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            group: self.group,
            atoms,
        })
    }

    /// Draws one element according to the weights.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &GroupElement {
        let u: f64 = rng.random::<f64>() * self.total_weight();
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.weight;
            if u < acc {
                return &a.element;
            }
        }
        &self.atoms.last().expect("frames are nonempty").element
    }
}

fn validate(group: GroupTag, atoms: Vec<Atom>) -> Result<Vec<Atom>> {
    let mut kept = Vec::with_capacity(atoms.len());
    for a in atoms {
        if !(a.weight.is_finite() && a.weight >= 0.0) {
            return Err(FrameError::InvalidInput(format!(
                "frame weight {} is not a nonnegative number",
                a.weight
            )));
        }
        if a.element.group() != group {
            return Err(FrameError::GroupMismatch {
                expected: group,
                found: a.element.group(),
            });
        }
        if a.weight > 0.0 {
            kept.push(a);
        }
    }
    if kept.is_empty() {
        return Err(FrameError::InvalidInput(
            "frame has no positive weight".into(),
        ));
    }
    Ok(kept)
}

fn merge(atoms: Vec<Atom>) -> Vec<Atom> {
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    let mut perm_index: HashMap<Permutation, usize> = HashMap::new();
    for a in atoms {
        let existing = match &a.element {
            GroupElement::Perm(p) => perm_index.get(p).copied(),
            _ => out
                .iter()
                .position(|b| b.element.approx_eq(&a.element, MERGE_TOL)),
        };
        match existing {
            Some(i) => out[i].weight += a.weight,
            None => {
                if let GroupElement::Perm(p) = &a.element {
                    perm_index.insert(p.clone(), out.len());
                }
                out.push(a);
            }
        }
    }
    out
}

fn normalize(mut atoms: Vec<Atom>) -> Result<Vec<Atom>> {
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(FrameError::InvalidInput(
            "frame weights do not sum to a positive number".into(),
        ));
    }
    for a in &mut atoms {
        a.weight /= total;
    }
    Ok(atoms)
}

/// JSON form of one atom: the element's fields plus `"weight"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomJson {
    pub weight: f64,
    #[serde(flatten)]
    pub element: GroupElementJson,
}

/// JSON form of a frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedFrameJson {
    pub group: GroupTag,
    pub atoms: Vec<AtomJson>,
}

impl From<&WeightedFrame> for WeightedFrameJson {
    fn from(f: &WeightedFrame) -> Self {
        Self {
            group: f.group,
            atoms: f
                .atoms
                .iter()
                .map(|a| AtomJson {
                    weight: a.weight,
                    element: GroupElementJson::from(&a.element),
                })
                .collect(),
        }
    }
}

impl TryFrom<WeightedFrameJson> for WeightedFrame {
    type Error = FrameError;

    fn try_from(j: WeightedFrameJson) -> Result<Self> {
        let atoms = j
            .atoms
            .into_iter()
            .map(|a| {
                Ok(Atom {
                    weight: a.weight,
                    element: GroupElement::try_from(a.element)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        WeightedFrame::new(j.group, atoms)
    }
}

impl Serialize for WeightedFrame {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WeightedFrameJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightedFrame {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        WeightedFrame::try_from(WeightedFrameJson::deserialize(d)?)
            .map_err(serde::de::Error::custom)
    }
}
