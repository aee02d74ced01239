//! Discrete probability measures on a bounded box of `R^d`.
//!
//! A [`DiscreteMeasure`] is a finite list of weighted atoms. Weights are
//! normalized at construction, so every constructed measure lies in the
//! probability simplex. Measures with countably infinite support are only
//! ever represented through finite truncations.

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::transport::GroundCost;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use std::fmt::Write as _;

/// Default distance under which two atoms are treated as coincident.
pub const DEFAULT_MERGE_TOL: f64 = 1e-12;

const BOX_SLACK: f64 = 1e-12;

/// Axis-aligned bounding box `Θ ⊂ R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidSpace("dimension must be positive".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidSpace(format!(
                    "coordinate {j}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The interval `[lower, upper]`.
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    /// The cube `[lower, upper]^dim`.
    pub fn cube(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn side(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    /// Euclidean diameter of the box.
    pub fn diameter(&self) -> f64 {
        (0..self.dim())
            .map(|j| self.side(j).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= lo - BOX_SLACK && *v <= hi + BOX_SLACK)
    }

    /// Clamps a point into the closed box.
    pub fn clamp(&self, x: &mut [f64]) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[j], self.upper[j]);
        }
    }

    /// Lebesgue volume of the box.
    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.side(j)).product()
    }
}

/// `G = Σ p_i δ_{θ_i}` with atoms stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
    space: ParamSpace,
}

/// Builds a normalized measure from atoms and (unnormalized) weights.
pub fn make_measure(
    atoms: &[Vec<f64>],
    weights: &[f64],
    space: &ParamSpace,
) -> Result<DiscreteMeasure> {
    if atoms.len() != weights.len() {
        return Err(Error::LengthMismatch {
            atoms: atoms.len(),
            weights: weights.len(),
        });
    }
    let flat: Vec<f64> = atoms
        .iter()
        .map(|a| {
            if a.len() == space.dim() {
                Ok(a.as_slice())
            } else {
                Err(Error::DimensionMismatch {
                    expected: space.dim(),
                    got: a.len(),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    DiscreteMeasure::from_flat(flat, weights.to_vec(), space)
}

impl DiscreteMeasure {
    /// Builds a measure from a row-major atom buffer of length `k * dim`.
    pub fn from_flat(atoms: Vec<f64>, weights: Vec<f64>, space: &ParamSpace) -> Result<Self> {
        let dim = space.dim();
        if weights.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if atoms.len() != weights.len() * dim {
            return Err(Error::LengthMismatch {
                atoms: atoms.len() / dim,
                weights: weights.len(),
            });
        }
        for (i, w) in weights.iter().enumerate() {
            if !(*w >= 0.0) || !w.is_finite() {
                return Err(Error::NegativeWeight(*w, i));
            }
        }
        for (i, a) in atoms.chunks(dim).enumerate() {
            if !space.contains(a) {
                return Err(Error::AtomOutOfDomain(i));
            }
        }
        let total = compensated_sum(weights.iter().copied());
        if !(total > 0.0) {
            return Err(Error::ZeroMass(total));
        }
        let mut atoms = atoms;
        for a in atoms.chunks_mut(dim) {
            space.clamp(a);
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            dim,
            atoms,
            weights,
            space: space.clone(),
        })
    }

    /// Point mass at `theta`.
    pub fn dirac(theta: &[f64], space: &ParamSpace) -> Result<Self> {
        Self::from_flat(theta.to_vec(), vec![1.0], space)
    }

    /// One-dimensional convenience constructor.
    pub fn on_line(atoms: &[f64], weights: &[f64], space: &ParamSpace) -> Result<Self> {
        if space.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: space.dim(),
            });
        }
        Self::from_flat(atoms.to_vec(), weights.to_vec(), space)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms `k`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.atoms.chunks(self.dim)
    }

    pub fn atoms_flat(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    /// Merges atoms within `merge_tol` of each other.
    pub fn canonicalize(&self, merge_tol: f64) -> DiscreteMeasure {
        canonicalize(self, merge_tol)
    }

    /// Same measure with atoms listed in the given order.
    pub fn permuted(&self, order: &[usize]) -> DiscreteMeasure {
        let atoms = order.iter().flat_map(|&i| self.atom(i).to_vec()).collect();
        let weights = order.iter().map(|&i| self.weights[i]).collect();
        Self {
            dim: self.dim,
            atoms,
            weights,
            space: self.space.clone(),
        }
    }

    /// Serializes in the plain-text atom format: one `w θ_1 … θ_d` line per atom.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (w, a) in self.weights.iter().zip(self.atoms()) {
            out.push_str(&atom_record(*w, a));
            out.push('\n');
        }
        out
    }

    /// Parses the plain-text atom format. `#` lines and blank lines are ignored.
    pub fn from_text(text: &str, space: &ParamSpace) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (w, a) = parse_atom_record(line, space.dim(), lineno + 1)?;
            weights.push(w);
            atoms.extend(a);
        }
        Self::from_flat(atoms, weights, space)
    }
}

pub(crate) fn atom_record(w: f64, atom: &[f64]) -> String {
    let mut s = String::new();
    write!(s, "{w}").unwrap();
    for v in atom {
        write!(s, " {v}").unwrap();
    }
    s
}

pub(crate) fn parse_atom_record(line: &str, dim: usize, lineno: usize) -> Result<(f64, Vec<f64>)> {
    let fields: Vec<&str> = line.split(' ').filter(|f| !f.is_empty()).collect();
    if fields.len() != dim + 1 {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("expected {} fields, found {}", dim + 1, fields.len()),
        });
    }
    let parse = |f: &str| {
        f.parse::<f64>().map_err(|e| Error::Parse {
            line: lineno,
            msg: format!("bad number {f:?}: {e}"),
        })
    };
    let w = parse(fields[0])?;
    let atom = fields[1..].iter().map(|f| parse(f)).collect::<Result<Vec<_>>>()?;
    Ok((w, atom))
}

/// Merges atoms lying within `merge_tol` (Euclidean) of an earlier cluster
/// representative. Merged atoms take the weight-averaged location.
pub fn canonicalize(g: &DiscreteMeasure, merge_tol: f64) -> DiscreteMeasure {
    let dim = g.dim;
    let mut reps: Vec<Vec<f64>> = Vec::new();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut assigned: Vec<usize> = Vec::with_capacity(g.len());
    for (i, a) in g.atoms().enumerate() {
        let w = g.weights[i];
        let hit = reps.iter().position(|r| euclidean(r, a) <= merge_tol);
        match hit {
            Some(c) => {
                for (s, v) in sums[c].iter_mut().zip(a) {
                    *s += w * v;
                }
                weights[c] += w;
                assigned.push(c);
            }
            None => {
                reps.push(a.to_vec());
                sums.push(a.iter().map(|v| w * v).collect());
                weights.push(w);
                assigned.push(reps.len() - 1);
            }
        }
    }
    if reps.len() == g.len() {
        return g.clone();
    }
    let mut atoms = Vec::with_capacity(reps.len() * dim);
    for (c, rep) in reps.iter().enumerate() {
        if weights[c] > 0.0 {
            atoms.extend(sums[c].iter().map(|s| s / weights[c]));
        } else {
            atoms.extend_from_slice(rep);
        }
    }
    let total: f64 = compensated_sum(weights.iter().copied());
    let weights = weights.into_iter().map(|w| w / total).collect();
    let mut out = DiscreteMeasure {
        dim,
        atoms,
        weights,
        space: g.space.clone(),
    };
    for a in out.atoms.chunks_mut(dim) {
        g.space.clamp(a);
    }
    out
}

/// Random measure with `k` atoms drawn uniformly from the box and weights
/// from the flat Dirichlet distribution.
pub fn random_measure<R: Rng + ?Sized>(rng: &mut R, space: &ParamSpace, k: usize) -> DiscreteMeasure {
    let dim = space.dim();
    let mut atoms = Vec::with_capacity(k * dim);
    for _ in 0..k {
        for j in 0..dim {
            atoms.push(rng.random_range(space.lower[j]..=space.upper[j]));
        }
    }
    let mut weights: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    if weights.iter().all(|w| *w <= 0.0) {
        weights = vec![1.0; k];
    }
    DiscreteMeasure::from_flat(atoms, weights, space).expect("valid by construction")
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }
}

/// Precomputes `cost(θ_i, θ'_j)` for every atom pair.
pub fn support_distance_matrix(
    g: &DiscreteMeasure,
    gp: &DiscreteMeasure,
    cost: &GroundCost,
) -> Result<Matrix> {
    if g.dim != gp.dim {
        return Err(Error::DimensionMismatch {
            expected: g.dim,
            got: gp.dim,
        });
    }
    let mut m = Matrix::zeros(g.len(), gp.len());
    for (i, a) in g.atoms().enumerate() {
        for (j, b) in gp.atoms().enumerate() {
            let c = cost.eval(a, b)?;
            if !c.is_finite() {
                return Err(Error::CostOverflow(i, j));
            }
            m.set(i, j, c.max(0.0));
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(lo: f64, hi: f64) -> ParamSpace {
        ParamSpace::interval(lo, hi).unwrap()
    }

    #[test]
    fn normalizes_single_atom() {
        let g = make_measure(&[vec![0.0]], &[2.0], &line(-1.0, 1.0)).unwrap();
        assert_eq!(g.weights(), &[1.0]);
    }

    #[test]
    fn keeps_given_weights() {
        let g = DiscreteMeasure::on_line(&[0.0, 1.0], &[0.3, 0.7], &line(0.0, 1.0)).unwrap();
        assert!((g.weight(0) - 0.3).abs() < 1e-15 && (g.weight(1) - 0.7).abs() < 1e-15);
        assert_eq!(g.atom(1), &[1.0]);
    }

    #[test]
    fn merges_coincident_atoms() {
        let g = DiscreteMeasure::on_line(&[0.0, 0.0], &[0.4, 0.6], &line(-1.0, 1.0)).unwrap();
        let c = g.canonicalize(DEFAULT_MERGE_TOL);
        assert_eq!(c.len(), 1);
        assert_eq!(c.atom(0), &[0.0]);
        assert!((c.weight(0) - 1.0).abs() < 1e-15);

        let near = DiscreteMeasure::on_line(&[0.0, 1e-15], &[0.5, 0.5], &line(-1.0, 1.0)).unwrap();
        assert_eq!(near.canonicalize(1e-12).len(), 1);
        let far = DiscreteMeasure::on_line(&[0.0, 0.5], &[0.5, 0.5], &line(-1.0, 1.0)).unwrap();
        assert_eq!(far.canonicalize(1e-12), far);
        let d = DiscreteMeasure::dirac(&[0.0], &line(-1.0, 1.0)).unwrap();
        assert_eq!(d.canonicalize(1e-12), d);
    }

    #[test]
    fn construction_errors() {
        let s = line(-1.0, 1.0);
        assert_eq!(make_measure(&[], &[], &s), Err(Error::EmptyMeasure));
        assert!(matches!(
            make_measure(&[vec![0.0]], &[-1.0], &s),
            Err(Error::NegativeWeight(..))
        ));
        assert_eq!(
            make_measure(&[vec![2.0]], &[1.0], &s),
            Err(Error::AtomOutOfDomain(0))
        );
        assert!(matches!(
            make_measure(&[vec![0.0], vec![0.5]], &[0.0, 0.0], &s),
            Err(Error::ZeroMass(_))
        ));
        assert!(ParamSpace::interval(1.0, 1.0).is_err());
    }

    #[test]
    fn distance_matrix_examples() {
        let s = line(0.0, 1.0);
        let d0 = DiscreteMeasure::dirac(&[0.0], &s).unwrap();
        let d1 = DiscreteMeasure::dirac(&[1.0], &s).unwrap();
        let m = support_distance_matrix(&d0, &d1, &GroundCost::Euclidean).unwrap();
        assert_eq!(m.data, vec![1.0]);
        let m = support_distance_matrix(&d0, &d1, &GroundCost::EuclideanPow(2.0)).unwrap();
        assert_eq!(m.data, vec![1.0]);
        let g = DiscreteMeasure::on_line(&[0.0, 1.0], &[0.5, 0.5], &s).unwrap();
        let h = DiscreteMeasure::dirac(&[0.5], &s).unwrap();
        let m = support_distance_matrix(&g, &h, &GroundCost::EuclideanPow(2.0)).unwrap();
        assert_eq!((m.rows, m.cols), (2, 1));
        assert_eq!(m.data, vec![0.25, 0.25]);
    }

    #[test]
    fn text_round_trip_with_comments() {
        let s = ParamSpace::cube(2, -1.0, 1.0).unwrap();
        let text = "# two atoms\n2 0.5 -0.25\n\n6 0 1\n";
        let g = DiscreteMeasure::from_text(text, &s).unwrap();
        assert_eq!(g.len(), 2);
        assert!((g.weight(0) - 0.25).abs() < 1e-15);
        assert_eq!(g.atom(1), &[0.0, 1.0]);
        let back = DiscreteMeasure::from_text(&g.to_text(), &s).unwrap();
        assert_eq!(back, g);
        assert!(matches!(
            DiscreteMeasure::from_text("1 0.5\n", &s),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    fn arb_measure() -> impl Strategy<Value = DiscreteMeasure> {
        prop::collection::vec((-1.0f64..1.0, 0.0f64..1.0), 1..12).prop_filter_map(
            "positive mass",
            |pairs| {
                // snap some atoms together so merging is exercised
                let atoms: Vec<f64> = pairs.iter().map(|p| (p.0 * 4.0).round() / 4.0).collect();
                let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                DiscreteMeasure::on_line(&atoms, &weights, &ParamSpace::interval(-1.0, 1.0).unwrap())
                    .ok()
            },
        )
    }

    proptest! {
        #[test]
        fn weights_in_simplex(g in arb_measure()) {
            let total: f64 = g.weights().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(g.weights().iter().all(|w| *w >= 0.0));
        }

        #[test]
        fn canonicalize_is_idempotent(g in arb_measure()) {
            let once = g.canonicalize(DEFAULT_MERGE_TOL);
            let twice = once.canonicalize(DEFAULT_MERGE_TOL);
            prop_assert_eq!(&once, &twice);
            let total: f64 = once.weights().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn symmetric_cost_matrix_transposes(g in arb_measure(), h in arb_measure()) {
            let c = GroundCost::EuclideanPow(2.0);
            let m = support_distance_matrix(&g, &h, &c).unwrap();
            let mt = support_distance_matrix(&h, &g, &c).unwrap();
            prop_assert_eq!(m.transpose(), mt);
        }
    }
}
