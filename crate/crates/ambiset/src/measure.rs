//! Discrete probability measures, finitely generated ambiguity sets, test
//! functions, and upper expectations.
//!
//! An [`AmbiguitySet`] is a finite list of generator measures. With
//! `convexify = true` (the default) the set denotes the convex hull of its
//! generators; with `convexify = false` it denotes the bare finite set.
//! The upper expectation
//!
//! ```text
//! E^P[phi] = sup over mu in P of E_mu[phi]
//! ```
//!
//! is a sublinear functional: monotone, constant preserving, subadditive and
//! positively homogeneous. Because the objective is linear in the measure,
//! its value over the hull equals its value over the generators, so it does
//! not depend on the `convexify` flag.

use thiserror::Error;

use crate::space::{same_space, BasePoint, SharedSpace};

/// Inputs whose mass deviates from 1 by more than this are rejected;
/// smaller deviations are renormalized.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("weight vector has length {found}, expected {expected}")]
    LengthMismatch { found: usize, expected: usize },
    #[error("weight {value} at index {index} is negative")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weight at index {index} is not finite")]
    NonFiniteWeight { index: usize },
    #[error("weights sum to {sum}, further than {NORMALIZATION_TOL} from 1")]
    NotNormalized { sum: f64 },
    #[error("test function value at index {index} is not finite")]
    NonFiniteValue { index: usize },
    #[error("ambiguity set needs at least one generator")]
    EmptyGenerators,
    #[error("operands live on different spaces")]
    SpaceMismatch,
    #[error("point index {index} out of range for a space of {len} points")]
    InvalidIndex { index: usize, len: usize },
    #[error("exponent {p} is invalid (need a finite p >= 1)")]
    InvalidExponent { p: f64 },
}

/// A probability vector over the points of a finite metric space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    space: SharedSpace,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Build a measure, rejecting negative weights and masses further than
    /// [`NORMALIZATION_TOL`] from 1. Smaller deviations (JSON round trips
    /// perturb floats) are renormalized away.
    pub fn new(space: SharedSpace, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if weights.len() != space.len() {
            return Err(MeasureError::LengthMismatch {
                found: weights.len(),
                expected: space.len(),
            });
        }
        let mut weights = weights;
        for (index, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() {
                return Err(MeasureError::NonFiniteWeight { index });
            }
            if *w < 0.0 {
                if *w < -1e-12 {
                    return Err(MeasureError::NegativeWeight { index, value: *w });
                }
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(MeasureError::NotNormalized { sum });
        }
        if sum != 1.0 {
            for w in &mut weights {
                *w /= sum;
            }
        }
        Ok(Self { space, weights })
    }

    /// The point mass at `index`.
    pub fn point_mass(space: SharedSpace, index: usize) -> Result<Self, MeasureError> {
        if index >= space.len() {
            return Err(MeasureError::InvalidIndex { index, len: space.len() });
        }
        let mut weights = vec![0.0; space.len()];
        weights[index] = 1.0;
        Ok(Self { space, weights })
    }

    /// The uniform measure.
    pub fn uniform(space: SharedSpace) -> Self {
        let n = space.len();
        Self { space, weights: vec![1.0 / n as f64; n] }
    }

    pub fn space(&self) -> &SharedSpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices carrying strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i).collect()
    }
}

/// A real-valued test function on the points of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    space: SharedSpace,
    values: Vec<f64>,
}

impl TestFunction {
    pub fn new(space: SharedSpace, values: Vec<f64>) -> Result<Self, MeasureError> {
        if values.len() != space.len() {
            return Err(MeasureError::LengthMismatch {
                found: values.len(),
                expected: space.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(MeasureError::NonFiniteValue { index });
        }
        Ok(Self { space, values })
    }

    /// Indicator of a point subset. On a finite space every indicator is
    /// continuous, so it is an ordinary test function.
    pub fn indicator(space: SharedSpace, subset: &[usize]) -> Result<Self, MeasureError> {
        let mut values = vec![0.0; space.len()];
        for &index in subset {
            if index >= space.len() {
                return Err(MeasureError::InvalidIndex { index, len: space.len() });
            }
            values[index] = 1.0;
        }
        Ok(Self { space, values })
    }

    /// The function `x -> d(base, x)`, which has Lipschitz constant 1.
    pub fn distance_from(space: SharedSpace, base: BasePoint) -> Self {
        let values = (0..space.len()).map(|i| space.distance(base.index(), i)).collect();
        Self { space, values }
    }

    pub fn space(&self) -> &SharedSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A finite list of generator measures on one space. `convexify` selects
/// whether the set denotes the convex hull of the generators or the bare
/// finite set; hull-invariant operations ignore the flag.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguitySet {
    space: SharedSpace,
    generators: Vec<DiscreteMeasure>,
    convexify: bool,
}

impl AmbiguitySet {
    pub fn new(
        generators: Vec<DiscreteMeasure>,
        convexify: bool,
    ) -> Result<Self, MeasureError> {
        let first = generators.first().ok_or(MeasureError::EmptyGenerators)?;
        let space = first.space().clone();
        for g in &generators {
            if !same_space(g.space(), &space) {
                return Err(MeasureError::SpaceMismatch);
            }
        }
        Ok(Self { space, generators, convexify })
    }

    /// The singleton set `{mu}`.
    pub fn singleton(mu: DiscreteMeasure) -> Self {
        Self { space: mu.space().clone(), generators: vec![mu], convexify: true }
    }

    pub fn space(&self) -> &SharedSpace {
        &self.space
    }

    pub fn generators(&self) -> &[DiscreteMeasure] {
        &self.generators
    }

    pub fn convexify(&self) -> bool {
        self.convexify
    }

    /// The same generators with a different hull flag.
    pub fn with_convexify(&self, convexify: bool) -> Self {
        Self { space: self.space.clone(), generators: self.generators.clone(), convexify }
    }

    /// The convex mixture `sum_k weights[k] * generator_k` as a plain weight
    /// vector over the space. `weights` must have one entry per generator.
    pub(crate) fn mixture_weights(&self, mixture: &[f64]) -> Vec<f64> {
        debug_assert_eq!(mixture.len(), self.generators.len());
        let n = self.space.len();
        let mut out = vec![0.0; n];
        for (w, g) in mixture.iter().zip(&self.generators) {
            for (o, gw) in out.iter_mut().zip(g.weights()) {
                *o += w * gw;
            }
        }
        out
    }
}

/// `E_mu[phi]`, the plain expectation pairing.
pub fn expectation(mu: &DiscreteMeasure, phi: &TestFunction) -> Result<f64, MeasureError> {
    if !same_space(mu.space(), phi.space()) {
        return Err(MeasureError::SpaceMismatch);
    }
    Ok(mu.weights().iter().zip(phi.values()).map(|(w, v)| w * v).sum())
}

/// The upper expectation `max over generators of E_mu[phi]`.
///
/// The maximum over the convex hull equals the maximum over the generators
/// because the pairing is linear in the measure, so the `convexify` flag
/// does not affect this value.
pub fn sublinear_expectation(set: &AmbiguitySet, phi: &TestFunction) -> Result<f64, MeasureError> {
    sublinear_expectation_with_witness(set, phi).map(|(v, _)| v)
}

/// Upper expectation together with the index of the attaining generator.
/// Ties are broken toward the lowest generator index.
pub fn sublinear_expectation_with_witness(
    set: &AmbiguitySet,
    phi: &TestFunction,
) -> Result<(f64, usize), MeasureError> {
    if !same_space(set.space(), phi.space()) {
        return Err(MeasureError::SpaceMismatch);
    }
    let mut best = f64::NEG_INFINITY;
    let mut witness = 0;
    for (k, g) in set.generators().iter().enumerate() {
        let v: f64 = g.weights().iter().zip(phi.values()).map(|(w, x)| w * x).sum();
        if v > best {
            best = v;
            witness = k;
        }
    }
    Ok((best, witness))
}

/// `sup over P of P(A)`: the largest mass any generator puts on `A`.
pub fn upper_probability(set: &AmbiguitySet, subset: &[usize]) -> Result<f64, MeasureError> {
    let n = set.space().len();
    let mut mask = vec![false; n];
    for &index in subset {
        if index >= n {
            return Err(MeasureError::InvalidIndex { index, len: n });
        }
        mask[index] = true;
    }
    let mut best = f64::NEG_INFINITY;
    for g in set.generators() {
        let v: f64 =
            g.weights().iter().zip(&mask).filter(|(_, m)| **m).map(|(w, _)| *w).sum();
        best = best.max(v);
    }
    Ok(best)
}

/// `inf over P of P(A)`, computed as `1 - upper_probability(complement)` so
/// that the complement identity holds exactly.
pub fn lower_probability(set: &AmbiguitySet, subset: &[usize]) -> Result<f64, MeasureError> {
    let n = set.space().len();
    let mut mask = vec![true; n];
    for &index in subset {
        if index >= n {
            return Err(MeasureError::InvalidIndex { index, len: n });
        }
        mask[index] = false;
    }
    let complement: Vec<usize> =
        mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect();
    Ok(1.0 - upper_probability(set, &complement)?)
}

/// The Lipschitz constant `max over i != j of |phi(i) - phi(j)| / d(i, j)`;
/// zero on a one-point space.
pub fn lipschitz_constant(phi: &TestFunction) -> f64 {
    let space = phi.space();
    let n = space.len();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let ratio = (phi.values()[i] - phi.values()[j]).abs() / space.distance(i, j);
            best = best.max(ratio);
        }
    }
    best
}

/// The tail functional `max over generators of
/// sum_i w_i d(base, i)^p [d(base, i) >= K]`.
///
/// Nonincreasing in `K` and zero once `K` exceeds every distance from the
/// base point.
pub fn tail_functional(
    set: &AmbiguitySet,
    base: BasePoint,
    p: f64,
    k: f64,
) -> Result<f64, MeasureError> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(MeasureError::InvalidExponent { p });
    }
    let n = set.space().len();
    if base.index() >= n {
        return Err(MeasureError::InvalidIndex { index: base.index(), len: n });
    }
    let space = set.space();
    let mut best = f64::NEG_INFINITY;
    for g in set.generators() {
        let mut total = 0.0;
        for (i, w) in g.weights().iter().enumerate() {
            let d = space.distance(base.index(), i);
            if d >= k {
                total += w * crate::numeric::dpow(d, p);
            }
        }
        best = best.max(total);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{FiniteMetricSpace, ValidationMode};

    fn line(n: usize) -> SharedSpace {
        let coords: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        FiniteMetricSpace::from_points(&coords, 2.0).unwrap().shared()
    }

    fn two_points() -> SharedSpace {
        FiniteMetricSpace::validate(
            Vec::new(),
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            ValidationMode::Strict,
        )
        .unwrap()
        .shared()
    }

    #[test]
    fn normalization_policy() {
        let s = two_points();
        // Small drift renormalized.
        let mu = DiscreteMeasure::new(s.clone(), vec![0.5 + 2e-10, 0.5]).unwrap();
        assert!((mu.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        // Large drift rejected.
        assert!(matches!(
            DiscreteMeasure::new(s.clone(), vec![0.6, 0.5]),
            Err(MeasureError::NotNormalized { .. })
        ));
        // Negative weights rejected.
        assert!(matches!(
            DiscreteMeasure::new(s, vec![1.5, -0.5]),
            Err(MeasureError::NegativeWeight { index: 1, .. })
        ));
    }

    #[test]
    fn expectation_of_point_mass_is_function_value() {
        let s = line(3);
        let phi = TestFunction::new(s.clone(), vec![5.0, -2.0, 7.0]).unwrap();
        for i in 0..3 {
            let mu = DiscreteMeasure::point_mass(s.clone(), i).unwrap();
            assert_eq!(expectation(&mu, &phi).unwrap(), phi.values()[i]);
        }
    }

    #[test]
    fn expectation_of_uniform_is_average() {
        let s = two_points();
        let mu = DiscreteMeasure::uniform(s.clone());
        let phi = TestFunction::new(s, vec![0.0, 1.0]).unwrap();
        assert_eq!(expectation(&mu, &phi).unwrap(), 0.5);
    }

    #[test]
    fn expectation_matches_kahan_oracle() {
        // Oracle: compensated summation in a different accumulation order.
        let s = line(9);
        let weights: Vec<f64> = (0..9).map(|i| ((i * 37 + 11) % 23) as f64).collect();
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mu = DiscreteMeasure::new(s.clone(), weights.clone()).unwrap();
        let values: Vec<f64> = (0..9).map(|i| ((i * 13 + 5) % 17) as f64 - 8.0).collect();
        let phi = TestFunction::new(s, values.clone()).unwrap();

        let mut kahan = 0.0f64;
        let mut carry = 0.0f64;
        for i in (0..9).rev() {
            let term = mu.weights()[i] * values[i] - carry;
            let next = kahan + term;
            carry = (next - kahan) - term;
            kahan = next;
        }
        assert!((expectation(&mu, &phi).unwrap() - kahan).abs() <= 1e-12);
    }

    #[test]
    fn sublinear_expectation_of_singleton() {
        let s = two_points();
        let mu = DiscreteMeasure::new(s.clone(), vec![0.3, 0.7]).unwrap();
        let phi = TestFunction::new(s, vec![1.0, -1.0]).unwrap();
        let set = AmbiguitySet::singleton(mu.clone());
        assert_eq!(
            sublinear_expectation(&set, &phi).unwrap(),
            expectation(&mu, &phi).unwrap()
        );
    }

    #[test]
    fn sublinear_expectation_over_point_masses() {
        let s = two_points();
        let set = AmbiguitySet::new(
            vec![
                DiscreteMeasure::point_mass(s.clone(), 0).unwrap(),
                DiscreteMeasure::point_mass(s.clone(), 1).unwrap(),
            ],
            true,
        )
        .unwrap();
        let phi = TestFunction::new(s, vec![0.0, 1.0]).unwrap();
        assert_eq!(sublinear_expectation(&set, &phi).unwrap(), 1.0);
    }

    #[test]
    fn hull_samples_never_exceed_generator_max() {
        // Mixtures sample the hull; since the pairing is linear in the
        // measure they can never beat the best generator.
        let s = line(5);
        let gens: Vec<DiscreteMeasure> = (0..4)
            .map(|k| {
                let raw: Vec<f64> =
                    (0..5).map(|i| (((i + 2 * k) * 29 + 3) % 19 + 1) as f64).collect();
                let t: f64 = raw.iter().sum();
                DiscreteMeasure::new(s.clone(), raw.iter().map(|w| w / t).collect()).unwrap()
            })
            .collect();
        let set = AmbiguitySet::new(gens.clone(), true).unwrap();
        let phi =
            TestFunction::new(s.clone(), vec![0.2, -1.0, 3.5, 0.0, 1.25]).unwrap();

        let brute = gens
            .iter()
            .map(|g| expectation(g, &phi).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let fast = sublinear_expectation(&set, &phi).unwrap();
        assert!((fast - brute).abs() <= 1e-12);

        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10_000 {
            let mut mix: Vec<f64> = (0..4).map(|_| next()).collect();
            let t: f64 = mix.iter().sum();
            mix.iter_mut().for_each(|m| *m /= t);
            let sample = set.mixture_weights(&mix);
            let v: f64 = sample.iter().zip(phi.values()).map(|(w, x)| w * x).sum();
            assert!(v <= fast + 1e-9);
        }
    }

    #[test]
    fn upper_probability_extremes() {
        let s = two_points();
        let set = AmbiguitySet::new(
            vec![
                DiscreteMeasure::point_mass(s.clone(), 0).unwrap(),
                DiscreteMeasure::uniform(s.clone()),
            ],
            true,
        )
        .unwrap();
        assert_eq!(upper_probability(&set, &[0, 1]).unwrap(), 1.0);
        assert_eq!(upper_probability(&set, &[]).unwrap(), 0.0);
        assert_eq!(upper_probability(&set, &[0]).unwrap(), 1.0);
        assert_eq!(lower_probability(&set, &[0]).unwrap(), 0.5);
        assert!(matches!(
            upper_probability(&set, &[7]),
            Err(MeasureError::InvalidIndex { index: 7, len: 2 })
        ));
    }

    #[test]
    fn complement_identity_is_exact() {
        let s = line(4);
        let gens = vec![
            DiscreteMeasure::new(s.clone(), vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
            DiscreteMeasure::new(s.clone(), vec![0.7, 0.1, 0.1, 0.1]).unwrap(),
        ];
        let set = AmbiguitySet::new(gens, true).unwrap();
        for bits in 0..16u32 {
            let a: Vec<usize> = (0..4).filter(|i| bits & (1 << i) != 0).collect();
            let complement: Vec<usize> = (0..4).filter(|i| bits & (1 << i) == 0).collect();
            let total =
                upper_probability(&set, &a).unwrap() + lower_probability(&set, &complement).unwrap();
            assert_eq!(total, 1.0);
        }
    }

    #[test]
    fn lipschitz_constant_basics() {
        let s = line(3);
        let constant = TestFunction::new(s.clone(), vec![4.0, 4.0, 4.0]).unwrap();
        assert_eq!(lipschitz_constant(&constant), 0.0);
        let identity = TestFunction::new(s.clone(), vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(lipschitz_constant(&identity), 1.0);
    }

    #[test]
    fn lipschitz_constant_matches_pairwise_brute_force() {
        let coords: Vec<Vec<f64>> =
            (0..6).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()]).collect();
        let s = FiniteMetricSpace::from_points(&coords, 2.0).unwrap().shared();
        let values: Vec<f64> = (0..6).map(|i| ((i * 31 + 7) % 13) as f64 / 3.0).collect();
        let phi = TestFunction::new(s.clone(), values.clone()).unwrap();

        let mut brute = 0.0f64;
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    brute = brute.max((values[i] - values[j]).abs() / s.distance(i, j));
                }
            }
        }
        assert_eq!(lipschitz_constant(&phi), brute);
    }

    #[test]
    fn one_point_space_has_zero_lipschitz_constant() {
        let s = FiniteMetricSpace::validate(
            Vec::new(),
            vec![vec![0.0]],
            ValidationMode::Strict,
        )
        .unwrap()
        .shared();
        let phi = TestFunction::new(s, vec![42.0]).unwrap();
        assert_eq!(lipschitz_constant(&phi), 0.0);
    }

    #[test]
    fn tail_functional_cases() {
        let s = line(6);
        let base = BasePoint::new(&s, 0).unwrap();
        let set = AmbiguitySet::singleton(DiscreteMeasure::point_mass(s.clone(), 5).unwrap());
        // K beyond every distance: empty tail.
        assert_eq!(tail_functional(&set, base, 2.0, 100.0).unwrap(), 0.0);
        // Full mass at one point, K = 0.
        assert_eq!(tail_functional(&set, base, 2.0, 0.0).unwrap(), 25.0);
        // Single escaping atom: d(0, 5)^p for K below the atom.
        for p in [1.0, 2.0, 3.0] {
            assert_eq!(tail_functional(&set, base, p, 3.0).unwrap(), 5.0f64.powi(p as i32));
        }
    }

    #[test]
    fn tail_functional_nonincreasing_in_k() {
        let s = line(5);
        let base = BasePoint::new(&s, 0).unwrap();
        let set = AmbiguitySet::new(
            vec![
                DiscreteMeasure::new(s.clone(), vec![0.2, 0.2, 0.2, 0.2, 0.2]).unwrap(),
                DiscreteMeasure::new(s.clone(), vec![0.0, 0.0, 0.5, 0.25, 0.25]).unwrap(),
            ],
            true,
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for k in [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 4.5] {
            let t = tail_functional(&set, base, 1.5, k).unwrap();
            assert!(t <= prev + 1e-15);
            prev = t;
        }
        assert_eq!(tail_functional(&set, base, 1.5, 4.0 + 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn space_mismatch_detected() {
        let a = line(3);
        let b = two_points();
        let mu = DiscreteMeasure::uniform(a);
        let phi = TestFunction::new(b, vec![0.0, 1.0]).unwrap();
        assert!(matches!(expectation(&mu, &phi), Err(MeasureError::SpaceMismatch)));
    }
}
