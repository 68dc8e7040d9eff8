//! Multinomial logit kernel over finite, ordered alternative sets.
//!
//! Every routine takes systematic utilities in a fixed alternative order and keeps that order
//! in its outputs. Log-sums use the max-shift form so utilities of any magnitude are safe.

use rand::Rng;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChoiceError {
    #[error("utility vector is empty")]
    Empty,
    #[error("utility of alternative {index} is not finite")]
    NonFinite { index: usize },
    #[error("expected {expected} values aligned with the alternatives, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

/// Systematic utilities of an ordered alternative set. Non-empty and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> UtilityVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self, ChoiceError> {
        validate(&values)?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn logsum(&self) -> T {
        logsum_unchecked(&self.values)
    }

    pub fn probabilities(&self) -> ChoiceDistribution<T> {
        probabilities_unchecked(&self.values)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.probabilities().sample(rng)
    }

    pub fn expectation(&self, f: &[T]) -> Result<T, ChoiceError> {
        self.probabilities().expectation(f)
    }
}

/// Choice probabilities aligned with the alternative order of the utilities they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceDistribution<T> {
    probabilities: Vec<T>,
}

impl<T: Scalar> ChoiceDistribution<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.probabilities
    }

    pub fn into_vec(self) -> Vec<T> {
        self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Inverse-CDF lookup of a uniform draw in `[0, 1)`, scanning alternatives in order.
    pub fn choose_with_draw(&self, draw: T) -> usize {
        choose_with_draw(&self.probabilities, draw)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probabilities, rng)
    }

    /// `Σ p_i f_i`.
    pub fn expectation(&self, f: &[T]) -> Result<T, ChoiceError> {
        if f.len() != self.probabilities.len() {
            return Err(ChoiceError::LengthMismatch {
                expected: self.probabilities.len(),
                actual: f.len(),
            });
        }
        Ok(self
            .probabilities
            .iter()
            .zip(f)
            .fold(T::zero(), |acc, (&p, &x)| acc + p * x))
    }
}

/// Inverse-CDF lookup over raw probabilities aligned with a fixed alternative order.
pub fn choose_with_draw<T: Scalar>(probabilities: &[T], draw: T) -> usize {
    let mut cumulative = T::zero();
    let mut last_positive = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p > T::zero() {
            last_positive = i;
        }
        cumulative = cumulative + p;
        if draw < cumulative {
            return i;
        }
    }
    // Rounding left the cumulative sum a hair under 1.
    last_positive
}

/// Draws from raw probabilities with one uniform from `rng`.
pub fn sample_index<T: Scalar, R: Rng + ?Sized>(probabilities: &[T], rng: &mut R) -> usize {
    let draw: f64 = rng.random();
    choose_with_draw(probabilities, T::lit(draw))
}

fn validate<T: Scalar>(u: &[T]) -> Result<(), ChoiceError> {
    if u.is_empty() {
        return Err(ChoiceError::Empty);
    }
    match u.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(ChoiceError::NonFinite { index }),
        None => Ok(()),
    }
}

fn max_of<T: Scalar>(u: &[T]) -> T {
    u.iter().copied().fold(T::neg_infinity(), T::max)
}

pub(crate) fn logsum_unchecked<T: Scalar>(u: &[T]) -> T {
    let m = max_of(u);
    let s = u.iter().fold(T::zero(), |acc, &v| acc + (v - m).exp());
    m + s.ln()
}

pub(crate) fn probabilities_unchecked<T: Scalar>(u: &[T]) -> ChoiceDistribution<T> {
    let m = max_of(u);
    let mut probabilities: Vec<T> = u.iter().map(|&v| (v - m).exp()).collect();
    let s = probabilities.iter().fold(T::zero(), |acc, &e| acc + e);
    for p in probabilities.iter_mut() {
        *p = *p / s;
    }
    ChoiceDistribution { probabilities }
}

/// `ln Σ exp(u_i)`, computed as `m + ln Σ exp(u_i - m)` with `m = max u`.
pub fn logsum<T: Scalar>(u: &[T]) -> Result<T, ChoiceError> {
    validate(u)?;
    Ok(logsum_unchecked(u))
}

/// Softmax of the utilities.
pub fn probabilities<T: Scalar>(u: &[T]) -> Result<ChoiceDistribution<T>, ChoiceError> {
    validate(u)?;
    Ok(probabilities_unchecked(u))
}

/// Draws one alternative index. Consumes exactly one uniform from `rng`.
pub fn sample_choice<T: Scalar, R: Rng + ?Sized>(
    u: &[T],
    rng: &mut R,
) -> Result<usize, ChoiceError> {
    Ok(probabilities(u)?.sample(rng))
}

/// Expected value of `f` under the choice probabilities of `u`.
pub fn expectation<T: Scalar>(u: &[T], f: &[T]) -> Result<T, ChoiceError> {
    probabilities(u)?.expectation(f)
}
