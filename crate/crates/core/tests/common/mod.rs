//! Random scenario generators shared by the integration tests.
#![allow(dead_code)]

use memfair_core::model::{BaseClassifier, LabelGroupJoint, MemorizedComposition, Scenario};
use memfair_core::SquareMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Probability vector with entries bounded away from zero.
pub fn simplex(rng: &mut impl Rng, k: usize, floor: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.random_range(floor..1.0)).collect();
    let t: f64 = v.iter().sum();
    v.into_iter().map(|x| x / t).collect()
}

pub fn joint(rng: &mut impl Rng, k: usize) -> LabelGroupJoint {
    let p = simplex(rng, 2 * k, 0.05);
    LabelGroupJoint::new(p[..k].to_vec(), p[k..].to_vec()).unwrap()
}

pub fn stochastic(rng: &mut impl Rng, k: usize) -> SquareMatrix {
    let rows: Vec<Vec<f64>> = (0..k).map(|_| simplex(rng, k, 0.02)).collect();
    SquareMatrix::from_rows(&rows).unwrap()
}

/// Confusion matrix with the given diagonal, off-diagonal mass spread at random.
pub fn with_diagonal(rng: &mut impl Rng, diag: &[f64]) -> SquareMatrix {
    let k = diag.len();
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|r| {
            let off = simplex(rng, k - 1, 0.1);
            let mut it = off.into_iter();
            (0..k)
                .map(|c| if c == r { diag[r] } else { (1.0 - diag[r]) * it.next().unwrap() })
                .collect()
        })
        .collect();
    SquareMatrix::from_rows(&rows).unwrap()
}

/// Base classifier whose rows all equal the given rates, so the rates the
/// model derives do not depend on the memorized composition.
pub fn flat_base(plus: &[f64], minus: &[f64]) -> BaseClassifier {
    let k = plus.len();
    BaseClassifier::new(
        SquareMatrix::from_fn(k, |_, c| plus[c]),
        SquareMatrix::from_fn(k, |_, c| minus[c]),
    )
    .unwrap()
}

/// Memorizes a random fraction in `[0, 0.9]` of every cell, so the result is
/// mass-consistent and leaves every unmemorized slice nonempty.
pub fn memo(rng: &mut impl Rng, joint: &LabelGroupJoint) -> MemorizedComposition {
    let k = joint.classes();
    let plus: Vec<f64> = joint.plus().iter().map(|p| p * rng.random_range(0.0..0.9)).collect();
    let minus: Vec<f64> = joint.minus().iter().map(|p| p * rng.random_range(0.0..0.9)).collect();
    let mass: f64 = plus.iter().chain(&minus).sum();
    MemorizedComposition::new(
        mass,
        (0..k).map(|y| (plus[y] + minus[y]) / mass).collect(),
        plus.iter().map(|m| m / mass).collect(),
    )
    .unwrap()
}

pub fn scenario(rng: &mut impl Rng, k: usize) -> Scenario {
    let j = joint(rng, k);
    let m = memo(rng, &j);
    let base = BaseClassifier::new(stochastic(rng, k), stochastic(rng, k)).unwrap();
    Scenario::new(j, m, base).unwrap()
}

/// Fuzz corpus: `count` scenarios with `K` cycling through 2..=6.
pub fn corpus(seed: u64, count: usize) -> Vec<Scenario> {
    let mut r = rng(seed);
    (0..count).map(|i| scenario(&mut r, 2 + i % 5)).collect()
}

pub fn matrix(rows: &[&[f64]]) -> SquareMatrix {
    SquareMatrix::from_rows(rows).unwrap()
}

pub fn two_by_two(plus: [[f64; 2]; 2], minus: [[f64; 2]; 2]) -> BaseClassifier {
    BaseClassifier::new(
        SquareMatrix::from_rows(&plus).unwrap(),
        SquareMatrix::from_rows(&minus).unwrap(),
    )
    .unwrap()
}

/// Equal opportunity example: p^+=(0.3,0.2), p^-=(0.2,0.3),
/// C^± = [[0.8,0.2],[0.3,0.7]], p_D=0.2, q=(0.5,0.5), q^+=(0.4,0.1).
pub fn opportunity_worked() -> Scenario {
    let c = [[0.8, 0.2], [0.3, 0.7]];
    Scenario::new(
        LabelGroupJoint::new(vec![0.3, 0.2], vec![0.2, 0.3]).unwrap(),
        MemorizedComposition::new(0.2, vec![0.5, 0.5], vec![0.4, 0.1]).unwrap(),
        two_by_two(c, c),
    )
    .unwrap()
}

/// Parity example with rates fixed at (0.5, 0.5): p_D=0.2, q=(0.5,0.5), q^+=(0.3,0.2).
pub fn parity_worked() -> Scenario {
    Scenario::new(
        LabelGroupJoint::new(vec![0.3, 0.2], vec![0.2, 0.3]).unwrap(),
        MemorizedComposition::new(0.2, vec![0.5, 0.5], vec![0.3, 0.2]).unwrap(),
        flat_base(&[0.5, 0.5], &[0.5, 0.5]),
    )
    .unwrap()
}

pub fn odds_base() -> BaseClassifier {
    two_by_two([[0.8, 0.2], [0.3, 0.7]], [[0.9, 0.1], [0.4, 0.6]])
}

/// The zero equalized-odds composition for `odds_base` (p_D = 0.76).
pub fn odds_worked() -> Scenario {
    Scenario::new(
        LabelGroupJoint::new(vec![0.3, 0.2], vec![0.2, 0.3]).unwrap(),
        MemorizedComposition::new(0.76, vec![0.43 / 0.76, 0.33 / 0.76], vec![0.27 / 0.76, 0.12 / 0.76]).unwrap(),
        odds_base(),
    )
    .unwrap()
}
