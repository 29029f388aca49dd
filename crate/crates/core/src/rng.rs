//! Deterministic pseudo-randomness for property tests and outcome sampling.
//!
//! A 64-bit linear congruential generator with Knuth's MMIX constants
//! (multiplier 6364136223846793005, increment 1442695040888963407). Doubles
//! take the top 53 bits of the state, giving values in [0, 1) that are
//! identical on every platform; no operating-system entropy is involved
//! anywhere, so seeded runs reproduce bit for bit.

use alloc::vec::Vec;

use crate::basis::Rank;
use crate::labstate::Labstate;
use crate::matrix::CMat;
use crate::stage::SemiUnitary;
use crate::Complex64;

const MULTIPLIER: u64 = 6364136223846793005;
const INCREMENT: u64 = 1442695040888963407;

#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Lcg64 {
        Lcg64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(MULTIPLIER).wrapping_add(INCREMENT);
        self.state
    }

    /// Uniform double in [0, 1) from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Complex number with independent real and imaginary parts in [-1, 1).
    pub fn next_complex(&mut self) -> Complex64 {
        let re = 2.0 * self.next_f64() - 1.0;
        let im = 2.0 * self.next_f64() - 1.0;
        Complex64::new(re, im)
    }
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.conj() * y;
    }
    acc
}

fn norm(v: &[Complex64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x.norm_sqr()).sum())
}

/// Random `rows x cols` matrix with orthonormal columns, built by modified
/// Gram-Schmidt over random complex columns (two orthogonalization passes,
/// so the Gram deviation lands near machine precision). Requires
/// `rows >= cols`.
pub fn random_isometry(rng: &mut Lcg64, rows: usize, cols: usize) -> CMat {
    assert!(rows >= cols, "an isometry cannot have more columns than rows");
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(cols);
    for _ in 0..cols {
        loop {
            let mut v: Vec<Complex64> = (0..rows).map(|_| rng.next_complex()).collect();
            for _pass in 0..2 {
                for q in &basis {
                    let overlap = inner(q, &v);
                    for (x, y) in v.iter_mut().zip(q.iter()) {
                        *x -= overlap * y;
                    }
                }
            }
            let n = norm(&v);
            // A random draw nearly inside the previous span is astronomically
            // unlikely, but redraw rather than divide by noise.
            if n > 1e-6 {
                for x in v.iter_mut() {
                    *x /= n;
                }
                basis.push(v);
                break;
            }
        }
    }
    let mut m = CMat::zeros(rows, cols);
    for (c, col) in basis.iter().enumerate() {
        for (r, &x) in col.iter().enumerate() {
            m[(r, c)] = x;
        }
    }
    m
}

/// Random Schrodinger stage: a random isometry on the signal sector, block
/// extended with an exact void-to-void corner.
pub fn random_schrodinger_stage(
    rng: &mut Lcg64,
    source_rank: Rank,
    target_rank: Rank,
    source_time: i64,
) -> SemiUnitary {
    let sd = source_rank.dimension() as usize;
    let td = target_rank.dimension() as usize;
    let v = random_isometry(rng, td - 1, sd - 1);
    let mut m = CMat::zeros(td, sd);
    m[(0, 0)] = Complex64::new(1.0, 0.0);
    for r in 0..td - 1 {
        for c in 0..sd - 1 {
            m[(r + 1, c + 1)] = v[(r, c)];
        }
    }
    SemiUnitary::new(m, source_rank, target_rank, source_time, source_time + 1, crate::DEFAULT_TOL)
        .expect("block extension of an isometry is semi-unitary")
}

/// Random normalized labstate with dense support.
pub fn random_labstate(rng: &mut Lcg64, rank: Rank, time: i64) -> Labstate {
    let dim = rank.dimension();
    loop {
        let amps: Vec<Complex64> = (0..dim).map(|_| rng.next_complex()).collect();
        let n = norm(&amps);
        if n <= 1e-6 {
            continue;
        }
        let entries = amps.into_iter().enumerate().map(|(i, a)| (i as u64, a / n));
        match Labstate::general_state(entries, rank, time) {
            Ok(state) => return state,
            Err(_) => continue,
        }
    }
}
