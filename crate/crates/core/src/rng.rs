//! Seeded, named random substreams.
//!
//! Every consumer of randomness asks for a stream by name so that adding a
//! new consumer never shifts the numbers another one sees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::space::{gram_schmidt, Matrix, Vector};

pub type StreamRng = ChaCha8Rng;

// FNV-1a, stable across platforms and releases.
fn stream_id(name: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes().chain(index.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn substream(seed: u64, name: &str) -> StreamRng {
    indexed_substream(seed, name, 0)
}

pub fn indexed_substream(seed: u64, name: &str, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name, index));
    rng
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, dim: usize) -> Vector {
    Vector::new((0..dim).map(|_| rng.sample(StandardNormal)).collect())
        .expect("gaussian samples are finite")
}

pub fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let g = gaussian_vector(rng, dim);
        let n = g.norm();
        if n > 1e-6 {
            return g.scale(1.0 / n);
        }
    }
}

/// Uniform point in the closed ball of the given radius.
pub fn point_in_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vector {
    let dir = unit_vector(rng, dim);
    let u: f64 = rng.random();
    dir.scale(radius * u.powf(1.0 / dim as f64))
}

/// Random `rows x cols` matrix with orthonormal columns (`cols <= rows`).
pub fn orthonormal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    assert!(cols <= rows);
    loop {
        let vs: Vec<Vector> = (0..cols).map(|_| gaussian_vector(rng, rows)).collect();
        if let Ok(q) = gram_schmidt(&vs) {
            return Matrix::from_columns(&q).expect("uniform column dims");
        }
    }
}
