//! Counter-based random substreams.
//!
//! Every random draw in the library comes from a stream identified by
//! `(seed, purpose, realization, sector)`. Streams are independent of the
//! order in which they are requested, so parallel runs reproduce serial ones
//! bit for bit.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Tags separating the random streams of different consumers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Haar = 0x4841_4152,
    U1Haar = 0x5531_4841,
    Gue = 0x4755_45aa,
    Syk = 0x5359_4b00,
    Conjugation = 0x434f_4e4a,
    State = 0x5354_4154,
    Encoding = 0x454e_434f,
    Operator = 0x4f50_4552,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for one `(realization, sector)` cell. Up to `2^20` sectors or
/// sub-draws per realization are addressable.
pub fn substream(seed: u64, purpose: Purpose, realization: u64, sector: u64) -> StreamRng {
    let key = splitmix64(seed ^ purpose as u64);
    let mut bytes = [0u8; 32];
    let mut s = key;
    for chunk in bytes.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(bytes);
    rng.set_stream((realization << 20) | (sector & 0xf_ffff));
    rng
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Complex Gaussian with `E|z|^2 = var`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    Complex64::new(s * normal(rng), s * normal(rng))
}

/// `rows x cols` matrix of i.i.d. standard complex Gaussians, filled column-major.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| complex_normal(rng, 1.0))
}
