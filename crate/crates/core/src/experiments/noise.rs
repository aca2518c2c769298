use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::field::{LabelSet, P0Field};

/// Standard normal samples from ChaCha20 keyed by the little-endian seed
/// (remaining key bytes zero, stream 0), turned into normals by Box-Muller.
///
/// Each pair of `u64` words gives `u1 = 1 - (a >> 11) 2^-53` and
/// `u2 = (b >> 11) 2^-53`; the two outputs `r cos(2 pi u2)` and
/// `r sin(2 pi u2)` with `r = sqrt(-2 ln u1)` are emitted in that order.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Self { rng: ChaCha20Rng::from_seed(key), spare: None }
    }

    fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = std::f64::consts::TAU * u2;
        self.spare = Some(r * t.sin());
        r * t.cos()
    }
}

/// Adds `N(0, sigma^2)` per cell in index order. Values are taken to be gray
/// levels in `[0, 1]`, so `sigma` is a fraction of the gray range.
pub fn add_gaussian_noise(image: &P0Field, sigma: f64, seed: u64) -> P0Field {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    if sigma == 0.0 {
        return P0Field::new(image.mesh().clone(), image.values().to_vec()).expect("same mesh");
    }
    let mut g = GaussianStream::new(seed);
    let vals = image.values().iter().map(|&v| v + sigma * g.next_normal()).collect();
    P0Field::new(image.mesh().clone(), vals).expect("same mesh")
}

/// Maps gray `[0, 1]` affinely onto `[min W, max W]` and clamps there.
/// Returns the field and the number of clamped cells.
pub fn scale_to_labels(gray: &P0Field, labels: &LabelSet) -> (P0Field, usize) {
    let (lo, hi) = (labels.min() as f64, labels.max() as f64);
    let mut clamped = 0;
    let vals = gray
        .values()
        .iter()
        .map(|&g| {
            let x = lo + (hi - lo) * g;
            if x < lo || x > hi {
                clamped += 1;
            }
            x.clamp(lo, hi)
        })
        .collect();
    (P0Field::new(gray.mesh().clone(), vals).expect("same mesh"), clamped)
}
