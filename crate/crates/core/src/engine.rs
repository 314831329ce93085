//! Path sampling and reproducible parallel replication.
//!
//! Every replication draws from its own ChaCha stream derived from the
//! master seed, a tag naming the experiment cell, and the replication
//! index. Results are gathered in index order and reduced sequentially, so
//! the thread count never changes a single bit of the output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::statistics::LlrState;
use crate::stream_models::StreamModel;

/// Replication count, master seed and step cap shared by Monte Carlo routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct McSettings {
    pub replications: usize,
    pub seed: u64,
    pub horizon: u64,
}

impl McSettings {
    pub fn new(replications: usize, seed: u64, horizon: u64) -> Result<Self> {
        if replications == 0 {
            return Err(Error::config("replications must be >= 1"));
        }
        if horizon == 0 {
            return Err(Error::config("horizon must be >= 1"));
        }
        Ok(Self {
            replications,
            seed,
            horizon,
        })
    }
}

/// How a sampled path ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathOutcome {
    /// The visitor asked to stop at this time.
    Stopped(u64),
    Horizon,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of integers into one tag.
pub fn tag(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5EED_5EED_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Random source of replication `index` within the cell named by `tag`.
pub fn replication_rng(master_seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    let mut z = master_seed ^ tag.rotate_left(17);
    for chunk in seed.chunks_exact_mut(8) {
        z = splitmix64(z);
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(index);
    rng
}

/// Runs `f(0), f(1), ...` in parallel and returns the results in index order.
pub fn par_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..count as u64).into_par_iter().map(f).collect()
}

/// Fallible variant of [`par_indexed`]; the first error by index wins.
pub fn try_par_indexed<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    par_indexed(count, f).into_iter().collect()
}

/// Samples one path with stream `k` drawn from its alternative iff
/// `sampling[k]`, handing the cumulative LLR state to `visit` after every
/// step until it returns `true` or `horizon` steps have elapsed.
pub fn drive_path<M, R, F>(
    models: &[M],
    sampling: &[bool],
    rng: &mut R,
    horizon: u64,
    mut visit: F,
) -> Result<PathOutcome>
where
    M: StreamModel,
    R: Rng + ?Sized,
    F: FnMut(&LlrState) -> bool,
{
    let k = models.len();
    let mut state = LlrState::new(k);
    let mut inc = vec![0.0; k];
    while state.n() < horizon {
        for (j, (m, &sig)) in models.iter().zip(sampling).enumerate() {
            let x = m.llr_increment(m.sample(sig, rng));
            if !x.is_finite() {
                return Err(Error::Numerical {
                    stream: j,
                    message: format!("non-finite LLR increment {x}"),
                });
            }
            inc[j] = x;
        }
        state.advance(&inc)?;
        if visit(&state) {
            return Ok(PathOutcome::Stopped(state.n()));
        }
    }
    Ok(PathOutcome::Horizon)
}

/// Mean and standard error of a sample, accumulated in order (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 / (self.count - 1) as f64).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream_models::Model;

    #[test]
    fn rng_streams_are_reproducible_and_distinct() {
        let mut a = replication_rng(42, tag(&[1, 2]), 7);
        let mut b = replication_rng(42, tag(&[1, 2]), 7);
        let mut c = replication_rng(42, tag(&[1, 2]), 8);
        let mut d = replication_rng(42, tag(&[1, 3]), 7);
        let xa: u64 = a.random();
        assert_eq!(xa, b.random::<u64>());
        assert_ne!(xa, c.random::<u64>());
        assert_ne!(xa, d.random::<u64>());
    }

    #[test]
    fn par_indexed_keeps_order() {
        let out = par_indexed(1000, |i| i * 3);
        assert!(out.iter().enumerate().all(|(i, &v)| v == 3 * i as u64));
    }

    #[test]
    fn results_independent_of_thread_count() {
        let models = vec![Model::gaussian(0.5).unwrap(); 4];
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                par_indexed(64, |i| {
                    let mut rng = replication_rng(9, 0, i);
                    let mut last = Vec::new();
                    drive_path(&models, &[true, false, true, false], &mut rng, 20, |s| {
                        last = s.values().to_vec();
                        false
                    })
                    .unwrap();
                    last
                })
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn drive_path_reports_horizon() {
        let models = vec![Model::gaussian(0.5).unwrap(); 2];
        let mut rng = replication_rng(1, 2, 3);
        let mut steps = 0;
        let out = drive_path(&models, &[false, false], &mut rng, 10, |_| {
            steps += 1;
            false
        })
        .unwrap();
        assert_eq!(out, PathOutcome::Horizon);
        assert_eq!(steps, 10);
        let out = drive_path(&models, &[false, false], &mut rng, 10, |s| s.n() == 4).unwrap();
        assert_eq!(out, PathOutcome::Stopped(4));
    }

    #[test]
    fn moments_match_direct_formulae() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let m: Moments = xs.iter().copied().collect();
        assert_eq!(m.mean(), 3.5);
        assert!((m.variance() - 7.0).abs() < 1e-12);
        assert!((m.std_error() - (7.0f64 / 4.0).sqrt()).abs() < 1e-12);
    }
}
