use serde::{Deserialize, Serialize};

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl MeanEstimate {
    /// Sums in slice order so the result does not depend on how the samples
    /// were produced.
    pub fn from_samples(samples: &[f64]) -> Self {
        let len = samples.len();
        if len == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, samples: 0 };
        }
        let mean = samples.iter().sum::<f64>() / len as f64;
        let stderr = if len > 1 {
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (len - 1) as f64;
            (var / len as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, samples: len }
    }
}

/// Generator for trial `trial` of a batch seeded with `seed`: one ChaCha
/// stream per trial, so trials are independent of scheduling order.
pub fn trial_rng(seed: u64, trial: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr() {
        let e = MeanEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        // sample variance 5/3, stderr sqrt(5/12)
        assert!((e.stderr - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanEstimate::from_samples(&[7.0]).stderr, 0.0);
        assert!(MeanEstimate::from_samples(&[]).mean.is_nan());
    }

    #[test]
    fn trial_streams_differ_and_repeat() {
        use rand::RngCore;
        let a = trial_rng(7, 0).next_u64();
        assert_eq!(a, trial_rng(7, 0).next_u64());
        assert_ne!(a, trial_rng(7, 1).next_u64());
        assert_ne!(a, trial_rng(8, 0).next_u64());
    }
}
