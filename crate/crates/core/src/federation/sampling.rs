use rand::seq::index;

use crate::seed::rng_for;

/// Uniform draw of `clients_per_round` distinct client indices in
/// `0..total_clients`, sorted ascending. Each round is an independent draw
/// keyed by `(seed, round)`.
pub fn sample_clients(
    total_clients: usize,
    clients_per_round: usize,
    seed: u64,
    round: usize,
) -> Vec<usize> {
    assert!(clients_per_round <= total_clients);
    let mut rng = rng_for(seed, "client-sampling", round as u64);
    let mut picked = index::sample(&mut rng, total_clients, clients_per_round).into_vec();
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_participation_selects_everyone() {
        assert_eq!(sample_clients(51, 51, 3, 9), (0..51).collect::<Vec<_>>());
    }

    #[test]
    fn fixed_round_is_reproducible() {
        assert_eq!(sample_clients(51, 12, 3, 9), sample_clients(51, 12, 3, 9));
        assert_ne!(sample_clients(51, 12, 3, 9), sample_clients(51, 12, 3, 10));
    }

    #[test]
    fn selection_frequency_is_uniform() {
        let rounds = 10_000;
        let mut hits = vec![0usize; 51];
        for r in 0..rounds {
            let s = sample_clients(51, 12, 42, r);
            assert_eq!(s.len(), 12);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            for i in s {
                hits[i] += 1;
            }
        }
        let p = 12.0 / 51.0;
        let mean = rounds as f64 * p;
        let sd = (rounds as f64 * p * (1.0 - p)).sqrt();
        for (i, &h) in hits.iter().enumerate() {
            assert!((h as f64 - mean).abs() <= 3.0 * sd + 1.0, "client {i}: {h} vs {mean}");
        }
    }
}
