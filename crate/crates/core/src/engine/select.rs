use rand::seq::index;

use crate::rng;

/// `max(1, round(C * K))`, never more than `K`.
pub fn participant_count(num_clients: usize, fraction: f64) -> usize {
    ((fraction * num_clients as f64).round() as usize).clamp(1, num_clients.max(1))
}

/// Clients taking part in `round`, ascending. Drawn uniformly without
/// replacement from the stream `(seed, round)`.
pub fn select_participants(num_clients: usize, fraction: f64, round: usize, seed: u64) -> Vec<usize> {
    if num_clients == 0 {
        return Vec::new();
    }
    let count = participant_count(num_clients, fraction);
    let mut g = rng::stream(seed, "select", &[round as u64]);
    let mut picked = index::sample(&mut g, num_clients, count).into_vec();
    picked.sort_unstable();
    picked
}
