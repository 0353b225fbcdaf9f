use super::ClientUpdate;
use crate::error::{Error, Result};
use crate::nn::ModelWeights;

/// FedAvg: `w = sum_k (n_k / n) w_k` with `n = sum_k n_k` over `updates`.
///
/// Accumulates in `f64` and casts back, so the result does not depend on the
/// order of `updates` beyond `f32` rounding. The frozen prefix, which every
/// client must leave untouched, is copied through verbatim.
pub fn aggregate_fedavg(updates: &[ClientUpdate]) -> Result<ModelWeights> {
    let first = updates
        .first()
        .ok_or_else(|| Error::Contract("no client updates to aggregate".into()))?;
    for u in updates {
        if u.sample_count == 0 {
            return Err(Error::Contract(format!("client {} reported zero samples", u.client_id)));
        }
        if u.weights.params.len() != first.weights.params.len()
            || u.weights.layer_offsets != first.weights.layer_offsets
        {
            return Err(Error::Aggregation(format!(
                "client {} uploaded {} params, client {} uploaded {}",
                u.client_id,
                u.weights.params.len(),
                first.client_id,
                first.weights.params.len()
            )));
        }
        if u.weights.frozen_prefix != first.weights.frozen_prefix {
            return Err(Error::Aggregation(format!(
                "client {} has frozen prefix {}, client {} has {}",
                u.client_id, u.weights.frozen_prefix, first.client_id, first.weights.frozen_prefix
            )));
        }
    }
    let frozen = first.weights.frozen_len();
    if let Some(u) = updates
        .iter()
        .find(|u| u.weights.params[..frozen] != first.weights.params[..frozen])
    {
        return Err(Error::Aggregation(format!(
            "client {} modified frozen layers (differs from client {})",
            u.client_id, first.client_id
        )));
    }

    let n: f64 = updates.iter().map(|u| u.sample_count as f64).sum();
    let len = first.weights.params.len();
    let mut acc = vec![0.0f64; len - frozen];
    for u in updates {
        let share = u.sample_count as f64 / n;
        for (a, &p) in acc.iter_mut().zip(&u.weights.params[frozen..]) {
            *a += share * p as f64;
        }
    }
    let mut params = Vec::with_capacity(len);
    params.extend_from_slice(&first.weights.params[..frozen]);
    params.extend(acc.into_iter().map(|v| v as f32));
    Ok(ModelWeights {
        params,
        layer_offsets: first.weights.layer_offsets.clone(),
        frozen_prefix: first.weights.frozen_prefix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn update(id: usize, n: usize, p: &[f32]) -> ClientUpdate {
        ClientUpdate {
            client_id: id,
            weights: ModelWeights { params: p.to_vec(), layer_offsets: vec![0], frozen_prefix: 0 },
            sample_count: n,
        }
    }

    #[test]
    fn weighted_by_sample_count() {
        let w = aggregate_fedavg(&[update(0, 1, &[1.0]), update(1, 3, &[5.0])]).unwrap();
        assert_eq!(w.params, vec![4.0]);
    }

    #[test]
    fn single_update_is_identity() {
        let u = update(3, 7, &[0.1, -2.5, 3.75]);
        assert_eq!(aggregate_fedavg(std::slice::from_ref(&u)).unwrap(), u.weights);
    }

    #[test]
    fn errors_name_clients() {
        assert!(matches!(aggregate_fedavg(&[]), Err(Error::Contract(_))));
        let err = aggregate_fedavg(&[update(0, 1, &[1.0]), update(4, 1, &[1.0, 2.0])]).unwrap_err();
        assert!(err.to_string().contains("client 4") && err.to_string().contains("client 0"), "{err}");
    }

    #[test]
    fn frozen_tampering_rejected() {
        let mut a = update(0, 1, &[1.0, 2.0]);
        let mut b = update(1, 1, &[1.5, 2.0]);
        for u in [&mut a, &mut b] {
            u.weights.layer_offsets = vec![0, 1];
            u.weights.frozen_prefix = 1;
        }
        assert!(matches!(aggregate_fedavg(&[a, b]), Err(Error::Aggregation(_))));
    }
}
