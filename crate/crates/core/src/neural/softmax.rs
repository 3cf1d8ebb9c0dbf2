/// Numerically stable softmax: logits are shifted by their maximum before
/// exponentiation and the result is renormalized to sum to one.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    if logits.is_empty() {
        return Vec::new();
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest entry (first one on ties).
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_logits_split_evenly() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let p = softmax(&[1000.0, 999.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert_eq!(argmax(&p), Some(0));
    }

    proptest! {
        #[test]
        fn sums_to_one_and_keeps_argmax(logits in proptest::collection::vec(-50.0f64..50.0, 1..12)) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v > 0.0 && v <= 1.0));
            prop_assert_eq!(argmax(&p), argmax(&logits));
        }

        #[test]
        fn shift_invariant(logits in proptest::collection::vec(-50.0f64..50.0, 1..12), c in -100.0f64..100.0) {
            let shifted: Vec<f64> = logits.iter().map(|z| z + c).collect();
            for (a, b) in softmax(&logits).iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
