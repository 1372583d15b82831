/// Status of one actor after a step: a working actor fails with
/// `prob_failing`, a failing one is repaired with `prob_fixed`. Exactly one
/// uniform draw in `[0, 1)` is consumed.
pub fn actor_failure_step(failing: bool, prob_failing: f64, prob_fixed: f64, draw: f64) -> bool {
    if failing {
        draw >= prob_fixed
    } else {
        draw < prob_failing
    }
}

/// Advances every actor's failure status, one draw per actor in order.
pub fn failure_step(
    failing: &[bool],
    prob_failing: &[f64],
    prob_fixed: &[f64],
    mut draw: impl FnMut() -> f64,
) -> Vec<bool> {
    failing
        .iter()
        .zip(prob_failing.iter().zip(prob_fixed))
        .map(|(&f, (&pf, &px))| actor_failure_step(f, pf, px, draw()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_probability_keeps_status() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let start = vec![false, true, false];
        let mut s = start.clone();
        for _ in 0..100 {
            s = failure_step(&s, &[0.0; 3], &[0.0; 3], || rng.gen());
        }
        assert_eq!(s, start);
    }

    #[test]
    fn certain_failure_sticks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = vec![false; 4];
        for _ in 0..50 {
            s = failure_step(&s, &[1.0; 4], &[0.0; 4], || rng.gen());
            assert!(s.iter().all(|&f| f));
        }
    }

    #[test]
    fn stationary_fraction() {
        let (p, q) = (0.1, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = vec![false];
        let mut down = 0;
        for _ in 0..5000 {
            s = failure_step(&s, &[p], &[q], || rng.gen());
            down += usize::from(s[0]);
        }
        let fraction = down as f64 / 5000.0;
        assert!((fraction - p / (p + q)).abs() < 0.05, "{fraction}");
    }
}
