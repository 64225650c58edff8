mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn network_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let err = common::network::gradient_check(&mut rng, 20, 1e-6);
        assert!(err <= 1e-3, "relative error {err}");
    }
}
