#[path = "support/vclub_checks.rs"]
mod vclub_checks;

use vclub_checks::*;

#[test]
fn independent_labels_give_near_zero() {
    for seed in 0..3 {
        let node = independent_node_estimates(seed);
        let link = independent_link_estimates(seed);
        println!("seed {seed}: node {node:.4?}\n        link {link:.4?}");
        assert!(mean(&node).abs() <= 0.05, "{}", mean(&node));
        assert!(mean(&link).abs() <= 0.05, "{}", mean(&link));
    }
}

#[test]
fn encoded_labels_give_large_positive_estimates() {
    for seed in 0..3 {
        let node = encoded_node_estimates(seed);
        let link = encoded_link_estimates(seed);
        assert!(node.iter().all(|&v| v > 0.0), "{node:?}");
        assert!(link.iter().all(|&v| v > 0.0), "{link:?}");
        assert!(mean(&node) >= 0.5, "{}", mean(&node));
        assert!(mean(&link) >= 0.5, "{}", mean(&link));
    }
}
