mod common;

use common::*;

#[test]
fn claimed_containments_hold_on_small_terms() {
    let drawn = check_containment_claims(&mut rng(41), 200).unwrap();
    assert!(drawn > 200, "every random pair was claimed");
}

#[test]
fn universe_size() {
    assert_eq!(terms(1).len(), 3);
    assert_eq!(terms(2).len(), 3 + 6 + 9);
}
