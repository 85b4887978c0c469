use causalkit::rng::{derive_seed, RngStream};

#[test]
fn streams_match_committed_vectors() {
    let text = std::fs::read_to_string("fixtures/rng_vectors.txt").unwrap();
    let mut checked = 0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let mut parts = line.split_whitespace();
        let seed: u64 = parts.next().unwrap().parse().unwrap();
        let mut rng = RngStream::new(seed);
        for (i, word) in parts.enumerate() {
            let want = u64::from_str_radix(word, 16).unwrap();
            assert_eq!(rng.next_u64(), want, "seed {seed}, word {i}");
        }
        assert_eq!(rng.draws(), 16);
        checked += 1;
    }
    assert_eq!(checked, 5);
}

#[test]
fn derived_seeds_are_fixed() {
    // The fourth committed stream is the derived trial seed (7, 3).
    assert_eq!(derive_seed(7, 3), 10296273816529588891);
    assert_eq!(RngStream::derived(7, 3).seed(), derive_seed(7, 3));
}

#[test]
fn derived_seeds_do_not_collide_on_small_grids() {
    let mut seen = std::collections::HashSet::new();
    for base in 0..64 {
        for i in 0..256 {
            assert!(seen.insert(derive_seed(base, i)));
        }
    }
}
