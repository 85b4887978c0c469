//! Prints the first 16 words of a few seeded streams, in the format of
//! `fixtures/rng_vectors.txt`. Trial streams come from `derive_seed`.

use causalkit::rng::{derive_seed, RngStream};

fn main() {
    let seeds = [0, 1, 42, derive_seed(7, 3), u64::MAX];
    for seed in seeds {
        let mut rng = RngStream::new(seed);
        let words: Vec<String> = (0..16).map(|_| format!("{:016x}", rng.next_u64())).collect();
        println!("{seed} {}", words.join(" "));
    }
    let mut rng = RngStream::derived(7, 3);
    println!("# derived(7, 3): uniform {:.17} normal {:.17}", rng.uniform(), rng.normal());
}
