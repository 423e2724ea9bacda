//! Desk-scale training run: a single-scale unoriented-normal network trained
//! on clean and noisy (σ = 0.012) samples of an analytic sphere, an analytic
//! cylinder and a cube mesh.
//!
//! ```text
//! cargo run --release --example desk_training -- <out_dir> [seed] [epochs] [learning_rate]
//! ```

use std::path::PathBuf;

use pcpnet::training::desk::{desk_clouds, desk_config, DESK_EPOCHS};
use pcpnet::training::train;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "desk_training".into()));
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(1);
    let epochs: usize = args.next().map(|s| s.parse().expect("epochs")).unwrap_or(DESK_EPOCHS);
    let mut config = desk_config(seed, epochs);
    if let Some(lr) = args.next() {
        config.learning_rate = lr.parse().expect("learning rate");
    }
    let outcome = train(desk_clouds(seed).unwrap(), config, &out).unwrap();
    println!(
        "trained {} epochs, final loss {:.5}, checkpoint {}",
        outcome.epochs,
        outcome.final_loss,
        outcome.final_checkpoint.display()
    );
}
