//! Finite-difference check of every gradient in a tiny model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use concept_tagger::neural::{finite_difference_check, gradcheck_fixture, DropoutMasks, GradCheckOptions};

fn main() {
    let (model, chunk) = gradcheck_fixture(0, true);
    let dims = model.dims();

    let report = finite_difference_check(&model, &chunk, &GradCheckOptions::default()).expect("finite loss");
    println!("inference mode, loss {:.6}\n{report}", report.loss);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let masks = DropoutMasks::sample(chunk.window(), dims.input_dim(), dims.hidden, 0.5, &mut rng);
    let opts = GradCheckOptions {
        masks: Some(masks),
        ..GradCheckOptions::default()
    };
    let report = finite_difference_check(&model, &chunk, &opts).expect("finite loss");
    println!("with dropout masks, loss {:.6}\n{report}", report.loss);
    std::process::exit(if report.passed() { 0 } else { 1 });
}
