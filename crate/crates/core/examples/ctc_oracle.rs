//! Computes a CTC loss by forward-backward, checks it against brute-force
//! path enumeration and checks the logit gradient by finite differences.
//!
//! `cargo run --example ctc_oracle`

use a2w::alphabet::LabelId;
use a2w::ctc::{ctc_brute_force, ctc_grad_check, ctc_loss, PosteriorLattice};
use ndarray::array;

fn main() -> anyhow::Result<()> {
    let logits = array![
        [0.2, 1.0, -0.5],
        [0.1, 0.3, 0.9],
        [1.2, -0.4, 0.0],
        [-0.3, 0.8, 0.5],
    ];
    let lattice = PosteriorLattice::from_logits(logits)?;
    let target = [LabelId(1), LabelId(2)];

    let result = ctc_loss(&lattice, &target)?;
    let brute = -ctc_brute_force(&lattice, &target)?;
    println!("forward-backward loss {:.12}", result.log_loss);
    println!("brute-force loss      {brute:.12}");
    println!("gradient wrt logits:\n{:.4}", result.grad);
    println!("label occupancy:\n{:.4}", result.occupancy);
    println!("max finite-difference error {:.2e}", ctc_grad_check(&lattice, &target, 1e-5)?);

    let repeated = [LabelId(1), LabelId(1), LabelId(1)];
    match ctc_loss(&lattice, &repeated) {
        Ok(r) => println!("A A A fits in 4 frames? loss {:.4}", r.log_loss),
        Err(e) => println!("A A A in 4 frames: {e}"),
    }
    Ok(())
}
