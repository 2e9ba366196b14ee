//! Feature pipeline: deltas, frame stacking with decimation and auxiliary
//! vector appending, reproducing the 40 -> 120 -> 240 -> 340 dimension chain.
//!
//! `cargo run --example features`

use a2w::pipeline::{append_aux, compute_deltas, stack_decimate, FeaturePipeline};
use ndarray::Array2;

fn main() {
    let raw = Array2::from_shape_fn((7, 40), |(t, f)| ((t * 40 + f) as f64 * 0.1).sin());
    let deltas = compute_deltas(raw.view());
    let stacked = stack_decimate(deltas.view());
    let ivector = vec![0.5; 100];
    let full = append_aux(stacked.view(), &ivector);
    println!("raw      {:?}", raw.dim());
    println!("deltas   {:?}", deltas.dim());
    println!("stacked  {:?}", stacked.dim());
    println!("with aux {:?}", full.dim());

    let pipeline = FeaturePipeline { deltas: true, stack: true };
    assert_eq!(pipeline.apply(raw.view(), &ivector), full);
    println!(
        "pipeline: {} frames of {} dims",
        pipeline.output_frames(raw.nrows()),
        pipeline.output_dim(raw.ncols(), ivector.len())
    );

    let ramp = Array2::from_shape_fn((5, 1), |(t, _)| t as f64);
    println!("deltas of a ramp (edges clamped):\n{:.3}", compute_deltas(ramp.view()));
}
