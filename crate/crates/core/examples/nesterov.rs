//! Nesterov momentum on small quadratics and the learning-rate schedule.
//!
//! `cargo run --example nesterov`

use a2w::trainer::{lr_at, nesterov_step, LrSchedule, OptimizerState};

fn steps_to(momentum: f64, lr: f64, tol: f64) -> anyhow::Result<usize> {
    let mut theta = vec![1.0, 1.0];
    let mut state = OptimizerState::new(&theta, momentum);
    for step in 1..=100_000 {
        nesterov_step(&mut theta, &mut state, lr, |p: &Vec<f64>| Ok(vec![p[0], 10.0 * p[1]]))?;
        if 0.5 * (theta[0] * theta[0] + 10.0 * theta[1] * theta[1]) <= tol {
            return Ok(step);
        }
    }
    anyhow::bail!("no convergence")
}

fn main() -> anyhow::Result<()> {
    let mut theta = vec![1.0];
    let mut state = OptimizerState::new(&theta, 0.9);
    for n in 1..=3 {
        nesterov_step(&mut theta, &mut state, 0.1, |p: &Vec<f64>| Ok(p.clone()))?;
        println!("f = theta^2/2, step {n}: v = {:.6}  theta = {:.6}", state.velocity[0], theta[0]);
    }

    for momentum in [0.0, 0.5, 0.9] {
        println!("bowl x^2/2 + 5y^2, momentum {momentum}: {} steps to 1e-6", steps_to(momentum, 0.01, 1e-6)?);
    }

    let sched = LrSchedule::default();
    let lrs: Vec<String> = (1..=20).map(|e| format!("{:.5}", lr_at(e, &sched))).collect();
    println!("lr by epoch: {}", lrs.join(" "));
    Ok(())
}
