// Adadelta on a 2-D quadratic bowl.

use textshift::training::{adadelta_step, AdadeltaState};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut theta = vec![3.0, -2.0];
    let mut state = AdadeltaState::zeros(2);
    for step in 0..=1000 {
        // f = x^2 + 10 y^2
        let grad = [2.0 * theta[0], 20.0 * theta[1]];
        if step % 250 == 0 {
            println!("step {step:>4}: theta = ({:+.5}, {:+.5})", theta[0], theta[1]);
        }
        adadelta_step(&mut theta, &grad, &mut state, 0.95, 1e-6)?;
    }
    assert!(theta[0].abs() < 1e-2 && theta[1].abs() < 1e-2);
    Ok(())
}

fn main() {
    run_example().unwrap();
}
