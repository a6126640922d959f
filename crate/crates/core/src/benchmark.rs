//! The flexible-structure benchmark: a double integrator with a lightly damped
//! resonance near 150 rad/s under a discretized PID controller, sampled at
//! 10 ms, and the model error that destabilizes unconstrained adaptation.

use crate::lti::{StateSpace, TransferFunction};

pub const SAMPLE_TIME: f64 = 0.01;

pub const PLANT_NUM: [f64; 4] = [5.399e-4, 5.308e-4, 3.143e-4, 4.459e-4];
pub const PLANT_DEN: [f64; 5] = [1.0, -2.14, 2.249, -2.08, 0.9704];

pub const CONTROLLER_NUM: [f64; 3] = [75.78, -148.4, 72.63];
pub const CONTROLLER_DEN: [f64; 3] = [1.0, -1.535, 0.5353];

pub const MODEL_ERROR_NUM: [f64; 2] = [0.5366e-4, -1.195e-4];
pub const MODEL_ERROR_DEN: [f64; 3] = [1.0, 0.1429, -0.2798];

/// Uncertainty level used for the robustness analysis.
pub const DELTA: f64 = 3e-4;
/// FIR gain bound used with the safety filter.
pub const BETA: f64 = 2.8;
pub const FIR_LEN: usize = 8;

fn tf(num: &[f64], den: &[f64]) -> TransferFunction {
    TransferFunction::new(num, den, SAMPLE_TIME).expect("benchmark coefficients are valid")
}

pub fn plant_tf() -> TransferFunction {
    tf(&PLANT_NUM, &PLANT_DEN)
}

pub fn controller_tf() -> TransferFunction {
    tf(&CONTROLLER_NUM, &CONTROLLER_DEN)
}

pub fn model_error_tf() -> TransferFunction {
    tf(&MODEL_ERROR_NUM, &MODEL_ERROR_DEN)
}

pub fn plant() -> StateSpace {
    plant_tf().to_state_space()
}

pub fn controller() -> StateSpace {
    controller_tf().to_state_space()
}
