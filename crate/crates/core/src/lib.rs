pub mod algebra;
pub mod calibration;
pub mod dynamics;
pub mod field;
pub mod harness;
pub mod kelvin;
pub mod sampling;
pub mod verification;
