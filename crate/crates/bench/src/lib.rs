//! Fixed inputs shared by the benchmarks.

use radial_core::Nonlinearity;

pub fn cubic3() -> Nonlinearity {
    Nonlinearity::cubic(3.0).expect("valid scale")
}

pub fn cubic1() -> Nonlinearity {
    Nonlinearity::cubic(1.0).expect("valid scale")
}
