//! Concrete Hamiltonian systems: the Fourier semi-discretizations of the
//! three benchmark PDEs, and a harmonic oscillator for demos and tests.

pub mod kdv;
pub mod nlse;
pub mod oscillator;
pub mod wave;

pub use kdv::KdvSystem;
pub use nlse::NlseSystem;
pub use oscillator::HarmonicOscillator;
pub use wave::WaveSystem;
