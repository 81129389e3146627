pub mod dense;
pub mod fermion;
pub mod kde;
pub mod lmg;
pub mod semiclassical;
pub mod spectrum;
