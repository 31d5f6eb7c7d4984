pub mod annulus;
pub mod bernstein;
pub mod cycles;
pub mod discriminant;
pub mod field;
pub mod flow;
pub mod lab;
pub mod poly2;
