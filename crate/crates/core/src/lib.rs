pub mod numerics;
pub mod estimation;
pub mod gmrf;
pub mod modelsel;
pub mod scores;
