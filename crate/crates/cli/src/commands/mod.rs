pub mod compare;
pub mod dirac;
pub mod selfcheck;
pub mod train;
