pub mod operator;
pub mod nash;
pub mod variety;
pub mod tfim;
pub mod qpd;
