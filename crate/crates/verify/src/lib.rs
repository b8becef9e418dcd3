//! Reference oracles, random instance generators and the acceptance
//! criteria for `collab-pac`.

pub mod brute;
pub mod criteria;
pub mod gen;
