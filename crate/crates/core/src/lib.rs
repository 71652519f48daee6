pub mod acquisition;
pub mod derivatives;
pub mod error;
pub mod gp;
pub mod hyper;
pub mod linalg;
pub mod normal;
pub mod oracle;
pub mod rng;
pub mod design;
pub mod ep;
pub mod spectral;
