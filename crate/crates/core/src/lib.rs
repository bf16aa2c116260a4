pub mod error;
pub mod quadrature;
pub mod sphere;
pub mod paneitz;
pub mod conformal;
pub mod curvature;
pub mod warped;
pub mod ricci;
pub mod qcflow;
pub mod testdata;
