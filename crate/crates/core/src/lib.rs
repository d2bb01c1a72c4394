//! Agglomeration of specialized talent: from biographies of notable people to
//! specialization matrices, relatedness densities, spatial lags and
//! fixed-effects models of regional entry and exit.

pub mod concentration;
pub mod corpus;
pub mod econometrics;
pub mod frame;
pub mod pipeline;
pub mod relatedness;
pub mod spatial;
pub mod specialization;
pub mod svg;
pub mod workflow;
