//! Workflow verification with edge-rewritable Petri nets, and few-shot
//! fermentation yield prediction with MSE-filtered GAN augmentation.

pub mod analysis;
pub mod augment;
pub mod data;
pub mod nn;
pub mod par;
pub mod petri;
pub mod predictor;
