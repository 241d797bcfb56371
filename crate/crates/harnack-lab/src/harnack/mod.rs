//! Chain-cover geometry, empirical Harnack measurements, calibration of
//! the existential constants and the appendix verifiers (ABP, growth
//! lemma, ink-spots, level-set decay).

mod chain;
mod measure;
mod suite;
mod verifiers;

pub use chain::{
    build_chain_cover, chain_between, min_overlap_constant, overlap_volume_analytic,
    overlap_volume_grid, Chain, ChainCover, CoverRegion,
};
pub use measure::{
    calibrate, measure_harnack, CalibratedConstants, HarnackMeasurement, VIOLATION_TOLERANCE,
};
pub use suite::{calibrate_on, held_out_suite, training_suite, SuiteCase, SuiteFactors};
pub use verifiers::{
    abp_check, verify_growth_lemma, verify_inkspots, verify_levelset_decay, AbpReport,
    GrowthCheck, LevelDecayRow,
};
