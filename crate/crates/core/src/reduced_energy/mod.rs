//! Energy of the tower ansatz, its expansion in `ε`, and the error terms of
//! the auxiliary equations.

mod energy;
mod error_norms;
mod expansion;
mod inequalities;

pub(crate) use energy::{bubble_energy_scale, profile_energy};
pub use energy::{
    energy_diff_d2, energy_direct, energy_excess, functional_j, interaction_integral, single_bubble_terms,
    InteractionTerms, SingleBubbleTerms,
};
pub use error_norms::{error_norm_r1, error_norm_r2, error_norm_r2_surrogate, ErrorNormReport, ErrorTerm};
pub use expansion::{
    critical_d1, critical_d2, critical_d2_report, expansion_terms, expansion_terms_with, g1, g2, g2_with, CriticalD2,
    ExpansionReport, RobinFactor,
};
pub use inequalities::{check_inequality, sample_inequality, InequalitySample, InequalityValues, LemmaTag};

#[cfg(test)]
mod tests;
