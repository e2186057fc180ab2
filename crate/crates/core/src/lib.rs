//! Anonymizing arrays for attribute-based authorization.
//!
//! An array of access profiles (rows) over a set of attributes (columns) is
//! `(r, t)`-anonymous when every credential of at most `t` attribute-value
//! pairs that appears in it appears in at least `r` rows. A subject
//! presenting such a credential cannot then be singled out with probability
//! above `1/r`.
//!
//! The crate verifies that guarantee under hard, soft and don't-care
//! constraints ([`verify`]), scores how clustered the rows are
//! ([`homogeneity`]), and pads a base array with extra rows until a target
//! guarantee holds ([`construct`]).

pub mod constraints;
pub mod construct;
pub mod error;
pub mod homogeneity;
pub mod io;
pub mod model;
pub mod verify;

pub use constraints::{
    check_feasibility, classify, derive_implicit_hard, row_lower_bound, ConstraintKind, ConstraintSet,
    FeasibilityReport, ForbiddenSet, InfeasibleCredential,
};
pub use construct::{
    construct_padding, deficiency, suggest_credential_size, BudgetExceeded, ConstructionConfig, ConstructionResult,
    CredentialSizeSuggestion, TraceEntry,
};
pub use error::{Error, Result};
pub use homogeneity::{
    closeness, closeness_matrix, export_hypergraph, format_decimal, global_homogeneity, local_homogeneity,
    neighborhoods, weight, ClosenessMatrix, HomogeneityReport, HypergraphFormat, Neighborhood,
};
pub use model::{
    binomial, count_credentials, credential_of_row, enumerate_column_sets, AccessProfileArray, AttributeDef,
    AttributeSchema, ColumnSet, Credential, CredentialCountTable,
};
pub use verify::{
    anonymity_profile, compute_guarantee, is_anonymizing_for, validate, AnonymityProfile, GuaranteeReport,
    HardViolation, ProfileEntry, Shortfall, Validation, Witness,
};
