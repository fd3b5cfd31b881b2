//! A proof kernel for two-valued logic with free variables, free atoms, and
//! Hilbert's epsilon operator.
//!
//! The crate is organized around a small number of pieces:
//!
//! - [`syntax`]: sorts, symbols in four disjoint classes (free variables
//!   `?x`, free atoms `!a`, bound atoms, constants), terms with epsilon,
//!   formulas, sequents, capture-avoiding substitution, alpha-equivalence,
//!   and a text grammar with parser and printer.
//! - [`varcond`]: variable-conditions, a positive edge set P and a
//!   negative edge set N over the free symbols, with the consistency check
//!   (P acyclic, no N edge closed by a P path), sigma-updates under
//!   substitution, and extension orderings.
//! - [`choice`]: choice conditions binding free variables to
//!   lambda-prefixed epsilon entries, the well-formedness check against a
//!   variable-condition, the Q formula expressing a committed choice, and
//!   the extended sigma-update.
//! - [`calculus`]: proof states and rules: alpha/beta decomposition, gamma
//!   instantiation, the two liberalized delta rules, global variable
//!   instantiation with its proof obligations, local atom instantiation,
//!   goal closure, and a line-oriented proof-script format.
//! - [`epsilon`]: epsilon-term elimination into choice-conditioned
//!   variables (shared or per-occurrence), reconstruction by rewriting and
//!   beta-reduction, and quantifier elimination with size statistics.
//! - [`semantics`]: a brute-force finite-model oracle (evaluation,
//!   semantical valuations with access sets, compatibility, and validity by
//!   exhaustive enumeration) used as the reference for every soundness
//!   claim in the test suite.

pub mod calculus;
pub mod choice;
pub mod epsilon;
pub mod semantics;
pub mod syntax;
pub mod varcond;

pub use calculus::{
    apply_step, parse_script, run_script, CalculusError, ProofState, ProofStep, RunReport,
    ScriptStep, StepKind, StepPayload,
};
pub use choice::{
    check_cc, extended_sigma_update, is_cc, is_extended_extension, q_formula, CcEntry, CcError,
    ChoiceCondition,
};
pub use epsilon::{
    eliminate, eliminate_fresh, eliminate_traced, qelim, qelim_parallel_homogeneous, reconstruct,
    ElimResult, EpsStats, EpsilonError, QelimMode, SubtermStat,
};
pub use semantics::{
    all_valuations, enumerate_compatible, epsilon_combine, eval_formula, eval_sequent, eval_term,
    goals_true, is_compatible, is_valid, FiniteStructure, SemValuation, SemanticsError, Valuation,
};
pub use syntax::{
    alpha_equal, alpha_equal_term, apply_subst, apply_subst_sequent, apply_subst_term,
    free_symbols, free_symbols_sequent, free_symbols_term, fresh_name, has_free_bound_atoms,
    has_free_bound_atoms_term, parse_formula, parse_term, sort_of_term, Class, Formula, Sequent,
    Signature, Sort, Substitution, Symbol, SyntaxError, Term,
};
pub use varcond::{VarCond, VarCondError};
