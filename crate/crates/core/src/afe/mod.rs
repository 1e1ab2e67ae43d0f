//! The tree-search feature generator.

pub mod expr;
pub mod rng;
pub mod search;

pub use expr::{canonical_key, evaluate_expression, Expr, ExprKind, Transform, UnaryOp};
pub use rng::{mix_seed, SearchRng};
pub use search::{
    feature_set_key, multicollinearity_check, reduce_nodes, run_afe, AfeResult, AfeSearcher,
    ComparisonTrace, Level, Node, Origin, ReduceInput, ReduceOutcome, Relation, SearchConfig,
    TraceEntry, TraceNode,
};
