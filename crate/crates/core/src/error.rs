use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("syntax error at column {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("undeclared identifier `{name}` at column {position}")]
    Undeclared { name: String, position: usize },
    #[error("`{0}` is already declared")]
    Duplicate(String),
    #[error("`{0}` is not a dependent variable")]
    NotDependent(String),
    #[error("`{0}` is not an independent variable")]
    NotIndependent(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("cyclic binding: the value bound to `{0}` contains it")]
    CyclicBinding(String),
    #[error("`{0}` does not appear linearly in its equation")]
    NonLinearLeading(String),
    #[error("the coefficient of leading derivative `{0}` vanishes identically")]
    VanishingLeadingCoefficient(String),
    #[error("leading derivative `{0}` is used by more than one equation")]
    DuplicateLeading(String),
    #[error("substitution modulo the system did not terminate within {0} passes")]
    NonTerminating(usize),
    #[error("normal form and numeric check disagree on `{0}`")]
    ZeroCheckDisagreement(String),
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("unsupported generator: {0}; supply explicit coordinates with a `change` section")]
    UnsupportedGenerator(String),
    #[error("generator has no component along any independent variable")]
    NoIndependentComponent,
    #[error("degenerate coordinate change: {0}")]
    DegenerateChange(String),
    #[error("incomplete coordinate change: `{0}` survives the rewrite")]
    IncompleteChange(String),
    #[error("`{generator}` is not associated: bracket component {component} is {residual}")]
    NotAssociated {
        generator: String,
        component: String,
        residual: String,
    },
    #[error("not inheritable: {0}")]
    NotInheritable(String),
    #[error("not conserved: divergence reduces to {0}")]
    NotConserved(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0}")]
    Invalid(String),
}
