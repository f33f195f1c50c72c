/// Numerical tolerances shared by every check in the crate.
///
/// `identity` bounds max-abs deviations of algebraic identities,
/// `cluster` merges nearby eigenvalues, `psd_floor` is the most negative
/// eigenvalue still accepted as positive semidefinite and
/// `zero_probability` is the mass at or below which an event counts as
/// impossible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub identity: f64,
    pub cluster: f64,
    pub psd_floor: f64,
    pub zero_probability: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-9,
            cluster: 1e-8,
            psd_floor: 1e-9,
            zero_probability: 1e-12,
        }
    }
}

impl Tolerances {
    /// Same defaults with a different identity tolerance.
    #[must_use]
    pub fn with_identity(identity: f64) -> Self {
        Self {
            identity,
            ..Self::default()
        }
    }
}
