use serde::{Deserialize, Serialize};

/// Numerical thresholds shared across modules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative singular-value threshold for numerical rank.
    pub rank: f64,
    /// Real parts within this distance of zero count as zero.
    pub spectrum: f64,
    /// Eigenvalues with |Im| at most this are treated as real.
    pub imag: f64,
    /// Slack allowed in point-membership linear programs.
    pub containment: f64,
    /// Absolute tolerance when deduplicating vertices.
    pub dedup: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank: 1e-9,
            spectrum: 1e-9,
            imag: 1e-9,
            containment: 1e-7,
            dedup: 1e-9,
        }
    }
}

/// Combinatorial budgets for the enumeration-based routines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    /// Maximum generator count for sign-pattern enumeration.
    pub vertex_generators: usize,
    /// Maximum number of (n-1)-subsets examined by facet enumeration.
    pub facet_subsets: usize,
    /// Maximum generator count of a reach-tube set.
    pub tube_generators: usize,
    /// Ambient dimension up to which containment defaults to exact mode.
    pub exact_containment_dim: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            vertex_generators: 20,
            facet_subsets: 100_000,
            tube_generators: 20_000,
            exact_containment_dim: 5,
        }
    }
}

/// Tolerances and caps bundled together; most geometric routines take one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub tol: Tolerances,
    pub caps: Caps,
}
