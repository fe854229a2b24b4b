/// Every numerical threshold used by the library, in one place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// ‖U†U − I‖_max accepted for a unitary.
    pub unitary: f64,
    /// ‖A + A†‖_max accepted for a skew-Hermitian matrix.
    pub skew: f64,
    /// Eigenphases closer than this are treated as one degenerate cluster.
    pub eig_cluster: f64,
    /// Phase tolerance when matching λ with λ* (also the "is ±1" test).
    pub pairing: f64,
    /// Distance to −π below which the principal-branch tie-break applies.
    pub branch: f64,
    /// Reconstruction tolerance for decompositions.
    pub reconstruct: f64,
    /// Orthogonality threshold of the eigenvector filter.
    pub filter_eps: f64,
    /// ‖p + σp‖ below which a vector is singular.
    pub singular: f64,
    /// Singular-value threshold for the operator-Schmidt product test.
    pub schmidt: f64,
    /// Blockwise identity test for qubit reduction.
    pub reduce: f64,
    /// θ(K) = K precondition of the K-layer factorization.
    pub k_layer: f64,
    /// Gates closer than this to the identity are dropped.
    pub identity: f64,
    /// Sparse, phase-fixed bases inside degenerate eigenspaces (off: the
    /// solver's eigenvectors as returned).
    pub sparse_bases: bool,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        unitary: 1e-10,
        skew: 1e-10,
        eig_cluster: 1e-8,
        pairing: 1e-7,
        branch: 1e-12,
        reconstruct: 1e-8,
        filter_eps: 1e-8,
        singular: 1e-8,
        schmidt: 1e-7,
        reduce: 1e-8,
        k_layer: 1e-7,
        identity: 1e-10,
        sparse_bases: true,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
