//! Block-diagonal market algebras, abelian projection partitions, refining
//! filtrations and numéraires.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, op_norm, ComplexMatrix, C64};

/// Residual tolerance for projection, orthogonality, completeness and
/// membership checks.
pub const PARTITION_TOL: f64 = 1e-9;
/// Residual tolerance for refinement between filtration times.
pub const REFINE_TOL: f64 = 1e-9;
/// Numéraires must have spectrum bounded below by this.
pub const POS_TOL: f64 = 1e-10;
/// Two filtration times closer than this are the same time.
pub const TIME_TOL: f64 = 1e-12;

/// Mutually orthogonal projections summing to the identity; spans an abelian algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectivePartition {
    projections: Vec<ComplexMatrix>,
    ranks: Vec<f64>,
    dim: usize,
}

impl ProjectivePartition {
    pub fn validate(projections: Vec<ComplexMatrix>) -> Result<Self> {
        validate_partition(projections)
    }

    /// The singleton {I}.
    pub fn trivial(dim: usize) -> Self {
        Self { projections: vec![ComplexMatrix::identity(dim)], ranks: vec![dim as f64], dim }
    }

    /// One diagonal projection per group of basis indices. Panics if the
    /// groups do not partition `0..dim`.
    pub fn from_index_groups(dim: usize, groups: &[Vec<usize>]) -> Self {
        let projections: Vec<ComplexMatrix> = groups
            .iter()
            .map(|g| {
                let mut d = vec![0.0; dim];
                for &i in g {
                    d[i] = 1.0;
                }
                ComplexMatrix::diag(&d)
            })
            .collect();
        validate_partition(projections).expect("index groups must partition the basis")
    }

    /// Rank-one projections onto the standard basis.
    pub fn finest_diagonal(dim: usize) -> Self {
        let groups: Vec<Vec<usize>> = (0..dim).map(|i| vec![i]).collect();
        Self::from_index_groups(dim, &groups)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    pub fn projections(&self) -> &[ComplexMatrix] {
        &self.projections
    }

    /// Tr(P_k) for each k.
    pub fn ranks(&self) -> &[f64] {
        &self.ranks
    }

    /// c_k = Tr(P_k X)/Tr(P_k)
    pub fn coefficients(&self, x: &ComplexMatrix) -> Vec<C64> {
        self.projections.iter().zip(&self.ranks).map(|(p, r)| p.trace_product(x) / r).collect()
    }

    /// Σ c_k P_k
    pub fn combine(&self, coeffs: &[C64]) -> ComplexMatrix {
        assert_eq!(coeffs.len(), self.len(), "one coefficient per projection");
        let mut out = ComplexMatrix::zeros(self.dim);
        for (p, &c) in self.projections.iter().zip(coeffs) {
            if c != C64::new(0.0, 0.0) {
                out += &p.scale_c(c);
            }
        }
        out
    }

    pub fn combine_real(&self, coeffs: &[f64]) -> ComplexMatrix {
        let c: Vec<C64> = coeffs.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.combine(&c)
    }

    /// ‖X − Σ c_k P_k‖_op with c_k = Tr(P_k X)/Tr(P_k).
    pub fn membership_residual(&self, x: &ComplexMatrix) -> f64 {
        op_norm(&(x - &self.combine(&self.coefficients(x))))
    }

    /// Random self-adjoint element Σ c_k P_k, c_k standard normal.
    pub fn random_hermitian<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexMatrix {
        let c: Vec<f64> = (0..self.len()).map(|_| rng.sample(StandardNormal)).collect();
        self.combine_real(&c)
    }

    /// Random element Σ c_k P_k with complex normal c_k.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexMatrix {
        let c: Vec<C64> = (0..self.len())
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        self.combine(&c)
    }
}

/// Certifies that the matrices form an orthogonal resolution of the identity.
pub fn validate_partition(projections: Vec<ComplexMatrix>) -> Result<ProjectivePartition> {
    let first = projections
        .first()
        .ok_or_else(|| Error::InvalidModel("partition must contain at least one projection".into()))?;
    let dim = first.dim();
    for p in &projections {
        p.ensure_dim(dim)?;
    }
    let mut ranks = Vec::with_capacity(projections.len());
    for (k, p) in projections.iter().enumerate() {
        let residual = op_norm(&(&p.matmul(p) - p)).max(p.hermitian_residual());
        if residual > PARTITION_TOL {
            return Err(Error::NotProjection { index: k, residual });
        }
        let rank = p.trace().re;
        if rank < 0.5 {
            // the zero projection carries no information and has no conditional weight
            return Err(Error::NotProjection { index: k, residual: 1.0 });
        }
        ranks.push(rank.round());
    }
    for i in 0..projections.len() {
        for j in (i + 1)..projections.len() {
            let residual = op_norm(&projections[i].matmul(&projections[j]));
            if residual > PARTITION_TOL {
                return Err(Error::NotOrthogonal { i, j, residual });
            }
        }
    }
    let mut sum = ComplexMatrix::zeros(dim);
    for p in &projections {
        sum += p;
    }
    let residual = op_norm(&(&sum - &ComplexMatrix::identity(dim)));
    if residual > PARTITION_TOL {
        return Err(Error::NotComplete { residual });
    }
    Ok(ProjectivePartition { projections, ranks, dim })
}

/// Membership X ∈ span{P_k}: returns (member, residual).
pub fn element_in_subalgebra(x: &ComplexMatrix, partition: &ProjectivePartition) -> (bool, f64) {
    let r = partition.membership_residual(x);
    (r <= PARTITION_TOL * (1.0 + x.max_abs()), r)
}

/// Residual of expressing every projection of `coarse` as a 0/1 combination of `fine`.
pub fn refinement_residual(coarse: &ProjectivePartition, fine: &ProjectivePartition) -> f64 {
    coarse
        .projections()
        .iter()
        .map(|q| {
            let c: Vec<f64> = fine.coefficients(q).iter().map(|z| z.re.round().clamp(0.0, 1.0)).collect();
            op_norm(&(q - &fine.combine_real(&c)))
        })
        .fold(0.0, f64::max)
}

/// Times, one partition per time (refining), and one numéraire per time.
#[derive(Clone, Debug)]
pub struct Filtration {
    times: Vec<f64>,
    partitions: Vec<ProjectivePartition>,
    numeraire: Vec<ComplexMatrix>,
}

impl Filtration {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn partitions(&self) -> &[ProjectivePartition] {
        &self.partitions
    }

    pub fn partition(&self, idx: usize) -> &ProjectivePartition {
        &self.partitions[idx]
    }

    pub fn numeraire(&self, idx: usize) -> &ComplexMatrix {
        &self.numeraire[idx]
    }

    pub fn numeraires(&self) -> &[ComplexMatrix] {
        &self.numeraire
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.partitions[0].dim()
    }

    /// Index of the last time (the horizon T).
    pub fn horizon(&self) -> usize {
        self.times.len() - 1
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= TIME_TOL).ok_or(Error::UnknownTime(t))
    }
}

pub fn validate_filtration(
    times: Vec<f64>,
    partitions: Vec<ProjectivePartition>,
    numeraire: Vec<ComplexMatrix>,
) -> Result<Filtration> {
    if times.is_empty() {
        return Err(Error::InvalidModel("filtration needs at least one time".into()));
    }
    if partitions.len() != times.len() {
        return Err(Error::DimMismatch { expected: times.len(), found: partitions.len() });
    }
    if numeraire.len() != times.len() {
        return Err(Error::DimMismatch { expected: times.len(), found: numeraire.len() });
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidModel("times must be finite and strictly increasing".into()));
    }
    let dim = partitions[0].dim();
    for p in &partitions {
        if p.dim() != dim {
            return Err(Error::DimMismatch { expected: dim, found: p.dim() });
        }
    }
    for s in 0..partitions.len() {
        for t in (s + 1)..partitions.len() {
            let residual = refinement_residual(&partitions[s], &partitions[t]);
            if residual > REFINE_TOL {
                return Err(Error::NotRefining { s, t, residual });
            }
        }
    }
    for (t, b) in numeraire.iter().enumerate() {
        b.ensure_dim(dim)?;
        b.ensure_hermitian()?;
        let min_eig = min_eigenvalue(b)?;
        if min_eig < POS_TOL {
            return Err(Error::NumeraireNotPositive { t, min_eig });
        }
        let (member, residual) = element_in_subalgebra(b, &partitions[t]);
        if !member {
            return Err(Error::NumeraireOutsideAlgebra { t, residual });
        }
    }
    Ok(Filtration { times, partitions, numeraire })
}

/// ⊕_k M_{n_k} with a filtration of abelian information algebras inside it.
#[derive(Clone, Debug)]
pub struct AlgebraModel {
    block_dims: Vec<usize>,
    filtration: Filtration,
}

impl AlgebraModel {
    pub fn new(block_dims: Vec<usize>, filtration: Filtration) -> Result<Self> {
        if block_dims.is_empty() || block_dims.contains(&0) {
            return Err(Error::InvalidModel("block dimensions must be positive".into()));
        }
        let dim: usize = block_dims.iter().sum();
        if dim != filtration.dim() {
            return Err(Error::DimMismatch { expected: dim, found: filtration.dim() });
        }
        for m in filtration.partitions().iter().flat_map(|p| p.projections()).chain(filtration.numeraires()) {
            let residual = m.off_block_mass(&block_dims);
            if residual > PARTITION_TOL {
                return Err(Error::NotBlockDiagonal { residual });
            }
        }
        Ok(Self { block_dims, filtration })
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn dim(&self) -> usize {
        self.block_dims.iter().sum()
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    pub fn times(&self) -> &[f64] {
        self.filtration.times()
    }

    /// Same partitions, new numéraire (re-validated).
    pub fn with_numeraire(&self, numeraire: Vec<ComplexMatrix>) -> Result<Self> {
        let f = validate_filtration(
            self.filtration.times.clone(),
            self.filtration.partitions.clone(),
            numeraire,
        )?;
        Self::new(self.block_dims.clone(), f)
    }

    /// Projection of an arbitrary matrix onto the block-diagonal algebra.
    pub fn block_compress(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut block_of = Vec::new();
        for (b, &d) in self.block_dims.iter().enumerate() {
            block_of.extend(std::iter::repeat_n(b, d));
        }
        ComplexMatrix::from_fn(x.dim(), |i, j| if block_of[i] == block_of[j] { x[(i, j)] } else { C64::new(0.0, 0.0) })
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            block_dims: self.block_dims.clone(),
            times: self.filtration.times.clone(),
            partitions: self.filtration.partitions.iter().map(|p| p.projections.clone()).collect(),
            numeraire: self.filtration.numeraire.clone(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ModelJson = parse_json(s)?;
        raw.into_model()
    }
}

/// Wire form of an [`AlgebraModel`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    pub block_dims: Vec<usize>,
    pub times: Vec<f64>,
    pub partitions: Vec<Vec<ComplexMatrix>>,
    pub numeraire: Vec<ComplexMatrix>,
}

impl ModelJson {
    /// Validates, reporting failures against the offending JSON path.
    pub fn into_model(self) -> Result<AlgebraModel> {
        let at = |path: String, e: Error| Error::Parse { path, message: format!("{}: {e}", e.code()) };
        let mut partitions = Vec::with_capacity(self.partitions.len());
        for (t, p) in self.partitions.into_iter().enumerate() {
            partitions.push(validate_partition(p).map_err(|e| {
                let path = match &e {
                    Error::NotProjection { index, .. } => format!("partitions[{t}][{index}]"),
                    _ => format!("partitions[{t}]"),
                };
                at(path, e)
            })?);
        }
        let filtration = validate_filtration(self.times, partitions, self.numeraire).map_err(|e| {
            let path = match &e {
                Error::NotRefining { t, .. } => format!("partitions[{t}]"),
                Error::NumeraireNotPositive { t, .. } | Error::NumeraireOutsideAlgebra { t, .. } => {
                    format!("numeraire[{t}]")
                }
                Error::InvalidModel(_) => "times".to_string(),
                _ => "$".to_string(),
            };
            at(path, e)
        })?;
        AlgebraModel::new(self.block_dims, filtration).map_err(|e| at("block_dims".into(), e))
    }
}

/// Strict JSON parsing with the failing path in the error.
pub fn parse_json<T: serde::de::DeserializeOwned>(s: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(s);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Classical–quantum product algebra L∞(atoms) ⊗ M_n with a classical
/// filtration. Basis index of (atom i, quantum a) is i·n + a.
///
/// `groupings[t]` lists the atom groups known at time t; times are 0, 1, 2, ….
pub fn build_cq_model(m: usize, n: usize, groupings: &[Vec<Vec<usize>>]) -> Result<AlgebraModel> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidGrouping("atom count and quantum dimension must be positive".into()));
    }
    if groupings.is_empty() {
        return Err(Error::InvalidGrouping("at least one time is required".into()));
    }
    let dim = m * n;
    let mut partitions = Vec::with_capacity(groupings.len());
    let mut labels: Vec<Vec<usize>> = Vec::new();
    for (t, groups) in groupings.iter().enumerate() {
        let mut label = vec![usize::MAX; m];
        for (g, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidGrouping(format!("time {t}: group {g} is empty")));
            }
            for &i in group {
                if i >= m {
                    return Err(Error::InvalidGrouping(format!("time {t}: atom {i} out of range")));
                }
                if label[i] != usize::MAX {
                    return Err(Error::InvalidGrouping(format!("time {t}: atom {i} appears twice")));
                }
                label[i] = g;
            }
        }
        if let Some(i) = label.iter().position(|&l| l == usize::MAX) {
            return Err(Error::InvalidGrouping(format!("time {t}: atom {i} is not covered")));
        }
        if let Some(prev) = labels.last() {
            // refinement: atoms sharing a group now shared one before
            for i in 0..m {
                for j in 0..m {
                    if label[i] == label[j] && prev[i] != prev[j] {
                        return Err(Error::InvalidGrouping(format!(
                            "time {t}: grouping does not refine time {}",
                            t - 1
                        )));
                    }
                }
            }
        }
        let index_groups: Vec<Vec<usize>> = groups
            .iter()
            .map(|g| g.iter().flat_map(|&i| (0..n).map(move |a| i * n + a)).collect())
            .collect();
        partitions.push(ProjectivePartition::from_index_groups(dim, &index_groups));
        labels.push(label);
    }
    let times: Vec<f64> = (0..groupings.len()).map(|t| t as f64).collect();
    let numeraire = vec![ComplexMatrix::identity(dim); groupings.len()];
    let filtration = validate_filtration(times, partitions, numeraire)?;
    AlgebraModel::new(vec![n; m], filtration)
}

/// diag(f) ⊗ X in the cq basis.
pub fn cq_embed(f: &[f64], x: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::diag(f).kron(x)
}
