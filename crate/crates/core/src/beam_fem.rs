//! Hermite-cubic discretization of the clamped–free beam.
//!
//! The discrete space is `V_h = {v ∈ C¹ piecewise cubic : v(0) = v′(0) = 0}`
//! with two unknowns per free node: the deflection and the slope. Global
//! index `2(j-1)` is the deflection at node `j`, `2(j-1)+1` its slope; node 0
//! is clamped and carries no unknowns. The bearing end `x = L` is the last
//! node, so the boundary functionals are unit vectors.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::scalar::Scalar;

/// Element quadrature: four Gauss points integrate products of the cubic
/// shape functions (degree 6) exactly.
const ELEMENT_GAUSS_POINTS: usize = 4;

/// Node positions `0 = x₀ < x₁ < … < x_n = L`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMesh<T> {
    nodes: Vec<T>,
}

impl<T: Scalar> BeamMesh<T> {
    pub fn uniform(length: T, n_elements: usize) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::config("mesh needs at least one element"));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::config(format!("beam length must be positive, got {length}")));
        }
        let h = length / T::of_usize(n_elements);
        let mut nodes: Vec<T> = (0..=n_elements).map(|i| T::of_usize(i) * h).collect();
        nodes[n_elements] = length;
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<T>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::config("mesh needs at least two nodes"));
        }
        if nodes[0] != T::zero() {
            return Err(Error::config("the clamped end must sit at x = 0"));
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::config(format!(
                "degenerate element {i}: x[{}] = {} is not greater than x[{i}] = {}",
                i + 1,
                nodes[i + 1],
                nodes[i]
            )));
        }
        Ok(Self { nodes })
    }

    pub fn length(&self) -> T {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn dof_count(&self) -> usize {
        2 * self.n_elements()
    }

    /// Global unknowns touched by element `e`, `None` for clamped ones.
    fn element_dofs(e: usize) -> [Option<usize>; 4] {
        if e == 0 {
            [None, None, Some(0), Some(1)]
        } else {
            [Some(2 * e - 2), Some(2 * e - 1), Some(2 * e), Some(2 * e + 1)]
        }
    }

    fn element_of(&self, x: T) -> usize {
        let n = self.n_elements();
        let i = self.nodes.partition_point(|&xi| xi <= x);
        i.saturating_sub(1).min(n - 1)
    }
}

/// Hermite cubic shape functions on an element of length `h` at `ξ ∈ [0, 1]`,
/// returned as (values, first x-derivatives, second x-derivatives).
fn shape<T: Scalar>(xi: T, h: T) -> ([T; 4], [T; 4], [T; 4]) {
    let c = T::of;
    let xi2 = xi * xi;
    let xi3 = xi2 * xi;
    let n = [
        T::one() - c(3.0) * xi2 + c(2.0) * xi3,
        h * (xi - c(2.0) * xi2 + xi3),
        c(3.0) * xi2 - c(2.0) * xi3,
        h * (xi3 - xi2),
    ];
    let d1 = [
        (c(6.0) * xi2 - c(6.0) * xi) / h,
        T::one() - c(4.0) * xi + c(3.0) * xi2,
        (c(6.0) * xi - c(6.0) * xi2) / h,
        c(3.0) * xi2 - c(2.0) * xi,
    ];
    let h2 = h * h;
    let d2 = [
        (c(12.0) * xi - c(6.0)) / h2,
        (c(6.0) * xi - c(4.0)) / h,
        (c(6.0) - c(12.0) * xi) / h2,
        (c(6.0) * xi - c(2.0)) / h,
    ];
    (n, d1, d2)
}

/// Mass, bending and boundary-trace operators on the discrete space.
#[derive(Debug, Clone)]
pub struct AssembledOperators<T: Scalar> {
    /// `L²` Gram matrix.
    pub mass: DMatrix<T>,
    /// Bending form `∫ u″ v″ dx`.
    pub stiffness: DMatrix<T>,
    /// `u ↦ u(L)`.
    pub t_val: DVector<T>,
    /// `u ↦ u′(L)`.
    pub t_der: DVector<T>,
    mesh: BeamMesh<T>,
}

pub fn assemble_operators<T: Scalar>(mesh: &BeamMesh<T>) -> Result<AssembledOperators<T>> {
    // Re-validate: the node vector may have been built from untrusted input.
    let mesh = BeamMesh::from_nodes(mesh.nodes.clone())?;
    let n = mesh.dof_count();
    let rule = gauss_legendre(ELEMENT_GAUSS_POINTS)?;
    let points: Vec<(T, T)> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| (T::of(0.5 * (x + 1.0)), T::of(0.5 * w)))
        .collect();

    let mut mass = DMatrix::zeros(n, n);
    let mut stiffness = DMatrix::zeros(n, n);
    for e in 0..mesh.n_elements() {
        let h = mesh.nodes[e + 1] - mesh.nodes[e];
        let mut me = [[T::zero(); 4]; 4];
        let mut ke = [[T::zero(); 4]; 4];
        for &(xi, w) in &points {
            let (nv, _, d2) = shape(xi, h);
            for a in 0..4 {
                for b in 0..4 {
                    me[a][b] += w * h * nv[a] * nv[b];
                    ke[a][b] += w * h * d2[a] * d2[b];
                }
            }
        }
        let dofs = BeamMesh::<T>::element_dofs(e);
        for a in 0..4 {
            let Some(ga) = dofs[a] else { continue };
            for b in 0..4 {
                let Some(gb) = dofs[b] else { continue };
                mass[(ga, gb)] += me[a][b];
                stiffness[(ga, gb)] += ke[a][b];
            }
        }
    }
    symmetrize(&mut mass);
    symmetrize(&mut stiffness);

    let mut t_val = DVector::zeros(n);
    let mut t_der = DVector::zeros(n);
    t_val[n - 2] = T::one();
    t_der[n - 1] = T::one();
    Ok(AssembledOperators { mass, stiffness, t_val, t_der, mesh })
}

fn symmetrize<T: Scalar>(m: &mut DMatrix<T>) {
    let half = T::of(0.5);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = half * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

impl<T: Scalar> AssembledOperators<T> {
    pub fn dof_count(&self) -> usize {
        self.t_val.len()
    }

    pub fn mesh(&self) -> &BeamMesh<T> {
        &self.mesh
    }

    pub fn length(&self) -> T {
        self.mesh.length()
    }

    /// `u(L)`.
    pub fn tip_value(&self, u: &DVector<T>) -> T {
        self.t_val.dot(u)
    }

    /// `‖u″‖²`.
    pub fn bending_energy(&self, u: &DVector<T>) -> T {
        u.dot(&(&self.stiffness * u))
    }

    /// `‖u‖²` in `L²(0, L)`.
    pub fn mass_energy(&self, u: &DVector<T>) -> T {
        u.dot(&(&self.mass * u))
    }

    /// Value and first two derivatives of the discrete field at `x`.
    pub fn evaluate(&self, u: &DVector<T>, x: T) -> (T, T, T) {
        let e = self.mesh.element_of(x);
        let (x0, x1) = (self.mesh.nodes[e], self.mesh.nodes[e + 1]);
        let h = x1 - x0;
        let (nv, d1, d2) = shape((x - x0) / h, h);
        let dofs = BeamMesh::<T>::element_dofs(e);
        let mut out = (T::zero(), T::zero(), T::zero());
        for a in 0..4 {
            if let Some(g) = dofs[a] {
                out.0 += nv[a] * u[g];
                out.1 += d1[a] * u[g];
                out.2 += d2[a] * u[g];
            }
        }
        out
    }

    /// Hermite interpolant of a field given as `x ↦ (w(x), w′(x))`.
    pub fn interpolate(&self, mut field: impl FnMut(T) -> (T, T)) -> DVector<T> {
        let mut u = DVector::zeros(self.dof_count());
        for (j, &x) in self.mesh.nodes.iter().enumerate().skip(1) {
            let (w, dw) = field(x);
            u[2 * j - 2] = w;
            u[2 * j - 1] = dw;
        }
        u
    }

    /// Consistent load vector `∫ q φ_i dx` (4-point Gauss per element).
    pub fn assemble_load(&self, mut q: impl FnMut(T) -> T) -> Result<DVector<T>> {
        let rule = gauss_legendre(ELEMENT_GAUSS_POINTS)?;
        let mut f = DVector::zeros(self.dof_count());
        for e in 0..self.mesh.n_elements() {
            let (x0, x1) = (self.mesh.nodes[e], self.mesh.nodes[e + 1]);
            let h = x1 - x0;
            let dofs = BeamMesh::<T>::element_dofs(e);
            for (&gx, &gw) in rule.nodes.iter().zip(&rule.weights) {
                let xi = T::of(0.5 * (gx + 1.0));
                let w = T::of(0.5 * gw) * h;
                let (nv, _, _) = shape(xi, h);
                let qx = q(x0 + xi * h);
                for a in 0..4 {
                    if let Some(g) = dofs[a] {
                        f[g] += w * qx * nv[a];
                    }
                }
            }
        }
        Ok(f)
    }

    /// `‖w″ - u_h″‖` in `L²(0, L)` against an exact curvature, by 8-point Gauss per element.
    pub fn curvature_error(&self, u: &DVector<T>, mut exact_curvature: impl FnMut(T) -> T) -> Result<T> {
        let rule = gauss_legendre(8)?;
        let mut acc = T::zero();
        for e in 0..self.mesh.n_elements() {
            let (x0, x1) = (self.mesh.nodes[e], self.mesh.nodes[e + 1]);
            let h = x1 - x0;
            for (&gx, &gw) in rule.nodes.iter().zip(&rule.weights) {
                let x = x0 + T::of(0.5 * (gx + 1.0)) * h;
                let (_, _, d2) = self.evaluate(u, x);
                let diff = d2 - exact_curvature(x);
                acc += T::of(0.5 * gw) * h * diff * diff;
            }
        }
        Ok(acc.sqrt())
    }

    /// Generalized eigenpairs of `(stiffness + extra, mass)`, ascending.
    pub fn modal_basis(&self, boundary_spring: T) -> Result<ModalBasis<T>> {
        let mut a = self.stiffness.clone();
        if boundary_spring != T::zero() {
            a += &self.t_val * self.t_val.transpose() * boundary_spring;
        }
        ModalBasis::new(&a, &self.mass)
    }
}

/// `M`-orthonormal eigenvectors of a symmetric pencil `(A, M)`.
#[derive(Debug, Clone)]
pub struct ModalBasis<T: Scalar> {
    /// Ascending generalized eigenvalues.
    pub eigenvalues: DVector<T>,
    /// Columns are the eigenvectors `φ_i` with `φ_iᵀ M φ_j = δ_ij`.
    pub vectors: DMatrix<T>,
    mass: DMatrix<T>,
}

impl<T: Scalar> ModalBasis<T> {
    pub fn new(a: &DMatrix<T>, mass: &DMatrix<T>) -> Result<Self> {
        let chol = cholesky(mass, "mass")?;
        let reduced = congruence(&chol, a);
        let eig = symmetric_eigen(reduced)?;
        let n = a.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let l_t = chol.l().transpose();
        let mut vectors = DMatrix::zeros(n, n);
        let mut eigenvalues = DVector::zeros(n);
        for (k, &i) in order.iter().enumerate() {
            let q = eig.eigenvectors.column(i).into_owned();
            let phi = l_t
                .solve_upper_triangular(&q)
                .ok_or_else(|| Error::numerical("singular mass factor"))?;
            vectors.set_column(k, &phi);
            eigenvalues[k] = eig.eigenvalues[i];
        }
        Ok(Self { eigenvalues, vectors, mass: mass.clone() })
    }

    /// Modal coordinates `c_i = φ_iᵀ M u`.
    pub fn coordinates(&self, u: &DVector<T>) -> DVector<T> {
        self.vectors.transpose() * (&self.mass * u)
    }
}

pub(crate) fn cholesky<T: Scalar>(m: &DMatrix<T>, what: &str) -> Result<Cholesky<T, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::numerical(format!("{what} matrix is not positive definite")))
}

/// `L⁻¹ A L⁻ᵀ` for the Cholesky factor `L` of a positive definite matrix.
fn congruence<T: Scalar>(chol: &Cholesky<T, Dyn>, a: &DMatrix<T>) -> DMatrix<T> {
    let l = chol.l();
    let x = l.solve_lower_triangular(a).expect("Cholesky factor has positive diagonal");
    let mut c = l
        .solve_lower_triangular(&x.transpose())
        .expect("Cholesky factor has positive diagonal");
    symmetrize(&mut c);
    c
}

fn symmetric_eigen<T: Scalar>(m: DMatrix<T>) -> Result<SymmetricEigen<T, Dyn>> {
    let n = m.nrows();
    SymmetricEigen::try_new(m, T::eps(), 1000 * n.max(1)).ok_or_else(|| {
        Error::numerical(format!("symmetric eigen-solve of order {n} did not converge"))
    })
}

/// Largest `μ` with `uᵀ A u ≤ μ · uᵀ K u` on the discrete space.
pub fn max_generalized_eigenvalue<T: Scalar>(a: &DMatrix<T>, k: &DMatrix<T>) -> Result<T> {
    let chol = cholesky(k, "stiffness")?;
    let eig = symmetric_eigen(congruence(&chol, a))?;
    Ok(eig.eigenvalues.iter().copied().fold(T::min_value().unwrap(), |m, v| if v > m { v } else { m }))
}

/// Solves `κ K u = P · t_val` (cantilever under a tip load).
/// Tip-loaded statics `κKu = P t_val`.
///
/// Solved in curvature coordinates: `u″` is linear on each element, and two
/// integrations from the clamp span the same Hermite space. There the
/// Galerkin system is block diagonal with well-conditioned 2×2 element Gram
/// blocks, while `K` itself has condition number of order `n⁴`.
pub fn solve_static<T: Scalar>(ops: &AssembledOperators<T>, kappa: T, tip_load: T) -> Result<DVector<T>> {
    if !(kappa > T::zero()) {
        return Err(Error::config(format!("static solve needs kappa > 0, got {kappa}")));
    }
    let rule = gauss_legendre(ELEMENT_GAUSS_POINTS)?;
    let nodes = ops.mesh.nodes();
    let length = ops.length();
    let mut u = DVector::zeros(ops.dof_count());
    let (mut w, mut slope) = (T::zero(), T::zero());
    for e in 0..ops.mesh.n_elements() {
        let (x0, h) = (nodes[e], nodes[e + 1] - nodes[e]);
        // u(L) = ∫ (L − x) u″ dx for clamped u.
        let (mut g, mut a) = ([[T::zero(); 2]; 2], [T::zero(); 2]);
        for (&xi, &wq) in rule.nodes.iter().zip(&rule.weights) {
            let th = T::of(0.5 * (xi + 1.0));
            let wt = T::of(0.5 * wq) * h;
            let phi = [T::one() - th, th];
            for i in 0..2 {
                a[i] += wt * phi[i] * tip_load * (length - x0 - th * h);
                for j in 0..2 {
                    g[i][j] += wt * kappa * phi[i] * phi[j];
                }
            }
        }
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let ca = (g[1][1] * a[0] - g[0][1] * a[1]) / det;
        let cb = (g[0][0] * a[1] - g[1][0] * a[0]) / det;
        w += h * slope + h * h * (ca / T::of(3.0) + cb / T::of(6.0));
        slope += T::of(0.5) * h * (ca + cb);
        u[2 * e] = w;
        u[2 * e + 1] = slope;
    }
    Ok(u)
}

/// Embedding constants of the discrete space.
///
/// `λ₀`: `‖u‖² ≤ λ₀‖u″‖²`, `λ₁`: `u(L)² ≤ λ₁‖u″‖²`. History slices live in the
/// same space, so `λ₂ = λ₀` and `λ₃ = λ₁`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EmbeddingConstants<T> {
    pub lambda0: T,
    pub lambda1: T,
    pub lambda2: T,
    pub lambda3: T,
}

pub fn estimate_embedding_constants<T: Scalar>(ops: &AssembledOperators<T>) -> Result<EmbeddingConstants<T>> {
    let lambda0 = max_generalized_eigenvalue(&ops.mass, &ops.stiffness)?;
    let trace = &ops.t_val * ops.t_val.transpose();
    let lambda1 = max_generalized_eigenvalue(&trace, &ops.stiffness)?;
    Ok(EmbeddingConstants { lambda0, lambda1, lambda2: lambda0, lambda3: lambda1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Closed-form Euler–Bernoulli element matrices (unit rigidity and density).
    fn closed_form_element(h: f64) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
        let k = [
            [12.0, 6.0 * h, -12.0, 6.0 * h],
            [6.0 * h, 4.0 * h * h, -6.0 * h, 2.0 * h * h],
            [-12.0, -6.0 * h, 12.0, -6.0 * h],
            [6.0 * h, 2.0 * h * h, -6.0 * h, 4.0 * h * h],
        ]
        .map(|r| r.map(|v| v / (h * h * h)));
        let m = [
            [156.0, 22.0 * h, 54.0, -13.0 * h],
            [22.0 * h, 4.0 * h * h, 13.0 * h, -3.0 * h * h],
            [54.0, 13.0 * h, 156.0, -22.0 * h],
            [-13.0 * h, -3.0 * h * h, -22.0 * h, 4.0 * h * h],
        ]
        .map(|r| r.map(|v| v * h / 420.0));
        (k, m)
    }

    #[test]
    fn single_element_matches_hand_integration() {
        let l: f64 = 1.7;
        let ops = assemble_operators(&BeamMesh::uniform(l, 1).unwrap()).unwrap();
        let expected = [[12.0 / l.powi(3), -6.0 / l.powi(2)], [-6.0 / l.powi(2), 4.0 / l]];
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(ops.stiffness[(i, j)], expected[i][j], max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn assembly_matches_closed_form_on_graded_mesh() {
        let nodes = vec![0.0, 0.1, 0.35, 0.5, 0.9, 1.0];
        let mesh = BeamMesh::from_nodes(nodes.clone()).unwrap();
        let ops = assemble_operators(&mesh).unwrap();
        let n = mesh.dof_count();
        let mut k = DMatrix::<f64>::zeros(n, n);
        let mut m = DMatrix::<f64>::zeros(n, n);
        for e in 0..mesh.n_elements() {
            let (ke, me) = closed_form_element(nodes[e + 1] - nodes[e]);
            let dofs = BeamMesh::<f64>::element_dofs(e);
            for a in 0..4 {
                for b in 0..4 {
                    if let (Some(i), Some(j)) = (dofs[a], dofs[b]) {
                        k[(i, j)] += ke[a][b];
                        m[(i, j)] += me[a][b];
                    }
                }
            }
        }
        assert!((&ops.stiffness - &k).amax() < 1e-10 * k.amax());
        assert!((&ops.mass - &m).amax() < 1e-13 * m.amax());
    }

    #[test]
    fn operators_are_symmetric_positive_definite() {
        let ops = assemble_operators(&BeamMesh::uniform(2.0, 12).unwrap()).unwrap();
        for mat in [&ops.mass, &ops.stiffness] {
            assert!((mat - mat.transpose()).amax() <= 1e-14 * mat.amax());
            let eig = SymmetricEigen::new(mat.clone());
            assert!(eig.eigenvalues.min() > 0.0);
        }
    }

    #[test]
    fn trace_vector_selects_tip_deflection() {
        let ops = assemble_operators(&BeamMesh::uniform(1.0, 5).unwrap()).unwrap();
        let u = ops.interpolate(|x| (x * x * (3.0 - x), x * (6.0 - 3.0 * x)));
        assert_relative_eq!(ops.tip_value(&u), 2.0, max_relative = 1e-15);
        assert_relative_eq!(ops.evaluate(&u, 1.0).0, 2.0, max_relative = 1e-15);
        assert_eq!(ops.t_val.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn stiffness_of_quadratic_is_exact() {
        // u = x², u″ ≡ 2, so (K u)_i = 2 ∫ φ_i″ dx = 2 φ_i′(L) for clamped φ_i.
        let ops = assemble_operators(&BeamMesh::from_nodes(vec![0.0, 0.3, 0.55, 1.0]).unwrap()).unwrap();
        let u = ops.interpolate(|x| (x * x, 2.0 * x));
        let ku = &ops.stiffness * &u;
        let expected = &ops.t_der * 2.0;
        assert!((ku - expected).amax() < 1e-12);
    }

    #[test]
    fn cantilever_tip_deflection() {
        let ops = assemble_operators(&BeamMesh::uniform(1.0, 4).unwrap()).unwrap();
        let u = solve_static(&ops, 1.0, 3.0).unwrap();
        assert_relative_eq!(ops.tip_value(&u), 1.0, max_relative = 1e-12);
        let u = solve_static(&ops, 0.5, 3.0).unwrap();
        assert_relative_eq!(ops.tip_value(&u), 2.0, max_relative = 1e-12);
        let u = solve_static(&ops, 0.5, 0.0).unwrap();
        assert_eq!(u.amax(), 0.0);
        assert!(solve_static(&ops, 0.0, 1.0).is_err());
    }

    #[test]
    fn static_solution_solves_the_assembled_system() {
        let ops = assemble_operators(&BeamMesh::uniform(2.0, 12).unwrap()).unwrap();
        let u = solve_static(&ops, 0.7, 1.3).unwrap();
        let direct = ops.stiffness.clone().cholesky().unwrap().solve(&(&ops.t_val * (1.3 / 0.7)));
        assert!((&u - &direct).amax() <= 1e-10 * u.amax());
        let r = &ops.stiffness * &u * 0.7 - &ops.t_val * 1.3;
        assert!(r.amax() <= 1e-12 * ops.stiffness.amax() * u.amax());
    }

    #[test]
    fn degenerate_mesh_rejected() {
        assert!(matches!(BeamMesh::from_nodes(vec![0.0, 0.5, 0.5, 1.0]), Err(Error::Config(_))));
        assert!(BeamMesh::from_nodes(vec![0.1, 1.0]).is_err());
        assert!(BeamMesh::<f64>::uniform(1.0, 0).is_err());
        assert!(BeamMesh::<f64>::uniform(-1.0, 3).is_err());
    }

    #[test]
    fn trace_constant_scales_with_cube_of_length() {
        let c1 = estimate_embedding_constants(&assemble_operators(&BeamMesh::uniform(1.0, 6).unwrap()).unwrap())
            .unwrap();
        let c2 = estimate_embedding_constants(&assemble_operators(&BeamMesh::uniform(2.0, 6).unwrap()).unwrap())
            .unwrap();
        assert_relative_eq!(c2.lambda1 / c1.lambda1, 8.0, max_relative = 1e-10);
        assert_eq!(c1.lambda2, c1.lambda0);
        assert_eq!(c1.lambda3, c1.lambda1);
    }

    #[test]
    fn single_precision_assembly() {
        let ops = assemble_operators(&BeamMesh::<f32>::uniform(1.0, 8).unwrap()).unwrap();
        let u = solve_static(&ops, 1.0, 3.0).unwrap();
        let tip = ops.tip_value(&u);
        assert!((tip - 1.0).abs() < 1e-3, "{tip}");
    }
}
