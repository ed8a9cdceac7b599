//! Uniform staggered grid on `(0, L)` with homogeneous Dirichlet closure.
//!
//! Scalars (`p`, `p_t`, `theta`) live at the `N` interior nodes `x_j = j dx`,
//! fluxes live at the `N + 1` faces `x_{j+1/2} = (j + 1/2) dx`, with
//! `dx = L / (N + 1)`. The discrete gradient maps nodes to faces and the
//! discrete divergence maps faces back to nodes; with the quadrature weights
//! used here the two are exact negative adjoints of each other.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Uniform 1D grid. Cheap to copy; every field carries one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    length: f64,
    n: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("grid needs N >= 2 interior nodes, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid length must be positive, got {length}")));
        }
        Ok(Self {
            length,
            n,
            dx: length / (n + 1) as f64,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of interior nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Coordinate of node `j` (0-based, i.e. `x = (j + 1) dx`).
    pub fn node_x(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.dx
    }

    /// Coordinate of face `i` (0-based, `x = (i + 1/2) dx`).
    pub fn face_x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn node_field(&self, mut f: impl FnMut(f64) -> f64) -> NodeField {
        NodeField {
            grid: *self,
            values: (0..self.n).map(|j| f(self.node_x(j))).collect(),
        }
    }

    pub fn face_field(&self, mut f: impl FnMut(f64) -> f64) -> FaceField {
        FaceField {
            grid: *self,
            values: (0..=self.n).map(|i| f(self.face_x(i))).collect(),
        }
    }

    /// `sin(k pi x / L)` sampled at the nodes; an exact eigenvector of the
    /// discrete Dirichlet Laplacian.
    pub fn sine_mode(&self, k: usize) -> NodeField {
        let w = k as f64 * std::f64::consts::PI / self.length;
        self.node_field(|x| (w * x).sin())
    }

    /// `cos(k pi x / L)` sampled at the faces; the flux partner of [`Self::sine_mode`].
    pub fn cosine_mode(&self, k: usize) -> FaceField {
        let w = k as f64 * std::f64::consts::PI / self.length;
        self.face_field(|x| (w * x).cos())
    }

    /// Eigenvalue `(4/dx^2) sin^2(k pi dx / (2L))` of `-laplacian_dirichlet`
    /// for the `k`-th sine mode.
    pub fn laplacian_eigenvalue(&self, k: usize) -> f64 {
        let s = (k as f64 * std::f64::consts::PI * self.dx / (2.0 * self.length)).sin();
        4.0 * s * s / (self.dx * self.dx)
    }

    /// Modal gradient factor `sqrt(lambda_h(k))`: `grad(sine_mode) = factor * cosine_mode`.
    pub fn mode_gradient_factor(&self, k: usize) -> f64 {
        2.0 * (k as f64 * std::f64::consts::PI * self.dx / (2.0 * self.length)).sin() / self.dx
    }
}

/// Common access for node and face fields.
pub trait Field {
    fn grid(&self) -> &Grid1D;
    fn values(&self) -> &[f64];
}

/// Scalar field on the interior nodes; boundary values are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeField {
    grid: Grid1D,
    values: Vec<f64>,
}

/// Field on the `N + 1` cell faces.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    grid: Grid1D,
    values: Vec<f64>,
}

macro_rules! field_impl {
    ($ty:ident, $len:expr) => {
        impl $ty {
            pub fn zeros(grid: Grid1D) -> Self {
                Self::constant(grid, 0.0)
            }

            pub fn constant(grid: Grid1D, c: f64) -> Self {
                Self {
                    grid,
                    values: vec![c; $len(&grid)],
                }
            }

            pub fn from_vec(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
                let expected = $len(&grid);
                if values.len() != expected {
                    return Err(Error::InvalidArgument(format!(
                        "{} needs {expected} values, got {}",
                        stringify!($ty),
                        values.len()
                    )));
                }
                Ok(Self { grid, values })
            }

            pub fn values_mut(&mut self) -> &mut [f64] {
                &mut self.values
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.values
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
                Self {
                    grid: self.grid,
                    values: self.values.iter().map(|&v| f(v)).collect(),
                }
            }

            /// Pointwise combination; panics if the grids differ.
            pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
                assert_eq!(self.grid, other.grid, "fields live on different grids");
                Self {
                    grid: self.grid,
                    values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
                }
            }

            pub fn scaled(&self, c: f64) -> Self {
                self.map(|v| c * v)
            }

            pub fn is_finite(&self) -> bool {
                self.values.iter().all(|v| v.is_finite())
            }
        }

        impl Field for $ty {
            fn grid(&self) -> &Grid1D {
                &self.grid
            }

            fn values(&self) -> &[f64] {
                &self.values
            }
        }

        impl Add for &$ty {
            type Output = $ty;
            fn add(self, rhs: &$ty) -> $ty {
                self.zip_map(rhs, |a, b| a + b)
            }
        }

        impl Sub for &$ty {
            type Output = $ty;
            fn sub(self, rhs: &$ty) -> $ty {
                self.zip_map(rhs, |a, b| a - b)
            }
        }

        impl Mul<&$ty> for f64 {
            type Output = $ty;
            fn mul(self, rhs: &$ty) -> $ty {
                rhs.scaled(self)
            }
        }
    };
}

field_impl!(NodeField, |g: &Grid1D| g.n);
field_impl!(FaceField, |g: &Grid1D| g.n + 1);

impl NodeField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
}

impl FaceField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
}

/// `(u_{j+1} - u_j) / dx` at every face, with `u_0 = u_{N+1} = 0`.
pub fn gradient_to_faces(u: &NodeField) -> FaceField {
    gradient_with_boundary(u, 0.0, 0.0)
}

/// Face gradient of a node field whose boundary values are `left` and `right`
/// instead of zero (used for coefficient fields such as `r = h(theta)`).
pub fn gradient_with_boundary(u: &NodeField, left: f64, right: f64) -> FaceField {
    let grid = u.grid;
    let inv_dx = 1.0 / grid.dx;
    let v = &u.values;
    let n = grid.n;
    let mut out = Vec::with_capacity(n + 1);
    out.push((v[0] - left) * inv_dx);
    out.extend(v.windows(2).map(|w| (w[1] - w[0]) * inv_dx));
    out.push((right - v[n - 1]) * inv_dx);
    FaceField { grid, values: out }
}

/// `(w_{j+1/2} - w_{j-1/2}) / dx` at every interior node.
pub fn divergence_from_faces(w: &FaceField) -> NodeField {
    let grid = w.grid;
    let inv_dx = 1.0 / grid.dx;
    NodeField {
        grid,
        values: w.values.windows(2).map(|p| (p[1] - p[0]) * inv_dx).collect(),
    }
}

/// Three-point Dirichlet Laplacian, computed as divergence of gradient.
pub fn laplacian_dirichlet(u: &NodeField) -> NodeField {
    divergence_from_faces(&gradient_to_faces(u))
}

/// Face average of a node field with the given boundary values.
pub fn average_to_faces(u: &NodeField, left: f64, right: f64) -> FaceField {
    let grid = u.grid;
    let v = &u.values;
    let n = grid.n;
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.5 * (left + v[0]));
    out.extend(v.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(0.5 * (v[n - 1] + right));
    FaceField { grid, values: out }
}

/// Discrete inner product `dx * sum u_j v_j`. Node and face fields both use
/// the uniform weight `dx`; the faces tile `(0, L)` with cells of width `dx`.
pub fn l2_inner<F: Field>(u: &F, v: &F) -> Result<f64> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(u.grid().dx * u.values().iter().zip(v.values()).map(|(a, b)| a * b).sum::<f64>())
}

pub fn l2_norm<F: Field>(u: &F) -> f64 {
    l2_norm_sq(u).sqrt()
}

pub fn l2_norm_sq<F: Field>(u: &F) -> f64 {
    u.grid().dx * u.values().iter().map(|a| a * a).sum::<f64>()
}

/// Weighted squared norm `dx * sum w_j u_j^2`.
pub fn weighted_norm_sq<F: Field>(weight: &F, u: &F) -> Result<f64> {
    if u.grid() != weight.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(u.grid().dx * u.values().iter().zip(weight.values()).map(|(a, w)| w * a * a).sum::<f64>())
}

/// Discrete `L^3` norm `(dx * sum |u|^3)^(1/3)`.
pub fn l3_norm<F: Field>(u: &F) -> f64 {
    (u.grid().dx * u.values().iter().map(|a| a.abs().powi(3)).sum::<f64>()).cbrt()
}

pub fn linf_norm<F: Field>(u: &F) -> f64 {
    u.values().iter().fold(0.0, |m, a| m.max(a.abs()))
}

pub fn h1_seminorm(u: &NodeField) -> f64 {
    l2_norm(&gradient_to_faces(u))
}

/// Solves the tridiagonal system with sub-diagonal `lower` (row `i + 1`,
/// column `i`), main diagonal `diag`, and super-diagonal `upper` by the
/// Thomas algorithm without pivoting.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 || rhs.len() != n || lower.len() + 1 != n || upper.len() + 1 != n {
        return Err(Error::BandLength);
    }
    let row_scale = |i: usize| {
        let mut s = diag[i].abs();
        if i > 0 {
            s = s.max(lower[i - 1].abs());
        }
        if i + 1 < n {
            s = s.max(upper[i].abs());
        }
        s
    };
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if !(pivot.abs() >= 1e-14 * row_scale(0)) || pivot == 0.0 {
        return Err(Error::SingularSystem { row: 0, pivot });
    }
    if n > 1 {
        c[0] = upper[0] / pivot;
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i - 1] * c[i - 1];
        if !(pivot.abs() >= 1e-14 * row_scale(i)) || pivot == 0.0 {
            return Err(Error::SingularSystem { row: i, pivot });
        }
        if i + 1 < n {
            c[i] = upper[i] / pivot;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// [`solve_tridiagonal`] with a node-field right-hand side.
pub fn solve_tridiagonal_field(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &NodeField) -> Result<NodeField> {
    let x = solve_tridiagonal(lower, diag, upper, &rhs.values)?;
    NodeField::from_vec(rhs.grid, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid1D {
        Grid1D::new(1.0, n).unwrap()
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid1D::new(1.0, 1).is_err());
        assert!(Grid1D::new(0.0, 8).is_err());
    }

    #[test]
    fn gradient_examples() {
        let g = grid(3);
        assert!(gradient_to_faces(&NodeField::zeros(g)).values().iter().all(|&v| v == 0.0));
        let u = g.node_field(|x| x);
        let grad = gradient_to_faces(&u);
        assert_eq!(grad.len(), 4);
        for &v in &grad.values()[..3] {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!((grad.values()[3] + 3.0).abs() < 1e-14);
    }

    #[test]
    fn gradient_truncation_bound() {
        let g = grid(127);
        let grad = gradient_to_faces(&g.node_field(|x| (PI * x).sin()));
        let bound = PI.powi(3) * g.dx() * g.dx() / 24.0 * 1.1;
        for i in 0..=g.n() {
            let exact = PI * (PI * g.face_x(i)).cos();
            assert!((grad.values()[i] - exact).abs() <= bound);
        }
    }

    #[test]
    fn divergence_examples() {
        let g = grid(9);
        assert!(divergence_from_faces(&FaceField::constant(g, 2.5)).values().iter().all(|v| v.abs() < 1e-12));
        let div = divergence_from_faces(&g.face_field(|x| x));
        assert!(div.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn summation_by_parts_random() {
        let g = grid(64);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let w = g.face_field(|_| rng.gen_range(-1.0..1.0));
            let v = g.node_field(|_| rng.gen_range(-1.0..1.0));
            let lhs = l2_inner(&divergence_from_faces(&w), &v).unwrap() + l2_inner(&w, &gradient_to_faces(&v)).unwrap();
            assert!(lhs.abs() <= 1e-12 * l2_norm(&w) * l2_norm(&v));
        }
    }

    #[test]
    fn laplacian_of_quadratic_is_exact_on_dyadic_grid() {
        // dx = 1/64 makes every intermediate exactly representable.
        let g = grid(63);
        let lap = laplacian_dirichlet(&g.node_field(|x| x * (1.0 - x)));
        assert!(lap.values().iter().all(|&v| v == -2.0));
        let g = grid(64);
        let lap = laplacian_dirichlet(&g.node_field(|x| x * (1.0 - x)));
        assert!(lap.values().iter().all(|&v| (v + 2.0).abs() < 1e-9));
    }

    #[test]
    fn laplacian_sine_accuracy_and_eigenpairs() {
        let g = grid(127);
        let u = g.sine_mode(1);
        let lap = laplacian_dirichlet(&u);
        for (j, &v) in lap.values().iter().enumerate() {
            let exact = -PI * PI * u.values()[j];
            assert!((v - exact).abs() <= 1e-3 * exact.abs() + 1e-15);
        }
        for k in [1, 3, 17] {
            let u = g.sine_mode(k);
            let lam = g.laplacian_eigenvalue(k);
            let lap = laplacian_dirichlet(&u);
            for (a, b) in lap.values().iter().zip(u.values()) {
                assert!((a + lam * b).abs() < 1e-10 * lam);
            }
        }
    }

    #[test]
    fn laplacian_is_div_grad_and_zero_maps_to_zero() {
        let g = grid(10);
        let u = g.node_field(|x| (3.0 * x).exp());
        assert_eq!(laplacian_dirichlet(&u), divergence_from_faces(&gradient_to_faces(&u)));
        assert!(laplacian_dirichlet(&NodeField::zeros(g)).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn norms() {
        for n in [2, 5, 64, 255] {
            let g = grid(n);
            let ones = NodeField::constant(g, 1.0);
            assert!((l2_norm_sq(&ones) - n as f64 / (n + 1) as f64).abs() < 1e-14);
            assert!((l2_norm_sq(&g.sine_mode(1)) - 0.5).abs() < 1e-14);
            assert!((l2_norm_sq(&g.cosine_mode(1)) - 0.5).abs() < 1e-14);
        }
        let g = grid(7);
        let u = g.node_field(|x| x - 0.3);
        assert!((l2_inner(&u, &u).unwrap() - l2_norm(&u).powi(2)).abs() < 1e-15);
        assert!((linf_norm(&u) - (g.node_x(6) - 0.3)).abs() < 1e-15);
        assert!((h1_seminorm(&g.sine_mode(1)).powi(2) - g.laplacian_eigenvalue(1) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = NodeField::zeros(grid(4));
        let b = NodeField::zeros(grid(5));
        assert_eq!(l2_inner(&a, &b), Err(Error::GridMismatch));
    }

    #[test]
    fn tridiagonal_identity_and_singular() {
        let rhs = [1.0, -2.0, 3.5];
        assert_eq!(solve_tridiagonal(&[0.0; 2], &[1.0; 3], &[0.0; 2], &rhs).unwrap(), rhs.to_vec());
        let err = solve_tridiagonal(&[0.0; 2], &[1.0, 0.0, 1.0], &[0.0; 2], &rhs).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { row: 1, .. }));
        assert_eq!(solve_tridiagonal(&[0.0; 1], &[1.0; 3], &[0.0; 2], &rhs), Err(Error::BandLength));
    }

    #[test]
    fn tridiagonal_recovers_quadratic() {
        let g = grid(50);
        let u = g.node_field(|x| x * (1.0 - x));
        // -dx^2 * Laplacian: tridiag(-1, 2, -1)
        let n = g.n();
        let rhs = laplacian_dirichlet(&u).scaled(-g.dx() * g.dx());
        let x = solve_tridiagonal_field(&vec![-1.0; n - 1], &vec![2.0; n], &vec![-1.0; n - 1], &rhs).unwrap();
        assert!((&x - &u).values().iter().all(|e| e.abs() < 1e-10));
    }

    proptest! {
        #[test]
        fn tridiagonal_residual_small(
            diag in prop::collection::vec(3.0f64..5.0, 12),
            lower in prop::collection::vec(-1.0f64..1.0, 11),
            upper in prop::collection::vec(-1.0f64..1.0, 11),
            rhs in prop::collection::vec(-10.0f64..10.0, 12),
        ) {
            let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
            let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..12 {
                let mut ax = diag[i] * x[i];
                if i > 0 { ax += lower[i - 1] * x[i - 1]; }
                if i < 11 { ax += upper[i] * x[i + 1]; }
                prop_assert!((ax - rhs[i]).abs() <= 1e-10 * scale.max(1e-300));
            }
        }

        #[test]
        fn operators_are_linear(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            u in prop::collection::vec(-1.0f64..1.0, 8),
            v in prop::collection::vec(-1.0f64..1.0, 8),
        ) {
            let g = grid(8);
            let u = NodeField::from_vec(g, u).unwrap();
            let v = NodeField::from_vec(g, v).unwrap();
            let combo = &u.scaled(a) + &v.scaled(b);
            let lhs = laplacian_dirichlet(&combo);
            let rhs = &laplacian_dirichlet(&u).scaled(a) + &laplacian_dirichlet(&v).scaled(b);
            let scale = 1.0 / (g.dx() * g.dx());
            for (x, y) in lhs.values().iter().zip(rhs.values()) {
                prop_assert!((x - y).abs() <= 1e-13 * scale);
            }
        }
    }
}
