//! Grids, quadrature, finite-difference stencils and the small dense/banded
//! linear algebra used by every solver.
//!
//! Two grid families cover the channel geometry:
//!
//! * [`UniformGrid`]: endpoint grid on an interval, used for the front
//!   coordinate (the traveling-wave variable and the streamwise axis).
//! * [`CrossGrid`]: midpoint (cell-centered) tensor grid on the square
//!   cross-section `[0, L]^dim`. Midpoint placement makes the discrete
//!   cosine modes exactly orthogonal under the plain nodal average, so
//!   spectral cell solves and quadrature share one consistent inner product.

use crate::error::Error;
use crate::Result;

/// Endpoint-inclusive uniform grid on `[a, b]` with `n >= 2` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    a: f64,
    b: f64,
    n: usize,
}

impl UniformGrid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::Parameter(format!(
                "grid interval [{a}, {b}] must be finite and increasing"
            )));
        }
        if n < 2 {
            return Err(Error::Parameter(format!("grid needs >= 2 nodes, got {n}")));
        }
        Ok(Self { a, b, n })
    }

    /// Symmetric grid on `[-half_width, half_width]` with an odd node count,
    /// so that the center node sits exactly at zero.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        let n = if n % 2 == 0 { n + 1 } else { n };
        Self::new(-half_width, half_width, n)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lo(&self) -> f64 {
        self.a
    }

    pub fn hi(&self) -> f64 {
        self.b
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.a + i as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Index of the node closest to zero (exact center for symmetric grids).
    pub fn center_index(&self) -> usize {
        let t = -self.a / self.h();
        t.round().clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Trapezoid quadrature of nodal values.
    pub fn trapezoid(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.n);
        let h = self.h();
        let interior: f64 = v[1..self.n - 1].iter().sum();
        h * (0.5 * (v[0] + v[self.n - 1]) + interior)
    }

    /// Composite Simpson quadrature; needs an even interval count, which
    /// every symmetric grid in the crate has.
    pub fn simpson(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.n);
        assert!(self.n >= 3 && (self.n - 1) % 2 == 0, "Simpson needs an even interval count");
        let mut s = v[0] + v[self.n - 1];
        for (i, &vi) in v.iter().enumerate().take(self.n - 1).skip(1) {
            s += if i % 2 == 1 { 4.0 * vi } else { 2.0 * vi };
        }
        s * self.h() / 3.0
    }
}

/// Cell-centered tensor grid on the cross-section `[0, L]^dim`, `dim` in {1, 2}.
///
/// Nodes along each axis sit at `(i + 1/2) L / n`. The nodal mean is the
/// exact quadrature of every resolvable cosine mode, so `mean` doubles as
/// the `L^2(Omega)` average throughout the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossGrid {
    dim: usize,
    n: usize,
    len_l: f64,
}

impl CrossGrid {
    pub fn new(dim: usize, n: usize, len_l: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Parameter(format!(
                "cross-section dimension must be 1 or 2, got {dim}"
            )));
        }
        if n == 0 {
            return Err(Error::Parameter("cross grid needs >= 1 node per axis".into()));
        }
        if !(len_l.is_finite() && len_l > 0.0) {
            return Err(Error::Parameter(format!("cross width must be positive, got {len_l}")));
        }
        Ok(Self { dim, n, len_l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> f64 {
        self.len_l
    }

    pub fn h(&self) -> f64 {
        self.len_l / self.n as f64
    }

    pub fn total_nodes(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Coordinate along one axis.
    pub fn axis_x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    /// Full coordinates of flat node `k` (row-major for dim 2).
    pub fn coords(&self, k: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.axis_x(k), 0.0],
            _ => [self.axis_x(k / self.n), self.axis_x(k % self.n)],
        }
    }

    /// Nodal average = midpoint-rule mean over the cross-section.
    pub fn mean(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.total_nodes());
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (lower[0] unused), `upper[i]`
/// multiplies `x[i+1]` (last entry unused). Returns the solution. Fails if a
/// pivot collapses; callers pass diagonally dominant systems.
pub fn tridiag_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv.abs() < f64::MIN_POSITIVE {
        return Err(Error::NonConvergence("tridiagonal pivot vanished at row 0".into()));
    }
    c[0] = upper[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * c[i - 1];
        if piv.abs() < f64::MIN_POSITIVE {
            return Err(Error::NonConvergence(format!(
                "tridiagonal pivot vanished at row {i}"
            )));
        }
        c[i] = upper[i] / piv;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}

/// Allocation-free variant of [`tridiag_solve`] for hot loops: the solution
/// overwrites `rhs`, and `scratch` (same length) holds the forward-sweep
/// coefficients. Same pivot contract as the allocating version.
pub fn tridiag_solve_in_place(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n && scratch.len() == n);
    let mut piv = diag[0];
    if piv.abs() < f64::MIN_POSITIVE {
        return Err(Error::NonConvergence("tridiagonal pivot vanished at row 0".into()));
    }
    scratch[0] = upper[0] / piv;
    rhs[0] /= piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * scratch[i - 1];
        if piv.abs() < f64::MIN_POSITIVE {
            return Err(Error::NonConvergence(format!(
                "tridiagonal pivot vanished at row {i}"
            )));
        }
        scratch[i] = upper[i] / piv;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= scratch[i] * next;
    }
    Ok(())
}

/// Solves the bordered tridiagonal system
///
/// ```text
/// [ T   d ] [x]   [f]
/// [ r^T s ] [z] = [g]
/// ```
///
/// with `T` tridiagonal, by two Thomas solves and a scalar Schur complement.
/// Used for front solves (extra unknown: the wave speed) and for kernel-
/// deflated corrector solves (extra unknown: the kernel multiplier).
#[allow(clippy::too_many_arguments)]
pub fn bordered_tridiag_solve(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    col: &[f64],
    row: &[f64],
    corner: f64,
    rhs: &[f64],
    rhs_last: f64,
) -> Result<(Vec<f64>, f64)> {
    let y = tridiag_solve(lower, diag, upper, rhs)?;
    let w = tridiag_solve(lower, diag, upper, col)?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let denom = corner - dot(row, &w);
    if denom.abs() < 1e-300 {
        return Err(Error::NonConvergence("bordered system is singular".into()));
    }
    let z = (rhs_last - dot(row, &y)) / denom;
    let x: Vec<f64> = y.iter().zip(&w).map(|(yi, wi)| yi - z * wi).collect();
    Ok((x, z))
}

/// Second derivative by the 3-point central stencil; one-sided copies at the
/// ends (second-order interior, the boundary values are only used by callers
/// that immediately overwrite or ignore them).
pub fn second_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    let h2 = h * h;
    for i in 1..n - 1 {
        out[i] = (v[i - 1] - 2.0 * v[i] + v[i + 1]) / h2;
    }
    if n >= 4 {
        out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
        out[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
    }
    out
}

/// First derivative by the 3-point central stencil, one-sided at the ends.
pub fn first_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    out
}

/// Fourth-order central first derivative on interior nodes `2..n-2`;
/// the four outermost nodes fall back to the second-order stencil.
pub fn first_derivative_o4(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = first_derivative(v, h);
    for i in 2..n.saturating_sub(2) {
        out[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h);
    }
    out
}

/// Fourth-order central second derivative on interior nodes `2..n-2`;
/// the four outermost nodes fall back to the second-order stencil.
pub fn second_derivative_o4(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = second_derivative(v, h);
    let h2 = h * h;
    for i in 2..n.saturating_sub(2) {
        out[i] =
            (-v[i - 2] + 16.0 * v[i - 1] - 30.0 * v[i] + 16.0 * v[i + 1] - v[i + 2]) / (12.0 * h2);
    }
    out
}

/// Cubic Lagrange interpolation on a uniform grid.
///
/// Uses the centered 4-point stencil, shifted to one side near the edges.
/// Queries outside the grid are a caller bug and panic in debug builds;
/// release builds clamp to the boundary stencil.
#[derive(Debug, Clone, Copy)]
pub struct CubicInterp<'a> {
    a: f64,
    h: f64,
    values: &'a [f64],
}

impl<'a> CubicInterp<'a> {
    pub fn new(grid: &UniformGrid, values: &'a [f64]) -> Self {
        assert_eq!(values.len(), grid.len());
        Self { a: grid.lo(), h: grid.h(), values }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = (x - self.a) / self.h;
        debug_assert!(
            (-1e-9..=(n as f64 - 1.0) + 1e-9).contains(&t),
            "interpolation query {x} outside grid"
        );
        // Left node of the 4-point stencil: query lands between nodes i0+1 and i0+2.
        let i0 = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let s = t - i0 as f64;
        let v = &self.values[i0..i0 + 4];
        // Lagrange weights for nodes at local offsets 0, 1, 2, 3.
        let w0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
        let w1 = s * (s - 2.0) * (s - 3.0) / 2.0;
        let w2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
        let w3 = s * (s - 1.0) * (s - 2.0) / 6.0;
        w0 * v[0] + w1 * v[1] + w2 * v[2] + w3 * v[3]
    }
}

/// Ordinary least squares line fit: returns `(intercept, slope, rms_residual)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert!(xs.len() == ys.len() && xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    (intercept, slope, rms)
}

/// Least-squares fit of `y = sum_k coeff[k] * x^k` up to the given degree,
/// solved through nalgebra on the normal equations (degree stays tiny here).
pub fn fit_poly(xs: &[f64], ys: &[f64], degree: usize) -> Vec<f64> {
    assert!(xs.len() == ys.len() && xs.len() > degree);
    let m = degree + 1;
    let mut ata = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut atb = nalgebra::DVector::<f64>::zeros(m);
    for (&x, &y) in xs.iter().zip(ys) {
        let mut pow = vec![1.0; m];
        for k in 1..m {
            pow[k] = pow[k - 1] * x;
        }
        for i in 0..m {
            atb[i] += pow[i] * y;
            for j in 0..m {
                ata[(i, j)] += pow[i] * pow[j];
            }
        }
    }
    let sol = ata.lu().solve(&atb).expect("normal equations singular");
    sol.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_grid_centers_on_zero() {
        let g = UniformGrid::symmetric(30.0, 4096).unwrap();
        assert_eq!(g.len() % 2, 1, "symmetric grid must have odd node count");
        assert_eq!(g.x(g.center_index()), 0.0);
        assert!((g.h() - 60.0 / 4096.0).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_integrates_parabola_exactly_enough() {
        let g = UniformGrid::new(0.0, 1.0, 2001).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|x| x * x).collect();
        assert!((g.trapezoid(&v) - 1.0 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn simpson_is_exact_on_cubics_and_o4_on_smooth() {
        let g = UniformGrid::new(0.0, 1.0, 101).unwrap();
        let cubic: Vec<f64> = g.nodes().iter().map(|x| x * x * x - 0.5 * x).collect();
        assert!((g.simpson(&cubic) - 0.0).abs() < 1e-14, "Simpson must integrate cubics exactly");
        let smooth: Vec<f64> =
            g.nodes().iter().map(|x| (std::f64::consts::PI * x).sin()).collect();
        let err = (g.simpson(&smooth) - 2.0 / std::f64::consts::PI).abs();
        assert!(err < 1e-8, "Simpson error {err:.3e} above the h^4 level");
    }

    #[test]
    fn cross_grid_midpoints_average_cosines_to_zero() {
        // Midpoint placement kills every resolvable nonzero cosine mode exactly.
        let g = CrossGrid::new(1, 16, 1.0).unwrap();
        for k in 1..16 {
            let v: Vec<f64> = (0..16)
                .map(|i| (k as f64 * std::f64::consts::PI * g.axis_x(i)).cos())
                .collect();
            assert!(
                g.mean(&v).abs() < 1e-14,
                "cosine mode {k} should average to zero, got {}",
                g.mean(&v)
            );
        }
    }

    #[test]
    fn tridiag_solves_poisson_row() {
        let n = 50;
        let lower = vec![1.0; n];
        let diag = vec![-2.0; n];
        let upper = vec![1.0; n];
        // Manufactured solution x_i = i.
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let xm = if i > 0 { xs[i - 1] } else { 0.0 };
            let xp = if i + 1 < n { xs[i + 1] } else { 0.0 };
            rhs[i] = xm - 2.0 * xs[i] + xp;
        }
        let sol = tridiag_solve(&lower, &diag, &upper, &rhs).unwrap();
        for (a, b) in sol.iter().zip(&xs) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn bordered_solve_matches_dense() {
        let n = 6;
        let lower = vec![0.0, 1.0, 0.5, -0.3, 1.2, 0.7];
        let diag = vec![4.0, 5.0, 4.5, 6.0, 5.5, 4.8];
        let upper = vec![0.8, -0.6, 1.1, 0.4, -0.9, 0.0];
        let col = vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.6];
        let row = vec![1.0, 0.0, -1.0, 2.0, 0.5, -0.5];
        let corner = 0.25;
        let rhs = vec![1.0, 2.0, -1.0, 0.5, 3.0, -2.0];
        let rhs_last = 0.7;

        let mut dense = nalgebra::DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            dense[(i, i)] = diag[i];
            if i > 0 {
                dense[(i, i - 1)] = lower[i];
            }
            if i + 1 < n {
                dense[(i, i + 1)] = upper[i];
            }
            dense[(i, n)] = col[i];
            dense[(n, i)] = row[i];
        }
        dense[(n, n)] = corner;
        let mut b = nalgebra::DVector::<f64>::zeros(n + 1);
        for i in 0..n {
            b[i] = rhs[i];
        }
        b[n] = rhs_last;
        let dense_sol = dense.lu().solve(&b).unwrap();

        let (x, z) =
            bordered_tridiag_solve(&lower, &diag, &upper, &col, &row, corner, &rhs, rhs_last)
                .unwrap();
        for i in 0..n {
            assert!((x[i] - dense_sol[i]).abs() < 1e-10, "component {i} mismatch");
        }
        assert!((z - dense_sol[n]).abs() < 1e-10);
    }

    #[test]
    fn cubic_interp_reproduces_cubics_exactly() {
        let g = UniformGrid::new(-2.0, 3.0, 21).unwrap();
        let f = |x: f64| 0.3 * x * x * x - x * x + 2.0 * x - 0.5;
        let vals: Vec<f64> = g.nodes().iter().map(|&x| f(x)).collect();
        let interp = CubicInterp::new(&g, &vals);
        for &x in &[-1.97, -0.33, 0.0, 1.21, 2.93] {
            assert!((interp.eval(x) - f(x)).abs() < 1e-12, "cubic not exact at {x}");
        }
    }

    #[test]
    fn fourth_order_stencils_beat_second_order_on_sine() {
        let g = UniformGrid::new(0.0, 6.28, 201).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|x| x.sin()).collect();
        let h = g.h();
        let d2_2 = second_derivative(&v, h);
        let d2_4 = second_derivative_o4(&v, h);
        let err = |d: &[f64]| {
            g.nodes()[5..196]
                .iter()
                .zip(&d[5..196])
                .map(|(x, di)| (di + x.sin()).abs())
                .fold(0.0f64, f64::max)
        };
        assert!(err(&d2_4) < err(&d2_2) * 0.01, "o4 stencil should be far more accurate");
    }

    #[test]
    fn poly_fit_recovers_exact_quadratic() {
        let xs = [0.025, 0.05, 0.1, 0.15, 0.2];
        let ys: Vec<f64> = xs.iter().map(|d| 0.35 + 0.02 * d + 0.009 * d * d).collect();
        let c = fit_poly(&xs, &ys, 2);
        assert!((c[0] - 0.35).abs() < 1e-12);
        assert!((c[1] - 0.02).abs() < 1e-10);
        assert!((c[2] - 0.009).abs() < 1e-8);
    }
}
