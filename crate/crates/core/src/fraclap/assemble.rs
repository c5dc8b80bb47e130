//! Galerkin assembly of the fractional stiffness matrix on a mesh.
//!
//! Each entry pairs a hat function with the singular image of another hat;
//! the inner principal-value integral is evaluated in closed form, the outer
//! one by a quick Kronrod pass with an adaptive fallback near the diagonal.
//! Entries are computed once per symmetry orbit and mirrored bitwise, so the
//! stored matrix is exactly symmetric (and exactly centrosymmetric on meshes
//! that are mirror-symmetric about the interval midpoint).

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exec;
use crate::quad::{self, SingularitySpec};
use crate::specfun;

use super::GridFunction1D;

/// Discrete fractional Dirichlet operator on the interior nodes of a mesh:
/// stiffness matrix `K` with `K[i][j] = <hat_i, (-Delta)^s hat_j>` and the
/// lumped mass diagonal `d_i = (x_{i+2} - x_i) / 2`.
///
/// `apply` realizes the nodal operator `D^{-1} K`; `solve` inverts
/// `K u = D rhs`, which is the discrete form of the Dirichlet problem with
/// zero exterior data.
#[derive(Debug, Clone)]
pub struct FracLapMatrix {
    pub order: f64,
    pub grid: GridFunction1D,
    pub stiffness: DMatrix<f64>,
    pub mass: DVector<f64>,
}

/// Minimum number of interior nodes for which assembly is meaningful.
const MIN_INTERIOR: usize = 8;

/// Assemble the stiffness and lumped mass for `(-Delta)^order` on the mesh.
pub fn assemble_matrix(grid: &GridFunction1D, order: f64) -> Result<FracLapMatrix> {
    if !(order > 0.0 && order < 1.0) {
        return Err(Error::Validation(format!(
            "operator order must lie in (0, 1), got {order}"
        )));
    }
    let nodes = &grid.nodes;
    let n = nodes.len() - 1;
    if n < MIN_INTERIOR + 1 {
        return Err(Error::Domain(format!(
            "mesh too coarse for assembly: {} interior nodes, need at least {MIN_INTERIOR}",
            n.saturating_sub(1)
        )));
    }
    for j in 0..n {
        if !(nodes[j] < nodes[j + 1]) {
            return Err(Error::Validation(format!(
                "mesh nodes not strictly increasing near index {j}"
            )));
        }
    }
    let m = n - 1;
    let c = specfun::c_norm_1d(order)?;
    let two_sigma = 2.0 * order;
    let mirror = is_mirror_symmetric(grid);

    let mut stiffness = DMatrix::zeros(m, m);
    if is_equispaced(nodes) {
        // Hats on an equispaced mesh are exact translates of each other, so
        // an entry depends only on the index separation: one row of distinct
        // values fills the whole matrix.
        let seps: Vec<Result<f64>> =
            exec::map_indexed(m, |sep| entry(nodes, two_sigma, 0, sep));
        let mut by_sep = Vec::with_capacity(m);
        for v in seps {
            by_sep.push(c * v?);
        }
        for i in 0..m {
            for j in 0..m {
                stiffness[(i, j)] = by_sep[i.abs_diff(j)];
            }
        }
    } else {
        // Canonical orbit representatives: upper triangle, and on mirror
        // meshes additionally i + j <= m - 1; the rest is filled by
        // reflection.
        let rows: Vec<Result<Vec<(usize, f64)>>> = exec::map_indexed(m, |i| {
            let j_hi = if mirror { (m - 1).saturating_sub(i) } else { m - 1 };
            let mut row = Vec::new();
            for j in i..=j_hi {
                row.push((j, entry(nodes, two_sigma, i, j)?));
            }
            Ok(row)
        });
        for (i, row) in rows.into_iter().enumerate() {
            for (j, raw) in row? {
                let v = c * raw;
                stiffness[(i, j)] = v;
                stiffness[(j, i)] = v;
                if mirror {
                    stiffness[(m - 1 - i, m - 1 - j)] = v;
                    stiffness[(m - 1 - j, m - 1 - i)] = v;
                }
            }
        }
    }

    let mut mass = DVector::from_iterator(m, (0..m).map(|i| 0.5 * (nodes[i + 2] - nodes[i])));
    if mirror {
        // Re-mirror so paired entries agree bitwise, not just to rounding.
        for i in 0..m / 2 {
            mass[m - 1 - i] = mass[i];
        }
    }

    Ok(FracLapMatrix {
        order,
        grid: grid.clone(),
        stiffness,
        mass,
    })
}

/// Equal cell widths up to a few ulps; the translate identification then
/// misplaces entries by far less than their quadrature accuracy.
fn is_equispaced(nodes: &[f64]) -> bool {
    let h = nodes[1] - nodes[0];
    nodes
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-13 * h)
}

fn is_mirror_symmetric(grid: &GridFunction1D) -> bool {
    let nodes = &grid.nodes;
    let n = nodes.len() - 1;
    let total = grid.interval.0 + grid.interval.1;
    (0..=n).all(|j| nodes[j] + nodes[n - j] == total)
}

/// `<hat_i, S_j>` over the support of hat i (without the kernel constant).
fn entry(nodes: &[f64], two_sigma: f64, i: usize, j: usize) -> Result<f64> {
    let ti = (nodes[i], nodes[i + 1], nodes[i + 2]);
    let tj = (nodes[j], nodes[j + 1], nodes[j + 2]);
    let mut total = 0.0;
    for cell in [(ti.0, ti.1), (ti.1, ti.2)] {
        total += cell_integral(cell, ti, tj, two_sigma)?;
    }
    Ok(total)
}

fn cell_integral(
    (c0, c1): (f64, f64),
    ti: (f64, f64, f64),
    tj: (f64, f64, f64),
    two_sigma: f64,
) -> Result<f64> {
    let f = |x: f64| hat(ti, x) * singular_image(tj, two_sigma, x);
    let (quick, quick_err) = quad::gk15_once(&f, c0, c1);
    if quick_err <= (1e-9 * (quick.abs() + quick_err)).max(1e-13) && quick.is_finite() {
        return Ok(quick);
    }
    // The image of hat j is singular only at its three nodes, which can meet
    // the integration cell only at an endpoint.
    let mut sings = Vec::new();
    for &e in &[c0, c1] {
        if e == tj.0 || e == tj.1 || e == tj.2 {
            sings.push(if (two_sigma - 1.0).abs() < 1e-12 {
                SingularitySpec::log(e)
            } else {
                SingularitySpec::algebraic(e, 1.0 - two_sigma)
            });
        }
    }
    // Entries feed a solve whose accuracy is limited well above this level
    // by the mesh itself; over-requesting here only burns refinement effort
    // against the tail-model claim floor.
    let threshold = (2e-7 * (quick.abs() + quick_err)).max(1e-12);
    match quad::integrate_adaptive(&f, c0, c1, &sings, threshold) {
        Ok(r) => Ok(r.value),
        Err(Error::Accuracy {
            value,
            error_estimate,
            ..
        }) if error_estimate <= (1e-5 * value.abs()).max(1e-8) => Ok(value),
        Err(e) => Err(e),
    }
}

fn hat((xl, xm, xr): (f64, f64, f64), x: f64) -> f64 {
    if x <= xl || x >= xr {
        0.0
    } else if x <= xm {
        (x - xl) / (xm - xl)
    } else {
        (xr - x) / (xr - xm)
    }
}

/// Principal-value integral of `(hat(x) - hat(y)) |x - y|^{-1-2s} dy` in
/// closed form.  The odd part over the symmetric window of the containing
/// cell cancels exactly, which is what makes the principal value finite.
fn singular_image((xl, xm, xr): (f64, f64, f64), two_sigma: f64, x: f64) -> f64 {
    let hx = hat((xl, xm, xr), x);
    let mut total = 0.0;
    if hx != 0.0 {
        // Everything outside the support contributes hat(x) times the kernel
        // tail mass on both sides.
        total += hx * ((x - xl).powf(-two_sigma) + (xr - x).powf(-two_sigma)) / two_sigma;
    }
    let h_left = xm - xl;
    let h_right = xr - xm;
    total += cell_piece(x, hx, xl, xm, 1.0 / h_left, -xl / h_left, two_sigma);
    total += cell_piece(x, hx, xm, xr, -1.0 / h_right, xr / h_right, two_sigma);
    total
}

/// One cell `[c0, c1]` on which the hat equals `a + b y`.
fn cell_piece(x: f64, hx: f64, c0: f64, c1: f64, b: f64, a: f64, two_sigma: f64) -> f64 {
    if x > c0 && x < c1 {
        // hat(x) comes from this same line, so the constant part of the
        // difference vanishes identically and the odd part cancels over the
        // largest window centered at x; only the lopsided remainder is left.
        let dl = x - c0;
        let dr = c1 - x;
        let r = dl.min(dr);
        if dl <= dr {
            -b * (p1(dr, two_sigma) - p1(r, two_sigma))
        } else {
            b * (p1(dl, two_sigma) - p1(r, two_sigma))
        }
    } else {
        let d0 = c0 - x;
        let d1 = c1 - x;
        let cc = hx - a - b * x;
        cc * (p0(d1, two_sigma) - p0(d0, two_sigma)) - b * (p1(d1, two_sigma) - p1(d0, two_sigma))
    }
}

/// Antiderivative of `|d|^{-1-2s}`.
fn p0(d: f64, two_sigma: f64) -> f64 {
    -d.signum() * d.abs().powf(-two_sigma) / two_sigma
}

/// Antiderivative of `d |d|^{-1-2s}`; logarithmic exactly at order 1/2.
fn p1(d: f64, two_sigma: f64) -> f64 {
    if (two_sigma - 1.0).abs() < 1e-12 {
        d.abs().ln()
    } else {
        d.abs().powf(1.0 - two_sigma) / (1.0 - two_sigma)
    }
}

impl FracLapMatrix {
    /// Number of interior nodes.
    pub fn dim(&self) -> usize {
        self.stiffness.nrows()
    }

    /// Interior nodes the rows correspond to.
    pub fn interior_nodes(&self) -> &[f64] {
        let n = self.grid.nodes.len();
        &self.grid.nodes[1..n - 1]
    }

    /// Nodal operator values `D^{-1} K u` at the interior nodes.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim();
        if u.len() != m {
            return Err(Error::Validation(format!(
                "expected {m} interior values, got {}",
                u.len()
            )));
        }
        let uv = DVector::from_column_slice(u);
        let ku = &self.stiffness * uv;
        Ok((0..m).map(|i| ku[i] / self.mass[i]).collect())
    }

    /// Solve the discrete Dirichlet problem `K u = D rhs`.
    ///
    /// On a mirror-symmetric mesh with bitwise-even right-hand side the
    /// solve is performed in the even subspace, so the returned solution is
    /// bitwise even as well.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim();
        if rhs.len() != m {
            return Err(Error::Validation(format!(
                "expected {m} interior values, got {}",
                rhs.len()
            )));
        }
        let g = DVector::from_iterator(
            m,
            rhs.iter().zip(self.mass.iter()).map(|(r, d)| r * d),
        );
        let even_input = is_mirror_symmetric(&self.grid)
            && (0..m / 2).all(|i| rhs[i] == rhs[m - 1 - i])
            && (0..m / 2).all(|i| self.mass[i] == self.mass[m - 1 - i]);
        let u = if even_input {
            self.solve_even_subspace(&g)?
        } else {
            self.solve_full(&g)?
        };
        let residual = (&self.stiffness * DVector::from_column_slice(&u) - &g)
            .amax()
            .abs();
        let scale = g.amax().max(f64::MIN_POSITIVE);
        if residual > 1e-10 * scale {
            return Err(Error::LinearAlgebra(format!(
                "solve residual {residual:.3e} exceeds 1e-10 * {scale:.3e}"
            )));
        }
        Ok(u)
    }

    fn solve_full(&self, g: &DVector<f64>) -> Result<Vec<f64>> {
        let chol = Cholesky::new(self.stiffness.clone()).ok_or_else(|| {
            Error::LinearAlgebra("stiffness matrix is not positive definite".into())
        })?;
        let mut u = chol.solve(g);
        // One step of iterative refinement.
        let r = g - &self.stiffness * &u;
        u += chol.solve(&r);
        Ok(u.iter().cloned().collect())
    }

    /// Galerkin restriction to vectors with `u_i = u_{m-1-i}`; exact for even
    /// data on a centrosymmetric matrix, and the expansion makes the paired
    /// entries of the result identical bitwise.
    fn solve_even_subspace(&self, g: &DVector<f64>) -> Result<Vec<f64>> {
        let m = self.dim();
        let mh = m.div_ceil(2);
        let k = &self.stiffness;
        let mut kred = DMatrix::zeros(mh, mh);
        for row in 0..mh {
            for col in 0..mh {
                let mut v = k[(row, col)];
                if col != m - 1 - col {
                    v += k[(row, m - 1 - col)];
                }
                if row != m - 1 - row {
                    v += k[(m - 1 - row, col)];
                    if col != m - 1 - col {
                        v += k[(m - 1 - row, m - 1 - col)];
                    }
                }
                kred[(row, col)] = v;
            }
        }
        let gred = DVector::from_iterator(
            mh,
            (0..mh).map(|i| {
                if i != m - 1 - i {
                    g[i] + g[m - 1 - i]
                } else {
                    g[i]
                }
            }),
        );
        let chol = Cholesky::new(kred.clone()).ok_or_else(|| {
            Error::LinearAlgebra("reduced stiffness matrix is not positive definite".into())
        })?;
        let mut z = chol.solve(&gred);
        let r = &gred - &kred * &z;
        z += chol.solve(&r);
        let mut u = vec![0.0; m];
        for i in 0..mh {
            u[i] = z[i];
            u[m - 1 - i] = z[i];
        }
        Ok(u)
    }

    /// CSV export: mesh header comment, the lumped mass line, then one line
    /// per stiffness row.
    pub fn export_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        let (a, b) = self.grid.interval;
        writeln!(
            out,
            "# n_cells = {}, order = {:.17e}, interval = [{:.17e}, {:.17e}], grading = {:.17e}",
            self.grid.n_cells(),
            self.order,
            a,
            b,
            self.grid.grading_exponent
        )?;
        let join = |it: &mut dyn Iterator<Item = f64>| {
            it.map(|v| format!("{v:.17e}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        writeln!(out, "mass,{}", join(&mut self.mass.iter().cloned()))?;
        for i in 0..self.dim() {
            writeln!(
                out,
                "row,{}",
                join(&mut self.stiffness.row(i).iter().cloned())
            )?;
        }
        Ok(())
    }

    /// Binary export: magic, dimensions, order, interval, nodes, stiffness in
    /// row-major order, then the mass diagonal; all integers and floats are
    /// little-endian.
    pub fn export_binary<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(b"FLM1")?;
        let m = self.dim() as u64;
        let n_nodes = self.grid.nodes.len() as u64;
        out.write_all(&m.to_le_bytes())?;
        out.write_all(&n_nodes.to_le_bytes())?;
        out.write_all(&self.order.to_le_bytes())?;
        out.write_all(&self.grid.interval.0.to_le_bytes())?;
        out.write_all(&self.grid.interval.1.to_le_bytes())?;
        for &x in &self.grid.nodes {
            out.write_all(&x.to_le_bytes())?;
        }
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                out.write_all(&self.stiffness[(i, j)].to_le_bytes())?;
            }
        }
        for v in self.mass.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraclap::{frac_lap_point, ball_coefficient, PointFunction};
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> GridFunction1D {
        GridFunction1D::graded((-1.0, 1.0), n, 2.0).unwrap()
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            assemble_matrix(&grid(8), 0.5),
            Err(Error::Domain(_))
        ));
        assert!(assemble_matrix(&grid(16), 0.0).is_err());
        assert!(assemble_matrix(&grid(16), 1.0).is_err());
    }

    #[test]
    fn stiffness_is_bitwise_symmetric_and_centrosymmetric() {
        let op = assemble_matrix(&grid(24), 0.6).unwrap();
        let m = op.dim();
        for i in 0..m {
            for j in 0..m {
                let v = op.stiffness[(i, j)];
                assert_eq!(v, op.stiffness[(j, i)]);
                assert_eq!(v, op.stiffness[(m - 1 - i, m - 1 - j)]);
            }
        }
    }

    #[test]
    fn stiffness_has_m_matrix_sign_pattern() {
        for &s in &[0.3, 0.5, 0.75] {
            let op = assemble_matrix(&grid(20), s).unwrap();
            let m = op.dim();
            let diag_max = (0..m).map(|i| op.stiffness[(i, i)]).fold(0.0, f64::max);
            for i in 0..m {
                assert!(op.stiffness[(i, i)] > 0.0);
                for j in 0..m {
                    if i != j {
                        assert!(
                            op.stiffness[(i, j)] <= 1e-14 * diag_max,
                            "s = {s}, entry ({i}, {j}) = {}",
                            op.stiffness[(i, j)]
                        );
                    }
                }
                let row_sum: f64 = (0..m).map(|j| op.stiffness[(i, j)]).sum();
                assert!(
                    row_sum >= -1e-10 * op.stiffness[(i, i)],
                    "s = {s}, row {i} sum = {row_sum}"
                );
            }
        }
    }

    #[test]
    fn nodal_image_of_explicit_solution_is_constant() {
        // u = kappa (1 - x^2)^s solves (-Delta)^s u = 1; the nodal operator
        // should reproduce the constant away from the boundary layers.
        let s = 0.5;
        let g = {
            let mut g = grid(128);
            let kappa = ball_coefficient(1, s).unwrap();
            g.set_values(|x| {
                let w = (1.0 - x) * (1.0 + x);
                if w <= 0.0 {
                    0.0
                } else {
                    kappa * w.powf(s)
                }
            });
            g
        };
        let op = assemble_matrix(&g, s).unwrap();
        let image = op.apply(&g.values[1..g.values.len() - 1].to_vec()).unwrap();
        let m = op.dim();
        for i in (m / 3)..(2 * m / 3) {
            assert!(
                (image[i] - 1.0).abs() < 0.02,
                "i = {i}, image = {}",
                image[i]
            );
        }
    }

    #[test]
    fn solve_matches_explicit_solution() {
        for &s in &[0.3, 0.7] {
            let g = grid(96);
            let op = assemble_matrix(&g, s).unwrap();
            let rhs = vec![1.0; op.dim()];
            let u = op.solve(&rhs).unwrap();
            let kappa = ball_coefficient(1, s).unwrap();
            let mut worst: f64 = 0.0;
            for (i, &x) in op.interior_nodes().iter().enumerate() {
                let exact = kappa * ((1.0 - x) * (1.0 + x)).powf(s);
                worst = worst.max((u[i] - exact).abs());
            }
            assert!(worst < 0.02, "s = {s}, worst nodal error = {worst}");
        }
    }

    #[test]
    fn even_rhs_yields_bitwise_even_solution() {
        let g = grid(32);
        let op = assemble_matrix(&g, 0.5).unwrap();
        let m = op.dim();
        let rhs: Vec<f64> = op
            .interior_nodes()
            .iter()
            .map(|&x| 1.0 + x * x)
            .collect();
        // Even sampling on a mirror mesh is bitwise even.
        for i in 0..m / 2 {
            assert_eq!(rhs[i], rhs[m - 1 - i]);
        }
        let u = op.solve(&rhs).unwrap();
        for i in 0..m / 2 {
            assert_eq!(u[i], u[m - 1 - i], "i = {i}");
        }
    }

    #[test]
    fn nodal_operator_matches_pointwise_quadrature() {
        let s = 0.6;
        let g = {
            let mut g = grid(256);
            g.set_values(|x| {
                let w = (1.0 - x) * (1.0 + x);
                if w <= 0.0 {
                    0.0
                } else {
                    w * w
                }
            });
            g
        };
        let op = assemble_matrix(&g, s).unwrap();
        let image = op.apply(&g.values[1..g.values.len() - 1].to_vec()).unwrap();
        let u = PointFunction::new((-1.0, 1.0), 1.0, |x: f64| {
            let w = (1.0 - x) * (1.0 + x);
            if w <= 0.0 {
                0.0
            } else {
                w * w
            }
        })
        .unwrap();
        let m = op.dim();
        for &i in &[m / 2, m / 2 - 5, m / 3] {
            let x = op.interior_nodes()[i];
            let exact = frac_lap_point(&u, s, x).unwrap();
            assert!(
                (image[i] - exact).abs() < 0.03,
                "x = {x}, nodal = {}, pointwise = {exact}",
                image[i]
            );
        }
    }

    #[test]
    fn exports_have_expected_shape() {
        let op = assemble_matrix(&grid(12), 0.5).unwrap();
        let m = op.dim();

        let mut csv = Vec::new();
        op.export_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2 + m);
        assert!(lines[0].starts_with("# n_cells = 12"));
        assert!(lines[1].starts_with("mass,"));
        assert_eq!(lines[1].split(',').count(), 1 + m);

        let mut bin = Vec::new();
        op.export_binary(&mut bin).unwrap();
        let expected = 4 + 8 + 8 + 8 + 16 + 8 * (13) + 8 * m * m + 8 * m;
        assert_eq!(bin.len(), expected);
        assert_eq!(&bin[..4], b"FLM1");
    }

    #[test]
    fn lumped_mass_is_cell_average_width() {
        let g = GridFunction1D::uniform((0.0, 1.0), 10).unwrap();
        let op = assemble_matrix(&g, 0.4).unwrap();
        for v in op.mass.iter() {
            assert_abs_diff_eq!(*v, 0.1, epsilon = 1e-15);
        }
    }
}
