//! Closed-form linear algebra on 3+1 dimensional Lorentz vector spaces.
//!
//! Everything here is exact up to floating point: causal classification,
//! the parallel/orthogonal projectors of a non-null vector, membership tests
//! for the restricted Lorentz group, the factorization of conformal matrices
//! into a positive scale and a Lorentz matrix, and validation of frames of
//! reference (orthonormal, future pointing, right handed).

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector4};

use crate::error::{Error, Result};
use crate::spacetime::Event;

pub type Vec4 = Vector4<f64>;
pub type Mat4 = Matrix4<f64>;

/// Default tolerance on the quadratic form for causal classification.
pub const DEFAULT_CAUSAL_TOL: f64 = 1e-10;

/// Symmetry tolerance accepted by [`Metric4::new`].
pub const METRIC_SYMMETRY_TOL: f64 = 1e-12;

/// Minkowski metric `diag(1, -1, -1, -1)`.
pub fn eta() -> Mat4 {
    Mat4::from_diagonal(&Vec4::new(1.0, -1.0, -1.0, -1.0))
}

/// A symmetric bilinear form of signature (+,-,-,-).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric4(Mat4);

impl Metric4 {
    pub fn new(m: Mat4) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("metric has non-finite components".into()));
        }
        let asym = (m - m.transpose()).amax();
        if asym > METRIC_SYMMETRY_TOL {
            return Err(Error::InvalidInput(format!("metric is not symmetric (residual {asym:e})")));
        }
        let eig = SymmetricEigen::new(m).eigenvalues;
        let pos = eig.iter().filter(|&&l| l > 0.0).count();
        let neg = eig.iter().filter(|&&l| l < 0.0).count();
        if pos != 1 || neg != 3 {
            return Err(Error::InvalidInput(format!(
                "metric does not have Lorentz signature (eigenvalues {:?})",
                eig.as_slice()
            )));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix without checks. Callers guarantee symmetry and signature.
    pub(crate) fn new_unchecked(m: Mat4) -> Self {
        Self(m)
    }

    pub fn minkowski() -> Self {
        Self(eta())
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn dot(&self, u: &Vec4, v: &Vec4) -> f64 {
        u.dot(&(self.0 * v))
    }

    pub fn norm2(&self, v: &Vec4) -> f64 {
        self.dot(v, v)
    }

    /// Lowers the index of `v`.
    pub fn lower(&self, v: &Vec4) -> Vec4 {
        self.0 * v
    }

    pub fn inverse(&self) -> Option<Mat4> {
        self.0.try_inverse()
    }

    /// Gram matrix `g(X_i, X_j)` of the columns of `x`.
    pub fn gram(&self, x: &Mat4) -> Mat4 {
        x.transpose() * self.0 * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalCharacter {
    Timelike,
    Lightlike,
    Spacelike,
    Zero,
}

fn check_finite(v: &Vec4) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("non-finite vector {v:?}")))
    }
}

pub fn causal_character(g: &Metric4, v: &Vec4, tol: f64) -> Result<CausalCharacter> {
    check_finite(v)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("classification tolerance must be positive".into()));
    }
    let q = g.norm2(v);
    Ok(if q > tol {
        CausalCharacter::Timelike
    } else if q < -tol {
        CausalCharacter::Spacelike
    } else if v.amax() > tol {
        CausalCharacter::Lightlike
    } else {
        CausalCharacter::Zero
    })
}

/// Whether the causal vector `v` lies in the same cone half as `future_ref`.
pub fn is_future_directed(g: &Metric4, future_ref: &Vec4, v: &Vec4) -> Result<bool> {
    check_finite(future_ref)?;
    match causal_character(g, v, DEFAULT_CAUSAL_TOL)? {
        CausalCharacter::Timelike | CausalCharacter::Lightlike => Ok(g.dot(future_ref, v) > 0.0),
        other => Err(Error::Domain(format!(
            "time orientation is undefined for {other:?} vectors"
        ))),
    }
}

/// Parallel and orthogonal projectors with respect to the non-null vector `z`.
///
/// `P_par = z (g z)^T / g(z, z)` and `P_perp = Id - P_par`.
pub fn projectors(g: &Metric4, z: &Vec4) -> Result<(Mat4, Mat4)> {
    check_finite(z)?;
    let q = g.norm2(z);
    if q.abs() <= DEFAULT_CAUSAL_TOL {
        return Err(Error::SingularProjector(q));
    }
    let par = z * g.lower(z).transpose() / q;
    Ok((par, Mat4::identity() - par))
}

fn spatial_block(m: &Mat4) -> Matrix3<f64> {
    m.fixed_view::<3, 3>(1, 1).into_owned()
}

/// Membership in the identity component of O(1,3).
pub fn is_restricted_lorentz(lambda: &Mat4, tol: f64) -> bool {
    if lambda.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let e = eta();
    let residual = (lambda.transpose() * e * lambda - e).amax();
    residual <= tol && lambda[(0, 0)] > 0.0 && spatial_block(lambda).determinant() > 0.0
}

/// Splits a conformal matrix `A = lambda * Lambda` with `lambda > 0` and
/// `Lambda` in O(1,3).
///
/// The conformality residual `|A^T eta A - lambda' eta|` is measured against
/// `tol * max(1, lambda')`.
pub fn co_factorize(a: &Mat4, tol: f64) -> Result<(f64, Mat4)> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite matrix".into()));
    }
    let e = eta();
    let m = a.transpose() * e * a;
    // Best-fit conformal factor: mean of the diagonal against eta's signs.
    let scale2 = (0..4).map(|i| m[(i, i)] * e[(i, i)]).sum::<f64>() / 4.0;
    let residual = (m - e * scale2).amax();
    if !(scale2 > 0.0) || residual > tol * scale2.max(1.0) {
        return Err(Error::NotInGroup(residual));
    }
    let lambda = a.determinant().abs().powf(0.25);
    Ok((lambda, a / lambda))
}

/// An ordered basis of a tangent space, stored as the columns of a matrix of
/// coordinate components.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame4 {
    pub base: Event,
    pub columns: Mat4,
}

impl Frame4 {
    pub fn new(base: Event, columns: Mat4) -> Result<Self> {
        if columns.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite frame".into()));
        }
        let det = columns.determinant();
        if det.abs() <= 1e-12 {
            return Err(Error::InvalidInput(format!("frame columns are dependent (det {det:e})")));
        }
        Ok(Self { base, columns })
    }

    pub fn column(&self, i: usize) -> Vec4 {
        self.columns.column(i).into_owned()
    }

    /// Largest deviation of the Gram matrix from `eta`.
    pub fn gram_residual(&self, g: &Metric4) -> f64 {
        (g.gram(&self.columns) - eta()).amax()
    }
}

/// Checks that `x` is a frame of reference: orthonormal, with a
/// future-directed timelike leg, and oriented like `right_handed_ref`.
pub fn validate_frame_of_reference(
    g: &Metric4,
    future_ref: &Vec4,
    right_handed_ref: &Frame4,
    x: &Frame4,
    tol: f64,
) -> bool {
    if x.gram_residual(g) > tol {
        return false;
    }
    if !matches!(is_future_directed(g, future_ref, &x.column(0)), Ok(true)) {
        return false;
    }
    match right_handed_ref.columns.try_inverse() {
        Some(inv) => (inv * x.columns).determinant() > 0.0,
        None => false,
    }
}

/// Orthonormal frame whose timelike leg is the unit vector along `x0`,
/// obtained by Gram–Schmidt from `reference` so that time and space
/// orientation are inherited from it.
pub fn adapted_frame(g: &Metric4, reference: &Mat4, x0: &Vec4) -> Result<Mat4> {
    let n = g.norm2(x0);
    if !(n > 0.0) {
        return Err(Error::Domain(format!("adapted frame needs a timelike leg (g = {n:e})")));
    }
    let sign = [1.0, -1.0, -1.0, -1.0];
    let mut cols = [x0 / n.sqrt(), Vec4::zeros(), Vec4::zeros(), Vec4::zeros()];
    if g.dot(&cols[0], &reference.column(0).into_owned()) < 0.0 {
        return Err(Error::Domain("timelike leg is past-directed".into()));
    }
    for a in 1..4 {
        let mut v: Vec4 = reference.column(a).into_owned();
        for b in 0..a {
            v -= cols[b] * (g.dot(&cols[b], &v) * sign[b]);
        }
        let m = -g.norm2(&v);
        if !(m > 1e-24) {
            return Err(Error::Domain("reference frame is degenerate against the timelike leg".into()));
        }
        cols[a] = v / m.sqrt();
    }
    Ok(Mat4::from_columns(&cols))
}

/// Boost along the first spatial axis with rapidity `r`.
pub fn boost_x(r: f64) -> Mat4 {
    let mut m = Mat4::identity();
    m[(0, 0)] = r.cosh();
    m[(0, 1)] = r.sinh();
    m[(1, 0)] = r.sinh();
    m[(1, 1)] = r.cosh();
    m
}

/// Embeds a spatial rotation as `1 ⊕ R`.
pub fn spatial_embed(r: &Matrix3<f64>) -> Mat4 {
    let mut m = Mat4::identity();
    m.fixed_view_mut::<3, 3>(1, 1).copy_from(r);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(a: f64, b: f64, c: f64, d: f64) -> Vec4 {
        Vec4::new(a, b, c, d)
    }

    #[test]
    fn classification_examples() {
        let g = Metric4::minkowski();
        let t = DEFAULT_CAUSAL_TOL;
        assert_eq!(causal_character(&g, &v(1., 0., 0., 0.), t).unwrap(), CausalCharacter::Timelike);
        assert_eq!(causal_character(&g, &v(1., 1., 0., 0.), t).unwrap(), CausalCharacter::Lightlike);
        assert_eq!(causal_character(&g, &v(0.5, 1., 0., 0.), t).unwrap(), CausalCharacter::Spacelike);
        assert_eq!(causal_character(&g, &Vec4::zeros(), t).unwrap(), CausalCharacter::Zero);
        assert!(causal_character(&g, &v(f64::NAN, 0., 0., 0.), t).is_err());
        assert!(causal_character(&g, &v(1., 0., 0., 0.), 0.0).is_err());
    }

    #[test]
    fn time_orientation_examples() {
        let g = Metric4::minkowski();
        let f = v(1., 0., 0., 0.);
        assert!(is_future_directed(&g, &f, &v(2., 1., 0., 0.)).unwrap());
        assert!(!is_future_directed(&g, &f, &v(-1., 0., 0., 0.)).unwrap());
        assert!(!is_future_directed(&g, &f, &v(-1., 1., 0., 0.)).unwrap());
        assert!(matches!(is_future_directed(&g, &f, &v(0., 1., 0., 0.)), Err(Error::Domain(_))));
        assert!(matches!(is_future_directed(&g, &f, &Vec4::zeros()), Err(Error::Domain(_))));
    }

    #[test]
    fn projector_examples() {
        let g = Metric4::minkowski();
        let (p, _) = projectors(&g, &v(1., 0., 0., 0.)).unwrap();
        assert_eq!(p, Mat4::from_diagonal(&v(1., 0., 0., 0.)));
        let (p, _) = projectors(&g, &v(0., 1., 0., 0.)).unwrap();
        assert_eq!(p, Mat4::from_diagonal(&v(0., 1., 0., 0.)));

        // Direct arithmetic: Z = (2,1,0,0), gZ = (2,-1,0,0), g(Z,Z) = 3.
        let z = v(2., 1., 0., 0.);
        let (p, q) = projectors(&g, &z).unwrap();
        let mut expected = Mat4::zeros();
        expected[(0, 0)] = 4.0 / 3.0;
        expected[(0, 1)] = -2.0 / 3.0;
        expected[(1, 0)] = 2.0 / 3.0;
        expected[(1, 1)] = -1.0 / 3.0;
        assert!((p - expected).amax() < 1e-15);
        assert!((p.trace() - 1.0).abs() < 1e-15);
        assert!((p * p - p).amax() < 1e-12);
        assert!((p * q).amax() < 1e-12);
        assert!(matches!(projectors(&g, &v(1., 1., 0., 0.)), Err(Error::SingularProjector(_))));
    }

    #[test]
    fn restricted_lorentz_examples() {
        assert!(is_restricted_lorentz(&Mat4::identity(), 1e-12));
        assert!(!is_restricted_lorentz(&Mat4::from_diagonal(&v(-1., 1., 1., 1.)), 1e-12));
        assert!(!is_restricted_lorentz(&Mat4::from_diagonal(&v(1., -1., 1., 1.)), 1e-12));
        assert!(is_restricted_lorentz(&boost_x(1.0), 1e-12));
        assert!(!is_restricted_lorentz(&(boost_x(1.0) * 2.0), 1e-12));
    }

    #[test]
    fn conformal_factorization_examples() {
        let (l, m) = co_factorize(&(Mat4::identity() * 2.0), 1e-12).unwrap();
        assert!((l - 2.0).abs() < 1e-15);
        assert!((m - Mat4::identity()).amax() < 1e-15);
        let (l, m) = co_factorize(&Mat4::identity(), 1e-12).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(m, Mat4::identity());

        let b = boost_x(1.0);
        let (l, m) = co_factorize(&(b * 3.0), 1e-12).unwrap();
        assert!((l - 3.0).abs() < 1e-12);
        assert!((m - b).amax() < 1e-12);

        let mut bad = Mat4::identity();
        bad[(1, 1)] = 2.0;
        assert!(matches!(co_factorize(&bad, 1e-12), Err(Error::NotInGroup(_))));
    }

    #[test]
    fn adapted_frame_is_a_frame_of_reference() {
        let g = Metric4::minkowski();
        let u = v(2.0, 1.0, 0.5, -0.3);
        let x = adapted_frame(&g, &Mat4::identity(), &u).unwrap();
        let std = Frame4::new(Event::new("minkowski", [0.0; 4]), Mat4::identity()).unwrap();
        let fx = Frame4::new(std.base.clone(), x).unwrap();
        assert!(validate_frame_of_reference(&g, &v(1., 0., 0., 0.), &std, &fx, 1e-12));
        assert!((x.column(0) - u / g.norm2(&u).sqrt()).amax() < 1e-15);
        assert!(adapted_frame(&g, &Mat4::identity(), &v(-1.0, 0.0, 0.0, 0.0)).is_err());
        assert!(adapted_frame(&g, &Mat4::identity(), &v(0.0, 1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn frame_validation_examples() {
        let g = Metric4::minkowski();
        let base = Event::new("minkowski", [0.0; 4]);
        let std = Frame4::new(base.clone(), Mat4::identity()).unwrap();
        let f = v(1., 0., 0., 0.);
        assert!(validate_frame_of_reference(&g, &f, &std, &std, 1e-12));

        let past = Frame4::new(base.clone(), Mat4::from_diagonal(&v(-1., 1., 1., 1.))).unwrap();
        assert!(!validate_frame_of_reference(&g, &f, &std, &past, 1e-12));

        let mut swapped = Mat4::identity();
        swapped.swap_columns(1, 2);
        let swapped = Frame4::new(base.clone(), swapped).unwrap();
        assert!(!validate_frame_of_reference(&g, &f, &std, &swapped, 1e-12));

        let boosted = Frame4::new(base, boost_x(0.7)).unwrap();
        assert!(validate_frame_of_reference(&g, &f, &std, &boosted, 1e-12));
    }
}
