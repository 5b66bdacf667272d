//! Small dense linear-algebra helpers shared by the trainers.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Flips a direction so that its largest-magnitude component is positive.
fn fix_sign(mut v: nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
    let mut pivot = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    if v[pivot] < 0.0 {
        v.neg_mut();
    }
    v
}

/// Top-`m` principal directions (as columns) of the points in `data`.
///
/// The data are centered first. Directions are ordered by decreasing
/// variance and sign-normalized.
pub fn principal_directions(data: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    let d = data.nrows();
    if m == 0 || m > d {
        return Err(Error::param(format!("need 1 <= m <= {d} principal directions, got {m}")));
    }
    let mean = data.column_mean();
    let mut centered = data.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let cov = &centered * centered.transpose();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut out = DMatrix::zeros(d, m);
    for (j, &i) in order.iter().take(m).enumerate() {
        out.set_column(j, &fix_sign(eig.eigenvectors.column(i).into_owned()));
    }
    Ok(out)
}

/// Orthogonal `R` maximizing `trace(R^T m)`.
pub fn procrustes(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numeric("SVD failed in Procrustes step".into())),
    };
    Ok(u * vt)
}

/// Haar-ish random orthogonal matrix from the QR factorization of a Gaussian
/// matrix.
pub fn random_orthogonal(dim: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col.neg_mut();
        }
    }
    q
}

/// Moore-Penrose pseudoinverse with a relative singular-value cutoff.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = max_sv * 1e-12 * a.nrows().max(a.ncols()) as f64;
    svd.pseudo_inverse(eps.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Numeric(format!("pseudoinverse: {e}")))
}

/// Largest absolute deviation of `q^T q` from the identity.
pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let id = DMatrix::<f64>::identity(g.nrows(), g.ncols());
    (g - id).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in [1, 2, 5, 32] {
            let q = random_orthogonal(d, &mut rng);
            assert!(orthogonality_defect(&q) < 1e-12);
        }
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = random_orthogonal(4, &mut rng);
        let est = procrustes(&r).unwrap();
        assert!((est - r).amax() < 1e-10);
    }

    #[test]
    fn pca_of_axis_data() {
        let data = DMatrix::from_row_slice(2, 4, &[-3.0, 3.0, -3.0, 3.0, -0.1, -0.1, 0.1, 0.1]);
        let p = principal_directions(&data, 1).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(p[(1, 0)].abs() < 1e-12);
        assert!(principal_directions(&data, 3).is_err());
    }

    #[test]
    fn pinv_of_wide_matrix() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, 1.0, 1.0]);
        let p = pseudo_inverse(&a).unwrap();
        let id = &a * &p;
        assert!((id - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }
}
