//! Squared distances, pairwise matrices and unit normalization.

use ktuplet::{l2_normalize, pairwise_sq_dist, squared_euclidean, Matrix};

fn main() -> ktuplet::Result<()> {
    let u = [1.0, 2.0, 3.0];
    let v = [4.0, 6.0, 3.0];
    println!("|u - v|^2 = {}", squared_euclidean(&u, &v)?);
    println!("u / |u|   = {:?}", l2_normalize(&u)?);

    let a = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]])?;
    let b = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0], [3.0, 4.0]])?;
    let p = pairwise_sq_dist(&a, &b)?;
    for i in 0..p.rows() {
        println!("row {i}: {:?}", p.row(i));
    }

    if let Err(e) = l2_normalize(&[0.0, 0.0]) {
        println!("zero vector: {e}");
    }
    Ok(())
}
