//! Rank-one determinant identities on an information matrix.
//!
//! `cargo run --example determinant_updates`

use dopt::linalg::{
    det_update_full_rank, det_update_rank_deficient, kdet, pricing_matrix, rank_one_update, InfoMatrix,
};
use nalgebra::DMatrix;

fn main() -> dopt::Result<()> {
    let pts: [&[f64]; 4] = [&[1.0, 0.0, 0.0], &[1.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[1.0, 1.0, 1.0]];
    let s = InfoMatrix::from_weighted(3, pts.iter().map(|v| (*v, 1.0)))?;
    let v = [1.0, 2.0, -1.0];

    let factor = det_update_full_rank(&s, &v)?;
    let updated = rank_one_update(&s, &v)?;
    println!("ln det S          = {:.6}", s.logdet());
    println!("ln det (S + vvᵀ)  = {:.6}", updated.logdet());
    println!("ln(1 + vᵀS⁻¹v)    = {:.6}", factor.ln());

    // drop a direction: rank p-1, the pricing matrix becomes the null-space projector
    let flat = InfoMatrix::from_matrix(DMatrix::from_diagonal(&nalgebra::dvector![3.0, 2.0, 0.0]))?;
    println!("\nrank {} of {}", flat.rank(), flat.p());
    println!("kdet_2            = {}", kdet(&flat, 2)?);
    println!("vᵀ(I − S†S)v      = {}", det_update_rank_deficient(&flat, &v)?);
    println!("det(S + vvᵀ)      = {:.6}", rank_one_update(&flat, &v)?.logdet().exp());
    println!("G = {}", pricing_matrix(&flat)?);
    Ok(())
}
