//! Full canonical-correlation workflow on a CSV file: ingest two variable
//! blocks, compute squared sample canonical correlations, and estimate the
//! leading population correlation with its variance scale.
//!
//! Run from the workspace root so the bundled dataset resolves:
//!   cargo run --example cca_real_data

use spiked_fisher::dataset::{ingest_csv, parse_column_refs};
use spiked_fisher::estimator::estimate_cca;
use spiked_fisher::fluctuation::eta;
use spiked_fisher::measure::DiscreteMeasure;
use spiked_fisher::phase::{g_map, CcaChain};
use spiked_fisher::Result;

fn main() -> Result<()> {
    let x_cols = parse_column_refs("x1,x2,x3,x4,x5,x6,x7");
    let y_cols = parse_column_refs("y1,y2,y3,y4,y5,y6,y7,y8,y9,y10,y11");
    let frame = ingest_csv("data/cca_sample.csv", &x_cols, &y_cols)?;
    let (p, q, n) = (frame.p(), frame.q(), frame.retained_rows);
    println!(
        "ingested {} rows ({} dropped), x block {p} vars, y block {q} vars",
        n, frame.dropped_rows
    );

    // squared sample canonical correlations from the two centered blocks
    let nf = n as f64;
    let sxx = &frame.x * frame.x.transpose() / nf;
    let syy = &frame.y * frame.y.transpose() / nf;
    let sxy = &frame.x * frame.y.transpose() / nf;
    let a = spiked_fisher::linalg::half_whiten(&sxx, &sxy)?;
    let g = spiked_fisher::linalg::half_whiten(&syy, &a.transpose())?.transpose();
    let lambda_sq = spiked_fisher::linalg::sym_eigenvalues_desc(&(&g * g.transpose()))?;

    println!("\n{:>4} {:>12} {:>12}", "k", "lambda^2", "fisher scale");
    for (k, &l) in lambda_sq.iter().enumerate() {
        println!("{k:>4} {l:>12.6} {:>12.6}", g_map(l, q, n)?);
    }

    let reports = estimate_cca(&lambda_sq, p, q, n)?;
    let top = &reports[0];
    println!("\nleading correlation estimate: {:.6}", top.estimate);

    // variance scale with the remaining sample correlations as the bulk
    let rest = DiscreteMeasure::from_eigenvalues(&lambda_sq[1..])?;
    let chain = CcaChain::new(p - 1, q, n, rest)?;
    let scales = eta(&chain, top.estimate)?;
    println!("asymptotic variance scale eta = {:.6e}", scales.eta);
    println!(
        "approximate sd of lambda^2_1:  {:.4}",
        (2.0 * scales.eta / q as f64).sqrt()
    );
    Ok(())
}
