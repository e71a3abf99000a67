//! Helpers shared by the integration tests.

#![allow(dead_code)]

/// Least squares by Householder QR.
pub fn lstsq(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let (m, p) = (x.len(), x[0].len());
    let mut a: Vec<Vec<f64>> = x.to_vec();
    let mut b = y.to_vec();
    for k in 0..p {
        let norm = (k..m).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (0..m).map(|i| if i < k { 0.0 } else { a[i][k] }).collect();
        v[k] -= alpha;
        let vv: f64 = v.iter().map(|t| t * t).sum();
        if vv == 0.0 {
            continue;
        }
        for j in k..p {
            let dot: f64 = (k..m).map(|i| v[i] * a[i][j]).sum();
            for i in k..m {
                a[i][j] -= 2.0 * dot / vv * v[i];
            }
        }
        let dot: f64 = (k..m).map(|i| v[i] * b[i]).sum();
        for i in k..m {
            b[i] -= 2.0 * dot / vv * v[i];
        }
    }
    let mut beta = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = ((k + 1)..p).map(|j| a[k][j] * beta[j]).sum();
        beta[k] = (b[k] - s) / a[k][k];
    }
    beta
}


/// County design rows (intercept, ethnicity shares, public covariates) and
/// homeownership proportions, computed directly from a table.
pub fn county_design(table: &pumba::models::CountyTable) -> (Vec<Vec<f64>>, Vec<f64>) {
    let x = table
        .rows
        .iter()
        .map(|r| {
            let p = r.pop as f64;
            vec![
                1.0,
                r.eth_black / p,
                r.eth_asian / p,
                r.eth_indig / p,
                r.eth_other / p,
                r.unemployed,
                r.poverty,
                r.no_insurance,
                r.housecost,
                r.pop_density,
            ]
        })
        .collect();
    let y = table.rows.iter().map(|r| r.homeowners / r.pop as f64).collect();
    (x, y)
}
