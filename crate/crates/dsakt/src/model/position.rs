use ndarray::{Array2, NdFloat};

/// Fixed sinusoidal position table, built with 1-based row index i in [1, k]
/// and 1-based column index j in [1, d]:
///   even j -> sin(i / 10000^(j/d)),  odd j -> cos(i / 10000^((j-1)/d)).
/// Note the parity convention: the FIRST column (j = 1) is a cosine.
pub fn positional_table<F: NdFloat>(k: usize, d: usize) -> Array2<F> {
    let mut table = Array2::zeros((k, d));
    for row in 0..k {
        let i = (row + 1) as f64;
        for col in 0..d {
            let j = (col + 1) as f64;
            let value = if (col + 1) % 2 == 0 {
                (i / 10000f64.powf(j / d as f64)).sin()
            } else {
                (i / 10000f64.powf((j - 1.0) / d as f64)).cos()
            };
            table[[row, col]] = F::from(value).unwrap();
        }
    }
    table
}
