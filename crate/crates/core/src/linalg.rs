//! Small dense complex linear-algebra helpers shared by the pipeline stages.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `exp(j * 2π * cycles)`, reducing the argument to a fractional cycle first
/// so that large cycle counts keep full phase precision.
#[inline]
pub fn cis_cycles(cycles: f64) -> Complex64 {
    let frac = cycles - cycles.round();
    let (s, c) = (std::f64::consts::TAU * frac).sin_cos();
    Complex64::new(c, s)
}

#[inline]
pub fn cis(phase: f64) -> Complex64 {
    let (s, c) = phase.sin_cos();
    Complex64::new(c, s)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace_re(m: &CMatrix) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for q in 0..n {
        for p in q..n {
            worst = worst.max((m[(q, p)] - m[(p, q)].conj()).norm());
        }
    }
    worst
}

/// Largest deviation from constant diagonals.
pub fn toeplitz_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for q in 0..n.saturating_sub(1) {
        for p in 0..n - 1 {
            worst = worst.max((m[(q, p)] - m[(q + 1, p + 1)]).norm());
        }
    }
    worst
}

/// Replace `m` by `(m + m*) / 2`.
pub fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for q in 0..n {
        m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);
        for p in q + 1..n {
            let avg = (m[(q, p)] + m[(p, q)].conj()) * 0.5;
            m[(q, p)] = avg;
            m[(p, q)] = avg.conj();
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenpairs sorted by
/// descending eigenvalue. Ties keep the solver's native order.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Self {
        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(m.nrows(), order.len(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        HermitianEigen { values, vectors }
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Render a complex number as the `re+imj` token used by the text dumps.
pub fn format_complex(z: Complex64) -> String {
    if z.im.is_sign_negative() {
        format!("{}{}j", z.re, z.im)
    } else {
        format!("{}+{}j", z.re, z.im)
    }
}

/// Parse a `re+imj` / `re-imj` token.
pub fn parse_complex(tok: &str) -> Option<Complex64> {
    let body = tok.strip_suffix('j')?;
    // split at the sign that starts the imaginary part (skip exponent signs)
    let bytes = body.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        if (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E') {
            split = Some(i);
            break;
        }
    }
    let i = split?;
    let re: f64 = body[..i].parse().ok()?;
    let im: f64 = body[i..].parse().ok()?;
    Some(Complex64::new(re, im))
}

/// Whitespace-separated text dump of a matrix, one row per line.
pub fn dump_matrix(m: &CMatrix) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format_complex(m[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn load_matrix(text: &str) -> Option<CMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut dims = lines.next()?.split_whitespace();
    let rows: usize = dims.next()?.parse().ok()?;
    let cols: usize = dims.next()?.parse().ok()?;
    let mut m = CMatrix::zeros(rows, cols);
    for r in 0..rows {
        let toks: Vec<&str> = lines.next()?.split_whitespace().collect();
        if toks.len() != cols {
            return None;
        }
        for (c, t) in toks.iter().enumerate() {
            m[(r, c)] = parse_complex(t)?;
        }
    }
    Some(m)
}
