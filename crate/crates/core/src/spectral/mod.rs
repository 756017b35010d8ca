//! Expansion of incidence structures.
//!
//! An `n × n` incidence structure `M` is the biadjacency matrix of a
//! `d`-regular bipartite graph with adjacency `[[0, M], [Mᵀ, 0]]`. The
//! adjacency spectrum is `±ψ` for the singular values `ψ` of `M`, so the
//! largest eigenvalue is `d` and the spectral gap is `d − ψ₂`.
//!
//! Closed forms: a circulant (round-robin) structure has eigenvalues
//! `φ_m = Σ_{l<d} e^{−2πi·ml/n}` and, being normal, singular values `|φ_m|`,
//! giving gap `d − sin(dπ/n)/sin(π/n)`; an `(n, d, 1)` design has
//! `MMᵀ = (d−1)I + J`, giving gap `d − √(d−1)`.

pub mod jacobi;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::designkit::{circulant_incidence, IncidenceStructure};
use crate::error::{invalid, Result};

/// Second singular value within this distance of `d` marks a disconnected
/// incidence graph.
pub const DISCONNECTED_TOLERANCE: f64 = 1e-9;

/// Symmetric `2n × 2n` 0/1 matrix `[[0, M], [Mᵀ, 0]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    size: usize,
    entries: Vec<u8>,
}

impl AdjacencyMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.entries[i * self.size + j]
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.entries
            .chunks(self.size)
            .map(|r| r.iter().map(|&x| x as usize).sum())
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|&x| x as f64).collect()
    }

    /// All eigenvalues, sorted descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        jacobi::symmetric_eigenvalues(&self.to_f64(), self.size)
    }
}

pub fn adjacency(m: &IncidenceStructure) -> Result<AdjacencyMatrix> {
    if !m.is_square() {
        return Err(invalid(format!(
            "incidence structure is {}×{}, not square",
            m.b(),
            m.n()
        )));
    }
    let n = m.n();
    let size = 2 * n;
    let mut entries = vec![0u8; size * size];
    for (j, block) in m.blocks().iter().enumerate() {
        for &i in block.members() {
            entries[j * size + n + i] = 1;
            entries[(n + i) * size + j] = 1;
        }
    }
    Ok(AdjacencyMatrix { size, entries })
}

fn dense(m: &IncidenceStructure) -> Vec<f64> {
    m.rows().into_iter().flatten().map(f64::from).collect()
}

/// Singular values of `M`, one per object, sorted descending.
pub fn singular_values(m: &IncidenceStructure) -> Vec<f64> {
    jacobi::singular_values(&dense(m), m.b(), m.n())
}

/// Eigenvalues of the Gram matrix `MᵀM` by two-sided Jacobi, sorted
/// descending. Their square roots are the singular values.
pub fn gram_eigenvalues(m: &IncidenceStructure) -> Vec<f64> {
    let n = m.n();
    let rows = m.rows();
    let mut gram = vec![0.0; n * n];
    for row in &rows {
        for i in 0..n {
            if row[i] == 0 {
                continue;
            }
            for j in 0..n {
                gram[i * n + j] += f64::from(row[j]);
            }
        }
    }
    jacobi::symmetric_eigenvalues(&gram, n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub n: usize,
    pub d: usize,
    /// `ψ₁ ≥ ψ₂ ≥ … ≥ ψ_n`.
    pub singular_values: Vec<f64>,
    pub lambda2: f64,
    pub gap: f64,
    pub closed_form_gap: Option<f64>,
    /// `ψ₂ = d`: the incidence graph has more than one component.
    pub disconnected: bool,
}

/// Gap `d − ψ₂` of a square structure in which every block has `d`
/// objects and every object lies in `d` blocks.
pub fn spectral_gap(m: &IncidenceStructure) -> Result<SpectralReport> {
    if !m.is_regular() {
        return Err(invalid(
            "spectral gap needs a square d-regular incidence structure",
        ));
    }
    let d = m.d();
    let sv = singular_values(m);
    let lambda2 = sv.get(1).copied().unwrap_or(0.0);
    let disconnected = (d as f64 - lambda2).abs() < DISCONNECTED_TOLERANCE;
    Ok(SpectralReport {
        n: m.n(),
        d,
        lambda2,
        gap: if disconnected {
            0.0
        } else {
            d as f64 - lambda2
        },
        singular_values: sv,
        closed_form_gap: None,
        disconnected,
    })
}

/// `φ_m = Σ_{l=0}^{d−1} e^{−2πi·ml/n}` for `m = 0..n`.
pub fn circulant_eigenvalues(n: usize, d: usize) -> Result<Vec<Complex64>> {
    if n == 0 || d == 0 || d > n {
        return Err(invalid(format!("need 1 <= d <= n, got n={n}, d={d}")));
    }
    Ok((0..n)
        .map(|m| {
            let (mut re, mut im) = (0.0, 0.0);
            for l in 0..d {
                // Reduce the phase exactly before scaling to radians.
                let angle = 2.0 * std::f64::consts::PI * ((m * l) % n) as f64 / n as f64;
                re += angle.cos();
                im -= angle.sin();
            }
            Complex64::new(re, im)
        })
        .collect())
}

/// `|sin(dπm/n) / sin(πm/n)|`, the magnitude of `φ_m` for `m ≢ 0 (mod n)`.
pub fn circulant_magnitude(n: usize, d: usize, m: usize) -> f64 {
    let x = std::f64::consts::PI * m as f64 / n as f64;
    ((d as f64 * x).sin() / x.sin()).abs()
}

/// `d − sin(dπ/n)/sin(π/n)`.
pub fn rr_gap_closed_form(n: usize, d: usize) -> Result<f64> {
    if n < 2 || d == 0 || d > n {
        return Err(invalid(format!(
            "need n >= 2 and 1 <= d <= n, got n={n}, d={d}"
        )));
    }
    let x = std::f64::consts::PI / n as f64;
    Ok(d as f64 - (d as f64 * x).sin() / x.sin())
}

/// `d − √(d−1)`.
pub fn bibd_gap_closed_form(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(invalid("block-design gap needs d >= 2"));
    }
    Ok(d as f64 - ((d - 1) as f64).sqrt())
}

/// `M·Mᵀ = Mᵀ·M`, in exact integer arithmetic.
pub fn is_normal(m: &IncidenceStructure) -> Result<bool> {
    if !m.is_square() {
        return Err(invalid("normality needs a square structure"));
    }
    let n = m.n();
    let rows = m.rows();
    for i in 0..n {
        for j in 0..n {
            let mmt: u32 = (0..n).map(|k| u32::from(rows[i][k] * rows[j][k])).sum();
            let mtm: u32 = (0..n).map(|k| u32::from(rows[k][i] * rows[k][j])).sum();
            if mmt != mtm {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Numeric and closed-form gap of the circulant structure.
pub fn analyze_round_robin(n: usize, d: usize) -> Result<SpectralReport> {
    let mut report = spectral_gap(&circulant_incidence(n, d)?)?;
    report.closed_form_gap = Some(rr_gap_closed_form(n, d)?);
    Ok(report)
}

/// Numeric and closed-form gap of a verified `(n, d, 1)` design.
pub fn analyze_bibd(design: &IncidenceStructure) -> Result<SpectralReport> {
    crate::occupancy::check_design(design, design.n(), design.d())?;
    let mut report = spectral_gap(design)?;
    report.closed_form_gap = Some(bibd_gap_closed_form(design.d())?);
    Ok(report)
}

/// CSV record `structure,n,d,lambda2,gap,closed_form_gap,abs_error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralRow {
    pub structure: String,
    pub n: usize,
    pub d: usize,
    pub lambda2: f64,
    pub gap: f64,
    pub closed_form_gap: Option<f64>,
    pub abs_error: Option<f64>,
}

impl SpectralRow {
    pub fn new(structure: &str, report: &SpectralReport) -> Self {
        SpectralRow {
            structure: structure.to_string(),
            n: report.n,
            d: report.d,
            lambda2: report.lambda2,
            gap: report.gap,
            closed_form_gap: report.closed_form_gap,
            abs_error: report.closed_form_gap.map(|c| (c - report.gap).abs()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designkit::{fano_blocks, known_bibd, Block};

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn adjacency_examples() {
        let a = adjacency(&circulant_incidence(4, 2).unwrap()).unwrap();
        assert_eq!(a.size(), 8);
        assert!(a.is_symmetric());
        assert!(a.row_sums().iter().all(|&s| s == 2));
        let f = adjacency(&fano_blocks()).unwrap();
        assert_eq!(f.size(), 14);
        assert!(f.row_sums().iter().all(|&s| s == 3));
        let tall =
            IncidenceStructure::from_blocks(3, vec![Block::new(vec![0], 3).unwrap()]).unwrap();
        assert!(adjacency(&tall).is_err());
    }

    #[test]
    fn perfect_matching_is_disconnected() {
        let ident = circulant_incidence(5, 1).unwrap();
        let eig = adjacency(&ident).unwrap().eigenvalues();
        assert!(close(eig[0], 1.0) && close(eig[1], 1.0));
        let r = spectral_gap(&ident).unwrap();
        assert!(r.disconnected);
        assert_eq!(r.gap, 0.0);
        assert!(close(r.lambda2, 1.0));
    }

    #[test]
    fn singular_value_examples() {
        let sv = singular_values(&circulant_incidence(4, 2).unwrap());
        for (x, y) in sv.iter().zip([2.0, SQRT2, SQRT2, 0.0]) {
            assert!(close(*x, y), "{sv:?}");
        }
        let sv = singular_values(&fano_blocks());
        assert!(close(sv[0], 3.0));
        assert!(sv[1..].iter().all(|&x| close(x, SQRT2)));
        let ones = circulant_incidence(6, 6).unwrap();
        let sv = singular_values(&ones);
        assert!(close(sv[0], 6.0) && sv[1..].iter().all(|&x| x.abs() < 1e-9));
    }

    #[test]
    fn gap_examples() {
        assert!(close(
            spectral_gap(&circulant_incidence(4, 2).unwrap())
                .unwrap()
                .gap,
            2.0 - SQRT2
        ));
        assert!(close(
            spectral_gap(&fano_blocks()).unwrap().gap,
            3.0 - SQRT2
        ));
        let complete = spectral_gap(&circulant_incidence(5, 5).unwrap()).unwrap();
        assert!(complete.lambda2.abs() < 1e-9 && close(complete.gap, 5.0));
    }

    #[test]
    fn non_regular_structure_is_rejected() {
        let mut blocks = fano_blocks().blocks().to_vec();
        blocks[6] = blocks[0].clone();
        let s = IncidenceStructure::from_blocks(7, blocks).unwrap();
        assert!(spectral_gap(&s).is_err());
    }

    #[test]
    fn circulant_eigenvalue_examples() {
        let phi = circulant_eigenvalues(4, 2).unwrap();
        let expected = [
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, -1.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 1.0),
        ];
        for (a, b) in phi.iter().zip(expected) {
            assert!((a - b).norm() < 1e-12, "{phi:?}");
        }
        let full = circulant_eigenvalues(6, 6).unwrap();
        assert!(close(full[0].re, 6.0));
        assert!(full[1..].iter().all(|z| z.norm() < 1e-12));
        let phi = circulant_eigenvalues(7, 3).unwrap();
        assert!((phi[1].norm() - 2.2470).abs() < 1e-4);
        for (m, z) in phi.iter().enumerate().skip(1) {
            assert!(close(z.norm(), circulant_magnitude(7, 3, m)));
        }
    }

    #[test]
    fn closed_form_examples() {
        assert!(close(rr_gap_closed_form(4, 2).unwrap(), 2.0 - SQRT2));
        assert!((rr_gap_closed_form(7, 3).unwrap() - 0.7530).abs() < 1e-4);
        assert!(rr_gap_closed_form(57, 8).unwrap() < 0.35);
        assert!(close(bibd_gap_closed_form(3).unwrap(), 3.0 - SQRT2));
        assert!(close(bibd_gap_closed_form(4).unwrap(), 4.0 - 3f64.sqrt()));
        assert_eq!(bibd_gap_closed_form(2).unwrap(), 1.0);
        assert!(bibd_gap_closed_form(1).is_err());
    }

    #[test]
    fn normality() {
        assert!(is_normal(&circulant_incidence(4, 2).unwrap()).unwrap());
        assert!(is_normal(&fano_blocks()).unwrap());
        let mut blocks = fano_blocks().blocks().to_vec();
        blocks[6] = Block::new(vec![0, 1, 3], 7).unwrap();
        let broken = IncidenceStructure::from_blocks(7, blocks).unwrap();
        assert!(!is_normal(&broken).unwrap());
    }

    #[test]
    fn adjacency_spectrum_is_plus_minus_singular_values() {
        for m in [
            circulant_incidence(7, 3).unwrap(),
            known_bibd(4).unwrap(),
            circulant_incidence(4, 2).unwrap(),
        ] {
            let eig = adjacency(&m).unwrap().eigenvalues();
            let sv = singular_values(&m);
            let mut expected: Vec<f64> = sv.iter().flat_map(|&s| [s, -s]).collect();
            expected.sort_by(|x, y| y.total_cmp(x));
            for (x, y) in eig.iter().zip(&expected) {
                assert!(close(*x, *y), "{eig:?} vs {expected:?}");
            }
        }
    }

    #[test]
    fn gram_route_agrees_with_one_sided_route() {
        for d in [2, 3, 4, 5, 6, 8] {
            let m = known_bibd(d).unwrap();
            let sv = singular_values(&m);
            let gram = gram_eigenvalues(&m);
            for (s, g) in sv.iter().zip(&gram) {
                assert!((s * s - g).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn circulant_singular_values_are_phi_magnitudes() {
        for (n, d) in [(4, 2), (7, 3), (10, 4), (13, 4), (21, 5), (12, 12), (9, 1)] {
            let mut mags: Vec<f64> = circulant_eigenvalues(n, d)
                .unwrap()
                .iter()
                .map(|z| z.norm())
                .collect();
            mags.sort_by(|x, y| y.total_cmp(x));
            let sv = singular_values(&circulant_incidence(n, d).unwrap());
            for (a, b) in mags.iter().zip(&sv) {
                assert!(close(*a, *b), "n={n} d={d}: {mags:?} vs {sv:?}");
            }
        }
    }

    #[test]
    fn sweep_trends() {
        let mut prev_bibd = 0.0;
        for d in 2..=8usize {
            let n = d * (d - 1) + 1;
            let bibd = bibd_gap_closed_form(d).unwrap();
            let rr = rr_gap_closed_form(n, d).unwrap();
            assert!(bibd > prev_bibd);
            prev_bibd = bibd;
            if d >= 3 {
                assert!(bibd > rr);
            }
        }
        let rr_at = |d: usize| rr_gap_closed_form(d * (d - 1) + 1, d).unwrap();
        assert!(rr_at(40) < rr_at(8) && rr_at(8) < rr_at(4));
        assert!(rr_at(200) < 0.05);
    }
}
