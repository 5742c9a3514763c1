//! Brute-force reference: ladder operators as matrices on a truncated two-mode
//! Fock space, exponentiated and applied to `|0,0⟩`.
//!
//! Operators are stored block-diagonally. The sparsity graph of a generator
//! splits the basis into invariant subspaces (the beam splitter conserves
//! `n₁ + n₂`, a displacement of mode 1 leaves `n₂` alone, ...), and each
//! connected component is kept as a small dense matrix. Exponentials and
//! products then act blockwise, which is exact and keeps cutoffs near 60
//! cheap.

mod expm;

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::disentangle::BeamSplitterAngle;
use crate::distribution::{JointDistribution, Port, SplitterParams};
use crate::error::{require, Error, Result};
use crate::numerics::{CoherentParam, SqueezeParam};

pub use expm::expm;

/// Norm budget of [`simulate`].
pub const TRUNCATION_BUDGET: f64 = 1e-7;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpace {
    pub cutoff: usize,
    pub dim: usize,
}

impl FockSpace {
    pub fn new(cutoff: usize) -> Self {
        FockSpace {
            cutoff,
            dim: (cutoff + 1) * (cutoff + 1),
        }
    }

    #[inline]
    pub fn index(&self, n1: usize, n2: usize) -> usize {
        debug_assert!(n1 <= self.cutoff && n2 <= self.cutoff);
        n1 * (self.cutoff + 1) + n2
    }

    #[inline]
    pub fn occupation(&self, index: usize) -> (usize, usize) {
        (index / (self.cutoff + 1), index % (self.cutoff + 1))
    }

    /// Basis states with both occupations at most `bound`.
    pub fn within(&self, bound: usize) -> impl Fn(usize) -> bool + '_ {
        move |i| {
            let (a, b) = self.occupation(i);
            a <= bound && b <= bound
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Create(Port),
    Annihilate(Port),
}

/// Basis grouped into connected components; `loc[i] = (group, position)`.
#[derive(Debug, Clone, PartialEq)]
struct Partition {
    groups: Vec<Vec<usize>>,
    loc: Vec<(usize, usize)>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl Partition {
    fn from_links(dim: usize, links: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut parent: Vec<usize> = (0..dim).collect();
        for (a, b) in links {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut group_of_root = vec![usize::MAX; dim];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut loc = vec![(0, 0); dim];
        for i in 0..dim {
            let root = find(&mut parent, i);
            if group_of_root[root] == usize::MAX {
                group_of_root[root] = groups.len();
                groups.push(Vec::new());
            }
            let g = group_of_root[root];
            loc[i] = (g, groups[g].len());
            groups[g].push(i);
        }
        Partition { groups, loc }
    }

    fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.groups.iter().flat_map(|g| g.iter().map(move |&i| (g[0], i)))
    }

    fn join(&self, other: &Partition) -> Partition {
        if self == other {
            return self.clone();
        }
        Partition::from_links(self.loc.len(), self.links().chain(other.links()))
    }
}

/// A linear operator on a [`FockSpace`], block diagonal in its own sparsity
/// components.
#[derive(Debug, Clone)]
pub struct FockOperator {
    space: FockSpace,
    part: Partition,
    blocks: Vec<DMatrix<Complex64>>,
}

impl FockOperator {
    /// From `(row, col, value)` entries; repeated entries add.
    pub fn from_entries(space: FockSpace, entries: &[(usize, usize, Complex64)]) -> Self {
        let part = Partition::from_links(space.dim, entries.iter().map(|&(r, c, _)| (r, c)));
        let mut blocks: Vec<DMatrix<Complex64>> =
            part.groups.iter().map(|g| DMatrix::zeros(g.len(), g.len())).collect();
        for &(r, c, v) in entries {
            let (g, pr) = part.loc[r];
            let (_, pc) = part.loc[c];
            blocks[g][(pr, pc)] += v;
        }
        FockOperator { space, part, blocks }
    }

    pub fn zero(space: FockSpace) -> Self {
        Self::from_entries(space, &[])
    }

    pub fn identity(space: FockSpace) -> Self {
        Self::diagonal(space, |_, _| ONE)
    }

    pub fn diagonal(space: FockSpace, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let entries: Vec<_> = (0..space.dim)
            .map(|i| {
                let (a, b) = space.occupation(i);
                (i, i, f(a, b))
            })
            .collect();
        Self::from_entries(space, &entries)
    }

    /// `coeff · w₁ w₂ … w_k` for a word of ladder operators (the rightmost acts
    /// first). Each factor is the truncated matrix, so states pushed past the
    /// cutoff are dropped.
    pub fn word(space: FockSpace, coeff: Complex64, word: &[Ladder]) -> Self {
        let mut entries = Vec::new();
        for col in 0..space.dim {
            let (mut n1, mut n2) = space.occupation(col);
            let mut amp = coeff;
            let mut alive = true;
            for op in word.iter().rev() {
                let n = match op {
                    Ladder::Create(Port::One) | Ladder::Annihilate(Port::One) => &mut n1,
                    Ladder::Create(Port::Two) | Ladder::Annihilate(Port::Two) => &mut n2,
                };
                match op {
                    Ladder::Create(_) => {
                        if *n == space.cutoff {
                            alive = false;
                            break;
                        }
                        *n += 1;
                        amp *= (*n as f64).sqrt();
                    }
                    Ladder::Annihilate(_) => {
                        if *n == 0 {
                            alive = false;
                            break;
                        }
                        amp *= (*n as f64).sqrt();
                        *n -= 1;
                    }
                }
            }
            if alive {
                entries.push((space.index(n1, n2), col, amp));
            }
        }
        Self::from_entries(space, &entries)
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    /// Dimensions of the dense blocks.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.part.groups.iter().map(Vec::len).collect()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let (gr, pr) = self.part.loc[row];
        let (gc, pc) = self.part.loc[col];
        if gr == gc {
            self.blocks[gr][(pr, pc)]
        } else {
            ZERO
        }
    }

    fn embed(&self, part: &Partition) -> Vec<DMatrix<Complex64>> {
        if &self.part == part {
            return self.blocks.clone();
        }
        let mut out: Vec<DMatrix<Complex64>> = part.groups.iter().map(|g| DMatrix::zeros(g.len(), g.len())).collect();
        for (group, block) in self.part.groups.iter().zip(&self.blocks) {
            let target = part.loc[group[0]].0;
            let pos: Vec<usize> = group.iter().map(|&i| part.loc[i].1).collect();
            for (j, &pj) in pos.iter().enumerate() {
                for (i, &pi) in pos.iter().enumerate() {
                    out[target][(pi, pj)] = block[(i, j)];
                }
            }
        }
        out
    }

    fn combine(
        &self,
        other: &FockOperator,
        f: impl Fn(&DMatrix<Complex64>, &DMatrix<Complex64>) -> DMatrix<Complex64>,
    ) -> FockOperator {
        assert_eq!(self.space, other.space, "operators live on different spaces");
        let part = self.part.join(&other.part);
        let a = self.embed(&part);
        let b = other.embed(&part);
        let blocks = a.iter().zip(&b).map(|(x, y)| f(x, y)).collect();
        FockOperator {
            space: self.space,
            part,
            blocks,
        }
    }

    pub fn mul(&self, other: &FockOperator) -> FockOperator {
        self.combine(other, |a, b| a * b)
    }

    pub fn add(&self, other: &FockOperator) -> FockOperator {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &FockOperator) -> FockOperator {
        self.combine(other, |a, b| a - b)
    }

    pub fn commutator(&self, other: &FockOperator) -> FockOperator {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn scale(&self, c: Complex64) -> FockOperator {
        FockOperator {
            space: self.space,
            part: self.part.clone(),
            blocks: self.blocks.iter().map(|b| b * c).collect(),
        }
    }

    pub fn adjoint(&self) -> FockOperator {
        FockOperator {
            space: self.space,
            part: self.part.clone(),
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    pub fn expm(&self) -> FockOperator {
        FockOperator {
            space: self.space,
            part: self.part.clone(),
            blocks: self.blocks.iter().map(expm).collect(),
        }
    }

    pub fn apply(&self, state: &FockState) -> FockState {
        assert_eq!(self.space, state.space, "operator and state live on different spaces");
        let mut out = vec![ZERO; self.space.dim];
        for (group, block) in self.part.groups.iter().zip(&self.blocks) {
            let v = DVector::from_iterator(group.len(), group.iter().map(|&i| state.amplitudes[i]));
            let w = block * v;
            for (k, &i) in group.iter().enumerate() {
                out[i] = w[k];
            }
        }
        FockState {
            space: self.space,
            amplitudes: out,
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.space.dim, self.space.dim);
        for (group, block) in self.part.groups.iter().zip(&self.blocks) {
            for (j, &gj) in group.iter().enumerate() {
                for (i, &gi) in group.iter().enumerate() {
                    m[(gi, gj)] = block[(i, j)];
                }
            }
        }
        m
    }

    /// Max `|A_ij - B_ij|` over rows and columns accepted by `keep`.
    pub fn max_abs_diff_where(&self, other: &FockOperator, keep: impl Fn(usize) -> bool) -> f64 {
        let diff = self.sub(other);
        let mut worst = 0.0f64;
        for (group, block) in diff.part.groups.iter().zip(&diff.blocks) {
            for (j, &gj) in group.iter().enumerate() {
                if !keep(gj) {
                    continue;
                }
                for (i, &gi) in group.iter().enumerate() {
                    if keep(gi) {
                        worst = worst.max(block[(i, j)].norm());
                    }
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    pub space: FockSpace,
    pub amplitudes: Vec<Complex64>,
}

impl FockState {
    pub fn basis(space: FockSpace, n1: usize, n2: usize) -> Self {
        let mut amplitudes = vec![ZERO; space.dim];
        amplitudes[space.index(n1, n2)] = ONE;
        FockState { space, amplitudes }
    }

    pub fn vacuum(space: FockSpace) -> Self {
        Self::basis(space, 0, 0)
    }

    pub fn amplitude(&self, n1: usize, n2: usize) -> Complex64 {
        self.amplitudes[self.space.index(n1, n2)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Largest amplitude difference over basis states accepted by `keep`.
    pub fn max_abs_diff_where(&self, other: &FockState, keep: impl Fn(usize) -> bool) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, (a, b))| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// `(b, b†)` of one mode.
pub fn mode_ops(space: FockSpace, mode: Port) -> (FockOperator, FockOperator) {
    (
        FockOperator::word(space, ONE, &[Ladder::Annihilate(mode)]),
        FockOperator::word(space, ONE, &[Ladder::Create(mode)]),
    )
}

pub fn number(space: FockSpace, mode: Port) -> FockOperator {
    FockOperator::word(space, ONE, &[Ladder::Create(mode), Ladder::Annihilate(mode)])
}

/// `D(α) = exp(α b† - α* b)`.
pub fn displacement(space: FockSpace, mode: Port, alpha: Complex64) -> FockOperator {
    FockOperator::word(space, alpha, &[Ladder::Create(mode)])
        .sub(&FockOperator::word(space, alpha.conj(), &[Ladder::Annihilate(mode)]))
        .expm()
}

/// `S(ζ) = exp((ζ*/2) b² - (ζ/2) b†²)`.
pub fn squeeze(space: FockSpace, mode: Port, zeta: SqueezeParam) -> FockOperator {
    let z = zeta.zeta();
    FockOperator::word(
        space,
        z.conj() * 0.5,
        &[Ladder::Annihilate(mode), Ladder::Annihilate(mode)],
    )
    .sub(&FockOperator::word(
        space,
        z * 0.5,
        &[Ladder::Create(mode), Ladder::Create(mode)],
    ))
    .expm()
}

/// `U = exp(γ (b₁†b₂ - b₁b₂†))`, so that `U† b₁ U = cos γ b₁ + sin γ b₂`.
pub fn beamsplitter(space: FockSpace, gamma: f64) -> FockOperator {
    let g = Complex64::new(gamma, 0.0);
    FockOperator::word(space, g, &[Ladder::Create(Port::One), Ladder::Annihilate(Port::Two)])
        .sub(&FockOperator::word(
            space,
            g,
            &[Ladder::Annihilate(Port::One), Ladder::Create(Port::Two)],
        ))
        .expm()
}

/// Extra photons per mode carried by [`simulate`] beyond the reported cutoff.
pub fn working_padding(cutoff: usize) -> usize {
    (cutoff / 2).max(10)
}

/// `|P(n₁,n₂)|²` of `U S₂(ζ) D₁(α)|0,0⟩` for `n₁, n₂ <= cutoff`.
///
/// The evolution runs on a padded space so the boundary of the reported box is
/// not a reflecting wall; the mass that leaves the box is the truncation
/// defect, and exceeding [`TRUNCATION_BUDGET`] is an error.
pub fn simulate(alpha: CoherentParam, zeta: SqueezeParam, gamma: f64, cutoff: usize) -> Result<JointDistribution> {
    require(gamma.is_finite(), || format!("gamma must be finite, got {gamma}"))?;
    let work = FockSpace::new(cutoff + working_padding(cutoff));
    let state = FockState::vacuum(work);
    let state = displacement(work, Port::One, alpha.value()).apply(&state);
    let state = squeeze(work, Port::Two, zeta).apply(&state);
    let state = beamsplitter(work, gamma).apply(&state);

    let mut probs = Vec::with_capacity((cutoff + 1) * (cutoff + 1));
    for n1 in 0..=cutoff {
        for n2 in 0..=cutoff {
            probs.push(state.amplitude(n1, n2).norm_sqr());
        }
    }
    let defect = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    if defect > TRUNCATION_BUDGET {
        return Err(Error::TruncationExceeded {
            cutoff,
            defect,
            budget: TRUNCATION_BUDGET,
        });
    }
    Ok(JointDistribution {
        n1_max: cutoff,
        n2_max: cutoff,
        probs,
        truncation_defect: defect,
        params: SplitterParams::new(alpha, zeta, BeamSplitterAngle::new(gamma)?),
        coeffs: None,
        m1_cutoff: None,
    })
}

/// Reference table as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenTable {
    pub cutoff: usize,
    pub alpha: f64,
    pub r: f64,
    pub theta: f64,
    pub gamma: f64,
    pub rows: Vec<(usize, usize, f64)>,
}

impl GoldenTable {
    pub fn from_distribution(dist: &JointDistribution) -> Self {
        let mut rows = Vec::new();
        for n1 in 0..=dist.n1_max {
            for n2 in 0..=dist.n2_max {
                rows.push((n1, n2, dist.get(n1, n2)));
            }
        }
        GoldenTable {
            cutoff: dist.n1_max.max(dist.n2_max),
            alpha: dist.params.alpha.mag(),
            r: dist.params.squeeze.r(),
            theta: dist.params.squeeze.theta(),
            gamma: dist.params.gamma.gamma(),
            rows,
        }
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "# cutoff={}, alpha={}, r={}, theta={}, gamma={}",
            self.cutoff, self.alpha, self.r, self.theta, self.gamma
        )?;
        writeln!(out, "n1,n2,probability")?;
        for (n1, n2, p) in &self.rows {
            writeln!(out, "{n1},{n2},{p:.14e}")?;
        }
        Ok(())
    }

    pub fn read(input: impl BufRead) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParameter(format!("golden file: {msg}"));
        let mut header: Option<[f64; 5]> = None;
        let mut rows = Vec::new();
        for line in input.lines() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with("n1,") {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let mut vals = [f64::NAN; 5];
                for field in meta.split(',') {
                    let Some((key, value)) = field.split_once('=') else {
                        continue;
                    };
                    let slot = match key.trim() {
                        "cutoff" => 0,
                        "alpha" => 1,
                        "r" => 2,
                        "theta" => 3,
                        "gamma" => 4,
                        _ => continue,
                    };
                    vals[slot] = value
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("bad value in {field:?}")))?;
                }
                if vals.iter().all(|v| v.is_finite()) {
                    header = Some(vals);
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(bad(format!("expected 3 columns in {line:?}")));
            }
            let parse_n = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(format!("bad index {s:?}")));
            let p = cols[2]
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("bad probability {:?}", cols[2])))?;
            rows.push((parse_n(cols[0])?, parse_n(cols[1])?, p));
        }
        let [cutoff, alpha, r, theta, gamma] = header.ok_or_else(|| bad("missing header".to_string()))?;
        Ok(GoldenTable {
            cutoff: cutoff as usize,
            alpha,
            r,
            theta,
            gamma,
            rows,
        })
    }
}
