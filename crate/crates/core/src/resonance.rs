//! Exact decision of whether `σ_{L_r}(τ, j) = 0` for all `r` has infinitely
//! many integer solutions, for affine rational systems.
//!
//! The real and imaginary parts of every symbol give integer linear equations
//! in `(τ, λ)`. Column Hermite reduction yields all integer solutions as
//! `x_0 + K ℤ^k`; the attainable `λ` then form a progression `λ_0 + g ℤ` that
//! is intersected with the eigenvalue set.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::eigen::{harmonic_multiplicity, EigenProvider};
use crate::scalar::Real;
use crate::symbols::SystemSpec;

/// Outcome of the exact resonance analysis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Resonance {
    /// `𝒩` is finite with this many `(τ, j)` pairs.
    FiniteCertified { count: u128 },
    InfiniteCertified,
    Undecided { reason: String },
}

impl Resonance {
    fn undecided(reason: impl Into<String>) -> Self {
        Resonance::Undecided { reason: reason.into() }
    }
}

/// Decides finiteness of `𝒩` exactly; non-affine or non-rational data is
/// `Undecided`.
pub fn resonance_exact<T: Real>(spec: &SystemSpec<T>) -> Resonance {
    let Some(forms) = spec.affine_forms() else {
        return Resonance::undecided("a time symbol is not affine in τ");
    };
    if !forms.iter().all(|f| f.is_exact()) {
        return Resonance::undecided("coefficients are not exact rationals");
    }
    let family = match Family::of(&spec.eigen) {
        Some(f) => f,
        None if spec.eigen.is_exact() => Family::Table,
        None => return Resonance::undecided("eigenvalues are not exact rationals"),
    };
    let m = spec.params.m;
    // rows over the unknowns (τ_1..τ_m, λ) with right-hand side
    let mut rows: Vec<Vec<BigRational>> = Vec::new();
    let mut rhs: Vec<BigRational> = Vec::new();
    for f in &forms {
        let c0 = f.constant.exact.as_ref().expect("exact");
        let d = f.d.exact.as_ref().expect("exact");
        for part in 0..2 {
            let pick = |z: &crate::exact::ExactComplex| if part == 0 { z.re.clone() } else { z.im.clone() };
            let mut row: Vec<BigRational> = f.linear.iter().map(|c| pick(c.exact.as_ref().expect("exact"))).collect();
            row.push(pick(d));
            rows.push(row);
            rhs.push(-pick(c0));
        }
    }
    let (int_rows, int_rhs) = integerise(&rows, &rhs);
    let Some(lattice) = solve_integer(&int_rows, &int_rhs, m + 1) else {
        return Resonance::FiniteCertified { count: 0 };
    };
    let lambda0 = lattice.particular[m].clone();
    let g = lattice.kernel.iter().fold(BigInt::zero(), |acc, k| acc.gcd(&k[m]));
    let rank = lattice.kernel.len();
    let tau_direction = rank >= 2 || (rank == 1 && g.is_zero());
    let progression = Progression { start: lambda0, step: g };
    if matches!(family, Family::Table) && !tau_direction {
        return Resonance::undecided("custom spectrum: finiteness of the zero set beyond the table is unknown");
    }
    if tau_direction {
        return match family.meets(&progression, spec) {
            Meet::Infinite | Meet::Finite(1..) => Resonance::InfiniteCertified,
            Meet::Finite(0) => Resonance::FiniteCertified { count: 0 },
            Meet::Unknown(r) => Resonance::Undecided { reason: r },
        };
    }
    match family.meets(&progression, spec) {
        Meet::Infinite => Resonance::InfiniteCertified,
        Meet::Finite(c) => Resonance::FiniteCertified { count: c },
        Meet::Unknown(r) => Resonance::Undecided { reason: r },
    }
}

/// `start + step·ℤ` (a single value when `step = 0`).
struct Progression {
    start: BigInt,
    step: BigInt,
}

enum Meet {
    Infinite,
    /// Number of indices `j` whose eigenvalue lies on the progression.
    Finite(u128),
    Unknown(String),
}

/// Eigenvalue sets with an exact arithmetic description:
/// `{ (n + 2k)^e : k ≥ 0 }` counted with the harmonic multiplicities.
enum Family {
    Harmonic { n: usize, exponent: u32 },
    Table,
}

impl Family {
    fn of(p: &EigenProvider) -> Option<Family> {
        match p {
            EigenProvider::Harmonic1D => Some(Family::Harmonic { n: 1, exponent: 1 }),
            EigenProvider::HarmonicND(n) => Some(Family::Harmonic { n: *n, exponent: 1 }),
            EigenProvider::PowerOf(base, e) => match Family::of(base)? {
                Family::Harmonic { n, exponent } => Some(Family::Harmonic { n, exponent: exponent * e }),
                Family::Table => None,
            },
            EigenProvider::Custom(_) => None,
        }
    }

    fn meets<T: Real>(&self, prog: &Progression, spec: &SystemSpec<T>) -> Meet {
        match self {
            Family::Harmonic { n, exponent } => harmonic_meets(*n, *exponent, prog),
            Family::Table => {
                // a finite table says nothing about the tail of the spectrum
                let Some(len) = spec.eigen.len() else {
                    return Meet::Unknown("eigenvalue table has no length".into());
                };
                for j in 0..len {
                    if let Ok(Some(l)) = spec.eigen.eigenvalue_exact(j) {
                        if l.is_integer() && on_progression(&l.to_integer(), prog) {
                            return Meet::Finite(1);
                        }
                    }
                }
                Meet::Unknown("custom spectrum: finiteness of the zero set beyond the table is unknown".into())
            }
        }
    }
}

fn on_progression(v: &BigInt, prog: &Progression) -> bool {
    if prog.step.is_zero() {
        *v == prog.start
    } else {
        (v - &prog.start).mod_floor(&prog.step).is_zero()
    }
}

fn harmonic_meets(n: usize, exponent: u32, prog: &Progression) -> Meet {
    let nb = BigInt::from(n as u64);
    if prog.step.is_zero() {
        // single value: count indices j with λ_j = start
        let v = &prog.start;
        let Some(mu) = integer_root(v, exponent) else { return Meet::Finite(0) };
        if mu < nb || (&mu - &nb).is_odd() {
            return Meet::Finite(0);
        }
        let k = ((&mu - &nb) / 2u32).to_u64();
        return match k {
            Some(k) => Meet::Finite(harmonic_multiplicity(n, k)),
            None => Meet::Unknown("eigenvalue multiplicity overflows".into()),
        };
    }
    let g = prog.step.abs();
    // μ = n + 2k; μ^e mod g has period g in k
    let Some(period) = g.to_u64() else {
        return Meet::Unknown("progression step too large".into());
    };
    if period > 10_000_000 {
        return Meet::Unknown("progression step too large".into());
    }
    let target = prog.start.mod_floor(&g);
    for k in 0..period {
        let mu = &nb + BigInt::from(2 * k);
        if mu.modpow(&BigInt::from(exponent), &g) == target {
            return Meet::Infinite;
        }
    }
    Meet::Finite(0)
}

/// Exact integer `e`-th root of `v`, if one exists.
fn integer_root(v: &BigInt, e: u32) -> Option<BigInt> {
    if v.is_negative() {
        return None;
    }
    let r = v.nth_root(e);
    (num_traits::pow(r.clone(), e as usize) == *v).then_some(r)
}

/// Clears denominators row by row.
fn integerise(rows: &[Vec<BigRational>], rhs: &[BigRational]) -> (Vec<Vec<BigInt>>, Vec<BigInt>) {
    let mut out_rows = Vec::new();
    let mut out_rhs = Vec::new();
    for (row, b) in rows.iter().zip(rhs) {
        let l = row.iter().chain(std::iter::once(b)).fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let scale = BigRational::from_integer(l);
        out_rows.push(row.iter().map(|x| (x * &scale).to_integer()).collect());
        out_rhs.push((b * &scale).to_integer());
    }
    (out_rows, out_rhs)
}

/// All integer solutions of `A x = b` as `particular + span_ℤ(kernel)`.
pub(crate) struct IntegerLattice {
    pub particular: Vec<BigInt>,
    pub kernel: Vec<Vec<BigInt>>,
}

/// Column-style Hermite reduction `A U = H` with `U` unimodular.
pub(crate) fn solve_integer(a: &[Vec<BigInt>], b: &[BigInt], n: usize) -> Option<IntegerLattice> {
    let mut h: Vec<Vec<BigInt>> = a.to_vec();
    let mut u: Vec<Vec<BigInt>> = (0..n).map(|i| (0..n).map(|j| BigInt::from((i == j) as u8)).collect()).collect();
    let col_op = |h: &mut Vec<Vec<BigInt>>, u: &mut Vec<Vec<BigInt>>, dst: usize, src: usize, q: &BigInt| {
        for row in h.iter_mut() {
            let v = &row[src] * q;
            row[dst] -= v;
        }
        for row in u.iter_mut() {
            let v = &row[src] * q;
            row[dst] -= v;
        }
    };
    let swap = |h: &mut Vec<Vec<BigInt>>, u: &mut Vec<Vec<BigInt>>, x: usize, y: usize| {
        for row in h.iter_mut() {
            row.swap(x, y);
        }
        for row in u.iter_mut() {
            row.swap(x, y);
        }
    };
    let mut pivots: Vec<Option<usize>> = Vec::with_capacity(h.len());
    let mut k = 0;
    for i in 0..h.len() {
        if k == n {
            pivots.push(None);
            continue;
        }
        loop {
            // smallest nonzero entry among columns k.. becomes the pivot
            let Some(p) = (k..n).filter(|&c| !h[i][c].is_zero()).min_by(|&x, &y| h[i][x].abs().cmp(&h[i][y].abs()))
            else {
                break;
            };
            swap(&mut h, &mut u, k, p);
            let mut done = true;
            for c in k + 1..n {
                if !h[i][c].is_zero() {
                    let q = h[i][c].div_floor(&h[i][k]);
                    col_op(&mut h, &mut u, c, k, &q);
                    if !h[i][c].is_zero() {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        if k < n && !h[i][k].is_zero() {
            pivots.push(Some(k));
            k += 1;
        } else {
            pivots.push(None);
        }
    }
    // forward substitution for y with H y = b
    let mut y = vec![BigInt::zero(); n];
    for (i, piv) in pivots.iter().enumerate() {
        let upto = piv.unwrap_or(k);
        let mut acc = BigInt::zero();
        for (c, yc) in y.iter().enumerate().take(upto) {
            acc += &h[i][c] * yc;
        }
        let rest = &b[i] - acc;
        match piv {
            Some(p) => {
                let (q, r) = rest.div_rem(&h[i][*p]);
                if !r.is_zero() {
                    return None;
                }
                y[*p] = q;
            }
            None => {
                if !rest.is_zero() {
                    return None;
                }
            }
        }
    }
    let particular: Vec<BigInt> =
        (0..n).map(|r| u[r].iter().zip(&y).fold(BigInt::zero(), |acc, (a, b)| acc + a * b)).collect();
    let kernel = (k..n).map(|c| (0..n).map(|r| u[r][c].clone()).collect()).collect();
    Some(IntegerLattice { particular, kernel })
}
