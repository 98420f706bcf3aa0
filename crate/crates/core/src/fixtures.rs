//! Model operators used by the tests, the acceptance suite and the CLI.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};

use crate::asymptotics::{phase_rotation, unitary_conjugate};
use crate::expr::{build, parse, Expr};
use crate::symbol::{CMat, ExprMatrix, OperatorSpec};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Pauli matrix `k ∈ {1, 2, 3}`.
pub fn sigma(k: usize) -> CMat {
    let z = c(0.0, 0.0);
    let v = match k {
        1 => [z, c(1.0, 0.0), c(1.0, 0.0), z],
        2 => [z, c(0.0, -1.0), c(0.0, 1.0), z],
        3 => [c(1.0, 0.0), z, z, c(-1.0, 0.0)],
        _ => panic!("no Pauli matrix {k}"),
    };
    CMat::from_row_slice(2, 2, &v)
}

/// Spin-1 matrix `k ∈ {1, 2, 3}` in the `S_z` eigenbasis.
pub fn spin(k: usize) -> CMat {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let z = c(0.0, 0.0);
    let v = match k {
        1 => [z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z],
        2 => [z, c(0.0, -r), z, c(0.0, r), z, c(0.0, -r), z, c(0.0, r), z],
        3 => [c(1.0, 0.0), z, z, z, z, z, z, z, c(-1.0, 0.0)],
        _ => panic!("no spin matrix {k}"),
    };
    CMat::from_row_slice(3, 3, &v)
}

fn ex(s: &str) -> Expr {
    parse(s).expect("fixture expression")
}

/// `M · e` for a constant matrix and a scalar expression.
fn times(m: &CMat, e: &Expr) -> ExprMatrix {
    ExprMatrix::constant(m).map(|k| build::mul(k.clone(), e.clone()))
}

fn constant(m: &CMat) -> ExprMatrix {
    ExprMatrix::constant(m)
}

fn torus(name: &str, c: Vec<ExprMatrix>, v: ExprMatrix) -> OperatorSpec {
    OperatorSpec::from_torus(name, c, v).expect("fixture operator")
}

/// `-iσ₁∂₁ - iσ₂∂₂` on the 2-torus.
pub fn dirac() -> OperatorSpec {
    torus("dirac", vec![constant(&sigma(1)), constant(&sigma(2))], ExprMatrix::zeros(2))
}

/// Dirac plus `shift·I`.
pub fn shifted_dirac(shift: f64) -> OperatorSpec {
    let v = CMat::identity(2, 2) * c(shift, 0.0);
    torus("shifted dirac", vec![constant(&sigma(1)), constant(&sigma(2))], constant(&v))
}

/// `scale` times the Dirac operator.
pub fn scaled_dirac(scale: f64) -> OperatorSpec {
    let s = c(scale, 0.0);
    torus("scaled dirac", vec![constant(&(sigma(1) * s)), constant(&(sigma(2) * s))], ExprMatrix::zeros(2))
}

/// `exp(i(0.4 sin x1 + 0.2 cos x2)σ₃)`.
pub fn sigma3_rotation() -> ExprMatrix {
    phase_rotation(&ex("0.4*sin(x1) + 0.2*cos(x2)"), &sigma(3))
}

/// Shifted Dirac (`0.3·I`) conjugated by [`sigma3_rotation`].
pub fn conjugated_shifted_dirac() -> OperatorSpec {
    let mut s = unitary_conjugate(&shifted_dirac(0.3), &sigma3_rotation()).expect("unitary");
    s.name = "conjugated shifted dirac".into();
    s
}

/// Variable-coefficient 2×2 torus operator whose eigenvectors are not
/// confined to a great circle, so the curvature does not vanish.
pub fn variable_dirac() -> OperatorSpec {
    let m = |rows: &[&[&str]]| ExprMatrix::parse(rows).expect("fixture");
    torus(
        "variable dirac",
        vec![
            m(&[&["0.3*cos(x1)", "1+0.2*cos(x2)"], &["1+0.2*cos(x2)", "-0.3*cos(x1)"]]),
            m(&[&["0.2*sin(x1)", "-i"], &["i", "-0.2*sin(x1)"]]),
        ],
        m(&[&["0.3", "0.1*sin(x2)"], &["0.1*sin(x2)", "0.3"]]),
    )
}

/// [`variable_dirac`] conjugated by [`sigma3_rotation`].
pub fn conjugated_variable_dirac() -> OperatorSpec {
    let mut s = unitary_conjugate(&variable_dirac(), &sigma3_rotation()).expect("unitary");
    s.name = "conjugated variable dirac".into();
    s
}

/// 2×2 operator on the 3-torus, a perturbed `σ·D`.
pub fn weyl_spatial() -> OperatorSpec {
    let c1 = constant(&sigma(1)).add(&times(&sigma(3), &ex("0.2*cos(x2)")));
    let c2 = constant(&sigma(2));
    let c3 = constant(&sigma(3)).add(&times(&sigma(1), &ex("0.2*sin(x1)")));
    let v = constant(&(CMat::identity(2, 2) * c(0.2, 0.0))).add(&times(&sigma(2), &ex("0.1*sin(x3)")));
    torus("weyl spatial", vec![c1, c2, c3], v)
}

fn spin_symbol(n: usize, radial: f64) -> ExprMatrix {
    let norm = (0..n).map(|a| format!("p{}^2", a + 1)).collect::<Vec<_>>().join(" + ");
    let mut a1 = times(&CMat::identity(3, 3), &ex(&format!("{radial}*sqrt({norm})")));
    for a in 0..n {
        a1 = a1.add(&times(&spin(a + 1), &ex(&format!("p{}", a + 1))));
    }
    a1
}

/// `S₁ξ₁ + S₂ξ₂ + 0.5|ξ|` with no lower-order part; not differential.
pub fn spin1_planar_raw() -> OperatorSpec {
    OperatorSpec::from_symbol("spin-1 planar (raw)", 2, spin_symbol(2, 0.5), ExprMatrix::zeros(3)).expect("fixture")
}

/// [`spin1_planar_raw`] with `A_sub = 0.2 S₃ + (0.1 + 0.05 cos x1) I`,
/// conjugated by `exp(i(0.3 sin x1 + 0.2 cos x2) S₁)`.
pub fn spin1_planar() -> OperatorSpec {
    let a_sub = constant(&(spin(3) * c(0.2, 0.0))).add(&times(&CMat::identity(3, 3), &ex("0.1 + 0.05*cos(x1)")));
    let base = OperatorSpec::from_subprincipal("spin-1 planar", 2, spin_symbol(2, 0.5), a_sub).expect("fixture");
    let r = phase_rotation(&ex("0.3*sin(x1) + 0.2*cos(x2)"), &spin(1));
    let mut s = unitary_conjugate(&base, &r).expect("unitary");
    s.name = "spin-1 planar".into();
    s
}

/// `S·ξ + 0.5|ξ|` on the 3-torus with `A_sub = 0.1 S₃ + 0.05 S₁ + 0.1 I`,
/// conjugated by `exp(i(0.3 sin x3 + 0.2 cos x1)(S₁ + 0.5 S₃))`.
pub fn spin1_spatial() -> OperatorSpec {
    let a_sub = constant(&(spin(3) * c(0.1, 0.0) + spin(1) * c(0.05, 0.0) + CMat::identity(3, 3) * c(0.1, 0.0)));
    let base = OperatorSpec::from_subprincipal("spin-1 spatial", 3, spin_symbol(3, 0.5), a_sub).expect("fixture");
    let gen = spin(1) + spin(3) * c(0.5, 0.0);
    let r = phase_rotation(&ex("0.3*sin(x3) + 0.2*cos(x1)"), &gen);
    let mut s = unitary_conjugate(&base, &r).expect("unitary");
    s.name = "spin-1 spatial".into();
    s
}

/// Every named fixture.
pub fn all() -> Vec<OperatorSpec> {
    vec![
        dirac(),
        shifted_dirac(0.3),
        conjugated_shifted_dirac(),
        variable_dirac(),
        conjugated_variable_dirac(),
        weyl_spatial(),
        spin1_planar(),
        spin1_spatial(),
    ]
}

/// Fixtures whose principal symbol is odd in `ξ` (differential operators).
pub fn differential() -> Vec<OperatorSpec> {
    vec![
        dirac(),
        shifted_dirac(0.3),
        conjugated_shifted_dirac(),
        variable_dirac(),
        conjugated_variable_dirac(),
        weyl_spatial(),
    ]
}

/// Torus-form fixtures on the 2-torus, usable by the Galerkin verifier.
pub fn planar_torus() -> Vec<OperatorSpec> {
    vec![dirac(), shifted_dirac(0.3), conjugated_shifted_dirac(), variable_dirac(), conjugated_variable_dirac()]
}

fn random_hermitian(rng: &mut impl Rng, m: usize) -> CMat {
    let g = CMat::from_fn(m, m, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&g + g.adjoint()) * c(0.5, 0.0)
}

fn random_wave(rng: &mut impl Rng, n: usize) -> Expr {
    let phase: f64 = rng.random_range(0.0..6.0);
    let mut arg = format!("{phase:.4}");
    for a in 0..n {
        let k: i32 = rng.random_range(-1..=1);
        if k != 0 {
            arg.push_str(&format!(" + {k}*x{}", a + 1));
        }
    }
    ex(&format!("cos({arg})"))
}

/// Seeded random operator: `m ∈ {2, 3}`, `n ∈ {2, 3}`, smooth `x`-dependence
/// in every coefficient. Even `m` gives a differential operator, `m = 3`
/// carries a `|ξ|` term.
pub fn random(seed: u64) -> OperatorSpec {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = 2 + (seed % 2) as usize;
    let n = 2 + ((seed / 2) % 2) as usize;
    let mut a1 = if m == 3 { spin_symbol(n, 0.5) } else { ExprMatrix::zeros(2) };
    for a in 0..n {
        let base = if m == 2 { sigma(a + 1) } else { CMat::zeros(3, 3) };
        let pert = random_hermitian(&mut rng, m) * c(0.08, 0.0);
        let wave = random_wave(&mut rng, n);
        let p = ex(&format!("p{}", a + 1));
        a1 = a1.add(&times(&base, &p)).add(&times(&pert, &build::mul(wave, p)));
    }
    let a_sub = constant(&(random_hermitian(&mut rng, m) * c(0.3, 0.0)))
        .add(&times(&(random_hermitian(&mut rng, m) * c(0.2, 0.0)), &random_wave(&mut rng, n)));
    OperatorSpec::from_subprincipal(&format!("random {seed}"), n, a1, a_sub).expect("random fixture")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_fixtures_validate() {
        let specs = all();
        assert_eq!(specs.len(), 8);
        for s in &specs {
            assert!(s.m_plus().unwrap() > 0, "{}", s.name);
        }
        for seed in 0..12 {
            let s = random(seed);
            assert_eq!((s.m(), s.n()), (2 + (seed % 2) as usize, 2 + ((seed / 2) % 2) as usize));
        }
    }

    #[test]
    fn spin_matrices_satisfy_commutation() {
        let i = c(0.0, 1.0);
        let (sx, sy, sz) = (spin(1), spin(2), spin(3));
        assert!((&sx * &sy - &sy * &sx - &sz * i).norm() < 1e-15);
        let (px, py, pz) = (sigma(1), sigma(2), sigma(3));
        assert!((&px * &py - &py * &px - &pz * (i * 2.0)).norm() < 1e-15);
    }
}
