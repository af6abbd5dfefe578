use std::sync::Arc;

use proptest::prelude::*;

use tvflow::limit::{green_terms, FluxField};
use tvflow::mesh::{build_mesh, Domain, Field, Mesh, Resolution};
use tvflow::model::{
    diffusion_monotonicity, energy, energy_derivative, nehari_functional, nehari_scale, young_gap, Nonlinearity,
};
use tvflow::solver::{step, SolverConfig};

fn mesh_for(kind: u8) -> Arc<Mesh> {
    match kind % 3 {
        0 => build_mesh(Domain::Interval { length: 1.3 }, Resolution::Uniform(16)).unwrap(),
        1 => build_mesh(Domain::Rectangle { width: 1.0, height: 0.6 }, Resolution::Grid(5, 4)).unwrap(),
        _ => build_mesh(Domain::Annulus { inner: 0.5, outer: 2.0, dim: 3 }, Resolution::Uniform(16)).unwrap(),
    }
}

/// Nodal values in `[-1, 1]`, zero on the boundary.
fn dirichlet(mesh: &Arc<Mesh>, raw: &[f64]) -> Field {
    let values = (0..mesh.node_count())
        .map(|i| if mesh.is_boundary(i) { 0.0 } else { raw[i % raw.len()] })
        .collect();
    Field::new(Arc::clone(mesh), values).unwrap()
}

fn raw_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 40)
}

fn reaction() -> impl Strategy<Value = Nonlinearity> {
    prop_oneof![
        Just(Nonlinearity::Zero),
        (2.2f64..4.0).prop_map(|q| Nonlinearity::Power { q }),
        (2.2f64..3.0, 3.0f64..4.0).prop_map(|(q, s)| Nonlinearity::SumPowers { q, s }),
        (2.2f64..3.0, 0.1f64..1.0).prop_map(|(q, alpha)| Nonlinearity::ExpPower { q, alpha }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_matches_central_differences(
        kind in 0u8..3, a in raw_values(), b in raw_values(), p in 1.2f64..3.0, nl in reaction()
    ) {
        let mesh = mesh_for(kind);
        let u = dirichlet(&mesh, &a);
        let v = dirichlet(&mesh, &b);
        prop_assume!(!u.is_zero() && !v.is_zero());
        let h = 1e-5;
        let at = |s: f64| {
            let values = u.values().iter().zip(v.values()).map(|(x, y)| x + s * y).collect();
            energy(&Field::new(Arc::clone(&mesh), values).unwrap(), p, &nl).unwrap()
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let d = energy_derivative(&u, &v, p, &nl).unwrap();
        prop_assert!((fd - d).abs() <= 1e-5 * (1.0 + d.abs()), "fd {fd} vs {d}");
        let i = nehari_functional(&u, p, &nl).unwrap();
        let du = energy_derivative(&u, &u, p, &nl).unwrap();
        prop_assert!((du - i).abs() <= 1e-10 * (1.0 + i.abs()));
    }

    #[test]
    fn young_gap_is_non_negative(kind in 0u8..3, a in raw_values(), scale in 0.0f64..5.0, p in 1.001f64..2.5) {
        let mesh = mesh_for(kind);
        let u = dirichlet(&mesh, &a).scaled(scale);
        prop_assert!(young_gap(&u, p).unwrap() >= 0.0);
    }

    #[test]
    fn p_laplacian_is_monotone(kind in 0u8..3, a in raw_values(), b in raw_values(), p in 1.01f64..4.0) {
        let mesh = mesh_for(kind);
        let gap = diffusion_monotonicity(&dirichlet(&mesh, &a), &dirichlet(&mesh, &b), p).unwrap();
        prop_assert!(gap >= -1e-14);
    }

    #[test]
    fn nehari_scale_is_inverse_homogeneous(
        a in raw_values(), c in 0.05f64..20.0, p in 1.05f64..2.0, q in 2.1f64..4.0
    ) {
        let mesh = mesh_for(0);
        let phi = dirichlet(&mesh, &a);
        prop_assume!(!phi.is_zero());
        for nl in [Nonlinearity::Power { q }, Nonlinearity::SumPowers { q, s: q + 0.5 }] {
            let t = nehari_scale(&phi, p, &nl).unwrap();
            let tc = nehari_scale(&phi.scaled(c), p, &nl).unwrap();
            prop_assert!((tc * c - t).abs() <= 1e-9 * t, "{nl:?}: {t} vs {}", tc * c);
            prop_assert!(nehari_functional(&phi.scaled(t), p, &nl).unwrap().abs()
                <= 1e-8 * energy(&phi.scaled(t), p, &Nonlinearity::Zero).unwrap() * p);
        }
    }

    #[test]
    fn green_formula_is_exact(kind in 0u8..3, z in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 60), w in raw_values()) {
        let mesh = mesh_for(kind);
        let two_d = mesh.grad_dim() == 2;
        let vectors = (0..mesh.element_count())
            .map(|e| { let (x, y) = z[e % z.len()]; [x, if two_d { y } else { 0.0 }] })
            .collect();
        let flux = FluxField::from_vectors(Arc::clone(&mesh), vectors).unwrap();
        // w is not constrained on the boundary, so the trace term is exercised.
        let values = (0..mesh.node_count()).map(|i| w[i % w.len()]).collect();
        let (r, scale) = green_terms(&flux, &Field::new(Arc::clone(&mesh), values).unwrap()).unwrap();
        prop_assert!(r <= 1e-10 * scale.max(1e-300));
    }

    #[test]
    fn diffusion_step_contracts_l2(kind in 0u8..3, a in raw_values(), p in 1.05f64..3.0, dt in 1e-4f64..1e-1) {
        let mesh = mesh_for(kind);
        let u = dirichlet(&mesh, &a);
        let cfg = SolverConfig { p, adapt: false, ..SolverConfig::default() };
        let out = step(&u, dt, &cfg, &Nonlinearity::Zero).unwrap();
        prop_assert!(out.field.l2_norm() <= u.l2_norm() * (1.0 + 1e-12));
        prop_assert!(out.field.is_dirichlet());
    }
}

#[test]
fn zero_is_a_fixed_point() {
    for kind in 0..3 {
        let mesh = mesh_for(kind);
        let zero = Field::zeros(Arc::clone(&mesh));
        for nl in [Nonlinearity::Zero, Nonlinearity::Power { q: 3.0 }] {
            let cfg = SolverConfig { p: 1.3, ..SolverConfig::default() };
            let out = step(&zero, 1e-3, &cfg, &nl).unwrap();
            assert!(out.field.values().iter().all(|v| v.to_bits() == 0));
        }
    }
}
