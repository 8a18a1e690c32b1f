use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shallow_shell::error::GeometryError;
use shallow_shell::geometry::{c2_distance, geometry_field, point_geometry, Surface};
use shallow_shell::study::{christoffel_error, derivative_error};
use shallow_shell::{Grid, Immersion, Rect};

fn catalog(t: f64) -> Vec<Surface> {
    vec![
        Surface::Plate,
        Surface::Paraboloid {
            t,
            kappa1: 1.0,
            kappa2: 1.0,
        },
        Surface::Paraboloid {
            t,
            kappa1: 2.0,
            kappa2: -0.5,
        },
        Surface::CylinderPatch { t },
        Surface::SinusoidalBump {
            t,
            k1: 1.0,
            k2: 1.0,
        },
        Surface::SinusoidalBump {
            t,
            k1: 2.0,
            k2: 1.0,
        },
    ]
}

#[test]
fn analytic_derivatives_match_richardson_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for domain in [Rect::unit(), Rect { l1: 2.0, l2: 0.5 }] {
        for t in [0.05, 0.2, 0.5] {
            for s in catalog(t) {
                let imm = Immersion::new(s, domain);
                for _ in 0..100 {
                    let y = [
                        rng.gen_range(0.01..0.99) * domain.l1,
                        rng.gen_range(0.01..0.99) * domain.l2,
                    ];
                    let e = derivative_error(&imm, y).unwrap();
                    assert!(e <= 1e-8, "{s:?} at {y:?}: {e}");
                }
            }
        }
    }
}

#[test]
fn christoffel_symbols_match_metric_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for s in catalog(0.3) {
        let imm = Immersion::new(s, Rect::unit());
        for _ in 0..50 {
            let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let e = christoffel_error(&imm, y).unwrap();
            assert!(e <= 1e-10, "{s:?}: {e}");
        }
    }
}

#[test]
fn paraboloid_curvature_closed_form() {
    let grid = Grid::unit(9).unwrap();
    for (t, k1, k2) in [(0.1, 1.0, 1.0), (0.2, 2.0, -1.0), (0.05, 0.5, 3.0)] {
        let imm = Immersion::new(
            Surface::Paraboloid {
                t,
                kappa1: k1,
                kappa2: k2,
            },
            Rect::unit(),
        );
        let field = geometry_field(&imm, &grid).unwrap();
        for j in 0..9 {
            for i in 0..9 {
                let [y1, y2] = grid.point(i, j);
                let q = 1.0 + t * t * (k1 * k1 * y1 * y1 + k2 * k2 * y2 * y2);
                let k = t * t * k1 * k2 / (q * q);
                assert!(
                    (field.at(i, j).k - k).abs() <= 1e-12,
                    "({i},{j}) {} vs {k}",
                    field.at(i, j).k
                );
            }
        }
    }
}

#[test]
fn cylinder_is_developable_and_bump_vanishes_on_edges() {
    let grid = Grid::unit(9).unwrap();
    let cyl = geometry_field(
        &Immersion::new(Surface::CylinderPatch { t: 0.7 }, Rect::unit()),
        &grid,
    )
    .unwrap();
    assert!(cyl.max_abs_curvature() < 1e-14);
    for p in &cyl.nodes {
        assert!((p.sqrt_a - 1.0).abs() < 1e-14);
        assert!((p.b[0][0] - 0.7).abs() < 1e-14);
    }
    let bump = Immersion::new(
        Surface::SinusoidalBump {
            t: 0.3,
            k1: 1.0,
            k2: 1.0,
        },
        Rect::unit(),
    );
    for y in [[0.0, 0.4], [1.0, 0.2], [0.5, 0.0], [0.3, 1.0]] {
        assert!(bump.eval(y).unwrap().value.z.abs() < 1e-15);
    }
}

#[test]
fn metric_inverse_is_accurate() {
    let grid = Grid::unit(17).unwrap();
    for s in catalog(0.5) {
        let field = geometry_field(&Immersion::new(s, Rect::unit()), &grid).unwrap();
        for p in &field.nodes {
            for a in 0..2 {
                for b in 0..2 {
                    let prod: f64 = (0..2).map(|c| p.a[a][c] * p.a_inv[c][b]).sum();
                    assert!((prod - if a == b { 1.0 } else { 0.0 }).abs() <= 1e-13);
                }
            }
        }
    }
}

#[test]
fn c2_distance_is_monotone_in_t() {
    let grid = Grid::unit(17).unwrap();
    for family in catalog(1.0).into_iter().skip(1) {
        let fam = Immersion::new(family, Rect::unit());
        let plate = fam.with_scale(0.0);
        let d: Vec<f64> = [0.4, 0.2, 0.1, 0.05, 0.0]
            .iter()
            .map(|&t| c2_distance(&fam.with_scale(t), &plate, &grid).unwrap())
            .collect();
        assert_eq!(d[4], 0.0);
        assert!(d.windows(2).all(|w| w[0] > w[1]), "{family:?}: {d:?}");
    }
}

#[test]
fn points_outside_the_domain_are_rejected() {
    let imm = Immersion::new(Surface::paraboloid(0.1), Rect::unit());
    assert!(matches!(
        imm.eval([1.5, 0.5]),
        Err(GeometryError::OutsideDomain(..))
    ));
    assert!(matches!(
        imm.eval([0.5, -0.1]),
        Err(GeometryError::OutsideDomain(..))
    ));
    assert!(point_geometry(&imm, [-1.0, 0.0]).is_err());
    let other = Grid::new(2.0, 1.0, 9, 9).unwrap();
    assert!(matches!(
        geometry_field(&imm, &other),
        Err(GeometryError::DomainMismatch(..))
    ));
}

#[test]
fn unknown_kind_is_rejected() {
    assert!(matches!(
        Surface::from_tag("torus", |_| None),
        Err(GeometryError::UnknownKind(_))
    ));
}

proptest! {
    #[test]
    fn plate_limit_of_every_family_is_flat(y1 in 0.0..1.0f64, y2 in 0.0..1.0f64) {
        for s in catalog(0.0) {
            let p = point_geometry(&Immersion::new(s, Rect::unit()), [y1, y2]).unwrap();
            prop_assert!((p.sqrt_a - 1.0).abs() < 1e-15);
            prop_assert!(p.b.iter().flatten().all(|v| v.abs() < 1e-15));
            prop_assert!(p.gamma.iter().flatten().flatten().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn normal_is_unit_and_orthogonal(t in 0.0..1.0f64, y1 in 0.0..1.0f64, y2 in 0.0..1.0f64) {
        for s in catalog(t) {
            let jet = Immersion::new(s, Rect::unit()).eval([y1, y2]).unwrap();
            let n = shallow_shell::geometry::unit_normal(&jet.grad).unwrap();
            prop_assert!((n.norm() - 1.0).abs() < 1e-14);
            prop_assert!(n.dot(&jet.grad[0]).abs() < 1e-14 && n.dot(&jet.grad[1]).abs() < 1e-14);
        }
    }
}
