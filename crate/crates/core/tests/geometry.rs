use neumann_rbf::geometry::{build_stencils, generate_nodes, reference_stencil, Domain2D, GenerateOptions};
use neumann_rbf::{NodeKind, Point};
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn stencils_partition_and_sort(s in 0.05f64..0.09, m_i in 8usize..25) {
        let nodes = generate_nodes(&Domain2D::test_domain(), s, &GenerateOptions::default()).unwrap();
        let stencils = build_stencils(&nodes, m_i).unwrap();
        prop_assert_eq!(stencils.len(), nodes.n_interior());
        for st in &stencils {
            prop_assert_eq!(st.m_i(), m_i);
            prop_assert!(st.interior.iter().all(|i| !st.boundary.contains(i)));
            prop_assert!(st.interior.iter().all(|&i| nodes.kind(i) == NodeKind::Interior));
            prop_assert!(st.boundary.iter().all(|&i| nodes.kind(i) == NodeKind::Boundary));
            let c = nodes.position(st.center);
            let d: Vec<f64> = st.interior.iter().map(|&i| (nodes.position(i) - c).norm()).collect();
            prop_assert!(d.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn generation_is_deterministic(s in 0.05f64..0.09) {
        let d = Domain2D::test_domain();
        let a = generate_nodes(&d, s, &GenerateOptions::default()).unwrap();
        let b = generate_nodes(&d, s, &GenerateOptions::default()).unwrap();
        prop_assert_eq!(a.positions(), b.positions());
        prop_assert_eq!(a.kinds(), b.kinds());
    }
}

proptest! {
    #[test]
    fn reference_normals_mirror(alpha in -FRAC_PI_2 + 1e-3..FRAC_PI_2 - 1e-3, s in 0.5f64..2.0) {
        let (a, sa) = reference_stencil(alpha, s);
        let (b, sb) = reference_stencil(-alpha, s);
        prop_assert_eq!(&sa.boundary, &sb.boundary);
        let mirror = |n: &Point| Point::new(-n.x, n.y);
        for &k in &sa.boundary {
            let p = a.position(k);
            prop_assert_eq!(p, b.position(k));
            // the fan at -alpha is the mirror image of the fan at alpha
            prop_assert!((b.normal(k) - mirror(a.normal(k))).norm() < 1e-12);
            // and each fan is symmetric about the vertical axis
            let j = sa.boundary.iter().copied().find(|&j| (a.position(j) - Point::new(-p.x, p.y)).norm() < 1e-12 * s);
            prop_assert!(j.is_some());
            prop_assert!((a.normal(j.unwrap()) - mirror(a.normal(k))).norm() < 1e-12);
        }
    }
}
