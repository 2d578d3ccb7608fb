//! Property tests for the solver invariants that hold across whole input
//! families rather than at single oracle points.

use contbvp_core::bvp::solve_dirichlet;
use contbvp_core::continuation::{winding_number, Rect};
use contbvp_core::fixed_point::{picard_solve, FnFamily, SolveOptions};
use contbvp_core::grid::{GridFn, PeriodicSignal, UniformGrid};
use contbvp_core::resonance::hausdorff_distance;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The Dirichlet solve respects the Green-function bound
    /// ||v|| <= (L^2/2) ||h|| up to an O(step^2) allowance.
    #[test]
    fn dirichlet_green_bound(
        a0 in -3.0f64..3.0,
        a1 in -3.0f64..3.0,
        a2 in -3.0f64..3.0,
        freq in 1.0f64..6.0,
        half_length in 0.5f64..2.0,
    ) {
        let grid = UniformGrid::symmetric(half_length, 201).unwrap();
        let h = GridFn::from_scalar_fn(grid, |t| {
            a0 + a1 * (freq * t).sin() + a2 * (0.5 * freq * t).cos()
        });
        let v = solve_dirichlet(&h).unwrap();
        let bound = 0.5 * half_length * half_length * h.sup_norm()
            + 10.0 * grid.step() * grid.step();
        prop_assert!(v.sup_norm() <= bound);
    }

    /// Winding numbers are invariant under positive scaling of the map and
    /// under boundary resolution doubling.
    #[test]
    fn winding_scaling_and_resolution_invariance(
        scale in 0.01f64..100.0,
        m00 in -2.0f64..2.0,
        m01 in -2.0f64..2.0,
        m10 in -2.0f64..2.0,
        m11 in -2.0f64..2.0,
    ) {
        let det = m00 * m11 - m01 * m10;
        prop_assume!(det.abs() > 0.05);
        let rect = Rect::centered(1.0, 1.0);
        let linear = move |p: [f64; 2]| [m00 * p[0] + m01 * p[1], m10 * p[0] + m11 * p[1]];
        let scaled = move |p: [f64; 2]| {
            let v = linear(p);
            [scale * v[0], scale * v[1]]
        };
        let base = winding_number(&linear, &rect, 128).unwrap();
        prop_assert_eq!(base, if det > 0.0 { 1 } else { -1 });
        prop_assert_eq!(winding_number(&scaled, &rect, 128).unwrap(), base);
        prop_assert_eq!(winding_number(&linear, &rect, 256).unwrap(), base);
    }

    /// Hausdorff distance is a symmetric pseudometric with the triangle
    /// inequality on finite point sets.
    #[test]
    fn hausdorff_metric_properties(
        xs in prop::collection::vec(-10.0f64..10.0, 1..8),
        ys in prop::collection::vec(-10.0f64..10.0, 1..8),
        zs in prop::collection::vec(-10.0f64..10.0, 1..8),
    ) {
        let as_points = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
        let (a, b, c) = (as_points(&xs), as_points(&ys), as_points(&zs));
        let dab = hausdorff_distance(&a, &b).unwrap();
        let dba = hausdorff_distance(&b, &a).unwrap();
        let dac = hausdorff_distance(&a, &c).unwrap();
        let dcb = hausdorff_distance(&c, &b).unwrap();
        prop_assert!((dab - dba).abs() <= 1e-12);
        prop_assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        prop_assert!(dab <= dac + dcb + 1e-12);
    }

    /// Rectangle-rule means are exact for constants and additive.
    #[test]
    fn periodic_mean_linearity(
        c0 in -5.0f64..5.0,
        amp in -2.0f64..2.0,
        period in 0.5f64..4.0,
    ) {
        let s1 = PeriodicSignal::constant(period, 64, c0).unwrap();
        let s2 = PeriodicSignal::from_scalar_fn(period, 64, |t| {
            amp * (2.0 * std::f64::consts::PI * t / period).sin()
        })
        .unwrap();
        let sum = s1.zip_map(&s2, |a, b| a + b);
        prop_assert!((sum.mean()[0] - (s1.mean()[0] + s2.mean()[0])).abs() <= 1e-12);
        prop_assert!((s1.mean()[0] - c0).abs() <= 1e-12);
    }

    /// Interpolation is exact at every node.
    #[test]
    fn gridfn_interpolation_node_exact(
        values in prop::collection::vec(-10.0f64..10.0, 8..32),
    ) {
        let grid = UniformGrid::new(0.0, 1.0, values.len()).unwrap();
        let f = GridFn::from_values(grid, 1, values.clone()).unwrap();
        for (k, t) in grid.nodes().enumerate() {
            prop_assert_eq!(f.eval_comp(t, 0), values[k]);
        }
    }

    /// Picard converges for every sampled affine contraction and lands on
    /// the unique fixed point b / (1 - m).
    #[test]
    fn picard_affine_contractions(
        slope in -0.9f64..0.9,
        intercept in -5.0f64..5.0,
        start in -10.0f64..10.0,
    ) {
        let grid = UniformGrid::new(0.0, 1.0, 11).unwrap();
        let fam = FnFamily {
            eval: move |_: &[f64], w: &GridFn| {
                let mut out = w.clone();
                for v in out.values_mut() {
                    *v = slope * *v + intercept;
                }
                Ok(out)
            },
            param_dim: 1,
            grid,
            dim: 1,
            radius: intercept.abs() / (1.0 - slope.abs()) + 1.0,
        };
        let v0 = GridFn::constant(grid, &[start]);
        let report = picard_solve(&fam, &[0.0], &v0, &SolveOptions::default()).unwrap();
        prop_assert!(report.converged);
        let fixed = intercept / (1.0 - slope);
        prop_assert!((report.solution.value(5, 0) - fixed).abs() <= 1e-8);
    }
}
