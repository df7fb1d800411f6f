mod common;

use pulsegrad_core::oracles::{
    augmented_gradient_rot, augmented_gradient_su2, augmented_quaternion_derivative,
    finite_difference, rotation_by_expm, su2_by_expm,
};
use pulsegrad_core::{
    d_quaternion, d_rotation_cartesian, quaternion_from_params, rotation_from_params,
    BasisFamily, RotationParams,
};

fn draws(seed: u64, n: usize, small: usize) -> Vec<RotationParams> {
    let mut r = common::rng(seed);
    (0..n)
        .map(|i| {
            let scale = if i < small { 1e-5 / 3f64.sqrt() } else { 3.0 };
            RotationParams::from_cartesian(
                scale * common::uniform(&mut r, -1.0, 1.0),
                scale * common::uniform(&mut r, -1.0, 1.0),
                scale * common::uniform(&mut r, -1.0, 1.0),
            )
        })
        .collect()
}

#[test]
fn rotation_derivatives_three_ways() {
    for p in draws(21, 1000, 100) {
        let analytic = d_rotation_cartesian(&p);
        for k in 0..3 {
            let exact = augmented_gradient_rot(&p, k);
            assert!((analytic[k] - exact).amax() < 1e-10, "{p:?} control {k}");
            let fd = finite_difference(
                |t| {
                    let mut v = p.vector();
                    v[k] = t;
                    *rotation_from_params(&RotationParams::from_cartesian(v.x, v.y, v.z)).matrix()
                },
                p.vector()[k],
                1e-6,
            );
            // central differences with h = 1e-6 are good to about 1e-9 here
            assert!((analytic[k] - fd).amax() < 1e-7);
            assert!((exact - fd).amax() < 1e-7);
        }
    }
}

#[test]
fn quaternion_derivatives_three_ways() {
    for p in draws(22, 1000, 100) {
        let analytic = d_quaternion(&p, BasisFamily::Cartesian);
        for k in 0..3 {
            let exact = augmented_quaternion_derivative(&p, k).to_array();
            let a = analytic[k].to_array();
            for c in 0..4 {
                assert!((a[c] - exact[c]).abs() < 1e-10, "{p:?} control {k} component {c}");
                let fd = finite_difference(
                    |t| {
                        let mut v = p.vector();
                        v[k] = t;
                        quaternion_from_params(&RotationParams::from_cartesian(v.x, v.y, v.z)).to_array()[c]
                    },
                    p.vector()[k],
                    1e-6,
                );
                assert!((a[c] - fd).abs() < 1e-7);
            }
        }
    }
}

#[test]
fn exponentials_reproduce_propagators() {
    for p in draws(23, 300, 30) {
        let r = rotation_from_params(&p);
        assert!((r.matrix() - rotation_by_expm(&p)).amax() < 1e-13);
        let u = su2_by_expm(&p);
        let q = quaternion_from_params(&p).to_su2();
        for i in 0..2 {
            for j in 0..2 {
                assert!((u[i][j] - q[i][j]).norm() < 1e-13);
            }
        }
    }
}

#[test]
fn su2_derivative_is_tangent() {
    for p in draws(24, 300, 30) {
        let u = su2_by_expm(&p);
        for k in 0..3 {
            let du = augmented_gradient_su2(&p, k);
            // U†dU + dU†U = 0
            for i in 0..2 {
                for j in 0..2 {
                    let mut s = num_complex::Complex64::new(0.0, 0.0);
                    for m in 0..2 {
                        s += u[m][i].conj() * du[m][j] + du[m][i].conj() * u[m][j];
                    }
                    assert!(s.norm() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn zero_rotation_derivatives_are_generators() {
    let p = RotationParams::from_cartesian(0.0, 0.0, 0.0);
    for k in 0..3 {
        let g = pulsegrad_core::oracles::so3_generator(k);
        assert_eq!(augmented_gradient_rot(&p, k), g);
        assert!((d_rotation_cartesian(&p)[k] - g).amax() == 0.0);
    }
}
