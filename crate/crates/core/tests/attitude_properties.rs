use nalgebra::Vector3;
use proptest::prelude::*;
use qattitude::attitude::{
    perturbation_dcm, quat_rate, quat_to_vec3, vec3_to_dcm, vec3_to_quat, AttitudeVec3, Representation,
};
use qattitude::Quaternion;

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-range..range).prop_map(Vector3::from)
}

fn axis() -> impl Strategy<Value = Vector3<f64>> {
    vec3(1.0).prop_filter("axis needs a direction", |v| v.norm() > 0.1).prop_map(|v| v.normalize())
}

fn attitude(max_angle: f64) -> impl Strategy<Value = Quaternion> {
    (axis(), 0.0..max_angle).prop_map(|(e, phi)| Quaternion::from_axis_angle(&e, phi))
}

fn rep() -> impl Strategy<Value = Representation> {
    prop::sample::select(Representation::ALL.to_vec())
}

proptest! {
    #[test]
    fn normalize_gives_unit_norm(v in prop::array::uniform4(-10.0..10.0f64)) {
        let q = Quaternion::from_vector4(&v.into());
        prop_assume!(q.norm() > 1e-3);
        prop_assert!((q.normalize().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn antipodal_quaternions_share_a_dcm(q in attitude(std::f64::consts::PI)) {
        let d = q.to_dcm().matrix() - q.scale(-1.0).to_dcm().matrix();
        prop_assert!(d.amax() < 1e-12);
    }

    #[test]
    fn dcm_is_a_proper_rotation(q in attitude(std::f64::consts::PI)) {
        let c = q.to_dcm();
        prop_assert!(c.orthonormality_error() < 1e-9);
        prop_assert!((c.matrix().determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn representations_agree_on_the_dcm(q in attitude(0.95 * std::f64::consts::PI), rep in rep()) {
        let v = quat_to_vec3(rep, &q).unwrap();
        let via_quat = vec3_to_quat(&v).to_dcm();
        let direct = vec3_to_dcm(&v).unwrap();
        prop_assert!((via_quat.matrix() - direct.matrix()).amax() < 1e-9);
    }

    #[test]
    fn kinematic_rate_matches_exact_propagation(a in vec3(1.0), w in vec3(5.0), rep in rep()) {
        let dt = 1e-4;
        let a = AttitudeVec3::new(rep, a).unwrap();
        let q = vec3_to_quat(&a);
        let euler = a.vector() + a.kinematic_rate(&w).unwrap() * dt;
        let exact = match w.try_normalize(0.0) {
            Some(e) => q.compose(&Quaternion::from_axis_angle(&e, w.norm() * dt)),
            None => q,
        };
        let b = quat_to_vec3(rep, &exact).unwrap();
        prop_assert!((euler - b.vector()).norm() < 1e-6 * (1.0 + w.norm()));
    }

    #[test]
    fn kinematics_agree_to_first_order(da in vec3(1e-3 / 3f64.sqrt()), w in vec3(1.7), rep in rep()) {
        let a = AttitudeVec3::new(rep, da).unwrap();
        let expected = w + da.cross(&w) * 0.5;
        prop_assert!((a.kinematic_rate(&w).unwrap() - expected).norm() < 1e-6);
    }

    #[test]
    fn quaternion_rate_is_orthogonal_to_q(q in attitude(std::f64::consts::PI), w in vec3(10.0)) {
        prop_assert!(q.as_vector4().dot(&quat_rate(&q, &w)).abs() < 1e-14);
    }

    #[test]
    fn second_order_dcm_is_shared(e in axis(), phi in 0.0..0.1f64, rep in rep()) {
        let q = Quaternion::from_axis_angle(&e, phi);
        let a = quat_to_vec3(rep, &q).unwrap();
        let exact = vec3_to_dcm(&a).unwrap();
        let approx = perturbation_dcm(a.vector(), 2);
        prop_assert!((exact.matrix() - approx.matrix()).amax() <= a.vector().norm().powi(3));
    }
}
