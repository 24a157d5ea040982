use proptest::prelude::*;
use wattn_core::measures::{barycenter, empirical, project_dirac};
use wattn_core::{DomainBox, EmpiricalMeasure, PointCloud};

fn cloud(d: usize) -> impl Strategy<Value = PointCloud> {
    (1usize..12).prop_flat_map(move |n| {
        proptest::collection::vec(-5.0f64..5.0, n * d).prop_map(move |v| PointCloud::new(d, v).unwrap())
    })
}

fn cloud_and_perm(d: usize) -> impl Strategy<Value = (PointCloud, Vec<usize>)> {
    cloud(d).prop_flat_map(|c| {
        let n = c.len();
        (Just(c), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

#[test]
fn weights_near_one_are_renormalised() {
    let x = PointCloud::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
    let mu = EmpiricalMeasure::new(x.clone(), vec![0.5, 0.5 + 5e-13]).unwrap();
    assert!((mu.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-15);
    assert!(EmpiricalMeasure::new(x.clone(), vec![0.5, 0.6]).is_err());
    assert!(EmpiricalMeasure::new(x, vec![1.5, -0.5]).is_err());
}

#[test]
fn repeated_points_are_kept() {
    let x = PointCloud::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![3.0, 0.0]]).unwrap();
    let mu = empirical(x);
    assert_eq!(mu.len(), 3);
    let b = barycenter(&mu);
    assert!((b[0] - 5.0 / 3.0).abs() <= 1e-15 && (b[1] - 4.0 / 3.0).abs() <= 1e-15);
}

#[test]
fn dirac_projection_of_a_dirac_is_itself() {
    let d = EmpiricalMeasure::dirac(&[0.25, -3.0]).unwrap();
    let p = project_dirac(&d);
    assert_eq!(p.support().as_flat(), &[0.25, -3.0]);
    assert_eq!(p.weights(), &[1.0]);
}

proptest! {
    #[test]
    fn barycenter_is_permutation_invariant_bitwise((x, perm) in cloud_and_perm(3)) {
        let a = barycenter(&empirical(x.clone()));
        let b = barycenter(&empirical(x.permuted(&perm)));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn projection_is_idempotent(x in cloud(2)) {
        let once = project_dirac(&empirical(x));
        let twice = project_dirac(&once);
        prop_assert_eq!(once.support().as_flat(), twice.support().as_flat());
    }

    #[test]
    fn barycenter_stays_in_the_box(x in cloud(4)) {
        let b = DomainBox::bounding(&[&x]).unwrap();
        prop_assert!(b.contains(&barycenter(&empirical(x)), 1e-12));
    }

    #[test]
    fn barycenter_matches_plain_mean(x in cloud(2)) {
        let n = x.len() as f64;
        let b = barycenter(&empirical(x.clone()));
        for k in 0..2 {
            let mean = x.points().map(|p| p[k]).sum::<f64>() / n;
            prop_assert!((b[k] - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
        }
    }
}
