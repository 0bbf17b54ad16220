use ezbsde_core::constraint::ConstraintSet;
use proptest::prelude::*;

fn interval() -> impl Strategy<Value = ConstraintSet> {
    (-3.0..3.0f64, 0.0..3.0f64).prop_map(|(lo, w)| ConstraintSet::interval(lo, lo + w).unwrap())
}

fn union() -> impl Strategy<Value = ConstraintSet> {
    prop::collection::vec((-3.0..3.0f64, 0.0..1.0f64), 1..5)
        .prop_map(|p| ConstraintSet::union(p.into_iter().map(|(lo, w)| (lo, lo + w)).collect()).unwrap())
}

fn boxed() -> impl Strategy<Value = ConstraintSet> {
    prop::collection::vec((-3.0..3.0f64, 0.0..2.0f64), 1..4)
        .prop_map(|b| ConstraintSet::boxed(b.into_iter().map(|(lo, w)| (lo, lo + w)).collect()).unwrap())
}

fn finite() -> impl Strategy<Value = ConstraintSet> {
    (1usize..4).prop_flat_map(|d| {
        prop::collection::vec(prop::collection::vec(-3.0..3.0f64, d), 1..6)
            .prop_map(|p| ConstraintSet::finite(p).unwrap())
    })
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-6.0..6.0f64, dim)
}

fn with_point(s: impl Strategy<Value = ConstraintSet>) -> impl Strategy<Value = (ConstraintSet, Vec<f64>, Vec<f64>)> {
    s.prop_flat_map(|set| {
        let d = set.dim();
        (Just(set), point(d), point(d))
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_common(set: &ConstraintSet, u: &[f64]) -> Result<(), TestCaseError> {
    let p = set.project(u).unwrap();
    prop_assert!(set.contains(&p));
    let d = set.distance(u).unwrap();
    prop_assert!((dist(u, &p) - d).abs() <= 1e-14);
    prop_assert_eq!(set.project(&p).unwrap(), p.clone());
    prop_assert_eq!(d == 0.0, set.contains(u));
    let (_, cp) = set.bounded_element();
    prop_assert!(norm(&p) <= cp + 2.0 * norm(u) + 1e-12);
    Ok(())
}

fn check_convex(set: &ConstraintSet, u: &[f64], v: &[f64]) -> Result<(), TestCaseError> {
    let pu = set.project(u).unwrap();
    let pv = set.project(v).unwrap();
    prop_assert!(dist(&pu, &pv) <= dist(u, v) + 1e-12);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn interval_projection((set, u, v) in with_point(interval())) {
        check_common(&set, &u)?;
        check_convex(&set, &u, &v)?;
    }

    #[test]
    fn box_projection((set, u, v) in with_point(boxed())) {
        check_common(&set, &u)?;
        check_convex(&set, &u, &v)?;
    }

    #[test]
    fn full_projection(u in point(3), v in point(3)) {
        let set = ConstraintSet::full(3).unwrap();
        check_common(&set, &u)?;
        check_convex(&set, &u, &v)?;
    }

    #[test]
    fn union_projection((set, u, _v) in with_point(union())) {
        check_common(&set, &u)?;
    }

    #[test]
    fn finite_projection((set, u, _v) in with_point(finite())) {
        check_common(&set, &u)?;
    }
}

#[test]
fn union_tie_breaks_low() {
    let set = ConstraintSet::union(vec![(0.0, 0.1), (0.4, 0.5)]).unwrap();
    assert_eq!(set.project(&[0.25]).unwrap(), vec![0.1]);
    assert!((set.distance(&[0.25]).unwrap() - 0.15).abs() < 1e-15);
}
