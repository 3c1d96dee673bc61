use faddeev1d::analysis::prepare;
use faddeev1d::config::RunConfig;
use faddeev1d::faddeev::{Symmetry, ThreeBodyState};
use faddeev1d::potentials::Shape;
use faddeev1d::wavefunction::{fidelity, Reconstruction, WaveField2D};
use faer::Mat;
use proptest::prelude::*;

const EXTENT: f64 = 6.0;
const RES: usize = 41;

struct Contact {
    prepared: faddeev1d::analysis::Prepared,
    states: Vec<ThreeBodyState>,
}

fn contact(e2: f64) -> Contact {
    let prepared = prepare(&RunConfig::default(), Shape::Contact, 0, e2, None).unwrap();
    let states = prepared.states().unwrap();
    Contact { prepared, states }
}

fn field(c: &Contact, n: usize) -> WaveField2D {
    Reconstruction::new(&c.prepared.solver, &c.states[n]).unwrap().sample_field(EXTENT, RES).unwrap()
}

#[test]
fn fields_are_normalized_and_exchange_symmetric() {
    let c = contact(-1e-3);
    for n in 0..c.states.len() {
        let f = field(&c, n);
        assert!((f.norm() - 1.0).abs() < 1e-6, "n = {n}");
        assert!(f.exchange_defect() < 1e-8, "n = {n}: {}", f.exchange_defect());
        let mid = RES / 2;
        assert_eq!(f.k23[mid], 0.0);
        if c.states[n].symmetry == Symmetry::Fermion {
            for j in 0..RES {
                assert!(f.values[(j, mid)].abs() < 1e-8, "n = {n}");
            }
        }
    }
}

#[test]
fn boson_field_is_flat_across_the_mirror_line() {
    let c = contact(-1e-3);
    let rec = Reconstruction::new(&c.prepared.solver, &c.states[0]).unwrap();
    let h = 1e-4;
    for p1 in [-1.0, 0.0, 0.4, 2.0] {
        let d = (rec.total_psi(h, p1).unwrap() - rec.total_psi(-h, p1).unwrap()) / (2.0 * h);
        let scale = rec.total_psi(0.0, p1).unwrap().abs().max(1e-12);
        assert!(d.abs() < 1e-8 * scale / h, "P1 = {p1}: {d}");
    }
}

#[test]
fn samples_match_pointwise_evaluation() {
    let c = contact(-1e-3);
    let rec = Reconstruction::new(&c.prepared.solver, &c.states[1]).unwrap();
    let f = rec.sample_field(EXTENT, RES).unwrap();
    let scale = f.raw_norm.sqrt();
    for &(i, j) in &[(0, 0), (3, 17), (20, 20), (33, 8), (40, 40)] {
        let want = rec.total_psi(f.k23[i], f.p1[j]).unwrap() / scale;
        let got = f.values[(j, i)];
        assert!((got.abs() - want.abs()).abs() < 1e-12 * f.values.norm_max(), "({i}, {j})");
    }
}

#[test]
fn channel_functions_reproduce_themselves() {
    let c = contact(-1e-3);
    for st in &c.states {
        let rec = Reconstruction::new(&c.prepared.solver, st).unwrap();
        assert!(rec.self_consistency().unwrap() < 1e-6, "n = {}", st.n);
    }
}

#[test]
fn component_decays_at_large_pair_momentum() {
    let c = contact(-1e-3);
    let rec = Reconstruction::new(&c.prepared.solver, &c.states[0]).unwrap();
    let a = rec.faddeev_component(1.0, 0.01).unwrap().abs();
    let b = rec.faddeev_component(10.0, 0.01).unwrap().abs();
    assert!(b <= 1.01 * a / 100.0, "{a} {b}");
}

#[test]
fn fidelity_identities() {
    let c = contact(-1e-3);
    let b0 = field(&c, 0);
    let f1 = field(&c, 1);
    let b2 = field(&c, 2);
    assert!((fidelity(&b0, &b0).unwrap() - 1.0).abs() < 1e-10);
    assert!(fidelity(&b0, &f1).unwrap() < 1e-10);
    assert!((fidelity(&b0, &b2).unwrap() - fidelity(&b2, &b0).unwrap()).abs() < 1e-15);
    let flipped = WaveField2D::new(
        b2.k23.clone(),
        b2.p1.clone(),
        Mat::from_fn(RES, RES, |j, i| -b2.values[(j, i)]),
        b2.symmetry,
    )
    .unwrap();
    let direct = fidelity(&b0, &b2).unwrap();
    assert!((fidelity(&b0, &flipped).unwrap() - direct).abs() < 1e-15);
    let coarse =
        Reconstruction::new(&c.prepared.solver, &c.states[0]).unwrap().sample_field(EXTENT, 21).unwrap();
    assert!(fidelity(&b0, &coarse).is_err());
}

#[test]
fn contact_fields_are_scale_free() {
    let a = contact(-1e-3);
    let b = contact(-1e-5);
    for n in 0..a.states.len() {
        let (fa, fb) = (field(&a, n), field(&b, n));
        let worst = (0..RES)
            .flat_map(|j| (0..RES).map(move |i| (j, i)))
            .map(|ji| (fa.values[ji] - fb.values[ji]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6 * fa.values.norm_max(), "n = {n}: {worst}");
    }
}

#[test]
fn csv_round_trip() {
    let c = contact(-1e-3);
    for n in [0, 1] {
        let f = field(&c, n);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("K23,P1,psi\n"));
        let back = WaveField2D::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.symmetry, f.symmetry);
        assert_eq!(back.k23, f.k23);
        assert!((fidelity(&back, &f).unwrap() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fidelity_is_symmetric_and_bounded(seed_a in prop::collection::vec(-1.0f64..1.0, 25),
                                         seed_b in prop::collection::vec(-1.0f64..1.0, 25),
                                         sa in any::<bool>(), sb in any::<bool>()) {
        prop_assume!(seed_a.iter().any(|x| x.abs() > 0.1) && seed_b.iter().any(|x| x.abs() > 0.1));
        let axis: Vec<f64> = (0..5).map(|i| -1.0 + 0.5 * i as f64).collect();
        let make = |s: &[f64], flip: bool| {
            let sign = if flip { -1.0 } else { 1.0 };
            WaveField2D::new(axis.clone(), axis.clone(), Mat::from_fn(5, 5, |j, i| sign * s[5 * j + i]), Symmetry::Boson).unwrap()
        };
        let (a, b) = (make(&seed_a, false), make(&seed_b, false));
        let f = fidelity(&a, &b).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        prop_assert!((f - fidelity(&b, &a).unwrap()).abs() < 1e-15);
        let g = fidelity(&make(&seed_a, sa), &make(&seed_b, sb)).unwrap();
        prop_assert!((f - g).abs() < 1e-15);
    }
}
