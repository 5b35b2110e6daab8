use std::f64::consts::PI;

use fluxladder::spectra::{sector_spectrum, SectorSpectrum};
use fluxladder::LadderSpec;

fn spec(rungs: usize, k: f64, phi: f64) -> LadderSpec {
    LadderSpec::new(rungs, 1.0, k, phi).unwrap()
}

#[test]
fn single_particle_sector_is_the_hopping_matrix() {
    for &(l, k, phi) in &[(2, 1.0, 0.0), (4, 1.3, 2.2), (6, 0.5, PI)] {
        let s = spec(l, k, phi);
        let got = sector_spectrum(&s, 1).unwrap();
        // Oracle: the explicit one-particle adjacency matrix.
        let n = 2 * l;
        let h = faer::Mat::from_fn(n, n, |a, b| {
            let (ja, pa) = (a / 2 + 1, a % 2 + 1);
            let (jb, pb) = (b / 2 + 1, b % 2 + 1);
            if ja == jb && pa != pb {
                faer::c64::new(-k, 0.0)
            } else if pa == pb && jb == ja + 1 {
                -faer::c64::cis(s.leg_phase(pa))
            } else if pa == pb && ja == jb + 1 {
                -faer::c64::cis(-s.leg_phase(pa))
            } else {
                faer::c64::new(0.0, 0.0)
            }
        });
        let want = h.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let diff = got.energies.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "L={l}: {diff:e}");
    }
}

#[test]
fn l2_n1_at_zero_flux() {
    let s = sector_spectrum(&spec(2, 1.0, 0.0), 1).unwrap();
    // Legs symmetric/antisymmetric (∓K) times chain modes ∓J.
    let want = [-2.0, 0.0, 0.0, 2.0];
    for (a, b) in s.energies.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn traceless_and_reflection_symmetric() {
    for &(l, n, phi) in &[(4, 3, 0.4), (5, 4, PI / 2.0), (5, 5, 1.9)] {
        let s = sector_spectrum(&spec(l, 1.1, phi), n).unwrap();
        assert!(s.trace().abs() <= 1e-8 * s.dim() as f64);
        assert!(s.reflection_asymmetry() <= 1e-10, "{}", s.reflection_asymmetry());
        assert!(s.energies.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn flux_mirror_and_gauge_periodicity() {
    let at = |phi: f64| sector_spectrum(&spec(4, 0.9, phi), 3).unwrap();
    let a = at(1.1);
    assert!(a.max_difference(&at(2.0 * PI - 1.1)).unwrap() <= 1e-10);
    assert!(a.max_difference(&at(1.1 + 2.0 * PI)).unwrap() <= 1e-10);
}

#[test]
fn flux_is_a_gauge_choice_without_rungs() {
    let a: SectorSpectrum = sector_spectrum(&spec(4, 0.0, 0.0), 3).unwrap();
    let b = sector_spectrum(&spec(4, 0.0, 1.7), 3).unwrap();
    assert!(a.max_difference(&b).unwrap() <= 1e-10);
}

#[test]
fn one_rung() {
    let s = sector_spectrum(&spec(1, 0.8, 0.3), 1).unwrap();
    assert!((s.energies[0] + 0.8).abs() < 1e-14 && (s.energies[1] - 0.8).abs() < 1e-14);
}
