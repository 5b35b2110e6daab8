//! Block engine against the dense Lindbladian on the whole Fock space.

mod common;

use faer::{c64, Mat};
use fluxladder::experiment::cross_check;
use fluxladder::full::{
    build_full_liouvillian_dense, embed_blocks, full_hamiltonian, full_steady_state, null_space_dimension,
    number_diagonal_part, number_offdiagonal_max, unvectorize, vectorize,
};
use fluxladder::model::build_hamiltonian;
use fluxladder::solver::{Method, SolverConfig};
use fluxladder::{BlockLiouvillian, DriveSpec, LadderSpec, SectorBasis};

#[test]
fn steady_states_match_on_random_parameters() {
    let mut rng = common::rng(11);
    for rungs in [2, 3] {
        for _ in 0..5 {
            let spec = common::random_spec(&mut rng, rungs);
            let drive = common::random_drive(&mut rng);
            let cmp = cross_check(&spec, &drive, &SolverConfig::default()).unwrap();
            assert!(cmp.trace_norm_difference <= 1e-9, "{cmp:?}");
            assert!(cmp.max_current_difference <= 1e-9, "{cmp:?}");
            assert!(cmp.max_density_difference <= 1e-9, "{cmp:?}");
            assert!(cmp.max_number_coherence <= 1e-12, "{cmp:?}");
        }
    }
}

#[test]
fn iterative_solver_agrees_with_the_oracle() {
    let mut rng = common::rng(12);
    let spec = common::random_spec(&mut rng, 3);
    let drive = common::random_drive(&mut rng);
    let cfg = SolverConfig::default().with_method(Method::IterativeLinear);
    let cmp = cross_check(&spec, &drive, &cfg).unwrap();
    assert!(cmp.discrepancy() <= 1e-9, "{cmp:?}");
}

#[test]
fn block_generator_is_the_restricted_full_generator() {
    let mut rng = common::rng(13);
    for rungs in [2, 3] {
        let spec = common::random_spec(&mut rng, rungs);
        let drive = common::random_drive(&mut rng);
        let full = build_full_liouvillian_dense(&spec, &drive).unwrap();
        let lop = BlockLiouvillian::new(spec, drive).unwrap();
        let rho = common::random_state(&mut rng, rungs);
        let via_blocks = embed_blocks(&lop.apply(&rho).unwrap()).unwrap();
        let via_full = unvectorize((&full * vectorize(embed_blocks(&rho).unwrap().as_ref())).as_ref());
        let diff = (&via_blocks - &via_full).norm_max();
        assert!(diff < 1e-12, "L={rungs}: {diff:e}");
    }
}

#[test]
fn sector_hamiltonians_are_blocks_of_the_full_one() {
    let spec = LadderSpec::new(3, 1.0, 0.7, 2.1).unwrap();
    let h = full_hamiltonian(&spec).unwrap();
    for n in 0..=6 {
        let b = SectorBasis::enumerate(3, n).unwrap();
        let hn = build_hamiltonian(&spec, &b).unwrap().to_dense();
        let st = b.states();
        for j in 0..b.dim() {
            for i in 0..b.dim() {
                let want = h[(st[i].bits() as usize, st[j].bits() as usize)];
                assert!((hn[(i, j)] - want).norm() < 1e-15);
            }
        }
    }
}

#[test]
fn full_steady_state_is_unique_and_number_diagonal() {
    let mut rng = common::rng(14);
    for _ in 0..3 {
        let spec = common::random_spec(&mut rng, 2);
        let drive = common::random_drive(&mut rng);
        let full = build_full_liouvillian_dense(&spec, &drive).unwrap();
        assert_eq!(null_space_dimension(&full, 1e-10).unwrap(), 1);
        let rho = full_steady_state(&full).unwrap();
        assert!(number_offdiagonal_max(rho.as_ref()) < 1e-13);
    }
}

#[test]
fn equilibrium_oracle_is_a_product_state() {
    let spec = LadderSpec::new(2, 1.0, 1.4, 0.8).unwrap();
    let drive = DriveSpec::new(1.3, 0.35, 0.35).unwrap();
    let rho = full_steady_state(&build_full_liouvillian_dense(&spec, &drive).unwrap()).unwrap();
    let d = rho.nrows();
    let want = Mat::from_fn(d, d, |i, j| {
        if i == j {
            let n = (i as u64).count_ones() as i32;
            c64::new(0.35f64.powi(n) * 0.65f64.powi(4 - n), 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    assert!((&rho - &want).norm_max() < 1e-13);
    let blocks = number_diagonal_part(rho.as_ref(), 2).unwrap();
    assert!((blocks.trace() - 1.0).abs() < 1e-13);
}
