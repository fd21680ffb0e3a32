mod common;

use ndarray::Array2;
use proptest::prelude::*;
use sfd_core::grid::{
    assemble_system, build_grid, incidence_apply, null_space_basis, partial_offset, rank_oracle,
    rank_oracle_without, BinGrid, DesignSystem, Weighting, MAX_ORACLE_ENTRIES,
};
use sfd_core::spectra::UniformSeries;
use sfd_core::Error;

/// floor(12 log2 j + 1/2) for j = 1..=64, evaluated at 60 decimal digits.
const OFFSETS_1_64: [u32; 64] = [
    0, 12, 19, 24, 28, 31, 34, 36, 38, 40, 42, 43, 44, 46, 47, 48, 49, 50, 51, 52, 53, 54, 54,
    55, 56, 56, 57, 58, 58, 59, 59, 60, 61, 61, 62, 62, 63, 63, 63, 64, 64, 65, 65, 66, 66, 66,
    67, 67, 67, 68, 68, 68, 69, 69, 69, 70, 70, 70, 71, 71, 71, 71, 72, 72,
];

fn full_system(notes: usize, partials: usize) -> DesignSystem {
    let u = UniformSeries::from_magnitudes("full", 65.406, Array2::ones((notes, partials)), 1e-5)
        .unwrap();
    assemble_system(&u, &build_grid(&u), Weighting::Uniform)
}

#[test]
fn offsets_match_high_precision_table() {
    for (k, &o) in OFFSETS_1_64.iter().enumerate() {
        assert_eq!(partial_offset(k as u32 + 1), o, "j={}", k + 1);
    }
    for j in 1..=512u32 {
        let o = partial_offset(j);
        if j.is_power_of_two() {
            assert_eq!(o, 12 * j.trailing_zeros());
        }
        if 2 * j <= 1024 {
            assert_eq!(partial_offset(2 * j), o + 12);
        }
    }
}

#[test]
fn figure_one_layout_matches_golden() {
    let sys = full_system(12, 16);
    assert_eq!((sys.row_count(), sys.col_count()), (192, 88));
    let golden = include_str!("golden/incidence_s12_k16.pbm");
    assert_eq!(sys.to_pbm(), golden);
}

#[test]
fn sizes_at_analysis_scale() {
    let sys = full_system(28, 32);
    assert_eq!(sys.grid().span(), 88);
    assert_eq!((sys.row_count(), sys.col_count()), (896, 148));
}

#[test]
fn column_sums() {
    let mut mags = Array2::ones((6, 9));
    mags[(2, 4)] = 0.0;
    mags[(5, 0)] = 0.0;
    let u = UniformSeries::from_magnitudes("m", 100.0, mags, 1e-5).unwrap();
    let sys = assemble_system(&u, &build_grid(&u), Weighting::Magnitude);
    let mut sums = vec![0usize; sys.col_count()];
    for ones in sys.incidence() {
        assert_eq!(ones.len(), 3);
        for c in ones {
            sums[c] += 1;
        }
    }
    for j in 0..9 {
        let usable = (0..6).filter(|&i| u.mask[(i, j)]).count();
        assert_eq!(sums[sys.p_col(j)], usable);
    }
    for i in 0..6 {
        let usable = (0..9).filter(|&j| u.mask[(i, j)]).count();
        assert_eq!(sums[sys.a_col(i)], usable);
    }
    let total: f64 = sys.rows().iter().map(|r| r.weight).sum();
    assert!((total - sys.row_count() as f64).abs() < 1e-12);
}

#[test]
fn small_kernel_contains_gauge_vectors() {
    // S=3, K=4: rows are 12, null vectors must annihilate M exactly and the
    // kernel dimension is what the exact rank says.
    let sys = full_system(3, 4);
    for v in null_space_basis(sys.grid()) {
        assert!(incidence_apply(&sys, &v).iter().all(|&x| x == 0));
    }
    let rank = rank_oracle(&sys).unwrap();
    assert!(rank <= sys.col_count() - 3);
}

#[test]
fn rank_bound_table() {
    for s in 2..=6 {
        for k in 2..=8 {
            let sys = full_system(s, k);
            let cols = sys.col_count();
            let rank = rank_oracle(&sys).unwrap();
            assert!(rank <= cols - 3, "S={s} K={k}: rank {rank} cols {cols}");
            let reduced = rank_oracle_without(&sys, &[sys.p_col(0)]).unwrap();
            assert!(reduced <= cols - 1 - 2, "S={s} K={k}: reduced rank {reduced}");
        }
    }
}

#[test]
fn figure_one_rank() {
    let sys = full_system(12, 16);
    // numpy SVD and sympy exact rank both give 84: the kernel is 4-dimensional here.
    assert_eq!(rank_oracle(&sys).unwrap(), 84);
    assert_eq!(rank_oracle_without(&sys, &[0]).unwrap(), 84);
}

#[test]
fn single_entry_rank() {
    let sys = full_system(1, 1);
    assert_eq!(sys.col_count(), 3);
    assert_eq!(rank_oracle(&sys).unwrap(), 1);
}

#[test]
fn oracle_size_guard() {
    let sys = full_system(120, 200);
    assert!(sys.row_count() * sys.col_count() > MAX_ORACLE_ENTRIES);
    assert!(matches!(rank_oracle(&sys), Err(Error::SizeGuard { .. })));
}

proptest! {
    #[test]
    fn null_vectors_on_masked_grids(
        s in 1usize..20,
        k in 1usize..24,
        seed in any::<u64>(),
    ) {
        let grid = BinGrid::with_mask(s, k, |i, j| {
            (i == 0) || (j == 0) || (seed.rotate_left((i * 7 + j) as u32 % 64) & 3 != 0)
        });
        let mags = Array2::from_shape_fn((s, k), |(i, j)| {
            if (i == 0) || (j == 0) || (seed.rotate_left((i * 7 + j) as u32 % 64) & 3 != 0) { 1.0 } else { 0.0 }
        });
        let u = UniformSeries::from_magnitudes("p", 100.0, mags, 1e-5).unwrap();
        prop_assert_eq!(&build_grid(&u), &grid);
        let sys = assemble_system(&u, &grid, Weighting::Uniform);
        for v in null_space_basis(&grid) {
            prop_assert!(incidence_apply(&sys, &v).iter().all(|&x| x == 0));
        }
        for r in sys.rows() {
            prop_assert_eq!(r.bin, grid.offsets()[r.partial] + r.note as u32 + 1);
        }
    }
}

#[test]
fn identifiable_sizes_have_three_gauge_directions() {
    // Deficiency cols - rank, checked against numpy SVD rank.
    for (s, k, deficiency) in [(3, 4, 7), (2, 2, 4), (6, 8, 5), (12, 16, 4), (13, 4, 3), (19, 3, 3), (14, 3, 8)] {
        let sys = full_system(s, k);
        assert_eq!(sys.col_count() - rank_oracle(&sys).unwrap(), deficiency, "S={s} K={k}");
    }
}
