//! Finite binary operations: group tables, Latin squares, isotopies and the
//! brute-force oracles that decide isotopy to a group.

mod isotopy;
mod random;
mod table;

pub use isotopy::{
    apply_isotopy, exhaustive_isotopy_check, is_isotopic_to_group, principal_loop_isotope, Isotopy,
    EXHAUSTIVE_MAX_N,
};
pub use random::{find_nonassociative_quasigroup, random_latin_square};
pub use table::{
    cyclic_group, dihedral_group, direct_product, is_associative, is_commutative, is_latin, klein_four,
    CayleyTable,
};

/// Every group of order `n <= 5` up to isomorphism.
pub fn groups_up_to_order_five(n: usize) -> Vec<CayleyTable> {
    match n {
        1..=3 | 5 => vec![cyclic_group(n).expect("valid order")],
        4 => vec![cyclic_group(4).expect("valid order"), klein_four()],
        _ => Vec::new(),
    }
}
