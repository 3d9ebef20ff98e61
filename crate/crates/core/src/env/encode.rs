use crate::error::{Error, Result};
use crate::storage::Catalog;

pub const DEFAULT_VECTOR_DIM: usize = 100;

/// Separator code between tables: one past the largest predicate code.
pub fn separator(catalog: &Catalog) -> u32 {
    catalog.predicate_count() as u32 + 1
}

/// Fixed-length state vector: for each non-base table in creation order, its
/// constituent predicate codes followed by the separator; zero-padded.
pub fn encode_state(catalog: &Catalog, dim: usize) -> Result<Vec<u32>> {
    let sep = separator(catalog);
    let mut out = Vec::with_capacity(dim);
    for t in catalog.tables().skip(1) {
        out.extend_from_slice(&t.def.constituents);
        out.push(sep);
    }
    if out.len() > dim {
        return Err(Error::EncodingOverflow {
            needed: out.len(),
            dim,
        });
    }
    out.resize(dim, 0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::{Pos, PredColumn, PredJoin, Triple};

    fn catalog() -> Catalog {
        Catalog::from_triples(&[
            Triple::new("u", "type", "x"),
            Triple::new("u", "comment", "c"),
            Triple::new("c", "topic", "y"),
        ])
        .unwrap()
    }

    #[test]
    fn initial_state_is_all_zero() {
        let v = encode_state(&catalog(), DEFAULT_VECTOR_DIM).unwrap();
        assert_eq!(v, vec![0; 100]);
    }

    #[test]
    fn two_divides() {
        let mut c = catalog();
        c.divide(1).unwrap();
        c.divide(2).unwrap();
        let v = encode_state(&c, DEFAULT_VECTOR_DIM).unwrap();
        assert_eq!(&v[..5], &[1, 4, 2, 4, 0]);
        assert!(v[4..].iter().all(|&x| x == 0));
    }

    #[test]
    fn merged_table_lists_constituents_in_order() {
        let mut c = catalog();
        let t1 = c.divide(1).unwrap();
        let t2 = c.divide(2).unwrap();
        let ss = PredJoin::new(
            PredColumn { pred: 1, pos: Pos::S },
            PredColumn { pred: 2, pos: Pos::S },
        );
        c.merge_on(t1, t2, ss).unwrap();
        let v = encode_state(&c, 10).unwrap();
        assert_eq!(v, vec![1, 4, 2, 4, 1, 2, 4, 0, 0, 0]);
        // only the merged table
        let mut only = catalog();
        let a = only.divide(1).unwrap();
        let b = only.divide(2).unwrap();
        only.merge_on(a, b, ss).unwrap();
        let mut tail = encode_state(&only, 10).unwrap();
        tail.drain(..4);
        assert_eq!(&tail[..3], &[1, 2, 4]);
    }

    #[test]
    fn overflow_is_an_error() {
        let mut c = catalog();
        c.divide(1).unwrap();
        c.divide(2).unwrap();
        assert!(matches!(
            encode_state(&c, 3),
            Err(Error::EncodingOverflow { needed: 4, dim: 3 })
        ));
    }
}
