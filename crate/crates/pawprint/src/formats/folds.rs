//! `image_id,identity,fold`, ascending by image id.

use pawprint_core::FoldAssignment;

use super::{finish, writer};

pub fn write_folds(folds: &FoldAssignment) -> String {
    let mut w = writer();
    w.write_record(["image_id", "identity", "fold"])
        .expect("in-memory write");
    for (id, fold) in folds.iter() {
        let identity = folds.identity_of(id).unwrap_or_default();
        w.write_record([id, identity, &fold.to_string()])
            .expect("in-memory write");
    }
    finish(w)
}
