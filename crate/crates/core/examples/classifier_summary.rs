//! Prints the layer table of the default classifier and of a shrunken
//! variant.

use feraug::model::{render_summary, ClassifierSpec};

fn main() {
    let spec = ClassifierSpec::default();
    println!("{}", render_summary(&spec.summary()));

    let small = ClassifierSpec::shrunken(32, [8, 8, 16, 16], 32);
    println!();
    println!("{}", render_summary(&small.summary()));
}
