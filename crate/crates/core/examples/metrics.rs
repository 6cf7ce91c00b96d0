//! Confusion matrix and per-class metrics from raw label sequences,
//! including a class that is never predicted.

use feraug::eval::{confusion, per_class_metrics, EvaluationReport};

fn main() -> feraug::Result<()> {
    let truth = [0, 0, 1, 1, 2, 2, 3, 4, 5, 5];
    let pred = [0, 1, 1, 1, 2, 0, 3, 4, 5, 4];
    let cm = confusion(&truth, &pred)?;
    for row in cm.counts {
        println!("{row:?}");
    }
    println!("accuracy {:.3}", cm.accuracy());
    for m in per_class_metrics(&cm) {
        println!(
            "{:<10} precision {:.3} recall {:.3} f1 {:.3} support {}",
            m.emotion.name(),
            m.precision,
            m.recall,
            m.f1,
            m.support
        );
    }

    // Nothing is predicted as class 2 here, so its precision is undefined.
    let report = EvaluationReport::from_labels(&[0, 1, 2], &[0, 1, 1], "demo", "tiny")?;
    for flag in &report.flags {
        println!("flag: {flag}");
    }
    Ok(())
}
