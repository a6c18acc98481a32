//! Runs the whole pipeline into a temporary directory and prints the
//! model comparison table.

use ridehail::kv::KeyValues;
use ridehail::pipeline::{run_aggregate, run_compare, run_synth, SLOT_TABLE};

fn main() -> ridehail::Result<()> {
    let root = std::env::temp_dir().join("ridehail-compare-example");
    let seed = 11;
    run_synth(&root.join("city"), &KeyValues::parse("n_districts = 12\nn_days = 3")?, seed)?;
    run_aggregate(&root.join("city"), &root.join("table"), &KeyValues::default(), seed)?;
    let settings = KeyValues::parse("n_trees = 30\niterations = 200\nepochs = 20")?;
    let (_, reports) = run_compare(&root.join("table").join(SLOT_TABLE), &root.join("compare"), &settings, seed)?;
    print!("{}", ridehail::eval::comparison_table(&reports));
    for r in &reports {
        println!("{}: pooling residual {:.1e}", r.model, r.pooling_residual);
    }
    println!("artifacts in {}", root.display());
    Ok(())
}
