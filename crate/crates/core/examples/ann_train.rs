//! Trains the two-hidden-layer network on a small city and prints its
//! learning curve.

use ridehail::ann::{fit_mlp, MlpConfig};
use ridehail::data::{aggregate_to_slots, split_indices};
use ridehail::eval::rmse;
use ridehail::synth::{generate_requests, CityProfile};

fn main() -> ridehail::Result<()> {
    let city = generate_requests(&CityProfile::reduced(), 3, 6)?;
    let table = aggregate_to_slots(city.requests.iter().copied(), city.grid, &city.covariates)?;
    let (tr, va) = split_indices(table.n_rows(), 0.7, 6)?;
    let (train, valid) = (table.subset(&tr), table.subset(&va));
    // The default step size learns slowly on a city this small; it needs
    // a larger step and no dropout to get anywhere in 40 epochs.
    let config = MlpConfig {
        epochs: 40,
        learning_rate: 1e-3,
        dropout: [0.0, 0.0],
        seed: 6,
        ..Default::default()
    };
    let model = fit_mlp(&train, train.target(), &config, Some((&valid, valid.target())))?;
    for r in model.history.iter().step_by(5) {
        println!(
            "epoch {:>3}  lr {:.2e}  train {:6.2}  valid {:6.2}",
            r.epoch,
            r.learning_rate,
            r.train_rmse,
            r.valid_rmse.unwrap_or(f64::NAN)
        );
    }
    println!(
        "best epoch {}, input width {}, valid rmse {:.2}",
        model.best_epoch,
        model.encoder.width(),
        rmse(&model.predict_dataset(&valid), valid.target())?
    );
    Ok(())
}
