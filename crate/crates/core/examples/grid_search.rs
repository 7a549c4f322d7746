// Choose hyperparameters by cross-validated Pearson correlation.

use embmte::svr::{grid_search, product, CvObjective, SolverOptions};

pub fn run_example() -> anyhow::Result<()> {
    let x: Vec<Vec<f64>> = (0..120)
        .map(|i| {
            let a = i as f64 * 0.05;
            vec![a.cos(), (2.0 * a).sin()]
        })
        .collect();
    let y: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| v[0] * v[1] + 0.02 * ((i * 37 % 11) as f64 - 5.0))
        .collect();

    let grid = product(&[0.1, 10.0], &[0.01, 0.1], &[0.1, 10.0]);
    let cv = grid_search(&x, &y, &grid, 5, 42, CvObjective::Pearson, &SolverOptions::default())?;
    print!("{}", cv.to_tsv());
    println!("best: {} (mean r = {:.3})", cv.best, cv.best_row().mean_score);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
