// Fit an RBF epsilon-SVR, certify it, and round-trip the model file.

use embmte::svr::{check_kkt, svr_train, Hyperparams, SolverOptions, SvrModel};

pub fn run_example() -> anyhow::Result<()> {
    let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 8.0 - 2.5]).collect();
    let y: Vec<f64> = x.iter().map(|v| v[0].sin()).collect();
    let params = Hyperparams::new(10.0, 0.01, 1.0)?;
    let model = svr_train(&x, &y, &params, &SolverOptions::default())?;
    println!(
        "{params}: {} support vectors, bias {:.4}",
        model.support_vectors().len(),
        model.bias()
    );

    let kkt = check_kkt(&model, &x, &y, 1e-3)?;
    println!("KKT max violation {:.2e}, passed = {}", kkt.max_violation, kkt.passed);
    assert!(kkt.passed);

    let probe = [0.3];
    println!("f(0.3) = {:.4}, sin(0.3) = {:.4}", model.predict(&probe)?, 0.3f64.sin());

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("sine.svr1");
    model.save(&path)?;
    let back = SvrModel::load(&path)?;
    assert_eq!(back.predict(&probe)?, model.predict(&probe)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
