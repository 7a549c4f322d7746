// Match features for one segment, and why per-source layouts are equivalent.

use embmte::features::{block_permutation, fit_standardizer, match_features};

pub fn run_example() -> anyhow::Result<()> {
    let t = [0.5f32, -1.0, 2.0];
    let r = [0.5f32, 1.0, 0.0];
    let f = match_features(&t, &r)?;
    println!("[t ; r ; t*r ; |t-r|] = {:?}", f.values());

    // two sources of dims 2 and 1, concatenated before featurizing
    let split_a = match_features(&t[..2], &r[..2])?;
    let split_b = match_features(&t[2..], &r[2..])?;
    let split: Vec<f64> = split_a.iter().chain(split_b.iter()).copied().collect();
    let perm = block_permutation(&[2, 1]);
    for (k, &p) in perm.iter().enumerate() {
        assert_eq!(f[k], split[p]);
    }
    println!("permutation {perm:?} maps the combined layout onto the per-source one");

    let rows = vec![
        match_features(&[1.0f32, 0.0], &[0.0, 1.0])?,
        match_features(&[0.0f32, 1.0], &[0.0, 1.0])?,
        match_features(&[1.0f32, 1.0], &[1.0, 0.0])?,
    ];
    let s = fit_standardizer(&rows)?;
    let z = s.apply(&rows[0])?;
    println!("standardized first row: {:?}", z.values());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
