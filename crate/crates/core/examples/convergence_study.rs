//! Stress error convergence for P1 bulk and P1 surface with fixed weights,
//! driven through the same config type as the CLI.

use tracefem::study::{run_study, GammaConfig, StudyConfig, StudyKind};

fn main() -> tracefem::Result<()> {
    let cfg = StudyConfig {
        bulk_order: 1,
        surface_order: 1,
        levels: vec![1, 2, 3],
        gamma: GammaConfig::Fixed { values: vec![[1.4332, 0.0], [0.5107, 0.0], [0.544, 0.0]] },
        ..Default::default()
    };
    cfg.validate()?;
    let out = std::env::temp_dir().join("tracefem_convergence");
    let output = run_study(&cfg, StudyKind::Convergence, &out, &mut |line| println!("{line}"))?;
    for f in &output.files {
        println!("--- {}", f.display());
        print!("{}", std::fs::read_to_string(f)?);
    }
    Ok(())
}
