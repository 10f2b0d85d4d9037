//! Searches the stabilization weights that minimize the stress error on the
//! coarsest mesh: golden section for P1, Nelder-Mead for P2.

use tracefem::analysis::{optimize_gamma, GammaSearch};
use tracefem::study::{MembraneLevel, StudyConfig};

fn main() -> tracefem::Result<()> {
    for (bulk, mode, start) in [
        (1u8, GammaSearch::Golden1d, vec![]),
        (2u8, GammaSearch::Simplex2d, vec![1.0, 1.0]),
    ] {
        let cfg = StudyConfig { bulk_order: bulk, surface_order: bulk, ..Default::default() };
        let level = MembraneLevel::from_config(&cfg, 1)?;
        let opt = optimize_gamma(|g| level.error_for(g), mode, (0.0, 100.0), &start);
        println!(
            "P{bulk}: gamma*={:?} eps_sigma={:.4} after {} solves",
            opt.gamma, opt.error, opt.evaluations
        );
    }
    Ok(())
}
