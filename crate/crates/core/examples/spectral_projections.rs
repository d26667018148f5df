//! Jordan and Cartan projections, holonomy and the Hilbert length of a few
//! words in a ping-pong pair in SL(3, R).

use corrlab::lab::config::bundled;
use corrlab::spectra::{cartan_projection, hilbert_length, holonomy_sign, jordan_projection};
use corrlab::word::Word;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = bundled("sl3-hilbert").expect("bundled configuration");
    let rep = cfg.representations(std::path::Path::new("."))?.remove(0);
    for text in ["1", "1 2", "1 -2", "1 1 2 -1 -2"] {
        let w = Word::parse_indices(text, rep.rank())?;
        let g = rep.evaluate(&w)?;
        let lambda = jordan_projection(&g)?;
        let mu = cartan_projection(&g)?;
        println!("word {w}");
        println!("  jordan   {:?}", lambda.entries());
        println!("  cartan   {:?}", mu.entries());
        println!("  holonomy {}", holonomy_sign(&g)?);
        println!("  hilbert  {:.6}", hilbert_length(&lambda)?);
    }
    Ok(())
}
