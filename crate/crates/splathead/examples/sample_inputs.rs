//! Writes a seeded face sketch, one edited variant per edit kind and a
//! synthetic reference photo, ready for `splathead generate` / `edit`.
//!
//! ```text
//! cargo run --release -p splathead --example sample_inputs -- inputs 7
//! ```

use std::path::PathBuf;

use splathead::neural::{synthetic_reference, FaceSketch, SketchEdit};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "inputs".into()));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    std::fs::create_dir_all(&dir)?;

    let face = FaceSketch::random(seed);
    std::fs::write(dir.join("sketch.png"), face.render(256).to_png())?;
    std::fs::write(dir.join("reference.png"), synthetic_reference(seed, 256).to_png())?;
    for edit in SketchEdit::ALL {
        std::fs::write(dir.join(format!("sketch_{}.png", edit.name())), face.edited(edit).render(256).to_png())?;
    }
    println!("wrote {} sketches and a reference to {}", SketchEdit::ALL.len() + 1, dir.display());
    Ok(())
}
