//! Seeds a weight store from the architecture description, saves it and
//! reloads it, checking the fingerprint survives.

use splathead_neural::{init_weights, ArchSpec, Model, WeightStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arch = ArchSpec::toy();
    let weights = init_weights(&arch, 42);
    println!("{} tensors for architecture {}", weights.len(), &arch.fingerprint()[..16]);
    for name in weights.names().take(5) {
        println!("  {name}: {:?}", weights.get(name)?.shape());
    }

    let path = std::env::temp_dir().join("toy_weights.bin");
    weights.save(&path)?;
    let back = WeightStore::load(&path)?;
    assert_eq!(back.fingerprint(), weights.fingerprint());
    println!("{}: fingerprint {}", path.display(), &back.fingerprint()[..16]);

    let model = Model::new(arch, back)?;
    println!("model ready with {} synthesis layers", model.arch().layer_count());
    Ok(())
}
