//! Round-trips a small dataset through the CSV and IDX loaders, with a
//! seeded split and input standardization.

use viking::data::{load_csv, load_idx, write_idx_images, write_idx_labels, SplitSpec, TargetKind};

fn main() -> viking::Result<()> {
    let dir = tempfile::tempdir()?;
    let spec = SplitSpec { train_fraction: 0.75, seed: 3, standardize: true };

    let csv = dir.path().join("toy.csv");
    let mut text = String::from("x1, x2, label\n");
    for i in 0..20 {
        text += &format!("{}, {}, {}\n", i as f64 * 0.5, 10.0 - i as f64, i % 2);
    }
    std::fs::write(&csv, text)?;
    let s = load_csv(&csv, "label", TargetKind::Label, &spec)?;
    let val = s.val.as_ref().expect("a quarter is held out");
    println!("csv: {} train rows, {} val rows, {} features", s.train.len(), val.len(), s.train.inputs.ncols());
    let st = s.standardizer.as_ref().expect("standardized");
    println!("  feature means {:?}, stds {:?}", st.mean, st.std);
    println!("  first standardized row {:.3?}", s.train.inputs.row(0).iter().collect::<Vec<_>>());

    let images = dir.path().join("images.idx");
    let labels = dir.path().join("labels.idx");
    let pixels: Vec<Vec<u8>> = (0..12u8).map(|k| (0..16).map(|p| k.wrapping_mul(20).wrapping_add(p)).collect()).collect();
    write_idx_images(&images, 4, 4, &pixels)?;
    write_idx_labels(&labels, &(0..12).map(|k| k % 3).collect::<Vec<u8>>())?;
    let s = load_idx(&images, &labels, &SplitSpec { standardize: false, ..spec })?;
    println!("idx: {} train images of {} pixels in [0, 1], max {:.3}", s.train.len(), s.train.inputs.ncols(), s.train.inputs.max());
    Ok(())
}
