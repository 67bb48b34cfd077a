use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hdrsteg::analysis::{change_map_image, steganalysis_export, write_pgm};
use hdrsteg::image_io::{self, CapacityFilter};
use hdrsteg::pipeline::{self, bits_to_bytes, bytes_to_bits, total_bits};
use hdrsteg::{capacity, CapacityMap, CoverImage, StegoKey};
use rayon::prelude::*;

use crate::{EmbedArgs, ExtractArgs, InspectArgs, KeygenArgs, PrepArgs, ReportArgs, SimulateArgs};
use crate::UsageError;

fn load_key(path: &Path) -> Result<StegoKey> {
    StegoKey::load(path).with_context(|| format!("key {}", path.display()))
}

fn load_image(path: &Path) -> Result<CoverImage> {
    image_io::read_cover(path).with_context(|| format!("image {}", path.display()))
}

/// Refuses to write over a file the command also reads.
fn distinct_output(out: &Path, inputs: &[&Path]) -> Result<()> {
    let same = |a: &Path, b: &Path| match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    };
    if let Some(input) = inputs.iter().find(|i| same(out, i)) {
        return Err(UsageError(format!(
            "output {} would overwrite input {}",
            out.display(),
            input.display()
        ))
        .into());
    }
    Ok(())
}

pub fn embed(args: &EmbedArgs) -> Result<()> {
    distinct_output(&args.out, &[&args.cover, &args.key, &args.message])?;
    let key = load_key(&args.key)?;
    let cover = load_image(&args.cover)?;
    let message = fs::read(&args.message)
        .with_context(|| format!("message {}", args.message.display()))?;
    let stego = pipeline::embed(&cover, &bytes_to_bits(&message), &key)?;
    image_io::write_cover(&stego, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "embedded {} bytes into {} pixels over {} planes",
        message.len(),
        cover.len(),
        key.planes
    );
    Ok(())
}

pub fn extract(args: &ExtractArgs) -> Result<()> {
    distinct_output(&args.out, &[&args.stego, &args.key])?;
    let key = load_key(&args.key)?;
    let stego = load_image(&args.stego)?;
    let bits = pipeline::extract(&stego, &key)?;
    let bytes = bits_to_bytes(&bits);
    fs::write(&args.out, &bytes).with_context(|| format!("writing {}", args.out.display()))?;
    println!("extracted {} bytes", bytes.len());
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut outputs = vec![&args.out];
    outputs.extend(args.change_map.as_ref());
    for out in outputs {
        distinct_output(out, &[&args.cover, &args.key])?;
    }
    let key = load_key(&args.key)?;
    let cover = load_image(&args.cover)?;
    let m = args.bits.unwrap_or_else(|| total_bits(cover.len(), &key));
    let sim = pipeline::simulate_embed(&cover, m, &key, args.seed)?;
    image_io::write_cover(&sim.stego, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.change_map {
        write_pgm(cover.width(), cover.height(), &sim.change_map(), path)?;
    }
    println!("bits {m}");
    println!("plane expected_flips actual_flips lambda");
    for (k, (plan, mask)) in sim.plans.iter().zip(&sim.masks).enumerate() {
        let actual = mask.iter().filter(|&&f| f).count();
        println!(
            "{} {:.3} {} {:.6e}",
            k + 1,
            plan.expected_flips(),
            actual,
            plan.lambda
        );
    }
    Ok(())
}

fn describe(path: &Path, image: &CoverImage, cap: &CapacityMap) -> String {
    let min = image.pixels().iter().copied().fold(f32::INFINITY, f32::min);
    let max = image.pixels().iter().copied().fold(0f32, f32::max);
    let range = image
        .dynamic_range()
        .map_or_else(|| "undefined".to_string(), |r| format!("{r:.6e}"));
    let hist: Vec<String> = cap
        .histogram()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(n, c)| format!("{n}:{c}"))
        .collect();
    format!(
        "file {}\nsize {}x{}\nn_x {}\nmin {min:e}\nmax {max:e}\ndynamic_range {range}\ncapacity_histogram {}\n",
        path.display(),
        image.width(),
        image.height(),
        cap.n_x(),
        hist.join(" ")
    )
}

pub fn inspect(args: &InspectArgs) -> Result<()> {
    if args.capacity_map.is_some() && args.images.len() != 1 {
        return Err(UsageError("--capacity-map takes exactly one image".into()).into());
    }
    if let Some(out) = &args.capacity_map {
        distinct_output(out, &[&args.images[0]])?;
    }
    let results: Vec<Result<(String, CapacityMap)>> = args
        .images
        .par_iter()
        .map(|path| {
            let image = load_image(path)?;
            let cap = capacity(&image).with_context(|| format!("image {}", path.display()))?;
            Ok((describe(path, &image, &cap), cap))
        })
        .collect();
    let mut stdout = std::io::stdout().lock();
    let mut caps = Vec::new();
    for result in results {
        let (text, cap) = result?;
        stdout.write_all(text.as_bytes())?;
        caps.push(cap);
    }
    if let (Some(out), Some(cap)) = (&args.capacity_map, caps.first()) {
        let mut bytes = format!("P5\n{} {}\n16\n", cap.width(), cap.height()).into_bytes();
        bytes.extend_from_slice(cap.values());
        fs::write(out, bytes).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

pub fn prep(args: &PrepArgs) -> Result<()> {
    let mut sources = args.images.clone();
    if let Some(manifest) = &args.manifest {
        sources.extend(
            image_io::read_manifest(manifest)
                .with_context(|| format!("manifest {}", manifest.display()))?,
        );
    }
    if sources.is_empty() {
        return Err(UsageError("no input images given".into()).into());
    }
    if args.tile == 0 {
        return Err(UsageError("--tile must be positive".into()).into());
    }
    let filter = CapacityFilter {
        min_nx: args.min_nx,
        min_dynamic_range: (args.min_range > 0.0).then_some(args.min_range),
    };
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let per_source: Vec<Result<(usize, Vec<PathBuf>)>> = sources
        .par_iter()
        .map(|src| {
            let image = image_io::read_luminance(src)
                .with_context(|| format!("image {}", src.display()))?;
            let stem = src
                .file_stem()
                .map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned());
            let per_row = image.width() / args.tile;
            let tiles = image_io::tile(&image, args.tile)
                .with_context(|| format!("image {}", src.display()))?;
            let count = tiles.len();
            let mut written = Vec::new();
            for (i, t) in tiles.iter().enumerate() {
                if !filter.accepts(t) {
                    continue;
                }
                let out = args
                    .out_dir
                    .join(format!("{stem}_r{}_c{}.tif", i / per_row, i % per_row));
                image_io::write_cover(t, &out)
                    .with_context(|| format!("writing {}", out.display()))?;
                written.push(out);
            }
            Ok((count, written))
        })
        .collect();

    let mut total = 0;
    let mut kept = Vec::new();
    for r in per_source {
        let (count, written) = r?;
        total += count;
        kept.extend(written);
    }
    for path in &kept {
        println!("{}", path.display());
    }
    println!("kept {} of {total} tiles", kept.len());
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let mut outputs = Vec::new();
    outputs.extend(args.change_map.as_ref());
    outputs.extend(args.export.as_ref());
    for out in outputs {
        distinct_output(out, &[&args.cover, &args.stego])?;
    }
    let cover = load_image(&args.cover)?;
    let stego = load_image(&args.stego)?;
    let costs = pipeline::embedding_costs(&cover, args.cost_model)?;
    let r = hdrsteg::diff_report(&cover, &stego, &costs)?;
    let per_plane: Vec<String> = r.flips_per_plane.iter().map(usize::to_string).collect();
    println!("size {}x{}", r.width, r.height);
    println!("flips_per_plane {}", per_plane.join(" "));
    println!("total_flips {}", r.total_flips());
    println!("out_of_domain_bits {}", r.out_of_domain_bits);
    println!("total_distortion {:.9e}", r.total_distortion);
    println!("change_rate {:.9e}", r.change_rate);
    println!("changed_pixels {}", r.changed_pixels());
    if let Some(path) = &args.change_map {
        change_map_image(&r, path)?;
    }
    if let Some(path) = &args.export {
        steganalysis_export(&stego, path)?;
    }
    Ok(())
}

pub fn keygen(args: &KeygenArgs) -> Result<()> {
    let key = StegoKey {
        relative_payload: args.payload,
        planes: args.planes,
        cost_model: args.cost_model,
        stc_h: args.stc_h,
        perm_seed: args.seed,
        framing: !args.no_framing,
    };
    key.validate().map_err(|e| UsageError(e.to_string()))?;
    key.save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    print!("{}", key.to_canonical_string());
    Ok(())
}
