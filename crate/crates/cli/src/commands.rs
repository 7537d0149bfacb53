use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use rayon::prelude::*;

use brecs_core::io::episode::{read_episode, write_episode};
use brecs_core::io::ldraw::write_ldraw;
use brecs_core::io::pairs::{encode_manifest, write_pairs, ManifestEntry, MANIFEST_NAME};
use brecs_core::io::vox::{read_vox, write_vox};
use brecs_core::io::write_atomic;
use brecs_core::metrics::summarize;
use brecs_core::pipeline::buffer_schedule;
use brecs_core::{
    assembler::init_generation, derive_seed, generate_sequence, make_partial, run_episode,
    seeded_rng, validate_structure, AssemblyConfig, BrickLibrary, ConstantScorer, Episode, Error,
    FileScorer, GridDims, ScoreSource, TargetOracle, Toggles, VoxelGrid,
};

use crate::{resolve_out, AssemblyArgs, Cli, Command};

type Result<T> = std::result::Result<T, Error>;

pub fn run(cli: Cli) -> Result<ExitCode> {
    let timing = cli.timing;
    match cli.command {
        Command::Generate {
            out,
            size,
            assembly,
        } => generate(&out, size, &assembly, timing),
        Command::Complete {
            target,
            partial,
            out,
            assembly,
        } => complete(&target, &partial, &out, &assembly, timing),
        Command::Sequences {
            targets,
            count,
            out,
            assembly,
        } => sequences(&targets, count, &out, &assembly, timing),
        Command::Pairs {
            sequences,
            k,
            batch,
            buffer,
            num_batches,
            out,
            seed,
        } => pairs(&sequences, k, batch, buffer, num_batches, &out, seed),
        Command::MakePartial {
            episode,
            fraction,
            out,
            seed,
        } => partial(&episode, fraction, &out, seed),
        Command::Eval {
            episodes,
            targets,
            out,
        } => eval(&episodes, targets.as_deref(), &out),
        Command::Validate { episode } => return validate(&episode),
        Command::Downscale {
            input,
            factor,
            embed,
            out,
        } => downscale(&input, factor, embed, &out),
        Command::Ldraw { episode, out } => ldraw(&episode, &out),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn config(args: &AssemblyArgs, dims: GridDims) -> Result<AssemblyConfig> {
    let config = AssemblyConfig {
        dims,
        library: BrickLibrary::from_types(&args.bricks)?,
        budget: args.budget,
        phase_budget: args.phase_budget,
        tau: args.tau,
        seed: args.seed,
        toggles: Toggles {
            validity_check: !args.no_validity_check,
            pivot_sampling: !args.no_sampling,
        },
    };
    config.validate()?;
    Ok(config)
}

fn load_scorer(args: &AssemblyArgs) -> Result<Option<FileScorer>> {
    let Some(path) = &args.score_grid else {
        return Ok(None);
    };
    let scorer = FileScorer::load(path)?;
    if scorer.clamped() > 0 {
        eprintln!(
            "warning: {} prediction values clamped into [0, 1]",
            scorer.clamped()
        );
    }
    Ok(Some(scorer))
}

fn check_dims(expected: GridDims, found: GridDims) -> Result<()> {
    if expected != found {
        return Err(Error::DimsMismatch { expected, found });
    }
    Ok(())
}

/// Output path with `BRECS_OUT_DIR` applied and parent directories created.
fn prepare_out(path: &Path) -> Result<PathBuf> {
    let path = resolve_out(path);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(path)
}

fn prepare_dir(path: &Path) -> Result<PathBuf> {
    let path = resolve_out(path);
    fs::create_dir_all(&path).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Files in `dir` with the given extension, sorted by name.
fn list(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn finish(mut ep: Episode, timing: bool) -> Episode {
    if !timing {
        ep.wall_seconds = None;
    }
    ep
}

fn describe(ep: &Episode) -> String {
    let reason = serde_json::to_value(ep.terminal)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    format!("{} bricks, stopped: {reason}", ep.len())
}

fn generate(out: &Path, size: usize, args: &AssemblyArgs, timing: bool) -> Result<()> {
    let scorer = load_scorer(args)?;
    let dims = match &scorer {
        Some(s) => s.prediction().dims(),
        None => GridDims::cube(size)?,
    };
    let config = config(args, dims)?;
    let constant;
    let source: &dyn ScoreSource = match &scorer {
        Some(s) => s,
        None => {
            constant = ConstantScorer::new(1.0)?;
            &constant
        }
    };
    let mut rng = config.rng();
    let initial = init_generation(&config, &mut rng)?;
    let ep = finish(run_episode(initial, source, &config, &mut rng)?, timing);
    let out = prepare_out(out)?;
    write_episode(&out, &ep)?;
    println!("{}: {}", out.display(), describe(&ep));
    Ok(())
}

fn complete(
    target: &Path,
    partial: &Path,
    out: &Path,
    args: &AssemblyArgs,
    timing: bool,
) -> Result<()> {
    let target_grid = read_vox(target)?;
    let start = read_episode(partial)?;
    check_dims(target_grid.dims(), start.config.dims)?;
    let scorer = load_scorer(args)?;
    if let Some(s) = &scorer {
        check_dims(target_grid.dims(), s.prediction().dims())?;
    }
    let config = config(args, target_grid.dims())?;
    let oracle = TargetOracle::new(target_grid);
    let source: &dyn ScoreSource = match &scorer {
        Some(s) => s,
        None => &oracle,
    };
    let mut ep = run_episode(start.final_state()?, source, &config, &mut config.rng())?;
    ep.target_path = Some(target.display().to_string());
    let ep = finish(ep, timing);
    let out = prepare_out(out)?;
    write_episode(&out, &ep)?;
    println!("{}: {}", out.display(), describe(&ep));
    Ok(())
}

fn sequences(
    targets: &Path,
    count: usize,
    out: &Path,
    args: &AssemblyArgs,
    timing: bool,
) -> Result<()> {
    let files = list(targets, "vox")?;
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no .vox targets in {}",
            targets.display()
        )));
    }
    let grids = files
        .iter()
        .map(|f| read_vox(f))
        .collect::<Result<Vec<_>>>()?;
    let out = prepare_dir(out)?;
    let jobs: Vec<(usize, usize)> = (0..files.len())
        .flat_map(|t| (0..count).map(move |n| (t, n)))
        .collect();
    let lengths = jobs
        .par_iter()
        .map(|&(t, n)| {
            let seed = derive_seed(args.seed, (t * count + n) as u64);
            let config = config(
                &AssemblyArgs {
                    seed,
                    ..args.clone()
                },
                grids[t].dims(),
            )?;
            let mut ep = generate_sequence(&grids[t], &config, &mut config.rng())?;
            ep.target_path = files[t]
                .file_name()
                .map(|s| s.to_string_lossy().into_owned());
            let ep = finish(ep, timing);
            let path = out.join(format!("{}_{n:04}.json", stem(&files[t])));
            write_episode(&path, &ep)?;
            Ok(ep.len())
        })
        .collect::<Result<Vec<_>>>()?;
    let total: usize = lengths.iter().sum();
    println!(
        "{}: {} sequences, {total} bricks",
        out.display(),
        lengths.len()
    );
    Ok(())
}

fn load_episodes(dir: &Path) -> Result<Vec<(String, Episode)>> {
    let files = list(dir, "json")?;
    files
        .par_iter()
        .map(|f| Ok((stem(f), read_episode(f)?)))
        .collect()
}

fn pairs(
    sequences: &Path,
    k: usize,
    batch: usize,
    buffer: usize,
    num_batches: usize,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let store = load_episodes(sequences)?;
    let out = prepare_dir(out)?;
    let mut manifest = Vec::with_capacity(num_batches);
    buffer_schedule(
        &store,
        batch,
        k,
        buffer,
        seeded_rng(seed),
        num_batches,
        |b, pairs| {
            let file = format!("batch_{b:06}.pairs");
            write_pairs(&out.join(&file), &pairs)?;
            manifest.push(ManifestEntry {
                file,
                records: pairs.len(),
                k,
            });
            Ok(())
        },
    )?;
    write_atomic(
        &out.join(MANIFEST_NAME),
        encode_manifest(&manifest).as_bytes(),
    )?;
    println!(
        "{}: {} batches of {batch} pairs",
        out.display(),
        manifest.len()
    );
    Ok(())
}

fn partial(episode: &Path, fraction: f64, out: &Path, seed: u64) -> Result<()> {
    let ep = read_episode(episode)?;
    let part = make_partial(&ep, fraction, &mut seeded_rng(seed))?;
    if !part.complete {
        eprintln!(
            "warning: removed only {} bricks; the rest cannot lose more without disconnecting",
            part.removed
        );
    }
    let removed = part.removed;
    let partial_ep = part.into_episode(&ep);
    let out = prepare_out(out)?;
    write_episode(&out, &partial_ep)?;
    println!(
        "{}: kept {} of {} bricks (removed {removed})",
        out.display(),
        partial_ep.len(),
        ep.len()
    );
    Ok(())
}

/// Pairs each episode with the target file named by its `target_path`. When
/// any episode lacks a matching name, falls back to sorted one-to-one order.
fn match_targets(store: &[(String, Episode)], files: &[PathBuf]) -> Result<Vec<VoxelGrid>> {
    let by_name = |name: &str| {
        files
            .iter()
            .position(|f| f.file_name().is_some_and(|n| n.to_string_lossy() == name))
    };
    let named: Option<Vec<usize>> = store
        .iter()
        .map(|(_, ep)| {
            let path = Path::new(ep.target_path.as_deref()?);
            by_name(&path.file_name()?.to_string_lossy())
        })
        .collect();
    let grids = files
        .iter()
        .map(|f| read_vox(f))
        .collect::<Result<Vec<_>>>()?;
    Ok(match named {
        Some(idx) => idx.into_iter().map(|i| grids[i].clone()).collect(),
        None => grids,
    })
}

fn eval(episodes: &Path, targets: Option<&Path>, out: &Path) -> Result<()> {
    let store = load_episodes(episodes)?;
    let grids = match targets {
        Some(dir) => Some(match_targets(&store, &list(dir, "vox")?)?),
        None => None,
    };
    let report = summarize(&store, grids.as_deref())?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    let out = prepare_out(out)?;
    write_atomic(&out, text.as_bytes())?;
    let iou = report
        .mean_iou
        .map(|v| format!(", mean IoU {v:.3}"))
        .unwrap_or_default();
    println!(
        "{}: {} episodes, {:.1}% valid, {:.1} bricks{iou}",
        out.display(),
        report.count,
        report.percent_valid,
        report.mean_bricks
    );
    Ok(())
}

fn validate(episode: &Path) -> Result<ExitCode> {
    let ep = read_episode(episode)?;
    let report = validate_structure(&ep.placements, ep.config.dims)?;
    if report.is_valid() {
        println!("valid");
        return Ok(ExitCode::SUCCESS);
    }
    let mut problems = Vec::new();
    if !report.overlap_ok {
        problems.push(format!("{} overlapping pairs", report.overlapping.len()));
    }
    if !report.connectivity_ok {
        problems.push(format!("{} components", report.components.len()));
    }
    if !report.vertical_ok {
        problems.push(format!("{} unsupported bricks", report.unsupported.len()));
    }
    println!("invalid: {}", problems.join(", "));
    Ok(ExitCode::FAILURE)
}

fn downscale(input: &Path, factor: usize, embed: Option<usize>, out: &Path) -> Result<()> {
    let mut grid = read_vox(input)?.downscale(factor)?;
    if let Some(edge) = embed {
        grid = grid.embed_centered(GridDims::cube(edge)?)?;
    }
    let out = prepare_out(out)?;
    write_vox(&out, &grid)?;
    println!(
        "{}: {} with {} occupied cells",
        out.display(),
        grid.dims(),
        grid.occupied()
    );
    Ok(())
}

fn ldraw(episode: &Path, out: &Path) -> Result<()> {
    let ep = read_episode(episode)?;
    let out = prepare_out(out)?;
    write_ldraw(&out, &ep)?;
    println!("{}: {} parts", out.display(), ep.len());
    Ok(())
}
