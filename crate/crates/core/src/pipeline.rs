//! Batch orchestration of the three augmentation steps over a manifest of
//! slices, with a JSON report that is sufficient to replay any item.
//!
//! Per-item random streams are forked from the root seed with the labels
//! `<index>:fat` (context-aware step) and `<index>:lfat` (location-aware
//! step), so an item's augmentation depends only on its manifest index and
//! the seed. The mutual step draws nothing.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::AugConfig;
use crate::error::{FiestaError, Result};
use crate::fat::{draw_fat, fat_traced, FatParams};
use crate::image::{Image2D, LabelMap, UncertaintyMap};
use crate::io;
use crate::location::{draw_class_params, lfat_with, LfatParams};
use crate::rng::RngStream;
use crate::uncertainty::{entropy_map, fuse_guidance, mutual_augment, MutualBranch};

pub const REPORT_FILE: &str = "report.json";
pub const MISSING_UNCERTAINTY: &str = "missing uncertainty inputs";
pub const MISSING_LABELS: &str = "missing label map";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fat,
    Lfat,
    Mutual,
    All,
}

impl Mode {
    fn emits_ca(self) -> bool {
        matches!(self, Mode::Fat | Mode::All)
    }

    fn emits_la(self) -> bool {
        matches!(self, Mode::Lfat | Mode::All)
    }

    fn emits_ma(self) -> bool {
        matches!(self, Mode::Mutual | Mode::All)
    }
}

/// One slice and its optional side inputs. Probability entries are file
/// stems (`<stem>.c<k>.pfm`); uncertainty entries are single PFM files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifestItem {
    /// Stable item index used for the random stream labels; defaults to the
    /// item's position in the manifest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub image: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prob_ca: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prob_la: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unc_ca: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unc_la: Option<PathBuf>,
    /// Precomputed context-aware image for the mutual step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_ca: Option<PathBuf>,
    /// Precomputed location-aware image for the mutual step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_la: Option<PathBuf>,
}

impl ManifestItem {
    pub fn stem(&self) -> String {
        file_stem(&self.image)
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "item".into())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub items: Vec<ManifestItem>,
}

/// Side-input locations given on the command line. Each may be a directory
/// (resolved per item by stem) or a single path applied to every item.
#[derive(Debug, Clone, Default)]
pub struct SideInputs {
    pub labels: Option<PathBuf>,
    pub prob_ca: Option<PathBuf>,
    pub prob_la: Option<PathBuf>,
    pub unc_ca: Option<PathBuf>,
    pub unc_la: Option<PathBuf>,
}

fn is_probability_plane(path: &Path) -> bool {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let Some(base) = name.strip_suffix(".pfm") else { return false };
    match base.rsplit_once(".c") {
        Some((_, k)) => !k.is_empty() && k.bytes().all(|b| b.is_ascii_digit()),
        None => false,
    }
}

fn per_item(side: &Option<PathBuf>, stem: &str, suffix: &str) -> Option<PathBuf> {
    side.as_ref().map(|p| if p.is_dir() { p.join(format!("{stem}{suffix}")) } else { p.clone() })
}

impl Manifest {
    /// Reads a JSON manifest; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| FiestaError::io(path, e))?;
        let mut m: Manifest =
            serde_json::from_str(&text).map_err(|e| FiestaError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for item in &mut m.items {
            fix(&mut item.image);
            for p in [
                &mut item.labels,
                &mut item.prob_ca,
                &mut item.prob_la,
                &mut item.unc_ca,
                &mut item.unc_la,
                &mut item.x_ca,
                &mut item.x_la,
            ]
            .into_iter()
            .flatten()
            {
                fix(p);
            }
        }
        Ok(m)
    }

    /// Builds a manifest from a JSON manifest, a single PFM, or a directory
    /// of PFM slices (sorted by file name, probability planes skipped).
    pub fn discover(input: &Path, side: &SideInputs) -> Result<Manifest> {
        if input.extension().is_some_and(|e| e == "json") {
            return Self::load(input);
        }
        let images: Vec<PathBuf> = if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| FiestaError::io(input, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "pfm") && !is_probability_plane(p))
                .collect();
            found.sort();
            found
        } else if input.is_file() {
            vec![input.to_path_buf()]
        } else {
            return Err(FiestaError::io(input, std::io::ErrorKind::NotFound.into()));
        };
        let items = images
            .into_iter()
            .map(|image| {
                let stem = file_stem(&image);
                ManifestItem {
                    labels: per_item(&side.labels, &stem, ".pgm"),
                    prob_ca: per_item(&side.prob_ca, &stem, ""),
                    prob_la: per_item(&side.prob_la, &stem, ""),
                    unc_ca: per_item(&side.unc_ca, &stem, ".pfm"),
                    unc_la: per_item(&side.unc_la, &stem, ".pfm"),
                    image,
                    ..ManifestItem::default()
                }
            })
            .collect();
        Ok(Manifest { items })
    }

    /// Effective stream index of every item, in manifest order.
    pub fn indices(&self) -> Vec<usize> {
        self.items.iter().enumerate().map(|(pos, item)| item.index.unwrap_or(pos)).collect()
    }

    fn check_unique(&self) -> Result<()> {
        let mut stems = HashSet::new();
        let mut indices = HashSet::new();
        for (item, index) in self.items.iter().zip(self.indices()) {
            if !stems.insert(item.stem()) {
                return Err(FiestaError::Config(format!("duplicate slice name '{}' in manifest", item.stem())));
            }
            if !indices.insert(index) {
                return Err(FiestaError::Config(format!("duplicate item index {index} in manifest")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaRecord {
    pub stream: String,
    pub params: FatParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaRecord {
    pub stream: String,
    pub params: LfatParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaRecord {
    pub p_u: f64,
    pub branch: MutualBranch,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemReport {
    pub index: usize,
    pub stem: String,
    pub input: ManifestItem,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ca: Option<CaRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub la: Option<LaRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ma: Option<MaRecord>,
}

impl ItemReport {
    pub fn outputs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        if let Some(name) = self.ca.as_ref().and_then(|r| r.output.as_deref()) {
            out.push(name);
        }
        if let Some(name) = self.la.as_ref().and_then(|r| r.output.as_deref()) {
            out.push(name);
        }
        if let Some(r) = &self.ma {
            out.push(&r.output);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub version: String,
    pub mode: Mode,
    pub seed: u64,
    pub config: AugConfig,
    pub items: Vec<ItemReport>,
}

impl BatchReport {
    pub fn failed_items(&self) -> usize {
        self.items.iter().filter(|i| !i.ok).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<BatchReport> {
        let text = fs::read_to_string(path).map_err(|e| FiestaError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| FiestaError::format(path, e.to_string()))
    }
}

pub fn ca_output_name(stem: &str) -> String {
    format!("{stem}_ca.pfm")
}

pub fn la_output_name(stem: &str) -> String {
    format!("{stem}_la.pfm")
}

pub fn ma_output_name(stem: &str) -> String {
    format!("{stem}_ma.pfm")
}

pub fn stream_label(index: usize, step: &str) -> String {
    format!("{index}:{step}")
}

fn load_guidance(unc: &Option<PathBuf>, prob: &Option<PathBuf>) -> Result<Option<UncertaintyMap>> {
    if let Some(path) = unc {
        return io::read_uncertainty(path).map(Some);
    }
    if let Some(stem) = prob {
        return entropy_map(&io::read_probability_set(stem)?).map(Some);
    }
    Ok(None)
}

fn load_labels(item: &ManifestItem) -> Result<LabelMap> {
    let path = item.labels.as_ref().ok_or_else(|| FiestaError::invalid(MISSING_LABELS))?;
    io::read_labels(path)
}

/// Where the context- and location-aware parameters come from.
enum Source<'a> {
    Draw(&'a RngStream),
    Replay(&'a ItemReport),
}

struct ItemRun {
    report: ItemReport,
    images: Vec<(String, Image2D)>,
}

fn run_ca(img: &Image2D, cfg: &AugConfig, index: usize, source: &Source) -> Result<(Image2D, CaRecord)> {
    let stream = stream_label(index, "fat");
    let draw = match source {
        Source::Draw(root) => draw_fat(cfg, img.height(), img.width(), &mut root.fork(&stream)),
        Source::Replay(rep) => rep
            .ca
            .as_ref()
            .ok_or_else(|| FiestaError::invalid("report has no context-aware parameters"))?
            .params
            .draw(),
    };
    let trace = fat_traced(img, cfg, draw)?;
    Ok((trace.output, CaRecord { stream, params: trace.params, output: None }))
}

fn run_la(
    img: &Image2D,
    labels: &LabelMap,
    cfg: &AugConfig,
    index: usize,
    source: &Source,
) -> Result<(Image2D, LaRecord)> {
    let stream = stream_label(index, "lfat");
    let (classes, draw) = match source {
        Source::Draw(root) => {
            let item_rng = root.fork(&stream);
            let classes = draw_class_params(labels.num_classes(), cfg, &item_rng.fork("bezier"));
            let draw = draw_fat(cfg, img.height(), img.width(), &mut item_rng.fork("fat"));
            (classes, draw)
        }
        Source::Replay(rep) => {
            let la = rep
                .la
                .as_ref()
                .ok_or_else(|| FiestaError::invalid("report has no location-aware parameters"))?;
            (la.params.classes.clone(), la.params.fat.draw())
        }
    };
    let (out, params) = lfat_with(img, labels, cfg, &classes, draw)?;
    Ok((out, LaRecord { stream, params, output: None }))
}

fn run_item(index: usize, item: &ManifestItem, mode: Mode, cfg: &AugConfig, source: &Source) -> ItemRun {
    let stem = item.stem();
    let mut report = ItemReport {
        index,
        stem: stem.clone(),
        input: item.clone(),
        ok: true,
        errors: Vec::new(),
        ca: None,
        la: None,
        ma: None,
    };
    let mut images = Vec::new();
    let fail = |report: &mut ItemReport, e: FiestaError| {
        report.ok = false;
        report.errors.push(match e {
            FiestaError::InvalidInput(msg) => msg,
            other => other.to_string(),
        });
    };

    let img = match io::read_image(&item.image) {
        Ok(img) => img,
        Err(e) => {
            fail(&mut report, e);
            return ItemRun { report, images };
        }
    };

    let needs_ca = mode.emits_ca() || (mode.emits_ma() && item.x_ca.is_none());
    let needs_la = mode.emits_la() || (mode.emits_ma() && item.x_la.is_none());
    let needs_labels = needs_la || mode.emits_ma();
    let labels = if needs_labels {
        match load_labels(item) {
            Ok(l) => Some(l),
            Err(e) => {
                fail(&mut report, e);
                None
            }
        }
    } else {
        None
    };

    let mut x_ca = None;
    if needs_ca {
        match run_ca(&img, cfg, index, source) {
            Ok((out, mut rec)) => {
                if mode.emits_ca() {
                    let name = ca_output_name(&stem);
                    rec.output = Some(name.clone());
                    images.push((name, out.clone()));
                }
                report.ca = Some(rec);
                x_ca = Some(out);
            }
            Err(e) => fail(&mut report, e),
        }
    } else if let Some(path) = &item.x_ca {
        match io::read_image(path) {
            Ok(i) => x_ca = Some(i),
            Err(e) => fail(&mut report, e),
        }
    }

    let mut x_la = None;
    if needs_la {
        if let Some(labels) = &labels {
            match run_la(&img, labels, cfg, index, source) {
                Ok((out, mut rec)) => {
                    if mode.emits_la() {
                        let name = la_output_name(&stem);
                        rec.output = Some(name.clone());
                        images.push((name, out.clone()));
                    }
                    report.la = Some(rec);
                    x_la = Some(out);
                }
                Err(e) => fail(&mut report, e),
            }
        }
    } else if let Some(path) = &item.x_la {
        match io::read_image(path) {
            Ok(i) => x_la = Some(i),
            Err(e) => fail(&mut report, e),
        }
    }

    if mode.emits_ma() {
        let guidance = (|| -> Result<Option<(UncertaintyMap, UncertaintyMap)>> {
            let uc = load_guidance(&item.unc_ca, &item.prob_ca)?;
            let ul = load_guidance(&item.unc_la, &item.prob_la)?;
            Ok(uc.zip(ul))
        })();
        match guidance {
            Ok(None) => fail(&mut report, FiestaError::invalid(MISSING_UNCERTAINTY)),
            Err(e) => fail(&mut report, e),
            Ok(Some((uc, ul))) => {
                if let (Some(xc), Some(xl), Some(labels)) = (&x_ca, &x_la, &labels) {
                    let outcome = fuse_guidance(&uc, &ul, cfg)
                        .and_then(|u_map| mutual_augment(xc, xl, &u_map, labels));
                    match outcome {
                        Ok(o) => {
                            let name = ma_output_name(&stem);
                            images.push((name.clone(), o.image));
                            report.ma = Some(MaRecord { p_u: o.p_u, branch: o.branch, output: name });
                        }
                        Err(e) => fail(&mut report, e),
                    }
                }
            }
        }
    }
    ItemRun { report, images }
}

fn write_outputs(out_dir: &Path, run: &mut ItemRun) {
    for (name, img) in &run.images {
        if let Err(e) = io::write_image(&out_dir.join(name), img) {
            run.report.ok = false;
            run.report.errors.push(e.to_string());
        }
    }
}

/// Processes every manifest item (in parallel), writes the images and
/// `report.json` into `out_dir`, and returns the report. Item failures are
/// recorded per item; only configuration or output-directory problems abort.
pub fn run_batch(manifest: &Manifest, cfg: &AugConfig, mode: Mode, out_dir: &Path) -> Result<BatchReport> {
    cfg.validate()?;
    manifest.check_unique()?;
    fs::create_dir_all(out_dir).map_err(|e| FiestaError::io(out_dir, e))?;
    let root = RngStream::new(cfg.seed);
    let indices = manifest.indices();
    let items: Vec<ItemReport> = manifest
        .items
        .par_iter()
        .zip(indices.par_iter())
        .map(|(item, &index)| {
            let mut run = run_item(index, item, mode, cfg, &Source::Draw(&root));
            write_outputs(out_dir, &mut run);
            run.report
        })
        .collect();
    let report = BatchReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode,
        seed: cfg.seed,
        config: cfg.clone(),
        items,
    };
    let path = out_dir.join(REPORT_FILE);
    fs::write(&path, report.to_json()).map_err(|e| FiestaError::io(&path, e))?;
    Ok(report)
}

/// Regenerates one item's images from the parameters recorded in a report,
/// without the seed, writing them under their original names in `out_dir`.
pub fn replay_item(report: &BatchReport, index: usize, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let item = report
        .items
        .iter()
        .find(|i| i.index == index)
        .ok_or_else(|| FiestaError::invalid(format!("report has no item {index}")))?;
    report.config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| FiestaError::io(out_dir, e))?;
    let mut run = run_item(index, &item.input, report.mode, &report.config, &Source::Replay(item));
    if !run.report.ok {
        return Err(FiestaError::invalid(format!("replay of item {index} failed: {}", run.report.errors.join("; "))));
    }
    write_outputs(out_dir, &mut run);
    if !run.report.ok {
        return Err(FiestaError::invalid(run.report.errors.join("; ")));
    }
    Ok(run.images.iter().map(|(name, _)| out_dir.join(name)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_plane_names() {
        assert!(is_probability_plane(Path::new("a/slice.c0.pfm")));
        assert!(is_probability_plane(Path::new("slice_ca.c12.pfm")));
        assert!(!is_probability_plane(Path::new("slice.pfm")));
        assert!(!is_probability_plane(Path::new("slice.cx.pfm")));
        assert!(!is_probability_plane(Path::new("slice.c.pfm")));
    }

    #[test]
    fn mode_outputs() {
        assert!(Mode::All.emits_ca() && Mode::All.emits_la() && Mode::All.emits_ma());
        assert!(!Mode::Fat.emits_la());
        assert!(!Mode::Mutual.emits_ca());
    }

    #[test]
    fn manifest_json_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, r#"{"items": [{"image": "a.pfm", "labels": "/abs/a.pgm"}]}"#).unwrap();
        let m = Manifest::discover(&path, &SideInputs::default()).unwrap();
        assert_eq!(m.items[0].image, dir.path().join("a.pfm"));
        assert_eq!(m.items[0].labels.as_deref(), Some(Path::new("/abs/a.pgm")));
        fs::write(&path, r#"{"items": [{"image": "a.pfm", "nope": 1}]}"#).unwrap();
        assert!(Manifest::load(&path).is_err());
    }

    #[test]
    fn duplicate_stems_rejected() {
        let m = Manifest {
            items: vec![
                ManifestItem { image: "x/a.pfm".into(), ..Default::default() },
                ManifestItem { image: "y/a.pfm".into(), ..Default::default() },
            ],
        };
        assert!(m.check_unique().is_err());
    }

    #[test]
    fn duplicate_indices_rejected() {
        let m = Manifest {
            items: vec![
                ManifestItem { index: Some(1), image: "a.pfm".into(), ..Default::default() },
                ManifestItem { image: "b.pfm".into(), ..Default::default() },
            ],
        };
        assert_eq!(m.indices(), vec![1, 1]);
        assert!(m.check_unique().is_err());
    }
}
