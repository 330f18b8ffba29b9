//! Episode container and on-disk demonstration format: one directory per
//! episode holding per-view PNG frames plus a columnar `steps.csv` record.

use crate::env::{MultiViewObservation, Transition, ViewKind};
use crate::raster::Image;
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// A completed episode. Row `t` holds the observation at time `t` together
/// with the action that led to it (zeros at `t = 0`) and the reward received
/// on arrival.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    /// `views[v][t]` is the frame of view `v` at step `t`.
    pub views: Vec<Vec<Image>>,
    pub view_kinds: Vec<ViewKind>,
    pub actions: Vec<[f32; 4]>,
    pub rewards: Vec<f32>,
    pub is_first: Vec<bool>,
    pub is_last: Vec<bool>,
    pub is_terminal: Vec<bool>,
    pub success: Vec<bool>,
}

impl Episode {
    pub fn new(first: &Transition) -> Episode {
        let mut ep = Episode {
            views: vec![Vec::new(); first.obs.views.len()],
            view_kinds: first.obs.view_kinds.clone(),
            actions: Vec::new(),
            rewards: Vec::new(),
            is_first: Vec::new(),
            is_last: Vec::new(),
            is_terminal: Vec::new(),
            success: Vec::new(),
        };
        ep.push(first);
        ep
    }

    pub fn push(&mut self, tr: &Transition) {
        for (v, img) in tr.obs.views.iter().enumerate() {
            self.views[v].push(img.clone());
        }
        self.actions.push(tr.action);
        self.rewards.push(tr.reward);
        self.is_first.push(tr.is_first);
        self.is_last.push(tr.is_last);
        self.is_terminal.push(tr.is_terminal);
        self.success.push(tr.success);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn ended_in_success(&self) -> bool {
        self.success.last().copied().unwrap_or(false)
    }

    pub fn total_return(&self) -> f64 {
        self.rewards.iter().map(|&r| r as f64).sum()
    }
}

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("png error: {0}")]
    Png(#[from] image::ImageError),
    #[error("malformed demonstration: {0}")]
    Malformed(String),
}

/// Writes `ep_{i:04}` directories under `dir`.
pub fn export_demos(dir: &Path, episodes: &[Episode]) -> Result<(), DemoError> {
    fs::create_dir_all(dir)?;
    for (i, ep) in episodes.iter().enumerate() {
        export_episode(&dir.join(format!("ep_{i:04}")), ep)?;
    }
    Ok(())
}

pub fn export_episode(dir: &Path, ep: &Episode) -> Result<(), DemoError> {
    fs::create_dir_all(dir)?;
    for (v, kind) in ep.view_kinds.iter().enumerate() {
        for (t, img) in ep.views[v].iter().enumerate() {
            let path = dir.join(format!("{t:04}_{}.png", kind.name()));
            save_png(&path, img)?;
        }
    }
    let mut csv = String::from("step,a0,a1,a2,a3,reward,is_first,is_last,is_terminal,success\n");
    for t in 0..ep.len() {
        let a = ep.actions[t];
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            t,
            a[0],
            a[1],
            a[2],
            a[3],
            ep.rewards[t],
            ep.is_first[t] as u8,
            ep.is_last[t] as u8,
            ep.is_terminal[t] as u8,
            ep.success[t] as u8
        ));
    }
    let mut f = fs::File::create(dir.join("steps.csv"))?;
    f.write_all(csv.as_bytes())?;
    Ok(())
}

/// Loads every `ep_*` directory under `dir`, sorted by name.
pub fn import_demos(dir: &Path) -> Result<Vec<Episode>, DemoError> {
    let mut ep_dirs: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("ep_"))
        })
        .collect();
    ep_dirs.sort();
    if ep_dirs.is_empty() {
        return Err(DemoError::Malformed(format!(
            "no ep_* directories under {}",
            dir.display()
        )));
    }
    ep_dirs.iter().map(|p| import_episode(p)).collect()
}

pub fn import_episode(dir: &Path) -> Result<Episode, DemoError> {
    let csv = fs::read_to_string(dir.join("steps.csv"))?;
    let mut lines = csv.lines();
    let header = lines
        .next()
        .ok_or_else(|| DemoError::Malformed("empty steps.csv".into()))?;
    if header != "step,a0,a1,a2,a3,reward,is_first,is_last,is_terminal,success" {
        return Err(DemoError::Malformed(format!(
            "unexpected steps.csv header: {header}"
        )));
    }

    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    let (mut fi, mut la, mut te, mut su) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (ln, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 {
            return Err(DemoError::Malformed(format!(
                "steps.csv row {ln} has {} columns",
                cols.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f32, DemoError> {
            s.parse()
                .map_err(|_| DemoError::Malformed(format!("bad float {s:?} in row {ln}")))
        };
        let parse_b = |s: &str| -> Result<bool, DemoError> {
            match s {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(DemoError::Malformed(format!("bad flag {s:?} in row {ln}"))),
            }
        };
        actions.push([
            parse_f(cols[1])?,
            parse_f(cols[2])?,
            parse_f(cols[3])?,
            parse_f(cols[4])?,
        ]);
        rewards.push(parse_f(cols[5])?);
        fi.push(parse_b(cols[6])?);
        la.push(parse_b(cols[7])?);
        te.push(parse_b(cols[8])?);
        su.push(parse_b(cols[9])?);
    }
    let len = rewards.len();
    if len == 0 {
        return Err(DemoError::Malformed("episode has no steps".into()));
    }

    // discover views from the first frame's files
    let mut kinds = Vec::new();
    for kind in [ViewKind::Front, ViewKind::Front2, ViewKind::Wrist] {
        if dir.join(format!("0000_{}.png", kind.name())).exists() {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(DemoError::Malformed("no view frames found".into()));
    }
    let mut views = vec![Vec::with_capacity(len); kinds.len()];
    for t in 0..len {
        for (v, kind) in kinds.iter().enumerate() {
            let path = dir.join(format!("{t:04}_{}.png", kind.name()));
            views[v].push(load_png(&path)?);
        }
    }
    Ok(Episode {
        views,
        view_kinds: kinds,
        actions,
        rewards,
        is_first: fi,
        is_last: la,
        is_terminal: te,
        success: su,
    })
}

fn save_png(path: &Path, img: &Image) -> Result<(), DemoError> {
    let buf: image::RgbImage =
        image::ImageBuffer::from_raw(img.side as u32, img.side as u32, img.data.clone())
            .expect("image buffer size");
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

fn load_png(path: &Path) -> Result<Image, DemoError> {
    let img = image::open(path)?.to_rgb8();
    let side = img.width() as usize;
    if img.height() as usize != side {
        return Err(DemoError::Malformed(format!(
            "non-square frame {}",
            path.display()
        )));
    }
    Ok(Image {
        side,
        data: img.into_raw(),
    })
}

/// Reconstructs the observation at step `t` of an episode (used when
/// replaying demos through encoders).
pub fn observation_at(ep: &Episode, t: usize) -> MultiViewObservation {
    MultiViewObservation {
        views: ep.views.iter().map(|v| v[t].clone()).collect(),
        view_kinds: ep.view_kinds.clone(),
        poses: Vec::new(),
    }
}
