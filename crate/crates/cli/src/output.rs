//! Files written under a run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use vaecca::eval::{Direction, EvalReport};
use vaecca::optim::EpochRecord;

pub const CONFIG_FILE: &str = "config.resolved";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "loss_history.csv";
pub const EVAL_DIR: &str = "eval";
pub const REPORT_FILE: &str = "report.json";
pub const MAP_FILE: &str = "map.csv";
pub const PER_CATEGORY_FILE: &str = "per_category_ap.csv";
pub const ABLATION_FILE: &str = "ablation.csv";

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn history_csv(records: &[EpochRecord<f64>]) -> String {
    let mut s = String::from("epoch,stage,lr,rec,kl,vae,corr,dist,discr,center,total,objective\n");
    for r in records {
        let p = &r.report;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.stage,
            r.lr,
            p.rec,
            p.kl,
            p.vae,
            p.corr,
            p.dist,
            p.discr,
            p.center,
            p.total,
            r.objective
        );
    }
    s
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Writes the report JSON and its CSV views into `dir`; returns the paths.
pub fn write_eval(dir: &Path, report: &EvalReport) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let path = dir.join(name);
        write(&path, &text)?;
        written.push(path);
        Ok(())
    };

    put(
        REPORT_FILE.into(),
        serde_json::to_string_pretty(report).context("serializing report")? + "\n",
    )?;
    put(
        MAP_FILE.into(),
        format!(
            "Audio2Visual,Visual2Audio,Average\n{},{},{}\n",
            report.audio2visual.map, report.visual2audio.map, report.average
        ),
    )?;

    let a2v = &report.audio2visual.per_category_ap;
    let v2a = &report.visual2audio.per_category_ap;
    let mut per = String::from("class,audio2visual,visual2audio\n");
    for c in 0..a2v.len() {
        let _ = writeln!(per, "{c},{},{}", cell(a2v[c]), cell(v2a[c]));
    }
    put(PER_CATEGORY_FILE.into(), per)?;

    for d in Direction::ALL {
        let r = report.direction(d);
        let mut prc = String::from("recall,precision\n");
        for (recall, precision) in &r.prc {
            let _ = writeln!(prc, "{recall},{precision}");
        }
        put(format!("prc_{d}.csv"), prc)?;

        let classes = r.confusion.len();
        let mut conf = String::from("true_class");
        for c in 0..classes {
            let _ = write!(conf, ",top1_{c}");
        }
        conf.push('\n');
        for (c, row) in r.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
            let _ = writeln!(conf, "{c},{}", cells.join(","));
        }
        put(format!("confusion_{d}.csv"), conf)?;
    }
    Ok(written)
}

pub fn map_table(rows: &[(&str, &EvalReport)]) -> String {
    let mut s = String::from("method,audio2visual,visual2audio,average\n");
    for (name, r) in rows {
        let _ = writeln!(
            s,
            "{name},{},{},{}",
            r.audio2visual.map, r.visual2audio.map, r.average
        );
    }
    s
}
