use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use freegroup::Decision;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use towercalc::classify::{self, core_in_order, minimal_efree_catalog, Verdict};
use towercalc::dsl::{parse_etage, parse_expr, EtageSource};
use towercalc::expr::GroupExpr;
use towercalc::limits::{verify_discriminating_capped, EtagePresentation, BALL_CAP};
use towercalc::retract::{decide_retractable_with, SearchBounds};
use towercalc::tower::{b1_mod2, normalize_etages, stabilize, upgrade_to_simple, Tower, TowerError};

const DECIDED: u8 = 0;
const FAILED: u8 = 1;
const UNDECIDED: u8 = 2;

#[derive(Parser)]
#[command(name = "towercalc", version, about = "Decide properties of towers of surface étages")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    #[command(flatten)]
    bounds: BoundFlags,
}

#[derive(Args, Default)]
struct BoundFlags {
    /// TOML file with default bounds.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Witness search radius, and ball radius for `discriminate`.
    #[arg(long, global = true)]
    radius: Option<usize>,
    #[arg(long, global = true)]
    nmax: Option<u32>,
    #[arg(long, global = true)]
    max_genus: Option<u32>,
    #[arg(long, global = true)]
    max_boundary: Option<u32>,
    #[arg(long, global = true)]
    max_index: Option<i64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Verb {
    /// Core of a tower expression.
    Core {
        file: PathBuf,
        /// Also recompute the core under this many random rule orders.
        #[arg(long, default_value_t = 0)]
        orders: u32,
    },
    Ecore { file: PathBuf },
    Equiv { left: PathBuf, right: PathBuf },
    Efree { file: PathBuf },
    Prime { file: PathBuf },
    Minimal { file: PathBuf },
    /// Decide whether an étage's splitting retracts onto its base.
    Retractable { file: PathBuf },
    /// Multi-parachutes that are minimal elementarily free groups, within the bounds.
    Catalog,
    Tower {
        #[command(subcommand)]
        op: TowerOp,
    },
    /// Check that the twisted retractions discriminate a ball of the étage group.
    Discriminate {
        file: PathBuf,
        /// Include wall-clock time in the report.
        #[arg(long)]
        timing: bool,
    },
    Dot { file: PathBuf },
    Validate { file: PathBuf },
}

#[derive(Subcommand)]
enum TowerOp {
    Normalize { file: PathBuf },
    Upgrade { file: PathBuf },
    Stabilize { file: PathBuf },
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Config {
    radius: Option<usize>,
    nmax: Option<u32>,
    max_genus: Option<u32>,
    max_boundary: Option<u32>,
    max_index: Option<i64>,
    seed: Option<u64>,
}

struct Settings {
    radius: Option<usize>,
    nmax: u32,
    max_genus: u32,
    max_boundary: u32,
    max_index: i64,
    seed: u64,
}

impl Settings {
    fn resolve(flags: &BoundFlags) -> Result<Settings, String> {
        let file = match &flags.config {
            Some(p) => {
                let text = read(p)?;
                toml::from_str::<Config>(&text).map_err(|e| format!("{}: {}", p.display(), e))?
            }
            None => Config::default(),
        };
        Ok(Settings {
            radius: flags.radius.or(file.radius),
            nmax: flags.nmax.or(file.nmax).unwrap_or(64),
            max_genus: flags.max_genus.or(file.max_genus).unwrap_or(2),
            max_boundary: flags.max_boundary.or(file.max_boundary).unwrap_or(3),
            max_index: flags.max_index.or(file.max_index).unwrap_or(4),
            seed: flags.seed.or(file.seed).unwrap_or(0),
        })
    }

    fn search(&self) -> SearchBounds {
        let mut b = SearchBounds::default();
        if let Some(r) = self.radius {
            b.radius = r;
        }
        b
    }
}

/// A report and the exit code it should produce.
struct Report {
    body: String,
    code: u8,
}

impl Report {
    fn json(v: Value, code: u8) -> Report {
        Report {
            body: serde_json::to_string(&v).expect("json values serialize"),
            code,
        }
    }
}

fn read(p: &Path) -> Result<String, String> {
    std::fs::read_to_string(p).map_err(|e| format!("{}: {}", p.display(), e))
}

fn load_expr(p: &Path) -> Result<GroupExpr, String> {
    parse_expr(&read(p)?).map_err(|e| format!("{}:{}", p.display(), e))
}

fn load_etage(p: &Path) -> Result<EtageSource, String> {
    parse_etage(&read(p)?).map_err(|e| format!("{}:{}", p.display(), e))
}

/// Certify every étage; an undecided étage becomes an Unknown report.
fn load_tower(p: &Path) -> Result<Result<Tower, Report>, String> {
    match Tower::certify(load_expr(p)?) {
        Ok(t) => Ok(Ok(t)),
        Err(TowerError::Undecided(b)) => Ok(Err(Report::json(
            json!({"verdict": "Unknown", "stage": "certify", "bounds": b.to_string()}),
            UNDECIDED,
        ))),
        Err(e) => Err(format!("{}: {}", p.display(), e)),
    }
}

macro_rules! tower_or_report {
    ($p:expr) => {
        match load_tower($p)? {
            Ok(t) => t,
            Err(r) => return Ok(r),
        }
    };
}

fn verdict_report(v: Verdict) -> Report {
    let code = if v.is_unknown() { UNDECIDED } else { DECIDED };
    let mut out = Map::new();
    out.insert("verdict".into(), json!(v.verdict()));
    match v {
        Decision::Yes(r) | Decision::No(r) => {
            out.insert("certificate".into(), serde_json::to_value(r).expect("reasons serialize"));
        }
        Decision::Unknown(b) => {
            out.insert("bounds".into(), json!(b.to_string()));
        }
    }
    Report::json(Value::Object(out), code)
}

fn tower_report(t: &Tower) -> Report {
    Report::json(
        json!({
            "tower": t.expr().to_string(),
            "b1_mod2": b1_mod2(t.expr()),
        }),
        DECIDED,
    )
}

fn presentation_for(src: &EtageSource, s: &Settings) -> Result<EtagePresentation, String> {
    let c = &src.splitting;
    if !src.retraction.is_empty() {
        return EtagePresentation::with_images(c, &src.retraction).map_err(|e| e.to_string());
    }
    match decide_retractable_with(c, &s.search()) {
        Decision::Yes(r) if !r.extended => EtagePresentation::new(c, r.images).map_err(|e| e.to_string()),
        Decision::Yes(_) => Err("the retraction found is onto an extended base; supply one with `retraction:`".into()),
        Decision::No(o) => Err(format!("splitting is not retractable ({})", o)),
        Decision::Unknown(b) => Err(format!("no retraction found: {}", b)),
    }
}

fn run(cli: &Cli) -> Result<Report, String> {
    let s = Settings::resolve(&cli.bounds)?;
    let classify_err = |e: classify::ClassifyError| e.to_string();
    Ok(match &cli.verb {
        Verb::Core { file, orders } => {
            let t = tower_or_report!(file);
            let c = classify::core(t.expr()).map_err(classify_err)?;
            let mut out = json!({"normal_form": c.to_string(), "factors": c.factors});
            if *orders > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
                let mut agree = true;
                for _ in 0..*orders {
                    let other = core_in_order(t.expr(), |m| rng.gen_range(0..m)).map_err(classify_err)?;
                    agree &= other == c;
                }
                out["orders"] = json!(orders);
                out["confluent"] = json!(agree);
            }
            Report::json(out, DECIDED)
        }
        Verb::Ecore { file } => {
            let t = tower_or_report!(file);
            let e = classify::ecore(t.expr()).map_err(classify_err)?;
            Report::json(json!({"normal_form": e.to_string()}), DECIDED)
        }
        Verb::Equiv { left, right } => {
            let a = tower_or_report!(left);
            let b = tower_or_report!(right);
            let eq = classify::equiv(a.expr(), b.expr()).map_err(classify_err)?;
            Report::json(json!({"equiv": eq}), DECIDED)
        }
        Verb::Efree { file } => {
            let t = tower_or_report!(file);
            let e = classify::is_efree(t.expr()).map_err(classify_err)?;
            Report::json(json!({"efree": e}), DECIDED)
        }
        Verb::Prime { file } => {
            let t = tower_or_report!(file);
            verdict_report(classify::is_prime(t.expr()).map_err(classify_err)?)
        }
        Verb::Minimal { file } => {
            let t = tower_or_report!(file);
            verdict_report(classify::is_minimal(t.expr()).map_err(classify_err)?)
        }
        Verb::Retractable { file } => {
            let src = load_etage(file)?;
            let mut out = Map::new();
            let d = decide_retractable_with(&src.splitting, &s.search());
            out.insert("verdict".into(), json!(d.verdict()));
            let code = match d {
                Decision::Yes(r) => {
                    out.insert("certificate".into(), serde_json::to_value(&r).expect("certificates serialize"));
                    DECIDED
                }
                Decision::No(o) => {
                    if let Value::Object(fields) = serde_json::to_value(&o).expect("obstructions serialize") {
                        out.extend(fields);
                    }
                    DECIDED
                }
                Decision::Unknown(b) => {
                    out.insert("bounds".into(), json!(b.to_string()));
                    UNDECIDED
                }
            };
            Report::json(Value::Object(out), code)
        }
        Verb::Catalog => {
            let entries = minimal_efree_catalog(s.max_genus, s.max_boundary, s.max_index);
            let undecided = entries.iter().any(|e| e.retractable != "Yes");
            Report::json(
                json!({
                    "max_genus": s.max_genus,
                    "max_boundary": s.max_boundary,
                    "max_index": s.max_index,
                    "entries": entries,
                }),
                if undecided { UNDECIDED } else { DECIDED },
            )
        }
        Verb::Tower { op } => match op {
            TowerOp::Normalize { file } => tower_report(&normalize_etages(&tower_or_report!(file))),
            TowerOp::Upgrade { file } => {
                let t = tower_or_report!(file);
                tower_report(&upgrade_to_simple(&t).map_err(|e| e.to_string())?)
            }
            TowerOp::Stabilize { file } => {
                let t = tower_or_report!(file);
                tower_report(&stabilize(&t).map_err(|e| e.to_string())?)
            }
        },
        Verb::Discriminate { file, timing } => {
            let src = load_etage(file)?;
            let ep = presentation_for(&src, &s)?;
            let radius = s.radius.unwrap_or(2);
            let started = Instant::now();
            let d = verify_discriminating_capped(&ep, radius, s.nmax, BALL_CAP).map_err(|e| e.to_string())?;
            let code = if d.found_n.is_some() { DECIDED } else { UNDECIDED };
            let mut out = json!({
                "radius": radius,
                "nmax": s.nmax,
                "found_n": d.found_n,
                "checked_words": d.checked_words,
                "last_killed": d.last_killed.map(|(n, w)| json!({"n": n, "word": w})),
            });
            if *timing {
                out["elapsed"] = json!(started.elapsed().as_secs_f64());
            }
            Report::json(out, code)
        }
        Verb::Dot { file } => Report {
            body: load_etage(file)?.splitting.to_dot().trim_end().to_string(),
            code: DECIDED,
        },
        Verb::Validate { file } => {
            let src = load_etage(file)?;
            let violations = src.splitting.validate();
            let code = if violations.is_empty() { DECIDED } else { FAILED };
            Report::json(json!({"valid": violations.is_empty(), "violations": violations}), code)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(r) => {
            println!("{}", r.body);
            ExitCode::from(r.code)
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(FAILED)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let dir = std::env::temp_dir().join(format!("towercalc-settings-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = dir.join("c.toml");
        std::fs::write(&cfg, "nmax = 8\nmax_index = 6\n").unwrap();
        let flags = BoundFlags {
            config: Some(cfg),
            max_index: Some(3),
            ..BoundFlags::default()
        };
        let s = Settings::resolve(&flags).unwrap();
        assert_eq!((s.nmax, s.max_index, s.max_genus, s.radius), (8, 3, 2, None));
        assert_eq!(s.search().radius, SearchBounds::default().radius);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn defaults_without_config() {
        let s = Settings::resolve(&BoundFlags::default()).unwrap();
        assert_eq!((s.nmax, s.seed), (64, 0));
    }
}
