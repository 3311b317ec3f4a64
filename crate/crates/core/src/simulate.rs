//! Synthetic lists with known ground truth.
//!
//! A population of `N` individuals with distinct identities is drawn, each
//! individual gets a capture history from the chosen capture model, and one
//! record (plus, occasionally, a duplicate) is emitted per list that caught
//! them, with typos, missing values and shifted dates mixed in.
//!
//! Spec file:
//!
//! ```text
//! seed = 7
//! population = 1000
//! lists = 3
//!
//! [capture]
//! model = independence
//! probs = 0.5 0.5 0.5
//!
//! [distortion]
//! typo = 0.05
//! missing = 0.02
//! date_shift = 0.05
//! max_shift = 2
//! duplicates = 0.0
//! ```
//!
//! `model` is `independence`, `latent-class` or `cells`. A latent-class
//! model takes `weights = 0.6 0.4` and one `classN = ...` line of capture
//! probabilities per class; `cells` takes one `pattern = probability` line
//! per capture pattern, such as `110 = 0.1`.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::histories::{parse_pattern, ContingencyTable};
use crate::ingest::{FieldKind, FieldSchema, FieldSpec, LABEL_COLUMN};
use crate::kvconf::{parse_list, KvFile};

#[derive(Debug, Clone, PartialEq)]
pub enum CaptureModel {
    Independence(Vec<f64>),
    LatentClass { weights: Vec<f64>, probs: Vec<Vec<f64>> },
    /// Probability of every pattern, all-zero included, indexed by pattern.
    Cells(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distortion {
    pub typo: f64,
    pub missing: f64,
    pub date_shift: f64,
    pub max_shift: i64,
    pub duplicates: f64,
}

impl Distortion {
    pub fn none() -> Self {
        Distortion {
            typo: 0.0,
            missing: 0.0,
            date_shift: 0.0,
            max_shift: 1,
            duplicates: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub seed: u64,
    pub population: usize,
    pub lists: usize,
    pub capture: CaptureModel,
    pub distortion: Distortion,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} = {p} is not a probability")))
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.population < 1 {
            return Err(Error::Invalid("population must be at least 1".into()));
        }
        if self.lists < 2 || self.lists > 16 {
            return Err(Error::TooFewLists(self.lists));
        }
        let k = self.lists;
        match &self.capture {
            CaptureModel::Independence(p) => {
                if p.len() != k {
                    return Err(Error::Invalid(format!("{} capture probabilities for {k} lists", p.len())));
                }
                p.iter().try_for_each(|&x| check_prob("probs", x))?;
            }
            CaptureModel::LatentClass { weights, probs } => {
                if weights.len() != probs.len() || probs.iter().any(|p| p.len() != k) {
                    return Err(Error::Invalid("latent-class weights and classes do not match".into()));
                }
                weights.iter().try_for_each(|&x| check_prob("weights", x))?;
                if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::Invalid("latent-class weights must sum to 1".into()));
                }
                probs.iter().flatten().try_for_each(|&x| check_prob("class", x))?;
            }
            CaptureModel::Cells(c) => {
                if c.len() != 1 << k {
                    return Err(Error::Invalid(format!("{} cell probabilities for {k} lists", c.len())));
                }
                c.iter().try_for_each(|&x| check_prob("cell", x))?;
                if (c.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::Invalid("cell probabilities must sum to 1".into()));
                }
            }
        }
        let d = &self.distortion;
        check_prob("typo", d.typo)?;
        check_prob("missing", d.missing)?;
        check_prob("date_shift", d.date_shift)?;
        check_prob("duplicates", d.duplicates)?;
        if d.max_shift < 1 {
            return Err(Error::Invalid("max_shift must be at least 1".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = KvFile::parse(text)?;
        let top = kv.section("").ok_or_else(|| Error::Missing("seed, population and lists".into()))?;
        let seed = top.require("seed")?.parse().map_err(|_| Error::Parse("bad seed".into()))?;
        let population = top
            .require("population")?
            .parse()
            .map_err(|_| Error::Parse("bad population".into()))?;
        let lists: usize = top.require("lists")?.parse().map_err(|_| Error::Parse("bad lists".into()))?;
        let cap = kv.require_section("capture")?;
        let capture = match cap.get("model").unwrap_or("independence") {
            "independence" => CaptureModel::Independence(parse_list(cap.require("probs")?)?),
            "latent-class" => {
                let weights: Vec<f64> = parse_list(cap.require("weights")?)?;
                let probs = (1..=weights.len())
                    .map(|c| parse_list(cap.require(&format!("class{c}"))?))
                    .collect::<Result<_>>()?;
                CaptureModel::LatentClass { weights, probs }
            }
            "cells" => {
                let mut cells = vec![0.0; 1 << lists.min(16)];
                for (key, value) in &cap.entries {
                    if key == "model" {
                        continue;
                    }
                    let h = parse_pattern(key, lists)?;
                    cells[h as usize] = value
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad cell probability `{value}`")))?;
                }
                CaptureModel::Cells(cells)
            }
            other => return Err(Error::Parse(format!("unknown capture model `{other}`"))),
        };
        let distortion = match kv.section("distortion") {
            None => Distortion::none(),
            Some(d) => Distortion {
                typo: d.parse_or("typo", 0.0)?,
                missing: d.parse_or("missing", 0.0)?,
                date_shift: d.parse_or("date_shift", 0.0)?,
                max_shift: d.parse_or("max_shift", 1)?,
                duplicates: d.parse_or("duplicates", 0.0)?,
            },
        };
        let spec = SimSpec {
            seed,
            population,
            lists,
            capture,
            distortion,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

const GIVEN: &[&str] = &[
    "JOSE", "MARIA", "JUAN", "ANA", "CARLOS", "ROSA", "LUIS", "CARMEN", "PEDRO", "ELENA", "MIGUEL",
    "SOFIA", "ANTONIO", "LUCIA", "FRANCISCO", "TERESA", "MANUEL", "ISABEL", "JORGE", "MARTA",
    "RAFAEL", "JULIA", "RICARDO", "PATRICIA", "FERNANDO", "GLORIA", "ROBERTO", "SILVIA", "ALBERTO",
    "BEATRIZ", "EDUARDO", "LAURA", "SANTIAGO", "VERONICA", "ERNESTO", "CLAUDIA", "ALFREDO",
    "DOLORES", "GUILLERMO", "ESPERANZA", "RAMON", "IRMA", "OSCAR", "NORMA", "VICTOR", "REINA",
    "ARMANDO", "BLANCA", "SALVADOR", "CONSUELO",
];

const FAMILY: &[&str] = &[
    "HERNANDEZ", "GARCIA", "MARTINEZ", "LOPEZ", "RODRIGUEZ", "PEREZ", "GONZALEZ", "SANCHEZ",
    "RAMIREZ", "FLORES", "RIVERA", "GOMEZ", "DIAZ", "CRUZ", "MORALES", "REYES", "ORTIZ", "CASTRO",
    "VASQUEZ", "ROMERO", "MENDOZA", "AGUILAR", "GUZMAN", "MEJIA", "ALVARADO", "PORTILLO", "ESCOBAR",
    "MOLINA", "CHAVEZ", "CAMPOS", "CORTEZ", "FUENTES", "SERRANO", "NAVARRO", "ORELLANA", "QUINTANILLA",
    "VALLE", "ARGUETA", "BONILLA", "AYALA", "PINEDA", "SOLIS", "ZELAYA", "MIRANDA", "LANDAVERDE",
    "MONTOYA", "AMAYA", "DERAS", "GUEVARA", "TOBAR",
];

const PLACES: usize = 40;
const YEARS: (i64, i64) = (1975, 1992);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Identity {
    given: String,
    family: String,
    year: i64,
    month: i64,
    day: i64,
    place: usize,
}

fn draw_identity<R: Rng + ?Sized>(rng: &mut R) -> Identity {
    let given = if rng.random::<f64>() < 0.3 {
        format!("{} {}", GIVEN.choose(rng).unwrap(), GIVEN.choose(rng).unwrap())
    } else {
        GIVEN.choose(rng).unwrap().to_string()
    };
    Identity {
        given,
        family: format!("{} {}", FAMILY.choose(rng).unwrap(), FAMILY.choose(rng).unwrap()),
        year: rng.random_range(YEARS.0..=YEARS.1),
        month: rng.random_range(1..=12),
        day: rng.random_range(1..=28),
        place: rng.random_range(0..PLACES),
    }
}

fn draw_history<R: Rng + ?Sized>(model: &CaptureModel, k: usize, rng: &mut R) -> u32 {
    let independent = |probs: &[f64], rng: &mut R| {
        (0..k).fold(0u32, |h, b| if rng.random::<f64>() < probs[b] { h | 1 << b } else { h })
    };
    match model {
        CaptureModel::Independence(p) => independent(p, rng),
        CaptureModel::LatentClass { weights, probs } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut class = weights.len() - 1;
            for (c, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    class = c;
                    break;
                }
            }
            independent(&probs[class], rng)
        }
        CaptureModel::Cells(cells) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (h, p) in cells.iter().enumerate() {
                acc += p;
                if u < acc {
                    return h as u32;
                }
            }
            (cells.len() - 1) as u32
        }
    }
}

/// One substitution or adjacent transposition.
fn typo<R: Rng + ?Sized>(s: &str, rng: &mut R) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let letters: Vec<usize> = (0..chars.len()).filter(|&i| chars[i] != ' ').collect();
    if letters.len() < 2 {
        return s.to_string();
    }
    let i = letters[rng.random_range(0..letters.len())];
    if rng.random::<bool>() && i + 1 < chars.len() && chars[i + 1] != ' ' {
        chars.swap(i, i + 1);
    } else {
        let c = (b'A' + rng.random_range(0..26u8)) as char;
        chars[i] = c;
    }
    chars.into_iter().collect()
}

fn shift<R: Rng + ?Sized>(v: i64, lo: i64, hi: i64, max: i64, rng: &mut R) -> i64 {
    let step = rng.random_range(1..=max);
    let signed = if rng.random::<bool>() { step } else { -step };
    (v + signed).clamp(lo, hi)
}

fn emit<R: Rng + ?Sized>(id: &Identity, d: &Distortion, rng: &mut R) -> Vec<String> {
    let mut out = Vec::with_capacity(6);
    for name in [&id.given, &id.family] {
        let v = if rng.random::<f64>() < d.typo { typo(name, rng) } else { name.clone() };
        out.push(v);
    }
    let shifted = rng.random::<f64>() < d.date_shift;
    let which = rng.random_range(0..3);
    let date = [
        (id.year, YEARS.0 - 5, YEARS.1 + 5),
        (id.month, 1, 12),
        (id.day, 1, 31),
    ];
    for (f, &(v, lo, hi)) in date.iter().enumerate() {
        let v = if shifted && f == which { shift(v, lo, hi, d.max_shift, rng) } else { v };
        out.push(v.to_string());
    }
    out.push(format!("P{:02}", id.place));
    for v in out.iter_mut() {
        if rng.random::<f64>() < d.missing {
            v.clear();
        }
    }
    out
}

pub fn sim_schema() -> FieldSchema {
    let f = |name: &str, kind| FieldSpec {
        name: name.into(),
        kind,
        required: false,
    };
    FieldSchema::new(vec![
        f("given", FieldKind::Name),
        f("family", FieldKind::Name),
        f("year", FieldKind::Year),
        f("month", FieldKind::Month),
        f("day", FieldKind::Day),
        f("place", FieldKind::Categorical),
    ])
    .expect("fixed schema is valid")
}

/// A comparison config suited to the simulated fields: exact blocking on
/// place, which the distortions never alter, and clear name disagreements
/// fixed as non-coreferent.
pub const SIM_COMPARISON: &str = "\
[field given]
[field family]
[field year]
[field month]
[field day]
[field place]
[blocking]
field = place
[rules]
fix = given >= 3
fix = family >= 3
";

/// One emitted record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimRecord {
    pub list: usize,
    pub label: String,
    pub individual: usize,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub k: usize,
    /// Records per list (1-based list `k` at index `k - 1`).
    pub lists: Vec<Vec<SimRecord>>,
    pub histories: Vec<u32>,
    pub true_table: ContingencyTable,
    pub n0: u64,
}

pub fn generate(spec: &SimSpec) -> Result<SimOutput> {
    spec.validate()?;
    let k = spec.lists;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen = HashSet::new();
    let mut people = Vec::with_capacity(spec.population);
    while people.len() < spec.population {
        let id = draw_identity(&mut rng);
        let key = (id.given.clone(), id.family.clone(), id.year, id.month, id.day);
        if seen.insert(key) {
            people.push(id);
        }
    }
    let histories: Vec<u32> = (0..spec.population)
        .map(|_| draw_history(&spec.capture, k, &mut rng))
        .collect();
    let mut lists: Vec<Vec<SimRecord>> = vec![Vec::new(); k];
    for (i, (id, &h)) in people.iter().zip(&histories).enumerate() {
        for (b, list) in lists.iter_mut().enumerate() {
            if h >> b & 1 == 0 {
                continue;
            }
            let copies = if rng.random::<f64>() < spec.distortion.duplicates { 2 } else { 1 };
            for _ in 0..copies {
                list.push(SimRecord {
                    list: b + 1,
                    label: String::new(),
                    individual: i,
                    values: emit(id, &spec.distortion, &mut rng),
                });
            }
        }
    }
    for (b, list) in lists.iter_mut().enumerate() {
        list.shuffle(&mut rng);
        for (row, r) in list.iter_mut().enumerate() {
            r.label = format!("L{}-{:05}", b + 1, row + 1);
        }
    }
    let mut dense = vec![0u64; 1 << k];
    for &h in &histories {
        dense[h as usize] += 1;
    }
    Ok(SimOutput {
        k,
        lists,
        true_table: ContingencyTable::from_dense(k, &dense)?,
        n0: dense[0],
        histories,
    })
}

impl SimOutput {
    pub fn list_paths(&self, dir: &Path) -> Vec<PathBuf> {
        (1..=self.k).map(|b| dir.join(format!("list{b}.csv"))).collect()
    }

    /// Individual behind each record, in load order (list 1 first).
    pub fn truth(&self) -> Vec<usize> {
        self.lists.iter().flatten().map(|r| r.individual).collect()
    }

    /// Writes `list*.csv`, `truth.csv`, `true_table.csv`, `schema.txt` and
    /// `comparison.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let schema = sim_schema();
        for (list, path) in self.lists.iter().zip(self.list_paths(dir)) {
            let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
            let mut header = vec![LABEL_COLUMN.to_string()];
            header.extend(schema.fields().iter().map(|f| f.name.clone()));
            w.write_record(&header).map_err(|e| Error::csv(&path, e))?;
            for r in list {
                let mut row = vec![r.label.clone()];
                row.extend(r.values.iter().cloned());
                w.write_record(&row).map_err(|e| Error::csv(&path, e))?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join("truth.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        w.write_record(["list", "row", LABEL_COLUMN, "individual"])
            .map_err(|e| Error::csv(&path, e))?;
        for list in &self.lists {
            for (row, r) in list.iter().enumerate() {
                w.write_record([
                    r.list.to_string(),
                    (row + 1).to_string(),
                    r.label.clone(),
                    r.individual.to_string(),
                ])
                .map_err(|e| Error::csv(&path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.true_table.write_complete_csv(&dir.join("true_table.csv"), self.n0)?;
        let p = dir.join("schema.txt");
        fs::write(&p, schema.to_text()).map_err(|e| Error::io(&p, e))?;
        let p = dir.join("comparison.txt");
        fs::write(&p, SIM_COMPARISON).map_err(|e| Error::io(&p, e))?;
        Ok(())
    }
}
