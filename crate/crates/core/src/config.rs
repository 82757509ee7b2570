//! Experiment configuration: flat `section.key = value` lines, `#` comments.
//! Unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fitting::FitConfig;
use crate::fom::{TimeConfig, DEFAULT_DISSIPATION_SCALE};
use crate::grid::Grid;
use crate::initial::InitialCondition;
use crate::physics::{DissipationSpec, Model};
use crate::rom::RomVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    Linear,
    Quadratic,
    Rational,
}

impl ManifoldKind {
    pub fn name(&self) -> &'static str {
        match self {
            ManifoldKind::Linear => "linear",
            ManifoldKind::Quadratic => "quadratic",
            ManifoldKind::Rational => "rational",
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ManifoldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ManifoldKind::Linear),
            "quadratic" => Ok(ManifoldKind::Quadratic),
            "rational" => Ok(ManifoldKind::Rational),
            other => Err(Error::InvalidArgument(format!("unknown manifold kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSection {
    /// Manifolds to build; each is stored under its kind name.
    pub kinds: Vec<ManifoldKind>,
    /// Build the linear basis from `[X, η(X)]`.
    pub augment: bool,
    pub fit: FitConfig,
}

/// One reduced model run, written `manifold/variant[/tse]` in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RomRun {
    pub manifold: ManifoldKind,
    pub variant: RomVariant,
    pub tse: bool,
}

impl RomRun {
    /// Label used in output file names, e.g. `rational_entropy_stable_tse`.
    pub fn name(&self) -> String {
        let tse = if self.tse { "_tse" } else { "" };
        format!("{}_{}{tse}", self.manifold, self.variant)
    }
}

impl FromStr for RomRun {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('/').map(str::trim).collect();
        let tse = match parts.as_slice() {
            [_, _] => false,
            [_, _, "tse"] => true,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "ROM run `{s}` is not of the form manifold/variant[/tse]"
                )))
            }
        };
        Ok(Self {
            manifold: parts[0].parse()?,
            variant: parts[1].parse()?,
            tse,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomSection {
    pub runs: Vec<RomRun>,
    pub dissipation: DissipationSpec,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub n_cells: usize,
    pub domain: (f64, f64),
    pub time: TimeConfig,
    pub ic: InitialCondition,
    pub fom_dissipation: DissipationSpec,
    pub dissipation_scale: f64,
    pub fit: FitSection,
    pub rom: RomSection,
    /// ROM run names gathered by the report stage.
    pub report_runs: Vec<String>,
    /// Dimension of the linear basis used for the ideal projection error.
    pub report_proj_r: Option<usize>,
}

const KEYS: &[&str] = &[
    "model.name",
    "model.g",
    "model.gamma",
    "grid.n_cells",
    "grid.a",
    "grid.b",
    "time.dt",
    "time.t_end",
    "time.snapshot_stride",
    "ic.name",
    "fom.dissipation",
    "fom.dissipation_scale",
    "fit.kinds",
    "fit.r",
    "fit.lambda",
    "fit.augment",
    "fit.max_iters",
    "fit.gradient_tol",
    "fit.step_tol",
    "fit.cost_tol",
    "fit.initial_damping",
    "fit.warm_start",
    "fit.multi_start",
    "rom.runs",
    "rom.dissipation",
    "rom.t_end",
    "report.runs",
    "report.proj_r",
];

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "line {}: unknown key `{key}`",
                    lineno + 1
                )));
            }
            if map
                .insert(key.clone(), (lineno + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::InvalidArgument(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        Ok(Self(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|e| {
                Error::InvalidArgument(format!("line {line}: bad value `{v}` for `{key}`: {e}"))
            }),
        }
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| Error::InvalidArgument(format!("missing required key `{key}`")))
    }

    fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        let Some((line, v)) = self.0.get(key) else {
            return Ok(None);
        };
        let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            return Err(Error::InvalidArgument(format!("line {line}: `{key}` is empty")));
        }
        items
            .into_iter()
            .map(|item| {
                item.parse::<T>().map_err(|e| {
                    Error::InvalidArgument(format!("line {line}: bad entry `{item}` in `{key}`: {e}"))
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn has(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let e = Entries::parse(text)?;
        let mut model: Model = e.require("model.name")?;
        match &mut model {
            Model::ShallowWater { g } => {
                if let Some(v) = e.get("model.g")? {
                    *g = v;
                }
            }
            Model::Euler { gamma } => {
                if let Some(v) = e.get("model.gamma")? {
                    *gamma = v;
                }
            }
            Model::Burgers => {}
        }
        let foreign = match model {
            Model::Burgers => ["model.g", "model.gamma"].as_slice(),
            Model::ShallowWater { .. } => &["model.gamma"],
            Model::Euler { .. } => &["model.g"],
        };
        if let Some(k) = foreign.iter().find(|k| e.has(k)) {
            return Err(Error::InvalidArgument(format!("`{k}` does not apply to {model}")));
        }
        model.validate()?;

        let ic: InitialCondition = e.require("ic.name")?;
        ic.check_model(&model)?;
        let (da, db) = ic.default_domain();
        let domain = (e.get("grid.a")?.unwrap_or(da), e.get("grid.b")?.unwrap_or(db));
        if !(domain.1 > domain.0) {
            return Err(Error::InvalidArgument("grid.b must exceed grid.a".into()));
        }
        let n_cells: usize = e.require("grid.n_cells")?;
        if n_cells == 0 {
            return Err(Error::InvalidArgument("grid.n_cells must be positive".into()));
        }
        let time = TimeConfig {
            dt: e.require("time.dt")?,
            t_end: e.require("time.t_end")?,
            snapshot_stride: e.get("time.snapshot_stride")?.unwrap_or(5),
        };
        crate::fom::step_count(time.dt, time.t_end)?;
        if time.snapshot_stride == 0 {
            return Err(Error::InvalidArgument("time.snapshot_stride must be positive".into()));
        }

        let default_spec = match model {
            Model::Burgers => DissipationSpec::Llf,
            _ => DissipationSpec::Roe1,
        };
        let fom_dissipation = e.get("fom.dissipation")?.unwrap_or(default_spec);
        fom_dissipation.validate_for(&model)?;
        let dissipation_scale = e
            .get("fom.dissipation_scale")?
            .unwrap_or(DEFAULT_DISSIPATION_SCALE);
        if !(dissipation_scale >= 0.0 && f64::is_finite(dissipation_scale)) {
            return Err(Error::InvalidArgument(
                "fom.dissipation_scale must be non-negative".into(),
            ));
        }

        let kinds: Vec<ManifoldKind> =
            e.get_list("fit.kinds")?.unwrap_or_else(|| vec![ManifoldKind::Rational]);
        if let Some(k) = kinds.iter().enumerate().find(|(i, k)| kinds[..*i].contains(k)) {
            return Err(Error::InvalidArgument(format!("fit.kinds lists {} twice", k.1)));
        }
        let mut fit = FitConfig::new(e.get("fit.r")?.unwrap_or(15));
        if let Some(v) = e.get("fit.lambda")? {
            fit.lambda = v;
        }
        if let Some(v) = e.get("fit.max_iters")? {
            fit.lm.max_iters = v;
        }
        if let Some(v) = e.get("fit.gradient_tol")? {
            fit.lm.gradient_tol = v;
        }
        if let Some(v) = e.get("fit.step_tol")? {
            fit.lm.step_tol = v;
        }
        if let Some(v) = e.get("fit.cost_tol")? {
            fit.lm.cost_tol = v;
        }
        if let Some(v) = e.get("fit.initial_damping")? {
            fit.lm.initial_damping = v;
        }
        if let Some(v) = e.get("fit.warm_start")? {
            fit.warm_start = v;
        }
        if let Some(v) = e.get("fit.multi_start")? {
            fit.multi_start = v;
        }
        if fit.r == 0 {
            return Err(Error::InvalidArgument("fit.r must be positive".into()));
        }
        fit.lm.validate()?;
        let augment = e.get("fit.augment")?.unwrap_or(false);
        if augment && !kinds.contains(&ManifoldKind::Linear) {
            return Err(Error::InvalidArgument(
                "fit.augment applies to the linear manifold only".into(),
            ));
        }
        let fit = FitSection { kinds, augment, fit };

        let default_run = RomRun {
            manifold: *fit.kinds.last().expect("kinds is non-empty"),
            variant: RomVariant::EntropyStable,
            tse: false,
        };
        let runs: Vec<RomRun> = e.get_list("rom.runs")?.unwrap_or_else(|| vec![default_run]);
        for (i, run) in runs.iter().enumerate() {
            if !fit.kinds.contains(&run.manifold) {
                return Err(Error::InvalidArgument(format!(
                    "ROM run `{}` uses a manifold missing from fit.kinds",
                    run.name()
                )));
            }
            if runs[..i].contains(run) {
                return Err(Error::InvalidArgument(format!("ROM run `{}` listed twice", run.name())));
            }
        }
        let rom_dissipation = e.get("rom.dissipation")?.unwrap_or(fom_dissipation);
        rom_dissipation.validate_for(&model)?;
        let rom_t_end = e.get("rom.t_end")?.unwrap_or(time.t_end);
        crate::fom::step_count(time.dt, rom_t_end)?;
        let rom = RomSection {
            runs,
            dissipation: rom_dissipation,
            t_end: rom_t_end,
        };

        let report_runs: Vec<String> = match e.get_list::<String>("report.runs")? {
            Some(list) => list,
            None => rom.runs.iter().map(RomRun::name).collect(),
        };
        for v in &report_runs {
            check_label(v)?;
        }

        Ok(Self {
            model,
            n_cells,
            domain,
            time,
            ic,
            fom_dissipation,
            dissipation_scale,
            fit,
            rom,
            report_runs,
            report_proj_r: e.get("report.proj_r")?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::uniform(self.n_cells, self.model.n_vars(), self.domain.0, self.domain.1)
    }

    pub fn rom_time(&self) -> TimeConfig {
        TimeConfig {
            t_end: self.rom.t_end,
            ..self.time
        }
    }
}

fn check_label(s: &str) -> Result<()> {
    let ok = !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "name `{s}` may only contain letters, digits, `_` and `-`"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BURGERS: &str = "
        # inviscid Burgers
        model.name = burgers
        grid.n_cells = 300
        time.dt = 0.001
        time.t_end = 1
        ic.name = burgers_sine
        fit.kinds = linear, rational
    ";

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::parse(BURGERS).unwrap();
        assert_eq!(c.model, Model::Burgers);
        assert_eq!(c.domain, (0.0, 1.0));
        assert_eq!(c.time.snapshot_stride, 5);
        assert_eq!(c.fom_dissipation, DissipationSpec::Llf);
        assert_eq!(c.fit.kinds, vec![ManifoldKind::Linear, ManifoldKind::Rational]);
        assert_eq!(c.fit.fit.r, 15);
        assert_eq!(c.rom.runs.len(), 1);
        assert_eq!(c.rom.runs[0].name(), "rational_entropy_stable");
        assert_eq!(c.report_runs, vec!["rational_entropy_stable".to_string()]);
    }

    #[test]
    fn rom_runs() {
        let text = format!("{BURGERS}\nrom.runs = rational/entropy_stable/tse, linear/generic");
        let c = ExperimentConfig::parse(&text).unwrap();
        let names: Vec<String> = c.rom.runs.iter().map(RomRun::name).collect();
        assert_eq!(names, ["rational_entropy_stable_tse", "linear_generic"]);
        assert!(ExperimentConfig::parse(&format!("{BURGERS}\nrom.runs = quadratic/generic")).is_err());
        assert!(ExperimentConfig::parse(&format!("{BURGERS}\nrom.runs = linear/generic/x")).is_err());
        assert!("linear".parse::<RomRun>().is_err());
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let err = ExperimentConfig::parse(&format!("{BURGERS}\nfit.rank = 3")).unwrap_err();
        assert!(err.to_string().contains("unknown key `fit.rank`"));
        assert!(ExperimentConfig::parse(&format!("{BURGERS}\ntime.dt = 0.002")).is_err());
        assert!(ExperimentConfig::parse(&BURGERS.replace("linear, rational", "linear, linear")).is_err());
    }

    #[test]
    fn rejects_inconsistent_values() {
        let bad_model = BURGERS.replace("burgers\n", "plasma\n");
        assert!(ExperimentConfig::parse(&bad_model).is_err());
        assert!(ExperimentConfig::parse(&format!("{BURGERS}\nmodel.g = 9.81")).is_err());
        assert!(ExperimentConfig::parse(&format!("{BURGERS}\nfom.dissipation = roe1")).is_err());
        assert!(ExperimentConfig::parse(&BURGERS.replace("time.t_end = 1", "time.t_end = 0.0015"))
            .is_err());
        assert!(ExperimentConfig::parse(&format!("{BURGERS}\nreport.runs = a/b")).is_err());
        assert!(ExperimentConfig::parse("model.name burgers").is_err());
    }

    #[test]
    fn model_parameters() {
        let text = "
            model.name = shallow_water
            model.g = 2
            grid.n_cells = 10
            time.dt = 0.1
            time.t_end = 1
            ic.name = sw_dambreak
        ";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.model, Model::ShallowWater { g: 2.0 });
        assert_eq!(c.domain, (-1.0, 1.0));
        assert_eq!(c.rom.dissipation, DissipationSpec::Roe1);
    }
}
