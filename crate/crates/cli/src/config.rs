//! Plain-text run configuration.
//!
//! ```text
//! command = spectrum
//! output = out/loop
//!
//! [system]
//! xi11 = 30          # modulus in units of γ
//! xi12 = 30, 0.2     # modulus, phase in units of π
//!
//! [sweep]
//! min = -100
//! max = 100
//! points = 2001
//! ```
//!
//! Sections that a command does not use are accepted and ignored.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use loopres_core::{Complex64, FiberCoupling, LoopSystem, Pair};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line, when the problem is tied to one.
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    PhaseSweep,
    Average,
    Eigen,
    Periodicity,
    Taylor,
    SenseParticle,
    SenseSlab,
    FdtdRun,
    FdtdSweep,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Spectrum,
        Command::PhaseSweep,
        Command::Average,
        Command::Eigen,
        Command::Periodicity,
        Command::Taylor,
        Command::SenseParticle,
        Command::SenseSlab,
        Command::FdtdRun,
        Command::FdtdSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::PhaseSweep => "phase-sweep",
            Command::Average => "average",
            Command::Eigen => "eigen",
            Command::Periodicity => "periodicity",
            Command::Taylor => "taylor",
            Command::SenseParticle => "sense-particle",
            Command::SenseSlab => "sense-slab",
            Command::FdtdRun => "fdtd-run",
            Command::FdtdSweep => "fdtd-sweep",
        }
    }

    fn needs(self) -> &'static [&'static str] {
        match self {
            Command::Spectrum => &["system", "sweep"],
            Command::PhaseSweep => &["system", "phase"],
            Command::Average => &["system", "sweep", "phase"],
            Command::Eigen => &["system"],
            Command::Periodicity => &["system", "periodicity"],
            Command::Taylor => &["system", "sweep", "taylor"],
            Command::SenseParticle => &["system", "sweep", "particle"],
            Command::SenseSlab => &["system", "sweep", "slab"],
            Command::FdtdRun | Command::FdtdSweep => &["fdtd"],
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command '{s}'"))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A complex number as written in a config: modulus and phase/π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polar {
    pub modulus: f64,
    pub phase_pi: f64,
}

impl Polar {
    pub fn value(self) -> Complex64 {
        Complex64::from_polar(self.modulus, self.phase_pi * std::f64::consts::PI)
    }
}

/// Canonical order of the ξ entries.
pub const XI_PAIRS: [(usize, usize); 6] = [(1, 1), (2, 2), (3, 3), (1, 2), (1, 3), (2, 3)];

#[derive(Debug, Clone, PartialEq)]
pub struct SystemBlock {
    /// Entries in [`XI_PAIRS`] order; absent means zero.
    pub xi: [Option<Polar>; 6],
    pub delta: f64,
    pub gamma: [f64; 3],
    /// `None` means critical coupling.
    pub kappa: Option<f64>,
    pub drive: Polar,
}

impl Default for SystemBlock {
    fn default() -> Self {
        Self {
            xi: [None; 6],
            delta: 0.0,
            gamma: [1.0; 3],
            kappa: None,
            drive: Polar {
                modulus: 1.0,
                phase_pi: 0.0,
            },
        }
    }
}

impl SystemBlock {
    pub fn build(&self) -> LoopSystem {
        let mut sys = LoopSystem::new()
            .with_detuning(self.delta)
            .with_gamma(self.gamma)
            .with_drive(self.drive.value());
        if let Some(k) = self.kappa {
            sys = sys.with_coupling(FiberCoupling::Fixed(k));
        }
        for (slot, (i, j)) in self.xi.iter().zip(XI_PAIRS) {
            if let Some(p) = slot {
                sys.set_xi(Pair::new(i, j).expect("static pair"), p.value());
            }
        }
        sys
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepBlock {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            min: -100.0,
            max: 100.0,
            points: 2001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseBlock {
    pub pair: Pair,
    pub delta: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicityBlock {
    pub pair: Pair,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorBlock {
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleBlock {
    pub resonator: usize,
    pub mode_number: u32,
    pub contrast: f64,
    pub strength: f64,
    /// Degrees.
    pub theta: f64,
    pub theta_perturbed: f64,
    pub compose: bool,
    pub prominence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabBlock {
    pub pair: Pair,
    pub background: Polar,
    pub reference: Polar,
    pub eps_ref: f64,
    pub eps_background: f64,
    pub eps: f64,
    pub eps_perturbed: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdtdMethod {
    Continuous,
    Pulse,
}

impl FdtdMethod {
    fn name(self) -> &'static str {
        match self {
            FdtdMethod::Continuous => "cw",
            FdtdMethod::Pulse => "pulse",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Wavelengths {
    List(Vec<f64>),
    Band { min: f64, max: f64, points: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdtdBlock {
    /// Cell size in nm.
    pub cell: f64,
    pub wavelengths: Wavelengths,
    pub method: FdtdMethod,
    pub ramp_cycles: f64,
    pub window_cycles: f64,
    pub tolerance: f64,
    pub max_cycles: f64,
    pub pulse_cycles: f64,
    /// Resonator (1-based), azimuth in degrees, permittivity.
    pub particle: Option<(usize, f64, f64)>,
    /// Two resonators (1-based) and the slab permittivity.
    pub slab: Option<(usize, usize, f64)>,
    pub snapshot: bool,
}

impl Default for FdtdBlock {
    fn default() -> Self {
        Self {
            cell: 30.0,
            wavelengths: Wavelengths::List(Vec::new()),
            method: FdtdMethod::Continuous,
            ramp_cycles: 10.0,
            window_cycles: 20.0,
            tolerance: 5e-3,
            max_cycles: 4000.0,
            pulse_cycles: 1500.0,
            particle: None,
            slab: None,
            snapshot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub output: Option<String>,
    pub system: Option<SystemBlock>,
    pub sweep: Option<SweepBlock>,
    pub phase: Option<PhaseBlock>,
    pub periodicity: Option<PeriodicityBlock>,
    pub taylor: Option<TaylorBlock>,
    pub particle: Option<ParticleBlock>,
    pub slab: Option<SlabBlock>,
    pub fdtd: Option<FdtdBlock>,
}

const SECTIONS: [&str; 8] = ["system", "sweep", "phase", "periodicity", "taylor", "particle", "slab", "fdtd"];

struct Entry {
    line: usize,
    key: String,
    value: String,
    used: bool,
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.iter_mut().find(|e| e.key == key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn finish(&self) -> Result<(), ConfigError> {
        match self.entries.iter().find(|e| !e.used) {
            Some(e) => Err(ConfigError::at(
                e.line,
                format!("unknown key '{}' in {}", e.key, self.label()),
            )),
            None => Ok(()),
        }
    }

    fn label(&self) -> String {
        if self.name.is_empty() {
            "the top level".into()
        } else {
            format!("[{}]", self.name)
        }
    }

    fn parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| ConfigError::at(line, format!("malformed value '{v}' for '{key}'"))),
        }
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => parse_f64(&v, line, key).map(Some),
        }
    }

    fn required_number(&mut self, key: &str) -> Result<f64, ConfigError> {
        let label = self.label();
        let line = self.line;
        self.number(key)?
            .ok_or_else(|| ConfigError::at(line, format!("{label} needs '{key}'")))
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Result<T, ConfigError> {
        let label = self.label();
        let line = self.line;
        self.parsed(key)?
            .ok_or_else(|| ConfigError::at(line, format!("{label} needs '{key}'")))
    }

    fn numbers(&mut self, key: &str) -> Result<Option<(usize, Vec<f64>)>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => {
                let list = v
                    .split(',')
                    .map(|s| parse_f64(s.trim(), line, key))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Some((line, list)))
            }
        }
    }

    fn polar(&mut self, key: &str) -> Result<Option<Polar>, ConfigError> {
        match self.numbers(key)? {
            None => Ok(None),
            Some((line, v)) => match v.as_slice() {
                [m] => Ok(Some(Polar {
                    modulus: *m,
                    phase_pi: 0.0,
                })),
                [m, p] => Ok(Some(Polar {
                    modulus: *m,
                    phase_pi: *p,
                })),
                _ => Err(ConfigError::at(
                    line,
                    format!("'{key}' takes 'modulus' or 'modulus, phase/pi'"),
                )),
            },
        }
    }

    fn pair(&mut self, key: &str) -> Result<Option<Pair>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => parse_pair(&v).map(Some).ok_or_else(|| {
                ConfigError::at(line, format!("'{key}' must name two resonators, e.g. 12, got '{v}'"))
            }),
        }
    }

    fn required_pair(&mut self, key: &str) -> Result<Pair, ConfigError> {
        let label = self.label();
        let line = self.line;
        self.pair(key)?
            .ok_or_else(|| ConfigError::at(line, format!("{label} needs '{key}'")))
    }
}

fn parse_f64(s: &str, line: usize, key: &str) -> Result<f64, ConfigError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ConfigError::at(line, format!("malformed number '{s}' for '{key}'"))),
    }
}

fn parse_pair(s: &str) -> Option<Pair> {
    let digits: Vec<usize> = s
        .chars()
        .filter(|c| !c.is_whitespace() && *c != ',')
        .map(|c| c.to_digit(10).map(|d| d as usize))
        .collect::<Option<Vec<_>>>()?;
    match digits.as_slice() {
        [i, j] => Pair::new(*i, *j).ok(),
        _ => None,
    }
}

fn xi_slot(key: &str) -> Option<usize> {
    let pair = parse_pair(key.strip_prefix("xi")?)?;
    XI_PAIRS
        .iter()
        .position(|&(i, j)| Pair::new(i, j).ok() == Some(pair))
}

fn split_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections = vec![Section {
        name: String::new(),
        line: 1,
        entries: Vec::new(),
    }];
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, format!("malformed section header '{content}'")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::at(line, format!("unknown section [{name}]")));
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(ConfigError::at(line, format!("duplicate section [{name}]")));
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, format!("expected 'key = value', got '{content}'")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::at(line, "empty key"));
        }
        let section = sections.last_mut().expect("top level always present");
        let duplicate = section.entries.iter().any(|e| {
            e.key == key || (xi_slot(&e.key).is_some() && xi_slot(&e.key) == xi_slot(&key))
        });
        if duplicate {
            return Err(ConfigError::at(line, format!("duplicate key '{key}'")));
        }
        section.entries.push(Entry {
            line,
            key,
            value,
            used: false,
        });
    }
    Ok(sections)
}

fn parse_system(s: &mut Section) -> Result<SystemBlock, ConfigError> {
    let mut block = SystemBlock::default();
    let xi_keys: Vec<(String, usize)> = s
        .entries
        .iter()
        .filter_map(|e| xi_slot(&e.key).map(|slot| (e.key.clone(), slot)))
        .collect();
    for (key, slot) in xi_keys {
        block.xi[slot] = s.polar(&key)?;
    }
    if let Some(d) = s.number("delta")? {
        block.delta = d;
    }
    if let Some((line, g)) = s.numbers("gamma")? {
        block.gamma = match g.as_slice() {
            [v] => [*v; 3],
            [a, b, c] => [*a, *b, *c],
            _ => return Err(ConfigError::at(line, "'gamma' takes one value or three")),
        };
    }
    if let Some((line, v)) = s.take("kappa") {
        block.kappa = if v == "critical" {
            None
        } else {
            Some(parse_f64(&v, line, "kappa")?)
        };
    }
    if let Some(p) = s.polar("drive")? {
        block.drive = p;
    }
    Ok(block)
}

fn parse_sweep(s: &mut Section) -> Result<SweepBlock, ConfigError> {
    let mut block = SweepBlock::default();
    if let Some(v) = s.number("min")? {
        block.min = v;
    }
    if let Some(v) = s.number("max")? {
        block.max = v;
    }
    if let Some(v) = s.parsed("points")? {
        block.points = v;
    }
    Ok(block)
}

fn parse_particle(s: &mut Section) -> Result<ParticleBlock, ConfigError> {
    Ok(ParticleBlock {
        resonator: s.required("resonator")?,
        mode_number: s.required("mode_number")?,
        contrast: s.number("contrast")?.unwrap_or(1.0),
        strength: s.required_number("strength")?,
        theta: s.required_number("theta")?,
        theta_perturbed: s.required_number("theta_perturbed")?,
        compose: s.parsed("compose")?.unwrap_or(false),
        prominence: s.number("prominence")?.unwrap_or(0.02),
    })
}

fn parse_slab(s: &mut Section) -> Result<SlabBlock, ConfigError> {
    let zero = Polar {
        modulus: 0.0,
        phase_pi: 0.0,
    };
    let line = s.line;
    Ok(SlabBlock {
        pair: s.required_pair("pair")?,
        background: s.polar("background")?.unwrap_or(zero),
        reference: s
            .polar("reference")?
            .ok_or_else(|| ConfigError::at(line, "[slab] needs 'reference'"))?,
        eps_ref: s.required_number("eps_ref")?,
        eps_background: s.number("eps_background")?.unwrap_or(1.0),
        eps: s.required_number("eps")?,
        eps_perturbed: s.required_number("eps_perturbed")?,
        prominence: s.number("prominence")?.unwrap_or(0.02),
    })
}

fn parse_fdtd(s: &mut Section) -> Result<FdtdBlock, ConfigError> {
    let mut block = FdtdBlock::default();
    if let Some(v) = s.number("cell")? {
        block.cell = v;
    }
    let list = s.numbers("wavelengths")?;
    let band = s.numbers("band")?;
    block.wavelengths = match (list, band) {
        (Some((_, l)), None) => Wavelengths::List(l),
        (None, Some((line, b))) => match b.as_slice() {
            [min, max, n] if *n >= 1.0 && n.fract() == 0.0 => Wavelengths::Band {
                min: *min,
                max: *max,
                points: *n as usize,
            },
            _ => return Err(ConfigError::at(line, "'band' takes 'min, max, points'")),
        },
        (Some((line, _)), Some(_)) => {
            return Err(ConfigError::at(line, "give either 'wavelengths' or 'band', not both"))
        }
        (None, None) => return Err(ConfigError::at(s.line, "[fdtd] needs 'wavelengths' or 'band'")),
    };
    if let Some((line, v)) = s.take("method") {
        block.method = match v.as_str() {
            "cw" => FdtdMethod::Continuous,
            "pulse" => FdtdMethod::Pulse,
            _ => return Err(ConfigError::at(line, format!("unknown method '{v}', expected cw or pulse"))),
        };
    }
    for (key, slot) in [
        ("ramp_cycles", &mut block.ramp_cycles),
        ("window_cycles", &mut block.window_cycles),
        ("tolerance", &mut block.tolerance),
        ("max_cycles", &mut block.max_cycles),
        ("pulse_cycles", &mut block.pulse_cycles),
    ] {
        if let Some(v) = s.number(key)? {
            *slot = v;
        }
    }
    if let Some((line, v)) = s.numbers("particle")? {
        block.particle = match v.as_slice() {
            [n, theta, eps] if n.fract() == 0.0 && *n >= 1.0 => Some((*n as usize, *theta, *eps)),
            _ => return Err(ConfigError::at(line, "'particle' takes 'resonator, theta_deg, eps'")),
        };
    }
    if let Some((line, v)) = s.numbers("slab")? {
        block.slab = match v.as_slice() {
            [a, b, eps] if a.fract() == 0.0 && b.fract() == 0.0 && *a >= 1.0 && *b >= 1.0 => {
                Some((*a as usize, *b as usize, *eps))
            }
            _ => return Err(ConfigError::at(line, "'slab' takes 'resonator, resonator, eps'")),
        };
    }
    if let Some(v) = s.parsed("snapshot")? {
        block.snapshot = v;
    }
    Ok(block)
}

/// Parses a config that must name its own command.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, None)
}

/// Parses a config; `command` takes precedence over the file's `command`.
pub fn parse_config_with(text: &str, command: Option<Command>) -> Result<RunConfig, ConfigError> {
    let mut sections = split_sections(text)?;
    let mut config = {
        let top = &mut sections[0];
        let from_file = match top.take("command") {
            None => None,
            Some((line, v)) => Some(v.parse::<Command>().map_err(|e| ConfigError::at(line, e))?),
        };
        let output = top.take("output").map(|(_, v)| v);
        top.finish()?;
        RunConfig {
            command: command.or(from_file).ok_or_else(|| ConfigError::global("missing command"))?,
            output,
            system: None,
            sweep: None,
            phase: None,
            periodicity: None,
            taylor: None,
            particle: None,
            slab: None,
            fdtd: None,
        }
    };
    for s in sections.iter_mut().skip(1) {
        match s.name.as_str() {
            "system" => config.system = Some(parse_system(s)?),
            "sweep" => config.sweep = Some(parse_sweep(s)?),
            "phase" => {
                config.phase = Some(PhaseBlock {
                    pair: s.required_pair("pair")?,
                    delta: s.number("delta")?.unwrap_or(0.0),
                    samples: s.parsed("samples")?.unwrap_or(256),
                })
            }
            "periodicity" => {
                config.periodicity = Some(PeriodicityBlock {
                    pair: s.required_pair("pair")?,
                    samples: s.parsed("samples")?.unwrap_or(256),
                })
            }
            "taylor" => {
                config.taylor = Some(TaylorBlock {
                    x: s.required_number("x")?,
                })
            }
            "particle" => config.particle = Some(parse_particle(s)?),
            "slab" => config.slab = Some(parse_slab(s)?),
            "fdtd" => config.fdtd = Some(parse_fdtd(s)?),
            _ => unreachable!("section names are checked while splitting"),
        }
        s.finish()?;
    }
    for block in config.command.needs() {
        if !sections.iter().any(|s| s.name == *block) {
            return Err(ConfigError::global(format!(
                "command '{}' needs a [{block}] section",
                config.command
            )));
        }
    }
    Ok(config)
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn polar(p: Polar) -> String {
    if p.phase_pi == 0.0 {
        num(p.modulus)
    } else {
        format!("{}, {}", num(p.modulus), num(p.phase_pi))
    }
}

fn pair(p: Pair) -> String {
    let (i, j) = p.resonators();
    format!("{i}{j}")
}

impl RunConfig {
    /// Text form that parses back to an identical config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "command = {}", self.command);
        if let Some(o) = &self.output {
            let _ = writeln!(w, "output = {o}");
        }
        if let Some(s) = &self.system {
            let _ = writeln!(w, "\n[system]");
            for (slot, (i, j)) in s.xi.iter().zip(XI_PAIRS) {
                if let Some(p) = slot {
                    let _ = writeln!(w, "xi{i}{j} = {}", polar(*p));
                }
            }
            let _ = writeln!(w, "delta = {}", num(s.delta));
            let g = s.gamma;
            let _ = writeln!(w, "gamma = {}, {}, {}", num(g[0]), num(g[1]), num(g[2]));
            match s.kappa {
                None => {
                    let _ = writeln!(w, "kappa = critical");
                }
                Some(k) => {
                    let _ = writeln!(w, "kappa = {}", num(k));
                }
            }
            let _ = writeln!(w, "drive = {}", polar(s.drive));
        }
        if let Some(s) = &self.sweep {
            let _ = writeln!(w, "\n[sweep]\nmin = {}\nmax = {}\npoints = {}", num(s.min), num(s.max), s.points);
        }
        if let Some(p) = &self.phase {
            let _ = writeln!(w, "\n[phase]\npair = {}\ndelta = {}\nsamples = {}", pair(p.pair), num(p.delta), p.samples);
        }
        if let Some(p) = &self.periodicity {
            let _ = writeln!(w, "\n[periodicity]\npair = {}\nsamples = {}", pair(p.pair), p.samples);
        }
        if let Some(t) = &self.taylor {
            let _ = writeln!(w, "\n[taylor]\nx = {}", num(t.x));
        }
        if let Some(p) = &self.particle {
            let _ = writeln!(w, "\n[particle]");
            let _ = writeln!(w, "resonator = {}\nmode_number = {}", p.resonator, p.mode_number);
            let _ = writeln!(w, "contrast = {}\nstrength = {}", num(p.contrast), num(p.strength));
            let _ = writeln!(w, "theta = {}\ntheta_perturbed = {}", num(p.theta), num(p.theta_perturbed));
            let _ = writeln!(w, "compose = {}\nprominence = {}", p.compose, num(p.prominence));
        }
        if let Some(s) = &self.slab {
            let _ = writeln!(w, "\n[slab]");
            let _ = writeln!(w, "pair = {}", pair(s.pair));
            let _ = writeln!(w, "background = {}\nreference = {}", polar(s.background), polar(s.reference));
            let _ = writeln!(w, "eps_ref = {}\neps_background = {}", num(s.eps_ref), num(s.eps_background));
            let _ = writeln!(w, "eps = {}\neps_perturbed = {}", num(s.eps), num(s.eps_perturbed));
            let _ = writeln!(w, "prominence = {}", num(s.prominence));
        }
        if let Some(f) = &self.fdtd {
            let _ = writeln!(w, "\n[fdtd]\ncell = {}", num(f.cell));
            match &f.wavelengths {
                Wavelengths::List(l) => {
                    let l: Vec<String> = l.iter().map(|v| num(*v)).collect();
                    let _ = writeln!(w, "wavelengths = {}", l.join(", "));
                }
                Wavelengths::Band { min, max, points } => {
                    let _ = writeln!(w, "band = {}, {}, {points}", num(*min), num(*max));
                }
            }
            let _ = writeln!(w, "method = {}", f.method.name());
            let _ = writeln!(w, "ramp_cycles = {}\nwindow_cycles = {}", num(f.ramp_cycles), num(f.window_cycles));
            let _ = writeln!(w, "tolerance = {}\nmax_cycles = {}", num(f.tolerance), num(f.max_cycles));
            let _ = writeln!(w, "pulse_cycles = {}", num(f.pulse_cycles));
            if let Some((n, theta, eps)) = f.particle {
                let _ = writeln!(w, "particle = {n}, {}, {}", num(theta), num(eps));
            }
            if let Some((a, b, eps)) = f.slab {
                let _ = writeln!(w, "slab = {a}, {b}, {}", num(eps));
            }
            let _ = writeln!(w, "snapshot = {}", f.snapshot);
        }
        out
    }
}
