use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Theorem(String),
    Oracle(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Theorem(_) => 4,
            Failure::Oracle(_) => 5,
        })
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Config(m) => format!("config error: {m}"),
            Failure::Numerical(m) => format!("numerical failure: {m}"),
            Failure::Theorem(m) => format!("theorem violation: {m}"),
            Failure::Oracle(m) => format!("oracle mismatch: {m}"),
        }
    }
}

impl From<egp_core::Error> for Failure {
    fn from(e: egp_core::Error) -> Self {
        use egp_core::Error as E;
        match e {
            E::InvalidLattice(_) | E::InvalidInput(_) | E::ChemicalPotential { .. } => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Numerical(format!("writing CSV: {e}"))
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Numerical(format!("writing output: {e}"))
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

/// CSV destination that starts with a `# config:` comment line.
pub struct Table {
    writer: csv::Writer<Box<dyn Write>>,
}

impl Table {
    pub fn create(path: Option<&Path>, config_line: &str, header: &[&str]) -> Outcome<Self> {
        let mut sink: Box<dyn Write> = match path {
            Some(p) => Box::new(
                File::create(p).map_err(|e| Failure::Config(format!("cannot create {}: {e}", p.display())))?,
            ),
            None => Box::new(io::stdout().lock()),
        };
        writeln!(sink, "# config: {config_line}")?;
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(header)?;
        Ok(Table { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Outcome {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Outcome {
        self.writer.flush()?;
        Ok(())
    }
}

/// Human-readable lines on standard error.
pub struct Summary {
    color: bool,
}

impl Summary {
    pub fn new(color: bool) -> Self {
        Summary { color }
    }

    pub fn line(&self, text: impl AsRef<str>) {
        eprintln!("{}", text.as_ref());
    }

    pub fn verdict(&self, ok: bool, text: impl AsRef<str>) {
        let tag = match (ok, self.color) {
            (true, true) => "\x1b[32mPASS\x1b[0m",
            (false, true) => "\x1b[31mFAIL\x1b[0m",
            (true, false) => "PASS",
            (false, false) => "FAIL",
        };
        eprintln!("{tag} {}", text.as_ref());
    }
}

/// Shortest round-trip form, switching to exponent notation outside
/// `[1e-4, 1e6)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e6).contains(&a) || !a.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}
