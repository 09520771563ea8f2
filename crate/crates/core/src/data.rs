//! Editable lookup tables: action registry, package table, credentials table
//! and the Travis key deny-list. Each ships as a YAML file under `data/` and
//! can be replaced at run time.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::model::{parse_major, ActionRef, Command};
use crate::yaml::{parse_document, FrontendError};

const REGISTRY_YML: &str = include_str!("../data/registry.yml");
const PACKAGES_YML: &str = include_str!("../data/packages.yml");
const CREDENTIALS_YML: &str = include_str!("../data/credentials.yml");
const DENYLIST_YML: &str = include_str!("../data/denylist.yml");

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{what}: {source}")]
    Parse {
        what: &'static str,
        #[source]
        source: FrontendError,
    },
    #[error("{what}: {message}")]
    Schema { what: &'static str, message: String },
}

/// Parses a YAML data file into `T`; all scalars are read as strings.
pub(crate) fn load<T: DeserializeOwned>(text: &str, what: &'static str) -> Result<T, DataError> {
    let root = parse_document(text)
        .map_err(|e| DataError::Parse {
            what,
            source: e.into(),
        })?
        .ok_or(DataError::Schema {
            what,
            message: "document is empty".into(),
        })?;
    serde_json::from_value(root.to_json_strings()).map_err(|e| DataError::Schema {
        what,
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub action: String,
    pub version: String,
    #[serde(default)]
    pub minimum: Option<String>,
}

/// Purpose (`checkout`, `cache`, `setup-python`, …) → action and versions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRegistry {
    pub floor: String,
    pub actions: IndexMap<String, RegistryEntry>,
}

impl Default for ActionRegistry {
    fn default() -> Self {
        Self::from_yaml(REGISTRY_YML).expect("bundled registry is valid")
    }
}

impl ActionRegistry {
    pub fn from_yaml(text: &str) -> Result<Self, DataError> {
        let registry: Self = load(text, "action registry")?;
        registry.check()?;
        Ok(registry)
    }

    fn check(&self) -> Result<(), DataError> {
        let schema = |message: String| DataError::Schema {
            what: "action registry",
            message,
        };
        let floor = parse_major(&self.floor).ok_or_else(|| schema(format!("floor {:?} is not a version", self.floor)))?;
        for (purpose, entry) in &self.actions {
            let version = parse_major(&entry.version)
                .ok_or_else(|| schema(format!("{purpose}: version {:?} is not a version", entry.version)))?;
            let minimum = match &entry.minimum {
                Some(m) => parse_major(m).ok_or_else(|| schema(format!("{purpose}: minimum {m:?} is not a version")))?,
                None => floor,
            };
            if version < minimum {
                return Err(schema(format!(
                    "{purpose}: version {} is below its minimum v{minimum}",
                    entry.version
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, purpose: &str) -> Option<&RegistryEntry> {
        self.actions.get(purpose)
    }

    pub fn action_ref(&self, purpose: &str) -> Option<ActionRef> {
        self.get(purpose).map(|e| ActionRef::new(&e.action, &e.version))
    }

    /// Whether `action` is the registered action for `purpose`.
    pub fn is(&self, purpose: &str, action: &ActionRef) -> bool {
        self.get(purpose)
            .is_some_and(|e| e.action.eq_ignore_ascii_case(action.repository()))
    }

    /// Lowest maintained major version of `action`: its registry minimum, or
    /// the floor for unlisted first-party actions.
    pub fn minimum_major(&self, action: &ActionRef) -> Option<u64> {
        let repo = action.repository();
        match self.actions.values().find(|e| e.action.eq_ignore_ascii_case(repo)) {
            Some(e) => e.minimum.as_deref().or(Some(&self.floor)).and_then(parse_major),
            None if repo.starts_with("actions/") => parse_major(&self.floor),
            None => None,
        }
    }
}

/// Tool → install command, for tools Travis images preinstall.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PackageTable {
    pub entries: IndexMap<String, String>,
}

impl PackageTable {
    pub fn bundled() -> Self {
        Self::from_yaml(PACKAGES_YML).expect("bundled package table is valid")
    }

    pub fn from_yaml(text: &str) -> Result<Self, DataError> {
        load(text, "package table")
    }

    /// The table tool a command invokes, if any.
    pub fn tool_invoked_by(&self, cmd: &Command) -> Option<&str> {
        let exe = executable(&cmd.normalized)?;
        let module = python_module(&cmd.normalized);
        self.entries.keys().map(String::as_str).find(|tool| {
            exe == *tool || exe.starts_with(tool) || module == Some(*tool)
        })
    }

    pub fn install_command(&self, tool: &str) -> Option<&str> {
        self.entries.get(tool).map(String::as_str)
    }

    /// Whether `cmd` installs `tool` (`pip install nose`, `pip install nose==1.3`,
    /// or the table's own install command).
    pub fn installs(&self, cmd: &Command, tool: &str) -> bool {
        if self
            .install_command(tool)
            .is_some_and(|install| install.split_whitespace().eq(cmd.normalized.split_whitespace()))
        {
            return true;
        }
        let words: Vec<&str> = cmd.normalized.split_whitespace().collect();
        let Some(at) = words.iter().position(|w| *w == "install") else {
            return false;
        };
        words[at + 1..].iter().any(|w| {
            w.strip_prefix(tool)
                .is_some_and(|rest| rest.is_empty() || rest.starts_with(['=', '<', '>', '~', '!', '[']))
        })
    }
}

/// First word of a command that is not an environment assignment or `sudo`.
pub fn executable(normalized: &str) -> Option<&str> {
    normalized
        .split_whitespace()
        .find(|w| !(w.contains('=') && !w.starts_with('-')) && *w != "sudo")
}

/// `<tool>` for commands of the form `python -m <tool> …`.
pub fn python_module(normalized: &str) -> Option<&str> {
    let mut words = normalized.split_whitespace();
    let exe = words.next()?;
    if !exe.starts_with("python") {
        return None;
    }
    (words.next()? == "-m").then(|| words.next()).flatten()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialSpec {
    pub token_env: Vec<String>,
    #[serde(default)]
    pub inject: IndexMap<String, String>,
}

/// Tools that need a credential to talk to their service.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CredentialTable {
    pub tools: IndexMap<String, CredentialSpec>,
}

impl CredentialTable {
    pub fn bundled() -> Self {
        Self::from_yaml(CREDENTIALS_YML).expect("bundled credentials table is valid")
    }

    pub fn from_yaml(text: &str) -> Result<Self, DataError> {
        load(text, "credentials table")
    }

    /// The credentialed tool a command invokes.
    pub fn tool_invoked_by(&self, cmd: &Command) -> Option<(&str, &CredentialSpec)> {
        let exe = executable(&cmd.normalized)?;
        let module = python_module(&cmd.normalized);
        let base = exe.rsplit('/').next().unwrap_or(exe);
        self.tools
            .iter()
            .find(|(tool, _)| base == tool.as_str() || module == Some(tool.as_str()))
            .map(|(t, s)| (t.as_str(), s))
    }
}

/// Travis keys with no workflow meaning, by position.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenyList {
    #[serde(default)]
    pub top: BTreeSet<String>,
    #[serde(default)]
    pub job: BTreeSet<String>,
    #[serde(default)]
    pub strategy: BTreeSet<String>,
    #[serde(default)]
    pub matrix: BTreeSet<String>,
    #[serde(default)]
    pub step: BTreeSet<String>,
}

impl DenyList {
    pub fn bundled() -> Self {
        Self::from_yaml(DENYLIST_YML).expect("bundled deny-list is valid")
    }

    pub fn from_yaml(text: &str) -> Result<Self, DataError> {
        load(text, "deny-list")
    }
}
