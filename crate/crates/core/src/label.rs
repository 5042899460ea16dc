use std::fmt;
use std::str::FromStr;

/// Class of a loop trace. `Patient` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Control = 0,
    Patient = 1,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::Control, Label::Patient];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(Label::Control),
            1 => Some(Label::Patient),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Control => "control",
            Label::Patient => "patient",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "control" | "0" => Ok(Label::Control),
            "patient" | "1" => Ok(Label::Patient),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}
