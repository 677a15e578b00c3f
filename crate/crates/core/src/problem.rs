use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// `P(ŷ | y, A=0) = P(ŷ | y, A=1)` for every `y`.
    #[default]
    EqualizedOdds,
    /// `P(ŷ | A=0) = P(ŷ | A=1)`.
    DemographicParity,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionMode {
    /// `E[d(Y, Ŷ)] ≤ D`.
    #[default]
    Global,
    /// `E[d(Y, Ŷ) | X = x] ≤ D` for every `x` with positive mass.
    PerX,
}
