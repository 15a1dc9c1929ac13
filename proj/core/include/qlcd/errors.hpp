#pragma once

#include <stdexcept>
#include <string>

namespace qlcd {

// Every failure mode the library reports is a distinct exception type so
// callers can decide per condition whether to abort, skip, or fall back.

struct UnknownPreset : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidOverride : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteState : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutOfDomain : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FlatnessSingularity : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateSegment : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankDeficiency : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularKkt : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsufficientData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteObjective : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatVersionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeCorruption : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SamplingExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qlcd
