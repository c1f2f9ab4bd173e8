#pragma once

#include <stdexcept>
#include <string>

namespace nsm {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Wavefunction with (numerically) vanishing L2 norm.
class ZeroNormError : public Error {
 public:
  using Error::Error;
};

// Tridiagonal solve produced a non-finite or degenerate result.
class LinearSolveFailure : public Error {
 public:
  using Error::Error;
};

// Too many sampled paths left the grid.
class DriftBlowupError : public Error {
 public:
  using Error::Error;
};

class EmptyEnsembleError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// p carries non-negligible mass where q is below the density floor.
class SupportMismatchError : public Error {
 public:
  using Error::Error;
};

// Measurement window has near-zero prior probability.
class NegligibleMassError : public Error {
 public:
  using Error::Error;
};

// Posterior assigns mass where the pre-measurement phase is unrecoverable.
class PhaseUndefinedError : public Error {
 public:
  using Error::Error;
};

// Consecutive-frame phase jump of psi_tilde/psi too large to track the branch.
class BranchAmbiguityError : public Error {
 public:
  using Error::Error;
};

class NotNormalizableError : public Error {
 public:
  using Error::Error;
};

// Time step violates the positivity bound of the Fokker-Planck scheme.
class StabilityViolationError : public Error {
 public:
  using Error::Error;
};

// Ensemble drift disagrees with the supplied drift field.
class InconsistentEnsembleError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

}  // namespace nsm
