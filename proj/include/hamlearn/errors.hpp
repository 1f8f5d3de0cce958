#pragma once

#include <stdexcept>
#include <string>

namespace hamlearn {

// Base for all domain errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// geom
struct NotSkew : Error { using Error::Error; };
struct NearPiAngle : Error { using Error::Error; };
struct TooFarFromSO3 : Error { using Error::Error; };

// autodiff
struct ShapeMismatch : Error { using Error::Error; };
struct NotScalar : Error { using Error::Error; };
struct DetachedGraph : Error { using Error::Error; };

// model
struct SingularMass : Error { using Error::Error; };

// percept
struct TooFewInliers : Error { using Error::Error; };
struct CountMismatch : Error { using Error::Error; };

// train
struct MissingStates : Error { using Error::Error; };
struct DivergedLoss : Error { using Error::Error; };

// control
struct DegenerateDirection : Error { using Error::Error; };
struct RankDeficientGain : Error { using Error::Error; };

// io / cli
struct ConfigError : Error { using Error::Error; };

}  // namespace hamlearn
