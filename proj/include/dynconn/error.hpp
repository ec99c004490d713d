#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dynconn {

enum class ErrorCode {
  // input / usage errors
  MalformedCsv,
  NonFiniteSample,
  DuplicateChannelName,
  InvalidRecording,
  BandOutOfRange,
  SignalTooShort,
  WindowLongerThanSignal,
  CyclicCouplingSpec,
  InvalidArgument,
  ConstantChannel,
  TooFewSegments,
  LengthMismatch,
  DegenerateRanks,
  ZeroWithinVariance,
  DegenerateMarginals,
  DimensionMismatch,
  TooFewSamplesPerClass,
  MalformedJson,
  Io,
  // internal defects
  NonFiniteScore,
  ZeroDegree,
  NonFiniteActivation,
};

std::string_view to_string(ErrorCode code);

// True for errors caused by a defect rather than by bad input.
bool is_internal(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dynconn
