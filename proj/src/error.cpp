#include "dynconn/error.hpp"

namespace dynconn {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::NonFiniteSample: return "NonFiniteSample";
    case ErrorCode::DuplicateChannelName: return "DuplicateChannelName";
    case ErrorCode::InvalidRecording: return "InvalidRecording";
    case ErrorCode::BandOutOfRange: return "BandOutOfRange";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::WindowLongerThanSignal: return "WindowLongerThanSignal";
    case ErrorCode::CyclicCouplingSpec: return "CyclicCouplingSpec";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConstantChannel: return "ConstantChannel";
    case ErrorCode::TooFewSegments: return "TooFewSegments";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateRanks: return "DegenerateRanks";
    case ErrorCode::ZeroWithinVariance: return "ZeroWithinVariance";
    case ErrorCode::DegenerateMarginals: return "DegenerateMarginals";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooFewSamplesPerClass: return "TooFewSamplesPerClass";
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::Io: return "Io";
    case ErrorCode::NonFiniteScore: return "NonFiniteScore";
    case ErrorCode::ZeroDegree: return "ZeroDegree";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
  }
  return "Unknown";
}

bool is_internal(ErrorCode code) {
  return code == ErrorCode::NonFiniteScore || code == ErrorCode::ZeroDegree ||
         code == ErrorCode::NonFiniteActivation;
}

}  // namespace dynconn
