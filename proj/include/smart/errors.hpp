#pragma once

#include <stdexcept>
#include <string>

namespace smart {

/// Base of every error the harness throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SMART_DEFINE_ERROR(Name)        \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

SMART_DEFINE_ERROR(InvalidValue);
SMART_DEFINE_ERROR(OutOfBounds);
SMART_DEFINE_ERROR(MissingSprite);
SMART_DEFINE_ERROR(IntensityOutOfRange);
SMART_DEFINE_ERROR(ParseError);
SMART_DEFINE_ERROR(InvalidSpec);
SMART_DEFINE_ERROR(ImageIoError);
SMART_DEFINE_ERROR(CorpusError);
SMART_DEFINE_ERROR(CorpusEmpty);
SMART_DEFINE_ERROR(InsufficientData);
SMART_DEFINE_ERROR(DegenerateVariance);
SMART_DEFINE_ERROR(EmptyReport);
SMART_DEFINE_ERROR(UnknownTheta);
SMART_DEFINE_ERROR(ReportFormatError);
SMART_DEFINE_ERROR(RunInterrupted);

// SUT-side failures. These are recorded per cell by the pipeline.
SMART_DEFINE_ERROR(SutError);
SMART_DEFINE_ERROR(SutUnreachable);

class Timeout : public SutError {
 public:
  using SutError::SutError;
};
class ProtocolError : public SutError {
 public:
  using SutError::SutError;
};
class SutCrashed : public SutError {
 public:
  using SutError::SutError;
};
class SutRejected : public SutError {
 public:
  using SutError::SutError;
};

#undef SMART_DEFINE_ERROR

}  // namespace smart
