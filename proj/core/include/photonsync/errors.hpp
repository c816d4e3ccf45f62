#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace photonsync {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PHOTONSYNC_DEFINE_ERROR(name) \
  class name : public Error {         \
   public:                            \
    using Error::Error;               \
  }

PHOTONSYNC_DEFINE_ERROR(ContiguityError);
PHOTONSYNC_DEFINE_ERROR(WindowError);
PHOTONSYNC_DEFINE_ERROR(FormatError);
PHOTONSYNC_DEFINE_ERROR(ClockModelError);
PHOTONSYNC_DEFINE_ERROR(ConfigError);
PHOTONSYNC_DEFINE_ERROR(BinBudgetError);
PHOTONSYNC_DEFINE_ERROR(NoSignalError);
PHOTONSYNC_DEFINE_ERROR(FitError);
PHOTONSYNC_DEFINE_ERROR(DomainError);
PHOTONSYNC_DEFINE_ERROR(AlignmentError);
PHOTONSYNC_DEFINE_ERROR(AcquisitionError);
PHOTONSYNC_DEFINE_ERROR(FineTuneError);

#undef PHOTONSYNC_DEFINE_ERROR

/// Raised when the transport fails. Carries the last index the peer
/// acknowledged, or -1 when nothing was acknowledged.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, std::int64_t last_acked)
      : Error(what), last_acked_(last_acked) {}

  std::int64_t last_acked() const noexcept { return last_acked_; }

 private:
  std::int64_t last_acked_;
};

}  // namespace photonsync
