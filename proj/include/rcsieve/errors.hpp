#pragma once

#include <stdexcept>
#include <string>

namespace rcsieve {

/// Base class for every error raised by the library. `kind()` is a stable,
/// machine-parsable identifier used by the command line front end.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define RCSIEVE_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name, what) {}   \
  };

RCSIEVE_DEFINE_ERROR(DomainError)
RCSIEVE_DEFINE_ERROR(EmptyInputError)
RCSIEVE_DEFINE_ERROR(DegenerateBasisError)
RCSIEVE_DEFINE_ERROR(ShapeError)
RCSIEVE_DEFINE_ERROR(DataError)
RCSIEVE_DEFINE_ERROR(CollinearityError)
RCSIEVE_DEFINE_ERROR(IdentificationError)
RCSIEVE_DEFINE_ERROR(SelectionError)
RCSIEVE_DEFINE_ERROR(BootstrapInstabilityError)
RCSIEVE_DEFINE_ERROR(WeakInstrumentError)
RCSIEVE_DEFINE_ERROR(DegenerateTruncationError)
RCSIEVE_DEFINE_ERROR(StudyFailureError)
RCSIEVE_DEFINE_ERROR(SchemaError)
RCSIEVE_DEFINE_ERROR(ParseError)
RCSIEVE_DEFINE_ERROR(ConfigError)

#undef RCSIEVE_DEFINE_ERROR

}  // namespace rcsieve
