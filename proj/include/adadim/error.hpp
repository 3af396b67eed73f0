#pragma once

#include <stdexcept>
#include <string>

namespace adadim {

enum class Errc {
  ShapeMismatch,
  InvalidArgument,
  Config,
  OutOfRange,
  Numeric,
  Io,
  BadMagic,
  BadVersion,
  BadHeader,
  UnsupportedDtype,
  FortranOrder,
  WrongNdim,
  Truncated,
  NonFinite,
};

inline const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ShapeMismatch: return "shape_mismatch";
    case Errc::InvalidArgument: return "invalid_argument";
    case Errc::Config: return "config";
    case Errc::OutOfRange: return "out_of_range";
    case Errc::Numeric: return "numeric";
    case Errc::Io: return "io";
    case Errc::BadMagic: return "bad_magic";
    case Errc::BadVersion: return "bad_version";
    case Errc::BadHeader: return "bad_header";
    case Errc::UnsupportedDtype: return "unsupported_dtype";
    case Errc::FortranOrder: return "fortran_order";
    case Errc::WrongNdim: return "wrong_ndim";
    case Errc::Truncated: return "truncated";
    case Errc::NonFinite: return "non_finite";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Process exit status for an error category: 1 config/input, 2 numeric, 3 I/O.
inline int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::ShapeMismatch:
    case Errc::InvalidArgument:
    case Errc::Config:
    case Errc::OutOfRange:
      return 1;
    case Errc::Numeric:
      return 2;
    default:
      return 3;
  }
}

}  // namespace adadim
